//! File formats: spectral data, problem specifications, reconstruction output.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::inverse::{Diagnostics, Reconstruction};
use crate::linalg::{CMat, HermitianMatrix, OrthogonalProjector, C64};
use crate::potential::{uniform_mesh, PotentialGrid};
use crate::problem::MatrixProblem;
use crate::spectral::{Provenance, RawEntry, RawSpectralData, SpectralDataSet};

pub const FORMAT_VERSION: u32 = 1;
/// Potential mesh used when a problem spec does not set `intervals`.
pub const DEFAULT_INTERVALS: usize = 512;

fn parse_err(what: &str, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{what}: {e}"))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| parse_err(&path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(&path.display().to_string(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| parse_err("serialize", e))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "format_version {v} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// Complex matrix as rows of `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(a: &CMat) -> JsonMatrix {
    (0..a.nrows())
        .map(|r| {
            (0..a.ncols())
                .map(|k| [a[(r, k)].re, a[(r, k)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, m: usize, what: &str) -> Result<CMat> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidDimension(format!("{what} must be {m}x{m}")));
    }
    Ok(CMat::from_fn(m, m, |r, k| {
        C64::new(rows[r][k][0], rows[r][k][1])
    }))
}

#[derive(Serialize, Deserialize)]
struct SpectralFile {
    format_version: u32,
    m: usize,
    #[serde(rename = "N")]
    n_max: usize,
    shift: f64,
    provenance: Provenance,
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    n: usize,
    k: usize,
    lambda: f64,
    alpha: JsonMatrix,
}

pub fn write_spectral(path: &Path, data: &SpectralDataSet) -> Result<()> {
    let raw = RawSpectralData::from_set(data);
    let file = SpectralFile {
        format_version: FORMAT_VERSION,
        m: raw.m,
        n_max: raw.n_max,
        shift: raw.shift,
        provenance: raw.provenance,
        entries: raw
            .entries
            .iter()
            .map(|e| EntryFile {
                n: e.n,
                k: e.k,
                lambda: e.lambda,
                alpha: matrix_to_json(&e.alpha),
            })
            .collect(),
    };
    write_json(path, &file)
}

/// Reads a spectral data file without the SD checks; see
/// [`RawSpectralData::validate`] and `check_sd`.
pub fn read_spectral(path: &Path) -> Result<RawSpectralData> {
    let file: SpectralFile = read_json(path)?;
    check_version(file.format_version)?;
    if file.m == 0 || file.n_max == 0 {
        return Err(Error::InvalidDimension("m and N must be positive".into()));
    }
    let entries = file
        .entries
        .iter()
        .map(|e| {
            Ok(RawEntry {
                n: e.n,
                k: e.k,
                lambda: e.lambda,
                alpha: matrix_from_json(&e.alpha, file.m, &format!("α at ({}, {})", e.n, e.k))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RawSpectralData {
        m: file.m,
        n_max: file.n_max,
        shift: file.shift,
        provenance: Provenance::Loaded,
        entries,
    })
}

/// A scalar function of `x ∈ [0, π]` in a problem spec: a number, a builtin
/// name (`zero`, `const:c`, `sin`, `cos`, `sin:k`, `cos:k`, `linear`,
/// `sawtooth`, optionally prefixed by a factor as in `0.5*cos:2`), or
/// `{"samples": [...]}` on the uniform potential mesh.
#[derive(Clone, Debug)]
pub enum Scalar {
    Builtin { factor: f64, name: String, arg: f64 },
    Samples(Vec<f64>),
}

impl Scalar {
    pub fn parse(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => Ok(Scalar::Builtin {
                factor: n.as_f64().unwrap_or(0.0),
                name: "one".into(),
                arg: 0.0,
            }),
            Value::String(s) => Self::parse_name(s),
            Value::Object(o) => match o.get("samples") {
                Some(Value::Array(a)) => a
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| Error::Parse("samples must be numbers".into()))
                    })
                    .collect::<Result<_>>()
                    .map(Scalar::Samples),
                _ => Err(Error::Parse(format!("unknown potential entry {v}"))),
            },
            _ => Err(Error::Parse(format!("unknown potential entry {v}"))),
        }
    }

    fn parse_name(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown builtin potential '{s}'"));
        let (factor, rest) = match s.split_once('*') {
            Some((f, r)) => (f.trim().parse::<f64>().map_err(|_| bad())?, r.trim()),
            None => (1.0, s.trim()),
        };
        let (name, arg) = match rest.split_once(':') {
            Some((n, a)) => (n, a.parse::<f64>().map_err(|_| bad())?),
            None => (
                rest,
                if rest == "sin" || rest == "cos" {
                    1.0
                } else {
                    0.0
                },
            ),
        };
        match name {
            "zero" | "const" | "sin" | "cos" | "linear" | "sawtooth" => Ok(Scalar::Builtin {
                factor,
                name: name.into(),
                arg,
            }),
            _ => Err(bad()),
        }
    }

    /// Value at mesh node `i` (coordinate `x`).
    fn eval(&self, i: usize, x: f64) -> f64 {
        match self {
            Scalar::Samples(v) => v[i],
            Scalar::Builtin { factor, name, arg } => {
                factor
                    * match name.as_str() {
                        "zero" => 0.0,
                        "one" => 1.0,
                        "const" => *arg,
                        "sin" => (arg * x).sin(),
                        "cos" => (arg * x).cos(),
                        "linear" => x - PI / 2.0,
                        // Mean-zero sawtooth with one jump at π/2.
                        "sawtooth" => (if x < PI / 2.0 { x } else { x - PI }) / PI,
                        _ => unreachable!(),
                    }
            }
        }
    }

    fn check_len(&self, nodes: usize) -> Result<()> {
        match self {
            Scalar::Samples(v) if v.len() != nodes => Err(Error::InvalidDimension(format!(
                "sampled potential has {} values, expected {nodes}",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(default = "one")]
    format_version: u32,
    kind: String,
    m: usize,
    #[serde(default)]
    intervals: Option<usize>,
    #[serde(default)]
    steps: Option<usize>,
    /// Graph: one scalar per edge.
    #[serde(default)]
    edges: Option<Vec<Value>>,
    /// General: `m × m` scalars, optionally with imaginary parts in `q_imag`.
    #[serde(default, rename = "Q")]
    q: Option<Vec<Vec<Value>>>,
    #[serde(default)]
    q_imag: Option<Vec<Vec<Value>>>,
    #[serde(default)]
    h: Option<f64>,
    #[serde(default, rename = "H")]
    big_h: Option<JsonMatrix>,
    #[serde(default, rename = "T")]
    t: Option<JsonMatrix>,
}

fn one() -> u32 {
    1
}

fn scalar_matrix(rows: &[Vec<Value>], m: usize, what: &str) -> Result<Vec<Vec<Scalar>>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidDimension(format!("{what} must be {m}x{m}")));
    }
    rows.iter()
        .map(|r| r.iter().map(Scalar::parse).collect())
        .collect()
}

/// Parses a problem specification (`kind` = `graph` or `general`).
pub fn parse_problem(value: &Value) -> Result<MatrixProblem> {
    let spec: ProblemFile =
        serde_json::from_value(value.clone()).map_err(|e| parse_err("problem spec", e))?;
    check_version(spec.format_version)?;
    let m = spec.m;
    if m == 0 {
        return Err(Error::InvalidDimension("m must be positive".into()));
    }
    let intervals = spec.intervals.unwrap_or(DEFAULT_INTERVALS);
    let mesh = uniform_mesh(intervals);
    let build = |entries: &dyn Fn(usize, usize, usize, f64) -> C64| -> Result<PotentialGrid> {
        let values = mesh
            .iter()
            .enumerate()
            .map(|(i, &x)| CMat::from_fn(m, m, |r, k| entries(r, k, i, x)))
            .collect();
        PotentialGrid::new(mesh.clone(), values)
    };
    let problem = match spec.kind.as_str() {
        "graph" => {
            let edges = spec
                .edges
                .as_ref()
                .ok_or_else(|| Error::Parse("graph spec needs 'edges'".into()))?;
            if edges.len() != m {
                return Err(Error::InvalidDimension(format!(
                    "graph spec lists {} edges for m = {m}",
                    edges.len()
                )));
            }
            if spec.q.is_some() || spec.big_h.is_some() || spec.t.is_some() {
                return Err(Error::Parse("graph spec takes 'edges' and 'h' only".into()));
            }
            let edges: Vec<Scalar> = edges.iter().map(Scalar::parse).collect::<Result<_>>()?;
            for e in &edges {
                e.check_len(mesh.len())?;
            }
            let grid = build(&|r, k, i, x| {
                if r == k {
                    C64::new(edges[r].eval(i, x), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })?;
            let h = spec.h.unwrap_or(0.0);
            match spec.steps {
                Some(s) => MatrixProblem::graph_with_steps(grid, h, s)?,
                None => MatrixProblem::graph(grid, h)?,
            }
        }
        "general" => {
            let q = scalar_matrix(
                spec.q
                    .as_ref()
                    .ok_or_else(|| Error::Parse("general spec needs 'Q'".into()))?,
                m,
                "Q",
            )?;
            let qi = match &spec.q_imag {
                Some(rows) => Some(scalar_matrix(rows, m, "q_imag")?),
                None => None,
            };
            for s in q.iter().chain(qi.iter().flatten()).flatten() {
                s.check_len(mesh.len())?;
            }
            let grid = build(&|r, k, i, x| {
                C64::new(
                    q[r][k].eval(i, x),
                    qi.as_ref().map_or(0.0, |qi| qi[r][k].eval(i, x)),
                )
            })?;
            let t = OrthogonalProjector::new(matrix_from_json(
                spec.t
                    .as_ref()
                    .ok_or_else(|| Error::Parse("general spec needs 'T'".into()))?,
                m,
                "T",
            )?)?;
            let h = match &spec.big_h {
                Some(rows) => HermitianMatrix::new(matrix_from_json(rows, m, "H")?)?,
                None => HermitianMatrix::zeros(m),
            };
            match spec.steps {
                Some(s) => {
                    MatrixProblem::with_steps(grid, t, h, crate::problem::ProblemKind::General, s)?
                }
                None => MatrixProblem::general(grid, t, h)?,
            }
        }
        other => return Err(Error::Parse(format!("unknown problem kind '{other}'"))),
    };
    Ok(problem)
}

pub fn read_problem(path: &Path) -> Result<MatrixProblem> {
    let v: Value = read_json(path)?;
    parse_problem(&v)
}

#[derive(Serialize)]
pub struct GraphJson {
    pub q: Vec<Vec<f64>>,
    pub h: f64,
    pub h_from_boundary: f64,
}

#[derive(Serialize)]
pub struct ReconstructionJson<'a> {
    pub format_version: u32,
    pub m: usize,
    #[serde(rename = "N")]
    pub n_max: usize,
    pub shift: f64,
    pub mesh: &'a [f64],
    #[serde(rename = "Q")]
    pub q: Vec<JsonMatrix>,
    #[serde(rename = "H")]
    pub h: JsonMatrix,
    pub epsilon0_pi: JsonMatrix,
    pub graph: Option<GraphJson>,
    pub diagnostics: &'a Diagnostics,
}

impl<'a> ReconstructionJson<'a> {
    pub fn new(rec: &'a Reconstruction, n_max: usize) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            m: rec.h.nrows(),
            n_max,
            shift: rec.shift,
            mesh: &rec.mesh,
            q: rec.q.iter().map(matrix_to_json).collect(),
            h: matrix_to_json(&rec.h),
            epsilon0_pi: matrix_to_json(&rec.epsilon0_pi),
            graph: rec.graph.as_ref().map(|g| GraphJson {
                q: g.q.clone(),
                h: g.h,
                h_from_boundary: g.h_from_boundary,
            }),
            diagnostics: &rec.diagnostics,
        }
    }
}

/// Writes a CSV table with a header row; numbers in shortest round-trip form.
pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(
            &row.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// `x, q_1, …, q_m` in the graph case, otherwise `x` and the real and
/// imaginary parts of the upper triangle of `Q`.
pub fn write_reconstruction_csv(path: &Path, rec: &Reconstruction) -> Result<()> {
    let m = rec.h.nrows();
    match &rec.graph {
        Some(g) => {
            let header = std::iter::once("x".to_string())
                .chain((1..=m).map(|j| format!("q_{j}")))
                .collect::<Vec<_>>();
            write_csv(
                path,
                &header,
                rec.mesh
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| std::iter::once(x).chain(g.q.iter().map(|q| q[i])).collect()),
            )
        }
        None => {
            let pairs: Vec<(usize, usize)> =
                (0..m).flat_map(|r| (r..m).map(move |k| (r, k))).collect();
            let header = std::iter::once("x".to_string())
                .chain(pairs.iter().flat_map(|(r, k)| {
                    [
                        format!("re_Q{}{}", r + 1, k + 1),
                        format!("im_Q{}{}", r + 1, k + 1),
                    ]
                }))
                .collect::<Vec<_>>();
            write_csv(
                path,
                &header,
                rec.mesh.iter().enumerate().map(|(i, &x)| {
                    std::iter::once(x)
                        .chain(
                            pairs
                                .iter()
                                .flat_map(|&(r, k)| [rec.q[i][(r, k)].re, rec.q[i][(r, k)].im]),
                        )
                        .collect()
                }),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::compute_spectral_data;
    use serde_json::json;

    #[test]
    fn builtin_names() {
        let v = |s: &str, x: f64| Scalar::parse(&json!(s)).unwrap().eval(0, x);
        assert_eq!(v("zero", 1.0), 0.0);
        assert_eq!(v("const:2.5", 1.0), 2.5);
        assert!((v("sin:2", 0.3) - 0.6f64.sin()).abs() < 1e-15);
        assert!((v("0.5*cos", 0.3) - 0.5 * 0.3f64.cos()).abs() < 1e-15);
        assert!((v("linear", PI) - PI / 2.0).abs() < 1e-15);
        assert_eq!(Scalar::parse(&json!(0.2)).unwrap().eval(0, 1.0), 0.2);
        assert!(Scalar::parse(&json!("tan")).is_err());
        assert!(Scalar::parse(&json!("2*sin:x")).is_err());
    }

    #[test]
    fn non_hermitian_h_is_rejected() {
        let spec = json!({"kind": "general", "m": 2, "Q": [["zero", 0.1], [0.1, "zero"]],
            "T": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]],
            "H": [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]});
        let err = parse_problem(&spec).unwrap_err();
        assert!(matches!(err, Error::NonHermitian(_)), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn graph_spec_and_sampled_edges() {
        let samples: Vec<f64> = uniform_mesh(64).iter().map(|x| x.sin()).collect();
        let spec = json!({"kind": "graph", "m": 2, "intervals": 64, "edges": [{"samples": samples}, "sin"], "h": 0.3});
        let p = parse_problem(&spec).unwrap();
        assert!(p.is_graph());
        assert!((p.edge_value(0, 1.0) - p.edge_value(1, 1.0)).abs() < 1e-12);
        let wrong = json!({"kind": "graph", "m": 2, "edges": [{"samples": [0.0, 1.0]}, "sin"]});
        assert!(matches!(
            parse_problem(&wrong),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            parse_problem(&json!({"kind": "graph", "m": 2, "edges": ["sin"], "bogus": 1})),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn spectral_file_roundtrip() {
        let spec = json!({"kind": "graph", "m": 2, "intervals": 64, "edges": ["zero", "zero"]});
        let data = compute_spectral_data(&parse_problem(&spec).unwrap(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        write_spectral(&path, &data).unwrap();
        let back = read_spectral(&path).unwrap().validate().unwrap();
        for (a, b) in data.entries().iter().zip(back.entries()) {
            assert_eq!(a.lambda, b.lambda);
            assert_eq!(a.alpha.matrix(), b.alpha.matrix());
        }
        assert_eq!(back.provenance(), Provenance::Loaded);
    }
}

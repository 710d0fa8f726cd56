//! The `gsturm` commands: configuration, pipeline drivers, reports.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asymptotics::{
    check_asymptotics, check_sd, check_theorem31, coefficients_from_problem,
    completeness_surrogate, fit_coefficients, residuals, AsymptoticCoefficients, CheckItem,
    CheckReport, ResidualReport, SurrogateReport,
};
use crate::error::{Error, Result};
use crate::grouping::build_groups;
use crate::inverse::{
    build_model, reconstruct, Reconstruction, ReconstructionOptions, DEFAULT_MESH_POINTS,
    DIAGONALITY_TOL,
};
use crate::io::{self, ReconstructionJson, FORMAT_VERSION};
use crate::linalg::CMat;
use crate::problem::MatrixProblem;
use crate::spectral::{compute_spectral_data, RawSpectralData, SpectralDataSet};
use crate::stability::{ratio_spread, stability_sweep, StabilityRow};

#[derive(Parser, Debug)]
#[command(
    name = "gsturm",
    version,
    about = "Matrix Sturm-Liouville and star-graph spectral problems, forward and inverse"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Eigenvalues and weight matrices of a problem.
    Forward(Paths),
    /// Reconstruct Q and H from a spectral data file.
    Inverse(Paths),
    /// Forward at N and 2N, inverse on both, compare with the truth.
    Roundtrip(Paths),
    /// Perturb one eigenvalue of the model data and compare errors with Ξ.
    Stability(Paths),
    /// Run the characterization checks on a spectral data file.
    Validate(Paths),
}

#[derive(clap::Args, Debug, Clone, PartialEq, Eq)]
pub struct Paths {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Problem spec inline or as a path relative to the config file.
#[derive(Deserialize, Debug, Clone)]
#[serde(untagged)]
pub enum ProblemRef {
    Path(PathBuf),
    Inline(Value),
}

#[derive(Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Graph,
    General,
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_diag")]
    pub diagonality: f64,
    #[serde(default = "default_proj")]
    pub projectors: f64,
}

fn default_diag() -> f64 {
    DIAGONALITY_TOL
}

fn default_proj() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            diagonality: default_diag(),
            projectors: default_proj(),
        }
    }
}

fn yes() -> bool {
    true
}

fn version() -> u32 {
    FORMAT_VERSION
}

#[derive(Deserialize, Debug, Clone)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "version")]
    pub format_version: u32,
    pub problem: Option<ProblemRef>,
    pub data: Option<PathBuf>,
    #[serde(rename = "N")]
    pub n_max: Option<usize>,
    pub mode: Option<Mode>,
    pub mesh_points: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "yes")]
    pub tail_correction: bool,
    /// Entry `(n, k)` perturbed by the stability sweep.
    pub entry: Option<(usize, usize)>,
    pub deltas: Option<Vec<f64>>,
    pub surrogate_mesh: Option<usize>,
    #[serde(skip)]
    base: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = io::read_json(path)?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_value(v: Value, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            serde_json::from_value(v).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.base = base.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "config format_version {} is not supported",
                self.format_version
            )));
        }
        if self.n_max == Some(0) {
            return Err(Error::Parse("N must be at least 1".into()));
        }
        if !(self.tolerances.diagonality > 0.0 && self.tolerances.projectors > 0.0) {
            return Err(Error::Parse("tolerances must be positive".into()));
        }
        if self.mesh_points.is_some_and(|n| n < 3) {
            return Err(Error::Parse("mesh_points must be at least 3".into()));
        }
        for p in self.data.iter().chain(match &self.problem {
            Some(ProblemRef::Path(p)) => Some(p),
            _ => None,
        }) {
            if !self.resolve(p).exists() {
                return Err(Error::Parse(format!(
                    "{} does not exist",
                    self.resolve(p).display()
                )));
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn problem(&self) -> Result<MatrixProblem> {
        match &self.problem {
            Some(ProblemRef::Path(p)) => io::read_problem(&self.resolve(p)),
            Some(ProblemRef::Inline(v)) => io::parse_problem(v),
            None => Err(Error::Parse("config needs 'problem'".into())),
        }
    }

    fn n_max(&self) -> Result<usize> {
        self.n_max
            .ok_or_else(|| Error::Parse("config needs 'N'".into()))
    }

    fn data(&self) -> Result<RawSpectralData> {
        let p = self
            .data
            .as_ref()
            .ok_or_else(|| Error::Parse("config needs 'data'".into()))?;
        io::read_spectral(&self.resolve(p))
    }

    pub fn reconstruction_options(&self) -> ReconstructionOptions {
        ReconstructionOptions {
            mesh_points: self.mesh_points.unwrap_or(DEFAULT_MESH_POINTS),
            diagonality_tol: self.tolerances.diagonality,
            tail_correction: self.tail_correction,
        }
    }
}

/// What a command produced: files written and a short summary for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn json<T: Serialize>(&mut self, out: &Path, name: &str, value: &T) -> Result<()> {
        let p = out.join(name);
        io::write_json(&p, value)?;
        self.files.push(p);
        Ok(())
    }
}

#[derive(Serialize)]
struct ForwardReport<'a> {
    format_version: u32,
    m: usize,
    #[serde(rename = "N")]
    n_max: usize,
    checks: &'a CheckReport,
    residuals: Option<&'a ResidualReport>,
}

pub fn cmd_forward(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let n = cfg.n_max()?;
    let data = compute_spectral_data(&problem, n)?;
    let mut checks = check_sd(&RawSpectralData::from_set(&data));
    let res = coefficients_from_problem(&problem)
        .map(|co| residuals(&data, &co))
        .ok();
    if let Some(r) = &res {
        checks.extend(check_asymptotics(r));
    }
    let mut o = Outcome::default();
    let p = out.join("spectral.json");
    io::write_spectral(&p, &data)?;
    o.files.push(p);
    o.json(
        out,
        "forward_report.json",
        &ForwardReport {
            format_version: FORMAT_VERSION,
            m: data.m(),
            n_max: n,
            checks: &checks,
            residuals: res.as_ref(),
        },
    )?;
    o.summary.push(format!(
        "m = {}, N = {n}, {} eigenvalues",
        data.m(),
        data.entries().len()
    ));
    o.summary.push(format!(
        "checks: {}",
        if checks.passed() {
            "all passed".to_string()
        } else {
            format!("failed {}", checks.failed_names().join(", "))
        }
    ));
    Ok(o)
}

/// Data checked against the SD class; a failure is an SD violation.
fn checked_data(raw: &RawSpectralData) -> Result<SpectralDataSet> {
    let sd = check_sd(raw);
    if !sd.passed() {
        let detail: Vec<String> = sd
            .items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| format!("{} ({})", i.name, i.detail))
            .collect();
        return Err(Error::SdViolation(detail.join("; ")));
    }
    raw.validate()
}

fn xi_line(
    data: &SpectralDataSet,
    model_data: &SpectralDataSet,
    coeffs: &AsymptoticCoefficients,
) -> (Option<f64>, String) {
    match build_groups(data, model_data, coeffs.p(), &coeffs.z) {
        Ok(g) => (
            Some(g.xi_total),
            format!("Ξ = {:.6e} (n₀ = {})", g.xi_total, g.n0),
        ),
        Err(e) => (None, format!("Ξ unavailable: {e}")),
    }
}

fn diagnostics_line(rec: &Reconstruction) -> String {
    let d = &rec.diagnostics;
    format!(
        "condition_max = {:.3e}, residual_max = {:.3e}, herm_residual = {:.3e}, offdiag_residual = {:.3e}, offdiag_solution = {:.3e}",
        d.condition_max, d.residual_max, d.herm_residual, d.offdiag_residual, d.offdiag_solution
    )
}

fn write_reconstruction(
    o: &mut Outcome,
    out: &Path,
    stem: &str,
    rec: &Reconstruction,
    n: usize,
) -> Result<()> {
    o.json(
        out,
        &format!("{stem}.json"),
        &ReconstructionJson::new(rec, n),
    )?;
    let p = out.join(format!("{stem}.csv"));
    io::write_reconstruction_csv(&p, rec)?;
    o.files.push(p);
    Ok(())
}

pub fn cmd_inverse(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let data = checked_data(&cfg.data()?)?;
    let graph = cfg.mode.unwrap_or(Mode::General) == Mode::Graph;
    let coeffs = fit_coefficients(&data, graph)?;
    let model = build_model(&coeffs, graph)?;
    let model_data = model
        .spectral_data(data.n_max())?
        .with_shift_label(data.shift());
    let (_, xi) = xi_line(&data, &model_data, &coeffs);
    let rec = reconstruct(&data, &model, &model_data, &cfg.reconstruction_options())?;
    let mut o = Outcome::default();
    write_reconstruction(&mut o, out, "reconstruction", &rec, data.n_max())?;
    o.summary.push(xi);
    o.summary.push(diagnostics_line(&rec));
    if let Some(g) = &rec.graph {
        o.summary
            .push(format!("h = {:.6} (from H: {:.6})", g.h, g.h_from_boundary));
    }
    Ok(o)
}

#[derive(Serialize)]
struct RoundtripLevel {
    #[serde(rename = "N")]
    n_max: usize,
    q_error: f64,
    h_error: f64,
    edge_errors: Option<Vec<f64>>,
    h_graph_error: Option<f64>,
    xi: Option<f64>,
    herm_residual: f64,
    offdiag_solution: f64,
    condition_max: f64,
}

#[derive(Serialize)]
struct RoundtripReport {
    format_version: u32,
    levels: Vec<RoundtripLevel>,
    /// `error(2N) / error(N)` of `‖Q_rec − Q‖_{L₂}`.
    ratio: f64,
}

pub fn cmd_roundtrip(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let n = cfg.n_max()?;
    let graph = problem.is_graph();
    // The levels N ≤ 2N share their eigenvalues, so one forward solve serves both.
    let full = compute_spectral_data(&problem, 2 * n)?;
    let coeffs = coefficients_from_problem(&problem)?;
    let model = build_model(&coeffs, graph)?;
    let model_full = model.spectral_data(2 * n)?;
    let opts = cfg.reconstruction_options();
    let truth = |x: f64| problem.potential_at(x);
    let mut levels = Vec::new();
    let mut recs = Vec::new();
    for level in [n, 2 * n] {
        let data = full.truncated(level)?;
        let model_data = model_full.truncated(level)?;
        let (xi, _) = xi_line(&data, &model_data, &coeffs);
        let rec = reconstruct(&data, &model, &model_data, &opts)?;
        let edge_errors = rec.edge_errors(|j, x| problem.edge_value(j, x));
        levels.push(RoundtripLevel {
            n_max: level,
            q_error: rec.l2_error_against(truth),
            h_error: (&rec.h - problem.boundary_matrix().matrix()).norm(),
            edge_errors,
            h_graph_error: match (problem.kind(), &rec.graph) {
                (crate::problem::ProblemKind::Graph { h }, Some(g)) => {
                    Some((g.h_from_boundary - h).abs())
                }
                _ => None,
            },
            xi,
            herm_residual: rec.diagnostics.herm_residual,
            offdiag_solution: rec.diagnostics.offdiag_solution,
            condition_max: rec.diagnostics.condition_max,
        });
        recs.push(rec);
    }
    let report = RoundtripReport {
        format_version: FORMAT_VERSION,
        ratio: levels[1].q_error / levels[0].q_error,
        levels,
    };
    let mut o = Outcome::default();
    o.json(out, "roundtrip.json", &report)?;
    let mesh = &recs[0].mesh;
    let m = problem.dim();
    let p = out.join("roundtrip.csv");
    let (header, rows): (Vec<String>, Vec<Vec<f64>>) = if graph {
        let mut h = vec!["x".to_string()];
        for j in 1..=m {
            h.extend([
                format!("q_{j}_true"),
                format!("q_{j}_N{n}"),
                format!("q_{j}_N{}", 2 * n),
            ]);
        }
        let rows = mesh
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut r = vec![x];
                for j in 0..m {
                    r.extend([
                        problem.edge_value(j, x),
                        recs[0].graph.as_ref().unwrap().q[j][i],
                        recs[1].graph.as_ref().unwrap().q[j][i],
                    ]);
                }
                r
            })
            .collect();
        (h, rows)
    } else {
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|r| (r..m).map(move |k| (r, k))).collect();
        let mut h = vec!["x".to_string()];
        for (r, k) in &pairs {
            h.extend([
                format!("re_Q{}{}_true", r + 1, k + 1),
                format!("re_Q{}{}_N{n}", r + 1, k + 1),
                format!("re_Q{}{}_N{}", r + 1, k + 1, 2 * n),
            ]);
        }
        let rows = mesh
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let t: CMat = truth(x);
                let mut row = vec![x];
                for &(r, k) in &pairs {
                    row.extend([
                        t[(r, k)].re,
                        recs[0].q[i][(r, k)].re,
                        recs[1].q[i][(r, k)].re,
                    ]);
                }
                row
            })
            .collect();
        (h, rows)
    };
    io::write_csv(&p, &header, rows.into_iter())?;
    o.files.push(p);
    for l in &report.levels {
        let edges = l
            .edge_errors
            .as_ref()
            .map(|e| {
                format!(
                    ", edge errors {:?}",
                    e.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
                )
            })
            .unwrap_or_default();
        o.summary.push(format!(
            "N = {}: ‖Q − Q_rec‖ = {:.3e}, ‖H − H_rec‖ = {:.3e}{edges}, herm_residual = {:.3e}",
            l.n_max, l.q_error, l.h_error, l.herm_residual
        ));
    }
    o.summary
        .push(format!("error ratio 2N/N = {:.3}", report.ratio));
    Ok(o)
}

#[derive(Serialize)]
struct StabilityReport<'a> {
    format_version: u32,
    entry: (usize, usize),
    rows: &'a [StabilityRow],
    ratio_spread: Option<f64>,
}

pub fn cmd_stability(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let n = cfg.n_max()?;
    let coeffs = coefficients_from_problem(&problem)?;
    let model = build_model(&coeffs, problem.is_graph())?;
    let model_data = model.spectral_data(n)?;
    let entry = cfg.entry.unwrap_or((1, 1));
    let deltas = cfg.deltas.clone().unwrap_or_else(|| vec![0.0, 1e-3, 1e-2]);
    let rows = stability_sweep(
        &model,
        &coeffs,
        &model_data,
        entry,
        &deltas,
        &cfg.reconstruction_options(),
    )?;
    let spread = ratio_spread(&rows);
    let mut o = Outcome::default();
    o.json(
        out,
        "stability.json",
        &StabilityReport {
            format_version: FORMAT_VERSION,
            entry,
            rows: &rows,
            ratio_spread: spread,
        },
    )?;
    let p = out.join("stability.csv");
    let header = ["delta", "xi", "q_error", "h_error", "ratio"].map(String::from);
    io::write_csv(
        &p,
        &header,
        rows.iter().map(|r| {
            vec![
                r.delta,
                r.xi,
                r.q_error,
                r.h_error,
                r.ratio.unwrap_or(f64::NAN),
            ]
        }),
    )?;
    o.files.push(p);
    for r in &rows {
        o.summary.push(format!(
            "δ = {:e}: Ξ = {:.4e}, ‖Q − Q̃‖ = {:.4e}, ratio = {}",
            r.delta,
            r.xi,
            r.q_error,
            r.ratio.map_or("-".into(), |v| format!("{v:.4}"))
        ));
    }
    if let Some(s) = spread {
        o.summary.push(format!("ratio spread = {s:.3}"));
    }
    Ok(o)
}

#[derive(Serialize)]
struct ValidationReport {
    format_version: u32,
    passed: bool,
    checks: CheckReport,
    residuals: Option<ResidualReport>,
    surrogate: Option<SurrogateReport>,
}

/// Runs every check that applies and collects the results; only I/O and
/// parse failures are errors.
pub fn validate_raw(
    raw: &RawSpectralData,
    graph: bool,
    tol: f64,
    surrogate_mesh: usize,
) -> (CheckReport, Option<ResidualReport>, Option<SurrogateReport>) {
    let mut checks = check_sd(raw);
    if !checks.passed() {
        return (checks, None, None);
    }
    let data = match raw.validate() {
        Ok(d) => d,
        Err(e) => {
            checks.items.push(CheckItem {
                name: "sd.construct".into(),
                passed: false,
                detail: e.to_string(),
                offending: Vec::new(),
            });
            return (checks, None, None);
        }
    };
    let surrogate = completeness_surrogate(&data, surrogate_mesh);
    checks.items.push(CheckItem {
        name: "completeness.surrogate".into(),
        passed: surrogate.no_finite_obstruction,
        detail: format!(
            "σ_min = {:.3e} (threshold {:.1e})",
            surrogate.smallest_singular_value, surrogate.threshold
        ),
        offending: Vec::new(),
    });
    let res = match fit_coefficients(&data, graph) {
        Ok(coeffs) => {
            let r = residuals(&data, &coeffs);
            checks.extend(check_asymptotics(&r));
            checks.extend(check_theorem31(&coeffs, tol));
            Some(r)
        }
        Err(e) => {
            checks.items.push(CheckItem {
                name: "asymptotics.fit".into(),
                passed: false,
                detail: e.to_string(),
                offending: Vec::new(),
            });
            None
        }
    };
    (checks, res, Some(surrogate))
}

/// Default `t`-mesh of the completeness surrogate.
pub const SURROGATE_MESH: usize = 400;

pub fn cmd_validate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let raw = cfg.data()?;
    let graph = cfg.mode.unwrap_or(Mode::General) == Mode::Graph;
    let (checks, residuals, surrogate) = validate_raw(
        &raw,
        graph,
        cfg.tolerances.projectors,
        cfg.surrogate_mesh.unwrap_or(SURROGATE_MESH),
    );
    let mut o = Outcome::default();
    for i in &checks.items {
        o.summary.push(format!(
            "{:<5} {:<32} {}",
            if i.passed { "pass" } else { "FAIL" },
            i.name,
            i.detail
        ));
    }
    let report = ValidationReport {
        format_version: FORMAT_VERSION,
        passed: checks.passed(),
        checks,
        residuals,
        surrogate,
    };
    o.json(out, "validation.json", &report)?;
    Ok(o)
}

/// Loads the config, creates the output directory and runs one command.
pub fn run(command: &Command) -> Result<Outcome> {
    let paths = match command {
        Command::Forward(p)
        | Command::Inverse(p)
        | Command::Roundtrip(p)
        | Command::Stability(p)
        | Command::Validate(p) => p,
    };
    let cfg = RunConfig::load(&paths.config)?;
    let out = paths.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out)?;
    match command {
        Command::Forward(_) => cmd_forward(&cfg, &out),
        Command::Inverse(_) => cmd_inverse(&cfg, &out),
        Command::Roundtrip(_) => cmd_roundtrip(&cfg, &out),
        Command::Stability(_) => cmd_stability(&cfg, &out),
        Command::Validate(_) => cmd_validate(&cfg, &out),
    }
}

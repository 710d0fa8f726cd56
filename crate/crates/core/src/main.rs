use clap::Parser;
use gsturm::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("GSTURM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("GSTURM_THREADS ignored: {e}");
        }
    }
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("gsturm: error[{}]: {msg}", e.tag());
            std::process::exit(e.exit_code());
        }
    }
}

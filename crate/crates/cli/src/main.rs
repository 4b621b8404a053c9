use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsfda_cli::ingest::{ingest, write_long_csv, GroupedDataset, IngestOptions};
use dsfda_cli::run::{self, RunReport};
use dsfda_cli::RunConfig;

#[derive(Parser)]
#[command(name = "dsfda", version, about = "Confidence bands for the difference of a dense and a sparse functional mean")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write it in the input CSV schema.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output CSV (default: <output-dir>/simulated.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bands for delta and the centered difference, per group.
    Band(Common),
    /// Coverage and power table over simulated replications.
    Montecarlo(Common),
    /// Lag-0 and long-run kernel estimates, per group.
    Kernels(Common),
    /// Cross-validation score traces, per group.
    CvTrace(Common),
}

/// Every config field can be set here; `--set` reaches nested fields.
#[derive(Args)]
struct Common {
    /// JSON or TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV (sample,group,curve_id,time,value); repeatable.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    /// Original time domain as LO,HI.
    #[arg(long, value_delimiter = ',')]
    domain: Option<Vec<f64>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// fixed | cv
    #[arg(long)]
    bandwidth_mode: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    h_dense: Option<f64>,
    #[arg(long)]
    kernel_h: Option<f64>,
    #[arg(long)]
    kernel_h_dense: Option<f64>,
    #[arg(long)]
    lag_factor: Option<f64>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    degree_dense: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n_boot: Option<usize>,
    /// kappa1 | kappa2 | iid_gaussian | rademacher
    #[arg(long)]
    multiplier: Option<String>,
    /// unit_variance | std_dev | variance
    #[arg(long)]
    base_scale: Option<String>,
    /// sample_mean | as_fitted
    #[arg(long)]
    centering: Option<String>,
    /// pooled | sparse_only
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    max_lag: Option<usize>,
    #[arg(long)]
    max_lag_dense: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    gap: Option<usize>,
    #[arg(long)]
    n_candidates: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    candidates_dense: Option<Vec<f64>>,
    #[arg(long)]
    eval_points: Option<usize>,
    #[arg(long)]
    flip_sign: bool,
    /// Monte-Carlo replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Monte-Carlo sparse sample sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Arbitrary override KEY=VALUE, e.g. scenario.ou.rho_b=0; repeatable.
    #[arg(long = "set", value_parser = parse_key_value)]
    set: Vec<(String, String)>,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain values serialize")
}

impl Common {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut o: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("inputs", (!self.inputs.is_empty()).then(|| json(&self.inputs)));
        put("domain", self.domain.as_ref().map(json));
        put("output_dir", self.output_dir.as_ref().map(json));
        put("seed", self.seed.map(|v| v.to_string()));
        put("bandwidth_mode", self.bandwidth_mode.clone());
        put("h", self.h.map(|v| v.to_string()));
        put("h_dense", self.h_dense.map(|v| v.to_string()));
        put("kernel_h", self.kernel_h.map(|v| v.to_string()));
        put("kernel_h_dense", self.kernel_h_dense.map(|v| v.to_string()));
        put("lag_factor", self.lag_factor.map(|v| v.to_string()));
        put("degree", self.degree.map(|v| v.to_string()));
        put("degree_dense", self.degree_dense.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("n_boot", self.n_boot.map(|v| v.to_string()));
        put("multiplier", self.multiplier.clone());
        put("base_scale", self.base_scale.clone());
        put("centering", self.centering.clone());
        put("regime", self.regime.clone());
        put("max_lag", self.max_lag.map(|v| v.to_string()));
        put("max_lag_dense", self.max_lag_dense.map(|v| v.to_string()));
        put("folds", self.folds.map(|v| v.to_string()));
        put("gap", self.gap.map(|v| v.to_string()));
        put("n_candidates", self.n_candidates.map(|v| v.to_string()));
        put("candidates", self.candidates.as_ref().map(json));
        put("candidates_dense", self.candidates_dense.as_ref().map(json));
        put("eval_points", self.eval_points.map(|v| v.to_string()));
        put("flip_sign", self.flip_sign.then(|| "true".to_string()));
        put("montecarlo.reps", self.reps.map(|v| v.to_string()));
        put("montecarlo.sizes", self.sizes.as_ref().map(json));
        o.extend(self.set.iter().cloned());
        o
    }

    fn resolve(&self) -> Result<RunConfig, String> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| e.to_string())?,
            None => RunConfig::default(),
        };
        let cfg = base.with_overrides(&self.overrides()).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

fn load_data(cfg: &RunConfig) -> Result<GroupedDataset, String> {
    ingest(&cfg.inputs, &IngestOptions { domain: cfg.domain }).map_err(|e| e.to_string())
}

fn report(r: RunReport) -> ExitCode {
    for g in &r.groups {
        match &g.error {
            None => println!("{}: ok", g.group),
            Some(e) => eprintln!("{}: failed: {e}", g.group),
        }
    }
    if r.all_ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn execute(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Simulate { common, out } => {
            let cfg = common.resolve()?;
            let scenario = run::simulate(&cfg).map_err(|e| e.to_string())?;
            let data = GroupedDataset::from_scenario(&scenario, &cfg.scenario.group);
            let path = out.unwrap_or_else(|| cfg.output_dir.join("simulated.csv"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            }
            let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            write_long_csv(&data, std::io::BufWriter::new(file)).map_err(|e| e.to_string())?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Band(common) => {
            let cfg = common.resolve()?;
            let data = load_data(&cfg)?;
            let (r, _) = run::run_band(&cfg, &data).map_err(|e| e.to_string())?;
            Ok(report(r))
        }
        Command::Kernels(common) => {
            let cfg = common.resolve()?;
            let data = load_data(&cfg)?;
            Ok(report(run::run_kernels(&cfg, &data).map_err(|e| e.to_string())?))
        }
        Command::CvTrace(common) => {
            let cfg = common.resolve()?;
            let data = load_data(&cfg)?;
            Ok(report(run::run_cv_trace(&cfg, &data).map_err(|e| e.to_string())?))
        }
        Command::Montecarlo(common) => {
            if common.seed.is_none() {
                return Err("montecarlo requires --seed".into());
            }
            let cfg = common.resolve()?;
            let rows = run::run_montecarlo(&cfg).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&cfg.output_dir).map_err(|e| e.to_string())?;
            let path = cfg.output_dir.join("montecarlo.csv");
            let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            run::write_montecarlo_csv(&rows, file).map_err(|e| e.to_string())?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

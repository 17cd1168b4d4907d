use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evstp::config::PipelineConfig;
use evstp::pipeline::Extremes;
use evstp::report::{self, Predictor};
use evstp::workflow;
use evstp::{Error, Result};
use evstp_core::spatial_nn::FeatureSubset;

/// Hourly EV fleet energy prediction over a grid of city regions.
#[derive(Parser)]
#[command(name = "evstp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic fleet's GPS records to OUT/trajectories.csv.
    Generate(Common),
    /// Run training, combination, online prediction, and evaluation.
    Run {
        #[command(flatten)]
        common: Common,
        /// Feature sets of the spatial predictor, e.g. "F_D,F_N,F_E".
        #[arg(long)]
        subset: Option<String>,
        /// Prediction horizon in hours.
        #[arg(long)]
        delta_t: Option<usize>,
        /// Keep the spatial predictors fixed during the test day.
        #[arg(long)]
        no_hourly_retraining: bool,
    },
    /// Run the experiment once per feature subset (default: the six standard ones).
    Ablate {
        #[command(flatten)]
        common: Common,
        /// A feature subset to include; repeat for several.
        #[arg(long)]
        subset: Vec<String>,
        #[arg(long)]
        delta_t: Option<usize>,
    },
    /// Write one hour of predictions as a region grid.
    ExportHeatmap {
        #[command(flatten)]
        common: Common,
        /// Hour of day, 1..=24.
        #[arg(long)]
        hour: u8,
        /// SP, TP or STP.
        #[arg(long, default_value = "STP")]
        predictor: String,
        /// Records file; defaults to OUT/records.csv.
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML). Without it the default synthetic setup is used
    /// and --seed is required.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = match (&self.config, self.seed) {
            (Some(path), _) => PipelineConfig::load(path)?,
            (None, Some(seed)) => PipelineConfig::synthetic(seed),
            (None, None) => return Err(Error::Config(String::from("pass --config or --seed"))),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn fmt_extremes(e: Option<Extremes>) -> String {
    e.map_or_else(|| String::from("-"), |e| format!("ave {:.4}  min {:.4}  max {:.4}", e.ave, e.min, e.max))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(common) => {
            let cfg = common.load()?;
            let path = cfg.out_dir.join(workflow::TRAJECTORY_FILE);
            let n = workflow::generate(&cfg, &path)?;
            println!("wrote {n} records to {}", path.display());
        }
        Command::Run { common, subset, delta_t, no_hourly_retraining } => {
            let mut cfg = common.load()?;
            if let Some(s) = subset {
                cfg.spatial.subset = s;
            }
            if let Some(dt) = delta_t {
                cfg.spatial.delta_t = dt;
            }
            if no_hourly_retraining {
                cfg.spatial.hourly_retraining = false;
            }
            let out = workflow::run(&cfg)?;
            workflow::write_run(&cfg.out_dir, &cfg, &out)?;
            let ev = &out.experiment.evaluation;
            println!("lambda* {:.6}", out.experiment.lambda.lambda_star);
            println!("SP   {}", fmt_extremes(ev.sp));
            println!("TP   {}", fmt_extremes(ev.tp));
            println!("STP  {}", fmt_extremes(ev.stp));
            if !ev.excluded_regions.is_empty() {
                let ids: Vec<String> = ev.excluded_regions.iter().map(|r| r.to_string()).collect();
                println!("excluded (zero truth): {}", ids.join(", "));
            }
            println!("artifacts in {}", cfg.out_dir.display());
        }
        Command::Ablate { common, subset, delta_t } => {
            let mut cfg = common.load()?;
            if let Some(dt) = delta_t {
                cfg.spatial.delta_t = dt;
            }
            let subsets = if subset.is_empty() {
                FeatureSubset::ablation_subsets()
            } else {
                subset.iter().map(|s| FeatureSubset::parse(s)).collect::<std::result::Result<Vec<_>, _>>()?
            };
            let ablation = workflow::ablate(&cfg, &subsets)?;
            workflow::write_ablation(&cfg.out_dir, &ablation)?;
            print!("{}", report::ablation_table(&ablation));
        }
        Command::ExportHeatmap { common, hour, predictor, records } => {
            let cfg = common.load()?;
            let predictor: Predictor = predictor.parse()?;
            let records = records.unwrap_or_else(|| cfg.out_dir.join(workflow::RECORDS_FILE));
            let map = workflow::export_heatmap(&cfg, &records, hour, predictor)?;
            let path = cfg.out_dir.join(workflow::heatmap_file_name(hour, predictor));
            report::write_file(&path, map.to_text().as_bytes())?;
            print!("{}", map.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gwshm::cli::{self, parse_method, RunConfig};
use gwshm::stats::{CovarianceSource, RiskSpec};
use gwshm::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "gwshm", version, about = "AR-model damage diagnosis for guided-wave SHM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured ensemble to ensemble.csv.
    Simulate(Overrides),
    /// Select the model order and fit AR models to every record.
    Identify(Overrides),
    /// Build the state library and run detection and identification.
    Diagnose(Overrides),
    /// ROC curves of the detection statistic.
    Roc(Overrides),
    /// Damage-index evolution per path.
    Di(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// standard | svd:<m> | pca:<pct>% | pca:<m> | indices:<i>,<j>,… (repeatable).
    #[arg(long)]
    method: Vec<String>,
    #[arg(long, conflicts_with = "manual_threshold")]
    alpha: Option<f64>,
    #[arg(long)]
    manual_threshold: Option<f64>,
    /// Fixed AR order.
    #[arg(long)]
    order: Option<usize>,
    /// experimental | theoretical
    #[arg(long)]
    covariance: Option<String>,
}

impl Overrides {
    fn apply(&self) -> gwshm::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if !self.method.is_empty() {
            cfg.methods = self.method.iter().map(|m| parse_method(m)).collect::<gwshm::Result<_>>()?;
        }
        if let Some(a) = self.alpha {
            cfg.risk = RiskSpec::Alpha(a);
        }
        if let Some(t) = self.manual_threshold {
            cfg.risk = RiskSpec::Manual(t);
        }
        if let Some(o) = self.order {
            cfg.order.fixed = Some(o);
        }
        if let Some(c) = &self.covariance {
            cfg.covariance = match c.as_str() {
                "experimental" => CovarianceSource::Experimental,
                "theoretical" => CovarianceSource::Theoretical,
                other => return Err(Error::Config(format!("unknown covariance `{other}`"))),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> gwshm::Result<()> {
    match command {
        Command::Simulate(o) => {
            let path = cli::cmd_simulate(&o.apply()?)?;
            println!("wrote {}", path.display());
        }
        Command::Identify(o) => {
            let report = cli::cmd_identify(&o.apply()?)?;
            for p in &report.paths {
                println!(
                    "{}: order {} ({} models, {} white, {} normal)",
                    p.path_id, p.final_order, p.models, p.whiteness_pass, p.normality_pass
                );
            }
        }
        Command::Diagnose(o) => {
            let report = cli::cmd_diagnose(&o.apply()?)?;
            for p in &report.paths {
                for m in &p.methods {
                    let missed: Vec<String> =
                        m.table.missed_per_state.iter().map(|s| format!("{}={}", s.state, s.missed)).collect();
                    println!(
                        "{} {} d={}: false alarms {}, missed {}",
                        p.path_id,
                        m.tag,
                        m.dof,
                        m.table.false_alarms,
                        missed.join(" ")
                    );
                }
            }
        }
        Command::Roc(o) => {
            for s in cli::cmd_roc(&o.apply()?)? {
                println!("{} {}: AUC {:.4} -> {}", s.path_id, s.method, s.auc, s.file);
            }
        }
        Command::Di(o) => {
            for f in cli::cmd_di(&o.apply()?)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            })
        }
    }
}

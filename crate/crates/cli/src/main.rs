use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use kea::harness::{
    aggregate, curve_svg, heatmaps, read_metrics, resolve_out_dir, run_experiment, write_rows, Checkpoint,
    CurvePoint, ExperimentConfig,
};
use kea::oracle::{eta_trace, k_star, simulate_crossover, Crossover, CrossoverParams};

#[derive(Parser)]
#[command(name = "kea", version, about = "Two-agent exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a configuration and write metrics, checkpoints and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's out_dir, then $KEA_OUT_DIR/<config name>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-seed mean and std of metrics files or run directories.
    Aggregate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learning curve with a ±1 std band from a metrics or aggregate CSV.
    Plot {
        csv: PathBuf,
        /// Defaults to the CSV path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "mean episodic return")]
        title: String,
    },
    /// Intrinsic-reward and entropy maps from a navigation checkpoint.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the checkpoint's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Closed-form and simulated crossover step of the three-state example, as CSV.
    Oracle {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        max_k: u64,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            let label = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
            let dir = resolve_out_dir(out.as_deref(), &cfg, label);
            let manifest = run_experiment(&cfg, &dir)?;
            for r in &manifest.runs {
                println!("seed {} final return {:.4} -> {}", r.seed, r.final_return, r.metrics.display());
            }
            println!("manifest {}", dir.join("manifest.json").display());
        }
        Command::Aggregate { inputs, out } => {
            let rows = aggregate(&inputs)?;
            match out {
                Some(path) => {
                    let f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    write_rows(&rows, f)?;
                }
                None => write_rows(&rows, io::stdout().lock())?,
            }
        }
        Command::Plot { csv, out, title } => {
            let rows = read_metrics(&csv)?;
            let points: Vec<CurvePoint> = rows.iter().map(CurvePoint::from).collect();
            let svg = curve_svg(&points, &title)?;
            let path = out.unwrap_or_else(|| csv.with_extension("svg"));
            write(&path, &svg)?;
            println!("{}", path.display());
        }
        Command::Heatmap { checkpoint, out_dir } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let (intrinsic, entropy) = heatmaps(&ck.env, &ck.policy_n, ck.rnd.as_ref())?;
            let dir = out_dir.unwrap_or_else(|| checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf());
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for (name, svg) in [("intrinsic.svg", intrinsic), ("entropy.svg", entropy)] {
                let path = dir.join(name);
                write(&path, &svg)?;
                println!("{}", path.display());
            }
        }
        Command::Oracle {
            beta,
            gamma,
            alpha,
            eps,
            max_k,
        } => {
            if max_k == 0 {
                bail!("--max-k must be at least 1");
            }
            let p = CrossoverParams::new(beta, gamma, alpha, eps)?;
            let fmt = |c: Option<String>| c.unwrap_or_else(|| "none".into());
            let mut out = io::stdout().lock();
            writeln!(out, "k_star,k_sim")?;
            writeln!(
                out,
                "{},{}",
                fmt(k_star(&p).value().map(|k| k.to_string())),
                fmt(match simulate_crossover(&p, max_k)? {
                    Crossover::At(k) => Some(k.to_string()),
                    Crossover::NoCrossover => None,
                })
            )?;
            writeln!(out)?;
            writeln!(out, "k,q_a1,q_a2,log_eta")?;
            for pt in eta_trace(&p, max_k)? {
                writeln!(out, "{},{},{},{}", pt.k, pt.q_a1, pt.q_a2, pt.log_eta)?;
            }
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

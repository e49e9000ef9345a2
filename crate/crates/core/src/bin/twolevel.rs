use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twolevel::runner::{compare_files, generate_instance, load_config, resolve_out_dir, run};

#[derive(Parser)]
#[command(version, about = "Two-level ALM/ADMM solver: runs, comparisons and instance files")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run a JSON configuration; exit 0 ε-stationary, 2 infeasible limit,
    /// 3 budget exhausted, 1 error.
    Run {
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores); overrides the config.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; also read from TWOLEVEL_OUT_DIR.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Tabulate two or more run summaries of the same instance.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// Write a generated instance to a JSON file.
    Gen {
        /// toy, infeasible, sphere, netflow or random_consensus.
        family: String,
        /// Generator parameters as JSON, e.g. '{"n_p": 30}'.
        #[arg(long, default_value = "null")]
        params: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> twolevel::Result<u8> {
    match cli.verb {
        Verb::Run {
            config,
            seed,
            threads,
            out_dir,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let dir = resolve_out_dir(&cfg, out_dir.as_deref());
            let out = run(&cfg, &dir)?;
            let s = &out.summary;
            println!(
                "{}: {} after {} outer / {} inner, ‖Ax+Bx̄‖ = {:.3e}{}",
                s.name,
                s.status.map_or("done".to_string(), |st| format!("{st:?}")),
                s.outer_iters,
                s.total_inner_iters,
                s.primal_gap,
                s.objective.map_or(String::new(), |o| format!(", objective {o:.6}")),
            );
            println!("summary: {}", out.summary_path.display());
            Ok(s.exit_code as u8)
        }
        Verb::Compare { summaries } => {
            print!("{}", compare_files(&summaries)?);
            Ok(0)
        }
        Verb::Gen {
            family,
            params,
            seed,
            out,
        } => {
            let params: serde_json::Value = serde_json::from_str(&params)?;
            let inst = generate_instance(&family, &params, seed)?;
            inst.save(&out)?;
            println!("{} (hash {})", out.display(), inst.hash()?);
            Ok(0)
        }
    }
}

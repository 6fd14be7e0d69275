use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use lagsurge::cli::{self, Command, RunConfig, RunError};

#[derive(Parser, Debug)]
#[command(name = "lagsurge", version, about = "Verification harness for graded Lagrangian surgery models")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for every sampling grid.
    #[arg(long, global = true, env = "LAGSURGE_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of samples for randomized checks.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory receiving CSV sample dumps.
    #[arg(long, global = true)]
    dump: Option<PathBuf>,
    /// Multiplier applied to every tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Index checks: rn-nrk, diagonal or morse.
    Index {
        #[arg(long)]
        builtin: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Surgery handle checks.
    Handle {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        profile: String,
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Model Dehn twist checks.
    Twist {
        #[arg(long)]
        model: String,
        #[arg(long, alias = "check", value_delimiter = ',')]
        checks: Vec<String>,
        /// Twist radius; each model has its own default.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Cylinder Floer complexes of a scene.
    Floer {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        test_curve: Option<String>,
        #[arg(long)]
        cone: bool,
        #[arg(long)]
        profile: Option<String>,
    },
    /// Mapping cone checks on complexes given as JSON files.
    Cone {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        map2: Option<PathBuf>,
        #[arg(long)]
        t: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        check: Vec<String>,
    },
    /// Rerun a corpus of configs against golden reports.
    Regress {
        #[arg(long)]
        corpus: PathBuf,
        /// Rewrite the golden reports instead of comparing.
        #[arg(long)]
        bless: bool,
    },
    /// Run a saved config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_json(path: &Path) -> Result<Value, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunError::Schema(format!("{}: {e}", path.display())))
}

fn config(cli: &Cli) -> Result<RunConfig, RunError> {
    let command = match &cli.command {
        Sub::Index { builtin, n, k } => Command::Index { builtin: builtin.clone(), n: *n, k: *k },
        Sub::Handle { kind, n, k, profile, checks } => {
            Command::Handle { kind: kind.clone(), n: *n, k: *k, profile: profile.clone(), checks: checks.clone() }
        }
        Sub::Twist { model, checks, eps } => Command::Twist { model: model.clone(), checks: checks.clone(), eps: *eps },
        Sub::Floer { scene, test_curve, cone, profile } => {
            Command::Floer { scene: read_json(scene)?, test_curve: test_curve.clone(), cone: *cone, profile: profile.clone() }
        }
        Sub::Cone { a, b, map, map2, t, check } => Command::Cone {
            a: read_json(a)?,
            b: read_json(b)?,
            map: read_json(map)?,
            map2: map2.as_deref().map(read_json).transpose()?,
            t: *t,
            checks: check.clone(),
        },
        Sub::Run { config } => {
            let cfg = RunConfig::from_json(&read_json(config)?).map_err(|e| RunError::Schema(e.to_string()))?;
            return Ok(cfg);
        }
        Sub::Regress { .. } => unreachable!("handled separately"),
    };
    Ok(RunConfig { command, seed: cli.global.seed, samples: cli.global.samples, tol_scale: cli.global.tol_scale })
}

fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Sub::Regress { corpus, bless } = &cli.command {
        if *bless {
            return match cli::bless(corpus) {
                Ok(n) => {
                    eprintln!("blessed {n} golden reports");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            };
        }
        return match cli::regress(corpus) {
            Ok(summary) => {
                let text = cli::canonical_json(&serde_json::to_value(&summary).expect("summary serializes"));
                if let Err(e) = emit(&text, cli.global.out.as_deref()) {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
                ExitCode::from(if summary.pass { 0 } else { 1 })
            }
            Err(e) => {
                eprintln!("{}", serde_json::json!({"error": "io", "message": e.to_string()}));
                ExitCode::from(2)
            }
        };
    }
    let result = config(&cli).and_then(|cfg| cli::run(&cfg));
    match result {
        Ok(out) => {
            if let Some(dir) = &cli.global.dump {
                if let Err(e) = cli::write_dumps(dir, &out.dumps) {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
            }
            if let Err(e) = emit(&out.report.to_canonical_json(), cli.global.out.as_deref()) {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            ExitCode::from(out.report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

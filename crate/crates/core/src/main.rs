use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use miabench::attacks::{run_attack, Method};
use miabench::classifier::embeddings_csv;
use miabench::data::load_split;
use miabench::diffusion::ModelCheckpoint;
use miabench::harness::{
    attack_csv, canonical_json, eval_dumps, gen_data, run_all, shift_for, train_log_csv, train_model, EvalInput,
    ExperimentConfig, TABLE_JSON, TABLE_TEXT,
};
use miabench::{Error, Result};

#[derive(Parser)]
#[command(name = "miabench", version, about = "Membership inference benchmark for toy diffusion models")]
struct Cli {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective config as canonical JSON.
    Config,
    /// Generate a setup's dataset directory.
    GenData {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the setup's target model on a dataset directory.
    Train {
        #[arg(long)]
        preset: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attack every validation and test sample, writing a score or feature CSV.
    Attack {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a dump: `--scores` with `--data`, or `--val` with `--test`.
    Eval {
        #[arg(long)]
        method: String,
        #[arg(long, requires = "data", conflicts_with_all = ["val", "test"])]
        scores: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, requires = "test")]
        val: Option<PathBuf>,
        #[arg(long, requires = "val")]
        test: Option<PathBuf>,
        #[arg(long, default_value = "custom")]
        setup: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the fitted classifier (feature methods only).
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Fit the embedding hyperplane diagnostic on a dataset directory.
    Shift {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the 3-D projection of every evaluation sample as CSV.
        #[arg(long)]
        dump_embeddings: Option<PathBuf>,
    },
    /// Run every stage for every configured setup and method.
    RunAll {
        #[arg(long)]
        out: PathBuf,
        /// Restrict to one setup.
        #[arg(long)]
        preset: Option<String>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn parse_method(s: &str) -> Result<Method> {
    s.parse()
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Config => print!("{}", cfg.to_canonical_json()?),
        Command::GenData { preset, out } => {
            let setup = cfg.setup(&preset)?;
            let split = gen_data(&cfg, &setup, &out)?;
            eprintln!(
                "{}: {} train, {} per side per split -> {}",
                setup.id,
                split.train_set.len(),
                setup.n_eval_per_side,
                out.display()
            );
        }
        Command::Train { preset, data, out } => {
            let setup = cfg.setup(&preset)?;
            let (split, _) = load_split(&data)?;
            let (ck, log) = train_model(&cfg, &setup, &split, |s| {
                eprintln!("epoch {} member loss {:.6}", s.epoch, s.mean_loss);
            })?;
            ck.save(&out)?;
            write(&out.with_extension("log.csv"), train_log_csv(&log)?)?;
        }
        Command::Attack {
            checkpoint,
            data,
            method,
            out,
        } => {
            let method = parse_method(&method)?;
            let model = ModelCheckpoint::load(&checkpoint)?;
            let (split, _) = load_split(&data)?;
            let run = run_attack(&model, &split, &cfg.attack_for(method))?;
            write(&out, attack_csv(&run)?)?;
            let q = run.queries_per_image;
            eprintln!(
                "{method}: {} rows, {} forward / {} backward passes per image (matches analytic count)",
                run.rows.len(),
                q.forward_passes,
                q.backward_passes
            );
        }
        Command::Eval {
            method,
            scores,
            data,
            val,
            test,
            setup,
            out,
            model_out,
        } => {
            let method = parse_method(&method)?;
            let input = match (scores, data, val, test) {
                (Some(dump), Some(data), None, None) => EvalInput::Manifest { dump, data },
                (None, _, Some(val), Some(test)) => EvalInput::Pair { val, test },
                _ => return Err(Error::Config("eval needs --scores with --data, or --val with --test".into())),
            };
            let (report, model) = eval_dumps(&cfg, method, &setup, &input)?;
            write(&out, canonical_json(&report)?)?;
            if let (Some(path), Some(m)) = (model_out, model) {
                write(&path, canonical_json(&m)?)?;
            }
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Shift {
            data,
            out,
            dump_embeddings,
        } => {
            let (split, _) = load_split(&data)?;
            let outcome = shift_for(&cfg, &split)?;
            write(&out, canonical_json(&outcome.report)?)?;
            if let Some(p) = dump_embeddings {
                write(&p, embeddings_csv(&outcome.embeddings)?)?;
            }
            println!("{}", serde_json::to_string(&outcome.report)?);
        }
        Command::RunAll { out, preset } => {
            let table = run_all(&cfg, &out, preset.as_deref(), true)?;
            print!("{}", table.to_text());
            eprintln!(
                "wrote {} and {}",
                out.join(TABLE_JSON).display(),
                out.join(TABLE_TEXT).display()
            );
            if table.failures() > 0 {
                eprintln!("{} row(s) failed", table.failures());
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

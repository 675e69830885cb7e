//! Experiment configuration, the stage pipeline behind the CLI, and the
//! aggregate benchmark table.

mod config;
mod pipeline;
mod table;

use std::path::Path;

pub use config::{
    canonical_json, preset, AttackEntry, ClassifierSettings, ExperimentConfig, FitSplit, ModelConfig, SetupConfig,
    SetupEntry, TrainSettings, LARGE_SHIFT, PRESETS, SMALL_SHIFT,
};
pub use pipeline::{
    attack_csv, build_split, classify, eval_dumps, eval_split_of, evaluate, gen_data, run_setup, score_sets, shift_for,
    train_log_csv, train_model, ClassifierModel, EvalInput, FeatureRows, PairOutcome, ScoredRun, SetupOutcome, SetupPaths,
};
pub use table::{BenchmarkTable, ShiftRow, TableRow};

use crate::error::Result;

pub const TABLE_JSON: &str = "table.json";
pub const TABLE_TEXT: &str = "table.txt";
pub const CONFIG_JSON: &str = "config.json";

/// Runs every configured setup (or just `only`) and writes `table.json` and
/// `table.txt` into `out`. Stage failures become failed rows.
pub fn run_all(cfg: &ExperimentConfig, out: &Path, only: Option<&str>, log: bool) -> Result<BenchmarkTable> {
    cfg.validate()?;
    pipeline::write_file(&out.join(CONFIG_JSON), cfg.to_canonical_json()?)?;
    let mut table = BenchmarkTable::default();
    for setup in cfg.resolved_setups()? {
        if only.is_some_and(|id| id != setup.id) {
            continue;
        }
        match run_setup(cfg, &setup, out, log) {
            Ok(o) => {
                for p in o.pairs {
                    table.rows.push(match p.result {
                        Ok(r) => TableRow::from_report(r),
                        Err(e) => TableRow::failed(&o.setup, p.method.id(), e),
                    });
                }
                let (report, error) = match o.shift {
                    Ok(s) => (Some(s.report), None),
                    Err(e) => (None, Some(e)),
                };
                table.shift.push(ShiftRow {
                    setup: o.setup,
                    report,
                    error,
                });
            }
            Err(e) => {
                if log {
                    eprintln!("[{}] setup failed: {e}", setup.id);
                }
                for a in &cfg.attacks {
                    table.rows.push(TableRow::failed(&setup.id, a.method.id(), e.to_string()));
                }
                table.shift.push(ShiftRow {
                    setup: setup.id.clone(),
                    report: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    pipeline::write_file(&out.join(TABLE_JSON), canonical_json(&table)?)?;
    pipeline::write_file(&out.join(TABLE_TEXT), table.to_text())?;
    Ok(table)
}

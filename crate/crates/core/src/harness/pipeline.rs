use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{canonical_json, ExperimentConfig, FitSplit, SetupConfig};
use crate::attacks::{
    feature_csv_bytes, is_feature_csv, read_feature_csv, read_score_csv, run_attack, score_csv_bytes, AttackRows,
    AttackRun, Method,
};
use crate::classifier::{
    blind_extractor, embeddings_csv, fit_boosted, shift_report, BoostedEnsemble, ShiftOutcome, Standardizer,
};
use crate::data::{load_split, make_setup, save_split, BenchmarkSplit, EvalSplit, Role};
use crate::diffusion::{train_with_observer, DenoiserNet, EpochStats, ModelCheckpoint};
use crate::error::{Error, Result};
use crate::eval::{full_eval, EvalReport, ScoreSet};
use crate::rng;

/// File layout of one setup inside a run directory.
#[derive(Debug, Clone)]
pub struct SetupPaths {
    pub root: PathBuf,
}

impl SetupPaths {
    pub fn new(out: &Path, setup_id: &str) -> Self {
        Self { root: out.join(setup_id) }
    }
    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.ckpt")
    }
    pub fn train_log(&self) -> PathBuf {
        self.root.join("train_log.csv")
    }
    pub fn attack_csv(&self, m: Method) -> PathBuf {
        self.root.join("attacks").join(format!("{}.csv", m.id()))
    }
    pub fn classifier(&self, m: Method) -> PathBuf {
        self.root.join("classifiers").join(format!("{}.json", m.id()))
    }
    pub fn report(&self, m: Method) -> PathBuf {
        self.root.join("reports").join(format!("{}.json", m.id()))
    }
    pub fn shift(&self) -> PathBuf {
        self.root.join("shift.json")
    }
    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings.csv")
    }
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn build_split(cfg: &ExperimentConfig, setup: &SetupConfig) -> Result<BenchmarkSplit> {
    make_setup(
        &setup.member,
        &setup.nonmember,
        cfg.image,
        setup.n_train,
        setup.n_eval_per_side,
        cfg.seed,
    )
}

pub fn gen_data(cfg: &ExperimentConfig, setup: &SetupConfig, dir: &Path) -> Result<BenchmarkSplit> {
    let split = build_split(cfg, setup)?;
    save_split(dir, &split, &setup.member, &setup.nonmember)?;
    Ok(split)
}

/// Trains the setup's target model, returning it with per-epoch mean loss on
/// the member pool.
pub fn train_model(
    cfg: &ExperimentConfig,
    setup: &SetupConfig,
    split: &BenchmarkSplit,
    mut progress: impl FnMut(&EpochStats),
) -> Result<(ModelCheckpoint, Vec<EpochStats>)> {
    let schedule = cfg.schedule.build()?;
    let net = DenoiserNet::new(
        cfg.image.pixels(),
        cfg.model.embed_width,
        &cfg.model.hidden,
        cfg.model.activation,
        schedule.steps(),
        rng::derive_seed(cfg.seed, rng::TAG_INIT),
    );
    let mut log = Vec::new();
    let ck = train_with_observer(
        net,
        &split.train_set,
        &setup.train.to_train_config(cfg.seed),
        &schedule,
        |s, _| {
            progress(s);
            log.push(*s);
        },
    )?;
    Ok((ck, log))
}

pub fn train_log_csv(log: &[EpochStats]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "mean_loss", "updates"])?;
    for s in log {
        w.write_record([s.epoch.to_string(), s.mean_loss.to_string(), s.updates.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// CSV of an attack run: scores or features, validation rows first.
pub fn attack_csv(run: &AttackRun) -> Result<Vec<u8>> {
    match &run.rows {
        AttackRows::Scores(rows) => score_csv_bytes(rows.iter().map(|(s, _)| s)),
        AttackRows::Features(rows) => feature_csv_bytes(rows.iter().map(|(f, y, _)| (f, *y))),
    }
}

/// Standardizer plus boosted ensemble, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub method: String,
    pub fit_on: FitSplit,
    pub scaler: Standardizer,
    pub ensemble: BoostedEnsemble,
}

impl ClassifierModel {
    pub fn member_probability(&self, features: &[f64]) -> Result<f64> {
        self.ensemble.predict_proba(&self.scaler.transform(features))
    }
}

/// Validation and test score sets for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    pub val: ScoreSet,
    pub test: ScoreSet,
    pub classifier: Option<ClassifierModel>,
}

/// Labelled feature rows tagged with their split.
pub type FeatureRows = [(Vec<f64>, u8, EvalSplit)];

/// Fits the classifier on one split and scores every row as `r = 1 - p`.
pub fn classify(cfg: &ExperimentConfig, method: Method, rows: &FeatureRows) -> Result<ScoredRun> {
    let fit_split = match cfg.classifier.fit_on {
        FitSplit::Val => EvalSplit::Val,
        FitSplit::Test => EvalSplit::Test,
    };
    let (fit_x, fit_y): (Vec<Vec<f64>>, Vec<u8>) = rows
        .iter()
        .filter(|(_, _, s)| *s == fit_split)
        .map(|(x, y, _)| (x.clone(), *y))
        .unzip();
    let scaler = Standardizer::fit(&fit_x);
    let ensemble = fit_boosted(&scaler.transform_all(&fit_x), &fit_y, &cfg.classifier.boost)?;
    let model = ClassifierModel {
        method: method.id().to_string(),
        fit_on: cfg.classifier.fit_on,
        scaler,
        ensemble,
    };
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (x, y, s) in rows {
        let r = 1.0 - model.member_probability(x)?;
        match s {
            EvalSplit::Val => val.push((r, *y)),
            EvalSplit::Test => test.push((r, *y)),
        }
    }
    Ok(ScoredRun {
        val: ScoreSet::new(val, method.id(), "val")?,
        test: ScoreSet::new(test, method.id(), "test")?,
        classifier: Some(model),
    })
}

pub fn score_sets(cfg: &ExperimentConfig, run: &AttackRun) -> Result<ScoredRun> {
    match &run.rows {
        AttackRows::Scores(rows) => {
            let pick = |which: EvalSplit| -> Vec<(f64, u8)> {
                rows.iter()
                    .filter(|(_, s)| *s == which)
                    .map(|(m, _)| (m.score, m.label))
                    .collect()
            };
            Ok(ScoredRun {
                val: ScoreSet::new(pick(EvalSplit::Val), run.method.id(), "val")?,
                test: ScoreSet::new(pick(EvalSplit::Test), run.method.id(), "test")?,
                classifier: None,
            })
        }
        AttackRows::Features(rows) => {
            let rows: Vec<_> = rows.iter().map(|(f, y, s)| (f.values.clone(), *y, *s)).collect();
            classify(cfg, run.method, &rows)
        }
    }
}

pub fn evaluate(cfg: &ExperimentConfig, method: Method, setup_id: &str, scored: &ScoredRun) -> Result<EvalReport> {
    full_eval(
        &scored.val,
        &scored.test,
        method.is_classifier(),
        setup_id,
        &cfg.budgets()?,
        &cfg.eval,
    )
}

pub fn shift_for(cfg: &ExperimentConfig, split: &BenchmarkSplit) -> Result<ShiftOutcome> {
    let (h, w) = (split.shape.height, split.shape.width);
    shift_report(split, |s| blind_extractor(s, h, w), &cfg.hyperplane)
}

/// Maps sample ids to their evaluation split using a dataset manifest.
pub fn eval_split_of(split: &BenchmarkSplit, id: u64) -> Option<EvalSplit> {
    for role in [Role::MemberVal, Role::NonmemberVal] {
        if split.role_samples(role).iter().any(|s| s.id == id) {
            return Some(EvalSplit::Val);
        }
    }
    for role in [Role::MemberTest, Role::NonmemberTest] {
        if split.role_samples(role).iter().any(|s| s.id == id) {
            return Some(EvalSplit::Test);
        }
    }
    None
}

/// Outcome of one (setup, method) pair within `run-all`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub method: Method,
    pub result: std::result::Result<EvalReport, String>,
}

#[derive(Debug, Clone)]
pub struct SetupOutcome {
    pub setup: String,
    pub pairs: Vec<PairOutcome>,
    pub shift: std::result::Result<ShiftOutcome, String>,
}

fn run_pair(
    cfg: &ExperimentConfig,
    setup: &SetupConfig,
    paths: &SetupPaths,
    model: &ModelCheckpoint,
    split: &BenchmarkSplit,
    method: Method,
) -> Result<EvalReport> {
    let run = run_attack(model, split, &cfg.attack_for(method))?;
    write_file(&paths.attack_csv(method), attack_csv(&run)?)?;
    let scored = score_sets(cfg, &run)?;
    if let Some(c) = &scored.classifier {
        write_file(&paths.classifier(method), canonical_json(c)?)?;
    }
    let report = evaluate(cfg, method, &setup.id, &scored)?;
    write_file(&paths.report(method), canonical_json(&report)?)?;
    Ok(report)
}

/// Generates, trains, attacks, evaluates and runs the shift diagnostic for
/// one setup, writing every artifact under `out/<setup id>/`.
pub fn run_setup(cfg: &ExperimentConfig, setup: &SetupConfig, out: &Path, log: bool) -> Result<SetupOutcome> {
    let paths = SetupPaths::new(out, &setup.id);
    gen_data(cfg, setup, &paths.data())?;
    let (split, _) = load_split(paths.data())?;
    let every = (setup.train.epochs / 10).max(1);
    let (model, train_log) = train_model(cfg, setup, &split, |s| {
        if log && (s.epoch % every == 0 || s.epoch == 1) {
            eprintln!("[{}] epoch {} mean loss {:.4}", setup.id, s.epoch, s.mean_loss);
        }
    })?;
    model.save(paths.model())?;
    write_file(&paths.train_log(), train_log_csv(&train_log)?)?;

    let mut pairs = Vec::new();
    for entry in &cfg.attacks {
        let result = run_pair(cfg, setup, &paths, &model, &split, entry.method).map_err(|e| e.to_string());
        if log {
            match &result {
                Ok(r) => eprintln!(
                    "[{}] {}: val auc {:.4}, val tpr@1% {:.4}, test fpr@1% {:.4}",
                    setup.id, entry.method, r.val.auc, r.val.tpr_at_1pct, r.test.fpr_1pct
                ),
                Err(e) => eprintln!("[{}] {} failed: {e}", setup.id, entry.method),
            }
        }
        pairs.push(PairOutcome {
            method: entry.method,
            result,
        });
    }
    let shift = shift_for(cfg, &split).and_then(|o| {
        write_file(&paths.shift(), canonical_json(&o.report)?)?;
        write_file(&paths.embeddings(), embeddings_csv(&o.embeddings)?)?;
        Ok(o)
    });
    Ok(SetupOutcome {
        setup: setup.id.clone(),
        pairs,
        shift: shift.map_err(|e| e.to_string()),
    })
}

/// Where `eval` finds its validation and test rows.
#[derive(Debug, Clone)]
pub enum EvalInput {
    /// One dump covering both splits, separated by a dataset manifest.
    Manifest { dump: PathBuf, data: PathBuf },
    /// Separate validation and test dumps.
    Pair { val: PathBuf, test: PathBuf },
}

fn read_rows(path: &Path, method: Method) -> Result<Vec<(u64, Vec<f64>, u8)>> {
    if is_feature_csv(path)? {
        if !method.is_classifier() {
            return Err(Error::format(Some(1), format!("{method} expects a score dump, got features")));
        }
        Ok(read_feature_csv(path, method.id())?
            .into_iter()
            .map(|(f, y)| (f.sample_id, f.values, y))
            .collect())
    } else {
        if method.is_classifier() {
            return Err(Error::format(Some(1), format!("{method} expects a feature dump, got scores")));
        }
        Ok(read_score_csv(path)?
            .into_iter()
            .map(|s| (s.sample_id, vec![s.score], s.label))
            .collect())
    }
}

/// Evaluates attack dumps from disk, fitting the classifier first for
/// feature-based methods.
pub fn eval_dumps(
    cfg: &ExperimentConfig,
    method: Method,
    setup_id: &str,
    input: &EvalInput,
) -> Result<(EvalReport, Option<ClassifierModel>)> {
    let tagged: Vec<(Vec<f64>, u8, EvalSplit)> = match input {
        EvalInput::Manifest { dump, data } => {
            let (split, _) = load_split(data)?;
            read_rows(dump, method)?
                .into_iter()
                .map(|(id, v, y)| {
                    let s = eval_split_of(&split, id)
                        .ok_or_else(|| Error::format(None, format!("sample {id} is not in the evaluation manifest")))?;
                    Ok((v, y, s))
                })
                .collect::<Result<_>>()?
        }
        EvalInput::Pair { val, test } => {
            let mut rows: Vec<_> = read_rows(val, method)?
                .into_iter()
                .map(|(_, v, y)| (v, y, EvalSplit::Val))
                .collect();
            rows.extend(read_rows(test, method)?.into_iter().map(|(_, v, y)| (v, y, EvalSplit::Test)));
            rows
        }
    };
    let scored = if method.is_classifier() {
        classify(cfg, method, &tagged)?
    } else {
        let pick = |which: EvalSplit| -> Vec<(f64, u8)> {
            tagged.iter().filter(|r| r.2 == which).map(|r| (r.0[0], r.1)).collect()
        };
        ScoredRun {
            val: ScoreSet::new(pick(EvalSplit::Val), method.id(), "val")?,
            test: ScoreSet::new(pick(EvalSplit::Test), method.id(), "test")?,
            classifier: None,
        }
    };
    let report = evaluate(cfg, method, setup_id, &scored)?;
    Ok((report, scored.classifier))
}

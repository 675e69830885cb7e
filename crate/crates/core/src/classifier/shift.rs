use serde::{Deserialize, Serialize};

use super::hyperplane::{fit_hyperplane, HyperplaneConfig, LinearHyperplane};
use super::pca::{fit_pca3, PcaProjector};
use super::standardize::Standardizer;
use crate::attacks::blind_features;
use crate::data::{BenchmarkSplit, EvalSplit, ImageSample, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRates {
    pub tpr: f64,
    pub fpr: f64,
    pub tnr: f64,
    pub fnr: f64,
}

impl SplitRates {
    /// Rates for member predictions `pred` against labels.
    pub fn from_predictions(pred: &[bool], labels: &[u8]) -> Result<Self> {
        let (mut tp, mut pos, mut fp, mut neg) = (0usize, 0usize, 0usize, 0usize);
        for (&p, &y) in pred.iter().zip(labels) {
            if y == 1 {
                pos += 1;
                tp += usize::from(p);
            } else {
                neg += 1;
                fp += usize::from(p);
            }
        }
        if pos == 0 || neg == 0 {
            return Err(Error::Eval("rates need both members and non-members".into()));
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        Ok(Self {
            tpr,
            fpr,
            tnr: (neg - fp) as f64 / neg as f64,
            fnr: (pos - tp) as f64 / pos as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub val: SplitRates,
    pub test: SplitRates,
    pub degenerate_pca: bool,
}

/// Everything fitted by [`shift_report`], kept for inspection and dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftModel {
    pub input_scaler: Standardizer,
    pub projector: PcaProjector,
    pub embedding_scaler: Standardizer,
    pub hyperplane: LinearHyperplane,
}

impl ShiftModel {
    pub fn embed(&self, features: &[f64]) -> [f64; 3] {
        let z = self.projector.project(&self.input_scaler.transform(features));
        let s = self.embedding_scaler.transform(&z);
        [s[0], s[1], s[2]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub sample_id: u64,
    pub split: EvalSplit,
    pub label: u8,
    pub coords: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOutcome {
    pub report: ShiftReport,
    pub model: ShiftModel,
    pub embeddings: Vec<EmbeddingRow>,
}

/// Blind pixel features as the embedding source.
/// Sample ids, feature rows and labels of one evaluation split.
type Collected = (Vec<u64>, Vec<Vec<f64>>, Vec<u8>);

pub fn blind_extractor(sample: &ImageSample, height: usize, width: usize) -> Result<Vec<f64>> {
    blind_features(&sample.pixels, height, width)
}

/// Fits standardize, PCA to 3-D, standardize and a logistic hyperplane on the
/// validation members/non-members, then applies the frozen pipeline to both
/// evaluation splits.
pub fn shift_report<F>(split: &BenchmarkSplit, extractor: F, cfg: &HyperplaneConfig) -> Result<ShiftOutcome>
where
    F: Fn(&ImageSample) -> Result<Vec<f64>>,
{
    split.validate()?;
    let collect = |roles: [Role; 2]| -> Result<Collected> {
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for role in roles {
            for s in split.role_samples(role) {
                ids.push(s.id);
                rows.push(extractor(s)?);
                labels.push(role.label());
            }
        }
        Ok((ids, rows, labels))
    };
    let (val_ids, val_rows, val_labels) = collect([Role::MemberVal, Role::NonmemberVal])?;
    let (test_ids, test_rows, test_labels) = collect([Role::MemberTest, Role::NonmemberTest])?;

    let input_scaler = Standardizer::fit(&val_rows);
    let projector = fit_pca3(&input_scaler.transform_all(&val_rows))?;
    let projected: Vec<Vec<f64>> = val_rows
        .iter()
        .map(|r| projector.project(&input_scaler.transform(r)).to_vec())
        .collect();
    let embedding_scaler = Standardizer::fit(&projected);
    let mut model = ShiftModel {
        input_scaler,
        projector,
        embedding_scaler,
        hyperplane: LinearHyperplane {
            weights: [0.0; 3],
            bias: 0.0,
        },
    };
    let val_z: Vec<[f64; 3]> = val_rows.iter().map(|r| model.embed(r)).collect();
    model.hyperplane = fit_hyperplane(&val_z, &val_labels, cfg)?;
    let test_z: Vec<[f64; 3]> = test_rows.iter().map(|r| model.embed(r)).collect();

    let rates = |zs: &[[f64; 3]], labels: &[u8]| {
        let pred: Vec<bool> = zs.iter().map(|z| model.hyperplane.is_member(z)).collect();
        SplitRates::from_predictions(&pred, labels)
    };
    let report = ShiftReport {
        val: rates(&val_z, &val_labels)?,
        test: rates(&test_z, &test_labels)?,
        degenerate_pca: model.projector.degenerate,
    };

    let mut embeddings = Vec::with_capacity(val_z.len() + test_z.len());
    for (split_tag, ids, zs, labels) in [
        (EvalSplit::Val, &val_ids, &val_z, &val_labels),
        (EvalSplit::Test, &test_ids, &test_z, &test_labels),
    ] {
        for ((id, z), y) in ids.iter().zip(zs).zip(labels) {
            embeddings.push(EmbeddingRow {
                sample_id: *id,
                split: split_tag,
                label: *y,
                coords: *z,
            });
        }
    }
    Ok(ShiftOutcome {
        report,
        model,
        embeddings,
    })
}

/// `sample_id,split,label,z0,z1,z2` rows.
pub fn embeddings_csv(rows: &[EmbeddingRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "split", "label", "z0", "z1", "z2"])?;
    for r in rows {
        let split = match r.split {
            EvalSplit::Val => "val",
            EvalSplit::Test => "test",
        };
        w.write_record([
            r.sample_id.to_string(),
            split.to_string(),
            r.label.to_string(),
            r.coords[0].to_string(),
            r.coords[1].to_string(),
            r.coords[2].to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

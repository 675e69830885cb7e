//! Tabular classifiers: boosted trees for feature-based attacks, and the
//! PCA plus hyperplane diagnostic for distribution shift.

mod boost;
mod hyperplane;
mod pca;
mod shift;
mod standardize;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use boost::{fit_boosted, BoostConfig, BoostedEnsemble, Node, Tree};
pub use hyperplane::{fit_hyperplane, HyperplaneConfig, LinearHyperplane};
pub use pca::{fit_pca3, PcaProjector};
pub use shift::{
    blind_extractor, embeddings_csv, shift_report, EmbeddingRow, ShiftModel, ShiftOutcome, ShiftReport,
    SplitRates,
};
pub use standardize::Standardizer;

use crate::error::Result;

/// Writes any fitted model as pretty JSON.
pub fn save_model<T: Serialize>(model: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(model)?)?;
    Ok(())
}

pub fn load_model<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

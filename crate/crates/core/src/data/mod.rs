//! Synthetic image pools and member/non-member benchmark splits.

mod generate;
mod io;
mod split;

pub use generate::{
    generate_dataset, generate_with_ids, mean_pixel, DistributionSpec, ImageSample, ImageShape, BLOBS,
    GAUSSIAN_FIELD,
};
pub use io::{
    decode_images, encode_images, load_split, save_split, splits_csv, DatasetSidecar, SidecarEntry,
    DATASET_MAGIC, DATASET_VERSION, SAMPLES_FILE, SIDECAR_FILE, SPLITS_FILE,
};
pub use split::{make_setup, BenchmarkSplit, EvalSplit, Role};

//! GENEO units, their convex combination, and pocket extraction.

mod kernel;
mod params;
mod pipeline;

pub use kernel::{apply_kernel, apply_unit, quantize, GaussianKernel, GeneoUnit, INPUT_BITS, QUANTIZATION_STEP};
pub use params::{GeneoParams, FILE_SIMPLEX_TOL, SIMPLEX_TOL};
pub use pipeline::{
    combine, normalize_unit, predict, predict_on, score_and_rank, threshold_components, volumetric_accuracy,
    Connectivity, DetectorConfig, GeneoDetector, GridRecord, Pocket, PocketDetector, PocketPrediction, PocketRecord,
    PredictionRecord, PreparedInput,
};

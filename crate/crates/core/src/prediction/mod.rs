//! Short-term human motion prediction from a window of past features.

mod dtw;
mod ivm;
mod predictor;
mod spgp;

pub use dtw::{dtw_distance, dtw_distance_banded, dtw_flat, dtw_kernel, DtwKernelParams};
pub use ivm::{ivm_classify, ivm_train_windows, softmax, IvmClassifier, IvmParams};
pub use predictor::{
    collect_windows, load_model, predict_motion, save_model, train_from_windows, train_motion_model, ClassPrediction,
    ModelArchive, MotionModel, MotionPrediction, PredictorConfig, StateModel,
};
pub use spgp::{
    gram_eigenvalues, spgp_predict, spgp_predict_noisy, spgp_train, FixedHyperparameters, GpChannel, GpPrediction,
    GpTrainParams, NoisyInputParams, SparseGpModel, GRAM_JITTER,
};

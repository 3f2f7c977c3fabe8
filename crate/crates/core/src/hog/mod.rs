//! HOG descriptors, a Pegasos-trained linear SVM and multi-scale
//! sliding-window detection with duplicate-box merging.

mod descriptor;
mod detect;
mod gradient;
mod model_io;
mod svm;

pub use descriptor::{block_normalize, cell_histogram, hog_descriptor, HogConfig, HogDescriptor, BINS};
pub use detect::{detect_multiscale, HogDetectParams, MergeRule};
pub use gradient::{compute_gradients, GradientField};
pub use model_io::{hog_model_from_json, hog_model_to_json, load_hog_model, save_hog_model};
pub use svm::{hinge_objective, svm_score, svm_train, train_hog_svm, HogSvmModel, SvmFit, SvmParams};

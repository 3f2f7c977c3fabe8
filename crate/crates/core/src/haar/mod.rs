//! Haar-like features, discrete AdaBoost over decision stumps, and a
//! cascaded sliding-window detector.

mod adaboost;
mod cascade;
mod feature;
mod model_io;

pub use adaboost::{
    adaboost_train, alpha_from_error, boost_stumps, ensemble_predict, weak_learner_error, LabeledWindow, Stump,
    WeakLearner, ERROR_FLOOR,
};
pub use cascade::{
    cascade_detect, cascade_detect_counted, train_cascade, CascadeModel, CascadeTrainConfig, DetectParams, Stage,
};
pub use feature::{eval_feature, generate_candidates, HaarFeature, HaarKind, WeightedRect};
pub use model_io::{cascade_from_json, cascade_to_json, load_cascade, save_cascade};

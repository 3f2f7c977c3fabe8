//! Depthwise-separable CNN engine: convolutions with backward passes, the
//! default 23-convolution network with an SSD-style head, a MAC/parameter
//! analyzer, a small full-batch trainer and the binary model format.

mod arch;
mod complexity;
mod conv;
mod factorize;
mod layers;
mod model;
mod model_io;
pub mod reference;
mod ssd;
mod tensor;
mod train;

pub use arch::{
    lcnn_architecture, pair_output_layer, Architecture, LayerSpec, LcnnConfig, Tap, SEPARABLE_SCHEDULE, STEM_CHANNELS,
    TAPPED_PAIRS,
};
pub use complexity::{analyze, complexity, conv_shape, reduction_closed_form, ArchitectureCost, Complexity, ConvShape, CostTotals, LayerCost};
pub use conv::{conv2d, conv2d_im2col, conv_backward, conv_forward, depthwise_conv, pointwise_conv, ConvGrads, ConvKernel, ConvKind};
pub use factorize::{compose_separable, factorized_equals_composed};
pub use layers::{batchnorm, mse, relu, relu_backward, smooth_l1, softmax, softmax_backward, BatchNorm, BatchNormGrads, BN_EPSILON};
pub use model::{
    build_lcnn, image_to_tensor, ssd_detect, CnnModel, HeadOutput, Layer, Trace, DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_IOU,
};
pub use model_io::{load_model, model_from_bytes, model_to_bytes, save_model, sidecar_path};
pub use ssd::{decode, default_boxes, encode, match_priors, CenterBox, PriorConfig};
pub use tensor::Tensor;
pub use train::{build_targets, detection_loss, train_toy, LossTerms, Targets, ToySample, TrainConfig, TrainReport};

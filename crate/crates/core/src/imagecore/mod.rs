//! Image representation, Netpbm I/O, integral images, pyramids and the box
//! geometry shared by all detectors.

mod annotation;
mod geometry;
mod image;
mod integral;
mod netpbm;
mod pyramid;

pub use annotation::{format_detection_line, ground_truth, parse_annotations, AnnotationRecord, GroundTruth};
pub use geometry::{merge_biggest_box, nms, BoundingBox, Detection};
pub use image::{to_grayscale, Image};
pub use integral::{integral, IntegralImage};
pub use netpbm::{decode_netpbm, encode_netpbm, load_image, save_image};
pub use pyramid::{build_pyramid, PyramidLevel};

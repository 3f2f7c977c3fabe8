//! Human-object detection toolkit.
//!
//! Three detector families share one image/geometry layer:
//!
//! * [`haar`]: Haar-like features over integral images, discrete AdaBoost,
//!   and an attentional cascade evaluated over an image pyramid.
//! * [`hog`]: histogram-of-oriented-gradients descriptors scored by a linear
//!   SVM trained with Pegasos SGD.
//! * [`lcnn`]: a 23-layer depthwise-separable CNN with an SSD-style head,
//!   plus a MAC/parameter complexity analyzer and a small trainer.
//!
//! [`evalbench`] measures throughput, process CPU/memory and FPR/FNR, and
//! [`cli`] wires everything into the `humandet` binary.

pub mod cli;
pub mod error;
pub mod evalbench;
pub mod haar;
pub mod hog;
pub mod imagecore;
pub mod lcnn;

pub use error::{Error, Result};
pub use imagecore::{BoundingBox, Detection, Image, IntegralImage};

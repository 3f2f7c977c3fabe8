//! C ABI over the `humandet` detectors.
//!
//! Objects cross the boundary as opaque pointers created by `hd_*_load`
//! or `hd_*_from_*` functions and released with the matching `hd_*_free`.
//! Every fallible call returns an [`HdStatus`]; on failure a description is
//! available from [`hd_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use humandet::haar::{cascade_detect, load_cascade, CascadeModel, DetectParams};
use humandet::hog::{detect_multiscale, load_hog_model, HogDetectParams, HogSvmModel};
use humandet::imagecore::load_image;
use humandet::lcnn::{load_model, ssd_detect, CnnModel, ConvShape, DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_IOU};
use humandet::{Detection, Error, Image};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    NullArgument = 1,
    /// Malformed file, model or architecture.
    Format = 2,
    /// Invalid parameter value.
    Config = 3,
    /// Unusable input data (channels, bounds, empty sets).
    Input = 4,
    /// Tensor or kernel shapes disagree.
    Shape = 5,
    Io = 6,
    IndexOutOfRange = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdDetectorKind {
    Haar = 0,
    Hogsvm = 1,
    Lcnn = 2,
}

/// One detection in image pixel coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdDetection {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

/// Multiply-accumulate counts of one convolution shape.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdComplexity {
    pub conventional_macs: u64,
    pub separable_macs: u64,
    pub reduction: f64,
}

/// Opaque image handle.
pub struct HdImage {
    inner: Image,
}

enum Engine {
    Haar(CascadeModel, DetectParams),
    Hog(HogSvmModel, HogDetectParams),
    Lcnn(Box<CnnModel>),
}

/// Opaque detector handle.
pub struct HdDetector {
    engine: Engine,
    conf: f64,
    nms_iou: Option<f64>,
}

/// Opaque list of detections.
pub struct HdDetections {
    items: Vec<HdDetection>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HdStatus {
    match e {
        Error::Format(_) | Error::Type(_) => HdStatus::Format,
        Error::Config(_) => HdStatus::Config,
        Error::Input(_) | Error::Channel(_) | Error::Bounds(_) => HdStatus::Input,
        Error::Shape(_) => HdStatus::Shape,
        Error::Io(_) => HdStatus::Io,
    }
}

/// Runs `f`, converting errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (HdStatus, String)>) -> HdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HdStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (HdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HdStatus, String) {
    (HdStatus::NullArgument, format!("{what} is null"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, (HdStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path).to_str().map_err(|_| (HdStatus::Config, "path is not UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `hd_*` call on this thread.
#[no_mangle]
pub extern "C" fn hd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a binary PGM (P5) or PPM (P6) file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_image_load(path: *const c_char, out: *mut *mut HdImage) -> HdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let img = load_image(path_arg(path)?).map_err(lib_err)?;
        store(out, HdImage { inner: img });
        Ok(())
    })
}

/// Copies a row-major 8-bit grayscale buffer of `width × height` bytes.
///
/// # Safety
/// `pixels` must point to `width * height` readable bytes; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_image_from_gray(
    pixels: *const u8,
    width: usize,
    height: usize,
    out: *mut *mut HdImage,
) -> HdStatus {
    guard(|| {
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = width.checked_mul(height).ok_or((HdStatus::Config, "image too large".to_string()))?;
        let data = std::slice::from_raw_parts(pixels, len).iter().map(|&p| f64::from(p)).collect();
        let img = Image::new(width, height, 1, data).map_err(lib_err)?;
        store(out, HdImage { inner: img });
        Ok(())
    })
}

/// Width in pixels, or 0 for a null handle.
///
/// # Safety
/// `img` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_image_width(img: *const HdImage) -> usize {
    img.as_ref().map_or(0, |i| i.inner.width())
}

/// Height in pixels, or 0 for a null handle.
///
/// # Safety
/// `img` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_image_height(img: *const HdImage) -> usize {
    img.as_ref().map_or(0, |i| i.inner.height())
}

/// # Safety
/// `img` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_image_free(img: *mut HdImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Loads a model file of the given family with default thresholds.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_detector_load(kind: HdDetectorKind, path: *const c_char, out: *mut *mut HdDetector) -> HdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        let engine = match kind {
            HdDetectorKind::Haar => Engine::Haar(load_cascade(&path).map_err(lib_err)?, DetectParams::default()),
            HdDetectorKind::Hogsvm => Engine::Hog(load_hog_model(&path).map_err(lib_err)?, HogDetectParams::default()),
            HdDetectorKind::Lcnn => Engine::Lcnn(Box::new(load_model(&path).map_err(lib_err)?)),
        };
        store(out, HdDetector { engine, conf: DEFAULT_CONF_THRESHOLD, nms_iou: None });
        Ok(())
    })
}

/// Sets the CNN confidence threshold and the duplicate-suppression IoU.
/// A negative `nms_iou` restores the detector's default.
///
/// # Safety
/// `det` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_detector_set_thresholds(det: *mut HdDetector, conf: f64, nms_iou: f64) -> HdStatus {
    guard(|| {
        let det = det.as_mut().ok_or_else(|| null("detector"))?;
        if !(0.0..=1.0).contains(&conf) {
            return Err((HdStatus::Config, format!("confidence {conf} outside [0, 1]")));
        }
        if nms_iou > 1.0 || nms_iou.is_nan() {
            return Err((HdStatus::Config, format!("nms IoU {nms_iou} outside [0, 1]")));
        }
        det.conf = conf;
        det.nms_iou = (nms_iou >= 0.0).then_some(nms_iou);
        Ok(())
    })
}

fn run_engine(det: &HdDetector, img: &Image) -> humandet::Result<Vec<Detection>> {
    match &det.engine {
        Engine::Haar(m, p) => {
            let p = DetectParams { nms_iou: det.nms_iou.unwrap_or(p.nms_iou), ..*p };
            cascade_detect(m, img, &p)
        }
        Engine::Hog(m, p) => {
            let p = HogDetectParams { merge_iou: det.nms_iou.unwrap_or(p.merge_iou), ..*p };
            detect_multiscale(m, img, &p)
        }
        Engine::Lcnn(m) => ssd_detect(m, img, det.conf, det.nms_iou.unwrap_or(DEFAULT_NMS_IOU)),
    }
}

/// Runs the detector on an image.
///
/// # Safety
/// `det` and `img` must be handles from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_detector_run(
    det: *const HdDetector,
    img: *const HdImage,
    out: *mut *mut HdDetections,
) -> HdStatus {
    guard(|| {
        let det = det.as_ref().ok_or_else(|| null("detector"))?;
        let img = img.as_ref().ok_or_else(|| null("image"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let items = run_engine(det, &img.inner)
            .map_err(lib_err)?
            .into_iter()
            .map(|d| HdDetection { x: d.bbox.x, y: d.bbox.y, w: d.bbox.w, h: d.bbox.h, score: d.score })
            .collect();
        store(out, HdDetections { items });
        Ok(())
    })
}

/// # Safety
/// `det` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_detector_free(det: *mut HdDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Number of detections, or 0 for a null handle.
///
/// # Safety
/// `dets` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_detections_len(dets: *const HdDetections) -> usize {
    dets.as_ref().map_or(0, |d| d.items.len())
}

/// Copies detection `index` into `out`.
///
/// # Safety
/// `dets` must be a handle from this library and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_detections_get(dets: *const HdDetections, index: usize, out: *mut HdDetection) -> HdStatus {
    guard(|| {
        let dets = dets.as_ref().ok_or_else(|| null("detections"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = dets
            .items
            .get(index)
            .ok_or_else(|| (HdStatus::IndexOutOfRange, format!("index {index} of {}", dets.items.len())))?;
        *out = *d;
        Ok(())
    })
}

/// # Safety
/// `dets` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn hd_detections_free(dets: *mut HdDetections) {
    if !dets.is_null() {
        drop(Box::from_raw(dets));
    }
}

/// MAC counts of a `kernel × kernel` convolution from `in_channels` to
/// `out_channels` producing a `feature_side²` map, conventional versus
/// depthwise-separable.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hd_complexity(
    kernel: u32,
    in_channels: u32,
    out_channels: u32,
    feature_side: u32,
    out: *mut HdComplexity,
) -> HdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if kernel == 0 || in_channels == 0 || out_channels == 0 || feature_side == 0 {
            return Err((HdStatus::Config, "all dimensions must be positive".to_string()));
        }
        let s = ConvShape::new(kernel.into(), in_channels.into(), out_channels.into(), feature_side.into());
        *out = HdComplexity {
            conventional_macs: s.conventional_macs(),
            separable_macs: s.separable_macs(),
            reduction: s.reduction(),
        };
        Ok(())
    })
}

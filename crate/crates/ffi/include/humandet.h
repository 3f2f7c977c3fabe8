#ifndef HUMANDET_H
#define HUMANDET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HdStatus {
  HD_STATUS_OK = 0,
  HD_STATUS_NULL_ARGUMENT = 1,
  /**
   * Malformed file, model or architecture.
   */
  HD_STATUS_FORMAT = 2,
  /**
   * Invalid parameter value.
   */
  HD_STATUS_CONFIG = 3,
  /**
   * Unusable input data (channels, bounds, empty sets).
   */
  HD_STATUS_INPUT = 4,
  /**
   * Tensor or kernel shapes disagree.
   */
  HD_STATUS_SHAPE = 5,
  HD_STATUS_IO = 6,
  HD_STATUS_INDEX_OUT_OF_RANGE = 7,
  /**
   * A Rust panic was caught at the boundary.
   */
  HD_STATUS_INTERNAL = 8,
} HdStatus;

typedef enum HdDetectorKind {
  HD_DETECTOR_KIND_HAAR = 0,
  HD_DETECTOR_KIND_HOGSVM = 1,
  HD_DETECTOR_KIND_LCNN = 2,
} HdDetectorKind;

/**
 * Opaque list of detections.
 */
typedef struct HdDetections HdDetections;

/**
 * Opaque detector handle.
 */
typedef struct HdDetector HdDetector;

/**
 * Opaque image handle.
 */
typedef struct HdImage HdImage;

/**
 * One detection in image pixel coordinates.
 */
typedef struct HdDetection {
  double x;
  double y;
  double w;
  double h;
  double score;
} HdDetection;

/**
 * Multiply-accumulate counts of one convolution shape.
 */
typedef struct HdComplexity {
  uint64_t conventional_macs;
  uint64_t separable_macs;
  double reduction;
} HdComplexity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `hd_*` call on this thread.
 */
const char *hd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hd_version(void);

/**
 * Loads a binary PGM (P5) or PPM (P6) file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HdStatus hd_image_load(const char *path, struct HdImage **out);

/**
 * Copies a row-major 8-bit grayscale buffer of `width × height` bytes.
 *
 * # Safety
 * `pixels` must point to `width * height` readable bytes; `out` must be valid.
 */
enum HdStatus hd_image_from_gray(const uint8_t *pixels,
                                 size_t width,
                                 size_t height,
                                 struct HdImage **out);

/**
 * Width in pixels, or 0 for a null handle.
 *
 * # Safety
 * `img` must be null or a handle from this library.
 */
size_t hd_image_width(const struct HdImage *img);

/**
 * Height in pixels, or 0 for a null handle.
 *
 * # Safety
 * `img` must be null or a handle from this library.
 */
size_t hd_image_height(const struct HdImage *img);

/**
 * # Safety
 * `img` must be null or an unfreed handle from this library.
 */
void hd_image_free(struct HdImage *img);

/**
 * Loads a model file of the given family with default thresholds.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HdStatus hd_detector_load(enum HdDetectorKind kind, const char *path, struct HdDetector **out);

/**
 * Sets the CNN confidence threshold and the duplicate-suppression IoU.
 * A negative `nms_iou` restores the detector's default.
 *
 * # Safety
 * `det` must be null or a handle from this library.
 */
enum HdStatus hd_detector_set_thresholds(struct HdDetector *det, double conf, double nms_iou);

/**
 * Runs the detector on an image.
 *
 * # Safety
 * `det` and `img` must be handles from this library; `out` must be valid.
 */
enum HdStatus hd_detector_run(const struct HdDetector *det,
                              const struct HdImage *img,
                              struct HdDetections **out);

/**
 * # Safety
 * `det` must be null or an unfreed handle from this library.
 */
void hd_detector_free(struct HdDetector *det);

/**
 * Number of detections, or 0 for a null handle.
 *
 * # Safety
 * `dets` must be null or a handle from this library.
 */
size_t hd_detections_len(const struct HdDetections *dets);

/**
 * Copies detection `index` into `out`.
 *
 * # Safety
 * `dets` must be a handle from this library and `out` a valid pointer.
 */
enum HdStatus hd_detections_get(const struct HdDetections *dets,
                                size_t index,
                                struct HdDetection *out);

/**
 * # Safety
 * `dets` must be null or an unfreed handle from this library.
 */
void hd_detections_free(struct HdDetections *dets);

/**
 * MAC counts of a `kernel × kernel` convolution from `in_channels` to
 * `out_channels` producing a `feature_side²` map, conventional versus
 * depthwise-separable.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HdStatus hd_complexity(uint32_t kernel,
                            uint32_t in_channels,
                            uint32_t out_channels,
                            uint32_t feature_side,
                            struct HdComplexity *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HUMANDET_H */

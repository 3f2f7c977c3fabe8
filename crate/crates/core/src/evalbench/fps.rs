use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Frames run before timing starts.
pub const WARMUP_FRAMES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsStats {
    /// Timed frames divided by timed seconds.
    pub fps_avg: f64,
    /// Most frames completed inside any one-second window, never below
    /// `fps_avg`.
    pub fps_peak: f64,
    /// Timed frames (warm-up excluded).
    pub frames: usize,
    /// Timed seconds.
    pub elapsed: f64,
}

/// Runs `detect` over `frames` (cycled) until `duration` has passed after
/// the warm-up frames.
pub fn bench_fps<T>(frames: &[T], duration: Duration, mut detect: impl FnMut(&T) -> Result<()>) -> Result<FpsStats> {
    if duration < Duration::from_secs(1) {
        return Err(Error::config("benchmark duration must be at least one second"));
    }
    if frames.is_empty() {
        return Err(Error::config("no frames to benchmark"));
    }
    let mut cycle = frames.iter().cycle();
    for _ in 0..WARMUP_FRAMES {
        detect(cycle.next().expect("non-empty cycle"))?;
    }
    let start = Instant::now();
    let mut done: Vec<f64> = Vec::new();
    while start.elapsed() < duration {
        detect(cycle.next().expect("non-empty cycle"))?;
        done.push(start.elapsed().as_secs_f64());
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok(summarize(&done, elapsed))
}

/// Average and peak rates from frame completion times (seconds from start).
pub fn summarize(completions: &[f64], elapsed: f64) -> FpsStats {
    let frames = completions.len();
    let fps_avg = if elapsed > 0.0 { frames as f64 / elapsed } else { 0.0 };
    let mut peak = 0usize;
    let mut lo = 0;
    for hi in 0..frames {
        while completions[hi] - completions[lo] >= 1.0 {
            lo += 1;
        }
        peak = peak.max(hi - lo + 1);
    }
    // a run shorter than one window would otherwise under-report
    let fps_peak = (peak as f64).max(fps_avg);
    FpsStats { fps_avg, fps_peak, frames, elapsed }
}

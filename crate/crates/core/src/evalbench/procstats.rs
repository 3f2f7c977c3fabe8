//! Per-process CPU and resident-memory sampling from `/proc`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BYTES_PER_MB: f64 = 1024.0 * 1024.0;

/// Cumulative CPU seconds and resident set size of a process right now.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcReading {
    pub cpu_seconds: f64,
    pub rss_mb: f64,
}

fn clock_ticks_per_second() -> f64 {
    // SAFETY: sysconf has no preconditions.
    let t = unsafe { libc::sysconf(libc::_SC_CLK_TCK) };
    if t > 0 {
        t as f64
    } else {
        100.0
    }
}

/// Reads `/proc/<pid>/stat` and `/proc/<pid>/status`. Fails once the
/// process is gone (a zombie has no resident set and counts as gone).
pub fn read_process(pid: u32) -> Result<ProcReading> {
    let stat = std::fs::read_to_string(format!("/proc/{pid}/stat"))?;
    let after = stat.rfind(')').map(|i| &stat[i + 1..]).ok_or_else(|| Error::format("malformed /proc stat line"))?;
    let fields: Vec<&str> = after.split_whitespace().collect();
    let tick = |i: usize| -> Result<u64> {
        fields.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Error::format("malformed /proc stat fields"))
    };
    // fields after the command name start at "state"; utime and stime follow
    let ticks = tick(11)? + tick(12)?;
    let status = std::fs::read_to_string(format!("/proc/{pid}/status"))?;
    let rss_kb: u64 = status
        .lines()
        .find_map(|l| l.strip_prefix("VmRSS:"))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::input(format!("process {pid} has no resident set")))?;
    Ok(ProcReading { cpu_seconds: ticks as f64 / clock_ticks_per_second(), rss_mb: rss_kb as f64 * 1024.0 / BYTES_PER_MB })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcSample {
    /// Seconds since sampling started.
    pub t: f64,
    /// CPU use since the previous sample; 100 means one core fully busy.
    pub cpu_percent: f64,
    pub rss_mb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub baseline_rss_mb: f64,
    pub samples: Vec<ProcSample>,
    /// The process disappeared before sampling was stopped.
    pub partial: bool,
}

impl SampleSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cpu_avg(&self) -> Option<f64> {
        (!self.samples.is_empty())
            .then(|| self.samples.iter().map(|s| s.cpu_percent).sum::<f64>() / self.samples.len() as f64)
    }

    pub fn rss_peak(&self) -> Option<f64> {
        self.samples.iter().map(|s| s.rss_mb).reduce(f64::max)
    }

    pub fn rss_mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.samples.iter().map(|s| s.rss_mb).sum::<f64>() / self.samples.len() as f64)
    }
}

fn run_sampler(pid: u32, period: Duration, stop: &AtomicBool, limit: Option<Duration>, first: ProcReading) -> SampleSeries {
    let start = Instant::now();
    let mut prev = (0.0, first.cpu_seconds);
    let mut series = SampleSeries { baseline_rss_mb: first.rss_mb, samples: Vec::new(), partial: false };
    for k in 1u32.. {
        let due = period * k;
        if limit.is_some_and(|l| due > l) {
            break;
        }
        loop {
            if stop.load(Ordering::Acquire) {
                return series;
            }
            let now = start.elapsed();
            if now >= due {
                break;
            }
            std::thread::sleep((due - now).min(Duration::from_millis(20)));
        }
        let t = start.elapsed().as_secs_f64();
        match read_process(pid) {
            Ok(r) => {
                let dt = t - prev.0;
                let cpu = if dt > 0.0 { (r.cpu_seconds - prev.1).max(0.0) / dt * 100.0 } else { 0.0 };
                series.samples.push(ProcSample { t, cpu_percent: cpu, rss_mb: r.rss_mb });
                prev = (t, r.cpu_seconds);
            }
            Err(_) => {
                series.partial = true;
                break;
            }
        }
    }
    series
}

/// Samples `pid` every `period` for `duration` on the calling thread.
pub fn sample_process_stats(pid: u32, period: Duration, duration: Duration) -> Result<SampleSeries> {
    if period.is_zero() {
        return Err(Error::config("sampling period must be positive"));
    }
    let first = read_process(pid)?;
    Ok(run_sampler(pid, period, &AtomicBool::new(false), Some(duration), first))
}

/// Background sampler that runs until [`ProcessSampler::finish`].
pub struct ProcessSampler {
    stop: Arc<AtomicBool>,
    handle: JoinHandle<SampleSeries>,
}

impl ProcessSampler {
    pub fn start(pid: u32, period: Duration) -> Result<Self> {
        if period.is_zero() {
            return Err(Error::config("sampling period must be positive"));
        }
        let first = read_process(pid)?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let handle = std::thread::spawn(move || run_sampler(pid, period, &flag, None, first));
        Ok(Self { stop, handle })
    }

    pub fn finish(self) -> SampleSeries {
        self.stop.store(true, Ordering::Release);
        self.handle.join().expect("sampler thread panicked")
    }
}

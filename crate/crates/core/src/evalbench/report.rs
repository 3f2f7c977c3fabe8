use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Summary of one detector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector: String,
    pub fps_avg: Option<f64>,
    pub fps_peak: Option<f64>,
    /// Percent of one core.
    pub cpu_avg: Option<f64>,
    /// Peak resident memory in MB.
    pub mem_peak: Option<f64>,
    /// Percent of emitted detections that are false.
    pub fpr: Option<f64>,
    /// Percent of ground-truth objects missed.
    pub fnr: Option<f64>,
    pub frames: u64,
    /// Seconds.
    pub duration: f64,
}

impl EvalReport {
    pub fn new(detector: impl Into<String>) -> Self {
        Self {
            detector: detector.into(),
            fps_avg: None,
            fps_peak: None,
            cpu_avg: None,
            mem_peak: None,
            fpr: None,
            fnr: None,
            frames: 0,
            duration: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(a), Some(p)) = (self.fps_avg, self.fps_peak) {
            if a > p {
                return Err(Error::input("average FPS exceeds peak FPS"));
            }
        }
        for r in [self.fpr, self.fnr].into_iter().flatten() {
            if !(0.0..=100.0).contains(&r) {
                return Err(Error::input("rates must lie in [0, 100]"));
            }
        }
        Ok(())
    }
}

/// Published figures for one detector family; `None` where no number is
/// stated in the text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedReference {
    pub name: &'static str,
    pub fps_avg: Option<f64>,
    pub fps_peak: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub mem_peak: Option<f64>,
}

pub const PUBLISHED_REFERENCES: [PublishedReference; 8] = [
    PublishedReference { name: "SSD-L-CNN", fps_avg: Some(1.79), fps_peak: Some(2.06), fpr: Some(6.6), fnr: Some(18.1), mem_peak: Some(139.5) },
    PublishedReference { name: "Haar Cascade", fps_avg: None, fps_peak: None, fpr: Some(26.3), fnr: Some(34.9), mem_peak: None },
    PublishedReference { name: "HOG+SVM", fps_avg: None, fps_peak: None, fpr: None, fnr: None, mem_peak: None },
    PublishedReference { name: "SSD-GoogleNet", fps_avg: Some(0.39), fps_peak: None, fpr: Some(5.3), fnr: Some(15.6), mem_peak: Some(320.4) },
    PublishedReference { name: "MobileNet", fps_avg: None, fps_peak: None, fpr: None, fnr: None, mem_peak: Some(172.2) },
    PublishedReference { name: "SqueezeNet", fps_avg: None, fps_peak: None, fpr: None, fnr: None, mem_peak: Some(145.3) },
    PublishedReference { name: "VGG", fps_avg: None, fps_peak: None, fpr: None, fnr: None, mem_peak: Some(2459.8) },
    PublishedReference { name: "stub", fps_avg: None, fps_peak: None, fpr: None, fnr: None, mem_peak: None },
];

/// Reference entry for a detector name (`lcnn`, `haar`, `hogsvm`, ...).
pub fn published_reference_for(detector: &str) -> Option<&'static PublishedReference> {
    let d = detector.to_ascii_lowercase();
    let key = if d.contains("lcnn") || d.contains("l-cnn") {
        "SSD-L-CNN"
    } else if d.contains("haar") {
        "Haar Cascade"
    } else if d.contains("hog") {
        "HOG+SVM"
    } else if d.contains("googlenet") {
        "SSD-GoogleNet"
    } else if d.contains("mobilenet") {
        "MobileNet"
    } else if d.contains("squeezenet") {
        "SqueezeNet"
    } else if d.contains("vgg") {
        "VGG"
    } else {
        return None;
    };
    PUBLISHED_REFERENCES.iter().find(|r| r.name == key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(Self::Table),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::config(format!("unknown report format {other:?}"))),
        }
    }
}

pub const COLUMNS: [&str; 9] = ["detector", "fps_avg", "fps_peak", "cpu_avg", "mem_peak", "fpr", "fnr", "frames", "duration"];
pub const REFERENCE_COLUMNS: [&str; 5] = ["ref_fps_avg", "ref_fps_peak", "ref_fpr", "ref_fnr", "ref_mem_peak"];

fn measures(r: &EvalReport) -> [Option<f64>; 6] {
    [r.fps_avg, r.fps_peak, r.cpu_avg, r.mem_peak, r.fpr, r.fnr]
}

fn reference_values(r: &EvalReport) -> [Option<f64>; 5] {
    published_reference_for(&r.detector).map_or([None; 5], |p| [p.fps_avg, p.fps_peak, p.fpr, p.fnr, p.mem_peak])
}

/// Renders reports with a fixed column order. `with_reference` appends the
/// published figures of each detector's family.
pub fn emit_report(reports: &[EvalReport], format: ReportFormat, with_reference: bool) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::input("no reports to emit"));
    }
    match format {
        ReportFormat::Json => Ok(emit_json(reports, with_reference)),
        ReportFormat::Csv => emit_csv(reports, with_reference),
        ReportFormat::Table => Ok(emit_table(reports, with_reference)),
    }
}

fn emit_json(reports: &[EvalReport], with_reference: bool) -> String {
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            let mut obj = match serde_json::to_value(r).expect("report serializes") {
                Value::Object(m) => m,
                _ => unreachable!("struct serializes to an object"),
            };
            if with_reference {
                for (k, v) in REFERENCE_COLUMNS.iter().zip(reference_values(r)) {
                    obj.insert((*k).to_string(), serde_json::to_value(v).expect("number"));
                }
            }
            // keep the documented column order
            let mut ordered = Map::new();
            for k in COLUMNS.iter().chain(REFERENCE_COLUMNS.iter()) {
                if let Some(v) = obj.remove(*k) {
                    ordered.insert((*k).to_string(), v);
                }
            }
            Value::Object(ordered)
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&Value::Array(rows)).expect("json");
    s.push('\n');
    s
}

fn opt_text(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn emit_csv(reports: &[EvalReport], with_reference: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_reference {
        header.extend(REFERENCE_COLUMNS);
    }
    let csv_err = |e: csv::Error| Error::format(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![r.detector.clone()];
        row.extend(measures(r).into_iter().map(opt_text));
        row.push(r.frames.to_string());
        row.push(r.duration.to_string());
        if with_reference {
            row.extend(reference_values(r).into_iter().map(opt_text));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn emit_table(reports: &[EvalReport], with_reference: bool) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.2}"));
    let mut header: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
    if with_reference {
        header.extend(REFERENCE_COLUMNS.iter().map(|s| s.to_string()));
    }
    let mut rows = vec![header];
    for r in reports {
        let mut row = vec![r.detector.clone()];
        row.extend(measures(r).into_iter().map(cell));
        row.push(r.frames.to_string());
        row.push(format!("{:.2}", r.duration));
        if with_reference {
            row.extend(reference_values(r).into_iter().map(cell));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

pub fn parse_json_reports(text: &str) -> Result<Vec<EvalReport>> {
    serde_json::from_str(text).map_err(|e| Error::format(format!("report JSON: {e}")))
}

pub fn parse_csv_reports(text: &str) -> Result<Vec<EvalReport>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(|e| Error::format(format!("report CSV: {e}")))).collect()
}

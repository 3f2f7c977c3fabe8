use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adaboost::WeakLearner;
use super::cascade::{CascadeModel, Stage};
use super::feature::{HaarFeature, HaarKind, WeightedRect};
use crate::error::{Error, Result};

const CASCADE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CascadeFile {
    version: u32,
    window: [u32; 2],
    stages: Vec<StageFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    threshold: f64,
    learners: Vec<LearnerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnerFile {
    kind: HaarKind,
    /// `[x, y, w, h, weight]`
    rects: Vec<[i64; 5]>,
    threshold: f64,
    polarity: i8,
    alpha: f64,
}

pub fn cascade_to_json(model: &CascadeModel) -> String {
    let file = CascadeFile {
        version: CASCADE_FORMAT_VERSION,
        window: [model.window_w, model.window_h],
        stages: model
            .stages
            .iter()
            .map(|s| StageFile {
                threshold: s.threshold,
                learners: s
                    .learners
                    .iter()
                    .map(|l| LearnerFile {
                        kind: l.feature.kind(),
                        rects: l
                            .feature
                            .rects()
                            .iter()
                            .map(|r| [r.x as i64, r.y as i64, r.w as i64, r.h as i64, r.weight as i64])
                            .collect(),
                        threshold: l.threshold,
                        polarity: l.polarity,
                        alpha: l.alpha,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("cascade serialises")
}

pub fn cascade_from_json(text: &str) -> Result<CascadeModel> {
    let file: CascadeFile =
        serde_json::from_str(text).map_err(|e| Error::format(format!("cascade json: {e}")))?;
    if file.version != CASCADE_FORMAT_VERSION {
        return Err(Error::format(format!("unsupported cascade version {}", file.version)));
    }
    let [ww, wh] = file.window;
    let u = |v: i64| u32::try_from(v).map_err(|_| Error::format(format!("rect coordinate {v} out of range")));
    let mut stages = Vec::with_capacity(file.stages.len());
    for s in file.stages {
        let mut learners = Vec::with_capacity(s.learners.len());
        for l in s.learners {
            let rects = l
                .rects
                .iter()
                .map(|r| {
                    let weight = i8::try_from(r[4]).map_err(|_| Error::format("rect weight out of range"))?;
                    Ok(WeightedRect { x: u(r[0])?, y: u(r[1])?, w: u(r[2])?, h: u(r[3])?, weight })
                })
                .collect::<Result<Vec<_>>>()?;
            let feature = HaarFeature::new(l.kind, rects, ww, wh)
                .map_err(|e| Error::format(format!("invalid feature: {e}")))?;
            learners.push(WeakLearner { feature, threshold: l.threshold, polarity: l.polarity, alpha: l.alpha });
        }
        stages.push(Stage { learners, threshold: s.threshold });
    }
    CascadeModel::new(ww, wh, stages).map_err(|e| Error::format(format!("invalid cascade: {e}")))
}

pub fn save_cascade(model: &CascadeModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, cascade_to_json(model))?;
    Ok(())
}

pub fn load_cascade(path: impl AsRef<Path>) -> Result<CascadeModel> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::format("cascade file is not UTF-8"))?;
    cascade_from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> CascadeModel {
        let f = HaarFeature::four_rect(2, 4, 3, 5, 24, 24).unwrap();
        let g = HaarFeature::three_rect_horizontal(0, 0, 8, 2, 24, 24).unwrap();
        let stages = vec![
            Stage {
                learners: vec![
                    WeakLearner { feature: f, threshold: -1.234567890123, polarity: -1, alpha: 0.1 + 0.2 },
                    WeakLearner { feature: g, threshold: 3.0e-17, polarity: 1, alpha: 11.512925464970229 },
                ],
                threshold: 0.0,
            },
        ];
        CascadeModel::new(24, 24, stages).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = sample_model();
        let text = cascade_to_json(&m);
        assert!(text.contains("\"version\": 1"));
        assert_eq!(cascade_from_json(&text).unwrap(), m);
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let text = cascade_to_json(&sample_model());
        let cases = [
            text[..text.len() / 2].to_string(),
            text.replace("\"version\": 1", "\"version\": 9"),
            text.replace("four-rect", "five-rect"),
            text.replacen("\"stages\": [", "\"stages\": [], \"x\": [", 1),
            "{\"version\":1,\"window\":[24,24],\"stages\":[]}".to_string(),
        ];
        for c in cases {
            assert!(matches!(cascade_from_json(&c), Err(Error::Format(_))), "{c}");
        }
    }
}

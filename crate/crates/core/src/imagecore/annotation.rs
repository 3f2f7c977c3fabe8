use std::collections::BTreeMap;

use super::{BoundingBox, Detection};
use crate::error::{Error, Result};

/// One line of an annotation or detection file:
/// `<image-id> <x> <y> <w> <h> <class-name> [score]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub image_id: String,
    pub bbox: BoundingBox,
    pub class: String,
    pub score: Option<f64>,
}

/// Ground-truth boxes grouped by image id.
pub type GroundTruth = BTreeMap<String, Vec<(BoundingBox, String)>>;

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationRecord>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 && fields.len() != 7 {
            return Err(Error::format(format!(
                "annotation line {}: expected 6 or 7 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(format!("annotation line {}: bad number {:?}", lineno + 1, fields[i])))
        };
        let bbox = BoundingBox::new(num(1)?, num(2)?, num(3)?, num(4)?);
        if !bbox.is_valid() {
            return Err(Error::format(format!("annotation line {}: empty box", lineno + 1)));
        }
        let score = if fields.len() == 7 { Some(num(6)?) } else { None };
        out.push(AnnotationRecord { image_id: fields[0].to_string(), bbox, class: fields[5].to_string(), score });
    }
    Ok(out)
}

impl AnnotationRecord {
    pub fn into_detection(self) -> Detection {
        Detection::new(self.bbox, self.class, self.score.unwrap_or(1.0))
    }
}

/// Groups records by image id, dropping scores.
pub fn ground_truth(records: &[AnnotationRecord]) -> GroundTruth {
    let mut gt = GroundTruth::new();
    for r in records {
        gt.entry(r.image_id.clone()).or_default().push((r.bbox, r.class.clone()));
    }
    gt
}

/// Detection line with the score appended as a seventh column.
pub fn format_detection_line(image_id: &str, det: &Detection) -> String {
    let b = &det.bbox;
    format!("{image_id} {} {} {} {} {} {}", b.x, b.y, b.w, b.h, det.label, det.score)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_scores() {
        let text = "# id x y w h class\nimg1 1 2 3 4 person\n\nimg2 0 0 10 20 person 0.75\n";
        let recs = parse_annotations(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].bbox, BoundingBox::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(recs[0].score, None);
        assert_eq!(recs[1].score, Some(0.75));
        let gt = ground_truth(&recs);
        assert_eq!(gt["img1"].len(), 1);
    }

    #[test]
    fn detection_line_parses_back() {
        let d = Detection::new(BoundingBox::new(1.5, 2.0, 3.0, 4.25), "person", 0.125);
        let rec = &parse_annotations(&format_detection_line("a", &d)).unwrap()[0];
        assert_eq!(rec.clone().into_detection(), d);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_annotations("img 1 2 3 person").is_err());
        assert!(parse_annotations("img a 2 3 4 person").is_err());
        assert!(parse_annotations("img 0 0 0 4 person").is_err());
    }
}

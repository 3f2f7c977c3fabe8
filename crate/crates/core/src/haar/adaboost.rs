use super::feature::HaarFeature;
use crate::error::{Error, Result};
use crate::imagecore::{Image, IntegralImage};

/// Lower clamp for a round's weighted error, so a perfect stump still gets
/// a finite weight.
pub const ERROR_FLOOR: f64 = 1e-10;

/// One training window and its ±1 label.
#[derive(Debug, Clone)]
pub struct LabeledWindow {
    pub ii: IntegralImage,
    pub label: i8,
}

impl LabeledWindow {
    pub fn from_image(img: &Image, label: i8) -> Result<Self> {
        let gray = crate::imagecore::to_grayscale(img);
        Ok(Self { ii: crate::imagecore::integral(&gray)?, label })
    }
}

/// Decision stump on a Haar feature, weighted by `alpha` in the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLearner {
    pub feature: HaarFeature,
    pub threshold: f64,
    pub polarity: i8,
    pub alpha: f64,
}

#[inline]
fn stump_vote(response: f64, threshold: f64, polarity: i8) -> i8 {
    if polarity as f64 * (response - threshold) >= 0.0 {
        1
    } else {
        -1
    }
}

impl WeakLearner {
    /// h(x) ∈ {+1, −1} for a precomputed feature response.
    #[inline]
    pub fn vote(&self, response: f64) -> i8 {
        stump_vote(response, self.threshold, self.polarity)
    }

    /// h(x) on a window whose top-left corner is at `(x, y)` in `ii`.
    #[inline]
    pub fn vote_at(&self, ii: &IntegralImage, x: usize, y: usize) -> i8 {
        self.vote(self.feature.response_at(ii, x, y))
    }
}

/// Stump selected by [`boost_stumps`], indexing into the candidate list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub candidate: usize,
    pub threshold: f64,
    pub polarity: i8,
    pub alpha: f64,
    /// weighted error of this stump in its round (before clamping)
    pub error: f64,
}

impl Stump {
    #[inline]
    pub fn vote(&self, response: f64) -> i8 {
        stump_vote(response, self.threshold, self.polarity)
    }
}

/// α = ½ ln((1 − ε) / ε), with ε clamped to `[ERROR_FLOOR, 1 − ERROR_FLOOR]`.
pub fn alpha_from_error(eps: f64) -> f64 {
    let e = eps.clamp(ERROR_FLOOR, 1.0 - ERROR_FLOOR);
    0.5 * ((1.0 - e) / e).ln()
}

/// Weighted misclassification rate of `learner` on full-window samples.
pub fn weak_learner_error(learner: &WeakLearner, samples: &[LabeledWindow], weights: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::input("no samples"));
    }
    if weights.len() != samples.len() {
        return Err(Error::input("weights and samples differ in length"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::input(format!("weights must be non-negative and sum to 1, sum = {total}")));
    }
    Ok(samples
        .iter()
        .zip(weights)
        .filter(|(s, _)| learner.vote_at(&s.ii, 0, 0) != s.label)
        .map(|(_, w)| w)
        .sum())
}

/// Best (threshold, polarity) for one candidate's responses.
///
/// Thresholds sit at midpoints between consecutive distinct sorted
/// responses, plus one below the minimum and one above the maximum.
fn best_split(responses: &[f64], labels: &[i8], weights: &[f64], order: &mut Vec<usize>) -> (f64, i8, f64) {
    order.clear();
    order.extend(0..responses.len());
    order.sort_by(|&a, &b| responses[a].total_cmp(&responses[b]));

    let total_neg: f64 = labels.iter().zip(weights).filter(|(l, _)| **l < 0).map(|(_, w)| w).sum();
    let total: f64 = weights.iter().sum();
    // split s: samples order[..s] predicted negative under polarity +1
    let mut err_plus = total_neg;
    let mut best = {
        let lo = responses[order[0]] - 1.0;
        if err_plus <= total - err_plus {
            (lo, 1i8, err_plus)
        } else {
            (lo, -1i8, total - err_plus)
        }
    };
    let n = order.len();
    for s in 1..=n {
        let i = order[s - 1];
        if labels[i] > 0 {
            err_plus += weights[i];
        } else {
            err_plus -= weights[i];
        }
        if s < n && responses[order[s]] == responses[i] {
            continue;
        }
        let threshold = if s == n {
            responses[i] + 1.0
        } else {
            0.5 * (responses[i] + responses[order[s]])
        };
        let err_minus = total - err_plus;
        if err_plus < best.2 {
            best = (threshold, 1, err_plus);
        }
        if err_minus < best.2 {
            best = (threshold, -1, err_minus);
        }
    }
    (best.0, best.1, best.2.max(0.0))
}

/// Discrete AdaBoost over precomputed responses.
///
/// `responses[c][i]` is candidate `c` evaluated on sample `i`. Each round
/// picks the stump with least weighted error, assigns α from that error,
/// reweights `w_i ← w_i · exp(−α y_i h(x_i))` and renormalises.
pub fn boost_stumps(responses: &[Vec<f64>], labels: &[i8], rounds: usize) -> Result<Vec<Stump>> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::input("no samples"));
    }
    if rounds == 0 {
        return Err(Error::config("boosting needs at least one round"));
    }
    if responses.is_empty() {
        return Err(Error::input("no candidate features"));
    }
    if labels.iter().any(|&l| l != 1 && l != -1) {
        return Err(Error::input("labels must be ±1"));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::input("both classes must be present"));
    }
    if responses.iter().any(|r| r.len() != n) {
        return Err(Error::input("response rows must match sample count"));
    }

    let mut weights = vec![1.0 / n as f64; n];
    let mut order = Vec::with_capacity(n);
    let mut stumps = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut pick: Option<Stump> = None;
        for (c, resp) in responses.iter().enumerate() {
            let (threshold, polarity, error) = best_split(resp, labels, &weights, &mut order);
            if pick.map_or(true, |p| error < p.error) {
                pick = Some(Stump { candidate: c, threshold, polarity, alpha: 0.0, error });
            }
        }
        let mut stump = pick.expect("non-empty candidates");
        stump.alpha = alpha_from_error(stump.error);
        let resp = &responses[stump.candidate];
        for i in 0..n {
            let margin = labels[i] as f64 * stump.vote(resp[i]) as f64;
            weights[i] *= (-stump.alpha * margin).exp();
        }
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= z);
        stumps.push(stump);
    }
    Ok(stumps)
}

/// sign(Σ α_t h_t) for sample `i` using the first `upto` stumps; ties → +1.
pub fn ensemble_predict(stumps: &[Stump], responses: &[Vec<f64>], i: usize) -> i8 {
    let score: f64 = stumps.iter().map(|s| s.alpha * s.vote(responses[s.candidate][i]) as f64).sum();
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

/// Trains `rounds` weak learners on full-window samples.
pub fn adaboost_train(samples: &[LabeledWindow], rounds: usize, candidates: &[HaarFeature]) -> Result<Vec<WeakLearner>> {
    if samples.is_empty() {
        return Err(Error::input("no samples"));
    }
    if candidates.is_empty() {
        return Err(Error::input("no candidate features"));
    }
    let (ww, wh) = candidates[0].window();
    for s in samples {
        if s.ii.width() < ww as usize || s.ii.height() < wh as usize {
            return Err(Error::input(format!(
                "sample {}x{} smaller than feature window {ww}x{wh}",
                s.ii.width(),
                s.ii.height()
            )));
        }
    }
    let labels: Vec<i8> = samples.iter().map(|s| s.label).collect();
    let responses: Vec<Vec<f64>> = candidates
        .iter()
        .map(|f| samples.iter().map(|s| f.response_at(&s.ii, 0, 0)).collect())
        .collect();
    let stumps = boost_stumps(&responses, &labels, rounds)?;
    Ok(stumps
        .into_iter()
        .map(|s| WeakLearner {
            feature: candidates[s.candidate].clone(),
            threshold: s.threshold,
            polarity: s.polarity,
            alpha: s.alpha,
        })
        .collect())
}

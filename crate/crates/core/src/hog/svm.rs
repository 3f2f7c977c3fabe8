use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::descriptor::{hog_descriptor, HogConfig};
use crate::error::{Error, Result};
use crate::imagecore::Image;

/// Pegasos hyper-parameters.
#[derive(Debug, Clone, Copy)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { lambda: 1e-3, epochs: 50, seed: 42 }
    }
}

/// Result of [`svm_train`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// primal objective after each epoch
    pub objective: Vec<f64>,
}

impl SvmFit {
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `λ/2 (‖w‖² + b²) + mean hinge loss`. The bias is treated as the weight
/// of a constant-one feature, so it is regularised too.
pub fn hinge_objective(weights: &[f64], bias: f64, lambda: f64, xs: &[Vec<f64>], ys: &[i8]) -> f64 {
    let reg = 0.5 * lambda * (dot(weights, weights) + bias * bias);
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - y as f64 * (dot(weights, x) + bias)).max(0.0))
        .sum();
    reg + hinge / xs.len() as f64
}

/// Primal Pegasos SGD on the hinge loss with step `1/(λt)` and projection
/// onto the ball of radius `1/√λ`. Sample order is shuffled per epoch from
/// `seed`, so training is deterministic.
pub fn svm_train(xs: &[Vec<f64>], ys: &[i8], params: &SvmParams) -> Result<SvmFit> {
    if xs.is_empty() {
        return Err(Error::input("no training descriptors"));
    }
    if xs.len() != ys.len() {
        return Err(Error::input("descriptor and label counts differ"));
    }
    if ys.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::input("labels must be ±1"));
    }
    if !ys.contains(&1) || !ys.contains(&-1) {
        return Err(Error::input("both classes must be present"));
    }
    if !(params.lambda > 0.0) || params.epochs == 0 {
        return Err(Error::config("lambda must be positive and epochs >= 1"));
    }
    let dim = xs[0].len();
    if xs.iter().any(|x| x.len() != dim) {
        return Err(Error::input("descriptors differ in length"));
    }

    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut objective = Vec::with_capacity(params.epochs);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = ys[i] as f64;
            let margin = y * (dot(&w, &xs[i]) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                for (wv, xv) in w.iter_mut().zip(&xs[i]) {
                    *wv += eta * y * xv;
                }
                b += eta * y;
            }
            let norm = (dot(&w, &w) + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
        }
        objective.push(hinge_objective(&w, b, lambda, xs, ys));
    }
    Ok(SvmFit { weights: w, bias: b, objective })
}

/// Linear SVM over HOG descriptors. Weights are stored at `f32` precision,
/// matching the on-disk format.
#[derive(Debug, Clone, PartialEq)]
pub struct HogSvmModel {
    pub config: HogConfig,
    pub weights: Vec<f32>,
    pub bias: f64,
}

impl HogSvmModel {
    pub fn new(config: HogConfig, weights: Vec<f32>, bias: f64) -> Result<Self> {
        config.validate()?;
        if weights.len() != config.descriptor_len() {
            return Err(Error::config(format!(
                "weight vector has {} entries, config needs {}",
                weights.len(),
                config.descriptor_len()
            )));
        }
        Ok(Self { config, weights, bias })
    }

    pub fn from_fit(config: HogConfig, fit: &SvmFit) -> Result<Self> {
        Self::new(config, fit.weights.iter().map(|&v| v as f32).collect(), fit.bias)
    }
}

/// `w · x + b`.
pub fn svm_score(model: &HogSvmModel, descriptor: &[f64]) -> Result<f64> {
    if descriptor.len() != model.weights.len() {
        return Err(Error::config(format!(
            "descriptor length {} does not match model length {}",
            descriptor.len(),
            model.weights.len()
        )));
    }
    Ok(model.weights.iter().zip(descriptor).map(|(&w, &x)| w as f64 * x).sum::<f64>() + model.bias)
}

/// Extracts descriptors from labelled windows and trains the SVM.
pub fn train_hog_svm(
    windows: &[Image],
    labels: &[i8],
    config: HogConfig,
    params: &SvmParams,
) -> Result<(HogSvmModel, SvmFit)> {
    let xs: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| hog_descriptor(w, &config).map(|d| d.0))
        .collect::<Result<_>>()?;
    let fit = svm_train(&xs, labels, params)?;
    Ok((HogSvmModel::from_fit(config, &fit)?, fit))
}

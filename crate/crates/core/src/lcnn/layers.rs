use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;

/// Inference-form batch normalization with per-channel statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Gradients of a batch-norm layer.
#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub input: Tensor,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNorm {
    /// γ = 1, β = 0, mean 0, var 1.
    pub fn identity(channels: usize) -> Self {
        Self { gamma: vec![1.0; channels], beta: vec![0.0; channels], mean: vec![0.0; channels], var: vec![1.0; channels] }
    }

    pub fn new(gamma: Vec<f64>, beta: Vec<f64>, mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        let bn = Self { gamma, beta, mean, var };
        bn.check(bn.gamma.len())?;
        if bn.var.iter().any(|v| *v < 0.0) {
            return Err(Error::shape("batch-norm variance must be non-negative"));
        }
        Ok(bn)
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, channels: usize) -> Result<()> {
        let lens = [self.gamma.len(), self.beta.len(), self.mean.len(), self.var.len()];
        if lens.iter().any(|l| *l != channels) {
            return Err(Error::shape(format!("batch-norm parameter lengths {lens:?} do not match {channels} channels")));
        }
        Ok(())
    }

    fn inv_std(&self, c: usize) -> f64 {
        1.0 / (self.var[c] + BN_EPSILON).sqrt()
    }

    /// `(x − mean) / √(var + ε) · γ + β` per channel.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        self.check(input.channels())?;
        let mut out = input.clone();
        for c in 0..input.channels() {
            let scale = self.gamma[c] * self.inv_std(c);
            let (mean, beta) = (self.mean[c], self.beta[c]);
            out.plane_mut(c).iter_mut().for_each(|v| *v = (*v - mean) * scale + beta);
        }
        Ok(out)
    }

    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<BatchNormGrads> {
        self.check(input.channels())?;
        if input.shape() != grad_out.shape() {
            return Err(Error::shape("batch-norm gradient shape mismatch"));
        }
        let mut gi = grad_out.clone();
        let mut gg = vec![0.0; self.channels()];
        let mut gb = vec![0.0; self.channels()];
        for c in 0..input.channels() {
            let inv = self.inv_std(c);
            let go = grad_out.plane(c);
            gb[c] = go.iter().sum();
            gg[c] = go.iter().zip(input.plane(c)).map(|(g, x)| g * (x - self.mean[c]) * inv).sum();
            let scale = self.gamma[c] * inv;
            gi.plane_mut(c).iter_mut().for_each(|v| *v *= scale);
        }
        Ok(BatchNormGrads { input: gi, gamma: gg, beta: gb })
    }
}

/// Free-function form: `(x − mean)/√(var+ε)·γ + β`.
pub fn batchnorm(input: &Tensor, gamma: &[f64], beta: &[f64], mean: &[f64], var: &[f64]) -> Result<Tensor> {
    BatchNorm::new(gamma.to_vec(), beta.to_vec(), mean.to_vec(), var.to_vec())?.forward(input)
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Passes gradient where the forward input was positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, x) in g.data_mut().iter_mut().zip(input.data()) {
        if *x <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Gradient through softmax given dL/dp: `dL/dz_i = p_i (g_i − Σ_j g_j p_j)`.
pub fn softmax_backward(probs: &[f64], grad_probs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(grad_probs).map(|(p, g)| p * g).sum();
    probs.iter().zip(grad_probs).map(|(p, g)| p * (g - dot)).collect()
}

/// Mean squared error `(1/n) Σ (ŷ − y)²` and its gradient with respect to ŷ.
pub fn mse(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(pred.len(), target.len(), "mse length mismatch");
    if pred.is_empty() {
        return (0.0, Vec::new());
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    (loss, grad)
}

/// Smooth-L1 (Huber with δ = 1) of one residual and its derivative.
pub fn smooth_l1(x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

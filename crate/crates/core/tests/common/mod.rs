//! Independent oracles and the acceptance checks built on them.
//!
//! Every `check_*` function returns `Ok(detail)` when the criterion holds
//! and `Err(detail)` otherwise, so the same code backs both the focused
//! test files and the acceptance summary.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use humandet::evalbench::{bench_fps, match_detections, rates, sample_process_stats, MatchCounts};
use humandet::haar::{
    alpha_from_error, boost_stumps, cascade_detect, cascade_from_json, cascade_to_json, ensemble_predict,
    generate_candidates, train_cascade, CascadeTrainConfig, DetectParams,
};
use humandet::hog::{
    cell_histogram, compute_gradients, detect_multiscale, hog_descriptor, hog_model_from_json, hog_model_to_json,
    svm_train, train_hog_svm, HogConfig, HogDetectParams, MergeRule, SvmParams,
};
use humandet::imagecore::{integral, merge_biggest_box, nms};
use humandet::lcnn::{
    build_lcnn, conv2d, conv2d_im2col, conv_backward, conv_forward, depthwise_conv, detection_loss,
    factorized_equals_composed, compose_separable, model_from_bytes, model_to_bytes, pointwise_conv, relu,
    relu_backward, softmax, softmax_backward, mse, ssd_detect, train_toy, BatchNorm, CnnModel,
    ConvKernel, ConvKind, ConvShape, HeadOutput, LayerSpec, LcnnConfig, Targets, Tensor, ToySample, TrainConfig,
    TrainReport,
};
use humandet::lcnn::reference::{conv_counted, separable_counted};
use humandet::{BoundingBox, Detection, Error, Image};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

pub fn random_tensor(r: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor {
    Tensor::new(c, h, w, uniform_vec(r, c * h * w)).unwrap()
}

/// `|a − b| / max(|a|, |b|, floor)` over all elements.
pub fn rel_diff(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// convolution oracles: plain loops with bounds tests instead of padding

/// Conventional convolution with weights `w[n][m][i][j]`.
pub fn oracle_conv(x: &Tensor, out_ch: usize, w: &[f64], k: usize, stride: usize, pad: usize) -> Tensor {
    let (m_ch, h, wd) = x.shape();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = Tensor::zeros(out_ch, oh, ow);
    for n in 0..out_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for m in 0..m_ch {
                    for i in 0..k {
                        for j in 0..k {
                            let iy = (oy * stride + i) as isize - pad as isize;
                            let ix = (ox * stride + j) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                continue;
                            }
                            acc += w[((n * m_ch + m) * k + i) * k + j] * x.get(m, iy as usize, ix as usize);
                        }
                    }
                }
                out.set(n, oy, ox, acc);
            }
        }
    }
    out
}

/// Per-channel convolution with weights `w[m][i][j]`.
pub fn oracle_depthwise(x: &Tensor, w: &[f64], k: usize, stride: usize, pad: usize) -> Tensor {
    let (m_ch, h, wd) = x.shape();
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = Tensor::zeros(m_ch, oh, ow);
    for m in 0..m_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for i in 0..k {
                    for j in 0..k {
                        let iy = (oy * stride + i) as isize - pad as isize;
                        let ix = (ox * stride + j) as isize - pad as isize;
                        if iy >= 0 && ix >= 0 && iy < h as isize && ix < wd as isize {
                            acc += w[(m * k + i) * k + j] * x.get(m, iy as usize, ix as usize);
                        }
                    }
                }
                out.set(m, oy, ox, acc);
            }
        }
    }
    out
}

/// 1×1 channel mixing with weights `w[n][m]`.
pub fn oracle_pointwise(x: &Tensor, out_ch: usize, w: &[f64]) -> Tensor {
    let (m_ch, h, wd) = x.shape();
    Tensor::from_fn(out_ch, h, wd, |n, y, xx| (0..m_ch).map(|m| w[n * m_ch + m] * x.get(m, y, xx)).sum())
}

#[derive(Debug, Clone, Copy)]
pub struct ConvCase {
    pub m: usize,
    pub n: usize,
    pub side: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

pub fn random_case(r: &mut ChaCha8Rng) -> ConvCase {
    let k: usize = [1, 3, 5][r.gen_range(0..3)];
    let pad = r.gen_range(0..=k / 2);
    let side = r.gen_range(k.saturating_sub(2 * pad).max(1)..=32);
    ConvCase { m: r.gen_range(1..=16), n: r.gen_range(1..=16), side, k, stride: r.gen_range(1..=2), pad }
}

pub fn check_conv_oracles(cases: usize) -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(1001);
    let mut worst = [0.0f64; 3];
    for _ in 0..cases {
        let c = random_case(&mut r);
        let x = random_tensor(&mut r, c.m, c.side, c.side);

        let w = uniform_vec(&mut r, c.n * c.m * c.k * c.k);
        let kern = ConvKernel::conventional(c.n, c.m, c.k, c.stride, c.pad, w.clone()).map_err(|e| e.to_string())?;
        let want = oracle_conv(&x, c.n, &w, c.k, c.stride, c.pad);
        for got in [conv2d(&x, &kern), conv2d_im2col(&x, &kern), conv_forward(&x, &kern)] {
            let got = got.map_err(|e| format!("conv2d {c:?}: {e}"))?;
            worst[0] = worst[0].max(rel_diff(got.data(), want.data(), 1e-9));
        }

        let w = uniform_vec(&mut r, c.m * c.k * c.k);
        let kern = ConvKernel::depthwise(c.m, c.k, c.stride, c.pad, w.clone()).map_err(|e| e.to_string())?;
        let want = oracle_depthwise(&x, &w, c.k, c.stride, c.pad);
        for got in [depthwise_conv(&x, &kern), conv_forward(&x, &kern)] {
            let got = got.map_err(|e| format!("depthwise {c:?}: {e}"))?;
            worst[1] = worst[1].max(rel_diff(got.data(), want.data(), 1e-9));
        }

        let w = uniform_vec(&mut r, c.n * c.m);
        let kern = ConvKernel::pointwise(c.n, c.m, w.clone()).map_err(|e| e.to_string())?;
        let want = oracle_pointwise(&x, c.n, &w);
        for got in [pointwise_conv(&x, &kern), conv_forward(&x, &kern)] {
            let got = got.map_err(|e| format!("pointwise {c:?}: {e}"))?;
            worst[2] = worst[2].max(rel_diff(got.data(), want.data(), 1e-9));
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "{cases} shapes, max rel err conv {:.1e} dw {:.1e} pw {:.1e}, {:.1}s",
        worst[0],
        worst[1],
        worst[2],
        elapsed.as_secs_f64()
    );
    if worst.iter().all(|w| *w <= 1e-5) && elapsed < Duration::from_secs(60) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// multiply counts

pub fn conventional_mults(k: u64, m: u64, n: u64, side: u64) -> u64 {
    k * k * m * n * side * side
}

pub fn separable_mults(k: u64, m: u64, n: u64, side: u64) -> u64 {
    k * k * m * side * side + m * n * side * side
}

pub fn check_cost_ratio(tuples: usize) -> Result<String, String> {
    let mut r = rng(2002);
    let mut worst = 0.0f64;
    for t in 0..tuples {
        let k = [1u64, 3, 5, 7][r.gen_range(0..4)];
        let (m, n, side) = (r.gen_range(1..=16u64), r.gen_range(1..=16u64), r.gen_range(1..=12u64));
        let shape = ConvShape::new(k, m, n, side);
        let expect = 1.0 / n as f64 + 1.0 / (k * k) as f64;
        worst = worst.max((shape.reduction() - expect).abs());
        if shape.conventional_macs() != conventional_mults(k, m, n, side)
            || shape.separable_macs() != separable_mults(k, m, n, side)
        {
            return Err(format!("tuple {t}: analyzer MACs differ for {k},{m},{n},{side}"));
        }

        // same-padded stride-1 layers keep the output side equal to `side`
        let (ku, mu, nu, su) = (k as usize, m as usize, n as usize, side as usize);
        let pad = ku / 2;
        let x = random_tensor(&mut r, mu, su, su);
        let conv = ConvKernel::conventional(nu, mu, ku, 1, pad, uniform_vec(&mut r, nu * mu * ku * ku)).unwrap();
        let dw = ConvKernel::depthwise(mu, ku, 1, pad, uniform_vec(&mut r, mu * ku * ku)).unwrap();
        let pw = ConvKernel::pointwise(nu, mu, uniform_vec(&mut r, nu * mu)).unwrap();
        let full = conv_counted(&x, &conv).map_err(|e| e.to_string())?;
        let sep = separable_counted(&x, &dw, &pw).map_err(|e| e.to_string())?;
        if full.multiplies != conventional_mults(k, m, n, side) || sep.multiplies != separable_mults(k, m, n, side) {
            return Err(format!(
                "tuple {t} ({k},{m},{n},{side}): counted {} / {} multiplies",
                full.multiplies, sep.multiplies
            ));
        }
        let ratio = sep.multiplies as f64 / full.multiplies as f64;
        worst = worst.max((ratio - expect).abs());
    }
    let detail = format!("{tuples} tuples, max |ratio − (1/N + 1/k²)| = {worst:.1e}, counts exact");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// factorization

pub fn check_factorization(instances: usize) -> Result<String, String> {
    let mut r = rng(3003);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let c = random_case(&mut r);
        let (m, n, k) = (c.m.min(12), c.n.min(12), c.k);
        let side = c.side.clamp(k, 20);
        let x = random_tensor(&mut r, m, side, side);
        let dw_w = uniform_vec(&mut r, m * k * k);
        let pw_w = uniform_vec(&mut r, n * m);
        let dw = ConvKernel::depthwise(m, k, c.stride, c.pad, dw_w.clone()).unwrap();
        let pw = ConvKernel::pointwise(n, m, pw_w.clone()).unwrap();

        let mut composed = vec![0.0; n * m * k * k];
        for o in 0..n {
            for ch in 0..m {
                for t in 0..k * k {
                    composed[(o * m + ch) * k * k + t] = pw_w[o * m + ch] * dw_w[ch * k * k + t];
                }
            }
        }
        let want = oracle_conv(&x, n, &composed, k, c.stride, c.pad);
        let got = pointwise_conv(&depthwise_conv(&x, &dw).unwrap(), &pw).unwrap();
        worst = worst.max(rel_diff(got.data(), want.data(), 1e-9));

        let lib = compose_separable(&dw, &pw).map_err(|e| e.to_string())?;
        if lib.kind != ConvKind::Conventional || rel_diff(&lib.weights, &composed, 1e-12) > 1e-12 {
            return Err("library composition differs from outer product".into());
        }
        worst = worst.max(factorized_equals_composed(&dw, &pw, &x).map_err(|e| e.to_string())?);
    }
    let detail = format!("{instances} instances, max rel err {worst:.1e}");
    if worst <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// finite differences

pub const FD_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-3;
/// Gradients below this magnitude are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-3;

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_diff(x: &[f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = x.to_vec();
    p[i] = x[i] + FD_STEP;
    let up = f(&p);
    p[i] = x[i] - FD_STEP;
    let down = f(&p);
    (up - down) / (2.0 * FD_STEP)
}

/// Largest relative gap between `analytic` and central differences of `f`
/// over every coordinate of `x`.
pub fn fd_gap(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let numeric: Vec<f64> = (0..x.len()).map(|i| central_diff(x, i, &mut f)).collect();
    rel_diff(analytic, &numeric, GRAD_FLOOR)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Input, weight and bias gradient gaps of one kernel under `L = Σ r ⊙ y`.
pub fn conv_grad_gaps(x: &Tensor, kern: &ConvKernel, r: &mut ChaCha8Rng) -> [f64; 3] {
    let out = conv_forward(x, kern).unwrap();
    let (oc, oh, ow) = out.shape();
    let probe = random_tensor(r, oc, oh, ow);
    let g = conv_backward(x, kern, &probe).unwrap();
    let (c, h, w) = x.shape();
    let gi = fd_gap(x.data(), g.input.data(), |d| {
        dot(conv_forward(&Tensor::new(c, h, w, d.to_vec()).unwrap(), kern).unwrap().data(), probe.data())
    });
    let gw = fd_gap(&kern.weights, &g.weights, |d| {
        let k = ConvKernel { weights: d.to_vec(), ..kern.clone() };
        dot(conv_forward(x, &k).unwrap().data(), probe.data())
    });
    let gb = match (&kern.bias, &g.bias) {
        (Some(b), Some(gb)) => fd_gap(b, gb, |d| {
            let k = ConvKernel { bias: Some(d.to_vec()), ..kern.clone() };
            dot(conv_forward(x, &k).unwrap().data(), probe.data())
        }),
        _ => 0.0,
    };
    [gi, gw, gb]
}

pub fn batchnorm_grad_gaps(x: &Tensor, bn: &BatchNorm, r: &mut ChaCha8Rng) -> [f64; 3] {
    let (c, h, w) = x.shape();
    let probe = random_tensor(r, c, h, w);
    let g = bn.backward(x, &probe).unwrap();
    let loss = |bn: &BatchNorm, x: &Tensor| dot(bn.forward(x).unwrap().data(), probe.data());
    let gi = fd_gap(x.data(), g.input.data(), |d| loss(bn, &Tensor::new(c, h, w, d.to_vec()).unwrap()));
    let gg = fd_gap(&bn.gamma, &g.gamma, |d| loss(&BatchNorm { gamma: d.to_vec(), ..bn.clone() }, x));
    let gb = fd_gap(&bn.beta, &g.beta, |d| loss(&BatchNorm { beta: d.to_vec(), ..bn.clone() }, x));
    [gi, gg, gb]
}

/// ReLU input gradient; inputs are kept away from the kink.
pub fn relu_grad_gap(r: &mut ChaCha8Rng) -> f64 {
    let x = Tensor::from_fn(3, 5, 5, |_, _, _| {
        let v: f64 = r.gen_range(0.01..1.0);
        if r.gen_bool(0.5) {
            v
        } else {
            -v
        }
    });
    let probe = random_tensor(r, 3, 5, 5);
    let g = relu_backward(&x, &probe);
    fd_gap(x.data(), g.data(), |d| dot(relu(&Tensor::new(3, 5, 5, d.to_vec()).unwrap()).data(), probe.data()))
}

/// Softmax followed by mean squared error against a one-hot target.
pub fn softmax_mse_grad_gap(r: &mut ChaCha8Rng, classes: usize) -> f64 {
    let logits: Vec<f64> = (0..classes).map(|_| r.gen_range(-3.0..3.0)).collect();
    let mut target = vec![0.0; classes];
    target[r.gen_range(0..classes)] = 1.0;
    let p = softmax(&logits);
    let (_, dp) = mse(&p, &target);
    let analytic = softmax_backward(&p, &dp);
    fd_gap(&logits, &analytic, |z| mse(&softmax(z), &target).0)
}

/// Gradient of the full detection loss (class MSE over mined boxes plus
/// smooth-L1 offsets) with respect to logits and offsets.
pub fn detection_loss_grad_gaps(r: &mut ChaCha8Rng, boxes: usize) -> [f64; 2] {
    let logits: Vec<f64> = (0..boxes * 2).map(|_| r.gen_range(-2.0..2.0)).collect();
    let offsets: Vec<f64> = (0..boxes * 4).map(|_| r.gen_range(-2.0..2.0)).collect();
    let labels: Vec<usize> = (0..boxes).map(|i| usize::from(i % 5 == 0)).collect();
    let targets = Targets {
        offsets: labels
            .iter()
            .map(|l| (*l == 1).then(|| [r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5), 0.3, -0.2]))
            .collect(),
        labels,
    };
    let out = HeadOutput { classes: 2, logits: logits.clone(), offsets: offsets.clone() };
    let (_, gl, go) = detection_loss(&out, &targets, Some(3));
    let loss = |l: &[f64], o: &[f64]| {
        detection_loss(&HeadOutput { classes: 2, logits: l.to_vec(), offsets: o.to_vec() }, &targets, Some(3)).0.total()
    };
    [fd_gap(&logits, &gl, |l| loss(l, &offsets)), fd_gap(&offsets, &go, |o| loss(&logits, o))]
}

/// Result of the whole-network spot check.
#[derive(Debug, Clone, Copy)]
pub struct ModelGradCheck {
    pub worst: f64,
    pub checked: usize,
    /// Coordinates whose step crossed a ReLU kink.
    pub skipped: usize,
}

/// Backpropagation through a whole small network, checked on `samples`
/// randomly chosen entries of every parameter tensor.
///
/// With a linear probe loss the network is piecewise linear in any single
/// parameter, so the two one-sided differences agree unless a ReLU switches
/// inside the step; such coordinates are skipped and counted.
pub fn model_grad_gap(seed: u64, samples: usize) -> ModelGradCheck {
    let mut model = build_lcnn(&LcnnConfig { width_multiplier: 0.25, input_size: 32 }, seed).unwrap();
    let mut r = rng(seed);
    // a fresh network has β = 0, so channels fed by all-zero activations sit
    // exactly on the kink
    for t in model.parameters_mut() {
        t.iter_mut().for_each(|v| *v += r.gen_range(-0.05..0.05));
    }
    let [c, h, w] = model.input_shape();
    let x = random_tensor(&mut r, c, h, w);
    let trace = model.forward_trace(&x).unwrap();
    let rl = uniform_vec(&mut r, trace.output.logits.len());
    let ro = uniform_vec(&mut r, trace.output.offsets.len());
    let grads = model.backward(&trace, &rl, &ro).unwrap();
    let loss = |m: &CnnModel| {
        let out = m.forward(&x).unwrap();
        dot(&out.logits, &rl) + dot(&out.offsets, &ro)
    };
    let base = loss(&model);
    let mut check = ModelGradCheck { worst: 0.0, checked: 0, skipped: 0 };
    let tensors = model.parameters().len();
    for t in 0..tensors {
        let len = model.parameters()[t].len();
        for _ in 0..samples.min(len) {
            let i = r.gen_range(0..len);
            let orig = model.parameters()[t][i];
            model.parameters_mut()[t][i] = orig + FD_STEP;
            let up = loss(&model);
            model.parameters_mut()[t][i] = orig - FD_STEP;
            let down = loss(&model);
            model.parameters_mut()[t][i] = orig;
            let (fwd, bwd) = ((up - base) / FD_STEP, (base - down) / FD_STEP);
            if (fwd - bwd).abs() > 1e-6 * fwd.abs().max(bwd.abs()).max(1.0) {
                check.skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * FD_STEP);
            check.worst = check.worst.max(rel_diff(&[grads[t][i]], &[numeric], GRAD_FLOOR));
            check.checked += 1;
        }
    }
    check
}

pub fn check_gradients() -> Result<String, String> {
    let mut r = rng(4004);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut note = |name, v: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some((_, w)) => *w = w.max(v),
        None => worst.push((name, v)),
    };
    for trial in 0..5 {
        let (m, n) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let side = r.gen_range(4..=7);
        let stride = 1 + trial % 2;
        let x = random_tensor(&mut r, m, side, side);
        let conv = ConvKernel::conventional(n, m, 3, stride, 1, uniform_vec(&mut r, n * m * 9))
            .unwrap()
            .with_bias(uniform_vec(&mut r, n))
            .unwrap();
        let dw = ConvKernel::depthwise(m, 3, stride, 1, uniform_vec(&mut r, m * 9)).unwrap();
        let pw = ConvKernel::pointwise(n, m, uniform_vec(&mut r, n * m)).unwrap().with_bias(uniform_vec(&mut r, n)).unwrap();
        for (name, k) in [("conv", &conv), ("depthwise", &dw), ("pointwise", &pw)] {
            note(name, conv_grad_gaps(&x, k, &mut r).into_iter().fold(0.0, f64::max));
        }
        let bn = BatchNorm::new(
            uniform_vec(&mut r, m),
            uniform_vec(&mut r, m),
            uniform_vec(&mut r, m),
            (0..m).map(|_| r.gen_range(0.1..2.0)).collect(),
        )
        .unwrap();
        note("batchnorm", batchnorm_grad_gaps(&x, &bn, &mut r).into_iter().fold(0.0, f64::max));
        note("relu", relu_grad_gap(&mut r));
        note("softmax+mse", softmax_mse_grad_gap(&mut r, 2 + trial));
        note("detection loss", detection_loss_grad_gaps(&mut r, 40).into_iter().fold(0.0, f64::max));
    }
    let model = model_grad_gap(77, 6);
    note("full model", model.worst);
    let mut detail = worst.iter().map(|(n, v)| format!("{n} {v:.1e}")).collect::<Vec<_>>().join(", ");
    detail += &format!(" ({} model coordinates, {} on a kink skipped)", model.checked, model.skipped);
    if worst.iter().all(|(_, v)| *v <= GRAD_TOL) && model.skipped * 10 <= model.checked + model.skipped {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// L-CNN structure and toy overfitting

/// Dark image with one bright square.
pub fn square_sample(side: usize, x: usize, y: usize, s: usize) -> ToySample {
    let image = Image::from_fn(side, side, |px, py| {
        if (x..x + s).contains(&px) && (y..y + s).contains(&py) {
            220.0
        } else {
            40.0
        }
    })
    .unwrap();
    ToySample { image, boxes: vec![BoundingBox::new(x as f64, y as f64, s as f64, s as f64)] }
}

pub fn toy_dataset() -> Vec<ToySample> {
    vec![square_sample(64, 8, 10, 22), square_sample(64, 30, 28, 24), square_sample(64, 20, 6, 20), square_sample(64, 36, 34, 20)]
}

pub struct Overfit {
    pub model: CnnModel,
    pub report: TrainReport,
    pub elapsed: Duration,
    pub data: Vec<ToySample>,
}

/// Trains the small network on the four toy images once per process.
pub fn overfit() -> &'static Overfit {
    static CELL: OnceLock<Overfit> = OnceLock::new();
    CELL.get_or_init(|| {
        let data = toy_dataset();
        let mut model = build_lcnn(&LcnnConfig { width_multiplier: 0.25, input_size: 64 }, 42).unwrap();
        let cfg = TrainConfig { steps: 200, validation_fraction: 0.0, ..TrainConfig::default() };
        let start = Instant::now();
        let report = train_toy(&mut model, &data, &cfg).unwrap();
        Overfit { model, report, elapsed: start.elapsed(), data }
    })
}

pub fn check_lcnn_structure() -> Result<String, String> {
    let model = build_lcnn(&LcnnConfig::default(), 42).map_err(|e| e.to_string())?;
    let convs = model.conv_layer_count();
    let first_conventional = matches!(model.architecture().layers.first(), Some(LayerSpec::Conv { .. }));
    let out = model.forward(&Tensor::zeros(3, 224, 224)).map_err(|e| e.to_string())?;
    let finite = out.logits.iter().chain(&out.offsets).all(|v| v.is_finite());
    let o = overfit();
    let ratio = o.report.initial_loss() / o.report.final_loss();
    let steps = o.report.losses.len() - 1;
    let detail = format!(
        "{convs} conv layers, first conventional {first_conventional}, taps {:?}, {} predictions; \
         overfit {:.4} -> {:.4} ({ratio:.0}x) in {steps} steps, {:.1}s",
        model.tap_sides(),
        out.len(),
        o.report.initial_loss(),
        o.report.final_loss(),
        o.elapsed.as_secs_f64()
    );
    if convs == 23 && first_conventional && finite && ratio >= 10.0 && steps <= 200 && o.elapsed < Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Haar features and boosting

pub fn brute_rect_sum(img: &Image, x: usize, y: usize, w: usize, h: usize) -> f64 {
    let mut s = 0.0;
    for yy in y..y + h {
        for xx in x..x + w {
            s += img.get(xx, yy, 0);
        }
    }
    s
}

/// Training error of the first `upto` stumps on every sample.
pub fn ensemble_error(stumps: &[humandet::haar::Stump], responses: &[Vec<f64>], labels: &[i8], upto: usize) -> usize {
    (0..labels.len()).filter(|&i| ensemble_predict(&stumps[..upto], responses, i) != labels[i]).count()
}

pub fn check_haar() -> Result<String, String> {
    let mut r = rng(5005);
    let img = Image::from_fn(41, 29, |_, _| r.gen_range(0..256) as f64).unwrap();
    let ii = integral(&img).map_err(|e| e.to_string())?;
    for t in 0..1000 {
        let (w, h) = (r.gen_range(1..=41), r.gen_range(1..=29));
        let (x, y) = (r.gen_range(0..=41 - w), r.gen_range(0..=29 - h));
        let got = ii.sum(x, y, w, h).map_err(|e| e.to_string())?;
        if got != brute_rect_sum(&img, x, y, w, h) {
            return Err(format!("box {t} ({x},{y},{w},{h}) sum differs"));
        }
    }

    // threshold at 0.5 separates the classes
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 20.0 + 0.01).collect();
    let labels: Vec<i8> = xs.iter().map(|x| if *x > 0.5 { 1 } else { -1 }).collect();
    let stumps = boost_stumps(&[xs.clone()], &labels, 3).map_err(|e| e.to_string())?;
    let errs: Vec<usize> = (1..=3).map(|k| ensemble_error(&stumps, &[xs.clone()], &labels, k)).collect();
    if !errs.contains(&0) {
        return Err(format!("separable set errors per round {errs:?}"));
    }

    let (responses, labels) = interval_toy();
    let stumps = boost_stumps(&responses, &labels, 10).map_err(|e| e.to_string())?;
    let curve: Vec<usize> = (1..=10).map(|k| ensemble_error(&stumps, &responses, &labels, k)).collect();
    if curve.windows(2).any(|p| p[1] > p[0]) {
        return Err(format!("training error rose: {curve:?}"));
    }
    let a = alpha_from_error(0.5);
    if a != 0.0 {
        return Err(format!("alpha(0.5) = {a}"));
    }
    Ok(format!("1000 rect sums exact; separable set errors {errs:?}; interval set {curve:?}; alpha(0.5)=0"))
}

/// Positives inside one interval of the line: no single stump fits.
pub fn interval_toy() -> (Vec<Vec<f64>>, Vec<i8>) {
    let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let labels = xs.iter().map(|x| if (10.0..20.0).contains(x) { 1 } else { -1 }).collect();
    (vec![xs], labels)
}

// ---------------------------------------------------------------------------
// HOG oracle

/// Gradient magnitude and orientation with replicated borders, grayscale.
pub fn oracle_gradient(img: &Image, x: usize, y: usize) -> (f64, f64) {
    let (w, h) = (img.width(), img.height());
    let px = |xx: usize, yy: usize| img.get(xx, yy, 0);
    let gx = px((x + 1).min(w - 1), y) - px(x.saturating_sub(1), y);
    let gy = px(x, (y + 1).min(h - 1)) - px(x, y.saturating_sub(1));
    let mag = (gx * gx + gy * gy).sqrt();
    let mut ang = gy.atan2(gx).to_degrees();
    while ang < 0.0 {
        ang += 180.0;
    }
    while ang >= 180.0 {
        ang -= 180.0;
    }
    (mag, ang)
}

/// 9-bin histogram with linear votes between centres 10°, 30°, …, 170°.
pub fn oracle_cell(img: &Image, x0: usize, y0: usize, size: usize) -> [f64; 9] {
    let mut hist = [0.0; 9];
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            let (m, a) = oracle_gradient(img, x, y);
            if m == 0.0 {
                continue;
            }
            // nearest centre at or below the angle, wrapping 180° to 0°
            let mut lo = ((a - 10.0) / 20.0).floor() as i64;
            let centre = 10.0 + 20.0 * lo as f64;
            let frac = (a - centre) / 20.0;
            lo = lo.rem_euclid(9);
            hist[lo as usize] += m * (1.0 - frac);
            hist[((lo + 1) % 9) as usize] += m * frac;
        }
    }
    hist
}

pub fn oracle_l2hys(v: &mut [f64]) {
    let eps2 = 1e-10;
    let n = (v.iter().map(|x| x * x).sum::<f64>() + eps2).sqrt();
    v.iter_mut().for_each(|x| *x = (*x / n).min(0.2));
    let n = (v.iter().map(|x| x * x).sum::<f64>() + eps2).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Block-major descriptor; cells inside a block row-major.
pub fn oracle_hog(img: &Image, cell: usize, block: usize, stride: usize) -> Vec<f64> {
    let (cx, cy) = (img.width() / cell, img.height() / cell);
    let cells: Vec<Vec<[f64; 9]>> =
        (0..cy).map(|j| (0..cx).map(|i| oracle_cell(img, i * cell, j * cell, cell)).collect()).collect();
    let mut out = Vec::new();
    let mut bj = 0;
    while bj + block <= cy {
        let mut bi = 0;
        while bi + block <= cx {
            let mut v = Vec::new();
            for dj in 0..block {
                for di in 0..block {
                    v.extend_from_slice(&cells[bj + dj][bi + di]);
                }
            }
            oracle_l2hys(&mut v);
            out.extend(v);
            bi += stride;
        }
        bj += stride;
    }
    out
}

pub fn integer_noise(r: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, |_, _| r.gen_range(0..200) as f64).unwrap()
}

pub fn check_hog() -> Result<String, String> {
    let mut r = rng(6006);
    let cfg = HogConfig::default();
    let window = integer_noise(&mut r, 64, 128);
    let d = hog_descriptor(&window, &cfg).map_err(|e| e.to_string())?;
    if d.len() != 3780 || cfg.descriptor_len() != 3780 {
        return Err(format!("descriptor length {}", d.len()));
    }

    let field = compute_gradients(&window);
    let mut mass_gap = 0.0f64;
    for _ in 0..50 {
        let (x, y) = (r.gen_range(0..=56), r.gen_range(0..=120));
        let hist = cell_histogram(&field, &BoundingBox::new(x as f64, y as f64, 8.0, 8.0)).map_err(|e| e.to_string())?;
        let mut mass = 0.0;
        for yy in y..y + 8 {
            for xx in x..x + 8 {
                mass += oracle_gradient(&window, xx, yy).0;
            }
        }
        mass_gap = mass_gap.max((hist.iter().sum::<f64>() - mass).abs());
    }
    if mass_gap > 1e-9 {
        return Err(format!("histogram mass off by {mass_gap:.1e}"));
    }

    let shifted = Image::from_fn(64, 128, |x, y| window.get(x, y, 0) + 37.0).unwrap();
    if hog_descriptor(&shifted, &cfg).unwrap() != d {
        return Err("brightness shift changed the descriptor".into());
    }

    let mut worst = 0.0f64;
    for t in 0..40 {
        let (cell, block, stride) = if t % 2 == 0 { (8, 2, 1) } else { (4, 2, 1) };
        let small = HogConfig { cell_size: cell, block_size: block, block_stride: stride, window_w: 16, window_h: 16, ..cfg };
        let img = integer_noise(&mut r, 16, 16);
        let got = hog_descriptor(&img, &small).map_err(|e| e.to_string())?;
        let want = oracle_hog(&img, cell, block, stride);
        if got.len() != want.len() {
            return Err(format!("16x16 descriptor length {} vs {}", got.len(), want.len()));
        }
        worst = worst.max(got.as_slice().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let detail = format!("length 3780, mass gap {mass_gap:.1e}, shift exact, oracle gap {worst:.1e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// SVM

/// Two clusters on either side of the line x + y = 0.
pub fn separable_points() -> (Vec<Vec<f64>>, Vec<i8>) {
    let mut r = rng(7007);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..20 {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let c = 2.0 * label as f64;
        xs.push(vec![c + r.gen_range(-0.8..0.8), c + r.gen_range(-0.8..0.8)]);
        ys.push(label);
    }
    (xs, ys)
}

pub fn check_svm() -> Result<String, String> {
    let (xs, ys) = separable_points();
    let fit = svm_train(&xs, &ys, &SvmParams { lambda: 1e-2, epochs: 50, seed: 42 }).map_err(|e| e.to_string())?;
    let correct = xs.iter().zip(&ys).filter(|(x, y)| (fit.score(x) >= 0.0) == (**y > 0)).count();
    let (first, last) = (fit.objective[0], *fit.objective.last().unwrap());
    let detail = format!("accuracy {correct}/20, objective {first:.4} -> {last:.4}");
    if correct == 20 && last < first {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// end-to-end detection

/// `size × size` window: bright centre block on dark surround, with a
/// per-sample intensity offset.
pub fn block_pattern(size: usize, offset: f64) -> Image {
    let q = size / 4;
    Image::from_fn(size, size, |x, y| {
        if (q..size - q).contains(&x) && (q..size - q).contains(&y) {
            200.0 + offset
        } else {
            30.0 + offset
        }
    })
    .unwrap()
}

pub fn haar_negatives(r: &mut ChaCha8Rng, size: usize, count: usize) -> Vec<Image> {
    (0..count)
        .map(|i| match i % 4 {
            0 => Image::filled(size, size, 1, r.gen_range(0.0..255.0)).unwrap(),
            1 => Image::from_fn(size, size, |_, _| r.gen_range(0.0..255.0)).unwrap(),
            2 => {
                let split = r.gen_range(2..size - 2);
                Image::from_fn(size, size, |x, _| if x < split { 30.0 } else { 200.0 }).unwrap()
            }
            _ => {
                let split = r.gen_range(2..size - 2);
                Image::from_fn(size, size, |_, y| if y < split { 200.0 } else { 30.0 }).unwrap()
            }
        })
        .collect()
}

/// Scene of `w × h` dark pixels with a `size` block pattern at `(x, y)`.
pub fn plant(w: usize, h: usize, pattern: &Image, x: usize, y: usize, background: f64) -> Image {
    Image::from_fn(w, h, |px, py| {
        if (x..x + pattern.width()).contains(&px) && (y..y + pattern.height()).contains(&py) {
            pattern.get(px - x, py - y, 0)
        } else {
            background
        }
    })
    .unwrap()
}

pub fn top_iou(dets: &[Detection], truth: &BoundingBox) -> Option<f64> {
    dets.iter().max_by(|a, b| a.score.total_cmp(&b.score)).map(|d| d.bbox.iou(truth))
}

pub fn haar_smoke() -> Result<String, String> {
    let mut r = rng(8008);
    let positives: Vec<Image> = (0..12).map(|i| block_pattern(24, i as f64 * 2.0)).collect();
    let negatives = haar_negatives(&mut r, 24, 40);
    let candidates = generate_candidates(24, 24, 4);
    let cfg = CascadeTrainConfig { rounds_per_stage: vec![5], stage_thresholds: None };
    let model = train_cascade(&positives, &negatives, &candidates, &cfg).map_err(|e| e.to_string())?;
    let scene = plant(96, 80, &block_pattern(24, 5.0), 40, 32, 30.0);
    let truth = BoundingBox::new(40.0, 32.0, 24.0, 24.0);
    let dets = cascade_detect(&model, &scene, &DetectParams::default()).map_err(|e| e.to_string())?;
    match top_iou(&dets, &truth) {
        Some(iou) if iou >= 0.5 => Ok(format!("haar top IoU {iou:.2} ({} boxes)", dets.len())),
        other => Err(format!("haar top IoU {other:?} ({} boxes)", dets.len())),
    }
}

pub fn lcnn_smoke() -> Result<String, String> {
    let o = overfit();
    let mut ious = Vec::new();
    for s in &o.data {
        let dets = ssd_detect(&o.model, &s.image, 0.5, 0.45).map_err(|e| e.to_string())?;
        ious.push(top_iou(&dets, &s.boxes[0]).unwrap_or(0.0));
    }
    let text = ious.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ");
    if ious.iter().all(|v| *v >= 0.5) {
        Ok(format!("lcnn top IoU {text}"))
    } else {
        Err(format!("lcnn top IoU {text}"))
    }
}

/// Upright figure: bright torso bar with a head block, 32×64.
pub fn figure(offset: f64) -> Image {
    Image::from_fn(32, 64, |x, y| {
        let torso = (10..22).contains(&x) && (20..60).contains(&y);
        let head = (12..20).contains(&x) && (6..16).contains(&y);
        if torso || head {
            210.0 + offset
        } else {
            35.0 + offset
        }
    })
    .unwrap()
}

pub fn hog_training_set() -> (Vec<Image>, Vec<i8>) {
    let mut r = rng(9009);
    let mut windows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..10 {
        windows.push(figure(i as f64 * 3.0));
        labels.push(1);
    }
    // off-centre crops of the figure, as a detector sliding past it sees
    for (dx, dy) in [(12, 0), (-12, 0), (0, 20), (0, -20), (12, 24), (-12, 24), (12, -20), (-12, -20)] {
        let f = figure(0.0);
        windows.push(
            Image::from_fn(32, 64, |x, y| {
                let (sx, sy) = (x as i64 + dx, y as i64 + dy);
                if (0..32).contains(&sx) && (0..64).contains(&sy) {
                    f.get(sx as usize, sy as usize, 0)
                } else {
                    35.0
                }
            })
            .unwrap(),
        );
        labels.push(-1);
    }
    for i in 0..30 {
        let img = match i % 3 {
            0 => Image::filled(32, 64, 1, r.gen_range(0.0..255.0)).unwrap(),
            1 => Image::from_fn(32, 64, |_, _| r.gen_range(0.0..60.0)).unwrap(),
            _ => {
                let y0 = r.gen_range(8..48);
                Image::from_fn(32, 64, |_, y| if (y0..y0 + 8).contains(&y) { 210.0 } else { 35.0 }).unwrap()
            }
        };
        windows.push(img);
        labels.push(-1);
    }
    (windows, labels)
}

/// Both merge rules collapse the duplicate hits around one figure.
pub fn hog_merge_smoke() -> Result<String, String> {
    let cfg = HogConfig { window_w: 32, window_h: 64, ..HogConfig::default() };
    let (windows, labels) = hog_training_set();
    let (model, _) = train_hog_svm(&windows, &labels, cfg, &SvmParams { lambda: 1e-3, epochs: 60, seed: 42 })
        .map_err(|e| e.to_string())?;
    let scene = plant(112, 112, &figure(0.0), 40, 24, 35.0);
    let truth = BoundingBox::new(40.0, 24.0, 32.0, 64.0);
    let mut parts = Vec::new();
    for merge in [MergeRule::BiggestBox, MergeRule::Nms] {
        let params = HogDetectParams { step: 4, merge, ..HogDetectParams::default() };
        let dets = detect_multiscale(&model, &scene, &params).map_err(|e| e.to_string())?;
        let Some(d) = dets.first() else {
            return Err(format!("{merge:?}: no boxes"));
        };
        let (iou, cover) = (d.bbox.iou(&truth), d.bbox.intersection(&truth) / truth.area());
        // biggest-box keeps the coarsest enclosing hit, so it is judged on coverage
        let placed = match merge {
            MergeRule::BiggestBox => cover >= 0.9,
            MergeRule::Nms => iou >= 0.5,
        };
        if dets.len() != 1 || !placed {
            return Err(format!("{merge:?}: {} boxes, IoU {iou:.2}, coverage {cover:.2}", dets.len()));
        }
        parts.push(format!("{merge:?} 1 box IoU {iou:.2} coverage {cover:.2}"));
    }

    // a duplicate cluster like a detector's raw output: shifted and rescaled copies
    let cluster: Vec<Detection> = (0..6)
        .map(|i| {
            let f = i as f64;
            Detection::new(BoundingBox::new(40.0 + 2.0 * f, 24.0 - f, 32.0 + 3.0 * f, 64.0 + 4.0 * f), "person", 1.0 - 0.1 * f)
        })
        .collect();
    let by_area = merge_biggest_box(cluster.clone(), 0.3);
    let by_score = nms(cluster.clone(), 0.3);
    if by_area.len() != 1 || by_score.len() != 1 || by_area[0] != cluster[5] || by_score[0] != cluster[0] {
        return Err(format!("cluster merged to {} / {} boxes", by_area.len(), by_score.len()));
    }
    parts.push("synthetic cluster -> 1 box each".into());
    Ok(parts.join("; "))
}

pub fn check_pipeline() -> Result<String, String> {
    let results = [haar_smoke(), lcnn_smoke(), hog_merge_smoke()];
    let text = results.iter().map(|r| r.as_ref().unwrap_or_else(|e| e).clone()).collect::<Vec<_>>().join("; ");
    if results.iter().all(Result::is_ok) {
        Ok(text)
    } else {
        Err(text)
    }
}

// ---------------------------------------------------------------------------
// benchmarking

pub fn stub_fps(duration: Duration, delay: Duration) -> humandet::evalbench::FpsStats {
    bench_fps(&[()], duration, |_| {
        std::thread::sleep(delay);
        Ok(())
    })
    .unwrap()
}

/// Peak RSS growth of a child that allocates `mb` MiB after a short delay.
pub fn child_allocation_growth(mb: usize) -> Result<f64, String> {
    let mut child = std::process::Command::new(env!("CARGO_BIN_EXE_humandet"))
        .args(["stub", "--delay-ms", "400", "--alloc-mb", &mb.to_string(), "--hold-ms", "1500"])
        .spawn()
        .map_err(|e| e.to_string())?;
    // let the exec finish before taking the baseline
    std::thread::sleep(Duration::from_millis(150));
    let series = sample_process_stats(child.id(), Duration::from_millis(50), Duration::from_millis(1600));
    let _ = child.wait();
    let series = series.map_err(|e| e.to_string())?;
    let peak = series.rss_peak().ok_or("no samples")?;
    Ok(peak - series.baseline_rss_mb)
}

pub fn check_benchmark() -> Result<String, String> {
    let stats = stub_fps(Duration::from_secs(30), Duration::from_millis(100));
    let growth = child_allocation_growth(100)?;
    let detail = format!(
        "fps_avg {:.3} fps_peak {:.3} over {:.1}s; 100 MiB allocation seen as {growth:.1} MiB",
        stats.fps_avg, stats.fps_peak, stats.elapsed
    );
    let fps_ok = (stats.fps_avg - 10.0).abs() <= 0.5 && stats.fps_peak >= stats.fps_avg;
    if fps_ok && (growth - 100.0).abs() <= 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// evaluation

/// Exhaustive reference: at each step, the highest-scoring remaining
/// prediction claims its best remaining ground-truth box.
pub fn brute_match(preds: &[Detection], gt: &[BoundingBox], thr: f64) -> MatchCounts {
    let mut pred_left: Vec<usize> = (0..preds.len()).collect();
    let mut gt_left: Vec<bool> = vec![true; gt.len()];
    let mut tp = 0;
    while !pred_left.is_empty() {
        // first index wins ties, matching a stable descending sort
        let mut pick = 0;
        for (slot, &p) in pred_left.iter().enumerate() {
            if preds[p].score > preds[pred_left[pick]].score {
                pick = slot;
            }
        }
        let p = pred_left.remove(pick);
        let mut best: Option<(usize, f64)> = None;
        for (g, b) in gt.iter().enumerate() {
            if !gt_left[g] {
                continue;
            }
            let iou = preds[p].bbox.iou(b);
            if best.map_or(true, |(_, v)| iou > v) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou >= thr {
                gt_left[g] = false;
                tp += 1;
            }
        }
    }
    MatchCounts { tp, fp: preds.len() - tp, fn_: gt.len() - tp }
}

pub fn random_scene(r: &mut ChaCha8Rng) -> (Vec<Detection>, Vec<BoundingBox>) {
    let gt: Vec<BoundingBox> = (0..r.gen_range(0..6))
        .map(|_| BoundingBox::new(r.gen_range(0.0..80.0), r.gen_range(0.0..80.0), r.gen_range(5.0..30.0), r.gen_range(5.0..30.0)))
        .collect();
    let mut preds = Vec::new();
    for g in &gt {
        for _ in 0..r.gen_range(0..3) {
            let j = |r: &mut ChaCha8Rng| r.gen_range(-4.0..4.0);
            let b = BoundingBox::new(g.x + j(r), g.y + j(r), g.w + j(r).abs(), g.h + j(r).abs());
            preds.push(Detection::new(b, "person", r.gen_range(0.0..1.0)));
        }
    }
    for _ in 0..r.gen_range(0..4) {
        let b = BoundingBox::new(r.gen_range(0.0..90.0), r.gen_range(0.0..90.0), r.gen_range(3.0..20.0), r.gen_range(3.0..20.0));
        preds.push(Detection::new(b, "person", r.gen_range(0.0..1.0)));
    }
    (preds, gt)
}

pub fn check_evaluation(cases: usize) -> Result<String, String> {
    let gt: Vec<BoundingBox> = (0..5).map(|i| BoundingBox::new(20.0 * i as f64, 5.0, 12.0, 30.0)).collect();
    let perfect: Vec<Detection> = gt.iter().map(|b| Detection::new(*b, "person", 0.9)).collect();
    let p = rates(&match_detections(&perfect, &gt, 0.5));
    let e = rates(&match_detections(&[], &gt, 0.5));
    if p.fpr != Some(0.0) || p.fnr != Some(0.0) || e.fnr != Some(100.0) {
        return Err(format!("perfect {p:?}, empty {e:?}"));
    }
    let mut r = rng(1111);
    for t in 0..cases {
        let (preds, gt) = random_scene(&mut r);
        let got = match_detections(&preds, &gt, 0.5);
        let want = brute_match(&preds, &gt, 0.5);
        if got != want || got.tp + got.fn_ != gt.len() || got.tp + got.fp != preds.len() {
            return Err(format!("case {t}: got {got:?}, reference {want:?}"));
        }
    }
    Ok(format!("perfect FPR 0 FNR 0, empty FNR 100, {cases} random cases agree"))
}

// ---------------------------------------------------------------------------
// serialization

pub fn corrupt_variants(bytes: &[u8]) -> Vec<Vec<u8>> {
    let mut out = vec![bytes[..bytes.len() / 2].to_vec(), Vec::new()];
    for pos in [0, bytes.len() / 3, bytes.len() - 1] {
        let mut b = bytes.to_vec();
        b[pos] ^= 0x5a;
        out.push(b);
    }
    out
}

fn is_format(e: &Error) -> bool {
    matches!(e, Error::Format(_))
}

pub fn check_serialization() -> Result<String, String> {
    let mut r = rng(1212);
    let positives: Vec<Image> = (0..6).map(|i| block_pattern(24, i as f64)).collect();
    let cascade = train_cascade(
        &positives,
        &haar_negatives(&mut r, 24, 12),
        &generate_candidates(24, 24, 6),
        &CascadeTrainConfig { rounds_per_stage: vec![2, 3], stage_thresholds: None },
    )
    .map_err(|e| e.to_string())?;
    let text = cascade_to_json(&cascade);
    let back = cascade_from_json(&text).map_err(|e| e.to_string())?;
    if back != cascade || cascade_to_json(&back) != text {
        return Err("cascade round trip differs".into());
    }
    for bad in corrupt_variants(text.as_bytes()) {
        match cascade_from_json(&String::from_utf8_lossy(&bad)) {
            Err(e) if is_format(&e) => {}
            other => return Err(format!("corrupt cascade accepted or misreported: {:?}", other.map(|_| ()))),
        }
    }

    let cfg = HogConfig { window_w: 32, window_h: 64, ..HogConfig::default() };
    let (windows, labels) = hog_training_set();
    let (hog, _) = train_hog_svm(&windows, &labels, cfg, &SvmParams::default()).map_err(|e| e.to_string())?;
    let text = hog_model_to_json(&hog);
    let back = hog_model_from_json(&text).map_err(|e| e.to_string())?;
    if back != hog || hog_model_to_json(&back) != text {
        return Err("hog model round trip differs".into());
    }
    for bad in corrupt_variants(text.as_bytes()) {
        match hog_model_from_json(&String::from_utf8_lossy(&bad)) {
            Err(e) if is_format(&e) => {}
            other => return Err(format!("corrupt hog model accepted or misreported: {:?}", other.map(|_| ()))),
        }
    }

    let cnn = build_lcnn(&LcnnConfig { width_multiplier: 0.25, input_size: 64 }, 5).map_err(|e| e.to_string())?;
    let bytes = model_to_bytes(&cnn);
    let back = model_from_bytes(&bytes).map_err(|e| e.to_string())?;
    if back != cnn || model_to_bytes(&back) != bytes {
        return Err("cnn model round trip differs".into());
    }
    for bad in corrupt_variants(&bytes) {
        match model_from_bytes(&bad) {
            Err(e) if is_format(&e) => {}
            other => return Err(format!("corrupt cnn model accepted or misreported: {:?}", other.map(|_| ()))),
        }
    }
    Ok("cascade, hog and cnn models round-trip byte-identical; 5 corruptions each rejected".into())
}

// ---------------------------------------------------------------------------
// parameter footprint

/// Backbone weight bytes (f32) of the built network and of the same channel
/// schedule with every conv layer replaced by a full 3×3 convolution.
pub fn footprint_bytes(model: &CnnModel) -> (u64, u64) {
    let backbone = &model.architecture().layers[..model.architecture().backbone_len()];
    let mut actual = 0u64;
    let mut conventional = 0u64;
    for spec in backbone {
        let (params, cin, cout) = match *spec {
            LayerSpec::Conv { in_channels, out_channels, kernel, .. } => {
                (kernel * kernel * in_channels * out_channels, in_channels, out_channels)
            }
            LayerSpec::Depthwise { channels, kernel, .. } => (kernel * kernel * channels, channels, channels),
            LayerSpec::Pointwise { in_channels, out_channels } => (in_channels * out_channels, in_channels, out_channels),
            _ => continue,
        };
        actual += 4 * params as u64;
        conventional += 4 * 9 * (cin * cout) as u64;
    }
    (actual, conventional)
}

pub fn check_footprint() -> Result<String, String> {
    let model = build_lcnn(&LcnnConfig::default(), 42).map_err(|e| e.to_string())?;
    let (actual, conventional) = footprint_bytes(&model);
    let ratio = conventional as f64 / actual as f64;
    let detail = format!("{actual} vs {conventional} weight bytes, ratio {ratio:.2}");
    if ratio >= 5.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn ground_truth_map(items: &[(&str, BoundingBox)]) -> BTreeMap<String, Vec<(BoundingBox, String)>> {
    let mut gt = BTreeMap::new();
    for (id, b) in items {
        gt.entry(id.to_string()).or_insert_with(Vec::new).push((*b, "person".to_string()));
    }
    gt
}

//! Independent reference computations for the tests: exhaustive CRF
//! enumeration, a naive network objective, and a grid-search combiner.
//! Nothing here calls the inference code under test.

#![allow(dead_code)]

use evstp_core::combiner::RegionSeries;
use evstp_core::spatial_nn::Weights;
use evstp_core::temporal_crf::{CrfModel, LabeledSequence};
use evstp_core::RegionId;
use rand::Rng;

/// Raw potential of a labeling, read straight from the weight arrays.
pub fn crf_score(m: &CrfModel, x: &[usize], y: &[usize]) -> f64 {
    let (l, h) = (m.num_labels, m.num_obs);
    let mut s = 0.0;
    for t in 0..x.len() {
        s += m.mu[(y[t] - 1) * h + x[t] - 1];
        if t > 0 {
            s += m.gamma[(y[t - 1] - 1) * l + y[t] - 1];
        }
    }
    s
}

/// Every labeling of length `n` over `1..=l`.
pub fn all_labelings(l: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (1..=l).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    out
}

pub struct Enumerated {
    pub log_z: f64,
    /// `marginals[t][i]` for label `i + 1`.
    pub marginals: Vec<Vec<f64>>,
}

/// Partition function and marginals by summing over every labeling,
/// optionally only those starting with `clamp_first`.
pub fn crf_enumerate(m: &CrfModel, x: &[usize], clamp_first: Option<usize>) -> Enumerated {
    let l = m.num_labels;
    let ys: Vec<Vec<usize>> = all_labelings(l, x.len())
        .into_iter()
        .filter(|y| clamp_first.map_or(true, |c| y[0] == c))
        .collect();
    let scores: Vec<f64> = ys.iter().map(|y| crf_score(m, x, y)).collect();
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
    let mut marginals = vec![vec![0.0; l]; x.len()];
    for (y, s) in ys.iter().zip(&scores) {
        let p = (s - top).exp() / z;
        for (t, &yt) in y.iter().enumerate() {
            marginals[t][yt - 1] += p;
        }
    }
    Enumerated { log_z: top + z.ln(), marginals }
}

/// Penalized conditional log-likelihood by enumeration.
pub fn crf_log_likelihood(m: &CrfModel, data: &[LabeledSequence]) -> f64 {
    let mut ll = 0.0;
    for seq in data {
        ll += crf_score(m, &seq.x, &seq.y) - crf_enumerate(m, &seq.x, None).log_z;
    }
    let norm: f64 = m.mu.iter().chain(&m.gamma).map(|v| v * v).sum();
    ll - m.l2 * norm
}

pub fn random_crf<R: Rng>(rng: &mut R, max_labels: usize, max_obs: usize, scale: f64) -> CrfModel {
    let l = rng.gen_range(1..=max_labels);
    let h = rng.gen_range(1..=max_obs);
    let mut m = CrfModel::zeros(l, h, rng.gen_range(0.0..0.5));
    for v in m.mu.iter_mut().chain(m.gamma.iter_mut()) {
        *v = rng.gen_range(-scale..scale);
    }
    m
}

pub fn random_sequence<R: Rng>(rng: &mut R, m: &CrfModel, len: usize) -> LabeledSequence {
    let x = (0..len).map(|_| rng.gen_range(1..=m.num_obs)).collect();
    let y = (0..len).map(|_| rng.gen_range(1..=m.num_labels)).collect();
    LabeledSequence::new(x, y).unwrap()
}

/// Central difference of `f` along every coordinate of `p`.
pub fn central_difference(p: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + eps;
            let up = f(&q);
            q[i] = p[i] - eps;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` over whole vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = na.max(nb);
    if denom == 0.0 {
        0.0
    } else {
        diff / denom
    }
}

/// Network objective evaluated naively: sigmoid hidden layer, linear
/// output, mean squared error plus `l2` on all non-bias weights.
pub fn nn_objective(w: &Weights, input_dim: usize, xs: &[f64], zs: &[f64], l2: f64) -> f64 {
    let hidden = w.b1.len();
    let mut sse = 0.0;
    for (n, &z) in zs.iter().enumerate() {
        let x = &xs[n * input_dim..(n + 1) * input_dim];
        let mut o = w.b2;
        for j in 0..hidden {
            let mut pre = w.b1[j];
            for i in 0..input_dim {
                pre += w.w1[j * input_dim + i] * x[i];
            }
            o += w.w2[j] / (1.0 + (-pre).exp());
        }
        sse += (o - z) * (o - z);
    }
    let penalty: f64 = w.w1.iter().chain(&w.w2).map(|v| v * v).sum();
    sse / zs.len() as f64 + l2 * penalty
}

/// Summed per-region NMSE of `(1 - w) * y_tp + w * e_sp`.
pub fn combined_objective(regions: &[RegionSeries], w: f64) -> f64 {
    regions
        .iter()
        .map(|s| {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..s.e_true.len() {
                let pred = (1.0 - w) * s.y_tp[i] + w * s.e_sp[i];
                num += (s.e_true[i] - pred).powi(2);
                den += s.e_true[i].powi(2);
            }
            num / den
        })
        .sum()
}

/// Best point of the grid `i / points`, `i = 0..points`.
pub fn grid_search(regions: &[RegionSeries], points: usize) -> (f64, f64) {
    (0..points)
        .map(|i| {
            let w = i as f64 / points as f64;
            (w, combined_objective(regions, w))
        })
        .fold((0.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Regions whose truth is positive and whose two predictors are the truth
/// plus independent noise of random size.
pub fn random_combiner_instance<R: Rng>(rng: &mut R) -> Vec<RegionSeries> {
    let regions = rng.gen_range(1..=6);
    let len = rng.gen_range(1..=24);
    let tp_noise = rng.gen_range(0.0..50.0);
    let sp_noise = rng.gen_range(0.0..50.0);
    let sp_bias = rng.gen_range(-20.0..20.0);
    (0..regions)
        .map(|k| {
            let e_true: Vec<f64> = (0..len).map(|_| rng.gen_range(1.0..500.0)).collect();
            let y_tp = e_true.iter().map(|e| e + rng.gen_range(-1.0..1.0) * tp_noise).collect();
            let e_sp = e_true.iter().map(|e| e + sp_bias + rng.gen_range(-1.0..1.0) * sp_noise).collect();
            RegionSeries { region: RegionId(k as u16 + 1), e_true, y_tp, e_sp }
        })
        .collect()
}

//! Per-region temporal predictor: a linear-chain CRF over discrete energy
//! levels with hour-of-day observations.
//!
//! The log-potential of a label sequence `y` given hours `x` is
//! `sum_t mu[y_t][x_t] + sum_{t>1} gamma[y_{t-1}][y_t]`. Node weights are
//! indexed by (label, hour); transition weights are shared across positions.
//! Inference runs forward-backward in log space. Training maximizes the
//! L2-penalized conditional log-likelihood by gradient ascent with a
//! backtracking step.
//!
//! Labels and observations are 1-based at the API and 0-based inside.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::LevelValueTable;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrfModel {
    pub num_labels: usize,
    pub num_obs: usize,
    /// `num_labels x num_obs`, row-major by label.
    pub mu: Vec<f64>,
    /// `num_labels x num_labels`, `gamma[prev * L + next]`.
    pub gamma: Vec<f64>,
    pub l2: f64,
}

impl CrfModel {
    pub fn zeros(num_labels: usize, num_obs: usize, l2: f64) -> Self {
        CrfModel {
            num_labels,
            num_obs,
            mu: vec![0.0; num_labels * num_obs],
            gamma: vec![0.0; num_labels * num_labels],
            l2,
        }
    }

    pub fn mu(&self, label: usize, obs: usize) -> f64 {
        self.mu[(label - 1) * self.num_obs + obs - 1]
    }

    pub fn set_mu(&mut self, label: usize, obs: usize, v: f64) {
        self.mu[(label - 1) * self.num_obs + obs - 1] = v;
    }

    pub fn gamma(&self, prev: usize, next: usize) -> f64 {
        self.gamma[(prev - 1) * self.num_labels + next - 1]
    }

    pub fn set_gamma(&mut self, prev: usize, next: usize, v: f64) {
        self.gamma[(prev - 1) * self.num_labels + next - 1] = v;
    }

    pub fn num_params(&self) -> usize {
        self.mu.len() + self.gamma.len()
    }

    /// Parameters flattened as mu then gamma.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mu.clone();
        p.extend_from_slice(&self.gamma);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (m, g) = p.split_at(self.mu.len());
        self.mu.copy_from_slice(m);
        self.gamma.copy_from_slice(g);
    }

    fn sq_norm(&self) -> f64 {
        self.mu.iter().chain(&self.gamma).map(|v| v * v).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_labels == 0 || self.num_obs == 0 {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "CRF needs at least one label and one observation value",
            )));
        }
        if self.mu.len() != self.num_labels * self.num_obs
            || self.gamma.len() != self.num_labels * self.num_labels
        {
            return Err(Error::InvalidConfig(alloc::string::String::from(
                "CRF weight shapes disagree with label/observation counts",
            )));
        }
        if self.mu.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("CRF weights"));
        }
        Ok(())
    }

    fn check_obs(&self, x: &[usize]) -> Result<()> {
        match x.iter().find(|&&o| o == 0 || o > self.num_obs) {
            Some(&o) => Err(Error::ObservationOutOfRange { value: o, max: self.num_obs }),
            None => Ok(()),
        }
    }

    fn check_labels(&self, y: &[usize]) -> Result<()> {
        match y.iter().find(|&&l| l == 0 || l > self.num_labels) {
            Some(&l) => Err(Error::LabelOutOfRange { value: l, max: self.num_labels }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledSequence {
    /// Observations (hour indices), 1-based.
    pub x: Vec<usize>,
    /// Labels (levels), 1-based.
    pub y: Vec<usize>,
}

impl LabeledSequence {
    pub fn new(x: Vec<usize>, y: Vec<usize>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
        }
        Ok(LabeledSequence { x, y })
    }

    /// A day with hours `1..=y.len()` as observations.
    pub fn day(y: Vec<usize>) -> Self {
        LabeledSequence { x: (1..=y.len()).collect(), y }
    }
}

/// Per-position log-potentials for one observation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTables {
    pub num_labels: usize,
    /// `len x L`: node score of label `i` at position `t`.
    pub node: Vec<f64>,
    /// `L x L`: transition score.
    pub edge: Vec<f64>,
}

impl ScoreTables {
    pub fn len(&self) -> usize {
        self.node.len() / self.num_labels
    }

    pub fn is_empty(&self) -> bool {
        self.node.is_empty()
    }

    /// Node score at 1-based position `t` for 1-based label `i`.
    pub fn node(&self, t: usize, i: usize) -> f64 {
        self.node[(t - 1) * self.num_labels + i - 1]
    }

    pub fn edge(&self, i: usize, j: usize) -> f64 {
        self.edge[(i - 1) * self.num_labels + j - 1]
    }

    /// Unnormalized log-score of a 1-based label sequence.
    pub fn sequence_score(&self, y: &[usize]) -> f64 {
        let mut s = 0.0;
        for (t, &label) in y.iter().enumerate() {
            s += self.node(t + 1, label);
            if t > 0 {
                s += self.edge(y[t - 1], label);
            }
        }
        s
    }
}

pub fn score_tables(model: &CrfModel, x: &[usize]) -> Result<ScoreTables> {
    model.check_obs(x)?;
    let l = model.num_labels;
    let mut node = Vec::with_capacity(x.len() * l);
    for &o in x {
        for i in 1..=l {
            node.push(model.mu(i, o));
        }
    }
    Ok(ScoreTables { num_labels: l, node, edge: model.gamma.clone() })
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(xs.map(|v| libm::exp(v - m)).sum::<f64>())
}

/// Per-position label marginals of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    pub num_labels: usize,
    /// `len x L`, row `t` holds `p(Y_t = i | x)`.
    pub p: Vec<f64>,
    pub log_z: f64,
}

impl MarginalTable {
    pub fn len(&self) -> usize {
        self.p.len() / self.num_labels
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Distribution at 1-based position `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.p[(t - 1) * self.num_labels..t * self.num_labels]
    }

    /// Marginal of 1-based label `i` at 1-based position `t`.
    pub fn prob(&self, t: usize, i: usize) -> f64 {
        self.row(t)[i - 1]
    }
}

struct Posterior {
    marginals: MarginalTable,
    /// Expected transition counts summed over positions, `L x L`.
    edge_counts: Vec<f64>,
}

fn posterior(model: &CrfModel, x: &[usize], clamp_first: Option<usize>) -> Result<Posterior> {
    let s = score_tables(model, x)?;
    let l = model.num_labels;
    let n = x.len();
    if let Some(c) = clamp_first {
        model.check_labels(&[c])?;
    }
    if n == 0 {
        return Ok(Posterior {
            marginals: MarginalTable { num_labels: l, p: Vec::new(), log_z: 0.0 },
            edge_counts: vec![0.0; l * l],
        });
    }
    let node = |t: usize, i: usize| -> f64 {
        if t == 0 {
            if let Some(c) = clamp_first {
                if i + 1 != c {
                    return f64::NEG_INFINITY;
                }
            }
        }
        s.node[t * l + i]
    };
    let edge = |i: usize, j: usize| s.edge[i * l + j];

    let mut alpha = vec![0.0; n * l];
    for i in 0..l {
        alpha[i] = node(0, i);
    }
    for t in 1..n {
        for j in 0..l {
            let prev = &alpha[(t - 1) * l..t * l];
            alpha[t * l + j] = node(t, j) + log_sum_exp((0..l).map(|i| prev[i] + edge(i, j)));
        }
    }
    let mut beta = vec![0.0; n * l];
    for t in (0..n - 1).rev() {
        for i in 0..l {
            let next = &beta[(t + 1) * l..(t + 2) * l];
            beta[t * l + i] = log_sum_exp((0..l).map(|j| edge(i, j) + node(t + 1, j) + next[j]));
        }
    }
    let log_z = log_sum_exp(alpha[(n - 1) * l..].iter().copied());

    let mut p = vec![0.0; n * l];
    for t in 0..n {
        for i in 0..l {
            p[t * l + i] = libm::exp(alpha[t * l + i] + beta[t * l + i] - log_z);
        }
    }
    let mut edge_counts = vec![0.0; l * l];
    for t in 1..n {
        for i in 0..l {
            let a = alpha[(t - 1) * l + i];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..l {
                edge_counts[i * l + j] +=
                    libm::exp(a + edge(i, j) + node(t, j) + beta[t * l + j] - log_z);
            }
        }
    }
    Ok(Posterior { marginals: MarginalTable { num_labels: l, p, log_z }, edge_counts })
}

/// Marginals `p(Y_t = i | x)` and `log Z(x)`. With `clamp_first = Some(c)`
/// the first position is restricted to label `c` (its marginal becomes a
/// point mass and `log_z` sums only over sequences starting with `c`).
pub fn forward_backward(model: &CrfModel, x: &[usize], clamp_first: Option<usize>) -> Result<MarginalTable> {
    Ok(posterior(model, x, clamp_first)?.marginals)
}

fn check_data(model: &CrfModel, data: &[LabeledSequence]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyData("CRF training sequences"));
    }
    for seq in data {
        if seq.x.len() != seq.y.len() {
            return Err(Error::LengthMismatch { left: seq.x.len(), right: seq.y.len() });
        }
        model.check_obs(&seq.x)?;
        model.check_labels(&seq.y)?;
    }
    Ok(())
}

/// Penalized conditional log-likelihood
/// `sum_n [score(x_n, y_n) - log Z(x_n)] - l2 * |theta|^2`.
pub fn log_likelihood(model: &CrfModel, data: &[LabeledSequence]) -> Result<f64> {
    check_data(model, data)?;
    let mut ll = 0.0;
    for seq in data {
        let s = score_tables(model, &seq.x)?;
        let log_z = forward_backward(model, &seq.x, None)?.log_z;
        ll += s.sequence_score(&seq.y) - log_z;
    }
    Ok(ll - model.l2 * model.sq_norm())
}

/// Gradient of [`log_likelihood`], shaped like the model's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradient {
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl CrfGradient {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.mu.clone();
        v.extend_from_slice(&self.gamma);
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.mu.iter().chain(&self.gamma).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Empirical feature counts minus model-expected counts, minus `2 l2 theta`.
pub fn gradient(model: &CrfModel, data: &[LabeledSequence]) -> Result<CrfGradient> {
    Ok(objective_and_gradient(model, data)?.1)
}

fn objective_and_gradient(model: &CrfModel, data: &[LabeledSequence]) -> Result<(f64, CrfGradient)> {
    check_data(model, data)?;
    let l = model.num_labels;
    let h = model.num_obs;
    let mut g_mu = vec![0.0; l * h];
    let mut g_gamma = vec![0.0; l * l];
    let mut ll = 0.0;
    for seq in data {
        let s = score_tables(model, &seq.x)?;
        let post = posterior(model, &seq.x, None)?;
        ll += s.sequence_score(&seq.y) - post.marginals.log_z;
        for (t, (&o, &y)) in seq.x.iter().zip(&seq.y).enumerate() {
            g_mu[(y - 1) * h + o - 1] += 1.0;
            if t > 0 {
                g_gamma[(seq.y[t - 1] - 1) * l + y - 1] += 1.0;
            }
            for i in 0..l {
                g_mu[i * h + o - 1] -= post.marginals.p[t * l + i];
            }
        }
        for (g, e) in g_gamma.iter_mut().zip(&post.edge_counts) {
            *g -= e;
        }
    }
    for (g, w) in g_mu.iter_mut().zip(&model.mu) {
        *g -= 2.0 * model.l2 * w;
    }
    for (g, w) in g_gamma.iter_mut().zip(&model.gamma) {
        *g -= 2.0 * model.l2 * w;
    }
    Ok((ll - model.l2 * model.sq_norm(), CrfGradient { mu: g_mu, gamma: g_gamma }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CrfTrainConfig {
    pub l2: f64,
    /// Initial step of each iteration; halved until the objective does not
    /// decrease.
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the largest gradient component falls below this.
    pub tol: f64,
    /// Unused by the zero initialization; kept so configs stay explicit.
    pub rng_seed: u64,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig { l2: 0.1, learning_rate: 0.5, max_iters: 500, tol: 1e-4, rng_seed: 0 }
    }
}

impl CrfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!("CRF l2 must be >= 0, got {}", self.l2)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(alloc::format!(
                "CRF learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("CRF tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfTrainReport {
    pub iterations: usize,
    /// Penalized log-likelihood after each accepted step, starting with the
    /// initial value.
    pub objective: Vec<f64>,
    pub final_grad_max: f64,
    pub converged: bool,
}

/// Train from zero weights by gradient ascent on the penalized
/// log-likelihood. Each iteration starts at `learning_rate` and halves the
/// step until the objective does not decrease, so the objective trace is
/// non-decreasing.
pub fn train_crf(
    data: &[LabeledSequence],
    num_labels: usize,
    num_obs: usize,
    cfg: &CrfTrainConfig,
) -> Result<(CrfModel, CrfTrainReport)> {
    cfg.validate()?;
    let mut model = CrfModel::zeros(num_labels, num_obs, cfg.l2);
    model.validate()?;
    let (mut f, mut g) = objective_and_gradient(&model, data)?;
    let mut objective = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut params = model.params();
    let mut trial = model.clone();
    while iterations < cfg.max_iters {
        if g.max_abs() < cfg.tol {
            converged = true;
            break;
        }
        let dir = g.flat();
        let mut step = cfg.learning_rate;
        let mut accepted = None;
        while step > 1e-12 {
            let cand: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
            trial.set_params(&cand);
            let (f_new, g_new) = objective_and_gradient(&trial, data)?;
            if f_new.is_finite() && f_new >= f {
                accepted = Some((cand, f_new, g_new));
                break;
            }
            step /= 2.0;
        }
        let Some((cand, f_new, g_new)) = accepted else { break };
        params = cand;
        model.set_params(&params);
        f = f_new;
        g = g_new;
        objective.push(f);
        iterations += 1;
    }
    if !converged && g.max_abs() < cfg.tol {
        converged = true;
    }
    let report = CrfTrainReport { iterations, objective, final_grad_max: g.max_abs(), converged };
    Ok((model, report))
}

/// Expected energy per hour, `sum_i p_i(t) * y[i]`, with the first hour
/// clamped to the level whose value is nearest `initial_energy`.
pub fn predict_day(model: &CrfModel, level_values: &LevelValueTable, initial_energy: f64) -> Result<Vec<f64>> {
    if level_values.levels() != model.num_labels {
        return Err(Error::DimensionMismatch { expected: model.num_labels, actual: level_values.levels() });
    }
    let clamp = level_values.nearest_level(initial_energy);
    let x: Vec<usize> = (1..=model.num_obs).collect();
    let m = forward_backward(model, &x, Some(clamp))?;
    Ok((1..=m.len())
        .map(|t| m.row(t).iter().zip(&level_values.y).map(|(p, y)| p * y).sum())
        .collect())
}

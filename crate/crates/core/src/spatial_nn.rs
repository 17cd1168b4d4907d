//! Per-region spatial predictor: a two-layer feedforward network (logistic
//! hidden layer, linear output) from the neighbor regions' features at hour
//! `t` to the region's aggregated energy at hour `t + delta_t`.
//!
//! Training is full-batch gradient descent on the mean squared error of
//! standardized targets with an L2 penalty on the weight matrices.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureTable, SpatialFeatureRow};
use crate::grid::{RegionGrid, RegionId};
use crate::time::Day;

/// Number of neighbor regions feeding each spatial model.
pub const NEIGHBORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FeatureSet {
    /// `F_N`: vehicle count.
    N,
    /// `F_V`: velocity mean and variance.
    V,
    /// `F_D`: four direction counts and their variance.
    D,
    /// `F_E`: aggregated energy and its variance.
    E,
}

impl FeatureSet {
    /// Table order used when concatenating features.
    pub const ALL: [FeatureSet; 4] = [FeatureSet::N, FeatureSet::V, FeatureSet::D, FeatureSet::E];

    pub fn width(self) -> usize {
        match self {
            FeatureSet::N => 1,
            FeatureSet::V => 2,
            FeatureSet::D => 5,
            FeatureSet::E => 2,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            FeatureSet::N => "F_N",
            FeatureSet::V => "F_V",
            FeatureSet::D => "F_D",
            FeatureSet::E => "F_E",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    /// Accepts `F_N`, `FN`, `N` (any case).
    pub fn parse(tag: &str) -> Result<Self> {
        let t = tag.trim();
        let core = t
            .strip_prefix("F_")
            .or_else(|| t.strip_prefix("f_"))
            .or_else(|| t.strip_prefix('F'))
            .or_else(|| t.strip_prefix('f'))
            .unwrap_or(t);
        match core {
            "N" | "n" => Ok(FeatureSet::N),
            "V" | "v" => Ok(FeatureSet::V),
            "D" | "d" => Ok(FeatureSet::D),
            "E" | "e" => Ok(FeatureSet::E),
            _ => Err(Error::UnknownFeatureSet(tag.to_string())),
        }
    }

    fn push(self, row: &SpatialFeatureRow, out: &mut Vec<f64>) {
        match self {
            FeatureSet::N => out.push(f64::from(row.f_n)),
            FeatureSet::V => out.extend([row.v_ave, row.v_var]),
            FeatureSet::D => {
                out.extend(row.d.map(f64::from));
                out.push(row.d_var);
            }
            FeatureSet::E => out.extend([row.e_sum, row.e_var]),
        }
    }
}

/// Non-empty selection of feature sets. Remembers the order it was written
/// in for display; the input layout always follows [`FeatureSet::ALL`].
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct FeatureSubset {
    written: Vec<FeatureSet>,
}

impl FeatureSubset {
    pub fn new(sets: &[FeatureSet]) -> Result<Self> {
        let mut written: Vec<FeatureSet> = Vec::new();
        for &s in sets {
            if !written.contains(&s) {
                written.push(s);
            }
        }
        if written.is_empty() {
            return Err(Error::UnknownFeatureSet(String::from("(empty subset)")));
        }
        Ok(FeatureSubset { written })
    }

    /// Comma-separated tags, e.g. `"F_D,F_N,F_E"`.
    pub fn parse(list: &str) -> Result<Self> {
        let sets = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(FeatureSet::parse)
            .collect::<Result<Vec<_>>>()?;
        Self::new(&sets)
    }

    pub fn all() -> Self {
        FeatureSubset { written: FeatureSet::ALL.to_vec() }
    }

    /// The selection the spatial predictor uses by default: direction,
    /// count and energy features.
    pub fn recommended() -> Self {
        FeatureSubset { written: vec![FeatureSet::D, FeatureSet::N, FeatureSet::E] }
    }

    /// The six combinations compared in the feature ablation.
    pub fn ablation_subsets() -> Vec<FeatureSubset> {
        use FeatureSet::*;
        [
            &[V, N, E][..],
            &[D, V, N, E][..],
            &[E, N][..],
            &[N][..],
            &[E][..],
            &[D, N, E][..],
        ]
        .iter()
        .map(|s| FeatureSubset { written: s.to_vec() })
        .collect()
    }

    fn mask(&self) -> u8 {
        self.written.iter().fold(0, |m, s| m | s.bit())
    }

    pub fn contains(&self, set: FeatureSet) -> bool {
        self.mask() & set.bit() != 0
    }

    /// Selected sets in concatenation order.
    pub fn ordered(&self) -> impl Iterator<Item = FeatureSet> + '_ {
        FeatureSet::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    /// Values contributed by one region row.
    pub fn width(&self) -> usize {
        self.ordered().map(FeatureSet::width).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.width() * NEIGHBORS
    }

    pub fn push_row(&self, row: &SpatialFeatureRow, out: &mut Vec<f64>) {
        for s in self.ordered() {
            s.push(row, out);
        }
    }
}

impl PartialEq for FeatureSubset {
    fn eq(&self, other: &Self) -> bool {
        self.mask() == other.mask()
    }
}

impl Eq for FeatureSubset {}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.written.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(s.tag())?;
        }
        Ok(())
    }
}

impl TryFrom<String> for FeatureSubset {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        FeatureSubset::parse(&s)
    }
}

impl From<FeatureSubset> for String {
    fn from(s: FeatureSubset) -> String {
        s.to_string()
    }
}

/// Concatenate the selected features of region `k`'s eight neighbors
/// (ascending region id) at the given hour. Region `k` itself is excluded.
pub fn assemble_input(
    table: &FeatureTable,
    grid: &RegionGrid,
    k: RegionId,
    day: Day,
    hour: u8,
    subset: &FeatureSubset,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(subset.input_dim());
    for n in grid.neighbor_set(k)? {
        subset.push_row(table.require(n, day, hour)?, &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler { mean: 0.0, std: 1.0 };

    pub fn scale(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn unscale(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
        let n = values.clone().count().max(1) as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, libm::sqrt(var))
    }

    /// Standardizing scaler for an input column; constant columns pass
    /// through unscaled.
    pub fn fit_input(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (mean, std) = Self::moments(values);
        if std > 1e-12 {
            Scaler { mean, std }
        } else {
            Self::IDENTITY
        }
    }

    /// Standardizing scaler for targets; constant targets are centered only.
    pub fn fit_target(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (mean, std) = Self::moments(values);
        Scaler { mean, std: if std > 1e-12 { std } else { 1.0 } }
    }
}

/// Trainable parameters. `w1` is `hidden x input`, row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Weights {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Weights {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Weights {
            w1: vec![0.0; input_dim * hidden_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; hidden_dim],
            b2: 0.0,
        }
    }

    /// Flat view in the order w1, b1, w2, b2.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let (a, rest) = flat.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, rest) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = rest[0];
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn is_finite(&self) -> bool {
        self.b2.is_finite()
            && self.w1.iter().chain(&self.b1).chain(&self.w2).all(|v| v.is_finite())
    }

    fn axpy(&mut self, alpha: f64, g: &Weights) {
        for (w, d) in self.w1.iter_mut().zip(&g.w1) {
            *w += alpha * d;
        }
        for (w, d) in self.b1.iter_mut().zip(&g.b1) {
            *w += alpha * d;
        }
        for (w, d) in self.w2.iter_mut().zip(&g.w2) {
            *w += alpha * d;
        }
        self.b2 += alpha * g.b2;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NNModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub weights: Weights,
    pub input_scaler: Vec<Scaler>,
    pub target_scaler: Scaler,
}

impl NNModel {
    /// Network with zero weights and identity scalers.
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        NNModel {
            input_dim,
            hidden_dim,
            weights: Weights::zeros(input_dim, hidden_dim),
            input_scaler: vec![Scaler::IDENTITY; input_dim],
            target_scaler: Scaler::IDENTITY,
        }
    }

    /// Predicted energy in kWh, clamped below at zero.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, actual: x.len() });
        }
        let xs: Vec<f64> = x.iter().zip(&self.input_scaler).map(|(v, s)| s.scale(*v)).collect();
        let z = raw_output(&self.weights, self.input_dim, &xs);
        let y = self.target_scaler.unscale(z);
        if y.is_nan() {
            return Err(Error::NonFinite("network output"));
        }
        Ok(y.max(0.0))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forward(x)
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if w.w1.len() != self.input_dim * self.hidden_dim
            || w.b1.len() != self.hidden_dim
            || w.w2.len() != self.hidden_dim
            || self.input_scaler.len() != self.input_dim
        {
            return Err(Error::InvalidConfig(String::from("network parameter shapes disagree")));
        }
        if !w.is_finite() {
            return Err(Error::NonFinite("network weights"));
        }
        Ok(())
    }

    fn scale_data(&self, data: &[Sample]) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(data.len() * self.input_dim);
        let mut zs = Vec::with_capacity(data.len());
        for s in data {
            xs.extend(s.input.iter().zip(&self.input_scaler).map(|(v, sc)| sc.scale(*v)));
            zs.push(self.target_scaler.scale(s.target));
        }
        (xs, zs)
    }

    /// Penalized training objective of this model on `data`, in scaled
    /// target units.
    pub fn loss(&self, data: &[Sample], l2: f64) -> f64 {
        let (xs, zs) = self.scale_data(data);
        loss_and_gradient(&self.weights, self.input_dim, &xs, &zs, l2).0
    }
}

/// Dot product with four independent partial sums (fixed order, so results
/// stay reproducible).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Network output in scaled target units for one already-scaled input.
fn raw_output(w: &Weights, input_dim: usize, xs: &[f64]) -> f64 {
    let mut out = w.b2;
    for (j, row) in w.w1.chunks_exact(input_dim).enumerate() {
        let pre = w.b1[j] + dot(row, xs);
        out += w.w2[j] * sigmoid(pre);
    }
    out
}

/// Objective `mean((o - z)^2) + l2 * (|w1|^2 + |w2|^2)` and its gradient by
/// backpropagation. `xs` holds the scaled inputs row-major, `zs` the scaled
/// targets.
pub fn loss_and_gradient(
    w: &Weights,
    input_dim: usize,
    xs: &[f64],
    zs: &[f64],
    l2: f64,
) -> (f64, Weights) {
    let hidden = w.b1.len();
    let n = zs.len().max(1) as f64;
    let mut g = Weights::zeros(input_dim, hidden);
    let mut h = vec![0.0; hidden];
    let mut sse = 0.0;
    for (x, &z) in xs.chunks_exact(input_dim).zip(zs) {
        let mut o = w.b2;
        for (j, row) in w.w1.chunks_exact(input_dim).enumerate() {
            h[j] = sigmoid(w.b1[j] + dot(row, x));
            o += w.w2[j] * h[j];
        }
        let r = o - z;
        sse += r * r;
        let delta = 2.0 * r / n;
        g.b2 += delta;
        for j in 0..hidden {
            g.w2[j] += delta * h[j];
            let dpre = delta * w.w2[j] * h[j] * (1.0 - h[j]);
            g.b1[j] += dpre;
            for (gw, xi) in g.w1[j * input_dim..(j + 1) * input_dim].iter_mut().zip(x) {
                *gw += dpre * xi;
            }
        }
    }
    let penalty: f64 = w.w1.iter().chain(&w.w2).map(|v| v * v).sum();
    for (gw, v) in g.w1.iter_mut().zip(&w.w1) {
        *gw += 2.0 * l2 * v;
    }
    for (gw, v) in g.w2.iter_mut().zip(&w.w2) {
        *gw += 2.0 * l2 * v;
    }
    (sse / n + l2 * penalty, g)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub input: Vec<f64>,
    /// Energy in kWh.
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NNTrainConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epoch budget of each hourly warm-start retrain.
    pub online_epochs: usize,
    /// Stop after this many epochs without sufficient improvement.
    pub patience: usize,
    /// Relative decrease of the best loss that counts as an improvement.
    pub min_delta: f64,
    pub l2: f64,
    pub rng_seed: u64,
    /// Prediction horizon in hours (1..=24).
    pub delta_t: usize,
}

impl Default for NNTrainConfig {
    fn default() -> Self {
        NNTrainConfig {
            hidden_dim: 16,
            learning_rate: 0.01,
            max_epochs: 2000,
            online_epochs: 200,
            patience: 100,
            min_delta: 1e-5,
            l2: 1e-4,
            rng_seed: 0,
            delta_t: 1,
        }
    }
}

impl NNTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.hidden_dim == 0 {
            return bad(String::from("hidden_dim must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be >= 0, got {}", self.l2));
        }
        if !(self.min_delta >= 0.0 && self.min_delta < 1.0) {
            return bad(format!("min_delta must be in [0, 1), got {}", self.min_delta));
        }
        if !(1..=24).contains(&self.delta_t) {
            return bad(format!("delta_t must be in 1..=24, got {}", self.delta_t));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Gradient steps taken.
    pub epochs: usize,
    /// Objective at the starting parameters.
    pub initial_loss: f64,
    /// Objective at the returned parameters.
    pub final_loss: f64,
    /// Objective before each step.
    pub losses: Vec<f64>,
}

impl TrainReport {
    /// First epoch whose loss is at or below `threshold`.
    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        self.losses.iter().position(|&l| l <= threshold)
    }
}

fn check_data(data: &[Sample], input_dim: Option<usize>) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::EmptyData("spatial training set"));
    }
    if data.len() < 2 {
        return Err(Error::InvalidConfig(String::from("spatial training needs at least 2 pairs")));
    }
    let dim = input_dim.unwrap_or(data[0].input.len());
    for s in data {
        if s.input.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: s.input.len() });
        }
        if !s.target.is_finite() || s.input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spatial training data"));
        }
    }
    Ok(dim)
}

/// Samples in a canonical order so full-batch sums do not depend on how the
/// caller ordered them.
fn canonical(data: &[Sample]) -> Vec<Sample> {
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| {
        a.input
            .iter()
            .zip(&b.input)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.target.total_cmp(&b.target))
    });
    sorted
}

/// Train a fresh network: fit scalers on `data`, draw initial weights
/// uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` from `cfg.rng_seed`
/// (biases start at zero), then descend.
pub fn train(data: &[Sample], cfg: &NNTrainConfig) -> Result<(NNModel, TrainReport)> {
    cfg.validate()?;
    let dim = check_data(data, None)?;
    let data = canonical(data);
    let input_scaler = (0..dim)
        .map(|i| Scaler::fit_input(data.iter().map(move |s| s.input[i])))
        .collect();
    let target_scaler = Scaler::fit_target(data.iter().map(|s| s.target));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut weights = Weights::zeros(dim, cfg.hidden_dim);
    let a1 = 1.0 / libm::sqrt(dim.max(1) as f64);
    for w in &mut weights.w1 {
        *w = rng.gen_range(-a1..=a1);
    }
    let a2 = 1.0 / libm::sqrt(cfg.hidden_dim as f64);
    for w in &mut weights.w2 {
        *w = rng.gen_range(-a2..=a2);
    }
    let model = NNModel { input_dim: dim, hidden_dim: cfg.hidden_dim, weights, input_scaler, target_scaler };
    descend(model, &data, cfg)
}

/// Continue training from `model`'s current parameters on `data`. Scalers
/// are kept so the warm-started weights stay meaningful.
pub fn train_warm(model: &NNModel, data: &[Sample], cfg: &NNTrainConfig) -> Result<(NNModel, TrainReport)> {
    cfg.validate()?;
    model.validate()?;
    check_data(data, Some(model.input_dim))?;
    descend(model.clone(), &canonical(data), cfg)
}

fn descend(mut model: NNModel, data: &[Sample], cfg: &NNTrainConfig) -> Result<(NNModel, TrainReport)> {
    let (xs, zs) = model.scale_data(data);
    let dim = model.input_dim;
    let mut losses = Vec::new();
    let mut best = model.weights.clone();
    let mut best_loss = f64::INFINITY;
    let mut reference = f64::INFINITY;
    let mut stale = 0;
    let mut epochs = 0;
    while epochs < cfg.max_epochs {
        let (loss, grad) = loss_and_gradient(&model.weights, dim, &xs, &zs, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::NonFinite("spatial training loss"));
        }
        losses.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&model.weights);
        }
        if loss < reference * (1.0 - cfg.min_delta) {
            reference = loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
        model.weights.axpy(-cfg.learning_rate, &grad);
        epochs += 1;
    }
    let (last, _) = loss_and_gradient(&model.weights, dim, &xs, &zs, cfg.l2);
    if last < best_loss {
        best_loss = last;
        best.clone_from(&model.weights);
    }
    model.weights = best;
    let report = TrainReport {
        epochs,
        initial_loss: losses.first().copied().unwrap_or(best_loss),
        final_loss: best_loss,
        losses,
    };
    Ok((model, report))
}

/// A trained model together with the data it was trained on, supporting
/// hourly retraining as new observations arrive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialPredictor {
    pub model: NNModel,
    pub data: Vec<Sample>,
    pub cfg: NNTrainConfig,
}

impl SpatialPredictor {
    pub fn fit(data: Vec<Sample>, cfg: NNTrainConfig) -> Result<(Self, TrainReport)> {
        let (model, report) = train(&data, &cfg)?;
        Ok((SpatialPredictor { model, data, cfg }, report))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.model.predict(x)
    }

    /// Append a realized (input, target) pair and retrain from the current
    /// parameters on the augmented set for at most `online_epochs` epochs.
    pub fn retrain_online(&mut self, pair: Sample) -> Result<TrainReport> {
        self.data.push(pair);
        let cfg = NNTrainConfig { max_epochs: self.cfg.online_epochs, ..self.cfg };
        let (model, report) = train_warm(&self.model, &self.data, &cfg)?;
        self.model = model;
        Ok(report)
    }

    /// Warm-start retraining on the current data set.
    pub fn retrain(&mut self) -> Result<TrainReport> {
        let (model, report) = train_warm(&self.model, &self.data, &self.cfg)?;
        self.model = model;
        Ok(report)
    }
}

//! The three experiment phases over a feature table: offline training on the
//! training days, choosing the combination coefficient on the validation day,
//! and online prediction of the test day. Followed by evaluation and the
//! feature-subset ablation.

use std::collections::BTreeSet;

use evstp_core::combiner::{combine, optimize_lambda, LambdaResult, RegionSeries};
use evstp_core::features::{
    build_level_values, discretize, EnergySeries, FeatureTable, LevelScale, LevelValueTable, NUM_LEVELS,
};
use evstp_core::spatial_nn::{assemble_input, FeatureSubset, NNTrainConfig, Sample, SpatialPredictor};
use evstp_core::temporal_crf::{predict_day, train_crf, CrfModel, CrfTrainConfig, LabeledSequence};
use evstp_core::time::{slot_to_day_hour, HOURS_PER_DAY};
use evstp_core::{Day, RegionGrid, RegionId};
use serde::{Deserialize, Serialize};

use crate::dates::format_day;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train_days: Vec<Day>,
    pub validation_day: Day,
    pub test_day: Day,
}

impl SplitPlan {
    pub fn new(train_days: Vec<Day>, validation_day: Day, test_day: Day) -> Result<Self> {
        let plan = SplitPlan { train_days, validation_day, test_day };
        plan.validate()?;
        Ok(plan)
    }

    /// All but the last two days train; the last two validate and test.
    pub fn from_days(days: &[Day]) -> Result<Self> {
        if days.len() < 3 {
            return Err(Error::Data(format!("need at least 3 days of features, found {}", days.len())));
        }
        let n = days.len();
        Self::new(days[..n - 2].to_vec(), days[n - 2], days[n - 1])
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_days.is_empty() {
            return Err(Error::Config(String::from("split needs at least one training day")));
        }
        if self.train_days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(String::from("training days must be distinct and ascending")));
        }
        let last = *self.train_days.last().unwrap();
        if !(last < self.validation_day && self.validation_day < self.test_day) {
            return Err(Error::Config(String::from(
                "split must be chronological: training days < validation day < test day",
            )));
        }
        Ok(())
    }

    /// Training days followed by the validation day.
    pub fn extended_window(&self) -> Vec<Day> {
        let mut w = self.train_days.clone();
        w.push(self.validation_day);
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub grid: RegionGrid,
    pub subset: FeatureSubset,
    /// Also carries the horizon `delta_t` and the base seed; region `k`
    /// trains with seed `rng_seed + k`.
    pub nn: NNTrainConfig,
    pub crf: CrfTrainConfig,
    pub levels: usize,
    pub hourly_retraining: bool,
    /// Restrict training and prediction to these regions; neighbor features
    /// still come from the whole grid.
    pub regions: Option<Vec<RegionId>>,
}

impl Settings {
    pub fn new(grid: RegionGrid) -> Self {
        Settings {
            grid,
            subset: FeatureSubset::recommended(),
            nn: NNTrainConfig::default(),
            crf: CrfTrainConfig::default(),
            levels: NUM_LEVELS,
            hourly_retraining: true,
            regions: None,
        }
    }

    pub fn delta_t(&self) -> usize {
        self.nn.delta_t
    }

    pub fn region_list(&self) -> Result<Vec<RegionId>> {
        match &self.regions {
            None => Ok(self.grid.regions().collect()),
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::Config(String::from("region subset is empty")));
                }
                let mut seen = BTreeSet::new();
                for &r in list {
                    self.grid.region(r.get()).map_err(|_| {
                        Error::Config(format!("region {r} outside 1..={}", self.grid.region_count()))
                    })?;
                    if !seen.insert(r) {
                        return Err(Error::Config(format!("region {r} listed twice")));
                    }
                }
                Ok(seen.into_iter().collect())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.nn.validate()?;
        self.crf.validate()?;
        if self.levels < 1 || self.levels > usize::from(u8::MAX) {
            return Err(Error::Config(format!("levels must be in 1..=255, got {}", self.levels)));
        }
        self.region_list().map(|_| ())
    }

    fn nn_for(&self, region: RegionId) -> NNTrainConfig {
        NNTrainConfig { rng_seed: self.nn.rng_seed.wrapping_add(region.get() as u64), ..self.nn }
    }
}

/// Everything learned for one region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionModel {
    pub region: RegionId,
    pub spatial: SpatialPredictor,
    pub temporal: CrfModel,
    pub level_scale: LevelScale,
    pub level_values: LevelValueTable,
    /// Clamp target for the first hour of a predicted day.
    pub initial_energy: f64,
    /// Latest hour slot whose features or energies entered any parameter.
    pub trained_through: i64,
}

/// Input of the spatial predictor for a target hour: neighbor features
/// `delta_t` hours earlier, possibly on the previous day.
pub fn spatial_input(
    table: &FeatureTable,
    settings: &Settings,
    region: RegionId,
    target_slot: i64,
) -> Result<Vec<f64>> {
    let (day, hour) = slot_to_day_hour(target_slot - settings.delta_t() as i64);
    Ok(assemble_input(table, &settings.grid, region, day, hour, &settings.subset)?)
}

fn pair_at(table: &FeatureTable, settings: &Settings, region: RegionId, target_slot: i64) -> Result<Sample> {
    let (day, hour) = slot_to_day_hour(target_slot);
    Ok(Sample {
        input: spatial_input(table, settings, region, target_slot)?,
        target: table.require(region, day, hour)?.e_sum,
    })
}

/// Pairs whose input hour and target hour both fall on days of `window`.
/// Returns the pairs and the latest target slot among them.
pub fn training_pairs(
    table: &FeatureTable,
    settings: &Settings,
    region: RegionId,
    window: &[Day],
) -> Result<(Vec<Sample>, i64)> {
    let days: BTreeSet<Day> = window.iter().copied().collect();
    let mut out = Vec::new();
    let mut latest = i64::MIN;
    for &day in &days {
        for h in 1..=HOURS_PER_DAY as u8 {
            let target = day.slot(h);
            let (input_day, _) = slot_to_day_hour(target - settings.delta_t() as i64);
            if days.contains(&input_day) {
                out.push(pair_at(table, settings, region, target)?);
                latest = latest.max(target);
            }
        }
    }
    Ok((out, latest))
}

fn region_series(table: &FeatureTable, region: RegionId, days: &[Day]) -> Result<Vec<EnergySeries>> {
    days.iter()
        .map(|&day| {
            let mut e = [0.0; HOURS_PER_DAY];
            for (h, v) in e.iter_mut().enumerate() {
                *v = table.require(region, day, h as u8 + 1)?.e_sum;
            }
            Ok(EnergySeries::from_hourly(region, day, e))
        })
        .collect()
}

struct TemporalFit {
    model: CrfModel,
    scale: LevelScale,
    values: LevelValueTable,
    initial_energy: f64,
}

fn fit_temporal(table: &FeatureTable, settings: &Settings, region: RegionId, window: &[Day]) -> Result<TemporalFit> {
    let mut series = region_series(table, region, window)?;
    let training = series.clone();
    let scale = discretize(&mut series, &training, settings.levels);
    let sequences: Vec<LabeledSequence> = series
        .iter()
        .map(|s| LabeledSequence::day(s.level.iter().map(|&l| usize::from(l)).collect()))
        .collect();
    let (model, report) = train_crf(&sequences, settings.levels, HOURS_PER_DAY, &settings.crf)?;
    log::debug!(
        "region {region}: CRF {} iterations, converged {}",
        report.iterations,
        report.converged
    );
    let values = build_level_values(region, &series, settings.levels)?;
    let initial_energy = series.iter().map(|s| s.e_sum[0]).sum::<f64>() / series.len() as f64;
    Ok(TemporalFit { model, scale, values, initial_energy })
}

fn check_coverage(table: &FeatureTable, days: &[Day]) -> Result<()> {
    for &d in days {
        if !table.contains_day(d) {
            return Err(Error::Data(format!("feature table has no rows for {}", format_day(d))));
        }
    }
    Ok(())
}

/// Fit every selected region on the training days: a network on
/// (neighbor features, energy `delta_t` hours later) pairs, a CRF on one
/// level sequence per day, and the level values.
pub fn run_offline_training(table: &FeatureTable, split: &SplitPlan, settings: &Settings) -> Result<Vec<RegionModel>> {
    split.validate()?;
    settings.validate()?;
    check_coverage(table, &split.train_days)?;
    let mut out = Vec::new();
    for region in settings.region_list()? {
        let (pairs, latest) = training_pairs(table, settings, region, &split.train_days)?;
        let (spatial, report) = SpatialPredictor::fit(pairs, settings.nn_for(region))?;
        log::debug!("region {region}: NN {} epochs, loss {:.6}", report.epochs, report.final_loss);
        let t = fit_temporal(table, settings, region, &split.train_days)?;
        let last_train_slot = split.train_days.last().unwrap().slot(HOURS_PER_DAY as u8);
        out.push(RegionModel {
            region,
            spatial,
            temporal: t.model,
            level_scale: t.scale,
            level_values: t.values,
            initial_energy: t.initial_energy,
            trained_through: latest.max(last_train_slot),
        });
    }
    Ok(out)
}

/// Truth and predictions of one region-hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub region: RegionId,
    pub day: Day,
    pub hour: u8,
    pub e_true: f64,
    pub e_sp: f64,
    pub y_tp: f64,
    pub e_stp: f64,
}

fn assert_no_leakage(model: &RegionModel, target_slot: i64) -> Result<()> {
    if model.trained_through >= target_slot {
        return Err(Error::Data(format!(
            "region {}: parameters saw slot {} while predicting slot {target_slot}",
            model.region, model.trained_through
        )));
    }
    Ok(())
}

fn day_truth(table: &FeatureTable, region: RegionId, day: Day) -> Result<Vec<f64>> {
    (1..=HOURS_PER_DAY as u8)
        .map(|h| Ok(table.require(region, day, h)?.e_sum))
        .collect()
}

/// Predict the validation day with the offline models and minimize the summed
/// NMSE of the combination over the coefficient.
pub fn run_validation_combining(
    models: &[RegionModel],
    table: &FeatureTable,
    split: &SplitPlan,
    settings: &Settings,
) -> Result<(LambdaResult, Vec<PredictionRecord>)> {
    check_coverage(table, &[split.validation_day])?;
    let day = split.validation_day;
    let mut series = Vec::new();
    for m in models {
        let y_tp = predict_day(&m.temporal, &m.level_values, m.initial_energy)?;
        let mut e_sp = Vec::with_capacity(HOURS_PER_DAY);
        for h in 1..=HOURS_PER_DAY as u8 {
            assert_no_leakage(m, day.slot(h))?;
            e_sp.push(m.spatial.predict(&spatial_input(table, settings, m.region, day.slot(h))?)?);
        }
        series.push(RegionSeries { region: m.region, e_true: day_truth(table, m.region, day)?, y_tp, e_sp });
    }
    let usable: Vec<RegionSeries> =
        series.iter().filter(|s| s.e_true.iter().any(|&v| v != 0.0)).cloned().collect();
    let lambda = optimize_lambda(&usable)?;
    let records = records_for(&series, day, lambda.lambda_star)?;
    Ok((lambda, records))
}

fn records_for(series: &[RegionSeries], day: Day, lambda: f64) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for s in series {
        let stp = combine(&s.y_tp, &s.e_sp, lambda)?;
        for h in 0..s.e_true.len() {
            out.push(PredictionRecord {
                region: s.region,
                day,
                hour: h as u8 + 1,
                e_true: s.e_true[h],
                e_sp: s.e_sp[h],
                y_tp: s.y_tp[h],
                e_stp: stp[h],
            });
        }
    }
    Ok(out)
}

/// Refit on the training and validation days (the network warm-started from
/// the offline one), then walk through the test day. Before each target
/// hour the newest realized pair is appended and the network retrained, so
/// only energies observed up to the input hour are ever trained on.
pub fn run_online_prediction(
    offline: &[RegionModel],
    lambda: &LambdaResult,
    table: &FeatureTable,
    split: &SplitPlan,
    settings: &Settings,
) -> Result<(Vec<RegionModel>, Vec<PredictionRecord>)> {
    let window = split.extended_window();
    check_coverage(table, &window)?;
    check_coverage(table, &[split.test_day])?;
    let day = split.test_day;
    let first_slot = day.slot(1);
    let mut models = Vec::new();
    let mut series = Vec::new();
    for m in offline {
        let region = m.region;
        let (pairs, latest) = training_pairs(table, settings, region, &window)?;
        let mut spatial = SpatialPredictor { model: m.spatial.model.clone(), data: pairs, cfg: m.spatial.cfg };
        spatial.retrain()?;
        let t = fit_temporal(table, settings, region, &window)?;
        let mut model = RegionModel {
            region,
            spatial,
            temporal: t.model,
            level_scale: t.scale,
            level_values: t.values,
            initial_energy: t.initial_energy,
            trained_through: latest.max(split.validation_day.slot(HOURS_PER_DAY as u8)),
        };
        let y_tp = predict_day(&model.temporal, &model.level_values, model.initial_energy)?;
        let mut e_sp = Vec::with_capacity(HOURS_PER_DAY);
        for h in 1..=HOURS_PER_DAY as u8 {
            let target = day.slot(h);
            let newest = target - settings.delta_t() as i64;
            if settings.hourly_retraining && newest >= first_slot {
                let pair = pair_at(table, settings, region, newest)?;
                model.spatial.retrain_online(pair)?;
                model.trained_through = model.trained_through.max(newest);
            }
            assert_no_leakage(&model, target)?;
            e_sp.push(model.spatial.predict(&spatial_input(table, settings, region, target)?)?);
        }
        series.push(RegionSeries { region, e_true: day_truth(table, region, day)?, y_tp, e_sp });
        models.push(model);
    }
    let records = records_for(&series, day, lambda.lambda_star)?;
    Ok((models, records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub ave: f64,
    pub min: f64,
    pub max: f64,
}

impl Extremes {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Extremes {
            ave: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub region: RegionId,
    /// True when the region's test-day energy is zero in every hour; its
    /// NMSE values are then absent and it is left out of the summaries.
    pub excluded: bool,
    pub nmse_sp: Option<f64>,
    pub nmse_tp: Option<f64>,
    pub nmse_stp: Option<f64>,
    /// `nmse_sp - nmse_stp`.
    pub gain_over_sp: Option<f64>,
    /// `nmse_tp - nmse_stp`.
    pub gain_over_tp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub regions: Vec<RegionScore>,
    pub sp: Option<Extremes>,
    pub tp: Option<Extremes>,
    pub stp: Option<Extremes>,
    pub excluded_regions: Vec<RegionId>,
}

fn nmse_of(truth: &[f64], pred: &[f64]) -> f64 {
    let denom: f64 = truth.iter().map(|v| v * v).sum();
    let num: f64 = truth.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    num / denom
}

/// Per-region NMSE of each predictor and the cross-region summaries.
pub fn evaluate(records: &[PredictionRecord]) -> Evaluation {
    let regions: BTreeSet<RegionId> = records.iter().map(|r| r.region).collect();
    let mut scores = Vec::new();
    let (mut sp, mut tp, mut stp) = (Vec::new(), Vec::new(), Vec::new());
    let mut excluded = Vec::new();
    for region in regions {
        let rs: Vec<&PredictionRecord> = records.iter().filter(|r| r.region == region).collect();
        let truth: Vec<f64> = rs.iter().map(|r| r.e_true).collect();
        if truth.iter().all(|&v| v == 0.0) {
            excluded.push(region);
            scores.push(RegionScore {
                region,
                excluded: true,
                nmse_sp: None,
                nmse_tp: None,
                nmse_stp: None,
                gain_over_sp: None,
                gain_over_tp: None,
            });
            continue;
        }
        let col = |f: fn(&PredictionRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let n_sp = nmse_of(&truth, &col(|r| r.e_sp));
        let n_tp = nmse_of(&truth, &col(|r| r.y_tp));
        let n_stp = nmse_of(&truth, &col(|r| r.e_stp));
        sp.push(n_sp);
        tp.push(n_tp);
        stp.push(n_stp);
        scores.push(RegionScore {
            region,
            excluded: false,
            nmse_sp: Some(n_sp),
            nmse_tp: Some(n_tp),
            nmse_stp: Some(n_stp),
            gain_over_sp: Some(n_sp - n_stp),
            gain_over_tp: Some(n_tp - n_stp),
        });
    }
    Evaluation {
        regions: scores,
        sp: Extremes::of(&sp),
        tp: Extremes::of(&tp),
        stp: Extremes::of(&stp),
        excluded_regions: excluded,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub offline: Vec<RegionModel>,
    /// Models as they stand after the last test hour.
    pub online: Vec<RegionModel>,
    pub lambda: LambdaResult,
    pub validation_records: Vec<PredictionRecord>,
    pub test_records: Vec<PredictionRecord>,
    pub validation: Evaluation,
    pub evaluation: Evaluation,
}

pub fn run_experiment(table: &FeatureTable, split: &SplitPlan, settings: &Settings) -> Result<Experiment> {
    log::info!(
        "experiment: subset {}, delta_t {}, {} training days",
        settings.subset,
        settings.delta_t(),
        split.train_days.len()
    );
    let offline = run_offline_training(table, split, settings)?;
    let (lambda, validation_records) = run_validation_combining(&offline, table, split, settings)?;
    log::info!("lambda* = {:.6} (w* = {:.6})", lambda.lambda_star, lambda.w_star);
    let (online, test_records) = run_online_prediction(&offline, &lambda, table, split, settings)?;
    let validation = evaluate(&validation_records);
    let evaluation = evaluate(&test_records);
    Ok(Experiment { offline, online, lambda, validation_records, test_records, validation, evaluation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train_days: Vec<String>,
    pub validation_day: String,
    pub test_day: String,
}

impl From<&SplitPlan> for SplitRecord {
    fn from(s: &SplitPlan) -> Self {
        SplitRecord {
            train_days: s.train_days.iter().map(|&d| format_day(d)).collect(),
            validation_day: format_day(s.validation_day),
            test_day: format_day(s.test_day),
        }
    }
}

pub const MANIFEST_FORMAT: &str = "evstp-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub format: String,
    pub version: u32,
    pub split: SplitRecord,
    pub feature_subset: FeatureSubset,
    pub delta_t: usize,
    pub hourly_retraining: bool,
    pub lambda: LambdaResult,
    /// Validation-day scores of the offline models.
    pub validation: Evaluation,
    pub test: Evaluation,
    /// The effective configuration, when the run came from a config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl ExperimentManifest {
    pub fn new(exp: &Experiment, split: &SplitPlan, settings: &Settings) -> Self {
        ExperimentManifest {
            format: MANIFEST_FORMAT.to_owned(),
            version: MANIFEST_VERSION,
            split: split.into(),
            feature_subset: settings.subset.clone(),
            delta_t: settings.delta_t(),
            hourly_retraining: settings.hourly_retraining,
            lambda: exp.lambda,
            validation: exp.validation.clone(),
            test: exp.evaluation.clone(),
            config: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub subset: FeatureSubset,
    pub lambda_star: f64,
    pub sp: Option<Extremes>,
    pub tp: Option<Extremes>,
    pub stp: Option<Extremes>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub rows: Vec<AblationRow>,
    pub manifests: Vec<ExperimentManifest>,
}

fn ave(e: &Option<Extremes>) -> f64 {
    e.map_or(f64::NEG_INFINITY, |e| e.ave)
}

impl Ablation {
    /// Rows ordered by descending average NMSE of the spatial predictor.
    pub fn by_sp(&self) -> Vec<&AblationRow> {
        let mut rows: Vec<&AblationRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| ave(&b.sp).total_cmp(&ave(&a.sp)));
        rows
    }

    /// Rows ordered by descending average NMSE of the combination.
    pub fn by_stp(&self) -> Vec<&AblationRow> {
        let mut rows: Vec<&AblationRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| ave(&b.stp).total_cmp(&ave(&a.stp)));
        rows
    }
}

/// Run the whole experiment once per subset. The temporal predictor does not
/// read spatial features, so it is identical across rows.
pub fn run_ablation(
    table: &FeatureTable,
    split: &SplitPlan,
    settings: &Settings,
    subsets: &[FeatureSubset],
) -> Result<Ablation> {
    if subsets.is_empty() {
        return Err(Error::Config(String::from("ablation needs at least one feature subset")));
    }
    let mut rows = Vec::new();
    let mut manifests = Vec::new();
    for subset in subsets {
        let s = Settings { subset: subset.clone(), ..settings.clone() };
        let exp = run_experiment(table, split, &s)?;
        rows.push(AblationRow {
            subset: subset.clone(),
            lambda_star: exp.lambda.lambda_star,
            sp: exp.evaluation.sp,
            tp: exp.evaluation.tp,
            stp: exp.evaluation.stp,
        });
        manifests.push(ExperimentManifest::new(&exp, split, &s));
    }
    let mut ablation = Ablation { rows, manifests };
    let order: Vec<FeatureSubset> = ablation.by_stp().iter().map(|r| r.subset.clone()).collect();
    ablation.rows.sort_by_key(|r| order.iter().position(|s| *s == r.subset));
    Ok(ablation)
}

//! Hourly per-region features extracted from cleaned trajectories.
//!
//! Spatial features per region-hour are the vehicle count (`F_N`), velocity
//! mean/variance (`F_V`), direction-quadrant counts and their variance
//! (`F_D`), and aggregated remaining energy with its variance (`F_E`).
//! Energy comes from a linear state-of-charge model that recharges every
//! vehicle to full at a fixed clock hour.
//!
//! Conventions:
//! - a segment (consecutive fixes of one vehicle) belongs to the hour bucket
//!   and region of its later endpoint;
//! - a vehicle's energy counts toward the region of its last fix in the hour;
//! - all variances are population variances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{RegionGrid, RegionId};
use crate::stats::{population_variance, Moments};
use crate::time::{Day, Timestamp, HOURS_PER_DAY, SECONDS_PER_DAY, SECONDS_PER_HOUR};
use crate::trajectory::{GpsFix, Trajectory};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Number of discrete energy levels used by the temporal predictor.
pub const NUM_LEVELS: usize = 10;

/// Great-circle (haversine) distance in meters.
pub fn segment_distance(a: &GpsFix, b: &GpsFix) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let s_lat = libm::sin(dlat / 2.0);
    let s_lon = libm::sin(dlon / 2.0);
    let h = s_lat * s_lat + libm::cos(lat1) * libm::cos(lat2) * s_lon * s_lon;
    2.0 * EARTH_RADIUS_M * libm::atan2(libm::sqrt(h), libm::sqrt((1.0 - h).max(0.0)))
}

/// Mean speed over a segment in m/s.
pub fn segment_velocity(a: &GpsFix, b: &GpsFix) -> Result<f64> {
    let dt = b.timestamp.0 - a.timestamp.0;
    if dt <= 0 {
        return Err(Error::NonPositiveInterval { seconds: dt });
    }
    Ok(segment_distance(a, b) / dt as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Quadrant {
    D1,
    D2,
    D3,
    D4,
}

impl Quadrant {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Quadrant of the displacement `b - a` in (lon, lat). Each axis boundary
/// belongs to exactly one quadrant: +lon to D1, +lat to D2, -lon to D3,
/// -lat to D4. A stationary segment has no direction.
pub fn segment_direction(a: &GpsFix, b: &GpsFix) -> Option<Quadrant> {
    let dlon = b.lon - a.lon;
    let dlat = b.lat - a.lat;
    if dlon > 0.0 && dlat >= 0.0 {
        Some(Quadrant::D1)
    } else if dlon <= 0.0 && dlat > 0.0 {
        Some(Quadrant::D2)
    } else if dlon < 0.0 && dlat <= 0.0 {
        Some(Quadrant::D3)
    } else if dlon >= 0.0 && dlat < 0.0 {
        Some(Quadrant::D4)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SocConfig {
    /// Battery capacity C in kWh, shared by every vehicle.
    pub capacity_kwh: f64,
    /// Consumption rate in kWh per km driven.
    pub consumption_rate: f64,
    /// Clock hour (0..24) at which every battery is back to full.
    pub reset_hour: u8,
}

impl Default for SocConfig {
    fn default() -> Self {
        SocConfig { capacity_kwh: 24.0, consumption_rate: 0.15, reset_hour: 0 }
    }
}

impl SocConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_kwh > 0.0 && self.capacity_kwh.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "capacity_kwh must be > 0, got {}",
                self.capacity_kwh
            )));
        }
        if !(self.consumption_rate > 0.0 && self.consumption_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "consumption_rate must be > 0, got {}",
                self.consumption_rate
            )));
        }
        if usize::from(self.reset_hour) >= HOURS_PER_DAY {
            return Err(Error::InvalidConfig(format!(
                "reset_hour must be in 0..24, got {}",
                self.reset_hour
            )));
        }
        Ok(())
    }

    /// Index of the charge cycle a timestamp falls in; distance accumulates
    /// only between fixes of the same cycle.
    pub fn cycle(&self, t: Timestamp) -> i64 {
        (t.0 - i64::from(self.reset_hour) * SECONDS_PER_HOUR).div_euclid(SECONDS_PER_DAY)
    }
}

/// State of charge after driving `daily_distance_km` since the last reset.
pub fn compute_soc(daily_distance_km: f64, cfg: &SocConfig) -> f64 {
    (1.0 - cfg.consumption_rate * daily_distance_km / cfg.capacity_kwh).clamp(0.0, 1.0)
}

/// SOC at every fix of a cleaned trajectory. Distance accumulates over
/// segments with positive duration inside one charge cycle and resets at
/// each cycle boundary.
pub fn soc_trace(traj: &Trajectory, cfg: &SocConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(traj.fixes.len());
    let mut daily_km = 0.0;
    for (i, fix) in traj.fixes.iter().enumerate() {
        if i > 0 {
            let prev = &traj.fixes[i - 1];
            if cfg.cycle(prev.timestamp) != cfg.cycle(fix.timestamp) {
                daily_km = 0.0;
            } else if segment_velocity(prev, fix).is_ok() {
                daily_km += segment_distance(prev, fix) / 1000.0;
            }
        }
        out.push(compute_soc(daily_km, cfg));
    }
    out
}

/// What `e_var` measures within a region-hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EnergyVariance {
    /// Variance of the per-vehicle remaining energies in the region-hour.
    #[default]
    AcrossVehicles,
    /// Variance of the region's hourly `e_sum` from the first hour of the day
    /// up to and including the current hour.
    AcrossHours,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtractionConfig {
    pub soc: SocConfig,
    pub energy_variance: EnergyVariance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatialFeatureRow {
    pub region: RegionId,
    pub day: Day,
    /// 1..=24, clock hour 00 is hour 1.
    pub hour: u8,
    pub f_n: u32,
    pub v_ave: f64,
    pub v_var: f64,
    pub d: [u32; 4],
    pub d_var: f64,
    pub e_sum: f64,
    pub e_var: f64,
    /// Vehicles whose last fix of the hour lies in this region.
    pub e_n: u32,
}

impl SpatialFeatureRow {
    pub fn empty(region: RegionId, day: Day, hour: u8) -> Self {
        SpatialFeatureRow {
            region,
            day,
            hour,
            f_n: 0,
            v_ave: 0.0,
            v_var: 0.0,
            d: [0; 4],
            d_var: 0.0,
            e_sum: 0.0,
            e_var: 0.0,
            e_n: 0,
        }
    }

    pub fn slot(&self) -> i64 {
        self.day.slot(self.hour)
    }
}

/// Dense feature rows for every region and hour of a contiguous day range,
/// ordered by (day, hour, region).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    first_day: Day,
    num_days: usize,
    num_regions: usize,
    rows: Vec<SpatialFeatureRow>,
}

impl FeatureTable {
    pub fn empty(num_regions: usize) -> Self {
        FeatureTable { first_day: Day(0), num_days: 0, num_regions, rows: Vec::new() }
    }

    /// Rebuild a table from rows in any order. Every (day, hour, region)
    /// combination of the covered day range must be present exactly once.
    pub fn from_rows(num_regions: usize, mut rows: Vec<SpatialFeatureRow>) -> Result<Self> {
        if rows.is_empty() {
            return Ok(Self::empty(num_regions));
        }
        rows.sort_by_key(|r| (r.day, r.hour, r.region));
        let first_day = rows[0].day;
        let last_day = rows[rows.len() - 1].day;
        let num_days = (last_day.0 - first_day.0 + 1) as usize;
        let expected = num_days * HOURS_PER_DAY * num_regions;
        for (i, row) in rows.iter().enumerate() {
            let day = Day(first_day.0 + (i / (HOURS_PER_DAY * num_regions)) as i64);
            let hour = ((i / num_regions) % HOURS_PER_DAY) as u8 + 1;
            let region = RegionId((i % num_regions) as u16 + 1);
            if row.day != day || row.hour != hour || row.region != region {
                return Err(Error::MissingFeatures { region, day: day.0, hour });
            }
        }
        if rows.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "feature table has {} rows, expected {expected}",
                rows.len()
            )));
        }
        Ok(FeatureTable { first_day, num_days, num_regions, rows })
    }

    pub fn rows(&self) -> &[SpatialFeatureRow] {
        &self.rows
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    pub fn days(&self) -> impl Iterator<Item = Day> + '_ {
        (0..self.num_days as i64).map(move |i| Day(self.first_day.0 + i))
    }

    pub fn contains_day(&self, day: Day) -> bool {
        day.0 >= self.first_day.0 && day.0 < self.first_day.0 + self.num_days as i64
    }

    pub fn get(&self, region: RegionId, day: Day, hour: u8) -> Option<&SpatialFeatureRow> {
        if !self.contains_day(day)
            || hour == 0
            || usize::from(hour) > HOURS_PER_DAY
            || region.0 == 0
            || region.index() >= self.num_regions
        {
            return None;
        }
        let d = (day.0 - self.first_day.0) as usize;
        let i = (d * HOURS_PER_DAY + usize::from(hour) - 1) * self.num_regions + region.index();
        self.rows.get(i)
    }

    /// Row at an absolute hour slot (see [`Day::slot`]).
    pub fn at_slot(&self, region: RegionId, slot: i64) -> Option<&SpatialFeatureRow> {
        let (day, hour) = crate::time::slot_to_day_hour(slot);
        self.get(region, day, hour)
    }

    pub fn require(&self, region: RegionId, day: Day, hour: u8) -> Result<&SpatialFeatureRow> {
        self.get(region, day, hour)
            .ok_or(Error::MissingFeatures { region, day: day.0, hour })
    }
}

#[derive(Default)]
struct Cell {
    vehicles: u32,
    last_vehicle: usize,
    velocity: Moments,
    d: [u32; 4],
    energies: Vec<f64>,
}

/// Extract one feature row per region per hour for every day touched by the
/// trajectories. Input trajectories are assumed cleaned (sorted, unique
/// timestamps); segments with non-positive duration are skipped regardless.
pub fn extract_spatial_features(
    trajs: &[Trajectory],
    grid: &RegionGrid,
    cfg: &ExtractionConfig,
) -> Result<FeatureTable> {
    cfg.soc.validate()?;
    let k = grid.region_count();
    let mut days = trajs.iter().flat_map(|t| t.fixes.iter()).map(|f| f.timestamp.day());
    let Some(first) = days.next() else {
        return Ok(FeatureTable::empty(k));
    };
    let (lo, hi) = days.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let num_days = (hi.0 - lo.0 + 1) as usize;
    let base_slot = lo.slot(1);
    let mut cells: Vec<Cell> = Vec::new();
    cells.resize_with(num_days * HOURS_PER_DAY * k, Cell::default);
    let cell_of = |slot: i64, region: RegionId| (slot - base_slot) as usize * k + region.index();

    for (vi, traj) in trajs.iter().enumerate() {
        let vehicle = vi + 1;
        let soc = soc_trace(traj, &cfg.soc);
        for (i, fix) in traj.fixes.iter().enumerate() {
            let region = grid.locate(fix.lon, fix.lat);
            let slot = fix.timestamp.hour_slot();
            if i > 0 {
                let prev = &traj.fixes[i - 1];
                if let Ok(v) = segment_velocity(prev, fix) {
                    if let Some(r) = region {
                        let cell = &mut cells[cell_of(slot, r)];
                        cell.velocity.push(v);
                        if let Some(q) = segment_direction(prev, fix) {
                            cell.d[q.index()] += 1;
                        }
                    }
                }
            }
            let Some(r) = region else { continue };
            let cell = &mut cells[cell_of(slot, r)];
            if cell.last_vehicle != vehicle {
                cell.last_vehicle = vehicle;
                cell.vehicles += 1;
            }
            let last_of_hour = traj
                .fixes
                .get(i + 1)
                .map_or(true, |next| next.timestamp.hour_slot() != slot);
            if last_of_hour {
                cell.energies.push(soc[i] * cfg.soc.capacity_kwh);
            }
        }
    }

    let mut rows = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let slot = base_slot + (i / k) as i64;
        let (day, hour) = crate::time::slot_to_day_hour(slot);
        let region = RegionId((i % k) as u16 + 1);
        let d_f = cell.d.map(f64::from);
        rows.push(SpatialFeatureRow {
            region,
            day,
            hour,
            f_n: cell.vehicles,
            v_ave: cell.velocity.mean(),
            v_var: cell.velocity.variance(),
            d: cell.d,
            d_var: population_variance(&d_f),
            e_sum: cell.energies.iter().fold(0.0, |a, e| a + e),
            e_var: population_variance(&cell.energies),
            e_n: cell.energies.len() as u32,
        });
    }

    if cfg.energy_variance == EnergyVariance::AcrossHours {
        for d in 0..num_days {
            for r in 0..k {
                let mut so_far = Vec::with_capacity(HOURS_PER_DAY);
                for h in 0..HOURS_PER_DAY {
                    let row = &mut rows[(d * HOURS_PER_DAY + h) * k + r];
                    so_far.push(row.e_sum);
                    row.e_var = population_variance(&so_far);
                }
            }
        }
    }

    Ok(FeatureTable { first_day: lo, num_days, num_regions: k, rows })
}

/// One region-day of aggregated energy, its daily normalization, and its
/// discrete levels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergySeries {
    pub region: RegionId,
    pub day: Day,
    pub e_sum: [f64; HOURS_PER_DAY],
    pub e_norm: [f64; HOURS_PER_DAY],
    /// 1..=NUM_LEVELS; all 1 until [`LevelScale::apply`] runs.
    pub level: [u8; HOURS_PER_DAY],
}

impl EnergySeries {
    pub fn from_hourly(region: RegionId, day: Day, e_sum: [f64; HOURS_PER_DAY]) -> Self {
        let total: f64 = e_sum.iter().sum();
        let e_norm = if total > 0.0 { e_sum.map(|e| e / total) } else { [0.0; HOURS_PER_DAY] };
        EnergySeries { region, day, e_sum, e_norm, level: [1; HOURS_PER_DAY] }
    }

    pub fn daily_total(&self) -> f64 {
        self.e_sum.iter().sum()
    }
}

/// Energy series for every region-day in the table, ordered by (region, day).
pub fn build_energy_series(table: &FeatureTable) -> Vec<EnergySeries> {
    let mut out = Vec::with_capacity(table.num_days * table.num_regions);
    for r in 1..=table.num_regions as u16 {
        let region = RegionId(r);
        for day in table.days() {
            let mut e = [0.0; HOURS_PER_DAY];
            for (h, slot) in e.iter_mut().enumerate() {
                *slot = table.get(region, day, h as u8 + 1).map_or(0.0, |row| row.e_sum);
            }
            out.push(EnergySeries::from_hourly(region, day, e));
        }
    }
    out
}

/// Uniform bins over the range of normalized energies seen in training.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelScale {
    pub lo: f64,
    pub hi: f64,
    pub levels: usize,
}

impl LevelScale {
    /// Fit the range over the training series of one region; days with zero
    /// total energy carry no normalized information and are skipped.
    pub fn fit<'a>(training: impl IntoIterator<Item = &'a EnergySeries>, levels: usize) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in training {
            if s.daily_total() > 0.0 {
                for &v in &s.e_norm {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = 0.0;
        }
        LevelScale { lo, hi, levels }
    }

    /// `1 + floor((v - lo) / (hi - lo) * levels)`, clamped to `1..=levels`.
    pub fn level(&self, v: f64) -> u8 {
        if !(self.hi > self.lo) {
            return 1;
        }
        let x = libm::floor((v - self.lo) / (self.hi - self.lo) * self.levels as f64);
        (1.0 + x).clamp(1.0, self.levels as f64) as u8
    }

    pub fn apply(&self, series: &mut EnergySeries) {
        if series.daily_total() > 0.0 {
            series.level = series.e_norm.map(|v| self.level(v));
        } else {
            series.level = [1; HOURS_PER_DAY];
        }
    }
}

/// Fit a scale on `training` and write levels into every series of `all`
/// (which normally includes the training series themselves).
pub fn discretize(all: &mut [EnergySeries], training: &[EnergySeries], levels: usize) -> LevelScale {
    let scale = LevelScale::fit(training, levels);
    for s in all {
        scale.apply(s);
    }
    scale
}

/// Absolute kWh value attached to each level of one region.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelValueTable {
    pub region: RegionId,
    /// `y[i]` is the value of level `i + 1`.
    pub y: Vec<f64>,
}

impl LevelValueTable {
    pub fn levels(&self) -> usize {
        self.y.len()
    }

    /// Level (1-based) whose value is nearest to `energy`; ties go to the
    /// lower level.
    pub fn nearest_level(&self, energy: f64) -> usize {
        let mut best = 0;
        for (i, y) in self.y.iter().enumerate() {
            if (y - energy).abs() < (self.y[best] - energy).abs() {
                best = i;
            }
        }
        best + 1
    }
}

/// Average the absolute energy of all training hours per level. Empty levels
/// are filled by linear interpolation between the nearest populated levels
/// (flat beyond the outermost ones). Populated means are first made
/// non-decreasing by count-weighted pooling of adjacent violators, so level
/// order and value order agree.
pub fn build_level_values(
    region: RegionId,
    training: &[EnergySeries],
    levels: usize,
) -> Result<LevelValueTable> {
    let mut sum = vec![0.0; levels];
    let mut count = vec![0usize; levels];
    for s in training {
        for (e, &l) in s.e_sum.iter().zip(&s.level) {
            let i = usize::from(l).clamp(1, levels) - 1;
            sum[i] += e;
            count[i] += 1;
        }
    }
    if count.iter().all(|&c| c == 0) {
        return Err(Error::EmptyData("no training hours for level values"));
    }

    // pool adjacent violators over the populated levels
    let mut blocks: Vec<(f64, usize, Vec<usize>)> = Vec::new();
    for i in (0..levels).filter(|&i| count[i] > 0) {
        blocks.push((sum[i] / count[i] as f64, count[i], vec![i]));
        while blocks.len() > 1 {
            let n = blocks.len();
            if blocks[n - 2].0 <= blocks[n - 1].0 {
                break;
            }
            let (m2, c2, idx2) = blocks.pop().unwrap();
            let (m1, c1, idx1) = blocks.last_mut().unwrap();
            *m1 = (*m1 * *c1 as f64 + m2 * c2 as f64) / (*c1 + c2) as f64;
            *c1 += c2;
            idx1.extend(idx2);
        }
    }
    let mut y = vec![f64::NAN; levels];
    for (m, _, idx) in &blocks {
        for &i in idx {
            y[i] = *m;
        }
    }

    let populated: Vec<usize> = (0..levels).filter(|&i| count[i] > 0).collect();
    for i in 0..levels {
        if count[i] > 0 {
            continue;
        }
        let below = populated.iter().rev().find(|&&p| p < i).copied();
        let above = populated.iter().find(|&&p| p > i).copied();
        y[i] = match (below, above) {
            (Some(b), Some(a)) => {
                let w = (i - b) as f64 / (a - b) as f64;
                y[b] + w * (y[a] - y[b])
            }
            (Some(b), None) => y[b],
            (None, Some(a)) => y[a],
            (None, None) => unreachable!("at least one level is populated"),
        };
    }
    Ok(LevelValueTable { region, y })
}

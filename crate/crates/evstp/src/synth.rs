//! Deterministic synthetic taxi fleet.
//!
//! Each vehicle has a home anywhere in the box, a work place drawn around the
//! center, and two evening roam points. Its periodic path runs
//! home -> work -> roam -> roam -> home every day while circling slowly, so it
//! never stands still. A constant-speed walk with a wandering heading,
//! reflected at the box edges and started uniformly inside it, pulls the
//! position away from that path: `pos = path + (1 - p)^2 * (walk - path)` for
//! `p = pattern_strength`, so `p = 0` is the pure walk and `p = 1` the pure
//! path. Day-to-day schedule jitter scales with `1 - p`.

use evstp_core::time::{SECONDS_PER_DAY, SECONDS_PER_HOUR};
use evstp_core::{BBox, Day, GpsFix, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Beijing urban core.
pub const DEFAULT_BBOX: BBox = BBox { lon_min: 116.27, lat_min: 39.83, lon_max: 116.49, lat_max: 40.03 };

/// 2008-02-03.
pub const DEFAULT_START_DAY: Day = Day(13_912);

const TRAVEL_KMH: f64 = 25.0;
const CIRCLE_RADIUS: f64 = 0.004;
const CIRCLE_PERIOD_H: f64 = 1.0;
const WALK_KMH: f64 = 15.0;
/// Heading diffusion, radians per square-root minute.
const WALK_TURN: f64 = 0.5;
const WORK_SPREAD: f64 = 0.15;
const JITTER_H: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFleetConfig {
    pub num_vehicles: usize,
    pub num_days: usize,
    pub bbox: BBox,
    /// Seconds between fixes.
    pub fix_interval: i64,
    pub rng_seed: u64,
    /// 0 is a pure random walk, 1 is fully periodic.
    pub pattern_strength: f64,
    pub start_day: Day,
}

impl Default for SyntheticFleetConfig {
    fn default() -> Self {
        SyntheticFleetConfig {
            num_vehicles: 200,
            num_days: 6,
            bbox: DEFAULT_BBOX,
            fix_interval: 60,
            rng_seed: 0,
            pattern_strength: 0.8,
            start_day: DEFAULT_START_DAY,
        }
    }
}

impl SyntheticFleetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_vehicles < 1 {
            return Err(Error::Config(String::from("synthetic num_vehicles must be >= 1")));
        }
        if self.num_days < 3 {
            return Err(Error::Config(format!(
                "synthetic num_days must be >= 3 (train, validation, test), got {}",
                self.num_days
            )));
        }
        if self.bbox.validate().is_err() {
            return Err(Error::Config(String::from("synthetic bbox is degenerate")));
        }
        if !(1..=SECONDS_PER_DAY).contains(&self.fix_interval) {
            return Err(Error::Config(format!(
                "synthetic fix_interval must be in 1..=86400 s, got {}",
                self.fix_interval
            )));
        }
        if !(0.0..=1.0).contains(&self.pattern_strength) {
            return Err(Error::Config(format!(
                "synthetic pattern_strength must be in [0, 1], got {}",
                self.pattern_strength
            )));
        }
        Ok(())
    }

    pub fn fixes_per_vehicle(&self) -> usize {
        (self.num_days as i64 * SECONDS_PER_DAY / self.fix_interval) as usize
    }
}

type Point = [f64; 2];

struct Vehicle {
    home: Point,
    work: Point,
    roam: [Point; 2],
    /// depart, leave work, switch roam point, head home (hours).
    schedule: [f64; 4],
    phase: f64,
}

fn uniform_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point {
    [rng.gen_range(lo..hi), rng.gen_range(lo..hi)]
}

fn draw_vehicle(rng: &mut ChaCha8Rng) -> Vehicle {
    let spread = Normal::new(0.0, WORK_SPREAD).unwrap();
    let home = uniform_point(rng, 0.02, 0.98);
    let work = [
        (0.5 + spread.sample(rng)).clamp(0.05, 0.95),
        (0.5 + spread.sample(rng)).clamp(0.05, 0.95),
    ];
    let roam = [uniform_point(rng, 0.1, 0.9), uniform_point(rng, 0.1, 0.9)];
    let schedule = [
        rng.gen_range(6.5..9.0),
        rng.gen_range(16.5..18.5),
        rng.gen_range(19.0..20.5),
        rng.gen_range(21.0..22.5),
    ];
    Vehicle { home, work, roam, schedule, phase: rng.gen_range(0.0..core::f64::consts::TAU) }
}

/// Box size in km, for converting between normalized units and distance.
struct Travel {
    km_x: f64,
    km_y: f64,
}

impl Travel {
    fn new(b: &BBox) -> Self {
        let lat_mid = (b.lat_min + b.lat_max) / 2.0;
        Travel { km_x: b.width() * 111.32 * lat_mid.to_radians().cos(), km_y: b.height() * 110.57 }
    }

    /// Hours needed to drive between two normalized points.
    fn hours(&self, a: Point, b: Point) -> f64 {
        ((a[0] - b[0]) * self.km_x).hypot((a[1] - b[1]) * self.km_y) / TRAVEL_KMH
    }
}

/// Keyframes `(hour, point)` of one day's periodic path.
fn day_keyframes(v: &Vehicle, schedule: [f64; 4], travel: &Travel) -> Vec<(f64, Point)> {
    let [depart, leave, switch, back] = schedule;
    let legs = [
        (depart, v.home, v.work),
        (leave, v.work, v.roam[0]),
        (switch, v.roam[0], v.roam[1]),
        (back, v.roam[1], v.home),
    ];
    let mut keys = vec![(0.0, v.home)];
    let mut t = 0.0f64;
    for (start, from, to) in legs {
        t = t.max(start).min(24.0);
        keys.push((t, from));
        t = (t + travel.hours(from, to)).min(24.0);
        keys.push((t, to));
    }
    keys.push((24.0, v.home));
    keys
}

fn interpolate(keys: &[(f64, Point)], h: f64) -> Point {
    let i = keys.partition_point(|k| k.0 <= h).clamp(1, keys.len() - 1);
    let (t0, p0) = keys[i - 1];
    let (t1, p1) = keys[i];
    let a = if t1 > t0 { ((h - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 1.0 };
    [p0[0] + a * (p1[0] - p0[0]), p0[1] + a * (p1[1] - p0[1])]
}

/// Heading-persistent walk on the unit square with mirror reflection.
struct Walk {
    pos: Point,
    heading: f64,
}

impl Walk {
    fn step(&mut self, rng: &mut ChaCha8Rng, turn: &Normal<f64>, dist: Point) {
        self.heading += turn.sample(rng);
        let mut d = [self.heading.cos(), self.heading.sin()];
        for i in 0..2 {
            let mut x = self.pos[i] + dist[i] * d[i];
            if x < 0.0 {
                x = -x;
                d[i] = -d[i];
            } else if x > 1.0 {
                x = 2.0 - x;
                d[i] = -d[i];
            }
            self.pos[i] = x.clamp(0.0, 1.0);
        }
        self.heading = d[1].atan2(d[0]);
    }
}

fn vehicle_trajectory(cfg: &SyntheticFleetConfig, index: usize, travel: &Travel) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index as u64);
    let v = draw_vehicle(&mut rng);
    let p = cfg.pattern_strength;
    let pull = (1.0 - p) * (1.0 - p);
    let jitter = Normal::new(0.0, JITTER_H).unwrap();
    let dt_h = cfg.fix_interval as f64 / SECONDS_PER_HOUR as f64;
    let turn = Normal::new(0.0, WALK_TURN * (dt_h * 60.0).sqrt()).unwrap();
    let stride = [WALK_KMH * dt_h / travel.km_x, WALK_KMH * dt_h / travel.km_y];

    let mut traj = Trajectory::new((index + 1).to_string());
    traj.fixes.reserve(cfg.fixes_per_vehicle());
    let mut walk = Walk { pos: uniform_point(&mut rng, 0.0, 1.0), heading: rng.gen_range(0.0..core::f64::consts::TAU) };
    let t0 = cfg.start_day.start().0;
    let mut keys = Vec::new();
    let mut current_day = -1i64;
    for i in 0..cfg.fixes_per_vehicle() as i64 {
        let offset = i * cfg.fix_interval;
        let day = offset / SECONDS_PER_DAY;
        if day != current_day {
            current_day = day;
            let shift = (1.0 - p) * jitter.sample(&mut rng);
            let mut s = v.schedule;
            for x in &mut s {
                *x = (*x + shift + 0.25 * (1.0 - p) * jitter.sample(&mut rng)).clamp(4.0, 23.0);
            }
            keys = day_keyframes(&v, s, travel);
        }
        let h = (offset % SECONDS_PER_DAY) as f64 / SECONDS_PER_HOUR as f64;
        let base = interpolate(&keys, h);
        let angle = v.phase + core::f64::consts::TAU * h / CIRCLE_PERIOD_H;
        let periodic = [base[0] + CIRCLE_RADIUS * angle.cos(), base[1] + CIRCLE_RADIUS * angle.sin()];
        walk.step(&mut rng, &turn, stride);
        let u = (periodic[0] + pull * (walk.pos[0] - periodic[0])).clamp(0.0, 1.0);
        let w = (periodic[1] + pull * (walk.pos[1] - periodic[1])).clamp(0.0, 1.0);
        let b = &cfg.bbox;
        traj.fixes.push(GpsFix::new(
            t0 + offset,
            (b.lon_min + u * b.width()).clamp(b.lon_min, b.lon_max),
            (b.lat_min + w * b.height()).clamp(b.lat_min, b.lat_max),
        ));
    }
    traj
}

/// One trajectory per vehicle, ids "1", "2", ..., fixes every
/// `fix_interval` seconds from 00:00:00 of `start_day` over `num_days`.
pub fn generate_synthetic_fleet(cfg: &SyntheticFleetConfig) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let travel = Travel::new(&cfg.bbox);
    Ok((0..cfg.num_vehicles).map(|i| vehicle_trajectory(cfg, i, &travel)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fix_count_and_bounds() {
        let cfg = SyntheticFleetConfig { num_vehicles: 1, num_days: 3, fix_interval: 300, ..Default::default() };
        let t = generate_synthetic_fleet(&cfg).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].fixes.len(), 864);
        assert_eq!(t[0].fixes[0].timestamp, DEFAULT_START_DAY.start());
        assert!(t[0].fixes.iter().all(|f| cfg.bbox.contains(f.lon, f.lat)));
    }

    #[test]
    fn rejects_two_days() {
        let cfg = SyntheticFleetConfig { num_days: 2, ..Default::default() };
        assert!(matches!(generate_synthetic_fleet(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn keyframes_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = draw_vehicle(&mut rng);
        let keys = day_keyframes(&v, v.schedule, &Travel::new(&DEFAULT_BBOX));
        assert!(keys.windows(2).all(|w| w[0].0 <= w[1].0));
        assert_eq!(interpolate(&keys, 0.0), v.home);
        assert_eq!(interpolate(&keys, 12.0), v.work);
    }
}

//! Vehicle trajectories and the cleaning pass applied before feature
//! extraction.

use alloc::string::String;
use alloc::vec::Vec;

use crate::features::segment_distance;
use crate::grid::BBox;
use crate::time::Timestamp;

/// Default speed ceiling for cleaning, m/s (180 km/h).
pub const DEFAULT_MAX_SPEED: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GpsFix {
    pub timestamp: Timestamp,
    pub lon: f64,
    pub lat: f64,
}

impl GpsFix {
    pub fn new(timestamp: i64, lon: f64, lat: f64) -> Self {
        GpsFix { timestamp: Timestamp(timestamp), lon, lat }
    }

    pub fn is_valid(&self) -> bool {
        self.lon.is_finite()
            && self.lat.is_finite()
            && (-180.0..=180.0).contains(&self.lon)
            && (-90.0..=90.0).contains(&self.lat)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub vehicle_id: String,
    pub fixes: Vec<GpsFix>,
}

impl Trajectory {
    pub fn new(vehicle_id: impl Into<String>) -> Self {
        Trajectory { vehicle_id: vehicle_id.into(), fixes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.fixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixes.is_empty()
    }
}

/// Clean raw trajectories. Per trajectory: drop fixes outside `bbox`, sort by
/// timestamp (stable), keep the first of any run of equal timestamps, then
/// drop every fix whose implied speed from the last kept fix exceeds
/// `max_speed` (m/s). Trajectories left empty are removed.
///
/// The result is a fixed point: cleaning it again changes nothing.
pub fn clean_trajectories(trajs: &[Trajectory], bbox: &BBox, max_speed: f64) -> Vec<Trajectory> {
    debug_assert!(max_speed > 0.0);
    trajs
        .iter()
        .filter_map(|t| {
            let fixes = clean_fixes(&t.fixes, bbox, max_speed);
            (!fixes.is_empty()).then(|| Trajectory { vehicle_id: t.vehicle_id.clone(), fixes })
        })
        .collect()
}

fn clean_fixes(raw: &[GpsFix], bbox: &BBox, max_speed: f64) -> Vec<GpsFix> {
    let mut fixes: Vec<GpsFix> = raw
        .iter()
        .filter(|f| f.is_valid() && bbox.contains(f.lon, f.lat))
        .copied()
        .collect();
    fixes.sort_by_key(|f| f.timestamp);
    fixes.dedup_by_key(|f| f.timestamp);

    let mut kept: Vec<GpsFix> = Vec::with_capacity(fixes.len());
    for fix in fixes {
        if let Some(prev) = kept.last() {
            let dt = (fix.timestamp.0 - prev.timestamp.0) as f64;
            if segment_distance(prev, &fix) > max_speed * dt {
                continue;
            }
        }
        kept.push(fix);
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox() -> BBox {
        BBox::new(116.0, 39.0, 118.0, 41.0).unwrap()
    }

    fn traj(fixes: &[(i64, f64, f64)]) -> Trajectory {
        Trajectory {
            vehicle_id: "t1".into(),
            fixes: fixes.iter().map(|&(t, lon, lat)| GpsFix::new(t, lon, lat)).collect(),
        }
    }

    #[test]
    fn clean_is_fixed_point_on_clean_input() {
        let t = traj(&[(0, 116.4, 39.9), (60, 116.401, 39.9), (120, 116.402, 39.901)]);
        let out = clean_trajectories(&[t.clone()], &bbox(), DEFAULT_MAX_SPEED);
        assert_eq!(out, vec![t]);
    }

    #[test]
    fn duplicate_timestamps_collapse_to_first() {
        let t = traj(&[(0, 116.4, 39.9), (0, 116.5, 39.9)]);
        let out = clean_trajectories(&[t], &bbox(), DEFAULT_MAX_SPEED);
        assert_eq!(out[0].fixes, vec![GpsFix::new(0, 116.4, 39.9)]);
    }

    #[test]
    fn speed_glitch_removed() {
        // 0.9 degrees of latitude is ~100 km; over 60 s that is ~1668 m/s.
        let t = traj(&[(0, 116.4, 39.9), (60, 116.4, 40.8), (120, 116.4005, 39.9)]);
        let out = clean_trajectories(&[t], &bbox(), 50.0);
        assert_eq!(
            out[0].fixes,
            vec![GpsFix::new(0, 116.4, 39.9), GpsFix::new(120, 116.4005, 39.9)]
        );
    }

    #[test]
    fn sorts_and_drops_outside_and_empty() {
        let t = traj(&[(120, 116.41, 39.9), (0, 116.4, 39.9), (60, 120.0, 39.9)]);
        let gone = traj(&[(0, 10.0, 10.0)]);
        let out = clean_trajectories(&[t, gone], &bbox(), DEFAULT_MAX_SPEED);
        assert_eq!(out.len(), 1);
        assert_eq!(
            out[0].fixes,
            vec![GpsFix::new(0, 116.4, 39.9), GpsFix::new(120, 116.41, 39.9)]
        );
    }
}

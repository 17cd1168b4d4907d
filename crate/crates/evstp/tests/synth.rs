use evstp::ingest::write_trajectories;
use evstp::synth::{generate_synthetic_fleet, SyntheticFleetConfig};
use evstp_core::features::{extract_spatial_features, ExtractionConfig};
use evstp_core::trajectory::clean_trajectories;
use evstp_core::{RegionGrid, RegionId};

fn bytes(cfg: &SyntheticFleetConfig) -> Vec<u8> {
    let mut buf = Vec::new();
    write_trajectories(&mut buf, &generate_synthetic_fleet(cfg).unwrap()).unwrap();
    buf
}

#[test]
fn same_seed_same_bytes() {
    let cfg = SyntheticFleetConfig { num_vehicles: 5, num_days: 3, fix_interval: 300, rng_seed: 8, ..Default::default() };
    assert_eq!(bytes(&cfg), bytes(&cfg));
    assert_ne!(bytes(&cfg), bytes(&SyntheticFleetConfig { rng_seed: 9, ..cfg }));
}

#[test]
fn fix_count_follows_interval() {
    let cfg = SyntheticFleetConfig { num_vehicles: 1, num_days: 3, fix_interval: 300, ..Default::default() };
    let fleet = generate_synthetic_fleet(&cfg).unwrap();
    assert_eq!(fleet.len(), 1);
    assert_eq!(fleet[0].len(), 3 * 24 * 3600 / 300);
    assert!(fleet[0].fixes.iter().all(|f| cfg.bbox.contains(f.lon, f.lat)));
}

#[test]
fn rejects_invalid_configs() {
    let ok = SyntheticFleetConfig::default();
    for bad in [
        SyntheticFleetConfig { num_days: 2, ..ok },
        SyntheticFleetConfig { num_vehicles: 0, ..ok },
        SyntheticFleetConfig { fix_interval: 0, ..ok },
        SyntheticFleetConfig { pattern_strength: 1.5, ..ok },
    ] {
        assert_eq!(generate_synthetic_fleet(&bad).unwrap_err().exit_code(), 1);
    }
}

/// Per region, the variance across days of the hour-13 vehicle count,
/// averaged over regions, relative to the mean count.
fn hour13_relative_variance(pattern_strength: f64) -> f64 {
    let cfg = SyntheticFleetConfig {
        num_vehicles: 200,
        num_days: 5,
        fix_interval: 120,
        rng_seed: 3,
        pattern_strength,
        ..Default::default()
    };
    let grid = RegionGrid::new(cfg.bbox, 4, 4).unwrap();
    let fleet = clean_trajectories(&generate_synthetic_fleet(&cfg).unwrap(), &cfg.bbox, 50.0);
    let table = extract_spatial_features(&fleet, &grid, &ExtractionConfig::default()).unwrap();
    let days: Vec<_> = table.days().collect();
    let (mut var_sum, mut mean_sum) = (0.0, 0.0);
    for k in 1..=16 {
        let counts: Vec<f64> =
            days.iter().map(|&d| table.get(RegionId(k), d, 13).unwrap().f_n as f64).collect();
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        var_sum += counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
        mean_sum += mean;
    }
    var_sum / mean_sum
}

#[test]
fn full_pattern_strength_is_near_periodic() {
    let strong = hour13_relative_variance(1.0);
    eprintln!("hour-13 relative variance: p=1 {strong:.4}");
    assert!(strong < 0.1, "relative variance {strong}");
    let weak = hour13_relative_variance(0.0);
    eprintln!("hour-13 relative variance: p=0 {weak:.4}");
    assert!(weak > strong);
}

//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. `cargo test -p evstp --test acceptance`.
//!
//! The pipeline criteria use the reference synthetic fleet: 200 vehicles,
//! 6 days, pattern strength 0.8, seed 1, 4x4 grid.

#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use evstp::config::PipelineConfig;
use evstp::pipeline::{Evaluation, Extremes};
use evstp::report::{ablation_table, manifest_json};
use evstp::workflow;
use evstp_core::combiner::{optimize_lambda, GRID_POINTS};
use evstp_core::features::{build_energy_series, soc_trace, NUM_LEVELS};
use evstp_core::spatial_nn::{loss_and_gradient, train, FeatureSubset, NNTrainConfig, Sample, Weights};
use evstp_core::temporal_crf::{forward_backward, gradient};
use evstp_core::trajectory::clean_trajectories;
use evstp_core::RegionId;
use oracle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const REFERENCE_SEED: u64 = 1;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, t: Instant) -> Result<Duration, String> {
    let e = t.elapsed();
    ensure(e < limit, || format!("took {e:.1?}, budget {limit:?}"))?;
    Ok(e)
}

fn crf_correctness() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_marginal: f64 = 0.0;
    let mut worst_log_z: f64 = 0.0;
    for _ in 0..200 {
        let m = random_crf(&mut rng, 3, 4, 3.0);
        let len = rng.gen_range(1..=6);
        let seq = random_sequence(&mut rng, &m, len);
        let got = forward_backward(&m, &seq.x, None).map_err(|e| e.to_string())?;
        let want = crf_enumerate(&m, &seq.x, None);
        worst_log_z = worst_log_z.max((got.log_z - want.log_z).abs());
        for t in 0..len {
            for i in 0..m.num_labels {
                worst_marginal = worst_marginal.max((got.p[t * m.num_labels + i] - want.marginals[t][i]).abs());
            }
        }
    }
    ensure(worst_log_z < 1e-9 && worst_marginal < 1e-9, || {
        format!("max |log Z error| {worst_log_z:.2e}, max |marginal error| {worst_marginal:.2e}")
    })?;

    let mut worst_grad: f64 = 0.0;
    for _ in 0..200 {
        let m = random_crf(&mut rng, 3, 4, 1.5);
        let n = rng.gen_range(1..=3);
        let data: Vec<_> = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..=6);
                random_sequence(&mut rng, &m, len)
            })
            .collect();
        let analytic = gradient(&m, &data).map_err(|e| e.to_string())?.flat();
        let mut probe = m.clone();
        let numeric = central_difference(&m.params(), 1e-5, |p| {
            probe.set_params(p);
            crf_log_likelihood(&probe, &data)
        });
        worst_grad = worst_grad.max(relative_error(&analytic, &numeric));
    }
    ensure(worst_grad < 1e-5, || format!("gradient relative error {worst_grad:.2e}"))?;
    let e = within(Duration::from_secs(10), t)?;
    Ok(format!(
        "log Z err {worst_log_z:.1e}, marginal err {worst_marginal:.1e}, grad rel err {worst_grad:.1e}, {e:.2?}"
    ))
}

fn nn_correctness() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let input_dim = rng.gen_range(1..=5);
        let hidden = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=8);
        let l2 = rng.gen_range(0.0..0.1);
        let mut w = Weights::zeros(input_dim, hidden);
        let flat: Vec<f64> = (0..w.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        w.set_flat(&flat);
        let xs: Vec<f64> = (0..n * input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let zs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (_, grad) = loss_and_gradient(&w, input_dim, &xs, &zs, l2);
        let mut probe = w.clone();
        let numeric = central_difference(&flat, 1e-6, |p| {
            probe.set_flat(p);
            nn_objective(&probe, input_dim, &xs, &zs, l2)
        });
        worst = worst.max(relative_error(&grad.to_flat(), &numeric));
    }
    ensure(worst < 1e-4, || format!("gradient relative error {worst:.2e}"))?;

    let noise = Normal::new(0.0, 0.01).unwrap();
    let data: Vec<Sample> = (0..200)
        .map(|_| {
            let x: f64 = rng.gen_range(0.0..1.0);
            Sample { input: vec![x], target: 3.0 * x + noise.sample(&mut rng) }
        })
        .collect();
    let (model, _) = train(&data, &NNTrainConfig::default()).map_err(|e| e.to_string())?;
    let n = data.len() as f64;
    let mean = data.iter().map(|s| s.target).sum::<f64>() / n;
    let var = data.iter().map(|s| (s.target - mean).powi(2)).sum::<f64>() / n;
    let mse = data.iter().map(|s| (model.predict(&s.input).unwrap() - s.target).powi(2)).sum::<f64>() / n;
    ensure(mse < 0.01 * var, || format!("linear fixture MSE {mse:.3e} vs variance {var:.3e}"))?;
    let e = within(Duration::from_secs(30), t)?;
    Ok(format!("grad rel err {worst:.1e}, linear fit MSE/var {:.1e}, {e:.2?}", mse / var))
}

fn combiner_correctness() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let step = 1.0 / GRID_POINTS as f64;
    let mut worst_gap: f64 = 0.0;
    for i in 0..100 {
        let regions = random_combiner_instance(&mut rng);
        let r = optimize_lambda(&regions).map_err(|e| e.to_string())?;
        let (w_grid, f_grid) = grid_search(&regions, GRID_POINTS);
        let f_star = combined_objective(&regions, r.w_star);
        let f_tp = combined_objective(&regions, 0.0);
        let f_sp = combined_objective(&regions, 1.0);
        worst_gap = worst_gap.max((r.w_star - w_grid).abs());
        ensure((r.w_star - w_grid).abs() <= step + 1e-12, || {
            format!("instance {i}: w* {} vs grid {w_grid}", r.w_star)
        })?;
        ensure(f_star <= f_grid + 1e-12 * (1.0 + f_grid), || {
            format!("instance {i}: objective {f_star} above grid minimum {f_grid}")
        })?;
        ensure(f_star <= f_tp + 1e-12 * (1.0 + f_tp) && f_star <= f_sp + 1e-8 * (1.0 + f_sp), || {
            format!("instance {i}: objective {f_star} above an endpoint ({f_tp}, {f_sp})")
        })?;
    }
    let e = within(Duration::from_secs(5), t)?;
    Ok(format!("max |w* - w_grid| {worst_gap:.1e} (grid step {step:.1e}), {e:.2?}"))
}

fn feature_invariants() -> Outcome {
    let cfg = PipelineConfig::synthetic(REFERENCE_SEED);
    let grid = cfg.grid().map_err(|e| e.to_string())?;
    let raw = workflow::load_trajectories(&cfg).map_err(|e| e.to_string())?;
    let clean = clean_trajectories(&raw, grid.bbox(), cfg.features.max_speed);
    let soc_cfg = cfg.extraction().soc;
    let mut fixes = 0usize;
    for traj in &clean {
        let soc = soc_trace(traj, &soc_cfg);
        for i in 1..soc.len() {
            if soc_cfg.cycle(traj.fixes[i].timestamp) == soc_cfg.cycle(traj.fixes[i - 1].timestamp) {
                ensure(soc[i] <= soc[i - 1], || format!("vehicle {}: SOC rises at fix {i}", traj.vehicle_id))?;
            }
        }
        fixes += soc.len();
    }

    let prepared = workflow::prepare(&cfg).map_err(|e| e.to_string())?;
    let series = build_energy_series(&prepared.table);
    let mut zero_days = 0;
    for s in &series {
        let sum: f64 = s.e_norm.iter().sum();
        ensure(sum == 0.0 || (sum - 1.0).abs() <= 1e-12, || {
            format!("region {} day {:?}: e_norm sums to {sum}", s.region, s.day)
        })?;
        zero_days += usize::from(sum == 0.0);
    }

    // levels under the scales the pipeline fits on the training days
    let settings = evstp::pipeline::Settings { hourly_retraining: false, ..prepared.settings.clone() };
    let offline = evstp::pipeline::run_offline_training(&prepared.table, &prepared.split, &settings)
        .map_err(|e| e.to_string())?;
    for m in &offline {
        for s in series.iter().filter(|s| s.region == m.region) {
            let mut s = s.clone();
            m.level_scale.apply(&mut s);
            ensure(s.level.iter().all(|&l| (1..=NUM_LEVELS as u8).contains(&l)), || {
                format!("region {}: level out of 1..={NUM_LEVELS}", m.region)
            })?;
        }
    }

    let ids = |v: &[u16]| v.iter().map(|&k| RegionId(k)).collect::<Vec<_>>();
    let n6 = grid.neighbor_set(RegionId(6)).map_err(|e| e.to_string())?;
    let n1 = grid.neighbor_set(RegionId(1)).map_err(|e| e.to_string())?;
    ensure(n6.to_vec() == ids(&[1, 2, 3, 5, 7, 9, 10, 11]), || format!("region 6 neighbors {n6:?}"))?;
    ensure(n1.to_vec() == ids(&[2, 3, 5, 6, 7, 9, 10, 11]), || format!("region 1 neighbors {n1:?}"))?;
    Ok(format!(
        "{} vehicles, {fixes} fixes, {} region-days ({zero_days} all-zero), neighbor examples exact",
        clean.len(),
        series.len()
    ))
}

fn fmt_extremes(e: &Option<Extremes>) -> String {
    e.map_or_else(|| "-".into(), |e| format!("{:.4}/{:.4}/{:.4}", e.ave, e.min, e.max))
}

fn three_way(ev: &Evaluation) -> String {
    format!("SP {} TP {} STP {}", fmt_extremes(&ev.sp), fmt_extremes(&ev.tp), fmt_extremes(&ev.stp))
}

fn reference(delta_t: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::synthetic(REFERENCE_SEED);
    cfg.spatial.delta_t = delta_t;
    cfg
}

struct Shared {
    sp_dt1: Option<f64>,
    manifest_dt1: Option<String>,
}

fn end_to_end(shared: &mut Shared) -> Outcome {
    let t = Instant::now();
    let cfg = reference(1);
    let out = workflow::run(&cfg).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    shared.manifest_dt1 = Some(manifest_json(&out.manifest));
    let ev = &out.experiment.evaluation;
    shared.sp_dt1 = ev.sp.map(|e| e.ave);
    println!("    test day ave/min/max  {}", three_way(ev));
    let per_region: Vec<String> = ev
        .regions
        .iter()
        .map(|r| format!("{}:{}", r.region, r.nmse_stp.map_or("excluded".into(), |v| format!("{v:.3}"))))
        .collect();
    println!("    STP per region  {}", per_region.join(" "));

    ensure(ev.excluded_regions.is_empty() && ev.regions.len() == 16, || {
        format!("regions without truth: {:?}", ev.excluded_regions)
    })?;
    let worst = ev.regions.iter().filter_map(|r| r.nmse_stp).fold(0.0, f64::max);
    ensure(worst < 0.15, || format!("worst region STP NMSE {worst:.4} >= 0.15"))?;
    let ave = ev.stp.map_or(f64::INFINITY, |e| e.ave);
    ensure(ave < 0.10, || format!("average STP NMSE {ave:.4} >= 0.10"))?;

    let lam = &out.experiment.lambda;
    let val = &out.experiment.validation;
    let sum = |f: fn(&evstp::pipeline::RegionScore) -> Option<f64>| val.regions.iter().filter_map(f).sum::<f64>();
    let (val_stp, val_tp) = (sum(|r| r.nmse_stp), sum(|r| r.nmse_tp));
    ensure(lam.objective <= lam.objective_temporal && val_stp <= val_tp + 1e-12, || {
        format!("validation STP {val_stp} > TP {val_tp}")
    })?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "lambda* {:.4}, worst region {worst:.4}, average {ave:.4}, validation STP {val_stp:.4} <= TP {val_tp:.4}, {elapsed:.1?}",
        lam.lambda_star
    ))
}

fn long_horizon(shared: &Shared) -> Outcome {
    let t = Instant::now();
    let mut sp = vec![shared.sp_dt1.ok_or("no delta_t = 1 result from the end-to-end run")?];
    for dt in [2, 3] {
        let out = workflow::run(&reference(dt)).map_err(|e| e.to_string())?;
        let ev = &out.experiment.evaluation;
        println!("    delta_t {dt}  {}", three_way(ev));
        sp.push(ev.sp.map_or(f64::NAN, |e| e.ave));
    }
    ensure(sp[2] >= sp[0], || format!("SP average at delta_t 3 ({:.4}) below delta_t 1 ({:.4})", sp[2], sp[0]))?;
    Ok(format!(
        "SP average {:.4} / {:.4} / {:.4} at delta_t 1/2/3, {:.1?}",
        sp[0],
        sp[1],
        sp[2],
        t.elapsed()
    ))
}

fn ablation_harness() -> Outcome {
    let t = Instant::now();
    let default_subset = PipelineConfig::synthetic(REFERENCE_SEED).settings().map_err(|e| e.to_string())?.subset;
    let paper_choice = FeatureSubset::parse("F_D,F_N,F_E").map_err(|e| e.to_string())?;
    ensure(default_subset == paper_choice, || format!("default subset is {default_subset}"))?;

    let subsets = FeatureSubset::ablation_subsets();
    let ab = workflow::ablate(&reference(1), &subsets).map_err(|e| e.to_string())?;
    for line in ablation_table(&ab).lines() {
        println!("    {line}");
    }
    ensure(ab.rows.len() == 6 && subsets.iter().all(|s| ab.rows.iter().any(|r| &r.subset == s)), || {
        String::from("not every subset produced a row")
    })?;
    let desc = |v: Vec<f64>| v.windows(2).all(|w| w[0] >= w[1]);
    let ave = |e: &Option<Extremes>| e.map_or(f64::NEG_INFINITY, |e| e.ave);
    ensure(desc(ab.by_sp().iter().map(|r| ave(&r.sp)).collect()), || "SP block not descending".into())?;
    ensure(desc(ab.by_stp().iter().map(|r| ave(&r.stp)).collect()), || "STP block not descending".into())?;
    ensure(desc(ab.rows.iter().map(|r| ave(&r.stp)).collect()), || "rows not in descending STP order".into())?;
    Ok(format!("6 subsets, both blocks descending, default subset {default_subset}, {:.1?}", t.elapsed()))
}

fn determinism(shared: &Shared) -> Outcome {
    let t = Instant::now();
    let first = shared.manifest_dt1.as_ref().ok_or("no manifest from the end-to-end run")?;
    let second = manifest_json(&workflow::run(&reference(1)).map_err(|e| e.to_string())?.manifest);
    ensure(first.as_bytes() == second.as_bytes(), || String::from("manifests differ"))?;
    Ok(format!("{} manifest bytes identical across two runs, {:.1?}", first.len(), t.elapsed()))
}

fn main() {
    let mut shared = Shared { sp_dt1: None, manifest_dt1: None };
    let mut failed = 0;
    let mut report = |name: &str, f: &mut dyn FnMut() -> Outcome| {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    };
    report("CRF correctness", &mut crf_correctness);
    report("NN correctness", &mut nn_correctness);
    report("Combiner correctness", &mut combiner_correctness);
    report("Feature invariants", &mut feature_invariants);
    report("End-to-end synthetic reproduction", &mut || end_to_end(&mut shared));
    report("Long-horizon behavior", &mut || long_horizon(&shared));
    report("Ablation harness", &mut ablation_harness);
    report("Determinism", &mut || determinism(&shared));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

//! End-to-end commands on top of a [`PipelineConfig`]: generate a fleet,
//! run one experiment, run the ablation, and export a heatmap.

use std::io::BufWriter;
use std::path::{Path, PathBuf};

use evstp_core::features::{extract_spatial_features, FeatureTable};
use evstp_core::spatial_nn::FeatureSubset;
use evstp_core::trajectory::clean_trajectories;
use evstp_core::Trajectory;
use log::info;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::ingest::{read_trajectory_path, write_trajectories, MalformedLines};
use crate::pipeline::{run_ablation, run_experiment, Ablation, Experiment, ExperimentManifest, Settings, SplitPlan};
use crate::report::{self, Heatmap, ModelFile, Predictor};
use crate::synth::generate_synthetic_fleet;

pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const FEATURE_FILE: &str = "features.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const RECORDS_FILE: &str = "records.csv";
pub const VALIDATION_RECORDS_FILE: &str = "validation_records.csv";
pub const MODELS_FILE: &str = "models.json";
pub const CONFIG_FILE: &str = "effective_config.toml";
pub const ABLATION_TABLE_FILE: &str = "ablation.txt";
pub const ABLATION_CSV_FILE: &str = "ablation.csv";

/// Raw trajectories from the configured file, or a synthetic fleet.
pub fn load_trajectories(cfg: &PipelineConfig) -> Result<Vec<Trajectory>> {
    match &cfg.input.trajectories {
        Some(path) => {
            let mode = if cfg.input.skip_malformed { MalformedLines::Skip } else { MalformedLines::Fail };
            read_trajectory_path(path, mode)
        }
        None => generate_synthetic_fleet(&cfg.fleet_config()?),
    }
}

/// Hourly region features, either read back from a feature file or
/// extracted from cleaned trajectories.
pub fn feature_table(cfg: &PipelineConfig) -> Result<FeatureTable> {
    let grid = cfg.grid()?;
    if let Some(path) = &cfg.input.features {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        return report::read_features(file, grid.region_count(), &path.display().to_string());
    }
    let raw = load_trajectories(cfg)?;
    let fixes: usize = raw.iter().map(Trajectory::len).sum();
    let clean = clean_trajectories(&raw, grid.bbox(), cfg.features.max_speed);
    let kept: usize = clean.iter().map(Trajectory::len).sum();
    info!("{} vehicles, {kept} of {fixes} fixes kept after cleaning", raw.len());
    Ok(extract_spatial_features(&clean, &grid, &cfg.extraction())?)
}

/// Feature table, split, and pipeline settings of one configured experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub table: FeatureTable,
    pub split: SplitPlan,
    pub settings: Settings,
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.validate()?;
    let table = feature_table(cfg)?;
    let split = match cfg.split_plan()? {
        Some(s) => s,
        None => {
            let days: Vec<_> = table.days().collect();
            SplitPlan::from_days(&days)?
        }
    };
    for day in split.extended_window().into_iter().chain([split.test_day]) {
        if !table.contains_day(day) {
            return Err(Error::Data(format!("no features for split day {}", crate::dates::format_day(day))));
        }
    }
    Ok(Prepared { table, split, settings: cfg.settings()? })
}

/// The config as echoed into manifests. The output directory is left out so
/// that identical experiments written to different places compare equal.
pub fn config_echo(cfg: &PipelineConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(m) = v.as_object_mut() {
        m.remove("out_dir");
    }
    v
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub prepared: Prepared,
    pub experiment: Experiment,
    pub manifest: ExperimentManifest,
}

pub fn run(cfg: &PipelineConfig) -> Result<RunOutput> {
    let prepared = prepare(cfg)?;
    let experiment = run_experiment(&prepared.table, &prepared.split, &prepared.settings)?;
    let mut manifest = ExperimentManifest::new(&experiment, &prepared.split, &prepared.settings);
    manifest.config = Some(config_echo(cfg));
    Ok(RunOutput { prepared, experiment, manifest })
}

fn csv_file(path: &Path) -> Result<BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

/// Write every artifact of a run under `dir`.
pub fn write_run(dir: &Path, cfg: &PipelineConfig, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report::write_features(csv_file(&dir.join(FEATURE_FILE))?, &out.prepared.table)?;
    report::write_records(csv_file(&dir.join(RECORDS_FILE))?, &out.experiment.test_records)?;
    report::write_records(csv_file(&dir.join(VALIDATION_RECORDS_FILE))?, &out.experiment.validation_records)?;
    report::write_file(&dir.join(MANIFEST_FILE), report::manifest_json(&out.manifest).as_bytes())?;
    report::write_file(&dir.join(METRICS_FILE), report::metrics_table(&out.experiment.evaluation).as_bytes())?;
    let models = ModelFile::new(&out.experiment.online, &out.prepared.settings.subset);
    report::write_file(&dir.join(MODELS_FILE), models.to_json().as_bytes())?;
    report::write_file(&dir.join(CONFIG_FILE), cfg.to_toml().as_bytes())
}

/// Write the configured fleet's trajectories to `path`; returns the number
/// of fixes written.
pub fn generate(cfg: &PipelineConfig, path: &Path) -> Result<usize> {
    cfg.validate()?;
    let fleet = generate_synthetic_fleet(&cfg.fleet_config()?)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_trajectories(csv_file(path)?, &fleet).map_err(|e| Error::io(path, e))?;
    Ok(fleet.iter().map(Trajectory::len).sum())
}

pub fn ablate(cfg: &PipelineConfig, subsets: &[FeatureSubset]) -> Result<Ablation> {
    let p = prepare(cfg)?;
    let mut ablation = run_ablation(&p.table, &p.split, &p.settings, subsets)?;
    let echo = config_echo(cfg);
    for m in &mut ablation.manifests {
        m.config = Some(echo.clone());
    }
    Ok(ablation)
}

/// File name of one subset's manifest inside an ablation directory.
pub fn ablation_manifest_name(subset: &FeatureSubset) -> String {
    let tags: Vec<&str> = subset.ordered().map(|f| f.tag()).collect();
    format!("manifest_{}.json", tags.join("_"))
}

pub fn write_ablation(dir: &Path, ablation: &Ablation) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report::write_file(&dir.join(ABLATION_TABLE_FILE), report::ablation_table(ablation).as_bytes())?;
    report::write_file(&dir.join(ABLATION_CSV_FILE), report::ablation_csv(ablation).as_bytes())?;
    for m in &ablation.manifests {
        let path = dir.join(ablation_manifest_name(&m.feature_subset));
        report::write_file(&path, report::manifest_json(m).as_bytes())?;
    }
    Ok(())
}

pub fn heatmap_file_name(hour: u8, predictor: Predictor) -> PathBuf {
    PathBuf::from(format!("heatmap_{}_h{hour:02}.txt", predictor.name().to_ascii_lowercase()))
}

/// Heatmap of one hour from a records file written by [`write_run`].
pub fn export_heatmap(cfg: &PipelineConfig, records: &Path, hour: u8, predictor: Predictor) -> Result<Heatmap> {
    let file = std::fs::File::open(records).map_err(|e| Error::io(records, e))?;
    let recs = report::read_records(file, &records.display().to_string())?;
    Heatmap::build(&recs, &cfg.grid()?, hour, predictor)
}

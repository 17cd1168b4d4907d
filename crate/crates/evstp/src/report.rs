//! Output files: feature table, prediction records, metrics table, manifest,
//! model file, heatmap, and ablation table.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use evstp_core::features::{FeatureTable, LevelScale, LevelValueTable, SpatialFeatureRow};
use evstp_core::spatial_nn::{FeatureSubset, NNModel};
use evstp_core::temporal_crf::CrfModel;
use evstp_core::{RegionGrid, RegionId};
use serde::{Deserialize, Serialize};

use crate::dates::{format_day, parse_date};
use crate::error::{Error, Result};
use crate::pipeline::{Ablation, AblationRow, Evaluation, ExperimentManifest, Extremes, PredictionRecord, RegionModel};

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { path: path.to_owned(), line, message: e.to_string() }
}

/// One feature row as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureCsvRow {
    region: u16,
    date: String,
    hour: u8,
    f_n: u32,
    v_ave: f64,
    v_var: f64,
    d1: u32,
    d2: u32,
    d3: u32,
    d4: u32,
    d_var: f64,
    e_sum: f64,
    e_var: f64,
    e_n: u32,
}

/// Header of the feature file: `region,date,hour,f_n,v_ave,v_var,d1,d2,d3,d4,d_var,e_sum,e_var,e_n`.
/// One row per region-hour; `hour` is 1..=24 with clock hour 00 as 1.
pub const FEATURE_HEADER: &str = "region,date,hour,f_n,v_ave,v_var,d1,d2,d3,d4,d_var,e_sum,e_var,e_n";

pub fn write_features<W: Write>(out: W, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in table.rows() {
        w.serialize(FeatureCsvRow {
            region: r.region.0,
            date: format_day(r.day),
            hour: r.hour,
            f_n: r.f_n,
            v_ave: r.v_ave,
            v_var: r.v_var,
            d1: r.d[0],
            d2: r.d[1],
            d3: r.d[2],
            d4: r.d[3],
            d_var: r.d_var,
            e_sum: r.e_sum,
            e_var: r.e_var,
            e_n: r.e_n,
        })
        .map_err(|e| csv_err("features", e))?;
    }
    w.flush().map_err(|e| Error::io("features", e))
}

pub fn read_features<R: Read>(input: R, num_regions: usize, source: &str) -> Result<FeatureTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<FeatureCsvRow>().enumerate() {
        let r = rec.map_err(|e| csv_err(source, e))?;
        let day = parse_date(&r.date).ok_or_else(|| Error::Parse {
            path: source.to_owned(),
            line: i + 2,
            message: format!("invalid date {:?}", r.date),
        })?;
        rows.push(SpatialFeatureRow {
            region: RegionId(r.region),
            day,
            hour: r.hour,
            f_n: r.f_n,
            v_ave: r.v_ave,
            v_var: r.v_var,
            d: [r.d1, r.d2, r.d3, r.d4],
            d_var: r.d_var,
            e_sum: r.e_sum,
            e_var: r.e_var,
            e_n: r.e_n,
        });
    }
    FeatureTable::from_rows(num_regions, rows).map_err(|e| Error::Data(format!("{source}: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordCsvRow {
    region: u16,
    date: String,
    hour: u8,
    e_true: f64,
    e_sp: f64,
    y_tp: f64,
    e_stp: f64,
}

pub fn write_records<W: Write>(out: W, records: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(RecordCsvRow {
            region: r.region.0,
            date: format_day(r.day),
            hour: r.hour,
            e_true: r.e_true,
            e_sp: r.e_sp,
            y_tp: r.y_tp,
            e_stp: r.e_stp,
        })
        .map_err(|e| csv_err("records", e))?;
    }
    w.flush().map_err(|e| Error::io("records", e))
}

pub fn read_records<R: Read>(input: R, source: &str) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<RecordCsvRow>().enumerate() {
        let r = rec.map_err(|e| csv_err(source, e))?;
        let day = parse_date(&r.date).ok_or_else(|| Error::Parse {
            path: source.to_owned(),
            line: i + 2,
            message: format!("invalid date {:?}", r.date),
        })?;
        out.push(PredictionRecord {
            region: RegionId(r.region),
            day,
            hour: r.hour,
            e_true: r.e_true,
            e_sp: r.e_sp,
            y_tp: r.y_tp,
            e_stp: r.e_stp,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predictor {
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "TP")]
    Tp,
    #[serde(rename = "STP")]
    Stp,
}

impl Predictor {
    pub const ALL: [Predictor; 3] = [Predictor::Sp, Predictor::Tp, Predictor::Stp];

    pub fn name(self) -> &'static str {
        match self {
            Predictor::Sp => "SP",
            Predictor::Tp => "TP",
            Predictor::Stp => "STP",
        }
    }

    pub fn value(self, r: &PredictionRecord) -> f64 {
        match self {
            Predictor::Sp => r.e_sp,
            Predictor::Tp => r.y_tp,
            Predictor::Stp => r.e_stp,
        }
    }
}

impl FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SP" => Ok(Predictor::Sp),
            "TP" => Ok(Predictor::Tp),
            "STP" => Ok(Predictor::Stp),
            _ => Err(Error::Config(format!("unknown predictor {s:?}, expected SP, TP or STP"))),
        }
    }
}

impl std::fmt::Display for Predictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Long-format metrics: `region,predictor,metric,value`. Per-region rows
/// carry `nmse` for every predictor plus `gain_over_sp` and `gain_over_tp`
/// for STP; excluded regions have an empty value. Rows with region `all`
/// carry `nmse_ave`, `nmse_min` and `nmse_max`.
pub fn metrics_table(eval: &Evaluation) -> String {
    let mut s = String::from("region,predictor,metric,value\n");
    for r in &eval.regions {
        for (p, v) in [("SP", r.nmse_sp), ("TP", r.nmse_tp), ("STP", r.nmse_stp)] {
            let _ = writeln!(s, "{},{p},nmse,{}", r.region, fmt_opt(v));
        }
        let _ = writeln!(s, "{},STP,gain_over_sp,{}", r.region, fmt_opt(r.gain_over_sp));
        let _ = writeln!(s, "{},STP,gain_over_tp,{}", r.region, fmt_opt(r.gain_over_tp));
    }
    for (p, e) in [("SP", eval.sp), ("TP", eval.tp), ("STP", eval.stp)] {
        for (m, v) in [("nmse_ave", e.map(|e| e.ave)), ("nmse_min", e.map(|e| e.min)), ("nmse_max", e.map(|e| e.max))] {
            let _ = writeln!(s, "all,{p},{m},{}", fmt_opt(v));
        }
    }
    s
}

pub fn manifest_json(m: &ExperimentManifest) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("manifest serializes");
    s.push('\n');
    s
}

pub const MODEL_FORMAT: &str = "evstp-models";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionModelFile {
    pub region: RegionId,
    pub spatial: NNModel,
    pub temporal: CrfModel,
    pub level_scale: LevelScale,
    pub level_values: LevelValueTable,
    pub initial_energy: f64,
    pub trained_through_slot: i64,
}

/// Trained parameters of every region, as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub feature_subset: FeatureSubset,
    pub delta_t: usize,
    pub regions: Vec<RegionModelFile>,
}

impl ModelFile {
    pub fn new(models: &[RegionModel], subset: &FeatureSubset) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_owned(),
            version: 1,
            feature_subset: subset.clone(),
            delta_t: models.first().map_or(1, |m| m.spatial.cfg.delta_t),
            regions: models
                .iter()
                .map(|m| RegionModelFile {
                    region: m.region,
                    spatial: m.spatial.model.clone(),
                    temporal: m.temporal.clone(),
                    level_scale: m.level_scale,
                    level_values: m.level_values.clone(),
                    initial_energy: m.initial_energy,
                    trained_through_slot: m.trained_through,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("models serialize");
        s.push('\n');
        s
    }
}

pub const HEATMAP_MAGIC: &str = "# evstp heatmap v1";

/// Predicted energy of one hour laid out like the map: the first line is the
/// northern row, columns run west to east.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub date: String,
    pub hour: u8,
    pub predictor: Predictor,
    pub rows: usize,
    pub cols: usize,
    /// `values[i][j]` with `i = 0` the northern row; `None` for regions
    /// without a record.
    pub values: Vec<Vec<Option<f64>>>,
    pub regions: Vec<Vec<RegionId>>,
}

impl Heatmap {
    /// Values for `hour` of the single day present in `records`.
    pub fn build(records: &[PredictionRecord], grid: &RegionGrid, hour: u8, predictor: Predictor) -> Result<Self> {
        if !(1..=24).contains(&hour) {
            return Err(Error::Config(format!("hour must be in 1..=24, got {hour}")));
        }
        let at_hour: Vec<&PredictionRecord> = records.iter().filter(|r| r.hour == hour).collect();
        let Some(first) = at_hour.first() else {
            return Err(Error::Data(format!("no prediction records for hour {hour}")));
        };
        if at_hour.iter().any(|r| r.day != first.day) {
            return Err(Error::Data(String::from("records span more than one day")));
        }
        let mut values = Vec::new();
        let mut regions = Vec::new();
        for row in (1..=grid.rows()).rev() {
            let ids: Vec<RegionId> = (1..=grid.cols()).map(|c| grid.at(row, c)).collect();
            values.push(
                ids.iter()
                    .map(|id| at_hour.iter().find(|r| r.region == *id).map(|r| predictor.value(r)))
                    .collect(),
            );
            regions.push(ids);
        }
        Ok(Heatmap {
            date: format_day(first.day),
            hour,
            predictor,
            rows: grid.rows(),
            cols: grid.cols(),
            values,
            regions,
        })
    }

    /// Plain text: two comment lines, then a `values` block and a `regions`
    /// block, each `rows` comma-separated lines. Missing values are empty.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEATMAP_MAGIC}: predicted energy in kWh per region, northern row first");
        let _ = writeln!(
            s,
            "# date={} hour={} predictor={} rows={} cols={}",
            self.date, self.hour, self.predictor, self.rows, self.cols
        );
        s.push_str("values\n");
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|v| fmt_opt(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s.push_str("regions\n");
        for row in &self.regions {
            let cells: Vec<String> = row.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

fn fmt_extremes(e: &Option<Extremes>) -> [String; 3] {
    match e {
        Some(e) => [format!("{:.4}", e.ave), format!("{:.4}", e.min), format!("{:.4}", e.max)],
        None => ["-".into(), "-".into(), "-".into()],
    }
}

fn subset_label(s: &FeatureSubset) -> String {
    s.ordered().map(|f| f.tag()).collect::<Vec<_>>().join(", ")
}

/// The ablation as a two-block text table: SP rows by descending SP
/// average, then STP rows by descending STP average.
pub fn ablation_table(a: &Ablation) -> String {
    let width = a.rows.iter().map(|r| subset_label(&r.subset).len()).max().unwrap_or(0).max(18);
    let mut s = String::new();
    let block = |s: &mut String, name: &str, rows: Vec<&AblationRow>, pick: fn(&AblationRow) -> &Option<Extremes>| {
        let head = format!("Feature sets ({name})");
        let _ = writeln!(
            s,
            "{head:<width$}  {:>10}  {:>10}  {:>10}",
            format!("{name} ave"),
            format!("{name} min"),
            format!("{name} max")
        );
        for r in rows {
            let [ave, min, max] = fmt_extremes(pick(r));
            let _ = writeln!(s, "{:<width$}  {ave:>10}  {min:>10}  {max:>10}", subset_label(&r.subset));
        }
    };
    block(&mut s, "SP", a.by_sp(), |r| &r.sp);
    s.push('\n');
    block(&mut s, "STP", a.by_stp(), |r| &r.stp);
    s
}

/// One line per subset: `subset,lambda_star,sp_ave,sp_min,sp_max,tp_ave,...`
/// in descending STP average.
pub fn ablation_csv(a: &Ablation) -> String {
    let mut s = String::from(
        "subset,lambda_star,sp_ave,sp_min,sp_max,tp_ave,tp_min,tp_max,stp_ave,stp_min,stp_max\n",
    );
    for r in a.by_stp() {
        let mut cells = vec![format!("\"{}\"", r.subset), r.lambda_star.to_string()];
        for e in [r.sp, r.tp, r.stp] {
            cells.extend([fmt_opt(e.map(|e| e.ave)), fmt_opt(e.map(|e| e.min)), fmt_opt(e.map(|e| e.max))]);
        }
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use evstp_core::{BBox, Day};

    #[test]
    fn predictor_names() {
        for p in Predictor::ALL {
            assert_eq!(p.name().parse::<Predictor>().unwrap(), p);
        }
        assert!("XP".parse::<Predictor>().is_err());
    }

    #[test]
    fn heatmap_layout() {
        let grid = RegionGrid::new(BBox::new(0.0, 0.0, 4.0, 4.0).unwrap(), 4, 4).unwrap();
        let records: Vec<PredictionRecord> = grid
            .regions()
            .map(|k| PredictionRecord {
                region: k,
                day: Day(13918),
                hour: 12,
                e_true: 0.0,
                e_sp: k.get() as f64,
                y_tp: 0.0,
                e_stp: 10.0 * k.get() as f64,
            })
            .collect();
        let h = Heatmap::build(&records, &grid, 12, Predictor::Stp).unwrap();
        assert_eq!(h.regions[0], vec![RegionId(13), RegionId(14), RegionId(15), RegionId(16)]);
        assert_eq!(h.values[3][0], Some(10.0));
        let text = h.to_text();
        assert!(text.contains("date=2008-02-09 hour=12 predictor=STP"));
        assert_eq!(text.lines().count(), 2 + 1 + 4 + 1 + 4);
        assert!(Heatmap::build(&records, &grid, 13, Predictor::Stp).is_err());
    }
}

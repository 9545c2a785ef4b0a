use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{PatientParams, Provenance};
use super::population::{PopulationStats, Variable};
use super::sampling::{lhs_augment, sample_correlated, sample_windkessel, windkessel_ranges, Draw, WindkesselRanges};
use crate::error::{Error, Result};
use crate::hemonet::{anthropometric_multipliers, fit_lambda_c, ArterialNetwork, Sex};
use crate::pulse1d::{simulate_patient, HemoRecord, PressureFeatures, SiteFeatures, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Brachial SBP band outside of which a record counts as non-physiological
/// in the dataset metadata.
const PHYSIOLOGICAL_SBP: [f64; 2] = [90.0, 200.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_clinical: usize,
    pub n_lhs: usize,
    /// Records whose solver run failed outright.
    pub n_failed: usize,
    /// Records that did not reach the convergence tolerance (failures included).
    pub n_unconverged: usize,
    /// Fraction of converged records with brachial SBP outside 90–200 mmHg.
    pub sbp_outside_physiological: f64,
    pub windkessel_ranges: WindkesselRanges,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<HemoRecord>,
    pub stats_used: PopulationStats,
    pub generation_seed: u64,
    pub schema_version: u32,
    pub meta: DatasetMeta,
}

/// Outcome of [`filter_admissible`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub k: f64,
    pub total: usize,
    pub retained: usize,
}

impl FilterReport {
    pub fn retention_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.retained as f64 / self.total as f64
        }
    }
}

/// Turns one population draw into simulator inputs.
pub fn derive_params(
    net: &ArterialNetwork,
    draw: &Draw,
    windkessel: (f64, f64),
    index: usize,
    seed: u64,
    provenance: Provenance,
) -> Result<PatientParams> {
    let (lambda_l, lambda_d) = anthropometric_multipliers(draw.height_cm, draw.weight_kg, draw.age_y, draw.sex)?;
    Ok(PatientParams {
        index,
        seed,
        provenance,
        sex: draw.sex,
        age_y: draw.age_y,
        height_cm: draw.height_cm,
        weight_kg: draw.weight_kg,
        cfpwv: draw.pwv,
        lambda_d,
        lambda_l,
        lambda_c: fit_lambda_c(net, draw.pwv)?,
        lambda_ct: windkessel.1,
        lambda_rt: windkessel.0,
        hr: draw.hr,
        co: draw.co,
    })
}

/// Samples and simulates `n_clinical + n_lhs` patients on `jobs` worker
/// threads. The output does not depend on `jobs`.
pub fn build_dataset(
    stats: &PopulationStats,
    n_clinical: usize,
    n_lhs: usize,
    net: &ArterialNetwork,
    solver: &SolverConfig,
    seed: u64,
    jobs: usize,
) -> Result<Dataset> {
    stats.validate()?;
    solver.validate()?;
    if n_clinical + n_lhs == 0 {
        return Err(Error::InvalidArgument("cohort size must be > 0".into()));
    }
    let mut draws: Vec<(Draw, Provenance)> = Vec::with_capacity(n_clinical + n_lhs);
    if n_clinical > 0 {
        draws.extend(sample_correlated(stats, n_clinical, seed)?.into_iter().map(|d| (d, Provenance::ClinicalDraw)));
    }
    if n_lhs > 0 {
        draws.extend(lhs_augment(stats, n_lhs, seed)?.into_iter().map(|d| (d, Provenance::LhsAugment)));
    }
    let windkessel = sample_windkessel(net, stats, draws.len(), seed)?;
    let params = draws
        .iter()
        .zip(windkessel)
        .enumerate()
        .map(|(i, ((draw, prov), wk))| derive_params(net, draw, wk, i, seed ^ i as u64, *prov))
        .collect::<Result<Vec<_>>>()?;

    let records = run_batch(net, &params, solver, jobs)?;
    let meta = summarize(&records, n_clinical, n_lhs, windkessel_ranges(net, stats), *solver);
    log::info!(
        "cohort: {} records, {} failed, {} unconverged",
        records.len(),
        meta.n_failed,
        meta.n_unconverged
    );
    Ok(Dataset {
        records,
        stats_used: stats.clone(),
        generation_seed: seed,
        schema_version: SCHEMA_VERSION,
        meta,
    })
}

/// Simulates every patient, results in input order.
pub fn run_batch(
    net: &ArterialNetwork,
    params: &[PatientParams],
    solver: &SolverConfig,
    jobs: usize,
) -> Result<Vec<HemoRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    pool.install(|| {
        params
            .par_iter()
            .map(|p| simulate_patient(net, p, solver))
            .collect()
    })
}

fn summarize(
    records: &[HemoRecord],
    n_clinical: usize,
    n_lhs: usize,
    ranges: WindkesselRanges,
    solver: SolverConfig,
) -> DatasetMeta {
    let converged: Vec<&SiteFeatures> = records.iter().filter_map(|r| r.converged_features()).collect();
    let outside = converged
        .iter()
        .filter(|f| !(PHYSIOLOGICAL_SBP[0]..=PHYSIOLOGICAL_SBP[1]).contains(&f.brachial.sbp))
        .count();
    DatasetMeta {
        n_clinical,
        n_lhs,
        n_failed: records.iter().filter(|r| r.failure.is_some()).count(),
        n_unconverged: records.iter().filter(|r| !r.converged).count(),
        sbp_outside_physiological: if converged.is_empty() {
            0.0
        } else {
            outside as f64 / converged.len() as f64
        },
        windkessel_ranges: ranges,
        solver,
    }
}

/// Keeps converged records whose brachial SBP and DBP both lie strictly
/// within `mean ± k·sd` of the population statistics. Order is preserved.
pub fn filter_admissible(ds: &Dataset, stats: &PopulationStats, k: f64) -> Result<(Dataset, FilterReport)> {
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("k must be >= 0, got {k}")));
    }
    let sbp = stats.marginal(Variable::Sbp)?;
    let dbp = stats.marginal(Variable::Dbp)?;
    let within = |x: f64, mean: f64, sd: f64| (x - mean).abs() < k * sd;
    let records: Vec<HemoRecord> = ds
        .records
        .iter()
        .filter(|r| {
            r.converged_features().is_some_and(|f| {
                within(f.brachial.sbp, sbp.mean, sbp.sd) && within(f.brachial.dbp, dbp.mean, dbp.sd)
            })
        })
        .cloned()
        .collect();
    let report = FilterReport {
        k,
        total: ds.records.len(),
        retained: records.len(),
    };
    log::info!(
        "filter k = {k}: retained {}/{} ({:.1}%)",
        report.retained,
        report.total,
        100.0 * report.retention_rate()
    );
    Ok((Dataset { records, ..ds.clone() }, report))
}

/// One CSV row. Column names are part of the dataset schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CsvRow {
    index: usize,
    seed: u64,
    provenance: String,
    sex: Sex,
    age_y: f64,
    height_cm: f64,
    weight_kg: f64,
    cfpwv: f64,
    lambda_d: f64,
    lambda_l: f64,
    lambda_c: f64,
    lambda_ct: f64,
    lambda_rt: f64,
    hr: f64,
    co: f64,
    converged: bool,
    cycles_to_converge: usize,
    sbp: Option<f64>,
    dbp: Option<f64>,
    map: Option<f64>,
    pp: Option<f64>,
    rsbp: Option<f64>,
    rdbp: Option<f64>,
    rmap: Option<f64>,
    rpp: Option<f64>,
    csbp: Option<f64>,
    cdbp: Option<f64>,
    cmap: Option<f64>,
    cpp: Option<f64>,
    failure: Option<String>,
}

/// Every column of the dataset CSV, in order.
pub const CSV_COLUMNS: [&str; 30] = [
    "index", "seed", "provenance", "sex", "age_y", "height_cm", "weight_kg", "cfpwv", "lambda_d", "lambda_l",
    "lambda_c", "lambda_ct", "lambda_rt", "hr", "co", "converged", "cycles_to_converge", "sbp", "dbp", "map", "pp",
    "rsbp", "rdbp", "rmap", "rpp", "csbp", "cdbp", "cmap", "cpp", "failure",
];

impl CsvRow {
    fn from_record(r: &HemoRecord) -> Self {
        let p = &r.params;
        let f = r.features;
        let pick = |g: fn(&SiteFeatures) -> &PressureFeatures, h: fn(&PressureFeatures) -> f64| f.as_ref().map(|f| h(g(f)));
        CsvRow {
            index: p.index,
            seed: p.seed,
            provenance: p.provenance.as_str().to_string(),
            sex: p.sex,
            age_y: p.age_y,
            height_cm: p.height_cm,
            weight_kg: p.weight_kg,
            cfpwv: p.cfpwv,
            lambda_d: p.lambda_d,
            lambda_l: p.lambda_l,
            lambda_c: p.lambda_c,
            lambda_ct: p.lambda_ct,
            lambda_rt: p.lambda_rt,
            hr: p.hr,
            co: p.co,
            converged: r.converged,
            cycles_to_converge: r.cycles_to_converge,
            sbp: pick(|f| &f.brachial, |p| p.sbp),
            dbp: pick(|f| &f.brachial, |p| p.dbp),
            map: pick(|f| &f.brachial, |p| p.map),
            pp: pick(|f| &f.brachial, |p| p.pp),
            rsbp: pick(|f| &f.radial, |p| p.sbp),
            rdbp: pick(|f| &f.radial, |p| p.dbp),
            rmap: pick(|f| &f.radial, |p| p.map),
            rpp: pick(|f| &f.radial, |p| p.pp),
            csbp: pick(|f| &f.aortic_root, |p| p.sbp),
            cdbp: pick(|f| &f.aortic_root, |p| p.dbp),
            cmap: pick(|f| &f.aortic_root, |p| p.map),
            cpp: pick(|f| &f.aortic_root, |p| p.pp),
            failure: r.failure.clone(),
        }
    }

    fn into_record(self) -> Result<HemoRecord> {
        let provenance = Provenance::parse(&self.provenance)
            .ok_or_else(|| Error::Parse(format!("row {}: unknown provenance '{}'", self.index, self.provenance)))?;
        let site = |sbp: Option<f64>, dbp: Option<f64>, map: Option<f64>, pp: Option<f64>| match (sbp, dbp, map, pp) {
            (Some(sbp), Some(dbp), Some(map), Some(pp)) => Some(PressureFeatures { sbp, dbp, map, pp }),
            _ => None,
        };
        let features = match (
            site(self.sbp, self.dbp, self.map, self.pp),
            site(self.rsbp, self.rdbp, self.rmap, self.rpp),
            site(self.csbp, self.cdbp, self.cmap, self.cpp),
        ) {
            (Some(brachial), Some(radial), Some(aortic_root)) => Some(SiteFeatures {
                brachial,
                radial,
                aortic_root,
            }),
            _ => None,
        };
        Ok(HemoRecord {
            params: PatientParams {
                index: self.index,
                seed: self.seed,
                provenance,
                sex: self.sex,
                age_y: self.age_y,
                height_cm: self.height_cm,
                weight_kg: self.weight_kg,
                cfpwv: self.cfpwv,
                lambda_d: self.lambda_d,
                lambda_l: self.lambda_l,
                lambda_c: self.lambda_c,
                lambda_ct: self.lambda_ct,
                lambda_rt: self.lambda_rt,
                hr: self.hr,
                co: self.co,
            },
            features,
            cycles_to_converge: self.cycles_to_converge,
            converged: self.converged,
            failure: self.failure.filter(|s| !s.is_empty()),
            series: None,
        })
    }
}

/// Everything in a dataset except the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    schema_version: u32,
    generation_seed: u64,
    n_records: usize,
    columns: Vec<String>,
    stats_used: PopulationStats,
    meta: DatasetMeta,
}

/// Path of the JSON sidecar belonging to a dataset CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_records_csv(records: &[HemoRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(CsvRow::from_record(r))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<HemoRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers()?.clone();
    for col in CSV_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Parse(format!("{}: missing column '{col}'", path.display())));
        }
    }
    rdr.deserialize::<CsvRow>()
        .map(|row| row.map_err(Error::from).and_then(CsvRow::into_record))
        .collect()
}

impl Dataset {
    /// Writes the CSV and its JSON sidecar next to it.
    pub fn save(&self, csv_path: impl AsRef<Path>) -> Result<()> {
        let csv_path = csv_path.as_ref();
        write_records_csv(&self.records, csv_path)?;
        let sidecar = Sidecar {
            schema_version: self.schema_version,
            generation_seed: self.generation_seed,
            n_records: self.records.len(),
            columns: CSV_COLUMNS.iter().map(|s| s.to_string()).collect(),
            stats_used: self.stats_used.clone(),
            meta: self.meta.clone(),
        };
        let path = sidecar_path(csv_path);
        let text = serde_json::to_string_pretty(&sidecar)? + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Reads a CSV written by [`Dataset::save`] together with its sidecar.
    pub fn load(csv_path: impl AsRef<Path>) -> Result<Dataset> {
        let csv_path = csv_path.as_ref();
        let records = read_records_csv(csv_path)?;
        let path = sidecar_path(csv_path);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        if sidecar.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "dataset schema version {} is not supported (expected {SCHEMA_VERSION})",
                sidecar.schema_version
            )));
        }
        if sidecar.n_records != records.len() {
            return Err(Error::Parse(format!(
                "sidecar lists {} records but the CSV has {}",
                sidecar.n_records,
                records.len()
            )));
        }
        Ok(Dataset {
            records,
            stats_used: sidecar.stats_used,
            generation_seed: sidecar.generation_seed,
            schema_version: sidecar.schema_version,
            meta: sidecar.meta,
        })
    }

    pub fn converged(&self) -> impl Iterator<Item = &HemoRecord> {
        self.records.iter().filter(|r| r.converged_features().is_some())
    }

    pub fn provenance_counts(&self) -> (usize, usize) {
        let clinical = self
            .records
            .iter()
            .filter(|r| r.params.provenance == Provenance::ClinicalDraw)
            .count();
        let lhs = self
            .records
            .iter()
            .filter(|r| r.params.provenance == Provenance::LhsAugment)
            .count();
        (clinical, lhs)
    }
}

//! End-to-end run: cohort, filter, surrogates, analyses, manifest.

use std::collections::BTreeMap;
use std::time::Instant;

use hemoforge::analysis::{
    contour_grid, default_reference, evaluate_split, inverse_scenario_suite, isosurface_grid, pairwise_sensitivity,
    project_points, record_ranges, svg, table2_scenarios, train_rt_regressor, uniqueness_grid, AgreementReport,
    AnalysisGrid, Reference, ScenarioResult, Stage, StagingBands, FULL_SCENARIO,
};
use hemoforge::cohort::{build_dataset, filter_admissible, Dataset, PopulationStats, Variable};
use hemoforge::hemonet::{ArterialNetwork, REFERENCE_NETWORK_JSON};
use hemoforge::neuro::{train, Feature, FeatureSpec, MlpModel, Split, TrainConfig};
use hemoforge::pulse1d::HemoRecord;
use hemoforge::stats::{ks_uniform, mean};
use serde::{Deserialize, Serialize};

use crate::artifacts::{sha256_hex, ArtifactSink, InputEntry, Manifest, MANIFEST_FORMAT};
use crate::clinical::{clinical_predict, ClinicalRecord};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsSummary {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n_records: usize,
    pub n_converged: usize,
    pub n_failed: usize,
    pub sbp_outside_physiological: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub k: f64,
    pub total: usize,
    pub retained: usize,
    pub retention_rate: f64,
    pub sbp_mean: f64,
    pub dbp_mean: f64,
    /// Configured population `[mean, sd]`.
    pub sbp_target: [f64; 2],
    pub dbp_target: [f64; 2],
    /// Retained multipliers against uniform on their sampling ranges.
    pub ks_lambda_rt: KsSummary,
    pub ks_lambda_ct: KsSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputMetrics {
    pub agreement: AgreementReport,
    /// Share of test records with |error| ≤ 5 mmHg.
    pub within_5mmhg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSummary {
    pub n_train: usize,
    pub n_test: usize,
    pub dbp: OutputMetrics,
    pub sbp: OutputMetrics,
    pub initial_test_mse: f64,
    pub final_train_mse: f64,
    pub final_test_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSummary {
    pub n_records: usize,
    pub n_test: usize,
    pub scenarios: Vec<ScenarioResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSummary {
    pub agreement: AgreementReport,
    pub min_prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySummary {
    pub grid_n: usize,
    pub dbp_diagonal: BTreeMap<Feature, f64>,
    pub sbp_diagonal: BTreeMap<Feature, f64>,
    pub pp_diagonal: BTreeMap<Feature, f64>,
    pub sbp_top4: Vec<Feature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSummary {
    pub pair: (Feature, Feature),
    /// Share of adjacent cells along each axis where SBP does not fall.
    pub sbp_nondecreasing: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsosurfaceSummary {
    pub resolution: usize,
    pub cells: usize,
    /// Share of λ_RT grid lines along which the stage never drops.
    pub sbp_stage_monotone_rt: f64,
    pub dbp_stage_monotone_rt: f64,
    pub sbp_label_counts: BTreeMap<Stage, usize>,
    pub dbp_label_counts: BTreeMap<Stage, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessSummary {
    pub grid_n: usize,
    pub rt_range: [f64; 2],
    pub ct_range: [f64; 2],
    pub x0: Reference,
    pub monotone_fraction: f64,
    pub direction: i8,
    pub max_root_count: usize,
    pub column_max_min: f64,
    pub column_max_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalSummary {
    pub n_records: usize,
    pub n_rejected: usize,
    pub co: Option<AgreementReport>,
    pub csbp: Option<AgreementReport>,
}

/// Headline numbers of a run, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub cohort: CohortSummary,
    pub filter: FilterSummary,
    pub forward: ForwardSummary,
    pub inverse_suite: InverseSummary,
    pub inverse_clinical: Vec<(Feature, AgreementReport)>,
    pub rt_regressor: RtSummary,
    pub sensitivity: SensitivitySummary,
    pub contours: Vec<ContourSummary>,
    pub isosurface: IsosurfaceSummary,
    pub uniqueness: UniquenessSummary,
    pub clinical: ClinicalSummary,
}

/// Wall-clock seconds per stage. Kept out of the artifacts so reruns stay
/// byte-identical.
pub type Timings = Vec<(String, f64)>;

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub summary: Summary,
    pub timings: Timings,
}

/// Inputs of the clinical inverse model: bedside quantities only.
pub fn clinical_spec() -> FeatureSpec {
    FeatureSpec {
        inputs: hemoforge::analysis::clinical_inputs(),
        outputs: vec![Feature::Co, Feature::Csbp],
    }
}

pub fn ks_summary(samples: &[f64], range: [f64; 2]) -> CliResult<KsSummary> {
    let ks = ks_uniform(samples, range[0], range[1])?;
    Ok(KsSummary {
        statistic: ks.statistic,
        p_value: ks.p_value,
        n: ks.n,
    })
}

pub fn filter_summary(full: &Dataset, matched: &Dataset, stats: &PopulationStats, k: f64) -> CliResult<FilterSummary> {
    let sbp: Vec<f64> = matched.converged().filter_map(|r| Feature::Sbp.value(r)).collect();
    let dbp: Vec<f64> = matched.converged().filter_map(|r| Feature::Dbp.value(r)).collect();
    let rt: Vec<f64> = matched.records.iter().map(|r| r.params.lambda_rt).collect();
    let ct: Vec<f64> = matched.records.iter().map(|r| r.params.lambda_ct).collect();
    if rt.is_empty() {
        return Err(CliError::numeric("filter retained no records"));
    }
    let ranges = full.meta.windkessel_ranges;
    let (ms, md) = (stats.marginal(Variable::Sbp)?, stats.marginal(Variable::Dbp)?);
    Ok(FilterSummary {
        k,
        total: full.records.len(),
        retained: matched.records.len(),
        retention_rate: matched.records.len() as f64 / full.records.len() as f64,
        sbp_mean: mean(&sbp),
        dbp_mean: mean(&dbp),
        sbp_target: [ms.mean, ms.sd],
        dbp_target: [md.mean, md.sd],
        ks_lambda_rt: ks_summary(&rt, ranges.lambda_rt)?,
        ks_lambda_ct: ks_summary(&ct, ranges.lambda_ct)?,
    })
}

pub fn forward_summary(model: &MlpModel, records: &[HemoRecord], split: &Split) -> CliResult<ForwardSummary> {
    let spec = model.spec();
    let (x, y) = spec.extract(records, &split.test)?;
    let pred = model.predict_batch(x.view())?;
    let metrics = |f: Feature| -> CliResult<OutputMetrics> {
        let j = spec
            .outputs
            .iter()
            .position(|&o| o == f)
            .ok_or_else(|| CliError::config(format!("model has no output '{f}'")))?;
        let (t, p) = (y.column(j).to_vec(), pred.column(j).to_vec());
        let within = t.iter().zip(&p).filter(|(a, b)| (*a - *b).abs() <= 5.0).count();
        Ok(OutputMetrics {
            agreement: hemoforge::analysis::agreement(&t, &p)?,
            within_5mmhg: within as f64 / t.len() as f64,
        })
    };
    let meta = model.meta().ok_or_else(|| CliError::config("model is not fitted"))?;
    Ok(ForwardSummary {
        n_train: split.train.len(),
        n_test: split.test.len(),
        dbp: metrics(Feature::Dbp)?,
        sbp: metrics(Feature::Sbp)?,
        initial_test_mse: meta.initial_test_mse,
        final_train_mse: meta.final_train_mse,
        final_test_mse: meta.final_test_mse,
    })
}

pub fn curves_csv(train_mse: &[f64], test_mse: &[f64]) -> String {
    let mut s = String::from("epoch,train_mse,test_mse\n");
    for (i, (a, b)) in train_mse.iter().zip(test_mse).enumerate() {
        s.push_str(&format!("{},{a},{b}\n", i + 1));
    }
    s
}

/// `values[row][col]` of one output over a 2-D grid, row = first axis.
pub fn grid_matrix(grid: &AnalysisGrid, output: Feature) -> Vec<Vec<f64>> {
    let shape = grid.shape();
    let col = grid.output_column(output).expect("output present");
    (0..shape[0])
        .map(|i| (0..shape[1]).map(|j| grid.values[grid.ravel(&[i, j])][col]).collect())
        .collect()
}

pub fn points_csv(pair: (Feature, Feature), points: &[[f64; 2]]) -> String {
    let mut s = format!("{},{}\n", pair.0, pair.1);
    for p in points {
        s.push_str(&format!("{},{}\n", p[0], p[1]));
    }
    s
}

pub fn isosurface_summary(grid: &AnalysisGrid, bands: &StagingBands) -> IsosurfaceSummary {
    let labels = grid.labels.as_deref().unwrap_or_default();
    let counts = |f: Feature| {
        let mut m = BTreeMap::new();
        if let Some(j) = grid.output_column(f) {
            for l in labels {
                *m.entry(l[j]).or_insert(0) += 1;
            }
        }
        m
    };
    let rt_axis = grid.axes.iter().position(|a| a.feature == Feature::LambdaRt).unwrap_or(0);
    IsosurfaceSummary {
        resolution: grid.axes[0].values.len(),
        cells: grid.n_cells(),
        sbp_stage_monotone_rt: grid.stage_monotone_fraction(rt_axis, Feature::Sbp, &bands.sbp).unwrap_or(0.0),
        dbp_stage_monotone_rt: grid.stage_monotone_fraction(rt_axis, Feature::Dbp, &bands.dbp).unwrap_or(0.0),
        sbp_label_counts: counts(Feature::Sbp),
        dbp_label_counts: counts(Feature::Dbp),
    }
}

/// Clinical inputs of the uniqueness study: reference multipliers and HR,
/// population-mean cuff pressures.
pub fn uniqueness_x0(stats: &PopulationStats) -> CliResult<Reference> {
    let mut x0 = default_reference();
    x0.insert(Feature::Sbp, stats.marginal(Variable::Sbp)?.mean);
    x0.insert(Feature::Dbp, stats.marginal(Variable::Dbp)?.mean);
    Ok(x0)
}

fn matched_subset(records: &[HemoRecord], rows: &[usize]) -> Vec<HemoRecord> {
    rows.iter().map(|&i| records[i].clone()).collect()
}

fn stage<T>(timings: &mut Timings, name: &str, f: impl FnOnce() -> CliResult<T>) -> Result<T, (String, CliError)> {
    log::info!("stage {name}");
    let t = Instant::now();
    let out = f().map_err(|e| (name.to_string(), e))?;
    let secs = t.elapsed().as_secs_f64();
    log::info!("stage {name} done in {secs:.1} s");
    timings.push((name.to_string(), secs));
    Ok(out)
}

fn input_entries(cfg: &RunConfig) -> CliResult<Vec<InputEntry>> {
    let entry = |name: &str, path: &Option<std::path::PathBuf>, builtin: &str, text: String| -> CliResult<InputEntry> {
        Ok(match path {
            Some(p) => InputEntry {
                name: name.into(),
                source: p.display().to_string(),
                sha256: sha256_hex(&std::fs::read(p).map_err(|e| CliError::io(p, e))?),
            },
            None => InputEntry {
                name: name.into(),
                source: builtin.into(),
                sha256: sha256_hex(text.as_bytes()),
            },
        })
    };
    Ok(vec![
        entry("network", &cfg.network, "bundled", REFERENCE_NETWORK_JSON.to_string())?,
        entry("stats", &cfg.stats, "default", serde_json::to_string(&PopulationStats::default())?)?,
    ])
}

/// The configuration as recorded in the output: everything but the output
/// location, which does not affect results.
pub fn recorded_config(cfg: &RunConfig) -> CliResult<serde_json::Value> {
    let mut v = serde_json::to_value(cfg)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("output_dir");
        o.remove("jobs");
    }
    Ok(v)
}

/// Runs every stage, writing artifacts under `cfg.output_dir`. On failure
/// the manifest is still written, naming the failed stage.
pub fn run_pipeline(cfg: &RunConfig) -> CliResult<PipelineOutput> {
    cfg.validate()?;
    let mut sink = ArtifactSink::new(&cfg.output_dir)?;
    let recorded = recorded_config(cfg)?;
    let config_text = serde_json::to_string_pretty(&recorded)? + "\n";
    let mut manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        train_seed: cfg.train.seed,
        config_sha256: sha256_hex(config_text.as_bytes()),
        inputs: input_entries(cfg)?,
        complete: false,
        failed_stage: None,
        error: None,
        artifacts: Vec::new(),
    };
    sink.write("config.json", &config_text)?;
    let mut timings = Timings::new();
    match run_stages(cfg, &mut sink, &mut timings) {
        Ok(summary) => {
            sink.write_json("summary.json", &summary)?;
            manifest.complete = true;
            sink.write_manifest(manifest)?;
            Ok(PipelineOutput { summary, timings })
        }
        Err((stage, e)) => {
            let e = e.in_stage(&stage);
            manifest.failed_stage = Some(stage);
            manifest.error = Some(e.message.clone());
            sink.write_manifest(manifest)?;
            Err(e)
        }
    }
}

fn run_stages(cfg: &RunConfig, sink: &mut ArtifactSink, timings: &mut Timings) -> Result<Summary, (String, CliError)> {
    let (net, stats) = stage(timings, "inputs", || Ok((cfg.network()?, cfg.population()?)))?;
    let opts = &cfg.analysis;

    let dataset = stage(timings, "cohort", || {
        let ds = build_dataset(
            &stats,
            cfg.cohort.n_clinical,
            cfg.cohort.n_lhs,
            &net,
            &cfg.solver,
            cfg.seed,
            cfg.jobs(),
        )?;
        ds.save(sink.path("cohort.csv")?)?;
        sink.record("cohort.csv")?;
        sink.record("cohort.json")?;
        Ok(ds)
    })?;
    let cohort = CohortSummary {
        n_records: dataset.records.len(),
        n_converged: dataset.converged().count(),
        n_failed: dataset.meta.n_failed,
        sbp_outside_physiological: dataset.meta.sbp_outside_physiological,
    };

    let (matched, filter) = stage(timings, "filter", || {
        let (matched, _) = filter_admissible(&dataset, &stats, cfg.cohort.filter_k)?;
        matched.save(sink.path("matched.csv")?)?;
        sink.record("matched.csv")?;
        sink.record("matched.json")?;
        let summary = filter_summary(&dataset, &matched, &stats, cfg.cohort.filter_k)?;
        sink.write_json("filter.json", &summary)?;
        Ok((matched, summary))
    })?;

    let (forward_model, forward) = stage(timings, "train-forward", || {
        let t = train(&dataset.records, &FeatureSpec::forward(), &cfg.train)?;
        t.model.save(sink.path("models/forward.json")?)?;
        sink.record("models/forward.json")?;
        sink.write("forward_curves.csv", curves_csv(&t.curves.train_mse, &t.curves.test_mse))?;
        let summary = forward_summary(&t.model, &dataset.records, &t.split)?;
        Ok((t.model, summary))
    })?;

    let suite = stage(timings, "inverse-suite", || {
        let suite = inverse_scenario_suite(&matched.records, &table2_scenarios(), &cfg.train, Feature::Co)?;
        sink.write("inverse_suite.csv", suite.to_csv())?;
        sink.write("inverse_suite.txt", suite.render_table())?;
        let full = suite.model(FULL_SCENARIO).expect("full scenario trained");
        full.save(sink.path("models/inverse_full.json")?)?;
        sink.record("models/inverse_full.json")?;
        Ok(suite)
    })?;

    let (clinical_model, clinical_split, inverse_clinical) = stage(timings, "train-inverse", || {
        let t = train(&matched.records, &clinical_spec(), &cfg.train)?;
        t.model.save(sink.path("models/inverse_clinical.json")?)?;
        sink.record("models/inverse_clinical.json")?;
        let report = evaluate_split(&t.model, &matched.records, &t.split.test)?;
        Ok((t.model, t.split, report))
    })?;

    let rt_regressor = stage(timings, "rt-regressor", || {
        let rt = train_rt_regressor(&matched.records, &cfg.train)?;
        rt.trained.model.save(sink.path("models/rt_regressor.json")?)?;
        sink.record("models/rt_regressor.json")?;
        let (x, _) = rt.trained.model.spec().extract(&matched.records, &rt.trained.split.test)?;
        let pred = rt.trained.model.predict_batch(x.view())?;
        let summary = RtSummary {
            agreement: rt.report,
            min_prediction: pred.iter().copied().fold(f64::INFINITY, f64::min),
        };
        sink.write_json("rt_regressor.json", &summary)?;
        Ok(summary)
    })?;

    let forward_inputs = FeatureSpec::forward().inputs;
    let ranges = stage(timings, "ranges", || Ok(record_ranges(&dataset.records, &forward_inputs)?))?;
    let reference = default_reference();

    let sensitivity = stage(timings, "sensitivity", || {
        let s = pairwise_sensitivity(&forward_model, &ranges, &reference, opts.sensitivity_grid)?;
        for m in [&s.dbp, &s.sbp, &s.pp] {
            sink.write(&format!("sensitivity_{}.csv", m.output), m.to_csv())?;
            if opts.svg {
                let svg = svg::heatmap(&m.values, &format!("{} span (mmHg)", m.output), "parameter", "parameter");
                sink.write(&format!("sensitivity_{}.svg", m.output), svg)?;
            }
        }
        let diag = |m: &hemoforge::analysis::SensitivityMatrix| m.params.iter().copied().zip(m.diagonal()).collect();
        Ok(SensitivitySummary {
            grid_n: s.grid_n,
            dbp_diagonal: diag(&s.dbp),
            sbp_diagonal: diag(&s.sbp),
            pp_diagonal: diag(&s.pp),
            sbp_top4: s.sbp.top_diagonal(4),
        })
    })?;

    let contours = stage(timings, "contour", || {
        let rows: Vec<usize> = (0..dataset.records.len()).collect();
        let mut out = Vec::new();
        for &pair in &opts.contour_pairs {
            let grid = contour_grid(&forward_model, pair, &ranges, &reference, opts.contour_grid)?;
            let stem = format!("contour_{}_{}", pair.0, pair.1);
            sink.write(&format!("{stem}.csv"), grid.to_csv())?;
            sink.write(
                &format!("{stem}_points.csv"),
                points_csv(pair, &project_points(&dataset.records, &rows, pair)),
            )?;
            if opts.svg {
                let m = grid_matrix(&grid, Feature::Sbp);
                let transposed: Vec<Vec<f64>> =
                    (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect();
                let title = format!("SBP (mmHg) over {} and {}", pair.0, pair.1);
                sink.write(
                    &format!("{stem}.svg"),
                    svg::heatmap(&transposed, &title, pair.0.as_str(), pair.1.as_str()),
                )?;
            }
            let up = |axis| grid.adjacent_fraction(axis, Feature::Sbp, |a, b| b >= a).unwrap_or(0.0);
            out.push(ContourSummary {
                pair,
                sbp_nondecreasing: [up(0), up(1)],
            });
        }
        Ok(out)
    })?;

    let isosurface = stage(timings, "isosurface", || {
        let axes = [Feature::Co, Feature::LambdaRt, Feature::LambdaC];
        let grid = isosurface_grid(
            &forward_model,
            axes,
            &ranges,
            &reference,
            opts.isosurface_resolution,
            &opts.bands,
        )?;
        sink.write("isosurface.csv", grid.to_csv())?;
        Ok(isosurface_summary(&grid, &opts.bands))
    })?;

    let uniqueness = stage(timings, "uniqueness", || {
        let model = suite.model(FULL_SCENARIO).expect("full scenario trained");
        let x0 = uniqueness_x0(&stats)?;
        let r = record_ranges(&matched.records, &[Feature::LambdaRt, Feature::LambdaCt])?;
        let (rt_range, ct_range) = (r[&Feature::LambdaRt], r[&Feature::LambdaCt]);
        let u = uniqueness_grid(model, &x0, rt_range, ct_range, opts.uniqueness_grid)?;
        sink.write("uniqueness.csv", u.to_csv())?;
        if opts.svg {
            sink.write(
                "uniqueness.svg",
                svg::heatmap(&u.normalized, "CO / column max", "lambda_ct", "lambda_rt"),
            )?;
        }
        let maxima: Vec<f64> = u
            .normalized
            .iter()
            .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let summary = UniquenessSummary {
            grid_n: opts.uniqueness_grid,
            rt_range,
            ct_range,
            x0,
            monotone_fraction: u.monotone_fraction,
            direction: u.direction,
            max_root_count: u.max_root_count,
            column_max_min: maxima.iter().copied().fold(f64::INFINITY, f64::min),
            column_max_max: maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        sink.write_json("uniqueness.json", &summary)?;
        Ok(summary)
    })?;

    let clinical = stage(timings, "clinical", || {
        // held-out simulations stand in for a clinical file
        let held_out = matched_subset(&matched.records, &clinical_split.test);
        let records: Vec<ClinicalRecord> = held_out.iter().filter_map(ClinicalRecord::from_simulation).collect();
        let path = sink.path("clinical_synthetic.csv")?;
        crate::clinical::write_clinical_csv(&records, &path)?;
        sink.record("clinical_synthetic.csv")?;
        let (ok, rejected) = crate::clinical::read_clinical_csv(&path)?;
        let outcome = clinical_predict(&clinical_model, &net, &ok, rejected)?;
        sink.write("clinical_predictions.csv", outcome.to_csv())?;
        let summary = ClinicalSummary {
            n_records: records.len(),
            n_rejected: outcome.rejected.len(),
            co: outcome.co_agreement,
            csbp: outcome.csbp_agreement,
        };
        sink.write_json("clinical_report.json", &summary)?;
        Ok(summary)
    })?;

    Ok(Summary {
        seed: cfg.seed,
        cohort,
        filter,
        forward,
        inverse_suite: InverseSummary {
            n_records: suite.n_records,
            n_test: suite.n_test,
            scenarios: suite.results.clone(),
        },
        inverse_clinical,
        rt_regressor,
        sensitivity,
        contours,
        isosurface,
        uniqueness,
        clinical,
    })
}

/// Loads a model file, mapping failures to configuration errors.
pub fn load_model(path: &std::path::Path) -> CliResult<MlpModel> {
    MlpModel::load(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Loads a network, bundled when `path` is `None`.
pub fn load_network(path: Option<&std::path::Path>) -> CliResult<ArterialNetwork> {
    Ok(match path {
        Some(p) => ArterialNetwork::load(p)?,
        None => ArterialNetwork::reference(),
    })
}

pub fn default_train() -> TrainConfig {
    TrainConfig::default()
}

//! Subcommand definitions and their handlers.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hemoforge::analysis::{
    agreement, contour_grid, default_reference, inverse_scenario_suite, isosurface_grid, pairwise_sensitivity,
    project_points, record_ranges, svg, table2_scenarios, train_rt_regressor, uniqueness_grid, StagingBands,
};
use hemoforge::cohort::{build_dataset, filter_admissible, Dataset};
use hemoforge::hemonet::ScaleSet;
use hemoforge::neuro::{split_indices, train, Feature, FeatureSpec, MlpModel};
use hemoforge::pulse1d::{simulate_patient, SolverConfig};
use hemoforge::cohort::PatientParams;
use ndarray::Array2;

use crate::artifacts::verify_manifest;
use crate::clinical::{clinical_predict, read_clinical_csv, write_clinical_csv, ClinicalRecord};
use crate::config::{load_layered, load_train_config, RunConfig};
use crate::error::{CliError, CliResult};
use crate::pipeline::{self, clinical_spec, curves_csv, grid_matrix, isosurface_summary, load_model, load_network, points_csv, uniqueness_x0};

#[derive(Debug, Parser)]
#[command(name = "hemoforge", version, about = "1-D arterial pulse-wave workbench with neural surrogates")]
pub struct Cli {
    /// Worker threads for simulation batches.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one patient on a (scaled) network.
    Simulate(SimulateArgs),
    /// Sample and simulate a virtual cohort.
    Cohort(CohortArgs),
    /// Keep records whose cuff pressures match the population.
    Filter(FilterArgs),
    /// Train a surrogate on a dataset.
    Train(TrainArgs),
    /// Evaluate a surrogate on a CSV of input points.
    Predict(PredictArgs),
    /// Pairwise pressure-span matrices of a forward model.
    Sensitivity(SensitivityArgs),
    /// 2-D prediction grid over one input pair.
    Contour(ContourArgs),
    /// Labelled 3-D prediction lattice.
    Isosurface(IsosurfaceArgs),
    /// Bland-Altman and correlation statistics of two CSV columns.
    Agreement(AgreementArgs),
    /// Inverse CO models for every input scenario.
    InverseSuite(InverseSuiteArgs),
    /// CO surface over (lambda_rt, lambda_ct) and its level-set roots.
    Uniqueness(UniquenessArgs),
    /// Regressor of lambda_rt from measurable quantities.
    RtRegressor(RtRegressorArgs),
    /// Predict CO and central SBP for clinical records.
    ClinicalPredict(ClinicalPredictArgs),
    /// Write a clinical CSV from held-out simulated records.
    SynthClinical(SynthClinicalArgs),
    /// Run every stage and write an artifact bundle with a manifest.
    Pipeline(PipelineArgs),
    /// Check the artifact hashes of a pipeline output directory.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Network JSON; the bundled reference when omitted.
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long, default_value_t = 5.1)]
    pub co: f64,
    #[arg(long, default_value_t = 63.1)]
    pub hr: f64,
    /// ScaleSet JSON.
    #[arg(long)]
    pub scales: Option<PathBuf>,
    /// SolverConfig JSON.
    #[arg(long)]
    pub solver: Option<PathBuf>,
    /// Keep final-cycle pressure and flow series.
    #[arg(long)]
    pub series: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CohortArgs {
    /// Run configuration JSON (network, stats, seed, cohort, solver).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV; a JSON sidecar is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1.96)]
    pub k: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated feature names.
    #[arg(long, default_value = "lambda_d,lambda_l,lambda_c,lambda_ct,lambda_rt,hr,co")]
    pub inputs: String,
    #[arg(long, default_value = "dbp,sbp")]
    pub outputs: String,
    /// TrainConfig JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss curves CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with one column per model input.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridCommon {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose value ranges span the grid axes.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub common: GridCommon,
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub common: GridCommon,
    /// Two feature names, e.g. `co,lambda_rt`.
    #[arg(long)]
    pub pair: String,
    #[arg(long, default_value_t = 41)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct IsosurfaceArgs {
    #[command(flatten)]
    pub common: GridCommon,
    #[arg(long, default_value = "co,lambda_rt,lambda_c")]
    pub axes: String,
    #[arg(long, default_value_t = 30)]
    pub resolution: usize,
    /// StagingBands JSON.
    #[arg(long)]
    pub bands: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "true")]
    pub truth: String,
    #[arg(long)]
    pub pred: String,
    /// JSON report; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InverseSuiteArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "co")]
    pub target: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct UniquenessArgs {
    /// CO model whose inputs include lambda_rt and lambda_ct.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose lambda_rt / lambda_ct ranges span the grid.
    #[arg(long)]
    pub data: PathBuf,
    /// Cuff SBP of the fixed clinical point; population mean when omitted.
    #[arg(long)]
    pub sbp: Option<f64>,
    #[arg(long)]
    pub dbp: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct RtRegressorArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClinicalPredictArgs {
    /// Inverse model over clinical inputs.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub network: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rejections and agreement reports as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthClinicalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// TrainConfig used for the model under test; its split picks the
    /// held-out records.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub dir: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    if cli.jobs == Some(0) {
        return Err(CliError::config("--jobs must be >= 1"));
    }
    let jobs = cli.jobs;
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Cohort(a) => cohort(a, jobs),
        Command::Filter(a) => filter(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Contour(a) => contour(a),
        Command::Isosurface(a) => isosurface(a),
        Command::Agreement(a) => agreement_cmd(a),
        Command::InverseSuite(a) => inverse_suite(a),
        Command::Uniqueness(a) => uniqueness(a),
        Command::RtRegressor(a) => rt_regressor(a),
        Command::ClinicalPredict(a) => clinical(a),
        Command::SynthClinical(a) => synth_clinical(a),
        Command::Pipeline(a) => pipeline_cmd(a, jobs),
        Command::Verify(a) => verify(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, serde_json::to_string_pretty(value)? + "\n")
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    if !path.is_file() {
        return Err(CliError::config(format!("{}: file not found", path.display())));
    }
    Ok(Dataset::load(path)?)
}

fn feature(s: &str) -> CliResult<Feature> {
    Feature::parse(s).ok_or_else(|| CliError::config(format!("unknown feature '{s}'")))
}

fn feature_list<const N: usize>(s: &str) -> CliResult<[Feature; N]> {
    let v = FeatureSpec::parse_list(s).map_err(|e| CliError::config(e.to_string()))?;
    v.try_into()
        .map_err(|v: Vec<Feature>| CliError::config(format!("expected {N} features, got {}", v.len())))
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    let net = load_network(a.network.as_deref())?;
    let scales: ScaleSet = match &a.scales {
        Some(p) => read_json(p)?,
        None => ScaleSet::default(),
    };
    scales.validate()?;
    let mut solver: SolverConfig = load_layered(a.solver.as_deref(), &["solver"], std::env::vars())?;
    solver.record_series |= a.series;
    let mut params = PatientParams::with_inflow(a.co, a.hr);
    params.lambda_l = scales.lambda_l;
    params.lambda_d = scales.lambda_d;
    params.lambda_c = scales.lambda_c;
    params.lambda_rt = scales.lambda_rt;
    params.lambda_ct = scales.lambda_ct;
    params.cfpwv = hemoforge::hemonet::compute_cfpwv(&net.scale(&scales)?, 1.0)?;
    let record = simulate_patient(&net, &params, &solver)?;
    write_json(&a.out, &record)?;
    match (&record.failure, record.converged) {
        (Some(f), _) => Err(CliError::numeric(format!("simulation failed: {f}"))),
        (None, false) => Err(CliError::numeric(format!(
            "no periodic state within {} cycles",
            solver.max_cycles
        ))),
        _ => Ok(()),
    }
}

fn cohort(a: CohortArgs, jobs: Option<usize>) -> CliResult<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?;
    cfg.jobs = jobs.or(cfg.jobs);
    let ds = build_dataset(
        &cfg.population()?,
        cfg.cohort.n_clinical,
        cfg.cohort.n_lhs,
        &cfg.network()?,
        &cfg.solver,
        cfg.seed,
        cfg.jobs(),
    )?;
    ds.save(&a.out)?;
    println!(
        "{} records, {} failed, {} unconverged",
        ds.records.len(),
        ds.meta.n_failed,
        ds.meta.n_unconverged
    );
    Ok(())
}

fn filter(a: FilterArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let (matched, report) = filter_admissible(&ds, &ds.stats_used, a.k)?;
    matched.save(&a.out)?;
    let summary = pipeline::filter_summary(&ds, &matched, &ds.stats_used, a.k)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    log::info!("retained {}/{}", report.retained, report.total);
    Ok(())
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let spec = FeatureSpec::new(
        FeatureSpec::parse_list(&a.inputs).map_err(|e| CliError::config(e.to_string()))?,
        FeatureSpec::parse_list(&a.outputs).map_err(|e| CliError::config(e.to_string()))?,
    )
    .map_err(|e| CliError::config(e.to_string()))?;
    let cfg = load_train_config(a.config.as_deref())?;
    let t = train(&ds.records, &spec, &cfg)?;
    t.model.save(&a.out)?;
    if let Some(p) = &a.curves {
        write_text(p, curves_csv(&t.curves.train_mse, &t.curves.test_mse))?;
    }
    let report = hemoforge::analysis::evaluate_split(&t.model, &ds.records, &t.split.test)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let spec = model.spec().clone();
    let mut rdr = csv::Reader::from_path(&a.input).map_err(|e| CliError::config(format!("{}: {e}", a.input.display())))?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<usize> = spec
        .inputs
        .iter()
        .map(|f| {
            headers
                .iter()
                .position(|h| h.trim() == f.as_str())
                .ok_or_else(|| CliError::config(format!("{}: missing column '{f}'", a.input.display())))
        })
        .collect::<CliResult<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row: Vec<f64> = cols
            .iter()
            .map(|&c| {
                rec[c]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::config(format!("row {}: column {c}: {e}", i + 1)))
            })
            .collect::<CliResult<_>>()?;
        rows.extend(row);
    }
    let n = rows.len() / spec.inputs.len().max(1);
    let x = Array2::from_shape_vec((n, spec.inputs.len()), rows).expect("row-major shape");
    let y = model.predict_batch(x.view())?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(spec.inputs.iter().chain(&spec.outputs).map(|f| f.as_str()))?;
    for (xi, yi) in x.rows().into_iter().zip(y.rows()) {
        out.write_record(xi.iter().chain(yi.iter()).map(|v| v.to_string()))?;
    }
    write_text(&a.out, out.into_inner().map_err(|e| CliError::config(e.to_string()))?)
}

struct GridInputs {
    model: MlpModel,
    dataset: Dataset,
    ranges: hemoforge::analysis::Ranges,
}

fn grid_inputs(c: &GridCommon) -> CliResult<GridInputs> {
    let model = load_model(&c.model)?;
    let dataset = load_dataset(&c.data)?;
    let ranges = record_ranges(&dataset.records, &model.spec().inputs)?;
    std::fs::create_dir_all(&c.out).map_err(|e| CliError::io(&c.out, e))?;
    Ok(GridInputs { model, dataset, ranges })
}

fn sensitivity(a: SensitivityArgs) -> CliResult<()> {
    let g = grid_inputs(&a.common)?;
    let s = pairwise_sensitivity(&g.model, &g.ranges, &default_reference(), a.grid)?;
    for m in [&s.dbp, &s.sbp, &s.pp] {
        write_text(&a.common.out.join(format!("sensitivity_{}.csv", m.output)), m.to_csv())?;
        if a.common.svg {
            let title = format!("{} span (mmHg)", m.output);
            write_text(
                &a.common.out.join(format!("sensitivity_{}.svg", m.output)),
                svg::heatmap(&m.values, &title, "parameter", "parameter"),
            )?;
        }
    }
    println!("top-4 SBP diagonal: {:?}", s.sbp.top_diagonal(4));
    Ok(())
}

fn contour(a: ContourArgs) -> CliResult<()> {
    let [p, q] = feature_list::<2>(&a.pair)?;
    let g = grid_inputs(&a.common)?;
    let grid = contour_grid(&g.model, (p, q), &g.ranges, &default_reference(), a.grid)?;
    let stem = format!("contour_{p}_{q}");
    write_text(&a.common.out.join(format!("{stem}.csv")), grid.to_csv())?;
    let rows: Vec<usize> = (0..g.dataset.records.len()).collect();
    write_text(
        &a.common.out.join(format!("{stem}_points.csv")),
        points_csv((p, q), &project_points(&g.dataset.records, &rows, (p, q))),
    )?;
    if a.common.svg {
        for &f in &grid.outputs {
            let m = grid_matrix(&grid, f);
            let t: Vec<Vec<f64>> = (0..m[0].len()).map(|j| m.iter().map(|r| r[j]).collect()).collect();
            write_text(
                &a.common.out.join(format!("{stem}_{f}.svg")),
                svg::heatmap(&t, &format!("{f} over {p} and {q}"), p.as_str(), q.as_str()),
            )?;
        }
    }
    Ok(())
}

fn isosurface(a: IsosurfaceArgs) -> CliResult<()> {
    let axes = feature_list::<3>(&a.axes)?;
    let bands: StagingBands = match &a.bands {
        Some(p) => read_json(p)?,
        None => StagingBands::default(),
    };
    let g = grid_inputs(&a.common)?;
    let grid = isosurface_grid(&g.model, axes, &g.ranges, &default_reference(), a.resolution, &bands)?;
    write_text(&a.common.out.join("isosurface.csv"), grid.to_csv())?;
    println!("{}", serde_json::to_string_pretty(&isosurface_summary(&grid, &bands))?);
    Ok(())
}

fn agreement_cmd(a: AgreementArgs) -> CliResult<()> {
    let mut rdr = csv::Reader::from_path(&a.input).map_err(|e| CliError::config(format!("{}: {e}", a.input.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::config(format!("{}: missing column '{name}'", a.input.display())))
    };
    let (ct, cp) = (col(&a.truth)?, col(&a.pred)?);
    let (mut t, mut p) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        // rows with an empty cell are skipped, e.g. prediction-only records
        if let (Ok(x), Ok(y)) = (rec[ct].trim().parse::<f64>(), rec[cp].trim().parse::<f64>()) {
            t.push(x);
            p.push(y);
        }
    }
    let report = agreement(&t, &p)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &a.out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn inverse_suite(a: InverseSuiteArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = load_train_config(a.config.as_deref())?;
    let target = feature(&a.target)?;
    let suite = inverse_scenario_suite(&ds.records, &table2_scenarios(), &cfg, target)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    write_text(&a.out.join("inverse_suite.csv"), suite.to_csv())?;
    write_text(&a.out.join("inverse_suite.txt"), suite.render_table())?;
    for (s, m) in table2_scenarios().iter().zip(&suite.models) {
        let name = s.name.replace('+', "_").to_lowercase();
        m.save(a.out.join(format!("inverse_{name}.json")))?;
    }
    print!("{}", suite.render_table());
    Ok(())
}

fn uniqueness(a: UniquenessArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let mut x0 = uniqueness_x0(&ds.stats_used)?;
    if let Some(v) = a.sbp {
        x0.insert(Feature::Sbp, v);
    }
    if let Some(v) = a.dbp {
        x0.insert(Feature::Dbp, v);
    }
    let r = record_ranges(&ds.records, &[Feature::LambdaRt, Feature::LambdaCt])?;
    let u = uniqueness_grid(&model, &x0, r[&Feature::LambdaRt], r[&Feature::LambdaCt], a.grid)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    write_text(&a.out.join("uniqueness.csv"), u.to_csv())?;
    if a.svg {
        write_text(
            &a.out.join("uniqueness.svg"),
            svg::heatmap(&u.normalized, "CO / column max", "lambda_ct", "lambda_rt"),
        )?;
    }
    println!(
        "monotone fraction {:.3} (direction {}), max root count {}",
        u.monotone_fraction, u.direction, u.max_root_count
    );
    Ok(())
}

fn rt_regressor(a: RtRegressorArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = load_train_config(a.config.as_deref())?;
    let rt = train_rt_regressor(&ds.records, &cfg)?;
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    rt.trained.model.save(a.out.join("rt_regressor.json"))?;
    write_json(&a.out.join("rt_report.json"), &rt.report)?;
    println!("test pearson r = {:.4}", rt.test_pearson);
    Ok(())
}

fn clinical(a: ClinicalPredictArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let net = load_network(a.network.as_deref())?;
    if !a.input.is_file() {
        return Err(CliError::config(format!("{}: file not found", a.input.display())));
    }
    let (records, rejected) = read_clinical_csv(&a.input)?;
    let outcome = clinical_predict(&model, &net, &records, rejected)?;
    write_text(&a.out, outcome.to_csv())?;
    for r in &outcome.rejected {
        log::warn!("row {} rejected: {}", r.row, r.reasons.join("; "));
    }
    if let Some(p) = &a.report {
        write_json(
            p,
            &serde_json::json!({
                "rejected": outcome.rejected,
                "co": outcome.co_agreement,
                "csbp": outcome.csbp_agreement,
            }),
        )?;
    }
    println!("{} predicted, {} rejected", outcome.predictions.len(), outcome.rejected.len());
    Ok(())
}

fn synth_clinical(a: SynthClinicalArgs) -> CliResult<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = load_train_config(a.config.as_deref())?;
    let usable = clinical_spec().usable(&ds.records);
    let split = split_indices(&usable, cfg.train_fraction, cfg.seed);
    let records: Vec<ClinicalRecord> = split
        .test
        .iter()
        .filter_map(|&i| ClinicalRecord::from_simulation(&ds.records[i]))
        .collect();
    write_clinical_csv(&records, &a.out)?;
    println!("{} records", records.len());
    Ok(())
}

fn pipeline_cmd(a: PipelineArgs, jobs: Option<usize>) -> CliResult<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?;
    cfg.jobs = jobs.or(cfg.jobs);
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    cfg.analysis.svg |= a.svg;
    let out = pipeline::run_pipeline(&cfg)?;
    for (stage, secs) in &out.timings {
        log::info!("{stage}: {secs:.1} s");
    }
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    Ok(())
}

fn verify(a: VerifyArgs) -> CliResult<()> {
    let bad = verify_manifest(&a.dir)?;
    if bad.is_empty() {
        println!("all artifacts match the manifest");
        Ok(())
    } else {
        Err(CliError::numeric(format!("hash mismatch: {}", bad.join(", "))))
    }
}

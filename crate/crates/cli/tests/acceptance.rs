//! Desk-scale acceptance run: one line per criterion.
//!
//! Runs the default pipeline twice (500 patients, default training) and a
//! handful of standalone oracles. Failing criteria are reported, not hidden;
//! the process exits non-zero on failure only when `HEMOFORGE_STRICT=1`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hemoforge::analysis::{default_reference, isosurface_grid, record_ranges, variance_decomposition, StagingBands, FULL_SCENARIO};
use hemoforge::cohort::{Dataset, PatientParams};
use hemoforge::hemonet::{ArterialNetwork, Constants, Site, SitePosition, Segment, WindkesselTerminal};
use hemoforge::neuro::{gradient_check, Feature, FeatureSpec, MlpModel, Standardizer};
use hemoforge::pulse1d::{simulate, simulate_with_diagnostics, PulseSolver, SolverConfig};
use hemoforge::units::MMHG;
use hemoforge_cli::artifacts::verify_manifest;
use hemoforge_cli::config::RunConfig;
use hemoforge_cli::pipeline::{run_pipeline, PipelineOutput, Summary};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    what: String,
    pass: bool,
}

#[derive(Default)]
struct Criterion {
    checks: Vec<Check>,
}

impl Criterion {
    fn check(&mut self, pass: bool, what: impl Into<String>) {
        self.checks.push(Check { what: what.into(), pass });
    }

    fn note(&mut self, what: impl Into<String>) {
        self.check(true, what);
    }

    fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn report(n: usize, title: &str, c: &Criterion) -> bool {
    println!("criterion {n} {title}: {}", if c.pass() { "PASS" } else { "FAIL" });
    for check in &c.checks {
        println!("    [{}] {}", if check.pass { "ok" } else { "!!" }, check.what);
    }
    c.pass()
}

fn stage_secs(out: &PipelineOutput, name: &str) -> f64 {
    out.timings.iter().find(|(s, _)| s == name).map_or(f64::NAN, |t| t.1)
}

/// One inviscid straight tube of diameter 2 cm ending in `terminal`.
fn tube_network(length_cm: f64, c0: f64, terminal: WindkesselTerminal) -> ArterialNetwork {
    let rho = 1.05;
    let segment = Segment {
        id: 1,
        name: "tube".into(),
        length_cm,
        d_prox_cm: 2.0,
        d_dist_cm: 2.0,
        distensibility_per_mmhg: MMHG / (rho * c0 * c0),
        parent: None,
        children: vec![],
    };
    let mut sites: BTreeMap<Site, SitePosition> = Site::ALL
        .iter()
        .map(|&s| (s, SitePosition { segment_id: 1, s: 0.5 }))
        .collect();
    sites.insert(Site::Carotid, SitePosition { segment_id: 1, s: 0.0 });
    sites.insert(Site::Femoral, SitePosition { segment_id: 1, s: 1.0 });
    let constants = Constants {
        mu: 1e-12,
        ..Constants::default()
    };
    ArterialNetwork::new(vec![segment], vec![terminal], sites, constants).unwrap()
}

/// Constant inflow into a short inviscid tube ending in a Windkessel.
fn windkessel_fixed_point() -> (f64, f64) {
    let terminal = WindkesselTerminal {
        segment_id: 1,
        r1: 0.1,
        r2: 1.0,
        ct: 0.2,
    };
    let (r1, r2, ct) = (terminal.r1, terminal.r2, terminal.ct);
    let net = tube_network(20.0, 600.0, terminal);
    let q = 90.0;
    let mut solver = PulseSolver::new(&net, &SolverConfig::default()).unwrap();
    solver.set_inflow(move |_| q);
    let dt = 0.5 * solver.stable_dt();
    // ten time constants R2·C_T
    let steps = (10.0 * r2 * ct / dt).ceil() as usize;
    for _ in 0..steps {
        solver.advance_step(dt).unwrap();
    }
    let p = *solver.pressures(1).unwrap().last().unwrap();
    (p, q * (r1 + r2))
}

fn moens_korteweg_speed() -> (f64, f64) {
    let c0 = 600.0;
    let z = 1.05 * c0 / std::f64::consts::PI / MMHG;
    let net = tube_network(
        400.0,
        c0,
        WindkesselTerminal {
            segment_id: 1,
            r1: z,
            r2: 1e6,
            ct: 1e3,
        },
    );
    let cfg = SolverConfig {
        cells_per_cm: 4.0,
        ..SolverConfig::default()
    };
    let mut solver = PulseSolver::new(&net, &cfg).unwrap();
    solver.set_uniform_state(100.0, 0.0);
    let (x0, width) = (100.0, 4.0);
    solver.set_pressure_profile(1, |x| 100.0 + (-0.5 * ((x - x0) / width).powi(2)).exp());
    let travel = 150.0 / c0;
    let steps = (travel / solver.stable_dt()).ceil() as usize;
    let dt = travel / steps as f64;
    for _ in 0..steps {
        solver.advance_step(dt).unwrap();
    }
    let p = solver.pressures(1).unwrap();
    let dx = solver.cell_size(1).unwrap();
    let start = (x0 / dx) as usize + 20;
    let k = start
        + p[start..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
    let (a, b, c) = (p[k - 1], p[k], p[k + 1]);
    let x_peak = (k as f64 + 0.5 + 0.5 * (a - c) / (a - 2.0 * b + c)) * dx;
    ((x_peak - x0) / travel, c0)
}

fn cfpwv_transit() -> (f64, f64) {
    use hemoforge::hemonet::{cfpwv_path, compute_cfpwv};
    use hemoforge::pulse1d::foot_time;
    let net = ArterialNetwork::reference();
    let cfg = SolverConfig {
        record_series: true,
        ..SolverConfig::default()
    };
    let series = simulate(&net, 5.1, 63.0, &cfg).unwrap().series.unwrap();
    let foot = |site: Site| {
        let s = series.iter().find(|s| s.site == site).unwrap();
        foot_time(&s.time, &s.pressure).unwrap()
    };
    let transit = foot(Site::Femoral) - foot(Site::Carotid);
    let length: f64 = cfpwv_path(&net)
        .unwrap()
        .iter()
        .map(|p| p.fraction * net.segments()[p.segment].length_cm)
        .sum();
    (length / transit / 100.0, compute_cfpwv(&net, 1.0).unwrap())
}

fn solver_oracles() -> Criterion {
    let mut c = Criterion::default();
    let (p, expected) = windkessel_fixed_point();
    let err = (p - expected).abs() / expected;
    c.check(err < 0.01, format!("Windkessel fixed point {p:.3} vs Q(R1+R2) = {expected:.3} mmHg ({:.3}%)", 100.0 * err));

    let net = ArterialNetwork::reference();
    let (record, diag) =
        simulate_with_diagnostics(&net, PatientParams::with_inflow(5.1, 63.0), &SolverConfig::default()).unwrap();
    let d = diag.unwrap();
    let err = (d.mean_outflow - d.mean_inflow).abs() / d.mean_inflow;
    c.check(
        err < 0.01,
        format!("mass balance: inflow {:.3} vs outflow {:.3} mL/s ({:.3}%)", d.mean_inflow, d.mean_outflow, 100.0 * err),
    );

    let (speed, c0) = moens_korteweg_speed();
    let err = (speed - c0).abs() / c0;
    c.check(err < 0.05, format!("pulse speed {speed:.1} vs Moens-Korteweg {c0:.1} cm/s ({:.2}%)", 100.0 * err));

    let (measured, formula) = cfpwv_transit();
    let err = (measured - formula).abs() / formula;
    c.check(err < 0.10, format!("cfPWV transit {measured:.3} vs formula {formula:.3} m/s ({:.2}%)", 100.0 * err));

    let fine = SolverConfig {
        cells_per_cm: 2.0,
        ..SolverConfig::default()
    };
    let a = record.features.unwrap().brachial;
    let b = simulate(&net, 5.1, 63.0, &fine).unwrap().features.unwrap().brachial;
    let (ds, dd) = ((a.sbp - b.sbp).abs(), (a.dbp - b.dbp).abs());
    c.check(ds < 1.0 && dd < 1.0, format!("halving dx: |dSBP| {ds:.3}, |dDBP| {dd:.3} mmHg"));

    c.check(
        record.converged && record.cycles_to_converge <= 30 && (102.0..=169.0).contains(&a.sbp),
        format!(
            "reference subject: converged {} in {} cycles, brachial SBP {:.1} mmHg",
            record.converged, record.cycles_to_converge, a.sbp
        ),
    );
    c
}

fn surrogate_training(s: &Summary, out: &PipelineOutput) -> Criterion {
    let mut c = Criterion::default();
    let f = &s.forward;
    for (name, m) in [("DBP", &f.dbp), ("SBP", &f.sbp)] {
        c.check(m.agreement.pearson_r >= 0.95, format!("{name} test r = {:.4} (n = {})", m.agreement.pearson_r, f.n_test));
        c.check(m.within_5mmhg >= 0.90, format!("{name} within +/-5 mmHg: {:.1}%", 100.0 * m.within_5mmhg));
    }

    // full-size network, random data, dropout active
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = FeatureSpec::forward();
    let (n, k, m) = (8, spec.inputs.len(), spec.outputs.len());
    let z = Array2::from_shape_fn((n, k), |_| rng.random_range(-2.0..2.0));
    let y = Array2::from_shape_fn((n, m), |_| rng.random_range(-2.0..2.0));
    let model = MlpModel::new(
        spec.clone(),
        Standardizer::fit(z.view(), &spec.inputs).unwrap(),
        Standardizer::fit(y.view(), &spec.outputs).unwrap(),
        5,
    )
    .unwrap();
    let report = gradient_check(&model, z.view(), y.view(), 1.0, 1e-5, 3, 64);
    let worst = report.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error)).unwrap();
    c.check(
        worst.rel_error < 1e-4,
        format!("gradient check over {} tensors, worst {} {:.2e}", report.len(), worst.tensor, worst.rel_error),
    );

    let secs = stage_secs(out, "train-forward");
    c.check(secs <= 600.0, format!("forward training {secs:.1} s"));
    c
}

fn table2_structure(s: &Summary) -> Criterion {
    let mut c = Criterion::default();
    let r2: BTreeMap<&str, f64> = s
        .inverse_suite
        .scenarios
        .iter()
        .map(|r| (r.scenario.name.as_str(), r.report.r_squared))
        .collect();
    let (x, xs, xds, xrt, full) = (r2["X"], r2["X+rSBP"], r2["X+rDBP+rSBP"], r2["X+RT"], r2[FULL_SCENARIO]);
    c.check(x < xs, format!("R2(X) {x:.3} < R2(X+rSBP) {xs:.3}"));
    c.check(xs <= xds, format!("R2(X+rSBP) {xs:.3} <= R2(X+rDBP+rSBP) {xds:.3}"));
    c.check(x < xrt, format!("R2(X) {x:.3} < R2(X+RT) {xrt:.3}"));
    c.check(full >= 0.98, format!("full-information R2 {full:.4} (n_test = {})", s.inverse_suite.n_test));
    let dx = s
        .inverse_suite
        .scenarios
        .iter()
        .find(|r| r.scenario.name == "X")
        .unwrap()
        .delta_sigma_u;
    c.check(dx >= 0.03, format!("unexplained-variance gap of X: {:.1}%", 100.0 * dx));
    let v = variance_decomposition(0.996, 0.887).unwrap();
    c.check((v - 0.109).abs() < 1e-12, format!("decomposition(0.996, 0.887) = {v}"));
    c
}

fn sensitivity_structure(s: &Summary) -> Criterion {
    let mut c = Criterion::default();
    let d = &s.sensitivity.sbp_diagonal;
    let rt = d[&Feature::LambdaRt];
    for f in [Feature::LambdaD, Feature::LambdaL, Feature::LambdaCt] {
        c.check(
            d[&f] < 0.25 * rt,
            format!("dSBP {f} {:.2} < 25% of lambda_rt {rt:.2} mmHg", d[&f]),
        );
    }
    let mut top = s.sensitivity.sbp_top4.clone();
    top.sort();
    let mut want = vec![Feature::LambdaRt, Feature::Co, Feature::LambdaC, Feature::Hr];
    want.sort();
    c.check(top == want, format!("top-4 SBP diagonal {:?}", s.sensitivity.sbp_top4));
    c
}

fn population_matching(s: &Summary) -> Criterion {
    let mut c = Criterion::default();
    let f = &s.filter;
    c.check(
        (0.20..=0.60).contains(&f.retention_rate),
        format!("k = {}: retained {}/{} ({:.1}%)", f.k, f.retained, f.total, 100.0 * f.retention_rate),
    );
    let ds = (f.sbp_mean - f.sbp_target[0]).abs();
    let dd = (f.dbp_mean - f.dbp_target[0]).abs();
    c.check(ds <= f.sbp_target[1], format!("retained SBP mean {:.1} vs {:.1} +/- {:.1}", f.sbp_mean, f.sbp_target[0], f.sbp_target[1]));
    c.check(dd <= f.dbp_target[1], format!("retained DBP mean {:.1} vs {:.1} +/- {:.1}", f.dbp_mean, f.dbp_target[0], f.dbp_target[1]));
    c.check(
        f.ks_lambda_rt.p_value < 0.05,
        format!("KS uniformity of lambda_rt: D = {:.3}, p = {:.2e}", f.ks_lambda_rt.statistic, f.ks_lambda_rt.p_value),
    );
    c.note(format!(
        "KS uniformity of lambda_ct (reported only): D = {:.3}, p = {:.3}",
        f.ks_lambda_ct.statistic, f.ks_lambda_ct.p_value
    ));
    c
}

fn rt_regressor(s: &Summary) -> Criterion {
    let mut c = Criterion::default();
    let a = &s.rt_regressor.agreement;
    c.check(a.pearson_r >= 0.98, format!("test r = {:.4} (n = {})", a.pearson_r, a.n));
    c
}

fn uniqueness(s: &Summary) -> Criterion {
    let mut c = Criterion::default();
    let u = &s.uniqueness;
    let dir = if u.direction < 0 { "decreasing" } else { "increasing" };
    c.check(
        u.monotone_fraction >= 0.95,
        format!("CO monotone ({dir}) in lambda_rt on {:.1}% of adjacent pairs", 100.0 * u.monotone_fraction),
    );
    c.check(
        u.column_max_min == 1.0 && u.column_max_max == 1.0,
        format!("normalized column maxima in [{}, {}]", u.column_max_min, u.column_max_max),
    );
    c.check(u.max_root_count <= 6, format!("max level-set root count {}", u.max_root_count));
    c
}

fn performance(out: &PipelineOutput, dir: &Path, jobs: usize) -> Criterion {
    let mut c = Criterion::default();
    let model = MlpModel::load(dir.join("models/forward.json")).unwrap();
    let ds = Dataset::load(dir.join("cohort.csv")).unwrap();
    let ranges = record_ranges(&ds.records, &model.spec().inputs).unwrap();
    let axes = [Feature::Co, Feature::LambdaRt, Feature::LambdaC];
    let t = Instant::now();
    let grid = isosurface_grid(&model, axes, &ranges, &default_reference(), 30, &StagingBands::default()).unwrap();
    let grid_secs = t.elapsed().as_secs_f64();
    c.check(
        grid.n_cells() == 27_000 && grid_secs <= 5.0,
        format!("{} surrogate predictions in {grid_secs:.3} s", grid.n_cells()),
    );

    let cohort_secs = stage_secs(out, "cohort");
    let n = ds.records.len();
    c.check(
        cohort_secs <= 1800.0,
        format!(
            "{n}-patient cohort in {cohort_secs:.1} s with --jobs {jobs} ({} hardware threads)",
            std::thread::available_parallelism().map_or(1, |n| n.get())
        ),
    );
    let per_sim = cohort_secs * jobs.min(std::thread::available_parallelism().map_or(1, |n| n.get())) as f64 / n as f64;
    let per_pred = grid_secs / grid.n_cells() as f64;
    let ratio = per_sim / per_pred;
    c.check(
        ratio >= 1e3,
        format!(
            "solver {:.3} s/patient-core vs surrogate {:.2e} s/prediction: ratio {ratio:.2e}",
            per_sim, per_pred
        ),
    );
    c
}

fn reproducibility(a: &Path, b: &Path, same_summary: bool) -> Criterion {
    let mut c = Criterion::default();
    c.check(same_summary, "identical in-memory summaries");
    let files = |root: &Path| {
        let mut v = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    v.push(p.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
        v.sort();
        v
    };
    let (fa, fb) = (files(a), files(b));
    c.check(fa == fb, format!("{} vs {} files", fa.len(), fb.len()));
    let differing: Vec<String> = fa
        .iter()
        .filter(|p| std::fs::read(a.join(p)).ok() != std::fs::read(b.join(p)).ok())
        .map(|p| p.display().to_string())
        .collect();
    c.check(differing.is_empty(), format!("byte-identical artifacts; differing: {differing:?}"));
    let bad = verify_manifest(a).unwrap();
    c.check(bad.is_empty(), format!("manifest verifies; mismatches: {bad:?}"));
    c
}

fn main() {
    // `cargo test -- --list` and filters are harness conventions; a listing
    // request gets an empty answer
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let strict = std::env::var("HEMOFORGE_STRICT").is_ok_and(|v| v == "1");
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let jobs = 4;
    let run = |name: &str| {
        let cfg = RunConfig {
            output_dir: tmp.path().join(name),
            jobs: Some(jobs),
            ..RunConfig::default()
        };
        eprintln!("acceptance: pipeline run '{name}'");
        run_pipeline(&cfg).unwrap_or_else(|e| panic!("pipeline failed: {e}"))
    };

    eprintln!("acceptance: solver oracles");
    let solver = solver_oracles();
    let first = run("first");
    let second = run("second");
    let s = &first.summary;

    let mut all = true;
    all &= report(1, "solver oracles", &solver);
    all &= report(2, "surrogate training", &surrogate_training(s, &first));
    all &= report(3, "inverse scenario structure", &table2_structure(s));
    all &= report(4, "sensitivity structure", &sensitivity_structure(s));
    all &= report(5, "population matching", &population_matching(s));
    all &= report(6, "R_T regressor", &rt_regressor(s));
    all &= report(7, "uniqueness grid", &uniqueness(s));
    all &= report(8, "performance", &performance(&first, &tmp.path().join("first"), jobs));
    all &= report(9, "reproducibility", &reproducibility(&tmp.path().join("first"), &tmp.path().join("second"), first.summary == second.summary));
    let c = &s.clinical;
    println!(
        "note: synthetic clinical self-consistency on {} held-out records ({} rejected): cSBP r = {}, CO r = {}",
        c.n_records,
        c.n_rejected,
        c.csbp.map_or("n/a".into(), |a| format!("{:.4}", a.pearson_r)),
        c.co.map_or("n/a".into(), |a| format!("{:.4}", a.pearson_r)),
    );
    println!(
        "acceptance: {} in {:.0} s",
        if all { "all criteria pass" } else { "some criteria fail" },
        started.elapsed().as_secs_f64()
    );
    if strict && !all {
        std::process::exit(1);
    }
}

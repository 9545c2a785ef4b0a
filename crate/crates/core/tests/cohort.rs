use hemoforge::cohort::{
    build_dataset, filter_admissible, lhs_augment, sample_correlated, sample_windkessel, windkessel_ranges, Dataset,
    PopulationStats, Provenance, Variable,
};
use hemoforge::hemonet::ArterialNetwork;
use hemoforge::pulse1d::SolverConfig;
use hemoforge::stats::{ks_uniform, mean, pearson};
use hemoforge::Error;
use proptest::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn identity_stats() -> PopulationStats {
    let mut s = PopulationStats::default();
    let k = s.correlation.variables.len();
    for i in 0..k {
        for j in 0..k {
            s.correlation.matrix[i][j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    s
}

fn column(draws: &[hemoforge::cohort::Draw], v: Variable) -> Vec<f64> {
    draws.iter().map(|d| d.value(v).unwrap()).collect()
}

const SAMPLED: [Variable; 6] = [
    Variable::Age,
    Variable::Pwv,
    Variable::Height,
    Variable::Weight,
    Variable::Hr,
    Variable::Co,
];

#[test]
fn independent_copula_has_no_correlation() {
    let draws = sample_correlated(&identity_stats(), 10_000, 3).unwrap();
    for (i, a) in SAMPLED.iter().enumerate() {
        for b in &SAMPLED[i + 1..] {
            let r = pearson(&column(&draws, *a), &column(&draws, *b)).unwrap();
            assert!(r.abs() < 0.05, "{a}-{b}: {r}");
        }
    }
}

/// Pearson correlation of the truncated marginals induced by a latent
/// correlation, by quadrature on a fine grid.
fn truncated_correlation_oracle(stats: &PopulationStats, a: Variable, b: Variable, rho: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let quantile = |v: Variable, u: f64| {
        let m = stats.marginals[&v];
        let (lo, hi) = m.support(stats.clip_sigma);
        let (fa, fb) = (n.cdf((lo - m.mean) / m.sd), n.cdf((hi - m.mean) / m.sd));
        m.mean + m.sd * n.inverse_cdf(fa + u * (fb - fa))
    };
    // integrate over the bivariate normal on a z-grid
    let h = 0.02;
    let grid: Vec<f64> = (-400..=400).map(|i| i as f64 * h).collect();
    let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut w_sum, mut ex, mut ey, mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &z1 in &grid {
        let x = quantile(a, n.cdf(z1));
        for &e in &grid {
            let z2 = rho * z1 + (1.0 - rho * rho).sqrt() * e;
            let y = quantile(b, n.cdf(z2));
            let w = pdf(z1) * pdf(e);
            w_sum += w;
            ex += w * x;
            ey += w * y;
            exx += w * x * x;
            eyy += w * y * y;
            exy += w * x * y;
        }
    }
    let (ex, ey, exx, eyy, exy) = (ex / w_sum, ey / w_sum, exx / w_sum, eyy / w_sum, exy / w_sum);
    (exy - ex * ey) / ((exx - ex * ex) * (eyy - ey * ey)).sqrt()
}

#[test]
fn height_weight_correlation_matches_target() {
    let stats = PopulationStats::default();
    let draws = sample_correlated(&stats, 10_000, 11).unwrap();
    let r = pearson(&column(&draws, Variable::Height), &column(&draws, Variable::Weight)).unwrap();
    assert!((0.45..=0.55).contains(&r), "height-weight {r}");
    let oracle = truncated_correlation_oracle(&stats, Variable::Height, Variable::Weight, 0.5);
    assert!((r - oracle).abs() < 0.03, "sample {r} vs oracle {oracle}");
}

#[test]
fn correlations_within_tenth_at_500() {
    let stats = PopulationStats::default();
    let draws = sample_correlated(&stats, 500, 5).unwrap();
    let vars = &stats.correlation.variables;
    for i in 0..vars.len() {
        for j in 0..i {
            let r = pearson(&column(&draws, vars[i]), &column(&draws, vars[j])).unwrap();
            let target = stats.correlation.matrix[i][j];
            assert!((r - target).abs() < 0.1, "{}-{}: {r} vs {target}", vars[i], vars[j]);
        }
    }
}

#[test]
fn draws_respect_ranges_and_means() {
    let stats = PopulationStats::default();
    let n = 4000;
    let draws = sample_correlated(&stats, n, 9).unwrap();
    for v in SAMPLED {
        let m = stats.marginals[&v];
        let (lo, hi) = m.support(stats.clip_sigma);
        let xs = column(&draws, v);
        assert!(xs.iter().all(|x| (lo..=hi).contains(x)), "{v} out of range");
        // the truncated mean differs from the configured one by the
        // asymmetry of the truncation; allow for it on top of 3 sd/√n
        let nrm = Normal::new(0.0, 1.0).unwrap();
        let (a, b) = ((lo - m.mean) / m.sd, (hi - m.mean) / m.sd);
        let shift = m.sd * (nrm.pdf(a) - nrm.pdf(b)) / (nrm.cdf(b) - nrm.cdf(a));
        let tol = 3.0 * m.sd / (n as f64).sqrt();
        assert!((mean(&xs) - (m.mean + shift)).abs() < tol, "{v}: mean {}", mean(&xs));
    }
    let co = column(&draws, Variable::Co);
    assert!(co.iter().all(|c| (2.8..=7.5).contains(c)));
}

#[test]
fn sex_ratio_follows_configuration() {
    let draws = sample_correlated(&PopulationStats::default(), 10_000, 2).unwrap();
    let women = draws.iter().filter(|d| d.sex == hemoforge::hemonet::Sex::Female).count();
    let p = 1301.0 / 2524.0;
    let sd = (p * (1.0 - p) / 10_000.0f64).sqrt();
    assert!((women as f64 / 10_000.0 - p).abs() < 4.0 * sd);
}

#[test]
fn indefinite_correlation_is_rejected() {
    let mut s = PopulationStats::default();
    s.correlation.matrix[2][3] = 1.5;
    s.correlation.matrix[3][2] = 1.5;
    assert!(matches!(sample_correlated(&s, 10, 1), Err(Error::NotPositiveSemidefinite(_))));
}

#[test]
fn lhs_ten_points_one_per_decile() {
    let draws = lhs_augment(&PopulationStats::default(), 10, 4).unwrap();
    for j in 0..draws[0].scores.len() {
        let mut strata: Vec<usize> = draws.iter().map(|d| (d.scores[j] * 10.0) as usize).collect();
        strata.sort();
        assert_eq!(strata, (0..10).collect::<Vec<_>>());
    }
}

#[test]
fn lhs_cdf_error_on_stratum_boundaries() {
    let n = 500;
    let draws = lhs_augment(&PopulationStats::default(), n, 8).unwrap();
    for j in 0..draws[0].scores.len() {
        let scores: Vec<f64> = draws.iter().map(|d| d.scores[j]).collect();
        for k in 0..=n {
            let boundary = k as f64 / n as f64;
            let empirical = scores.iter().filter(|&&u| u < boundary).count() as f64 / n as f64;
            assert!((empirical - boundary).abs() < 2.0 / n as f64);
        }
    }
}

#[test]
fn combined_cohort_covers_every_range() {
    let stats = PopulationStats::default();
    let (n_clin, n_lhs) = (1500, 500);
    let mut all = sample_correlated(&stats, n_clin, 21).unwrap();
    all.extend(lhs_augment(&stats, n_lhs, 21).unwrap());
    for j in 0..stats.correlation.variables.len() {
        let mut u: Vec<f64> = all.iter().map(|d| d.scores[j]).collect();
        u.push(0.0);
        u.push(1.0);
        u.sort_by(f64::total_cmp);
        let gap = u.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(gap < 3.0 / n_lhs as f64, "{}: gap {gap}", stats.correlation.variables[j]);
    }
}

#[test]
fn windkessel_bounds_reached() {
    let net = ArterialNetwork::reference();
    let stats = PopulationStats::default();
    let pairs = sample_windkessel(&net, &stats, 10_000, 13).unwrap();
    let r0 = net.total_terminal_resistance();
    let totals: Vec<f64> = pairs.iter().map(|(rt, _)| rt * r0).collect();
    let lo = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!((lo - 0.40).abs() < 0.004, "min total resistance {lo}");
    assert!((hi - 2.00).abs() < 0.02, "max total resistance {hi}");

    let ranges = windkessel_ranges(&net, &stats);
    let rts: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    assert!(ks_uniform(&rts, ranges.lambda_rt[0], ranges.lambda_rt[1]).unwrap().p_value > 0.05);
    let c_art = net.arterial_compliance();
    let c_hi = c_art + ranges.lambda_ct[1] * net.total_terminal_compliance();
    assert!((c_hi - 3.80).abs() < 1e-9);
    assert!(pairs.iter().all(|p| (ranges.lambda_ct[0]..=ranges.lambda_ct[1]).contains(&p.1)));
}

#[test]
fn windkessel_sampling_is_seeded() {
    let net = ArterialNetwork::reference();
    let stats = PopulationStats::default();
    let a = sample_windkessel(&net, &stats, 100, 5).unwrap();
    let b = sample_windkessel(&net, &stats, 100, 5).unwrap();
    let c = sample_windkessel(&net, &stats, 100, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn quick_solver() -> SolverConfig {
    SolverConfig {
        convergence_tol_mmhg: 1.0,
        ..SolverConfig::default()
    }
}

#[test]
fn dataset_independent_of_parallelism() {
    let net = ArterialNetwork::reference();
    let stats = PopulationStats::default();
    let a = build_dataset(&stats, 6, 2, &net, &quick_solver(), 77, 1).unwrap();
    let b = build_dataset(&stats, 6, 2, &net, &quick_solver(), 77, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.provenance_counts(), (6, 2));
    let seeds: std::collections::HashSet<u64> = a.records.iter().map(|r| r.params.seed).collect();
    assert_eq!(seeds.len(), a.records.len());
    assert!(a.records.iter().enumerate().all(|(i, r)| r.params.index == i));
    assert_eq!(a.records[7].params.provenance, Provenance::LhsAugment);

    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    a.save(&pa).unwrap();
    b.save(&pb).unwrap();
    assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());

    let back = Dataset::load(&pa).unwrap();
    assert_eq!(back, a);
}

#[test]
fn filter_extremes() {
    let net = ArterialNetwork::reference();
    let stats = PopulationStats::default();
    let ds = build_dataset(&stats, 5, 0, &net, &quick_solver(), 3, 1).unwrap();
    let converged = ds.converged().count();
    let (all, rep) = filter_admissible(&ds, &stats, f64::INFINITY).unwrap();
    assert_eq!(all.records.len(), converged);
    assert_eq!(rep.total, 5);
    let (none, rep) = filter_admissible(&ds, &stats, 0.0).unwrap();
    assert!(none.records.is_empty());
    assert_eq!(rep.retention_rate(), 0.0);
    assert!(filter_admissible(&ds, &stats, -1.0).is_err());
}

#[test]
fn missing_column_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "index,seed\n0,1\n").unwrap();
    assert!(matches!(hemoforge::cohort::read_records_csv(&path), Err(Error::Parse(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lhs_stratification_holds_exactly(n in 2usize..200, seed in any::<u64>()) {
        let draws = lhs_augment(&PopulationStats::default(), n, seed).unwrap();
        for j in 0..draws[0].scores.len() {
            let mut strata: Vec<usize> = draws.iter().map(|d| (d.scores[j] * n as f64) as usize).collect();
            strata.sort();
            prop_assert_eq!(strata, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn copula_draws_stay_in_range(seed in any::<u64>()) {
        let stats = PopulationStats::default();
        for d in sample_correlated(&stats, 200, seed).unwrap() {
            for v in SAMPLED {
                let (lo, hi) = stats.marginals[&v].support(stats.clip_sigma);
                let x = d.value(v).unwrap();
                prop_assert!(lo <= x && x <= hi);
            }
        }
    }
}

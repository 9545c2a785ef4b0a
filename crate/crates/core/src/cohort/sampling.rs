//! Gaussian-copula population draws, quantile LHS and Windkessel sampling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::population::{Marginal, PopulationStats, Variable};
use crate::error::{Error, Result};
use crate::hemonet::{ArterialNetwork, Sex};

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Clinical = 1,
    Lhs = 2,
    Windkessel = 3,
    Sex = 4,
    Jitter = 5,
    LhsSex = 6,
}

pub(crate) fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// One sampled subject before the multipliers are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub sex: Sex,
    pub age_y: f64,
    /// m/s.
    pub pwv: f64,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub hr: f64,
    pub co: f64,
    /// Copula scores in (0, 1), in the order of the correlation variables.
    pub scores: Vec<f64>,
}

impl Draw {
    pub fn value(&self, v: Variable) -> Option<f64> {
        match v {
            Variable::Age => Some(self.age_y),
            Variable::Pwv => Some(self.pwv),
            Variable::Height => Some(self.height_cm),
            Variable::Weight => Some(self.weight_kg),
            Variable::Hr => Some(self.hr),
            Variable::Co => Some(self.co),
            Variable::Sbp | Variable::Dbp => None,
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Inverse CDF of the marginal truncated to its support.
fn truncated_quantile(m: &Marginal, clip: f64, u: f64) -> f64 {
    let n = std_normal();
    let (lo, hi) = m.support(clip);
    let (a, b) = (n.cdf((lo - m.mean) / m.sd), n.cdf((hi - m.mean) / m.sd));
    let x = m.mean + m.sd * n.inverse_cdf(a + u * (b - a));
    // guard the ends against round-off in the inverse CDF
    x.clamp(lo, hi)
}

/// Correlated latent normals, one row per subject.
fn latent_normals(stats: &PopulationStats, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
    let l = stats.correlation_factor()?;
    let k = l.nrows();
    Ok((0..n)
        .map(|_| {
            let eps = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            &l * eps
        })
        .collect())
}

fn assemble(stats: &PopulationStats, scores: Vec<f64>, sex: Sex) -> Result<Draw> {
    let vars = &stats.correlation.variables;
    let value = |v: Variable| -> Result<f64> {
        let i = vars.iter().position(|&x| x == v).expect("validated");
        Ok(truncated_quantile(stats.marginal(v)?, stats.clip_sigma, scores[i]))
    };
    Ok(Draw {
        sex,
        age_y: value(Variable::Age)?,
        pwv: value(Variable::Pwv)?,
        height_cm: value(Variable::Height)?,
        weight_kg: value(Variable::Weight)?,
        hr: value(Variable::Hr)?,
        co: value(Variable::Co)?,
        scores,
    })
}

fn sample_sex(stats: &PopulationStats, rng: &mut ChaCha8Rng) -> Sex {
    if rng.random::<f64>() < stats.female_fraction {
        Sex::Female
    } else {
        Sex::Male
    }
}

/// Gaussian-copula draws with truncated-normal marginals.
pub fn sample_correlated(stats: &PopulationStats, n: usize, seed: u64) -> Result<Vec<Draw>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be > 0".into()));
    }
    stats.validate()?;
    let mut rng = stream_rng(seed, Stream::Clinical);
    let mut sex_rng = stream_rng(seed, Stream::Sex);
    let normal = std_normal();
    latent_normals(stats, n, &mut rng)?
        .into_iter()
        .map(|z| {
            let scores = z.iter().map(|&x| normal.cdf(x)).collect();
            assemble(stats, scores, sample_sex(stats, &mut sex_rng))
        })
        .collect()
}

/// Quantile Latin hypercube: copula draws whose per-variable ranks are
/// mapped to one point inside each of `n` equal-probability strata.
pub fn lhs_augment(stats: &PopulationStats, n: usize, seed: u64) -> Result<Vec<Draw>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be > 0".into()));
    }
    stats.validate()?;
    let mut rng = stream_rng(seed, Stream::Lhs);
    let mut jitter = stream_rng(seed, Stream::Jitter);
    let mut sex_rng = stream_rng(seed, Stream::LhsSex);
    let latent = latent_normals(stats, n, &mut rng)?;
    let k = stats.correlation.variables.len();

    let mut scores = vec![vec![0.0; k]; n];
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..k {
        order.sort_by(|&a, &b| latent[a][j].total_cmp(&latent[b][j]));
        for (rank, &i) in order.iter().enumerate() {
            let offset: f64 = jitter.random();
            scores[i][j] = (rank as f64 + offset) / n as f64;
        }
    }
    scores
        .into_iter()
        .map(|s| assemble(stats, s, sample_sex(stats, &mut sex_rng)))
        .collect()
}

/// Multiplier intervals for uniform Windkessel sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindkesselRanges {
    pub lambda_rt: [f64; 2],
    pub lambda_ct: [f64; 2],
}

/// Maps the total resistance and compliance bounds to multiplier ranges on
/// `net`: resistance through the parallel combination of terminals,
/// compliance as 1-D arterial compliance plus scaled terminal compliance.
pub fn windkessel_ranges(net: &ArterialNetwork, stats: &PopulationStats) -> WindkesselRanges {
    let b = &stats.windkessel_bounds;
    let r0 = net.total_terminal_resistance();
    let c_art = net.arterial_compliance();
    let ct0 = net.total_terminal_compliance();
    let ct_lo = ((b.compliance[0] - c_art) / ct0).max(b.min_lambda_ct);
    let ct_hi = ((b.compliance[1] - c_art) / ct0).max(ct_lo);
    WindkesselRanges {
        lambda_rt: [b.resistance[0] / r0, b.resistance[1] / r0],
        lambda_ct: [ct_lo, ct_hi],
    }
}

/// Uniform `(λ_RT, λ_CT)` pairs over [`windkessel_ranges`].
pub fn sample_windkessel(
    net: &ArterialNetwork,
    stats: &PopulationStats,
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be > 0".into()));
    }
    let r = windkessel_ranges(net, stats);
    let mut rng = stream_rng(seed, Stream::Windkessel);
    Ok((0..n)
        .map(|_| {
            let a = rng.random_range(r.lambda_rt[0]..=r.lambda_rt[1]);
            let b = rng.random_range(r.lambda_ct[0]..=r.lambda_ct[1]);
            (a, b)
        })
        .collect())
}

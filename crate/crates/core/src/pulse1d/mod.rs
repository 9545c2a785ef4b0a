//! 1-D pulse wave propagation on an arterial network.
//!
//! [`simulate`] drives a [`PulseSolver`] cycle by cycle from a uniform 80 mmHg
//! rest state until the site pressures repeat, then reduces the final cycle to
//! pressure features.

mod inflow;
mod solver;
mod windkessel;

pub use inflow::{inflow_waveform, HalfSineInflow};
pub use solver::PulseSolver;
pub use windkessel::{advance_compliance, windkessel_update, WindkesselState, VENOUS_PRESSURE};

use serde::{Deserialize, Serialize};

use crate::cohort::PatientParams;
use crate::error::{Error, Result};
use crate::hemonet::{ArterialNetwork, Site};

const INITIAL_PRESSURE: f64 = 80.0;
/// Pressure and speed bounds used to pick a step size that stays stable for
/// the whole run.
const DT_PRESSURE_BOUND: f64 = 200.0;
const DT_SPEED_BOUND: f64 = 150.0;
const CFL_RETRIES: usize = 3;
const CFL_SHRINK: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionModel {
    /// Static pressure continuity.
    #[default]
    StaticPressure,
    /// Total (static + dynamic) pressure continuity.
    TotalPressure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cells_per_cm: f64,
    pub cfl_number: f64,
    pub max_cycles: usize,
    pub convergence_tol_mmhg: f64,
    pub systolic_fraction: f64,
    pub junction_model: JunctionModel,
    /// Keep the final-cycle series of every site in the record.
    pub record_series: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cells_per_cm: 1.0,
            cfl_number: 0.8,
            max_cycles: 30,
            convergence_tol_mmhg: 0.5,
            systolic_fraction: 0.35,
            junction_model: JunctionModel::StaticPressure,
            record_series: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cells_per_cm.is_finite() && self.cells_per_cm > 0.0) {
            return Err(Error::InvalidArgument("cells_per_cm must be > 0".into()));
        }
        if !(self.cfl_number > 0.0 && self.cfl_number < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_number must be in (0, 1), got {}",
                self.cfl_number
            )));
        }
        if self.max_cycles < 2 {
            return Err(Error::InvalidArgument("max_cycles must be >= 2".into()));
        }
        if !(self.convergence_tol_mmhg > 0.0) {
            return Err(Error::InvalidArgument("convergence_tol_mmhg must be > 0".into()));
        }
        if !(self.systolic_fraction > 0.0 && self.systolic_fraction < 1.0) {
            return Err(Error::InvalidArgument("systolic_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Pressure and flow at one site over one cardiac period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSeries {
    pub site: Site,
    /// Seconds from the start of the cycle, `[0, T]` inclusive.
    pub time: Vec<f64>,
    /// mmHg.
    pub pressure: Vec<f64>,
    /// mL/s.
    pub flow: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureFeatures {
    pub sbp: f64,
    pub dbp: f64,
    pub map: f64,
    pub pp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteFeatures {
    pub brachial: PressureFeatures,
    pub radial: PressureFeatures,
    pub aortic_root: PressureFeatures,
}

/// One simulated patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemoRecord {
    pub params: PatientParams,
    /// Final-cycle features; `None` when the solver failed.
    pub features: Option<SiteFeatures>,
    pub cycles_to_converge: usize,
    pub converged: bool,
    /// Reason for a numerical failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<SiteSeries>>,
}

impl HemoRecord {
    /// Features of a converged record.
    pub fn converged_features(&self) -> Option<&SiteFeatures> {
        if self.converged {
            self.features.as_ref()
        } else {
            None
        }
    }
}

/// Volume bookkeeping over the final simulated cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// Mean inlet flow, mL/s.
    pub mean_inflow: f64,
    /// Mean summed flow into the terminals, mL/s.
    pub mean_outflow: f64,
    /// Time step, s.
    pub dt: f64,
    pub steps_per_cycle: usize,
}

/// SBP, DBP, MAP (trapezoidal time average) and PP of one period.
pub fn extract_features(series: &SiteSeries) -> Result<PressureFeatures> {
    features_of(&series.time, &series.pressure)
}

fn features_of(time: &[f64], pressure: &[f64]) -> Result<PressureFeatures> {
    if pressure.len() < 2 || time.len() != pressure.len() {
        return Err(Error::InsufficientData("series needs at least two samples".into()));
    }
    let sbp = pressure.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dbp = pressure.iter().copied().fold(f64::INFINITY, f64::min);
    let mut area = 0.0;
    for k in 1..time.len() {
        area += 0.5 * (pressure[k] + pressure[k - 1]) * (time[k] - time[k - 1]);
    }
    let span = time[time.len() - 1] - time[0];
    if !(span > 0.0) {
        return Err(Error::InsufficientData("series spans zero time".into()));
    }
    Ok(PressureFeatures {
        sbp,
        dbp,
        map: area / span,
        pp: sbp - dbp,
    })
}

/// Time of the wave foot by the intersecting-tangent method: the horizontal
/// through the minimum before the steepest upstroke meets the tangent at the
/// steepest point.
pub fn foot_time(time: &[f64], pressure: &[f64]) -> Option<f64> {
    if pressure.len() < 3 {
        return None;
    }
    let (mut k_max, mut slope_max) = (0, f64::NEG_INFINITY);
    for k in 0..pressure.len() - 1 {
        let slope = (pressure[k + 1] - pressure[k]) / (time[k + 1] - time[k]);
        if slope > slope_max {
            slope_max = slope;
            k_max = k;
        }
    }
    if !(slope_max > 0.0) {
        return None;
    }
    let p_min = pressure[..=k_max].iter().copied().fold(f64::INFINITY, f64::min);
    let t_mid = 0.5 * (time[k_max] + time[k_max + 1]);
    let p_mid = 0.5 * (pressure[k_max] + pressure[k_max + 1]);
    Some(t_mid - (p_mid - p_min) / slope_max)
}

/// Simulates the network as given (no further scaling) driven by a
/// half-sine inflow.
pub fn simulate(net: &ArterialNetwork, co: f64, hr: f64, cfg: &SolverConfig) -> Result<HemoRecord> {
    let mut params = PatientParams::with_inflow(co, hr);
    params.cfpwv = crate::hemonet::compute_cfpwv(net, 1.0)?;
    Ok(simulate_with_diagnostics(net, params, cfg)?.0)
}

/// Scales `reference` by the patient's multipliers and simulates it.
pub fn simulate_patient(reference: &ArterialNetwork, params: &PatientParams, cfg: &SolverConfig) -> Result<HemoRecord> {
    let net = reference.scale(&params.scale_set())?;
    Ok(simulate_with_diagnostics(&net, params.clone(), cfg)?.0)
}

/// Like [`simulate`] but also returns final-cycle volume bookkeeping
/// (`None` when the solver failed).
pub fn simulate_with_diagnostics(
    net: &ArterialNetwork,
    params: PatientParams,
    cfg: &SolverConfig,
) -> Result<(HemoRecord, Option<Diagnostics>)> {
    cfg.validate()?;
    let (co, hr) = (params.co, params.hr);
    if !(co.is_finite() && co > 0.0) {
        return Err(Error::InvalidArgument(format!("co must be > 0, got {co}")));
    }
    if !(hr.is_finite() && hr > 0.0) {
        return Err(Error::InvalidArgument(format!("hr must be > 0, got {hr}")));
    }

    let mut solver = PulseSolver::new(net, cfg)?;
    let period = 60.0 / hr;
    let mut steps = (period / solver.dt_estimate(DT_PRESSURE_BOUND, DT_SPEED_BOUND)).ceil() as usize;
    let mut attempt = 0;
    loop {
        match run_cycles(net, &mut solver, co, hr, steps, cfg) {
            Ok(run) => {
                let features = SiteFeatures {
                    brachial: features_of(&run.time, &run.pressure[site_slot(Site::Brachial)])?,
                    radial: features_of(&run.time, &run.pressure[site_slot(Site::Radial)])?,
                    aortic_root: features_of(&run.time, &run.pressure[site_slot(Site::AorticRoot)])?,
                };
                let series = cfg.record_series.then(|| {
                    Site::ALL
                        .iter()
                        .enumerate()
                        .map(|(k, &site)| SiteSeries {
                            site,
                            time: run.time.clone(),
                            pressure: run.pressure[k].clone(),
                            flow: run.flow[k].clone(),
                        })
                        .collect()
                });
                let record = HemoRecord {
                    params,
                    features: Some(features),
                    cycles_to_converge: run.cycles,
                    converged: run.converged,
                    failure: None,
                    series,
                };
                return Ok((record, Some(run.diagnostics)));
            }
            Err(Error::CflViolation { .. }) if attempt < CFL_RETRIES => {
                attempt += 1;
                steps = (steps as f64 / CFL_SHRINK).ceil() as usize;
                solver = PulseSolver::new(net, cfg)?;
            }
            Err(e) if e.is_numeric() => {
                log::warn!("simulation failed (co {co}, hr {hr}): {e}");
                let record = HemoRecord {
                    params,
                    features: None,
                    cycles_to_converge: 0,
                    converged: false,
                    failure: Some(e.to_string()),
                    series: None,
                };
                return Ok((record, None));
            }
            Err(e) => return Err(e),
        }
    }
}

fn site_slot(site: Site) -> usize {
    Site::ALL.iter().position(|&s| s == site).expect("site listed")
}

struct CycleRun {
    time: Vec<f64>,
    pressure: Vec<Vec<f64>>,
    flow: Vec<Vec<f64>>,
    cycles: usize,
    converged: bool,
    diagnostics: Diagnostics,
}

fn run_cycles(
    net: &ArterialNetwork,
    solver: &mut PulseSolver,
    co: f64,
    hr: f64,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<CycleRun> {
    let inflow = HalfSineInflow::new(co, hr, cfg.systolic_fraction);
    let period = inflow.period;
    let dt = period / steps as f64;
    solver.set_inflow(move |t| inflow.flow(t));
    solver.set_uniform_state(INITIAL_PRESSURE, 0.0);

    let positions: Vec<_> = Site::ALL.iter().map(|&s| net.site(s)).collect();
    let n_sites = positions.len();
    let mut current = vec![vec![0.0; steps + 1]; n_sites];
    let mut current_flow = vec![vec![0.0; steps + 1]; n_sites];
    let mut previous = current.clone();
    let mut p = vec![0.0; n_sites];
    let mut q = vec![0.0; n_sites];

    let mut cycles = 0;
    let mut converged = false;
    while cycles < cfg.max_cycles {
        cycles += 1;
        solver.reset_volumes();
        solver.sample(&positions, &mut p, &mut q);
        for k in 0..n_sites {
            current[k][0] = p[k];
            current_flow[k][0] = q[k];
        }
        for step in 1..=steps {
            solver.advance_step(dt)?;
            solver.sample(&positions, &mut p, &mut q);
            for k in 0..n_sites {
                current[k][step] = p[k];
                current_flow[k][step] = q[k];
            }
        }
        if cycles > 1 {
            let change = current
                .iter()
                .zip(&previous)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            if change < cfg.convergence_tol_mmhg {
                converged = true;
                break;
            }
        }
        std::mem::swap(&mut current, &mut previous);
    }
    if !converged {
        // the freshest cycle was swapped into `previous`
        std::mem::swap(&mut current, &mut previous);
    }

    let time = (0..=steps).map(|k| k as f64 * dt).collect();
    Ok(CycleRun {
        time,
        pressure: current,
        flow: current_flow,
        cycles,
        converged,
        diagnostics: Diagnostics {
            mean_inflow: solver.inflow_volume() / period,
            mean_outflow: solver.outflow_volume() / period,
            dt,
            steps_per_cycle: steps,
        },
    })
}

//! Two-step Lax–Wendroff (Richtmyer) finite-volume solver for the 1-D
//! area–flow system
//!
//! ```text
//! ∂A/∂t + ∂Q/∂x = 0
//! ∂Q/∂t + ∂(Q²/A + B)/∂x = -K_R Q/A + ((A/A0)² - 1)/(2ρd) · dA0/dx
//! ```
//!
//! with the linear tube law `A = A0 (1 + d (P - P_ref))`, so that
//! `B = (A² - A0²)/(2ρ A0 d)` and `c² = A/(ρ A0 d)`. Segment ends are closed
//! with the Riemann invariants `W± = u ± 2c` traced back over half a step.
//!
//! Everything in here is CGS: cm, s, g, dyn/cm².

use crate::error::{Error, Result};
use crate::hemonet::{ArterialNetwork, SitePosition};
use crate::units;

use super::windkessel::advance_compliance;
use super::{JunctionModel, SolverConfig};

/// Steady-profile friction closure `K_R = 2(ζ+2)πν` with ζ = 9.
const PROFILE_ZETA: f64 = 9.0;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy)]
struct Physics {
    rho: f64,
    kr: f64,
    p_ref: f64,
    junction: JunctionModel,
}

#[derive(Debug, Clone)]
struct Vessel {
    id: i64,
    n: usize,
    length: f64,
    dx: f64,
    /// Distensibility, cm²/dyn.
    d: f64,
    a0: Vec<f64>,
    da0: Vec<f64>,
    a0_face: Vec<f64>,
    da0_face: Vec<f64>,
    a: Vec<f64>,
    q: Vec<f64>,
    flux_a: Vec<f64>,
    flux_q: Vec<f64>,
    src_q: Vec<f64>,
    /// Face states at the half step, `n + 1` entries.
    half_a: Vec<f64>,
    half_q: Vec<f64>,
}

impl Vessel {
    fn pressure(&self, a: f64, a0: f64, phys: &Physics) -> f64 {
        phys.p_ref + (a / a0 - 1.0) / self.d
    }

    fn wave_speed(&self, a: f64, a0: f64, phys: &Physics) -> f64 {
        (a / (phys.rho * a0 * self.d)).sqrt()
    }

    fn pressure_flux(&self, a: f64, a0: f64, phys: &Physics) -> f64 {
        (a * a - a0 * a0) / (2.0 * phys.rho * a0 * self.d)
    }

    fn source(&self, a: f64, q: f64, a0: f64, da0: f64, phys: &Physics) -> f64 {
        let ratio = a / a0;
        -phys.kr * q / a + (ratio * ratio - 1.0) / (2.0 * phys.rho * self.d) * da0
    }

    /// `k = ρ A0 d` at a face, so that `A = k c²`.
    fn k_face(&self, face: usize, phys: &Physics) -> f64 {
        phys.rho * self.a0_face[face] * self.d
    }

    /// Outgoing forward invariant `u + 2c` at the distal face after `tau`.
    fn outgoing_distal(&self, tau: f64, phys: &Physics) -> f64 {
        let n = self.n;
        let w = |i: usize| {
            let c = self.wave_speed(self.a[i], self.a0[i], phys);
            (self.q[i] / self.a[i] + 2.0 * c, c)
        };
        let (w1, c1) = w(n - 1);
        let (w0, _) = w(n - 2);
        let speed = self.q[n - 1] / self.a[n - 1] + c1;
        w1 + (w1 - w0) * (0.5 - speed * tau / self.dx)
    }

    /// Outgoing backward invariant `u - 2c` at the proximal face after `tau`.
    fn outgoing_proximal(&self, tau: f64, phys: &Physics) -> f64 {
        let w = |i: usize| {
            let c = self.wave_speed(self.a[i], self.a0[i], phys);
            (self.q[i] / self.a[i] - 2.0 * c, c)
        };
        let (w0, c0) = w(0);
        let (w1, _) = w(1);
        let speed = c0 - self.q[0] / self.a[0];
        w0 + (w1 - w0) * (speed * tau / self.dx - 0.5)
    }

    fn interp(&self, values: &[f64], s: f64) -> f64 {
        let f = (s * self.length / self.dx - 0.5).clamp(0.0, (self.n - 1) as f64);
        let i = (f.floor() as usize).min(self.n - 2);
        let w = f - i as f64;
        values[i] * (1.0 - w) + values[i + 1] * w
    }
}

#[derive(Debug, Clone)]
struct Junction {
    parent: usize,
    children: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Terminal {
    vessel: usize,
    r1: f64,
    r2: f64,
    ct: f64,
    /// Compliance pressure, dyn/cm².
    pc: f64,
}

type InflowFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Solver state for one network. Independent instances share nothing.
pub struct PulseSolver {
    vessels: Vec<Vessel>,
    junctions: Vec<Junction>,
    terminals: Vec<Terminal>,
    root: usize,
    phys: Physics,
    cfl: f64,
    time: f64,
    inflow: InflowFn,
    inflow_volume: f64,
    outflow_volume: f64,
}

impl std::fmt::Debug for PulseSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PulseSolver")
            .field("vessels", &self.vessels.len())
            .field("time", &self.time)
            .finish()
    }
}

impl PulseSolver {
    /// Builds the discretisation with zero inflow and the network at rest
    /// at the reference pressure.
    pub fn new(net: &ArterialNetwork, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let c = net.constants();
        let phys = Physics {
            rho: c.rho,
            kr: 2.0 * (PROFILE_ZETA + 2.0) * std::f64::consts::PI * units::viscosity_to_cgs(c.mu) / c.rho,
            p_ref: units::mmhg_to_dyn(c.p_ref),
            junction: cfg.junction_model,
        };

        let vessels = net
            .segments()
            .iter()
            .map(|seg| {
                let n = ((seg.length_cm * cfg.cells_per_cm).round() as usize).max(4);
                let dx = seg.length_cm / n as f64;
                let slope = (seg.d_dist_cm - seg.d_prox_cm) / seg.length_cm;
                let area = |x: f64| seg.area_at(x / seg.length_cm);
                let darea = |x: f64| std::f64::consts::PI / 2.0 * seg.diameter_at(x / seg.length_cm) * slope;
                let centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
                let faces: Vec<f64> = (0..=n).map(|i| i as f64 * dx).collect();
                let a0: Vec<f64> = centers.iter().map(|&x| area(x)).collect();
                Vessel {
                    id: seg.id,
                    n,
                    length: seg.length_cm,
                    dx,
                    d: units::distensibility_to_cgs(seg.distensibility_per_mmhg),
                    da0: centers.iter().map(|&x| darea(x)).collect(),
                    a0_face: faces.iter().map(|&x| area(x)).collect(),
                    da0_face: faces.iter().map(|&x| darea(x)).collect(),
                    a: a0.clone(),
                    q: vec![0.0; n],
                    a0,
                    flux_a: vec![0.0; n],
                    flux_q: vec![0.0; n],
                    src_q: vec![0.0; n],
                    half_a: vec![0.0; n + 1],
                    half_q: vec![0.0; n + 1],
                }
            })
            .collect();

        let mut junctions = Vec::new();
        let mut terminals = Vec::new();
        for i in 0..net.segments().len() {
            let children = net.children_indices(i);
            if children.is_empty() {
                let t = net.terminal_at(i).expect("validated network terminates leaves");
                terminals.push(Terminal {
                    vessel: i,
                    r1: units::resistance_to_cgs(t.r1),
                    r2: units::resistance_to_cgs(t.r2),
                    ct: units::compliance_to_cgs(t.ct),
                    pc: phys.p_ref,
                });
            } else {
                junctions.push(Junction { parent: i, children });
            }
        }

        Ok(PulseSolver {
            vessels,
            junctions,
            terminals,
            root: net.root_index(),
            phys,
            cfl: cfg.cfl_number,
            time: 0.0,
            inflow: Box::new(|_| 0.0),
            inflow_volume: 0.0,
            outflow_volume: 0.0,
        })
    }

    /// Prescribed inlet flow (mL/s) as a function of time (s).
    pub fn set_inflow(&mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) {
        self.inflow = Box::new(f);
    }

    /// Uniform pressure (mmHg) and flow everywhere, compliances included.
    pub fn set_uniform_state(&mut self, pressure_mmhg: f64, flow: f64) {
        let p = units::mmhg_to_dyn(pressure_mmhg);
        for v in &mut self.vessels {
            for i in 0..v.n {
                v.a[i] = v.a0[i] * (1.0 + v.d * (p - self.phys.p_ref));
                v.q[i] = flow;
            }
        }
        for t in &mut self.terminals {
            t.pc = p;
        }
    }

    /// Sets the pressure in one segment from a profile over x (cm).
    pub fn set_pressure_profile(&mut self, segment_id: i64, profile: impl Fn(f64) -> f64) {
        let phys = self.phys;
        if let Some(v) = self.vessels.iter_mut().find(|v| v.id == segment_id) {
            for i in 0..v.n {
                let x = (i as f64 + 0.5) * v.dx;
                let p = units::mmhg_to_dyn(profile(x));
                v.a[i] = v.a0[i] * (1.0 + v.d * (p - phys.p_ref));
            }
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn reset_volumes(&mut self) {
        self.inflow_volume = 0.0;
        self.outflow_volume = 0.0;
    }

    /// Integrated inflow volume (mL) since the last reset.
    pub fn inflow_volume(&self) -> f64 {
        self.inflow_volume
    }

    /// Integrated volume (mL) leaving the 1-D domain into the terminals.
    pub fn outflow_volume(&self) -> f64 {
        self.outflow_volume
    }

    /// Total blood volume held in the 1-D segments (mL).
    pub fn stored_volume(&self) -> f64 {
        self.vessels
            .iter()
            .map(|v| v.a.iter().sum::<f64>() * v.dx)
            .sum()
    }

    /// Cell-centre pressures (mmHg) of a segment.
    pub fn pressures(&self, segment_id: i64) -> Option<Vec<f64>> {
        let phys = &self.phys;
        self.vessels.iter().find(|v| v.id == segment_id).map(|v| {
            (0..v.n)
                .map(|i| units::dyn_to_mmhg(v.pressure(v.a[i], v.a0[i], phys)))
                .collect()
        })
    }

    /// Cell-centre flows (mL/s) of a segment.
    pub fn flows(&self, segment_id: i64) -> Option<Vec<f64>> {
        self.vessels
            .iter()
            .find(|v| v.id == segment_id)
            .map(|v| v.q.clone())
    }

    /// Cell size (cm) of a segment.
    pub fn cell_size(&self, segment_id: i64) -> Option<f64> {
        self.vessels.iter().find(|v| v.id == segment_id).map(|v| v.dx)
    }

    fn vessel_index(&self, segment_id: i64) -> usize {
        self.vessels
            .iter()
            .position(|v| v.id == segment_id)
            .expect("site segment exists")
    }

    /// Pressure (mmHg) at a site, interpolated between cell centres.
    pub fn pressure_at(&self, pos: SitePosition) -> f64 {
        let v = &self.vessels[self.vessel_index(pos.segment_id)];
        let phys = &self.phys;
        let f = (pos.s * v.length / v.dx - 0.5).clamp(0.0, (v.n - 1) as f64);
        let i = (f.floor() as usize).min(v.n - 2);
        let w = f - i as f64;
        let p = |j: usize| v.pressure(v.a[j], v.a0[j], phys);
        units::dyn_to_mmhg(p(i) * (1.0 - w) + p(i + 1) * w)
    }

    /// Flow (mL/s) at a site.
    pub fn flow_at(&self, pos: SitePosition) -> f64 {
        let v = &self.vessels[self.vessel_index(pos.segment_id)];
        v.interp(&v.q, pos.s)
    }

    /// Largest stable step `cfl · min Δx/(|u| + c)` for the current state.
    pub fn stable_dt(&self) -> f64 {
        let mut rate: f64 = 0.0;
        for v in &self.vessels {
            for i in 0..v.n {
                let c = v.wave_speed(v.a[i], v.a0[i], &self.phys);
                rate = rate.max(((v.q[i] / v.a[i]).abs() + c) / v.dx);
            }
        }
        self.cfl / rate
    }

    /// Conservative estimate of a stable step for pressures up to
    /// `p_max_mmhg` and speeds up to `u_max` cm/s.
    pub fn dt_estimate(&self, p_max_mmhg: f64, u_max: f64) -> f64 {
        let p = units::mmhg_to_dyn(p_max_mmhg);
        let mut rate: f64 = 0.0;
        for v in &self.vessels {
            let stretch = (1.0 + v.d * (p - self.phys.p_ref)).max(1.0);
            let c = (stretch / (self.phys.rho * v.d)).sqrt();
            rate = rate.max((u_max + c) / v.dx);
        }
        self.cfl / rate
    }

    /// Advances the whole network by `dt` seconds.
    pub fn advance_step(&mut self, dt: f64) -> Result<()> {
        let phys = self.phys;
        let tau = 0.5 * dt;

        // cell fluxes, sources and the CFL check
        for v in &mut self.vessels {
            let mut rate: f64 = 0.0;
            for i in 0..v.n {
                let (a, q, a0) = (v.a[i], v.q[i], v.a0[i]);
                v.flux_a[i] = q;
                v.flux_q[i] = q * q / a + v.pressure_flux(a, a0, &phys);
                v.src_q[i] = v.source(a, q, a0, v.da0[i], &phys);
                rate = rate.max((q / a).abs() + v.wave_speed(a, a0, &phys));
            }
            let limit = self.cfl * v.dx / rate;
            if dt > limit * (1.0 + 1e-12) || !limit.is_finite() {
                return Err(Error::CflViolation {
                    dt,
                    limit,
                    segment: v.id,
                });
            }
            // predictor on interior faces
            let r = tau / v.dx;
            for i in 0..v.n - 1 {
                v.half_a[i + 1] = 0.5 * (v.a[i] + v.a[i + 1]) - r * (v.flux_a[i + 1] - v.flux_a[i]);
                v.half_q[i + 1] = 0.5 * (v.q[i] + v.q[i + 1]) - r * (v.flux_q[i + 1] - v.flux_q[i])
                    + 0.5 * tau * (v.src_q[i] + v.src_q[i + 1]);
            }
        }

        // boundary faces at t + dt/2
        let q_in = (self.inflow)(self.time + tau);
        self.inlet_state(q_in, tau)?;
        for j in 0..self.junctions.len() {
            self.junction_state(j, tau)?;
        }
        for t in 0..self.terminals.len() {
            self.terminal_state(t, tau)?;
        }

        // corrector
        for v in &mut self.vessels {
            let r = dt / v.dx;
            let n = v.n;
            // reuse the cell flux buffers for face fluxes (n + 1 needed)
            let mut prev_fa = v.half_q[0];
            let mut prev_fq = v.half_q[0] * v.half_q[0] / v.half_a[0]
                + v.pressure_flux(v.half_a[0], v.a0_face[0], &phys);
            let mut prev_s = v.source(v.half_a[0], v.half_q[0], v.a0_face[0], v.da0_face[0], &phys);
            for i in 0..n {
                let (ha, hq) = (v.half_a[i + 1], v.half_q[i + 1]);
                let fa = hq;
                let fq = hq * hq / ha + v.pressure_flux(ha, v.a0_face[i + 1], &phys);
                let s = v.source(ha, hq, v.a0_face[i + 1], v.da0_face[i + 1], &phys);
                v.a[i] -= r * (fa - prev_fa);
                v.q[i] += -r * (fq - prev_fq) + 0.5 * dt * (s + prev_s);
                if !(v.a[i] > 0.0) || !v.q[i].is_finite() {
                    return Err(Error::BlowUp {
                        segment: v.id,
                        cell: i,
                        reason: if v.a[i].is_nan() || !v.q[i].is_finite() {
                            "non-finite state".into()
                        } else {
                            "negative area".into()
                        },
                    });
                }
                prev_fa = fa;
                prev_fq = fq;
                prev_s = s;
            }
        }

        // terminal compliances see the face flow of the half step
        for t in &mut self.terminals {
            let v = &self.vessels[t.vessel];
            let q = v.half_q[v.n];
            t.pc = advance_compliance(t.r2, t.ct, t.pc, q, dt);
            self.outflow_volume += q * dt;
        }
        self.inflow_volume += q_in * dt;
        self.time += dt;
        Ok(())
    }

    fn inlet_state(&mut self, q_in: f64, tau: f64) -> Result<()> {
        let phys = self.phys;
        let v = &mut self.vessels[self.root];
        let w2 = v.outgoing_proximal(tau, &phys);
        let k = v.k_face(0, &phys);
        // k c² (W2 + 2c) = Q
        let mut c = v.wave_speed(v.a[0], v.a0[0], &phys);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let f = k * c * c * (w2 + 2.0 * c) - q_in;
            let df = 2.0 * k * c * (w2 + 3.0 * c);
            let step = f / df;
            c -= step;
            if !(c > 0.0) {
                break;
            }
            if step.abs() <= NEWTON_TOL * c {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::BlowUp {
                segment: v.id,
                cell: 0,
                reason: "inlet characteristic solve failed".into(),
            });
        }
        v.half_a[0] = k * c * c;
        v.half_q[0] = q_in;
        Ok(())
    }

    fn terminal_state(&mut self, t: usize, tau: f64) -> Result<()> {
        let phys = self.phys;
        let term = &self.terminals[t];
        let (r1, pc) = (term.r1, term.pc);
        let v = &mut self.vessels[term.vessel];
        let n = v.n;
        let w1 = v.outgoing_distal(tau, &phys);
        let k = v.k_face(n, &phys);
        // P(c) - Pc = R1 Q(c), P = p_ref + ρc² - 1/d, Q = k c² (W1 - 2c)
        let mut c = v.wave_speed(v.a[n - 1], v.a0[n - 1], &phys);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let u = w1 - 2.0 * c;
            let g = phys.p_ref + phys.rho * c * c - 1.0 / v.d - pc - r1 * k * c * c * u;
            let dg = 2.0 * phys.rho * c - r1 * k * (2.0 * c * w1 - 6.0 * c * c);
            let step = g / dg;
            c -= step;
            if !(c > 0.0) {
                break;
            }
            if step.abs() <= NEWTON_TOL * c {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::BlowUp {
                segment: v.id,
                cell: n - 1,
                reason: "terminal characteristic solve failed".into(),
            });
        }
        let a = k * c * c;
        v.half_a[n] = a;
        v.half_q[n] = a * (w1 - 2.0 * c);
        Ok(())
    }

    fn junction_state(&mut self, j: usize, tau: f64) -> Result<()> {
        let phys = self.phys;
        let total = phys.junction == JunctionModel::TotalPressure;
        let junction = &self.junctions[j];
        let parent = &self.vessels[junction.parent];
        let pn = parent.n;
        let w_p = parent.outgoing_distal(tau, &phys);
        let k_p = parent.k_face(pn, &phys);
        let d_p = parent.d;
        let mut c_p = parent.wave_speed(parent.a[pn - 1], parent.a0[pn - 1], &phys);

        let m = junction.children.len();
        let mut w_c = [0.0; 2];
        let mut k_c = [0.0; 2];
        let mut d_c = [0.0; 2];
        let mut c_c = [0.0; 2];
        for (slot, &ci) in junction.children.iter().enumerate() {
            let child = &self.vessels[ci];
            w_c[slot] = child.outgoing_proximal(tau, &phys);
            k_c[slot] = child.k_face(0, &phys);
            d_c[slot] = child.d;
            c_c[slot] = child.wave_speed(child.a[0], child.a0[0], &phys);
        }

        let rho = phys.rho;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let u_p = w_p - 2.0 * c_p;
            let q_p = k_p * c_p * c_p * u_p;
            let dq_p = k_p * (2.0 * c_p * w_p - 6.0 * c_p * c_p);
            let mut h_p = rho * c_p * c_p - 1.0 / d_p;
            let mut dh_p = 2.0 * rho * c_p;
            if total {
                h_p += 0.5 * rho * u_p * u_p;
                dh_p -= 2.0 * rho * u_p;
            }
            let mut mass = q_p;
            let mut rhs0 = 0.0;
            let mut diag = dq_p;
            let mut res = [0.0; 2];
            let mut dq_c = [0.0; 2];
            let mut dh_c = [0.0; 2];
            for s in 0..m {
                let c = c_c[s];
                let u = w_c[s] + 2.0 * c;
                mass -= k_c[s] * c * c * u;
                dq_c[s] = k_c[s] * (2.0 * c * w_c[s] + 6.0 * c * c);
                let mut h = rho * c * c - 1.0 / d_c[s];
                dh_c[s] = 2.0 * rho * c;
                if total {
                    h += 0.5 * rho * u * u;
                    dh_c[s] += 2.0 * rho * u;
                }
                res[s] = h_p - h;
                // row s: dh_p δp - dh_c δs = -res  =>  δs = (res + dh_p δp) / dh_c
                diag -= dq_c[s] * dh_p / dh_c[s];
                rhs0 += dq_c[s] * res[s] / dh_c[s];
            }
            // row 0: dq_p δp - Σ dq_c δs = -mass
            let delta_p = (-mass + rhs0) / diag;
            c_p += delta_p;
            let mut worst = delta_p.abs() / c_p.abs();
            for s in 0..m {
                let delta = (res[s] + dh_p * delta_p) / dh_c[s];
                c_c[s] += delta;
                worst = worst.max(delta.abs() / c_c[s].abs());
            }
            if !(c_p > 0.0) || c_c[..m].iter().any(|c| !(*c > 0.0)) {
                break;
            }
            if worst <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::JunctionDiverged {
                segment: self.vessels[junction.parent].id,
            });
        }

        let children = junction.children.clone();
        let parent = &mut self.vessels[junction.parent];
        let a_p = k_p * c_p * c_p;
        parent.half_a[pn] = a_p;
        parent.half_q[pn] = a_p * (w_p - 2.0 * c_p);
        for (s, ci) in children.into_iter().enumerate() {
            let a = k_c[s] * c_c[s] * c_c[s];
            let child = &mut self.vessels[ci];
            child.half_a[0] = a;
            child.half_q[0] = a * (w_c[s] + 2.0 * c_c[s]);
        }
        Ok(())
    }

    /// Face flows at the last junction solve: leaving the parent, entering each child.
    #[cfg(test)]
    fn junction_face_flows(&self, parent_id: i64) -> (f64, Vec<f64>) {
        let j = self
            .junctions
            .iter()
            .find(|j| self.vessels[j.parent].id == parent_id)
            .expect("junction exists");
        let parent = &self.vessels[j.parent];
        let children = j.children.iter().map(|&c| self.vessels[c].half_q[0]).collect();
        (parent.half_q[parent.half_q.len() - 1], children)
    }

    /// Site pressure snapshot for every position (mmHg).
    pub(crate) fn sample(&self, positions: &[SitePosition], pressures: &mut [f64], flows: &mut [f64]) {
        for (k, pos) in positions.iter().enumerate() {
            pressures[k] = self.pressure_at(*pos);
            flows[k] = self.flow_at(*pos);
        }
    }
}

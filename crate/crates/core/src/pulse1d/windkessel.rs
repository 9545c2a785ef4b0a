//! Three-element Windkessel outlet.
//!
//! Flow `Q` enters through the proximal resistance `R1` into a compliance
//! `C_T` that drains through `R2` to zero venous pressure. Eliminating the
//! compliance pressure `P_c` gives
//!
//! ```text
//! dQ/dt = (1/R1) dP/dt + P/(R1 R2 C_T) - (1 + R1/R2) Q/(R1 C_T)
//! ```
//!
//! The state advanced in time is `P_c`; for a flow held constant over a step
//! its ODE `C_T dP_c/dt = Q - P_c/R2` is integrated exactly, which is stable
//! for any step size.

use crate::hemonet::WindkesselTerminal;

/// Outflow pressure behind R2, mmHg.
pub const VENOUS_PRESSURE: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindkesselState {
    /// Pressure across the compliance, mmHg.
    pub pc: f64,
}

impl WindkesselState {
    /// Inlet pressure `P = P_c + R1·Q` (mmHg) for inflow `q` (mL/s).
    pub fn inlet_pressure(&self, terminal: &WindkesselTerminal, q: f64) -> f64 {
        self.pc + terminal.r1 * q
    }
}

/// Advances the compliance pressure by `dt` with inflow `q` held constant.
pub fn advance_compliance(r2: f64, ct: f64, pc: f64, q: f64, dt: f64) -> f64 {
    let target = VENOUS_PRESSURE + r2 * q;
    let decay = (-dt / (r2 * ct)).exp();
    target + (pc - target) * decay
}

/// One step of the terminal driven by inflow `q` over `dt`.
///
/// `p` is the current inlet pressure, from which the compliance pressure is
/// recovered. Returns the inlet pressure and flow at the end of the step.
pub fn windkessel_update(terminal: &WindkesselTerminal, p: f64, q: f64, dt: f64) -> (f64, f64) {
    let pc = p - terminal.r1 * q;
    let pc_next = advance_compliance(terminal.r2, terminal.ct, pc, q, dt);
    (pc_next + terminal.r1 * q, q)
}

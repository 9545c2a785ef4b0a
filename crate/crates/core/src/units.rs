//! Unit conversions between clinical units and the solver's CGS system.

/// 1 mmHg in dyn/cm².
pub const MMHG: f64 = 1333.223_874;

pub fn mmhg_to_dyn(p: f64) -> f64 {
    p * MMHG
}

pub fn dyn_to_mmhg(p: f64) -> f64 {
    p / MMHG
}

/// Resistance mmHg·s/mL -> dyn·s/cm⁵.
pub fn resistance_to_cgs(r: f64) -> f64 {
    r * MMHG
}

/// Compliance mL/mmHg -> cm⁵/dyn.
pub fn compliance_to_cgs(c: f64) -> f64 {
    c / MMHG
}

/// Distensibility 1/mmHg -> cm²/dyn.
pub fn distensibility_to_cgs(d: f64) -> f64 {
    d / MMHG
}

/// Viscosity mmHg·s -> poise (g/(cm·s)).
pub fn viscosity_to_cgs(mu: f64) -> f64 {
    mu * MMHG
}

/// L/min -> mL/s.
pub fn lpm_to_mls(q: f64) -> f64 {
    q * 1000.0 / 60.0
}

pub fn cm_per_s_to_m_per_s(v: f64) -> f64 {
    v / 100.0
}

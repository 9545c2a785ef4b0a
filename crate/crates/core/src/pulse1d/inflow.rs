//! Prescribed aortic inflow: a half-sine ejection followed by zero diastolic flow.

use std::f64::consts::PI;

use crate::units;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSineInflow {
    /// Cardiac period, s.
    pub period: f64,
    /// Ejection duration, s.
    pub ejection: f64,
    /// Peak flow, mL/s.
    pub peak: f64,
}

impl HalfSineInflow {
    pub fn new(co_lpm: f64, hr_bpm: f64, systolic_fraction: f64) -> Self {
        let period = 60.0 / hr_bpm;
        let ejection = systolic_fraction * period;
        let stroke_volume = units::lpm_to_mls(co_lpm) * period;
        HalfSineInflow {
            period,
            ejection,
            peak: PI * stroke_volume / (2.0 * ejection),
        }
    }

    /// Stroke volume in mL.
    pub fn stroke_volume(&self) -> f64 {
        2.0 * self.peak * self.ejection / PI
    }

    /// Flow at time `t` (mL/s); `t` is wrapped into one period.
    pub fn flow(&self, t: f64) -> f64 {
        let t = t.rem_euclid(self.period);
        if t < self.ejection {
            self.peak * (PI * t / self.ejection).sin()
        } else {
            0.0
        }
    }
}

/// Aortic inflow in mL/s at time `t` within the cycle.
pub fn inflow_waveform(co_lpm: f64, hr_bpm: f64, t: f64, systolic_fraction: f64) -> f64 {
    HalfSineInflow::new(co_lpm, hr_bpm, systolic_fraction).flow(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn stroke_volume_integrates_exactly() {
        let inflow = HalfSineInflow::new(5.1, 63.0, 0.35);
        let sv: f64 = 5.1 * 1000.0 / 60.0 * 60.0 / 63.0;
        assert!((sv - 80.95).abs() < 5e-3);
        // the waveform is smooth on each piece; integrate piecewise
        let systole = simpson(|t| inflow.flow(t), 0.0, inflow.ejection, 20_000);
        let diastole = simpson(|t| inflow.flow(t), inflow.ejection, inflow.period * (1.0 - 1e-12), 2_000);
        assert!((systole + diastole - sv).abs() < 1e-9, "{}", systole + diastole - sv);
        assert!((inflow.stroke_volume() - sv).abs() < 1e-9);
    }

    #[test]
    fn zero_in_diastole() {
        let inflow = HalfSineInflow::new(5.1, 63.0, 0.35);
        assert_eq!(inflow.flow(0.5 * (inflow.ejection + inflow.period)), 0.0);
        assert_eq!(inflow_waveform(5.1, 63.0, 0.9, 0.35), 0.0);
    }

    #[test]
    fn peak_at_mid_ejection() {
        let inflow = HalfSineInflow::new(5.1, 63.0, 0.35);
        let sv = inflow.stroke_volume();
        let expected = PI * sv / (2.0 * inflow.ejection);
        assert!((inflow.flow(inflow.ejection / 2.0) - expected).abs() < 1e-9);
    }
}

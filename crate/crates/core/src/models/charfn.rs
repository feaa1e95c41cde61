use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Family, InterarrivalModel};
use crate::quad::GaussLegendre;

const MAX_PANELS: usize = 200_000;

impl InterarrivalModel {
    /// `K(f) = ∫ k(t) e^{i2πft} dt` of the unit-mean law.
    pub fn characteristic_function(&self, f: f64) -> Complex64 {
        if f == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let w = 2.0 * PI * f;
        let iw = Complex64::new(0.0, w);
        match self.family {
            Family::Exponential => (Complex64::new(1.0, 0.0) - iw).inv(),
            Family::Gamma { shape } => gamma_cf(shape, w),
            Family::Erlang { shape } => gamma_cf(shape as f64, w),
            Family::Uniform => {
                // e^{iω} sin(ω)/ω for the law on [0, 2]
                Complex64::from_polar(w.sin() / w, w)
            }
            Family::ShiftedExponential { offset: a } => {
                Complex64::from_polar(1.0, w * a) / (Complex64::new(1.0, 0.0) - iw * (1.0 - a))
            }
            Family::Weibull { .. } | Family::Pareto { .. } | Family::Lognormal { .. } => self.numeric_cf(f),
        }
    }

    /// `K(f) = 1 + iω ∫₀^∞ F̄(t) e^{iωt} dt`, integrated panel-wise with a
    /// one-term integration-by-parts tail.
    pub(super) fn numeric_cf(&self, f: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        let rule = GaussLegendre::g20();
        let t_end = self.quantile(1.0 - 1e-13);
        let quarter_period = 0.25 / f.abs();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut t = 0.0;
        let mut panels = 0;
        while t < t_end && panels < MAX_PANELS {
            let len = quarter_period.min((0.25 * t).max(1e-6));
            let b = (t + len).min(t_end);
            let re = rule.integrate(t, b, |s| self.survival(s) * (w * s).cos());
            let im = rule.integrate(t, b, |s| self.survival(s) * (w * s).sin());
            acc += Complex64::new(re, im);
            t = b;
            panels += 1;
        }
        // ∫_T^∞ F̄ e^{iωt} ≈ -F̄(T) e^{iωT} / (iω)
        let iw = Complex64::new(0.0, w);
        acc -= Complex64::from_polar(self.survival(t), w * t) / iw;
        Complex64::new(1.0, 0.0) + iw * acc
    }
}

fn gamma_cf(shape: f64, w: f64) -> Complex64 {
    (Complex64::new(1.0, -w / shape)).powf(-shape)
}

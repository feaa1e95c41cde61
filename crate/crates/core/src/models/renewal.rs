//! Renewal function `m(t) = E[N(t)]` of the unit-rate process.
//!
//! Closed forms are used for the exponential, Erlang, uniform and (through a
//! truncated alternating series) Weibull laws. Every other family goes
//! through the renewal equation `m = F + m * dF`, discretised with a
//! product-trapezoid rule: on each grid cell `m(t - s)` is interpolated
//! linearly in `s` and integrated exactly against `dF`, which only needs
//! the CDF and the partial mean. This keeps the scheme second order even
//! when the density is unbounded at the origin (Gamma and Weibull with
//! shape below one).

use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use super::{Family, InterarrivalModel};
use crate::error::{Error, Result};
use crate::quad;

/// Uniform closed form is evaluated up to this horizon; beyond it the
/// alternating sum loses more than ~8 digits and the numeric route is used.
pub const UNIFORM_CLOSED_FORM_LIMIT: f64 = 40.0;

const WEIBULL_MAX_TERMS: usize = 200;
const WEIBULL_TERM_TOL: f64 = 1e-12;
const WEIBULL_MAX_GROWTH_RUN: usize = 3;
/// Terms larger than this cost more than ~10 significant digits to cancellation.
const WEIBULL_MAX_TERM_MAGNITUDE: f64 = 1e5;

/// Number of grid intervals used when a renewal integral over `[0, δ]` has
/// to be computed numerically.
pub const INTEGRAL_GRID_INTERVALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenewalSource {
    ClosedForm,
    NumericRenewalEquation,
    TruncatedSeries,
}

/// How to obtain `m(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenewalMethod {
    /// Closed form when available, numeric otherwise (including after a
    /// Weibull series divergence).
    #[default]
    Auto,
    /// Closed form when the family has one; a Weibull series divergence is
    /// reported as an error instead of falling back.
    ClosedForm,
    /// Always solve the renewal equation.
    Numeric,
}

/// `m(t)` sampled on the uniform grid `0, h, 2h, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalFunctionTable {
    grid_step: f64,
    values: Vec<f64>,
    source: RenewalSource,
}

impl RenewalFunctionTable {
    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> RenewalSource {
        self.source
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.grid_step
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &m)| (i as f64 * self.grid_step, m))
    }

    /// Linear interpolation, clamped to the table range.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        let x = t / self.grid_step;
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().expect("non-empty table");
        }
        let frac = x - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// `∫₀^{t_max} m(t) dt` by composite Simpson over the table.
    pub fn integral(&self) -> f64 {
        quad::simpson(&self.values, self.grid_step)
    }
}

/// Default grid step `min(0.001, t_max / 10⁴)`.
pub fn default_grid_step(t_max: f64) -> f64 {
    (t_max / 1e4).min(1e-3)
}

fn intervals(t_max: f64, grid_step: f64) -> Result<usize> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::invalid("t_max", format!("must be a finite positive number, got {t_max}")));
    }
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::invalid("grid_step", format!("must be a finite positive number, got {grid_step}")));
    }
    let n = (t_max / grid_step - 1e-9).ceil().max(1.0);
    if n > 5e7 {
        return Err(Error::invalid("grid_step", format!("{n} grid intervals is too many")));
    }
    Ok(n as usize)
}

/// Renewal function on a grid, by closed form when the family admits one.
///
/// Fails with [`Error::SeriesDivergence`] if the Weibull series cannot be
/// trusted on the requested range; use [`renewal_table`] with
/// [`RenewalMethod::Auto`] to fall back to the numeric solution.
pub fn renewal_function(model: &InterarrivalModel, t_max: f64, grid_step: f64) -> Result<RenewalFunctionTable> {
    renewal_table(model, t_max, grid_step, RenewalMethod::ClosedForm)
}

pub fn renewal_table(
    model: &InterarrivalModel,
    t_max: f64,
    grid_step: f64,
    method: RenewalMethod,
) -> Result<RenewalFunctionTable> {
    let n = intervals(t_max, grid_step)?;
    let grid = |i: usize| i as f64 * grid_step;
    if method == RenewalMethod::Numeric {
        return renewal_function_numeric(model, t_max, grid_step);
    }
    let closed = |f: &dyn Fn(f64) -> f64, source| RenewalFunctionTable {
        grid_step,
        values: (0..=n).map(|i| f(grid(i))).collect(),
        source,
    };
    match model.family() {
        Family::Exponential => Ok(closed(&|t| t, RenewalSource::ClosedForm)),
        Family::Erlang { shape } => {
            let e = ErlangRenewal::new(shape);
            Ok(closed(&|t| e.value(t), RenewalSource::ClosedForm))
        }
        Family::Uniform if grid(n) <= UNIFORM_CLOSED_FORM_LIMIT => Ok(closed(&uniform_m, RenewalSource::ClosedForm)),
        Family::Weibull { shape } => {
            let series = WeibullSeries::new(shape);
            // terms grow with t, so the far end decides convergence
            match series.value(grid(n)) {
                Ok(_) => {
                    let values = (0..=n).map(|i| series.value(grid(i))).collect::<Result<Vec<_>>>()?;
                    Ok(RenewalFunctionTable { grid_step, values, source: RenewalSource::TruncatedSeries })
                }
                Err(e) if method == RenewalMethod::ClosedForm => Err(e),
                Err(_) => renewal_function_numeric(model, t_max, grid_step),
            }
        }
        _ => renewal_function_numeric(model, t_max, grid_step),
    }
}

/// Numeric solution of `m(t) = F(t) + ∫₀ᵗ m(t - s) dF(s)` on a uniform grid.
pub fn renewal_function_numeric(model: &InterarrivalModel, t_max: f64, grid_step: f64) -> Result<RenewalFunctionTable> {
    let n = intervals(t_max, grid_step)?;
    let h = grid_step;
    let cdf: Vec<f64> = (0..=n).map(|i| model.cdf(i as f64 * h)).collect();
    let pmean: Vec<f64> = (0..=n).map(|i| model.partial_mean(i as f64 * h)).collect();

    // Cell j = [s_{j-1}, s_j]: mass dF_j split into a left weight a_j (on
    // m(t - s_{j-1})) and a right weight b_j (on m(t - s_j)).
    let mut left = vec![0.0; n + 2];
    let mut right = vec![0.0; n + 1];
    for j in 1..=n {
        let d_f = (cdf[j] - cdf[j - 1]).max(0.0);
        let first_moment = (pmean[j] - pmean[j - 1]) - (j - 1) as f64 * h * d_f;
        let w = (first_moment / h).clamp(0.0, d_f);
        left[j] = d_f - w;
        right[j] = w;
    }
    // kernel[k] multiplies m_{i} with k = n - i
    let kernel: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { left[k + 1] + right[k] }).collect();

    let mut m = vec![0.0; n + 1];
    let denom = 1.0 - left[1];
    for i in 1..=n {
        let conv: f64 = m[1..i].iter().zip(kernel[1..i].iter().rev()).map(|(a, b)| a * b).sum();
        m[i] = (cdf[i] + conv) / denom;
    }
    Ok(RenewalFunctionTable { grid_step, values: m, source: RenewalSource::NumericRenewalEquation })
}

/// `∫₀^δ m(t) dt`, analytically when the closed form permits.
pub fn renewal_integral(model: &InterarrivalModel, delta: f64, method: RenewalMethod) -> Result<(f64, RenewalSource)> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", format!("must be a finite positive number, got {delta}")));
    }
    let numeric = || -> Result<(f64, RenewalSource)> {
        let table = renewal_function_numeric(model, delta, delta / INTEGRAL_GRID_INTERVALS as f64)?;
        Ok((table.integral(), RenewalSource::NumericRenewalEquation))
    };
    if method == RenewalMethod::Numeric {
        return numeric();
    }
    match model.family() {
        Family::Exponential => Ok((0.5 * delta * delta, RenewalSource::ClosedForm)),
        Family::Erlang { shape } => Ok((ErlangRenewal::new(shape).integral(delta), RenewalSource::ClosedForm)),
        Family::Uniform if delta <= UNIFORM_CLOSED_FORM_LIMIT => {
            Ok((uniform_m_integral(delta), RenewalSource::ClosedForm))
        }
        Family::Weibull { shape } => match WeibullSeries::new(shape).integral(delta) {
            Ok(v) => Ok((v, RenewalSource::TruncatedSeries)),
            Err(e) if method == RenewalMethod::ClosedForm => Err(e),
            Err(_) => numeric(),
        },
        _ => numeric(),
    }
}

/// Erlang renewal function
/// `m(t) = t + Σ_{h=1}^{ξ-1} θʰ/(ξ(1-θʰ)) (1 - e^{-ξ(1-θʰ)t})`, `θ = e^{i2π/ξ}`.
struct ErlangRenewal {
    /// (coefficient, exponent rate) per h
    terms: Vec<(Complex64, Complex64)>,
}

impl ErlangRenewal {
    fn new(shape: u32) -> Self {
        let xi = shape as f64;
        let terms = (1..shape)
            .map(|h| {
                let theta_h = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * h as f64 / xi);
                let one_minus = Complex64::new(1.0, 0.0) - theta_h;
                (theta_h / (one_minus * xi), one_minus * xi)
            })
            .collect();
        Self { terms }
    }

    fn value(&self, t: f64) -> f64 {
        let s: Complex64 = self.terms.iter().map(|&(c, r)| c * (1.0 - (-r * t).exp())).sum();
        Self::real(t + s)
    }

    fn integral(&self, delta: f64) -> f64 {
        let s: Complex64 = self.terms.iter().map(|&(c, r)| c * (delta - (1.0 - (-r * delta).exp()) / r)).sum();
        Self::real(0.5 * delta * delta + s)
    }

    fn real(z: Complex64) -> f64 {
        // conjugate pairs θʰ, θ^{ξ-h} cancel the imaginary parts
        debug_assert!(z.im.abs() <= 1e-10 * z.re.abs().max(1.0), "imaginary residue {}", z.im);
        z.re
    }
}

/// Uniform-on-[0,2] renewal function,
/// `m(t) = Σ_{k=0}^{⌊t/2⌋} (-1)^k (t/2 - k)^k e^{t/2-k} / k! - 1`.
fn uniform_m(t: f64) -> f64 {
    let u = 0.5 * t;
    let kmax = u.floor() as usize;
    let mut s = 0.0;
    for k in 0..=kmax {
        let y = u - k as f64;
        let term = if k == 0 {
            y.exp()
        } else if y <= 0.0 {
            0.0
        } else {
            (k as f64 * y.ln() + y - ln_gamma(k as f64 + 1.0)).exp()
        };
        s += if k % 2 == 0 { term } else { -term };
    }
    s - 1.0
}

/// `∫₀^t` of [`uniform_m`], term by term.
fn uniform_m_integral(t: f64) -> f64 {
    let u = 0.5 * t;
    let kmax = u.floor() as usize;
    let mut s = 0.0;
    for k in 0..=kmax {
        let y = u - k as f64;
        // I_k(y) = ∫₀^y x^k e^x / k! dx = e^y Σ_{j≤k} (-1)^{k-j} y^j/j! - (-1)^k
        let mut poly = 0.0;
        let mut pow = 1.0;
        for j in 0..=k {
            if j > 0 {
                pow *= y / j as f64;
            }
            poly += if (k - j) % 2 == 0 { pow } else { -pow };
        }
        let sign_k = if k % 2 == 0 { 1.0 } else { -1.0 };
        let ik = y.exp() * poly - sign_k;
        s += sign_k * ik;
    }
    2.0 * s - t
}

/// Alternating series for the Weibull renewal function,
/// `m(t) = Σ (-1)^{n-1} a_n x^{nb} / Γ(1 + nb)`, `x = Γ(1 + 1/b) t`,
/// stored through `d_n = a_n / Γ(1 + nb)`.
pub(crate) struct WeibullSeries {
    shape: f64,
    scale: f64,
    coeffs: Vec<f64>,
}

impl WeibullSeries {
    pub(crate) fn new(shape: f64) -> Self {
        let b = shape;
        let n_max = WEIBULL_MAX_TERMS;
        let lg: Vec<f64> = (0..=n_max).map(|k| ln_gamma(1.0 + k as f64 * b)).collect();
        let lfact: Vec<f64> = (0..=n_max).map(|k| ln_gamma(k as f64 + 1.0)).collect();
        let mut d = vec![0.0; n_max + 1];
        for n in 1..=n_max {
            let mut v = (-lfact[n]).exp();
            for j in 1..n {
                v -= d[n - j] * (lg[j] + lg[n - j] - lg[n] - lfact[j]).exp();
            }
            d[n] = v;
        }
        Self { shape, scale: (-ln_gamma(1.0 + 1.0 / b)).exp(), coeffs: d }
    }

    fn sum<F: Fn(usize, f64) -> f64>(&self, t: f64, term_of: F) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let ln_x = (t / self.scale).ln();
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        let mut growth = 0;
        let mut small = 0;
        for n in 1..=WEIBULL_MAX_TERMS {
            let mag = self.coeffs[n] * (n as f64 * self.shape * ln_x).exp();
            let term = term_of(n, mag);
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            sum += sign * term;
            let abs = term.abs();
            if !abs.is_finite() || abs > WEIBULL_MAX_TERM_MAGNITUDE {
                return Err(Error::SeriesDivergence { t, terms: n });
            }
            if abs < WEIBULL_TERM_TOL {
                small += 1;
                if small >= 2 {
                    return Ok(sum);
                }
            } else {
                small = 0;
            }
            if abs > prev {
                growth += 1;
                if growth >= WEIBULL_MAX_GROWTH_RUN {
                    return Err(Error::SeriesDivergence { t, terms: n });
                }
            } else {
                growth = 0;
            }
            prev = abs;
        }
        Err(Error::SeriesDivergence { t, terms: WEIBULL_MAX_TERMS })
    }

    pub(crate) fn value(&self, t: f64) -> Result<f64> {
        self.sum(t, |_, mag| mag)
    }

    /// `∫₀^δ m(t) dt`; term n integrates to `d_n δ x^{nb} / (nb + 1)`.
    pub(crate) fn integral(&self, delta: f64) -> Result<f64> {
        let b = self.shape;
        self.sum(delta, |n, mag| mag * delta / (n as f64 * b + 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(f: Family) -> InterarrivalModel {
        InterarrivalModel::unit(f).unwrap()
    }

    #[test]
    fn exponential_closed_form_is_identity() {
        let t = renewal_function(&InterarrivalModel::exponential(), 5.0, 0.01).unwrap();
        for (x, m) in t.grid() {
            assert!((m - x).abs() < 1e-10);
        }
        assert_eq!(t.source(), RenewalSource::ClosedForm);
    }

    #[test]
    fn uniform_closed_form_values() {
        let t = renewal_function(&model(Family::Uniform), 2.0, 0.5).unwrap();
        assert!((t.value_at(2.0) - (1f64.exp() - 1.0)).abs() < 1e-12);
        // second piece: e^{t/2} - 1 - (t/2 - 1) e^{t/2 - 1}
        let x: f64 = 3.0;
        let expect = (x / 2.0).exp() - 1.0 - (x / 2.0 - 1.0) * (x / 2.0 - 1.0).exp();
        assert!((uniform_m(x) - expect).abs() < 1e-12);
    }

    #[test]
    fn uniform_integral_matches_quadrature_of_closed_form() {
        for &d in &[0.7, 2.0, 3.3, 9.0] {
            let n = 20_000;
            let h = d / n as f64;
            let v: Vec<f64> = (0..=n).map(|i| uniform_m(i as f64 * h)).collect();
            let q = quad::simpson(&v, h);
            assert!((q - uniform_m_integral(d)).abs() < 1e-7, "delta={d}");
        }
    }

    #[test]
    fn erlang_two_closed_form() {
        let e = ErlangRenewal::new(2);
        let expect = 1.0 - (1.0 - (-4f64).exp()) / 4.0;
        assert!((e.value(1.0) - expect).abs() < 1e-12);
        assert!((expect - 0.754579).abs() < 1e-6);
        // ∫₀² m = 2 - 1/2 + (1 - e^{-8})/16
        let i = e.integral(2.0);
        assert!((i - (1.5 + (1.0 - (-8f64).exp()) / 16.0)).abs() < 1e-12);
    }

    #[test]
    fn weibull_series_reduces_to_identity_for_unit_shape() {
        let s = WeibullSeries::new(1.0);
        for &t in &[0.1, 0.5, 1.0, 2.0] {
            assert!((s.value(t).unwrap() - t).abs() < 1e-10);
        }
    }

    #[test]
    fn weibull_series_diverges_for_long_horizons() {
        let s = WeibullSeries::new(3.0);
        assert!(matches!(s.value(30.0), Err(Error::SeriesDivergence { .. })));
        let m = model(Family::Weibull { shape: 3.0 });
        assert!(matches!(renewal_function(&m, 30.0, 0.1), Err(Error::SeriesDivergence { .. })));
        let auto = renewal_table(&m, 30.0, 0.01, RenewalMethod::Auto).unwrap();
        assert_eq!(auto.source(), RenewalSource::NumericRenewalEquation);
    }

    #[test]
    fn numeric_reproduces_exponential() {
        let t = renewal_function_numeric(&InterarrivalModel::exponential(), 1.0, 1e-3).unwrap();
        assert!((t.value_at(1.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn numeric_matches_erlang_closed_form() {
        let t = renewal_function_numeric(&model(Family::Erlang { shape: 2 }), 1.0, 1e-3).unwrap();
        assert!((t.value_at(1.0) - 0.754579).abs() < 1e-3);
    }

    #[test]
    fn numeric_gamma_small_shape_starts_at_zero_and_is_monotone() {
        let t = renewal_function_numeric(&model(Family::Gamma { shape: 0.3 }), 5.0, 1e-3).unwrap();
        assert_eq!(t.values()[0], 0.0);
        assert!(t.values().windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn shifted_exponential_is_zero_before_offset() {
        let m = model(Family::ShiftedExponential { offset: 0.8 });
        let t = renewal_function(&m, 2.0, 1e-3).unwrap();
        for (x, v) in t.grid() {
            if x < 0.8 {
                assert_eq!(v, 0.0, "t={x}");
            }
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let m = InterarrivalModel::exponential();
        assert!(renewal_function(&m, 0.0, 0.1).is_err());
        assert!(renewal_function(&m, 1.0, -0.1).is_err());
        assert!(renewal_function_numeric(&m, f64::NAN, 0.1).is_err());
    }
}

//! Analytic capacity: the zero-order renewal formula, the structured
//! linear-system refinement and the large-delay asymptote.
//!
//! Everything here works in normalized delay `δ = λΔ`; the result only
//! depends on the unit-mean law.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{renewal_integral, renewal_table, Dispersion, InterarrivalModel, RenewalMethod};
use crate::quad::{self, GaussLegendre};

/// Default order of the linear system.
pub const DEFAULT_ORDER: usize = 1;
/// Largest system order accepted.
pub const MAX_ORDER: usize = 64;
/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
const MIN_GRID_INTERVALS: usize = 10_000;
const NODES_PER_PERIOD: usize = 1_000;
const FOURIER_ORIGIN_PATCH: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityMethod {
    ZeroOrder,
    LinearSystem(usize),
    MonteCarloBgm(usize),
    MonteCarloChain(usize),
}

impl CapacityMethod {
    pub fn is_monte_carlo(&self) -> bool {
        matches!(self, CapacityMethod::MonteCarloBgm(_) | CapacityMethod::MonteCarloChain(_))
    }
}

impl fmt::Display for CapacityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapacityMethod::ZeroOrder => f.write_str("zero"),
            CapacityMethod::LinearSystem(n) => write!(f, "linear:{n}"),
            CapacityMethod::MonteCarloBgm(n) => write!(f, "mc-bgm:{n}"),
            CapacityMethod::MonteCarloChain(n) => write!(f, "mc-chain:{n}"),
        }
    }
}

/// A capacity value in `[0, 1]` with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    value: f64,
    method: CapacityMethod,
    delta: f64,
    stderr: Option<f64>,
}

impl CapacityEstimate {
    pub fn new(value: f64, method: CapacityMethod, delta: f64, stderr: Option<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Degenerate(format!(
                "{method} produced capacity {value} outside [0, 1] at delta {delta}"
            )));
        }
        Ok(Self { value, method, delta, stderr })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn method(&self) -> CapacityMethod {
        self.method
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn stderr(&self) -> Option<f64> {
        self.stderr
    }
}

/// `C = 2p / (1 + p)` for an inside-window occupancy `p`.
pub fn capacity_from_occupancy(p: f64) -> f64 {
    2.0 * p / (1.0 + p)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("must be a finite positive number, got {delta}")))
    }
}

fn require_finite_variance(model: &InterarrivalModel, what: &'static str) -> Result<f64> {
    match model.dispersion_index() {
        Dispersion::Finite(g) => Ok(g),
        Dispersion::Infinite => Err(Error::InfiniteVariance(what)),
    }
}

/// `C = δ / (1 + (2/δ) ∫₀^δ m(t) dt)`.
pub fn capacity_zero_order(model: &InterarrivalModel, delta: f64) -> Result<CapacityEstimate> {
    capacity_zero_order_with(model, delta, RenewalMethod::Auto)
}

pub fn capacity_zero_order_with(
    model: &InterarrivalModel,
    delta: f64,
    method: RenewalMethod,
) -> Result<CapacityEstimate> {
    check_delta(delta)?;
    let (integral, _) = renewal_integral(model, delta, method)?;
    let c = delta / (1.0 + 2.0 / delta * integral);
    CapacityEstimate::new(c, CapacityMethod::ZeroOrder, delta, None)
}

/// `1 - C ≈ γ/δ` for large `δ`.
pub fn asymptotic_capacity_gap(model: &InterarrivalModel, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let g = require_finite_variance(model, "the large-delay asymptote")?;
    Ok(g / delta)
}

/// Time-domain integrals of `m` that define the system entries.
#[derive(Debug, Clone)]
struct Moments {
    delta: f64,
    /// `∫₀^δ m`
    integral: f64,
    /// `∫₀^δ m(t) cos(2πkt/δ) dt`, k = 0..=N
    cos: Vec<f64>,
    /// `∫₀^δ m(t) (1 - t/δ) sin(2πkt/δ) dt`, k = 0..=N
    sin: Vec<f64>,
}

impl Moments {
    fn compute(model: &InterarrivalModel, delta: f64, order: usize, method: RenewalMethod) -> Result<Self> {
        let intervals = MIN_GRID_INTERVALS.max(NODES_PER_PERIOD * order).next_multiple_of(2);
        let h = delta / intervals as f64;
        let table = renewal_table(model, delta, h, method)?;
        let values = table.values();
        let (integral, _) = renewal_integral(model, delta, method)?;
        let mut cos = vec![integral];
        let mut sin = vec![0.0];
        let mut buf = vec![0.0; values.len()];
        for k in 1..=order {
            let w = 2.0 * PI * k as f64 / delta;
            for (i, (b, m)) in buf.iter_mut().zip(values).enumerate() {
                *b = m * (w * i as f64 * h).cos();
            }
            cos.push(quad::simpson(&buf, h));
            for (i, (b, m)) in buf.iter_mut().zip(values).enumerate() {
                let t = i as f64 * h;
                *b = m * (1.0 - t / delta) * (w * t).sin();
            }
            sin.push(quad::simpson(&buf, h));
        }
        Ok(Self { delta, integral, cos, sin })
    }

    fn a00(&self) -> f64 {
        1.0 - 0.5 * self.delta + 2.0 / self.delta * self.integral
    }

    fn a0k(&self, k: i64) -> f64 {
        if k == 0 {
            return self.a00();
        }
        let k = k.unsigned_abs() as usize;
        2.0 * sign(k as i64) / self.delta * self.cos[k]
    }

    fn akk(&self, k: i64) -> f64 {
        if k == 0 {
            return self.a00();
        }
        let k = k.unsigned_abs() as usize;
        1.0 + 2.0 / self.delta * (self.cos[k] + 2.0 * PI * k as f64 * self.sin[k])
    }
}

fn sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Off-diagonal entry from row 0: `((-1)^{h-k}/(h-k)) [h(-1)^h A_{0h} - k(-1)^k A_{0k}]`.
fn reconstruct(h: i64, k: i64, a0h: f64, a0k: f64) -> f64 {
    sign(h - k) / (h - k) as f64 * (h as f64 * sign(h) * a0h - k as f64 * sign(k) * a0k)
}

/// The `(2N+1) × (2N+1)` system, indexed by `h, k ∈ [-N, N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    order: usize,
    entries: DMatrix<f64>,
}

impl SystemMatrix {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        2 * self.order + 1
    }

    fn idx(&self, h: i64) -> usize {
        let n = self.order as i64;
        assert!((-n..=n).contains(&h), "index {h} outside [-{n}, {n}]");
        (h + n) as usize
    }

    /// Entry `A_{hk}`.
    pub fn get(&self, h: i64, k: i64) -> f64 {
        self.entries[(self.idx(h), self.idx(k))]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Rebuilds every off-diagonal entry from row 0 and the diagonal.
    pub fn reconstructed(&self) -> SystemMatrix {
        let n = self.order as i64;
        let mut out = self.clone();
        for h in -n..=n {
            for k in -n..=n {
                if h != k && h != 0 && k != 0 {
                    let v = reconstruct(h, k, self.get(0, h), self.get(0, k));
                    let (i, j) = (out.idx(h), out.idx(k));
                    out.entries[(i, j)] = v;
                }
            }
        }
        out
    }

    /// Condition number from the singular values.
    pub fn condition_number(&self) -> f64 {
        let sv = self.entries.clone().svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// `{A⁻¹}₀₀` by LU, refusing ill-conditioned systems.
    pub fn inverse_center(&self) -> Result<f64> {
        let condition = self.condition_number();
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::SingularMatrix { condition });
        }
        let c = self.idx(0);
        let mut e = DVector::zeros(self.dim());
        e[c] = 1.0;
        let x = self.entries.clone().lu().solve(&e).ok_or(Error::SingularMatrix { condition })?;
        Ok(x[c])
    }
}

pub fn build_system_matrix(model: &InterarrivalModel, delta: f64, order: usize) -> Result<SystemMatrix> {
    build_system_matrix_with(model, delta, order, RenewalMethod::Auto)
}

pub fn build_system_matrix_with(
    model: &InterarrivalModel,
    delta: f64,
    order: usize,
    method: RenewalMethod,
) -> Result<SystemMatrix> {
    check_delta(delta)?;
    if order == 0 || order > MAX_ORDER {
        return Err(Error::invalid("N", format!("system order must lie in [1, {MAX_ORDER}], got {order}")));
    }
    require_finite_variance(model, "the linear-system refinement")?;
    let mo = Moments::compute(model, delta, order, method)?;
    let n = order as i64;
    let dim = 2 * order + 1;
    let entries = DMatrix::from_fn(dim, dim, |i, j| {
        let (h, k) = (i as i64 - n, j as i64 - n);
        if h == k {
            mo.akk(h)
        } else if h == 0 {
            mo.a0k(k)
        } else if k == 0 {
            mo.a0k(h)
        } else {
            reconstruct(h, k, mo.a0k(h), mo.a0k(k))
        }
    });
    Ok(SystemMatrix { order, entries })
}

/// Capacity from the order-`N` linear system: `Ω = (δ/2){A⁻¹}₀₀`, `C = 2Ω/(1+Ω)`.
pub fn capacity_linear(model: &InterarrivalModel, delta: f64, order: usize) -> Result<CapacityEstimate> {
    capacity_linear_with(model, delta, order, RenewalMethod::Auto)
}

pub fn capacity_linear_with(
    model: &InterarrivalModel,
    delta: f64,
    order: usize,
    method: RenewalMethod,
) -> Result<CapacityEstimate> {
    let a = build_system_matrix_with(model, delta, order, method)?;
    let omega = 0.5 * delta * a.inverse_center()?;
    CapacityEstimate::new(2.0 * omega / (1.0 + omega), CapacityMethod::LinearSystem(order), delta, None)
}

/// Explicit `N = 1` solution
/// `C = δ / (1 + (2/δ)∫m + 2A₀₁²/(A₀₁ - A₁₁))`.
pub fn capacity_linear_n1(model: &InterarrivalModel, delta: f64) -> Result<CapacityEstimate> {
    check_delta(delta)?;
    require_finite_variance(model, "the linear-system refinement")?;
    let mo = Moments::compute(model, delta, 1, RenewalMethod::Auto)?;
    let (a01, a11) = (mo.a0k(1), mo.akk(1));
    let denom = a01 - a11;
    if denom == 0.0 {
        return Err(Error::SingularMatrix { condition: f64::INFINITY });
    }
    let c = delta / (1.0 + 2.0 / delta * mo.integral + 2.0 * a01 * a01 / denom);
    CapacityEstimate::new(c, CapacityMethod::LinearSystem(1), delta, None)
}

/// `A₀₀` from the time-domain definition `1 - δ/2 + (2/δ)∫₀^δ m`.
pub fn a00_time_domain(model: &InterarrivalModel, delta: f64, method: RenewalMethod) -> Result<f64> {
    check_delta(delta)?;
    let (integral, _) = renewal_integral(model, delta, method)?;
    Ok(1.0 - 0.5 * delta + 2.0 / delta * integral)
}

/// `R(ν) = Re{K(ν) / (1 - K(ν))}`, patched by its limit `(γ-1)/2` near zero.
pub fn fourier_integrand(model: &InterarrivalModel, nu: f64) -> Result<f64> {
    let g = require_finite_variance(model, "the Fourier-domain entry")?;
    Ok(fourier_r(model, nu, g))
}

fn fourier_r(model: &InterarrivalModel, nu: f64, gamma: f64) -> f64 {
    if nu.abs() < FOURIER_ORIGIN_PATCH {
        return 0.5 * (gamma - 1.0);
    }
    let k = model.characteristic_function(nu);
    (k / (1.0 - k)).re
}

/// `A₀₀ = 1 + δ/2 + 2∫ R(ν) δ sinc²(δν) dν` over the real line.
///
/// With `x = δν` the integral becomes `4∫₀^∞ R(x/δ) sinc²(x) dx`, taken
/// lobe by lobe with Gauss-Legendre; beyond the last lobe `sinc²` is
/// replaced by its average `1/(2π²x²)`.
pub fn a00_fourier(model: &InterarrivalModel, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let g = require_finite_variance(model, "the Fourier-domain entry")?;
    let r = |x: f64| fourier_r(model, x / delta, g);
    let sinc2 = |x: f64| {
        if x == 0.0 {
            1.0
        } else {
            let s = (PI * x).sin() / (PI * x);
            s * s
        }
    };
    // numeric characteristic functions are expensive; their laws are smooth
    // enough that fewer lobes suffice
    let lobes = match model.family() {
        crate::models::Family::Weibull { .. }
        | crate::models::Family::Pareto { .. }
        | crate::models::Family::Lognormal { .. } => 200,
        _ => 2000,
    };
    let rule = GaussLegendre::g20();
    let mut acc = 0.0;
    for lobe in 0..lobes {
        let pieces = if lobe < 16 { 8 } else { 1 };
        let step = 1.0 / pieces as f64;
        for p in 0..pieces {
            let a = lobe as f64 + p as f64 * step;
            acc += rule.integrate(a, a + step, |x| r(x) * sinc2(x));
        }
    }
    // ∫_X^∞ R(x/δ) / (2π²x²) dx with x = X/s
    let x_end = lobes as f64;
    acc += rule.integrate(0.0, 1.0, |s| r(x_end / s)) / (2.0 * PI * PI * x_end);
    Ok(1.0 + 0.5 * delta + 4.0 * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;
    use proptest::prelude::*;

    fn unit(f: Family) -> InterarrivalModel {
        InterarrivalModel::unit(f).unwrap()
    }

    fn erlang2_capacity(delta: f64) -> f64 {
        // m(t) = t - (1 - e^{-4t})/4, integrated by hand
        let i = 0.5 * delta * delta - 0.25 * delta + (1.0 - (-4.0 * delta).exp()) / 16.0;
        delta / (1.0 + 2.0 / delta * i)
    }

    #[test]
    fn exponential_zero_order() {
        let e = InterarrivalModel::exponential();
        assert!((capacity_zero_order(&e, 1.0).unwrap().value() - 0.5).abs() < 1e-15);
        assert!((capacity_zero_order(&e, 4.0).unwrap().value() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn erlang_zero_order() {
        let c = capacity_zero_order(&unit(Family::Erlang { shape: 2 }), 2.0).unwrap().value();
        assert!((c - 2.0 / (2.5 + (1.0 - (-8f64).exp()) / 16.0)).abs() < 1e-12);
        assert!((c - 0.7805).abs() < 1e-4);
        for &d in &[0.3, 1.0, 5.0] {
            let c = capacity_zero_order(&unit(Family::Erlang { shape: 2 }), d).unwrap().value();
            assert!((c - erlang2_capacity(d)).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_exponential_linear_regime() {
        let m = unit(Family::ShiftedExponential { offset: 0.8 });
        assert_eq!(capacity_zero_order(&m, 0.5).unwrap().value(), 0.5);
        assert!((capacity_linear_n1(&m, 0.5).unwrap().value() - 0.5).abs() < 1e-12);
        let a = build_system_matrix(&m, 0.5, 3).unwrap();
        for k in 1..=3 {
            assert_eq!(a.get(0, k), 0.0);
        }
    }

    #[test]
    fn exponential_matrix_and_linear() {
        let e = InterarrivalModel::exponential();
        let a = build_system_matrix(&e, 1.0, 1).unwrap();
        assert!(a.get(0, 1).abs() < 1e-10);
        assert!((a.get(1, 1) - 1.0).abs() < 1e-10);
        for &d in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let exact = d / (1.0 + d);
            assert!((capacity_linear(&e, d, 1).unwrap().value() - exact).abs() < 1e-8);
            assert!((capacity_linear(&e, d, 3).unwrap().value() - exact).abs() < 1e-8);
            assert!((capacity_linear_n1(&e, d).unwrap().value() - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn n1_formula_matches_general_solve() {
        for f in [
            Family::Erlang { shape: 2 },
            Family::Uniform,
            Family::ShiftedExponential { offset: 0.8 },
            Family::Gamma { shape: 0.3 },
        ] {
            for &d in &[0.7, 2.0, 3.0] {
                let m = unit(f);
                let a = capacity_linear(&m, d, 1).unwrap().value();
                let b = capacity_linear_n1(&m, d).unwrap().value();
                assert!((a - b).abs() < 1e-10, "{f:?} δ={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn matrix_symmetries() {
        let a = build_system_matrix(&unit(Family::Uniform), 1.7, 4).unwrap();
        for k in 1..=4 {
            assert_eq!(a.get(0, k), a.get(0, -k));
            assert_eq!(a.get(k, k), a.get(-k, -k));
        }
        assert!((a.get(-1, 1) + a.get(0, 1)).abs() < 1e-12);
        let m = a.as_matrix();
        assert!((m - m.transpose()).amax() < 1e-12);
    }

    /// Direct off-diagonal entry from cosine integrals of `m`, evaluated on
    /// an independent fine grid.
    fn direct_entry(model: &InterarrivalModel, delta: f64, h: i64, k: i64) -> f64 {
        let n = 20_000;
        let step = delta / n as f64;
        let table = renewal_table(model, delta, step, RenewalMethod::Auto).unwrap();
        let w = |j: i64, t: f64| j as f64 * (2.0 * PI * j as f64 * t / delta).cos();
        let v: Vec<f64> = table.grid().map(|(t, m)| m * (w(h, t) - w(k, t))).collect();
        sign(h - k) / (h - k) as f64 * 2.0 / delta * quad::simpson(&v, step)
    }

    #[test]
    fn reconstruction_identity() {
        for f in [Family::Erlang { shape: 2 }, Family::Uniform, Family::Weibull { shape: 3.0 }] {
            let m = unit(f);
            for n in 1..=5 {
                let a = build_system_matrix(&m, 1.3, n).unwrap();
                let r = a.reconstructed();
                assert!((a.as_matrix() - r.as_matrix()).amax() < 1e-12);
            }
            let a = build_system_matrix(&m, 1.3, 2).unwrap();
            let direct = direct_entry(&m, 1.3, 2, 1);
            assert!((a.get(2, 1) - direct).abs() < 1e-7, "{f:?}: {} vs {direct}", a.get(2, 1));
        }
    }

    #[test]
    fn pareto_refusals() {
        let p = unit(Family::Pareto { shape: 1.5 });
        assert!(capacity_zero_order(&p, 1.0).is_ok());
        assert!(matches!(capacity_linear(&p, 1.0, 1), Err(Error::InfiniteVariance(_))));
        assert!(matches!(capacity_linear_n1(&p, 1.0), Err(Error::InfiniteVariance(_))));
        assert!(matches!(asymptotic_capacity_gap(&p, 10.0), Err(Error::InfiniteVariance(_))));
        assert!(matches!(a00_fourier(&p, 1.0), Err(Error::InfiniteVariance(_))));
        let msg = capacity_linear(&p, 1.0, 1).unwrap_err().to_string();
        assert!(msg.contains("infinite second moment"));
    }

    #[test]
    fn asymptote() {
        assert!((asymptotic_capacity_gap(&InterarrivalModel::exponential(), 100.0).unwrap() - 0.01).abs() < 1e-15);
        let e2 = unit(Family::Erlang { shape: 2 });
        assert!((asymptotic_capacity_gap(&e2, 100.0).unwrap() - 0.005).abs() < 1e-15);
        let gap = (1.0 - capacity_zero_order(&e2, 200.0).unwrap().value()) * 200.0;
        assert!((gap / 0.5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn fourier_exponential_and_limit() {
        let e = InterarrivalModel::exponential();
        assert!((a00_fourier(&e, 1.0).unwrap() - 1.5).abs() < 1e-10);
        let r0 = fourier_integrand(&unit(Family::Erlang { shape: 2 }), 0.0).unwrap();
        assert_eq!(r0, -0.25);
        // limit is continuous with the computed integrand
        let r_small = fourier_integrand(&unit(Family::Erlang { shape: 2 }), 2e-4).unwrap();
        assert!((r_small + 0.25).abs() < 1e-5);
    }

    #[test]
    fn fourier_matches_time_domain() {
        for f in [Family::Erlang { shape: 2 }, Family::Uniform, Family::Gamma { shape: 0.3 }] {
            for &d in &[0.5, 1.0, 4.0] {
                let m = unit(f);
                let a = a00_fourier(&m, d).unwrap();
                let b = a00_time_domain(&m, d, RenewalMethod::Auto).unwrap();
                assert!((a - b).abs() < 1e-4, "{f:?} δ={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn occupancy_conversion() {
        assert_eq!(capacity_from_occupancy(0.0), 0.0);
        assert_eq!(capacity_from_occupancy(1.0), 1.0);
        assert!((capacity_from_occupancy(1.0 / 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn estimate_rejects_out_of_range() {
        assert!(CapacityEstimate::new(1.1, CapacityMethod::ZeroOrder, 1.0, None).is_err());
        assert!(CapacityEstimate::new(f64::NAN, CapacityMethod::ZeroOrder, 1.0, None).is_err());
    }

    #[test]
    fn zero_order_monotone_and_bounded() {
        for f in [
            Family::Erlang { shape: 4 },
            Family::Weibull { shape: 0.6 },
            Family::Uniform,
            Family::Pareto { shape: 3.0 },
        ] {
            let m = unit(f);
            let mut prev = 0.0;
            for &d in &[0.05, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
                let c = capacity_zero_order(&m, d).unwrap().value();
                assert!(c > prev && c < 1.0, "{f:?} δ={d}: {c}");
                prev = c;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exponential_exact_everywhere(d in 0.01f64..20.0) {
            let c = capacity_zero_order(&InterarrivalModel::exponential(), d).unwrap().value();
            prop_assert!((c - d / (1.0 + d)).abs() < 1e-12);
        }

        #[test]
        fn erlang_capacity_in_unit_interval(xi in 1u32..8, d in 0.01f64..30.0) {
            let m = InterarrivalModel::unit(Family::Erlang { shape: xi }).unwrap();
            let c = capacity_zero_order(&m, d).unwrap().value();
            prop_assert!(c > 0.0 && c < 1.0);
        }
    }
}

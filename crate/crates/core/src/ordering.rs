//! Variability orderings between unit-mean interarrival laws and the
//! capacity relations they imply.
//!
//! `X₁ ≤_v X₂` (convex order at equal means) holds iff
//! `∫₀ˣ F̄₁ ≥ ∫₀ˣ F̄₂` for every `x`, equivalently iff `L₁(p) ≥ L₂(p)` for
//! every `p`. A less variable interarrival gives a larger capacity.

use std::fmt;

use crate::error::{Error, Result};
use crate::models::{normal_cdf, normal_quantile, Family, InterarrivalModel};

/// Tolerance on integrated-survival and Lorenz gaps.
pub const ORDER_TOLERANCE: f64 = 1e-9;
/// Tolerance on the mean residual life against the unit mean.
pub const NBUE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariabilityRelation {
    LessVariable,
    MoreVariable,
    Incomparable,
}

impl fmt::Display for VariabilityRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariabilityRelation::LessVariable => "less_variable",
            VariabilityRelation::MoreVariable => "more_variable",
            VariabilityRelation::Incomparable => "incomparable",
        })
    }
}

/// Outcome of a grid check of the first model against the second.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingVerdict {
    pub relation: VariabilityRelation,
    /// Both directions hold within tolerance (the laws agree on the grid).
    pub tight: bool,
    pub evidence_grid: Vec<f64>,
    /// Largest amount by which the reported direction is violated on the
    /// grid; for `Incomparable`, the smaller of the two directions' worst
    /// violations.
    pub max_violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgingClass {
    Nbue,
    Nwue,
    Both,
    Neither,
}

impl fmt::Display for AgingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgingClass::Nbue => "nbue",
            AgingClass::Nwue => "nwue",
            AgingClass::Both => "both",
            AgingClass::Neither => "neither",
        })
    }
}

/// Predicted relation between `C₁` and `C₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityRelation {
    AtLeast,
    AtMost,
    Equal,
    Unknown,
}

impl fmt::Display for CapacityRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapacityRelation::AtLeast => "C1>=C2",
            CapacityRelation::AtMost => "C1<=C2",
            CapacityRelation::Equal => "C1=C2",
            CapacityRelation::Unknown => "unknown",
        })
    }
}

/// 1000 log-spaced points on `[1e-3, 50]`.
pub fn default_x_grid() -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 50f64.ln());
    let n = 1000;
    (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `p = 0.001, 0.002, …, 0.999`.
pub fn default_p_grid() -> Vec<f64> {
    (1..1000).map(|i| i as f64 / 1000.0).collect()
}

/// Lorenz curve `L(p) = ∫₀^p Q(u) du` of the unit-mean law.
pub fn lorenz_curve(model: &InterarrivalModel, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let l = match model.family() {
        Family::Pareto { shape: b } => b * (1.0 - (1.0 - p).powf(1.0 - 1.0 / b)) - (b - 1.0) * p,
        Family::Lognormal { sigma } => normal_cdf(normal_quantile(p) - sigma),
        // the integral of the quantile up to p is the partial mean up to Q(p)
        _ => model.partial_mean(model.quantile(p)),
    };
    Ok(l.clamp(0.0, p))
}

fn verdict(gaps: Vec<f64>, grid: Vec<f64>) -> OrderingVerdict {
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // violations of "gap >= 0" and "gap <= 0"
    let less_violation = (-min).max(0.0);
    let more_violation = max.max(0.0);
    let less = less_violation <= ORDER_TOLERANCE;
    let more = more_violation <= ORDER_TOLERANCE;
    let (relation, max_violation) = match (less, more) {
        (true, _) => (VariabilityRelation::LessVariable, less_violation),
        (false, true) => (VariabilityRelation::MoreVariable, more_violation),
        (false, false) => (VariabilityRelation::Incomparable, less_violation.min(more_violation)),
    };
    OrderingVerdict { relation, tight: less && more, evidence_grid: grid, max_violation }
}

/// Integrated-survival criterion on an `x` grid.
pub fn convex_order_check(m1: &InterarrivalModel, m2: &InterarrivalModel, grid: &[f64]) -> OrderingVerdict {
    let gaps = grid.iter().map(|&x| m1.integrated_survival(x) - m2.integrated_survival(x)).collect();
    verdict(gaps, grid.to_vec())
}

/// Lorenz-curve criterion on a `p` grid.
pub fn lorenz_order_check(m1: &InterarrivalModel, m2: &InterarrivalModel, p_grid: &[f64]) -> Result<OrderingVerdict> {
    let gaps = p_grid.iter().map(|&p| Ok(lorenz_curve(m1, p)? - lorenz_curve(m2, p)?)).collect::<Result<Vec<_>>>()?;
    Ok(verdict(gaps, p_grid.to_vec()))
}

/// Compares the mean residual life `E[X - s | X > s]` with the unit mean.
pub fn nbue_classify(model: &InterarrivalModel, s_grid: &[f64]) -> AgingClass {
    let (mut nbue, mut nwue) = (true, true);
    for &s in s_grid {
        let Some(mrl) = model.mean_residual_life(s) else { continue };
        if mrl > 1.0 + NBUE_TOLERANCE {
            nbue = false;
        }
        if mrl < 1.0 - NBUE_TOLERANCE {
            nwue = false;
        }
    }
    match (nbue, nwue) {
        (true, true) => AgingClass::Both,
        (true, false) => AgingClass::Nbue,
        (false, true) => AgingClass::Nwue,
        (false, false) => AgingClass::Neither,
    }
}

/// 1001 points on `[0, 10]`.
pub fn default_s_grid() -> Vec<f64> {
    (0..=1000).map(|i| i as f64 / 100.0).collect()
}

/// Same-family rule: larger Gamma/Erlang or Weibull or Pareto shape, or a
/// smaller lognormal σ, means a less variable law. The exponential is
/// treated as Gamma and Weibull with unit shape.
fn family_rule(f1: Family, f2: Family) -> Option<CapacityRelation> {
    fn gamma_shape(f: Family) -> Option<f64> {
        match f {
            Family::Exponential => Some(1.0),
            Family::Gamma { shape } => Some(shape),
            Family::Erlang { shape } => Some(shape as f64),
            _ => None,
        }
    }
    fn weibull_shape(f: Family) -> Option<f64> {
        match f {
            Family::Exponential => Some(1.0),
            Family::Weibull { shape } => Some(shape),
            _ => None,
        }
    }
    let by_larger = |a: f64, b: f64| {
        Some(match a.partial_cmp(&b)? {
            std::cmp::Ordering::Greater => CapacityRelation::AtLeast,
            std::cmp::Ordering::Less => CapacityRelation::AtMost,
            std::cmp::Ordering::Equal => CapacityRelation::Equal,
        })
    };
    if let (Some(a), Some(b)) = (gamma_shape(f1), gamma_shape(f2)) {
        return by_larger(a, b);
    }
    if let (Some(a), Some(b)) = (weibull_shape(f1), weibull_shape(f2)) {
        return by_larger(a, b);
    }
    match (f1, f2) {
        (Family::Pareto { shape: a }, Family::Pareto { shape: b }) => by_larger(a, b),
        (Family::Lognormal { sigma: a }, Family::Lognormal { sigma: b }) => by_larger(b, a),
        (Family::Uniform, Family::Uniform) => Some(CapacityRelation::Equal),
        (Family::ShiftedExponential { offset: a }, Family::ShiftedExponential { offset: b }) => by_larger(a, b),
        _ => None,
    }
}

/// Predicted order of the capacities: same-family rule, then the convex
/// order on the default grid, then the NBUE/NWUE bracket around the
/// exponential.
pub fn predict_capacity_order(m1: &InterarrivalModel, m2: &InterarrivalModel) -> CapacityRelation {
    if let Some(r) = family_rule(m1.family(), m2.family()) {
        return r;
    }
    let v = convex_order_check(m1, m2, &default_x_grid());
    match v.relation {
        VariabilityRelation::LessVariable if v.tight => return CapacityRelation::Equal,
        VariabilityRelation::LessVariable => return CapacityRelation::AtLeast,
        VariabilityRelation::MoreVariable => return CapacityRelation::AtMost,
        VariabilityRelation::Incomparable => {}
    }
    let s = default_s_grid();
    match (nbue_classify(m1, &s), nbue_classify(m2, &s)) {
        (AgingClass::Nbue | AgingClass::Both, AgingClass::Nwue | AgingClass::Both) => CapacityRelation::AtLeast,
        (AgingClass::Nwue | AgingClass::Both, AgingClass::Nbue | AgingClass::Both) => CapacityRelation::AtMost,
        _ => CapacityRelation::Unknown,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::capacity_zero_order;
    use crate::test_support::tanh_sinh;
    use proptest::prelude::*;

    fn unit(f: Family) -> InterarrivalModel {
        InterarrivalModel::unit(f).unwrap()
    }

    /// `∫₀^p Q(u) du` by tanh-sinh, which tolerates the endpoint singularities of `Q`.
    fn lorenz_by_quadrature(m: &InterarrivalModel, p: f64) -> f64 {
        tanh_sinh(0.0, p, |u| m.quantile(u))
    }

    #[test]
    fn lorenz_endpoints() {
        for f in [Family::Exponential, Family::Pareto { shape: 3.0 }, Family::Gamma { shape: 0.3 }, Family::Uniform] {
            assert_eq!(lorenz_curve(&unit(f), 0.0).unwrap(), 0.0);
            assert_eq!(lorenz_curve(&unit(f), 1.0).unwrap(), 1.0);
        }
        assert!(lorenz_curve(&InterarrivalModel::exponential(), 1.5).is_err());
    }

    #[test]
    fn pareto_lorenz_matches_quadrature() {
        let m = unit(Family::Pareto { shape: 3.0 });
        let l = lorenz_curve(&m, 0.5).unwrap();
        let q = lorenz_by_quadrature(&m, 0.5);
        assert!((l - q).abs() < 1e-9, "{l} vs {q}");
        assert!((l - 0.110118).abs() < 1e-5);
        assert!(l <= 0.5);
        for &p in &[0.1, 0.7, 0.95] {
            assert!((lorenz_curve(&m, p).unwrap() - lorenz_by_quadrature(&m, p)).abs() < 1e-8);
        }
    }

    #[test]
    fn lognormal_lorenz() {
        let m = unit(Family::Lognormal { sigma: 1.0 });
        let l = lorenz_curve(&m, 0.5).unwrap();
        assert!((l - 0.158655).abs() < 1e-6);
        assert!((l - lorenz_by_quadrature(&m, 0.5)).abs() < 1e-8);
    }

    #[test]
    fn generic_lorenz_matches_quadrature() {
        for f in [Family::Exponential, Family::Gamma { shape: 2.5 }, Family::Weibull { shape: 0.6 }, Family::Uniform] {
            let m = unit(f);
            for &p in &[0.2, 0.5, 0.9] {
                let a = lorenz_curve(&m, p).unwrap();
                let b = lorenz_by_quadrature(&m, p);
                assert!((a - b).abs() < 1e-8, "{f:?} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn convex_order_examples() {
        let x = default_x_grid();
        let e = InterarrivalModel::exponential();
        let v = convex_order_check(&unit(Family::Erlang { shape: 2 }), &e, &x);
        assert_eq!(v.relation, VariabilityRelation::LessVariable);
        assert!(!v.tight);
        let v = convex_order_check(&e, &e, &x);
        assert_eq!(v.relation, VariabilityRelation::LessVariable);
        assert!(v.tight);
        assert_eq!(v.max_violation, 0.0);
        let v = convex_order_check(&unit(Family::Weibull { shape: 0.6 }), &unit(Family::Weibull { shape: 3.0 }), &x);
        assert_eq!(v.relation, VariabilityRelation::MoreVariable);
    }

    #[test]
    fn aging_classes() {
        let s = default_s_grid();
        assert_eq!(nbue_classify(&InterarrivalModel::exponential(), &s), AgingClass::Both);
        assert_eq!(nbue_classify(&unit(Family::Erlang { shape: 3 }), &s), AgingClass::Nbue);
        assert_eq!(nbue_classify(&unit(Family::Pareto { shape: 3.0 }), &s), AgingClass::Nwue);
        assert_eq!(nbue_classify(&unit(Family::Uniform), &s), AgingClass::Nbue);
    }

    #[test]
    fn predictions() {
        let e = InterarrivalModel::exponential();
        assert_eq!(
            predict_capacity_order(&unit(Family::Gamma { shape: 4.0 }), &unit(Family::Gamma { shape: 2.0 })),
            CapacityRelation::AtLeast
        );
        assert_eq!(
            predict_capacity_order(&unit(Family::Lognormal { sigma: 0.5 }), &unit(Family::Lognormal { sigma: 1.5 })),
            CapacityRelation::AtLeast
        );
        assert_eq!(predict_capacity_order(&unit(Family::Erlang { shape: 2 }), &e), CapacityRelation::AtLeast);
        assert_eq!(predict_capacity_order(&e, &e), CapacityRelation::Equal);
        assert_eq!(predict_capacity_order(&e, &unit(Family::Pareto { shape: 3.0 })), CapacityRelation::AtLeast);
        assert_eq!(predict_capacity_order(&unit(Family::Uniform), &e), CapacityRelation::AtLeast);
    }

    #[test]
    fn criteria_agree_and_capacities_follow() {
        let pairs = [
            (Family::Erlang { shape: 2 }, Family::Exponential),
            (Family::Exponential, Family::Pareto { shape: 3.0 }),
            (Family::Weibull { shape: 3.0 }, Family::Weibull { shape: 0.6 }),
            (Family::Gamma { shape: 4.0 }, Family::Gamma { shape: 2.0 }),
            (Family::Lognormal { sigma: 0.5 }, Family::Lognormal { sigma: 1.5 }),
            (Family::Uniform, Family::Erlang { shape: 4 }),
        ];
        for (a, b) in pairs {
            let (m1, m2) = (unit(a), unit(b));
            let v = convex_order_check(&m1, &m2, &default_x_grid());
            let l = lorenz_order_check(&m1, &m2, &default_p_grid()).unwrap();
            assert_eq!(v.relation, l.relation, "{a:?} vs {b:?}");
            if v.relation == VariabilityRelation::LessVariable {
                for &d in &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
                    let c1 = capacity_zero_order(&m1, d).unwrap().value();
                    let c2 = capacity_zero_order(&m2, d).unwrap().value();
                    assert!(c1 >= c2 - 1e-9, "{a:?} vs {b:?} δ={d}");
                }
            }
        }
    }

    #[test]
    fn weibull_lorenz_increases_with_shape() {
        let p = default_p_grid();
        let shapes = [0.4, 0.6, 1.0, 2.0, 3.0, 5.0];
        for w in shapes.windows(2) {
            let lo = unit(Family::Weibull { shape: w[0] });
            let hi = unit(Family::Weibull { shape: w[1] });
            for &q in &p {
                assert!(lorenz_curve(&hi, q).unwrap() >= lorenz_curve(&lo, q).unwrap() - 1e-12);
            }
        }
    }

    fn any_family() -> impl Strategy<Value = Family> {
        prop_oneof![
            Just(Family::Exponential),
            (0.2f64..6.0).prop_map(|shape| Family::Gamma { shape }),
            (0.3f64..5.0).prop_map(|shape| Family::Weibull { shape }),
            Just(Family::Uniform),
            (1.2f64..6.0).prop_map(|shape| Family::Pareto { shape }),
            (0.1f64..2.0).prop_map(|sigma| Family::Lognormal { sigma }),
            (0.05f64..0.95).prop_map(|offset| Family::ShiftedExponential { offset }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn lorenz_convex_and_below_diagonal(f in any_family()) {
            let m = unit(f);
            let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
            let l: Vec<f64> = grid.iter().map(|&p| lorenz_curve(&m, p).unwrap()).collect();
            for (p, v) in grid.iter().zip(&l) {
                prop_assert!(*v <= p + 1e-12 && *v >= 0.0);
            }
            for w in l.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
            }
        }

        #[test]
        fn verdicts_are_exclusive_and_antisymmetric(a in any_family(), b in any_family()) {
            let (m1, m2) = (unit(a), unit(b));
            let x = default_x_grid();
            let v12 = convex_order_check(&m1, &m2, &x);
            let v21 = convex_order_check(&m2, &m1, &x);
            if !v12.tight {
                let flipped = match v12.relation {
                    VariabilityRelation::LessVariable => VariabilityRelation::MoreVariable,
                    VariabilityRelation::MoreVariable => VariabilityRelation::LessVariable,
                    r => r,
                };
                prop_assert_eq!(v21.relation, flipped);
            }
        }
    }
}

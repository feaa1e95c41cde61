//! Unit-mean interarrival laws.
//!
//! Every family is parameterised so that its interarrival has mean one; the
//! physical rate `λ` is carried separately on [`InterarrivalModel`]. All
//! distributional quantities below (`updf`, `cdf`, partial means, quantiles,
//! characteristic function) refer to the unit-mean law `λX`.

mod charfn;
pub mod renewal;

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, LogNormal, Weibull};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::quad;

pub use renewal::{
    renewal_function, renewal_function_numeric, renewal_integral, renewal_table, RenewalFunctionTable, RenewalMethod,
    RenewalSource,
};

/// Interarrival family, shape parameters only (scale is pinned by unit mean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Exponential,
    Gamma {
        shape: f64,
    },
    Erlang {
        shape: u32,
    },
    Weibull {
        shape: f64,
    },
    /// Uniform on `[0, 2]`.
    Uniform,
    Pareto {
        shape: f64,
    },
    Lognormal {
        sigma: f64,
    },
    ShiftedExponential {
        offset: f64,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Gamma { .. } => "gamma",
            Family::Erlang { .. } => "erlang",
            Family::Weibull { .. } => "weibull",
            Family::Uniform => "uniform",
            Family::Pareto { .. } => "pareto",
            Family::Lognormal { .. } => "lognormal",
            Family::ShiftedExponential { .. } => "shifted-exponential",
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be a finite positive number, got {v}")))
            }
        };
        match *self {
            Family::Exponential | Family::Uniform => Ok(()),
            Family::Gamma { shape } => positive("xi", shape),
            Family::Erlang { shape } => {
                if shape >= 1 {
                    Ok(())
                } else {
                    Err(Error::invalid("xi", "Erlang shape must be an integer >= 1"))
                }
            }
            Family::Weibull { shape } => positive("b", shape),
            Family::Pareto { shape } => {
                positive("b", shape)?;
                if shape > 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("b", format!("Pareto shape must exceed 1 for a finite mean, got {shape}")))
                }
            }
            Family::Lognormal { sigma } => positive("sigma", sigma),
            Family::ShiftedExponential { offset } => {
                if offset > 0.0 && offset < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("a", format!("offset must lie in (0, 1), got {offset}")))
                }
            }
        }
    }
}

/// Dispersion index `γ = λ² Var[X]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dispersion {
    Finite(f64),
    Infinite,
}

impl Dispersion {
    pub fn finite(self) -> Option<f64> {
        match self {
            Dispersion::Finite(g) => Some(g),
            Dispersion::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Dispersion::Finite(_))
    }
}

/// A renewal traffic family: unit-mean interarrival law plus rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterarrivalModel {
    family: Family,
    rate: f64,
}

impl InterarrivalModel {
    pub fn new(family: Family, rate: f64) -> Result<Self> {
        family.validate()?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::invalid("rate", format!("must be a finite positive number, got {rate}")));
        }
        Ok(Self { family, rate })
    }

    /// Unit-rate model.
    pub fn unit(family: Family) -> Result<Self> {
        Self::new(family, 1.0)
    }

    pub fn exponential() -> Self {
        Self { family: Family::Exponential, rate: 1.0 }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        Self::new(self.family, rate)
    }

    /// Weibull scale `σ = 1/Γ(1 + 1/b)` giving unit mean.
    fn weibull_scale(b: f64) -> f64 {
        (-ln_gamma(1.0 + 1.0 / b)).exp()
    }

    fn lognormal_mu(sigma: f64) -> f64 {
        -0.5 * sigma * sigma
    }

    /// The u-PDF `k(t)`. Densities that diverge at the origin return `+∞` there.
    pub fn updf(&self, t: f64) -> f64 {
        if t < 0.0 || t.is_nan() {
            return 0.0;
        }
        match self.family {
            Family::Exponential => (-t).exp(),
            Family::Gamma { shape } => gamma_density(shape, t),
            Family::Erlang { shape } => gamma_density(shape as f64, t),
            Family::Weibull { shape: b } => {
                let s = Self::weibull_scale(b);
                if t == 0.0 {
                    return match b.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0 / s,
                        _ => 0.0,
                    };
                }
                let z = t / s;
                (b / s) * z.powf(b - 1.0) * (-z.powf(b)).exp()
            }
            Family::Uniform => {
                if t <= 2.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Family::Pareto { shape: b } => (b / (b - 1.0)) * (1.0 + t / (b - 1.0)).powf(-(b + 1.0)),
            Family::Lognormal { sigma } => {
                if t == 0.0 {
                    return 0.0;
                }
                let z = (t.ln() - Self::lognormal_mu(sigma)) / sigma;
                (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma * t)
            }
            Family::ShiftedExponential { offset: a } => {
                if t < a {
                    0.0
                } else {
                    (-(t - a) / (1.0 - a)).exp() / (1.0 - a)
                }
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.family {
            Family::Exponential => -(-t).exp_m1(),
            Family::Gamma { shape } => gamma_lr(shape, shape * t),
            Family::Erlang { shape } => gamma_lr(shape as f64, shape as f64 * t),
            Family::Weibull { shape: b } => -(-(t / Self::weibull_scale(b)).powf(b)).exp_m1(),
            Family::Uniform => (0.5 * t).min(1.0),
            Family::Pareto { .. } | Family::Lognormal { .. } => 1.0 - self.survival(t),
            Family::ShiftedExponential { offset: a } => {
                if t <= a {
                    0.0
                } else {
                    -(-(t - a) / (1.0 - a)).exp_m1()
                }
            }
        }
    }

    /// Survival function `1 - F(t)`, computed directly in the tail.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self.family {
            Family::Exponential => (-t).exp(),
            Family::Gamma { shape } => gamma_ur(shape, shape * t),
            Family::Erlang { shape } => gamma_ur(shape as f64, shape as f64 * t),
            Family::Weibull { shape: b } => (-(t / Self::weibull_scale(b)).powf(b)).exp(),
            Family::Uniform => (1.0 - 0.5 * t).max(0.0),
            Family::Pareto { shape: b } => (1.0 + t / (b - 1.0)).powf(-b),
            Family::Lognormal { sigma } => normal_sf((t.ln() - Self::lognormal_mu(sigma)) / sigma),
            Family::ShiftedExponential { offset: a } => {
                if t <= a {
                    1.0
                } else {
                    (-(t - a) / (1.0 - a)).exp()
                }
            }
        }
    }

    /// Lower partial mean `E[X; X ≤ x]` of the unit-mean law.
    pub fn partial_mean(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self.family {
            Family::Exponential => exp_partial_mean(x),
            Family::Gamma { shape } => gamma_lr(shape + 1.0, shape * x),
            Family::Erlang { shape } => gamma_lr(shape as f64 + 1.0, shape as f64 * x),
            Family::Weibull { shape: b } => {
                let z = (x / Self::weibull_scale(b)).powf(b);
                gamma_lr(1.0 + 1.0 / b, z)
            }
            Family::Uniform => {
                let x = x.min(2.0);
                0.25 * x * x
            }
            Family::Pareto { .. } | Family::Lognormal { .. } => 1.0 - self.upper_partial_mean(x),
            Family::ShiftedExponential { offset: a } => {
                if x <= a {
                    0.0
                } else {
                    let s = 1.0 - a;
                    a * self.cdf(x) + s * exp_partial_mean((x - a) / s)
                }
            }
        }
    }

    /// Upper partial mean `E[X; X > x]`, computed directly in the tail.
    pub fn upper_partial_mean(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self.family {
            Family::Exponential => (-x).exp() * (1.0 + x),
            Family::Gamma { shape } => gamma_ur(shape + 1.0, shape * x),
            Family::Erlang { shape } => gamma_ur(shape as f64 + 1.0, shape as f64 * x),
            Family::Weibull { shape: b } => {
                let z = (x / Self::weibull_scale(b)).powf(b);
                gamma_ur(1.0 + 1.0 / b, z)
            }
            Family::Uniform => {
                let x = x.min(2.0);
                1.0 - 0.25 * x * x
            }
            Family::Pareto { shape: b } => {
                let base = 1.0 + x / (b - 1.0);
                base.powf(1.0 - b) + x * base.powf(-b)
            }
            Family::Lognormal { sigma } => normal_sf((x.ln() - Self::lognormal_mu(sigma) - sigma * sigma) / sigma),
            Family::ShiftedExponential { offset: a } => {
                if x <= a {
                    1.0
                } else {
                    let s = 1.0 - a;
                    let y = (x - a) / s;
                    a * (-y).exp() + s * (-y).exp() * (1.0 + y)
                }
            }
        }
    }

    /// Integrated survival `∫₀ˣ F̄(t) dt`.
    pub fn integrated_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        // ∫₀ˣ F̄ = E[min(X, x)] = E[X; X ≤ x] + x F̄(x)
        self.partial_mean(x) + x * self.survival(x)
    }

    /// Stop-loss transform `E[(X - x)⁺] = ∫ₓ^∞ F̄(t) dt`.
    pub fn stop_loss(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0 - x;
        }
        (self.upper_partial_mean(x) - x * self.survival(x)).max(0.0)
    }

    /// Quantile of the unit-mean law; closed form where one exists, otherwise
    /// bisection on the log of the CDF argument.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return match self.family {
                Family::Uniform => 2.0,
                _ => f64::INFINITY,
            };
        }
        match self.family {
            Family::Exponential => -(-u).ln_1p(),
            Family::Weibull { shape: b } => Self::weibull_scale(b) * (-(-u).ln_1p()).powf(1.0 / b),
            Family::Uniform => 2.0 * u,
            Family::Pareto { shape: b } => (b - 1.0) * ((1.0 - u).powf(-1.0 / b) - 1.0),
            Family::Lognormal { sigma } => (Self::lognormal_mu(sigma) + sigma * normal_quantile(u)).exp(),
            Family::ShiftedExponential { offset: a } => a - (1.0 - a) * (-u).ln_1p(),
            Family::Gamma { .. } | Family::Erlang { .. } => {
                // bracket, then bisect on ln t so tiny quantiles keep relative accuracy
                let (mut lo, mut hi) = (1.0f64, 1.0f64);
                while self.cdf(hi) < u {
                    hi *= 2.0;
                }
                while self.cdf(lo) > u && lo > 1e-300 {
                    lo *= 1e-3;
                }
                quad::bisect(|y| self.cdf(y.exp()) - u, lo.ln(), hi.ln(), 1e-12).exp()
            }
        }
    }

    pub fn mean_residual_life(&self, s: f64) -> Option<f64> {
        let sf = self.survival(s);
        if sf <= 0.0 {
            return None;
        }
        Some(self.upper_partial_mean(s) / sf - s.max(0.0))
    }

    /// Dispersion index `γ`: the variance of the unit-mean law.
    pub fn dispersion_index(&self) -> Dispersion {
        match self.family {
            Family::Exponential => Dispersion::Finite(1.0),
            Family::Gamma { shape } => Dispersion::Finite(1.0 / shape),
            Family::Erlang { shape } => Dispersion::Finite(1.0 / shape as f64),
            Family::Weibull { shape: b } => {
                let g1 = ln_gamma(1.0 + 1.0 / b);
                let g2 = ln_gamma(1.0 + 2.0 / b);
                Dispersion::Finite((g2 - 2.0 * g1).exp_m1())
            }
            Family::Uniform => Dispersion::Finite(1.0 / 3.0),
            Family::Pareto { shape: b } => {
                if b > 2.0 {
                    Dispersion::Finite(b / (b - 2.0))
                } else {
                    Dispersion::Infinite
                }
            }
            Family::Lognormal { sigma } => Dispersion::Finite((sigma * sigma).exp_m1()),
            Family::ShiftedExponential { offset: a } => Dispersion::Finite((1.0 - a) * (1.0 - a)),
        }
    }

    /// Lower edge of the support.
    pub fn support_start(&self) -> f64 {
        match self.family {
            Family::ShiftedExponential { offset } => offset,
            _ => 0.0,
        }
    }

    /// A reusable sampler for the unit-mean interarrival.
    pub fn sampler(&self) -> InterarrivalSampler {
        let inner = match self.family {
            Family::Exponential => SamplerKind::Exponential,
            Family::Gamma { shape } => SamplerKind::Gamma(Gamma::new(shape, 1.0 / shape).expect("validated shape")),
            Family::Erlang { shape } => {
                let s = shape as f64;
                SamplerKind::Gamma(Gamma::new(s, 1.0 / s).expect("validated shape"))
            }
            Family::Weibull { shape } => {
                SamplerKind::Weibull(Weibull::new(Self::weibull_scale(shape), shape).expect("validated shape"))
            }
            Family::Uniform => SamplerKind::Uniform,
            Family::Pareto { shape } => SamplerKind::Pareto { shape },
            Family::Lognormal { sigma } => {
                SamplerKind::Lognormal(LogNormal::new(Self::lognormal_mu(sigma), sigma).expect("validated sigma"))
            }
            Family::ShiftedExponential { offset } => SamplerKind::ShiftedExponential { offset },
        };
        InterarrivalSampler { inner }
    }

    /// One draw of the unit-mean interarrival.
    pub fn sample_interarrival<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }
}

impl fmt::Display for InterarrivalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family.name())?;
        match self.family {
            Family::Exponential | Family::Uniform => {}
            Family::Gamma { shape } => write!(f, ":xi={shape}")?,
            Family::Erlang { shape } => write!(f, ":xi={shape}")?,
            Family::Weibull { shape } | Family::Pareto { shape } => write!(f, ":b={shape}")?,
            Family::Lognormal { sigma } => write!(f, ":sigma={sigma}")?,
            Family::ShiftedExponential { offset } => write!(f, ":a={offset}")?,
        }
        if self.rate != 1.0 {
            write!(f, "@{}", self.rate)?;
        }
        Ok(())
    }
}

fn gamma_density(shape: f64, t: f64) -> f64 {
    if t == 0.0 {
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0,
            _ => 0.0,
        };
    }
    (shape.ln() + (shape - 1.0) * (shape * t).ln() - shape * t - ln_gamma(shape)).exp()
}

fn exp_partial_mean(x: f64) -> f64 {
    // 1 - e^{-x}(1 + x), series near the origin to avoid cancellation
    if x < 1e-3 {
        let x2 = x * x;
        x2 * (0.5 - x / 3.0 + x2 / 8.0 - x2 * x / 30.0)
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    }
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Sampler for the unit-mean interarrival of a model.
#[derive(Debug, Clone, Copy)]
pub struct InterarrivalSampler {
    inner: SamplerKind,
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Exponential,
    Gamma(Gamma<f64>),
    Weibull(Weibull<f64>),
    Uniform,
    Pareto { shape: f64 },
    Lognormal(LogNormal<f64>),
    ShiftedExponential { offset: f64 },
}

impl Distribution<f64> for InterarrivalSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.inner {
            SamplerKind::Exponential => Exp1.sample(rng),
            SamplerKind::Gamma(g) => g.sample(rng),
            SamplerKind::Weibull(w) => w.sample(rng),
            SamplerKind::Uniform => 2.0 * rng.random::<f64>(),
            SamplerKind::Pareto { shape } => {
                // 1 - U in (0, 1]
                let v = 1.0 - rng.random::<f64>();
                (shape - 1.0) * (v.powf(-1.0 / shape) - 1.0)
            }
            SamplerKind::Lognormal(l) => l.sample(rng),
            SamplerKind::ShiftedExponential { offset } => {
                let e: f64 = Exp1.sample(rng);
                offset + (1.0 - offset) * e
            }
        }
    }
}

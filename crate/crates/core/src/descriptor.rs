//! Textual model and method descriptors.
//!
//! Models: `family[:k1=v1[,k2=v2]][@rate]`, e.g. `weibull:b=0.6`,
//! `erlang:xi=2@10`, `shifted-exponential:a=0.8`.
//! Methods: `zero`, `linear:N`, `mc-chain:STEPS`, `mc-bgm:POINTS`; counts
//! accept integer-valued floats such as `1e6`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bgm::{bgm_capacity, chain_capacity};
use crate::capacity::{capacity_linear, capacity_zero_order, CapacityEstimate, CapacityMethod};
use crate::error::{Error, Result};
use crate::models::{Family, InterarrivalModel};

/// Random generator used by every Monte Carlo routine.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest count accepted in a method descriptor.
pub const MAX_COUNT: f64 = 1e10;

/// A parsed model descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec(pub InterarrivalModel);

impl ModelSpec {
    pub fn model(&self) -> InterarrivalModel {
        self.0
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

fn parse_real(name: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::invalid(name, format!("cannot parse {v:?} as a number")))
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (body, rate) = match text.split_once('@') {
            Some((b, r)) => (b, parse_real("rate", r)?),
            None => (text, 1.0),
        };
        let (name, params) = match body.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p)),
            None => (body.trim(), None),
        };
        let mut pairs: Vec<(String, &str)> = Vec::new();
        if let Some(p) = params {
            for item in p.split(',') {
                let (k, v) = item.split_once('=').ok_or_else(|| Error::invalid(item.trim(), "expected key=value"))?;
                let k = k.trim().to_ascii_lowercase();
                if pairs.iter().any(|(seen, _)| *seen == k) {
                    return Err(Error::invalid(&k, "given more than once"));
                }
                pairs.push((k, v));
            }
        }
        let family_name = name.to_ascii_lowercase();
        let allowed: &[&str] = match family_name.as_str() {
            "exponential" | "exp" | "uniform" => &[],
            "gamma" | "erlang" => &["xi"],
            "weibull" | "pareto" => &["b"],
            "lognormal" => &["sigma"],
            "shifted-exponential" | "shifted-exp" => &["a"],
            _ => {
                return Err(Error::invalid(
                    "family",
                    format!(
                        "unknown family {name:?} (expected exponential, gamma, erlang, weibull, uniform, pareto, lognormal or shifted-exponential)"
                    ),
                ))
            }
        };
        if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(k, format!("not a parameter of {family_name}")));
        }
        let get = |key: &str| -> Result<f64> {
            let (_, v) = pairs
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| Error::invalid(key, format!("required by {family_name}")))?;
            parse_real(key, v)
        };
        let family = match family_name.as_str() {
            "exponential" | "exp" => Family::Exponential,
            "uniform" => Family::Uniform,
            "gamma" => Family::Gamma { shape: get("xi")? },
            "erlang" => {
                let xi = get("xi")?;
                if xi.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&xi) {
                    return Err(Error::invalid("xi", format!("Erlang shape must be a positive integer, got {xi}")));
                }
                Family::Erlang { shape: xi as u32 }
            }
            "weibull" => Family::Weibull { shape: get("b")? },
            "pareto" => Family::Pareto { shape: get("b")? },
            "lognormal" => Family::Lognormal { sigma: get("sigma")? },
            _ => Family::ShiftedExponential { offset: get("a")? },
        };
        Ok(ModelSpec(InterarrivalModel::new(family, rate)?))
    }
}

/// A capacity method descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSpec {
    Zero,
    Linear(usize),
    McChain(usize),
    McBgm(usize),
}

impl MethodSpec {
    pub fn is_monte_carlo(&self) -> bool {
        matches!(self, MethodSpec::McChain(_) | MethodSpec::McBgm(_))
    }

    /// Evaluates the capacity at normalized delay `delta`; Monte Carlo
    /// methods draw from a generator seeded with `seed`.
    pub fn evaluate(&self, model: &InterarrivalModel, delta: f64, seed: u64) -> Result<CapacityEstimate> {
        match *self {
            MethodSpec::Zero => capacity_zero_order(model, delta),
            MethodSpec::Linear(n) => capacity_linear(model, delta, n),
            MethodSpec::McChain(n) => chain_capacity(model, delta, n, &mut rng_from_seed(seed)),
            MethodSpec::McBgm(n) => bgm_capacity(model, delta, n, &mut rng_from_seed(seed)),
        }
    }

    pub fn capacity_method(&self) -> CapacityMethod {
        match *self {
            MethodSpec::Zero => CapacityMethod::ZeroOrder,
            MethodSpec::Linear(n) => CapacityMethod::LinearSystem(n),
            MethodSpec::McChain(n) => CapacityMethod::MonteCarloChain(n),
            MethodSpec::McBgm(n) => CapacityMethod::MonteCarloBgm(n),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.capacity_method().fmt(f)
    }
}

fn parse_count(name: &str, v: &str) -> Result<usize> {
    let x = parse_real(name, v)?;
    if x.fract() != 0.0 || !(1.0..=MAX_COUNT).contains(&x) {
        return Err(Error::invalid(name, format!("must be a whole number in [1, {MAX_COUNT:e}], got {v:?}")));
    }
    Ok(x as usize)
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, arg) = match text.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (text, None),
        };
        let need = |what: &str| arg.ok_or_else(|| Error::invalid("method", format!("{name} needs :{what}")));
        match name.to_ascii_lowercase().as_str() {
            "zero" if arg.is_none() => Ok(MethodSpec::Zero),
            "zero" => Err(Error::invalid("method", "zero takes no argument")),
            "linear" => Ok(MethodSpec::Linear(parse_count("N", need("N")?)?)),
            "mc-chain" => Ok(MethodSpec::McChain(parse_count("steps", need("STEPS")?)?)),
            "mc-bgm" => Ok(MethodSpec::McBgm(parse_count("points", need("POINTS")?)?)),
            _ => Err(Error::invalid(
                "method",
                format!("unknown method {name:?} (expected zero, linear:N, mc-chain:STEPS or mc-bgm:POINTS)"),
            )),
        }
    }
}

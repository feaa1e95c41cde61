//! Packet-trace pipeline: parse timestamps, pick rate-matched tranches,
//! normalize, optionally scramble, fit a Weibull shape and compare the
//! BGM capacity of the pair against the renewal formula.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::bgm::{bgm_match, empirical_capacity, PointSequence};
use crate::capacity::capacity_zero_order;
use crate::error::{Error, Result};
use crate::models::{Family, InterarrivalModel};

/// Fraction of decreasing lines tolerated (and repaired by sorting).
pub const MAX_DECREASING_FRACTION: f64 = 1e-3;
/// Offset added per repeated occurrence of a timestamp, in seconds.
pub const DUPLICATE_NUDGE: f64 = 1e-9;
/// Default dimensionless observation limit.
pub const DEFAULT_OBSERVATION_LIMIT: f64 = 9000.0;
pub const WEIBULL_SHAPE_BOUNDS: (f64, f64) = (0.02, 50.0);
const FIT_MAX_ITERATIONS: usize = 200;
const FIT_TOLERANCE: f64 = 1e-10;

pub const CSV_HEADER: &str = "delta,empirical_capacity,theoretical_capacity,abs_error";

/// Strictly increasing packet timestamps in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    timestamps: Vec<f64>,
    source_label: String,
}

impl Trace {
    pub fn new(timestamps: Vec<f64>, source_label: impl Into<String>) -> Result<Self> {
        let source_label = source_label.into();
        if timestamps.is_empty() {
            return Err(Error::EmptyTrace(source_label));
        }
        if timestamps.iter().any(|t| !t.is_finite()) || timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("timestamps", "must be finite and strictly increasing"));
        }
        Ok(Self { timestamps, source_label })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Reads whitespace-separated columns; `column` is 1-based.
pub fn parse_trace(path: &Path, column: usize) -> Result<Trace> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_trace_str(&text, column, &path.display().to_string())
}

/// [`parse_trace`] on in-memory text.
pub fn parse_trace_str(text: &str, column: usize, label: &str) -> Result<Trace> {
    if column == 0 {
        return Err(Error::invalid("column", "columns are numbered from 1"));
    }
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { source_label: label.to_string(), line: idx + 1, message };
        let field = line.split_whitespace().nth(column - 1).ok_or_else(|| parse_err(format!("no column {column}")))?;
        let v: f64 = field.parse().map_err(|_| parse_err(format!("cannot parse {field:?} as a number")))?;
        if !v.is_finite() {
            return Err(parse_err(format!("timestamp {field:?} is not finite")));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::EmptyTrace(label.to_string()));
    }
    let decreasing = values.windows(2).filter(|w| w[1] < w[0]).count();
    if decreasing > 0 {
        if decreasing as f64 > MAX_DECREASING_FRACTION * values.len() as f64 {
            return Err(Error::NonMonotone { label: label.to_string(), decreasing, total: values.len() });
        }
        values.sort_by(f64::total_cmp);
    }
    nudge_duplicates(&mut values);
    Trace::new(values, label)
}

/// The k-th repeat of a timestamp moves up by `k · 1e-9`; if that still does
/// not clear the previous value the next representable float is used.
fn nudge_duplicates(values: &mut [f64]) {
    let mut run_value = f64::NAN;
    let mut run = 0u32;
    for i in 1..values.len() {
        let original = values[i];
        if original == run_value || original == values[i - 1] {
            if original != run_value {
                run_value = original;
                run = 0;
            }
            run += 1;
            values[i] = original + DUPLICATE_NUDGE * run as f64;
        } else {
            run_value = f64::NAN;
        }
        if values[i] <= values[i - 1] {
            values[i] = values[i - 1].next_up();
        }
    }
}

/// Two equal-length tranches, rebased to start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TranchePair {
    pub source: PointSequence,
    pub relay: PointSequence,
    pub normalized: bool,
    /// Pooled packet rate (packets per second) before normalization.
    pub sample_rate: f64,
    pub source_offset: usize,
    pub relay_offset: usize,
    /// Windowed rates at the chosen offsets.
    pub rates: (f64, f64),
}

impl TranchePair {
    /// Interarrivals of both tranches, concatenated.
    pub fn pooled_interarrivals(&self) -> Vec<f64> {
        let mut v = self.source.interarrivals();
        v.extend(self.relay.interarrivals());
        v
    }
}

fn windowed_rates(t: &[f64], n: usize, window: usize) -> Vec<f64> {
    (0..=t.len() - n).map(|o| window as f64 / (t[o + window - 1] - t[o])).collect()
}

/// Picks the tranche offsets whose windowed rates are closest in relative
/// terms (ties go to the smallest offsets), then rescales both tranches by
/// the pooled mean interarrival.
pub fn select_tranches(source: &Trace, relay: &Trace, n: usize, window: usize) -> Result<TranchePair> {
    if n < 2 {
        return Err(Error::invalid("n", "tranches need at least 2 packets"));
    }
    if window < 2 || window > n {
        return Err(Error::invalid("window", format!("must lie in [2, {n}], got {window}")));
    }
    for t in [source, relay] {
        if t.len() < n {
            return Err(Error::InsufficientData(format!(
                "{} has {} timestamps, fewer than the tranche size {n}",
                t.source_label,
                t.len()
            )));
        }
    }
    let r1 = windowed_rates(&source.timestamps, n, window);
    let r2 = windowed_rates(&relay.timestamps, n, window);
    let mut sorted: Vec<(f64, usize)> = r2.iter().copied().zip(0..).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let rel = |a: f64, b: f64| (a - b).abs() / a.max(b);

    let mut best: Option<(f64, usize, usize)> = None;
    for (o1, &a) in r1.iter().enumerate() {
        let pos = sorted.partition_point(|&(r, _)| r < a);
        let mut candidates = Vec::with_capacity(2);
        if pos < sorted.len() {
            candidates.push(sorted[pos]);
        }
        if pos > 0 {
            // smallest offset among the run of equal rates just below
            let below = sorted[pos - 1].0;
            candidates.push(sorted[sorted.partition_point(|&(r, _)| r < below)]);
        }
        for (b, o2) in candidates {
            let d = rel(a, b);
            let better = match best {
                None => true,
                Some((bd, b1, b2)) => d < bd || (d == bd && (o1, o2) < (b1, b2)),
            };
            if better {
                best = Some((d, o1, o2));
            }
        }
    }
    let (_, o1, o2) = best.expect("at least one offset in each trace");
    let seg1 = &source.timestamps[o1..o1 + n];
    let seg2 = &relay.timestamps[o2..o2 + n];
    let total_span = (seg1[n - 1] - seg1[0]) + (seg2[n - 1] - seg2[0]);
    let pooled_mean = total_span / (2 * (n - 1)) as f64;
    let rebase = |seg: &[f64]| PointSequence::new(seg.iter().map(|t| (t - seg[0]) / pooled_mean).collect());
    Ok(TranchePair {
        source: rebase(seg1)?,
        relay: rebase(seg2)?,
        normalized: true,
        sample_rate: 1.0 / pooled_mean,
        source_offset: o1,
        relay_offset: o2,
        rates: (r1[o1], r2[o2]),
    })
}

/// Randomly permutes the interarrivals and re-accumulates them from the
/// original first epoch; the last epoch is kept exactly.
pub fn scramble<R: Rng + ?Sized>(segment: &PointSequence, rng: &mut R) -> Result<PointSequence> {
    if segment.len() < 2 {
        return Err(Error::InsufficientData("scrambling needs at least 2 points".into()));
    }
    let mut gaps = segment.interarrivals();
    gaps.shuffle(rng);
    let e = segment.epochs();
    let mut out = Vec::with_capacity(e.len());
    let mut now = e[0];
    out.push(now);
    for g in &gaps[..gaps.len() - 1] {
        now += g;
        out.push(now);
    }
    let last = e[e.len() - 1];
    out.push(if last > now { last } else { now + gaps[gaps.len() - 1] });
    PointSequence::new(out)
}

/// Unit-mean constrained Weibull fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullFit {
    pub shape: f64,
    pub log_likelihood: f64,
    /// The maximizer sits on a search bound (e.g. constant interarrivals).
    pub at_bound: bool,
    pub iterations: usize,
}

/// Log-likelihood of unit-mean Weibull(b): `σ = 1/Γ(1 + 1/b)`.
fn weibull_log_likelihood(b: f64, sum_ln_x: f64, xs: &[f64]) -> f64 {
    let ln_sigma = -ln_gamma(1.0 + 1.0 / b);
    let n = xs.len() as f64;
    let power: f64 = xs.iter().map(|&x| ((x.ln() - ln_sigma) * b).exp()).sum();
    n * (b.ln() - b * ln_sigma) + (b - 1.0) * sum_ln_x - power
}

/// Maximum-likelihood shape of a unit-mean Weibull by golden-section search
/// over `ln b`. The interarrivals are rescaled to unit sample mean first.
pub fn fit_weibull_shape(interarrivals: &[f64]) -> Result<WeibullFit> {
    if interarrivals.len() < 2 {
        return Err(Error::InsufficientData("Weibull fit needs at least 2 interarrivals".into()));
    }
    if interarrivals.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::invalid("interarrivals", "must be finite and positive"));
    }
    let mean = interarrivals.iter().sum::<f64>() / interarrivals.len() as f64;
    let xs: Vec<f64> = interarrivals.iter().map(|x| x / mean).collect();
    let sum_ln_x: f64 = xs.iter().map(|x| x.ln()).sum();
    let ll = |y: f64| weibull_log_likelihood(y.exp(), sum_ln_x, &xs);

    let (lo_b, hi_b) = WEIBULL_SHAPE_BOUNDS;
    let (mut a, mut b) = (lo_b.ln(), hi_b.ln());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (ll(c), ll(d));
    let mut iterations = 0;
    while b - a > FIT_TOLERANCE {
        if iterations == FIT_MAX_ITERATIONS {
            return Err(Error::NonConvergence("Weibull shape fit", FIT_MAX_ITERATIONS));
        }
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ll(d);
        }
    }
    let y = 0.5 * (a + b);
    let shape = y.exp();
    let at_bound = (y - lo_b.ln()).abs() < 1e-6 || (hi_b.ln() - y).abs() < 1e-6;
    Ok(WeibullFit { shape, log_likelihood: ll(y), at_bound, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityErrorRow {
    pub delta: f64,
    pub empirical: f64,
    pub theoretical: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityErrorTable {
    pub fit: WeibullFit,
    pub rows: Vec<CapacityErrorRow>,
}

/// BGM capacity of the pair (truncated at `observation_limit` in normalized
/// time) against the zero-order capacity of the fitted Weibull, per `δ`.
pub fn capacity_error_table(pair: &TranchePair, deltas: &[f64], observation_limit: f64) -> Result<CapacityErrorTable> {
    if !(observation_limit.is_finite() && observation_limit > 0.0) {
        return Err(Error::invalid(
            "observation_limit",
            format!("must be a finite positive number, got {observation_limit}"),
        ));
    }
    let fit = fit_weibull_shape(&pair.pooled_interarrivals())?;
    let model = InterarrivalModel::unit(Family::Weibull { shape: fit.shape })?;
    let s = pair.source.truncated(observation_limit);
    let t = pair.relay.truncated(observation_limit);
    let rows = deltas
        .iter()
        .map(|&delta| {
            let empirical = empirical_capacity(&bgm_match(&s, &t, delta)?)?;
            let theoretical = capacity_zero_order(&model, delta)?.value();
            Ok(CapacityErrorRow { delta, empirical, theoretical, abs_error: (empirical - theoretical).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CapacityErrorTable { fit, rows })
}

pub fn write_capacity_csv<W: Write>(rows: &[CapacityErrorRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{:?},{:?},{:?},{:?}", r.delta, r.empirical, r.theoretical, r.abs_error)?;
    }
    Ok(())
}

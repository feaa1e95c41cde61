//! Bounded Greedy Match on finite realizations, its Markov-chain
//! equivalent, and an exhaustive matching oracle.
//!
//! Indices in [`MatchOutcome::pairs`] are zero-based.

use rand::Rng;
use rand_distr::Distribution;

use crate::capacity::{capacity_from_occupancy, CapacityEstimate, CapacityMethod};
use crate::error::{Error, Result};
use crate::models::InterarrivalModel;

/// Exhaustive matching is limited to this many points over both sequences.
pub const BRUTE_FORCE_LIMIT: usize = 24;
/// Chain steps discarded before occupancy is counted.
pub const CHAIN_BURN_IN: usize = 1_000;
/// Batches used for batch-means standard errors.
pub const STDERR_BATCHES: usize = 100;

/// Arrival epochs of one process: finite, non-negative, strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSequence {
    epochs: Vec<f64>,
}

impl PointSequence {
    pub fn new(epochs: Vec<f64>) -> Result<Self> {
        if let Some(i) = epochs.iter().position(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::invalid("epochs", format!("epoch {i} is {} (must be finite and >= 0)", epochs[i])));
        }
        if let Some(i) = epochs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "epochs",
                format!("not strictly increasing at index {}: {} then {}", i + 1, epochs[i], epochs[i + 1]),
            ));
        }
        Ok(Self { epochs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn epochs(&self) -> &[f64] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn into_epochs(self) -> Vec<f64> {
        self.epochs
    }

    /// Consecutive gaps `e[i+1] - e[i]`.
    pub fn interarrivals(&self) -> Vec<f64> {
        self.epochs.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Multiplies every epoch by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid("factor", format!("must be a finite positive number, got {factor}")));
        }
        Self::new(self.epochs.iter().map(|e| e * factor).collect())
    }

    /// Keeps the epochs `<= limit`.
    pub fn truncated(&self, limit: f64) -> Self {
        let end = self.epochs.partition_point(|&e| e <= limit);
        Self { epochs: self.epochs[..end].to_vec() }
    }
}

/// Flow/chaff decomposition produced by [`bgm_match`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchOutcome {
    /// `(index in s, index in t)`, increasing in both coordinates.
    pub pairs: Vec<(usize, usize)>,
    pub chaff_s: usize,
    pub chaff_t: usize,
    /// Points of `t` after the last one examined when `s` ran out.
    pub undetermined_t: usize,
}

impl MatchOutcome {
    pub fn matched(&self) -> usize {
        self.pairs.len()
    }

    pub fn total_points(&self) -> usize {
        2 * self.pairs.len() + self.chaff_s + self.chaff_t + self.undetermined_t
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("must be a finite positive number, got {delta}")))
    }
}

/// Walks BGM over `s`, reporting for each `s[i]` its match (if any) and how
/// many `t` points were discarded as chaff just before it. Returns the index
/// of the first unexamined `t` point.
fn scan(s: &[f64], t: &[f64], delta: f64, mut visit: impl FnMut(usize, Option<usize>, usize)) -> usize {
    let mut j = 0;
    for (i, &si) in s.iter().enumerate() {
        let start = j;
        while j < t.len() && t[j] < si {
            j += 1;
        }
        let skipped = j - start;
        if j < t.len() && t[j] - si <= delta {
            visit(i, Some(j), skipped);
            j += 1;
        } else {
            visit(i, None, skipped);
        }
    }
    j
}

/// Bounded Greedy Match: each `s` point takes the first still-undetermined
/// `t` point in `[s_i, s_i + delta]`; `t` points that fall behind become chaff.
pub fn bgm_match(s: &PointSequence, t: &PointSequence, delta: f64) -> Result<MatchOutcome> {
    check_delta(delta)?;
    let mut out = MatchOutcome::default();
    let next = scan(&s.epochs, &t.epochs, delta, |i, m, skipped| {
        out.chaff_t += skipped;
        match m {
            Some(j) => {
                debug_assert!((0.0..=delta).contains(&(t.epochs[j] - s.epochs[i])));
                out.pairs.push((i, j));
            }
            None => out.chaff_s += 1,
        }
    });
    out.undetermined_t = t.len() - next;
    Ok(out)
}

/// Maximum order-preserving matching under `0 <= t_j - s_i <= delta`, by
/// dynamic programming over index pairs.
pub fn brute_force_max_matching(s: &PointSequence, t: &PointSequence, delta: f64) -> Result<usize> {
    check_delta(delta)?;
    let total = s.len() + t.len();
    if total > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit { limit: BRUTE_FORCE_LIMIT, got: total });
    }
    let (n, m) = (s.len(), t.len());
    let mut best = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            let gap = t.epochs[j - 1] - s.epochs[i - 1];
            let diag = if (0.0..=delta).contains(&gap) { best[i - 1][j - 1] + 1 } else { 0 };
            best[i][j] = best[i - 1][j].max(best[i][j - 1]).max(diag);
        }
    }
    Ok(best[n][m])
}

/// `2|pairs| / (2|pairs| + chaff_s + chaff_t)`; undetermined points are excluded.
pub fn empirical_capacity(outcome: &MatchOutcome) -> Result<f64> {
    let flow = 2 * outcome.pairs.len();
    let denom = flow + outcome.chaff_s + outcome.chaff_t;
    if denom == 0 {
        return Err(Error::Degenerate("no points were examined by the matching".into()));
    }
    Ok(flow as f64 / denom as f64)
}

/// `n_points` epochs of a renewal process with the model's rate, starting
/// at time zero. Draws that would tie the previous epoch are bumped to the
/// next representable value.
pub fn generate_renewal<R: Rng + ?Sized>(
    model: &InterarrivalModel,
    n_points: usize,
    rng: &mut R,
) -> Result<PointSequence> {
    if n_points == 0 {
        return Err(Error::invalid("n_points", "must be at least 1"));
    }
    let sampler = model.sampler();
    let scale = 1.0 / model.rate();
    let mut epochs = Vec::with_capacity(n_points);
    let mut now = 0.0f64;
    for _ in 0..n_points {
        let next = now + sampler.sample(rng) * scale;
        now = if next > now { next } else { now.next_up() };
        epochs.push(now);
    }
    Ok(PointSequence { epochs })
}

/// Occupancy record of the chain `Z_n` (state before each transition).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub steps_inside: usize,
    pub steps_total: usize,
    pub final_state: f64,
    /// Inside counts over [`STDERR_BATCHES`] contiguous batches (fewer when
    /// `steps_total` is smaller).
    pub batch_inside: Vec<usize>,
}

impl ChainTrace {
    pub fn occupancy(&self) -> f64 {
        self.steps_inside as f64 / self.steps_total as f64
    }

    /// Batch-means standard error of the occupancy.
    pub fn occupancy_stderr(&self) -> Option<f64> {
        let b = self.batch_inside.len();
        if b < 2 {
            return None;
        }
        let size = self.steps_total / b;
        let fracs: Vec<f64> = self.batch_inside.iter().map(|&c| c as f64 / size as f64).collect();
        Some(batch_stderr(&fracs))
    }
}

fn batch_stderr(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Runs the chain `Z_n` in normalized time: unit-mean interarrivals `X`
/// (first process) and `Y` (second), barrier at `delta`, states in
/// `[0, delta]` counted as inside.
pub fn simulate_chain<R: Rng + ?Sized>(
    model: &InterarrivalModel,
    delta: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<ChainTrace> {
    check_delta(delta)?;
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be at least 1"));
    }
    let sampler = model.sampler();
    let mut z = sampler.sample(rng) - sampler.sample(rng);
    let step = |z: f64, rng: &mut R| -> (f64, bool) {
        if z > delta {
            (z - sampler.sample(rng), false)
        } else if z < 0.0 {
            (z + sampler.sample(rng), false)
        } else {
            let y = sampler.sample(rng);
            (z + y - sampler.sample(rng), true)
        }
    };
    for _ in 0..CHAIN_BURN_IN {
        z = step(z, rng).0;
    }
    let batches = STDERR_BATCHES.min(n_steps);
    let batch_size = n_steps / batches;
    let mut batch_inside = vec![0usize; batches];
    let mut inside = 0;
    for n in 0..n_steps {
        let (next, hit) = step(z, rng);
        if hit {
            inside += 1;
            let b = n / batch_size;
            if b < batches {
                batch_inside[b] += 1;
            }
        }
        z = next;
    }
    Ok(ChainTrace { steps_inside: inside, steps_total: n_steps, final_state: z, batch_inside })
}

/// Capacity from chain occupancy, with a delta-method standard error.
pub fn chain_capacity<R: Rng + ?Sized>(
    model: &InterarrivalModel,
    delta: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<CapacityEstimate> {
    let trace = simulate_chain(model, delta, n_steps, rng)?;
    let p = trace.occupancy();
    let stderr = trace.occupancy_stderr().map(|se| 2.0 / (1.0 + p).powi(2) * se);
    CapacityEstimate::new(capacity_from_occupancy(p), CapacityMethod::MonteCarloChain(n_steps), delta, stderr)
}

/// Capacity from BGM on two generated unit-rate realizations of `n_points`
/// each, with a batch-means standard error over blocks of the first process.
pub fn bgm_capacity<R: Rng + ?Sized>(
    model: &InterarrivalModel,
    delta: f64,
    n_points: usize,
    rng: &mut R,
) -> Result<CapacityEstimate> {
    check_delta(delta)?;
    let unit = model.with_rate(1.0)?;
    let s = generate_renewal(&unit, n_points, rng)?;
    let t = generate_renewal(&unit, n_points, rng)?;
    let batches = STDERR_BATCHES.min(n_points);
    let batch_size = n_points.div_ceil(batches);
    // (flow points, chaff points) per batch
    let mut tally = vec![(0usize, 0usize); batches];
    scan(&s.epochs, &t.epochs, delta, |i, m, skipped| {
        let b = &mut tally[i / batch_size];
        b.1 += skipped;
        match m {
            Some(_) => b.0 += 2,
            None => b.1 += 1,
        }
    });
    let (flow, chaff) = tally.iter().fold((0, 0), |acc, b| (acc.0 + b.0, acc.1 + b.1));
    if flow + chaff == 0 {
        return Err(Error::Degenerate("no points were examined by the matching".into()));
    }
    let value = flow as f64 / (flow + chaff) as f64;
    let fracs: Vec<f64> = tally.iter().filter(|b| b.0 + b.1 > 0).map(|b| b.0 as f64 / (b.0 + b.1) as f64).collect();
    let stderr = (fracs.len() >= 2).then(|| batch_stderr(&fracs));
    CapacityEstimate::new(value, CapacityMethod::MonteCarloBgm(n_points), delta, stderr)
}

//! Discretized stochastic environment: the spending chain, the offer lattice,
//! the debt grid and seedable random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

/// Finite Markov chain over government spending levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockChain {
    pub g_values: Vec<f64>,
    /// Row-major `n x n` transition matrix.
    pub transition: Vec<f64>,
    pub stationary: Vec<f64>,
    pub iid: bool,
}

impl ShockChain {
    /// Builds a chain from explicit levels and a row-major transition matrix.
    pub fn new(g_values: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        let n = g_values.len();
        if n == 0 {
            return Err(invalid("g_values", "empty"));
        }
        if transition.len() != n * n {
            return Err(invalid(
                "transition",
                format!("expected {} entries, got {}", n * n, transition.len()),
            ));
        }
        if g_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("g_values", "must be strictly increasing"));
        }
        if g_values[0] < 0.0 {
            return Err(invalid("g_values", "spending must be nonnegative"));
        }
        for (i, row) in transition.chunks(n).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(invalid(
                    "transition",
                    format!("row {i} has a negative entry"),
                ));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid("transition", format!("row {i} sums to {s}")));
            }
        }
        let iid = transition.chunks(n).all(|row| {
            row.iter()
                .zip(&transition[..n])
                .all(|(a, b)| (a - b).abs() <= 1e-15)
        });
        let mut chain = Self {
            g_values,
            transition,
            stationary: Vec::new(),
            iid,
        };
        chain.stationary = stationary_distribution(&chain)?;
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.g_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_values.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.transition[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.len() + j]
    }

    /// Index of the grid level closest to `g`; rejects values outside the hull.
    pub fn nearest(&self, g: f64) -> Result<usize> {
        let (lo, hi) = (self.g_values[0], *self.g_values.last().unwrap());
        let slack = 1e-9 * hi.abs().max(1.0);
        if g < lo - slack || g > hi + slack {
            return Err(Error::OutsideGrid { g, lo, hi });
        }
        Ok(nearest_index(&self.g_values, g))
    }

    /// Draws the next state from row `i` using a uniform `u` in `[0, 1)`.
    pub fn sample_next(&self, i: usize, u: f64) -> usize {
        categorical(self.row(i), u)
    }
}

/// Whether `mu` is the median level of spending or the mean of its log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeanConvention {
    /// The log grid is centered at `ln(mu)`.
    #[default]
    Level,
    /// The log grid is centered at `mu`.
    Log,
}

/// Tauchen discretization of `log g' = (1 - rho) c + rho log g + sigma_eps eps`.
pub fn tauchen(
    mu: f64,
    rho: f64,
    sigma_eps: f64,
    n_states: usize,
    span: f64,
    convention: MeanConvention,
) -> Result<ShockChain> {
    if !(rho.abs() < 1.0) {
        return Err(invalid("rho", format!("{rho} must satisfy |rho| < 1")));
    }
    if !(sigma_eps > 0.0) {
        return Err(invalid("sigma_eps", "must be positive"));
    }
    if n_states < 2 {
        return Err(invalid("n_states", "need at least two states"));
    }
    if !(span > 0.0) {
        return Err(invalid("span", "must be positive"));
    }
    let center = match convention {
        MeanConvention::Level => {
            if !(mu > 0.0) {
                return Err(invalid("mu", "level median must be positive"));
            }
            mu.ln()
        }
        MeanConvention::Log => mu,
    };
    let sd = sigma_eps / (1.0 - rho * rho).sqrt();
    let half = span * sd;
    let step = 2.0 * half / (n_states - 1) as f64;
    let grid: Vec<f64> = (0..n_states)
        .map(|i| center - half + step * i as f64)
        .collect();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut transition = vec![0.0; n_states * n_states];
    for i in 0..n_states {
        let mean = (1.0 - rho) * center + rho * grid[i];
        let z = |x: f64| (x - mean) / sigma_eps;
        let row = &mut transition[i * n_states..(i + 1) * n_states];
        row[0] = normal.cdf(z(grid[0] + step / 2.0));
        row[n_states - 1] = normal.sf(z(grid[n_states - 1] - step / 2.0));
        for j in 1..n_states - 1 {
            row[j] = normal.cdf(z(grid[j] + step / 2.0)) - normal.cdf(z(grid[j] - step / 2.0));
        }
        // Absorb rounding so rows are stochastic to machine precision.
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    if rho == 0.0 {
        let first = transition[..n_states].to_vec();
        for row in transition.chunks_mut(n_states) {
            row.copy_from_slice(&first);
        }
    }
    ShockChain::new(grid.iter().map(|x| x.exp()).collect(), transition)
}

/// Left unit eigenvector of the transition matrix by power iteration.
pub fn stationary_distribution(chain: &ShockChain) -> Result<Vec<f64>> {
    let n = chain.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let max_iter = 1_000_000;
    let mut diff = f64::INFINITY;
    for _ in 0..max_iter {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &w) in pi.iter().enumerate() {
            for (j, &p) in chain.row(i).iter().enumerate() {
                next[j] += w * p;
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        diff = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if diff < 1e-14 {
            return Ok(pi);
        }
    }
    if diff < 1e-12 {
        return Ok(pi);
    }
    Err(Error::NoConvergence {
        what: "stationary distribution",
        iterations: max_iter,
        residual: diff,
    })
}

/// Random repayment offers available while in financial autarky.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferSchedule {
    pub lambda: f64,
    pub deltas: Vec<f64>,
    pub probs: Vec<f64>,
}

impl OfferSchedule {
    pub fn new(lambda: f64, deltas: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid("lambda", format!("{lambda} not in [0, 1]")));
        }
        if deltas.is_empty() || deltas.len() != probs.len() {
            return Err(invalid("deltas", "need one probability per offer"));
        }
        if deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("deltas", "must be strictly increasing"));
        }
        if deltas.iter().any(|&d| !(0.0..1.0).contains(&d)) {
            return Err(invalid("deltas", "repayment fractions must lie in [0, 1)"));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("probs", "negative probability"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(invalid("probs", format!("sum to {s}")));
        }
        Ok(Self {
            lambda,
            deltas,
            probs,
        })
    }

    /// `count` equiprobable offers equally spaced on `[lo, hi]`.
    pub fn equispaced(lambda: f64, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(invalid("deltas", "need at least one offer"));
        }
        let deltas = if count == 1 {
            vec![lo]
        } else {
            (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect()
        };
        Self::new(lambda, deltas, vec![1.0 / count as f64; count])
    }

    /// A single offer `delta` arriving with probability `lambda`.
    pub fn single(lambda: f64, delta: f64) -> Result<Self> {
        Self::new(lambda, vec![delta], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn mean_delta(&self) -> f64 {
        self.deltas
            .iter()
            .zip(&self.probs)
            .map(|(d, p)| d * p)
            .sum()
    }
}

/// Grid of debt levels; always starts at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebtGrid {
    pub b_values: Vec<f64>,
}

impl DebtGrid {
    pub fn new(b_values: Vec<f64>) -> Result<Self> {
        if b_values.is_empty() {
            return Err(invalid("debt_grid", "empty"));
        }
        if b_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("debt_grid", "must be strictly increasing"));
        }
        if b_values[0] != 0.0 {
            return Err(invalid("debt_grid", "must start at zero"));
        }
        Ok(Self { b_values })
    }

    /// `points` equally spaced levels on `[0, max]`.
    pub fn uniform(max: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(invalid("debt_points", "need at least one point"));
        }
        if points == 1 {
            return Self::new(vec![0.0]);
        }
        if !(max > 0.0) {
            return Err(invalid("debt_max", "must be positive"));
        }
        Self::new(
            (0..points)
                .map(|i| max * i as f64 / (points - 1) as f64)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.b_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_values.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.b_values.last().unwrap()
    }

    pub fn nearest(&self, b: f64) -> usize {
        nearest_index(&self.b_values, b)
    }

    /// Linear interpolation bracket `(i, w)` with `x = (1 - w) b[i] + w b[i+1]`.
    /// Points outside the grid are clamped.
    pub fn bracket(&self, b: f64) -> (usize, f64) {
        let v = &self.b_values;
        if v.len() == 1 || b <= v[0] {
            return (0, 0.0);
        }
        if b >= v[v.len() - 1] {
            return (v.len() - 2, 1.0);
        }
        let i = v.partition_point(|&x| x <= b) - 1;
        (i, (b - v[i]) / (v[i + 1] - v[i]))
    }
}

fn nearest_index(values: &[f64], x: f64) -> usize {
    let i = values.partition_point(|&v| v < x);
    if i == 0 {
        0
    } else if i == values.len() {
        values.len() - 1
    } else if (x - values[i - 1]) <= (values[i] - x) {
        i - 1
    } else {
        i
    }
}

pub(crate) fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Repayment event drawn at the start of a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OfferEvent {
    /// Markets were open last period: the debt is due in full.
    Due,
    /// In autarky, no offer arrived.
    NoOffer,
    /// In autarky, offer `deltas[k]` arrived.
    Offer(usize),
}

/// Per-replication random stream.
///
/// ChaCha8 seeded with `master ^ replication`; each replication owns its
/// stream, so results do not depend on scheduling.
#[derive(Debug, Clone)]
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn for_replication(master: u64, replication: u64) -> Self {
        Self::new(master ^ replication)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

/// Draws next period's spending state and repayment event. Always consumes
/// three uniforms so that spending draws are aligned across models sharing a
/// seed.
pub fn draw_period(
    chain: &ShockChain,
    offers: &OfferSchedule,
    state: usize,
    access_prev: bool,
    rng: &mut SimRng,
) -> (usize, OfferEvent) {
    let (u_g, u_arrival, u_offer) = (rng.uniform(), rng.uniform(), rng.uniform());
    let next = chain.sample_next(state, u_g);
    let event = if access_prev {
        OfferEvent::Due
    } else if u_arrival < offers.lambda {
        OfferEvent::Offer(categorical(&offers.probs, u_offer))
    } else {
        OfferEvent::NoOffer
    };
    (next, event)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tauchen_zero_persistence_is_iid() {
        let c = tauchen(0.114, 0.0, 0.037, 7, 3.0, MeanConvention::Level).unwrap();
        assert!(c.iid);
        for i in 0..7 {
            assert_eq!(c.row(i), c.row(0));
        }
    }

    #[test]
    fn tauchen_symmetry() {
        let c = tauchen(0.114, 0.56, 0.037, 11, 3.0, MeanConvention::Level).unwrap();
        let n = c.len();
        for i in 0..n {
            for j in 0..n {
                assert!((c.prob(i, j) - c.prob(n - 1 - i, n - 1 - j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tauchen_rejects_degenerate_inputs() {
        assert!(tauchen(0.1, 1.0, 0.03, 5, 3.0, MeanConvention::Level).is_err());
        assert!(tauchen(0.1, 0.5, 0.0, 5, 3.0, MeanConvention::Level).is_err());
        assert!(tauchen(0.1, 0.5, 0.03, 1, 3.0, MeanConvention::Level).is_err());
    }

    #[test]
    fn stationary_two_state() {
        let c = ShockChain::new(vec![0.1, 0.2], vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        assert!((c.stationary[0] - 0.5).abs() < 1e-12);
        assert!((c.stationary[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_iid_is_common_row() {
        let row = [0.2, 0.5, 0.3];
        let c = ShockChain::new(vec![0.1, 0.2, 0.3], row.repeat(3)).unwrap();
        for (a, b) in c.stationary.iter().zip(row) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn offer_schedule_validation() {
        assert!(OfferSchedule::new(0.5, vec![0.3, 0.2], vec![0.5, 0.5]).is_err());
        assert!(OfferSchedule::new(0.5, vec![0.3, 1.0], vec![0.5, 0.5]).is_err());
        assert!(OfferSchedule::new(1.5, vec![0.3], vec![1.0]).is_err());
        let s = OfferSchedule::equispaced(0.47, 0.45, 0.9, 10).unwrap();
        assert_eq!(s.len(), 10);
        assert!((s.deltas[9] - 0.9).abs() < 1e-15);
        assert!((s.mean_delta() - 0.675).abs() < 1e-12);
    }

    #[test]
    fn debt_grid_bracket_and_nearest() {
        let g = DebtGrid::uniform(0.4, 5).unwrap();
        let (i, w) = g.bracket(0.15);
        assert_eq!(i, 1);
        assert!((w - 0.5).abs() < 1e-12);
        assert_eq!(g.bracket(0.0), (0, 0.0));
        assert_eq!(g.bracket(0.4), (3, 1.0));
        assert_eq!(g.nearest(0.26), 3);
        assert_eq!(g.nearest(-1.0), 0);
        assert!(DebtGrid::new(vec![0.1, 0.2]).is_err());
    }

    #[test]
    fn access_branch_is_always_due() {
        let c = ShockChain::new(vec![0.1, 0.2], vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        let o = OfferSchedule::single(1.0, 0.5).unwrap();
        let mut rng = SimRng::new(7);
        for _ in 0..100 {
            assert_eq!(draw_period(&c, &o, 0, true, &mut rng).1, OfferEvent::Due);
        }
        let o = OfferSchedule::single(0.0, 0.5).unwrap();
        for _ in 0..100 {
            assert_eq!(
                draw_period(&c, &o, 0, false, &mut rng).1,
                OfferEvent::NoOffer
            );
        }
    }
}

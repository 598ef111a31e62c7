//! Scalar Brownian paths and the exponential transform `Q = exp(σW)`.
//!
//! Sampled paths are built so that refinement is consistent: writing the step
//! count as `M = m0·2^L` with `m0` odd, the `m0` coarse increments come from a
//! seeded base stream and each dyadic level adds Brownian-bridge midpoints from
//! its own stream. The `2M`-step path restricted to the even grid points is
//! therefore exactly the `M`-step path for the same seed.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Sampled,
    Synthetic,
}

/// `W` on the uniform grid `t_j = j·T/M`, `j = 0..=M`, with `W(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    horizon: f64,
    values: Vec<f64>,
    seed: u64,
    kind: PathKind,
}

fn odd_part(mut m: usize) -> (usize, u32) {
    let mut levels = 0;
    while m % 2 == 0 {
        m /= 2;
        levels += 1;
    }
    (m, levels)
}

impl BrownianPath {
    /// Seeded, refinement-consistent Brownian sample with `steps` increments.
    pub fn sample(seed: u64, steps: usize, horizon: f64) -> Result<Self> {
        if steps < 1 {
            return Err(Error::InvalidParameter("path needs at least one step".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let (base, levels) = odd_part(steps);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coarse_dt = horizon / base as f64;
        let mut values = Vec::with_capacity(steps + 1);
        values.push(0.0);
        let mut w = 0.0;
        for _ in 0..base {
            let z: f64 = rng.sample(StandardNormal);
            w += coarse_dt.sqrt() * z;
            values.push(w);
        }
        let mut dt = coarse_dt;
        for level in 1..=levels {
            rng.set_stream(u64::from(level));
            let half = dt / 2.0;
            let sd = (half / 2.0).sqrt();
            let mut refined = Vec::with_capacity(2 * values.len() - 1);
            refined.push(values[0]);
            for pair in values.windows(2) {
                let z: f64 = rng.sample(StandardNormal);
                refined.push(0.5 * (pair[0] + pair[1]) + sd * z);
                refined.push(pair[1]);
            }
            values = refined;
            dt = half;
        }
        Ok(Self {
            horizon,
            values,
            seed,
            kind: PathKind::Sampled,
        })
    }

    /// Deterministic path `W(t_j) = f(t_j) - f(0)`.
    pub fn synthetic(steps: usize, horizon: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if steps < 1 || !(horizon > 0.0) {
            return Err(Error::InvalidParameter(
                "synthetic path needs steps ≥ 1 and T > 0".into(),
            ));
        }
        let dt = horizon / steps as f64;
        let f0 = f(0.0);
        let values = (0..=steps).map(|j| f(j as f64 * dt) - f0).collect();
        Ok(Self {
            horizon,
            values,
            seed: 0,
            kind: PathKind::Synthetic,
        })
    }

    /// The smooth path `W(t) = sin t`.
    pub fn sine(steps: usize, horizon: f64) -> Result<Self> {
        Self::synthetic(steps, horizon, f64::sin)
    }

    pub fn zero(steps: usize, horizon: f64) -> Result<Self> {
        Self::synthetic(steps, horizon, |_| 0.0)
    }

    /// `W + ε·H` on the same grid, keeping seed and kind.
    pub fn shifted(&self, eps: f64, h: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for (j, w) in out.values.iter_mut().enumerate() {
            *w += eps * h(j as f64 * self.dt());
        }
        out
    }

    /// Every `factor`-th grid value.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps()
            )));
        }
        Ok(Self {
            horizon: self.horizon,
            values: self.values.iter().step_by(factor).copied().collect(),
            seed: self.seed,
            kind: self.kind,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps() {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|j| self.time(j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has at least two points")
    }

    pub fn increment(&self, j: usize) -> f64 {
        self.values[j + 1] - self.values[j]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn running_max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

/// `Q^N(t_j) = exp(σ·clamp(W(t_j), -N, N))`; `N = ∞` gives the untruncated `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QPath {
    base: BrownianPath,
    sigma: f64,
    level: f64,
    q: Vec<f64>,
}

pub fn q_of(path: &BrownianPath, sigma: f64, level: f64) -> QPath {
    let q = path
        .values
        .iter()
        .map(|&w| (sigma * w.clamp(-level, level)).exp())
        .collect();
    QPath {
        base: path.clone(),
        sigma,
        level,
        q,
    }
}

impl QPath {
    pub fn base(&self) -> &BrownianPath {
        &self.base
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn q(&self, j: usize) -> f64 {
        self.q[j]
    }

    pub fn steps(&self) -> usize {
        self.base.steps()
    }

    pub fn dt(&self) -> f64 {
        self.base.dt()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.base.time(j)
    }

    /// Linear interpolation of `Q` at an arbitrary `t ∈ [0, T]`.
    pub fn q_at(&self, t: f64) -> f64 {
        let dt = self.dt();
        let mut x = (t / dt).clamp(0.0, self.steps() as f64);
        if (x - x.round()).abs() < 1e-9 {
            x = x.round();
        }
        let j = (x.floor() as usize).min(self.steps() - 1);
        let theta = x - j as f64;
        if theta == 0.0 {
            return self.q[j];
        }
        if theta == 1.0 {
            return self.q[j + 1];
        }
        (1.0 - theta) * self.q[j] + theta * self.q[j + 1]
    }

    /// True when `W(t_j)` lies strictly inside the clamp.
    pub fn is_interior(&self, j: usize) -> bool {
        self.base.values[j].abs() < self.level
    }

    /// `𝒟_r Q(s)` for grid indices `r`, `s`: `σQ(s)` when `r ≤ s` and the clamp
    /// is inactive at `s`, zero otherwise.
    pub fn d_q(&self, r: usize, s: usize) -> f64 {
        if r <= s && self.is_interior(s) {
            self.sigma * self.q[s]
        } else {
            0.0
        }
    }

    /// `(𝒟⁺Q)_s`, `(𝒟⁻Q)_s` and `(∇Q)_s` read one grid point off the diagonal.
    pub fn one_sided_traces(&self, s: usize) -> (f64, f64, f64) {
        let plus = if s < self.steps() {
            self.d_q(s, s + 1)
        } else {
            self.d_q(s, s)
        };
        let minus = if s > 0 { self.d_q(s, s - 1) } else { 0.0 };
        (plus, minus, plus + minus)
    }

    /// `sup_j 𝒟_r Q(t_j)` over all grid pairs; bounded by `σ·exp(σN)`.
    pub fn d_q_sup(&self) -> f64 {
        (0..=self.steps()).map(|s| self.d_q(0, s)).fold(0.0, f64::max)
    }

    /// CSV `t,W,Q` with one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,W,Q\n");
        for j in 0..=self.steps() {
            let _ = writeln!(out, "{},{},{}", self.time(j), self.base.values[j], self.q[j]);
        }
        out
    }
}

/// Indicator of `Ω_N = {sup_j |W(t_j)| ≤ N}` on the grid.
pub fn omega_n_indicator(path: &BrownianPath, level: f64) -> bool {
    path.running_max_abs() <= level
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        let a = BrownianPath::sample(42, 100, 1.0).unwrap();
        let b = BrownianPath::sample(42, 100, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value(0), 0.0);
        assert_ne!(a, BrownianPath::sample(43, 100, 1.0).unwrap());
    }

    #[test]
    fn refinement_is_consistent() {
        for steps in [1usize, 3, 8, 25, 100] {
            let coarse = BrownianPath::sample(7, steps, 2.0).unwrap();
            let fine = BrownianPath::sample(7, 2 * steps, 2.0).unwrap();
            assert_eq!(fine.coarsen(2).unwrap().values(), coarse.values());
            let finer = BrownianPath::sample(7, 8 * steps, 2.0).unwrap();
            assert_eq!(finer.coarsen(8).unwrap().values(), coarse.values());
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(BrownianPath::sample(1, 0, 1.0).is_err());
        assert!(BrownianPath::sample(1, 4, 0.0).is_err());
    }

    #[test]
    fn terminal_mean_within_clt_band() {
        let t = 1.5;
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|s| BrownianPath::sample(s, 16, t).unwrap().terminal())
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() <= 3.0 * t.sqrt() / 100.0, "mean {mean}");
    }

    #[test]
    fn increments_have_grid_variance() {
        let steps = 64;
        let t = 1.0;
        let mut acc = 0.0;
        let paths = 2000;
        for s in 0..paths {
            let p = BrownianPath::sample(s, steps, t).unwrap();
            acc += (0..steps).map(|j| p.increment(j).powi(2)).sum::<f64>();
        }
        let var = acc / (paths * steps as u64) as f64;
        let dt = t / steps as f64;
        assert!((var / dt - 1.0).abs() < 0.02, "ratio {}", var / dt);
    }

    #[test]
    fn d_q_cases() {
        let p = BrownianPath::sine(10, 1.0).unwrap();
        let q = q_of(&p, 0.5, f64::INFINITY);
        assert_eq!(q.d_q(5, 3), 0.0);
        assert!((q.d_q(3, 5) - 0.5 * (0.5 * p.value(5)).exp()).abs() < 1e-15);
        let (plus, minus, nabla) = q.one_sided_traces(4);
        assert_eq!(minus, 0.0);
        assert!((plus - 0.5 * q.q(5)).abs() < 1e-15);
        assert_eq!(nabla, plus);
    }

    #[test]
    fn truncation_clamps_and_kills_derivative() {
        let p = BrownianPath::synthetic(10, 1.0, |t| 3.0 * t).unwrap();
        let q = q_of(&p, 0.4, 1.5);
        for j in 0..=10 {
            assert!(q.q(j) <= (0.4f64 * 1.5).exp() + 1e-15);
            if p.value(j) > 1.5 {
                assert_eq!(q.d_q(0, j), 0.0);
            }
        }
        assert!(q.d_q_sup() <= 0.4 * (0.4f64 * 1.5).exp());
    }

    #[test]
    fn q_matches_truncated_on_omega_n() {
        for seed in 0..50 {
            let p = BrownianPath::sample(seed, 64, 1.0).unwrap();
            if omega_n_indicator(&p, 2.0) {
                assert_eq!(q_of(&p, 0.7, 2.0).values(), q_of(&p, 0.7, f64::INFINITY).values());
            }
        }
    }

    #[test]
    fn omega_n_edge_cases() {
        let z = BrownianPath::zero(10, 1.0).unwrap();
        assert!(omega_n_indicator(&z, 1e-9));
        let p = BrownianPath::sample(3, 10, 1.0).unwrap();
        assert!(!omega_n_indicator(&p, 0.0));
    }

    #[test]
    fn interpolation_hits_grid_values() {
        let p = BrownianPath::sample(9, 20, 1.0).unwrap();
        let q = q_of(&p, 1.0, f64::INFINITY);
        for j in 0..=20 {
            assert_eq!(q.q_at(q.time(j)), q.q(j));
        }
        let mid = q.q_at(0.5 * (q.time(3) + q.time(4)));
        assert!((mid - 0.5 * (q.q(3) + q.q(4))).abs() < 1e-14);
    }
}

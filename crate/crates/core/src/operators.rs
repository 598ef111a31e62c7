//! Linear and bilinear operators of the transformed second grade system.
//!
//! * `Â = (I+αA)^{-1}A`, diagonal with symbol `|k|²/(1+α|k|²)`.
//! * `B̂(u,v) = (I+αA)^{-1} P(curl(u-αΔu) × v)`, evaluated either through
//!   dealiased physical-space products ([`BilinearEngine`]) or by the exact
//!   convolution sum ([`b_hat_direct`]).
//! * `F̂(u,t) = (I+αA)^{-1}F(u,t)` for the built-in [`ForceSpec`] family.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{inner_v, v_weight, ModeLayout, ScalarSpectralField, SpectralField, WaveVector};

/// Symbol of `Â`.
#[inline]
pub fn a_hat_symbol(k: WaveVector, alpha: f64) -> f64 {
    k.norm_sq() / (1.0 + alpha * k.norm_sq())
}

pub fn apply_a_hat(u: &SpectralField, alpha: f64) -> SpectralField {
    u.map_symbol(|k| a_hat_symbol(k, alpha))
}

/// `(I+αA)^{-1}` on divergence-free fields.
pub fn lift(u: &SpectralField, alpha: f64) -> SpectralField {
    u.map_symbol(|k| 1.0 / v_weight(k, alpha))
}

/// `curl(u - αΔu)` as a scalar field: symbol `i|k|(1+α|k|²)`.
pub fn curl_transport_weight(u: &SpectralField, alpha: f64) -> ScalarSpectralField {
    let mut out = ScalarSpectralField::zeros(u.cutoff());
    let layout = u.layout();
    let src = u.raw();
    let dst = out.raw_mut();
    for (idx, k) in layout.modes() {
        dst[idx] = src[idx] * Complex64::new(0.0, k.norm() * v_weight(k, alpha));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BMethod {
    #[default]
    Transform,
    Direct,
}

/// Smallest grid that dealiases a quadratic product at cutoff `n`.
pub fn min_grid(n: usize) -> usize {
    3 * n + 1
}

/// Default physical grid, `4n`.
pub fn default_grid(n: usize) -> usize {
    4 * n
}

/// Per-worker transform workspace for `B̂` at a fixed cutoff and `α`.
///
/// Not shareable: scratch grids are reused between calls.
pub struct BilinearEngine {
    cutoff: usize,
    alpha: f64,
    grid: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    omega: Vec<Complex64>,
    vel: Vec<Complex64>,
    acc: Vec<Complex64>,
    column: Vec<Complex64>,
    scratch: Vec<Complex64>,
    // per-slot symbols on the (2n+1)² layout
    curl: Vec<f64>,
    pol: Vec<[f64; 2]>,
    inv_lift: Vec<f64>,
}

impl BilinearEngine {
    pub fn new(cutoff: usize, alpha: f64, grid: usize) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::InvalidCutoff(cutoff));
        }
        if grid < min_grid(cutoff) {
            return Err(Error::GridTooSmall {
                grid,
                cutoff,
                min: min_grid(cutoff),
            });
        }
        Ok(Self::build(cutoff, alpha, grid))
    }

    fn build(cutoff: usize, alpha: f64, grid: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid);
        let inverse = planner.plan_fft_inverse(grid);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let layout = ModeLayout::new(cutoff);
        let mut curl = vec![0.0; layout.len()];
        let mut pol = vec![[0.0; 2]; layout.len()];
        let mut inv_lift = vec![0.0; layout.len()];
        for (idx, k) in layout.modes() {
            curl[idx] = k.norm() * v_weight(k, alpha);
            pol[idx] = k.polarization();
            inv_lift[idx] = 1.0 / v_weight(k, alpha);
        }
        let zero = Complex64::new(0.0, 0.0);
        Self {
            cutoff,
            alpha,
            grid,
            forward,
            inverse,
            omega: vec![zero; grid * grid],
            vel: vec![zero; grid * grid],
            acc: vec![zero; grid * grid],
            column: vec![zero; grid],
            scratch: vec![zero; scratch_len],
            curl,
            pol,
            inv_lift,
        }
    }

    pub fn with_default_grid(cutoff: usize, alpha: f64) -> Result<Self> {
        Self::new(cutoff, alpha, default_grid(cutoff).max(min_grid(cutoff)))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    #[inline]
    fn wrap(&self, k: i32) -> usize {
        k.rem_euclid(self.grid as i32) as usize
    }

    fn check(&self, f: &SpectralField) -> Result<()> {
        if f.cutoff() != self.cutoff {
            return Err(Error::CutoffMismatch {
                left: f.cutoff(),
                right: self.cutoff,
            });
        }
        Ok(())
    }

    fn fft2(fft: &dyn Fft<f64>, data: &mut [Complex64], column: &mut [Complex64], scratch: &mut [Complex64], m: usize) {
        for row in data.chunks_exact_mut(m) {
            fft.process_with_scratch(row, scratch);
        }
        for j in 0..m {
            for i in 0..m {
                column[i] = data[i * m + j];
            }
            fft.process_with_scratch(column, scratch);
            for i in 0..m {
                data[i * m + j] = column[i];
            }
        }
    }

    /// Loads `ω = curl(u-αΔu)` and the packed velocity `v1 + i v2` of `v` into
    /// physical space, then accumulates `i ω (v1 + i v2) = g1 + i g2` with
    /// `g = ω ẑ × v`.
    fn accumulate_product(&mut self, u: &SpectralField, v: &SpectralField) {
        let m = self.grid;
        let zero = Complex64::new(0.0, 0.0);
        self.omega.fill(zero);
        self.vel.fill(zero);
        let norm = 1.0 / (2.0 * PI);
        let layout = ModeLayout::new(self.cutoff);
        let (cu, cv) = (u.raw(), v.raw());
        for (idx, k) in layout.modes() {
            let slot = self.wrap(k.k1) * m + self.wrap(k.k2);
            self.omega[slot] = cu[idx] * Complex64::new(0.0, self.curl[idx] * norm);
            let p = self.pol[idx];
            self.vel[slot] = cv[idx] * Complex64::new(p[0], p[1]) * norm;
        }
        Self::fft2(
            self.inverse.as_ref(),
            &mut self.omega,
            &mut self.column,
            &mut self.scratch,
            m,
        );
        Self::fft2(
            self.inverse.as_ref(),
            &mut self.vel,
            &mut self.column,
            &mut self.scratch,
            m,
        );
        for ((a, w), vel) in self.acc.iter_mut().zip(&self.omega).zip(&self.vel) {
            *a += Complex64::new(0.0, w.re) * vel;
        }
    }

    /// Forward transform of the accumulated product, Leray projection, lift.
    fn finish(&mut self) -> SpectralField {
        let m = self.grid;
        Self::fft2(
            self.forward.as_ref(),
            &mut self.acc,
            &mut self.column,
            &mut self.scratch,
            m,
        );
        let scale = 2.0 * PI / (m * m) as f64;
        let mut out = SpectralField::zeros(self.cutoff);
        let layout = ModeLayout::new(self.cutoff);
        let dst = out.raw_mut();
        for (idx, k) in layout.modes() {
            let h = self.acc[self.wrap(k.k1) * m + self.wrap(k.k2)];
            let hm = self.acc[self.wrap(-k.k1) * m + self.wrap(-k.k2)].conj();
            let g1 = (h + hm) * 0.5;
            let g2 = (h - hm) * Complex64::new(0.0, -0.5);
            let p = self.pol[idx];
            dst[idx] = (g1 * p[0] + g2 * p[1]) * (scale * self.inv_lift[idx]);
        }
        out
    }

    pub fn apply(&mut self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        self.apply_sum(&[(u, v)])
    }

    /// `Σ_i B̂(u_i, v_i)` with a single forward transform.
    pub fn apply_sum(&mut self, pairs: &[(&SpectralField, &SpectralField)]) -> Result<SpectralField> {
        for (u, v) in pairs {
            self.check(u)?;
            self.check(v)?;
        }
        self.acc.fill(Complex64::new(0.0, 0.0));
        for (u, v) in pairs {
            self.accumulate_product(u, v);
        }
        Ok(self.finish())
    }
}

/// Exact `B̂` by the O(n⁴) convolution sum; the oracle for the transform path.
///
/// `B̂(u,v)_k = [2π(1+α|k|²)]^{-1} Σ_{p+q=k} ω_p c_q (p2 q1 - p1 q2)/(|k||q|)`
/// with `ω_p = i|p|(1+α|p|²) u_p`.
pub fn b_hat_direct(u: &SpectralField, v: &SpectralField, alpha: f64) -> Result<SpectralField> {
    if u.cutoff() != v.cutoff() {
        return Err(Error::CutoffMismatch {
            left: u.cutoff(),
            right: v.cutoff(),
        });
    }
    let n = u.cutoff() as i32;
    let omega = curl_transport_weight(u, alpha);
    let mut out = SpectralField::zeros(u.cutoff());
    let layout = out.layout();
    for (idx, k) in layout.modes() {
        let mut acc = Complex64::new(0.0, 0.0);
        for p1 in -n..=n {
            let q1 = k.k1 - p1;
            if q1.abs() > n {
                continue;
            }
            for p2 in -n..=n {
                let q2 = k.k2 - p2;
                if q2.abs() > n || (p1 == 0 && p2 == 0) || (q1 == 0 && q2 == 0) {
                    continue;
                }
                let p = WaveVector { k1: p1, k2: p2 };
                let q = WaveVector { k1: q1, k2: q2 };
                let geom = f64::from(p2 * q1 - p1 * q2) / q.norm();
                acc += omega.get(p) * v.get(q) * geom;
            }
        }
        out.raw_mut()[idx] = acc / (2.0 * PI * k.norm() * v_weight(k, alpha));
    }
    Ok(out)
}

/// `B̂(u,v)` by the requested method; the transform path uses the default grid.
pub fn apply_b_hat(u: &SpectralField, v: &SpectralField, alpha: f64, method: BMethod) -> Result<SpectralField> {
    match method {
        BMethod::Direct => b_hat_direct(u, v, alpha),
        BMethod::Transform => {
            if u.cutoff() != v.cutoff() {
                return Err(Error::CutoffMismatch {
                    left: u.cutoff(),
                    right: v.cutoff(),
                });
            }
            BilinearEngine::with_default_grid(u.cutoff(), alpha)?.apply(u, v)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForceKind {
    #[default]
    Zero,
    /// `F(u,t) = c·e^{-t}·u`
    LinearGain,
    /// `F(u,t) = c·u/(1+|u|²_V)`
    Saturated,
}

/// Built-in forcing family; every kind satisfies `F(0,t) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ForceSpec {
    pub kind: ForceKind,
    #[serde(default)]
    pub gain: f64,
}

impl ForceSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn linear_gain(gain: f64) -> Self {
        Self {
            kind: ForceKind::LinearGain,
            gain,
        }
    }

    pub fn saturated(gain: f64) -> Self {
        Self {
            kind: ForceKind::Saturated,
            gain,
        }
    }

    /// Upper bound on the V-Lipschitz constant `C_F`.
    pub fn lipschitz_bound(&self) -> f64 {
        match self.kind {
            ForceKind::Zero => 0.0,
            ForceKind::LinearGain => self.gain.abs(),
            ForceKind::Saturated => 2.0 * self.gain.abs(),
        }
    }

    /// `F(u,t)` before the `(I+αA)^{-1}` lift.
    pub fn evaluate(&self, u: &SpectralField, t: f64, alpha: f64) -> SpectralField {
        match self.kind {
            ForceKind::Zero => SpectralField::zeros(u.cutoff()),
            ForceKind::LinearGain => u.scale(self.gain * (-t).exp()),
            ForceKind::Saturated => u.scale(self.gain / (1.0 + inner_v(u, u, alpha))),
        }
    }

    /// Fréchet derivative `𝔻F(u,t)(g)` before the lift.
    pub fn derivative(&self, u: &SpectralField, t: f64, g: &SpectralField, alpha: f64) -> SpectralField {
        match self.kind {
            ForceKind::Zero => SpectralField::zeros(g.cutoff()),
            ForceKind::LinearGain => g.scale(self.gain * (-t).exp()),
            ForceKind::Saturated => {
                let s = 1.0 + inner_v(u, u, alpha);
                let mut out = g.scale(self.gain / s);
                out.axpy(-2.0 * self.gain * inner_v(u, g, alpha) / (s * s), u);
                out
            }
        }
    }
}

pub fn apply_f_hat(u: &SpectralField, t: f64, spec: &ForceSpec, alpha: f64) -> SpectralField {
    lift(&spec.evaluate(u, t, alpha), alpha)
}

pub fn apply_df_hat(u: &SpectralField, t: f64, g: &SpectralField, spec: &ForceSpec, alpha: f64) -> SpectralField {
    lift(&spec.derivative(u, t, g, alpha), alpha)
}

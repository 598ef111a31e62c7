//! Divergence-free Fourier fields on the 2π-periodic torus.
//!
//! A velocity field is stored as one complex coefficient per wavevector `k`
//! with `max(|k1|,|k2|) <= n`, multiplying the real polarization
//! `p_k = k⊥/|k|` (with `k⊥ = (-k2, k1)`) against the L²-orthonormal scalar
//! mode `(2π)^{-1} e^{ik·x}`. Because `p_{-k} = -p_k`, a real field satisfies
//! `c_{-k} = -conj(c_k)`. Every field is mean-zero and divergence-free by
//! construction.
//!
//! All weights below are per-mode symbols; with the chosen normalization the
//! L² inner product is the plain coefficient sum `Σ_k c_k conj(d_k)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Integer wavevector on the torus; never `(0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveVector {
    pub k1: i32,
    pub k2: i32,
}

impl WaveVector {
    pub fn new(k1: i32, k2: i32) -> Result<Self> {
        if k1 == 0 && k2 == 0 {
            return Err(Error::ZeroWaveVector);
        }
        Ok(Self { k1, k2 })
    }

    /// `|k|²`, at least 1.
    pub fn norm_sq(self) -> f64 {
        f64::from(self.k1 * self.k1 + self.k2 * self.k2)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit divergence-free polarization `k⊥/|k|`.
    pub fn polarization(self) -> [f64; 2] {
        let m = self.norm();
        [-f64::from(self.k2) / m, f64::from(self.k1) / m]
    }

    /// Half-plane representative: `k1 > 0`, or `k1 == 0 && k2 > 0`.
    pub fn is_positive_half(self) -> bool {
        self.k1 > 0 || (self.k1 == 0 && self.k2 > 0)
    }

    pub fn neg(self) -> Self {
        Self {
            k1: -self.k1,
            k2: -self.k2,
        }
    }

    /// Square-cutoff shell index `max(|k1|,|k2|)`.
    pub fn shell(self) -> usize {
        self.k1.unsigned_abs().max(self.k2.unsigned_abs()) as usize
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.k1, self.k2)
    }
}

/// Partner coefficient at `-k` for a real velocity field.
#[inline]
pub fn velocity_partner(c: Complex64) -> Complex64 {
    -c.conj()
}

/// Dense `(2n+1)²` layout shared by velocity and scalar fields. The origin
/// slot exists for indexing convenience and is held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ModeLayout {
    n: usize,
}

impl ModeLayout {
    pub(crate) fn new(n: usize) -> Self {
        Self { n }
    }

    pub(crate) fn side(self) -> usize {
        2 * self.n + 1
    }

    pub(crate) fn len(self) -> usize {
        self.side() * self.side()
    }

    #[inline]
    pub(crate) fn index(self, k1: i32, k2: i32) -> usize {
        let n = self.n as i32;
        ((k1 + n) as usize) * self.side() + (k2 + n) as usize
    }

    pub(crate) fn contains(self, k1: i32, k2: i32) -> bool {
        let n = self.n as i32;
        k1.abs() <= n && k2.abs() <= n
    }

    /// All non-zero wavevectors with their slot index, in layout order.
    pub(crate) fn modes(self) -> impl Iterator<Item = (usize, WaveVector)> {
        let n = self.n as i32;
        let side = self.side();
        (-n..=n).flat_map(move |k1| {
            (-n..=n).filter_map(move |k2| {
                if k1 == 0 && k2 == 0 {
                    None
                } else {
                    let idx = ((k1 + n) as usize) * side + (k2 + n) as usize;
                    Some((idx, WaveVector { k1, k2 }))
                }
            })
        })
    }
}

/// Mean-zero divergence-free velocity field with square cutoff `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    cutoff: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(cutoff: usize) -> Self {
        Self {
            cutoff,
            coeffs: vec![Complex64::new(0.0, 0.0); ModeLayout::new(cutoff).len()],
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub(crate) fn layout(&self) -> ModeLayout {
        ModeLayout::new(self.cutoff)
    }

    pub(crate) fn raw(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Number of stored (non-origin) wavevectors.
    pub fn mode_count(&self) -> usize {
        self.layout().len() - 1
    }

    /// Coefficient at `k`; zero outside the cutoff.
    pub fn get(&self, k: WaveVector) -> Complex64 {
        let layout = self.layout();
        if layout.contains(k.k1, k.k2) {
            self.coeffs[layout.index(k.k1, k.k2)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Sets `c_k = c` and `c_{-k} = -conj(c)`, keeping the field real.
    pub fn set_pair(&mut self, k: WaveVector, c: Complex64) -> Result<()> {
        let layout = self.layout();
        if !layout.contains(k.k1, k.k2) {
            return Err(Error::OutsideCutoff {
                k1: k.k1,
                k2: k.k2,
                cutoff: self.cutoff,
            });
        }
        self.coeffs[layout.index(k.k1, k.k2)] = c;
        self.coeffs[layout.index(-k.k1, -k.k2)] = velocity_partner(c);
        Ok(())
    }

    /// Builds a real field from a function evaluated on the positive half-plane.
    pub fn from_half_plane(cutoff: usize, mut f: impl FnMut(WaveVector) -> Complex64) -> Self {
        let mut out = Self::zeros(cutoff);
        let layout = out.layout();
        for (idx, k) in layout.modes() {
            if k.is_positive_half() {
                let c = f(k);
                out.coeffs[idx] = c;
                out.coeffs[layout.index(-k.k1, -k.k2)] = velocity_partner(c);
            }
        }
        out
    }

    /// Random real field with Gaussian coefficients scaled by `(1+|k|²)^{-decay}`.
    pub fn random<R: Rng + ?Sized>(cutoff: usize, decay: f64, rng: &mut R) -> Self {
        Self::from_half_plane(cutoff, |k| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a, b) * (1.0 + k.norm_sq()).powf(-decay)
        })
    }

    /// Analytic field: modulus `amplitude·e^{-rate·|k|}` with random phases.
    pub fn analytic<R: Rng + ?Sized>(cutoff: usize, amplitude: f64, rate: f64, rng: &mut R) -> Self {
        Self::from_half_plane(cutoff, |k| {
            let phase: f64 = rng.random_range(0.0..(2.0 * PI));
            Complex64::from_polar(amplitude * (-rate * k.norm()).exp(), phase)
        })
    }

    /// Iterates non-origin modes with their coefficients.
    pub fn modes(&self) -> impl Iterator<Item = (WaveVector, Complex64)> + '_ {
        self.layout().modes().map(move |(idx, k)| (k, self.coeffs[idx]))
    }

    /// Max violation of `c_{-k} = -conj(c_k)` and of the zero origin slot.
    pub fn reality_defect(&self) -> f64 {
        let layout = self.layout();
        let origin = self.coeffs[layout.index(0, 0)].norm();
        layout
            .modes()
            .map(|(idx, k)| (self.coeffs[idx] - velocity_partner(self.coeffs[layout.index(-k.k1, -k.k2)])).norm())
            .fold(origin, f64::max)
    }

    /// Re-expresses the field on cutoff `n`, dropping or zero-padding modes.
    pub fn with_cutoff(&self, n: usize) -> Self {
        if n == self.cutoff {
            return self.clone();
        }
        let mut out = Self::zeros(n);
        let dst = out.layout();
        let m = n.min(self.cutoff) as i32;
        let src = self.layout();
        for k1 in -m..=m {
            for k2 in -m..=m {
                out.coeffs[dst.index(k1, k2)] = self.coeffs[src.index(k1, k2)];
            }
        }
        out
    }

    /// Multiplies every mode by the real symbol `w(k)`.
    pub fn map_symbol(&self, mut w: impl FnMut(WaveVector) -> f64) -> Self {
        let mut out = self.clone();
        for (idx, k) in self.layout().modes() {
            out.coeffs[idx] *= w(k);
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale_in_place(a);
        out
    }

    pub fn scale_in_place(&mut self, a: f64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    /// `self += a·x`; cutoffs must match.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        assert_eq!(self.cutoff, x.cutoff, "cutoff mismatch in axpy");
        for (s, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += xv * a;
        }
    }

    pub fn add(&self, x: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, x);
        out
    }

    pub fn sub(&self, x: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, x);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Physical-space velocity `(u1, u2)` at point `x` by direct summation.
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for (k, c) in self.modes() {
            let phase = f64::from(k.k1) * x[0] + f64::from(k.k2) * x[1];
            let v = (c * Complex64::from_polar(1.0, phase)).re / (2.0 * PI);
            let p = k.polarization();
            u[0] += v * p[0];
            u[1] += v * p[1];
        }
        u
    }
}

/// Real scalar field with conjugate symmetry `c_{-k} = conj(c_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSpectralField {
    cutoff: usize,
    coeffs: Vec<Complex64>,
}

impl ScalarSpectralField {
    pub fn zeros(cutoff: usize) -> Self {
        Self {
            cutoff,
            coeffs: vec![Complex64::new(0.0, 0.0); ModeLayout::new(cutoff).len()],
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, k: WaveVector) -> Complex64 {
        let layout = ModeLayout::new(self.cutoff);
        if layout.contains(k.k1, k.k2) {
            self.coeffs[layout.index(k.k1, k.k2)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (WaveVector, Complex64)> + '_ {
        ModeLayout::new(self.cutoff)
            .modes()
            .map(move |(idx, k)| (k, self.coeffs[idx]))
    }

    pub fn reality_defect(&self) -> f64 {
        let layout = ModeLayout::new(self.cutoff);
        layout
            .modes()
            .map(|(idx, k)| (self.coeffs[idx] - self.coeffs[layout.index(-k.k1, -k.k2)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// L² inner product.
    pub fn inner(&self, other: &ScalarSpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }
}

/// Weighted pairing `Σ_k w(k) Re(c_k conj(d_k))` over the common modes.
pub fn weighted_inner(u: &SpectralField, v: &SpectralField, mut w: impl FnMut(WaveVector) -> f64) -> f64 {
    let n = u.cutoff.min(v.cutoff) as i32;
    let lu = u.layout();
    let lv = v.layout();
    let mut acc = 0.0;
    for k1 in -n..=n {
        for k2 in -n..=n {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let a = u.coeffs[lu.index(k1, k2)];
            let b = v.coeffs[lv.index(k1, k2)];
            acc += w(WaveVector { k1, k2 }) * (a.re * b.re + a.im * b.im);
        }
    }
    acc
}

/// Per-mode symbol of `(u,v)_V = (u,v) + α((u,v))`.
#[inline]
pub fn v_weight(k: WaveVector, alpha: f64) -> f64 {
    1.0 + alpha * k.norm_sq()
}

/// Per-mode symbol of `(u,v)_W = (curl(u-αΔu), curl(v-αΔv))`.
#[inline]
pub fn w_weight(k: WaveVector, alpha: f64) -> f64 {
    let s = 1.0 + alpha * k.norm_sq();
    k.norm_sq() * s * s
}

/// `λ_k = |k|²(1+α|k|²)`, the ratio of the W and V symbols.
#[inline]
pub fn eigenvalue(k: WaveVector, alpha: f64) -> f64 {
    k.norm_sq() * (1.0 + alpha * k.norm_sq())
}

pub fn inner_l2(u: &SpectralField, v: &SpectralField) -> f64 {
    weighted_inner(u, v, |_| 1.0)
}

pub fn inner_v(u: &SpectralField, v: &SpectralField, alpha: f64) -> f64 {
    weighted_inner(u, v, |k| v_weight(k, alpha))
}

pub fn inner_w(u: &SpectralField, v: &SpectralField, alpha: f64) -> f64 {
    weighted_inner(u, v, |k| w_weight(k, alpha))
}

/// Gradient bilinear form `((u,v)) = ∫∇u·∇v`.
pub fn inner_h1(u: &SpectralField, v: &SpectralField) -> f64 {
    weighted_inner(u, v, |k| k.norm_sq())
}

pub fn norm_v(u: &SpectralField, alpha: f64) -> f64 {
    inner_v(u, u, alpha).max(0.0).sqrt()
}

pub fn norm_w(u: &SpectralField, alpha: f64) -> f64 {
    inner_w(u, u, alpha).max(0.0).sqrt()
}

pub fn seminorm_h1(u: &SpectralField) -> f64 {
    inner_h1(u, u).max(0.0).sqrt()
}

/// Dual norm on the truncated span with symbol `1/(|k|²(1+α|k|²)²)`.
pub fn norm_wstar(u: &SpectralField, alpha: f64) -> f64 {
    weighted_inner(u, u, |k| 1.0 / w_weight(k, alpha)).max(0.0).sqrt()
}

/// One element of the W-orthonormal, V-orthogonal eigenbasis.
///
/// For a half-plane representative `k` the element is the "cosine" field
/// `c_k = s, c_{-k} = -s`; for `-k` it is the "sine" field `c_k = c_{-k} = i s`
/// attached to the representative. Together they give one real basis field
/// per stored wavevector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisElement {
    pub k: WaveVector,
    pub lambda: f64,
    pub normalization: f64,
}

impl BasisElement {
    pub fn to_field(&self, cutoff: usize) -> Result<SpectralField> {
        let mut out = SpectralField::zeros(cutoff);
        if self.k.is_positive_half() {
            out.set_pair(self.k, Complex64::new(self.normalization, 0.0))?;
        } else {
            out.set_pair(self.k.neg(), Complex64::new(0.0, self.normalization))?;
        }
        Ok(out)
    }
}

/// Eigenbasis ordered by `(|k|², k1, k2)`, i.e. ascending `λ`.
pub fn build_basis(n: usize, alpha: f64) -> Result<Vec<BasisElement>> {
    if n < 1 {
        return Err(Error::InvalidCutoff(n));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let mut ks: Vec<WaveVector> = ModeLayout::new(n).modes().map(|(_, k)| k).collect();
    ks.sort_by_key(|k| (k.k1 * k.k1 + k.k2 * k.k2, k.k1, k.k2));
    Ok(ks
        .into_iter()
        .map(|k| BasisElement {
            k,
            lambda: eigenvalue(k, alpha),
            normalization: 1.0 / (2.0 * w_weight(k, alpha)).sqrt(),
        })
        .collect())
}

/// Galerkin projection onto the square cutoff `n`.
pub fn project(u: &SpectralField, n: usize) -> SpectralField {
    u.with_cutoff(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wavevector_rejects_origin() {
        assert!(WaveVector::new(0, 0).is_err());
        assert_eq!(WaveVector::new(1, 1).unwrap().norm_sq(), 2.0);
    }

    #[test]
    fn basis_eigenvalues_match_symbol() {
        let basis = build_basis(1, 1.0).unwrap();
        assert_eq!(basis.len(), 8);
        let lam = |k1, k2| basis.iter().find(|b| b.k == WaveVector { k1, k2 }).unwrap().lambda;
        assert_eq!(lam(1, 0), 2.0);
        assert_eq!(lam(1, 1), 6.0);
        assert!(basis.windows(2).all(|w| w[0].lambda <= w[1].lambda));
    }

    #[test]
    fn basis_rejects_zero_cutoff() {
        assert!(matches!(build_basis(0, 1.0), Err(Error::InvalidCutoff(0))));
    }

    #[test]
    fn basis_is_w_orthonormal_and_v_orthogonal() {
        let alpha = 0.7;
        let basis = build_basis(3, alpha).unwrap();
        let fields: Vec<_> = basis.iter().map(|b| b.to_field(3).unwrap()).collect();
        for (i, a) in fields.iter().enumerate() {
            for (j, b) in fields.iter().enumerate() {
                let w = inner_w(a, b, alpha);
                let v = inner_v(a, b, alpha);
                if i == j {
                    assert!((w - 1.0).abs() < 1e-14);
                    assert!((v - 1.0 / basis[i].lambda).abs() < 1e-14);
                } else {
                    assert!(w.abs() < 1e-15 && v.abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_mode_v_norm() {
        let mut u = SpectralField::zeros(2);
        u.set_pair(WaveVector::new(1, 0).unwrap(), Complex64::new(1.0, 0.0))
            .unwrap();
        assert!((inner_v(&u, &u, 1.0) - 4.0).abs() < 1e-15);
        assert_eq!(inner_v(&u, &SpectralField::zeros(2), 1.0), 0.0);
    }

    #[test]
    fn projection_is_idempotent_and_contractive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = SpectralField::random(6, 1.0, &mut rng);
        let p = project(&u, 4);
        assert_eq!(project(&p, 4), p);
        assert!(norm_w(&p, 1.0) <= norm_w(&u, 1.0));
        assert_eq!(project(&u, 6), u);
        assert!(project(&SpectralField::zeros(6), 3).is_zero());
        let padded = project(&p, 7);
        assert_eq!(project(&padded, 4), p);
    }

    #[test]
    fn random_fields_are_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = SpectralField::random(5, 0.5, &mut rng);
        assert_eq!(u.reality_defect(), 0.0);
    }

    fn eval_gradient(u: &SpectralField, x: [f64; 2]) -> [[f64; 2]; 2] {
        // g[c][d] = ∂_d u_c by direct summation of the Fourier series.
        let mut g = [[0.0; 2]; 2];
        for (k, c) in u.modes() {
            let phase = f64::from(k.k1) * x[0] + f64::from(k.k2) * x[1];
            let e = c * Complex64::from_polar(1.0, phase) * Complex64::i() / (2.0 * PI);
            let p = k.polarization();
            let kd = [f64::from(k.k1), f64::from(k.k2)];
            for comp in 0..2 {
                for dir in 0..2 {
                    g[comp][dir] += (e * kd[dir]).re * p[comp];
                }
            }
        }
        g
    }

    #[test]
    fn parseval_against_physical_quadrature() {
        // Tensor quadrature with 2n+1 points per side integrates trigonometric
        // polynomials of degree ≤ 2n exactly.
        let n = 4;
        let alpha = 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = SpectralField::random(n, 0.5, &mut rng);
        let m = 2 * n + 1;
        let h = 2.0 * PI / m as f64;
        let (mut l2, mut grad) = (0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let x = [i as f64 * h, j as f64 * h];
                let v = u.eval(x);
                l2 += (v[0] * v[0] + v[1] * v[1]) * h * h;
                let g = eval_gradient(&u, x);
                grad += g.iter().flatten().map(|a| a * a).sum::<f64>() * h * h;
            }
        }
        let quad_v = l2 + alpha * grad;
        let exact_v = inner_v(&u, &u, alpha);
        assert!((quad_v - exact_v).abs() <= 1e-10 * exact_v);
        assert!((grad - seminorm_h1(&u).powi(2)).abs() <= 1e-10 * grad);
    }

    #[test]
    fn physical_field_is_divergence_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = SpectralField::random(3, 0.5, &mut rng);
        for x in [[0.3, 1.1], [2.0, 5.5], [4.4, 0.1]] {
            let g = eval_gradient(&u, x);
            assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        }
    }
}

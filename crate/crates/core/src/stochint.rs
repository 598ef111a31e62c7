//! Discrete stochastic integrals against the scalar path and the residual
//! checks built on them.
//!
//! Integrals run over grid indices `0..upto`, i.e. over `[0, t_upto]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::{apply_a_hat, lift};
use crate::solver::{assemble_u, make_xi, solve_v, DriftOps, InitSpec, SolverConfig};
use crate::spectral::{norm_v, SpectralField};
use crate::wiener::{omega_n_indicator, BrownianPath, QPath};

/// Values that can be summed with real weights.
pub trait Vector: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, a: f64, x: &Self);
}

impl Vector for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Vector for SpectralField {
    fn zero_like(&self) -> Self {
        SpectralField::zeros(self.cutoff())
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        SpectralField::axpy(self, a, x);
    }
}

/// Integrand on the path grid with an optional `∇` trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandPath<T> {
    values: Vec<T>,
    nabla: Option<Vec<T>>,
}

impl<T: Vector> IntegrandPath<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::GridMismatch("integrand has no values".into()));
        }
        Ok(Self { values, nabla: None })
    }

    pub fn with_nabla(mut self, nabla: Vec<T>) -> Result<Self> {
        if nabla.len() != self.values.len() {
            return Err(Error::GridMismatch(format!(
                "{} nabla values for {} grid points",
                nabla.len(),
                self.values.len()
            )));
        }
        self.nabla = Some(nabla);
        Ok(self)
    }

    /// Samples `f(j)` at every grid point of `path`.
    pub fn from_fn(path: &BrownianPath, f: impl Fn(usize) -> T) -> Self {
        Self {
            values: (0..=path.steps()).map(f).collect(),
            nabla: None,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn nabla(&self) -> Option<&[T]> {
        self.nabla.as_deref()
    }

    fn check(&self, path: &BrownianPath, upto: usize) -> Result<()> {
        if self.values.len() != path.steps() + 1 {
            return Err(Error::GridMismatch(format!(
                "integrand has {} points, path has {}",
                self.values.len(),
                path.steps() + 1
            )));
        }
        if upto > path.steps() {
            return Err(Error::GridMismatch(format!(
                "upper index {upto} beyond {} steps",
                path.steps()
            )));
        }
        Ok(())
    }
}

/// `Σ_{j<upto} (x_j + x_{j+1})/2 · σΔW_j`.
pub fn stratonovich_midpoint<T: Vector>(
    x: &IntegrandPath<T>,
    path: &BrownianPath,
    sigma: f64,
    upto: usize,
) -> Result<T> {
    x.check(path, upto)?;
    let mut acc = x.values[0].zero_like();
    for j in 0..upto {
        let w = 0.5 * sigma * path.increment(j);
        acc.axpy(w, &x.values[j]);
        acc.axpy(w, &x.values[j + 1]);
    }
    Ok(acc)
}

/// `Σ_{j<upto} x_j · σΔW_j`.
pub fn ito_sum<T: Vector>(x: &IntegrandPath<T>, path: &BrownianPath, sigma: f64, upto: usize) -> Result<T> {
    x.check(path, upto)?;
    let mut acc = x.values[0].zero_like();
    for j in 0..upto {
        acc.axpy(sigma * path.increment(j), &x.values[j]);
    }
    Ok(acc)
}

/// Trapezoid rule for `∫₀^{t_upto} x ds` on a uniform grid.
pub fn trapezoid<T: Vector>(values: &[T], dt: f64, upto: usize) -> T {
    let mut acc = values[0].zero_like();
    for j in 0..upto {
        acc.axpy(0.5 * dt, &values[j]);
        acc.axpy(0.5 * dt, &values[j + 1]);
    }
    acc
}

/// Cumulative trapezoid: entry `j` is `∫₀^{t_j} x ds`.
pub fn cumulative_trapezoid<T: Vector>(values: &[T], dt: f64) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = values[0].zero_like();
    out.push(acc.clone());
    for pair in values.windows(2) {
        acc.axpy(0.5 * dt, &pair[0]);
        acc.axpy(0.5 * dt, &pair[1]);
        out.push(acc.clone());
    }
    out
}

/// Skorohod integral `δ(σx1_{[0,t]})` as the midpoint Stratonovich sum minus
/// `(σ/2)∫(∇x)_s ds`.
pub fn skorohod_from_stratonovich<T: Vector>(
    x: &IntegrandPath<T>,
    path: &BrownianPath,
    sigma: f64,
    upto: usize,
) -> Result<T> {
    let nabla = x.nabla.as_ref().ok_or(Error::MissingNabla)?;
    let mut acc = stratonovich_midpoint(x, path, sigma, upto)?;
    acc.axpy(-0.5 * sigma, &trapezoid(nabla, path.dt(), upto));
    Ok(acc)
}

/// Analytically tractable pairs `(X¹, X²)` for the product-rule check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductPair {
    /// `X¹ = W`, `X² = W(T)`
    WTerminal,
    /// `X¹ = Q`, `X² = W(T)`
    QTerminal,
    /// `X¹ = X² = Q`
    QQ,
}

impl ProductPair {
    pub const ALL: [ProductPair; 3] = [ProductPair::WTerminal, ProductPair::QTerminal, ProductPair::QQ];

    pub fn id(self) -> &'static str {
        match self {
            ProductPair::WTerminal => "w_wt",
            ProductPair::QTerminal => "q_wt",
            ProductPair::QQ => "q_q",
        }
    }
}

impl fmt::Display for ProductPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ProductPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProductPair::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| Error::UnknownExample(s.to_string()))
    }
}

/// `|X¹_tX²_t - RHS|` with every stochastic integral of the product formula
/// written as adapted Itô sums and every `ds` integral by the trapezoid rule.
///
/// The anticipating integrands are reduced with `δ(Fu) = Fδ(u) - ∫D_sF·u_s ds`
/// and the split `W(T) = W(t) + (W(T) - W(t))`, whose second part has zero
/// derivative on `[0,t]`; `δ(W(t)1_{[0,t]}) = 2∫₀ᵗW dW`.
pub fn product_rule_check(pair: ProductPair, path: &BrownianPath, sigma: f64, upto: usize) -> Result<f64> {
    if upto > path.steps() {
        return Err(Error::GridMismatch(format!(
            "upper index {upto} beyond {} steps",
            path.steps()
        )));
    }
    let dt = path.dt();
    let t = path.time(upto);
    let w_t = path.value(upto);
    let w_end = path.terminal();
    let q: Vec<f64> = path.values().iter().map(|w| (sigma * w).exp()).collect();
    let ito = |f: &dyn Fn(usize) -> f64| -> f64 { (0..upto).map(|j| f(j) * path.increment(j)).sum() };
    let (lhs, rhs) = match pair {
        ProductPair::WTerminal => {
            // 0 + δ(W(T)1_{[0,t]}) + ½∫(∇W(T))·1 ds, with ∇W(T) = 2.
            let delta = 2.0 * ito(&|j| path.value(j)) + w_t * (w_end - w_t);
            (w_t * w_end, delta + t)
        }
        ProductPair::QTerminal => {
            // dQ = σQ dW + (σ²/2)Q ds; δ(W(T)σQ) = W(T)·Itô(σQ) - ∫σQ ds.
            let int_q = trapezoid(&q, dt, upto);
            let delta = w_end * sigma * ito(&|j| q[j]) - sigma * int_q;
            let drift = w_end * 0.5 * sigma * sigma * int_q;
            let correction = sigma * int_q;
            (q[upto] * w_end, w_end + delta + drift + correction)
        }
        ProductPair::QQ => {
            // 1 + 2∫σQ² dW + 2∫(σ²/2)Q² ds + ½·2∫(σQ)(σQ) ds.
            let q2: Vec<f64> = q.iter().map(|x| x * x).collect();
            let int_q2 = trapezoid(&q2, dt, upto);
            (
                q2[upto],
                1.0 + 2.0 * sigma * ito(&|j| q2[j]) + 2.0 * sigma * sigma * int_q2,
            )
        }
    };
    Ok((lhs - rhs).abs())
}

fn factors_with_nabla(pair: ProductPair, path: &BrownianPath, sigma: f64, s: usize) -> (f64, f64, f64, f64) {
    // (X¹_s, X²_s, ∇X¹_s, ∇X²_s) from D_sW_t = 1_{s≤t}, D_sW(T) = 1,
    // D_sQ_t = σQ_t1_{s≤t}.
    let q = (sigma * path.value(s)).exp();
    let (w, wt) = (path.value(s), path.terminal());
    match pair {
        ProductPair::WTerminal => (w, wt, 1.0, 2.0),
        ProductPair::QTerminal => (q, wt, sigma * q, 2.0),
        ProductPair::QQ => (q, q, sigma * q, sigma * q),
    }
}

/// `|∇(X¹X²)_s - X²_s∇X¹_s - X¹_s∇X²_s|`, where `∇(X¹X²)` is the sum of the
/// `t → s±` limits of the closed-form `D_s(X¹_tX²_t)`.
pub fn nabla_product_gap(pair: ProductPair, path: &BrownianPath, sigma: f64, s: usize) -> f64 {
    let q = (sigma * path.value(s)).exp();
    let (w, wt) = (path.value(s), path.terminal());
    // D_s(P_t) with the indicator 1_{s≤t} as a parameter.
    let d = |ind: f64| match pair {
        ProductPair::WTerminal => ind * wt + w,
        ProductPair::QTerminal => sigma * q * ind * wt + q,
        ProductPair::QQ => 2.0 * sigma * q * q * ind,
    };
    let nabla_product = d(1.0) + d(0.0);
    let (x1, x2, n1, n2) = factors_with_nabla(pair, path, sigma, s);
    (nabla_product - (x2 * n1 + x1 * n2)).abs()
}

/// Outcome of the defining-equation check for `u = Q·v(·,ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitionResidual {
    /// `max_t |residual(t)|_V`
    pub max_residual: f64,
    /// Whether the path lies in `Ω_N`, where the truncated solution is a
    /// solution of the untruncated equation.
    pub in_omega_n: bool,
    /// `max_j |u_j/Q_j·Q_j - u_j|_V / |u_j|_V` for the `u → v → u` round trip.
    pub round_trip: f64,
}

/// Residual of
/// `u(t) + ν∫Âu + ∫B̂(u,u) - ξ - ∫F̂(u,s) - ∫u∘σdW`
/// with trapezoid drift integrals and the midpoint Stratonovich sum.
pub fn definition_residual(spec: &InitSpec, qpath: &QPath, cfg: &SolverConfig) -> Result<DefinitionResidual> {
    let path = qpath.base();
    let sigma = qpath.sigma();
    let (xi, _) = make_xi(spec, path);
    let v = solve_v(&xi, qpath, cfg)?;
    let u = assemble_u(&v, qpath)?;
    let back = crate::solver::invert_u(&u, qpath)?;
    let again = assemble_u(&back, qpath)?;
    let round_trip = u
        .states()
        .iter()
        .zip(again.states())
        .map(|(a, b)| norm_v(&a.sub(b), cfg.alpha) / norm_v(a, cfg.alpha).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);

    let mut ops = DriftOps::new(cfg)?;
    let states = u.states();
    let mut drift = Vec::with_capacity(states.len());
    for (j, s) in states.iter().enumerate() {
        // ν Âu + B̂(u,u) - F̂(u,t)
        let mut d = apply_a_hat(s, cfg.alpha).scale(cfg.nu);
        d.axpy(1.0, &ops.b_sum(&[(s, s)])?);
        if ops.has_force() {
            d.axpy(-1.0, &lift(&cfg.force.evaluate(s, qpath.time(j), cfg.alpha), cfg.alpha));
        }
        drift.push(d);
    }
    let drift_int = cumulative_trapezoid(&drift, qpath.dt());
    let xi_n = xi.with_cutoff(cfg.cutoff);
    let mut noise = SpectralField::zeros(cfg.cutoff);
    let mut max_residual = 0.0f64;
    for j in 0..states.len() {
        if j > 0 {
            let w = 0.5 * sigma * path.increment(j - 1);
            noise.axpy(w, &states[j - 1]);
            noise.axpy(w, &states[j]);
        }
        let mut r = states[j].add(&drift_int[j]);
        r.axpy(-1.0, &xi_n);
        r.axpy(-1.0, &noise);
        max_residual = max_residual.max(norm_v(&r, cfg.alpha));
    }
    Ok(DefinitionResidual {
        max_residual,
        in_omega_n: omega_n_indicator(path, qpath.level()),
        round_trip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::q_of;

    fn path(seed: u64, steps: usize) -> BrownianPath {
        BrownianPath::sample(seed, steps, 1.0).unwrap()
    }

    #[test]
    fn midpoint_trivial_cases() {
        let p = path(1, 50);
        let zero = IntegrandPath::from_fn(&p, |_| 0.0);
        assert_eq!(stratonovich_midpoint(&zero, &p, 1.0, 50).unwrap(), 0.0);
        let one = IntegrandPath::from_fn(&p, |_| 1.0);
        assert!((stratonovich_midpoint(&one, &p, 1.0, 37).unwrap() - p.value(37)).abs() < 1e-14);
    }

    #[test]
    fn midpoint_of_w_telescopes() {
        for steps in [3, 17, 64] {
            let p = path(steps as u64, steps);
            let x = IntegrandPath::from_fn(&p, |j| p.value(j));
            for upto in [0, 1, steps / 2, steps] {
                let s = stratonovich_midpoint(&x, &p, 1.0, upto).unwrap();
                assert!((s - p.value(upto).powi(2) / 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn skorohod_cases() {
        let p = path(4, 40);
        let one = IntegrandPath::from_fn(&p, |_| 1.0).with_nabla(vec![0.0; 41]).unwrap();
        let s = skorohod_from_stratonovich(&one, &p, 0.7, 40).unwrap();
        assert!((s - 0.7 * p.terminal()).abs() < 1e-14);
        assert!((s - ito_sum(&one, &p, 0.7, 40).unwrap()).abs() < 1e-14);

        let w = IntegrandPath::from_fn(&p, |j| p.value(j))
            .with_nabla(vec![1.0; 41])
            .unwrap();
        let t = p.time(25);
        let s = skorohod_from_stratonovich(&w, &p, 1.0, 25).unwrap();
        assert!((s - (p.value(25).powi(2) / 2.0 - t / 2.0)).abs() < 1e-13);

        let wt = IntegrandPath::from_fn(&p, |_| p.terminal())
            .with_nabla(vec![2.0; 41])
            .unwrap();
        let s = skorohod_from_stratonovich(&wt, &p, 1.0, 25).unwrap();
        assert!((s - (p.terminal() * p.value(25) - t)).abs() < 1e-13);

        let bare = IntegrandPath::from_fn(&p, |_| 1.0);
        assert!(matches!(
            skorohod_from_stratonovich(&bare, &p, 1.0, 3),
            Err(Error::MissingNabla)
        ));
    }

    #[test]
    fn pair_ids_parse() {
        for p in ProductPair::ALL {
            assert_eq!(p.id().parse::<ProductPair>().unwrap(), p);
        }
        assert!(matches!("w_q".parse::<ProductPair>(), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn product_rule_vanishes_at_zero() {
        for p in ProductPair::ALL {
            assert_eq!(product_rule_check(p, &path(2, 32), 0.6, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn nabla_product_rule_is_exact() {
        let p = path(9, 20);
        for pair in ProductPair::ALL {
            for s in 0..=20 {
                assert!(nabla_product_gap(pair, &p, 0.8, s) < 1e-14);
            }
        }
    }

    #[test]
    fn adapted_skorohod_tracks_ito() {
        let sigma = 0.5;
        let rms = |steps: usize| {
            let acc: f64 = (0..400)
                .map(|seed| {
                    let p = path(seed, steps);
                    let q = q_of(&p, sigma, f64::INFINITY);
                    let x = IntegrandPath::from_fn(&p, |j| q.q(j))
                        .with_nabla((0..=steps).map(|j| sigma * q.q(j)).collect())
                        .unwrap();
                    let a = skorohod_from_stratonovich(&x, &p, sigma, steps).unwrap();
                    let b = ito_sum(&x, &p, sigma, steps).unwrap();
                    (a - b).powi(2)
                })
                .sum();
            (acc / 400.0).sqrt()
        };
        let (coarse, fine) = (rms(16), rms(256));
        assert!(fine < coarse / 2.0, "{coarse} {fine}");
    }

    #[test]
    fn product_residuals_decay() {
        for pair in ProductPair::ALL {
            let rms = |steps: usize| {
                let acc: f64 = (0..300)
                    .map(|seed| {
                        product_rule_check(pair, &path(seed, steps), 0.5, steps)
                            .unwrap()
                            .powi(2)
                    })
                    .sum();
                (acc / 300.0).sqrt()
            };
            let (coarse, fine) = (rms(16), rms(256));
            assert!(fine < coarse / 2.0, "{pair}: {coarse} {fine}");
        }
    }
}

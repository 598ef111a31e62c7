//! Pathwise integration of the transformed system
//!
//! ```text
//! dv/dt = -νÂv - Q(t)B̂(v,v) + Q(t)^{-1}F̂(Q(t)v, t),   v(0) = Π_n f
//! ```
//!
//! on the Galerkin space of cutoff `n`, the energy-equation monitor, and the
//! `u = Q·v` transform back to the stochastic solution.
//!
//! Time stepping is Heun with the exact integrating factor `E = exp(-νÂΔt)`:
//!
//! ```text
//! N0 = N(v_j, t_j)
//! a  = E(v_j + Δt·N0)
//! v_{j+1} = E(v_j + Δt/2·N0) + Δt/2·N(a, t_{j+1})
//! ```
//!
//! The time grid is the grid of the driving path, so `Q` is only ever read at
//! grid points.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{a_hat_symbol, b_hat_direct, default_grid, lift, BMethod, BilinearEngine, ForceSpec};
use crate::spectral::{norm_v, norm_w, SpectralField};
use crate::wiener::{BrownianPath, QPath};

pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub nu: f64,
    pub cutoff: usize,
    #[serde(default)]
    pub force: ForceSpec,
    #[serde(default)]
    pub method: BMethod,
    /// Physical grid for the transform method; `4n` when absent.
    #[serde(default)]
    pub grid: Option<usize>,
    /// Switches the `B̂` term off, leaving a linear system.
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

fn yes() -> bool {
    true
}

impl SolverConfig {
    pub fn new(alpha: f64, nu: f64, cutoff: usize) -> Self {
        Self {
            alpha,
            nu,
            cutoff,
            force: ForceSpec::zero(),
            method: BMethod::Transform,
            grid: None,
            nonlinear: true,
        }
    }

    pub fn with_force(mut self, force: ForceSpec) -> Self {
        self.force = force;
        self
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff < 1 {
            return Err(Error::InvalidCutoff(self.cutoff));
        }
        if !(self.alpha > 0.0) || !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha and nu must be positive (alpha={}, nu={})",
                self.alpha, self.nu
            )));
        }
        Ok(())
    }

    pub fn scheme_tag(&self) -> &'static str {
        match self.method {
            BMethod::Transform => "if-heun/transform",
            BMethod::Direct => "if-heun/direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub cutoff: usize,
    pub alpha: f64,
    pub nu: f64,
    pub scheme: String,
    pub seed: u64,
}

/// States on the path grid; `states[0]` is the projected initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<SpectralField>,
    provenance: Provenance,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<SpectralField>, provenance: Provenance) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::GridMismatch(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if let Some(bad) = states.iter().find(|s| s.cutoff() != provenance.cutoff) {
            return Err(Error::CutoffMismatch {
                left: bad.cutoff(),
                right: provenance.cutoff,
            });
        }
        Ok(Self {
            times,
            states,
            provenance,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &SpectralField {
        &self.states[j]
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// CSV `t,norm_v,norm_w`.
    pub fn to_csv(&self) -> String {
        let a = self.provenance.alpha;
        let mut out = String::from("t,norm_v,norm_w\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = writeln!(out, "{},{},{}", t, norm_v(s, a), norm_w(s, a));
        }
        out
    }

    fn check_grid(&self, q: &QPath) -> Result<()> {
        if q.steps() != self.steps() {
            return Err(Error::GridMismatch(format!(
                "trajectory has {} steps, path has {}",
                self.steps(),
                q.steps()
            )));
        }
        Ok(())
    }
}

/// Exact integrating factor `E = exp(-νÂΔt)` for one step size.
#[derive(Debug, Clone)]
pub struct Propagator {
    dt: f64,
    decay: Vec<(usize, f64)>,
}

impl Propagator {
    pub fn new(cfg: &SolverConfig, dt: f64) -> Self {
        let decay = SpectralField::zeros(cfg.cutoff)
            .layout()
            .modes()
            .map(|(idx, k)| (idx, (-cfg.nu * a_hat_symbol(k, cfg.alpha) * dt).exp()))
            .collect();
        Self { dt, decay }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, x: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(x.cutoff());
        let (src, dst) = (x.raw(), out.raw_mut());
        for &(idx, e) in &self.decay {
            dst[idx] = src[idx] * e;
        }
        out
    }

    /// One IF-Heun step for the non-stiff term `n(state, stage)`, where stage
    /// 0 is the left endpoint and stage 1 the predictor at the right endpoint.
    /// Returns the new state and the predictor.
    pub fn heun_step<F>(&self, x: &SpectralField, mut n: F) -> Result<(SpectralField, SpectralField)>
    where
        F: FnMut(&SpectralField, usize) -> Result<SpectralField>,
    {
        let n0 = n(x, 0)?;
        let mut pred = x.clone();
        pred.axpy(self.dt, &n0);
        let stage = self.apply(&pred);
        let n1 = n(&stage, 1)?;
        let mut half = x.clone();
        half.axpy(0.5 * self.dt, &n0);
        let mut next = self.apply(&half);
        next.axpy(0.5 * self.dt, &n1);
        Ok((next, stage))
    }
}

/// Drift evaluator for one configuration; owns the transform workspace.
pub struct DriftOps {
    cfg: SolverConfig,
    engine: Option<BilinearEngine>,
}

impl DriftOps {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let engine = match cfg.method {
            BMethod::Transform if cfg.nonlinear => Some(BilinearEngine::new(
                cfg.cutoff,
                cfg.alpha,
                cfg.grid.unwrap_or_else(|| default_grid(cfg.cutoff)),
            )?),
            _ => None,
        };
        Ok(Self {
            cfg: cfg.clone(),
            engine,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// `Σ B̂(u_i, v_i)`, zero when the nonlinearity is switched off.
    pub fn b_sum(&mut self, pairs: &[(&SpectralField, &SpectralField)]) -> Result<SpectralField> {
        if !self.cfg.nonlinear {
            return Ok(SpectralField::zeros(self.cfg.cutoff));
        }
        match &mut self.engine {
            Some(engine) => engine.apply_sum(pairs),
            None => {
                let mut out = SpectralField::zeros(self.cfg.cutoff);
                for (u, v) in pairs {
                    out.axpy(1.0, &b_hat_direct(u, v, self.cfg.alpha)?);
                }
                Ok(out)
            }
        }
    }

    /// `Q^{-1}F(Qv, t)` before the lift: the functional `F_Q` of the energy equation.
    pub fn force_q(&self, v: &SpectralField, q: f64, t: f64) -> SpectralField {
        if self.cfg.force.lipschitz_bound() == 0.0 {
            return SpectralField::zeros(v.cutoff());
        }
        self.cfg.force.evaluate(&v.scale(q), t, self.cfg.alpha).scale(1.0 / q)
    }

    /// `Q^{-1}F̂(Qv, t)`.
    pub fn force_q_hat(&self, v: &SpectralField, q: f64, t: f64) -> SpectralField {
        lift(&self.force_q(v, q, t), self.cfg.alpha)
    }

    /// `𝔻F̂(Qv, t)(g)`.
    pub fn dforce_hat(&self, v: &SpectralField, q: f64, t: f64, g: &SpectralField) -> SpectralField {
        if self.cfg.force.lipschitz_bound() == 0.0 {
            return SpectralField::zeros(g.cutoff());
        }
        lift(
            &self.cfg.force.derivative(&v.scale(q), t, g, self.cfg.alpha),
            self.cfg.alpha,
        )
    }

    pub fn has_force(&self) -> bool {
        self.cfg.force.lipschitz_bound() != 0.0
    }

    /// Non-stiff part `N(v,t) = -Q B̂(v,v) + Q^{-1}F̂(Qv, t)`.
    pub fn nonstiff(&mut self, v: &SpectralField, q: f64, t: f64) -> Result<SpectralField> {
        let mut out = self.force_q_hat(v, q, t);
        if self.cfg.nonlinear {
            out.axpy(-q, &self.b_sum(&[(v, v)])?);
        }
        Ok(out)
    }

    /// Full drift `-νÂv + N(v,t)`.
    pub fn drift(&mut self, v: &SpectralField, q: f64, t: f64) -> Result<SpectralField> {
        let mut out = self.nonstiff(v, q, t)?;
        let alpha = self.cfg.alpha;
        out.axpy(-self.cfg.nu, &v.map_symbol(|k| a_hat_symbol(k, alpha)));
        Ok(out)
    }
}

/// Drift at grid index `j` of `qpath`.
pub fn drift(v: &SpectralField, j: usize, qpath: &QPath, cfg: &SolverConfig) -> Result<SpectralField> {
    DriftOps::new(cfg)?.drift(&v.with_cutoff(cfg.cutoff), qpath.q(j), qpath.time(j))
}

/// Trajectory together with the Heun predictor stages, which the tangent
/// solvers linearize around.
#[derive(Debug, Clone)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub stages: Vec<SpectralField>,
}

pub fn solve_v(f: &SpectralField, qpath: &QPath, cfg: &SolverConfig) -> Result<Trajectory> {
    Ok(solve_v_with_stages(f, qpath, cfg)?.trajectory)
}

pub fn solve_v_with_stages(f: &SpectralField, qpath: &QPath, cfg: &SolverConfig) -> Result<Solution> {
    let mut ops = DriftOps::new(cfg)?;
    let prop = Propagator::new(cfg, qpath.dt());
    let v0 = f.with_cutoff(cfg.cutoff);
    let limit = BLOWUP_FACTOR * norm_w(&v0, cfg.alpha);
    let steps = qpath.steps();
    let mut states = Vec::with_capacity(steps + 1);
    let mut stages = Vec::with_capacity(steps);
    states.push(v0);
    for j in 0..steps {
        let q = [qpath.q(j), qpath.q(j + 1)];
        let t = [qpath.time(j), qpath.time(j + 1)];
        let (next, stage) = prop.heun_step(&states[j], |y, s| ops.nonstiff(y, q[s], t[s]))?;
        let norm = norm_w(&next, cfg.alpha);
        if !(norm <= limit) {
            return Err(Error::BlowUp {
                time: t[1],
                norm,
                limit,
            });
        }
        states.push(next);
        stages.push(stage);
    }
    let provenance = Provenance {
        cutoff: cfg.cutoff,
        alpha: cfg.alpha,
        nu: cfg.nu,
        scheme: cfg.scheme_tag().to_string(),
        seed: qpath.base().seed(),
    };
    Ok(Solution {
        trajectory: Trajectory::new(qpath.base().times(), states, provenance)?,
        stages,
    })
}

/// `K(v,s) = Σ_k |k|²(1+α|k|²)[(ν/α)|c_k|² + Re(F_Q,k·conj c_k)]`.
fn energy_source(ops: &DriftOps, v: &SpectralField, q: f64, t: f64) -> f64 {
    let cfg = ops.config();
    let (alpha, nu) = (cfg.alpha, cfg.nu);
    let fq = ops.has_force().then(|| ops.force_q(v, q, t));
    let mut acc = 0.0;
    for (k, c) in v.modes() {
        let w = k.norm_sq() * (1.0 + alpha * k.norm_sq());
        let mut term = nu / alpha * c.norm_sqr();
        if let Some(fq) = &fq {
            term += (fq.get(k) * c.conj()).re;
        }
        acc += w * term;
    }
    acc
}

/// One row of the energy monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub t: f64,
    pub energy: f64,
    pub predicted: f64,
}

impl EnergyRow {
    pub fn residual(&self) -> f64 {
        (self.energy - self.predicted).abs()
    }
}

/// `|v(t)|²_W` against `|f_n|²_W e^{-2νt/α} + 2∫₀ᵗ K(v(s),s) e^{-2ν(t-s)/α} ds`,
/// the integral by the cumulative trapezoid rule.
pub fn energy_profile(traj: &Trajectory, qpath: &QPath, cfg: &SolverConfig) -> Result<Vec<EnergyRow>> {
    traj.check_grid(qpath)?;
    let ops = DriftOps::new(cfg)?;
    let alpha = cfg.alpha;
    let rate = 2.0 * cfg.nu / alpha;
    let e0 = norm_w(traj.state(0), alpha).powi(2);
    let damp = (-rate * qpath.dt()).exp();
    let mut out = Vec::with_capacity(traj.len());
    let mut integral = 0.0;
    let mut k_prev = 0.0;
    for j in 0..traj.len() {
        let t = traj.times()[j];
        let k_now = energy_source(&ops, traj.state(j), qpath.q(j), t);
        if j > 0 {
            integral = damp * integral + 0.5 * qpath.dt() * (k_prev * damp + k_now);
        }
        k_prev = k_now;
        out.push(EnergyRow {
            t,
            energy: norm_w(traj.state(j), alpha).powi(2),
            predicted: e0 * (-rate * t).exp() + 2.0 * integral,
        });
    }
    Ok(out)
}

pub fn energy_residual(traj: &Trajectory, qpath: &QPath, cfg: &SolverConfig) -> Result<f64> {
    Ok(energy_profile(traj, qpath, cfg)?
        .iter()
        .map(EnergyRow::residual)
        .fold(0.0, f64::max))
}

pub fn energy_csv(rows: &[EnergyRow]) -> String {
    let mut out = String::from("t,energy_w,predicted,residual\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.t, r.energy, r.predicted, r.residual());
    }
    out
}

/// `u(t_j) = Q(t_j)·v(t_j)`.
pub fn assemble_u(traj: &Trajectory, qpath: &QPath) -> Result<Trajectory> {
    traj.check_grid(qpath)?;
    let states = traj
        .states()
        .iter()
        .enumerate()
        .map(|(j, v)| v.scale(qpath.q(j)))
        .collect();
    Trajectory::new(traj.times().to_vec(), states, traj.provenance().clone())
}

/// `v(t_j) = u(t_j)/Q(t_j)`.
pub fn invert_u(u: &Trajectory, qpath: &QPath) -> Result<Trajectory> {
    u.check_grid(qpath)?;
    let states = u
        .states()
        .iter()
        .enumerate()
        .map(|(j, x)| x.scale(1.0 / qpath.q(j)))
        .collect();
    Trajectory::new(u.times().to_vec(), states, u.provenance().clone())
}

/// Bounded scalar maps available for endpoint functionals `g(W(T))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GFunction {
    /// `clamp(x, -1, 1)`
    IdentityClamped,
    #[default]
    Sin,
    Tanh,
}

impl GFunction {
    pub fn value(self, x: f64) -> f64 {
        match self {
            GFunction::IdentityClamped => x.clamp(-1.0, 1.0),
            GFunction::Sin => x.sin(),
            GFunction::Tanh => x.tanh(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            GFunction::IdentityClamped => {
                if x.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            GFunction::Sin => x.cos(),
            GFunction::Tanh => 1.0 - x.tanh().powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Deterministic(SpectralField),
    /// `ξ = f₀ + g(W(T))·f₁`
    EndpointFunctional {
        f0: SpectralField,
        f1: SpectralField,
        g: GFunction,
    },
}

impl InitSpec {
    pub fn is_anticipating(&self) -> bool {
        matches!(self, InitSpec::EndpointFunctional { .. })
    }

    /// `ξ` evaluated at terminal value `w_t`.
    pub fn xi_at(&self, w_t: f64) -> SpectralField {
        match self {
            InitSpec::Deterministic(f) => f.clone(),
            InitSpec::EndpointFunctional { f0, f1, g } => {
                let n = f0.cutoff().max(f1.cutoff());
                let mut out = f0.with_cutoff(n);
                out.axpy(g.value(w_t), &f1.with_cutoff(n));
                out
            }
        }
    }
}

/// `ξ(ω)` and its `s`-independent Malliavin derivative `g′(W(T))·f₁`.
pub fn make_xi(spec: &InitSpec, path: &BrownianPath) -> (SpectralField, SpectralField) {
    let w_t = path.terminal();
    let xi = spec.xi_at(w_t);
    let dxi = match spec {
        InitSpec::Deterministic(f) => SpectralField::zeros(f.cutoff()),
        InitSpec::EndpointFunctional { f1, g, .. } => f1.with_cutoff(xi.cutoff()).scale(g.derivative(w_t)),
    };
    (xi, dxi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::apply_b_hat;
    use crate::spectral::{inner_w, WaveVector};
    use crate::wiener::q_of;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field(seed: u64, n: usize) -> SpectralField {
        SpectralField::random(n, 1.5, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn sine_q(steps: usize, t: f64, sigma: f64) -> QPath {
        q_of(&BrownianPath::sine(steps, t).unwrap(), sigma, f64::INFINITY)
    }

    #[test]
    fn zero_state_has_zero_drift() {
        let cfg = SolverConfig::new(1.0, 1.0, 4).with_force(ForceSpec::saturated(0.5));
        let d = drift(&SpectralField::zeros(4), 3, &sine_q(10, 1.0, 0.5), &cfg).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn single_mode_drift_is_linear_decay() {
        let cfg = SolverConfig::new(1.0, 1.0, 3);
        let mut v = SpectralField::zeros(3);
        v.set_pair(WaveVector::new(1, 2).unwrap(), Complex64::new(0.3, -0.2))
            .unwrap();
        let d = drift(&v, 0, &sine_q(4, 1.0, 0.0), &cfg).unwrap();
        let expect = v.scale(-5.0 / 6.0);
        assert!(d.sub(&expect).modes().all(|(_, c)| c.norm() < 1e-15));
    }

    #[test]
    fn transport_part_of_drift_is_w_orthogonal() {
        let v = field(3, 6);
        let b = apply_b_hat(&v, &v, 0.7, BMethod::Transform).unwrap();
        assert!(inner_w(&b, &v, 0.7).abs() <= 1e-10 * norm_w(&v, 0.7).powi(2));
    }

    #[test]
    fn zero_initial_condition_stays_zero() {
        let cfg = SolverConfig::new(1.0, 0.5, 4).with_force(ForceSpec::linear_gain(0.3));
        let q = q_of(&BrownianPath::sample(1, 20, 1.0).unwrap(), 0.5, f64::INFINITY);
        let tr = solve_v(&SpectralField::zeros(4), &q, &cfg).unwrap();
        assert!(tr.states().iter().all(SpectralField::is_zero));
        assert_eq!(energy_residual(&tr, &q, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn linear_modes_decay_exactly() {
        let cfg = SolverConfig::new(0.5, 0.8, 4).linear();
        let q = sine_q(16, 1.0, 0.0);
        let f = field(4, 4);
        let tr = solve_v(&f, &q, &cfg).unwrap();
        let t = tr.times()[16];
        for (k, c) in tr.last().modes() {
            let exact = f.get(k) * (-0.8 * a_hat_symbol(k, 0.5) * t).exp();
            assert!((c - exact).norm() <= 1e-14 * (1.0 + exact.norm()));
        }
    }

    #[test]
    fn initial_state_is_projection() {
        let cfg = SolverConfig::new(1.0, 1.0, 3);
        let f = field(8, 6);
        let tr = solve_v(&f, &sine_q(4, 0.1, 0.3), &cfg).unwrap();
        assert_eq!(tr.state(0), &f.with_cutoff(3));
    }

    #[test]
    fn energy_residual_is_second_order_on_smooth_path() {
        let cfg = SolverConfig::new(1.0, 0.5, 6).with_force(ForceSpec::linear_gain(0.5));
        let f = SpectralField::random(6, 2.5, &mut ChaCha8Rng::seed_from_u64(11));
        let res: Vec<f64> = [50, 100]
            .iter()
            .map(|&m| {
                let q = sine_q(m, 1.0, 0.5);
                energy_residual(&solve_v(&f, &q, &cfg).unwrap(), &q, &cfg).unwrap()
            })
            .collect();
        let ratio = res[0] / res[1];
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio} from {res:?}");
    }

    #[test]
    fn localization_gives_identical_trajectories() {
        let cfg = SolverConfig::new(1.0, 1.0, 4).with_force(ForceSpec::saturated(0.4));
        let f = field(2, 4);
        for seed in 0..10 {
            let p = BrownianPath::sample(seed, 32, 1.0).unwrap();
            if crate::wiener::omega_n_indicator(&p, 2.5) {
                let a = solve_v(&f, &q_of(&p, 0.5, f64::INFINITY), &cfg).unwrap();
                let b = solve_v(&f, &q_of(&p, 0.5, 2.5), &cfg).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn transform_round_trip() {
        let cfg = SolverConfig::new(1.0, 1.0, 4);
        let q = q_of(&BrownianPath::sample(5, 32, 1.0).unwrap(), 0.8, f64::INFINITY);
        let v = solve_v(&field(1, 4), &q, &cfg).unwrap();
        let back = invert_u(&assemble_u(&v, &q).unwrap(), &q).unwrap();
        for (a, b) in v.states().iter().zip(back.states()) {
            assert!(a
                .sub(b)
                .modes()
                .all(|(_, c)| c.norm() <= 1e-15 * (1.0 + a.get(WaveVector::new(1, 0).unwrap()).norm()) + 1e-16));
        }
    }

    #[test]
    fn xi_catalog() {
        let f0 = field(1, 3);
        let f1 = field(2, 3);
        let zero = BrownianPath::zero(4, 1.0).unwrap();
        let (xi, dxi) = make_xi(&InitSpec::Deterministic(f0.clone()), &zero);
        assert_eq!(xi, f0);
        assert!(dxi.is_zero());
        let spec = InitSpec::EndpointFunctional {
            f0: f0.clone(),
            f1: f1.clone(),
            g: GFunction::Sin,
        };
        let (xi, dxi) = make_xi(&spec, &zero);
        assert_eq!(xi, f0);
        assert_eq!(dxi, f1);
        let tanh = InitSpec::EndpointFunctional {
            f0,
            f1: f1.clone(),
            g: GFunction::Tanh,
        };
        for seed in 0..20 {
            let (_, d) = make_xi(&tanh, &BrownianPath::sample(seed, 8, 2.0).unwrap());
            assert!(norm_w(&d, 1.0) <= norm_w(&f1, 1.0));
        }
    }

    #[test]
    fn blow_up_guard_reports() {
        let cfg = SolverConfig::new(1.0, 1e-3, 2)
            .with_force(ForceSpec::linear_gain(-1.0))
            .linear();
        let q = sine_q(4, 1.0, 0.0);
        assert!(solve_v(&field(1, 2), &q, &cfg).is_ok());
        let cfg = SolverConfig::new(1.0, 1e-3, 2)
            .with_force(ForceSpec::linear_gain(5e4))
            .linear();
        assert!(matches!(solve_v(&field(1, 2), &q, &cfg), Err(Error::BlowUp { .. })));
    }
}

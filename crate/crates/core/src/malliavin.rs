//! Malliavin and Fréchet derivatives of the Galerkin solution `v`.
//!
//! Both derivatives solve the linearization of the drift
//! `N(v,Q,t) = -Q B̂(v,v) + Q^{-1}F̂(Qv,t)` along the base trajectory:
//!
//! ```text
//! δN = -δQ·B̂(v,v) - Q[B̂(δv,v) + B̂(v,δv)]
//!      - (δQ/Q²)F̂(Qv) + (δQ/Q)𝔻F̂(Qv)(v) + 𝔻F̂(Qv)(δv)
//! ```
//!
//! with `δQ(s) = 𝒟_rQ(s)` for `Y_r = 𝒟_r v` and `δQ = 0` for the Fréchet
//! derivative `z = 𝔻v(f)(g)`. The linearization is applied stage by stage to
//! the same integrating-factor Heun step as the base solve, so the discrete
//! derivatives are the exact derivatives of the discrete solution map.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::solver::{
    make_xi, solve_v, solve_v_with_stages, DriftOps, InitSpec, Propagator, Solution, SolverConfig, Trajectory,
};
use crate::spectral::{norm_v, SpectralField};
use crate::wiener::{q_of, BrownianPath, QPath};

/// Default spacing of differentiation times, in solver steps.
pub const DEFAULT_R_STRIDE: usize = 8;

/// Base trajectory with everything the tangent solves reuse: the Heun
/// predictor stages and `B̂` of both against themselves.
#[derive(Debug, Clone)]
pub struct BaseSolution {
    pub solution: Solution,
    bvv_state: Vec<SpectralField>,
    bvv_stage: Vec<SpectralField>,
}

impl BaseSolution {
    pub fn solve(f: &SpectralField, qpath: &QPath, cfg: &SolverConfig) -> Result<Self> {
        Self::from_solution(solve_v_with_stages(f, qpath, cfg)?, cfg)
    }

    pub fn from_solution(solution: Solution, cfg: &SolverConfig) -> Result<Self> {
        let mut ops = DriftOps::new(cfg)?;
        let steps = solution.stages.len();
        let states = solution.trajectory.states();
        let mut bvv_state = Vec::with_capacity(steps);
        let mut bvv_stage = Vec::with_capacity(steps);
        for j in 0..steps {
            bvv_state.push(ops.b_sum(&[(&states[j], &states[j])])?);
            let a = &solution.stages[j];
            bvv_stage.push(ops.b_sum(&[(a, a)])?);
        }
        Ok(Self {
            solution,
            bvv_state,
            bvv_stage,
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.solution.trajectory
    }

    fn check(&self, qpath: &QPath, cfg: &SolverConfig) -> Result<()> {
        let tr = self.trajectory();
        if tr.steps() != qpath.steps() || self.solution.stages.len() != qpath.steps() {
            return Err(Error::MissingBase(format!(
                "base has {} steps, path has {}",
                tr.steps(),
                qpath.steps()
            )));
        }
        if tr.provenance().cutoff != cfg.cutoff || tr.provenance().alpha != cfg.alpha || tr.provenance().nu != cfg.nu {
            return Err(Error::MissingBase(
                "base was solved with a different configuration".into(),
            ));
        }
        Ok(())
    }
}

/// One linearized drift evaluation at stage `s` of step `j`.
fn tangent_drift(
    ops: &mut DriftOps,
    base: &BaseSolution,
    qpath: &QPath,
    j: usize,
    stage: usize,
    dq: f64,
    y: &SpectralField,
) -> Result<SpectralField> {
    let (x, bxx, idx) = if stage == 0 {
        (base.trajectory().state(j), &base.bvv_state[j], j)
    } else {
        (&base.solution.stages[j], &base.bvv_stage[j], j + 1)
    };
    let q = qpath.q(idx);
    let t = qpath.time(idx);
    let mut out = if y.is_zero() {
        SpectralField::zeros(y.cutoff())
    } else {
        let mut cross = ops.b_sum(&[(y, x), (x, y)])?;
        cross.scale_in_place(-q);
        if ops.has_force() {
            cross.axpy(1.0, &ops.dforce_hat(x, q, t, y));
        }
        cross
    };
    if dq != 0.0 {
        out.axpy(-dq, bxx);
        if ops.has_force() {
            out.axpy(-dq / (q * q), &ops.force_q_hat(x, q, t).scale(q));
            out.axpy(dq / q, &ops.dforce_hat(x, q, t, x));
        }
    }
    Ok(out)
}

/// Integrates the tangent system from grid index `start` with `y(start) = y0`
/// and `δQ(t_j) = dq(j)`; entries before `start` are zero.
fn solve_tangent(
    ops: &mut DriftOps,
    base: &BaseSolution,
    qpath: &QPath,
    cfg: &SolverConfig,
    start: usize,
    y0: SpectralField,
    dq: impl Fn(usize) -> f64,
) -> Result<Vec<SpectralField>> {
    let prop = Propagator::new(cfg, qpath.dt());
    let steps = qpath.steps();
    let mut out = vec![SpectralField::zeros(cfg.cutoff); start];
    out.reserve(steps + 1 - start);
    out.push(y0);
    for j in start..steps {
        let dqs = [dq(j), dq(j + 1)];
        let (next, _) = prop.heun_step(&out[j], |y, s| tangent_drift(ops, base, qpath, j, s, dqs[s], y))?;
        out.push(next);
    }
    Ok(out)
}

fn wrap(states: Vec<SpectralField>, base: &BaseSolution) -> Result<Trajectory> {
    let tr = base.trajectory();
    Trajectory::new(tr.times().to_vec(), states, tr.provenance().clone())
}

/// `Y_r(t) = 𝒟_{t_r} v(t, f)` on the full grid.
pub fn solve_y(base: &BaseSolution, qpath: &QPath, r: usize, cfg: &SolverConfig) -> Result<Trajectory> {
    base.check(qpath, cfg)?;
    if r > qpath.steps() {
        return Err(Error::InvalidParameter(format!(
            "r index {r} beyond {} steps",
            qpath.steps()
        )));
    }
    let mut ops = DriftOps::new(cfg)?;
    let states = solve_tangent(&mut ops, base, qpath, cfg, r, SpectralField::zeros(cfg.cutoff), |j| {
        qpath.d_q(r, j)
    })?;
    wrap(states, base)
}

/// `z(t) = 𝔻v(t, f)(g)`.
pub fn solve_frechet(base: &BaseSolution, g: &SpectralField, qpath: &QPath, cfg: &SolverConfig) -> Result<Trajectory> {
    base.check(qpath, cfg)?;
    let mut ops = DriftOps::new(cfg)?;
    let states = solve_tangent(&mut ops, base, qpath, cfg, 0, g.with_cutoff(cfg.cutoff), |_| 0.0)?;
    wrap(states, base)
}

/// Grid indices `0, stride, 2·stride, …` with the final index always included.
pub fn r_grid(steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut out: Vec<usize> = (0..=steps).step_by(stride).collect();
    if *out.last().expect("grid is non-empty") != steps {
        out.push(steps);
    }
    out
}

/// `𝒟_s v(t, ξ)` on an `(r, t)` subgrid: the Fréchet part `z` along the whole
/// solver grid, and `Y_r(t)` stored at the subgrid times only.
#[derive(Debug, Clone)]
pub struct MalliavinField {
    times: Vec<f64>,
    grid: Vec<usize>,
    alpha: f64,
    frechet: Trajectory,
    y: Vec<Vec<SpectralField>>,
}

impl MalliavinField {
    /// Subgrid indices used both for `r` and `t`.
    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn time(&self, j: usize) -> f64 {
        self.times[j]
    }

    pub fn frechet(&self) -> &Trajectory {
        &self.frechet
    }

    /// `Y_{r}(t)` for subgrid positions `ri`, `ti`.
    pub fn y(&self, ri: usize, ti: usize) -> &SpectralField {
        &self.y[ri][ti]
    }

    /// `𝒟_{r}v(t,ξ) = z(t) + Y_r(t)` for subgrid positions `ri`, `ti`.
    pub fn derivative(&self, ri: usize, ti: usize) -> SpectralField {
        self.frechet.state(self.grid[ti]).add(&self.y[ri][ti])
    }

    /// `sup_t |Y_r(t)|²_V` for each `r` on the subgrid.
    pub fn y_sup_sq(&self) -> Vec<f64> {
        self.y
            .iter()
            .map(|row| row.iter().map(|y| norm_v(y, self.alpha).powi(2)).fold(0.0, f64::max))
            .collect()
    }

    /// `∫_{t_{r0}}^{t} 𝒟_s v(t,ξ) ds` at subgrid positions, trapezoid in `s`.
    pub fn integrate_from(&self, r0: usize, ti: usize) -> SpectralField {
        let t_idx = self.grid[ti];
        let mut acc = SpectralField::zeros(self.frechet.provenance().cutoff);
        let start = self.grid[r0];
        if t_idx <= start {
            return acc;
        }
        let span = self.times[t_idx] - self.times[start];
        acc.axpy(span, self.frechet.state(t_idx));
        for ri in r0..self.grid.len() - 1 {
            let (a, b) = (self.grid[ri], self.grid[ri + 1]);
            if b > t_idx {
                break;
            }
            let h = self.times[b] - self.times[a];
            acc.axpy(0.5 * h, &self.y[ri][ti]);
            acc.axpy(0.5 * h, &self.y[ri + 1][ti]);
        }
        acc
    }

    /// CSV `r,t,norm_v` of `|Y_r(t)|_V`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,t,norm_v\n");
        for (ri, row) in self.y.iter().enumerate() {
            for (ti, y) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    self.times[self.grid[ri]],
                    self.times[self.grid[ti]],
                    norm_v(y, self.alpha)
                );
            }
        }
        out
    }
}

/// `Y_r` on the subgrid for every `r` in it, in parallel over `r`.
fn y_on_grid(
    base: &BaseSolution,
    qpath: &QPath,
    cfg: &SolverConfig,
    grid: &[usize],
) -> Result<Vec<Vec<SpectralField>>> {
    grid.par_iter()
        .map_init(
            || DriftOps::new(cfg),
            |ops, &r| {
                let ops = ops.as_mut().map_err(|e| Error::InvalidParameter(e.to_string()))?;
                let full = solve_tangent(ops, base, qpath, cfg, r, SpectralField::zeros(cfg.cutoff), |j| {
                    qpath.d_q(r, j)
                })?;
                Ok(grid.iter().map(|&t| full[t].clone()).collect())
            },
        )
        .collect()
}

/// Chain-rule assembly `𝒟_s v(t,ξ) = 𝔻v(t,ξ)(𝒟_sξ) + Y_s(t,ξ)`.
pub fn chain_rule(spec: &InitSpec, qpath: &QPath, cfg: &SolverConfig, r_stride: usize) -> Result<MalliavinField> {
    let (xi, dxi) = make_xi(spec, qpath.base());
    let base = BaseSolution::solve(&xi, qpath, cfg)?;
    chain_rule_with_base(&base, &dxi, qpath, cfg, r_stride)
}

pub fn chain_rule_with_base(
    base: &BaseSolution,
    dxi: &SpectralField,
    qpath: &QPath,
    cfg: &SolverConfig,
    r_stride: usize,
) -> Result<MalliavinField> {
    base.check(qpath, cfg)?;
    let frechet = solve_frechet(base, dxi, qpath, cfg)?;
    let grid = r_grid(qpath.steps(), r_stride);
    let y = y_on_grid(base, qpath, cfg, &grid)?;
    Ok(MalliavinField {
        times: qpath.base().times(),
        grid,
        alpha: cfg.alpha,
        frechet,
        y,
    })
}

/// `(∇u)_s = 𝒟_sQ(s)·v(s,ξ) + 2Q(s)·𝔻v(s,ξ)(𝒟_sξ)` on the full grid.
pub fn nabla_solution(spec: &InitSpec, qpath: &QPath, cfg: &SolverConfig) -> Result<Vec<SpectralField>> {
    let (xi, dxi) = make_xi(spec, qpath.base());
    let base = BaseSolution::solve(&xi, qpath, cfg)?;
    let z = solve_frechet(&base, &dxi, qpath, cfg)?;
    Ok(nabla_from_parts(base.trajectory(), &z, qpath))
}

pub fn nabla_from_parts(v: &Trajectory, z: &Trajectory, qpath: &QPath) -> Vec<SpectralField> {
    (0..v.len())
        .map(|s| {
            let mut out = v.state(s).scale(qpath.d_q(s, s));
            out.axpy(2.0 * qpath.q(s), z.state(s));
            out
        })
        .collect()
}

/// Distances of the discrete one-sided traces `𝒟_s v(s±Δt, ξ)` from the
/// analytic diagonal value `𝔻v(s,ξ)(𝒟_sξ)`, in the V norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalTraces {
    pub plus_gap: f64,
    pub minus_gap: f64,
    pub scale: f64,
}

pub fn diagonal_traces(spec: &InitSpec, qpath: &QPath, cfg: &SolverConfig, s: usize) -> Result<DiagonalTraces> {
    if s == 0 || s >= qpath.steps() {
        return Err(Error::InvalidParameter(format!(
            "diagonal index {s} needs neighbours on both sides"
        )));
    }
    let (xi, dxi) = make_xi(spec, qpath.base());
    let base = BaseSolution::solve(&xi, qpath, cfg)?;
    let z = solve_frechet(&base, &dxi, qpath, cfg)?;
    let y = solve_y(&base, qpath, s, cfg)?;
    let diag = z.state(s);
    let plus = z.state(s + 1).add(y.state(s + 1));
    let minus = z.state(s - 1).add(y.state(s - 1));
    Ok(DiagonalTraces {
        plus_gap: norm_v(&plus.sub(diag), cfg.alpha),
        minus_gap: norm_v(&minus.sub(diag), cfg.alpha),
        scale: norm_v(diag, cfg.alpha),
    })
}

/// Noise-shift finite difference against the integrated chain rule.
#[derive(Debug, Clone)]
pub struct NoiseShift {
    pub finite_difference: SpectralField,
    pub predicted: SpectralField,
    pub relative_error: f64,
}

/// Shifts `W → W + εH` with `H(t) = (t - t_{r0})⁺` (which moves both `Q` and
/// `ξ = g(W(T))`), and compares `(v^ε(T) - v(T))/ε` with
/// `∫_{t_{r0}}^T 𝒟_s v(T,ξ) ds`. `r0` must be a multiple of `r_stride`.
pub fn noise_shift_check(
    spec: &InitSpec,
    path: &BrownianPath,
    sigma: f64,
    level: f64,
    cfg: &SolverConfig,
    r0: usize,
    eps: f64,
    r_stride: usize,
) -> Result<NoiseShift> {
    let grid = r_grid(path.steps(), r_stride);
    let r0_pos = grid
        .iter()
        .position(|&r| r == r0)
        .ok_or_else(|| Error::InvalidParameter(format!("r0={r0} is not on the stride-{r_stride} grid")))?;
    let qpath = q_of(path, sigma, level);
    let (xi, dxi) = make_xi(spec, path);
    let base = BaseSolution::solve(&xi, &qpath, cfg)?;
    let field = chain_rule_with_base(&base, &dxi, &qpath, cfg, r_stride)?;
    let predicted = field.integrate_from(r0_pos, grid.len() - 1);

    let t0 = path.time(r0);
    let shifted = path.shifted(eps, |t| (t - t0).max(0.0));
    let (xi_eps, _) = make_xi(spec, &shifted);
    let v_eps = solve_v(&xi_eps, &q_of(&shifted, sigma, level), cfg)?;
    let mut fd = v_eps.last().sub(base.trajectory().last());
    fd.scale_in_place(1.0 / eps);

    let relative_error = norm_v(&fd.sub(&predicted), cfg.alpha) / norm_v(&predicted, cfg.alpha).max(f64::MIN_POSITIVE);
    Ok(NoiseShift {
        finite_difference: fd,
        predicted,
        relative_error,
    })
}

//! Randomized invariants over seeds, cutoffs and parameters.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use secondgrade::malliavin::{solve_frechet, BaseSolution};
use secondgrade::operators::{b_hat_direct, BilinearEngine, ForceSpec};
use secondgrade::solver::{assemble_u, invert_u, solve_v, Propagator, SolverConfig};
use secondgrade::spectral::{build_basis, inner_v, inner_w, norm_v, norm_w, project, SpectralField};
use secondgrade::stochint::{ito_sum, product_rule_check, stratonovich_midpoint, IntegrandPath, ProductPair};
use secondgrade::wiener::{q_of, BrownianPath};

fn field(seed: u64, n: usize, decay: f64) -> SpectralField {
    SpectralField::random(n, decay, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval_in_the_eigenbasis(seed in any::<u64>(), n in 1usize..6, alpha in 0.1f64..3.0) {
        let u = field(seed, n, 1.0);
        let mut sum = 0.0;
        for e in build_basis(n, alpha).unwrap() {
            let c = inner_w(&u, &e.to_field(n).unwrap(), alpha);
            sum += c * c;
        }
        prop_assert!(close(sum, norm_w(&u, alpha).powi(2), 1e-12));
    }

    #[test]
    fn random_fields_are_real(seed in any::<u64>(), n in 1usize..8) {
        prop_assert_eq!(field(seed, n, 1.0).reality_defect(), 0.0);
    }

    #[test]
    fn projection_is_idempotent_and_contracting(seed in any::<u64>(), n in 2usize..8, m in 1usize..8, alpha in 0.1f64..3.0) {
        let u = field(seed, n, 1.0);
        let p = project(&u, m);
        prop_assert_eq!(project(&p, m), p.clone());
        prop_assert!(norm_v(&p, alpha) <= norm_v(&u, alpha) * (1.0 + 1e-15));
        prop_assert!(inner_v(&u.with_cutoff(m.max(n)).sub(&p.with_cutoff(m.max(n))), &p.with_cutoff(m.max(n)), alpha).abs() <= 1e-12 * norm_v(&u, alpha).powi(2));
    }

    #[test]
    fn transport_identities(seed in any::<u64>(), n in 1usize..7, alpha in 0.2f64..2.0) {
        let mut engine = BilinearEngine::with_default_grid(n, alpha).unwrap();
        let (u, v, w) = (field(seed, n, 1.0), field(seed ^ 1, n, 1.0), field(seed ^ 2, n, 1.0));
        let buv = engine.apply(&u, &v).unwrap();
        let buw = engine.apply(&u, &w).unwrap();
        let scale = norm_w(&u, alpha) * norm_v(&v, alpha) * norm_v(&w, alpha).max(norm_v(&v, alpha));
        prop_assert!(inner_v(&buv, &v, alpha).abs() <= 1e-10 * scale);
        prop_assert!((inner_v(&buv, &w, alpha) + inner_v(&buw, &v, alpha)).abs() <= 1e-10 * scale);
        prop_assert!(buv.reality_defect() <= 1e-12 * norm_v(&buv, alpha).max(1.0));
        let buu = engine.apply(&u, &u).unwrap();
        prop_assert!(inner_w(&buu, &u, alpha).abs() <= 1e-10 * norm_w(&u, alpha).powi(3));
    }

    #[test]
    fn transform_agrees_with_direct_sum(seed in any::<u64>(), n in 1usize..5, alpha in 0.2f64..2.0) {
        let (u, v) = (field(seed, n, 1.0), field(seed ^ 7, n, 1.0));
        let direct = b_hat_direct(&u, &v, alpha).unwrap();
        let fast = BilinearEngine::with_default_grid(n, alpha).unwrap().apply(&u, &v).unwrap();
        prop_assert!(norm_v(&fast.sub(&direct), alpha) <= 1e-10 * norm_v(&direct, alpha).max(1e-300));
    }

    #[test]
    fn transport_is_bilinear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let n = 4;
        let mut engine = BilinearEngine::with_default_grid(n, 1.0).unwrap();
        let (u, u2, v) = (field(seed, n, 1.0), field(seed ^ 3, n, 1.0), field(seed ^ 5, n, 1.0));
        let mut combo = u.scale(a);
        combo.axpy(1.0, &u2);
        let lhs = engine.apply(&combo, &v).unwrap();
        let mut rhs = engine.apply(&u, &v).unwrap().scale(a);
        rhs.axpy(1.0, &engine.apply(&u2, &v).unwrap());
        prop_assert!(norm_v(&lhs.sub(&rhs), 1.0) <= 1e-12 * (1.0 + norm_v(&rhs, 1.0)));
    }

    #[test]
    fn force_vanishes_at_zero_and_matches_difference_quotient(seed in any::<u64>(), t in 0.0f64..2.0) {
        let alpha = 0.8;
        for spec in [ForceSpec::linear_gain(0.7), ForceSpec::saturated(0.7)] {
            prop_assert!(spec.evaluate(&SpectralField::zeros(3), t, alpha).is_zero());
            let (u, g) = (field(seed, 3, 1.0), field(seed ^ 9, 3, 1.0));
            let h = 1e-6;
            let mut up = u.clone();
            up.axpy(h, &g);
            let mut um = u.clone();
            um.axpy(-h, &g);
            let fd = spec.evaluate(&up, t, alpha).sub(&spec.evaluate(&um, t, alpha)).scale(0.5 / h);
            let exact = spec.derivative(&u, t, &g, alpha);
            prop_assert!(norm_v(&fd.sub(&exact), alpha) <= 1e-7 * (1.0 + norm_v(&exact, alpha)));
        }
    }

    #[test]
    fn sampling_is_refinement_consistent(seed in any::<u64>(), m0 in 1usize..20, levels in 0u32..4) {
        let m = m0 * 2usize.pow(levels);
        let fine = BrownianPath::sample(seed, 4 * m, 1.0).unwrap();
        let coarse = BrownianPath::sample(seed, m, 1.0).unwrap();
        let down = fine.coarsen(4).unwrap();
        prop_assert_eq!(down.values(), coarse.values());
    }

    #[test]
    fn q_is_exponential_of_clamped_path(seed in any::<u64>(), sigma in 0.0f64..2.0, level in 0.1f64..3.0) {
        let p = BrownianPath::sample(seed, 64, 1.0).unwrap();
        let q = q_of(&p, sigma, level);
        for j in 0..=64 {
            let w = p.value(j).clamp(-level, level);
            prop_assert!(close(q.q(j), (sigma * w).exp(), 1e-15));
            prop_assert!(q.q(j) <= (sigma * level).exp() * (1.0 + 1e-15));
            for r in (j + 1)..=64 {
                prop_assert_eq!(q.d_q(r, j), 0.0);
            }
        }
    }

    #[test]
    fn midpoint_sum_of_w_telescopes(seed in any::<u64>(), upto in 0usize..=80) {
        let p = BrownianPath::sample(seed, 80, 1.0).unwrap();
        let x = IntegrandPath::from_fn(&p, |j| p.value(j));
        let strat = stratonovich_midpoint(&x, &p, 1.0, upto).unwrap();
        prop_assert!(close(strat, 0.5 * p.value(upto).powi(2), 1e-12));
        let qv: f64 = (0..upto).map(|j| p.increment(j).powi(2)).sum();
        let ito = ito_sum(&x, &p, 1.0, upto).unwrap();
        prop_assert!(close(ito, 0.5 * (p.value(upto).powi(2) - qv), 1e-12));
    }

    #[test]
    fn product_rule_is_exact_at_zero(seed in any::<u64>(), sigma in 0.0f64..1.5) {
        let p = BrownianPath::sample(seed, 32, 1.0).unwrap();
        for pair in ProductPair::ALL {
            prop_assert_eq!(product_rule_check(pair, &p, sigma, 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_dynamics_ignore_the_path(seed in any::<u64>(), sigma in 0.0f64..1.0, nu in 0.1f64..2.0) {
        let cfg = SolverConfig::new(1.0, nu, 4).with_force(ForceSpec::zero()).linear();
        let f = field(seed, 4, 1.5);
        let p = BrownianPath::sample(seed, 40, 1.0).unwrap();
        let traj = solve_v(&f, &q_of(&p, sigma, 3.0), &cfg).unwrap();
        let exact = Propagator::new(&cfg, 1.0).apply(&f);
        prop_assert!(norm_v(&traj.last().sub(&exact), 1.0) <= 1e-12 * norm_v(&f, 1.0));
    }

    #[test]
    fn u_v_round_trip(seed in any::<u64>(), sigma in 0.0f64..1.0) {
        let cfg = SolverConfig::new(1.0, 0.5, 4).with_force(ForceSpec::saturated(0.5));
        let p = BrownianPath::sample(seed, 30, 1.0).unwrap();
        let q = q_of(&p, sigma, 3.0);
        let v = solve_v(&field(seed, 4, 2.0), &q, &cfg).unwrap();
        let back = invert_u(&assemble_u(&v, &q).unwrap(), &q).unwrap();
        for (a, b) in v.states().iter().zip(back.states()) {
            prop_assert!(norm_v(&a.sub(b), 1.0) <= 1e-13 * norm_v(a, 1.0).max(1e-300));
        }
    }

    #[test]
    fn frechet_derivative_is_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let cfg = SolverConfig::new(1.0, 0.5, 3).with_force(ForceSpec::saturated(0.5));
        let p = BrownianPath::sample(seed, 24, 0.5).unwrap();
        let q = q_of(&p, 0.5, 3.0);
        let base = BaseSolution::solve(&field(seed, 3, 2.0), &q, &cfg).unwrap();
        let (g1, g2) = (field(seed ^ 11, 3, 2.0), field(seed ^ 12, 3, 2.0));
        let mut g = g1.scale(a);
        g.axpy(1.0, &g2);
        let z = solve_frechet(&base, &g, &q, &cfg).unwrap();
        let mut zz = solve_frechet(&base, &g1, &q, &cfg).unwrap().last().scale(a);
        zz.axpy(1.0, solve_frechet(&base, &g2, &q, &cfg).unwrap().last());
        prop_assert!(norm_v(&z.last().sub(&zz), 1.0) <= 1e-12 * (1.0 + norm_v(&zz, 1.0)));
    }
}

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aniso_lp_core::frame::{build_frame, random_smooth_path, FrameSample, FRAME_TOL};
use aniso_lp_core::gronwall::{integrate_equality_ode, iteration_bound, GronwallProblem, SampledFn, SigmaSpec};
use aniso_lp_core::lp::{self, aniso_sobolev_norm, shell_range, Band, Direction};
use aniso_lp_core::ns::{self, random_divergence_free, FlowState};
use aniso_lp_core::ops::{directional_derivative, leray_project};
use aniso_lp_core::vec3::normalize;
use aniso_lp_core::{make_grid, ineq, Grid, PhysicalField, Rank, SpectralField};

fn physical(grid: &Grid, rank: Rank, values: &[f64]) -> PhysicalField {
    let len = grid.len() * rank.components();
    PhysicalField::from_values(grid, rank, values.iter().cycle().take(len).copied().collect()).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 97..160)
}

fn direction() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(a, b, c)| a * a + b * b + c * c > 0.01)
        .prop_map(|(a, b, c)| normalize([a, b, c]))
}

fn scalar_field(grid: &Grid, seed: u64) -> SpectralField {
    random_divergence_free(grid, seed, 3, 1.0).component_field(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip(v in values(), big in any::<bool>()) {
        let g = make_grid(if big { 16 } else { 8 }).unwrap();
        // band-limited below Nyquist, where the transform pair is exact
        let f = physical(&g, Rank::Vector3, &v).to_spectral().dealiased();
        let back = f.to_physical().to_spectral();
        prop_assert!((&back - &f).coeff_norm() <= 1e-13 * f.coeff_norm());
    }

    #[test]
    fn parseval(v in values()) {
        let g = make_grid(8).unwrap();
        let f = physical(&g, Rank::Scalar, &v).to_spectral().dealiased();
        let (a, b) = (f.to_physical().l2_norm(), f.l2_norm());
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn leray_idempotent_and_self_adjoint(s1 in 0u64..1000, s2 in 0u64..1000) {
        let g = make_grid(8).unwrap();
        let noisy = |s: u64| {
            let mut f = physical(&g, Rank::Vector3, &(0..200).map(|i| ((i as f64 + 0.5) * (s as f64 + 1.7)).sin()).collect::<Vec<_>>()).to_spectral();
            f.remove_mean();
            f
        };
        let (u, v) = (noisy(s1), noisy(s2));
        let pu = leray_project(&u).unwrap();
        let ppu = leray_project(&pu).unwrap();
        prop_assert!((&ppu - &pu).l2_norm() <= 1e-12 * u.l2_norm());
        let pv = leray_project(&v).unwrap();
        let (a, b) = (pu.inner(&v), u.inner(&pv));
        prop_assert!((a - b).abs() <= 1e-12 * u.l2_norm() * v.l2_norm());
    }

    #[test]
    fn directional_derivative_linear_and_odd(s1 in 0u64..500, s2 in 0u64..500, c in -3.0f64..3.0, e in direction()) {
        let g = make_grid(8).unwrap();
        let (f, h) = (scalar_field(&g, s1), scalar_field(&g, s2));
        let lhs = directional_derivative(&(&f + &(&h * c)), e).unwrap();
        let rhs = directional_derivative(&f, e).unwrap() + directional_derivative(&h, e).unwrap() * c;
        prop_assert!((&lhs - &rhs).l2_norm() <= 1e-12 * (1.0 + lhs.l2_norm()));
        let neg = directional_derivative(&f, [-e[0], -e[1], -e[2]]).unwrap();
        prop_assert!((&neg + &directional_derivative(&f, e).unwrap()).l2_norm() <= 1e-14 * (1.0 + f.l2_norm()));
    }

    #[test]
    fn frames_are_orthonormal_and_oriented(seed in any::<u64>(), jumps in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = random_smooth_path(&mut rng, 120, jumps);
        let frame = build_frame(&path).unwrap();
        prop_assert!(frame.max_defect() <= FRAME_TOL);
        let (lo, hi) = frame.determinant_range();
        prop_assert!((lo - 1.0).abs() <= FRAME_TOL && (hi - 1.0).abs() <= FRAME_TOL);
    }

    #[test]
    fn shells_resum_to_identity(seed in 0u64..1000, beta in direction()) {
        let g = make_grid(16).unwrap();
        let f = scalar_field(&g, seed);
        let frame = FrameSample::for_beta(beta);
        for dir in [Direction::Perp, Direction::Par] {
            let (lo, hi) = shell_range(&g, beta, dir).unwrap();
            let mut sum = SpectralField::zeros(&g, Rank::Scalar);
            for j in lo..=hi {
                sum += &match dir {
                    Direction::Perp => lp::project_perp(&f, Band::Shell(j), &frame),
                    Direction::Par => lp::project_par(&f, Band::Shell(j), &frame),
                };
            }
            // modes with zero directional magnitude belong to no shell
            let missed = f.apply_real_multiplier(|k| if dir.magnitude(k, beta) <= 1e-12 { 1.0 } else { 0.0 });
            prop_assert!((&(&sum + &missed) - &f).l2_norm() <= 1e-12 * f.l2_norm());
        }
    }

    #[test]
    fn sobolev_norm_homogeneous_and_frame_invariant(seed in 0u64..1000, c in -4.0f64..4.0, angle in 0.0f64..6.28, beta in direction(), s1 in -1.0f64..2.0, s2 in -1.0f64..2.0) {
        let g = make_grid(8).unwrap();
        let f = scalar_field(&g, seed);
        let frame = FrameSample::for_beta(beta);
        let base = aniso_sobolev_norm(&f, s1, s2, &frame).unwrap().value;
        let scaled = aniso_sobolev_norm(&(&f * c), s1, s2, &frame).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * (1.0 + scaled));
        let turned = aniso_sobolev_norm(&f, s1, s2, &frame.rotated_in_plane(angle)).unwrap().value;
        prop_assert!((turned - base).abs() <= 1e-12 * base.max(1e-300));
    }

    #[test]
    fn inequality_reports_reproducible(seed in 0u64..100) {
        let g = make_grid(8).unwrap();
        let p = ineq::params(&[("sigma", 0.1), ("eta", 0.0)]);
        let a = ineq::run_named(ineq::IneqKind::Interp, &p, &g, 4, seed).unwrap();
        let b = ineq::run_named(ineq::IneqKind::Interp, &p, &g, 4, seed).unwrap();
        prop_assert_eq!(a.max_ratio.to_bits(), b.max_ratio.to_bits());
        prop_assert_eq!(a.pass, b.pass);
    }

    #[test]
    fn larger_phi_never_lowers_trajectory(a in 0.0f64..0.3, bump in 0.0f64..0.3, centre in 0.1f64..0.9, f0 in 0.5f64..3.0) {
        let base = SampledFn::from_fn(0.0, 1.0, 65, |t| a * (1.0 + (5.0 * t).sin())).unwrap();
        let more = SampledFn::from_fn(0.0, 1.0, 65, |t| a * (1.0 + (5.0 * t).sin()) + bump * (-(t - centre).powi(2) * 40.0).exp()).unwrap();
        let low = integrate_equality_ode(&GronwallProblem::new(f0, 1.0, SigmaSpec::Delta(0.2), base).unwrap(), 0.2).unwrap();
        let high = integrate_equality_ode(&GronwallProblem::new(f0, 1.0, SigmaSpec::Delta(0.2), more).unwrap(), 0.2).unwrap();
        for (i, (tl, th)) in low.times.iter().zip(&high.times).enumerate() {
            if tl != th {
                break;
            }
            prop_assert!(high.log_f[i] >= low.log_f[i] - 1e-12 * low.log_f[i].abs().max(1.0));
        }
    }

    #[test]
    fn iteration_bound_monotone(f0 in 0.2f64..5.0, delta in 0.05f64..0.45, m in 0.2f64..5.0, phi in 0.05f64..3.0) {
        let base = iteration_bound(f0, delta, m, phi).unwrap();
        prop_assert!(iteration_bound(f0, delta, m, phi * 1.5).unwrap() >= base);
        prop_assert!(iteration_bound(f0, delta, m * 1.5, phi).unwrap() >= base);
        prop_assert!(iteration_bound(f0 * 1.5, delta, m, phi).unwrap() >= base);
        prop_assert!(iteration_bound(f0, delta * 1.1, m, phi).unwrap() <= base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solver_keeps_divergence_and_energy_balance(seed in 0u64..1000, rms in 0.2f64..2.0) {
        let g = make_grid(16).unwrap();
        let s0 = FlowState::new(random_divergence_free(&g, seed, 3, rms), 1.0).unwrap();
        let e0 = s0.energy();
        let dt = s0.default_dt().unwrap().min(1e-3);
        let mut worst_div: f64 = 0.0;
        let last = ns::integrate(s0, dt, 10, |_, s| {
            worst_div = worst_div.max(s.max_divergence());
            Ok(())
        }).unwrap();
        prop_assert!(worst_div <= 1e-12);
        prop_assert!(last.energy_identity_defect(e0) <= 1e-8);
    }
}

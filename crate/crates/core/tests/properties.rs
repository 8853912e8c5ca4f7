use affine_euler::cli::format_float;
use affine_euler::integrator::{integrate, IntegrationConfig, Termination};
use affine_euler::interior::{
    condition_integrals, gauge_preset, q_functions, FnVelocity, GaugeChoice, GaugeKind, Lambda, LinearDecay, SkewGauge,
};
use affine_euler::moments::{
    beta_invariant_residual, embed_scalar, extract_scalar, scalar_energy, scalar_invariants, validate_params,
    ScalarMomentState, ScalarSystem,
};
use affine_euler::Exec;
use nalgebra::Matrix2;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frictionless_runs_conserve_energy_and_beta_invariant(
        gamma in 1.2..3.0_f64,
        l in -1.0..1.0_f64,
        g1 in 0.3..3.0_f64,
        alpha in -0.5..0.5_f64,
        beta in -0.5..0.5_f64,
        ep0 in 0.1..2.0_f64,
    ) {
        let p = validate_params(gamma, 0.0, l).unwrap();
        let s0 = ScalarMomentState::new(g1, alpha, beta);
        let inv = scalar_invariants(&p, &s0, ep0).unwrap();
        let cfg = IntegrationConfig::new(5.0).with_tolerances(1e-12, 1e-14);
        let traj = integrate(&ScalarSystem { params: p, inv }, s0.to_array(), 0.0, &cfg).unwrap();
        prop_assert_eq!(traj.termination(), Termination::ReachedHorizon);
        for (&t, y) in traj.times().iter().zip(traj.states()) {
            let s = ScalarMomentState::from_array(*y);
            let e = scalar_energy(&p, &inv, &s).unwrap().total;
            prop_assert!((e - inv.e_total).abs() <= 1e-8 * inv.e_total.abs().max(1.0));
            prop_assert!(beta_invariant_residual(&p, &inv, t, &s).unwrap().abs() <= 1e-8);
        }
    }

    #[test]
    fn embed_extract_round_trip(
        gamma in 1.1..3.0_f64,
        mu in 0.0..1.0_f64,
        l in -1.0..1.0_f64,
        g1 in 1e-3..1e3_f64,
        alpha in -2.0..2.0_f64,
        beta in -2.0..2.0_f64,
    ) {
        let p = validate_params(gamma, mu, l).unwrap();
        let s = ScalarMomentState::new(g1, alpha, beta);
        let back = extract_scalar(&p, &embed_scalar(&p, &s).unwrap()).unwrap();
        prop_assert_eq!(back.alpha, alpha);
        prop_assert_eq!(back.beta, beta);
        prop_assert!((back.g1 / g1 - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn skew_gauge_is_antisymmetric_and_b_is_unimodular(
        u0 in -3.0..3.0_f64,
        u1 in -3.0..3.0_f64,
        t in 0.0..1e4_f64,
        a in 0.1..2.0_f64,
        b in -1.0..1.0_f64,
        c in -1.0..1.0_f64,
        d in 0.1..2.0_f64,
    ) {
        prop_assume!(a * d - b * c > 1e-3);
        let u = SkewGauge { constant: u0, decaying: u1 }.at(t);
        prop_assert_eq!(u + u.transpose(), Matrix2::zeros());
        let p = validate_params(2.0, 0.5, 0.3).unwrap();
        let g = gauge_preset(&p, GaugeKind::Cor22 { delta: 0.25 }).unwrap();
        let a0 = Matrix2::new(a, b, c, d);
        let v = q_functions(&g, &LinearDecay { a0 }, t, 2.0).unwrap();
        prop_assert!((v.b.determinant() - 1.0).abs() <= 1e-10);
        prop_assert!((v.xi - a0.determinant() / (1.0 + t).powi(2)).abs() <= 1e-12 * v.xi);
    }

    #[test]
    fn csv_floats_round_trip(x in any::<f64>()) {
        let s = format_float(x);
        let y: f64 = s.parse().unwrap();
        prop_assert!(y.to_bits() == x.to_bits() || (x.is_nan() && y.is_nan()), "{}", s);
        prop_assert!(!s.contains(','));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn condition_integrals_are_covariant_under_gauge_scaling(
        k in 0.01..100.0_f64,
        power in -3.0..0.5_f64,
        rate in 0.0..0.5_f64,
        q in 0.2..2.0_f64,
    ) {
        let p = validate_params(2.0, 0.0, 0.0).unwrap();
        let force = p.force_matrix();
        let a = FnVelocity(|t: f64| Matrix2::new(1.0, 0.2, -0.2, 1.0) / (1.0 + t));
        let base = GaugeChoice::new(Lambda { scale: 1.0, power, rate }, q, SkewGauge::ZERO, 0.0, force).unwrap();
        let scaled = GaugeChoice { lambda: Lambda { scale: k, ..base.lambda }, ..base };
        let (c1, d1) = condition_integrals(Exec::Sequential, &base, &a, 1e5).unwrap();
        let (c2, d2) = condition_integrals(Exec::Sequential, &scaled, &a, 1e5).unwrap();
        prop_assert_eq!(c1.status, c2.status);
        prop_assert_eq!(d1.status, d2.status);
        prop_assert!((c2.partial / (k * c1.partial) - 1.0).abs() <= 1e-9);
        prop_assert!((d2.partial / (k.powf(q) * d1.partial) - 1.0).abs() <= 1e-9);
    }
}

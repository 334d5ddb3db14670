use matdisc::bounds::{
    chernoff_from_spectra, hypercube_exp_lhs, hypercube_gaussian_rhs, vandermonde_sup, GramSpectrum,
};
use matdisc::diagnostics::{
    check_kaci_truncation, estimate_maci_symvec, estimate_maci_with_directions, Direction,
};
use matdisc::ensembles::{EnsembleSpec, RngStream};
use matdisc::harness::verify::{gaussian_symmetric, hypercube_instance};
use matdisc::signer::{exact_discrepancy, mhc_step, run_on_matrices, Algorithm, SignerState};
use matdisc::symlin::{
    log_trace_cosh_from_eigenvalues, matrix_func, numerical_rank, symmat, symvec, MatrixFunction,
    SymMatrix,
};
use proptest::prelude::*;
use rand::Rng;

fn random_sym(n: usize, seed: u64, scale: f64) -> SymMatrix {
    gaussian_symmetric(n, &mut RngStream::new(seed).rng()).scaled(scale)
}

/// `count` matrices with `‖A‖ ≤ 1`.
fn unit_ball_stream(n: usize, count: usize, seed: u64) -> Vec<SymMatrix> {
    let mut rng = RngStream::new(seed).rng();
    (0..count)
        .map(|_| {
            let a = gaussian_symmetric(n, &mut rng);
            let norm = a.op_norm().unwrap();
            a.scaled(rng.random_range(0.1..1.0) / norm)
        })
        .collect()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(96))]

    #[test]
    fn golden_thompson(n in 1usize..=6, seed in any::<u64>(), scale in 0.05f64..1.5) {
        let x = random_sym(n, seed, scale);
        let y = random_sym(n, seed ^ 0x9e37, scale);
        let lhs = matrix_func(&x.add_scaled(&y, 1.0), MatrixFunction::Exp).unwrap().trace();
        let rhs = matrix_func(&x, MatrixFunction::Exp).unwrap()
            .inner(&matrix_func(&y, MatrixFunction::Exp).unwrap());
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn cosh_addition_bound(n in 1usize..=6, seed in any::<u64>(), scale in 0.05f64..1.5) {
        let x = random_sym(n, seed, scale);
        let y = random_sym(n, seed.wrapping_add(1), scale);
        let f = |m: &SymMatrix, k| matrix_func(m, k).unwrap();
        let lhs = f(&x.add_scaled(&y, 1.0), MatrixFunction::Cosh).trace();
        let rhs = f(&x, MatrixFunction::Cosh).inner(&f(&y, MatrixFunction::Cosh))
            + f(&x, MatrixFunction::Sinh).inner(&f(&y, MatrixFunction::Sinh));
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn sinh_is_odd_and_cosh_even(n in 1usize..=6, seed in any::<u64>()) {
        let x = random_sym(n, seed, 1.0);
        let neg = x.scaled(-1.0);
        let s = matrix_func(&x, MatrixFunction::Sinh).unwrap();
        let s_neg = matrix_func(&neg, MatrixFunction::Sinh).unwrap();
        let c = matrix_func(&x, MatrixFunction::Cosh).unwrap();
        let c_neg = matrix_func(&neg, MatrixFunction::Cosh).unwrap();
        let scale = c.frobenius_norm();
        prop_assert!(s.add_scaled(&s_neg, 1.0).frobenius_norm() <= 1e-12 * scale);
        prop_assert!(c.add_scaled(&c_neg, -1.0).frobenius_norm() <= 1e-12 * scale);
    }

    #[test]
    fn cosh_minus_identity_is_psd_with_same_rank(n in 1usize..=6, rank in 1usize..=6, seed in any::<u64>()) {
        let rank = rank.min(n);
        let mut rng = RngStream::new(seed).rng();
        let q = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
        let vals: Vec<f64> = (0..n)
            .map(|k| if k < rank { rng.random_range(0.2..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 } } else { 0.0 })
            .collect();
        let x = SymMatrix::from_spectrum(&vals, &q).unwrap();
        let x_rank = numerical_rank(&x, 1e-8).unwrap();
        let tilde = matrix_func(&x, MatrixFunction::Cosh).unwrap()
            .add_scaled(&SymMatrix::identity(n), -1.0);
        let eigs = tilde.eigenvalues().unwrap();
        prop_assert!(*eigs.last().unwrap() >= -1e-10);
        prop_assert_eq!(numerical_rank(&tilde, 1e-8).unwrap(), x_rank);
        let expect = x.op_norm().unwrap().cosh() - 1.0;
        prop_assert!((tilde.op_norm().unwrap() - expect).abs() <= 1e-9 * expect.max(1.0));
    }

    #[test]
    fn norm_chain(n in 1usize..=7, seed in any::<u64>()) {
        let a = random_sym(n, seed, 1.0);
        let nm = a.norms().unwrap();
        let tol = 1e-12 * nm.nuclear.max(1.0);
        prop_assert!(nm.operator <= nm.frobenius + tol);
        prop_assert!(nm.frobenius <= nm.nuclear + tol);
        prop_assert!(nm.frobenius >= nm.nuclear / (n as f64).sqrt() - tol);
    }

    #[test]
    fn log_trace_cosh_brackets_the_norm(n in 1usize..=7, seed in any::<u64>(), alpha in 0.01f64..50.0) {
        let a = random_sym(n, seed, 1.0);
        let eigs = a.eigenvalues().unwrap();
        let v = log_trace_cosh_from_eigenvalues(&eigs, alpha);
        let x = alpha * a.op_norm().unwrap();
        prop_assert!(v >= x - std::f64::consts::LN_2 - 1e-12);
        prop_assert!(v <= x + (n as f64).ln() + 1e-12);
    }

    #[test]
    fn symvec_is_an_isometry(n in 1usize..=7, seed in any::<u64>()) {
        let a = random_sym(n, seed, 1.0);
        let b = random_sym(n, seed.wrapping_mul(3).wrapping_add(7), 1.0);
        let (va, vb) = (symvec(&a), symvec(&b));
        prop_assert!((va.dot(&vb) - a.inner(&b)).abs() <= 1e-12 * (1.0 + a.inner(&b).abs()));
        let back = symmat(&va).unwrap();
        prop_assert!(back.add_scaled(&a, -1.0).frobenius_norm() <= 1e-15 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn vandermonde_dominates_every_point(n in 2usize..=6, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed).rng();
        let pts: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut prod = 1.0;
        for i in 0..n {
            for j in (i + 1)..n {
                prod *= (pts[i] - pts[j]).abs();
            }
        }
        prop_assert!(vandermonde_sup(n) >= prod);
    }

    #[test]
    fn hypercube_comparison(seed in any::<u64>()) {
        let m = hypercube_instance(10, &mut RngStream::new(seed).rng()).unwrap();
        let lhs = hypercube_exp_lhs(&m).unwrap();
        let rhs = hypercube_gaussian_rhs(&m).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn truncation_is_monotone_in_event_probability(eta in 0.5f64..1.0, c in 0.1f64..4.0, p in 0.9f64..0.999) {
        let lo = check_kaci_truncation(eta, c, p);
        let hi = check_kaci_truncation(eta, c, (p + 0.0005).min(1.0));
        if let Ok(v) = lo {
            prop_assert!(hi.unwrap() >= v);
        }
    }
}

proptest! {
    #![proptest_config(config(48))]

    /// Signs chosen on a prefix never change when more matrices arrive.
    #[test]
    fn online_signers_are_causal(n in 1usize..=5, t in 2usize..=30, cut in 1usize..30, seed in any::<u64>()) {
        let cut = cut.min(t);
        let mats = unit_ball_stream(n, t, seed);
        for alg in [Algorithm::Mhc, Algorithm::Greedy, Algorithm::Random] {
            let full = run_on_matrices(&mats, alg, 0.3, &mut RngStream::new(seed).rng()).unwrap();
            let pre = run_on_matrices(&mats[..cut], alg, 0.3, &mut RngStream::new(seed).rng()).unwrap();
            prop_assert_eq!(&full[..cut], &pre[..]);
        }
    }

    /// Negating every input negates every partial sum, so norms are unchanged.
    #[test]
    fn mhc_is_negation_equivariant(n in 1usize..=5, t in 1usize..=30, seed in any::<u64>()) {
        let mats = unit_ball_stream(n, t, seed);
        let neg: Vec<SymMatrix> = mats.iter().map(|a| a.scaled(-1.0)).collect();
        let mut rng = RngStream::new(0).rng();
        let a = run_on_matrices(&mats, Algorithm::Mhc, 0.5, &mut rng).unwrap();
        let b = run_on_matrices(&neg, Algorithm::Mhc, 0.5, &mut rng).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            prop_assert!((ra.op_norm - rb.op_norm).abs() <= 1e-9 * (1.0 + ra.op_norm));
        }
    }

    /// `Tr cosh(α(M ± A)) ≤ Tr cosh(αM) cosh(αA)` for the chosen sign.
    #[test]
    fn mhc_potential_drift(n in 1usize..=5, t in 1usize..=20, seed in any::<u64>(), alpha in 0.05f64..2.0) {
        let mats = unit_ball_stream(n, t, seed);
        let mut state = SignerState::new(n, alpha).unwrap();
        for a in &mats {
            let before = state.sum().clone();
            mhc_step(&mut state, a).unwrap();
            let cosh_m = matrix_func(&before.scaled(alpha), MatrixFunction::Cosh).unwrap();
            let cosh_a = matrix_func(&a.scaled(alpha), MatrixFunction::Cosh).unwrap();
            let bound = cosh_m.inner(&cosh_a).ln();
            prop_assert!(state.log_potential() <= bound + 1e-9);
        }
    }

    /// The offline optimum is no worse than any online signer.
    #[test]
    fn exact_discrepancy_dominates_online(n in 1usize..=4, t in 1usize..=14, seed in any::<u64>()) {
        let mats = unit_ball_stream(n, t, seed);
        let (best, signs) = exact_discrepancy(&mats).unwrap();
        let mut sum = SymMatrix::zeros(n);
        for (a, s) in mats.iter().zip(&signs) {
            sum.add_scaled_mut(a, s.value());
        }
        prop_assert!((sum.op_norm().unwrap() - best).abs() <= 1e-12);
        for alg in [Algorithm::Mhc, Algorithm::Greedy, Algorithm::Random] {
            let recs = run_on_matrices(&mats, alg, 0.5, &mut RngStream::new(seed).rng()).unwrap();
            prop_assert!(best <= recs.last().unwrap().op_norm + 1e-12);
        }
    }

    #[test]
    fn sampling_is_a_function_of_the_address(seed in any::<u64>(), k in any::<u64>(), n in 2usize..=8) {
        let specs = [
            EnsembleSpec::goe(n),
            EnsembleSpec::wigner_conditioned(n),
            EnsembleSpec::wishart_normalized(n, 1 + n / 2),
            EnsembleSpec::projection(n, 1 + n / 3),
            EnsembleSpec::rademacher_rank_one(n),
        ];
        let stream = RngStream::new(seed).child(k);
        for spec in &specs {
            prop_assert_eq!(spec.sample_at(&stream).unwrap(), spec.sample_at(&stream).unwrap());
        }
    }

    #[test]
    fn rank_based_samples_are_psd_with_unit_norm(seed in any::<u64>(), n in 2usize..=10, r in 1usize..=10) {
        let r = r.min(n);
        let stream = RngStream::new(seed);
        for spec in [EnsembleSpec::wishart_normalized(n, r), EnsembleSpec::projection(n, r)] {
            let a = spec.sample_at(&stream).unwrap();
            let eigs = a.eigenvalues().unwrap();
            prop_assert!(*eigs.last().unwrap() >= -1e-10);
            prop_assert!((eigs[0] - 1.0).abs() <= 1e-9);
            prop_assert_eq!(numerical_rank(&a, 1e-8).unwrap(), r);
        }
    }

    /// Matrix and vectorized estimators agree on the same directions and draws.
    #[test]
    fn maci_matrix_and_vector_forms_agree(seed in any::<u64>(), n in 2usize..=6) {
        let spec = EnsembleSpec::goe(n);
        let stream = RngStream::new(seed);
        let dirs: Vec<Direction> = (0..3)
            .map(|k| Direction::normalized(format!("d{k}"), random_sym(n, seed ^ k, 1.0)).unwrap())
            .collect();
        let vecs: Vec<(String, nalgebra::DVector<f64>)> =
            dirs.iter().map(|d| (d.id.clone(), symvec(&d.matrix))).collect();
        let m = estimate_maci_with_directions(&spec, 2.0, &dirs, 100, &stream).unwrap();
        let v = estimate_maci_symvec(&spec, 2.0, &vecs, 100, &stream).unwrap();
        prop_assert!((m.eta_hat - v.eta_hat).abs() <= 1e-10 * (1.0 + m.eta_hat));
        prop_assert_eq!(m.worst_id, v.worst_id);
    }

    /// At γ = 0 the certificate is the trivial count `2^T`, and it grows with δ.
    #[test]
    fn chernoff_certificate_shape(t in 1usize..=12, seed in any::<u64>(), gamma in 0.0f64..5.0) {
        let mut rng = RngStream::new(seed).rng();
        let spectra: Vec<GramSpectrum> = (0..5)
            .map(|_| {
                let eigenvalues: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..3.0)).collect();
                GramSpectrum { trace: eigenvalues.iter().sum(), eigenvalues, clamped: 0 }
            })
            .collect();
        let zero = chernoff_from_spectra(&spectra, 4, t, 0.3, 0.0).unwrap();
        prop_assert!((zero.log_first_moment - t as f64 * std::f64::consts::LN_2).abs() <= 1e-12);
        let a = chernoff_from_spectra(&spectra, 4, t, 0.2, gamma).unwrap();
        let b = chernoff_from_spectra(&spectra, 4, t, 0.4, gamma).unwrap();
        prop_assert!(a.log_first_moment <= b.log_first_moment);
    }
}

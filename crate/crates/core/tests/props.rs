//! Property-based invariants over randomized inputs.

use proptest::prelude::*;

use sdiq_core::finitesize::{
    azuma_delta, bounded_difference, finite_size_si, BoundedDiffMode, NGuessMode,
    RoundWeightTable,
};
use sdiq_core::matcore::{is_psd, trace_inner};
use sdiq_core::optics::{mdi_nominal_stats, si_conditional, OpticalParams};
use sdiq_core::si::{extract_si_certificate, si_guessing_probability, solve_si_primal, SiModel};
use sdiq_core::{ComplexScalar, HermitianOperator};

fn hermitian(d: usize) -> impl Strategy<Value = HermitianOperator> {
    prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |raw| {
        let mut entries = vec![ComplexScalar::new(0.0, 0.0); d * d];
        let mut k = 0;
        for i in 0..d {
            entries[i * d + i] = ComplexScalar::new(raw[k], 0.0);
            k += 1;
            for j in (i + 1)..d {
                let v = ComplexScalar::new(raw[k], raw[(k + d) % (d * d)]);
                entries[i * d + j] = v;
                entries[j * d + i] = v.conj();
                k += 1;
            }
        }
        HermitianOperator::from_entries(d, entries).unwrap()
    })
}

/// A biased two-outcome Z model with a tunable X-basis component, plus a
/// valid frequency vector for it. The model always admits a state
/// reproducing the statistics (the maximally mixed direction is kept
/// interior), so solves stay well-posed.
fn si_instance() -> impl Strategy<Value = (SiModel, Vec<f64>)> {
    (0.2f64..0.8, 0.05f64..0.45).prop_map(|(w, skew)| {
        let z0 = HermitianOperator::from_diag(&[1.0, 0.0]);
        let z1 = HermitianOperator::from_diag(&[0.0, 1.0]);
        let half = ComplexScalar::new(0.5, 0.0);
        let plus = HermitianOperator::from_entries(2, vec![half, half, half, half]).unwrap();
        let minus = HermitianOperator::from_entries(2, vec![half, -half, -half, half]).unwrap();
        let povm = vec![
            z0.scale(w),
            z1.scale(w),
            plus.scale(1.0 - w),
            minus.scale(1.0 - w),
        ];
        // Frequencies of the maximally mixed state, skewed along Z only by
        // moving weight between the two Z outcomes (stays realizable:
        // rho = diag(1/2 + s, 1/2 - s) with s = skew).
        let nu = vec![
            w * (0.5 + skew),
            w * (0.5 - skew),
            (1.0 - w) * 0.5,
            (1.0 - w) * 0.5,
        ];
        (SiModel::new(povm).unwrap(), nu)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigh_reconstructs(a in hermitian(3)) {
        let (w, v) = a.eigh();
        let d = a.dim();
        let mut err: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = ComplexScalar::new(0.0, 0.0);
                for (k, wk) in w.iter().enumerate() {
                    s += v[k][i] * wk * v[k][j].conj();
                }
                err = err.max((s - a.entry(i, j)).norm());
            }
        }
        prop_assert!(err < 1e-9 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn trace_inner_symmetric_linear(a in hermitian(3), b in hermitian(3), c in hermitian(3), s in -3.0f64..3.0) {
        let ab = trace_inner(&a, &b).unwrap();
        let ba = trace_inner(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        let mut bc = b.clone();
        bc.axpy(s, &c);
        let lhs = trace_inner(&a, &bc).unwrap();
        let rhs = ab + s * trace_inner(&a, &c).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn shifted_operator_is_psd(a in hermitian(3)) {
        let mut shifted = a.clone();
        shifted.shift(a.min_eigenvalue().abs() + 1e-9);
        prop_assert!(is_psd(&shifted, 1e-10).unwrap());
    }

    #[test]
    fn si_weak_duality_and_determinism((model, nu) in si_instance()) {
        let sol1 = solve_si_primal(&model, &nu).unwrap();
        let sol2 = solve_si_primal(&model, &nu).unwrap();
        prop_assert!((sol1.primal_value - sol2.primal_value).abs() < 1e-9);

        let cert = extract_si_certificate(&model, &nu).unwrap();
        prop_assert!(cert.worst_margin <= 1e-12);
        // The certificate is an upper bound on the primal optimum.
        prop_assert!(cert.dual_objective(&nu) >= sol1.primal_value - 1e-7);
        // Eve can always guess the modal outcome.
        let modal = nu.iter().cloned().fold(0.0, f64::max);
        let (p, _) = si_guessing_probability(&model, &nu).unwrap();
        prop_assert!(p >= modal - 1e-7);
        prop_assert!(p <= 1.0 + 1e-8);
    }

    #[test]
    fn bounded_difference_covers_span(
        p_sig in 0.01f64..0.99,
        weights in prop::collection::vec(-2.0f64..2.0, 1..6),
    ) {
        let table = RoundWeightTable::new(p_sig, weights.clone()).unwrap();
        let c = bounded_difference(&table, BoundedDiffMode::Conservative);
        // Per-round increment values: chi in {guess 0/1} union test weights.
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 1.0;
        for &w in &weights {
            lo = lo.min(w);
            hi = hi.max(w);
        }
        prop_assert!(c >= hi - lo - 1e-12);
        prop_assert!(bounded_difference(&table, BoundedDiffMode::Paper) >= 0.0);
    }

    #[test]
    fn delta_monotone(n1 in 1e6f64..1e9, f in 1.5f64..100.0, e1 in 1e-12f64..1e-3, c in 0.5f64..8.0) {
        // Delta grows with N_tot and shrinks with epsilon.
        let d1 = azuma_delta(n1, e1, c).unwrap();
        let d2 = azuma_delta(n1 * f, e1, c).unwrap();
        prop_assert!(d2 > d1);
        let d3 = azuma_delta(n1, (e1 * 1e2).min(0.5), c).unwrap();
        prop_assert!(d3 <= d1);
    }

    #[test]
    fn final_length_monotone_in_epsilon(scale in 1.0f64..1e4) {
        // Fixed certificate and nominal counts; smaller epsilon means a
        // larger Delta and a weaker (smaller) N_fin.
        let lambda = vec![-0.6, -0.2, -0.2, 0.0, -0.1, -0.5];
        let n_tot = 1e10;
        let p_sig = 0.7;
        let q = [0.1, 0.1, 0.2, 0.2, 0.4];
        let counts: Vec<f64> = q.iter().map(|x| x * n_tot * (1.0 - p_sig)).collect();
        let eps_small = 1e-10;
        let eps_large = (1e-10 * scale).min(0.5);
        let r_small = finite_size_si(&lambda, &counts, n_tot, p_sig, eps_small,
            BoundedDiffMode::Conservative, NGuessMode::Derived).unwrap();
        let r_large = finite_size_si(&lambda, &counts, n_tot, p_sig, eps_large,
            BoundedDiffMode::Conservative, NGuessMode::Derived).unwrap();
        prop_assert!(r_large.n_fin >= r_small.n_fin);
    }

    #[test]
    fn optics_rows_normalized(
        mu in 0.0f64..2.0,
        eta in 0.0f64..1.0,
        p_d in 0.0f64..1e-3,
        p_z in 0.05f64..0.95,
        p_s in 0.05f64..0.95,
    ) {
        let params = OpticalParams::new(mu, eta, p_d, p_z, p_s).unwrap();
        for row in si_conditional(&params) {
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| (-1e-15..=1.0).contains(&x)));
        }
        for row in mdi_nominal_stats(&params) {
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| (-1e-15..=1.0).contains(&x)));
        }
    }
}

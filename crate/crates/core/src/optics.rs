//! Time-bin phase-encoding optical model.
//!
//! The source emits two coherent pulses (early/late time bin) of total
//! intensity `mu = 2|alpha|^2` through a lossy channel of transmittance
//! `eta_ch` into a squashed detection model: a passive basis choice
//! (Z with probability `p_z`, X otherwise) and threshold detectors with
//! per-round dark-count probability `p_d`. The squashing model reduces
//! everything to a three-dimensional system (qubit plus vacuum flag) for
//! the source-independent view, and to two nearly indistinguishable qubit
//! test states for the measurement-device-independent view.
//!
//! Conventions corrected from the source material (flagged, not silent):
//! the fourth POVM element is `(1-p_z)|-><-|` (the printed duplicate of
//! the third breaks completeness), and the test-state overlap is
//! `o = exp(-(2-sqrt(2))|alpha|^2)` (the printed `2+sqrt(2)` coefficient
//! is inconsistent with both state normalization and the direct
//! coherent-state overlap).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use crate::matcore::{ComplexScalar, HermitianOperator, PureState};
use crate::mdi::{MdiError, MdiModel};
use crate::si::{SiError, SiModel};

#[derive(Debug, Clone, PartialEq)]
pub enum OpticsError {
    Param(String),
    Si(SiError),
    Mdi(MdiError),
}

impl fmt::Display for OpticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpticsError::Param(s) => write!(f, "invalid optical parameter: {s}"),
            OpticsError::Si(e) => write!(f, "{e}"),
            OpticsError::Mdi(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for OpticsError {}

impl From<SiError> for OpticsError {
    fn from(e: SiError) -> Self {
        OpticsError::Si(e)
    }
}

impl From<MdiError> for OpticsError {
    fn from(e: MdiError) -> Self {
        OpticsError::Mdi(e)
    }
}

/// Source and channel parameters of the time-bin example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    /// Source intensity `mu = 2|alpha|^2`.
    pub mu: f64,
    /// Channel transmittance in `[0, 1]`.
    pub eta_ch: f64,
    /// Dark-count probability per detector per round, in `[0, 1)`.
    pub p_d: f64,
    /// Probability of measuring in the Z basis, in `(0, 1)`.
    pub p_z: f64,
    /// Probability of preparing the first test state, in `(0, 1)`.
    pub p_s: f64,
}

impl OpticalParams {
    pub fn new(mu: f64, eta_ch: f64, p_d: f64, p_z: f64, p_s: f64) -> Result<Self, OpticsError> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(OpticsError::Param(format!("mu = {mu} must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&eta_ch) {
            return Err(OpticsError::Param(format!("eta_ch = {eta_ch} outside [0, 1]")));
        }
        if !(0.0..1.0).contains(&p_d) {
            return Err(OpticsError::Param(format!("p_d = {p_d} outside [0, 1)")));
        }
        if !(p_z > 0.0 && p_z < 1.0) {
            return Err(OpticsError::Param(format!("p_z = {p_z} outside (0, 1)")));
        }
        if !(p_s > 0.0 && p_s < 1.0) {
            return Err(OpticsError::Param(format!("p_s = {p_s} outside (0, 1)")));
        }
        Ok(Self { mu, eta_ch, p_d, p_z, p_s })
    }
}

/// Converts a loss figure in dB to a channel transmittance.
pub fn eta_from_db(loss_db: f64) -> f64 {
    libm::pow(10.0, -loss_db / 10.0)
}

/// Overlap `<alpha|beta>` of two multimode coherent states:
/// `prod_k exp(-|alpha_k|^2/2 - |beta_k|^2/2 + conj(alpha_k) beta_k)`.
pub fn coherent_overlap(
    alpha: &[ComplexScalar],
    beta: &[ComplexScalar],
) -> Result<ComplexScalar, OpticsError> {
    if alpha.len() != beta.len() {
        return Err(OpticsError::Param(format!(
            "mode count mismatch: {} vs {}",
            alpha.len(),
            beta.len()
        )));
    }
    let exponent: ComplexScalar = alpha
        .iter()
        .zip(beta)
        .map(|(a, b)| {
            ComplexScalar::new(-0.5 * (a.norm_sqr() + b.norm_sqr()), 0.0) + a.conj() * b
        })
        .sum();
    Ok(exponent.exp())
}

/// A lossy channel maps `|alpha>` to `|sqrt(eta) alpha>`.
pub fn apply_loss(alpha: ComplexScalar, eta_ch: f64) -> ComplexScalar {
    alpha * libm::sqrt(eta_ch)
}

/// The squashed five-outcome POVM on qubit-plus-vacuum (d = 3):
/// `M_1 = p_z|0><0|`, `M_2 = p_z|1><1|`, `M_3 = (1-p_z)|+><+|`,
/// `M_4 = (1-p_z)|-><-|` (each padded with zeros on the vacuum), and
/// `M_5 = I - sum = |vac><vac|`.
pub fn si_povm(p_z: f64) -> Result<SiModel, OpticsError> {
    if !(p_z > 0.0 && p_z < 1.0) {
        return Err(OpticsError::Param(format!("p_z = {p_z} outside (0, 1)")));
    }
    let zero = PureState::basis_state(3, 0);
    let one = PureState::basis_state(3, 1);
    let plus = PureState::from_real_normalized(&[1.0, 1.0, 0.0]).expect("normalizable");
    let minus = PureState::from_real_normalized(&[1.0, -1.0, 0.0]).expect("normalizable");
    let m5 = HermitianOperator::from_diag(&[0.0, 0.0, 1.0]);
    let povm = vec![
        zero.projector().scale(p_z),
        one.projector().scale(p_z),
        plus.projector().scale(1.0 - p_z),
        minus.projector().scale(1.0 - p_z),
        m5,
    ];
    Ok(SiModel::new(povm)?)
}

/// Conditional outcome probabilities `p(j|rho_i)` of the SI view, rows
/// `i = 1, 2`, columns `j = 1..5`, exactly as printed.
pub fn si_conditional(params: &OpticalParams) -> [[f64; 5]; 2] {
    let OpticalParams { mu, eta_ch, p_d, p_z, .. } = *params;
    let e_full = libm::exp(-mu * eta_ch);
    let e_half = libm::exp(-mu * eta_ch / 2.0);
    // Click probabilities: full intensity in one bin, or half in each.
    let click_full = 1.0 - (1.0 - p_d) * e_full;
    let click_half = 1.0 - (1.0 - p_d) * e_half;
    let surv_half = (1.0 - p_d) * e_half;
    let dark_only = p_d * (1.0 - p_d) * e_full;

    // Correct-bin click, or a double click resolved by a fair coin.
    let z_signal = click_full * (1.0 - p_d) + 0.5 * p_d * click_full;
    // Dark count in the wrong bin, or a resolved double click.
    let z_dark = dark_only + 0.5 * p_d * click_full;
    // Interfering half pulses: correct-port click or resolved double click.
    let x_signal = click_half * surv_half + 0.5 * click_half * click_half;
    let no_click = (1.0 - p_d) * (1.0 - p_d) * e_full;

    let row1 = [
        p_z * z_signal,
        p_z * z_dark,
        (1.0 - p_z) * x_signal,
        (1.0 - p_z) * x_signal,
        no_click,
    ];
    let row2 = [
        p_z * x_signal,
        p_z * x_signal,
        (1.0 - p_z) * z_dark,
        (1.0 - p_z) * z_signal,
        no_click,
    ];
    [row1, row2]
}

/// Nominal SI statistics `q_j = p_s p(j|rho_1) + (1-p_s) p(j|rho_2)`.
pub fn si_nominal_stats(params: &OpticalParams) -> [f64; 5] {
    let cond = si_conditional(params);
    let mut q = [0.0; 5];
    for j in 0..5 {
        q[j] = params.p_s * cond[0][j] + (1.0 - params.p_s) * cond[1][j];
    }
    q
}

/// Overlap of the two MDI test states, `o = exp(-(2-sqrt(2))|alpha|^2)`
/// with `|alpha|^2 = mu/2`.
pub fn mdi_overlap(mu: f64) -> f64 {
    libm::exp(-(2.0 - libm::sqrt(2.0)) * mu / 2.0)
}

/// The MDI view: two qubit test states `|psi_1> = (1, 0)` and
/// `|psi_2> = (o, sqrt(1-o^2))` prepared with probabilities
/// `(p_s, 1-p_s)`, measured by an untrusted three-outcome box.
pub fn mdi_model(mu: f64, p_s: f64) -> Result<MdiModel, OpticsError> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(OpticsError::Param(format!("mu = {mu} must be finite and > 0")));
    }
    if !(p_s > 0.0 && p_s < 1.0) {
        return Err(OpticsError::Param(format!("p_s = {p_s} outside (0, 1)")));
    }
    let o = mdi_overlap(mu);
    let psi1 = PureState::basis_state(2, 0);
    let psi2 = PureState::from_real_normalized(&[o, libm::sqrt((1.0 - o * o).max(0.0))])
        .expect("normalizable");
    Ok(MdiModel::new(vec![psi1, psi2], vec![p_s, 1.0 - p_s], 3)?)
}

/// Nominal MDI statistics `q_{j|i}`, rows `i = 1, 2`, columns
/// `j = 1, 2, 3`; the inconclusive outcome is the exact complement.
pub fn mdi_nominal_stats(params: &OpticalParams) -> [[f64; 3]; 2] {
    let OpticalParams { mu, eta_ch, p_d, p_z, .. } = *params;
    let e_full = libm::exp(-mu * eta_ch);
    let e_half = libm::exp(-mu * eta_ch / 2.0);
    let click_full = 1.0 - (1.0 - p_d) * e_full;
    let click_half = 1.0 - (1.0 - p_d) * e_half;
    let surv_half = (1.0 - p_d) * e_half;
    let dark_only = p_d * (1.0 - p_d) * e_full;

    let hit = p_z * click_full * (1.0 - p_d) + (1.0 - p_z) * click_half * surv_half;
    let miss = p_z * dark_only + (1.0 - p_z) * click_half * surv_half;
    [
        [hit, miss, 1.0 - hit - miss],
        [miss, hit, 1.0 - hit - miss],
    ]
}

/// Nominal statistics of both views, with the generating parameters.
#[derive(Debug, Clone)]
pub struct NominalStatistics {
    pub params: OpticalParams,
    pub si: [f64; 5],
    pub mdi: [[f64; 3]; 2],
}

pub fn nominal_statistics(params: &OpticalParams) -> NominalStatistics {
    NominalStatistics {
        params: *params,
        si: si_nominal_stats(params),
        mdi: mdi_nominal_stats(params),
    }
}

/// Expected SI test-round counts `N_j = N_tot (1 - p_sig) q_j`
/// (real-valued expectations, no sampling).
pub fn si_expected_counts(q: &[f64], n_tot: f64, p_sig: f64) -> Vec<f64> {
    q.iter().map(|&qj| n_tot * (1.0 - p_sig) * qj).collect()
}

/// Expected MDI test-round counts `N_{j|i} = N_tot p_i (1 - p_sig) q_{j|i}`.
pub fn mdi_expected_counts(
    q: &[[f64; 3]; 2],
    probs: &[f64],
    n_tot: f64,
    p_sig: f64,
) -> Vec<Vec<f64>> {
    q.iter()
        .zip(probs)
        .map(|(row, &p_i)| row.iter().map(|&qj| n_tot * p_i * (1.0 - p_sig) * qj).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> OpticalParams {
        OpticalParams::new(0.1, 1.0, 1e-8, 0.5, 0.5).unwrap()
    }

    #[test]
    fn overlap_basics() {
        let z = ComplexScalar::new(0.0, 0.0);
        let a = ComplexScalar::new(libm::sqrt(0.05), 0.0);
        let one = coherent_overlap(&[z], &[z]).unwrap();
        assert!((one - ComplexScalar::new(1.0, 0.0)).norm() < 1e-15);
        let vac = coherent_overlap(&[a], &[z]).unwrap();
        assert!((vac.re - libm::exp(-0.025)).abs() < 1e-15);
        assert!(vac.im.abs() < 1e-15);
    }

    #[test]
    fn overlap_matches_four_mode_description() {
        // Z-basis signal occupies one bin with sqrt(2) alpha; the X state
        // splits alpha into both bins.
        let mu: f64 = 0.1;
        let alpha = libm::sqrt(mu / 2.0);
        let z = ComplexScalar::new(0.0, 0.0);
        let a = ComplexScalar::new(alpha, 0.0);
        let sq = ComplexScalar::new(libm::sqrt(2.0) * alpha, 0.0);
        let ov = coherent_overlap(&[sq, z], &[a, a]).unwrap();
        assert!((ov.re - mdi_overlap(mu)).abs() < 1e-12, "{} vs {}", ov.re, mdi_overlap(mu));
        assert!(ov.im.abs() < 1e-15);
        assert!((mdi_overlap(0.1) - 0.9711355).abs() < 1e-6);
    }

    #[test]
    fn loss_conversion() {
        assert!((apply_loss(ComplexScalar::new(1.0, 0.0), 1.0).re - 1.0).abs() < 1e-15);
        assert_eq!(apply_loss(ComplexScalar::new(1.0, 0.0), 0.0).re, 0.0);
        let a = ComplexScalar::new(libm::sqrt(0.05), 0.0);
        assert!((apply_loss(a, 0.5).norm_sqr() - 0.025).abs() < 1e-15);
        assert!((eta_from_db(0.0) - 1.0).abs() < 1e-15);
        assert!((eta_from_db(10.0) - 0.1).abs() < 1e-15);
        assert!((eta_from_db(3.0) - 0.501187).abs() < 1e-6);
    }

    #[test]
    fn si_povm_is_complete() {
        let model = si_povm(0.5).unwrap();
        let povm = model.povm();
        let mut sum = HermitianOperator::zeros(3);
        for m in povm {
            sum.axpy(1.0, m);
        }
        sum.axpy(-1.0, &HermitianOperator::identity(3));
        assert!(sum.frobenius_norm() < 1e-12);
        // No click on vacuum.
        assert!((povm[4].entry(2, 2).re - 1.0).abs() < 1e-12);
        // Z pair restricted to the qubit block is p_z I_2.
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let want = if r == c { 0.5 } else { 0.0 };
            let got = povm[0].entry(r, c) + povm[1].entry(r, c);
            assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-14);
        }
    }

    #[test]
    fn si_rows_are_normalized() {
        let cond = si_conditional(&params());
        for row in cond {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row sums to {s}");
        }
        let q = si_nominal_stats(&params());
        let s: f64 = q.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!((cond[0][4] - 0.9048374).abs() < 1e-7);
    }

    #[test]
    fn si_vacuum_limit() {
        let p = OpticalParams::new(0.0, 1.0, 0.0, 0.5, 0.5).unwrap();
        let q = si_nominal_stats(&p);
        assert!((q[4] - 1.0).abs() < 1e-15);
        assert!(q[..4].iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn mdi_rows_are_normalized_and_symmetric() {
        let q = mdi_nominal_stats(&params());
        for row in q {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
        assert_eq!(q[0][0], q[1][1]);
        assert_eq!(q[0][1], q[1][0]);
        // Direct evaluation of the printed formula at the reference point.
        let expect = 0.5 * (1.0 - (1.0 - 1e-8) * libm::exp(-0.1)) * (1.0 - 1e-8)
            + 0.5
                * (1.0 - (1.0 - 1e-8) * libm::exp(-0.05))
                * (1.0 - 1e-8)
                * libm::exp(-0.05);
        assert!((q[0][0] - expect).abs() < 1e-15);
        assert!((q[0][0] - 0.0707773).abs() < 1e-6);
    }

    #[test]
    fn mdi_vacuum_limit_and_model() {
        let p = OpticalParams::new(1e-9, 0.0, 0.0, 0.5, 0.5).unwrap();
        let q = mdi_nominal_stats(&p);
        assert!((q[0][2] - 1.0).abs() < 1e-12);
        assert!((q[1][2] - 1.0).abs() < 1e-12);

        let model = mdi_model(0.1, 0.5).unwrap();
        let ip = model.states()[0].inner(&model.states()[1]).unwrap();
        assert!((ip.re - mdi_overlap(0.1)).abs() < 1e-12);
        assert!(ip.im.abs() < 1e-15);
        // mu -> 0: states become indistinguishable.
        let m0 = mdi_model(1e-12, 0.5).unwrap();
        let ip0 = m0.states()[0].inner(&m0.states()[1]).unwrap();
        assert!(ip0.re > 1.0 - 1e-11);
    }

    #[test]
    fn expected_counts_scale() {
        let q = si_nominal_stats(&params());
        let n = si_expected_counts(&q, 1e12, 0.5);
        let total: f64 = n.iter().sum();
        assert!((total - 0.5e12).abs() < 1.0);
        assert!((n[4] - 1e12 * 0.5 * q[4]).abs() < 1e-6);

        let qm = mdi_nominal_stats(&params());
        let nm = mdi_expected_counts(&qm, &[0.5, 0.5], 1e12, 0.5);
        let total: f64 = nm.iter().flatten().sum();
        assert!((total - 0.5e12).abs() < 1.0);

        // p_sig -> 1 sends all test counts to zero.
        let none = si_expected_counts(&q, 1e12, 1.0);
        assert!(none.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_identities() {
        let mut checked = 0usize;
        for mi in 0..10 {
            let mu = 2.0 * mi as f64 / 9.0;
            for ei in 0..10 {
                let eta = ei as f64 / 9.0;
                for &p_d in &[0.0, 1e-8, 1e-4] {
                    for &p_z in &[0.1, 0.5, 0.9] {
                        let p = OpticalParams::new(mu, eta, p_d, p_z, 0.5).unwrap();
                        let cond = si_conditional(&p);
                        for row in cond {
                            let s: f64 = row.iter().sum();
                            assert!((s - 1.0).abs() < 1e-12);
                            assert!(row.iter().all(|&x| (-1e-15..=1.0).contains(&x)));
                        }
                        let qm = mdi_nominal_stats(&p);
                        for row in qm {
                            let s: f64 = row.iter().sum();
                            assert!((s - 1.0).abs() < 1e-12);
                            assert!(row.iter().all(|&x| (-1e-15..=1.0).contains(&x)));
                        }
                        checked += 1;
                    }
                }
            }
        }
        assert_eq!(checked, 900);
    }

    #[test]
    fn no_click_monotone_in_intensity() {
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let mu = 2.0 * k as f64 / 49.0;
            let p = OpticalParams::new(mu, 1.0, 0.0, 0.5, 0.5).unwrap();
            let q = si_nominal_stats(&p);
            assert!(q[4] <= last + 1e-15);
            last = q[4];
        }
    }

    #[test]
    fn bad_params_rejected() {
        assert!(OpticalParams::new(-0.1, 1.0, 0.0, 0.5, 0.5).is_err());
        assert!(OpticalParams::new(0.1, 1.1, 0.0, 0.5, 0.5).is_err());
        assert!(OpticalParams::new(0.1, 1.0, 1.0, 0.5, 0.5).is_err());
        assert!(OpticalParams::new(0.1, 1.0, 0.0, 0.0, 0.5).is_err());
        assert!(OpticalParams::new(0.1, 1.0, 0.0, 0.5, 1.0).is_err());
        assert!(coherent_overlap(&[ComplexScalar::new(0.0, 0.0)], &[]).is_err());
        assert!(mdi_model(0.0, 0.5).is_err());
    }
}

//! Source-independent QRNG certification.
//!
//! The measurement POVM `{M_j}` is trusted and the source is not. The
//! adversary's guessing probability is bounded by the SDP
//!
//! ```text
//!   max  sum_k tr(rho_k M_k)
//!   s.t. tr(M_j sum_k rho_k) = nu_j       (observed frequencies)
//!        tr(sum_k rho_k) = 1
//!        rho_k >= 0
//! ```
//!
//! over sub-normalized states `rho_k`, one per outcome the adversary would
//! guess. The dual multipliers `lambda_1..lambda_{n+1}` define the operator
//! inequalities
//!
//! ```text
//!   M_k + sum_j lambda_j M_j + lambda_{n+1} I <= 0     for every k,
//! ```
//!
//! which hold for arbitrary input states and are therefore the
//! security-critical object: they bound the adversary's per-round expected
//! score for any attack. Certificates are computed from *nominal*
//! (model-predicted) frequencies so they can be fixed before data
//! collection; the dual is solved both explicitly and recovered from the
//! primal multipliers, and the two routes must agree.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use crate::matcore::{hermitian_basis, trace_inner, HermitianOperator, MatError};
use crate::sdp::{
    check_solution, solve, Constraint, SdpError, SdpProblem, SdpSolution, Sense, SolveStatus,
    DEFAULT_GAP_TOL,
};

/// Tolerance for POVM completeness and PSD checks.
const MODEL_TOL: f64 = 1e-9;
/// Tolerance for frequency normalization.
const STATS_TOL: f64 = 1e-9;
/// Required agreement between the explicit dual solve and the multipliers
/// recovered from the primal solve.
const ROUTE_AGREEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum SiError {
    Model(String),
    Stats(String),
    SolverFailed(SolveStatus),
    /// The explicit dual solve and the primal-recovered multipliers
    /// disagree beyond tolerance.
    RouteMismatch { explicit: f64, recovered: f64 },
    Mat(MatError),
    Sdp(SdpError),
}

impl fmt::Display for SiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SiError::Model(s) => write!(f, "invalid SI model: {s}"),
            SiError::Stats(s) => write!(f, "invalid SI statistics: {s}"),
            SiError::SolverFailed(st) => write!(f, "SDP solver failed: {st:?}"),
            SiError::RouteMismatch { explicit, recovered } => {
                write!(f, "dual routes disagree: explicit {explicit} vs recovered {recovered}")
            }
            SiError::Mat(e) => write!(f, "{e}"),
            SiError::Sdp(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SiError {}

impl From<MatError> for SiError {
    fn from(e: MatError) -> Self {
        SiError::Mat(e)
    }
}

impl From<SdpError> for SiError {
    fn from(e: SdpError) -> Self {
        SiError::Sdp(e)
    }
}

/// A trusted measurement: `n` PSD operators summing to the identity.
#[derive(Debug, Clone)]
pub struct SiModel {
    povm: Vec<HermitianOperator>,
}

impl SiModel {
    pub fn new(povm: Vec<HermitianOperator>) -> Result<Self, SiError> {
        if povm.len() < 2 {
            return Err(SiError::Model("need at least 2 POVM elements".into()));
        }
        let d = povm[0].dim();
        let mut sum = HermitianOperator::zeros(d);
        for (j, m) in povm.iter().enumerate() {
            if m.dim() != d {
                return Err(SiError::Model(format!("element {j} has dim {} != {d}", m.dim())));
            }
            if m.min_eigenvalue() < -MODEL_TOL {
                return Err(SiError::Model(format!("element {j} is not PSD")));
            }
            sum.axpy(1.0, m);
        }
        let defect = sum.sub(&HermitianOperator::identity(d))?.frobenius_norm();
        if defect > MODEL_TOL * (d as f64) {
            return Err(SiError::Model(format!("POVM does not sum to identity (defect {defect:e})")));
        }
        Ok(Self { povm })
    }

    pub fn dim(&self) -> usize {
        self.povm[0].dim()
    }

    pub fn n_outcomes(&self) -> usize {
        self.povm.len()
    }

    pub fn povm(&self) -> &[HermitianOperator] {
        &self.povm
    }
}

/// Observed (or nominal) outcome statistics: either asymptotic frequencies
/// or raw test-round counts together with the round budget.
#[derive(Debug, Clone)]
pub enum SiStatistics {
    Frequencies(Vec<f64>),
    Counts { counts: Vec<f64>, n_tot: f64, p_sig: f64 },
}

impl SiStatistics {
    /// Frequencies `nu_j`; for counts, `nu_j = N_j / (N_tot (1 - p_sig))`.
    pub fn frequencies(&self) -> Result<Vec<f64>, SiError> {
        match self {
            SiStatistics::Frequencies(nu) => {
                validate_frequencies(nu)?;
                Ok(nu.clone())
            }
            SiStatistics::Counts { counts, n_tot, p_sig } => {
                if !(*p_sig > 0.0 && *p_sig < 1.0) {
                    return Err(SiError::Stats("p_sig must lie in (0,1)".into()));
                }
                let total: f64 = counts.iter().sum();
                if counts.iter().any(|&c| c < 0.0) || total > *n_tot {
                    return Err(SiError::Stats("counts must be nonnegative and sum to <= N_tot".into()));
                }
                Ok(counts.iter().map(|&c| c / (n_tot * (1.0 - p_sig))).collect())
            }
        }
    }
}

pub(crate) fn validate_frequencies(nu: &[f64]) -> Result<(), SiError> {
    if nu.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
        return Err(SiError::Stats("frequencies must lie in [0,1]".into()));
    }
    let total: f64 = nu.iter().sum();
    if (total - 1.0).abs() > STATS_TOL {
        return Err(SiError::Stats(format!("frequencies sum to {total}, expected 1")));
    }
    Ok(())
}

/// Dual certificate `lambda_1..lambda_{n+1}` with its verified margin.
///
/// `worst_margin` is the maximum over `k` of the largest eigenvalue of
/// `M_k + sum_j lambda_j M_j + lambda_{n+1} I`; the certificate is sound
/// iff this is nonpositive.
#[derive(Debug, Clone)]
pub struct SiDualCertificate {
    pub lambda: Vec<f64>,
    pub repaired: bool,
    pub worst_margin: f64,
}

impl SiDualCertificate {
    /// The dual objective `-sum_j lambda_j nu_j - lambda_{n+1}`, an upper
    /// bound on the guessing probability at statistics `nu`.
    pub fn dual_objective(&self, nu: &[f64]) -> f64 {
        let n = self.lambda.len() - 1;
        -self.lambda[..n].iter().zip(nu).map(|(l, v)| l * v).sum::<f64>() - self.lambda[n]
    }
}

/// Builds the guessing-probability primal: `n` blocks of dimension `d`,
/// `n` statistics constraints, then the normalization constraint.
pub fn build_si_primal(model: &SiModel, nu: &[f64]) -> Result<SdpProblem, SiError> {
    let n = model.n_outcomes();
    if nu.len() != n {
        return Err(SiError::Stats(format!("expected {n} frequencies, got {}", nu.len())));
    }
    validate_frequencies(nu)?;
    let d = model.dim();
    let mut problem = SdpProblem::new(Sense::Maximize, model.povm.to_vec());
    for (j, m_j) in model.povm.iter().enumerate() {
        problem.add_constraint(Constraint {
            terms: (0..n).map(|k| (k, m_j.clone())).collect(),
            free_coeffs: vec![],
            rhs: nu[j],
        });
    }
    problem.add_constraint(Constraint {
        terms: (0..n).map(|k| (k, HermitianOperator::identity(d))).collect(),
        free_coeffs: vec![],
        rhs: 1.0,
    });
    Ok(problem)
}

/// Solves the primal and returns the full solver output.
pub fn solve_si_primal(model: &SiModel, nu: &[f64]) -> Result<SdpSolution, SiError> {
    let problem = build_si_primal(model, nu)?;
    let sol = solve(&problem, DEFAULT_GAP_TOL)?;
    if sol.status != SolveStatus::Optimal {
        return Err(SiError::SolverFailed(sol.status));
    }
    let report = check_solution(&problem, &sol)?;
    if report.max_primal_residual > 1e-7 || report.min_block_eigenvalue < -1e-8 {
        return Err(SiError::SolverFailed(SolveStatus::NumericalFailure));
    }
    Ok(sol)
}

/// Upper bound on the guessing probability and the matching min-entropy
/// `-log2 p_guess`.
pub fn si_guessing_probability(model: &SiModel, nu: &[f64]) -> Result<(f64, f64), SiError> {
    let sol = solve_si_primal(model, nu)?;
    let mut p = sol.primal_value;
    if !(0.0..=1.0 + 1e-6).contains(&p) {
        return Err(SiError::SolverFailed(SolveStatus::NumericalFailure));
    }
    p = p.min(1.0);
    Ok((p, -p.log2()))
}

/// Builds the explicit dual program: minimize
/// `-sum_j lambda_j nu_j - lambda_{n+1}` subject to
/// `M_k + sum_j lambda_j M_j + lambda_{n+1} I <= 0`, expressed with slack
/// blocks `S_k = -(M_k + ...)` and free multipliers.
pub fn build_si_dual(model: &SiModel, nu: &[f64]) -> Result<SdpProblem, SiError> {
    let n = model.n_outcomes();
    if nu.len() != n {
        return Err(SiError::Stats(format!("expected {n} frequencies, got {}", nu.len())));
    }
    validate_frequencies(nu)?;
    let d = model.dim();
    let basis = hermitian_basis(d);
    let ident = HermitianOperator::identity(d);

    let mut free_obj: Vec<f64> = nu.to_vec();
    free_obj.push(1.0);
    let mut problem = SdpProblem::new(
        Sense::Maximize,
        (0..n).map(|_| HermitianOperator::zeros(d)).collect(),
    )
    .with_free_variables(free_obj);

    for k in 0..n {
        for b_a in &basis {
            let mut free_coeffs: Vec<f64> =
                model.povm.iter().map(|m_j| trace_inner(b_a, m_j).unwrap()).collect();
            free_coeffs.push(trace_inner(b_a, &ident).unwrap());
            problem.add_constraint(Constraint {
                terms: vec![(k, b_a.clone())],
                free_coeffs,
                rhs: -trace_inner(b_a, &model.povm[k]).unwrap(),
            });
        }
    }
    Ok(problem)
}

/// Recomputes the certificate margin from scratch with matcore only.
pub fn verify_si_inequalities(model: &SiModel, cert: &SiDualCertificate) -> Result<f64, SiError> {
    if cert.lambda.len() != model.n_outcomes() + 1 {
        return Err(SiError::Model("certificate length does not match model".into()));
    }
    Ok(worst_margin(model, &cert.lambda))
}

fn worst_margin(model: &SiModel, lambda: &[f64]) -> f64 {
    let n = model.n_outcomes();
    let d = model.dim();
    let mut base = HermitianOperator::zeros(d);
    for (j, m_j) in model.povm.iter().enumerate() {
        base.axpy(lambda[j], m_j);
    }
    base.shift(lambda[n]);
    let mut worst = f64::NEG_INFINITY;
    for m_k in &model.povm {
        let mut op = base.clone();
        op.axpy(1.0, m_k);
        worst = worst.max(op.max_eigenvalue());
    }
    worst
}

/// Makes raw multipliers into a sound certificate: any positive margin `s`
/// is absorbed by `lambda_{n+1} <- lambda_{n+1} - s`, which shifts every
/// inequality operator by `-s I` and loosens the dual objective by `+s`.
pub fn repair_si_certificate(model: &SiModel, mut lambda: Vec<f64>) -> Result<SiDualCertificate, SiError> {
    if lambda.len() != model.n_outcomes() + 1 {
        return Err(SiError::Model("multiplier length does not match model".into()));
    }
    let n = model.n_outcomes();
    let s = worst_margin(model, &lambda);
    let repaired = s > 0.0;
    if repaired {
        lambda[n] -= s;
    }
    let margin = worst_margin(model, &lambda);
    Ok(SiDualCertificate { lambda, repaired, worst_margin: margin })
}

/// Extracts a verified dual certificate from *nominal* frequencies.
///
/// The dual is solved twice: explicitly (the multipliers are free
/// variables of [`build_si_dual`]) and implicitly (multipliers of the
/// primal solve); the dual objectives must agree within 1e-6. The explicit
/// solution is then repaired into the certificate.
pub fn extract_si_certificate(
    model: &SiModel,
    nu_nominal: &[f64],
) -> Result<SiDualCertificate, SiError> {
    let n = model.n_outcomes();

    // Route 1: multipliers recovered from the primal solve. Constraint
    // order in build_si_primal is statistics 0..n, normalization n; for a
    // maximize problem lambda = -y.
    let primal_sol = solve_si_primal(model, nu_nominal)?;
    let lambda_recovered: Vec<f64> = primal_sol.y.iter().map(|&y| -y).collect();

    // Route 2: explicit dual solve.
    let dual_problem = build_si_dual(model, nu_nominal)?;
    let dual_sol = solve(&dual_problem, DEFAULT_GAP_TOL)?;
    if dual_sol.status != SolveStatus::Optimal {
        return Err(SiError::SolverFailed(dual_sol.status));
    }
    let lambda_explicit = dual_sol.free.clone();

    let value = |lambda: &[f64]| {
        -lambda[..n].iter().zip(nu_nominal).map(|(l, v)| l * v).sum::<f64>() - lambda[n]
    };
    let v_exp = value(&lambda_explicit);
    let v_rec = value(&lambda_recovered);
    if (v_exp - v_rec).abs() > ROUTE_AGREEMENT_TOL * v_exp.abs().max(1.0) {
        return Err(SiError::RouteMismatch { explicit: v_exp, recovered: v_rec });
    }

    repair_si_certificate(model, lambda_explicit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::PureState;

    fn z_model() -> SiModel {
        SiModel::new(vec![
            PureState::basis_state(2, 0).projector(),
            PureState::basis_state(2, 1).projector(),
        ])
        .unwrap()
    }

    fn four_outcome_model() -> SiModel {
        let p0 = PureState::basis_state(2, 0).projector();
        let p1 = PureState::basis_state(2, 1).projector();
        let plus = PureState::from_real_normalized(&[1.0, 1.0]).unwrap().projector();
        let minus = PureState::from_real_normalized(&[1.0, -1.0]).unwrap().projector();
        SiModel::new(vec![p0.scale(0.5), p1.scale(0.5), plus.scale(0.5), minus.scale(0.5)]).unwrap()
    }

    #[test]
    fn deterministic_statistics_guess_perfectly() {
        let model = z_model();
        let (p, h) = si_guessing_probability(&model, &[1.0, 0.0]).unwrap();
        assert!((p - 1.0).abs() < 1e-6, "p = {p}");
        assert!(h.abs() < 1e-6);
    }

    #[test]
    fn uniform_z_statistics_still_guessable() {
        // rho = (|0><0| + |1><1|)/2 is a feasible decomposition Eve guesses
        // perfectly, so the optimum is 1.
        let model = z_model();
        let (p, _) = si_guessing_probability(&model, &[0.5, 0.5]).unwrap();
        assert!((p - 1.0).abs() < 1e-6, "p = {p}");
    }

    #[test]
    fn plus_forcing_instance() {
        let model = four_outcome_model();
        let (p, h) = si_guessing_probability(&model, &[0.25, 0.25, 0.5, 0.0]).unwrap();
        assert!((p - 0.5).abs() < 1e-6, "p = {p}");
        assert!((h - 1.0).abs() < 1e-5);
    }

    #[test]
    fn certificate_deterministic_case() {
        let model = z_model();
        let nu = [1.0, 0.0];
        let cert = extract_si_certificate(&model, &nu).unwrap();
        assert!(cert.worst_margin <= 1e-12);
        assert!((cert.dual_objective(&nu) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn certificate_plus_forcing_case() {
        let model = four_outcome_model();
        let nu = [0.25, 0.25, 0.5, 0.0];
        let cert = extract_si_certificate(&model, &nu).unwrap();
        assert!(cert.worst_margin <= 1e-12);
        assert!((cert.dual_objective(&nu) - 0.5).abs() < 1e-6);
        let recheck = verify_si_inequalities(&model, &cert).unwrap();
        assert!((recheck - cert.worst_margin).abs() <= 1e-12);
    }

    #[test]
    fn perturbed_multipliers_get_repaired() {
        let model = z_model();
        let nu = [1.0, 0.0];
        let cert = extract_si_certificate(&model, &nu).unwrap();
        let mut bad = cert.lambda.clone();
        let n = model.n_outcomes();
        bad[n] += 1e-3;
        let fixed = repair_si_certificate(&model, bad).unwrap();
        assert!(fixed.repaired);
        assert!(fixed.worst_margin <= 1e-12);
    }

    #[test]
    fn minus_identity_multiplier_always_sound() {
        let model = four_outcome_model();
        let mut lambda = vec![0.0; model.n_outcomes() + 1];
        lambda[model.n_outcomes()] = -1.0;
        let cert = SiDualCertificate { lambda, repaired: false, worst_margin: 0.0 };
        let margin = verify_si_inequalities(&model, &cert).unwrap();
        assert!(margin <= 1e-12, "margin = {margin}");
    }

    #[test]
    fn bad_statistics_rejected() {
        let model = z_model();
        assert!(matches!(
            si_guessing_probability(&model, &[0.9, 0.2]),
            Err(SiError::Stats(_))
        ));
        assert!(matches!(
            si_guessing_probability(&model, &[0.5]),
            Err(SiError::Stats(_))
        ));
    }

    #[test]
    fn single_outcome_model_rejected() {
        assert!(matches!(
            SiModel::new(vec![HermitianOperator::identity(2)]),
            Err(SiError::Model(_))
        ));
    }
}


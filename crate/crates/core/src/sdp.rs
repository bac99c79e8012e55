//! Small dense semidefinite programs with complex Hermitian blocks.
//!
//! Problems optimize `sum_b tr(C_b X_b) + c.f` over PSD blocks `X_b` and
//! free scalars `f`, subject to equality constraints
//! `sum_b tr(A_{e,b} X_b) + g_e.f = rhs_e`. Free variables exist so the
//! dual programs of the certification modules can also be solved in their
//! explicit form (Lagrange multipliers are unconstrained scalars).
//!
//! The solver is a primal-dual interior-point method with HKM search
//! directions and Mehrotra predictor-corrector steps. Instances here are
//! tiny (blocks of dimension <= 3, at most a few dozen blocks and ~100
//! equality constraints), so everything is dense and favors robustness
//! over speed. Initialization is fixed and documented below, which makes
//! repeated solves bit-for-bit deterministic.
//!
//! Redundant equality constraints are detected by a Gram-Schmidt rank
//! filter during presolve and removed (their dual multipliers are reported
//! as zero); a dependent constraint whose right-hand side is inconsistent
//! beyond 1e-10 makes the problem infeasible.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use crate::matcore::{
    hermitian_coords, trace_inner, CMat, Cholesky, HermitianOperator, MatError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// One equality constraint: `sum_(b,A) tr(A X_b) + free_coeffs . f = rhs`.
///
/// `terms` is sparse over blocks; a block absent from `terms` has a zero
/// coefficient operator.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub terms: Vec<(usize, HermitianOperator)>,
    pub free_coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub sense: Sense,
    /// One objective operator per block.
    pub objective: Vec<HermitianOperator>,
    /// Objective coefficients of the free variables.
    pub free_objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SdpError {
    Malformed(String),
    Mat(MatError),
}

impl fmt::Display for SdpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SdpError::Malformed(s) => write!(f, "malformed problem: {s}"),
            SdpError::Mat(e) => write!(f, "matrix error: {e}"),
        }
    }
}

impl core::error::Error for SdpError {}

impl From<MatError> for SdpError {
    fn from(e: MatError) -> Self {
        SdpError::Mat(e)
    }
}

impl SdpProblem {
    pub fn new(sense: Sense, objective: Vec<HermitianOperator>) -> Self {
        let block_dims = objective.iter().map(|c| c.dim()).collect();
        Self { block_dims, sense, objective, free_objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn with_free_variables(mut self, free_objective: Vec<f64>) -> Self {
        self.free_objective = free_objective;
        self
    }

    pub fn add_constraint(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }

    pub fn num_free(&self) -> usize {
        self.free_objective.len()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective.len() != self.block_dims.len() {
            return Err(SdpError::Malformed("objective/block count mismatch".into()));
        }
        for (b, c) in self.objective.iter().enumerate() {
            if c.dim() != self.block_dims[b] {
                return Err(SdpError::Malformed(format!("objective dim mismatch in block {b}")));
            }
        }
        for (e, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("non-finite rhs in constraint {e}")));
            }
            if con.free_coeffs.len() != self.free_objective.len() {
                return Err(SdpError::Malformed(format!(
                    "free coefficient count mismatch in constraint {e}"
                )));
            }
            for &(b, ref a) in &con.terms {
                if b >= self.block_dims.len() || a.dim() != self.block_dims[b] {
                    return Err(SdpError::Malformed(format!(
                        "constraint {e} references bad block {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Text serialization for offline inspection. Not bit-critical.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "sdp sense={} blocks={:?} free={}\n",
            match self.sense {
                Sense::Maximize => "max",
                Sense::Minimize => "min",
            },
            self.block_dims,
            self.free_objective.len()
        ));
        for (b, c) in self.objective.iter().enumerate() {
            s.push_str(&format!("objective block {b}:\n{}", c.dump()));
        }
        if !self.free_objective.is_empty() {
            s.push_str(&format!("objective free: {:?}\n", self.free_objective));
        }
        for (e, con) in self.constraints.iter().enumerate() {
            s.push_str(&format!("constraint {e}: rhs={:.12e}\n", con.rhs));
            for &(b, ref a) in &con.terms {
                s.push_str(&format!("  block {b}:\n{}", a.dump()));
            }
            if con.free_coeffs.iter().any(|&g| g != 0.0) {
                s.push_str(&format!("  free: {:?}\n", con.free_coeffs));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

/// Solver output.
///
/// Dual multiplier convention: for a `Maximize` problem the multipliers
/// satisfy `sum_e y_e A_{e,b} - C_b >= 0` blockwise and
/// `sum_e y_e g_e = c` on the free variables, with
/// `dual_value = sum_e y_e rhs_e`; for `Minimize` the slack sign flips.
/// Multipliers of presolve-removed constraints are zero.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub blocks: Vec<HermitianOperator>,
    pub y: Vec<f64>,
    pub free: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `dual_value - primal_value`.
    pub gap: f64,
    pub iterations: usize,
    /// Indices of constraints dropped as linearly dependent during presolve.
    pub removed_constraints: Vec<usize>,
}

impl SdpSolution {
    fn failure(status: SolveStatus, problem: &SdpProblem, removed: Vec<usize>) -> Self {
        Self {
            status,
            blocks: problem.block_dims.iter().map(|&d| HermitianOperator::zeros(d)).collect(),
            y: vec![0.0; problem.constraints.len()],
            free: vec![0.0; problem.num_free()],
            primal_value: f64::NAN,
            dual_value: f64::NAN,
            gap: f64::NAN,
            iterations: 0,
            removed_constraints: removed,
        }
    }
}

/// Default absolute duality-gap tolerance.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

const MAX_ITER: usize = 200;
const RANK_TOL: f64 = 1e-10;
const RHS_CONSISTENCY_TOL: f64 = 1e-10;

struct Presolve {
    kept: Vec<usize>,
    removed: Vec<usize>,
    infeasible: bool,
    /// Free variables kept after the column rank filter; dependent columns
    /// are fixed to zero (a gauge choice), which is valid whenever the
    /// objective coefficient of the dependent column matches the same
    /// linear combination of the kept columns' coefficients.
    kept_free: Vec<usize>,
    /// A dependent free column whose objective coefficient is inconsistent
    /// makes the problem unbounded along that direction.
    unbounded_free: bool,
}

/// Gram-Schmidt rank filter over the vectorized constraints.
fn presolve_rank_filter(problem: &SdpProblem) -> Presolve {
    let dims = &problem.block_dims;
    let offsets: Vec<usize> = {
        let mut off = vec![0usize];
        for &d in dims {
            off.push(off.last().unwrap() + d * d);
        }
        off
    };
    let total = offsets[dims.len()] + problem.num_free();

    let mut basis: Vec<(Vec<f64>, f64)> = Vec::new(); // orthonormal (v, rhs carried)
    let mut kept = Vec::new();
    let mut removed = Vec::new();

    for (e, con) in problem.constraints.iter().enumerate() {
        let mut v = vec![0.0f64; total];
        for &(b, ref a) in &con.terms {
            let coords = hermitian_coords(a);
            v[offsets[b]..offsets[b] + coords.len()].copy_from_slice(&coords);
        }
        for (k, &g) in con.free_coeffs.iter().enumerate() {
            v[offsets[dims.len()] + k] = g;
        }
        let orig_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut rhs = con.rhs;
        for (q, qrhs) in &basis {
            let t: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (x, qx) in v.iter_mut().zip(q) {
                *x -= t * qx;
            }
            rhs -= t * qrhs;
        }
        let res_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if res_norm > RANK_TOL * orig_norm.max(1.0) {
            for x in v.iter_mut() {
                *x /= res_norm;
            }
            basis.push((v, rhs / res_norm));
            kept.push(e);
        } else if rhs.abs() > RHS_CONSISTENCY_TOL * con.rhs.abs().max(1.0) {
            return Presolve {
                kept,
                removed,
                infeasible: true,
                kept_free: Vec::new(),
                unbounded_free: false,
            };
        } else {
            removed.push(e);
        }
    }

    // Column rank filter over the free variables, restricted to the kept
    // rows. Redundant parameterizations (e.g. multipliers of operators
    // that sum to a multiple of another multiplier's operator) would make
    // the augmented KKT system exactly singular.
    let mut free_basis: Vec<(Vec<f64>, f64)> = Vec::new(); // orthonormal (col, obj carried)
    let mut kept_free = Vec::new();
    let mut unbounded_free = false;
    for k in 0..problem.num_free() {
        let mut col: Vec<f64> = kept
            .iter()
            .map(|&e| problem.constraints[e].free_coeffs[k])
            .collect();
        let orig_norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut obj = problem.free_objective[k];
        let orig_obj = obj;
        for (q, qobj) in &free_basis {
            let t: f64 = col.iter().zip(q).map(|(a, b)| a * b).sum();
            for (x, qx) in col.iter_mut().zip(q) {
                *x -= t * qx;
            }
            obj -= t * qobj;
        }
        let res_norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if res_norm > RANK_TOL * orig_norm.max(1.0) {
            for x in col.iter_mut() {
                *x /= res_norm;
            }
            free_basis.push((col, obj / res_norm));
            kept_free.push(k);
        } else if obj.abs() > RHS_CONSISTENCY_TOL * orig_obj.abs().max(1.0) {
            unbounded_free = true;
        }
    }

    Presolve { kept, removed, infeasible: false, kept_free, unbounded_free }
}

/// Solves the SDP to the requested duality-gap tolerance.
///
/// Fixed initialization: every primal block starts at `xi * I` with `xi`
/// the least-squares fit of `A(xi I) ~ b` (clamped to `[0.1, 1e6]`), every
/// dual block at `(1 + max_b ||C_b||_F) * I`, and all multipliers at zero.
pub fn solve(problem: &SdpProblem, gap_tol: f64) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    let pre = presolve_rank_filter(problem);
    if pre.infeasible {
        return Ok(SdpSolution::failure(SolveStatus::Infeasible, problem, pre.removed));
    }
    if pre.unbounded_free {
        return Ok(SdpSolution::failure(SolveStatus::NumericalFailure, problem, pre.removed));
    }

    let nb = problem.block_dims.len();
    let nf = pre.kept_free.len();
    let m = pre.kept.len();
    let sign = match problem.sense {
        Sense::Maximize => -1.0,
        Sense::Minimize => 1.0,
    };
    // Internal minimize form: min <chat, X> + cfhat.f.
    let chat: Vec<HermitianOperator> = problem.objective.iter().map(|c| c.scale(sign)).collect();
    let cfhat: Vec<f64> = pre.kept_free.iter().map(|&k| problem.free_objective[k] * sign).collect();
    let cons: Vec<&Constraint> = pre.kept.iter().map(|&e| &problem.constraints[e]).collect();
    let b: Vec<f64> = cons.iter().map(|c| c.rhs).collect();

    let sum_dim: f64 = problem.block_dims.iter().map(|&d| d as f64).sum();
    let b_scale = 1.0 + b.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let c_scale = 1.0 + chat.iter().fold(0.0f64, |a, c| a.max(c.frobenius_norm()));

    // a_apply over kept constraints.
    let a_apply = |x: &[HermitianOperator]| -> Vec<f64> {
        cons.iter()
            .map(|c| {
                c.terms
                    .iter()
                    .map(|&(bi, ref a)| trace_inner(a, &x[bi]).unwrap())
                    .sum::<f64>()
            })
            .collect()
    };
    let at_apply = |y: &[f64]| -> Vec<HermitianOperator> {
        let mut out: Vec<HermitianOperator> =
            problem.block_dims.iter().map(|&d| HermitianOperator::zeros(d)).collect();
        for (c, &ye) in cons.iter().zip(y) {
            if ye == 0.0 {
                continue;
            }
            for &(bi, ref a) in &c.terms {
                out[bi].axpy(ye, a);
            }
        }
        out
    };
    let g_apply = |f: &[f64]| -> Vec<f64> {
        cons.iter()
            .map(|c| pre.kept_free.iter().zip(f).map(|(&k, x)| c.free_coeffs[k] * x).sum())
            .collect()
    };
    let gt_apply = |y: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0f64; nf];
        for (c, &ye) in cons.iter().zip(y) {
            for (kk, &k) in pre.kept_free.iter().enumerate() {
                out[kk] += c.free_coeffs[k] * ye;
            }
        }
        out
    };

    // Fixed initialization.
    let ident: Vec<HermitianOperator> =
        problem.block_dims.iter().map(|&d| HermitianOperator::identity(d)).collect();
    let a_of_i = a_apply(&ident);
    let denom: f64 = a_of_i.iter().map(|x| x * x).sum();
    let numer: f64 = a_of_i.iter().zip(&b).map(|(x, y)| x * y).sum();
    let xi = if denom > 1e-300 { (numer / denom).max(0.1).min(1e6) } else { 1.0 };
    let zeta = c_scale;

    let mut x: Vec<HermitianOperator> = ident.iter().map(|i| i.scale(xi)).collect();
    let mut z: Vec<HermitianOperator> = ident.iter().map(|i| i.scale(zeta)).collect();
    let mut y = vec![0.0f64; m];
    let mut f = vec![0.0f64; nf];

    let mut status = SolveStatus::NumericalFailure;
    let mut iterations = 0;
    let mut pinf_history: Vec<f64> = Vec::new();
    let mut best: Option<(Vec<HermitianOperator>, Vec<f64>, Vec<f64>)> = None;
    let mut best_metric = f64::INFINITY;

    for iter in 0..MAX_ITER {
        iterations = iter;
        // Residuals.
        let ax = a_apply(&x);
        let gf = g_apply(&f);
        let rp: Vec<f64> = b.iter().zip(ax.iter().zip(&gf)).map(|(bb, (a, g))| bb - a - g).collect();
        let aty = at_apply(&y);
        let rd: Vec<HermitianOperator> = (0..nb)
            .map(|bi| {
                let mut r = chat[bi].clone();
                r.axpy(-1.0, &aty[bi]);
                r.axpy(-1.0, &z[bi]);
                r
            })
            .collect();
        let gty = gt_apply(&y);
        let rf: Vec<f64> = cfhat.iter().zip(&gty).map(|(c, g)| c - g).collect();

        let mu: f64 = (0..nb).map(|bi| trace_inner(&x[bi], &z[bi]).unwrap()).sum::<f64>()
            / sum_dim.max(1.0);
        let pinf = rp.iter().fold(0.0f64, |a, &r| a.max(r.abs())) / b_scale;
        let dinf = rd.iter().fold(0.0f64, |a, r| a.max(r.frobenius_norm())) / c_scale;
        let finf = rf.iter().fold(0.0f64, |a, &r| a.max(r.abs()))
            / (1.0 + cfhat.iter().fold(0.0f64, |a, &c| a.max(c.abs())));

        let pobj_int: f64 = (0..nb).map(|bi| trace_inner(&chat[bi], &x[bi]).unwrap()).sum::<f64>()
            + cfhat.iter().zip(&f).map(|(c, v)| c * v).sum::<f64>();
        let dobj_int: f64 = b.iter().zip(&y).map(|(bb, yy)| bb * yy).sum();
        let gap_abs = (pobj_int - dobj_int).abs();

        #[cfg(test)]
        if std::env::var("SDP_TRACE").is_ok() {
            std::eprintln!(
                "it {iter}: pinf {pinf:.3e} dinf {dinf:.3e} finf {finf:.3e} mu {mu:.3e} gap {gap_abs:.3e} pobj {pobj_int:.8}"
            );
        }
        if pinf <= 1e-9 && dinf <= 1e-9 && finf <= 1e-9 && gap_abs <= gap_tol * pobj_int.abs().max(1.0)
        {
            status = SolveStatus::Optimal;
            break;
        }
        // Degenerate instances (boundary statistics kill the primal
        // interior) cannot reach the strict tolerances; remember the best
        // iterate so far so a near-optimal point can still be returned.
        let metric = pinf.max(dinf).max(finf).max(gap_abs / pobj_int.abs().max(1.0));
        if metric.is_finite() && metric < best_metric {
            best_metric = metric;
            best = Some((x.clone(), y.clone(), f.clone()));
        }
        if !mu.is_finite() || mu > 1e16 {
            status = SolveStatus::NumericalFailure;
            break;
        }
        // Divergence heuristic: a primal-infeasible problem drives the dual
        // objective and multipliers to infinity while dual feasibility holds
        // and the primal residual stays bounded away from zero.
        // A near-feasible, near-optimal iterate seen earlier refutes any
        // later-looking evidence of infeasibility (late iterates of a
        // degenerate but feasible instance can destabilize badly).
        let seen_feasible = best_metric <= 1e-5;
        let ynorm = y.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if ynorm > 1e9 * b_scale {
            status = if dinf <= 1e-6 && pinf > 1e-7 && !seen_feasible {
                SolveStatus::Infeasible
            } else {
                SolveStatus::NumericalFailure
            };
            break;
        }
        pinf_history.push(pinf);
        if pinf_history.len() > 30 {
            let old = pinf_history[pinf_history.len() - 21];
            if pinf > 1e-4 && pinf > 0.5 * old && mu < 1e-9 {
                status = if seen_feasible {
                    SolveStatus::NumericalFailure
                } else {
                    SolveStatus::Infeasible
                };
                break;
            }
        }

        // Factorizations of the current iterate.
        let chol_z: Vec<Cholesky> = match z.iter().map(Cholesky::factor).collect() {
            Ok(c) => c,
            Err(_) => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };
        let zinv: Vec<HermitianOperator> =
            match chol_z.iter().map(|c| c.inverse()).collect::<Result<_, _>>() {
                Ok(v) => v,
                Err(_) => {
                    status = SolveStatus::NumericalFailure;
                    break;
                }
            };
        let chol_x: Vec<Cholesky> = match x.iter().map(Cholesky::factor).collect() {
            Ok(c) => c,
            Err(_) => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };

        // Schur complement M_{e,e'} = sum_b Re tr(A_e X A_e' Zinv).
        let n_sys = m + nf;
        let mut sys = vec![0.0f64; n_sys * n_sys];
        for e2 in 0..m {
            // T_b = X_b A_{e2,b} Zinv_b for blocks touched by e2.
            for &(bi, ref a2) in &cons[e2].terms {
                let t = CMat::from_herm(&x[bi])
                    .mul(&CMat::from_herm(a2))
                    .mul(&CMat::from_herm(&zinv[bi]));
                let th = t.herm_part();
                for e1 in 0..m {
                    let mut acc = 0.0;
                    let mut touched = false;
                    for &(b1, ref a1) in &cons[e1].terms {
                        if b1 == bi {
                            acc += trace_inner(a1, &th).unwrap();
                            touched = true;
                        }
                    }
                    if touched {
                        sys[e1 * n_sys + e2] += acc;
                    }
                }
            }
        }
        for e in 0..m {
            for (kk, &k) in pre.kept_free.iter().enumerate() {
                let g = cons[e].free_coeffs[k];
                sys[e * n_sys + (m + kk)] = g;
                sys[(m + kk) * n_sys + e] = g;
            }
        }
        // Light Tikhonov regularization keeps the LU stable when the
        // central path becomes nearly degenerate.
        let reg = 1e-13 * (1.0 + sys.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
        for e in 0..m {
            sys[e * n_sys + e] += reg;
        }
        let lu = match LuFactor::new(n_sys, sys.clone()) {
            Some(lu) => lu,
            None => {
                status = SolveStatus::NumericalFailure;
                break;
            }
        };

        let solve_direction = |nu: f64,
                               corr: Option<(&[HermitianOperator], &[HermitianOperator])>|
         -> (Vec<HermitianOperator>, Vec<HermitianOperator>, Vec<f64>, Vec<f64>) {
            // K_b = nu Zinv - X - sym(X Rd Zinv) + corr_b.
            let mut k: Vec<HermitianOperator> = (0..nb)
                .map(|bi| {
                    let mut kb = zinv[bi].scale(nu);
                    kb.axpy(-1.0, &x[bi]);
                    let t = CMat::from_herm(&x[bi])
                        .mul(&CMat::from_herm(&rd[bi]))
                        .mul(&CMat::from_herm(&zinv[bi]))
                        .herm_part();
                    kb.axpy(-1.0, &t);
                    kb
                })
                .collect();
            if let Some((dxa, dza)) = corr {
                for bi in 0..nb {
                    let t = CMat::from_herm(&dxa[bi])
                        .mul(&CMat::from_herm(&dza[bi]))
                        .mul(&CMat::from_herm(&zinv[bi]))
                        .herm_part();
                    k[bi].axpy(-1.0, &t);
                }
            }
            let ak = a_apply(&k);
            let mut rhs = vec![0.0f64; n_sys];
            for e in 0..m {
                rhs[e] = rp[e] - ak[e];
            }
            for kk in 0..nf {
                rhs[m + kk] = rf[kk];
            }
            let sol = lu.solve_refined(&sys, &rhs);
            let dy = sol[0..m].to_vec();
            let df = sol[m..].to_vec();
            let atdy = at_apply(&dy);
            let mut dz = Vec::with_capacity(nb);
            let mut dx = Vec::with_capacity(nb);
            for bi in 0..nb {
                let mut dzb = rd[bi].clone();
                dzb.axpy(-1.0, &atdy[bi]);
                let t = CMat::from_herm(&x[bi])
                    .mul(&CMat::from_herm(&atdy[bi]))
                    .mul(&CMat::from_herm(&zinv[bi]))
                    .herm_part();
                let mut dxb = k[bi].clone();
                dxb.axpy(1.0, &t);
                dx.push(dxb);
                dz.push(dzb);
            }
            (dx, dz, dy, df)
        };

        // Max feasible step keeping S + alpha dS > 0.
        let max_step = |chol: &[Cholesky], ds: &[HermitianOperator]| -> f64 {
            let mut alpha = f64::INFINITY;
            for (c, d) in chol.iter().zip(ds) {
                let w = c.whiten(d);
                let lam = w.min_eigenvalue();
                if lam < 0.0 {
                    alpha = alpha.min(-1.0 / lam);
                }
            }
            alpha
        };

        // Predictor.
        let (dxa, dza, _dya, _dfa) = solve_direction(0.0, None);
        let apa = max_step(&chol_x, &dxa).min(1.0);
        let ada = max_step(&chol_z, &dza).min(1.0);
        let mut mu_aff = 0.0;
        for bi in 0..nb {
            let mut xn = x[bi].clone();
            xn.axpy(apa, &dxa[bi]);
            let mut zn = z[bi].clone();
            zn.axpy(ada, &dza[bi]);
            mu_aff += trace_inner(&xn, &zn).unwrap();
        }
        mu_aff /= sum_dim.max(1.0);
        let mut sigma = (mu_aff / mu).max(0.0).powi(3);
        sigma = sigma.max(1e-10).min(1.0);

        // Corrector.
        let (dx, dz, dy, df) = solve_direction(sigma * mu, Some((&dxa, &dza)));
        let ap = (0.98 * max_step(&chol_x, &dx)).min(1.0);
        let ad = (0.98 * max_step(&chol_z, &dz)).min(1.0);
        if !ap.is_finite() || !ad.is_finite() || ap < 1e-13 || ad < 1e-13 {
            status = SolveStatus::NumericalFailure;
            break;
        }
        for bi in 0..nb {
            x[bi].axpy(ap, &dx[bi]);
            z[bi].axpy(ad, &dz[bi]);
        }
        for (yy, d) in y.iter_mut().zip(&dy) {
            *yy += ad * d;
        }
        for (ff, d) in f.iter_mut().zip(&df) {
            *ff += ap * d;
        }
    }

    if status != SolveStatus::Optimal && status != SolveStatus::Infeasible {
        // Rescue: accept the best iterate if every residual and the
        // relative gap reached 1e-5. Degenerate instances whose optimal
        // dual set is unbounded or empty stall short of the strict loop
        // tolerances; a 1e-5-accurate iterate is still far more useful to
        // the caller than an outright failure.
        if let Some((bx, by, bf)) = best {
            if best_metric <= 1e-5 {
                x = bx;
                y = by;
                f = bf;
                status = SolveStatus::Optimal;
            }
        }
    }
    if status != SolveStatus::Optimal {
        let mut sol = SdpSolution::failure(status, problem, pre.removed);
        sol.iterations = iterations;
        return Ok(sol);
    }

    // Map back to user sense: for Maximize the user multiplier is -yhat.
    let mut y_user = vec![0.0f64; problem.constraints.len()];
    for (k, &e) in pre.kept.iter().enumerate() {
        y_user[e] = if sign < 0.0 { -y[k] } else { y[k] };
    }
    let mut f_user = vec![0.0f64; problem.num_free()];
    for (kk, &k) in pre.kept_free.iter().enumerate() {
        f_user[k] = f[kk];
    }
    let primal_value: f64 = (0..nb)
        .map(|bi| trace_inner(&problem.objective[bi], &x[bi]).unwrap())
        .sum::<f64>()
        + problem.free_objective.iter().zip(&f_user).map(|(c, v)| c * v).sum::<f64>();
    let dual_value: f64 = problem
        .constraints
        .iter()
        .zip(&y_user)
        .map(|(c, yy)| c.rhs * yy)
        .sum();

    Ok(SdpSolution {
        status: SolveStatus::Optimal,
        blocks: x,
        y: y_user,
        free: f_user,
        primal_value,
        dual_value,
        gap: dual_value - primal_value,
        iterations,
        removed_constraints: pre.removed,
    })
}

/// Independent verification report; every quantity is recomputed from the
/// problem data with matcore primitives only.
#[derive(Debug, Clone)]
pub struct CheckReport {
    /// Max over constraints of `|A(X) + G f - rhs|`.
    pub max_primal_residual: f64,
    /// Min over blocks of the smallest eigenvalue of `X_b`.
    pub min_block_eigenvalue: f64,
    /// Min over blocks of the smallest eigenvalue of the dual slack
    /// (`sum y A - C` for maximize, `C - sum y A` for minimize).
    pub dual_slack_margin: f64,
    /// Max over free variables of `|G^T y - c|`.
    pub max_free_dual_residual: f64,
    /// Recomputed `dual_value - primal_value`.
    pub gap: f64,
}

pub fn check_solution(problem: &SdpProblem, sol: &SdpSolution) -> Result<CheckReport, SdpError> {
    problem.validate()?;
    if sol.blocks.len() != problem.block_dims.len()
        || sol.y.len() != problem.constraints.len()
        || sol.free.len() != problem.num_free()
    {
        return Err(SdpError::Malformed("solution shape does not match problem".into()));
    }
    for (bi, x) in sol.blocks.iter().enumerate() {
        if x.dim() != problem.block_dims[bi] {
            return Err(SdpError::Mat(MatError::DimensionMismatch {
                left: x.dim(),
                right: problem.block_dims[bi],
            }));
        }
    }

    let mut max_primal_residual = 0.0f64;
    for con in &problem.constraints {
        let mut v: f64 =
            con.terms.iter().map(|&(b, ref a)| trace_inner(a, &sol.blocks[b]).unwrap()).sum();
        v += con.free_coeffs.iter().zip(&sol.free).map(|(g, x)| g * x).sum::<f64>();
        max_primal_residual = max_primal_residual.max((v - con.rhs).abs());
    }

    let min_block_eigenvalue = sol
        .blocks
        .iter()
        .map(|x| x.min_eigenvalue())
        .fold(f64::INFINITY, f64::min);

    let sign = match problem.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut dual_slack_margin = f64::INFINITY;
    for (bi, &d) in problem.block_dims.iter().enumerate() {
        // slack = sign * (sum_e y_e A_e - C) on this block
        let mut s = HermitianOperator::zeros(d);
        for (con, &ye) in problem.constraints.iter().zip(&sol.y) {
            for &(b, ref a) in &con.terms {
                if b == bi {
                    s.axpy(ye, a);
                }
            }
        }
        s.axpy(-1.0, &problem.objective[bi]);
        let s = s.scale(sign);
        dual_slack_margin = dual_slack_margin.min(s.min_eigenvalue());
    }

    let mut max_free_dual_residual = 0.0f64;
    for k in 0..problem.num_free() {
        let gty: f64 = problem
            .constraints
            .iter()
            .zip(&sol.y)
            .map(|(con, ye)| con.free_coeffs[k] * ye)
            .sum();
        max_free_dual_residual = max_free_dual_residual.max((gty - problem.free_objective[k]).abs());
    }

    let primal: f64 = problem
        .objective
        .iter()
        .zip(&sol.blocks)
        .map(|(c, x)| trace_inner(c, x).unwrap())
        .sum::<f64>()
        + problem.free_objective.iter().zip(&sol.free).map(|(c, v)| c * v).sum::<f64>();
    let dual: f64 = problem.constraints.iter().zip(&sol.y).map(|(c, y)| c.rhs * y).sum();

    Ok(CheckReport {
        max_primal_residual,
        min_block_eigenvalue,
        dual_slack_margin,
        max_free_dual_residual,
        gap: dual - primal,
    })
}

// ---------------------------------------------------------------------------
// Dense real LU with partial pivoting.
// ---------------------------------------------------------------------------

struct LuFactor {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl LuFactor {
    fn new(n: usize, mut a: Vec<f64>) -> Option<Self> {
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut best = col;
            let mut best_val = a[col * n + col].abs();
            for row in (col + 1)..n {
                let v = a[row * n + col].abs();
                if v > best_val {
                    best = row;
                    best_val = v;
                }
            }
            if best_val < 1e-300 || !best_val.is_finite() {
                return None;
            }
            if best != col {
                for k in 0..n {
                    a.swap(col * n + k, best * n + k);
                }
                piv.swap(col, best);
            }
            let pivot = a[col * n + col];
            for row in (col + 1)..n {
                let factor = a[row * n + col] / pivot;
                a[row * n + col] = factor;
                for k in (col + 1)..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
        Some(Self { n, lu: a, piv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] = x[i] - self.lu[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] = x[i] - self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Solve with two rounds of iterative refinement against the original
    /// matrix `a`; this keeps the Newton directions accurate when the
    /// Schur complement becomes severely ill-conditioned late on the
    /// central path.
    fn solve_refined(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = self.solve(b);
        for _ in 0..2 {
            let mut r = b.to_vec();
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += a[i * n + k] * x[k];
                }
                r[i] -= acc;
            }
            let corr = self.solve(&r);
            for (xi, ci) in x.iter_mut().zip(&corr) {
                *xi += ci;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::PureState;

    #[test]
    fn trivial_1x1() {
        let mut p = SdpProblem::new(Sense::Maximize, vec![HermitianOperator::identity(1)]);
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(1))],
            free_coeffs: vec![],
            rhs: 0.3,
        });
        let sol = solve(&p, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 0.3).abs() < 1e-8);
        let rep = check_solution(&p, &sol).unwrap();
        assert!(rep.max_primal_residual < 1e-8);
        assert!(rep.gap.abs() < 1e-7);
    }

    #[test]
    fn rank_one_objective() {
        // max tr(X diag(1,0)) s.t. tr(X) = 1, X >= 0  ->  X = |0><0|, value 1.
        let c = HermitianOperator::from_diag(&[1.0, 0.0]);
        let mut p = SdpProblem::new(Sense::Maximize, vec![c]);
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![],
            rhs: 1.0,
        });
        let sol = solve(&p, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-7);
        let target = PureState::basis_state(2, 0).projector();
        assert!(sol.blocks[0].sub(&target).unwrap().frobenius_norm() < 1e-5);
    }

    #[test]
    fn redundant_constraint_removed() {
        let c = HermitianOperator::from_diag(&[1.0, 0.0]);
        let mut p = SdpProblem::new(Sense::Maximize, vec![c]);
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![],
            rhs: 1.0,
        });
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2).scale(2.0))],
            free_coeffs: vec![],
            rhs: 2.0,
        });
        let sol = solve(&p, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.removed_constraints, vec![1]);
        assert_eq!(sol.y[1], 0.0);
    }

    #[test]
    fn inconsistent_rhs_is_infeasible() {
        let c = HermitianOperator::from_diag(&[1.0, 0.0]);
        let mut p = SdpProblem::new(Sense::Maximize, vec![c]);
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![],
            rhs: 1.0,
        });
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![],
            rhs: 1.5,
        });
        let sol = solve(&p, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn conic_infeasible_detected() {
        // tr(X) = -1 with X >= 0 has no solution.
        let mut p = SdpProblem::new(Sense::Maximize, vec![HermitianOperator::identity(2)]);
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![],
            rhs: -1.0,
        });
        let sol = solve(&p, DEFAULT_GAP_TOL).unwrap();
        assert_ne!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn free_variable_equality() {
        // max f s.t. f + tr(X) = 2, tr(X diag(1,1)) = 1  ->  f = 1.
        let mut p = SdpProblem::new(Sense::Maximize, vec![HermitianOperator::zeros(2)])
            .with_free_variables(vec![1.0]);
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![1.0],
            rhs: 2.0,
        });
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![0.0],
            rhs: 1.0,
        });
        let sol = solve(&p, DEFAULT_GAP_TOL).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_value - 1.0).abs() < 1e-7, "value {}", sol.primal_value);
        assert!((sol.free[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn injected_defect_reported() {
        let c = HermitianOperator::from_diag(&[1.0, 0.0]);
        let mut p = SdpProblem::new(Sense::Maximize, vec![c]);
        p.add_constraint(Constraint {
            terms: vec![(0, HermitianOperator::identity(2))],
            free_coeffs: vec![],
            rhs: 1.0,
        });
        let mut sol = solve(&p, DEFAULT_GAP_TOL).unwrap();
        let mut bad = sol.blocks[0].clone();
        bad.shift(-1e-3);
        sol.blocks[0] = bad;
        let rep = check_solution(&p, &sol).unwrap();
        assert!((rep.min_block_eigenvalue + 1e-3).abs() < 1e-5);
    }
}

//! End-to-end certification: nominal statistics, dual certificate,
//! expected counts, finite-size bound, and the loss sweep around it.

use std::fmt;

use sdiq_core::finitesize::{finite_size_mdi, finite_size_si, FiniteSizeResult};
use sdiq_core::mdi::{extract_mdi_certificate, mdi_guessing_probability, MdiDualCertificate};
use sdiq_core::optics::{
    eta_from_db, mdi_expected_counts, mdi_model, mdi_nominal_stats, si_expected_counts,
    si_nominal_stats, si_povm, OpticalParams,
};
use sdiq_core::si::{extract_si_certificate, si_guessing_probability, SiDualCertificate};

use crate::config::{Protocol, RunConfig};

/// Everything shared by all points of one run.
#[derive(Debug, Clone)]
pub struct PointParams {
    pub protocol: Protocol,
    pub n_tot: f64,
    pub epsilon: f64,
    pub p_d: f64,
    pub p_z: f64,
    pub p_s: f64,
    pub c_mode: sdiq_core::finitesize::BoundedDiffMode,
    pub g_mode: sdiq_core::finitesize::NGuessMode,
}

impl PointParams {
    pub fn from_config(config: &RunConfig) -> Self {
        Self {
            protocol: config.protocol,
            n_tot: config.n_tot as f64,
            epsilon: config.epsilon,
            p_d: config.p_d,
            p_z: config.p_z,
            p_s: config.p_s,
            c_mode: config.mode_c.into(),
            g_mode: config.mode_delta.into(),
        }
    }
}

/// One CSV row. Column order is the field order here; the header is
/// [`SweepRecord::CSV_HEADER`], byte-exact.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub loss_db: f64,
    pub eta_ch: f64,
    pub mu_used: f64,
    pub p_sig_used: f64,
    pub p_guess_nominal: f64,
    pub dual_objective: f64,
    pub delta: f64,
    pub n_guess_upper: f64,
    pub n_fin: u64,
    pub rate_total: f64,
    pub rate_per_signal: f64,
    pub repaired: bool,
    pub epsilon: f64,
}

impl SweepRecord {
    pub const CSV_HEADER: &'static str = "loss_db,eta_ch,mu_used,p_sig_used,p_guess_nominal,dual_objective,delta,n_guess_upper,n_fin,rate_total,rate_per_signal,repaired,epsilon";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.loss_db,
            self.eta_ch,
            self.mu_used,
            self.p_sig_used,
            self.p_guess_nominal,
            self.dual_objective,
            self.delta,
            self.n_guess_upper,
            self.n_fin,
            self.rate_total,
            self.rate_per_signal,
            self.repaired,
            self.epsilon
        )
    }

    pub fn summary_line(&self) -> String {
        format!(
            "loss {:>6.2} dB: mu {:.6}, p_sig {:.4}, p_guess {:.6}, N_fin {} ({:.6} bits/round)",
            self.loss_db, self.mu_used, self.p_sig_used, self.p_guess_nominal, self.n_fin,
            self.rate_total
        )
    }
}

/// A failed point: which pipeline stage died and why.
#[derive(Debug, Clone)]
pub struct PointFailure {
    pub loss_db: f64,
    pub stage: &'static str,
    pub message: String,
}

impl fmt::Display for PointFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loss {:.2} dB failed at {}: {}", self.loss_db, self.stage, self.message)
    }
}

/// The mu-dependent (but p_sig-independent) half of a certification:
/// nominal statistics and the verified certificate. Splitting here lets
/// the p_sig search reuse one SDP solve.
#[derive(Debug, Clone)]
pub enum CertifiedPoint {
    Si {
        params: OpticalParams,
        q: [f64; 5],
        p_guess: f64,
        cert: SiDualCertificate,
    },
    Mdi {
        params: OpticalParams,
        q: [[f64; 3]; 2],
        probs: Vec<f64>,
        p_guess: f64,
        cert: MdiDualCertificate,
    },
}

impl CertifiedPoint {
    pub fn p_guess(&self) -> f64 {
        match self {
            CertifiedPoint::Si { p_guess, .. } | CertifiedPoint::Mdi { p_guess, .. } => *p_guess,
        }
    }

    pub fn dual_objective(&self) -> f64 {
        match self {
            CertifiedPoint::Si { q, cert, .. } => cert.dual_objective(q),
            CertifiedPoint::Mdi { q, cert, .. } => {
                let rows: Vec<Vec<f64>> = q.iter().map(|r| r.to_vec()).collect();
                cert.dual_objective(&rows)
            }
        }
    }

    pub fn repaired(&self) -> bool {
        match self {
            CertifiedPoint::Si { cert, .. } => cert.repaired,
            CertifiedPoint::Mdi { cert, .. } => cert.repaired,
        }
    }
}

/// Solves the SDP and extracts the verified certificate at one
/// (mu, loss) point. Everything downstream of this is cheap arithmetic.
pub fn certify_point(
    pp: &PointParams,
    mu: f64,
    loss_db: f64,
) -> Result<CertifiedPoint, PointFailure> {
    let fail = |stage: &'static str, message: String| PointFailure { loss_db, stage, message };
    let eta_ch = eta_from_db(loss_db);
    let params = OpticalParams::new(mu, eta_ch, pp.p_d, pp.p_z, pp.p_s)
        .map_err(|e| fail("optics", e.to_string()))?;
    match pp.protocol {
        Protocol::Si => {
            let model = si_povm(pp.p_z).map_err(|e| fail("optics", e.to_string()))?;
            let q = si_nominal_stats(&params);
            let (p_guess, _) = si_guessing_probability(&model, &q)
                .map_err(|e| fail("primal", e.to_string()))?;
            let cert = extract_si_certificate(&model, &q)
                .map_err(|e| fail("certificate", e.to_string()))?;
            Ok(CertifiedPoint::Si { params, q, p_guess, cert })
        }
        Protocol::Mdi => {
            let model = mdi_model(mu, pp.p_s).map_err(|e| fail("optics", e.to_string()))?;
            let q = mdi_nominal_stats(&params);
            let rows: Vec<Vec<f64>> = q.iter().map(|r| r.to_vec()).collect();
            let (p_guess, _) = mdi_guessing_probability(&model, &rows)
                .map_err(|e| fail("primal", e.to_string()))?;
            let cert = extract_mdi_certificate(&model, &rows)
                .map_err(|e| fail("certificate", e.to_string()))?;
            Ok(CertifiedPoint::Mdi { params, q, probs: model.probs().to_vec(), p_guess, cert })
        }
    }
}

/// Finite-size step: expected counts at `p_sig` plus the concentration
/// bound, producing the final record.
pub fn finish_point(
    pp: &PointParams,
    point: &CertifiedPoint,
    p_sig: f64,
    loss_db: f64,
) -> Result<SweepRecord, PointFailure> {
    let fail = |message: String| PointFailure { loss_db, stage: "finite-size", message };
    let fs: FiniteSizeResult = match point {
        CertifiedPoint::Si { q, cert, .. } => {
            let counts = si_expected_counts(q, pp.n_tot, p_sig);
            finite_size_si(&cert.lambda, &counts, pp.n_tot, p_sig, pp.epsilon, pp.c_mode, pp.g_mode)
                .map_err(|e| fail(e.to_string()))?
        }
        CertifiedPoint::Mdi { q, probs, cert, .. } => {
            let counts = mdi_expected_counts(q, probs, pp.n_tot, p_sig);
            finite_size_mdi(
                &cert.eta, probs, &counts, pp.n_tot, p_sig, pp.epsilon, pp.c_mode, pp.g_mode,
            )
            .map_err(|e| fail(e.to_string()))?
        }
    };
    let mu_used = match point {
        CertifiedPoint::Si { params, .. } | CertifiedPoint::Mdi { params, .. } => params.mu,
    };
    Ok(SweepRecord {
        loss_db,
        eta_ch: eta_from_db(loss_db),
        mu_used,
        p_sig_used: p_sig,
        p_guess_nominal: point.p_guess(),
        dual_objective: point.dual_objective(),
        delta: fs.delta,
        n_guess_upper: fs.n_guess_upper,
        n_fin: fs.n_fin,
        rate_total: fs.n_fin as f64 / pp.n_tot,
        rate_per_signal: fs.n_fin as f64 / (p_sig * pp.n_tot),
        repaired: point.repaired(),
        epsilon: pp.epsilon,
    })
}

/// Full pipeline at fixed (mu, p_sig, loss).
pub fn certify_once(
    pp: &PointParams,
    mu: f64,
    p_sig: f64,
    loss_db: f64,
) -> Result<SweepRecord, PointFailure> {
    let point = certify_point(pp, mu, loss_db)?;
    finish_point(pp, &point, p_sig, loss_db)
}

/// Search grids: 20 log-spaced mu in [1e-3, 1], 20 linear p_sig in
/// [0.5, 1 - 1e-3].
pub const MU_GRID_SIZE: usize = 20;
pub const P_SIG_GRID_SIZE: usize = 20;
pub const MU_RANGE: (f64, f64) = (1e-3, 1.0);
pub const P_SIG_RANGE: (f64, f64) = (0.5, 0.999);

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn lin_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Coarse grid search plus one local refinement pass over whichever of
/// (mu, p_sig) is free; ties break toward smaller mu, then smaller p_sig.
/// Returns the best record. Fails only if every candidate failed.
pub fn optimize_point(
    pp: &PointParams,
    mu_fixed: Option<f64>,
    p_sig_fixed: Option<f64>,
    loss_db: f64,
) -> Result<SweepRecord, PointFailure> {
    let mu_coarse = match mu_fixed {
        Some(m) => vec![m],
        None => log_grid(MU_RANGE.0, MU_RANGE.1, MU_GRID_SIZE),
    };
    let p_sig_candidates = |center: Option<f64>| -> Vec<f64> {
        match (p_sig_fixed, center) {
            (Some(p), _) => vec![p],
            (None, None) => lin_grid(P_SIG_RANGE.0, P_SIG_RANGE.1, P_SIG_GRID_SIZE),
            (None, Some(c)) => {
                let half = (P_SIG_RANGE.1 - P_SIG_RANGE.0) / (P_SIG_GRID_SIZE - 1) as f64;
                lin_grid(
                    (c - half).max(P_SIG_RANGE.0),
                    (c + half).min(P_SIG_RANGE.1),
                    P_SIG_GRID_SIZE,
                )
            }
        }
    };

    let mut best: Option<SweepRecord> = None;
    let mut last_failure: Option<PointFailure> = None;
    let scan = |mu_values: &[f64], p_sig_center: Option<f64>,
                    best: &mut Option<SweepRecord>,
                    last_failure: &mut Option<PointFailure>| {
        for &mu in mu_values {
            let point = match certify_point(pp, mu, loss_db) {
                Ok(p) => p,
                Err(e) => {
                    *last_failure = Some(e);
                    continue;
                }
            };
            for &p_sig in &p_sig_candidates(p_sig_center) {
                match finish_point(pp, &point, p_sig, loss_db) {
                    Ok(rec) => {
                        let better = match best {
                            None => true,
                            // Strict improvement only: ties keep the earlier
                            // (smaller-mu, then smaller-p_sig) candidate.
                            Some(b) => rec.n_fin > b.n_fin,
                        };
                        if better {
                            *best = Some(rec);
                        }
                    }
                    Err(e) => *last_failure = Some(e),
                }
            }
        }
    };

    scan(&mu_coarse, None, &mut best, &mut last_failure);

    // Refinement: a finer pass between the coarse neighbors of the argmax.
    if let Some(b) = best.clone() {
        let mu_fine = match mu_fixed {
            Some(_) => vec![b.mu_used],
            None => {
                let ratio = (MU_RANGE.1 / MU_RANGE.0).powf(1.0 / (MU_GRID_SIZE - 1) as f64);
                log_grid(
                    (b.mu_used / ratio).max(MU_RANGE.0),
                    (b.mu_used * ratio).min(MU_RANGE.1),
                    7,
                )
            }
        };
        let center = if p_sig_fixed.is_none() { Some(b.p_sig_used) } else { None };
        scan(&mu_fine, center, &mut best, &mut last_failure);
    }

    best.ok_or_else(|| {
        last_failure.unwrap_or(PointFailure {
            loss_db,
            stage: "optimize",
            message: "no candidate evaluated".into(),
        })
    })
}

/// Runs the whole configured sweep. Records come back in loss order;
/// failed points are collected separately.
pub fn sweep(config: &RunConfig) -> (Vec<Result<SweepRecord, PointFailure>>, bool) {
    let pp = PointParams::from_config(config);
    let losses = config.loss_db.points().expect("validated config");
    let mut out = Vec::with_capacity(losses.len());
    let mut any_failed = false;
    for &loss_db in &losses {
        let result = match (config.mu.fixed(), config.p_sig.fixed()) {
            (Some(mu), Some(p_sig)) => certify_once(&pp, mu, p_sig, loss_db),
            (mu, p_sig) => optimize_point(&pp, mu, p_sig, loss_db),
        };
        if result.is_err() {
            any_failed = true;
        }
        out.push(result);
    }
    (out, any_failed)
}

/// The CSV text for a finished sweep: header plus one row per successful
/// point, in loss order.
pub fn sweep_csv(records: &[Result<SweepRecord, PointFailure>]) -> String {
    let mut s = String::from(SweepRecord::CSV_HEADER);
    s.push('\n');
    for rec in records.iter().flatten() {
        s.push_str(&rec.csv_row());
        s.push('\n');
    }
    s
}

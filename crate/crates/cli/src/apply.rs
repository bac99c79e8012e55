//! The protocol's real usage order: fix a certificate, collect data, then
//! turn measured counts into a final length with the *saved* certificate.

use serde::Deserialize;

use sdiq_core::finitesize::{finite_size_mdi, finite_size_si, FiniteSizeResult};
use sdiq_core::mdi::MdiModel;
use sdiq_core::si::SiModel;

use crate::certfile::{bind_mdi_certificate, bind_si_certificate, CertFileError, ParsedCertificate};
use crate::config::{CMode, DeltaMode};

/// Measured counts file: test-round counts only (generation rounds are
/// `N_tot` minus their total).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsFile {
    pub n_tot: f64,
    pub p_sig: f64,
    pub epsilon: f64,
    pub counts: CountsData,
    #[serde(default)]
    pub mode_c: CMode,
    #[serde(default)]
    pub mode_delta: DeltaMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CountsData {
    /// SI: one count per outcome.
    Flat(Vec<f64>),
    /// MDI: one row per input state.
    Nested(Vec<Vec<f64>>),
}

impl CountsFile {
    pub fn parse(text: &str) -> Result<Self, CertFileError> {
        let parsed: CountsFile =
            toml::from_str(text).map_err(|e| CertFileError(format!("counts parse error: {e}")))?;
        if !(parsed.n_tot >= 1.0 && parsed.n_tot.is_finite()) {
            return Err(CertFileError(format!("n_tot = {} must be >= 1", parsed.n_tot)));
        }
        if !(parsed.p_sig > 0.0 && parsed.p_sig < 1.0) {
            return Err(CertFileError(format!("p_sig = {} outside (0, 1)", parsed.p_sig)));
        }
        if !(parsed.epsilon > 0.0 && parsed.epsilon < 1.0) {
            return Err(CertFileError(format!("epsilon = {} outside (0, 1)", parsed.epsilon)));
        }
        Ok(parsed)
    }
}

pub fn apply_si(
    model: &SiModel,
    parsed: &ParsedCertificate,
    counts: &CountsFile,
) -> Result<FiniteSizeResult, CertFileError> {
    let cert = bind_si_certificate(model, parsed)?;
    let CountsData::Flat(ref c) = counts.counts else {
        return Err(CertFileError("SI counts must be a flat array".into()));
    };
    finite_size_si(
        &cert.lambda,
        c,
        counts.n_tot,
        counts.p_sig,
        counts.epsilon,
        counts.mode_c.into(),
        counts.mode_delta.into(),
    )
    .map_err(|e| CertFileError(format!("finite-size step failed: {e}")))
}

pub fn apply_mdi(
    model: &MdiModel,
    parsed: &ParsedCertificate,
    counts: &CountsFile,
) -> Result<FiniteSizeResult, CertFileError> {
    let cert = bind_mdi_certificate(model, parsed)?;
    let CountsData::Nested(ref c) = counts.counts else {
        return Err(CertFileError("MDI counts must be an array of per-state rows".into()));
    };
    finite_size_mdi(
        &cert.eta,
        model.probs(),
        c,
        counts.n_tot,
        counts.p_sig,
        counts.epsilon,
        counts.mode_c.into(),
        counts.mode_delta.into(),
    )
    .map_err(|e| CertFileError(format!("finite-size step failed: {e}")))
}

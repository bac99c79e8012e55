//! Certificate files: a certificate is fixed *before* data collection and
//! audited afterwards, so it must be serializable at full precision,
//! bound to the exact model it certifies (hash), and re-verifiable
//! independently of the solver that produced it.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use sdiq_core::mdi::{verify_mdi_inequalities, MdiDualCertificate, MdiModel};
use sdiq_core::si::{verify_si_inequalities, SiDualCertificate, SiModel};
use sdiq_core::HermitianOperator;

use crate::config::Protocol;

/// Metadata note recorded in every certificate: the deliberate deviations
/// from the source formulas, so an auditor sees them next to the numbers.
pub const CORRECTION_NOTE: &str = "corrections: M4=(1-p_z)|-><-| (source prints a duplicate of M3); \
     overlap coefficient (2-sqrt(2)) (source prints (2+sqrt(2)))";

#[derive(Debug)]
pub struct CertFileError(pub String);

impl std::fmt::Display for CertFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "certificate file error: {}", self.0)
    }
}

impl std::error::Error for CertFileError {}

fn hash_hex(desc: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(desc.as_bytes());
    let digest = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

fn operator_desc(op: &HermitianOperator) -> String {
    let d = op.dim();
    let mut s = format!("dim {d};");
    for i in 0..d {
        for j in 0..d {
            let e = op.entry(i, j);
            write!(s, "{:?},{:?};", e.re, e.im).unwrap();
        }
    }
    s
}

/// Canonical model fingerprint: POVM entries at full precision.
pub fn si_model_hash(model: &SiModel) -> String {
    let mut desc = String::from("si-model v1\n");
    for m in model.povm() {
        desc.push_str(&operator_desc(m));
        desc.push('\n');
    }
    hash_hex(&desc)
}

/// Canonical model fingerprint: state amplitudes, priors, outcome count.
pub fn mdi_model_hash(model: &MdiModel) -> String {
    let mut desc = String::from("mdi-model v1\n");
    for (state, p) in model.states().iter().zip(model.probs()) {
        for a in state.amplitudes() {
            write!(desc, "{:?},{:?};", a.re, a.im).unwrap();
        }
        write!(desc, "p={p:?}\n").unwrap();
    }
    write!(desc, "n={}\n", model.n_outcomes()).unwrap();
    hash_hex(&desc)
}

pub fn si_certificate_text(model: &SiModel, cert: &SiDualCertificate) -> String {
    let mut s = String::from("sdiq certificate v1\n");
    writeln!(s, "protocol: si").unwrap();
    writeln!(s, "model_hash: sha256:{}", si_model_hash(model)).unwrap();
    writeln!(s, "note: {CORRECTION_NOTE}").unwrap();
    writeln!(s, "repaired: {}", cert.repaired).unwrap();
    writeln!(s, "worst_margin: {:?}", cert.worst_margin).unwrap();
    let lambda: Vec<String> = cert.lambda.iter().map(|l| format!("{l:?}")).collect();
    writeln!(s, "lambda: {}", lambda.join(" ")).unwrap();
    s
}

pub fn mdi_certificate_text(model: &MdiModel, cert: &MdiDualCertificate) -> String {
    let mut s = String::from("sdiq certificate v1\n");
    writeln!(s, "protocol: mdi").unwrap();
    writeln!(s, "model_hash: sha256:{}", mdi_model_hash(model)).unwrap();
    writeln!(s, "note: {CORRECTION_NOTE}").unwrap();
    writeln!(s, "repaired: {}", cert.repaired).unwrap();
    writeln!(s, "worst_margin: {:?}", cert.worst_margin).unwrap();
    for (i, row) in cert.eta.iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|e| format!("{e:?}")).collect();
        writeln!(s, "eta[{i}]: {}", vals.join(" ")).unwrap();
    }
    for (g, h) in cert.h.iter().enumerate() {
        let d = h.dim();
        let mut vals = Vec::with_capacity(2 * d * d);
        for i in 0..d {
            for j in 0..d {
                let e = h.entry(i, j);
                vals.push(format!("{:?}", e.re));
                vals.push(format!("{:?}", e.im));
            }
        }
        writeln!(s, "h[{g}] dim {d}: {}", vals.join(" ")).unwrap();
    }
    s
}

/// A parsed certificate file, before binding to a model.
#[derive(Debug, Clone)]
pub enum ParsedCertificate {
    Si { model_hash: String, lambda: Vec<f64> },
    Mdi { model_hash: String, eta: Vec<Vec<f64>>, h: Vec<HermitianOperator> },
}

impl ParsedCertificate {
    pub fn protocol(&self) -> Protocol {
        match self {
            ParsedCertificate::Si { .. } => Protocol::Si,
            ParsedCertificate::Mdi { .. } => Protocol::Mdi,
        }
    }

    pub fn model_hash(&self) -> &str {
        match self {
            ParsedCertificate::Si { model_hash, .. }
            | ParsedCertificate::Mdi { model_hash, .. } => model_hash,
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CertFileError> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| CertFileError(format!("bad number {t:?}: {e}"))))
        .collect()
}

pub fn parse_certificate(text: &str) -> Result<ParsedCertificate, CertFileError> {
    let mut lines = text.lines();
    match lines.next() {
        Some("sdiq certificate v1") => {}
        other => return Err(CertFileError(format!("bad header line: {other:?}"))),
    }
    let mut protocol = None;
    let mut model_hash = None;
    let mut lambda = None;
    let mut eta: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut h: Vec<(usize, HermitianOperator)> = Vec::new();
    for line in lines {
        let Some((key, value)) = line.split_once(':') else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(CertFileError(format!("unparseable line: {line:?}")));
        };
        let value = value.trim();
        match key.trim() {
            "protocol" => protocol = Some(value.to_string()),
            "model_hash" => {
                let hash = value
                    .strip_prefix("sha256:")
                    .ok_or_else(|| CertFileError("model_hash must start with sha256:".into()))?;
                model_hash = Some(hash.to_string());
            }
            "note" | "repaired" | "worst_margin" => {}
            "lambda" => lambda = Some(parse_floats(value)?),
            key if key.starts_with("eta[") => {
                let idx: usize = key[4..key.len() - 1]
                    .parse()
                    .map_err(|_| CertFileError(format!("bad eta index in {key:?}")))?;
                eta.push((idx, parse_floats(value)?));
            }
            key if key.starts_with("h[") => {
                let rest = &key[2..];
                let close = rest
                    .find(']')
                    .ok_or_else(|| CertFileError(format!("bad h key {key:?}")))?;
                let idx: usize = rest[..close]
                    .parse()
                    .map_err(|_| CertFileError(format!("bad h index in {key:?}")))?;
                let dim: usize = rest[close + 1..]
                    .trim()
                    .strip_prefix("dim ")
                    .and_then(|d| d.trim().parse().ok())
                    .ok_or_else(|| CertFileError(format!("bad h dimension in {key:?}")))?;
                let vals = parse_floats(value)?;
                if vals.len() != 2 * dim * dim {
                    return Err(CertFileError(format!(
                        "h[{idx}] has {} values, expected {}",
                        vals.len(),
                        2 * dim * dim
                    )));
                }
                let entries = vals
                    .chunks(2)
                    .map(|c| sdiq_core::ComplexScalar::new(c[0], c[1]))
                    .collect();
                let op = HermitianOperator::from_entries(dim, entries)
                    .map_err(|e| CertFileError(format!("h[{idx}] not Hermitian: {e}")))?;
                h.push((idx, op));
            }
            other => return Err(CertFileError(format!("unknown key {other:?}"))),
        }
    }
    let model_hash = model_hash.ok_or_else(|| CertFileError("missing model_hash".into()))?;
    match protocol.as_deref() {
        Some("si") => {
            let lambda = lambda.ok_or_else(|| CertFileError("missing lambda".into()))?;
            Ok(ParsedCertificate::Si { model_hash, lambda })
        }
        Some("mdi") => {
            eta.sort_by_key(|(i, _)| *i);
            h.sort_by_key(|(g, _)| *g);
            if eta.is_empty() || h.is_empty() {
                return Err(CertFileError("missing eta or h blocks".into()));
            }
            if eta.iter().enumerate().any(|(k, (i, _))| k != *i)
                || h.iter().enumerate().any(|(k, (g, _))| k != *g)
            {
                return Err(CertFileError("non-contiguous eta/h indices".into()));
            }
            Ok(ParsedCertificate::Mdi {
                model_hash,
                eta: eta.into_iter().map(|(_, r)| r).collect(),
                h: h.into_iter().map(|(_, op)| op).collect(),
            })
        }
        other => Err(CertFileError(format!("unknown protocol {other:?}"))),
    }
}

/// Binds a parsed SI certificate to a model: the hash must match and the
/// operator inequalities are re-verified from scratch. The multipliers are
/// *not* repaired here — a saved certificate must stand as-is.
pub fn bind_si_certificate(
    model: &SiModel,
    parsed: &ParsedCertificate,
) -> Result<SiDualCertificate, CertFileError> {
    let ParsedCertificate::Si { model_hash, lambda } = parsed else {
        return Err(CertFileError("certificate is not an SI certificate".into()));
    };
    if *model_hash != si_model_hash(model) {
        return Err(CertFileError("model hash mismatch: wrong model for this certificate".into()));
    }
    let cert = SiDualCertificate { lambda: lambda.clone(), repaired: false, worst_margin: 0.0 };
    let margin = verify_si_inequalities(model, &cert)
        .map_err(|e| CertFileError(format!("verification failed: {e}")))?;
    if margin > 1e-12 {
        return Err(CertFileError(format!("certificate is unsound: margin {margin:e} > 0")));
    }
    Ok(SiDualCertificate { lambda: lambda.clone(), repaired: false, worst_margin: margin })
}

/// Binds a parsed MDI certificate to a model; see [`bind_si_certificate`].
pub fn bind_mdi_certificate(
    model: &MdiModel,
    parsed: &ParsedCertificate,
) -> Result<MdiDualCertificate, CertFileError> {
    let ParsedCertificate::Mdi { model_hash, eta, h } = parsed else {
        return Err(CertFileError("certificate is not an MDI certificate".into()));
    };
    if *model_hash != mdi_model_hash(model) {
        return Err(CertFileError("model hash mismatch: wrong model for this certificate".into()));
    }
    let cert = MdiDualCertificate {
        eta: eta.clone(),
        h: h.clone(),
        repaired: false,
        worst_margin: 0.0,
    };
    let margin = verify_mdi_inequalities(model, &cert)
        .map_err(|e| CertFileError(format!("verification failed: {e}")))?;
    if margin > 1e-12 {
        return Err(CertFileError(format!("certificate is unsound: margin {margin:e} > 0")));
    }
    Ok(MdiDualCertificate { eta: eta.clone(), h: h.clone(), repaired: false, worst_margin: margin })
}

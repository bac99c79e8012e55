//! Batch front-end for the certification toolkit: configuration files,
//! single-point certification, loss sweeps with optional (mu, p_sig)
//! optimization, CSV output, and certificate files for the
//! fix-then-measure workflow.

pub mod apply;
pub mod certfile;
pub mod config;
pub mod pipeline;

#[cfg(test)]
mod tests {
    use crate::config::{LossSpec, Protocol, RunConfig, Setting};
    use crate::pipeline::{certify_once, sweep_csv, PointParams, SweepRecord};

    const BASE: &str = r#"
protocol = "si"
n_tot = 1000000000000
epsilon = 1e-10
p_d = 1e-8
p_z = 0.5
p_s = 0.5
mu = 0.1
p_sig = 0.9
loss_db = 0.0
"#;

    #[test]
    fn config_round_trip() {
        let config = RunConfig::parse(BASE).unwrap();
        assert_eq!(config.protocol, Protocol::Si);
        assert_eq!(config.mu, Setting::Fixed(0.1));
        assert_eq!(config.loss_db, LossSpec::Single(0.0));
        let text = config.to_toml();
        let reparsed = RunConfig::parse(&text).unwrap();
        assert_eq!(config, reparsed);
        assert_eq!(text, reparsed.to_toml());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{BASE}\np_dd = 0.1\n");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn optimize_keyword_parses() {
        let text = BASE.replace("mu = 0.1", "mu = \"optimize\"");
        let config = RunConfig::parse(&text).unwrap();
        assert!(config.mu.is_optimize());
        let bad = BASE.replace("mu = 0.1", "mu = \"optimise\"");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn loss_range_points() {
        let spec = LossSpec::Range { start: 0.0, stop: 30.0, step: 1.0 };
        let pts = spec.points().unwrap();
        assert_eq!(pts.len(), 31);
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[30], 30.0);
        assert!(LossSpec::Range { start: 5.0, stop: 1.0, step: 1.0 }.points().is_err());
        assert!(LossSpec::Range { start: 0.0, stop: 1.0, step: 0.0 }.points().is_err());
    }

    #[test]
    fn certify_once_si_baseline() {
        let config = RunConfig::parse(BASE).unwrap();
        let pp = PointParams::from_config(&config);
        let rec = certify_once(&pp, 0.1, 0.9, 0.0).unwrap();
        assert!(rec.n_fin > 0, "N_fin = {}", rec.n_fin);
        assert!(rec.p_guess_nominal > 0.0 && rec.p_guess_nominal < 1.0);
        assert!(rec.dual_objective >= rec.p_guess_nominal - 1e-7);
        // epsilon monotonicity at the same point.
        let pp_loose = PointParams { epsilon: 0.999999, ..pp.clone() };
        let rec_loose = certify_once(&pp_loose, 0.1, 0.9, 0.0).unwrap();
        assert!(rec_loose.n_fin >= rec.n_fin);
    }

    #[test]
    fn certify_once_infinite_loss_yields_zero() {
        let config = RunConfig::parse(BASE).unwrap();
        let pp = PointParams::from_config(&config);
        // 200 dB: eta_ch = 1e-20, the no-click outcome saturates.
        let rec = certify_once(&pp, 0.1, 0.9, 200.0).unwrap();
        assert!(rec.p_guess_nominal > 1.0 - 1e-3);
        assert_eq!(rec.n_fin, 0);
    }

    #[test]
    fn csv_header_is_pinned() {
        assert_eq!(
            SweepRecord::CSV_HEADER,
            "loss_db,eta_ch,mu_used,p_sig_used,p_guess_nominal,dual_objective,delta,\
             n_guess_upper,n_fin,rate_total,rate_per_signal,repaired,epsilon"
                .replace(" ", "")
                .as_str()
        );
        let rows = sweep_csv(&[]);
        assert!(rows.starts_with(SweepRecord::CSV_HEADER));
        assert!(rows.ends_with('\n'));
    }
}

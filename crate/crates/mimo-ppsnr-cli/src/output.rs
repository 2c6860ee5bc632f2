//! CSV rendering and console summary for curve runs.
//!
//! The CSV is plain comma-separated with a `#`-prefixed header block that
//! records the tool version, the fully resolved configuration of every
//! variant, and the seed, so any published number can be regenerated. No
//! timestamps or host details: output is byte-identical for a fixed seed.

use mimo_ppsnr::sim::{BerCurvePoint, CeMode, LinkConfig, SYMBOL_ENERGY};

use crate::config::{RunPlan, RunVariant};

pub const CSV_HEADER: &str = "preset,n_t,n_r,modulation,ce_mode,sigma_e,ebn0_db,ber_sim,ber_analytic,ci95,bits_total,mean_ppsnr_db_per_stream";

/// Effective per-entry estimation-error standard deviation at one grid
/// point (SNR-dependent for ML training).
fn sigma_e_at(cfg: &LinkConfig, ebn0_db: f64) -> f64 {
    cfg.effective_sigma_e2(SYMBOL_ENERGY, cfg.n0(ebn0_db))
        .map(f64::sqrt)
        .unwrap_or(f64::NAN)
}

fn variant_header_line(v: &RunVariant) -> String {
    let cfg = &v.cfg;
    let snr = cfg
        .snr_grid_db
        .iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(" ");
    let sigma = match cfg.ce_mode {
        CeMode::FixedSigma(se) => format!("{se:.6}"),
        _ => "-".to_string(),
    };
    format!(
        "# config preset={} nt={} nr={} ntr={} mod={} ce={} sigma-e={} channels={} packets={} symbols={} seed={} ce-var-nt={} snr-db=[{}]",
        v.preset_name,
        cfg.n_t,
        cfg.n_r,
        cfg.n_tr,
        cfg.modulation.name(),
        cfg.ce_mode.name(),
        sigma,
        cfg.n_channels,
        cfg.n_packets,
        cfg.n_symbols_per_packet,
        cfg.seed,
        cfg.sigma_e2_scaled_by_nt,
        snr
    )
}

pub fn render_csv(plan: &RunPlan, results: &[Vec<BerCurvePoint>]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# mimo-ppsnr {}\n# seed={} scale={}\n",
        env!("CARGO_PKG_VERSION"),
        plan.seed,
        plan.scale_name
    ));
    for v in &plan.variants {
        out.push_str(&variant_header_line(v));
        out.push('\n');
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (v, points) in plan.variants.iter().zip(results) {
        for p in points {
            let ppsnr = p
                .mean_ppsnr_db
                .iter()
                .map(|g| format!("{g:.4}"))
                .collect::<Vec<_>>()
                .join("|");
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.4},{:.6e},{:.6e},{:.6e},{},{}\n",
                v.preset_name,
                v.cfg.n_t,
                v.cfg.n_r,
                v.cfg.modulation.name(),
                v.cfg.ce_mode.name(),
                sigma_e_at(&v.cfg, p.ebn0_db),
                p.ebn0_db,
                p.ber_sim,
                p.ber_analytic,
                p.ci95_halfwidth,
                p.bits_total,
                ppsnr
            ));
        }
    }
    out
}

pub fn print_summary(plan: &RunPlan, results: &[Vec<BerCurvePoint>]) {
    for (v, points) in plan.variants.iter().zip(results) {
        println!("\n{}", v.label);
        println!(
            "{:>9} {:>13} {:>13} {:>9} {:>12} {:>9}",
            "Eb/N0 dB", "BER sim", "BER analytic", "ana/sim", "bits", "channels"
        );
        for p in points {
            let ratio = if p.ber_sim > 0.0 {
                format!("{:.3}", p.ber_analytic / p.ber_sim)
            } else {
                "-".to_string()
            };
            println!(
                "{:>9.1} {:>13.4e} {:>13.4e} {:>9} {:>12} {:>9}",
                p.ebn0_db, p.ber_sim, p.ber_analytic, ratio, p.bits_total, p.channels_used
            );
        }
    }
}

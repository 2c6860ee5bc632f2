//! The `analytics` subcommand: closed-form PPSNR for an explicit channel
//! matrix, no simulation involved.

use anyhow::{bail, Context};
use mimo_ppsnr::cxmat::CMat;
use mimo_ppsnr::mmse::ppsnr_estimated;
use num_complex::Complex64;

use crate::AnalyticsArgs;

/// Parses one complex literal: `a`, `bi`, `a+bi`, `a-bi` (also `i`, `-i`).
pub fn parse_complex(raw: &str) -> anyhow::Result<Complex64> {
    let s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        bail!("empty complex literal");
    }
    let parse_imag_coeff = |txt: &str| -> anyhow::Result<f64> {
        match txt {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            other => other
                .parse::<f64>()
                .with_context(|| format!("bad imaginary part `{other}`")),
        }
    };
    if let Some(body) = s.strip_suffix(['i', 'j']) {
        // Split into real and imaginary parts at the last sign that is not
        // an exponent sign and not leading.
        let split = body
            .char_indices()
            .skip(1)
            .filter(|&(idx, c)| {
                (c == '+' || c == '-') && !matches!(body.as_bytes()[idx - 1], b'e' | b'E')
            })
            .map(|(idx, _)| idx)
            .last();
        match split {
            Some(idx) => {
                let re: f64 = body[..idx]
                    .parse()
                    .with_context(|| format!("bad real part `{}`", &body[..idx]))?;
                let im = parse_imag_coeff(&body[idx..])?;
                Ok(Complex64::new(re, im))
            }
            None => Ok(Complex64::new(0.0, parse_imag_coeff(body)?)),
        }
    } else {
        let re: f64 = s
            .parse()
            .with_context(|| format!("bad complex literal `{raw}`"))?;
        Ok(Complex64::new(re, 0.0))
    }
}

/// Parses a matrix literal: rows separated by ';', entries by ','.
pub fn parse_matrix(raw: &str) -> anyhow::Result<CMat> {
    let rows: Vec<&str> = raw.split(';').collect();
    let mut data = Vec::new();
    let mut cols = None;
    for (r, row) in rows.iter().enumerate() {
        let entries: Vec<&str> = row.split(',').collect();
        match cols {
            None => cols = Some(entries.len()),
            Some(c) if c != entries.len() => {
                bail!("row {} has {} entries, expected {c}", r + 1, entries.len())
            }
            _ => {}
        }
        for e in entries {
            data.push(parse_complex(e).with_context(|| format!("row {}", r + 1))?);
        }
    }
    let cols = cols.unwrap_or(0);
    if cols == 0 {
        bail!("empty channel matrix");
    }
    CMat::new(rows.len(), cols, data).map_err(|e| anyhow::anyhow!("invalid channel matrix: {e}"))
}

pub fn run(args: &AnalyticsArgs) -> anyhow::Result<()> {
    let h = parse_matrix(&args.h)?;
    if !(args.es > 0.0) {
        bail!("--es must be positive");
    }
    if !(args.sigma_e2 >= 0.0) {
        bail!("--sigma-e2 must be non-negative");
    }
    let es = args.es;
    let n0 = es / 10f64.powf(args.es_n0_db / 10.0);
    let report = ppsnr_estimated(&h, es, n0, args.sigma_e2)
        .map_err(|e| anyhow::anyhow!("analysis failed: {e}"))?;

    println!(
        "channel {}x{}, Es/N0 = {:.4} dB (Es = {es}, N0 = {n0:.6e}), sigma_e^2 = {:.6e}",
        h.rows(),
        h.cols(),
        args.es_n0_db,
        args.sigma_e2
    );
    println!(
        "{:>6} {:>14} {:>14} {:>14} {:>14}",
        "stream", "ppsnr_est", "ppsnr_est_db", "ppsnr_perfect", "noise_total"
    );
    for k in 0..h.cols() {
        println!(
            "{:>6} {:>14.6e} {:>14.4} {:>14.6e} {:>14.6e}",
            k,
            report.gamma_est[k],
            10.0 * report.gamma_est[k].log10(),
            report.gamma_perfect[k],
            report.total_noise[k]
        );
    }
    Ok(())
}

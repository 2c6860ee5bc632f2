//! Monte Carlo link engine: packet transmission through flat Rayleigh
//! channels, per-packet channel estimation, detection with the exact
//! perturbed MMSE filter, bit-error counting, and aggregation of the
//! analytic PPSNR-based BER over channel ensembles.
//!
//! Determinism: channels are processed in fixed-size chunks whose members
//! run in parallel; every random draw is keyed by
//! `(seed, SNR-point × channel, packet, purpose)`, and per-point reductions
//! happen in channel order. Output is therefore bit-identical for a fixed
//! seed regardless of worker count, including the early-termination
//! decision, which is taken only at chunk boundaries.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{
    build_training, ce_noise_variance, draw_estimation_error, draw_rayleigh, ml_estimate,
    simulate_training_rx, ChannelDraw, DrawPurpose, RngStream,
};
use crate::cxmat::CMat;
use crate::mmse::{mmse_detector, ppsnr_estimated};
use crate::modem::{Constellation, Modulation};
use crate::{Error, Result};

/// Per-antenna symbol energy used throughout the simulator; SNRs are set by
/// scaling the noise variance.
pub const SYMBOL_ENERGY: f64 = 1.0;

/// Channels processed per parallel batch; early termination is evaluated
/// after each batch so the decision is schedule-independent.
const CHANNEL_CHUNK: usize = 16;

/// How the receiver obtains its channel estimate for each packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CeMode {
    /// Genie-aided `Ĥ = H`.
    PerfectCsi,
    /// Per-packet maximum-likelihood estimation from orthogonal training.
    MlTraining,
    /// Additive error of fixed standard deviation `σe` per entry,
    /// independent of SNR.
    FixedSigma(f64),
}

impl CeMode {
    pub fn name(&self) -> &'static str {
        match self {
            CeMode::PerfectCsi => "perfect",
            CeMode::MlTraining => "ml",
            CeMode::FixedSigma(_) => "fixed",
        }
    }
}

/// Full description of one simulated link configuration.
#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub n_t: usize,
    pub n_r: usize,
    /// Training symbols per packet (used by [`CeMode::MlTraining`]).
    pub n_tr: usize,
    pub modulation: Modulation,
    /// Eb/N0 grid in dB, per transmit antenna.
    pub snr_grid_db: Vec<f64>,
    pub ce_mode: CeMode,
    pub n_channels: usize,
    pub n_packets: usize,
    /// Symbol vectors (channel uses) per packet.
    pub n_symbols_per_packet: usize,
    pub seed: u64,
    /// Use the per-antenna variant `σe² = N_t·N0/(N_tr·Es)` of the ML
    /// estimation-error variance instead of the default `N0/(N_tr·Es)`.
    pub sigma_e2_scaled_by_nt: bool,
    /// Stop adding channel batches to an SNR point once this many bit
    /// errors have accumulated.
    pub max_bit_errors: Option<u64>,
}

impl LinkConfig {
    /// Desk-scale configuration: 200 channels x 50 packets x 500 symbol
    /// vectors, early termination at 10^4 bit errors.
    pub fn desk(
        n_t: usize,
        n_r: usize,
        modulation: Modulation,
        ce_mode: CeMode,
        snr_grid_db: Vec<f64>,
        seed: u64,
    ) -> Self {
        Self {
            n_t,
            n_r,
            n_tr: 4,
            modulation,
            snr_grid_db,
            ce_mode,
            n_channels: 200,
            n_packets: 50,
            n_symbols_per_packet: 500,
            seed,
            sigma_e2_scaled_by_nt: false,
            max_bit_errors: Some(10_000),
        }
    }

    /// Full-scale variant: 1000 channels x 500 packets x 2000 symbol
    /// vectors.
    pub fn paper_scale(mut self) -> Self {
        self.n_channels = 1000;
        self.n_packets = 500;
        self.n_symbols_per_packet = 2000;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t < 1 || self.n_r < 1 {
            return Err(Error::InvalidArgument(format!(
                "need at least one antenna on each side, got {}x{}",
                self.n_t, self.n_r
            )));
        }
        if self.n_channels < 1 || self.n_packets < 1 || self.n_symbols_per_packet < 1 {
            return Err(Error::InvalidArgument(
                "channel, packet and symbol counts must be at least 1".into(),
            ));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidArgument("SNR grid is empty".into()));
        }
        if self.snr_grid_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "SNR grid has non-finite entries".into(),
            ));
        }
        match self.ce_mode {
            CeMode::MlTraining => {
                if self.n_tr < self.n_t {
                    return Err(Error::InvalidArgument(format!(
                        "ML training needs n_tr >= n_t, got n_tr={} < n_t={}",
                        self.n_tr, self.n_t
                    )));
                }
                if self.n_t > 4 || self.n_tr > 4 {
                    return Err(Error::InvalidArgument(format!(
                        "ML training supports at most 4 streams/training symbols, got n_t={}, n_tr={}",
                        self.n_t, self.n_tr
                    )));
                }
            }
            CeMode::FixedSigma(se) => {
                if !(se >= 0.0) || !se.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "fixed estimation-error std must be finite and non-negative, got {se}"
                    )));
                }
            }
            CeMode::PerfectCsi => {}
        }
        Ok(())
    }

    /// `Es/N0` (linear, per transmit antenna) for an Eb/N0 grid point:
    /// `Es/N0 = Eb/N0 · log2(M)`.
    pub fn es_n0_linear(&self, ebn0_db: f64) -> f64 {
        10f64.powf(ebn0_db / 10.0) * self.modulation.bits_per_symbol() as f64
    }

    /// Noise variance for an Eb/N0 grid point at `Es = SYMBOL_ENERGY`.
    pub fn n0(&self, ebn0_db: f64) -> f64 {
        SYMBOL_ENERGY / self.es_n0_linear(ebn0_db)
    }

    /// Estimation-error variance the analysis should assume at this
    /// operating point.
    pub fn effective_sigma_e2(&self, es: f64, n0: f64) -> Result<f64> {
        match self.ce_mode {
            CeMode::PerfectCsi => Ok(0.0),
            CeMode::FixedSigma(se) => Ok(se * se),
            CeMode::MlTraining => {
                let base = ce_noise_variance(self.n_tr, es, n0)?;
                Ok(if self.sigma_e2_scaled_by_nt {
                    base * self.n_t as f64
                } else {
                    base
                })
            }
        }
    }
}

/// Addresses the random substreams of one packet.
#[derive(Debug, Clone, Copy)]
pub struct PacketKey {
    pub seed: u64,
    pub channel: u64,
    pub packet: u64,
}

impl PacketKey {
    fn stream(&self, purpose: DrawPurpose) -> RngStream {
        RngStream::new(self.seed, self.channel, self.packet, purpose)
    }
}

/// Produces the receiver's channel estimate for one packet according to the
/// configured estimation mode.
pub fn draw_channel_estimate(
    h: &CMat,
    cfg: &LinkConfig,
    es: f64,
    n0: f64,
    key: PacketKey,
) -> Result<ChannelDraw> {
    match cfg.ce_mode {
        CeMode::PerfectCsi => Ok(ChannelDraw::perfect(h.clone())),
        CeMode::MlTraining => {
            let training = build_training(cfg.n_t, cfg.n_tr, es)?;
            let mut rng = key.stream(DrawPurpose::TrainingNoise);
            let y_tr = simulate_training_rx(h, &training, n0, &mut rng);
            let h_hat = ml_estimate(&y_tr, &training)?;
            let sigma_e2 = cfg.effective_sigma_e2(es, n0)?;
            Ok(ChannelDraw::from_estimate(h.clone(), h_hat, sigma_e2))
        }
        CeMode::FixedSigma(se) => {
            let mut rng = key.stream(DrawPurpose::EstimationError);
            let delta_h = draw_estimation_error(cfg.n_r, cfg.n_t, se * se, &mut rng)?;
            Ok(ChannelDraw::from_error(h.clone(), delta_h, se * se))
        }
    }
}

/// Transmits one packet through `H` and counts bit errors.
///
/// The receiver recomputes its MMSE filter from the packet's channel
/// estimate exactly (no perturbation approximation) and hard-slices the
/// filter output.
pub fn run_packet(h: &CMat, cfg: &LinkConfig, ebn0_db: f64, key: PacketKey) -> Result<(u64, u64)> {
    let es = SYMBOL_ENERGY;
    let n0 = cfg.n0(ebn0_db);
    let estimate = draw_channel_estimate(h, cfg, es, n0, key)?;
    let w_hat = mmse_detector(&estimate.h_hat, es, n0)?;
    // The MMSE output is biased toward zero; the receiver rescales each
    // stream by its own estimate of the signal gain (Ŵ·Ĥ)_kk before
    // slicing, otherwise the outer constellation rings of QAM are squeezed
    // across decision boundaries.
    let gain_hat = w_hat.w().matmul(&estimate.h_hat)?;
    let gains: Vec<f64> = (0..cfg.n_t)
        .map(|k| {
            let g = gain_hat.get(k, k).re;
            if g > 1e-12 {
                g
            } else {
                1.0
            }
        })
        .collect();
    let constellation = Constellation::new(cfg.modulation, es);
    let bps = constellation.bits_per_symbol();
    let bits_per_use = cfg.n_t * bps;
    let sigma_n = (n0 / 2.0).sqrt();

    let mut bit_rng = key.stream(DrawPurpose::DataBits);
    let mut noise_rng = key.stream(DrawPurpose::DataNoise);
    let mut bits = vec![0u8; bits_per_use];
    let mut errors = 0u64;
    for _ in 0..cfg.n_symbols_per_packet {
        for b in &mut bits {
            *b = bit_rng.next_bit();
        }
        let x = constellation.modulate(&bits)?;
        let mut y = h.mul_vec(&x);
        for y_i in &mut y {
            *y_i += Complex64::new(
                sigma_n * noise_rng.next_normal(),
                sigma_n * noise_rng.next_normal(),
            );
        }
        let mut x_tilde = w_hat.w().mul_vec(&y);
        for (z, g) in x_tilde.iter_mut().zip(&gains) {
            *z /= g;
        }
        let decided = constellation.demodulate(&x_tilde);
        errors += bits
            .iter()
            .zip(&decided)
            .filter(|(tx, rx)| tx != rx)
            .count() as u64;
    }
    Ok((errors, (cfg.n_symbols_per_packet * bits_per_use) as u64))
}

/// Analytic BER prediction for one channel realization: the per-stream
/// closed-form PPSNR fed through the AWGN BER formula of the configured
/// constellation, averaged over streams.
pub fn analytic_ber_for_channel(h: &CMat, cfg: &LinkConfig, ebn0_db: f64) -> Result<f64> {
    Ok(channel_analytics(h, cfg, ebn0_db)?.0)
}

fn channel_analytics(h: &CMat, cfg: &LinkConfig, ebn0_db: f64) -> Result<(f64, Vec<f64>)> {
    let es = SYMBOL_ENERGY;
    let n0 = cfg.n0(ebn0_db);
    let sigma_e2 = cfg.effective_sigma_e2(es, n0)?;
    let report = ppsnr_estimated(h, es, n0, sigma_e2)?;
    let mut acc = 0.0;
    for &gamma in &report.gamma_est {
        acc += cfg.modulation.ber_awgn(gamma)?;
    }
    Ok((acc / cfg.n_t as f64, report.gamma_est))
}

/// One point of a BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCurvePoint {
    pub ebn0_db: f64,
    pub ber_sim: f64,
    pub ber_analytic: f64,
    pub bit_errors: u64,
    pub bits_total: u64,
    /// 95% binomial confidence half-width `1.96·√(p(1−p)/n)`.
    pub ci95_halfwidth: f64,
    /// Channel-ensemble mean of the per-stream closed-form PPSNR, in dB.
    pub mean_ppsnr_db: Vec<f64>,
    /// Channels actually simulated (fewer than configured if the
    /// bit-error cap was reached early).
    pub channels_used: usize,
}

struct ChannelOutcome {
    bit_errors: u64,
    bits: u64,
    ber_analytic: f64,
    gamma_est: Vec<f64>,
}

fn run_channel(cfg: &LinkConfig, ch_idx: usize, ebn0_db: f64) -> Result<ChannelOutcome> {
    // Channel keys do not depend on the SNR point: the whole grid is swept
    // over one common channel ensemble (and common per-packet draws), which
    // removes ensemble noise from point-to-point comparisons.
    let channel_key = ch_idx as u64;
    let mut rng = RngStream::new(cfg.seed, channel_key, 0, DrawPurpose::ChannelMatrix);
    let h = draw_rayleigh(cfg.n_r, cfg.n_t, &mut rng);
    let mut bit_errors = 0u64;
    let mut bits = 0u64;
    for packet in 0..cfg.n_packets {
        let key = PacketKey {
            seed: cfg.seed,
            channel: channel_key,
            packet: packet as u64,
        };
        let (e, b) = run_packet(&h, cfg, ebn0_db, key)?;
        bit_errors += e;
        bits += b;
    }
    let (ber_analytic, gamma_est) = channel_analytics(&h, cfg, ebn0_db)?;
    Ok(ChannelOutcome {
        bit_errors,
        bits,
        ber_analytic,
        gamma_est,
    })
}

/// Runs the full BER sweep: for every SNR point, simulated BER over the
/// channel/packet ensemble and the analytic BER averaged over the same
/// channels.
pub fn run_curve(cfg: &LinkConfig) -> Result<Vec<BerCurvePoint>> {
    cfg.validate()?;
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for &ebn0_db in &cfg.snr_grid_db {
        let mut bit_errors = 0u64;
        let mut bits_total = 0u64;
        let mut analytic_sum = 0.0;
        let mut gamma_sums = vec![0.0; cfg.n_t];
        let mut channels_used = 0usize;

        let mut start = 0;
        'chunks: while start < cfg.n_channels {
            let end = (start + CHANNEL_CHUNK).min(cfg.n_channels);
            let outcomes: Vec<Result<ChannelOutcome>> = (start..end)
                .into_par_iter()
                .map(|ci| run_channel(cfg, ci, ebn0_db))
                .collect();
            // Chunks are computed in parallel but consumed in channel
            // order; once the error cap is reached the remainder of the
            // chunk is dropped, so the consumed set is the same no matter
            // how many workers ran.
            for outcome in outcomes {
                let o = outcome?;
                bit_errors += o.bit_errors;
                bits_total += o.bits;
                analytic_sum += o.ber_analytic;
                for (acc, g) in gamma_sums.iter_mut().zip(&o.gamma_est) {
                    *acc += g;
                }
                channels_used += 1;
                if cfg.max_bit_errors.is_some_and(|cap| bit_errors >= cap) {
                    break 'chunks;
                }
            }
            start = end;
        }

        let ber_sim = bit_errors as f64 / bits_total as f64;
        let ci95_halfwidth = 1.96 * (ber_sim * (1.0 - ber_sim) / bits_total as f64).sqrt();
        points.push(BerCurvePoint {
            ebn0_db,
            ber_sim,
            ber_analytic: analytic_sum / channels_used as f64,
            bit_errors,
            bits_total,
            ci95_halfwidth,
            mean_ppsnr_db: gamma_sums
                .iter()
                .map(|s| 10.0 * (s / channels_used as f64).log10())
                .collect(),
            channels_used,
        });
    }
    Ok(points)
}

/// Empirical per-stream SINR at the detector output, measured against the
/// true-channel signal coefficient, alongside the closed-form prediction.
#[derive(Debug, Clone)]
pub struct SinrEstimate {
    /// Measured SINR per stream (linear).
    pub sinr: Vec<f64>,
    /// Closed-form PPSNR per stream (linear).
    pub predicted: Vec<f64>,
    pub n_trials: usize,
}

/// Measures the post-detection SINR over `n_trials` independent draws of
/// (channel estimate, symbol vector, noise), with the signal taken as the
/// `(WH)_kk·x_k` component of the detector output. Needs at least 10^3
/// trials for the power estimates to be meaningful.
pub fn empirical_sinr(
    h: &CMat,
    cfg: &LinkConfig,
    ebn0_db: f64,
    n_trials: usize,
    seed: u64,
) -> Result<SinrEstimate> {
    assert!(n_trials >= 1000, "empirical SINR needs at least 1000 trials");
    let es = SYMBOL_ENERGY;
    let n0 = cfg.n0(ebn0_db);
    let d = mmse_detector(h, es, n0)?;
    let wh = d.w().matmul(h)?;
    let constellation = Constellation::new(cfg.modulation, es);
    let bps = constellation.bits_per_symbol();
    let sigma_n = (n0 / 2.0).sqrt();

    let mut err_power = vec![0.0; cfg.n_t];
    let mut bits = vec![0u8; cfg.n_t * bps];
    for trial in 0..n_trials {
        let key = PacketKey {
            seed,
            channel: 0,
            packet: trial as u64,
        };
        let estimate = draw_channel_estimate(h, cfg, es, n0, key)?;
        let w_hat = mmse_detector(&estimate.h_hat, es, n0)?;
        let mut bit_rng = key.stream(DrawPurpose::DataBits);
        let mut noise_rng = key.stream(DrawPurpose::DataNoise);
        for b in &mut bits {
            *b = bit_rng.next_bit();
        }
        let x = constellation.modulate(&bits)?;
        let mut y = h.mul_vec(&x);
        for y_i in &mut y {
            *y_i += Complex64::new(
                sigma_n * noise_rng.next_normal(),
                sigma_n * noise_rng.next_normal(),
            );
        }
        let x_tilde = w_hat.w().mul_vec(&y);
        for k in 0..cfg.n_t {
            err_power[k] += (x_tilde[k] - wh.get(k, k) * x[k]).norm_sqr();
        }
    }

    let sigma_e2 = cfg.effective_sigma_e2(es, n0)?;
    let predicted = ppsnr_estimated(h, es, n0, sigma_e2)?.gamma_est;
    let sinr = (0..cfg.n_t)
        .map(|k| es * wh.get(k, k).norm_sqr() / (err_power[k] / n_trials as f64))
        .collect();
    Ok(SinrEstimate {
        sinr,
        predicted,
        n_trials,
    })
}

//! Ensemble-level statistical properties of the analysis: independence
//! structure of the estimation error, vanishing cross terms, agreement of
//! the closed-form PPSNR with measured SINR, monotonicity, and floor
//! behavior.

use mimo_ppsnr::channel::{
    build_training, draw_estimation_error, draw_rayleigh, ml_estimate, simulate_training_rx,
    DrawPurpose, RngStream,
};
use mimo_ppsnr::cxmat::CMat;
use mimo_ppsnr::mmse::{delta_w, mmse_detector, ppsnr_estimated};
use mimo_ppsnr::modem::Modulation;
use mimo_ppsnr::sim::{empirical_sinr, run_curve, CeMode, LinkConfig, SYMBOL_ENERGY};
use num_complex::Complex64;

fn rand_channel(n_r: usize, n_t: usize, tag: u64) -> CMat {
    let mut rng = RngStream::new(777, tag, 0, DrawPurpose::ChannelMatrix);
    draw_rayleigh(n_r, n_t, &mut rng)
}

fn base_cfg(n_t: usize, n_r: usize, modulation: Modulation, ce_mode: CeMode) -> LinkConfig {
    LinkConfig {
        n_t,
        n_r,
        n_tr: 4,
        modulation,
        snr_grid_db: vec![10.0],
        ce_mode,
        n_channels: 1,
        n_packets: 1,
        n_symbols_per_packet: 1,
        seed: 0,
        sigma_e2_scaled_by_nt: false,
        max_bit_errors: None,
    }
}

#[test]
fn ml_estimation_error_independent_of_channel() {
    // Correlation between ΔH entries and H entries over fresh (H, noise)
    // pairs should vanish.
    let es = 1.0;
    let n0 = 0.25;
    let training = build_training(2, 4, es).unwrap();
    let n = 100_000;
    let mut cross = Complex64::ZERO;
    let mut h_pow = 0.0;
    let mut e_pow = 0.0;
    for i in 0..n {
        let mut rng_h = RngStream::new(31, i, 0, DrawPurpose::ChannelMatrix);
        let h = draw_rayleigh(2, 2, &mut rng_h);
        let mut rng_n = RngStream::new(31, i, 0, DrawPurpose::TrainingNoise);
        let y = simulate_training_rx(&h, &training, n0, &mut rng_n);
        let dh = ml_estimate(&y, &training).unwrap().sub(&h).unwrap();
        for (e, hv) in dh.data().iter().zip(h.data()) {
            cross += e * hv.conj();
            h_pow += hv.norm_sqr();
            e_pow += e.norm_sqr();
        }
    }
    let corr = cross.norm() / (h_pow * e_pow).sqrt();
    assert!(corr < 0.01, "ΔH/H correlation {corr}");
}

#[test]
fn cross_terms_of_noise_covariance_vanish() {
    // E[W·n·n^H·ΔW^H] should be negligible next to the thermal term.
    let h = rand_channel(4, 4, 1);
    let es = 1.0;
    let n0 = 0.1;
    let sigma_e2 = 1e-2;
    let d = mmse_detector(&h, es, n0).unwrap();
    let thermal = (d.w() * &d.w().hermitian()).scale(n0);

    let n = 100_000;
    let sigma_n = (n0 / 2.0f64).sqrt();
    let mut acc = CMat::zeros(4, 4);
    for i in 0..n {
        let mut rng_e = RngStream::new(32, i, 0, DrawPurpose::EstimationError);
        let dh = draw_estimation_error(4, 4, sigma_e2, &mut rng_e).unwrap();
        let dw = delta_w(&h, &dh, &d);
        let mut rng_n = RngStream::new(32, i, 0, DrawPurpose::DataNoise);
        let noise: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(sigma_n * rng_n.next_normal(), sigma_n * rng_n.next_normal()))
            .collect();
        let wn = d.w().mul_vec(&noise);
        let dwn = dw.mul_vec(&noise);
        // (W n)(ΔW n)^H accumulated entrywise.
        let term = CMat::from_fn(4, 4, |r, c| wn[r] * dwn[c].conj());
        acc = acc.add(&term).unwrap();
    }
    let mean = acc.scale(1.0 / n as f64);
    let rel = mean.frob_norm() / thermal.frob_norm();
    assert!(rel < 0.02, "cross-term level {rel} of thermal");
}

#[test]
fn perfect_csi_ppsnr_matches_measured_sinr() {
    // With σe = 0 the measured post-detection SINR is the perfect-CSI PPSNR.
    let h = rand_channel(4, 2, 2);
    let cfg = base_cfg(2, 4, Modulation::Qpsk, CeMode::PerfectCsi);
    let ebn0_db = 10.0;
    let est = empirical_sinr(&h, &cfg, ebn0_db, 100_000, 91).unwrap();
    let d = mmse_detector(&h, SYMBOL_ENERGY, cfg.n0(ebn0_db)).unwrap();
    let reference = mimo_ppsnr::mmse::ppsnr_perfect(&d, &h);
    for (meas, pred) in est.sinr.iter().zip(&reference) {
        let rel = (meas - pred).abs() / pred;
        assert!(rel < 0.02, "measured {meas}, closed form {pred}");
    }
}

#[test]
fn estimated_ppsnr_matches_measured_sinr_fixed_sigma() {
    let h = rand_channel(4, 4, 3);
    let sigma_e = 1e-3f64.sqrt();
    let cfg = base_cfg(4, 4, Modulation::Qpsk, CeMode::FixedSigma(sigma_e));
    let est = empirical_sinr(&h, &cfg, 12.0, 100_000, 92).unwrap();
    for (meas, pred) in est.sinr.iter().zip(&est.predicted) {
        let rel = (meas - pred).abs() / pred;
        assert!(rel < 0.05, "measured {meas}, closed form {pred}");
    }
}

#[test]
fn estimated_ppsnr_validity_at_percent_level_error() {
    // Top of the stated validity range, σe² = 1e-2, on the 4x5 geometry the
    // constant-σe experiments use. The residual deviation is the genuinely
    // neglected second-order term, which grows with channel conditioning;
    // a typical channel sits well inside 5% and even unlucky draws stay
    // single-digit.
    let mut worst_per_channel = Vec::new();
    for tag in [4u64, 14, 24, 34, 44] {
        let h = rand_channel(5, 4, tag);
        let cfg = base_cfg(4, 5, Modulation::Qpsk, CeMode::FixedSigma(0.1));
        let est = empirical_sinr(&h, &cfg, 15.0, 100_000, 93).unwrap();
        let worst = est
            .sinr
            .iter()
            .zip(&est.predicted)
            .map(|(m, p)| ((m - p) / p).abs())
            .fold(0.0f64, f64::max);
        assert!(
            worst < 0.08,
            "channel {tag}: worst-stream deviation {worst}"
        );
        worst_per_channel.push(worst);
    }
    worst_per_channel.sort_by(f64::total_cmp);
    let median = worst_per_channel[worst_per_channel.len() / 2];
    assert!(median < 0.05, "median worst-stream deviation {median}");
}

#[test]
fn measured_sinr_decreases_with_sigma() {
    let h = rand_channel(4, 4, 5);
    let mut prev = vec![f64::INFINITY; 4];
    for &sigma_e in &[0.0, 0.05, 0.1] {
        let cfg = base_cfg(4, 4, Modulation::Qpsk, CeMode::FixedSigma(sigma_e));
        let est = empirical_sinr(&h, &cfg, 12.0, 20_000, 94).unwrap();
        for (now, before) in est.sinr.iter().zip(&prev) {
            assert!(now < before, "SINR did not drop when σe grew to {sigma_e}");
        }
        prev = est.sinr;
    }
}

#[test]
fn estimated_ppsnr_monotone_in_sigma_over_ensemble() {
    for tag in 0..100 {
        let h = rand_channel(4, 4, 100 + tag);
        let mut prev = vec![f64::INFINITY; 4];
        for &s2 in &[0.0, 1e-4, 1e-3, 1e-2] {
            let rep = ppsnr_estimated(&h, 1.0, 0.05, s2).unwrap();
            for (g, p) in rep.gamma_est.iter().zip(&prev) {
                assert!(*g <= p + 1e-12, "γ̃ grew with σe² = {s2}");
            }
            prev = rep.gamma_est;
        }
    }
}

#[test]
fn estimated_ppsnr_converges_to_floor_at_vanishing_noise() {
    // For fixed σe > 0 the PPSNR approaches a finite limit as N0 → 0.
    for tag in 0..20 {
        let h = rand_channel(5, 4, 200 + tag);
        let sigma_e2 = 0.01;
        let lo = ppsnr_estimated(&h, 1.0, 1e-6, sigma_e2).unwrap().gamma_est;
        let hi = ppsnr_estimated(&h, 1.0, 1e-8, sigma_e2).unwrap().gamma_est;
        for (a, b) in lo.iter().zip(&hi) {
            let ratio = a / b;
            assert!(
                (0.9..=1.1).contains(&ratio),
                "no SINR floor: ratio {ratio} on channel {tag}"
            );
        }
    }
}

#[test]
fn decoupled_streams_match_scalar_awgn() {
    // H = I₄ with perfect CSI behaves as four independent AWGN channels.
    let mut cfg = base_cfg(4, 4, Modulation::Bpsk, CeMode::PerfectCsi);
    cfg.n_channels = 1;
    cfg.n_packets = 40;
    cfg.n_symbols_per_packet = 2_000;
    cfg.snr_grid_db = vec![4.0];
    cfg.seed = 5150;
    // run_curve draws a random channel, so transmit manually over H = I.
    let h = CMat::identity(4);
    let ebn0_db = 4.0;
    let mut errors = 0u64;
    let mut bits = 0u64;
    for packet in 0..cfg.n_packets {
        let key = mimo_ppsnr::sim::PacketKey {
            seed: cfg.seed,
            channel: 0,
            packet: packet as u64,
        };
        let (e, b) = mimo_ppsnr::sim::run_packet(&h, &cfg, ebn0_db, key).unwrap();
        errors += e;
        bits += b;
    }
    let ber = errors as f64 / bits as f64;
    // MMSE biases the scalar gain but not the decision sign, so the
    // reference is plain BPSK at Es/N0.
    let p = Modulation::Bpsk
        .ber_awgn(cfg.es_n0_linear(ebn0_db))
        .unwrap();
    let sigma = (p * (1.0 - p) / bits as f64).sqrt();
    assert!(
        (ber - p).abs() < 3.0 * sigma,
        "BER {ber} vs scalar AWGN {p} (3σ = {})",
        3.0 * sigma
    );
}

#[test]
fn ml_training_shows_no_error_floor() {
    // With per-packet ML estimation the error variance shrinks with SNR, so
    // BER keeps falling: one decade down over a 10 dB span once the curve
    // reaches its asymptotic slope. Both points share the channel ensemble,
    // so the ratio is free of ensemble noise.
    let mut cfg = base_cfg(4, 4, Modulation::Qam16, CeMode::MlTraining);
    cfg.snr_grid_db = vec![25.0, 35.0];
    cfg.n_channels = 150;
    cfg.n_packets = 25;
    cfg.n_symbols_per_packet = 300;
    cfg.seed = 61;
    cfg.max_bit_errors = None;
    let points = run_curve(&cfg).unwrap();
    assert!(
        points[1].ber_sim > 1e-5,
        "top point unmeasurable: {}",
        points[1].ber_sim
    );
    assert!(
        points[1].ber_sim * 10.0 <= points[0].ber_sim,
        "floor suspected: {} -> {}",
        points[0].ber_sim,
        points[1].ber_sim
    );
}

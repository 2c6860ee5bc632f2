//! The `validate` subcommand: a fast battery of oracle and property checks
//! over the analysis chain, printing one PASS/FAIL line per check.

use mimo_ppsnr::channel::{
    build_training, ce_noise_variance, draw_estimation_error, draw_rayleigh, ml_estimate,
    simulate_training_rx, DrawPurpose, RngStream,
};
use mimo_ppsnr::cxmat::CMat;
use mimo_ppsnr::mmse::{cov_noise_term, cov_signal_term, delta_w, mmse_detector, ppsnr_estimated};
use mimo_ppsnr::modem::{q_function, Constellation, Modulation};
use num_complex::Complex64;

use crate::ValidateArgs;

type Check = (&'static str, fn(u64) -> Result<(), String>);

pub fn run(args: &ValidateArgs) -> anyhow::Result<()> {
    let checks: &[Check] = &[
        ("hpd-inverse-residual", check_hpd_inverse),
        ("training-orthogonality", check_training),
        ("q-function-quadrature", check_q_function),
        ("modem-round-trip", check_round_trip),
        ("awgn-ber-agreement", check_awgn_ber),
        ("estimation-error-identities", check_error_identities),
        ("delta-w-contraction", check_delta_w_contraction),
        ("covariance-term-oracles", check_cov_oracles),
        ("zero-error-collapse", check_zero_error_collapse),
        ("ml-variance-formula", check_ml_variance),
        ("closed-form-vs-measured-sinr", check_sinr),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match check(args.seed) {
            Ok(()) => println!("PASS {name}"),
            Err(reason) => {
                failures += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    if failures > 0 {
        anyhow::bail!("{failures} check(s) failed");
    }
    println!("all checks passed");
    Ok(())
}

fn rand_channel(n_r: usize, n_t: usize, seed: u64, tag: u64) -> CMat {
    let mut rng = RngStream::new(seed, tag, 0, DrawPurpose::ChannelMatrix);
    draw_rayleigh(n_r, n_t, &mut rng)
}

fn check_hpd_inverse(seed: u64) -> Result<(), String> {
    let h = rand_channel(4, 4, seed, 1);
    let gram = h
        .hermitian()
        .matmul(&h)
        .unwrap()
        .add(&CMat::identity(4).scale(0.05))
        .unwrap();
    let inv = gram.inv_hpd().map_err(|e| e.to_string())?;
    let residual = (&gram.matmul(&inv).unwrap() - &CMat::identity(4)).frob_norm();
    if residual < 1e-9 * 2.0 {
        Ok(())
    } else {
        Err(format!("residual {residual:e}"))
    }
}

fn check_training(_seed: u64) -> Result<(), String> {
    for (n_t, n_tr) in [(1usize, 4usize), (2, 4), (4, 4), (2, 2)] {
        let t = build_training(n_t, n_tr, 1.5).map_err(|e| e.to_string())?;
        if !t.is_orthogonal() {
            return Err(format!("{n_t}x{n_tr} training block is not orthogonal"));
        }
    }
    Ok(())
}

fn check_q_function(_seed: u64) -> Result<(), String> {
    // Simpson's rule over the Gaussian density, independent of erfc.
    let q_ref = |x: f64| {
        let steps = 40_000usize;
        let h = 12.0 / steps as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = phi(x) + phi(x + 12.0);
        for i in 1..steps {
            acc += phi(x + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    for x in [0.0, 0.5, 1.0, 3.0, 6.0] {
        let err = (q_function(x) - q_ref(x)).abs();
        if err > 1e-12 {
            return Err(format!("|Q({x}) - quadrature| = {err:e}"));
        }
    }
    Ok(())
}

fn check_round_trip(seed: u64) -> Result<(), String> {
    let mut rng = RngStream::new(seed, 2, 0, DrawPurpose::DataBits);
    for m in [Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16] {
        let c = Constellation::new(m, 1.0);
        let bits: Vec<u8> = (0..c.bits_per_symbol() * 64)
            .map(|_| rng.next_bit())
            .collect();
        let symbols = c.modulate(&bits).map_err(|e| e.to_string())?;
        if c.demodulate(&symbols) != bits {
            return Err(format!("{m:?} round trip corrupted bits"));
        }
    }
    Ok(())
}

fn check_awgn_ber(seed: u64) -> Result<(), String> {
    let gamma_db = 6.0;
    let gamma = 10f64.powf(gamma_db / 10.0);
    for m in [Modulation::Bpsk, Modulation::Qpsk, Modulation::Qam16] {
        let c = Constellation::new(m, 1.0);
        let sigma = (1.0 / gamma / 2.0).sqrt();
        let mut bit_rng =
            RngStream::new(seed, 3, m.bits_per_symbol() as u64, DrawPurpose::DataBits);
        let mut noise_rng =
            RngStream::new(seed, 3, m.bits_per_symbol() as u64, DrawPurpose::DataNoise);
        let n_symbols = 100_000;
        let mut errors = 0u64;
        let mut total = 0u64;
        for _ in 0..n_symbols {
            let bits: Vec<u8> = (0..c.bits_per_symbol())
                .map(|_| bit_rng.next_bit())
                .collect();
            let tx = c.modulate(&bits).unwrap()[0];
            let rx = tx
                + Complex64::new(
                    sigma * noise_rng.next_normal(),
                    sigma * noise_rng.next_normal(),
                );
            errors += bits
                .iter()
                .zip(&c.demodulate(&[rx]))
                .filter(|(a, b)| a != b)
                .count() as u64;
            total += bits.len() as u64;
        }
        let p = m.ber_awgn(gamma).unwrap();
        let p_hat = errors as f64 / total as f64;
        let tol = 4.0 * (p * (1.0 - p) / total as f64).sqrt();
        if (p_hat - p).abs() > tol {
            return Err(format!("{m:?}: simulated {p_hat:e} vs formula {p:e}"));
        }
    }
    Ok(())
}

fn check_error_identities(seed: u64) -> Result<(), String> {
    // E[ΔH^H·A·ΔH] = σe²·tr(A)·I and E[ΔH·B·ΔH] = 0.
    let n_r = 4;
    let n_t = 2;
    let sigma_e2 = 0.01;
    let a = {
        let r = rand_channel(n_r, n_r, seed, 4);
        r.add(&CMat::identity(n_r).scale(2.0 * (n_r as f64).sqrt()))
            .unwrap()
    };
    let b = rand_channel(n_t, n_r, seed, 5);
    let draws = 40_000u64;
    let mut acc_conj = CMat::zeros(n_t, n_t);
    let mut acc_plain = CMat::zeros(n_r, n_t);
    for i in 0..draws {
        let mut rng = RngStream::new(seed, i, 1, DrawPurpose::EstimationError);
        let dh = draw_estimation_error(n_r, n_t, sigma_e2, &mut rng).unwrap();
        acc_conj = acc_conj.add(&(&(&dh.hermitian() * &a) * &dh)).unwrap();
        acc_plain = acc_plain.add(&(&(&dh * &b) * &dh)).unwrap();
    }
    let mean_conj = acc_conj.scale(1.0 / draws as f64);
    let mean_plain = acc_plain.scale(1.0 / draws as f64);
    let target = CMat::identity(n_t).scale_cx(a.trace().unwrap() * sigma_e2);
    let scale = target.frob_norm();
    let e1 = (&mean_conj - &target).frob_norm() / scale;
    let e2 = mean_plain.frob_norm() / scale;
    if e1 > 0.05 {
        return Err(format!("conjugated identity off by {e1:.3}"));
    }
    if e2 > 0.05 {
        return Err(format!("non-conjugated identity off by {e2:.3}"));
    }
    Ok(())
}

fn check_delta_w_contraction(seed: u64) -> Result<(), String> {
    let h = rand_channel(4, 4, seed, 6);
    let d = mmse_detector(&h, 1.0, 0.1).unwrap();
    let mean_residual = |sigma_e: f64| {
        let n = 300;
        let mut acc = 0.0;
        for i in 0..n {
            let mut rng = RngStream::new(seed, i, 2, DrawPurpose::EstimationError);
            let dh = draw_estimation_error(4, 4, sigma_e * sigma_e, &mut rng).unwrap();
            let w_hat = mmse_detector(&h.add(&dh).unwrap(), 1.0, 0.1).unwrap();
            let approx = d.w().add(&delta_w(&h, &dh, &d)).unwrap();
            acc += (w_hat.w() - &approx).frob_norm();
        }
        acc / n as f64
    };
    let factor = mean_residual(0.02) / mean_residual(0.01);
    if (3.0..=5.0).contains(&factor) {
        Ok(())
    } else {
        Err(format!(
            "residual contraction {factor:.2}, expected about 4"
        ))
    }
}

fn check_cov_oracles(seed: u64) -> Result<(), String> {
    let h = rand_channel(2, 2, seed, 7);
    let d = mmse_detector(&h, 1.0, 0.1).unwrap();
    let sigma_e2 = 1e-4;
    let draws = 100_000u64;
    let hhh = &h * &h.hermitian();
    let mut acc_sig = CMat::zeros(2, 2);
    let mut acc_noise = CMat::zeros(2, 2);
    for i in 0..draws {
        let mut rng = RngStream::new(seed, i, 3, DrawPurpose::EstimationError);
        let dh = draw_estimation_error(2, 2, sigma_e2, &mut rng).unwrap();
        let dw = delta_w(&h, &dh, &d);
        acc_sig = acc_sig.add(&(&(&dw * &hhh) * &dw.hermitian())).unwrap();
        acc_noise = acc_noise.add(&(&dw * &dw.hermitian())).unwrap();
    }
    let cs = cov_signal_term(&h, &d, sigma_e2);
    let cn = cov_noise_term(&h, &d, sigma_e2);
    let e_sig = (&acc_sig.scale(1.0 / draws as f64) - &cs).frob_norm() / cs.frob_norm();
    let e_noise = (&acc_noise.scale(1.0 / draws as f64) - &cn).frob_norm() / cn.frob_norm();
    if e_sig > 0.05 {
        return Err(format!("signal-leak covariance off by {e_sig:.3}"));
    }
    if e_noise > 0.05 {
        return Err(format!("noise covariance off by {e_noise:.3}"));
    }
    Ok(())
}

fn check_zero_error_collapse(seed: u64) -> Result<(), String> {
    let h = rand_channel(4, 4, seed, 8);
    let rep = ppsnr_estimated(&h, 1.0, 0.1, 0.0).unwrap();
    if rep.gamma_est == rep.gamma_perfect {
        Ok(())
    } else {
        Err("gamma_est != gamma_perfect at sigma_e^2 = 0".into())
    }
}

fn check_ml_variance(seed: u64) -> Result<(), String> {
    let es = 1.0;
    let n0 = 0.1;
    let training = build_training(4, 4, es).unwrap();
    let expected = ce_noise_variance(4, es, n0).unwrap();
    let h = rand_channel(4, 4, seed, 9);
    let draws = 20_000;
    let mut acc = 0.0;
    for i in 0..draws {
        let mut rng = RngStream::new(seed, i, 4, DrawPurpose::TrainingNoise);
        let y = simulate_training_rx(&h, &training, n0, &mut rng);
        let dh = ml_estimate(&y, &training).unwrap().sub(&h).unwrap();
        acc += dh.frob_norm().powi(2);
    }
    let var = acc / (draws * 16) as f64;
    let rel = (var - expected).abs() / expected;
    if rel < 0.05 {
        Ok(())
    } else {
        Err(format!("sample variance {var:e} vs formula {expected:e}"))
    }
}

fn check_sinr(seed: u64) -> Result<(), String> {
    // First-order receiver against the closed form, ML-CE error draws.
    let h = rand_channel(4, 4, seed, 10);
    let es = 1.0;
    let n0 = 1.0 / 10f64.powf(1.5); // Es/N0 = 15 dB
    let d = mmse_detector(&h, es, n0).unwrap();
    let wh = d.w().matmul(&h).unwrap();
    let training = build_training(4, 4, es).unwrap();
    let sigma_e2 = ce_noise_variance(4, es, n0).unwrap();
    let predicted = ppsnr_estimated(&h, es, n0, sigma_e2).unwrap().gamma_est;

    let constellation = Constellation::new(Modulation::Qpsk, es);
    let sigma_n = (n0 / 2.0f64).sqrt();
    let trials = 20_000;
    let mut err_power = vec![0.0; 4];
    for i in 0..trials {
        let mut rng_tr = RngStream::new(seed, i, 5, DrawPurpose::TrainingNoise);
        let y_tr = simulate_training_rx(&h, &training, n0, &mut rng_tr);
        let dh = ml_estimate(&y_tr, &training).unwrap().sub(&h).unwrap();
        let w_eff = d.w().add(&delta_w(&h, &dh, &d)).unwrap();
        let mut bit_rng = RngStream::new(seed, i, 5, DrawPurpose::DataBits);
        let mut noise_rng = RngStream::new(seed, i, 5, DrawPurpose::DataNoise);
        let bits: Vec<u8> = (0..8).map(|_| bit_rng.next_bit()).collect();
        let x = constellation.modulate(&bits).unwrap();
        let mut y = h.mul_vec(&x);
        for y_i in &mut y {
            *y_i += Complex64::new(
                sigma_n * noise_rng.next_normal(),
                sigma_n * noise_rng.next_normal(),
            );
        }
        let x_tilde = w_eff.mul_vec(&y);
        for k in 0..4 {
            err_power[k] += (x_tilde[k] - wh.get(k, k) * x[k]).norm_sqr();
        }
    }
    for k in 0..4 {
        let measured = es * wh.get(k, k).norm_sqr() / (err_power[k] / trials as f64);
        let rel = (measured - predicted[k]).abs() / predicted[k];
        if rel > 0.05 {
            return Err(format!(
                "stream {k}: measured {measured:.4} vs predicted {:.4}",
                predicted[k]
            ));
        }
    }
    Ok(())
}

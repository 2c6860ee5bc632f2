//! The analytic core: linear MMSE detection and its post-processing SNR
//! (PPSNR), with and without channel estimation error.
//!
//! For a channel `H` (N_r×N_t), per-antenna symbol energy `Es` and noise
//! variance `N0`, the detector is `W = K·H^H` with
//! `K = (H^H·H + (N0/Es)·I)⁻¹`. With perfect CSI the per-stream PPSNR is
//!
//! ```text
//! γ_k = Es·|(WH)_kk|² / (Es·Σ_{l≠k} |(WH)_kl|² + N0·(W·W^H)_kk)
//! ```
//!
//! When the receiver only has `Ĥ = H + ΔH` (i.i.d. ZMCSCG error, per-entry
//! variance σe²), the detector perturbation is, to first order,
//!
//! ```text
//! ΔW ≅ −K·(H^H·ΔH + ΔH^H·H)·K·H^H + K·ΔH^H
//! ```
//!
//! and the post-detection noise `n̂ = ΔW·H·x + W·n + ΔW·n` has covariance
//! `E[n̂n̂^H] = Es·E[ΔW·HH^H·ΔW^H] + N0·W·W^H + N0·E[ΔW·ΔW^H]`, whose two
//! σe²-dependent expectations reduce to closed trace forms
//! ([`cov_signal_term`], [`cov_noise_term`]). Substituting the covariance
//! diagonal into the PPSNR denominator gives the closed-form per-stream SNR
//! under estimation error ([`ppsnr_estimated`]).

use crate::cxmat::CMat;
use crate::Result;

/// MMSE detector `W = K·H^H` together with the regularized Gram inverse `K`.
#[derive(Debug, Clone)]
pub struct Detector {
    w: CMat,
    k: CMat,
    es: f64,
    n0: f64,
}

impl Detector {
    /// Detection filter, N_t×N_r.
    pub fn w(&self) -> &CMat {
        &self.w
    }

    /// `(H^H·H + (N0/Es)·I)⁻¹`, Hermitian N_t×N_t.
    pub fn k(&self) -> &CMat {
        &self.k
    }

    pub fn es(&self) -> f64 {
        self.es
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }
}

/// Builds the MMSE detector for a channel. Requires `es > 0` and `n0 > 0`,
/// which keeps the Gram matrix positive definite.
pub fn mmse_detector(h: &CMat, es: f64, n0: f64) -> Result<Detector> {
    assert!(es > 0.0 && n0 > 0.0, "es and n0 must be positive");
    let hh = h.hermitian();
    let gram = hh
        .matmul(h)?
        .add(&CMat::identity(h.cols()).scale(n0 / es))?;
    let k = gram.inv_hpd()?;
    let w = k.matmul(&hh)?;
    Ok(Detector { w, k, es, n0 })
}

/// Shared per-stream power split: signal `Es|(WH)_kk|²`, interference
/// `Es·Σ_{l≠k}|(WH)_kl|²`, thermal noise `N0·(WW^H)_kk`.
fn stream_powers(d: &Detector, h: &CMat) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let wh = d.w().matmul(h).expect("detector/channel shape mismatch");
    let wwh = d.w().matmul(&d.w().hermitian()).expect("square product");
    let n_t = wh.rows();
    let mut signal = Vec::with_capacity(n_t);
    let mut interference = Vec::with_capacity(n_t);
    let mut thermal = Vec::with_capacity(n_t);
    for k in 0..n_t {
        signal.push(d.es() * wh.get(k, k).norm_sqr());
        let mut interf = 0.0;
        for l in 0..wh.cols() {
            if l != k {
                interf += wh.get(k, l).norm_sqr();
            }
        }
        interference.push(d.es() * interf);
        thermal.push(d.n0() * wwh.get(k, k).re);
    }
    (signal, interference, thermal)
}

/// Per-stream PPSNR with perfect channel knowledge (linear scale).
pub fn ppsnr_perfect(d: &Detector, h: &CMat) -> Vec<f64> {
    let (signal, interference, thermal) = stream_powers(d, h);
    signal
        .iter()
        .zip(interference.iter().zip(&thermal))
        .map(|(&s, (&i, &t))| s / (i + t))
        .collect()
}

/// First-order perturbation of the detector caused by the estimation error
/// `ΔH`: `ΔW ≅ −K·(H^H·ΔH + ΔH^H·H)·K·H^H + K·ΔH^H`.
pub fn delta_w(h: &CMat, delta_h: &CMat, d: &Detector) -> CMat {
    let hh = h.hermitian();
    let dh_h = delta_h.hermitian();
    let inner = &(&hh * delta_h) + &(&dh_h * h);
    let first = (d.k() * &inner) * d.w();
    let second = d.k() * &dh_h;
    &second - &first
}

/// Closed form of `E[ΔW·H·H^H·ΔW^H]` (the signal-leakage covariance), a
/// five-trace reduction in `K` and `G = H^H·H`, scaled by σe². Hermitian
/// positive semidefinite.
pub fn cov_signal_term(h: &CMat, d: &Detector, sigma_e2: f64) -> CMat {
    assert!(sigma_e2 >= 0.0);
    let k = d.k();
    let kh = k.hermitian();
    let g = &h.hermitian() * h;
    let g2 = &g * &g;
    let kg2kh = &(k * &g2) * &kh;
    let kgkh = &(k * &g) * &kh;
    let kkh = k * &kh;

    // Traces of Hermitian-structured products; imaginary parts are rounding.
    let tr1 = kg2kh.trace().expect("square").re;
    let tr2 = (&kg2kh * &g).trace().expect("square").re;
    let tr3 = (k * &g2).trace().expect("square").re;
    let tr4 = (&kh * &g2).trace().expect("square").re;
    let tr5 = g.trace().expect("square").re;

    let term1 = kgkh.scale(tr1);
    let rest = kkh.scale(tr2 - tr3 - tr4 + tr5);
    (&term1 + &rest).scale(sigma_e2)
}

/// Closed form of `E[ΔW·ΔW^H]` (filtered-noise covariance), the companion
/// five-trace reduction. Hermitian positive semidefinite.
pub fn cov_noise_term(h: &CMat, d: &Detector, sigma_e2: f64) -> CMat {
    assert!(sigma_e2 >= 0.0);
    let n_r = h.rows() as f64;
    let k = d.k();
    let kh = k.hermitian();
    let g = &h.hermitian() * h;
    let kgkh = &(k * &g) * &kh;
    let kkh = k * &kh;

    let tr1 = kgkh.trace().expect("square").re;
    let tr2 = (&kgkh * &g).trace().expect("square").re;
    let tr3 = (k * &g).trace().expect("square").re;
    let tr4 = (&kh * &g).trace().expect("square").re;

    let term1 = kgkh.scale(tr1);
    let rest = kkh.scale(tr2 - tr3 - tr4 + n_r);
    (&term1 + &rest).scale(sigma_e2)
}

/// Post-detection noise covariance `E[n̂·n̂^H]` and its components.
///
/// The two cross terms `E[W·n·n^H·ΔW^H]` and its conjugate vanish because
/// `E[ΔW] ≅ 0`, so only three components remain.
#[derive(Debug, Clone)]
pub struct PostNoiseCov {
    /// Total covariance `Es·signal_leak/Es + N0·W·W^H + N0·error_noise/N0`.
    pub cov: CMat,
    /// `Es·E[ΔW·H·H^H·ΔW^H]`.
    pub signal_leak: CMat,
    /// `N0·W·W^H`.
    pub thermal: CMat,
    /// `N0·E[ΔW·ΔW^H]`.
    pub error_noise: CMat,
}

/// Assembles the post-detection noise covariance from the closed-form
/// pieces.
pub fn post_noise_cov(h: &CMat, d: &Detector, sigma_e2: f64) -> PostNoiseCov {
    let signal_leak = cov_signal_term(h, d, sigma_e2).scale(d.es());
    let thermal = (d.w() * &d.w().hermitian()).scale(d.n0());
    let error_noise = cov_noise_term(h, d, sigma_e2).scale(d.n0());
    let cov = &(&signal_leak + &thermal) + &error_noise;
    PostNoiseCov {
        cov,
        signal_leak,
        thermal,
        error_noise,
    }
}

/// Per-stream PPSNR report for one channel realization.
///
/// All SNRs are linear; convert to dB only when reporting.
#[derive(Debug, Clone)]
pub struct PpsnrReport {
    /// Perfect-CSI PPSNR per stream.
    pub gamma_perfect: Vec<f64>,
    /// PPSNR with estimation error of variance `sigma_e2` per stream.
    pub gamma_est: Vec<f64>,
    pub sigma_e2: f64,
    /// `Es·|(WH)_kk|²` per stream.
    pub signal: Vec<f64>,
    /// `Es·Σ_{l≠k}|(WH)_kl|²` per stream.
    pub interference: Vec<f64>,
    /// Thermal-only noise power `N0·(W·W^H)_kk` per stream.
    pub thermal_noise: Vec<f64>,
    /// Full post-detection noise power `(E[n̂n̂^H])_kk` per stream.
    pub total_noise: Vec<f64>,
}

/// Closed-form per-stream PPSNR in the presence of channel estimation error
/// of per-entry variance `sigma_e2`.
///
/// Signal and interference use the true-channel `W` and `H`; the estimation
/// error enters only through the noise covariance, so `sigma_e2 = 0`
/// reproduces the perfect-CSI PPSNR exactly.
pub fn ppsnr_estimated(h: &CMat, es: f64, n0: f64, sigma_e2: f64) -> Result<PpsnrReport> {
    assert!(sigma_e2 >= 0.0);
    let d = mmse_detector(h, es, n0)?;
    let (signal, interference, thermal_noise) = stream_powers(&d, h);
    let cov = post_noise_cov(h, &d, sigma_e2);
    let n_t = signal.len();
    let mut total_noise = Vec::with_capacity(n_t);
    let mut gamma_perfect = Vec::with_capacity(n_t);
    let mut gamma_est = Vec::with_capacity(n_t);
    for k in 0..n_t {
        // Assemble the total from the same pieces as the matrix sum so that
        // sigma_e2 = 0 collapses to the thermal term bit-exactly.
        let total = cov.signal_leak.get(k, k).re + thermal_noise[k] + cov.error_noise.get(k, k).re;
        total_noise.push(total);
        gamma_perfect.push(signal[k] / (interference[k] + thermal_noise[k]));
        gamma_est.push(signal[k] / (interference[k] + total));
    }
    Ok(PpsnrReport {
        gamma_perfect,
        gamma_est,
        sigma_e2,
        signal,
        interference,
        thermal_noise,
        total_noise,
    })
}

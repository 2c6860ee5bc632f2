//! Channel generation and estimation: Rayleigh draws, the additive
//! estimation-error model `Ĥ = H + ΔH`, orthogonal training sequences, and
//! maximum-likelihood (least-squares) channel estimation.
//!
//! Randomness contract: every draw comes from an [`RngStream`] keyed by
//! `(seed, channel index, packet index, purpose)`. Identical keys reproduce
//! identical sequences no matter how work is scheduled, which is what makes
//! the parallel simulator deterministic.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cxmat::CMat;
use crate::{Error, Result};

/// What a substream is consumed for. Separating purposes keeps e.g. the data
/// bit sequence of a packet independent of whether an estimation error was
/// drawn for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawPurpose {
    ChannelMatrix = 0,
    TrainingNoise = 1,
    EstimationError = 2,
    DataBits = 3,
    DataNoise = 4,
}

const PACKET_BITS: u32 = 24;
const PURPOSE_BITS: u32 = 4;

/// Counter-keyed ChaCha stream: one instance per (channel, packet, purpose).
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Opens the substream for `(seed, channel, packet, purpose)`.
    pub fn new(seed: u64, channel: u64, packet: u64, purpose: DrawPurpose) -> Self {
        assert!(
            channel < 1 << (64 - PACKET_BITS - PURPOSE_BITS),
            "channel index too large"
        );
        assert!(packet < 1 << PACKET_BITS, "packet index too large");
        let stream =
            (channel << (PACKET_BITS + PURPOSE_BITS)) | (packet << PURPOSE_BITS) | purpose as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// One standard normal variate.
    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// One fair bit.
    pub fn next_bit(&mut self) -> u8 {
        self.rng.random_range(0..2u8)
    }
}

/// Matrix of i.i.d. zero-mean circularly symmetric complex Gaussian entries
/// with the given per-entry variance (split evenly between real and
/// imaginary parts).
fn zmcscg(n_rows: usize, n_cols: usize, variance: f64, rng: &mut RngStream) -> CMat {
    let sigma = (variance / 2.0).sqrt();
    CMat::from_fn(n_rows, n_cols, |_, _| {
        Complex64::new(sigma * rng.next_normal(), sigma * rng.next_normal())
    })
}

/// One uncorrelated Rayleigh flat-fading channel realization: i.i.d. ZMCSCG
/// entries with unit per-entry variance.
pub fn draw_rayleigh(n_r: usize, n_t: usize, rng: &mut RngStream) -> CMat {
    assert!(n_r >= 1 && n_t >= 1);
    zmcscg(n_r, n_t, 1.0, rng)
}

/// Channel estimation error matrix `ΔH` with i.i.d. ZMCSCG entries of
/// variance `sigma_e2`. Zero variance yields the zero matrix without
/// consuming randomness.
pub fn draw_estimation_error(
    n_r: usize,
    n_t: usize,
    sigma_e2: f64,
    rng: &mut RngStream,
) -> Result<CMat> {
    assert!(n_r >= 1 && n_t >= 1);
    if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "estimation error variance must be finite and non-negative, got {sigma_e2}"
        )));
    }
    if sigma_e2 == 0.0 {
        return Ok(CMat::zeros(n_r, n_t));
    }
    Ok(zmcscg(n_r, n_t, sigma_e2, rng))
}

/// One channel realization together with the receiver's view of it.
///
/// Constructors maintain `h_hat = h + delta_h` entrywise exactly.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub h: CMat,
    pub h_hat: CMat,
    pub delta_h: CMat,
    pub sigma_e2: f64,
}

impl ChannelDraw {
    /// Perfect CSI: `Ĥ = H`, zero error.
    pub fn perfect(h: CMat) -> Self {
        let delta_h = CMat::zeros(h.rows(), h.cols());
        let h_hat = h.clone();
        Self {
            h,
            h_hat,
            delta_h,
            sigma_e2: 0.0,
        }
    }

    /// From an explicit error matrix: `Ĥ = H + ΔH`.
    pub fn from_error(h: CMat, delta_h: CMat, sigma_e2: f64) -> Self {
        let h_hat = h.add(&delta_h).expect("shape mismatch");
        Self {
            h,
            h_hat,
            delta_h,
            sigma_e2,
        }
    }

    /// From an estimate produced elsewhere (e.g. [`ml_estimate`]):
    /// `ΔH = Ĥ − H`.
    pub fn from_estimate(h: CMat, h_hat: CMat, sigma_e2: f64) -> Self {
        let delta_h = h_hat.sub(&h).expect("shape mismatch");
        Self {
            h,
            h_hat,
            delta_h,
            sigma_e2,
        }
    }
}

/// Row-orthogonal preamble matrix for up to 4 spatial streams, as used by
/// the 802.11n MIMO preamble.
const P_80211N: [[f64; 4]; 4] = [
    [1.0, -1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0, -1.0],
    [-1.0, 1.0, 1.0, 1.0],
];

/// Training signal `X_tr` of shape `N_t × N_tr`.
#[derive(Debug, Clone)]
pub struct TrainingMatrix {
    x_tr: CMat,
    n_tr: usize,
    es: f64,
}

impl TrainingMatrix {
    pub fn x_tr(&self) -> &CMat {
        &self.x_tr
    }

    pub fn n_tr(&self) -> usize {
        self.n_tr
    }

    pub fn es(&self) -> f64 {
        self.es
    }

    /// Whether `X_tr·X_tr^H = Es·N_tr·I` holds within 1e-12 relative
    /// tolerance. True for every full-width (`N_tr = 4`) selection and for
    /// the 1- and 2-stream sub-blocks; 3x3 is not orthogonal.
    pub fn is_orthogonal(&self) -> bool {
        let gram = self
            .x_tr
            .matmul(&self.x_tr.hermitian())
            .expect("square gram");
        let target = CMat::identity(self.x_tr.rows()).scale(self.es * self.n_tr as f64);
        (&gram - &target).frob_norm() <= 1e-12 * target.frob_norm()
    }
}

/// Builds the training matrix `√Es · P[0..n_t, 0..n_tr]` from the 4-stream
/// preamble matrix. Limited to 4 streams / 4 training symbols.
pub fn build_training(n_t: usize, n_tr: usize, es: f64) -> Result<TrainingMatrix> {
    if n_t == 0 || n_t > 4 || n_tr > 4 {
        return Err(Error::InvalidArgument(format!(
            "training supports 1..=4 streams and training symbols, got n_t={n_t}, n_tr={n_tr}"
        )));
    }
    if n_tr < n_t {
        return Err(Error::InvalidArgument(format!(
            "need at least as many training symbols as streams, got n_tr={n_tr} < n_t={n_t}"
        )));
    }
    if !(es > 0.0) || !es.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "symbol energy must be positive and finite, got {es}"
        )));
    }
    let amp = es.sqrt();
    let x_tr = CMat::from_fn(n_t, n_tr, |r, c| Complex64::new(amp * P_80211N[r][c], 0.0));
    Ok(TrainingMatrix { x_tr, n_tr, es })
}

/// Received training block `Y_tr = H·X_tr + noise`, noise ZMCSCG with
/// per-entry variance `n0`.
pub fn simulate_training_rx(h: &CMat, x_tr: &TrainingMatrix, n0: f64, rng: &mut RngStream) -> CMat {
    assert!(n0 >= 0.0, "noise variance must be non-negative");
    let clean = h
        .matmul(x_tr.x_tr())
        .expect("channel/training shape mismatch");
    if n0 == 0.0 {
        return clean;
    }
    let noise = zmcscg(clean.rows(), clean.cols(), n0, rng);
    clean.add(&noise).expect("same shape")
}

/// Maximum-likelihood channel estimate `Ĥ = Y_tr·X_tr^H·(X_tr·X_tr^H)⁻¹`.
pub fn ml_estimate(y_tr: &CMat, x_tr: &TrainingMatrix) -> Result<CMat> {
    let xh = x_tr.x_tr().hermitian();
    let gram = x_tr.x_tr().matmul(&xh)?;
    let gram_inv = gram.inv_general()?;
    y_tr.matmul(&xh)?.matmul(&gram_inv)
}

/// Per-entry variance of the ML estimation error under orthogonal training:
/// `N0 / (N_tr·Es)`.
pub fn ce_noise_variance(n_tr: usize, es: f64, n0: f64) -> Result<f64> {
    if !(es > 0.0) || !es.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "symbol energy must be positive and finite, got {es}"
        )));
    }
    if !(n0 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be non-negative, got {n0}"
        )));
    }
    assert!(n_tr >= 1);
    Ok(n0 / (n_tr as f64 * es))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_is_deterministic_per_key() {
        let mut a = RngStream::new(7, 3, 1, DrawPurpose::ChannelMatrix);
        let mut b = RngStream::new(7, 3, 1, DrawPurpose::ChannelMatrix);
        assert_eq!(draw_rayleigh(2, 2, &mut a), draw_rayleigh(2, 2, &mut b));
    }

    #[test]
    fn distinct_keys_give_distinct_draws() {
        let mut a = RngStream::new(7, 3, 1, DrawPurpose::ChannelMatrix);
        let mut b = RngStream::new(7, 3, 2, DrawPurpose::ChannelMatrix);
        let mut c = RngStream::new(7, 3, 1, DrawPurpose::DataNoise);
        let base = draw_rayleigh(2, 2, &mut a);
        assert_ne!(base, draw_rayleigh(2, 2, &mut b));
        assert_ne!(base, draw_rayleigh(2, 2, &mut c));
    }

    #[test]
    fn rayleigh_ensemble_statistics() {
        // Per-entry |h|² mean should be 1, split 1/2 + 1/2 over re/im.
        let n = 25_000; // 2x2 entries -> 1e5 samples
        let mut sum_sq = 0.0;
        let mut sum_re2 = 0.0;
        let mut sum_im2 = 0.0;
        for idx in 0..n {
            let mut rng = RngStream::new(11, idx, 0, DrawPurpose::ChannelMatrix);
            let h = draw_rayleigh(2, 2, &mut rng);
            for z in h.data() {
                sum_sq += z.norm_sqr();
                sum_re2 += z.re * z.re;
                sum_im2 += z.im * z.im;
            }
        }
        let samples = (n * 4) as f64;
        assert!((sum_sq / samples - 1.0).abs() < 0.02);
        assert!((sum_re2 / samples - 0.5).abs() < 0.01);
        assert!((sum_im2 / samples - 0.5).abs() < 0.01);
    }

    #[test]
    fn estimation_error_zero_variance_is_zero_matrix() {
        let mut rng = RngStream::new(1, 0, 0, DrawPurpose::EstimationError);
        let dh = draw_estimation_error(3, 2, 0.0, &mut rng).unwrap();
        assert_eq!(dh, CMat::zeros(3, 2));
    }

    #[test]
    fn estimation_error_rejects_negative_variance() {
        let mut rng = RngStream::new(1, 0, 0, DrawPurpose::EstimationError);
        assert!(draw_estimation_error(2, 2, -0.1, &mut rng).is_err());
    }

    #[test]
    fn estimation_error_variance_matches() {
        let sigma_e2 = 0.01;
        let n = 25_000;
        let mut sum_sq = 0.0;
        for idx in 0..n {
            let mut rng = RngStream::new(5, idx, 0, DrawPurpose::EstimationError);
            let dh = draw_estimation_error(2, 2, sigma_e2, &mut rng).unwrap();
            sum_sq += dh.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let var = sum_sq / (n * 4) as f64;
        assert!(
            (var - sigma_e2).abs() < 0.03 * sigma_e2,
            "sample variance {var}"
        );
    }

    #[test]
    fn error_uncorrelated_with_channel() {
        let n = 50_000;
        let mut cross = Complex64::ZERO;
        let mut h_pow = 0.0;
        let mut e_pow = 0.0;
        for idx in 0..n {
            let mut rng_h = RngStream::new(6, idx, 0, DrawPurpose::ChannelMatrix);
            let mut rng_e = RngStream::new(6, idx, 0, DrawPurpose::EstimationError);
            let h = draw_rayleigh(1, 1, &mut rng_h).get(0, 0);
            let e = draw_estimation_error(1, 1, 0.01, &mut rng_e)
                .unwrap()
                .get(0, 0);
            cross += e * h.conj();
            h_pow += h.norm_sqr();
            e_pow += e.norm_sqr();
        }
        let corr = cross.norm() / (h_pow * e_pow).sqrt();
        assert!(corr < 0.01, "cross-correlation {corr}");
    }

    #[test]
    fn training_full_matrix_matches_preamble() {
        let t = build_training(4, 4, 1.0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(t.x_tr().get(r, c), Complex64::new(P_80211N[r][c], 0.0));
            }
        }
        let gram = t.x_tr().matmul(&t.x_tr().hermitian()).unwrap();
        assert!((&gram - &CMat::identity(4).scale(4.0)).frob_norm() < 1e-12);
        assert!(t.is_orthogonal());
    }

    #[test]
    fn training_single_stream_row() {
        let t = build_training(1, 4, 1.0).unwrap();
        let row: Vec<f64> = (0..4).map(|c| t.x_tr().get(0, c).re).collect();
        assert_eq!(row, vec![1.0, -1.0, 1.0, 1.0]);
        let gram = t.x_tr().matmul(&t.x_tr().hermitian()).unwrap();
        assert!((gram.get(0, 0).re - 4.0).abs() < 1e-12);
    }

    #[test]
    fn training_two_streams_scaled_energy() {
        let t = build_training(2, 4, 2.0).unwrap();
        let gram = t.x_tr().matmul(&t.x_tr().hermitian()).unwrap();
        assert!((&gram - &CMat::identity(2).scale(8.0)).frob_norm() < 1e-12);
        assert!(t.is_orthogonal());
    }

    #[test]
    fn training_three_by_three_is_not_orthogonal() {
        let t = build_training(3, 3, 1.0).unwrap();
        assert!(!t.is_orthogonal());
    }

    #[test]
    fn training_rejects_bad_sizes() {
        assert!(build_training(5, 4, 1.0).is_err());
        assert!(build_training(2, 5, 1.0).is_err());
        assert!(build_training(4, 2, 1.0).is_err());
        assert!(build_training(2, 2, 0.0).is_err());
    }

    #[test]
    fn training_rx_noiseless_is_exact() {
        let mut rng_h = RngStream::new(2, 0, 0, DrawPurpose::ChannelMatrix);
        let h = draw_rayleigh(4, 2, &mut rng_h);
        let t = build_training(2, 4, 1.0).unwrap();
        let mut rng = RngStream::new(2, 0, 0, DrawPurpose::TrainingNoise);
        let y = simulate_training_rx(&h, &t, 0.0, &mut rng);
        assert_eq!(y, h.matmul(t.x_tr()).unwrap());
    }

    #[test]
    fn training_rx_noise_variance() {
        let h = CMat::zeros(2, 2);
        let t = build_training(2, 4, 1.0).unwrap();
        let n0 = 0.5;
        let n = 10_000;
        let mut sum_sq = 0.0;
        for idx in 0..n {
            let mut rng = RngStream::new(3, idx, 0, DrawPurpose::TrainingNoise);
            let y = simulate_training_rx(&h, &t, n0, &mut rng);
            sum_sq += y.data().iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let var = sum_sq / (n * 8) as f64;
        assert!((var - n0).abs() < 0.03 * n0, "noise variance {var}");
    }

    #[test]
    fn ml_estimate_noiseless_recovers_channel() {
        let mut rng_h = RngStream::new(4, 0, 0, DrawPurpose::ChannelMatrix);
        let h = draw_rayleigh(4, 4, &mut rng_h);
        let t = build_training(4, 4, 1.3).unwrap();
        let y = h.matmul(t.x_tr()).unwrap();
        let h_hat = ml_estimate(&y, &t).unwrap();
        assert!((&h_hat - &h).frob_norm() < 1e-10);
    }

    #[test]
    fn ml_estimate_error_variance_matches_formula() {
        let es = 1.0;
        let n0 = 0.4; // Es/N0 = 4 -> sigma_e2 = 1/16 per entry with n_tr = 4
        let t = build_training(2, 4, es).unwrap();
        let expected = ce_noise_variance(4, es, n0).unwrap();
        let mut rng_h = RngStream::new(8, 0, 0, DrawPurpose::ChannelMatrix);
        let h = draw_rayleigh(2, 2, &mut rng_h);
        let n = 20_000;
        let mut sum_sq = 0.0;
        for idx in 0..n {
            let mut rng = RngStream::new(8, idx, 1, DrawPurpose::TrainingNoise);
            let y = simulate_training_rx(&h, &t, n0, &mut rng);
            let h_hat = ml_estimate(&y, &t).unwrap();
            sum_sq += (&h_hat - &h).frob_norm().powi(2);
        }
        let var = sum_sq / (n * 4) as f64;
        assert!(
            (var - expected).abs() < 0.05 * expected,
            "sample variance {var}, formula {expected}"
        );
    }

    #[test]
    fn ml_estimate_errors_uncorrelated_across_entries() {
        let es = 1.0;
        let n0 = 0.2;
        let t = build_training(2, 4, es).unwrap();
        let h = CMat::zeros(2, 2);
        let n = 120_000;
        let mut cross = Complex64::ZERO;
        let mut pow = 0.0;
        for idx in 0..n {
            let mut rng = RngStream::new(9, idx, 0, DrawPurpose::TrainingNoise);
            let y = simulate_training_rx(&h, &t, n0, &mut rng);
            let dh = ml_estimate(&y, &t).unwrap();
            cross += dh.get(0, 0) * dh.get(1, 1).conj();
            pow += dh.get(0, 0).norm_sqr();
        }
        let corr = cross.norm() / pow;
        assert!(corr < 0.01, "cross-entry correlation {corr}");
    }

    #[test]
    fn ml_estimate_rejects_singular_gram() {
        // Hand-built degenerate training signal with repeated rows.
        let x = CMat::from_rows(&[
            vec![Complex64::ONE, Complex64::ONE],
            vec![Complex64::ONE, Complex64::ONE],
        ]);
        let t = TrainingMatrix {
            x_tr: x,
            n_tr: 2,
            es: 1.0,
        };
        let y = CMat::zeros(2, 2);
        assert!(matches!(ml_estimate(&y, &t), Err(Error::Singular { .. })));
    }

    #[test]
    fn ce_variance_formula() {
        // N_tr = 4, Es/N0 = 10 -> 0.025
        assert_eq!(ce_noise_variance(4, 1.0, 0.1).unwrap(), 0.025);
        assert_eq!(ce_noise_variance(4, 1.0, 0.0).unwrap(), 0.0);
        let v1 = ce_noise_variance(2, 1.0, 0.1).unwrap();
        let v2 = ce_noise_variance(4, 1.0, 0.1).unwrap();
        assert!((v1 / v2 - 2.0).abs() < 1e-12);
        assert!(ce_noise_variance(4, 0.0, 0.1).is_err());
    }

    #[test]
    fn channel_draw_constructors_keep_identity() {
        let mut rng = RngStream::new(10, 0, 0, DrawPurpose::ChannelMatrix);
        let h = draw_rayleigh(3, 2, &mut rng);
        let mut rng_e = RngStream::new(10, 0, 0, DrawPurpose::EstimationError);
        let dh = draw_estimation_error(3, 2, 0.02, &mut rng_e).unwrap();

        let draw = ChannelDraw::from_error(h.clone(), dh.clone(), 0.02);
        assert_eq!(draw.h_hat, h.add(&dh).unwrap());

        // Round-tripping through the estimate recovers ΔH up to rounding.
        let draw2 = ChannelDraw::from_estimate(h.clone(), draw.h_hat.clone(), 0.02);
        assert!((&draw2.delta_h - &dh).frob_norm() < 1e-15);
        assert_eq!(draw2.h_hat, draw.h_hat);

        let perfect = ChannelDraw::perfect(h.clone());
        assert_eq!(perfect.h_hat, h);
        assert_eq!(perfect.delta_h.frob_norm(), 0.0);
    }
}

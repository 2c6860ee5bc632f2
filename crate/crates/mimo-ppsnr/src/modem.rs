//! Constellations (BPSK, gray QPSK, gray 16QAM), hard-decision slicing, and
//! analytic AWGN bit-error-rate formulas built on the Gaussian Q-function.

use num_complex::Complex64;

use crate::{Error, Result};

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`, via the complementary
/// error function.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Supported constellations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Bpsk => "bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "qam16",
        }
    }

    /// Per-bit error probability on an AWGN channel at symbol SNR `gamma`
    /// (linear), assuming gray labeling:
    ///
    /// * BPSK:  `Q(√(2γ))`
    /// * QPSK:  `Q(√γ)` (BPSK per quadrature dimension)
    /// * 16QAM: `(3/4)Q(√(γ/5)) + (1/2)Q(3√(γ/5)) − (1/4)Q(5√(γ/5))`
    pub fn ber_awgn(self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "symbol SNR must be finite and non-negative, got {gamma}"
            )));
        }
        Ok(match self {
            Modulation::Bpsk => q_function((2.0 * gamma).sqrt()),
            Modulation::Qpsk => q_function(gamma.sqrt()),
            Modulation::Qam16 => {
                let r = (gamma / 5.0).sqrt();
                0.75 * q_function(r) + 0.5 * q_function(3.0 * r) - 0.25 * q_function(5.0 * r)
            }
        })
    }
}

/// A gray-labeled constellation with average symbol energy `es`.
///
/// `points[label]` is the symbol whose bit group has integer value `label`
/// (most significant bit first), so gray adjacency lives in the geometry:
/// nearest neighbors differ in exactly one bit (per axis for QAM).
#[derive(Debug, Clone)]
pub struct Constellation {
    modulation: Modulation,
    es: f64,
    points: Vec<Complex64>,
}

/// Amplitude level for a 2-bit gray label, in units of the level spacing
/// half-step: 00 → −3, 01 → −1, 11 → +1, 10 → +3.
fn gray2_level(label: usize) -> f64 {
    match label {
        0b00 => -3.0,
        0b01 => -1.0,
        0b11 => 1.0,
        0b10 => 3.0,
        _ => unreachable!(),
    }
}

impl Constellation {
    pub fn new(modulation: Modulation, es: f64) -> Self {
        assert!(es > 0.0 && es.is_finite(), "symbol energy must be positive");
        let points = match modulation {
            // bit 0 → +√Es
            Modulation::Bpsk => {
                let a = es.sqrt();
                vec![Complex64::new(a, 0.0), Complex64::new(-a, 0.0)]
            }
            // one bit per axis, bit 0 → positive half-axis
            Modulation::Qpsk => {
                let a = (es / 2.0).sqrt();
                (0..4)
                    .map(|label| {
                        let re = if label & 0b10 == 0 { a } else { -a };
                        let im = if label & 0b01 == 0 { a } else { -a };
                        Complex64::new(re, im)
                    })
                    .collect()
            }
            // per-axis gray-coded levels {−3,−1,+1,+3}/√10·√Es
            Modulation::Qam16 => {
                let a = (es / 10.0).sqrt();
                (0..16)
                    .map(|label| {
                        Complex64::new(a * gray2_level(label >> 2), a * gray2_level(label & 0b11))
                    })
                    .collect()
            }
        };
        Self {
            modulation,
            es,
            points,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn es(&self) -> f64 {
        self.es
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Maps bits (values 0/1, most significant first per symbol) to symbols.
    /// The bit count must be a multiple of the bits per symbol.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(Error::InvalidArgument(format!(
                "bit count {} is not a multiple of {} bits per symbol",
                bits.len(),
                bps
            )));
        }
        Ok(bits
            .chunks_exact(bps)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| {
                    debug_assert!(b <= 1);
                    (acc << 1) | b as usize
                });
                self.points[label]
            })
            .collect())
    }

    /// Hard-decision slicing: nearest constellation point in Euclidean
    /// distance; exact ties resolve to the lower label.
    pub fn demodulate(&self, symbols: &[Complex64]) -> Vec<u8> {
        let bps = self.bits_per_symbol();
        let mut bits = Vec::with_capacity(symbols.len() * bps);
        for &s in symbols {
            let mut best_label = 0usize;
            let mut best_dist = f64::INFINITY;
            for (label, &p) in self.points.iter().enumerate() {
                let d = (s - p).norm_sqr();
                if d < best_dist {
                    best_dist = d;
                    best_label = label;
                }
            }
            for k in (0..bps).rev() {
                bits.push(((best_label >> k) & 1) as u8);
            }
        }
        bits
    }
}

use super::stft::{BINS, FFT_SIZE};
use super::FeatureError;

pub const N_BANDS: usize = 96;
const SAMPLE_RATE: f64 = 16_000.0;
const NYQUIST: f64 = SAMPLE_RATE / 2.0;
const BIN_HZ: f64 = SAMPLE_RATE / FFT_SIZE as f64;

pub const GAMMATONE_MIN_HZ: f64 = 80.0;
pub const CQT_MIN_HZ: f64 = 80.0;
pub const CQT_BINS_PER_OCTAVE: usize = 24;
pub const CQT_OCTAVES: usize = 4;

/// Frequency of FFT bin `k` in Hz.
pub fn bin_frequency(k: usize) -> f64 {
    k as f64 * BIN_HZ
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Equivalent rectangular bandwidth in Hz (Glasberg–Moore).
pub fn erb(f: f64) -> f64 {
    24.7 * (4.37 * f / 1000.0 + 1.0)
}

/// ERB-rate (number of ERBs below `f`).
pub fn hz_to_erb_rate(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

pub fn erb_rate_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

/// Constant quality factor for `bins_per_octave` geometric spacing.
pub fn cqt_q(bins_per_octave: usize) -> f64 {
    1.0 / (2f64.powf(1.0 / bins_per_octave as f64) - 1.0)
}

pub fn cqt_center(k: usize) -> f64 {
    CQT_MIN_HZ * 2f64.powf(k as f64 / CQT_BINS_PER_OCTAVE as f64)
}

/// `N_BANDS × BINS` non-negative weights with ascending centers in (0, Nyquist).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    weights: Vec<f32>,
    centers: Vec<f64>,
}

impl FilterBank {
    pub fn new(weights: Vec<f32>, centers: Vec<f64>) -> Result<Self, FeatureError> {
        let rows = centers.len();
        if weights.len() != rows * BINS {
            return Err(FeatureError::Shape(format!(
                "bank weights have {} values, expected {rows} × {BINS}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(FeatureError::Shape("bank weights must be finite and non-negative".into()));
        }
        if centers.windows(2).any(|w| w[1] <= w[0]) || centers.iter().any(|&c| c <= 0.0 || c >= NYQUIST) {
            return Err(FeatureError::Shape("centers must ascend strictly inside (0, 8000) Hz".into()));
        }
        for (r, row) in weights.chunks(BINS).enumerate() {
            if !row.iter().any(|&w| w > 0.0) {
                return Err(FeatureError::Shape(format!("filter {r} has no positive weight")));
            }
        }
        Ok(Self { weights, centers })
    }

    pub fn rows(&self) -> usize {
        self.centers.len()
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.weights[r * BINS..(r + 1) * BINS]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
}

/// Builds rows from a per-row response; empty rows fall back to the bin nearest their center.
fn build(centers: Vec<f64>, response: impl Fn(usize, f64) -> f64) -> FilterBank {
    let mut weights = vec![0.0f32; centers.len() * BINS];
    for (r, &c) in centers.iter().enumerate() {
        let row = &mut weights[r * BINS..(r + 1) * BINS];
        for (k, w) in row.iter_mut().enumerate() {
            *w = response(r, bin_frequency(k)).max(0.0) as f32;
        }
        if !row.iter().any(|&w| w > 0.0) {
            row[((c / BIN_HZ).round() as usize).min(BINS - 1)] = 1.0;
        }
    }
    FilterBank::new(weights, centers).expect("bank construction preserves invariants")
}

fn triangle(f: f64, lo: f64, mid: f64, hi: f64) -> f64 {
    if f <= lo || f >= hi {
        0.0
    } else if f <= mid {
        (f - lo) / (mid - lo)
    } else {
        (hi - f) / (hi - mid)
    }
}

/// Mel-spaced triangles: `n + 2` equally spaced Mel points over `[f_lo, f_hi]`, centers at the interior ones.
pub fn mel_bank(n: usize, f_lo: f64, f_hi: f64) -> FilterBank {
    let (m_lo, m_hi) = (hz_to_mel(f_lo), hz_to_mel(f_hi));
    let edges: Vec<f64> = (0..n + 2)
        .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n + 1) as f64))
        .collect();
    build(edges[1..=n].to_vec(), |r, f| triangle(f, edges[r], edges[r + 1], edges[r + 2]))
}

/// Gammatone channels on an ERB-rate grid; rows are the 4th-order magnitude response, peak 1.
pub fn gammatone_bank(n: usize, f_lo: f64, f_hi: f64) -> FilterBank {
    let (e_lo, e_hi) = (hz_to_erb_rate(f_lo), hz_to_erb_rate(f_hi));
    let centers: Vec<f64> = (1..=n)
        .map(|i| erb_rate_to_hz(e_lo + (e_hi - e_lo) * i as f64 / (n + 1) as f64))
        .collect();
    let bandwidths: Vec<f64> = centers.iter().map(|&c| gammatone_bandwidth(c)).collect();
    let mut bank = build(centers.clone(), |r, f| {
        let x = (f - centers[r]) / bandwidths[r];
        (1.0 + x * x).powi(-2)
    });
    peak_normalize(&mut bank);
    bank
}

/// Bandwidth parameter `b = 1.019 · ERB(fc)` of a 4th-order gammatone.
pub fn gammatone_bandwidth(fc: f64) -> f64 {
    1.019 * erb(fc)
}

/// Pseudo constant-Q bank: raised-cosine kernels of half-width `max(f_k / Q, one bin)`, peak 1.
pub fn cqt_bank(octaves: usize, bins_per_octave: usize, f_min: f64) -> FilterBank {
    let q = cqt_q(bins_per_octave);
    let n = octaves * bins_per_octave;
    let centers: Vec<f64> = (0..n)
        .map(|k| f_min * 2f64.powf(k as f64 / bins_per_octave as f64))
        .collect();
    let mut bank = build(centers.clone(), |r, f| {
        let half = (centers[r] / q).max(BIN_HZ);
        let d = (f - centers[r]).abs();
        if d >= half {
            0.0
        } else {
            (std::f64::consts::FRAC_PI_2 * d / half).cos().powi(2)
        }
    });
    peak_normalize(&mut bank);
    bank
}

/// Linear-frequency triangles whose columns sum to one over all 257 bins.
///
/// Centers sit at `(k + 1) · 256 / (n + 1)` bins; the outermost bands extend flat to DC and Nyquist.
pub fn linear_bank(n: usize) -> FilterBank {
    let last = (BINS - 1) as f64;
    let c: Vec<f64> = (1..=n).map(|k| k as f64 * last / (n + 1) as f64).collect();
    let centers = c.iter().map(|&b| b * BIN_HZ).collect();
    build(centers, |r, f| {
        let b = f / BIN_HZ;
        if (r == 0 && b <= c[0]) || (r == n - 1 && b >= c[n - 1]) {
            return 1.0;
        }
        let lo = if r == 0 { f64::NEG_INFINITY } else { c[r - 1] };
        let hi = if r == n - 1 { f64::INFINITY } else { c[r + 1] };
        if b <= lo || b >= hi {
            0.0
        } else if b <= c[r] {
            (b - lo) / (c[r] - lo)
        } else {
            (hi - b) / (hi - c[r])
        }
    })
}

fn peak_normalize(bank: &mut FilterBank) {
    for row in bank.weights.chunks_mut(BINS) {
        let peak = row.iter().cloned().fold(0.0f32, f32::max);
        for w in row.iter_mut() {
            *w /= peak;
        }
    }
}

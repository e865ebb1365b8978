//! Framing, windowing, Welch PSD, one-sided real FFT and frequency-bin interpolation.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

pub use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SscfError};
use crate::matrix::Matrix;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// A real `C x L` feature array, `C >= 1`, `L >= 2`, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap(Matrix);

impl FeatureMap {
    pub fn new(data: Matrix) -> Result<Self> {
        let (c, l) = data.shape();
        if c < 1 || l < 2 {
            return Err(SscfError::InvalidInput(format!(
                "feature map must be at least 1x2, got {c}x{l}"
            )));
        }
        if !data.is_finite() {
            return Err(SscfError::InvalidInput("feature map contains NaN/Inf".into()));
        }
        Ok(FeatureMap(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        FeatureMap::new(Matrix::from_rows(rows)?)
    }

    pub fn channels(&self) -> usize {
        self.0.rows()
    }

    pub fn len(&self) -> usize {
        self.0.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.0.cols() == 0
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl AsRef<Matrix> for FeatureMap {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        })
    }
}

impl FromStr for Window {
    type Err = SscfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(Window::Hann),
            "rectangular" | "rect" => Ok(Window::Rectangular),
            other => Err(SscfError::Validation(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
    pub eps: f64,
    pub one_sided: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            frame_len: 64,
            hop: 32,
            window: Window::Hann,
            eps: 1e-8,
            one_sided: true,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.hop == 0 || self.hop > self.frame_len {
            return Err(SscfError::Validation(format!(
                "need 1 <= hop <= frame_len, got hop={} frame_len={}",
                self.hop, self.frame_len
            )));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(SscfError::Validation(format!("eps must be > 0, got {}", self.eps)));
        }
        if !self.one_sided {
            return Err(SscfError::Validation("only one-sided spectra are supported".into()));
        }
        Ok(())
    }

    /// Number of one-sided Welch bins.
    pub fn bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// Stable 64-bit digest of every field; spectra and anchors carry it.
    pub fn fingerprint(&self) -> u64 {
        let canon = format!(
            "frame_len={};hop={};window={};eps={:e};one_sided={}",
            self.frame_len, self.hop, self.window, self.eps, self.one_sided
        );
        let digest = Sha256::digest(canon.as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }
}

/// Nonnegative `C x F_bins` Welch descriptor tagged with the producing config.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    data: Matrix,
    fingerprint: u64,
}

impl PowerSpectrum {
    pub fn new(data: Matrix, fingerprint: u64) -> Result<Self> {
        if data.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SscfError::InvalidInput(
                "power spectrum entries must be finite and nonnegative".into(),
            ));
        }
        Ok(PowerSpectrum { data, fingerprint })
    }

    /// Builds a spectrum checked against `cfg`'s bin count.
    pub fn with_config(data: Matrix, cfg: &SpectralConfig) -> Result<Self> {
        if data.cols() != cfg.bins() {
            return Err(SscfError::ShapeMismatch(format!(
                "{} bins but config implies {}",
                data.cols(),
                cfg.bins()
            )));
        }
        PowerSpectrum::new(data, cfg.fingerprint())
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn channels(&self) -> usize {
        self.data.rows()
    }

    pub fn bins(&self) -> usize {
        self.data.cols()
    }
}

/// One-sided spectrum of a real `C x L` signal: `C x (L/2 + 1)` complex bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    channels: usize,
    bins: usize,
    data: Vec<Complex64>,
    original_len: usize,
}

impl ComplexSpectrum {
    pub fn new(channels: usize, original_len: usize, data: Vec<Complex64>) -> Result<Self> {
        let bins = original_len / 2 + 1;
        if data.len() != channels * bins {
            return Err(SscfError::ShapeMismatch(format!(
                "{} bins for {channels} channels of length {original_len} (expected {})",
                data.len(),
                channels * bins
            )));
        }
        Ok(ComplexSpectrum {
            channels,
            bins,
            data,
            original_len,
        })
    }

    pub fn zeros(channels: usize, original_len: usize) -> Self {
        let bins = original_len / 2 + 1;
        ComplexSpectrum {
            channels,
            bins,
            data: vec![Complex64::new(0.0, 0.0); channels * bins],
            original_len,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.bins..(c + 1) * self.bins]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.bins..(c + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Multiplies every bin by the matching real mask entry (`C x B`).
    pub fn scale_bins(&mut self, mask: &Matrix) -> Result<()> {
        if mask.shape() != (self.channels, self.bins) {
            return Err(SscfError::ShapeMismatch(format!(
                "mask {:?} vs spectrum {}x{}",
                mask.shape(),
                self.channels,
                self.bins
            )));
        }
        for (z, m) in self.data.iter_mut().zip(mask.as_slice()) {
            *z *= *m;
        }
        Ok(())
    }
}

/// Subtracts each channel's sample mean.
pub fn remove_mean(h: &FeatureMap) -> FeatureMap {
    let mut out = h.0.clone();
    for c in 0..out.rows() {
        let row = out.row_mut(c);
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    FeatureMap(out)
}

/// Welch power spectrum: global mean removal, `frame_len` frames at stride `hop`
/// (trailing partial frame dropped), windowing, one-sided `|FFT|^2`, frame average.
/// No window-power normalization is applied.
pub fn welch_psd(h: &FeatureMap, cfg: &SpectralConfig) -> Result<PowerSpectrum> {
    cfg.validate()?;
    let len = h.len();
    if cfg.frame_len > len {
        return Err(SscfError::ConfigMismatch(format!(
            "frame_len {} exceeds signal length {len}",
            cfg.frame_len
        )));
    }
    if !h.0.is_finite() {
        return Err(SscfError::InvalidInput("non-finite feature map".into()));
    }
    let centered = remove_mean(h);
    let window = cfg.window.coefficients(cfg.frame_len);
    let bins = cfg.bins();
    let n_frames = (len - cfg.frame_len) / cfg.hop + 1;
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(cfg.frame_len));
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.frame_len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Matrix::zeros(h.channels(), bins);
    for c in 0..h.channels() {
        let row = centered.0.row(c);
        let acc = out.row_mut(c);
        for t in 0..n_frames {
            let start = t * cfg.hop;
            for (i, z) in buf.iter_mut().enumerate() {
                *z = Complex64::new(row[start + i] * window[i], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, z) in acc.iter_mut().zip(&buf[..bins]) {
                *a += z.norm_sqr();
            }
        }
        let inv = 1.0 / n_frames as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    PowerSpectrum::with_config(out, cfg)
}

/// Unnormalized one-sided DFT of each channel.
pub fn rfft(h: &FeatureMap) -> Result<ComplexSpectrum> {
    if !h.0.is_finite() {
        return Err(SscfError::InvalidInput("non-finite feature map".into()));
    }
    Ok(rfft_matrix(&h.0))
}

pub(crate) fn rfft_matrix(h: &Matrix) -> ComplexSpectrum {
    let (channels, len) = h.shape();
    let bins = len / 2 + 1;
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len));
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(channels * bins);
    for c in 0..channels {
        for (z, &v) in buf.iter_mut().zip(h.row(c)) {
            *z = Complex64::new(v, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend_from_slice(&buf[..bins]);
    }
    ComplexSpectrum {
        channels,
        bins,
        data,
        original_len: len,
    }
}

/// Inverse of [`rfft`]. The imaginary parts of DC (and Nyquist for even `len`)
/// are discarded, which is the real-part projection of the full inverse.
pub fn irfft(spec: &ComplexSpectrum, len: usize) -> Result<FeatureMap> {
    if len < 2 {
        return Err(SscfError::ShapeMismatch(format!("output length {len} < 2")));
    }
    if spec.bins != len / 2 + 1 || spec.original_len != len {
        return Err(SscfError::ShapeMismatch(format!(
            "{} bins cannot produce length {len} (need {})",
            spec.bins,
            len / 2 + 1
        )));
    }
    Ok(FeatureMap(irfft_matrix(spec)))
}

pub(crate) fn irfft_matrix(spec: &ComplexSpectrum) -> Matrix {
    let len = spec.original_len;
    let bins = spec.bins;
    let ifft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len));
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let mut out = Matrix::zeros(spec.channels, len);
    let inv = 1.0 / len as f64;
    for c in 0..spec.channels {
        let half = spec.channel(c);
        buf[..bins].copy_from_slice(half);
        buf[0].im = 0.0;
        if len % 2 == 0 {
            buf[bins - 1].im = 0.0;
        }
        for b in 1..(len - bins + 1) {
            buf[len - b] = half[b].conj();
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        for (o, z) in out.row_mut(c).iter_mut().zip(&buf) {
            *o = z.re * inv;
        }
    }
    out
}

/// Adjoint of `h -> rfft(h)` with respect to the real inner product on
/// `(Re, Im)` pairs: maps bin cotangents back to a time-domain gradient.
pub(crate) fn rfft_adjoint(grad: &ComplexSpectrum) -> Matrix {
    let len = grad.original_len;
    let mut folded = grad.clone();
    let last = grad.bins - 1;
    for c in 0..grad.channels {
        let ch = folded.channel_mut(c);
        for (b, z) in ch.iter_mut().enumerate() {
            let keep_whole = b == 0 || (len % 2 == 0 && b == last);
            // Re(H_b) = sum h cos, Im(H_b) = -sum h sin; irfft doubles interior bins.
            *z = if keep_whole {
                Complex64::new(z.re, 0.0)
            } else {
                *z * 0.5
            };
        }
    }
    irfft_matrix(&folded).scale(len as f64)
}

/// Piecewise-linear resampling of a `C x F` mask onto `target_bins` bins,
/// aligning normalized frequency `f/(F-1)` with `f'/(B-1)`.
pub fn interp_freq_bins(mask: &Matrix, target_bins: usize) -> Result<Matrix> {
    let (channels, src_bins) = mask.shape();
    if target_bins < 2 {
        return Err(SscfError::ShapeMismatch(format!("target bins {target_bins} < 2")));
    }
    if src_bins < 2 {
        return Err(SscfError::ShapeMismatch(format!("source bins {src_bins} < 2")));
    }
    if src_bins == target_bins {
        return Ok(mask.clone());
    }
    let denom = target_bins - 1;
    let mut out = Matrix::zeros(channels, target_bins);
    for c in 0..channels {
        let src = mask.row(c);
        let dst = out.row_mut(c);
        for (b, d) in dst.iter_mut().enumerate() {
            let num = b * (src_bins - 1);
            let mut lo = num / denom;
            let mut frac = (num % denom) as f64 / denom as f64;
            if lo == src_bins - 1 {
                lo -= 1;
                frac = 1.0;
            }
            *d = if frac == 0.0 {
                src[lo]
            } else if frac == 1.0 {
                src[lo + 1]
            } else {
                src[lo] * (1.0 - frac) + src[lo + 1] * frac
            };
        }
    }
    Ok(out)
}

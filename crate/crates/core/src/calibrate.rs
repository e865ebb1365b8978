//! Structural matching and phase-preserving amplitude calibration.
//!
//! A sample's Welch descriptor selects an anchor; the ratio between anchor and
//! descriptor gives a real, nonnegative per-bin gain that is resampled onto the
//! full-length FFT grid and multiplied into the sample's spectrum. Real gains
//! leave every bin's phase untouched. The gain is computed from plain values
//! and is never differentiated: gradients only see the linear map
//! `x -> irfft(rfft(x) * mask)` with the mask frozen.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anchors::{Anchor, AnchorSet};
use crate::error::{Result, SscfError};
use crate::matrix::{squared_distance, Matrix};
use crate::spectral::{
    interp_freq_bins, irfft_matrix, rfft_matrix, welch_psd, FeatureMap, PowerSpectrum,
    SpectralConfig,
};

/// Which anchor representation a comparison or target uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// The power anchor `P_k`.
    Power,
    /// The amplitude template `A_k = sqrt(P_k)`.
    Amplitude,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Power => "power",
            Space::Amplitude => "amplitude",
        })
    }
}

impl FromStr for Space {
    type Err = SscfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Space::Power),
            "amplitude" => Ok(Space::Amplitude),
            other => Err(SscfError::Validation(format!("unknown space '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub match_space: Space,
    pub target_space: Space,
    pub eps: f64,
    /// 1-based matching rank; 1 is the nearest anchor.
    pub rank: usize,
    /// Optional upper clamp on mask gains. Off by default.
    pub max_gain: Option<f64>,
    /// Debug switch: replace every mask with ones.
    pub unit_mask: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            match_space: Space::Power,
            target_space: Space::Power,
            eps: 1e-8,
            rank: 1,
            max_gain: None,
            unit_mask: false,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(SscfError::Validation(format!("calibration eps must be > 0, got {}", self.eps)));
        }
        if self.rank == 0 {
            return Err(SscfError::Validation("rank must be >= 1".into()));
        }
        if let Some(g) = self.max_gain {
            if !(g > 0.0) {
                return Err(SscfError::Validation(format!("max_gain must be > 0, got {g}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedFeatureMap {
    pub data: FeatureMap,
    pub matched_stratum: usize,
    pub match_distance: f64,
    /// The `C x (L/2+1)` mask applied; needed by [`calibrate_adjoint`].
    pub mask: Matrix,
}

fn check_compatible(p: &PowerSpectrum, anchors: &AnchorSet) -> Result<()> {
    if p.data().shape() != anchors.shape() {
        return Err(SscfError::ShapeMismatch(format!(
            "descriptor {:?} vs anchors {:?}",
            p.data().shape(),
            anchors.shape()
        )));
    }
    if p.fingerprint() != anchors.fingerprint() {
        return Err(SscfError::ConfigMismatch(
            "descriptor and anchors were built with different spectral configs".into(),
        ));
    }
    Ok(())
}

/// Distance from `p` to every anchor in the configured space.
pub fn anchor_distances(p: &PowerSpectrum, anchors: &AnchorSet, space: Space) -> Result<Vec<f64>> {
    check_compatible(p, anchors)?;
    Ok(anchors
        .anchors
        .iter()
        .map(|a| {
            let target = match space {
                Space::Power => &a.power,
                Space::Amplitude => &a.amplitude,
            };
            squared_distance(p.data().as_slice(), target.as_slice()).sqrt()
        })
        .collect())
}

/// Nearest anchor; ties go to the lowest index.
pub fn match_stratum(p: &PowerSpectrum, anchors: &AnchorSet, cfg: &CalibrationConfig) -> Result<(usize, f64)> {
    match_stratum_rank(p, anchors, cfg, 1)
}

/// The `rank`-th nearest anchor (1-based), ordered by distance then index.
pub fn match_stratum_rank(
    p: &PowerSpectrum,
    anchors: &AnchorSet,
    cfg: &CalibrationConfig,
    rank: usize,
) -> Result<(usize, f64)> {
    let k = anchors.k();
    if rank == 0 || rank > k {
        return Err(SscfError::RankOutOfRange { rank, k });
    }
    let d = anchor_distances(p, anchors, cfg.match_space)?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let pick = order[rank - 1];
    Ok((pick, d[pick]))
}

/// Per-bin gain toward the anchor: `sqrt(P_k / (P + eps))` for a power target,
/// `sqrt(A_k / (P + eps))` for an amplitude target.
pub fn scaling_mask(p_src: &PowerSpectrum, anchor: &Anchor, cfg: &CalibrationConfig) -> Result<Matrix> {
    if p_src.data().shape() != anchor.power.shape() {
        return Err(SscfError::ShapeMismatch(format!(
            "descriptor {:?} vs anchor {:?}",
            p_src.data().shape(),
            anchor.power.shape()
        )));
    }
    let target = match cfg.target_space {
        Space::Power => &anchor.power,
        Space::Amplitude => &anchor.amplitude,
    };
    let (c, f) = target.shape();
    let values = p_src
        .data()
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&p, &t)| {
            let m = (t / (p + cfg.eps)).sqrt();
            match cfg.max_gain {
                Some(g) => m.min(g),
                None => m,
            }
        })
        .collect();
    Matrix::from_vec(c, f, values)
}

/// `irfft(rfft(x) * mask)` per channel. An all-ones mask returns `x` unchanged.
pub fn apply_frequency_mask(x: &Matrix, mask: &Matrix) -> Result<Matrix> {
    let bins = x.cols() / 2 + 1;
    if mask.shape() != (x.rows(), bins) {
        return Err(SscfError::ShapeMismatch(format!(
            "mask {:?} for signal {:?} (need {}x{bins})",
            mask.shape(),
            x.shape(),
            x.rows()
        )));
    }
    if mask.as_slice().iter().all(|&m| m == 1.0) {
        return Ok(x.clone());
    }
    let mut spec = rfft_matrix(x);
    spec.scale_bins(mask)?;
    Ok(irfft_matrix(&spec))
}

/// Full online pipeline: Welch descriptor, rank-`cfg.rank` matching, mask,
/// resampling to the signal's FFT grid, and spectral scaling.
pub fn calibrate(
    h: &FeatureMap,
    anchors: &AnchorSet,
    spectral_cfg: &SpectralConfig,
    cfg: &CalibrationConfig,
) -> Result<CalibratedFeatureMap> {
    cfg.validate()?;
    if spectral_cfg.fingerprint() != anchors.fingerprint() {
        return Err(SscfError::ConfigMismatch(
            "spectral config differs from the one the anchors were built with".into(),
        ));
    }
    let p = welch_psd(h, spectral_cfg)?;
    let (k, dist) = match_stratum_rank(&p, anchors, cfg, cfg.rank)?;
    let bins = h.len() / 2 + 1;
    let mask = if cfg.unit_mask {
        Matrix::filled(h.channels(), bins, 1.0)
    } else {
        let coarse = scaling_mask(&p, &anchors.anchors[k], cfg)?;
        interp_freq_bins(&coarse, bins)?
    };
    let out = apply_frequency_mask(h.matrix(), &mask)?;
    Ok(CalibratedFeatureMap {
        data: FeatureMap::new(out)?,
        matched_stratum: k,
        match_distance: dist,
        mask,
    })
}

/// Adjoint of `x -> irfft(rfft(x) * mask)` for a frozen real mask. The map is a
/// circular convolution with a real even kernel, so it is its own adjoint.
pub fn calibrate_adjoint(grad: &Matrix, mask: &Matrix) -> Result<Matrix> {
    apply_frequency_mask(grad, mask)
}

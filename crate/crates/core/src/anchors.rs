//! Mean-amplitude-squared reference anchors, one per stratum, and their file format.

use std::path::Path;

use serde_json::json;

use crate::container::{meta_parse, Container};
use crate::error::{Result, SscfError};
use crate::matrix::Matrix;
use crate::spectral::{PowerSpectrum, SpectralConfig};
use crate::stratify::StrataModel;

pub const ANCHOR_FORMAT_VERSION: u32 = 1;
const KIND: &str = "anchors";

/// Amplitude template `A_k` and power anchor `P_k = A_k^2` for one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub amplitude: Matrix,
    pub power: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub anchors: Vec<Anchor>,
    pub strata: StrataModel,
    pub spectral_cfg: SpectralConfig,
    pub eps: f64,
    pub format_version: u32,
}

impl AnchorSet {
    pub fn k(&self) -> usize {
        self.anchors.len()
    }

    /// `(channels, bins)` of every template.
    pub fn shape(&self) -> (usize, usize) {
        self.anchors[0].power.shape()
    }

    pub fn fingerprint(&self) -> u64 {
        self.spectral_cfg.fingerprint()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SscfError::InvariantViolation(msg));
        if self.anchors.is_empty() {
            return bad("anchor set is empty".into());
        }
        if self.strata.k != self.anchors.len() {
            return bad(format!(
                "{} anchors but strata K={}",
                self.anchors.len(),
                self.strata.k
            ));
        }
        if self.strata.fingerprint != self.fingerprint() {
            return bad("strata fingerprint disagrees with spectral config".into());
        }
        self.strata.validate()?;
        let shape = (self.anchors[0].power.rows(), self.spectral_cfg.bins());
        if self.strata.shape != shape {
            return bad(format!("strata shape {:?} vs anchors {shape:?}", self.strata.shape));
        }
        let floor = self.eps.sqrt();
        for (k, a) in self.anchors.iter().enumerate() {
            if a.power.shape() != shape || a.amplitude.shape() != shape {
                return bad(format!("anchor {k} has inconsistent shape"));
            }
            for (&amp, &pow) in a.amplitude.as_slice().iter().zip(a.power.as_slice()) {
                if !amp.is_finite() || !pow.is_finite() {
                    return bad(format!("anchor {k} has non-finite entries"));
                }
                if amp < floor * (1.0 - 1e-12) {
                    return bad(format!("anchor {k} amplitude {amp} below sqrt(eps)"));
                }
                if (pow - amp * amp).abs() > 1e-12 * pow.max(1.0) {
                    return bad(format!("anchor {k} power != amplitude^2"));
                }
            }
        }
        Ok(())
    }
}

/// `A(c,f) = mean_i sqrt(P_i(c,f) + eps)`, `P = A^2`.
pub fn build_anchor(cluster: &[&PowerSpectrum], eps: f64) -> Result<Anchor> {
    let first = cluster.first().ok_or(SscfError::EmptyCluster(0))?;
    let shape = first.data().shape();
    if cluster
        .iter()
        .any(|p| p.data().shape() != shape || p.fingerprint() != first.fingerprint())
    {
        return Err(SscfError::ConfigMismatch(
            "cluster spectra differ in shape or config".into(),
        ));
    }
    let mut amp = Matrix::zeros(shape.0, shape.1);
    for p in cluster {
        for (a, &v) in amp.as_mut_slice().iter_mut().zip(p.data().as_slice()) {
            *a += (v + eps).sqrt();
        }
    }
    let inv = 1.0 / cluster.len() as f64;
    amp.as_mut_slice().iter_mut().for_each(|a| *a *= inv);
    let power = amp.map(|a| a * a);
    Ok(Anchor {
        amplitude: amp,
        power,
    })
}

/// One anchor per stratum of `model`; `spectra[i]` belongs to `model.assignments[i]`.
pub fn build_anchor_set(
    spectra: &[PowerSpectrum],
    model: &StrataModel,
    cfg: &SpectralConfig,
    eps: f64,
) -> Result<AnchorSet> {
    if model.assignments.len() != spectra.len() {
        return Err(SscfError::ShapeMismatch(format!(
            "{} assignments for {} spectra",
            model.assignments.len(),
            spectra.len()
        )));
    }
    if spectra.iter().any(|p| p.fingerprint() != cfg.fingerprint()) {
        return Err(SscfError::ConfigMismatch(
            "spectra were not produced with this spectral config".into(),
        ));
    }
    let mut members: Vec<Vec<&PowerSpectrum>> = vec![Vec::new(); model.k];
    for (p, &a) in spectra.iter().zip(&model.assignments) {
        members[a].push(p);
    }
    let anchors = members
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if m.is_empty() {
                Err(SscfError::EmptyCluster(k))
            } else {
                build_anchor(m, eps)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnchorSet {
        anchors,
        strata: model.clone(),
        spectral_cfg: cfg.clone(),
        eps,
        format_version: ANCHOR_FORMAT_VERSION,
    })
}

pub fn anchors_to_container(set: &AnchorSet) -> Container {
    let (c, f) = set.shape();
    let s = &set.strata;
    let meta = json!({
        "k": set.k(),
        "channels": c,
        "bins": f,
        "eps": set.eps,
        "spectral_cfg": set.spectral_cfg,
        "fingerprint": set.fingerprint().to_string(),
        "strata": {
            "k": s.k,
            "seed": s.seed,
            "inertia": s.inertia,
            "assignments": s.assignments,
            "fingerprint": s.fingerprint.to_string(),
        },
    });
    let mut out = Container::new(KIND, set.format_version, meta);
    for (k, a) in set.anchors.iter().enumerate() {
        out.push(format!("amplitude_{k}"), vec![c, f], a.amplitude.as_slice().to_vec());
        out.push(format!("power_{k}"), vec![c, f], a.power.as_slice().to_vec());
    }
    out.push("centers", vec![s.k, c * f], s.centers.iter().flatten().copied().collect());
    out
}

pub fn anchors_from_container(file: &Container) -> Result<AnchorSet> {
    file.expect(KIND, ANCHOR_FORMAT_VERSION)?;
    let meta = &file.meta;
    let k: usize = meta_parse(meta, "k")?;
    let c: usize = meta_parse(meta, "channels")?;
    let f: usize = meta_parse(meta, "bins")?;
    let eps: f64 = meta_parse(meta, "eps")?;
    let spectral_cfg: SpectralConfig = meta_parse(meta, "spectral_cfg")?;
    let strata_meta = crate::container::meta_field(meta, "strata")?;
    let seed: u64 = meta_parse(strata_meta, "seed")?;
    let inertia: f64 = meta_parse(strata_meta, "inertia")?;
    let assignments: Vec<usize> = meta_parse(strata_meta, "assignments")?;
    let strata_fp: String = meta_parse(strata_meta, "fingerprint")?;
    let strata_fp: u64 = strata_fp
        .parse()
        .map_err(|_| SscfError::Format("bad strata fingerprint".into()))?;
    if k == 0 {
        return Err(SscfError::Format("K must be positive".into()));
    }
    let matrix = |name: &str| -> Result<Matrix> {
        let (info, values) = file.array(name)?;
        if info.shape != [c, f] {
            return Err(SscfError::Format(format!("array '{name}' has shape {:?}", info.shape)));
        }
        Matrix::from_vec(c, f, values.clone())
    };
    let anchors = (0..k)
        .map(|i| {
            Ok(Anchor {
                amplitude: matrix(&format!("amplitude_{i}"))?,
                power: matrix(&format!("power_{i}"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (info, centers) = file.array("centers")?;
    if info.shape != [k, c * f] {
        return Err(SscfError::Format("centers shape mismatch".into()));
    }
    let strata = StrataModel {
        k,
        shape: (c, f),
        fingerprint: strata_fp,
        centers: centers.chunks_exact(c * f).map(<[f64]>::to_vec).collect(),
        assignments,
        inertia,
        seed,
        history: Vec::new(),
    };
    let set = AnchorSet {
        anchors,
        strata,
        spectral_cfg,
        eps,
        format_version: file.format_version,
    };
    set.validate()?;
    Ok(set)
}

pub fn save_anchors(set: &AnchorSet, path: &Path) -> Result<()> {
    anchors_to_container(set).save(path)
}

pub fn load_anchors(path: &Path) -> Result<AnchorSet> {
    anchors_from_container(&Container::load(path)?)
}

//! Synthetic domains: a structure's latent spectral pattern shaped by a
//! domain-specific, channel-wise frequency response, plus white noise.
//!
//! A structure is a set of spectral peaks per channel. Each sample realizes
//! every peak as a sinusoid whose amplitude is `peak gain * response(f)`, whose
//! frequency is shifted by a small class-specific offset, and whose phase is
//! uniformly random. Class identity therefore lives in fine frequency detail,
//! while domains differ only in per-band amplitude.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::container::{meta_parse, Container};
use crate::error::{Result, SscfError};
use crate::matrix::Matrix;
use crate::spectral::{irfft_matrix, rfft_matrix};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Normalized frequency in (0, 0.5).
    pub center: f64,
    /// Width of the uniform frequency jitter around the center (0 = pure tone).
    pub bandwidth: f64,
    pub gain: f64,
    /// Whether the class frequency offset applies to this peak.
    pub carries_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    /// Normalized frequency shift applied to every peak.
    pub freq_offset: f64,
    /// Extra phase per channel index, radians.
    pub phase_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStructure {
    pub id: usize,
    /// Peaks per channel.
    pub peaks: Vec<Vec<Peak>>,
    pub class_signatures: Vec<ClassSignature>,
}

impl LatentStructure {
    pub fn validate(&self) -> Result<()> {
        for p in self.peaks.iter().flatten() {
            if !(p.center > 0.0 && p.center < 0.5) || !(p.gain > 0.0) || p.bandwidth < 0.0 {
                return Err(SscfError::Validation(format!(
                    "structure {}: bad peak {p:?}",
                    self.id
                )));
            }
        }
        if self.class_signatures.len() < 2 {
            return Err(SscfError::Validation(format!(
                "structure {} needs at least two classes",
                self.id
            )));
        }
        Ok(())
    }
}

/// Positive gain curve over normalized frequency given by control points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// `(frequency, gain)` sorted by frequency.
    pub points: Vec<(f64, f64)>,
}

impl Response {
    pub fn flat(gain: f64) -> Self {
        Response {
            points: vec![(0.0, gain), (0.5, gain)],
        }
    }

    pub fn at(&self, f: f64) -> f64 {
        let pts = &self.points;
        if f <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((f0, g0), (f1, g1)) = (w[0], w[1]);
            if f <= f1 {
                let t = if f1 > f0 { (f - f0) / (f1 - f0) } else { 1.0 };
                return g0 + t * (g1 - g0);
            }
        }
        pts[pts.len() - 1].1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub id: usize,
    pub structure_id: usize,
    /// One response per channel.
    pub response: Vec<Response>,
    /// White noise added after the response.
    pub noise_std: f64,
    /// White noise added before the response, so it is shaped like the signal.
    pub source_noise_std: f64,
    /// Relative per-sample amplitude jitter, uniform in `[1-j, 1+j]`.
    pub amplitude_jitter: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(SscfError::Validation(format!("domain {}: n_per_class must be >= 1", self.id)));
        }
        if self.noise_std < 0.0 || self.source_noise_std < 0.0 || !(0.0..1.0).contains(&self.amplitude_jitter) {
            return Err(SscfError::Validation(format!("domain {}: bad noise/jitter", self.id)));
        }
        for r in &self.response {
            if r.points.is_empty() || r.points.iter().any(|&(_, g)| !(g > 0.0)) {
                return Err(SscfError::Validation(format!("domain {}: response must be > 0", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Matrix,
    pub label: usize,
    pub domain: usize,
}

/// Draws `n_per_class` series per class, classes interleaved, deterministic in `spec.seed`.
pub fn generate_domain(
    spec: &DomainSpec,
    structures: &[LatentStructure],
    len: usize,
    channels: usize,
) -> Result<Vec<Sample>> {
    let s = structures
        .iter()
        .find(|s| s.id == spec.structure_id)
        .ok_or(SscfError::UnknownStructure(spec.structure_id))?;
    if len < 64 {
        return Err(SscfError::Validation(format!("series length {len} < 64")));
    }
    s.validate()?;
    spec.validate()?;
    if s.peaks.len() != channels || spec.response.len() != channels {
        return Err(SscfError::ShapeMismatch(format!(
            "structure/response channel counts differ from {channels}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = s.class_signatures.len();
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(classes * spec.n_per_class);
    for _ in 0..spec.n_per_class {
        for (label, sig) in s.class_signatures.iter().enumerate() {
            let jitter = 1.0 + spec.amplitude_jitter * rng.gen_range(-1.0..=1.0);
            let mut x = Matrix::zeros(channels, len);
            let n_peaks = s.peaks.iter().map(Vec::len).max().unwrap_or(0);
            for p in 0..n_peaks {
                let phase0 = rng.gen_range(0.0..tau);
                let spread = rng.gen_range(-0.5..=0.5);
                for ch in 0..channels {
                    let Some(peak) = s.peaks[ch].get(p) else { continue };
                    let offset = if peak.carries_class { sig.freq_offset } else { 0.0 };
                    let f = peak.center + offset + spread * peak.bandwidth;
                    let amp = jitter * peak.gain * spec.response[ch].at(f);
                    let phase = phase0 + ch as f64 * sig.phase_step;
                    for (t, v) in x.row_mut(ch).iter_mut().enumerate() {
                        *v += amp * (tau * f * t as f64 + phase).cos();
                    }
                }
            }
            if spec.source_noise_std > 0.0 {
                let mut n = Matrix::zeros(channels, len);
                for v in n.as_mut_slice() {
                    *v = spec.source_noise_std * rng.sample::<f64, _>(StandardNormal);
                }
                let mut spec_n = rfft_matrix(&n);
                for (ch, resp) in spec.response.iter().enumerate() {
                    for (b, z) in spec_n.channel_mut(ch).iter_mut().enumerate() {
                        *z *= resp.at(b as f64 / len as f64);
                    }
                }
                let shaped = irfft_matrix(&spec_n);
                for (v, e) in x.as_mut_slice().iter_mut().zip(shaped.as_slice()) {
                    *v += e;
                }
            }
            if spec.noise_std > 0.0 {
                for v in x.as_mut_slice() {
                    *v += spec.noise_std * rng.sample::<f64, _>(StandardNormal);
                }
            }
            out.push(Sample {
                x,
                label,
                domain: spec.id,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Homogeneous,
    TwoStructure,
    PaperLike,
}

impl std::str::FromStr for ScenarioName {
    type Err = SscfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(ScenarioName::Homogeneous),
            "two_structure" => Ok(ScenarioName::TwoStructure),
            "paper_like" => Ok(ScenarioName::PaperLike),
            other => Err(SscfError::UnknownScenario(other.to_string())),
        }
    }
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioName::Homogeneous => "homogeneous",
            ScenarioName::TwoStructure => "two_structure",
            ScenarioName::PaperLike => "paper_like",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub len: usize,
    pub channels: usize,
    pub classes: usize,
    pub structures: Vec<LatentStructure>,
    pub domains: Vec<DomainSpec>,
}

impl Scenario {
    /// Re-seeds every domain as `base + domain id`.
    pub fn with_data_seed(mut self, base: u64) -> Self {
        for d in &mut self.domains {
            d.seed = base.wrapping_add(d.id as u64);
        }
        self
    }

    pub fn generate(&self) -> Result<Dataset> {
        let mut samples = Vec::new();
        for d in &self.domains {
            samples.extend(generate_domain(d, &self.structures, self.len, self.channels)?);
        }
        Ok(Dataset {
            channels: self.channels,
            len: self.len,
            classes: self.classes,
            samples,
            domain_structure: self.domains.iter().map(|d| (d.id, d.structure_id)).collect(),
        })
    }
}

/// Scenarios use `len = 256`, so one fine bin is `1/256` of normalized frequency.
const SCENARIO_LEN: usize = 256;
const FINE: f64 = 1.0 / SCENARIO_LEN as f64;
/// Default base for per-domain data seeds (domain `d` uses `base + d`).
pub const DEFAULT_DATA_SEED: u64 = 1000;

fn tone(bin: f64, gain: f64, carries_class: bool) -> Peak {
    Peak {
        center: bin * FINE,
        bandwidth: 0.0,
        gain,
        carries_class,
    }
}

/// Three classes one fine bin apart, centered on each class-carrying peak.
fn signatures() -> Vec<ClassSignature> {
    (0..3)
        .map(|c| ClassSignature {
            freq_offset: (c as f64 - 1.0) * FINE,
            phase_step: 0.0,
        })
        .collect()
}

/// Structure 0 has a weak class tone low in channel 0, structure 1 a strong one
/// higher up; each has a loud, class-independent marker in channel 1.
fn structures() -> (LatentStructure, LatentStructure) {
    let a = LatentStructure {
        id: 0,
        peaks: vec![vec![tone(24.0, 0.7, true)], vec![tone(40.0, 5.0, false)]],
        class_signatures: signatures(),
    };
    let b = LatentStructure {
        id: 1,
        peaks: vec![vec![tone(88.0, 4.0, true)], vec![tone(104.0, 5.0, false)]],
        class_signatures: signatures(),
    };
    (a, b)
}

/// Unit response except around the two class bands, where it takes the given gains.
fn band_response(low_band: f64, high_band: f64) -> Response {
    let pts = [(0.0, 1.0), (24.0, low_band), (40.0, 1.0), (64.0, 1.0), (88.0, high_band), (104.0, 1.0), (128.0, 1.0)];
    Response {
        points: pts.iter().map(|&(b, g)| (b * FINE, g)).collect(),
    }
}

fn domain(id: usize, structure_id: usize, bands: (f64, f64), source_noise_std: f64) -> DomainSpec {
    let r = band_response(bands.0, bands.1);
    // Noiseless scenarios stay exactly noiseless; otherwise a small sensor floor.
    let sensor = if source_noise_std > 0.0 { 0.05 } else { 0.0 };
    DomainSpec {
        id,
        structure_id,
        response: vec![r.clone(), r],
        noise_std: sensor,
        source_noise_std,
        amplitude_jitter: 0.1,
        n_per_class: 40,
        seed: DEFAULT_DATA_SEED + id as u64,
    }
}

/// Canned scenarios with fixed data seeds.
///
/// In `paper_like`, domains 1 and 2 each amplify the class band of the other
/// structure, and the two structures differ in class-band energy, so a single
/// shared reference spectrum inflates noise exactly where the other structure
/// keeps its labels.
pub fn make_scenario(name: ScenarioName) -> Scenario {
    let (a, b) = structures();
    let (structures, domains) = match name {
        ScenarioName::Homogeneous => (
            vec![a],
            vec![
                domain(0, 0, (1.0, 1.0), 1.0),
                domain(1, 0, (1.4, 1.0), 1.0),
                domain(2, 0, (0.7, 1.3), 1.0),
                domain(3, 0, (1.2, 0.8), 1.0),
            ],
        ),
        ScenarioName::TwoStructure => (
            vec![a, b],
            vec![
                domain(0, 0, (1.0, 1.0), 0.0),
                domain(1, 0, (1.3, 0.9), 0.0),
                domain(2, 1, (1.0, 1.0), 0.0),
                domain(3, 1, (0.8, 1.2), 0.0),
            ],
        ),
        ScenarioName::PaperLike => (
            vec![a, b],
            vec![
                domain(0, 0, (1.0, 1.0), 2.2),
                domain(1, 1, (2.6, 0.6), 2.2),
                domain(2, 0, (0.6, 2.6), 2.2),
                domain(3, 1, (1.0, 1.0), 2.2),
                domain(4, 0, (1.5, 0.8), 2.2),
            ],
        ),
    };
    Scenario {
        name,
        len: SCENARIO_LEN,
        channels: 2,
        classes: 3,
        structures,
        domains,
    }
}

/// All samples of a scenario, tagged by domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: usize,
    pub len: usize,
    pub classes: usize,
    pub samples: Vec<Sample>,
    /// `(domain id, structure id)` per domain, in generation order.
    pub domain_structure: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn domain_ids(&self) -> Vec<usize> {
        self.domain_structure.iter().map(|&(d, _)| d).collect()
    }

    pub fn domain(&self, id: usize) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.domain == id).collect()
    }

    pub fn to_container(&self) -> Container {
        let meta = json!({
            "channels": self.channels,
            "len": self.len,
            "classes": self.classes,
            "n": self.samples.len(),
            "labels": self.samples.iter().map(|s| s.label).collect::<Vec<_>>(),
            "domains": self.samples.iter().map(|s| s.domain).collect::<Vec<_>>(),
            "domain_structure": self.domain_structure,
        });
        let mut c = Container::new("dataset", DATASET_FORMAT_VERSION, meta);
        let values = self.samples.iter().flat_map(|s| s.x.as_slice().iter().copied()).collect();
        c.push("x", vec![self.samples.len(), self.channels, self.len], values);
        c
    }

    pub fn from_container(c: &Container) -> Result<Dataset> {
        c.expect("dataset", DATASET_FORMAT_VERSION)?;
        let channels: usize = meta_parse(&c.meta, "channels")?;
        let len: usize = meta_parse(&c.meta, "len")?;
        let classes: usize = meta_parse(&c.meta, "classes")?;
        let n: usize = meta_parse(&c.meta, "n")?;
        let labels: Vec<usize> = meta_parse(&c.meta, "labels")?;
        let domains: Vec<usize> = meta_parse(&c.meta, "domains")?;
        let domain_structure: Vec<(usize, usize)> = meta_parse(&c.meta, "domain_structure")?;
        let (info, x) = c.array("x")?;
        if info.shape != [n, channels, len] || labels.len() != n || domains.len() != n {
            return Err(SscfError::Format("dataset header and payload disagree".into()));
        }
        if labels.iter().any(|&l| l >= classes) {
            return Err(SscfError::InvariantViolation("label out of range".into()));
        }
        let samples = x
            .chunks_exact(channels * len)
            .zip(labels.iter().zip(&domains))
            .map(|(chunk, (&label, &domain))| {
                Ok(Sample {
                    x: Matrix::from_vec(channels, len, chunk.to_vec())?,
                    label,
                    domain,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            channels,
            len,
            classes,
            samples,
            domain_structure,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Dataset> {
        Dataset::from_container(&Container::load(path)?)
    }
}

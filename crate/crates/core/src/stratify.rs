//! Hard K-Means over vectorized power spectra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SscfError};
use crate::matrix::squared_distance;
use crate::spectral::PowerSpectrum;

pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct StrataModel {
    pub k: usize,
    /// `(channels, bins)` of the spectra the centers live over.
    pub shape: (usize, usize),
    pub fingerprint: u64,
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
    /// Inertia after each assignment step.
    pub history: Vec<f64>,
}

impl StrataModel {
    pub fn dim(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Model whose assignments are given rather than learned; centers are member means.
    /// Strata without members get a zero center.
    pub fn from_assignments(
        spectra: &[PowerSpectrum],
        k: usize,
        assignments: Vec<usize>,
    ) -> Result<StrataModel> {
        let (shape, fingerprint) = check_homogeneous(spectra)?;
        if k == 0 {
            return Err(SscfError::InvalidK { k, samples: spectra.len() });
        }
        if assignments.len() != spectra.len() {
            return Err(SscfError::ShapeMismatch(format!(
                "{} assignments for {} spectra",
                assignments.len(),
                spectra.len()
            )));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(SscfError::InvalidInput(format!("assignment {bad} >= K={k}")));
        }
        let points: Vec<&[f64]> = spectra.iter().map(|p| p.data().as_slice()).collect();
        let dim = shape.0 * shape.1;
        let mut centers = vec![vec![0.0; dim]; k];
        update_centers(&points, &assignments, &mut centers);
        let inertia = inertia(&points, &assignments, &centers);
        Ok(StrataModel {
            k,
            shape,
            fingerprint,
            centers,
            assignments,
            inertia,
            seed: 0,
            history: vec![inertia],
        })
    }

    /// Recomputes the inertia from centers and assignments.
    pub fn recompute_inertia(&self, spectra: &[PowerSpectrum]) -> f64 {
        let points: Vec<&[f64]> = spectra.iter().map(|p| p.data().as_slice()).collect();
        inertia(&points, &self.assignments, &self.centers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.centers.len() != self.k {
            return Err(SscfError::InvariantViolation(format!(
                "{} centers for K={}",
                self.centers.len(),
                self.k
            )));
        }
        if self.centers.iter().any(|c| c.len() != self.dim() || c.iter().any(|v| !v.is_finite())) {
            return Err(SscfError::InvariantViolation("malformed strata centers".into()));
        }
        if self.assignments.iter().any(|&a| a >= self.k) {
            return Err(SscfError::InvariantViolation("assignment out of range".into()));
        }
        Ok(())
    }
}

fn check_homogeneous(spectra: &[PowerSpectrum]) -> Result<((usize, usize), u64)> {
    let first = spectra
        .first()
        .ok_or_else(|| SscfError::InvalidInput("no spectra to cluster".into()))?;
    let shape = first.data().shape();
    for p in spectra {
        if p.data().shape() != shape || p.fingerprint() != first.fingerprint() {
            return Err(SscfError::ConfigMismatch(
                "spectra differ in shape or spectral config".into(),
            ));
        }
    }
    Ok((shape, first.fingerprint()))
}

/// Lloyd's algorithm with k-means++ seeding on `vec(P)`.
pub fn kmeans_fit(
    spectra: &[PowerSpectrum],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<StrataModel> {
    let (shape, fingerprint) = check_homogeneous(spectra)?;
    let points: Vec<&[f64]> = spectra.iter().map(|p| p.data().as_slice()).collect();
    let fit = kmeans_points(&points, k, seed, max_iter, tol)?;
    Ok(StrataModel {
        k,
        shape,
        fingerprint,
        centers: fit.centers,
        assignments: fit.assignments,
        inertia: fit.inertia,
        seed,
        history: fit.history,
    })
}

/// Best of `restarts` fits (seeds `seed, seed+1, ...`) by inertia; ties keep the earliest.
pub fn kmeans_fit_best(
    spectra: &[PowerSpectrum],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<StrataModel> {
    let mut best: Option<StrataModel> = None;
    for r in 0..restarts.max(1) as u64 {
        let m = kmeans_fit(spectra, k, seed.wrapping_add(r), max_iter, tol)?;
        if best.as_ref().is_none_or(|b| m.inertia < b.inertia) {
            best = Some(m);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Nearest center by Euclidean distance, lowest index on ties.
pub fn assign_stratum(model: &StrataModel, p: &PowerSpectrum) -> Result<usize> {
    if p.data().shape() != model.shape {
        return Err(SscfError::ShapeMismatch(format!(
            "spectrum {:?} vs model {:?}",
            p.data().shape(),
            model.shape
        )));
    }
    Ok(nearest(p.data().as_slice(), &model.centers).0)
}

#[derive(Debug, Clone)]
pub struct PointFit {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub history: Vec<f64>,
}

pub fn kmeans_points(
    points: &[&[f64]],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<PointFit> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(SscfError::InvalidK { k, samples: n });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(SscfError::ShapeMismatch("points differ in dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_init(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        assign_all(points, &centers, &mut assignments);
        repair_empty(points, &mut centers, &mut assignments);
        history.push(inertia(points, &assignments, &centers));

        let old = centers.clone();
        update_centers(points, &assignments, &mut centers);
        let moved: f64 = old
            .iter()
            .zip(&centers)
            .map(|(a, b)| squared_distance(a, b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = centers.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        if moved <= tol * scale.max(1e-300) {
            break;
        }
    }
    assign_all(points, &centers, &mut assignments);
    repair_empty(points, &mut centers, &mut assignments);
    update_centers(points, &assignments, &mut centers);
    if transfer_refine(points, &mut centers, &mut assignments, max_iter.max(1)) {
        update_centers(points, &assignments, &mut centers);
        history.push(inertia(points, &assignments, &centers));
    }
    let final_inertia = inertia(points, &assignments, &centers);
    history.push(final_inertia);
    Ok(PointFit {
        centers,
        assignments,
        inertia: final_inertia,
        history,
    })
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.gen_range(0..n)].to_vec());
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            rng.gen_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centers.push(c);
    }
    centers
}

pub(crate) fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(points: &[&[f64]], centers: &[Vec<f64>], assignments: &mut [usize]) {
    for (a, p) in assignments.iter_mut().zip(points) {
        *a = nearest(p, centers).0;
    }
}

/// Moves each empty center onto the point farthest from its own center.
/// Stops once the farthest point already sits on its center (nothing to gain).
fn repair_empty(points: &[&[f64]], centers: &mut [Vec<f64>], assignments: &mut [usize]) {
    let k = centers.len();
    for _ in 0..k {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (0, 0.0);
        for (i, p) in points.iter().enumerate() {
            if counts[assignments[i]] < 2 {
                continue;
            }
            let d = squared_distance(p, &centers[assignments[i]]);
            if d > far.1 {
                far = (i, d);
            }
        }
        if far.1 <= 0.0 {
            return;
        }
        centers[empty] = points[far.0].to_vec();
        assign_all(points, centers, assignments);
    }
}

/// Single-point transfers: moves a point to another cluster whenever that
/// lowers the inertia, keeping both means exact. Lloyd can stop at partitions
/// that such moves still improve. Returns whether anything moved.
fn transfer_refine(points: &[&[f64]], centers: &mut [Vec<f64>], assignments: &mut [usize], max_sweeps: usize) -> bool {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    let mut any = false;
    for _ in 0..max_sweeps {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let na = counts[a] as f64;
            let out_cost = na / (na - 1.0) * squared_distance(p, &centers[a]);
            let mut best = (a, out_cost * (1.0 - 1e-12));
            for (b, c) in centers.iter().enumerate() {
                if b != a {
                    let nb = counts[b] as f64;
                    let in_cost = nb / (nb + 1.0) * squared_distance(p, c);
                    if in_cost < best.1 {
                        best = (b, in_cost);
                    }
                }
            }
            let b = best.0;
            if b == a {
                continue;
            }
            let nb = counts[b] as f64;
            for (j, &v) in p.iter().enumerate() {
                centers[a][j] = (na * centers[a][j] - v) / (na - 1.0);
                centers[b][j] = (nb * centers[b][j] + v) / (nb + 1.0);
            }
            counts[a] -= 1;
            counts[b] += 1;
            assignments[i] = b;
            moved = true;
        }
        if !moved {
            break;
        }
        any = true;
    }
    any
}

fn update_centers(points: &[&[f64]], assignments: &[usize], centers: &mut [Vec<f64>]) {
    let dim = centers.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    for ((c, s), &n) in centers.iter_mut().zip(sums).zip(&counts) {
        if n > 0 {
            let inv = 1.0 / n as f64;
            for (cv, sv) in c.iter_mut().zip(s) {
                *cv = sv * inv;
            }
        }
    }
}

fn inertia(points: &[&[f64]], assignments: &[usize], centers: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &centers[a]))
        .sum()
}

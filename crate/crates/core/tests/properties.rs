use proptest::prelude::*;

use sscf::anchors::build_anchor;
use sscf::calibrate::{apply_frequency_mask, calibrate, CalibrationConfig};
use sscf::harness::{accuracy, macro_f1, Confusion};
use sscf::spectral::{irfft, rfft, welch_psd, FeatureMap, PowerSpectrum, SpectralConfig};
use sscf::stratify::{kmeans_fit, DEFAULT_MAX_ITER, DEFAULT_TOL};
use sscf::Matrix;

fn map(channels: usize, len: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0..10.0f64, channels * len).prop_map(move |v| Matrix::from_vec(channels, len, v).unwrap())
}

fn shaped_map() -> impl Strategy<Value = Matrix> {
    (1usize..4, 2usize..130).prop_flat_map(|(c, l)| map(c, l))
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn rfft_round_trip(x in shaped_map()) {
        let len = x.cols();
        let back = irfft(&rfft(&FeatureMap::new(x.clone()).unwrap()).unwrap(), len).unwrap();
        for (a, b) in back.matrix().as_slice().iter().zip(x.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn welch_is_nonnegative_and_quadratic(x in map(2, 96), a in 0.1..5.0f64) {
        let cfg = SpectralConfig { frame_len: 32, hop: 16, ..SpectralConfig::default() };
        let p = welch_psd(&FeatureMap::new(x.clone()).unwrap(), &cfg).unwrap();
        let q = welch_psd(&FeatureMap::new(x.map(|v| v * a)).unwrap(), &cfg).unwrap();
        prop_assert!(p.data().as_slice().iter().all(|&v| v >= 0.0));
        for (u, v) in p.data().as_slice().iter().zip(q.data().as_slice()) {
            prop_assert!((v - a * a * u).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn frozen_mask_is_linear_and_self_adjoint(
        x in map(2, 40),
        y in map(2, 40),
        m in prop::collection::vec(0.0..4.0f64, 2 * 21),
        a in -3.0..3.0f64,
    ) {
        let mask = Matrix::from_vec(2, 21, m).unwrap();
        let mx = apply_frequency_mask(&x, &mask).unwrap();
        let my = apply_frequency_mask(&y, &mask).unwrap();
        let combo = Matrix::from_vec(2, 40, x.as_slice().iter().zip(y.as_slice()).map(|(u, v)| a * u + v).collect()).unwrap();
        let mc = apply_frequency_mask(&combo, &mask).unwrap();
        for ((c, u), v) in mc.as_slice().iter().zip(mx.as_slice()).zip(my.as_slice()) {
            prop_assert!((c - (a * u + v)).abs() <= 1e-9 * (1.0 + c.abs()));
        }
        let (l, r) = (dot(&mx, &y), dot(&x, &my));
        prop_assert!((l - r).abs() <= 1e-9 * (1.0 + l.abs()));
    }

    #[test]
    fn calibration_keeps_shape_and_mean_energy_finite(x in map(2, 64), anchor in map(2, 64)) {
        let cfg = SpectralConfig { frame_len: 16, hop: 8, ..SpectralConfig::default() };
        let p = welch_psd(&FeatureMap::new(anchor).unwrap(), &cfg).unwrap();
        let strata = sscf::stratify::StrataModel::from_assignments(std::slice::from_ref(&p), 1, vec![0]).unwrap();
        let set = sscf::anchors::build_anchor_set(&[p], &strata, &cfg, 1e-8).unwrap();
        let out = calibrate(&FeatureMap::new(x.clone()).unwrap(), &set, &cfg, &CalibrationConfig::default()).unwrap();
        prop_assert_eq!(out.data.matrix().shape(), x.shape());
        prop_assert!(out.data.matrix().is_finite());
        prop_assert!(out.mask.as_slice().iter().all(|&m| m >= 0.0 && m.is_finite()));
        prop_assert_eq!(out.matched_stratum, 0);
    }

    #[test]
    fn mas_anchor_is_bounded_by_mean_power(
        members in prop::collection::vec(prop::collection::vec(0.0..100.0f64, 6), 1..8),
    ) {
        let spectra: Vec<PowerSpectrum> = members
            .iter()
            .map(|v| PowerSpectrum::new(Matrix::from_vec(2, 3, v.clone()).unwrap(), 1).unwrap())
            .collect();
        let refs: Vec<&PowerSpectrum> = spectra.iter().collect();
        let eps = 1e-8;
        let anchor = build_anchor(&refs, eps).unwrap();
        for i in 0..6 {
            let mean = members.iter().map(|v| v[i] + eps).sum::<f64>() / members.len() as f64;
            let min = members.iter().map(|v| v[i] + eps).fold(f64::MAX, f64::min);
            let p = anchor.power.as_slice()[i];
            prop_assert!(p <= mean * (1.0 + 1e-12));
            prop_assert!(p >= min * (1.0 - 1e-12));
        }
    }

    #[test]
    fn kmeans_beats_single_cluster_and_assigns_nearest(
        pts in prop::collection::vec(prop::collection::vec(0.0..10.0f64, 3), 4..30),
        k in 1usize..4,
        seed in 0u64..1000,
    ) {
        let spectra: Vec<PowerSpectrum> = pts
            .iter()
            .map(|v| PowerSpectrum::new(Matrix::from_vec(1, 3, v.clone()).unwrap(), 0).unwrap())
            .collect();
        let m = kmeans_fit(&spectra, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let one = kmeans_fit(&spectra, 1, seed, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        prop_assert!(m.inertia <= one.inertia * (1.0 + 1e-12));
        for w in m.history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        for (p, &a) in pts.iter().zip(&m.assignments) {
            let d = |c: &Vec<f64>| p.iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            let own = d(&m.centers[a]);
            prop_assert!(m.centers.iter().all(|c| own <= d(c) + 1e-9));
        }
    }

    #[test]
    fn metrics_are_bounded(cells in prop::collection::vec(0u64..20, 9)) {
        prop_assume!(cells.iter().sum::<u64>() > 0);
        let c: Confusion = cells.chunks(3).map(|r| r.to_vec()).collect();
        let f = macro_f1(&c).unwrap();
        let a = accuracy(&c).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((0.0..=1.0).contains(&a));
        let diagonal = (0..3).all(|i| (0..3).all(|j| i == j || c[i][j] == 0));
        let all_classes = (0..3).all(|i| c[i][i] > 0);
        if diagonal && all_classes {
            prop_assert_eq!(f, 1.0);
        }
    }
}

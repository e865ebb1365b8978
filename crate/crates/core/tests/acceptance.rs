//! Acceptance suite. Runs every criterion in order, prints one line each and
//! fails the process if any criterion fails.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sscf::anchors::{build_anchor, build_anchor_set, AnchorSet};
use sscf::calibrate::{apply_frequency_mask, calibrate, CalibrationConfig};
use sscf::harness::{
    run_lodo, run_lodo_seeds, run_stage1, run_stage2, sweep_k, sweep_rank, Access, DomainSource, ExperimentResult,
    Phase, Strategy, StrategyConfig,
};
use sscf::model::{forward_loss, backward, ClassifierParams, Conv1d, EncoderParams, Pooling, CalibrationStage};
use sscf::spectral::{irfft, rfft, welch_psd, FeatureMap, PowerSpectrum, SpectralConfig};
use sscf::stratify::{kmeans_fit, StrataModel, DEFAULT_MAX_ITER, DEFAULT_TOL};
use sscf::synth::{make_scenario, Dataset, Sample, ScenarioName};
use sscf::Matrix;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_map(rng: &mut ChaCha8Rng, channels: usize, len: usize) -> Matrix {
    let v = (0..channels * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(channels, len, v).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct O(L^2) one-sided DFT as `(re, im)` pairs.
fn dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n / 2 + 1)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                let ang = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                (re + v * ang.cos(), im + v * ang.sin())
            })
        })
        .collect()
}

fn fft_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_rt: f64 = 0.0;
    let mut worst_dft: f64 = 0.0;
    for case in 0..1000 {
        let channels = rng.gen_range(1..=4);
        let len = if case % 2 == 0 { rng.gen_range(2..=64) } else { rng.gen_range(65..=512) };
        let x = random_map(&mut rng, channels, len);
        let h = FeatureMap::new(x.clone()).unwrap();
        let spec = rfft(&h).unwrap();
        let back = irfft(&spec, len).unwrap();
        let diff: Vec<f64> = back.matrix().as_slice().iter().zip(x.as_slice()).map(|(a, b)| a - b).collect();
        worst_rt = worst_rt.max(norm(&diff) / norm(x.as_slice()).max(1e-300));
        if len <= 64 {
            for c in 0..channels {
                for (z, (re, im)) in spec.channel(c).iter().zip(dft(x.row(c))) {
                    worst_dft = worst_dft.max((z.re - re).abs()).max((z.im - im).abs());
                }
            }
        }
    }
    outcome(
        worst_rt < 1e-9 && worst_dft < 1e-10,
        format!("max round-trip rel err {worst_rt:.2e} (< 1e-9), max |rfft - DFT| {worst_dft:.2e} (< 1e-10)"),
    )
}

/// Anchor set of `k` singleton strata drawn from random series of length `len`.
fn random_anchors(rng: &mut ChaCha8Rng, channels: usize, len: usize, k: usize, cfg: &SpectralConfig) -> AnchorSet {
    let spectra: Vec<PowerSpectrum> = (0..k)
        .map(|_| {
            let x = random_map(rng, channels, len);
            welch_psd(&FeatureMap::new(x).unwrap(), cfg).unwrap()
        })
        .collect();
    let strata = StrataModel::from_assignments(&spectra, k, (0..k).collect()).unwrap();
    build_anchor_set(&spectra, &strata, cfg, 1e-8).unwrap()
}

fn phase_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scfg = SpectralConfig { frame_len: 16, hop: 8, ..SpectralConfig::default() };
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for _ in 0..500 {
        let channels = rng.gen_range(1..=3);
        let len = rng.gen_range(16..=200);
        let k = rng.gen_range(1..=3);
        let anchor_len = rng.gen_range(16..=200);
        let anchors = random_anchors(&mut rng, channels, anchor_len, k, &scfg);
        let x = FeatureMap::new(random_map(&mut rng, channels, len)).unwrap();
        let ccfg = CalibrationConfig { rank: rng.gen_range(1..=k), ..CalibrationConfig::default() };
        let y = calibrate(&x, &anchors, &scfg, &ccfg).unwrap();
        let (sx, sy) = (rfft(&x).unwrap(), rfft(&y.data).unwrap());
        for c in 0..channels {
            for (a, b) in sx.channel(c).iter().zip(sy.channel(c)) {
                if a.norm() > 1e-9 {
                    let d = (b / a).arg().abs();
                    worst = worst.max(d);
                    checked += 1;
                }
            }
        }
    }
    outcome(worst < 1e-6, format!("max phase deviation {worst:.2e} rad over {checked} bins (< 1e-6)"))
}

/// Loss with every calibration mask frozen at the values in `masks`.
fn frozen_loss(enc: &EncoderParams, clf: &ClassifierParams, xs: &[Matrix], labels: &[usize], masks: &[Option<Matrix>]) -> f64 {
    let ys: Vec<Matrix> = xs
        .iter()
        .zip(masks)
        .map(|(x, m)| {
            let h = sscf::model::encode(enc, x).unwrap().into_matrix();
            match m {
                Some(m) => apply_frequency_mask(&h, m).unwrap(),
                None => h,
            }
        })
        .collect();
    let id = EncoderParams::Identity { channels: ys[0].rows() };
    let batch: Vec<(&Matrix, usize)> = ys.iter().zip(labels).map(|(y, &l)| (y, l)).collect();
    forward_loss(&id, clf, None, &batch).unwrap().loss
}

fn flat(enc: &EncoderParams, clf: &ClassifierParams) -> Vec<f64> {
    let mut v = match enc {
        EncoderParams::Conv1d(c) => [c.kernels.clone(), c.bias.clone()].concat(),
        EncoderParams::Identity { .. } => Vec::new(),
    };
    v.extend_from_slice(clf.weights.as_slice());
    v.extend_from_slice(&clf.bias);
    v
}

fn unflat(enc: &mut EncoderParams, clf: &mut ClassifierParams, v: &[f64]) {
    let mut it = v.iter().copied();
    if let EncoderParams::Conv1d(c) = enc {
        c.kernels.iter_mut().chain(c.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
    }
    clf.weights.as_mut_slice().iter_mut().chain(clf.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scfg = SpectralConfig { frame_len: 8, hop: 4, ..SpectralConfig::default() };
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    let mut with_stage = 0;
    while configs < 100 {
        let c_in = rng.gen_range(1..=3);
        let t = rng.gen_range(16..=40);
        let conv = rng.gen_bool(0.7);
        let enc = if conv {
            let (c_out, width, stride) = (rng.gen_range(1..=3), rng.gen_range(1..=4), rng.gen_range(1..=2));
            EncoderParams::Conv1d(Conv1d::new(c_out, c_in, width, stride, rng.gen()))
        } else {
            EncoderParams::Identity { channels: c_in }
        };
        let (co, to) = (enc.out_channels(), enc.out_len(t).unwrap());
        let pooling = if rng.gen_bool(0.5) { Pooling::SpectralPower } else { Pooling::GlobalMean };
        let classes = rng.gen_range(2..=4);
        let mut clf = ClassifierParams::new(pooling, co, to, classes, rng.gen()).unwrap();
        clf.weights.as_mut_slice().iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        clf.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let n = rng.gen_range(1..=4);
        let xs: Vec<Matrix> = (0..n).map(|_| random_map(&mut rng, c_in, t)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        // ReLU is not differentiable at 0; redraw configs with a kink inside the stencil.
        if let EncoderParams::Conv1d(c) = &enc {
            let near_kink = xs
                .iter()
                .any(|x| c.pre_activation(x).unwrap().as_slice().iter().any(|p| p.abs() < 1e-3));
            if near_kink {
                continue;
            }
        }
        let k = rng.gen_range(1..=3);
        let anchors = random_anchors(&mut rng, co, to, k, &scfg);
        let ccfg = CalibrationConfig { rank: rng.gen_range(1..=k), ..CalibrationConfig::default() };
        let use_stage = to >= scfg.frame_len && rng.gen_bool(0.6);
        let stage = use_stage.then_some(CalibrationStage { anchors: &anchors, spectral: &scfg, calibration: &ccfg });
        with_stage += use_stage as usize;

        let batch: Vec<(&Matrix, usize)> = xs.iter().zip(&labels).map(|(x, &l)| (x, l)).collect();
        let pass = forward_loss(&enc, &clf, stage, &batch).unwrap();
        let grads = backward(&enc, &clf, &pass).unwrap();
        let masks: Vec<Option<Matrix>> = xs
            .iter()
            .map(|x| {
                stage.map(|s| {
                    let h = sscf::model::encode(&enc, x).unwrap();
                    calibrate(&h, s.anchors, s.spectral, s.calibration).unwrap().mask
                })
            })
            .collect();

        let base = flat(&enc, &clf);
        let analytic = grads.flat();
        assert_eq!(base.len(), analytic.len());
        let (mut e, mut c) = (enc.clone(), clf.clone());
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] = base[i] + step;
            unflat(&mut e, &mut c, &p);
            let up = frozen_loss(&e, &c, &xs, &labels, &masks);
            p[i] = base[i] - step;
            unflat(&mut e, &mut c, &p);
            let down = frozen_loss(&e, &c, &xs, &labels, &masks);
            worst = worst.max(((up - down) / (2.0 * step) - analytic[i]).abs());
        }
        for s in 0..n {
            for j in 0..c_in * t {
                let mut xp = xs.clone();
                xp[s].as_mut_slice()[j] += step;
                let up = frozen_loss(&enc, &clf, &xp, &labels, &masks);
                xp[s].as_mut_slice()[j] -= 2.0 * step;
                let down = frozen_loss(&enc, &clf, &xp, &labels, &masks);
                worst = worst.max(((up - down) / (2.0 * step) - grads.inputs[s].as_slice()[j]).abs());
            }
        }
        configs += 1;
    }
    outcome(
        worst < 1e-5,
        format!("max |analytic - central FD| {worst:.2e} (< 1e-5) over {configs} configs, {with_stage} with calibration"),
    )
}

fn anchor_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let eps = 1e-8;
    let (mut worst_sq, mut worst_jensen_violation, mut worst_uniform_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut strict_ok = true;
    for case in 0..1000 {
        let (c, f) = (rng.gen_range(1..=3), rng.gen_range(1..=33));
        let size = rng.gen_range(1..=6);
        let uniform = case % 4 == 0;
        let first: Vec<f64> = (0..c * f).map(|_| rng.gen_range(0.0..10.0)).collect();
        let members: Vec<PowerSpectrum> = (0..size)
            .map(|_| {
                let v = if uniform { first.clone() } else { (0..c * f).map(|_| rng.gen_range(0.0..10.0)).collect() };
                PowerSpectrum::new(Matrix::from_vec(c, f, v).unwrap(), 7).unwrap()
            })
            .collect();
        let refs: Vec<&PowerSpectrum> = members.iter().collect();
        let anchor = build_anchor(&refs, eps).unwrap();
        for idx in 0..c * f {
            let vals: Vec<f64> = members.iter().map(|p| p.data().as_slice()[idx] + eps).collect();
            let a = vals.iter().map(|v| v.sqrt()).sum::<f64>() / size as f64;
            let mean = vals.iter().sum::<f64>() / size as f64;
            let p = anchor.power.as_slice()[idx];
            worst_sq = worst_sq.max((p - a * a).abs() / (a * a).max(1e-300));
            worst_sq = worst_sq.max((p - anchor.amplitude.as_slice()[idx].powi(2)).abs() / p.max(1e-300));
            worst_jensen_violation = worst_jensen_violation.max((p - mean) / mean);
            let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
            if uniform || size == 1 {
                worst_uniform_gap = worst_uniform_gap.max((mean - p).abs() / mean);
            } else if spread > 1e-6 * mean && p >= mean {
                strict_ok = false;
            }
        }
    }
    let pass = worst_sq < 1e-12 && worst_jensen_violation <= 1e-15 && worst_uniform_gap < 1e-12 && strict_ok;
    outcome(
        pass,
        format!(
            "max |P - A^2| rel {worst_sq:.1e}, max Jensen excess {worst_jensen_violation:.1e}, \
             uniform gap {worst_uniform_gap:.1e}, strict when non-uniform: {strict_ok}"
        ),
    )
}

fn inertia_of(points: &[Vec<f64>], assign: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
        total += members.iter().map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sum::<f64>();
    }
    total
}

fn exhaustive_optimum(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut assign = vec![0usize; n];
    for code in 0..k.pow(n as u32) {
        let mut r = code;
        for a in assign.iter_mut() {
            *a = r % k;
            r /= k;
        }
        best = best.min(inertia_of(points, &assign, k));
    }
    best
}

fn kmeans_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(1..=3);
        let n = rng.gen_range(k..=8);
        let dim = rng.gen_range(1..=3);
        let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let spectra: Vec<PowerSpectrum> = points
            .iter()
            .map(|p| PowerSpectrum::new(Matrix::from_vec(1, dim, p.clone()).unwrap(), 0).unwrap())
            .collect();
        let best = (0..10)
            .map(|s| kmeans_fit(&spectra, k, s, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap().inertia)
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best - exhaustive_optimum(&points, k));
    }
    outcome(worst < 1e-6, format!("max best-of-10 inertia excess over exhaustive optimum {worst:.2e} (< 1e-6)"))
}

fn self_calibration() -> Outcome {
    let scfg = SpectralConfig::default();
    let len = 512;
    let tone: Vec<f64> = (0..len).map(|t| (2.0 * std::f64::consts::PI * 40.0 * t as f64 / len as f64 + 0.3).cos()).collect();
    let x = FeatureMap::from_rows(&[tone.clone()]).unwrap();
    let anchors_from = |amp: f64| {
        let scaled: Vec<f64> = tone.iter().map(|v| v * amp).collect();
        let p = welch_psd(&FeatureMap::from_rows(&[scaled]).unwrap(), &scfg).unwrap();
        let strata = StrataModel::from_assignments(std::slice::from_ref(&p), 1, vec![0]).unwrap();
        build_anchor_set(&[p], &strata, &scfg, 1e-8).unwrap()
    };
    let ccfg = CalibrationConfig::default();
    let y = calibrate(&x, &anchors_from(1.0), &scfg, &ccfg).unwrap();
    let (px, py) = (welch_psd(&x, &scfg).unwrap(), welch_psd(&y.data, &scfg).unwrap());
    let diff: Vec<f64> = py.data().as_slice().iter().zip(px.data().as_slice()).map(|(a, b)| a - b).collect();
    let rel = norm(&diff) / norm(px.data().as_slice());

    let y4 = calibrate(&x, &anchors_from(2.0), &scfg, &ccfg).unwrap();
    let (sx, sy) = (rfft(&x).unwrap(), rfft(&y4.data).unwrap());
    let ratio = sy.channel(0)[40].norm() / sx.channel(0)[40].norm();
    outcome(
        rel < 0.01 && (ratio - 2.0).abs() < 0.04,
        format!("self-calibration PSD change {:.3}% (< 1%), 4x-power amplitude ratio {ratio:.4} (2 +/- 2%)", rel * 100.0),
    )
}

fn quick(strategy: Strategy, k: usize) -> StrategyConfig {
    StrategyConfig { strategy, k, ..StrategyConfig::default() }
}

fn same_results(a: &ExperimentResult, b: &ExperimentResult) -> bool {
    a.domains.len() == b.domains.len()
        && a.domains.iter().zip(&b.domains).all(|(x, y)| {
            x.domain == y.domain && x.confusion == y.confusion && x.macro_f1.to_bits() == y.macro_f1.to_bits()
        })
}

fn degeneracies(ds: &Dataset) -> Outcome {
    let structural1 = quick(Strategy::Structural, 1);
    let global = quick(Strategy::GlobalAnchor, 1);
    let mut unit = quick(Strategy::Structural, 2);
    unit.calibration.unit_mask = true;
    let baseline = quick(Strategy::BaselineNoCalibration, 1);

    // Trained parameters on one fold, then full LODO results.
    let train: Vec<&Sample> = ds.samples.iter().filter(|s| s.domain != 0).collect();
    let params = |cfg: &StrategyConfig| {
        let anchors = cfg.uses_calibration().then(|| run_stage1(&train, ds.classes, cfg).unwrap());
        let model = run_stage2(&train, ds.classes, anchors.as_ref(), cfg).unwrap();
        (anchors, model.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    let (a1, p1) = params(&structural1);
    let (ag, pg) = params(&global);
    let anchors_equal = match (a1, ag) {
        (Some(a), Some(b)) => a.anchors == b.anchors,
        _ => false,
    };
    let (_, pu) = params(&unit);
    let (_, pb) = params(&baseline);
    let mut lodo_equal = true;
    for &seed in &SEEDS[..2] {
        let run = |cfg: &StrategyConfig| run_lodo(ds, &StrategyConfig { seed, ..cfg.clone() }).unwrap();
        lodo_equal &= same_results(&run(&structural1), &run(&global));
        lodo_equal &= same_results(&run(&unit), &run(&baseline));
    }
    outcome(
        anchors_equal && p1 == pg && pu == pb && lodo_equal,
        format!(
            "K=1 vs global: anchors {anchors_equal}, params {}; unit-mask vs baseline: params {}; LODO bit-equal {lodo_equal}",
            p1 == pg,
            pu == pb
        ),
    )
}

fn mean_mf1(results: &[ExperimentResult]) -> f64 {
    100.0 * results.iter().map(|r| r.avg_macro_f1).sum::<f64>() / results.len() as f64
}

fn ablation(ds: &Dataset) -> Outcome {
    let run = |s: Strategy, k: usize| mean_mf1(&run_lodo_seeds(ds, &quick(s, k), &SEEDS).unwrap());
    let baseline = run(Strategy::BaselineNoCalibration, 1);
    let global = run(Strategy::GlobalAnchor, 1);
    let structural = run(Strategy::Structural, 2);
    outcome(
        structural >= global + 5.0 && structural >= baseline + 5.0,
        format!("mean MF1 structural(K=2) {structural:.2}, global {global:.2}, baseline {baseline:.2} (need +5 over both)"),
    )
}

fn rank_degradation(ds: &Dataset) -> Outcome {
    let rows = sweep_rank(ds, &quick(Strategy::Structural, 3), &[1, 2, 3], &SEEDS).unwrap();
    let m: Vec<f64> = rows.iter().map(|r| 100.0 * r.avg_macro_f1).collect();
    let monotone = m.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        monotone && m[0] - m[2] >= 10.0,
        format!("K=3 mean MF1 by rank R=1,2,3: {:.2}, {:.2}, {:.2} (non-increasing, R1 - R3 >= 10)", m[0], m[1], m[2]),
    )
}

fn k_sensitivity(ds: &Dataset) -> Outcome {
    let rows = sweep_k(ds, &quick(Strategy::Structural, 2), &[1, 2, 3, 4], &SEEDS).unwrap();
    let m: Vec<f64> = rows.iter().map(|r| 100.0 * r.avg_macro_f1).collect();
    let k1_min = m.iter().all(|&v| v >= m[0]);
    let (late, early) = ((m[2] - m[3]).abs(), (m[0] - m[1]).abs());
    outcome(
        k1_min && late < early,
        format!(
            "mean MF1 K=1..4: {:.2}, {:.2}, {:.2}, {:.2}; K=1 minimal {k1_min}, |K3-K4| {late:.2} < |K1-K2| {early:.2}",
            m[0], m[1], m[2], m[3]
        ),
    )
}

/// Serves a dataset while recording every read in order.
struct CountingSource {
    inner: Dataset,
    log: Mutex<Vec<(usize, Access)>>,
}

impl DomainSource for CountingSource {
    fn domain_ids(&self) -> Vec<usize> {
        self.inner.domain_ids()
    }

    fn classes(&self) -> usize {
        self.inner.classes
    }

    fn load(&self, domain: usize, access: Access) -> sscf::Result<Vec<Sample>> {
        self.log.lock().unwrap().push((domain, access));
        DomainSource::load(&self.inner, domain, access)
    }
}

fn lodo_hygiene() -> Outcome {
    let source = CountingSource {
        inner: make_scenario(ScenarioName::TwoStructure).generate().unwrap(),
        log: Mutex::new(Vec::new()),
    };
    let cfg = StrategyConfig { train_epochs: 3, ..quick(Strategy::Structural, 2) };
    run_lodo(&source, &cfg).unwrap();
    let log = source.log.into_inner().unwrap();
    let domains = source.inner.domain_ids();
    let mut early_target_reads = 0;
    let mut folds_ok = true;
    for &held in &domains {
        let fold: Vec<(usize, Phase)> = log.iter().filter(|(_, a)| a.held_out == held).map(|(d, a)| (*d, a.phase)).collect();
        let first_eval = fold.iter().position(|&(_, p)| p == Phase::Evaluation).unwrap_or(fold.len());
        early_target_reads += fold[..first_eval].iter().filter(|&&(d, _)| d == held).count();
        let training: Vec<usize> = fold.iter().filter(|(_, p)| *p == Phase::Training).map(|(d, _)| *d).collect();
        let evaluation: Vec<usize> = fold.iter().filter(|(_, p)| *p == Phase::Evaluation).map(|(d, _)| *d).collect();
        let all_training_first = fold[first_eval..].iter().all(|&(_, p)| p == Phase::Evaluation);
        let sources_complete = domains.iter().filter(|&&d| d != held).all(|d| training.contains(d));
        folds_ok &= all_training_first && sources_complete && evaluation == vec![held];
    }
    outcome(
        early_target_reads == 0 && folds_ok,
        format!(
            "{} reads over {} folds, target reads before evaluation: {early_target_reads}, fold ordering ok: {folds_ok}",
            log.len(),
            domains.len()
        ),
    )
}

fn main() {
    let paper_like = make_scenario(ScenarioName::PaperLike).generate().expect("paper_like scenario");
    let criteria: Vec<(&str, u64, Box<dyn Fn() -> Outcome>)> = vec![
        ("fft round trip and DFT oracle", 5, Box::new(fft_round_trip)),
        ("phase preservation", 5, Box::new(phase_preservation)),
        ("gradient check", 30, Box::new(gradient_check)),
        ("MAS anchor algebra", 5, Box::new(anchor_algebra)),
        ("k-means vs exhaustive optimum", 60, Box::new(kmeans_oracle)),
        ("self-calibration", 5, Box::new(self_calibration)),
        ("strategy degeneracy", 60, Box::new(|| degeneracies(&paper_like))),
        ("ablation on paper_like", 180, Box::new(|| ablation(&paper_like))),
        ("rank degradation", 180, Box::new(|| rank_degradation(&paper_like))),
        ("K sensitivity", 360, Box::new(|| k_sensitivity(&paper_like))),
        ("LODO hygiene", 10, Box::new(lodo_hygiene)),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= Duration::from_secs(*limit);
        failed += !pass as usize;
        println!(
            "criterion {:>2} {}: {name}: {} [{:.2} s, limit {limit} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line to the
//! uncaptured standard error, then asserts.

use std::io::Write;
use std::process::Command;

use wtacrs::autodiff::{LinearConfig, LossKind, Network, SamplingMode, Targets};
use wtacrs::cli::config::{TaskKind, TrainConfig};
use wtacrs::cli::train::{final_accuracies, run_training};
use wtacrs::estimators::{
    col_row_distribution, optimal_det_size, theoretical_crs_variance, theoretical_wta_variance,
    variance_condition_holds, ColRowDistribution, Estimator, EstimatorKind,
};
use wtacrs::lab::{
    concentration_curve, exhaustive_moments, gradient_unbiasedness_experiment, monte_carlo_estimator,
    monte_carlo_moments, power_law_instance, random_instance,
};
use wtacrs::memory::{activation_bytes, classify_ops, profile_ops, BlockConfig, ScopeClass};
use wtacrs::tensor::{DenseMatrix, RandomSource};

/// Median final validation accuracy of exact training over seeds 1..=5, from
/// the reference run that froze this suite.
const FULL_REFERENCE_CLUSTERS: f64 = 0.97;
const FULL_REFERENCE_MAJORITY: f64 = 0.91;

fn verdict(id: u32, title: &str, ok: bool, detail: String) {
    let line = format!("{} criterion {id:>2} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(ok, "{line}");
}

/// Fifty small instances with `m ≤ 6` and `1 ≤ k ≤ m`.
fn enumerable_instances() -> Vec<(DenseMatrix, DenseMatrix, usize)> {
    (0..50u64)
        .map(|i| {
            let mut rng = RandomSource::new(1000 + i, 0);
            let m = 1 + (i as usize % 6);
            let (x, y) = random_instance(3, m, 3, &mut rng);
            let k = 1 + rng.below(m);
            (x, y, k)
        })
        .collect()
}

#[test]
fn criterion_01_enumeration_unbiasedness() {
    let mut worst: f64 = 0.0;
    for (x, y, k) in enumerable_instances() {
        let exact = x.matmul(&y).unwrap();
        for kind in [EstimatorKind::Crs, EstimatorKind::WtaCrs] {
            let r = exhaustive_moments(kind, &x, &y, k).unwrap();
            worst = worst.max(r.mean.max_abs_diff(&exact).unwrap());
        }
    }
    verdict(1, "enumeration unbiasedness", worst <= 1e-10, format!("max |E[est] - XY| = {worst:.3e} over 50 instances"));
}

#[test]
fn criterion_02_variance_formulas() {
    let mut worst: f64 = 0.0;
    for (x, y, k) in enumerable_instances() {
        let p = col_row_distribution(&x, &y).unwrap();
        let crs = exhaustive_moments(EstimatorKind::Crs, &x, &y, k).unwrap();
        worst = worst.max((crs.empirical_variance - theoretical_crs_variance(&x, &y, &p, k).unwrap()).abs());
        let wta = exhaustive_moments(EstimatorKind::WtaCrs, &x, &y, k).unwrap();
        let s = optimal_det_size(&p, k).unwrap();
        worst = worst.max((wta.empirical_variance - theoretical_wta_variance(&x, &y, &p, k, s).unwrap()).abs());
    }
    verdict(2, "variance formula cross-check", worst <= 1e-10, format!("max |enumerated - closed form| = {worst:.3e}"));
}

#[test]
fn criterion_03_monte_carlo_consistency() {
    let (x, y) = power_law_instance(16, 64, 8, 1.0, &mut RandomSource::new(3, 0));
    let trials = 1_000_000;
    let crs = monte_carlo_moments(EstimatorKind::Crs, &x, &y, 16, trials, 31).unwrap();
    let wta = monte_carlo_moments(EstimatorKind::WtaCrs, &x, &y, 16, trials, 31).unwrap();
    let det = monte_carlo_moments(EstimatorKind::DeterministicTopK, &x, &y, 16, trials, 31).unwrap();
    let th = crs.theoretical_variance.unwrap();
    let rel = (crs.empirical_variance - th).abs() / th;
    let ok = rel <= 0.02 && crs.bias_z() <= 3.0 && wta.bias_z() <= 3.0 && det.bias_z() > 5.0;
    verdict(
        3,
        "Monte-Carlo consistency",
        ok,
        format!(
            "CRS variance off by {:.3}%, bias z: CRS {:.2}, WTA-CRS {:.2}, deterministic {}",
            100.0 * rel,
            crs.bias_z(),
            wta.bias_z(),
            det.bias_z()
        ),
    );
}

#[test]
fn criterion_04_variance_ordering() {
    let mut checked = 0;
    let mut failures = Vec::new();
    for i in 0..20u64 {
        let decay = 0.6 + 0.1 * i as f64;
        let (x, y) = power_law_instance(8, 48, 6, decay, &mut RandomSource::new(400 + i, 0));
        let k = 12;
        let p = col_row_distribution(&x, &y).unwrap();
        let s = optimal_det_size(&p, k).unwrap();
        if !variance_condition_holds(&p, k, s).unwrap() {
            continue;
        }
        checked += 1;
        let th_crs = theoretical_crs_variance(&x, &y, &p, k).unwrap();
        let th_wta = theoretical_wta_variance(&x, &y, &p, k, s).unwrap();
        let mc_crs = monte_carlo_moments(EstimatorKind::Crs, &x, &y, k, 20_000, 40 + i).unwrap();
        let mc_wta = monte_carlo_moments(EstimatorKind::WtaCrs, &x, &y, k, 20_000, 40 + i).unwrap();
        if !(th_wta < th_crs && mc_wta.empirical_variance < mc_crs.empirical_variance) {
            failures.push(decay);
        }
    }

    let m = 24;
    let uniform = ColRowDistribution::uniform(m).unwrap();
    let (x, y) = random_instance(4, m, 4, &mut RandomSource::new(77, 0));
    let head = optimal_det_size(&uniform, 6).unwrap();
    let crs = Estimator::with_distribution(EstimatorKind::Crs, &x, &y, 6, uniform.clone(), None).unwrap();
    let wta = Estimator::with_distribution(EstimatorKind::WtaCrs, &x, &y, 6, uniform.clone(), None).unwrap();
    let coincide = (0..200).all(|t| crs.sample(&mut RandomSource::new(5, t)) == wta.sample(&mut RandomSource::new(5, t)));
    let v_crs = theoretical_crs_variance(&x, &y, &uniform, 6).unwrap();
    let v_wta = theoretical_wta_variance(&x, &y, &uniform, 6, 0).unwrap();
    let same_variance = (v_crs - v_wta).abs() <= 1e-12 * v_crs;
    let exact = x.matmul(&y).unwrap();
    let same_moments = monte_carlo_estimator(&crs, &exact, 5000, 9).unwrap().empirical_variance
        == monte_carlo_estimator(&wta, &exact, 5000, 9).unwrap().empirical_variance;

    let ok = checked > 0 && failures.is_empty() && head == 0 && coincide && same_variance && same_moments;
    verdict(
        4,
        "variance ordering",
        ok,
        format!(
            "{checked}/20 instances meet the condition, {} ordering failures; uniform head {head}, identical draws {coincide}",
            failures.len()
        ),
    );
}

#[test]
fn criterion_05_distribution_optimality() {
    let mut total = 0;
    let mut strict = 0;
    let mut violations = 0;
    for i in 0..10u64 {
        let mut rng = RandomSource::new(500 + i, 0);
        let (x, y) = random_instance(5, 12, 4, &mut rng);
        let p = col_row_distribution(&x, &y).unwrap();
        let best = theoretical_crs_variance(&x, &y, &p, 4).unwrap();
        for _ in 0..20 {
            let w: Vec<f64> = p.probs().iter().map(|&pi| pi * (0.4 * rng.standard_normal()).exp()).collect();
            let q = ColRowDistribution::from_weights(&w).unwrap();
            let v = theoretical_crs_variance(&x, &y, &q, 4).unwrap();
            total += 1;
            if best > v {
                violations += 1;
            }
            if best < v {
                strict += 1;
            }
        }
    }
    let share = strict as f64 / total as f64;
    verdict(
        5,
        "norm-product optimality",
        violations == 0 && share >= 0.95,
        format!("{violations} violations, strictly better in {strict}/{total} perturbations"),
    );
}

fn relu_pair(config: LinearConfig) -> (Network, DenseMatrix, Vec<usize>, Targets) {
    let net = Network::mlp(&[8, 16, 4], LossKind::SoftmaxCrossEntropy, config, 61).unwrap();
    let x = DenseMatrix::random_normal(40, 8, 1.0, &mut RandomSource::new(62, 0));
    let labels = (0..40).map(|i| (i * 7) % 4).collect();
    (net, x, (0..40).collect(), Targets::Classes(labels))
}

fn finite_difference_error(config: LinearConfig) -> f64 {
    let (mut net, x, ids, targets) = relu_pair(config);
    let out = net.forward(&x, &ids).unwrap();
    let (_, g) = net.loss_kind().loss_and_grad(&out, &targets).unwrap();
    net.backward(&g).unwrap();
    let grads = net.weight_grads().unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (layer, an) in grads.iter().enumerate() {
        let mut fd = an.clone();
        for i in 0..an.data().len() {
            let mut plus = net.clone();
            plus.linear_layers_mut()[layer].weight_mut().data_mut()[i] += eps;
            let mut minus = net.clone();
            minus.linear_layers_mut()[layer].weight_mut().data_mut()[i] -= eps;
            fd.data_mut()[i] = (plus.evaluate(&x, &targets).unwrap() - minus.evaluate(&x, &targets).unwrap()) / (2.0 * eps);
        }
        worst = worst.max(fd.frobenius_distance(an).unwrap().sqrt() / an.frobenius_norm());
    }
    worst
}

#[test]
fn criterion_06_gradient_unbiasedness() {
    let oracle = LinearConfig::sampled(EstimatorKind::WtaCrs, 0.3).with_sampling(SamplingMode::Oracle);
    let (net, x, ids, targets) = relu_pair(oracle);
    let report = gradient_unbiasedness_experiment(&net, &x, &ids, &targets, 50_000, 63).unwrap();
    let worst_bias = report.layers.iter().map(|l| l.relative_bias).fold(0.0, f64::max);
    let fd = finite_difference_error(LinearConfig::sampled(EstimatorKind::WtaCrs, 1.0));
    let ok = worst_bias <= 0.02 && report.input_grad_max_abs_error <= 1e-12 && fd <= 1e-4;
    let bands: Vec<String> = report
        .layers
        .iter()
        .map(|l| format!("{:.4} (3-sigma band {:.4})", l.relative_bias, l.bias_bound))
        .collect();
    verdict(
        6,
        "gradient unbiasedness",
        ok,
        format!(
            "relative bias per layer {}, input-gradient error {:.1e}, finite-difference error {fd:.2e}",
            bands.join(", "),
            report.input_grad_max_abs_error
        ),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn median_finals(config: &TrainConfig) -> Vec<(String, f64)> {
    let runs: Vec<Vec<(String, f64)>> = (1..=5).map(|s| final_accuracies(&run_training(config, s).unwrap())).collect();
    runs[0]
        .iter()
        .enumerate()
        .map(|(i, (m, _))| (m.clone(), median(runs.iter().map(|r| r[i].1).collect())))
        .collect()
}

#[test]
fn criterion_07_training_comparison() {
    let clusters = median_finals(&TrainConfig::default());
    let acc = |set: &[(String, f64)], m: &str| set.iter().find(|(n, _)| n == m).unwrap().1;
    let (full, wta, crs, det) = (
        acc(&clusters, "full"),
        acc(&clusters, "wta-crs@0.3"),
        acc(&clusters, "crs@0.1"),
        acc(&clusters, "deterministic@0.1"),
    );
    let majority = median_finals(&TrainConfig {
        task: TaskKind::MajorityToken,
        methods: vec!["full".into(), "wta-crs@0.3".into()],
        ..TrainConfig::default()
    });
    let (m_full, m_wta) = (acc(&majority, "full"), acc(&majority, "wta-crs@0.3"));
    let frozen = (full - FULL_REFERENCE_CLUSTERS).abs() < 1e-12 && (m_full - FULL_REFERENCE_MAJORITY).abs() < 1e-12;
    let ok = frozen
        && full >= 0.95
        && (full - wta).abs() <= 0.02
        && full > crs
        && wta > crs
        && crs >= det
        && m_full - m_wta <= 0.03;
    verdict(
        7,
        "training comparison",
        ok,
        format!(
            "clusters median: full {full}, wta-crs@0.3 {wta}, crs@0.1 {crs}, deterministic@0.1 {det}; majority: full {m_full}, wta-crs@0.3 {m_wta}"
        ),
    );
}

#[test]
fn criterion_08_memory_model() {
    let h = DenseMatrix::random_normal(40, 12, 1.0, &mut RandomSource::new(80, 0));
    let mut layer = wtacrs::autodiff::LinearLayer::new(
        DenseMatrix::random_normal(12, 5, 1.0, &mut RandomSource::new(81, 0)),
        LinearConfig::sampled(EstimatorKind::WtaCrs, 0.3),
    )
    .unwrap();
    layer.forward(&h, &(0..40).collect::<Vec<_>>()).unwrap();
    let layer_exact = layer.stored_elements() as f64 == 0.3 * (40 * 12) as f64;
    let t5 = BlockConfig::t5_base_like();
    let model_exact = activation_bytes(&t5, 0.3, 1)
        .unwrap()
        .ops
        .iter()
        .filter(|o| o.name.starts_with("Linear"))
        .all(|o| o.budget_elements == 0.3 * o.full_elements as f64);

    let compressible: Vec<_> = classify_ops(&t5).unwrap().into_iter().filter(|o| o.class == ScopeClass::Compressible).collect();
    let mut bound_ok = true;
    for i in 1..=10 {
        let b = i as f64 / 10.0;
        let real = activation_bytes(&t5, b, 24).unwrap().compression_ratio;
        let toy = profile_ops(&t5, &compressible, b, 24).unwrap().compression_ratio;
        let strict = if b < 1.0 { real < 1.0 / b } else { real == 1.0 };
        bound_ok &= strict && (toy - 1.0 / b).abs() <= 1e-12 * toy;
    }

    let share = activation_bytes(&t5, 1.0, 24).unwrap().activation_share;
    let in_band = (0.73..=0.88).contains(&share);
    verdict(
        8,
        "memory model",
        layer_exact && model_exact && bound_ok && in_band,
        format!(
            "stored elements exact {}, ratio bound {}, model-estimated activation share {:.4} (band 0.73..0.88)",
            layer_exact && model_exact,
            bound_ok,
            share
        ),
    );
}

#[test]
fn criterion_09_concentration_curve() {
    let p = ColRowDistribution::power_law(100, 2.0).unwrap();
    let c = concentration_curve(&p, 30).unwrap();
    let above_at_one = c.points[1].above;
    let monotone = c.points.windows(2).all(|w| w[1].mass >= w[0].mass);
    let concave = c.points.windows(3).all(|w| w[1].mass - w[0].mass >= w[2].mass - w[1].mass - 1e-15);
    let endpoints = c.points[0].mass == 0.0 && c.points[30].mass == p.top_mass(30);
    let u = concentration_curve(&ColRowDistribution::uniform(100).unwrap(), 30).unwrap();
    let uniform_below = u.points[1..30].iter().all(|q| q.mass <= q.reference);
    verdict(
        9,
        "concentration curve",
        above_at_one && monotone && concave && endpoints && uniform_below,
        format!(
            "power-law mass at |C|=1 {:.4} vs line {:.4}, monotone {monotone}, concave {concave}, uniform below line {uniform_below}",
            c.points[1].mass, c.points[1].reference
        ),
    );
}

fn cli(args: &[&str], threads: &str) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_wtacrs"))
        .args(args)
        .env("WTACRS_THREADS", threads)
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

#[test]
fn criterion_10_reproducibility() {
    let commands: [&[&str]; 6] = [
        &["estimate", "--seed", "12"],
        &["variance", "--seed", "12", "--trials", "20000"],
        &["concentration"],
        &["train", "--seed", "12", "--epochs", "3"],
        &["train", "--seed", "12", "--epochs", "1", "--task", "majority-token", "--examples", "200"],
        &["memory", "--preset", "t5-base-like", "--format", "csv"],
    ];
    let mut mismatched = Vec::new();
    for args in commands {
        let reference = cli(args, "1");
        for threads in ["1", "3", "8"] {
            if cli(args, threads) != reference {
                mismatched.push(format!("{} (threads {threads})", args[0]));
            }
        }
    }
    verdict(
        10,
        "reproducibility",
        mismatched.is_empty(),
        format!("{} commands rerun at 1, 3 and 8 workers, mismatches: {mismatched:?}", commands.len()),
    );
}

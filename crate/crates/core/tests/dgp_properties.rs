use nalgebra::DVector;
use ocmt::basis::{BasisConfig, VariableKind};
use ocmt::dgp::{generate, oracle_mean, DgpSpec};
use ocmt::ocmt::threshold;
use ocmt::regress::marginal_stat;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn big(id: u8, p_n: usize) -> ocmt::dgp::LabeledDataset {
    let spec = DgpSpec::new(id, 100_000, p_n, 7)
        .unwrap()
        .with_forecast_n(0)
        .unwrap();
    generate(&spec, 0).unwrap()
}

/// Population variance of `g(X)` for `X ~ U(0, 1)`, by composite Simpson.
fn uniform_variance(g: impl Fn(f64) -> f64) -> f64 {
    let k = 20_000;
    let h = 1.0 / k as f64;
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let mut acc = f(0.0) + f(1.0);
        for i in 1..k {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0
    };
    let m = simpson(&g);
    simpson(&|x| (g(x) - m).powi(2))
}

#[test]
fn dgp1_signal_to_noise() {
    use ocmt::dgp::component_functions as f;
    let population = [(1u8, 2.55), (2, 2.57), (3, 1.68), (4, 1.0)]
        .iter()
        .map(|&(k, a)| uniform_variance(|x| a * f(k, x).unwrap()))
        .sum::<f64>()
        .sqrt();
    let d = big(1, 10);
    let fx: Vec<f64> = (0..d.dataset.n())
        .map(|i| oracle_mean(&d.spec, &d.dataset.row(i)).unwrap())
        .collect();
    let ratio = variance(&fx).sqrt() / variance(&d.epsilon).sqrt();
    assert!((ratio - population).abs() <= 0.05, "sd ratio {ratio} vs {population}");
    assert!((variance(&d.epsilon) - 1.0).abs() <= 0.03);
}

#[test]
fn dgp7_unconditional_error_variance() {
    let d = big(7, 10);
    let v = variance(&d.epsilon);
    assert!((v - 1.0).abs() <= 0.03, "variance {v}");
}

#[test]
fn dgp10_binary_pair_correlation() {
    let d = big(10, 10);
    for (a, b) in [(1, 2), (1, 3), (2, 3)] {
        let r = correlation(d.dataset.column(a), d.dataset.column(b));
        assert!((r - 1.0 / 3.0).abs() <= 0.02, "Corr(X{}, X{}) = {r}", a + 1, b + 1);
    }
}

#[test]
fn determinism_and_stream_separation() {
    let spec = DgpSpec::new(6, 200, 30, 99).unwrap();
    let a = generate(&spec, 3).unwrap();
    let b = generate(&spec, 3).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!(a.epsilon, b.epsilon);
    assert_eq!(a.forecast, b.forecast);
    let c = generate(&spec, 4).unwrap();
    assert_ne!(a.dataset.y(), c.dataset.y());
}

#[test]
fn support_and_error_audit() {
    for id in 1..=10u8 {
        let spec = DgpSpec::new(id, 300, 21, 5).unwrap();
        let d = generate(&spec, 1).unwrap();
        for j in 0..d.dataset.p() {
            let col = d.dataset.column(j);
            match d.dataset.kind(j) {
                VariableKind::Continuous => assert!(col.iter().all(|v| (0.0..=1.0).contains(v))),
                VariableKind::BinaryLinear => assert!(col.iter().all(|v| *v == 0.0 || *v == 1.0)),
            }
        }
        for i in 0..d.dataset.n() {
            let f = oracle_mean(&spec, &d.dataset.row(i)).unwrap();
            let gap = d.dataset.y()[i] - f - d.epsilon[i];
            assert!(gap.abs() <= 1e-12 * (1.0 + f.abs()), "DGP{id} row {i}: {gap}");
        }
    }
}

#[test]
fn dgp6_ladder_weakens() {
    let d = big(6, 20);
    let x1 = d.dataset.column(0);
    let c: Vec<f64> = [5, 9, 13]
        .iter()
        .map(|&j| correlation(d.dataset.column(j), x1))
        .collect();
    assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");
}

#[test]
fn hidden_signal_is_marginally_quiet() {
    let config = BasisConfig::for_sample_size(400).unwrap();
    let cut = threshold(0.5, 100, config.m_n(), VariableKind::Continuous).unwrap();
    for id in [3u8, 4, 6] {
        let spec = DgpSpec::new(id, 400, 100, 2024).unwrap().with_forecast_n(0).unwrap();
        let quiet = (0..200)
            .filter(|&r| {
                let d = generate(&spec, r).unwrap();
                let block = d.dataset.design_block(4, &config).unwrap();
                let y = DVector::from_column_slice(d.dataset.y()).add_scalar(-d.dataset.mean_y());
                marginal_stat(&block, &y).unwrap().value < cut
            })
            .count();
        assert!(quiet >= 180, "DGP{id}: {quiet} of 200 below {cut}");
    }
}

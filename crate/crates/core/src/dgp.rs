//! Seeded simulation designs with known signal labels.
//!
//! Every design draws its covariates from independent `U(0,1)` variables
//! `W_j`, a few common factors `U_k`, and, for the binary designs, auxiliary
//! uniforms that are thresholded into Bernoulli variables. Each of these
//! families, and the error term, comes from its own ChaCha stream keyed by
//! `(seed, replication, role)`, so a replication is reproducible regardless
//! of the order in which replications are scheduled.
//!
//! Indices in this module are zero-based: covariate `X1` is column 0.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::basis::VariableKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Number of design variants.
pub const DGP_COUNT: u8 = 10;

/// Default size of the forecast sample.
pub const DEFAULT_FORECAST_N: usize = 200;

/// Conditional error variance in the heteroskedastic designs is
/// `HETERO_SCALE * (1 + (X1 + X2 + X3 + X4) / 4)^2`.
pub const HETERO_SCALE: f64 = 0.436;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DgpSpec {
    pub id: u8,
    pub n: usize,
    pub p_n: usize,
    pub forecast_n: usize,
    pub seed: u64,
}

impl DgpSpec {
    pub fn new(id: u8, n: usize, p_n: usize, seed: u64) -> Result<Self> {
        let spec = DgpSpec {
            id,
            n,
            p_n,
            forecast_n: DEFAULT_FORECAST_N,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_forecast_n(mut self, forecast_n: usize) -> Result<Self> {
        self.forecast_n = forecast_n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=DGP_COUNT).contains(&self.id) {
            return Err(Error::Config(format!("DGP id {} is not in 1..=10", self.id)));
        }
        if self.p_n < 10 {
            return Err(Error::Config(format!("p_n = {} is below 10", self.p_n)));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n = {} is below 2", self.n)));
        }
        Ok(())
    }

    pub fn true_signals(&self) -> Vec<usize> {
        match self.id {
            3 | 4 | 6 | 8 => (0..5).collect(),
            _ => (0..4).collect(),
        }
    }

    pub fn pseudo_signals(&self) -> Vec<usize> {
        match self.id {
            2 => vec![4, 5],
            4 => vec![5, 6],
            6 | 8 => (5..self.p_n).collect(),
            _ => Vec::new(),
        }
    }

    pub fn hidden_signals(&self) -> Vec<usize> {
        match self.id {
            3 | 4 | 6 | 8 => vec![4],
            10 => vec![3],
            _ => Vec::new(),
        }
    }

    pub fn kinds(&self) -> Vec<VariableKind> {
        let p = self.p_n;
        (0..p)
            .map(|j| {
                let binary = match self.id {
                    9 => j == 2 || j == 3 || j >= continuous_half(p),
                    10 => (1..=3).contains(&j) || j >= continuous_half(p),
                    _ => false,
                };
                if binary {
                    VariableKind::BinaryLinear
                } else {
                    VariableKind::Continuous
                }
            })
            .collect()
    }

    fn heteroskedastic(&self) -> bool {
        matches!(self.id, 7 | 8)
    }
}

/// Number of leading columns that are continuous in the binary designs
/// (`X1..X_{p/2}`, rounding up for odd `p`).
fn continuous_half(p: usize) -> usize {
    p.div_ceil(2)
}

/// Simulated training sample, forecast sample and ground truth.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub spec: DgpSpec,
    pub replication: u64,
    pub dataset: Dataset,
    /// Held-out sample; `None` when `forecast_n = 0`.
    pub forecast: Option<Dataset>,
    pub true_signals: Vec<usize>,
    pub pseudo_signals: Vec<usize>,
    pub hidden_signals: Vec<usize>,
    /// Drawn training errors, `y - oracle_mean(x)` up to rounding.
    pub epsilon: Vec<f64>,
    pub forecast_epsilon: Vec<f64>,
}

impl LabeledDataset {
    /// Variables that are neither signals nor pseudo-signals.
    pub fn noise(&self) -> Vec<usize> {
        (0..self.spec.p_n)
            .filter(|j| !self.true_signals.contains(j) && !self.pseudo_signals.contains(j))
            .collect()
    }

    /// Variables that are not signals.
    pub fn non_signals(&self) -> Vec<usize> {
        (0..self.spec.p_n)
            .filter(|j| !self.true_signals.contains(j))
            .collect()
    }
}

/// `f_1` through `f_5`.
///
/// `f_5(x)` is minus the conditional mean of the four-signal regression
/// function given `X5 = x` under the hidden-signal covariate law, in closed
/// form; `x` is clipped to `[1e-12, 1 - 1e-12]`.
pub fn component_functions(which: u8, x: f64) -> Result<f64> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { value: x });
    }
    match which {
        1 => Ok(f1(x)),
        2 => Ok(f2(x)),
        3 => Ok(f3(x)),
        4 => Ok(f4(x)),
        5 => Ok(f5(x)),
        _ => Err(Error::Config(format!("component function {which} is not in 1..=5"))),
    }
}

fn f1(x: f64) -> f64 {
    x
}

fn f2(x: f64) -> f64 {
    (2.0 * x - 1.0).powi(2)
}

fn f3(x: f64) -> f64 {
    let s = (2.0 * PI * x).sin();
    s / (2.0 - s)
}

fn f4(x: f64) -> f64 {
    let (s, c) = (2.0 * PI * x).sin_cos();
    0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c.powi(3) + 0.5 * s.powi(3)
}

fn f5(x: f64) -> f64 {
    let a = PI * x.clamp(1e-12, 1.0 - 1e-12);
    // E f3((W + x) / 2) and E f4((W + x) / 2) for W ~ U(0,1)
    let e3 = -1.0 + 4.0 / (PI * 3f64.sqrt()) * (antiderivative_g(a + PI) - antiderivative_g(a));
    let (s, c) = a.sin_cos();
    let e4 = (1.2 * c - 1.2 * s + 0.8 / 3.0 * s.powi(3) - c.powi(3) / 3.0) / PI + 0.15;
    -(1.275 + 2.57 / 3.0 + 1.68 * e3 + e4)
}

/// Continuous antiderivative of `sqrt(3) / (2 (2 - sin t))` on `[0, 2 pi]`.
fn antiderivative_g(t: f64) -> f64 {
    let h = t / 2.0;
    let half_pi = PI / 2.0;
    if h == half_pi {
        return half_pi;
    }
    let base = ((2.0 * h.tan() - 1.0) / 3f64.sqrt()).atan();
    if h < half_pi {
        base
    } else {
        base + PI
    }
}

/// Regression function `E[Y | X = row]` of the design.
pub fn oracle_mean(spec: &DgpSpec, row: &[f64]) -> Result<f64> {
    if row.len() != spec.p_n {
        return Err(Error::Dimension(format!(
            "row has {} entries, design has {}",
            row.len(),
            spec.p_n
        )));
    }
    Ok(mean_unchecked(spec.id, row))
}

fn mean_unchecked(id: u8, x: &[f64]) -> f64 {
    let base = || 2.55 * f1(x[0]) + 2.57 * f2(x[1]) + 1.68 * f3(x[2]) + f4(x[3]);
    match id {
        1 | 2 | 5 | 7 => base(),
        3 | 4 | 6 | 8 => base() + f5(x[4]),
        9 => 2.57 * f2(x[0]) + 1.68 * f3(x[1]) + 1.47 * x[2] + 1.47 * x[3],
        10 => 2.57 * f2(x[0]) + 1.5 * x[1] + 1.5 * x[2] - x[3],
        _ => unreachable!("validated DGP id"),
    }
}

#[derive(Debug, Clone, Copy)]
enum Role {
    W = 0,
    U = 1,
    Aux = 2,
    Error = 3,
}

/// Stream for one family of draws. Forecast samples use roles `4..8`.
fn stream(seed: u64, replication: u64, role: Role, forecast: bool) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let role = role as u64 + if forecast { 4 } else { 0 };
    rng.set_stream(replication.wrapping_mul(8).wrapping_add(role));
    rng
}

/// Uniform on the open interval `(0, 1)` from 53 random bits.
fn open_uniform(rng: &mut ChaCha20Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn uniform_columns(rng: &mut ChaCha20Rng, count: usize, n: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..n).map(|_| open_uniform(rng)).collect())
        .collect()
}

fn average(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect()
}

fn mix(a: &[f64], wa: f64, b: &[f64], wb: f64, total: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (wa * x + wb * y) / total)
        .collect()
}

fn bernoulli(u: &[f64]) -> Vec<f64> {
    u.iter().map(|&v| if v < 0.5 { 1.0 } else { 0.0 }).collect()
}

/// Covariate columns for one sample.
fn draw_covariates(spec: &DgpSpec, n: usize, replication: u64, forecast: bool) -> Vec<Vec<f64>> {
    let p = spec.p_n;
    let mut w_rng = stream(spec.seed, replication, Role::W, forecast);
    let mut u_rng = stream(spec.seed, replication, Role::U, forecast);
    let mut aux_rng = stream(spec.seed, replication, Role::Aux, forecast);
    // w[j - 1] holds W_j
    let w = uniform_columns(&mut w_rng, p, n);
    let u = uniform_columns(&mut u_rng, 3, n);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(p);
    match spec.id {
        1 | 7 => {
            for j in 1..=p {
                x.push(if j <= 4 {
                    w[j - 1].clone()
                } else {
                    average(&w[j - 1], &u[0])
                });
            }
        }
        2 => {
            for j in 1..=4 {
                x.push(w[j - 1].clone());
            }
            x.push(mix(&x[0], 4.0, &u[0], 1.0, 5.0));
            x.push(mix(&x[1], 4.0, &u[1], 1.0, 5.0));
            for j in 7..=p {
                x.push(average(&w[j - 3], &u[2]));
            }
        }
        3 | 4 | 6 | 8 => {
            x.push(w[0].clone());
            x.push(w[1].clone());
            x.push(average(&w[2], &u[0]));
            x.push(average(&w[3], &u[0]));
            x.push(u[0].clone());
            match spec.id {
                3 => {
                    for j in 6..=p {
                        x.push(average(&w[j - 2], &u[1]));
                    }
                }
                4 => {
                    x.push(mix(&x[0], 4.0, &u[1], 1.0, 5.0));
                    x.push(mix(&x[1], 4.0, &u[2], 1.0, 5.0));
                    for j in 8..=p {
                        x.push(average(&w[j - 4], &u[2]));
                    }
                }
                _ => {
                    for j in 6..=p {
                        let k = (j - 6) % 4;
                        let jf = j as f64;
                        x.push(mix(&x[k], 4.0, &w[j - 2], jf - 5.0, jf - 1.0));
                    }
                }
            }
        }
        5 => {
            for j in 1..=p {
                let common = if j <= 4 { &u[0] } else { &u[1] };
                x.push(average(&w[j - 1], common));
            }
        }
        9 | 10 => {
            let half = continuous_half(p);
            x.push(w[0].clone());
            if spec.id == 9 {
                x.push(w[1].clone());
                x.push(bernoulli(&uniform_columns(&mut aux_rng, 1, n)[0]));
                x.push(bernoulli(&uniform_columns(&mut aux_rng, 1, n)[0]));
            } else {
                let tilde = uniform_columns(&mut aux_rng, 4, n);
                for t in &tilde[..3] {
                    x.push(
                        t.iter()
                            .zip(&tilde[3])
                            .map(|(a, b)| if a + b > 1.0 { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
            for j in 5..=half {
                x.push(average(&w[j - 3], &u[0]));
            }
            for _ in half + 1..=p {
                x.push(bernoulli(&uniform_columns(&mut aux_rng, 1, n)[0]));
            }
        }
        _ => unreachable!("validated DGP id"),
    }
    debug_assert_eq!(x.len(), p);
    x
}

fn draw_sample(
    spec: &DgpSpec,
    n: usize,
    replication: u64,
    forecast: bool,
) -> Result<(Dataset, Vec<f64>)> {
    let columns = draw_covariates(spec, n, replication, forecast);
    let mut e_rng = stream(spec.seed, replication, Role::Error, forecast);
    let normal = Normal::new(0.0, 1.0).expect("standard normal parameters are valid");
    let mut row = vec![0.0; spec.p_n];
    let mut y = Vec::with_capacity(n);
    let mut epsilon = Vec::with_capacity(n);
    for i in 0..n {
        for (r, col) in row.iter_mut().zip(&columns) {
            *r = col[i];
        }
        let mut e = normal.inverse_cdf(open_uniform(&mut e_rng));
        if spec.heteroskedastic() {
            let s = (row[0] + row[1] + row[2] + row[3]) / 4.0;
            e *= HETERO_SCALE.sqrt() * (1.0 + s);
        }
        y.push(mean_unchecked(spec.id, &row) + e);
        epsilon.push(e);
    }
    Ok((Dataset::new(y, columns, spec.kinds())?, epsilon))
}

/// Training and forecast samples for one replication.
pub fn generate(spec: &DgpSpec, replication: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let (dataset, epsilon) = draw_sample(spec, spec.n, replication, false)?;
    let (forecast, forecast_epsilon) = if spec.forecast_n > 0 {
        let (data, eps) = draw_sample(spec, spec.forecast_n, replication, true)?;
        (Some(data), eps)
    } else {
        (None, Vec::new())
    };
    Ok(LabeledDataset {
        spec: *spec,
        replication,
        dataset,
        forecast,
        true_signals: spec.true_signals(),
        pseudo_signals: spec.pseudo_signals(),
        hidden_signals: spec.hidden_signals(),
        epsilon,
        forecast_epsilon,
    })
}

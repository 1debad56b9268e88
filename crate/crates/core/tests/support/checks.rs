//! Library-versus-reference comparisons on seeded instances. Each returns
//! the measured discrepancy so callers choose how to report it.

use nalgebra::{DMatrix, DVector};
use ocmt::basis::{raw_bspline_basis, BasisConfig, DesignBlock};
use ocmt::dgp::{generate, DgpSpec};
use ocmt::glasso::{group_lasso_bcd, GroupPenaltySpec, GroupWeight};
use ocmt::regress::{partitioned_stat, post_selection_ols};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{annihilator, hstack, normal_equations, relative_gap};

/// Centered response and design blocks from a correlated design.
pub struct Instance {
    pub blocks: Vec<DesignBlock>,
    pub y: DVector<f64>,
}

pub fn instance(seed: u64) -> Instance {
    let spec = DgpSpec::new(6, 240, 12, seed)
        .unwrap()
        .with_forecast_n(0)
        .unwrap();
    let data = generate(&spec, seed).unwrap().dataset;
    let basis = BasisConfig::for_sample_size(data.n()).unwrap();
    let blocks = (0..data.p())
        .map(|j| data.design_block(j, &basis).unwrap())
        .collect();
    Instance {
        blocks,
        y: data.centered_y(),
    }
}

/// Conditioning set and target block drawn from the instance.
fn split(inst: &Instance, seed: u64) -> (Vec<&DesignBlock>, &DesignBlock) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=4);
    let z = inst.blocks[..k].iter().collect();
    (z, &inst.blocks[k + rng.random_range(0..inst.blocks.len() - k)])
}

fn stacked(blocks: &[&DesignBlock]) -> DMatrix<f64> {
    let mats: Vec<&DMatrix<f64>> = blocks.iter().map(|b| b.values()).collect();
    hstack(&mats)
}

/// Joint-fit coefficients of the target block against the coefficients
/// of the residual-on-residual regression.
pub fn frisch_waugh(seed: u64) -> f64 {
    let inst = instance(seed);
    let (z, x) = split(&inst, seed);
    let mut all = z.clone();
    all.push(x);
    let joint = post_selection_ols(&all, &inst.y).unwrap();
    let offset: usize = z.iter().map(|b| b.width()).sum();
    let library = joint.coefficients.rows(offset, x.width()).into_owned();
    let m_z = annihilator(&stacked(&z));
    let reference = normal_equations(&(&m_z * x.values()), &(&m_z * &inst.y));
    (library - &reference).norm() / reference.norm()
}

pub fn partitioned_vs_dense(seed: u64) -> f64 {
    let inst = instance(seed);
    let (z, x) = split(&inst, seed);
    let library = partitioned_stat(x, &z, &inst.y).unwrap().value;
    let reference = super::partitioned_stat(x.values(), &stacked(&z), &inst.y);
    relative_gap(library, reference)
}

/// Fits at a random fraction of the zero bound with random weights (some
/// excluded) and returns the reference KKT violation.
pub fn kkt(seed: u64) -> f64 {
    let inst = instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mats: Vec<&DMatrix<f64>> = inst.blocks.iter().map(|b| b.values()).collect();
    let weights: Vec<Option<f64>> = (0..mats.len())
        .map(|_| {
            if rng.random_bool(0.15) {
                None
            } else {
                Some(rng.random_range(0.2..3.0))
            }
        })
        .collect();
    let lambda = super::zero_bound(&mats, &inst.y) * rng.random_range(0.02..0.9);
    let penalty = GroupPenaltySpec {
        lambda,
        group_weights: weights
            .iter()
            .map(|w| w.map_or(GroupWeight::Excluded, GroupWeight::Finite))
            .collect(),
    };
    let fit = group_lasso_bcd(&mats, &inst.y, &penalty, None).unwrap();
    super::kkt_violation(&mats, &inst.y, &fit.coefficients, lambda, &weights)
}

/// Active group counts just above and just below the reference bound.
pub fn zero_bound_edges(seed: u64) -> (usize, usize) {
    let inst = instance(seed);
    let mats: Vec<&DMatrix<f64>> = inst.blocks.iter().map(|b| b.values()).collect();
    let bound = super::zero_bound(&mats, &inst.y);
    let active = |lambda: f64| {
        group_lasso_bcd(&mats, &inst.y, &GroupPenaltySpec::uniform(lambda, mats.len()), None)
            .unwrap()
            .active_groups
            .len()
    };
    (active(bound * (1.0 + 1e-9)), active(bound * (1.0 - 1e-6)))
}

/// Largest `|sum_k B_k(x) - 1|` over a grid that includes every knot.
pub fn partition_of_unity(m_n: usize) -> f64 {
    let config = BasisConfig::cubic(m_n).unwrap();
    let mut xs: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    xs.extend(config.knots());
    xs.iter()
        .map(|&x| (raw_bspline_basis(x, &config).unwrap().iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn random_invertible(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    // diagonally dominant, hence invertible
    DMatrix::from_fn(k, k, |i, j| {
        let v: f64 = rng.random_range(-1.0..1.0);
        if i == j { v + 2.0 * k as f64 * v.signum().max(0.5) } else { v }
    })
}

/// Largest relative change in the partitioned statistic under response
/// rescaling and invertible recombination of both the target and the
/// conditioning columns.
pub fn invariance(seed: u64) -> f64 {
    let inst = instance(seed);
    let (z, x) = split(&inst, seed);
    let base = partitioned_stat(x, &z, &inst.y).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let mut worst: f64 = 0.0;
    for a in [1e-3, -2.5, 40.0] {
        let scaled = partitioned_stat(x, &z, &(&inst.y * a)).unwrap().value;
        worst = worst.max(relative_gap(base, scaled));
    }
    let remix = |b: &DesignBlock, rng: &mut ChaCha8Rng| {
        let a = random_invertible(rng, b.width());
        DesignBlock::from_columns(b.values() * a, b.variable_index()).unwrap()
    };
    let x2 = remix(x, &mut rng);
    let z2: Vec<DesignBlock> = z.iter().map(|b| remix(b, &mut rng)).collect();
    let z2_refs: Vec<&DesignBlock> = z2.iter().collect();
    let moved = partitioned_stat(&x2, &z2_refs, &inst.y).unwrap().value;
    worst.max(relative_gap(base, moved))
}

#![allow(dead_code)]

use affdim_core::linalg::RationalMatrix;
use affdim_core::model::{ContinuousSpec, DiscreteSpec, SampleBatch, SourceSpec, TableEntry};
use affdim_core::rational::{self, from_int, ratio, Rational};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_rational(rng: &mut impl Rng) -> Rational {
    ratio(rng.random_range(-4..=4), rng.random_range(1..=3))
}

pub fn random_matrix(rng: &mut impl Rng, m: usize, n: usize) -> RationalMatrix {
    let rows = (0..m)
        .map(|_| (0..n).map(|_| small_rational(rng)).collect())
        .collect();
    RationalMatrix::from_rows(rows).unwrap()
}

/// `m x n` product of `m x r` and `r x n` factors, so rank is at most `r`.
pub fn random_low_rank(rng: &mut impl Rng, m: usize, n: usize, r: usize) -> RationalMatrix {
    let b = random_matrix(rng, m, r);
    let c = random_matrix(rng, r, n);
    b.mul(&c).unwrap()
}

/// Random matrix whose rank is deficient about half of the time.
pub fn random_instance_matrix(rng: &mut impl Rng, m: usize, n: usize) -> RationalMatrix {
    let full = m.min(n);
    if full > 1 && rng.random_bool(0.5) {
        let r = rng.random_range(1..full);
        random_low_rank(rng, m, n, r)
    } else {
        random_matrix(rng, m, n)
    }
}

const ALPHAS: [(i64, i64); 7] = [(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1)];

pub fn random_alpha(rng: &mut impl Rng) -> Rational {
    let (p, q) = ALPHAS[rng.random_range(0..ALPHAS.len())];
    ratio(p, q)
}

pub fn random_atoms(rng: &mut impl Rng) -> DiscreteSpec {
    let k = rng.random_range(1..=3);
    let mut values: Vec<i64> = (-3..=3).collect();
    values.shuffle(rng);
    let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = weights.iter().sum();
    DiscreteSpec::new(
        values[..k]
            .iter()
            .zip(&weights)
            .map(|(&v, &w)| (ratio(v, 2), ratio(w, total)))
            .collect(),
    )
}

pub fn random_independent_spec(rng: &mut impl Rng, n: usize) -> SourceSpec {
    SourceSpec::independent(
        (0..n).map(|_| random_alpha(rng)).collect(),
        (0..n)
            .map(|_| ContinuousSpec::gaussian_sd(rng.random_range(0.5..2.0)))
            .collect(),
        (0..n).map(|_| random_atoms(rng)).collect(),
    )
}

/// Indicator law given by a random table over a few patterns.
pub fn random_table_spec(rng: &mut impl Rng, n: usize) -> SourceSpec {
    let count = rng.random_range(1..=4.min(1 << n));
    let mut masks: Vec<u64> = (0..1u64 << n).collect();
    masks.shuffle(rng);
    let weights: Vec<i64> = (0..count).map(|_| rng.random_range(1..=5)).collect();
    let total: i64 = weights.iter().sum();
    let entries = masks[..count]
        .iter()
        .zip(&weights)
        .map(|(&mask, &w)| {
            let s: String = (0..n).map(|j| if mask >> j & 1 == 1 { '1' } else { '0' }).collect();
            TableEntry::pattern(&s, ratio(w, total)).unwrap()
        })
        .collect();
    SourceSpec::with_table(
        vec![ContinuousSpec::standard_gaussian(); n],
        (0..n).map(|_| random_atoms(rng)).collect(),
        entries,
    )
}

pub fn random_spec(rng: &mut impl Rng, n: usize) -> SourceSpec {
    if rng.random_bool(0.25) {
        random_table_spec(rng, n)
    } else {
        random_independent_spec(rng, n)
    }
}

/// `T[i][j] = x_j^i` for `i < m`.
pub fn vandermonde(nodes: &[Rational], m: usize) -> RationalMatrix {
    let rows = (0..m)
        .map(|i| {
            nodes
                .iter()
                .map(|x| {
                    let mut p = from_int(1);
                    for _ in 0..i {
                        p *= x;
                    }
                    p
                })
                .collect()
        })
        .collect();
    RationalMatrix::from_rows(rows).unwrap()
}

pub fn distinct_nodes(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    let mut pool: Vec<Rational> = (-6..=6)
        .flat_map(|p| (1..=2).map(move |q| ratio(p, q)))
        .collect();
    pool.sort();
    pool.dedup();
    pool.shuffle(rng);
    pool.truncate(n);
    pool
}

pub fn tilde_a() -> RationalMatrix {
    RationalMatrix::from_i64_rows(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, -1]]).unwrap()
}

pub fn example_a() -> RationalMatrix {
    RationalMatrix::from_str_rows(&[
        &["1", "-1", "0.3"],
        &["1", "0.5", "1"],
        &["0.5", "-1", "0.5"],
    ])
    .unwrap()
}

pub type Cell = (u64, Vec<Option<Rational>>);

/// Recovers the `(nu, x_d)` cell of row `r` from the draw.
pub fn cell_of(spec: &SourceSpec, batch: &SampleBatch, r: usize) -> Cell {
    let n = spec.dim();
    let nu_row = &batch.nu_draws[r * n..(r + 1) * n];
    let mut mask = 0u64;
    let mut xd = Vec::with_capacity(n);
    for j in 0..n {
        if nu_row[j] {
            mask |= 1 << j;
            xd.push(None);
        } else {
            let x = batch.row(r)[j];
            let atom = spec.atoms[j]
                .atoms
                .iter()
                .find(|a| rational::to_f64(&a.value) == x)
                .expect("discrete draw is an atom");
            xd.push(Some(atom.value.clone()));
        }
    }
    (mask, xd)
}


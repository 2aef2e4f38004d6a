//! Coordinate-wise discrete-continuous sources.
//!
//! Coordinate `i` equals a continuous draw when its indicator `nu_i` is one
//! and a discrete atom otherwise. The indicators (and the atoms they select)
//! follow either an independent product law or an explicit joint table.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Largest supported dimension (indicator patterns are stored as `u64` masks).
pub const MAX_DIM: usize = 64;

/// Rows drawn from one RNG stream; fixed so output is independent of the
/// number of worker threads.
const SAMPLE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContinuousSpec {
    Gaussian { mean: f64, variance: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ContinuousSpec {
    pub fn standard_gaussian() -> Self {
        Self::Gaussian {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn gaussian_sd(sd: f64) -> Self {
        Self::Gaussian {
            mean: 0.0,
            variance: sd * sd,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { mean, .. } => mean,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { variance, .. } => variance,
            Self::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }

    /// Differential entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        match *self {
            Self::Gaussian { variance, .. } => {
                0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * variance).log2()
            }
            Self::Uniform { lo, hi } => (hi - lo).log2(),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Self::Gaussian { .. })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Gaussian { mean, variance } => Normal::new(mean, variance.sqrt())
                .expect("validated variance")
                .sample(rng),
            Self::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub value: Rational,
    pub prob: Rational,
}

/// Finite discrete law: atoms with exact probabilities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiscreteSpec {
    pub atoms: Vec<Atom>,
}

impl DiscreteSpec {
    pub fn point(value: Rational) -> Self {
        Self {
            atoms: vec![Atom {
                value,
                prob: Rational::one(),
            }],
        }
    }

    pub fn zero() -> Self {
        Self::point(Rational::zero())
    }

    pub fn new(atoms: Vec<(Rational, Rational)>) -> Self {
        Self {
            atoms: atoms
                .into_iter()
                .map(|(value, prob)| Atom { value, prob })
                .collect(),
        }
    }
}

/// One row of an explicit joint table: an indicator pattern, the atom
/// values pinned for some of its discrete coordinates, and a probability.
/// Discrete coordinates left out of `xd` are drawn from their own atoms,
/// independently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub nu: Vec<bool>,
    pub xd: BTreeMap<usize, Rational>,
    pub prob: Rational,
}

impl TableEntry {
    pub fn pattern(nu: &str, prob: Rational) -> Result<Self> {
        Ok(Self {
            nu: parse_pattern(nu)?,
            xd: BTreeMap::new(),
            prob,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NuJointPmf {
    /// `nu_i ~ Bernoulli(alpha_i)` independently, atoms independent.
    Independent { alphas: Vec<Rational> },
    Table { entries: Vec<TableEntry> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub continuous: Vec<ContinuousSpec>,
    pub atoms: Vec<DiscreteSpec>,
    pub nu_model: NuJointPmf,
}

/// A named rule broken by a source description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// A fully expanded support point `(nu, x_d)` of the indicator/atom law.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportCell {
    /// Bit `i` set iff coordinate `i` is continuous.
    pub nu: u64,
    /// Atom value for each discrete coordinate, `None` where `nu_i = 1`.
    pub xd: Vec<Option<Rational>>,
    pub prob: Rational,
}

/// `N x n` draws together with the indicator draws that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub rows: usize,
    pub dim: usize,
    /// Row-major `rows x dim`.
    pub data: Vec<f64>,
    /// Row-major `rows x n_source`; `true` where the coordinate was continuous.
    pub nu_draws: Vec<bool>,
    pub seed: u64,
}

impl SampleBatch {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Applies `a` to every row, keeping the indicator draws and seed.
    pub fn transform(&self, a: &nalgebra::DMatrix<f64>) -> Result<SampleBatch> {
        if a.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix with {} columns applied to {}-dimensional samples",
                a.ncols(),
                self.dim
            )));
        }
        let m = a.nrows();
        let mut data = vec![0.0; self.rows * m];
        data.par_chunks_mut(m)
            .enumerate()
            .for_each(|(r, out)| {
                let x = self.row(r);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..self.dim).map(|j| a[(i, j)] * x[j]).sum();
                }
            });
        Ok(SampleBatch {
            rows: self.rows,
            dim: m,
            data,
            nu_draws: self.nu_draws.clone(),
            seed: self.seed,
        })
    }
}

pub fn parse_pattern(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::InvalidArgument(format!("bad indicator pattern {s:?}"))),
        })
        .collect()
}

pub fn format_pattern(mask: u64, n: usize) -> String {
    (0..n)
        .map(|i| if mask >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn pattern_to_mask(p: &[bool]) -> u64 {
    p.iter()
        .enumerate()
        .fold(0, |m, (i, &b)| if b { m | 1 << i } else { m })
}

impl SourceSpec {
    /// Independent product form.
    pub fn independent(
        alphas: Vec<Rational>,
        continuous: Vec<ContinuousSpec>,
        atoms: Vec<DiscreteSpec>,
    ) -> Self {
        Self {
            continuous,
            atoms,
            nu_model: NuJointPmf::Independent { alphas },
        }
    }

    /// Bernoulli-Gaussian coordinates: atom at zero, `N(0, sd_i^2)` otherwise.
    pub fn bernoulli_gaussian(alphas: Vec<Rational>, sds: &[f64]) -> Self {
        let n = alphas.len();
        Self::independent(
            alphas,
            sds.iter().map(|&s| ContinuousSpec::gaussian_sd(s)).collect(),
            vec![DiscreteSpec::zero(); n],
        )
    }

    /// Same alpha and standard deviation for every coordinate.
    pub fn iid_bernoulli_gaussian(n: usize, alpha: Rational, sd: f64) -> Self {
        Self::bernoulli_gaussian(vec![alpha; n], &vec![sd; n])
    }

    pub fn with_table(
        continuous: Vec<ContinuousSpec>,
        atoms: Vec<DiscreteSpec>,
        entries: Vec<TableEntry>,
    ) -> Self {
        Self {
            continuous,
            atoms,
            nu_model: NuJointPmf::Table { entries },
        }
    }

    pub fn dim(&self) -> usize {
        self.continuous.len()
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.nu_model, NuJointPmf::Independent { .. })
    }

    pub fn all_gaussian(&self) -> bool {
        self.continuous.iter().all(ContinuousSpec::is_gaussian)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSource(v))
        }
    }

    /// Law of the indicator pattern alone, keyed by mask, zero cells dropped.
    pub fn nu_marginal(&self) -> Vec<(u64, Rational)> {
        let n = self.dim();
        match &self.nu_model {
            NuJointPmf::Independent { alphas } => {
                let mut cells = vec![(0u64, Rational::one())];
                for (i, a) in alphas.iter().enumerate() {
                    let q = Rational::one() - a;
                    let mut next = Vec::with_capacity(cells.len() * 2);
                    for (mask, p) in cells {
                        if !q.is_zero() {
                            next.push((mask, &p * &q));
                        }
                        if !a.is_zero() {
                            next.push((mask | 1 << i, p * a));
                        }
                    }
                    cells = next;
                }
                cells.sort_by_key(|c| c.0);
                cells
            }
            NuJointPmf::Table { entries } => {
                let mut acc: BTreeMap<u64, Rational> = BTreeMap::new();
                for e in entries {
                    debug_assert_eq!(e.nu.len(), n);
                    *acc.entry(pattern_to_mask(&e.nu)).or_insert_with(Rational::zero) += &e.prob;
                }
                acc.into_iter().filter(|(_, p)| !p.is_zero()).collect()
            }
        }
    }

    /// Fully expanded `(nu, x_d)` support with exact probabilities.
    pub fn support(&self) -> Vec<SupportCell> {
        let n = self.dim();
        let mut cells: Vec<SupportCell> = Vec::new();
        match &self.nu_model {
            NuJointPmf::Independent { alphas } => {
                cells.push(SupportCell {
                    nu: 0,
                    xd: Vec::with_capacity(n),
                    prob: Rational::one(),
                });
                for (i, a) in alphas.iter().enumerate() {
                    let q = Rational::one() - a;
                    let mut next = Vec::new();
                    for c in cells {
                        if !a.is_zero() {
                            let mut xd = c.xd.clone();
                            xd.push(None);
                            next.push(SupportCell {
                                nu: c.nu | 1 << i,
                                xd,
                                prob: &c.prob * a,
                            });
                        }
                        if !q.is_zero() {
                            for atom in &self.atoms[i].atoms {
                                let mut xd = c.xd.clone();
                                xd.push(Some(atom.value.clone()));
                                next.push(SupportCell {
                                    nu: c.nu,
                                    xd,
                                    prob: &c.prob * &q * &atom.prob,
                                });
                            }
                        }
                    }
                    cells = next;
                }
            }
            NuJointPmf::Table { entries } => {
                for e in entries {
                    if e.prob.is_zero() {
                        continue;
                    }
                    let mut partial = vec![SupportCell {
                        nu: pattern_to_mask(&e.nu),
                        xd: Vec::with_capacity(n),
                        prob: e.prob.clone(),
                    }];
                    for i in 0..n {
                        let mut next = Vec::new();
                        for c in partial {
                            if e.nu[i] {
                                let mut xd = c.xd;
                                xd.push(None);
                                next.push(SupportCell { xd, ..c });
                            } else if let Some(v) = e.xd.get(&i) {
                                let mut xd = c.xd;
                                xd.push(Some(v.clone()));
                                next.push(SupportCell { xd, ..c });
                            } else {
                                for atom in &self.atoms[i].atoms {
                                    let mut xd = c.xd.clone();
                                    xd.push(Some(atom.value.clone()));
                                    next.push(SupportCell {
                                        nu: c.nu,
                                        xd,
                                        prob: &c.prob * &atom.prob,
                                    });
                                }
                            }
                        }
                        partial = next;
                    }
                    cells.extend(partial);
                }
                // Entries may overlap after expansion; merge them.
                let mut merged: BTreeMap<(u64, Vec<Option<Rational>>), Rational> = BTreeMap::new();
                for c in cells {
                    *merged.entry((c.nu, c.xd)).or_insert_with(Rational::zero) += c.prob;
                }
                cells = merged
                    .into_iter()
                    .map(|((nu, xd), prob)| SupportCell { nu, xd, prob })
                    .collect();
            }
        }
        cells.retain(|c| !c.prob.is_zero());
        cells
    }

    /// `H(nu, X_d)` in bits.
    pub fn joint_entropy_bits(&self) -> f64 {
        entropy_bits(self.support().iter().map(|c| rational::to_f64(&c.prob)))
    }
}

pub(crate) fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    probs
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// A table entry's pattern and pinned discrete values.
type EntryKey = (Vec<bool>, Vec<(usize, Rational)>);

/// Checks every invariant of a source description; empty iff valid.
pub fn validate(spec: &SourceSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = spec.dim();
    if n == 0 {
        out.push(Violation::new("SourceSpec.n", "dimension must be at least 1"));
        return out;
    }
    if n > MAX_DIM {
        out.push(Violation::new(
            "SourceSpec.n",
            format!("dimension {n} exceeds {MAX_DIM}"),
        ));
        return out;
    }
    if spec.atoms.len() != n {
        out.push(Violation::new(
            "SourceSpec.atoms",
            format!("{} discrete laws for {n} coordinates", spec.atoms.len()),
        ));
        return out;
    }

    for (i, c) in spec.continuous.iter().enumerate() {
        match *c {
            ContinuousSpec::Gaussian { mean, variance } => {
                if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
                    out.push(Violation::new(
                        format!("ContinuousSpec[{i}]"),
                        "gaussian needs finite mean and variance > 0",
                    ));
                }
            }
            ContinuousSpec::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    out.push(Violation::new(
                        format!("ContinuousSpec[{i}]"),
                        "uniform needs finite lo < hi",
                    ));
                }
            }
        }
    }

    for (i, d) in spec.atoms.iter().enumerate() {
        if d.atoms.is_empty() {
            continue;
        }
        let field = format!("DiscreteSpec[{i}]");
        if d.atoms.iter().any(|a| !a.prob.is_positive() || a.prob > Rational::one()) {
            out.push(Violation::new(&field, "atom probabilities must lie in (0, 1]"));
        }
        let total: Rational = d.atoms.iter().map(|a| &a.prob).sum();
        if !total.is_one() {
            out.push(Violation::new(
                &field,
                format!("atom probabilities sum to {}, not 1", rational::format_rational(&total)),
            ));
        }
        let mut values: Vec<&Rational> = d.atoms.iter().map(|a| &a.value).collect();
        values.sort();
        if values.windows(2).any(|w| w[0] == w[1]) {
            out.push(Violation::new(&field, "atom values must be distinct"));
        }
    }

    match &spec.nu_model {
        NuJointPmf::Independent { alphas } => {
            if alphas.len() != n {
                out.push(Violation::new(
                    "NuJointPMF.alphas",
                    format!("{} weights for {n} coordinates", alphas.len()),
                ));
                return out;
            }
            for (i, a) in alphas.iter().enumerate() {
                if !rational::in_unit_interval(a) {
                    out.push(Violation::new(
                        format!("NuJointPMF.alphas[{i}]"),
                        "continuous weight must lie in [0, 1]",
                    ));
                } else if !a.is_one() && spec.atoms[i].atoms.is_empty() {
                    out.push(Violation::new(
                        format!("DiscreteSpec[{i}]"),
                        "coordinate can be discrete but has no atoms",
                    ));
                }
            }
        }
        NuJointPmf::Table { entries } => {
            if entries.is_empty() {
                out.push(Violation::new("NuJointPMF.table", "table has no entries"));
            }
            let mut total = Rational::zero();
            let mut seen: HashMap<EntryKey, usize> = HashMap::new();
            for (k, e) in entries.iter().enumerate() {
                let field = format!("NuJointPMF.table[{k}]");
                if e.nu.len() != n {
                    out.push(Violation::new(
                        &field,
                        format!("pattern has length {}, expected {n}", e.nu.len()),
                    ));
                    continue;
                }
                if !rational::in_unit_interval(&e.prob) {
                    out.push(Violation::new(&field, "probability must lie in [0, 1]"));
                }
                total += &e.prob;
                for &i in e.xd.keys() {
                    if i >= n || e.nu[i] {
                        out.push(Violation::new(
                            &field,
                            format!("discrete value given for coordinate {i}, which is not discrete in this pattern"),
                        ));
                    }
                }
                for i in 0..n {
                    if !e.nu[i] && !e.xd.contains_key(&i) && spec.atoms[i].atoms.is_empty() {
                        out.push(Violation::new(
                            &field,
                            format!("coordinate {i} is discrete but has neither a pinned value nor atoms"),
                        ));
                    }
                }
                let key = (e.nu.clone(), e.xd.iter().map(|(k, v)| (*k, v.clone())).collect());
                if let Some(prev) = seen.insert(key, k) {
                    out.push(Violation::new(&field, format!("duplicates entry {prev}")));
                }
            }
            if !entries.is_empty() && !total.is_one() {
                out.push(Violation::new(
                    "NuJointPMF.table",
                    format!("probabilities sum to {}, not 1", rational::format_rational(&total)),
                ));
            }
        }
    }
    out
}

/// `Pr(nu_i = 1)` for every coordinate.
pub fn marginal_alpha(spec: &SourceSpec) -> Vec<Rational> {
    match &spec.nu_model {
        NuJointPmf::Independent { alphas } => alphas.clone(),
        NuJointPmf::Table { entries } => {
            let mut out = vec![Rational::zero(); spec.dim()];
            for e in entries {
                for (i, &b) in e.nu.iter().enumerate() {
                    if b {
                        out[i] += &e.prob;
                    }
                }
            }
            out
        }
    }
}

/// Sampler over the indicator/atom law, precomputed in floats.
pub(crate) enum CellSampler<'a> {
    Independent {
        alphas: Vec<f64>,
        atoms: Vec<(Vec<f64>, Vec<f64>)>,
    },
    Table {
        cumulative: Vec<f64>,
        entries: &'a [TableEntry],
        pinned: Vec<Vec<Option<f64>>>,
        atoms: Vec<(Vec<f64>, Vec<f64>)>,
    },
}

fn atom_tables(spec: &SourceSpec) -> Vec<(Vec<f64>, Vec<f64>)> {
    spec.atoms
        .iter()
        .map(|d| {
            let values = d.atoms.iter().map(|a| rational::to_f64(&a.value)).collect();
            let mut acc = 0.0;
            let cum = d
                .atoms
                .iter()
                .map(|a| {
                    acc += rational::to_f64(&a.prob);
                    acc
                })
                .collect();
            (values, cum)
        })
        .collect()
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    let total = *cumulative.last().unwrap_or(&1.0);
    let target = u * total;
    cumulative
        .partition_point(|&c| c <= target)
        .min(cumulative.len().saturating_sub(1))
}

impl<'a> CellSampler<'a> {
    pub(crate) fn new(spec: &'a SourceSpec) -> Self {
        let atoms = atom_tables(spec);
        match &spec.nu_model {
            NuJointPmf::Independent { alphas } => Self::Independent {
                alphas: alphas.iter().map(rational::to_f64).collect(),
                atoms,
            },
            NuJointPmf::Table { entries } => {
                let mut acc = 0.0;
                let cumulative = entries
                    .iter()
                    .map(|e| {
                        acc += rational::to_f64(&e.prob);
                        acc
                    })
                    .collect();
                let pinned = entries
                    .iter()
                    .map(|e| {
                        (0..spec.dim())
                            .map(|i| e.xd.get(&i).map(rational::to_f64))
                            .collect()
                    })
                    .collect();
                Self::Table {
                    cumulative,
                    entries,
                    pinned,
                    atoms,
                }
            }
        }
    }

    /// Draws the indicator mask; when `xd` is given, also fills discrete values.
    pub(crate) fn draw<R: Rng>(&self, rng: &mut R, xd: Option<&mut [f64]>) -> u64 {
        match self {
            Self::Independent { alphas, atoms } => {
                let mut mask = 0u64;
                let mut xd = xd;
                for (i, &a) in alphas.iter().enumerate() {
                    let u: f64 = rng.random();
                    if u < a {
                        mask |= 1 << i;
                    } else if let Some(out) = xd.as_deref_mut() {
                        let (values, cum) = &atoms[i];
                        out[i] = values[pick(cum, rng.random())];
                    }
                }
                mask
            }
            Self::Table {
                cumulative,
                entries,
                pinned,
                atoms,
            } => {
                let k = pick(cumulative, rng.random());
                let e = &entries[k];
                if let Some(out) = xd {
                    for (i, &b) in e.nu.iter().enumerate() {
                        if b {
                            continue;
                        }
                        out[i] = match pinned[k][i] {
                            Some(v) => v,
                            None => {
                                let (values, cum) = &atoms[i];
                                values[pick(cum, rng.random())]
                            }
                        };
                    }
                }
                pattern_to_mask(&e.nu)
            }
        }
    }
}

/// RNG for chunk `chunk` of a run seeded with `seed`.
pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Draws `count` i.i.d. rows. Rows are generated in fixed-size chunks, each
/// from its own ChaCha stream, so the batch depends only on `seed`.
pub fn sample(spec: &SourceSpec, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    spec.ensure_valid()?;
    let n = spec.dim();
    let sampler = CellSampler::new(spec);
    let mut data = vec![0.0; count * n];
    let mut nu_draws = vec![false; count * n];
    data.par_chunks_mut(SAMPLE_CHUNK * n)
        .zip(nu_draws.par_chunks_mut(SAMPLE_CHUNK * n))
        .enumerate()
        .for_each(|(chunk, (xs, nus))| {
            let mut rng = chunk_rng(seed, chunk as u64);
            for (x, nu) in xs.chunks_mut(n).zip(nus.chunks_mut(n)) {
                let mask = sampler.draw(&mut rng, Some(x));
                for i in 0..n {
                    let on = mask >> i & 1 == 1;
                    nu[i] = on;
                    if on {
                        x[i] = spec.continuous[i].sample(&mut rng);
                    }
                }
            }
        });
    Ok(SampleBatch {
        rows: count,
        dim: n,
        data,
        nu_draws,
        seed,
    })
}

/// JSON source description. Rationals are `"p/q"` strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceJson {
    pub n: usize,
    pub coordinates: Vec<CoordinateJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_table: Option<Vec<TableEntryJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinateJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    pub continuous: ContinuousSpec,
    #[serde(default)]
    pub atoms: Vec<AtomJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomJson {
    pub value: String,
    pub prob: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntryJson {
    pub nu: String,
    #[serde(default)]
    pub xd: BTreeMap<String, String>,
    pub prob: String,
}

impl SourceSpec {
    /// Parses and validates a JSON source description.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let j: SourceJson = serde_json::from_str(s)?;
        Self::from_json(&j)
    }

    pub fn from_json(j: &SourceJson) -> Result<Self> {
        let mut violations = Vec::new();
        if j.coordinates.len() != j.n {
            violations.push(Violation::new(
                "SourceSpec.n",
                format!("n = {} but {} coordinates given", j.n, j.coordinates.len()),
            ));
            return Err(Error::InvalidSource(violations));
        }
        let continuous = j.coordinates.iter().map(|c| c.continuous.clone()).collect();
        let atoms = j
            .coordinates
            .iter()
            .map(|c| {
                Ok(DiscreteSpec {
                    atoms: c
                        .atoms
                        .iter()
                        .map(|a| {
                            Ok(Atom {
                                value: rational::parse_rational(&a.value)?,
                                prob: rational::parse_rational(&a.prob)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let declared: Vec<Option<Rational>> = j
            .coordinates
            .iter()
            .map(|c| c.alpha.as_deref().map(rational::parse_rational).transpose())
            .collect::<Result<_>>()?;
        let spec = match &j.joint_table {
            None => {
                let mut alphas = Vec::with_capacity(j.n);
                for (i, a) in declared.iter().enumerate() {
                    match a {
                        Some(a) => alphas.push(a.clone()),
                        None => {
                            violations.push(Violation::new(
                                format!("NuJointPMF.alphas[{i}]"),
                                "alpha required without a joint table",
                            ));
                            alphas.push(Rational::zero());
                        }
                    }
                }
                SourceSpec::independent(alphas, continuous, atoms)
            }
            Some(table) => {
                let entries = table
                    .iter()
                    .map(|e| {
                        let xd = e
                            .xd
                            .iter()
                            .map(|(k, v)| {
                                let idx = k.parse::<usize>().map_err(|_| {
                                    Error::InvalidArgument(format!("bad coordinate index {k:?}"))
                                })?;
                                Ok((idx, rational::parse_rational(v)?))
                            })
                            .collect::<Result<BTreeMap<_, _>>>()?;
                        Ok(TableEntry {
                            nu: parse_pattern(&e.nu)?,
                            xd,
                            prob: rational::parse_rational(&e.prob)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                SourceSpec::with_table(continuous, atoms, entries)
            }
        };
        violations.extend(validate(&spec));
        if violations.is_empty() && j.joint_table.is_some() {
            let alphas = marginal_alpha(&spec);
            for (i, (d, a)) in declared.iter().zip(&alphas).enumerate() {
                if let Some(d) = d {
                    if d != a {
                        violations.push(Violation::new(
                            format!("NuJointPMF.alphas[{i}]"),
                            format!(
                                "declared alpha {} disagrees with table marginal {}",
                                rational::format_rational(d),
                                rational::format_rational(a)
                            ),
                        ));
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(spec)
        } else {
            Err(Error::InvalidSource(violations))
        }
    }

    pub fn to_json(&self) -> SourceJson {
        let alphas = marginal_alpha(self);
        let independent = self.is_independent();
        SourceJson {
            n: self.dim(),
            coordinates: (0..self.dim())
                .map(|i| CoordinateJson {
                    alpha: Some(rational::format_rational(&alphas[i])),
                    continuous: self.continuous[i].clone(),
                    atoms: self.atoms[i]
                        .atoms
                        .iter()
                        .map(|a| AtomJson {
                            value: rational::format_rational(&a.value),
                            prob: rational::format_rational(&a.prob),
                        })
                        .collect(),
                })
                .collect(),
            joint_table: (!independent).then(|| match &self.nu_model {
                NuJointPmf::Table { entries } => entries
                    .iter()
                    .map(|e| TableEntryJson {
                        nu: format_pattern(pattern_to_mask(&e.nu), self.dim()),
                        xd: e
                            .xd
                            .iter()
                            .map(|(k, v)| (k.to_string(), rational::format_rational(v)))
                            .collect(),
                        prob: rational::format_rational(&e.prob),
                    })
                    .collect(),
                NuJointPmf::Independent { .. } => unreachable!(),
            }),
        }
    }
}

/// The three two-coordinate indicator laws with marginals `(7/10, 2/5)`:
/// `Q` (independent), `Q'` (never both discrete), `Q''`.
pub mod dependence_tables {
    use super::*;
    use crate::rational::ratio;

    fn table(p00: Rational, p01: Rational, p10: Rational, p11: Rational) -> Vec<TableEntry> {
        [("00", p00), ("01", p01), ("10", p10), ("11", p11)]
            .into_iter()
            .map(|(nu, p)| TableEntry::pattern(nu, p).expect("static pattern"))
            .collect()
    }

    /// Pattern strings list `nu_1` first.
    pub fn q() -> Vec<TableEntry> {
        table(ratio(18, 100), ratio(12, 100), ratio(42, 100), ratio(28, 100))
    }

    pub fn q_prime() -> Vec<TableEntry> {
        table(ratio(0, 1), ratio(3, 10), ratio(6, 10), ratio(1, 10))
    }

    pub fn q_double_prime() -> Vec<TableEntry> {
        table(ratio(3, 10), ratio(0, 1), ratio(3, 10), ratio(4, 10))
    }

    /// Standard Gaussian continuous parts, atoms at zero.
    pub fn source(entries: Vec<TableEntry>) -> SourceSpec {
        SourceSpec::with_table(
            vec![ContinuousSpec::standard_gaussian(); 2],
            vec![DiscreteSpec::zero(); 2],
            entries,
        )
    }
}

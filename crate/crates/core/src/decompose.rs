//! Affinely singular decomposition of `Y = A X`.
//!
//! Each support point `(nu, x_d)` of the indicator/atom law places `Y` on
//! the affine subset `span(A^nu) + A^{not nu} x_d`. The subset is identified
//! exactly by the canonical form of `span(A^nu)` together with the
//! projection of the offset onto its orthogonal complement. Support points
//! that land on the same subset are merged into one component.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_traits::Zero;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, RationalMatrix, SubspaceCanonical};
use crate::model::{self, chunk_rng, SourceSpec, SupportCell};
use crate::rational::{self, Rational};
use crate::rid::DEFAULT_ENUMERATION_CAP;

const LOG2_2PI_E: f64 = 4.094_191_170_361_282; // log2(2 pi e)

/// Default sample count for Monte Carlo mixture entropies.
pub const DEFAULT_ENTROPY_SAMPLES: usize = 200_000;

/// One support point `(nu, x_d)` that lands on a component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub nu: u64,
    pub xd: Vec<Option<Rational>>,
    pub prob: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DiffEntropy {
    /// Closed form (single Gaussian, or invertible image of a product law).
    ClosedForm { bits: f64 },
    /// Mixture of Gaussians, estimated as `-E[log2 f(C)]` with the exact
    /// mixture density `f`.
    MonteCarlo { bits: f64, stderr: f64, samples: usize },
    Unavailable { reason: String },
}

impl DiffEntropy {
    pub fn bits(&self) -> Option<f64> {
        match self {
            Self::ClosedForm { bits } | Self::MonteCarlo { bits, .. } => Some(*bits),
            Self::Unavailable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineComponent {
    pub subspace: SubspaceCanonical,
    /// Offset, orthogonal to `subspace`.
    pub shift: Vec<Rational>,
    pub prob: Rational,
    pub members: Vec<Member>,
    /// Filled by [`attach_entropies`].
    pub diff_entropy: Option<DiffEntropy>,
}

impl AffineComponent {
    pub fn dimension(&self) -> usize {
        self.subspace.dimension()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Sorted by dimension, then canonical basis, then shift.
    pub components: Vec<AffineComponent>,
    /// `H(V)` in bits.
    pub selector_entropy_bits: f64,
    /// Ambient dimension `m`.
    pub total_dim: usize,
}

impl Decomposition {
    pub fn total_prob(&self) -> Rational {
        self.components.iter().map(|c| &c.prob).sum()
    }

    /// Index of the component containing support point `(nu, xd)`.
    pub fn locate(&self, nu: u64, xd: &[Option<Rational>]) -> Option<usize> {
        self.components.iter().position(|c| {
            c.members
                .iter()
                .any(|m| m.nu == nu && m.xd.as_slice() == xd)
        })
    }
}

struct PatternGeometry {
    subspace: SubspaceCanonical,
    /// Orthogonal-complement projections of every column of `A`
    /// (only discrete columns are used).
    projected: Vec<Vec<Rational>>,
}

fn geometry(a: &RationalMatrix, nu: u64) -> PatternGeometry {
    let n = a.cols();
    let active = (0..n)
        .filter(|&j| nu >> j & 1 == 1)
        .map(|j| a.column(j))
        .collect();
    let subspace = SubspaceCanonical::from_vectors(a.rows(), active);
    let projected = (0..n)
        .map(|j| {
            if nu >> j & 1 == 1 {
                Vec::new()
            } else {
                linalg::project_orthogonal(&a.column(j), &subspace).expect("ambient matches")
            }
        })
        .collect();
    PatternGeometry {
        subspace,
        projected,
    }
}

fn offset(geom: &PatternGeometry, cell: &SupportCell, m: usize) -> Vec<Rational> {
    let mut shift = vec![Rational::zero(); m];
    for (j, v) in cell.xd.iter().enumerate() {
        let Some(v) = v else { continue };
        if v.is_zero() {
            continue;
        }
        for (s, p) in shift.iter_mut().zip(&geom.projected[j]) {
            if !p.is_zero() {
                *s += v * p;
            }
        }
    }
    shift
}

/// Builds the affine components of `Y = A X` from the finite `(nu, x_d)` support.
pub fn decompose(spec: &SourceSpec, a: &RationalMatrix) -> Result<Decomposition> {
    spec.ensure_valid()?;
    let n = spec.dim();
    if a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns but the source has {n} coordinates",
            a.cols()
        )));
    }
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            n,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let m = a.rows();
    let cells = spec.support();
    let mut patterns: Vec<u64> = cells.iter().map(|c| c.nu).collect();
    patterns.sort_unstable();
    patterns.dedup();
    let geoms: HashMap<u64, PatternGeometry> = patterns
        .par_iter()
        .map(|&nu| (nu, geometry(a, nu)))
        .collect();

    let keyed: Vec<(SubspaceCanonical, Vec<Rational>)> = cells
        .par_iter()
        .map(|c| {
            let g = &geoms[&c.nu];
            (g.subspace.clone(), offset(g, c, m))
        })
        .collect();

    let mut groups: BTreeMap<(usize, SubspaceCanonical, Vec<Rational>), Vec<Member>> =
        BTreeMap::new();
    for (cell, (sub, shift)) in cells.into_iter().zip(keyed) {
        groups
            .entry((sub.dimension(), sub, shift))
            .or_default()
            .push(Member {
                nu: cell.nu,
                xd: cell.xd,
                prob: cell.prob,
            });
    }
    let components: Vec<AffineComponent> = groups
        .into_iter()
        .map(|((_, subspace, shift), members)| AffineComponent {
            prob: members.iter().map(|m| &m.prob).sum(),
            subspace,
            shift,
            members,
            diff_entropy: None,
        })
        .collect();
    let selector_entropy_bits =
        model::entropy_bits(components.iter().map(|c| rational::to_f64(&c.prob)));
    Ok(Decomposition {
        components,
        selector_entropy_bits,
        total_dim: m,
    })
}

/// `H(V) = -sum p_i log2 p_i`.
pub fn selector_entropy(d: &Decomposition) -> f64 {
    model::entropy_bits(d.components.iter().map(|c| rational::to_f64(&c.prob)))
}

struct GaussianPiece {
    weight: f64,
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    /// log of the normalising constant, natural units.
    log_norm: f64,
}

fn member_gaussian(
    spec: &SourceSpec,
    a: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    member: &Member,
    weight: f64,
) -> Option<GaussianPiece> {
    let (m, n) = a.shape();
    let r = basis.ncols();
    let mut offset = DVector::<f64>::zeros(m);
    let mut cov_y = DMatrix::<f64>::zeros(m, m);
    for j in 0..n {
        let col = a.column(j);
        if member.nu >> j & 1 == 1 {
            let c = &spec.continuous[j];
            offset += col * c.mean();
            cov_y += col * col.transpose() * c.variance();
        } else if let Some(v) = &member.xd[j] {
            offset += col * rational::to_f64(v);
        }
    }
    let mean = basis.transpose() * offset;
    let cov = basis.transpose() * cov_y * basis;
    let chol = Cholesky::new(cov)?;
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let log_norm = -0.5 * (r as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    Some(GaussianPiece {
        weight,
        mean,
        chol,
        log_norm,
    })
}

fn log_density(pieces: &[GaussianPiece], z: &DVector<f64>) -> f64 {
    let terms: Vec<f64> = pieces
        .iter()
        .map(|p| {
            let d = z - &p.mean;
            let y = p.chol.l().solve_lower_triangular(&d).expect("nonsingular factor");
            p.weight.ln() + p.log_norm - 0.5 * y.norm_squared()
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Differential entropy (bits) of the continuous coordinates of a component
/// within its own subspace. Zero for point components.
pub fn component_diff_entropy(
    spec: &SourceSpec,
    a: &RationalMatrix,
    comp: &AffineComponent,
) -> DiffEntropy {
    component_diff_entropy_with(spec, a, comp, DEFAULT_ENTROPY_SAMPLES, 0x5eed)
}

pub fn component_diff_entropy_with(
    spec: &SourceSpec,
    a: &RationalMatrix,
    comp: &AffineComponent,
    samples: usize,
    seed: u64,
) -> DiffEntropy {
    let r = comp.dimension();
    if r == 0 {
        return DiffEntropy::ClosedForm { bits: 0.0 };
    }
    let af = a.to_f64();
    let basis = comp.subspace.orthonormal_basis();
    let n = spec.dim();
    let total = rational::to_f64(&comp.prob);

    let uses_uniform = comp.members.iter().any(|mem| {
        (0..n).any(|j| mem.nu >> j & 1 == 1 && !spec.continuous[j].is_gaussian())
    });
    if uses_uniform {
        // Closed form only for an invertible image of independent coordinates.
        if let [mem] = comp.members.as_slice() {
            let active: Vec<usize> = (0..n).filter(|&j| mem.nu >> j & 1 == 1).collect();
            if active.len() == r {
                let cols = DMatrix::from_fn(af.nrows(), r, |i, k| af[(i, active[k])]);
                let b = basis.transpose() * cols;
                let det = b.determinant().abs();
                let h: f64 = active.iter().map(|&j| spec.continuous[j].entropy_bits()).sum();
                return DiffEntropy::ClosedForm {
                    bits: h + det.log2(),
                };
            }
        }
        return DiffEntropy::Unavailable {
            reason: "no closed form for non-Gaussian continuous parts on this component".into(),
        };
    }

    let pieces: Option<Vec<GaussianPiece>> = comp
        .members
        .iter()
        .map(|mem| member_gaussian(spec, &af, &basis, mem, rational::to_f64(&mem.prob) / total))
        .collect();
    let Some(pieces) = pieces else {
        return DiffEntropy::Unavailable {
            reason: "singular covariance within the component subspace".into(),
        };
    };
    if let [p] = pieces.as_slice() {
        let log2_det: f64 = p.chol.l().diagonal().iter().map(|d| 2.0 * d.log2()).sum();
        return DiffEntropy::ClosedForm {
            bits: 0.5 * (r as f64 * LOG2_2PI_E + log2_det),
        };
    }
    mixture_entropy_mc(&pieces, r, samples, seed)
}

fn mixture_entropy_mc(pieces: &[GaussianPiece], r: usize, samples: usize, seed: u64) -> DiffEntropy {
    const CHUNK: usize = 4096;
    let mut cum = Vec::with_capacity(pieces.len());
    let mut acc = 0.0;
    for p in pieces {
        acc += p.weight;
        cum.push(acc);
    }
    let chunks = samples.div_ceil(CHUNK);
    let (s, s2) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let u: f64 = rng.random::<f64>() * acc;
                let k = cum.partition_point(|&x| x <= u).min(pieces.len() - 1);
                let e = DVector::<f64>::from_fn(r, |_, _| rng.sample(StandardNormal));
                let z = &pieces[k].mean + pieces[k].chol.l() * e;
                let v = -log_density(pieces, &z) / std::f64::consts::LN_2;
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
    let nf = samples as f64;
    let mean = s / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    DiffEntropy::MonteCarlo {
        bits: mean,
        stderr: (var / nf).sqrt(),
        samples,
    }
}

/// Computes and stores the differential entropy of every component.
pub fn attach_entropies(spec: &SourceSpec, a: &RationalMatrix, d: &mut Decomposition) {
    for c in d.components.iter_mut() {
        c.diff_entropy = Some(component_diff_entropy(spec, a, c));
    }
}

/// Component record for JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentJson {
    pub dim: usize,
    pub prob: String,
    pub basis: Vec<Vec<String>>,
    pub shift: Vec<String>,
    pub members_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diff_entropy: Option<DiffEntropy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<MemberJson>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberJson {
    pub nu: String,
    pub xd: BTreeMap<String, String>,
    pub prob: String,
}

impl Decomposition {
    pub fn to_json(&self, n: usize, audit: bool) -> Vec<ComponentJson> {
        self.components
            .iter()
            .map(|c| ComponentJson {
                dim: c.dimension(),
                prob: rational::format_rational(&c.prob),
                basis: c
                    .subspace
                    .basis()
                    .iter()
                    .map(|row| row.iter().map(rational::format_rational).collect())
                    .collect(),
                shift: c.shift.iter().map(rational::format_rational).collect(),
                members_count: c.members.len(),
                diff_entropy: c.diff_entropy.clone(),
                members: audit.then(|| {
                    c.members
                        .iter()
                        .map(|m| MemberJson {
                            nu: model::format_pattern(m.nu, n),
                            xd: m
                                .xd
                                .iter()
                                .enumerate()
                                .filter_map(|(i, v)| {
                                    v.as_ref()
                                        .map(|v| (i.to_string(), rational::format_rational(v)))
                                })
                                .collect(),
                            prob: rational::format_rational(&m.prob),
                        })
                        .collect()
                }),
            })
            .collect()
    }
}

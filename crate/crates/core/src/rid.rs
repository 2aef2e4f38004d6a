//! Rényi information dimension of `Y = A X` for discrete-continuous `X`.
//!
//! The dimension is the expected rank of the column submatrix selected by
//! the continuous indicators: `d(Y) = E_nu[rank(A^nu)]`. Exact evaluation
//! enumerates the indicator law; the Monte Carlo path samples it.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::decompose::Decomposition;
use crate::error::{Error, Result};
use crate::linalg::{self, ColumnRanker, RationalMatrix};
use crate::model::{chunk_rng, CellSampler, NuJointPmf, SourceSpec};
use crate::rational::{self, Rational};

/// Largest dimension evaluated by exhaustive pattern enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

const MC_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RidMethod {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RidValue {
    Exact(Rational),
    Estimate {
        mean: f64,
        /// Normal-approximation 95% interval.
        ci: (f64, f64),
        stderr: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidResult {
    pub value: RidValue,
    pub method: RidMethod,
    /// Indicator patterns enumerated (exact) or sampled (Monte Carlo).
    pub patterns: usize,
}

impl Serialize for RidResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(None)?;
        match &self.value {
            RidValue::Exact(v) => {
                map.serialize_entry("value", &rational::format_rational(v))?;
                map.serialize_entry("exact", &true)?;
            }
            RidValue::Estimate { mean, ci, stderr } => {
                map.serialize_entry("value", mean)?;
                map.serialize_entry("exact", &false)?;
                map.serialize_entry("ci95", &[ci.0, ci.1])?;
                map.serialize_entry("stderr", stderr)?;
            }
        }
        map.serialize_entry("method", &self.method)?;
        map.serialize_entry("patterns", &self.patterns)?;
        map.end()
    }
}

impl RidResult {
    pub fn exact(&self) -> Option<&Rational> {
        match &self.value {
            RidValue::Exact(r) => Some(r),
            RidValue::Estimate { .. } => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match &self.value {
            RidValue::Exact(r) => rational::to_f64(r),
            RidValue::Estimate { mean, .. } => *mean,
        }
    }

    pub fn ci(&self) -> Option<(f64, f64)> {
        match &self.value {
            RidValue::Exact(_) => None,
            RidValue::Estimate { ci, .. } => Some(*ci),
        }
    }
}

fn check_shapes(spec: &SourceSpec, a: &RationalMatrix) -> Result<()> {
    spec.ensure_valid()?;
    if a.cols() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns but the source has {} coordinates",
            a.cols(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Exact `E_nu[rank(A^nu)]`, with the default enumeration cap.
pub fn rid_linear(spec: &SourceSpec, a: &RationalMatrix) -> Result<RidResult> {
    rid_linear_with_cap(spec, a, DEFAULT_ENUMERATION_CAP)
}

pub fn rid_linear_with_cap(spec: &SourceSpec, a: &RationalMatrix, cap: usize) -> Result<RidResult> {
    check_shapes(spec, a)?;
    let n = spec.dim();
    if n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    let ranker = ColumnRanker::new(a);
    let cells = spec.nu_marginal();
    let value = cells
        .par_iter()
        .map(|(mask, p)| {
            let r = ranker.rank_of_mask(*mask);
            if r == 0 {
                Rational::zero()
            } else {
                p * rational::from_int(r as i64)
            }
        })
        .reduce(Rational::zero, |a, b| a + b);
    Ok(RidResult {
        value: RidValue::Exact(value),
        method: RidMethod::ExactEnumeration,
        patterns: cells.len(),
    })
}

/// Monte Carlo estimate of `E_nu[rank(A^nu)]` from `samples` indicator draws.
pub fn rid_linear_mc(
    spec: &SourceSpec,
    a: &RationalMatrix,
    samples: usize,
    seed: u64,
) -> Result<RidResult> {
    check_shapes(spec, a)?;
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo needs at least 1000 samples, got {samples}"
        )));
    }
    let ranker = ColumnRanker::new(a);
    let sampler = CellSampler::new(spec);
    let chunks = samples.div_ceil(MC_CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut s = 0u64;
            let mut s2 = 0u64;
            for _ in 0..len {
                let r = ranker.rank_of_mask(sampler.draw(&mut rng, None)) as u64;
                s += r;
                s2 += r * r;
            }
            (s, s2)
        })
        .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
    let n = samples as f64;
    let mean = sum as f64 / n;
    let var = ((sum_sq as f64 - n * mean * mean) / (n - 1.0)).max(0.0);
    let stderr = (var / n).sqrt();
    let half = 1.959_963_984_540_054 * stderr;
    Ok(RidResult {
        value: RidValue::Estimate {
            mean,
            ci: (mean - half, mean + half),
            stderr,
        },
        method: RidMethod::MonteCarlo,
        patterns: samples,
    })
}

/// `E_nu[min(|nu|, m)]`: the largest dimension any Lipschitz map into
/// `R^m` can attain, reached by matrices with `spark = rank + 1` and full rank.
pub fn lipschitz_upper_bound(spec: &SourceSpec, m: usize) -> Result<Rational> {
    spec.ensure_valid()?;
    Ok(spec
        .nu_marginal()
        .iter()
        .map(|(mask, p)| {
            let k = (mask.count_ones() as usize).min(m);
            p * rational::from_int(k as i64)
        })
        .sum())
}

/// Exact derivative of `rid_linear` with respect to `alpha_i` under the
/// independent product law. Never negative.
pub fn rid_sensitivity(spec: &SourceSpec, a: &RationalMatrix, i: usize) -> Result<Rational> {
    check_shapes(spec, a)?;
    let NuJointPmf::Independent { alphas } = &spec.nu_model else {
        return Err(Error::DependentSensitivity);
    };
    let n = spec.dim();
    if i >= n {
        return Err(Error::InvalidArgument(format!("coordinate {i} out of range 0..{n}")));
    }
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            n,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    let ranker = ColumnRanker::new(a);
    let bit = 1u64 << i;
    let value = (0..1u64 << n)
        .into_par_iter()
        .filter(|mask| mask & bit == 0)
        .map(|mask| {
            let gain = ranker.rank_of_mask(mask | bit) - ranker.rank_of_mask(mask);
            if gain == 0 {
                return Rational::zero();
            }
            let mut w = rational::from_int(gain as i64);
            for (j, aj) in alphas.iter().enumerate() {
                if j == i {
                    continue;
                }
                if mask >> j & 1 == 1 {
                    w *= aj;
                } else {
                    w *= Rational::one() - aj;
                }
            }
            w
        })
        .reduce(Rational::zero, |x, y| x + y);
    Ok(value)
}

/// `sum_i p_i d_i` over the affine components.
pub fn rid_of_decomposition(d: &Decomposition) -> Rational {
    d.components
        .iter()
        .map(|c| &c.prob * rational::from_int(c.dimension() as i64))
        .sum()
}

/// True iff `spark(A) = rank(A) + 1`, i.e. every column subset has rank
/// `min(m, |subset|)` up to the rank of `A`.
pub fn check_spark_condition(a: &RationalMatrix) -> Result<bool> {
    Ok(linalg::spark(a)? == linalg::rank(a) + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::dependence_tables;
    use crate::rational::{from_int, ratio};

    fn half_bg(n: usize) -> SourceSpec {
        SourceSpec::iid_bernoulli_gaussian(n, ratio(1, 2), 1.0)
    }

    fn tilde_a() -> RationalMatrix {
        RationalMatrix::from_i64_rows(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, -1]]).unwrap()
    }

    fn example_a() -> RationalMatrix {
        RationalMatrix::from_str_rows(&[
            &["1", "-1", "0.3"],
            &["1", "0.5", "1"],
            &["0.5", "-1", "0.5"],
        ])
        .unwrap()
    }

    #[test]
    fn illustrative_example_values() {
        let r = rid_linear(&half_bg(3), &example_a()).unwrap();
        assert_eq!(r.exact(), Some(&ratio(3, 2)));
        assert_eq!(r.patterns, 8);
        let r = rid_linear(&half_bg(3), &tilde_a()).unwrap();
        assert_eq!(r.exact(), Some(&ratio(11, 8)));
    }

    #[test]
    fn dependence_gap_values() {
        let a = RationalMatrix::from_i64_rows(&[&[1, 2]]).unwrap();
        let expect = [
            (dependence_tables::q(), ratio(41, 50)),
            (dependence_tables::q_prime(), from_int(1)),
            (dependence_tables::q_double_prime(), ratio(7, 10)),
        ];
        for (t, v) in expect {
            let r = rid_linear(&dependence_tables::source(t), &a).unwrap();
            assert_eq!(r.exact(), Some(&v));
        }
    }

    #[test]
    fn special_cases() {
        let all_cont = SourceSpec::iid_bernoulli_gaussian(3, from_int(1), 1.0);
        assert_eq!(rid_linear(&all_cont, &tilde_a()).unwrap().exact(), Some(&from_int(2)));

        // Full column rank: sum of alphas.
        let a = RationalMatrix::from_i64_rows(&[&[1, 0], &[0, 1], &[1, 1]]).unwrap();
        let spec = SourceSpec::bernoulli_gaussian(vec![ratio(1, 3), ratio(3, 5)], &[1.0, 2.0]);
        assert_eq!(rid_linear(&spec, &a).unwrap().exact(), Some(&ratio(14, 15)));
    }

    #[test]
    fn cap_directs_to_monte_carlo() {
        let spec = half_bg(4);
        let a = RationalMatrix::identity(4);
        let err = rid_linear_with_cap(&spec, &a, 3).unwrap_err();
        assert!(err.to_string().contains("rid_linear_mc"));
    }

    #[test]
    fn monte_carlo_examples() {
        let r = rid_linear_mc(&half_bg(3), &tilde_a(), 200_000, 3).unwrap();
        let (lo, hi) = r.ci().unwrap();
        assert!(lo <= 1.375 && 1.375 <= hi, "{lo}..{hi}");

        let all_cont = SourceSpec::iid_bernoulli_gaussian(3, from_int(1), 1.0);
        let r = rid_linear_mc(&all_cont, &tilde_a(), 1000, 1).unwrap();
        assert_eq!(r.as_f64(), 2.0);
        assert_eq!(r.ci(), Some((2.0, 2.0)));

        let none = SourceSpec::iid_bernoulli_gaussian(3, from_int(0), 1.0);
        assert_eq!(rid_linear_mc(&none, &tilde_a(), 1000, 1).unwrap().as_f64(), 0.0);

        assert!(rid_linear_mc(&none, &tilde_a(), 999, 1).is_err());
    }

    #[test]
    fn lipschitz_bound_examples() {
        assert_eq!(lipschitz_upper_bound(&half_bg(3), 3).unwrap(), ratio(3, 2));
        let q = dependence_tables::source(dependence_tables::q());
        assert_eq!(lipschitz_upper_bound(&q, 1).unwrap(), ratio(41, 50));
        let all_cont = SourceSpec::iid_bernoulli_gaussian(5, from_int(1), 1.0);
        assert_eq!(lipschitz_upper_bound(&all_cont, 2).unwrap(), from_int(2));
    }

    #[test]
    fn sensitivity_examples() {
        let zero_col = RationalMatrix::from_i64_rows(&[&[0, 1], &[0, 2]]).unwrap();
        assert_eq!(rid_sensitivity(&half_bg(2), &zero_col, 0).unwrap(), from_int(0));

        assert_eq!(
            rid_sensitivity(&half_bg(3), &RationalMatrix::identity(3), 0).unwrap(),
            from_int(1)
        );

        // rid is affine in alpha_1, so the derivative is d(alpha_1=1) - d(alpha_1=0).
        let at = |a1: Rational| {
            let spec = SourceSpec::bernoulli_gaussian(
                vec![a1, ratio(1, 2), ratio(1, 2)],
                &[1.0, 1.0, 1.0],
            );
            rid_linear(&spec, &tilde_a()).unwrap().exact().unwrap().clone()
        };
        let slope = at(from_int(1)) - at(from_int(0));
        assert_eq!(rid_sensitivity(&half_bg(3), &tilde_a(), 0).unwrap(), slope);

        let q = dependence_tables::source(dependence_tables::q());
        let a = RationalMatrix::from_i64_rows(&[&[1, 2]]).unwrap();
        assert!(matches!(
            rid_sensitivity(&q, &a, 0),
            Err(Error::DependentSensitivity)
        ));
    }

    #[test]
    fn spark_condition_examples() {
        let vand = RationalMatrix::from_i64_rows(&[&[1, 1, 1], &[1, 2, 3]]).unwrap();
        assert!(check_spark_condition(&vand).unwrap());
        let dup = RationalMatrix::from_i64_rows(&[&[1, 1, 0], &[2, 2, 1]]).unwrap();
        assert!(!check_spark_condition(&dup).unwrap());
        assert!(check_spark_condition(&RationalMatrix::identity(3)).unwrap());
    }

    #[test]
    fn invariant_to_atoms_and_continuous_parameters() {
        use crate::model::{ContinuousSpec, DiscreteSpec};
        let base = rid_linear(&half_bg(3), &tilde_a()).unwrap();
        let perturbed = SourceSpec::independent(
            vec![ratio(1, 2); 3],
            vec![
                ContinuousSpec::Uniform { lo: -3.0, hi: 5.0 },
                ContinuousSpec::Gaussian { mean: 2.0, variance: 9.0 },
                ContinuousSpec::gaussian_sd(0.1),
            ],
            vec![
                DiscreteSpec::new(vec![(from_int(1), ratio(1, 3)), (from_int(-2), ratio(2, 3))]),
                DiscreteSpec::point(ratio(7, 3)),
                DiscreteSpec::zero(),
            ],
        );
        assert_eq!(rid_linear(&perturbed, &tilde_a()).unwrap(), base);
    }
}

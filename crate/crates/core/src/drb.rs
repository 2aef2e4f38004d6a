//! Dimensional rate bias and a numerical rate-distortion oracle.

use nalgebra::DMatrix;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::decompose::{self, Decomposition, DiffEntropy};
use crate::error::{Error, Result};
use crate::linalg::{self, RationalMatrix};
use crate::model::{self, ContinuousSpec, SourceSpec};
use crate::rational::{self, Rational};
use crate::rid;

const LOG2_2PI_E: f64 = 4.094_191_170_361_282; // log2(2 pi e)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrbFormula {
    Decomposition,
    FullColumnRank,
    AbsolutelyContinuous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "flag", rename_all = "kebab-case")]
pub enum HypothesisFlag {
    /// Point components have no differential entropy; left out of the sum.
    PointComponents { count: usize, prob: f64 },
    /// A component entropy could not be evaluated.
    EntropyUnavailable { component: usize, reason: String },
    /// Some component entropies are Monte Carlo estimates.
    MonteCarloEntropy { components: usize, max_stderr: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrbResult {
    /// `None` when a required entropy is unavailable (see `flags`).
    pub drb_bits: Option<f64>,
    #[serde(with = "crate::rational::serde_str")]
    pub rid: Rational,
    pub formula: DrbFormula,
    pub flags: Vec<HypothesisFlag>,
}

fn dimension_term(d: &Rational) -> f64 {
    let d = rational::to_f64(d);
    if d == 0.0 {
        0.0
    } else {
        0.5 * d * d.log2()
    }
}

/// `H(V) + sum p_i h(C_i) + (d/2) log2 d`, components with entropies attached.
pub fn drb_of_decomposition(d: &Decomposition) -> Result<DrbResult> {
    let rid = rid::rid_of_decomposition(d);
    if rid.is_zero() {
        return Err(Error::PurelyDiscrete);
    }
    let mut flags = Vec::new();
    let mut sum = 0.0;
    let mut available = true;
    let (mut points, mut point_prob) = (0usize, 0.0);
    let (mut mc, mut max_se) = (0usize, 0.0f64);
    for (i, c) in d.components.iter().enumerate() {
        let p = rational::to_f64(&c.prob);
        if c.dimension() == 0 {
            points += 1;
            point_prob += p;
            continue;
        }
        match &c.diff_entropy {
            Some(DiffEntropy::ClosedForm { bits }) => sum += p * bits,
            Some(DiffEntropy::MonteCarlo { bits, stderr, .. }) => {
                sum += p * bits;
                mc += 1;
                max_se = max_se.max(*stderr);
            }
            Some(DiffEntropy::Unavailable { reason }) => {
                available = false;
                flags.push(HypothesisFlag::EntropyUnavailable {
                    component: i,
                    reason: reason.clone(),
                });
            }
            None => {
                available = false;
                flags.push(HypothesisFlag::EntropyUnavailable {
                    component: i,
                    reason: "entropy not computed".into(),
                });
            }
        }
    }
    if points > 0 {
        flags.push(HypothesisFlag::PointComponents {
            count: points,
            prob: point_prob,
        });
    }
    if mc > 0 {
        flags.push(HypothesisFlag::MonteCarloEntropy {
            components: mc,
            max_stderr: max_se,
        });
    }
    let b = d.selector_entropy_bits + sum + dimension_term(&rid);
    Ok(DrbResult {
        drb_bits: available.then_some(b),
        rid,
        formula: DrbFormula::Decomposition,
        flags,
    })
}

fn require_gaussian(spec: &SourceSpec, a: &RationalMatrix) -> Result<()> {
    spec.ensure_valid()?;
    if a.cols() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns but the source has {} coordinates",
            a.cols(),
            spec.dim()
        )));
    }
    if !spec.all_gaussian() {
        return Err(Error::InvalidArgument(
            "drb_linear requires Gaussian continuous parts".into(),
        ));
    }
    Ok(())
}

/// DRB of `Y = A X`. Full-column-rank `A` uses the direct formula; other
/// matrices go through the decomposition.
pub fn drb_linear(spec: &SourceSpec, a: &RationalMatrix) -> Result<DrbResult> {
    require_gaussian(spec, a)?;
    if linalg::rank(a) == a.cols() {
        drb_full_column_rank(spec, a)
    } else {
        drb_linear_via_decomposition(spec, a)
    }
}

pub fn drb_linear_via_decomposition(spec: &SourceSpec, a: &RationalMatrix) -> Result<DrbResult> {
    require_gaussian(spec, a)?;
    let mut d = decompose::decompose(spec, a)?;
    decompose::attach_entropies(spec, a, &mut d);
    drb_of_decomposition(&d)
}

/// `H(nu, X_d) + E_nu[1/2 log2 det(A^nu^T A^nu) + h(X_c^nu)] + (d/2) log2 d`.
pub fn drb_full_column_rank(spec: &SourceSpec, a: &RationalMatrix) -> Result<DrbResult> {
    require_gaussian(spec, a)?;
    let n = a.cols();
    if linalg::rank(a) != n {
        return Err(Error::InvalidArgument("matrix is not full column rank".into()));
    }
    if n > rid::DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            n,
            cap: rid::DEFAULT_ENUMERATION_CAP,
        });
    }
    let af = a.to_f64();
    let marginal = spec.nu_marginal();
    let rid: Rational = marginal
        .iter()
        .map(|(nu, p)| p * Rational::from_integer((nu.count_ones() as i64).into()))
        .sum();
    if rid.is_zero() {
        return Err(Error::PurelyDiscrete);
    }
    let expected: f64 = marginal
        .par_iter()
        .map(|(nu, p)| {
            let cols: Vec<usize> = (0..n).filter(|&j| nu >> j & 1 == 1).collect();
            if cols.is_empty() {
                return 0.0;
            }
            let sub = DMatrix::from_fn(af.nrows(), cols.len(), |i, k| af[(i, cols[k])]);
            let gram = sub.transpose() * &sub;
            let h: f64 = cols.iter().map(|&j| spec.continuous[j].entropy_bits()).sum();
            rational::to_f64(p) * (0.5 * gram.determinant().log2() + h)
        })
        .sum();
    let b = spec.joint_entropy_bits() + expected + dimension_term(&rid);
    Ok(DrbResult {
        drb_bits: Some(b),
        rid,
        formula: DrbFormula::FullColumnRank,
        flags: Vec::new(),
    })
}

/// `sum_{i<=k} log2 sigma_i + h(V_k^T X) + (k/2) log2 k` for an absolutely
/// continuous `X`; `h_projected_bits` is `h(V_k^T X)`.
pub fn drb_abs_continuous(a: &RationalMatrix, h_projected_bits: f64) -> Result<DrbResult> {
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    if !h_projected_bits.is_finite() {
        return Err(Error::NonFinite("projected entropy"));
    }
    let s = linalg::svd(&a.to_f64())?;
    let k = s.rank();
    let log_sigma: f64 = s.singular_values.iter().map(|x| x.log2()).sum();
    let kf = k as f64;
    Ok(DrbResult {
        drb_bits: Some(log_sigma + h_projected_bits + 0.5 * kf * kf.log2()),
        rid: Rational::from_integer((k as i64).into()),
        formula: DrbFormula::AbsolutelyContinuous,
        flags: Vec::new(),
    })
}

/// `h(V_k^T X)` for independent Gaussian coordinates with the given variances.
pub fn gaussian_projected_entropy(a: &RationalMatrix, variances: &[f64]) -> Result<f64> {
    if variances.len() != a.cols() {
        return Err(Error::DimensionMismatch("one variance per column".into()));
    }
    if a.is_zero() {
        return Err(Error::ZeroMatrix);
    }
    let s = linalg::svd(&a.to_f64())?;
    let k = s.rank();
    let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(variances));
    let cov = s.v.transpose() * sigma * &s.v;
    Ok(0.5 * (k as f64 * LOG2_2PI_E + cov.determinant().log2()))
}

/// `h(V_k^T X)` for a purely continuous Gaussian source.
pub fn projected_entropy_of(spec: &SourceSpec, a: &RationalMatrix) -> Result<f64> {
    let vars: Vec<f64> = spec.continuous.iter().map(|c| c.variance()).collect();
    gaussian_projected_entropy(a, &vars)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptions {
    /// Requested step; tightened to satisfy `step <= sqrt(D)/4` and atom alignment.
    pub step: Option<f64>,
    /// Half-width of the grid in standard deviations of the continuous part.
    pub sigmas: f64,
    pub max_iterations: usize,
    /// Successive-rate tolerance in bits.
    pub tolerance_bits: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            step: None,
            sigmas: 6.0,
            max_iterations: 10_000,
            tolerance_bits: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdfCurvePoint {
    pub distortion: f64,
    pub rate_bits: f64,
    pub step: f64,
    pub grid_points: usize,
    /// Lagrange multiplier of the final run, nats per unit distortion.
    pub beta: f64,
    /// Distortion actually reached by the final run.
    pub achieved_distortion: f64,
    pub iterations: usize,
}

struct Grid {
    origin: f64,
    step: f64,
    pmf: Vec<f64>,
}

impl Grid {
    fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.step
    }
}

fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

fn build_grid(spec: &SourceSpec, target: f64, opts: &GridOptions) -> Result<(Grid, f64)> {
    let alpha = rational::to_f64(&model::marginal_alpha(spec)[0]);
    let (mean, sd) = match spec.continuous[0] {
        ContinuousSpec::Gaussian { mean, variance } => (mean, variance.sqrt()),
        ContinuousSpec::Uniform { .. } => {
            return Err(Error::InvalidArgument(
                "rdf oracle supports Gaussian continuous parts only".into(),
            ))
        }
    };
    let atoms = &spec.atoms[0].atoms;
    let mut lcm = num_bigint::BigInt::one();
    for a in atoms {
        lcm = lcm.lcm(a.value.denom());
    }
    let lcm = lcm
        .to_f64()
        .filter(|x| x.is_finite() && *x <= 1e6)
        .ok_or_else(|| Error::InvalidArgument("atom denominators too large for the grid".into()))?;
    let cap = opts.step.unwrap_or(f64::INFINITY).min(target.sqrt() / 4.0);
    let per_unit = (1.0 / (lcm * cap)).ceil().max(1.0);
    let step = 1.0 / (lcm * per_unit);

    let mut lo = mean - opts.sigmas * sd;
    let mut hi = mean + opts.sigmas * sd;
    for a in atoms {
        let v = rational::to_f64(&a.value);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let lo_k = (lo / step).floor() as i64;
    let hi_k = (hi / step).ceil() as i64;
    let len = (hi_k - lo_k + 1) as usize;
    if len > 5_000_000 {
        return Err(Error::InvalidArgument(format!("grid of {len} points is too large")));
    }
    let origin = lo_k as f64 * step;
    let mut pmf = vec![0.0; len];
    if alpha > 0.0 {
        for (i, p) in pmf.iter_mut().enumerate() {
            let x = origin + i as f64 * step;
            let a = if i == 0 { f64::NEG_INFINITY } else { x - step / 2.0 };
            let b = if i + 1 == len { f64::INFINITY } else { x + step / 2.0 };
            *p = alpha * (normal_cdf(b, mean, sd) - normal_cdf(a, mean, sd));
        }
    }
    for a in atoms {
        let k = (rational::to_f64(&a.value) / step).round() as i64 - lo_k;
        pmf[k as usize] += (1.0 - alpha) * rational::to_f64(&a.prob);
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    Ok((Grid { origin, step, pmf }, alpha))
}

struct BaState {
    q: Vec<f64>,
    rate_bits: f64,
    distortion: f64,
    iterations: usize,
}

/// Blahut-Arimoto at fixed `beta`, warm-started from `q`.
fn blahut_arimoto(grid: &Grid, beta: f64, mut q: Vec<f64>, opts: &GridOptions) -> Result<BaState> {
    let n = grid.pmf.len();
    let h = grid.step;
    let band = ((50.0 / beta).sqrt() / h).ceil() as usize;
    let band = band.min(n.saturating_sub(1));
    let kernel: Vec<f64> = (0..=band)
        .map(|k| (-beta * (k as f64 * h).powi(2)).exp())
        .collect();
    let dist: Vec<f64> = (0..=band).map(|k| (k as f64 * h).powi(2)).collect();
    let support: Vec<usize> = (0..n).filter(|&i| grid.pmf[i] > 0.0).collect();
    let mut z = vec![0.0; n];
    let mut prev = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let mut rate = 0.0;
        let mut distortion = 0.0;
        for &i in &support {
            let (a, b) = (i.saturating_sub(band), (i + band).min(n - 1));
            let (mut zi, mut di) = (0.0, 0.0);
            for j in a..=b {
                let k = i.abs_diff(j);
                let w = q[j] * kernel[k];
                zi += w;
                di += w * dist[k];
            }
            z[i] = zi;
            if zi > 0.0 {
                distortion += grid.pmf[i] * di / zi;
                rate -= grid.pmf[i] * zi.ln();
            }
        }
        rate = (rate - beta * distortion) / std::f64::consts::LN_2;
        let mut next = vec![0.0; n];
        for (j, nq) in next.iter_mut().enumerate() {
            if q[j] == 0.0 {
                continue;
            }
            let (a, b) = (j.saturating_sub(band), (j + band).min(n - 1));
            let mut s = 0.0;
            for i in a..=b {
                if z[i] > 0.0 {
                    s += grid.pmf[i] * kernel[i.abs_diff(j)] / z[i];
                }
            }
            *nq = q[j] * s;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        q = next;
        if (rate - prev).abs() < opts.tolerance_bits {
            return Ok(BaState {
                q,
                rate_bits: rate.max(0.0),
                distortion,
                iterations: it,
            });
        }
        prev = rate;
    }
    Err(Error::NoConvergence(opts.max_iterations))
}

/// Rate-distortion function of a scalar Gaussian-plus-atoms source at
/// mean-squared distortion `target`, on a discretised alphabet.
pub fn rdf_oracle_scalar(spec: &SourceSpec, target: f64, opts: &GridOptions) -> Result<RdfCurvePoint> {
    spec.ensure_valid()?;
    if spec.dim() != 1 {
        return Err(Error::DimensionMismatch("rdf oracle needs a scalar source".into()));
    }
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument("distortion must be positive".into()));
    }
    let (grid, alpha) = build_grid(spec, target, opts)?;
    let mean: f64 = (0..grid.pmf.len()).map(|i| grid.pmf[i] * grid.x(i)).sum();
    let var: f64 = (0..grid.pmf.len())
        .map(|i| grid.pmf[i] * (grid.x(i) - mean).powi(2))
        .sum();
    let point = |rate_bits, beta, achieved, iterations| RdfCurvePoint {
        distortion: target,
        rate_bits,
        step: grid.step,
        grid_points: grid.pmf.len(),
        beta,
        achieved_distortion: achieved,
        iterations,
    };
    if target >= var {
        return Ok(point(0.0, 0.0, var, 0));
    }

    // High-resolution guess: slope -(d/2)/D.
    let guess = (alpha.max(0.05) / (2.0 * target)).max(1e-3);
    let mut state = blahut_arimoto(&grid, guess, grid.pmf.clone(), opts)?;
    let mut iterations = state.iterations;
    // Distortion decreases as beta grows. lo overshoots the target, hi meets it.
    let (mut lo, mut hi);
    if state.distortion > target {
        lo = guess;
        hi = 2.0 * guess;
        loop {
            state = blahut_arimoto(&grid, hi, state.q, opts)?;
            iterations += state.iterations;
            if state.distortion <= target {
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
    } else {
        hi = guess;
        lo = guess / 2.0;
        loop {
            state = blahut_arimoto(&grid, lo, state.q, opts)?;
            iterations += state.iterations;
            if state.distortion > target || lo < 1e-9 {
                break;
            }
            hi = lo;
            lo /= 2.0;
        }
    }
    let mut beta = if state.distortion > target { lo } else { hi };
    for _ in 0..60 {
        if (state.distortion - target).abs() <= 1e-4 * target {
            break;
        }
        beta = (lo * hi).sqrt();
        state = blahut_arimoto(&grid, beta, state.q, opts)?;
        iterations += state.iterations;
        if state.distortion > target {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    let corrected = state.rate_bits
        - beta * std::f64::consts::LOG2_E * (target - state.distortion);
    Ok(point(corrected.max(0.0), beta, state.distortion, iterations))
}

/// Oracle points for several distortions, evaluated in parallel.
pub fn rdf_oracle_curve(
    spec: &SourceSpec,
    distortions: &[f64],
    opts: &GridOptions,
) -> Result<Vec<RdfCurvePoint>> {
    distortions
        .par_iter()
        .map(|&d| rdf_oracle_scalar(spec, d, opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub distortions: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Gaps strictly shrink as `D` decreases.
    pub decreasing: bool,
}

/// `|R_j + (d/2) log2(2 pi e D_j) - b|` along a curve, sorted by decreasing `D`.
pub fn drb_limit_gap(b: &DrbResult, curve: &[RdfCurvePoint]) -> GapReport {
    let bits = b.drb_bits.unwrap_or(f64::NAN);
    let d = rational::to_f64(&b.rid);
    let mut pts: Vec<&RdfCurvePoint> = curve.iter().collect();
    pts.sort_by(|x, y| y.distortion.total_cmp(&x.distortion));
    let gaps: Vec<f64> = pts
        .iter()
        .map(|p| {
            (p.rate_bits + 0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E * p.distortion).log2() - bits)
                .abs()
        })
        .collect();
    let decreasing = gaps.len() >= 2 && gaps.windows(2).all(|w| w[1] < w[0]);
    GapReport {
        distortions: pts.iter().map(|p| p.distortion).collect(),
        gaps,
        decreasing,
    }
}

/// Exact rational `|det A|` for square `A`; used to check the
/// absolutely continuous identity.
pub fn abs_det(a: &RationalMatrix) -> Result<Rational> {
    Ok(linalg::determinant(a)?.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{from_int, ratio};

    fn half_bg(n: usize) -> SourceSpec {
        SourceSpec::iid_bernoulli_gaussian(n, ratio(1, 2), 1.0)
    }

    fn example_a() -> RationalMatrix {
        RationalMatrix::from_str_rows(&[
            &["1", "-1", "0.3"],
            &["1", "0.5", "1"],
            &["0.5", "-1", "0.5"],
        ])
        .unwrap()
    }

    fn h_gauss(var: f64) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * var).log2()
    }

    #[test]
    fn scalar_bernoulli_gaussian() {
        let a = RationalMatrix::identity(1);
        let r = drb_linear(&half_bg(1), &a).unwrap();
        let expect = 1.0 + 0.5 * h_gauss(1.0) - 0.25;
        assert!((r.drb_bits.unwrap() - expect).abs() < 1e-12);
        assert!((expect - 1.774).abs() < 1e-3);
        assert_eq!(r.rid, ratio(1, 2));
        assert_eq!(r.formula, DrbFormula::FullColumnRank);

        let v = drb_linear_via_decomposition(&half_bg(1), &a).unwrap();
        assert!((v.drb_bits.unwrap() - expect).abs() < 1e-9);
        assert!(matches!(v.flags[0], HypothesisFlag::PointComponents { count: 1, .. }));
    }

    #[test]
    fn single_gaussian_component() {
        let spec = SourceSpec::iid_bernoulli_gaussian(1, from_int(1), 3.0);
        let r = drb_linear_via_decomposition(&spec, &RationalMatrix::identity(1)).unwrap();
        assert!((r.drb_bits.unwrap() - h_gauss(9.0)).abs() < 1e-9);
        assert!(r.flags.is_empty());
    }

    #[test]
    fn two_lines_in_the_plane() {
        // X = (X1, X2) with exactly one coordinate active: two lines through 0.
        use crate::model::TableEntry;
        let spec = SourceSpec::with_table(
            vec![ContinuousSpec::standard_gaussian(); 2],
            vec![model::DiscreteSpec::zero(); 2],
            vec![
                TableEntry::pattern("10", ratio(1, 2)).unwrap(),
                TableEntry::pattern("01", ratio(1, 2)).unwrap(),
            ],
        );
        let r = drb_linear_via_decomposition(&spec, &RationalMatrix::identity(2)).unwrap();
        assert!((r.drb_bits.unwrap() - (1.0 + h_gauss(1.0))).abs() < 1e-9);
        assert!((r.drb_bits.unwrap() - 3.047).abs() < 1e-3);
    }

    #[test]
    fn invertible_example_has_finite_flagged_value() {
        let spec = SourceSpec::bernoulli_gaussian(vec![ratio(1, 2); 3], &[1.0; 3]);
        let r = drb_linear_via_decomposition(&spec, &example_a()).unwrap();
        assert!(r.drb_bits.unwrap().is_finite());
        assert_eq!(r.rid, ratio(3, 2));
        assert!(r.flags.iter().any(|f| matches!(f, HypothesisFlag::PointComponents { .. })));
    }

    #[test]
    fn dual_path_full_column_rank() {
        let spec = SourceSpec::bernoulli_gaussian(vec![ratio(1, 2), ratio(3, 10)], &[0.5, 2.0]);
        let a = RationalMatrix::from_i64_rows(&[&[1, 0], &[2, 1], &[0, -3]]).unwrap();
        let direct = drb_linear(&spec, &a).unwrap();
        let via = drb_linear_via_decomposition(&spec, &a).unwrap();
        assert_eq!(direct.rid, via.rid);
        assert!((direct.drb_bits.unwrap() - via.drb_bits.unwrap()).abs() < 1e-6);

        let spec3 = SourceSpec::bernoulli_gaussian(vec![ratio(1, 2); 3], &[0.4, 0.8, 1.2]);
        let direct = drb_linear(&spec3, &example_a()).unwrap();
        let via = drb_linear_via_decomposition(&spec3, &example_a()).unwrap();
        assert!((direct.drb_bits.unwrap() - via.drb_bits.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn purely_discrete_is_an_error() {
        let spec = SourceSpec::iid_bernoulli_gaussian(2, from_int(0), 1.0);
        let err = drb_linear(&spec, &RationalMatrix::identity(2)).unwrap_err();
        assert_eq!(err.to_string(), "degenerate: purely discrete");
    }

    #[test]
    fn abs_continuous_identity() {
        let a = example_a();
        let vars = [1.0, 1.0, 1.0];
        let h = gaussian_projected_entropy(&a, &vars).unwrap();
        let b = drb_abs_continuous(&a, h).unwrap().drb_bits.unwrap();
        let det = rational::to_f64(&abs_det(&a).unwrap());
        assert_eq!(abs_det(&a).unwrap(), ratio(7, 8));
        let direct = 3.0 * h_gauss(1.0) + det.log2() + 1.5 * 3f64.log2();
        assert!((b - direct).abs() < 1e-9, "{b} vs {direct}");

        let spec = SourceSpec::iid_bernoulli_gaussian(3, from_int(1), 1.0);
        let r = drb_linear(&spec, &a).unwrap();
        assert!((r.drb_bits.unwrap() - direct).abs() < 1e-9);
    }

    #[test]
    fn abs_continuous_special_cases() {
        let q = RationalMatrix::from_i64_rows(&[&[0, 1], &[1, 0]]).unwrap();
        let h = 2.0 * h_gauss(1.0);
        let b = drb_abs_continuous(&q, h).unwrap().drb_bits.unwrap();
        assert!((b - (h + 1.0)).abs() < 1e-12);

        let row = RationalMatrix::from_i64_rows(&[&[3, 4]]).unwrap();
        let hp = gaussian_projected_entropy(&row, &[1.0, 1.0]).unwrap();
        assert!((hp - h_gauss(1.0)).abs() < 1e-12);
        let r = drb_abs_continuous(&row, hp).unwrap();
        assert!((r.drb_bits.unwrap() - (5f64.log2() + hp)).abs() < 1e-12);
        assert_eq!(r.rid, from_int(1));

        assert!(matches!(
            drb_abs_continuous(&RationalMatrix::zeros(2, 2), 1.0),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn gaussian_rdf_oracle() {
        let spec = SourceSpec::iid_bernoulli_gaussian(1, from_int(1), 1.0);
        let p = rdf_oracle_scalar(&spec, 0.01, &GridOptions::default()).unwrap();
        assert!((p.rate_bits - 0.5 * 100f64.log2()).abs() < 0.02, "{p:?}");
        assert!(p.step <= 0.1 / 4.0 + 1e-15);
    }

    #[test]
    fn rate_vanishes_above_variance() {
        let spec = SourceSpec::iid_bernoulli_gaussian(1, ratio(1, 2), 1.0);
        let p = rdf_oracle_scalar(&spec, 0.6, &GridOptions::default()).unwrap();
        assert!(p.rate_bits <= 0.01);
    }

    #[test]
    fn rates_nonincreasing() {
        let spec = SourceSpec::iid_bernoulli_gaussian(1, from_int(1), 1.0);
        let curve =
            rdf_oracle_curve(&spec, &[0.5, 0.2, 0.05, 0.01], &GridOptions::default()).unwrap();
        for w in curve.windows(2) {
            assert!(w[1].rate_bits >= w[0].rate_bits);
        }
        assert!(curve.iter().all(|p| p.rate_bits >= 0.0));
    }

    #[test]
    fn gaussian_exact_curve_gaps() {
        let spec = SourceSpec::iid_bernoulli_gaussian(1, from_int(1), 1.0);
        let b = drb_linear(&spec, &RationalMatrix::identity(1)).unwrap();
        let curve: Vec<RdfCurvePoint> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&d| RdfCurvePoint {
                distortion: d,
                rate_bits: 0.5 * (1.0 / d).log2(),
                step: 0.0,
                grid_points: 0,
                beta: 0.0,
                achieved_distortion: d,
                iterations: 0,
            })
            .collect();
        let g = drb_limit_gap(&b, &curve);
        assert!(g.gaps.iter().all(|&x| x <= 0.02));

        let flat: Vec<RdfCurvePoint> = curve
            .iter()
            .map(|p| RdfCurvePoint { rate_bits: 3.0, ..p.clone() })
            .collect();
        assert!(!drb_limit_gap(&b, &flat).decreasing);
    }

    #[test]
    fn unavailable_entropy_is_flagged() {
        let spec = SourceSpec::independent(
            vec![ratio(1, 2), ratio(1, 2)],
            vec![ContinuousSpec::Uniform { lo: 0.0, hi: 1.0 }; 2],
            vec![model::DiscreteSpec::zero(); 2],
        );
        let a = RationalMatrix::from_i64_rows(&[&[1, 1]]).unwrap();
        let mut d = decompose::decompose(&spec, &a).unwrap();
        decompose::attach_entropies(&spec, &a, &mut d);
        let r = drb_of_decomposition(&d).unwrap();
        assert!(r.drb_bits.is_none());
        assert!(r
            .flags
            .iter()
            .any(|f| matches!(f, HypothesisFlag::EntropyUnavailable { .. })));
    }

    #[test]
    fn bernoulli_gaussian_oracle_trend() {
        let spec = half_bg(1);
        let b = drb_linear(&spec, &RationalMatrix::identity(1)).unwrap();
        let curve = rdf_oracle_curve(&spec, &[1e-2, 1e-3, 1e-4], &GridOptions::default()).unwrap();
        let g = drb_limit_gap(&b, &curve);
        eprintln!("{curve:?}\n{g:?}");
        assert!(g.decreasing, "{g:?}");
        assert!(g.gaps[2] <= 0.1, "{g:?}");
    }
}

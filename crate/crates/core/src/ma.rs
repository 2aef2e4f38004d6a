//! Moving-average processes driven by discrete-continuous noise.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ColumnRanker, RationalMatrix};
use crate::model::{chunk_rng, SourceSpec};
use crate::rational::{self, Rational};
use crate::rid::{self, RidResult, RidValue, DEFAULT_ENUMERATION_CAP};
use num_traits::{One, Zero};

const CHECK_CHUNK: usize = 4096;

/// `Y_i = sum_{j=-l1}^{l2} a_j W_{i-j}`, taps listed from `a_{-l1}` to `a_{l2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaConfig {
    #[serde(with = "crate::rational::serde_str::vec")]
    pub taps: Vec<Rational>,
    pub l1: usize,
    #[serde(with = "crate::rational::serde_str")]
    pub alpha: Rational,
}

impl MaConfig {
    pub fn new(taps: Vec<Rational>, l1: usize, alpha: Rational) -> Result<Self> {
        let cfg = Self { taps, l1, alpha };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Taps given as a comma-separated list such as `"-2,0.5,1"`.
    pub fn parse(taps: &str, l1: usize, alpha: &str) -> Result<Self> {
        let taps = taps
            .split(',')
            .map(|t| rational::parse_rational(t.trim()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(taps, l1, rational::parse_rational(alpha)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("MAConfig: {msg}")));
        if self.taps.is_empty() {
            return bad("taps must be nonempty");
        }
        if self.taps[0].is_zero() || self.taps[self.taps.len() - 1].is_zero() {
            return bad("first and last taps must be nonzero");
        }
        if self.l1 >= self.taps.len() {
            return bad("l1 must index into the taps");
        }
        if !rational::in_unit_interval(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn l2(&self) -> usize {
        self.taps.len() - 1 - self.l1
    }

    /// `l1 + l2`.
    pub fn span(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn alpha_f64(&self) -> f64 {
        rational::to_f64(&self.alpha)
    }
}

/// `m x (m + l1 + l2)` banded matrix, row `i` holding the taps from column `i`.
pub fn build_ma_matrix(cfg: &MaConfig, m: usize) -> Result<RationalMatrix> {
    cfg.validate()?;
    if m == 0 {
        return Err(Error::InvalidArgument("MAConfig: m must be at least 1".into()));
    }
    let n = m + cfg.span();
    let mut a = RationalMatrix::zeros(m, n);
    for i in 0..m {
        for (k, t) in cfg.taps.iter().enumerate() {
            a.set(i, i + k, t.clone());
        }
    }
    Ok(a)
}

/// I.i.d. weight-`alpha` noise for `n` taps' worth of inputs.
pub fn ma_source(cfg: &MaConfig, n: usize) -> SourceSpec {
    SourceSpec::iid_bernoulli_gaussian(n, cfg.alpha.clone(), 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BidMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact where enumeration is allowed, Monte Carlo beyond.
    Auto { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidRow {
    pub m: usize,
    pub rid: RidResult,
    /// `d(Y^m)/m` when exact.
    #[serde(with = "crate::rational::serde_str::option")]
    pub per_symbol_exact: Option<Rational>,
    pub per_symbol: f64,
    /// `alpha`, i.e. `m alpha / m`.
    #[serde(with = "crate::rational::serde_str")]
    pub lower: Rational,
    /// `(m + l1 + l2) alpha / m`.
    #[serde(with = "crate::rational::serde_str")]
    pub upper: Rational,
}

impl BidRow {
    /// `lower <= d/m <= min(upper, 1)`, exactly when exact.
    pub fn sandwiched(&self) -> bool {
        match &self.per_symbol_exact {
            Some(v) => {
                let cap = if self.upper > Rational::one() {
                    Rational::one()
                } else {
                    self.upper.clone()
                };
                &self.lower <= v && v <= &cap
            }
            None => {
                let (lo, hi) = self.rid.ci().unwrap_or((self.per_symbol, self.per_symbol));
                let m = self.m as f64;
                lo / m <= rational::to_f64(&self.upper).min(1.0)
                    && hi / m >= rational::to_f64(&self.lower)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidReport {
    pub config: MaConfig,
    pub rows: Vec<BidRow>,
    /// `lim d(Y^m)/m`.
    #[serde(with = "crate::rational::serde_str")]
    pub limit: Rational,
}

fn bid_row(cfg: &MaConfig, m: usize, mode: BidMode) -> Result<BidRow> {
    let a = build_ma_matrix(cfg, m)?;
    let n = a.cols();
    let spec = ma_source(cfg, n);
    let rid = match mode {
        BidMode::Exact => rid::rid_linear(&spec, &a)?,
        BidMode::MonteCarlo { samples, seed } => rid::rid_linear_mc(&spec, &a, samples, seed)?,
        BidMode::Auto { samples, seed } => {
            if n <= DEFAULT_ENUMERATION_CAP {
                rid::rid_linear(&spec, &a)?
            } else {
                rid::rid_linear_mc(&spec, &a, samples, seed)?
            }
        }
    };
    let mr = rational::from_int(m as i64);
    let per_symbol_exact = rid.exact().map(|d| d / &mr);
    Ok(BidRow {
        m,
        per_symbol: rid.as_f64() / m as f64,
        per_symbol_exact,
        rid,
        lower: cfg.alpha.clone(),
        upper: &cfg.alpha * rational::from_int(n as i64) / mr,
    })
}

/// Per-`m` block information dimension with its bounds.
pub fn bid_report(cfg: &MaConfig, ms: &[usize], mode: BidMode) -> Result<BidReport> {
    cfg.validate()?;
    let rows = ms
        .par_iter()
        .map(|&m| bid_row(cfg, m, mode))
        .collect::<Result<Vec<_>>>()?;
    Ok(BidReport {
        config: cfg.clone(),
        rows,
        limit: cfg.alpha.clone(),
    })
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// `D(Bern(p) || Bern(q))` in nats; `+inf` when `p` is not absolutely
/// continuous with respect to `q`.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return f64::NAN;
    }
    if (q == 0.0 && p > 0.0) || (q == 1.0 && p < 1.0) {
        return f64::INFINITY;
    }
    xlogy(p, q) + xlogy(1.0 - p, 1.0 - q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    /// `1 - exp(-n D(r || alpha))`, `None` when the ratio `r` leaves `[0, 1]`.
    pub value: Option<f64>,
    pub ratio: f64,
    pub applicable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationBounds {
    pub n: usize,
    pub k: usize,
    /// Lower bound on `P(d > k)`.
    pub above: TailBound,
    /// Lower bound on `P(d < k)`.
    pub below: TailBound,
}

fn tail(n: usize, ratio: f64, alpha: f64, applicable: bool) -> TailBound {
    let value = (0.0..=1.0).contains(&ratio).then(|| {
        let x = n as f64 * kl_bernoulli(ratio, alpha);
        -(-x).exp_m1()
    });
    TailBound {
        value,
        ratio,
        applicable,
    }
}

/// `P(d > k) >= 1 - exp(-n D((k+l1+l2-1)/n || alpha))` when
/// `(k+l1+l2-1)/n < alpha`, and `P(d < k) >= 1 - exp(-n D(k/(n-l1-l2) || alpha))`
/// when `k/(n-l1-l2) > alpha`.
pub fn concentration_bounds(cfg: &MaConfig, n: usize, k: usize) -> Result<ConcentrationBounds> {
    cfg.validate()?;
    let l = cfg.span();
    if n <= l {
        return Err(Error::InvalidArgument(format!(
            "MAConfig: n = {n} must exceed l1 + l2 = {l}"
        )));
    }
    let alpha = cfg.alpha_f64();
    let r1 = (k + l) as f64 - 1.0;
    let r1 = r1 / n as f64;
    let r2 = k as f64 / (n - l) as f64;
    Ok(ConcentrationBounds {
        n,
        k,
        above: tail(n, r1, alpha, r1 < alpha),
        below: tail(n, r2, alpha, r2 > alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSizeThresholds {
    /// `max{2(l1+l2-1)/delta, -ln eps / D(alpha - delta/2 || alpha)}`.
    pub above: f64,
    /// `max{l1+l2+1, -ln eps / D(alpha + delta || alpha)}`.
    pub below: f64,
}

pub fn sample_size_threshold(
    eps: f64,
    delta: f64,
    alpha: f64,
    l1: usize,
    l2: usize,
) -> Result<SampleSizeThresholds> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument("epsilon must lie in (0, 1]".into()));
    }
    if !(delta > 0.0 && delta < alpha.min(1.0 - alpha)) {
        return Err(Error::InvalidArgument(
            "delta must lie in (0, min(alpha, 1 - alpha))".into(),
        ));
    }
    let l = (l1 + l2) as f64;
    let log_eps = -eps.ln();
    Ok(SampleSizeThresholds {
        above: (2.0 * (l - 1.0) / delta).max(log_eps / kl_bernoulli(alpha - delta / 2.0, alpha)),
        below: (l + 1.0).max(log_eps / kl_bernoulli(alpha + delta, alpha)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub k: usize,
    pub bounds: ConcentrationBounds,
    pub freq_above: f64,
    pub freq_below: f64,
    pub above_violated: bool,
    pub below_violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationCheck {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Count of sampled dimensions, indexed by dimension.
    pub histogram: Vec<u64>,
    pub rows: Vec<CheckRow>,
    /// Samples with `rank(A^nu)` outside `[|nu| - l1 - l2, min(m, |nu|)]`.
    pub rank_range_violations: u64,
    pub any_violation: bool,
}

impl ConcentrationCheck {
    pub fn violations(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| r.above_violated || r.below_violated)
    }
}

/// Samples `nu` for `n` noise inputs (`n - l1 - l2` outputs), computes
/// `d = rank(A^nu)` and compares tail frequencies with every applicable bound.
/// A bound `B` counts as violated when the frequency falls below
/// `B - 3 sqrt(B (1 - B) / trials)`.
pub fn concentration_empirical(
    cfg: &MaConfig,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationCheck> {
    cfg.validate()?;
    let l = cfg.span();
    if n <= l || n > 64 {
        return Err(Error::InvalidArgument(format!(
            "MAConfig: n must lie in ({l}, 64]"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let m = n - l;
    let a = build_ma_matrix(cfg, m)?;
    let ranker = ColumnRanker::new(&a);
    let alpha = cfg.alpha_f64();
    let chunks = trials.div_ceil(CHECK_CHUNK);
    let (histogram, rank_range_violations) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c as u64);
            let mut h = vec![0u64; m + 1];
            let mut bad = 0u64;
            for _ in 0..CHECK_CHUNK.min(trials - c * CHECK_CHUNK) {
                let mut mask = 0u64;
                for j in 0..n {
                    if rng.random::<f64>() < alpha {
                        mask |= 1 << j;
                    }
                }
                let d = ranker.rank_of_mask_modular(mask);
                let w = mask.count_ones() as usize;
                if d + l < w || d > w.min(m) {
                    bad += 1;
                }
                h[d] += 1;
            }
            (h, bad)
        })
        .reduce(
            || (vec![0u64; m + 1], 0),
            |(mut h, b), (g, c)| {
                h.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                (h, b + c)
            },
        );
    let t = trials as f64;
    let violated = |b: &TailBound, freq: f64| match b.value {
        Some(v) if b.applicable => freq < v - 3.0 * (v * (1.0 - v) / t).sqrt(),
        _ => false,
    };
    let mut rows = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let bounds = concentration_bounds(cfg, n, k)?;
        let above: u64 = histogram[k + 1..].iter().sum();
        let below: u64 = histogram[..k].iter().sum();
        let (fa, fb) = (above as f64 / t, below as f64 / t);
        rows.push(CheckRow {
            k,
            above_violated: violated(&bounds.above, fa),
            below_violated: violated(&bounds.below, fb),
            bounds,
            freq_above: fa,
            freq_below: fb,
        });
    }
    let any_violation = rank_range_violations > 0
        || rows.iter().any(|r| r.above_violated || r.below_violated);
    Ok(ConcentrationCheck {
        n,
        trials,
        seed,
        histogram,
        rows,
        rank_range_violations,
        any_violation,
    })
}

/// `RidValue` of a row as a float, for plotting.
pub fn row_value(r: &BidRow) -> f64 {
    match &r.rid.value {
        RidValue::Exact(v) => rational::to_f64(v),
        RidValue::Estimate { mean, .. } => *mean,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::rational::ratio;

    fn example_cfg() -> MaConfig {
        MaConfig::parse("-2,0.5,1", 1, "7/10").unwrap()
    }

    #[test]
    fn matrix_shapes() {
        let a = build_ma_matrix(&example_cfg(), 1).unwrap();
        assert_eq!(a, RationalMatrix::from_str_rows(&[&["-2", "1/2", "1"]]).unwrap());
        let a2 = build_ma_matrix(&example_cfg(), 2).unwrap();
        assert_eq!(
            a2,
            RationalMatrix::from_str_rows(&[&["-2", "1/2", "1", "0"], &["0", "-2", "1/2", "1"]])
                .unwrap()
        );
        let id = MaConfig::parse("1", 0, "1/2").unwrap();
        assert_eq!(build_ma_matrix(&id, 3).unwrap(), RationalMatrix::identity(3));
    }

    #[test]
    fn config_validation() {
        assert!(MaConfig::parse("0,1", 0, "1/2").is_err());
        assert!(MaConfig::parse("1,0", 0, "1/2").is_err());
        assert!(MaConfig::parse("1,1", 0, "3/2").is_err());
        let e = MaConfig::parse("1,0", 0, "1/2").unwrap_err().to_string();
        assert!(e.contains("MAConfig"), "{e}");
    }

    #[test]
    fn first_block_value() {
        let r = bid_report(&example_cfg(), &[1], BidMode::Exact).unwrap();
        assert_eq!(r.rows[0].rid.exact().unwrap(), &ratio(973, 1000));
    }

    #[test]
    fn zero_weight_gives_zero() {
        let cfg = MaConfig::parse("-2,0.5,1", 1, "0").unwrap();
        let r = bid_report(&cfg, &[1, 2, 3], BidMode::Exact).unwrap();
        assert!(r.rows.iter().all(|x| x.rid.exact().unwrap().is_zero()));
    }

    #[test]
    fn sandwich_and_limit() {
        let cfg = example_cfg();
        let r = bid_report(&cfg, &(1..=8).collect::<Vec<_>>(), BidMode::Exact).unwrap();
        for row in &r.rows {
            assert!(row.sandwiched(), "{row:?}");
            let gap = row.per_symbol_exact.clone().unwrap() - &cfg.alpha;
            let allowed = rational::from_int(2) * &cfg.alpha / rational::from_int(row.m as i64);
            assert!(gap <= allowed);
        }
        for w in r.rows.windows(2) {
            assert!(w[1].per_symbol_exact < w[0].per_symbol_exact);
        }
    }

    #[test]
    fn monte_carlo_rows() {
        let r = bid_report(&example_cfg(), &[30], BidMode::Auto { samples: 4000, seed: 5 }).unwrap();
        assert!(r.rows[0].per_symbol_exact.is_none());
        assert!(r.rows[0].sandwiched());
        assert!(bid_report(&example_cfg(), &[30], BidMode::Exact).is_err());
    }

    #[test]
    fn triangular_block() {
        for m in 1..=6 {
            let a = build_ma_matrix(&example_cfg(), m).unwrap();
            let l = 2;
            let block = RationalMatrix::from_rows(
                (0..m).map(|i| (0..m).map(|j| a.get(i, l + j).clone()).collect()).collect(),
            )
            .unwrap();
            for i in 0..m {
                assert!(!block.get(i, i).is_zero());
                for j in i + 1..m {
                    assert!(block.get(i, j).is_zero());
                }
            }
            assert!(!linalg::determinant(&block).unwrap().is_zero());
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_bernoulli(0.3, 0.3), 0.0);
        assert!((kl_bernoulli(0.5, 0.7) - 0.087_176_693_572_388_9).abs() < 1e-12);
        assert!((kl_bernoulli(0.0, 0.7) - (1.0f64 / 0.3).ln()).abs() < 1e-12);
        assert_eq!(kl_bernoulli(0.5, 0.0), f64::INFINITY);
        assert_eq!(kl_bernoulli(0.5, 1.0), f64::INFINITY);
    }

    #[test]
    fn bound_examples() {
        let cfg = example_cfg();
        let b = concentration_bounds(&cfg, 100, 60).unwrap();
        let expect = 1.0 - (-100.0 * kl_bernoulli(0.61, 0.7)).exp();
        assert!(b.above.applicable);
        assert!((b.above.value.unwrap() - expect).abs() <= 1e-12 * expect);
        // (k + 1) / n = alpha exactly: boundary, not applicable.
        let edge = concentration_bounds(&cfg, 10, 6).unwrap();
        assert!(!edge.above.applicable);
        let far = concentration_bounds(&cfg, 10_000, 5_000).unwrap();
        assert!(far.above.value.unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn bound_pairs_sum_below_two() {
        let cfg = example_cfg();
        for n in [20, 50, 100] {
            for k in 0..n - 2 {
                let b = concentration_bounds(&cfg, n, k).unwrap();
                if b.above.applicable && b.below.applicable {
                    assert!(b.above.value.unwrap() + b.below.value.unwrap() < 2.0);
                }
            }
        }
    }

    #[test]
    fn threshold_examples() {
        let t = sample_size_threshold(0.1, 0.1, 0.7, 1, 1).unwrap();
        let d = kl_bernoulli(0.65, 0.7);
        assert!((d - 0.005_783).abs() < 1e-6);
        assert!((t.above - 10f64.ln() / d).abs() < 1e-9);
        assert!((t.above - 398.2).abs() < 0.1);
        let t1 = sample_size_threshold(1.0, 0.1, 0.7, 1, 1).unwrap();
        assert_eq!(t1.above, 20.0);
        assert_eq!(t1.below, 3.0);
        let mut prev = f64::INFINITY;
        for delta in [0.05, 0.1, 0.15, 0.2, 0.25] {
            let t = sample_size_threshold(0.1, delta, 0.7, 1, 1).unwrap();
            assert!(t.above <= prev);
            prev = t.above;
        }
        assert!(sample_size_threshold(0.1, 0.35, 0.7, 1, 1).is_err());
        assert!(sample_size_threshold(0.0, 0.1, 0.7, 1, 1).is_err());
    }

    #[test]
    fn rank_range_from_column_independence() {
        // Taking every column of a 1 x 3 row: rank 1 = |nu| - (l1 + l2).
        let a = build_ma_matrix(&example_cfg(), 1).unwrap();
        let r = ColumnRanker::new(&a).rank_of_mask(0b111);
        assert_eq!(r + 2, 3);
        let c = concentration_empirical(&example_cfg(), 12, 5000, 1).unwrap();
        assert_eq!(c.rank_range_violations, 0);
        assert_eq!(c.histogram.iter().sum::<u64>(), 5000);
    }

    #[test]
    fn check_is_reproducible() {
        let a = concentration_empirical(&example_cfg(), 20, 3000, 4).unwrap();
        let b = concentration_empirical(&example_cfg(), 20, 3000, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn weight_invariance() {
        let cfg = example_cfg();
        let a = build_ma_matrix(&cfg, 3).unwrap();
        let base = rid::rid_linear(&ma_source(&cfg, 5), &a).unwrap();
        let wide = SourceSpec::iid_bernoulli_gaussian(5, cfg.alpha.clone(), 7.5);
        assert_eq!(base.exact(), rid::rid_linear(&wide, &a).unwrap().exact());
    }
}

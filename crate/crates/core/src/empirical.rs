//! Empirical information dimension from quantised samples.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::RationalMatrix;
use crate::model::{self, SampleBatch, SourceSpec};

/// Largest support-to-sample ratio at which a scale is kept in the fit.
pub const MAX_SUPPORT_RATIO: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedBatch {
    pub rows: usize,
    pub dim: usize,
    /// Row-major `floor(m x)`.
    pub codes: Vec<i64>,
    pub scale: u64,
    pub seed: u64,
}

impl QuantizedBatch {
    pub fn row(&self, i: usize) -> &[i64] {
        &self.codes[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn quantize(batch: &SampleBatch, m: u64) -> Result<QuantizedBatch> {
    if m < 2 {
        return Err(Error::InvalidArgument("quantization scale must be at least 2".into()));
    }
    let mf = m as f64;
    let codes = batch
        .data
        .par_iter()
        .map(|&x| {
            let c = (mf * x).floor();
            if c.is_finite() && c.abs() < 9.0e18 {
                Ok(c as i64)
            } else {
                Err(Error::NonFinite("sample"))
            }
        })
        .collect::<Result<Vec<i64>>>()?;
    Ok(QuantizedBatch {
        rows: batch.rows,
        dim: batch.dim,
        codes,
        scale: m,
        seed: batch.seed,
    })
}

fn histogram(q: &QuantizedBatch) -> HashMap<&[i64], u64> {
    const SHARD: usize = 1 << 16;
    let shards = q.rows.div_ceil(SHARD).max(1);
    (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut h: HashMap<&[i64], u64> = HashMap::new();
            for i in s * SHARD..((s + 1) * SHARD).min(q.rows) {
                *h.entry(q.row(i)).or_default() += 1;
            }
            h
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEstimate {
    /// Plug-in entropy plus the Miller-Madow term, bits.
    pub bits: f64,
    /// Observed support size.
    pub support: usize,
    pub samples: usize,
}

/// Plug-in entropy of the code tuples with Miller-Madow correction.
pub fn plugin_entropy(q: &QuantizedBatch) -> Result<EntropyEstimate> {
    if q.rows < 100 {
        return Err(Error::InvalidArgument(format!(
            "entropy estimate needs at least 100 samples, got {}",
            q.rows
        )));
    }
    let h = histogram(q);
    let n = q.rows as f64;
    let mut counts: Vec<u64> = h.into_values().collect();
    counts.sort_unstable();
    let k = counts.len();
    let plug: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    let mm = (k as f64 - 1.0) / (2.0 * n * std::f64::consts::LN_2);
    Ok(EntropyEstimate {
        bits: plug + mm,
        support: k,
        samples: q.rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleEntropy {
    pub scale: u64,
    pub entropy_bits: f64,
    pub support: usize,
    /// Left out of the fit because `K/N` reached the limit.
    pub undersampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub scales_used: Vec<u64>,
    pub per_scale: Vec<ScaleEntropy>,
    pub samples: usize,
    pub seed: u64,
    /// Some scale was dropped for undersampling.
    pub undersampled_warning: bool,
}

/// Least-squares fit `y = a + b x`; returns `(b, a, stderr(b))`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let stderr = if x.len() > 2 {
        let ssr: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (b, a, stderr)
}

/// Slope of `H([Y]_m)` against `log2 m` for samples of `Y = A X`.
pub fn empirical_rid_of_batch(batch: &SampleBatch, scales: &[u64]) -> Result<RidEstimate> {
    if scales.len() < 2 {
        return Err(Error::InvalidArgument("at least two scales are needed".into()));
    }
    let mut per_scale = Vec::with_capacity(scales.len());
    for &m in scales {
        let q = quantize(batch, m)?;
        let e = plugin_entropy(&q)?;
        per_scale.push(ScaleEntropy {
            scale: m,
            entropy_bits: e.bits,
            support: e.support,
            undersampled: e.support as f64 / batch.rows as f64 >= MAX_SUPPORT_RATIO,
        });
    }
    let kept: Vec<&ScaleEntropy> = per_scale.iter().filter(|s| !s.undersampled).collect();
    if kept.len() < 2 {
        return Err(Error::InvalidArgument(
            "fewer than two scales are adequately sampled; increase the sample count".into(),
        ));
    }
    let x: Vec<f64> = kept.iter().map(|s| (s.scale as f64).log2()).collect();
    let y: Vec<f64> = kept.iter().map(|s| s.entropy_bits).collect();
    let (slope, intercept, stderr) = least_squares(&x, &y);
    Ok(RidEstimate {
        slope,
        intercept,
        stderr,
        scales_used: kept.iter().map(|s| s.scale).collect(),
        undersampled_warning: kept.len() < per_scale.len(),
        per_scale,
        samples: batch.rows,
        seed: batch.seed,
    })
}

pub fn empirical_rid(
    spec: &SourceSpec,
    a: &RationalMatrix,
    scales: &[u64],
    samples: usize,
    seed: u64,
) -> Result<RidEstimate> {
    if a.cols() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns but the source has {} coordinates",
            a.cols(),
            spec.dim()
        )));
    }
    let x = model::sample(spec, samples, seed)?;
    let y = x.transform(&a.to_f64())?;
    empirical_rid_of_batch(&y, scales)
}

/// `2^lo, 2^(lo+1), ..., 2^hi`.
pub fn dyadic_scales(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

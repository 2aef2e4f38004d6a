use std::fs;
use std::path::{Path, PathBuf};

use affdim_core::decompose::{self, attach_entropies};
use affdim_core::drb::{self, GridOptions};
use affdim_core::empirical;
use affdim_core::linalg::{self, MatrixJson, RationalMatrix};
use affdim_core::ma::{self, BidMode, BidReport, MaConfig};
use affdim_core::model::{Atom, ContinuousSpec, DiscreteSpec, SourceSpec};
use affdim_core::rational::{format_rational, to_f64};
use affdim_core::rid::{self, RidValue};
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::output::{self, Plot, Series};
use crate::{CliError, Inputs, MaArgs};

fn read_input(path: &Path, module: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::invalid(module, format!("{}: {e}", path.display())))
}

pub fn load_source(path: &Path) -> Result<(SourceSpec, Vec<u8>), CliError> {
    let bytes = read_input(path, "SourceSpec")?;
    let text = String::from_utf8_lossy(&bytes);
    let spec = SourceSpec::from_json_str(&text).map_err(|e| CliError::from_core("SourceSpec", e))?;
    Ok((spec, bytes))
}

pub fn load_matrix(path: &Path) -> Result<(RationalMatrix, Vec<u8>), CliError> {
    let bytes = read_input(path, "RationalMatrix")?;
    let j: MatrixJson = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::invalid("RationalMatrix", format!("{}: {e}", path.display())))?;
    let m = RationalMatrix::from_json(&j).map_err(|e| CliError::from_core("RationalMatrix", e))?;
    Ok((m, bytes))
}

struct Loaded {
    spec: SourceSpec,
    a: RationalMatrix,
    source_bytes: Vec<u8>,
    matrix_bytes: Vec<u8>,
}

fn load(inputs: &Inputs) -> Result<Loaded, CliError> {
    let (spec, source_bytes) = load_source(&inputs.source)?;
    let (a, matrix_bytes) = load_matrix(&inputs.matrix)?;
    if a.cols() != spec.dim() {
        return Err(CliError::invalid(
            "RationalMatrix",
            format!("matrix has {} columns but the source has {} coordinates", a.cols(), spec.dim()),
        ));
    }
    Ok(Loaded {
        spec,
        a,
        source_bytes,
        matrix_bytes,
    })
}

impl Loaded {
    fn manifest(&self, command: &str, params: serde_json::Value, seed: Option<u64>) -> RunManifest {
        RunManifest::new(command, params, seed)
            .with_input("source", &self.source_bytes)
            .with_input("matrix", &self.matrix_bytes)
    }
}

pub fn rid(inputs: &Inputs, mc: Option<usize>, seed: u64, cap: usize, out: Option<&Path>) -> Result<(), CliError> {
    let l = load(inputs)?;
    let (result, manifest) = match mc {
        Some(samples) => (
            rid::rid_linear_mc(&l.spec, &l.a, samples, seed),
            l.manifest("rid", json!({ "mc": samples }), Some(seed)),
        ),
        None => (
            rid::rid_linear_with_cap(&l.spec, &l.a, cap),
            l.manifest("rid", json!({ "cap": cap }), None),
        ),
    };
    let result = result.map_err(|e| CliError::from_core("rid", e))?;
    output::emit(out, &output::json_with_manifest(&result, &manifest)?)
}

#[derive(Serialize)]
struct DecomposeOut {
    components: Vec<decompose::ComponentJson>,
    count: usize,
    selector_entropy_bits: f64,
    rid: String,
}

pub fn decompose(inputs: &Inputs, audit: bool, entropies: bool, out: Option<&Path>) -> Result<(), CliError> {
    let l = load(inputs)?;
    let mut d = decompose::decompose(&l.spec, &l.a).map_err(|e| CliError::from_core("decompose", e))?;
    if entropies {
        attach_entropies(&l.spec, &l.a, &mut d);
    }
    let result = DecomposeOut {
        components: d.to_json(l.spec.dim(), audit),
        count: d.components.len(),
        selector_entropy_bits: d.selector_entropy_bits,
        rid: format_rational(&rid::rid_of_decomposition(&d)),
    };
    let manifest = l.manifest("decompose", json!({ "audit": audit, "entropies": entropies }), None);
    output::emit(out, &output::json_with_manifest(&result, &manifest)?)
}

/// Law of `c X` for a scalar source.
fn scaled_scalar(spec: &SourceSpec, c: f64, c_exact: &affdim_core::Rational) -> SourceSpec {
    let continuous = spec
        .continuous
        .iter()
        .map(|x| match *x {
            ContinuousSpec::Gaussian { mean, variance } => ContinuousSpec::Gaussian {
                mean: mean * c,
                variance: variance * c * c,
            },
            ContinuousSpec::Uniform { lo, hi } => ContinuousSpec::Uniform {
                lo: (lo * c).min(hi * c),
                hi: (lo * c).max(hi * c),
            },
        })
        .collect();
    let atoms = spec
        .atoms
        .iter()
        .map(|d| DiscreteSpec {
            atoms: d
                .atoms
                .iter()
                .map(|a| Atom {
                    value: &a.value * c_exact,
                    prob: a.prob.clone(),
                })
                .collect(),
        })
        .collect();
    SourceSpec {
        continuous,
        atoms,
        nu_model: spec.nu_model.clone(),
    }
}

#[derive(Serialize)]
struct DrbOut {
    #[serde(flatten)]
    drb: drb::DrbResult,
    gaps: Vec<GapRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaps_decreasing: Option<bool>,
}

#[derive(Serialize)]
struct GapRow {
    distortion: f64,
    rate_bits: f64,
    high_resolution_bits: f64,
    gap_bits: f64,
    grid_step: f64,
    grid_points: usize,
}

pub fn drb(
    inputs: &Inputs,
    oracle: &[f64],
    grid_step: Option<f64>,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let l = load(inputs)?;
    let b = drb::drb_linear(&l.spec, &l.a).map_err(|e| CliError::from_core("drb", e))?;
    let mut gaps = Vec::new();
    let mut gaps_decreasing = None;
    if !oracle.is_empty() {
        if l.a.rows() != 1 || l.a.cols() != 1 || l.a.is_zero() {
            return Err(CliError::invalid("GridOptions", "--oracle needs a scalar source and a nonzero 1x1 matrix"));
        }
        let c = l.a.get(0, 0).clone();
        let image = scaled_scalar(&l.spec, to_f64(&c), &c);
        let opts = GridOptions {
            step: grid_step,
            ..GridOptions::default()
        };
        let curve = drb::rdf_oracle_curve(&image, oracle, &opts).map_err(|e| CliError::from_core("GridOptions", e))?;
        let report = drb::drb_limit_gap(&b, &curve);
        let d = to_f64(&b.rid);
        let bits = b.drb_bits.unwrap_or(f64::NAN);
        let mut pts = curve.clone();
        pts.sort_by(|x, y| y.distortion.total_cmp(&x.distortion));
        gaps = pts
            .iter()
            .zip(&report.gaps)
            .map(|(p, g)| GapRow {
                distortion: p.distortion,
                rate_bits: p.rate_bits,
                high_resolution_bits: bits - 0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E * p.distortion).log2(),
                gap_bits: *g,
                grid_step: p.step,
                grid_points: p.grid_points,
            })
            .collect();
        gaps_decreasing = Some(report.decreasing);
    }
    let manifest = l.manifest("drb", json!({ "oracle": oracle, "grid_step": grid_step }), None);
    if let Some(path) = csv {
        let rows: Vec<Vec<String>> = gaps
            .iter()
            .map(|g| {
                vec![
                    g.distortion.to_string(),
                    g.rate_bits.to_string(),
                    g.high_resolution_bits.to_string(),
                    g.gap_bits.to_string(),
                ]
            })
            .collect();
        let text = output::csv_with_manifest(&["distortion", "rate_bits", "high_resolution_bits", "gap_bits"], &rows, &manifest)?;
        output::write_file(path, &text)?;
        let plot = Plot {
            title: "rate-distortion oracle vs high-resolution approximation",
            xlabel: "D",
            ylabel: "bits",
            logscale_x: true,
            series: vec![
                Series { x: 1, y: 2, title: "R(D) oracle", style: "linespoints" },
                Series { x: 1, y: 3, title: "b - (d/2) log2(2 pi e D)", style: "lines" },
            ],
        };
        write_gnuplot(path, &plot, &manifest)?;
    }
    let result = DrbOut {
        drb: b,
        gaps,
        gaps_decreasing,
    };
    output::emit(out, &output::json_with_manifest(&result, &manifest)?)
}

fn write_gnuplot(csv_path: &Path, plot: &Plot, manifest: &RunManifest) -> Result<(), CliError> {
    let name = csv_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let gp: PathBuf = csv_path.with_extension("gp");
    output::write_file(&gp, &output::gnuplot_script(&name, plot, manifest))
}

/// `lo..hi` (inclusive) or a comma list of integers.
pub fn parse_list(s: &str, module: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::invalid(module, format!("cannot parse {s:?}; expected `lo..hi`, `k` or `a,b,c`"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

fn parse_scales(s: &str) -> Result<Vec<u64>, CliError> {
    let module = "EmpiricalRid";
    if let Some((lo, hi)) = s.split_once("..") {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::invalid(module, format!("bad scale range {s:?}")))
        };
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        let scales: Vec<u64> = (1..63).map(|k| 1u64 << k).filter(|m| (lo..=hi).contains(m)).collect();
        if scales.len() < 2 {
            return Err(CliError::invalid(module, format!("range {s:?} holds fewer than two powers of two")));
        }
        return Ok(scales);
    }
    let scales = parse_list(s, module)?.into_iter().map(|x| x as u64).collect::<Vec<_>>();
    if scales.len() < 2 || scales.iter().any(|&m| m < 2) {
        return Err(CliError::invalid(module, "need at least two scales, each >= 2"));
    }
    Ok(scales)
}

pub fn empirical_rid(
    inputs: &Inputs,
    scales: &str,
    samples: usize,
    seed: u64,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let l = load(inputs)?;
    let scales = parse_scales(scales)?;
    let est = empirical::empirical_rid(&l.spec, &l.a, &scales, samples, seed)
        .map_err(|e| CliError::from_core("EmpiricalRid", e))?;
    let manifest = l.manifest("empirical-rid", json!({ "scales": scales, "samples": samples }), Some(seed));
    if let Some(path) = csv {
        let rows: Vec<Vec<String>> = est
            .per_scale
            .iter()
            .map(|s| {
                let fitted = est.intercept + est.slope * (s.scale as f64).log2();
                vec![
                    s.scale.to_string(),
                    (s.scale as f64).log2().to_string(),
                    s.entropy_bits.to_string(),
                    fitted.to_string(),
                    s.support.to_string(),
                    (!s.undersampled).to_string(),
                ]
            })
            .collect();
        let header = ["scale", "log2_scale", "entropy_bits", "fitted_bits", "support", "used"];
        output::write_file(path, &output::csv_with_manifest(&header, &rows, &manifest)?)?;
        let plot = Plot {
            title: "quantized entropy",
            xlabel: "log2 m",
            ylabel: "H([Y]_m) bits",
            logscale_x: false,
            series: vec![
                Series { x: 2, y: 3, title: "plug-in + Miller-Madow", style: "points pt 7" },
                Series { x: 2, y: 4, title: "least-squares fit", style: "lines" },
            ],
        };
        write_gnuplot(path, &plot, &manifest)?;
    }
    output::emit(out, &output::json_with_manifest(&est, &manifest)?)
}

pub fn ma_config(a: &MaArgs) -> Result<MaConfig, CliError> {
    MaConfig::parse(&a.taps, a.l1, &a.alpha).map_err(|e| CliError::from_core("MAConfig", e))
}

pub fn bid_rows(report: &BidReport) -> Vec<Vec<String>> {
    report
        .rows
        .iter()
        .map(|r| {
            let (d, per, method, lo, hi) = match &r.rid.value {
                RidValue::Exact(v) => (
                    format_rational(v),
                    format_rational(r.per_symbol_exact.as_ref().unwrap_or(v)),
                    "exact",
                    String::new(),
                    String::new(),
                ),
                RidValue::Estimate { mean, .. } => {
                    let (lo, hi) = r.rid.ci().unwrap_or((*mean, *mean));
                    let m = r.m as f64;
                    (
                        mean.to_string(),
                        (mean / m).to_string(),
                        "monte-carlo",
                        (lo / m).to_string(),
                        (hi / m).to_string(),
                    )
                }
            };
            vec![
                r.m.to_string(),
                d,
                per,
                r.per_symbol.to_string(),
                format_rational(&r.lower),
                format_rational(&r.upper),
                to_f64(&r.lower).to_string(),
                to_f64(&r.upper).to_string(),
                method.to_string(),
                lo,
                hi,
            ]
        })
        .collect()
}

pub const BID_HEADER: [&str; 11] = [
    "m",
    "d",
    "d_per_m",
    "d_per_m_float",
    "lower",
    "upper",
    "lower_float",
    "upper_float",
    "method",
    "ci95_lo_per_m",
    "ci95_hi_per_m",
];

pub fn bid_plot() -> Plot<'static> {
    Plot {
        title: "block information dimension per symbol",
        xlabel: "m",
        ylabel: "d(Y^m)/m",
        logscale_x: false,
        series: vec![
            Series { x: 1, y: 4, title: "d/m", style: "linespoints" },
            Series { x: 1, y: 7, title: "lower", style: "lines dt 2" },
            Series { x: 1, y: 8, title: "upper", style: "lines dt 3" },
        ],
    }
}

pub fn ma(a: &MaArgs, m: &str, mc: Option<usize>, seed: u64, out: Option<&Path>, gnuplot: bool) -> Result<(), CliError> {
    let cfg = ma_config(a)?;
    let ms = parse_list(m, "MAConfig")?;
    if ms.contains(&0) {
        return Err(CliError::invalid("MAConfig", "block length m must be positive"));
    }
    if gnuplot && out.is_none() {
        return Err(CliError::invalid("MAConfig", "--gnuplot needs --out"));
    }
    let mode = match mc {
        Some(samples) => BidMode::MonteCarlo { samples, seed },
        None => BidMode::Exact,
    };
    let report = ma::bid_report(&cfg, &ms, mode).map_err(|e| CliError::from_core("MAConfig", e))?;
    let manifest = RunManifest::new(
        "ma",
        json!({ "config": cfg, "m": ms, "mc": mc }),
        mc.map(|_| seed),
    );
    let text = output::csv_with_manifest(&BID_HEADER, &bid_rows(&report), &manifest)?;
    output::emit(out, &text)?;
    if let (true, Some(path)) = (gnuplot, out) {
        write_gnuplot(path, &bid_plot(), &manifest)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BoundsOut {
    config: MaConfig,
    n: usize,
    bounds: Vec<ma::ConcentrationBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thresholds: Option<ma::SampleSizeThresholds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    empirical: Option<ma::ConcentrationCheck>,
}

#[allow(clippy::too_many_arguments)]
pub fn ma_bounds(
    a: &MaArgs,
    n: usize,
    k: Option<&str>,
    eps: Option<f64>,
    delta: Option<f64>,
    trials: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = ma_config(a)?;
    let l = cfg.span();
    if n <= l {
        return Err(CliError::invalid("MAConfig", format!("n = {n} must exceed l1 + l2 = {l}")));
    }
    let ks = match k {
        Some(s) => parse_list(s, "MAConfig")?,
        None => (0..=n - l).collect(),
    };
    let bounds = ks
        .iter()
        .map(|&k| ma::concentration_bounds(&cfg, n, k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::from_core("MAConfig", e))?;
    let thresholds = match (eps, delta) {
        (Some(e), Some(d)) => Some(
            ma::sample_size_threshold(e, d, cfg.alpha_f64(), cfg.l1, cfg.l2())
                .map_err(|e| CliError::from_core("MAConfig", e))?,
        ),
        (None, None) => None,
        _ => return Err(CliError::invalid("MAConfig", "--eps and --delta go together")),
    };
    let empirical = match trials {
        Some(t) => {
            let check = ma::concentration_empirical(&cfg, n, t, seed).map_err(|e| CliError::from_core("MAConfig", e))?;
            if check.any_violation {
                eprintln!(
                    "warning: sampled frequencies violate {} applicable bound(s); see `empirical.rows`",
                    check.violations().count()
                );
            }
            Some(check)
        }
        None => None,
    };
    let manifest = RunManifest::new(
        "ma-bounds",
        json!({ "config": cfg, "n": n, "k": ks, "eps": eps, "delta": delta, "trials": trials }),
        trials.map(|_| seed),
    );
    let result = BoundsOut {
        config: cfg,
        n,
        bounds,
        thresholds,
        empirical,
    };
    output::emit(out, &output::json_with_manifest(&result, &manifest)?)
}

pub fn spark(matrix: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let (a, bytes) = load_matrix(matrix)?;
    let spark = linalg::spark(&a).map_err(|e| CliError::from_core("spark", e))?;
    let rank = linalg::rank(&a);
    let result = json!({
        "rows": a.rows(),
        "cols": a.cols(),
        "rank": rank,
        "spark": spark,
        "spark_equals_rank_plus_one": spark == rank + 1,
    });
    let manifest = RunManifest::new("spark", json!({}), None).with_input("matrix", &bytes);
    output::emit(out, &output::json_with_manifest(&result, &manifest)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("1..4", "m").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_list("3, 5,8", "m").unwrap(), vec![3, 5, 8]);
        assert_eq!(parse_list("7", "m").unwrap(), vec![7]);
        assert!(parse_list("4..1", "m").is_err());
        assert!(parse_list("a", "m").is_err());
    }

    #[test]
    fn scale_ranges_are_powers_of_two() {
        assert_eq!(parse_scales("16..1024").unwrap(), vec![16, 32, 64, 128, 256, 512, 1024]);
        assert_eq!(parse_scales("10..40").unwrap(), vec![16, 32]);
        assert!(parse_scales("16..31").is_err());
        assert_eq!(parse_scales("3,5").unwrap(), vec![3, 5]);
        assert!(parse_scales("1,5").is_err());
    }
}

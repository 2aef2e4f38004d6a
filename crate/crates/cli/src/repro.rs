use std::fmt::Write as _;
use std::path::Path;

use affdim_core::decompose::{attach_entropies, decompose};
use affdim_core::drb::{self, DrbResult, GridOptions};
use affdim_core::linalg::RationalMatrix;
use affdim_core::ma::{self, BidMode, MaConfig};
use affdim_core::model::{dependence_tables, ContinuousSpec, DiscreteSpec, SourceSpec};
use affdim_core::rational::{format_rational, ratio, Rational};
use affdim_core::rid;
use serde_json::json;

use crate::commands::{bid_plot, bid_rows, BID_HEADER};
use crate::manifest::RunManifest;
use crate::output::{self, gnuplot_script, Plot, Series};
use crate::CliError;

fn core(module: &str) -> impl Fn(affdim_core::Error) -> CliError + '_ {
    move |e| CliError::from_core(module, e)
}

fn example_a() -> RationalMatrix {
    RationalMatrix::from_str_rows(&[&["1", "-1", "0.3"], &["1", "0.5", "1"], &["0.5", "-1", "0.5"]]).unwrap()
}

fn tilde_a() -> RationalMatrix {
    RationalMatrix::from_i64_rows(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, -1]]).unwrap()
}

fn half_bg(n: usize) -> SourceSpec {
    SourceSpec::iid_bernoulli_gaussian(n, ratio(1, 2), 1.0)
}

fn gaussian(n: usize) -> SourceSpec {
    SourceSpec::independent(
        vec![Rational::from_integer(1.into()); n],
        vec![ContinuousSpec::standard_gaussian(); n],
        vec![DiscreteSpec::zero(); n],
    )
}

fn exact(r: rid::RidResult) -> Rational {
    r.exact().cloned().expect("exact enumeration")
}

struct DrbCase {
    name: &'static str,
    result: DrbResult,
}

fn drb_row(c: &DrbCase) -> Vec<String> {
    let flags: Vec<String> = c
        .result
        .flags
        .iter()
        .map(|f| serde_json::to_value(f).ok().and_then(|v| v["flag"].as_str().map(String::from)).unwrap_or_default())
        .collect();
    vec![
        c.name.to_string(),
        serde_json::to_value(c.result.formula).unwrap().as_str().unwrap_or("").to_string(),
        format_rational(&c.result.rid),
        c.result.drb_bits.map_or("".into(), |b| format!("{b:.6}")),
        flags.join(";"),
    ]
}

pub fn run(dir: &Path, seed: u64, with_oracle: bool) -> Result<(), CliError> {
    let manifest = RunManifest::new("repro", json!({ "oracle": with_oracle }), Some(seed));
    let mut report = String::new();
    let _ = writeln!(report, "# affdim report\n");
    let _ = writeln!(report, "version {}, seed {seed}, generated {}\n", manifest.version, manifest.timestamp);

    // Example values.
    let a = example_a();
    let ta = tilde_a();
    let row12 = RationalMatrix::from_i64_rows(&[&[1, 2]]).unwrap();
    let values: Vec<(&str, &str, Rational)> = vec![
        ("rid", "A, BG(1/2)^3", exact(rid::rid_linear(&half_bg(3), &a).map_err(core("rid"))?)),
        ("rid", "A~, BG(1/2)^3", exact(rid::rid_linear(&half_bg(3), &ta).map_err(core("rid"))?)),
        ("rid", "[1 2], Q", exact(rid::rid_linear(&dependence_tables::source(dependence_tables::q()), &row12).map_err(core("rid"))?)),
        ("rid", "[1 2], Q'", exact(rid::rid_linear(&dependence_tables::source(dependence_tables::q_prime()), &row12).map_err(core("rid"))?)),
        ("rid", "[1 2], Q''", exact(rid::rid_linear(&dependence_tables::source(dependence_tables::q_double_prime()), &row12).map_err(core("rid"))?)),
    ];
    let rows: Vec<Vec<String>> = values
        .iter()
        .map(|(q, case, v)| vec![q.to_string(), case.to_string(), format_rational(v), "exact".into()])
        .collect();
    output::write_file(
        &dir.join("examples.csv"),
        &output::csv_with_manifest(&["quantity", "case", "value", "method"], &rows, &manifest)?,
    )?;
    let _ = writeln!(report, "## Information dimension\n\n| case | d |\n|---|---|");
    for (_, case, v) in &values {
        let _ = writeln!(report, "| {case} | {} |", format_rational(v));
    }

    // Decompositions.
    let _ = writeln!(report, "\n## Affine decompositions\n\n| matrix | components | H(V) bits |\n|---|---|---|");
    for (name, m) in [("A", &a), ("tilde_A", &ta)] {
        let spec = half_bg(3);
        let mut d = decompose(&spec, m).map_err(core("decompose"))?;
        attach_entropies(&spec, m, &mut d);
        let body = json!({
            "components": d.to_json(3, true),
            "count": d.components.len(),
            "selector_entropy_bits": d.selector_entropy_bits,
        });
        output::write_file(
            &dir.join(format!("decomposition_{name}.json")),
            &output::json_with_manifest(&body, &manifest)?,
        )?;
        let _ = writeln!(report, "| {name} | {} | {:.6} |", d.components.len(), d.selector_entropy_bits);
    }

    // Block information dimension.
    let cfg = MaConfig::parse("-2,0.5,1", 1, "7/10").map_err(core("MAConfig"))?;
    let ms: Vec<usize> = (1..=12).collect();
    let bid = ma::bid_report(&cfg, &ms, BidMode::Exact).map_err(core("MAConfig"))?;
    output::write_file(&dir.join("bid.csv"), &output::csv_with_manifest(&BID_HEADER, &bid_rows(&bid), &manifest)?)?;
    output::write_file(&dir.join("bid.gp"), &gnuplot_script("bid.csv", &bid_plot(), &manifest))?;
    let _ = writeln!(report, "\n## Block information dimension, taps [-2, 1/2, 1], alpha = 7/10\n\n| m | d/m | upper |\n|---|---|---|");
    for r in &bid.rows {
        let _ = writeln!(
            report,
            "| {} | {} | {} |",
            r.m,
            r.per_symbol_exact.as_ref().map_or("-".into(), format_rational),
            format_rational(&r.upper)
        );
    }

    // Dimensional rate bias.
    let bg1 = half_bg(1);
    let scalar = RationalMatrix::identity(1);
    let cases = [
        DrbCase { name: "BG(1/2,1) scalar", result: drb::drb_linear(&bg1, &scalar).map_err(core("drb"))? },
        DrbCase { name: "A, BG(1/2)^3", result: drb::drb_linear(&half_bg(3), &a).map_err(core("drb"))? },
        DrbCase {
            name: "A, BG(1/2)^3 via decomposition",
            result: drb::drb_linear_via_decomposition(&half_bg(3), &a).map_err(core("drb"))?,
        },
        DrbCase { name: "A~, BG(1/2)^3", result: drb::drb_linear(&half_bg(3), &ta).map_err(core("drb"))? },
        DrbCase {
            name: "A, N(0,I_3)",
            result: drb::drb_abs_continuous(&a, drb::projected_entropy_of(&gaussian(3), &a).map_err(core("drb"))?)
                .map_err(core("drb"))?,
        },
    ];
    let drb_rows: Vec<Vec<String>> = cases.iter().map(drb_row).collect();
    output::write_file(
        &dir.join("drb.csv"),
        &output::csv_with_manifest(&["case", "formula", "rid", "drb_bits", "flags"], &drb_rows, &manifest)?,
    )?;
    let _ = writeln!(report, "\n## Dimensional rate bias\n\n| case | formula | d | b (bits) | flags |\n|---|---|---|---|---|");
    for r in &drb_rows {
        let _ = writeln!(report, "| {} |", r.join(" | "));
    }

    if with_oracle {
        let ds = [1e-2, 1e-3, 1e-4];
        let curve = drb::rdf_oracle_curve(&bg1, &ds, &GridOptions::default()).map_err(core("GridOptions"))?;
        let gap = drb::drb_limit_gap(&cases[0].result, &curve);
        let b = cases[0].result.drb_bits.unwrap_or(f64::NAN);
        let mut pts = curve.clone();
        pts.sort_by(|x, y| y.distortion.total_cmp(&x.distortion));
        let rows: Vec<Vec<String>> = pts
            .iter()
            .zip(&gap.gaps)
            .map(|(p, g)| {
                let hr = b - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * p.distortion).log2();
                vec![p.distortion.to_string(), p.rate_bits.to_string(), hr.to_string(), g.to_string()]
            })
            .collect();
        output::write_file(
            &dir.join("rdf_bg.csv"),
            &output::csv_with_manifest(&["distortion", "rate_bits", "high_resolution_bits", "gap_bits"], &rows, &manifest)?,
        )?;
        let plot = Plot {
            title: "BG(1/2,1): oracle R(D) and high-resolution approximation",
            xlabel: "D",
            ylabel: "bits",
            logscale_x: true,
            series: vec![
                Series { x: 1, y: 2, title: "R(D) oracle", style: "linespoints" },
                Series { x: 1, y: 3, title: "b - (1/4) log2(2 pi e D)", style: "lines" },
            ],
        };
        output::write_file(&dir.join("rdf_bg.gp"), &gnuplot_script("rdf_bg.csv", &plot, &manifest))?;
        let _ = writeln!(report, "\n## Oracle gap, BG(1/2,1)\n\n| D | R(D) bits | gap bits |\n|---|---|---|");
        for r in &rows {
            let _ = writeln!(report, "| {} | {} | {} |", r[0], r[1], r[3]);
        }
    }

    // Concentration at n = 50.
    let n = 50;
    let check = ma::concentration_empirical(&cfg, n, 100_000, seed).map_err(core("MAConfig"))?;
    let thresholds = ma::sample_size_threshold(1e-2, 0.1, cfg.alpha_f64(), cfg.l1, cfg.l2())
        .map_err(core("MAConfig"))?;
    output::write_file(
        &dir.join("concentration.json"),
        &output::json_with_manifest(&json!({ "thresholds_eps_0.01_delta_0.1": thresholds, "check": check }), &manifest)?,
    )?;
    let _ = writeln!(
        report,
        "\n## Concentration, n = {n}, 100000 trials\n\nviolated applicable bounds: {}; rank-range violations: {}\n",
        check.violations().count(),
        check.rank_range_violations
    );
    for r in check.violations() {
        let (b, f, which) = if r.below_violated {
            (r.bounds.below.value, r.freq_below, "P(d < k)")
        } else {
            (r.bounds.above.value, r.freq_above, "P(d > k)")
        };
        let _ = writeln!(report, "- k = {}: {which} bound {:.4}, frequency {f:.4}", r.k, b.unwrap_or(f64::NAN));
    }

    output::write_file(&dir.join("manifest.json"), &output::json_with_manifest(&json!({}), &manifest)?)?;
    output::write_file(&dir.join("report.md"), &report)?;
    println!("report written to {}", dir.display());
    Ok(())
}

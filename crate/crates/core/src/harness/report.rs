use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{SweepParam, Variant};
use super::run::{
    cell_dir, concat_files, read_json, sweep_point_dir, CellResult, EpochLine, ExperimentManifest, SweepManifest,
    MANIFEST_FORMAT, SWEEP_FORMAT,
};
use crate::error::{io_err, Error, Result};
use crate::metrics::{mean, paired_stats, sample_stdev, EvalResult, PairedStats};
use crate::trainer::Stage;

/// Mean and sample standard deviation (0 for a single run).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stdev: f64,
}

impl Aggregate {
    pub fn of(xs: &[f64]) -> Self {
        match xs.len() {
            0 => Self { mean: f64::NAN, stdev: f64::NAN },
            1 => Self { mean: xs[0], stdev: 0.0 },
            _ => Self { mean: mean(xs), stdev: sample_stdev(xs) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub failed: usize,
    pub intent_accuracy: Aggregate,
    pub slot_f1: Aggregate,
    pub exact_match: Aggregate,
    pub label_error_before: Aggregate,
    pub label_error_after: Aggregate,
    pub intent_modified_frac: Aggregate,
    pub slot_modified_frac: Aggregate,
}

/// Welch test of a variant's exact match against the reference baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTest {
    pub variant: Variant,
    pub reference: Variant,
    pub stats: PairedStats,
}

/// Per-epoch means over the successful seeds of a variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub stage: Stage,
    pub delta: f64,
    pub exact_match: Aggregate,
    pub slot_f1: Aggregate,
    pub intent_accuracy: Aggregate,
    pub filtered_frac: f64,
    pub mean_weight: f64,
    pub relabel_changed_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub cells: Vec<CellResult>,
    pub summaries: Vec<VariantSummary>,
    pub tests: Vec<VariantTest>,
    pub curves: BTreeMap<Variant, Vec<CurvePoint>>,
}

impl RunReport {
    pub fn summary(&self, v: Variant) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == v)
    }

    /// Final test metrics of the successful seeds of `v`, in seed order.
    pub fn test_results(&self, v: Variant) -> Vec<EvalResult> {
        self.cells.iter().filter(|c| c.variant == v && c.is_ok()).filter_map(|c| c.test).collect()
    }

    pub fn exact_matches(&self, v: Variant) -> Vec<f64> {
        self.test_results(v).iter().map(|r| r.exact_match).collect()
    }
}

/// Baseline that the significance tests compare against.
pub const REFERENCE: Variant = Variant::BaselineEnTransGen;

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

fn pct(a: &Aggregate) -> String {
    format!("{:.2} ± {:.2}", 100.0 * a.mean, 100.0 * a.stdev)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

fn read_epochs(path: &Path) -> Result<Vec<EpochLine>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

fn summarize(v: Variant, cells: &[&CellResult]) -> VariantSummary {
    let ok: Vec<&CellResult> = cells.iter().copied().filter(|c| c.is_ok()).collect();
    let agg = |f: &dyn Fn(&CellResult) -> Option<f64>| Aggregate::of(&ok.iter().filter_map(|c| f(c)).collect::<Vec<_>>());
    VariantSummary {
        variant: v,
        runs: ok.len(),
        failed: cells.len() - ok.len(),
        intent_accuracy: agg(&|c| c.test.map(|t| t.intent_accuracy)),
        slot_f1: agg(&|c| c.test.map(|t| t.slot_f1)),
        exact_match: agg(&|c| c.test.map(|t| t.exact_match)),
        label_error_before: agg(&|c| c.diagnostics.map(|d| d.label_error_before)),
        label_error_after: agg(&|c| c.diagnostics.map(|d| d.label_error_after)),
        intent_modified_frac: agg(&|c| c.diagnostics.map(|d| d.intent_modified_frac)),
        slot_modified_frac: agg(&|c| c.diagnostics.map(|d| d.slot_modified_frac)),
    }
}

fn curve(lines: &[&[EpochLine]]) -> Vec<CurvePoint> {
    let Some(first) = lines.first() else { return Vec::new() };
    (0..first.len())
        .map(|e| {
            let at: Vec<&EpochLine> = lines.iter().filter_map(|l| l.get(e)).collect();
            let test = |f: &dyn Fn(&EvalResult) -> f64| {
                Aggregate::of(&at.iter().filter_map(|l| l.report.metrics.get("test").map(f)).collect::<Vec<_>>())
            };
            let avg = |f: &dyn Fn(&EpochLine) -> f64| mean(&at.iter().map(|l| f(l)).collect::<Vec<_>>());
            CurvePoint {
                epoch: at[0].report.epoch,
                stage: at[0].report.stage,
                delta: at[0].report.delta,
                exact_match: test(&|r| r.exact_match),
                slot_f1: test(&|r| r.slot_f1),
                intent_accuracy: test(&|r| r.intent_accuracy),
                filtered_frac: avg(&|l| l.report.filtered_frac),
                mean_weight: avg(&|l| l.report.mean_weight),
                relabel_changed_frac: avg(&|l| l.report.relabel_changed_frac),
            }
        })
        .collect()
}

/// Rebuilds `epochs.jsonl`, `results.csv`, `summary.csv`, `tests.csv`,
/// `tables.md` and `curves/*` from the cell logs of a run directory.
pub fn emit_report(run_dir: &Path) -> Result<RunReport> {
    let manifest: ExperimentManifest = read_json(&run_dir.join("manifest.json"))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::Config(format!("{} is not an experiment run", run_dir.display())));
    }
    let cfg = &manifest.config;
    let mut cells = Vec::new();
    let mut epoch_files = Vec::new();
    let mut epochs: BTreeMap<Variant, Vec<Vec<EpochLine>>> = BTreeMap::new();
    for &v in &cfg.variants {
        for &s in &cfg.seeds {
            let dir = cell_dir(run_dir, v, s);
            let r: CellResult = read_json(&dir.join("result.json"))?;
            if r.variant != v || r.seed != s {
                return Err(Error::Config(format!("result in {} belongs to another cell", dir.display())));
            }
            if r.is_ok() {
                let p = dir.join("epochs.jsonl");
                epochs.entry(v).or_default().push(read_epochs(&p)?);
                epoch_files.push(p);
            }
            cells.push(r);
        }
    }
    concat_files(&epoch_files, &run_dir.join("epochs.jsonl"))?;

    let summaries: Vec<VariantSummary> = cfg
        .variants
        .iter()
        .map(|&v| summarize(v, &cells.iter().filter(|c| c.variant == v).collect::<Vec<_>>()))
        .collect();
    let em = |v: Variant| -> Vec<f64> {
        cells.iter().filter(|c| c.variant == v && c.is_ok()).filter_map(|c| c.test.map(|t| t.exact_match)).collect()
    };
    let mut tests = Vec::new();
    if cfg.variants.contains(&REFERENCE) {
        let reference = em(REFERENCE);
        for &v in cfg.variants.iter().filter(|&&v| v != REFERENCE) {
            if let Ok(stats) = paired_stats(&em(v), &reference) {
                tests.push(VariantTest { variant: v, reference: REFERENCE, stats });
            }
        }
    }
    let curves: BTreeMap<Variant, Vec<CurvePoint>> = epochs
        .iter()
        .map(|(&v, runs)| (v, curve(&runs.iter().map(|r| r.as_slice()).collect::<Vec<_>>())))
        .collect();

    let report = RunReport { run_dir: run_dir.to_path_buf(), cells, summaries, tests, curves };
    write_results_csv(&run_dir.join("results.csv"), &report.cells)?;
    write_summary_csv(&run_dir.join("summary.csv"), &report.summaries)?;
    write_tests_csv(&run_dir.join("tests.csv"), &report.tests)?;
    let curves_dir = run_dir.join("curves");
    fs::create_dir_all(&curves_dir).map_err(io_err(&curves_dir))?;
    for (v, points) in &report.curves {
        write_curve_csv(&curves_dir.join(format!("{}.csv", v.name())), points)?;
    }
    let svg = curves_svg(&report.curves, "test exact match");
    let svg_path = curves_dir.join("exact_match.svg");
    fs::write(&svg_path, svg).map_err(io_err(&svg_path))?;
    let md_path = run_dir.join("tables.md");
    fs::write(&md_path, tables_markdown(&report)).map_err(io_err(&md_path))?;
    Ok(report)
}

fn write_results_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let header = [
        "variant", "seed", "status", "intent_accuracy", "slot_f1", "exact_match", "slot_precision", "slot_recall",
        "target_dev_exact_match", "label_error_before", "label_error_after", "intent_modified_frac",
        "slot_modified_frac", "intent_change", "slot_change", "boundary_change", "slot_boundary_change",
        "selected_epoch", "error",
    ];
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            let t = |f: fn(&EvalResult) -> f64| c.test.as_ref().map(|r| fmt_f(f(r))).unwrap_or_default();
            let d = |f: fn(&crate::metrics::RelabelDiagnostics) -> f64| {
                c.diagnostics.as_ref().map(|r| fmt_f(f(r))).unwrap_or_default()
            };
            vec![
                c.variant.name().to_string(),
                c.seed.to_string(),
                if c.is_ok() { "ok".into() } else { "error".into() },
                t(|r| r.intent_accuracy),
                t(|r| r.slot_f1),
                t(|r| r.exact_match),
                t(|r| r.slot_precision),
                t(|r| r.slot_recall),
                c.target_dev.as_ref().map(|r| fmt_f(r.exact_match)).unwrap_or_default(),
                d(|r| r.label_error_before),
                d(|r| r.label_error_after),
                d(|r| r.intent_modified_frac),
                d(|r| r.slot_modified_frac),
                d(|r| r.intent_change),
                d(|r| r.slot_change),
                d(|r| r.boundary_change),
                d(|r| r.slot_boundary_change),
                c.selected_epoch.map(|e| e.to_string()).unwrap_or_default(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn summary_row(s: &VariantSummary) -> Vec<String> {
    let mut row = vec![s.variant.name().to_string(), s.runs.to_string(), s.failed.to_string()];
    for a in [
        &s.intent_accuracy,
        &s.slot_f1,
        &s.exact_match,
        &s.label_error_before,
        &s.label_error_after,
        &s.intent_modified_frac,
        &s.slot_modified_frac,
    ] {
        row.push(fmt_f(a.mean));
        row.push(fmt_f(a.stdev));
    }
    row
}

const SUMMARY_HEADER: [&str; 17] = [
    "variant", "runs", "failed", "intent_accuracy_mean", "intent_accuracy_stdev", "slot_f1_mean", "slot_f1_stdev",
    "exact_match_mean", "exact_match_stdev", "label_error_before_mean", "label_error_before_stdev",
    "label_error_after_mean", "label_error_after_stdev", "intent_modified_frac_mean", "intent_modified_frac_stdev",
    "slot_modified_frac_mean", "slot_modified_frac_stdev",
];

fn write_summary_csv(path: &Path, summaries: &[VariantSummary]) -> Result<()> {
    write_csv(path, &SUMMARY_HEADER, &summaries.iter().map(summary_row).collect::<Vec<_>>())
}

fn write_tests_csv(path: &Path, tests: &[VariantTest]) -> Result<()> {
    let header = ["variant", "reference", "mean", "stdev", "reference_mean", "reference_stdev", "t", "df", "p"];
    let rows: Vec<Vec<String>> = tests
        .iter()
        .map(|t| {
            let s = &t.stats;
            vec![
                t.variant.name().into(),
                t.reference.name().into(),
                fmt_f(s.mean_a),
                fmt_f(s.stdev_a),
                fmt_f(s.mean_b),
                fmt_f(s.stdev_b),
                fmt_f(s.t),
                fmt_f(s.df),
                fmt_f(s.p),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let header = [
        "epoch", "stage", "delta", "exact_match_mean", "exact_match_stdev", "slot_f1_mean", "slot_f1_stdev",
        "intent_accuracy_mean", "intent_accuracy_stdev", "filtered_frac", "mean_weight", "relabel_changed_frac",
    ];
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.epoch.to_string(),
                match p.stage {
                    Stage::Init => "init".into(),
                    Stage::Relabel => "relabel".into(),
                },
                fmt_f(p.delta),
                fmt_f(p.exact_match.mean),
                fmt_f(p.exact_match.stdev),
                fmt_f(p.slot_f1.mean),
                fmt_f(p.slot_f1.stdev),
                fmt_f(p.intent_accuracy.mean),
                fmt_f(p.intent_accuracy.stdev),
                fmt_f(p.filtered_frac),
                fmt_f(p.mean_weight),
                fmt_f(p.relabel_changed_frac),
            ]
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn metric_table(out: &mut String, rows: &[&VariantSummary]) {
    out.push_str("| Method | Intent Acc. | Slot F1 | Exact Match | Runs |\n|---|---|---|---|---|\n");
    for s in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            s.variant.label(),
            pct(&s.intent_accuracy),
            pct(&s.slot_f1),
            pct(&s.exact_match),
            s.runs
        );
    }
}

fn tables_markdown(report: &RunReport) -> String {
    let mut out = String::from("# Results\n\nTest-set metrics in percent, mean ± sample stdev over seeds.\n\n");
    let main: Vec<&VariantSummary> = report.summaries.iter().filter(|s| !s.variant.is_ablation()).collect();
    if !main.is_empty() {
        out.push_str("## Main comparison\n\n");
        metric_table(&mut out, &main);
        out.push('\n');
    }
    let ablations: Vec<&VariantSummary> = report
        .summaries
        .iter()
        .filter(|s| s.variant.is_ablation() || s.variant == Variant::DenoiseFull)
        .collect();
    if ablations.iter().any(|s| s.variant.is_ablation()) {
        out.push_str("## Ablation\n\n");
        metric_table(&mut out, &ablations);
        out.push('\n');
    }
    if !report.tests.is_empty() {
        let _ = writeln!(out, "## Significance versus {}\n", REFERENCE.label());
        out.push_str("Welch t-test on exact match.\n\n| Method | Δ Exact Match | t | df | p |\n|---|---|---|---|---|\n");
        for t in &report.tests {
            let s = &t.stats;
            let _ = writeln!(
                out,
                "| {} | {:+.2} | {:.3} | {:.2} | {:.3e} |",
                t.variant.label(),
                100.0 * (s.mean_a - s.mean_b),
                s.t,
                s.df,
                s.p
            );
        }
        out.push('\n');
    }
    let relabeling: Vec<&VariantSummary> =
        report.summaries.iter().filter(|s| s.runs > 0 && s.intent_modified_frac.mean + s.slot_modified_frac.mean > 0.0).collect();
    if !relabeling.is_empty() {
        out.push_str("## Relabeling of augmented data\n\n");
        out.push_str("Argmax labels against the hidden clean labels, pooled over intents and slot tokens.\n\n");
        out.push_str("| Method | Intents modified | Slots modified | Label error before | Label error after |\n|---|---|---|---|---|\n");
        for s in relabeling {
            let _ = writeln!(
                out,
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} |",
                s.variant.label(),
                100.0 * s.intent_modified_frac.mean,
                100.0 * s.slot_modified_frac.mean,
                100.0 * s.label_error_before.mean,
                100.0 * s.label_error_after.mean
            );
        }
        out.push('\n');
    }
    let failed: Vec<&CellResult> = report.cells.iter().filter(|c| !c.is_ok()).collect();
    if !failed.is_empty() {
        out.push_str("## Failed cells\n\n");
        for c in failed {
            let _ = writeln!(out, "- {} seed {}: {}", c.variant.name(), c.seed, c.error.as_deref().unwrap_or(""));
        }
    }
    out
}

const PALETTE: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

/// Static line chart of per-epoch mean exact match.
fn curves_svg(curves: &BTreeMap<Variant, Vec<CurvePoint>>, title: &str) -> String {
    let (w, h, pad) = (720.0, 420.0, 50.0);
    let pts: Vec<(usize, f64)> =
        curves.values().flatten().filter(|p| p.exact_match.mean.is_finite()).map(|p| (p.epoch, p.exact_match.mean)).collect();
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{pad}\" y=\"24\" font-size=\"14\">{title}</text>\n"
    );
    if pts.is_empty() {
        out.push_str("</svg>\n");
        return out;
    }
    let max_e = pts.iter().map(|p| p.0).max().unwrap_or(1).max(2) as f64;
    let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let plot_w = w - 2.0 * pad - 180.0;
    let x = |e: usize| pad + (e as f64 - 1.0) / (max_e - 1.0) * plot_w;
    let y = |v: f64| h - pad - (v - lo) / (hi - lo) * (h - 2.0 * pad);
    let _ = writeln!(
        out,
        "<line x1=\"{pad}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <text x=\"{pad}\" y=\"{:.2}\">1</text>\n<text x=\"{:.2}\" y=\"{:.2}\">{max_e}</text>\n\
         <text x=\"4\" y=\"{:.2}\">{:.3}</text>\n<text x=\"4\" y=\"{:.2}\">{:.3}</text>",
        h - pad,
        pad + plot_w,
        h - pad,
        h - pad,
        h - pad + 16.0,
        pad + plot_w - 8.0,
        h - pad + 16.0,
        y(hi) + 4.0,
        hi,
        y(lo) + 4.0,
        lo
    );
    for (i, (v, points)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = points
            .iter()
            .filter(|p| p.exact_match.mean.is_finite())
            .map(|p| format!("{:.2},{:.2}", x(p.epoch), y(p.exact_match.mean)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" fill=\"{color}\">{}</text>",
            path.join(" "),
            w - 170.0,
            pad + 18.0 * i as f64,
            v.name()
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// Value with the highest mean exact match for `v`; the first wins ties.
    pub fn best_value(&self, v: Variant) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for p in &self.points {
            if let Some(s) = p.report.summary(v) {
                if s.runs > 0 && best.is_none_or(|b| s.exact_match.mean > b.1) {
                    best = Some((p.value, s.exact_match.mean));
                }
            }
        }
        best.map(|b| b.0)
    }
}

/// Regenerates every point's report plus `sweep.csv`, `sweep_summary.csv`
/// and `sweep.md`.
pub fn emit_sweep_report(out: &Path) -> Result<SweepReport> {
    let manifest: SweepManifest = read_json(&out.join("manifest.json"))?;
    if manifest.format != SWEEP_FORMAT {
        return Err(Error::Config(format!("{} is not a sweep", out.display())));
    }
    let points = manifest
        .values
        .iter()
        .map(|&value| Ok(SweepPoint { value, report: emit_report(&sweep_point_dir(out, manifest.param, value))? }))
        .collect::<Result<Vec<_>>>()?;
    let report = SweepReport { param: manifest.param, points };
    let name = report.param.name();

    let mut rows = Vec::new();
    for p in &report.points {
        for c in &p.report.cells {
            let t = |f: fn(&EvalResult) -> f64| c.test.as_ref().map(|r| fmt_f(f(r))).unwrap_or_default();
            rows.push(vec![
                fmt_f(p.value),
                c.variant.name().into(),
                c.seed.to_string(),
                if c.is_ok() { "ok".into() } else { "error".into() },
                t(|r| r.intent_accuracy),
                t(|r| r.slot_f1),
                t(|r| r.exact_match),
            ]);
        }
    }
    write_csv(
        &out.join("sweep.csv"),
        &[name, "variant", "seed", "status", "intent_accuracy", "slot_f1", "exact_match"],
        &rows,
    )?;

    let mut header = vec![name];
    header.extend(SUMMARY_HEADER);
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .flat_map(|p| {
            p.report.summaries.iter().map(move |s| {
                let mut row = vec![fmt_f(p.value)];
                row.extend(summary_row(s));
                row
            })
        })
        .collect();
    write_csv(&out.join("sweep_summary.csv"), &header, &rows)?;

    let mut md = format!("# Sweep over {name}\n\nTest-set metrics in percent, mean ± sample stdev over seeds.\n");
    let variants: Vec<Variant> =
        report.points.first().map(|p| p.report.summaries.iter().map(|s| s.variant).collect()).unwrap_or_default();
    for v in variants {
        let _ = write!(md, "\n## {}\n\n| {name} | Intent Acc. | Slot F1 | Exact Match | Runs |\n|---|---|---|---|---|\n", v.label());
        for p in &report.points {
            if let Some(s) = p.report.summary(v) {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} |",
                    p.value,
                    pct(&s.intent_accuracy),
                    pct(&s.slot_f1),
                    pct(&s.exact_match),
                    s.runs
                );
            }
        }
        if let Some(b) = report.best_value(v) {
            let _ = writeln!(md, "\nBest {name} by mean exact match: {b}");
        }
    }
    let md_path = out.join("sweep.md");
    fs::write(&md_path, md).map_err(io_err(&md_path))?;
    Ok(report)
}

/// Report kinds that `emit_any` can regenerate.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyReport {
    Experiment(RunReport),
    Sweep(SweepReport),
}

/// Regenerates the report of an experiment or sweep directory.
pub fn emit_any(dir: &Path) -> Result<AnyReport> {
    #[derive(Deserialize)]
    struct Head {
        format: String,
    }
    let head: Head = read_json(&dir.join("manifest.json"))?;
    match head.format.as_str() {
        MANIFEST_FORMAT => emit_report(dir).map(AnyReport::Experiment),
        SWEEP_FORMAT => emit_sweep_report(dir).map(AnyReport::Sweep),
        other => Err(Error::Config(format!("unknown run format {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_handles_small_samples() {
        assert!(Aggregate::of(&[]).mean.is_nan());
        assert_eq!(Aggregate::of(&[0.5]), Aggregate { mean: 0.5, stdev: 0.0 });
        let a = Aggregate::of(&[1.0, 3.0]);
        assert_eq!(a.mean, 2.0);
        assert!((a.stdev - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_curves_still_render() {
        let svg = curves_svg(&BTreeMap::new(), "x");
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}

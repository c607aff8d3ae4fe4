//! CSV tables, per-simulation dumps, curve grids and static SVG plots.
//! All text output is UTF-8 with LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::fit::{FittedCurve, FpSelection};
use crate::harness::{CellResult, SummaryRow, SweepResult};
use crate::metrics::{integration_grid, summarize, PERCENTILE_RULE};
use crate::scenario::{D_MAX, D_MIN};

pub const SUMMARY_HEADER: [&str; 13] = [
    "scenario", "design", "method", "total_n", "n_sims", "min", "p5", "median", "p95", "max",
    "mean", "converged", "ridged",
];

/// Default number of replicate curves written per cell.
pub const DEFAULT_CURVE_SAMPLE: usize = 100;

pub fn to_percent(fraction: f64) -> f64 {
    100.0 * fraction
}

fn writer_to_string(build: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    build(&mut w).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8")
}

/// Summary table as CSV text, fractions with six decimals.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    writer_to_string(|w| {
        w.write_record(SUMMARY_HEADER)?;
        for r in rows {
            let s = &r.summary;
            let scenario = r.scenario.map_or_else(|| "Overall".to_string(), |id| id.to_string());
            w.write_record([
                scenario,
                r.design.clone(),
                r.method.to_string(),
                r.total_n.to_string(),
                s.n_sims.to_string(),
                format!("{:.6}", s.min),
                format!("{:.6}", s.p5),
                format!("{:.6}", s.median),
                format!("{:.6}", s.p95),
                format!("{:.6}", s.max),
                format!("{:.6}", s.mean),
                r.convergence.converged.to_string(),
                r.convergence.ridged.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Per-replicate values; sABC written in shortest round-trip form.
pub fn per_sim_csv(result: &CellResult) -> String {
    writer_to_string(|w| {
        w.write_record(["sim_index", "sabc", "converged", "ridged", "iterations"])?;
        for (i, (v, st)) in result.per_sim_sabc.iter().zip(&result.per_sim_status).enumerate() {
            w.write_record([
                i.to_string(),
                v.to_string(),
                u8::from(st.converged).to_string(),
                u8::from(st.ridged).to_string(),
                st.iterations.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Reads the sABC column of a per-simulation dump.
pub fn read_per_sim(path: &Path) -> Result<Vec<f64>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let v: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| crate::error::domain(format!("{}: bad sabc field", path.display())))?;
        out.push(v);
    }
    Ok(out)
}

/// `D,truth,sim_0,...` on the integration grid for the sampled curves.
pub fn curve_dump_csv<T: Curve>(truth: &T, curves: &[FittedCurve], step: f64) -> Result<String> {
    let grid = integration_grid(D_MIN, D_MAX, step)?;
    Ok(writer_to_string(|w| {
        let mut header = vec!["D".to_string(), "truth".to_string()];
        header.extend((0..curves.len()).map(|i| format!("sim_{i}")));
        w.write_record(&header)?;
        for &d in &grid {
            let mut rec = vec![format!("{d:.4}"), format!("{:.8}", truth.probability(d))];
            rec.extend(curves.iter().map(|c| format!("{:.8}", c.predict(d))));
            w.write_record(&rec)?;
        }
        Ok(())
    }))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(crate::error::domain("no summary rows to write"));
    }
    write_file(path, &summary_csv(rows))
}

pub fn emit_curve_dump(result: &CellResult, path: &Path) -> Result<()> {
    write_file(
        path,
        &curve_dump_csv(&result.cell.scenario, &result.sample_curves, result.step)?,
    )
}

// ---------------------------------------------------------------------------
// SVG

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

fn sx(d: f64) -> f64 {
    LEFT + (d - D_MIN) / (D_MAX - D_MIN) * (W - LEFT - RIGHT)
}

fn sy(p: f64, y_max: f64) -> f64 {
    H - BOTTOM - p / y_max * (H - TOP - BOTTOM)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, stroke: &str, width: f64, class: &str) -> String {
    let pts: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(
        "<polyline class=\"{class}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
        pts.join(" ")
    )
}

/// Truth (black) and sampled fitted curves (red) over [10, 20] x [0, 1].
pub fn curve_plot_svg(result: &CellResult) -> Result<String> {
    let grid = integration_grid(D_MIN, D_MAX, 0.05)?;
    let mut s = svg_open(&format!(
        "Scenario {} | {} N={} | {}",
        result.cell.scenario.id(),
        result.cell.design.label(),
        result.cell.design.total_n(),
        result.cell.method
    ));
    let _ = write!(
        s,
        r#"<g class="axes" data-x-min="{D_MIN}" data-x-max="{D_MAX}" data-y-min="0" data-y-max="1" stroke="black">"#
    );
    let _ = write!(
        s,
        r#"<line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = H - BOTTOM,
        r = W - RIGHT
    );
    s.push('\n');
    for d in [10.0, 12.0, 14.0, 16.0, 18.0, 20.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{d}</text>"#,
            sx(d),
            H - BOTTOM + 16.0
        );
    }
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{p}</text>"#,
            LEFT - 6.0,
            sy(p, 1.0) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">duration (days)</text>"#,
        W / 2.0,
        H - 12.0
    );
    for c in &result.sample_curves {
        s.push_str(&polyline(
            grid.iter().map(|&d| (sx(d), sy(c.predict(d), 1.0))),
            "#d62728",
            0.6,
            "fitted",
        ));
    }
    let truth = &result.cell.scenario;
    s.push_str(&polyline(
        grid.iter().map(|&d| (sx(d), sy(truth.probability(d), 1.0))),
        "black",
        2.0,
        "truth",
    ));
    s.push_str("</svg>\n");
    Ok(s)
}

/// Box-and-whisker summary (5th/50th/95th percentiles, min/max whiskers)
/// of sABC for every summary row.
pub fn boxplot_svg(rows: &[SummaryRow], title: &str) -> String {
    let y_max = rows
        .iter()
        .map(|r| r.summary.max)
        .fold(0.05, f64::max)
        .min(1.0)
        * 1.1;
    let mut s = svg_open(title);
    let plot_w = W - LEFT - RIGHT;
    let slot = plot_w / rows.len().max(1) as f64;
    let _ = writeln!(
        s,
        r#"<line class="ref5" x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="red" stroke-dasharray="4 3"/>"#,
        W - RIGHT,
        y = sy(0.05, y_max)
    );
    for (i, r) in rows.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let half = (slot * 0.3).min(12.0);
        let sm = &r.summary;
        let label = match r.scenario {
            Some(id) => format!("S{id} {} {} {}", r.method, r.design, r.total_n),
            None => format!("All {} {} {}", r.method, r.design, r.total_n),
        };
        let _ = writeln!(
            s,
            r##"<g class="box"><title>{}</title><line x1="{cx:.2}" x2="{cx:.2}" y1="{:.2}" y2="{:.2}" stroke="black"/><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/><line x1="{:.2}" x2="{:.2}" y1="{m:.2}" y2="{m:.2}" stroke="black" stroke-width="2"/></g>"##,
            escape(&label),
            sy(sm.max, y_max),
            sy(sm.min, y_max),
            cx - half,
            sy(sm.p95, y_max),
            2.0 * half,
            (sy(sm.p5, y_max) - sy(sm.p95, y_max)).max(0.5),
            cx - half,
            cx + half,
            m = sy(sm.median, y_max),
        );
    }
    s.push_str("</svg>\n");
    s
}

/// What was written for a sweep.
#[derive(Debug, Default)]
pub struct WrittenFiles {
    pub summary: PathBuf,
    pub per_sim: Vec<PathBuf>,
    pub curves: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OutputOptions {
    pub emit_curves: bool,
    pub svg: bool,
}

/// Writes the summary table, one per-simulation dump per cell, optional
/// curve grids and SVG plots, and a metadata file under `out_dir`.
pub fn write_sweep(sweep: &SweepResult, out_dir: &Path, opts: OutputOptions) -> Result<WrittenFiles> {
    let rows = sweep.summary_rows();
    let mut files = WrittenFiles {
        summary: out_dir.join("summary.csv"),
        ..Default::default()
    };
    emit_summary_csv(&rows, &files.summary)?;

    for r in &sweep.results {
        let p = out_dir.join("per_sim").join(format!("{}.csv", r.cell.id()));
        write_file(&p, &per_sim_csv(r))?;
        files.per_sim.push(p);
        if opts.emit_curves {
            let p = out_dir.join("curves").join(format!("{}.csv", r.cell.id()));
            emit_curve_dump(r, &p)?;
            files.curves.push(p);
        }
        if opts.svg {
            let p = out_dir.join("svg").join(format!("{}.svg", r.cell.id()));
            write_file(&p, &curve_plot_svg(r)?)?;
            files.svg.push(p);
        }
    }
    if opts.svg && !rows.is_empty() {
        let p = out_dir.join("svg").join("sabc_boxplot.svg");
        write_file(&p, &boxplot_svg(&rows, "sABC by cell (box: 5th-95th percentile)"))?;
        files.svg.push(p);
    }

    let step = sweep.results.first().map_or(crate::metrics::DEFAULT_STEP, |r| r.step);
    let mut meta = String::new();
    let _ = writeln!(meta, "percentile_rule = \"{PERCENTILE_RULE}\"");
    let _ = writeln!(meta, "integration = \"composite trapezoid\"");
    let _ = writeln!(meta, "integration_step = {step}");
    let _ = writeln!(meta, "sabc_unit = \"fraction\"");
    let fp = sweep.results.first().map_or_else(FpSelection::default, |r| r.fp_selection);
    let fp_rule = match fp {
        FpSelection::ClosedTest => "closed test at 5%: FP2 vs linear (3 df), FP2 vs FP1 (2 df)",
        FpSelection::MinDeviance => "minimum deviance over 36 FP2 power pairs",
    };
    let _ = writeln!(meta, "fp_selection = \"{}\"", fp.label());
    let _ = writeln!(meta, "fp_rule = \"{fp_rule}; lexicographic tie-break within a degree\"");
    let _ = writeln!(
        meta,
        "mars = \"forward/backward on weighted least squares of arm proportions, GCV penalty {}, max terms min(2*arms-1, {}), logistic refit\"",
        crate::fit::GCV_PENALTY,
        crate::fit::MARS_MAX_TERMS_CAP
    );
    let _ = writeln!(meta, "glm = \"IRLS, |delta deviance| < {}, max {} iterations, eta clamp {}, ridge {}\"",
        crate::glm::DEVIANCE_TOL, crate::glm::MAX_ITER, crate::glm::ETA_CLAMP, crate::glm::RIDGE);
    let _ = writeln!(meta, "failed_cells = {}", sweep.failures.len());
    write_file(&out_dir.join("metadata.toml"), &meta)?;
    Ok(files)
}

/// Recomputes a summary from a per-simulation dump on disk.
pub fn resummarize(path: &Path) -> Result<crate::metrics::SabcSummary> {
    summarize(&read_per_sim(path)?)
}

/// Plain-text table of per-cell 95th percentiles, for terminal output.
pub fn p95_report(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:<6} {:<6} {:>7} {:>10} {:>10} {:>10}",
        "scenario", "design", "method", "N", "median %", "p95 %", "max %"
    );
    for r in rows {
        let sc = r.scenario.map_or_else(|| "Overall".into(), |id| id.to_string());
        let flag = if r.summary.p95 > 0.25 { "  <-- unstable (p95 > 25%)" } else { "" };
        let _ = writeln!(
            s,
            "{:<8} {:<6} {:<6} {:>7} {:>10.2} {:>10.2} {:>10.2}{flag}",
            sc,
            r.design,
            r.method.label(),
            r.total_n,
            to_percent(r.summary.median),
            to_percent(r.summary.p95),
            to_percent(r.summary.max)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_cell, run_sweep, Preset, RunOptions};

    #[test]
    fn curve_dump_shape() {
        let cell = &Preset::Table2.cells(1, 3)[0];
        let r = run_cell(cell, &RunOptions { curve_sample: 2, ..RunOptions::default() }).unwrap();
        let text = curve_dump_csv(&r.cell.scenario, &r.sample_curves, 0.01).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "D,truth,sim_0,sim_1");
        assert_eq!(lines.len(), 1 + 1001);
        // D = 12.5 is grid row 250; scenario 1 is 0.5 there
        assert!(lines[1 + 250].starts_with("12.5000,0.50000000,"));
        assert!(!text.contains('\r'));
        let empty = curve_dump_csv(&r.cell.scenario, &[], 0.01).unwrap();
        assert_eq!(empty.lines().next().unwrap(), "D,truth");
    }

    #[test]
    fn summary_layout() {
        let sweep = run_sweep(&Preset::Table2.cells(2, 5), &RunOptions::default()).unwrap();
        let text = summary_csv(&sweep.summary_rows());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER.join(","));
        assert_eq!(lines.len(), 10);
        assert!(lines[9].starts_with("Overall,ED7,FP,504,40,"));
        assert!(lines[1].starts_with("1,ED7,FP,504,5,"));
    }

    #[test]
    fn percent_is_scaled_fraction() {
        assert_eq!(to_percent(0.051), 100.0 * 0.051);
    }
}

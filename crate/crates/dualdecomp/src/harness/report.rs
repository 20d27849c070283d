//! Rendering: the four-panel SVG figure and the plain-text summary table
//! derived from a run log.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::config::FeasibilityThreshold;
use super::record::{IterationRecord, PointMetrics, TRACKED_POINTS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub struct ReportPaths {
    pub plot: PathBuf,
    pub summary: PathBuf,
}

/// Feasibility of one tracked point under the configured threshold.
pub fn point_feasible<T: Scalar>(
    metrics: &PointMetrics<T>,
    threshold: &FeasibilityThreshold<T>,
) -> bool {
    match threshold {
        FeasibilityThreshold::Relative(tau) => {
            metrics.rel_inf.map(|v| v < *tau).unwrap_or(false)
        }
        FeasibilityThreshold::Absolute(tau) => metrics.r_p < *tau,
    }
}

/// First iteration at which a tracked point is coupling-feasible, inside
/// dom f, and has a defined objective.
pub fn first_feasible<T: Scalar>(
    records: &[IterationRecord<T>],
    point: &str,
    threshold: &FeasibilityThreshold<T>,
) -> Option<(usize, T)> {
    records.iter().find_map(|rec| {
        let m = rec.point(point)?;
        (point_feasible(m, threshold) && m.dom_feasible)
            .then_some(())
            .and_then(|_| m.subopt.map(|sv| (rec.k, sv)))
    })
}

/// Best-to-date suboptimality over feasible sightings, per iteration.
pub fn best_feasible_series<T: Scalar>(
    records: &[IterationRecord<T>],
    point: &str,
    threshold: &FeasibilityThreshold<T>,
) -> Vec<Option<T>> {
    let mut best: Option<T> = None;
    records
        .iter()
        .map(|rec| {
            if let Some(m) = rec.point(point) {
                if point_feasible(m, threshold) && m.dom_feasible {
                    if let Some(sv) = m.subopt {
                        best = Some(best.map_or(sv, |b| if sv < b { sv } else { b }));
                    }
                }
            }
            best
        })
        .collect()
}

/// Render `plot.svg` (four panels) and `summary.txt` under `out_dir`.
pub fn render_report<T: Scalar>(
    records: &[IterationRecord<T>],
    threshold: &FeasibilityThreshold<T>,
    out_dir: &Path,
) -> Result<ReportPaths> {
    if records.is_empty() {
        return Err(Error::Invalid("no records to report".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let plot_path = out_dir.join("plot.svg");
    let summary_path = out_dir.join("summary.txt");
    render_plot(records, threshold, &plot_path)?;
    std::fs::write(&summary_path, summary_text(records, threshold))?;
    Ok(ReportPaths { plot: plot_path, summary: summary_path })
}

/// The summary table: first-feasible iteration and suboptimality plus the
/// best feasible suboptimality for every tracked point.
pub fn summary_text<T: Scalar>(
    records: &[IterationRecord<T>],
    threshold: &FeasibilityThreshold<T>,
) -> String {
    let mut lines = vec![format!("iterations logged: {}", records.len())];
    for point in TRACKED_POINTS {
        let present = records.iter().any(|r| r.point(point).is_some());
        if !present {
            lines.push(format!("{point}: not tracked"));
            continue;
        }
        match first_feasible(records, point, threshold) {
            Some((k, sv)) => {
                let best = best_feasible_series(records, point, threshold)
                    .into_iter()
                    .flatten()
                    .last()
                    .expect("feasible once implies a best value");
                lines.push(format!(
                    "{point}: first feasible at iteration {k} with {:.4}% suboptimality; \
                     best feasible suboptimality {:.4}%",
                    sv.as_f64() * 100.0,
                    best.as_f64() * 100.0,
                ));
            }
            None => lines.push(format!("{point}: never feasible")),
        }
    }
    lines.join("\n") + "\n"
}

type Series = Vec<(f64, f64)>;

fn collect_series<T: Scalar, F>(records: &[IterationRecord<T>], point: &str, get: F) -> Series
where
    F: Fn(&PointMetrics<T>) -> Option<T>,
{
    records
        .iter()
        .filter_map(|rec| {
            rec.point(point)
                .and_then(&get)
                .map(|v| (rec.k as f64, v.as_f64()))
        })
        .collect()
}

const PANEL_FLOOR: f64 = 1e-16;

fn draw_panel(
    area: &DrawingArea<SVGBackend, plotters::coord::Shift>,
    title: &str,
    series: &[(&str, Series)],
    max_k: f64,
) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let palette = [&BLUE, &RED, &GREEN, &MAGENTA, &BLACK];
    let nonempty: Vec<&(&str, Series)> = series.iter().filter(|(_, s)| !s.is_empty()).collect();
    if nonempty.is_empty() {
        area.draw_text(
            &format!("{title}: no data (panel omitted)"),
            &TextStyle::from(("sans-serif", 16)).color(&BLACK),
            (24, 24),
        )?;
        return Ok(());
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, s) in &nonempty {
        for &(_, v) in s.iter() {
            let v = v.abs().max(PANEL_FLOOR);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let (lo, hi) = (lo / 2.0, hi * 2.0);
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 18))
        .margin(8)
        .x_label_area_size(28)
        .y_label_area_size(52)
        .build_cartesian_2d(1f64..max_k.max(2.0), (lo..hi).log_scale())?;
    chart.configure_mesh().x_desc("iteration").max_light_lines(1).draw()?;
    for (idx, (name, s)) in nonempty.iter().enumerate() {
        let color = palette[idx % palette.len()];
        let clamped: Series =
            s.iter().map(|&(k, v)| (k, v.abs().max(PANEL_FLOOR))).collect();
        chart
            .draw_series(LineSeries::new(clamped, color))?
            .label(*name)
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 16, y)], color)
            });
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()?;
    Ok(())
}

fn render_plot<T: Scalar>(
    records: &[IterationRecord<T>],
    threshold: &FeasibilityThreshold<T>,
    path: &Path,
) -> Result<()> {
    let max_k = records.last().map(|r| r.k as f64).unwrap_or(1.0);
    let render = || -> std::result::Result<(), Box<dyn std::error::Error>> {
        let root = SVGBackend::new(path, (1200, 900)).into_drawing_area();
        root.fill(&WHITE)?;
        let panels = root.split_evenly((2, 2));

        let subopt: Vec<(&str, Series)> = TRACKED_POINTS
            .iter()
            .map(|p| (*p, collect_series(records, p, |m| m.subopt)))
            .collect();
        draw_panel(&panels[0], "function value suboptimality", &subopt, max_k)?;

        let viol: Vec<(&str, Series)> = TRACKED_POINTS
            .iter()
            .map(|p| (*p, collect_series(records, p, |m| Some(m.r_p))))
            .collect();
        draw_panel(&panels[1], "primal violations (r_p)", &viol, max_k)?;

        let rel: Vec<(&str, Series)> = TRACKED_POINTS
            .iter()
            .map(|p| (*p, collect_series(records, p, |m| m.rel_inf)))
            .collect();
        draw_panel(&panels[2], "relative residuals", &rel, max_k)?;

        let best: Vec<(&str, Series)> = TRACKED_POINTS
            .iter()
            .map(|p| {
                let series = best_feasible_series(records, p, threshold)
                    .into_iter()
                    .enumerate()
                    .filter_map(|(i, v)| v.map(|x| (records[i].k as f64, x.as_f64())))
                    .collect();
                (*p, series)
            })
            .collect();
        draw_panel(&panels[3], "best-to-date feasible suboptimality", &best, max_k)?;
        root.present()?;
        Ok(())
    };
    render().map_err(|e| Error::Invalid(format!("plot rendering: {e}")))
}

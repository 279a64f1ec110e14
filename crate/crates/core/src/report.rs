//! Static SVG renderings of the learner state: bar, dot, bubble and line
//! plots. Rendering is a pure function of its inputs, so identical
//! states produce byte-identical documents.

use std::fmt::Write as _;

use thiserror::Error;

use crate::skills::SkillExport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("state export is empty")]
    EmptyState,
    #[error("skill history is empty")]
    EmptyHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Bar,
    Dot,
    Bubble,
    Line,
}

impl PlotKind {
    pub fn parse(name: &str) -> Option<PlotKind> {
        match name {
            "bar" => Some(PlotKind::Bar),
            "dot" => Some(PlotKind::Dot),
            "bubble" => Some(PlotKind::Bubble),
            "line" => Some(PlotKind::Line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub top_k: usize,
    pub width: u32,
    pub height: u32,
    pub title: String,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            kind: PlotKind::Bar,
            top_k: 15,
            width: 800,
            height: 480,
            title: "Learner state".to_string(),
        }
    }
}

/// Confidence-interval half width in standard deviations (95%).
pub const CI_Z: f64 = 1.96;

const MARGIN: f64 = 50.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn document_open(spec: &PlotSpec) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<title>{title}</title>\n\
         <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{half}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        w = spec.width,
        h = spec.height,
        half = spec.width / 2,
        title = escape(&spec.title),
    )
}

/// Y-axis scale covering every whisker plus zero.
struct Scale {
    lo: f64,
    hi: f64,
    top: f64,
    bottom: f64,
}

impl Scale {
    fn for_export(export: &[SkillExport], height: f64) -> Scale {
        let mut lo = 0.0f64;
        let mut hi = 0.0f64;
        for row in export {
            let half = CI_Z * row.variance.sqrt();
            lo = lo.min(row.mean - half);
            hi = hi.max(row.mean + half);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Scale {
            lo,
            hi,
            top: MARGIN,
            bottom: height - MARGIN,
        }
    }

    fn y(&self, value: f64) -> f64 {
        let frac = (value - self.lo) / (self.hi - self.lo);
        self.bottom - frac * (self.bottom - self.top)
    }
}

fn axes(spec: &PlotSpec, scale: &Scale) -> String {
    let right = spec.width as f64 - MARGIN;
    format!(
        "<g class=\"axes\">\
         <line x1=\"{m}\" y1=\"{top}\" x2=\"{m}\" y2=\"{bot}\" stroke=\"black\"/>\
         <line x1=\"{m}\" y1=\"{bot}\" x2=\"{right}\" y2=\"{bot}\" stroke=\"black\"/>\
         <text x=\"16\" y=\"{top}\" font-size=\"10\">{hi:.3}</text>\
         <text x=\"16\" y=\"{bot}\" font-size=\"10\">{lo:.3}</text>\
         </g>\n",
        m = MARGIN,
        top = scale.top,
        bot = scale.bottom,
        hi = scale.hi,
        lo = scale.lo,
    )
}

fn kc_label(row: &SkillExport, x: f64, y: f64) -> String {
    format!(
        "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"middle\" font-size=\"10\">kc {}</text>\n",
        row.kc_id
    )
}

fn whisker(x: f64, y_lo: f64, y_hi: f64) -> String {
    format!(
        "<line class=\"whisker\" x1=\"{x:.2}\" y1=\"{y_lo:.2}\" x2=\"{x:.2}\" y2=\"{y_hi:.2}\" \
         stroke=\"black\" stroke-width=\"1.5\"/>\n"
    )
}

/// Bar plot: bar height encodes the mean, whiskers the 95% interval.
pub fn render_bar(export: &[SkillExport], spec: &PlotSpec) -> Result<String, ReportError> {
    if export.is_empty() {
        return Err(ReportError::EmptyState);
    }
    let rows = &export[..export.len().min(spec.top_k)];
    let scale = Scale::for_export(rows, spec.height as f64);
    let span = spec.width as f64 - 2.0 * MARGIN;
    let slot = span / rows.len() as f64;
    let bar_width = (slot * 0.6).min(60.0);
    let mut svg = document_open(spec);
    svg.push_str(&axes(spec, &scale));
    let y0 = scale.y(0.0);
    for (i, row) in rows.iter().enumerate() {
        let x_mid = MARGIN + slot * (i as f64 + 0.5);
        let y_mean = scale.y(row.mean);
        let (top, bottom) = if y_mean < y0 { (y_mean, y0) } else { (y0, y_mean) };
        let _ = write!(
            svg,
            "<rect class=\"bar\" x=\"{x:.2}\" y=\"{top:.2}\" width=\"{w:.2}\" \
             height=\"{h:.2}\" fill=\"steelblue\"/>\n",
            x = x_mid - bar_width / 2.0,
            w = bar_width,
            h = (bottom - top).max(0.0),
        );
        let half = CI_Z * row.variance.sqrt();
        svg.push_str(&whisker(x_mid, scale.y(row.mean - half), scale.y(row.mean + half)));
        svg.push_str(&kc_label(row, x_mid, scale.bottom + 16.0));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Dot plot: dot position encodes the mean, whiskers the 95% interval.
pub fn render_dot(export: &[SkillExport], spec: &PlotSpec) -> Result<String, ReportError> {
    if export.is_empty() {
        return Err(ReportError::EmptyState);
    }
    let rows = &export[..export.len().min(spec.top_k)];
    let scale = Scale::for_export(rows, spec.height as f64);
    let span = spec.width as f64 - 2.0 * MARGIN;
    let slot = span / rows.len() as f64;
    let mut svg = document_open(spec);
    svg.push_str(&axes(spec, &scale));
    for (i, row) in rows.iter().enumerate() {
        let x_mid = MARGIN + slot * (i as f64 + 0.5);
        let half = CI_Z * row.variance.sqrt();
        svg.push_str(&whisker(x_mid, scale.y(row.mean - half), scale.y(row.mean + half)));
        let _ = write!(
            svg,
            "<circle class=\"dot\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"steelblue\"/>\n",
            x = x_mid,
            y = scale.y(row.mean),
        );
        svg.push_str(&kc_label(row, x_mid, scale.bottom + 16.0));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Bubble plot: circle radius grows with the mean, fill opacity fades
/// with the variance (certain skills are darker). Circles are laid out
/// on a grid so they never overlap.
pub fn render_bubble(export: &[SkillExport], spec: &PlotSpec) -> Result<String, ReportError> {
    if export.is_empty() {
        return Err(ReportError::EmptyState);
    }
    let rows = &export[..export.len().min(spec.top_k)];
    let n = rows.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let grid_rows = n.div_ceil(cols);
    let cell_w = (spec.width as f64 - 2.0 * MARGIN) / cols as f64;
    let cell_h = (spec.height as f64 - 2.0 * MARGIN) / grid_rows as f64;
    let r_max = (cell_w.min(cell_h) / 2.0 - 4.0).max(4.0);
    let r_min = (r_max * 0.2).max(3.0);
    let mean_lo = rows.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    let mean_hi = rows.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    let var_lo = rows.iter().map(|r| r.variance).fold(f64::INFINITY, f64::min);
    let var_hi = rows
        .iter()
        .map(|r| r.variance)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut svg = document_open(spec);
    for (i, row) in rows.iter().enumerate() {
        let cx = MARGIN + cell_w * ((i % cols) as f64 + 0.5);
        let cy = MARGIN + cell_h * ((i / cols) as f64 + 0.5);
        let mean_frac = if mean_hi > mean_lo {
            (row.mean - mean_lo) / (mean_hi - mean_lo)
        } else {
            1.0
        };
        let var_frac = if var_hi > var_lo {
            (row.variance - var_lo) / (var_hi - var_lo)
        } else {
            0.0
        };
        let radius = r_min + mean_frac * (r_max - r_min);
        let opacity = 1.0 - 0.8 * var_frac;
        let _ = write!(
            svg,
            "<circle class=\"bubble\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{radius:.4}\" \
             fill=\"steelblue\" fill-opacity=\"{opacity:.6}\"/>\n",
        );
        svg.push_str(&kc_label(row, cx, cy + radius + 12.0));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One point in a skill's history: time, mean and optional variance.
pub type HistoryPoint = (f64, f64, Option<f64>);

/// Line plot of a skill over time with a shaded 95% band. Points without
/// variance omit the band, so uncertainty-free models still render.
pub fn render_line(history: &[HistoryPoint], spec: &PlotSpec) -> Result<String, ReportError> {
    if history.is_empty() {
        return Err(ReportError::EmptyHistory);
    }
    let t_lo = history.first().unwrap().0;
    let t_hi = history.last().unwrap().0.max(t_lo + 1e-9);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(_, mean, var) in history {
        let half = var.map_or(0.0, |v| CI_Z * v.sqrt());
        lo = lo.min(mean - half);
        hi = hi.max(mean + half);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let scale = Scale {
        lo,
        hi,
        top: MARGIN,
        bottom: spec.height as f64 - MARGIN,
    };
    let x = |t: f64| {
        MARGIN + (t - t_lo) / (t_hi - t_lo) * (spec.width as f64 - 2.0 * MARGIN)
    };
    let mut svg = document_open(spec);
    svg.push_str(&axes(spec, &scale));
    let with_band = history.iter().all(|p| p.2.is_some());
    if with_band {
        let mut points = String::new();
        for &(t, mean, var) in history {
            let half = CI_Z * var.unwrap().sqrt();
            let _ = write!(points, "{:.2},{:.2} ", x(t), scale.y(mean + half));
        }
        for &(t, mean, var) in history.iter().rev() {
            let half = CI_Z * var.unwrap().sqrt();
            let _ = write!(points, "{:.2},{:.2} ", x(t), scale.y(mean - half));
        }
        let _ = write!(
            svg,
            "<polygon class=\"band\" points=\"{}\" fill=\"steelblue\" fill-opacity=\"0.2\"/>\n",
            points.trim_end()
        );
    }
    let mut points = String::new();
    for &(t, mean, _) in history {
        let _ = write!(points, "{:.2},{:.2} ", x(t), scale.y(mean));
    }
    let _ = write!(
        svg,
        "<polyline class=\"mean\" points=\"{}\" fill=\"none\" stroke=\"steelblue\" \
         stroke-width=\"2\"/>\n",
        points.trim_end()
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders the requested plot kind from a state export.
pub fn render(
    export: &[SkillExport],
    history: Option<&[HistoryPoint]>,
    spec: &PlotSpec,
) -> Result<String, ReportError> {
    match spec.kind {
        PlotKind::Bar => render_bar(export, spec),
        PlotKind::Dot => render_dot(export, spec),
        PlotKind::Bubble => render_bubble(export, spec),
        PlotKind::Line => match history {
            Some(h) => render_line(h, spec),
            None => {
                // no explicit history: treat the export order as time
                let h: Vec<HistoryPoint> = export
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (i as f64, r.mean, Some(r.variance)))
                    .collect();
                render_line(&h, spec)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn export(rows: &[(u64, f64, f64)]) -> Vec<SkillExport> {
        rows.iter()
            .map(|&(kc_id, mean, variance)| SkillExport {
                kc_id,
                mean,
                variance,
                count: 1,
            })
            .collect()
    }

    fn parse(svg: &str) -> roxmltree::Document<'_> {
        roxmltree::Document::parse(svg).expect("well-formed SVG")
    }

    fn count_class(svg: &str, class: &str) -> usize {
        parse(svg)
            .descendants()
            .filter(|n| n.attribute("class") == Some(class))
            .count()
    }

    #[test]
    fn bar_whisker_span_is_ci() {
        let rows = export(&[(1, 1.0, 0.04)]);
        let spec = PlotSpec::default();
        let svg = render_bar(&rows, &spec).unwrap();
        let doc = parse(&svg);
        let whisker = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("whisker"))
            .unwrap();
        let y1: f64 = whisker.attribute("y1").unwrap().parse().unwrap();
        let y2: f64 = whisker.attribute("y2").unwrap().parse().unwrap();
        // whisker endpoints map back to 1 -/+ 1.96 * 0.2
        let scale = Scale::for_export(&rows, spec.height as f64);
        let value = |y: f64| {
            scale.lo + (scale.bottom - y) / (scale.bottom - scale.top) * (scale.hi - scale.lo)
        };
        let (lo_v, hi_v) = (value(y1.max(y2)), value(y1.min(y2)));
        assert!((lo_v - 0.608).abs() < 0.01, "low end {lo_v}");
        assert!((hi_v - 1.392).abs() < 0.01, "high end {hi_v}");
    }

    #[test]
    fn equal_means_give_identical_bars() {
        let rows = export(&[(1, 1.5, 0.1), (2, 1.5, 0.1)]);
        let svg = render_bar(&rows, &PlotSpec::default()).unwrap();
        let doc = parse(&svg);
        let heights: Vec<String> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("bar"))
            .map(|n| n.attribute("height").unwrap().to_string())
            .collect();
        assert_eq!(heights.len(), 2);
        assert_eq!(heights[0], heights[1]);
    }

    #[test]
    fn bar_element_counts() {
        let rows = export(
            &(0..15)
                .map(|i| (i, i as f64 * 0.1, 0.05))
                .collect::<Vec<_>>(),
        );
        let svg = render_bar(&rows, &PlotSpec::default()).unwrap();
        assert_eq!(count_class(&svg, "bar"), 15);
        assert_eq!(count_class(&svg, "whisker"), 15);
    }

    #[test]
    fn empty_state_errors() {
        assert!(matches!(
            render_bar(&[], &PlotSpec::default()),
            Err(ReportError::EmptyState)
        ));
        assert!(matches!(
            render_bubble(&[], &PlotSpec::default()),
            Err(ReportError::EmptyState)
        ));
    }

    #[test]
    fn rendering_is_pure() {
        let rows = export(&[(1, 0.5, 0.1), (2, 1.0, 0.3)]);
        let spec = PlotSpec::default();
        assert_eq!(
            render_bubble(&rows, &spec).unwrap(),
            render_bubble(&rows, &spec).unwrap()
        );
    }

    #[test]
    fn bubble_radius_tracks_mean_and_opacity_tracks_variance() {
        let rows = export(&[(1, 1.0, 0.1), (2, 2.0, 1.0)]);
        let svg = render_bubble(&rows, &PlotSpec::default()).unwrap();
        let doc = parse(&svg);
        let circles: Vec<_> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("bubble"))
            .collect();
        let r: Vec<f64> = circles
            .iter()
            .map(|c| c.attribute("r").unwrap().parse().unwrap())
            .collect();
        let opacity: Vec<f64> = circles
            .iter()
            .map(|c| c.attribute("fill-opacity").unwrap().parse().unwrap())
            .collect();
        assert!(r[1] > r[0]);
        assert!(opacity[0] > opacity[1], "lower variance renders darker");
    }

    #[test]
    fn bubble_order_matches_mean_order() {
        let rows = export(
            &(0..15)
                .map(|i| (i, (i as f64 * 0.37).sin() + 1.5, 0.2))
                .collect::<Vec<_>>(),
        );
        let svg = render_bubble(&rows, &PlotSpec::default()).unwrap();
        let doc = parse(&svg);
        let radii: Vec<f64> = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("bubble"))
            .map(|c| c.attribute("r").unwrap().parse().unwrap())
            .collect();
        assert_eq!(radii.len(), 15);
        let mut by_mean: Vec<usize> = (0..15).collect();
        by_mean.sort_by(|&a, &b| rows[a].mean.partial_cmp(&rows[b].mean).unwrap());
        let mut by_radius: Vec<usize> = (0..15).collect();
        by_radius.sort_by(|&a, &b| radii[a].partial_cmp(&radii[b]).unwrap());
        assert_eq!(by_mean, by_radius);
    }

    #[test]
    fn line_constant_history_is_horizontal() {
        let history: Vec<HistoryPoint> =
            (0..5).map(|t| (t as f64, 1.0, Some(0.1))).collect();
        let svg = render_line(&history, &PlotSpec::default()).unwrap();
        let doc = parse(&svg);
        let line = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("mean"))
            .unwrap();
        let ys: Vec<&str> = line
            .attribute("points")
            .unwrap()
            .split_whitespace()
            .map(|p| p.split(',').nth(1).unwrap())
            .collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn line_without_variance_has_no_band() {
        let history: Vec<HistoryPoint> =
            (0..10).map(|t| (t as f64, t as f64 * 0.2, None)).collect();
        let svg = render_line(&history, &PlotSpec::default()).unwrap();
        assert_eq!(count_class(&svg, "band"), 0);
        let doc = parse(&svg);
        let line = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("mean"))
            .unwrap();
        assert_eq!(
            line.attribute("points").unwrap().split_whitespace().count(),
            10
        );
    }

    #[test]
    fn titles_are_escaped() {
        let rows = export(&[(1, 1.0, 0.1)]);
        let spec = PlotSpec {
            title: "skills <&> progress".to_string(),
            ..Default::default()
        };
        let svg = render_bar(&rows, &spec).unwrap();
        parse(&svg);
    }
}

//! Minimal SVG charts for comparison reports.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::scoring::Correlation;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn axes(svg: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN);
    let _ = writeln!(
        svg,
        "<path d=\"M{x0} {y1} L{x0} {y0} L{x1} {y0}\" stroke=\"black\" fill=\"none\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

/// Vertical bars, one per `(label, value)`, scaled to the largest value.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> Result<String> {
    if bars.is_empty() {
        return invalid("bar chart needs at least one bar");
    }
    if bars.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
        return invalid("bar values must be finite and nonnegative");
    }
    let max = bars.iter().fold(0.0f64, |m, (_, v)| m.max(*v));
    let scale = if max > 0.0 { max } else { 1.0 };
    let mut svg = header(title);
    axes(&mut svg, "model", y_label);
    let plot_w = WIDTH - 1.5 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let slot = plot_w / bars.len() as f64;
    for (i, (label, value)) in bars.iter().enumerate() {
        let h = value / scale * plot_h;
        let x = MARGIN + slot * (i as f64 + 0.15);
        let y = HEIGHT - MARGIN - h;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"#4c72b0\"/>",
            slot * 0.7
        );
        let cx = x + slot * 0.35;
        let _ = writeln!(
            svg,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{value:.4}</text>",
            y - 4.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            HEIGHT - MARGIN + 16.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Scatter of robust accuracy against brittle-score, annotated with the
/// correlation when it is defined.
pub fn scatter_plot(
    title: &str,
    points: &[(String, f64, f64)],
    correlation: Option<Correlation>,
) -> Result<String> {
    if points.is_empty() {
        return invalid("scatter plot needs at least one point");
    }
    if points
        .iter()
        .any(|(_, x, y)| !x.is_finite() || !y.is_finite())
    {
        return invalid("scatter coordinates must be finite");
    }
    let span = |vals: Vec<f64>| {
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (xlo, xhi) = span(points.iter().map(|p| p.1).collect());
    let (ylo, yhi) = span(points.iter().map(|p| p.2).collect());
    let plot_w = WIDTH - 1.5 * MARGIN - 20.0;
    let plot_h = HEIGHT - 2.0 * MARGIN - 20.0;
    let mut svg = header(title);
    axes(&mut svg, "robust accuracy", "brittle-score");
    for (label, x, y) in points {
        let px = MARGIN + 10.0 + (x - xlo) / (xhi - xlo) * plot_w;
        let py = HEIGHT - MARGIN - 10.0 - (y - ylo) / (yhi - ylo) * plot_h;
        let _ = writeln!(
            svg,
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"4\" fill=\"#dd5555\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            px + 6.0,
            py - 6.0,
            escape(label)
        );
    }
    if let Some(c) = correlation {
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"44\" text-anchor=\"end\">pearson {:.3}, spearman {:.3}</text>",
            WIDTH - MARGIN / 2.0,
            c.pearson,
            c.spearman
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

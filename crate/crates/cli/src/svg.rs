//! Minimal deterministic SVG rendering for plots: line charts (UWB
//! traces, CDFs) and heatmap grids. Fixed-precision formatting keeps the
//! output bytes identical for identical input.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Multi-series line chart with axes and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for (x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                xs.push(*x);
                ys.push(*y);
            }
        }
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let sx = |x: f64| MARGIN + (x - x_min) / (x_max - x_min).max(1e-12) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / (y_max - y_min).max(1e-12) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = svg_open();
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        fmt(WIDTH / 2.0),
        escape(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN),
        fmt(HEIGHT - MARGIN),
        fmt(WIDTH - MARGIN),
        fmt(HEIGHT - MARGIN)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN),
        fmt(MARGIN),
        fmt(MARGIN),
        fmt(HEIGHT - MARGIN)
    ));
    // Axis labels and extent ticks.
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
        fmt(WIDTH / 2.0),
        fmt(HEIGHT - 10.0),
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        fmt(HEIGHT / 2.0),
        fmt(HEIGHT / 2.0),
        escape(y_label)
    ));
    for (v, x, y, anchor) in [
        (x_min, MARGIN, HEIGHT - MARGIN + 16.0, "middle"),
        (x_max, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "middle"),
        (y_min, MARGIN - 6.0, HEIGHT - MARGIN, "end"),
        (y_max, MARGIN - 6.0, MARGIN + 4.0, "end"),
    ] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-size=\"10\">{}</text>\n",
            fmt(x),
            fmt(y),
            fmt(v)
        ));
    }

    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{},{}", fmt(sx(*x)), fmt(sy(*y))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n",
            s.color,
            pts.join(" ")
        ));
        // Legend entry.
        let ly = MARGIN + 14.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            fmt(WIDTH - MARGIN - 110.0),
            fmt(ly),
            fmt(WIDTH - MARGIN - 90.0),
            fmt(ly),
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            fmt(WIDTH - MARGIN - 84.0),
            fmt(ly + 4.0),
            escape(s.name)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap grid: row-major values, NaN cells light gray, the rest on a
/// blue-to-red ramp over the finite value range.
pub fn heatmap(title: &str, rows: usize, cols: usize, values: &[f64]) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = bounds(&finite);
    let cell_w = (WIDTH - 2.0 * MARGIN) / cols.max(1) as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / rows.max(1) as f64;

    let mut svg = svg_open();
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        fmt(WIDTH / 2.0),
        escape(title)
    ));
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let color = if v.is_finite() {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                let red = (255.0 * t) as u8;
                let blue = (255.0 * (1.0 - t)) as u8;
                format!("rgb({red},60,{blue})")
            } else {
                "rgb(235,235,235)".to_string()
            };
            // Row 0 is drawn at the bottom (y axis points up).
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                fmt(MARGIN + c as f64 * cell_w),
                fmt(HEIGHT - MARGIN - (r + 1) as f64 * cell_h),
                fmt(cell_w),
                fmt(cell_h),
                color
            ));
        }
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"10\">max {}</text>\n",
        fmt(MARGIN),
        fmt(HEIGHT - 14.0),
        fmt(hi)
    ));
    svg.push_str("</svg>\n");
    svg
}

fn svg_open() -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        WIDTH as u32, HEIGHT as u32, WIDTH as u32, HEIGHT as u32, WIDTH as u32, HEIGHT as u32
    )
}

fn bounds(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 1.0);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal well-formedness check: every opened tag closes and the
    /// document is a single svg element.
    pub(crate) fn assert_well_formed(svg: &str) {
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let opens = svg.matches("<svg").count();
        let closes = svg.matches("</svg>").count();
        assert_eq!(opens, closes);
        // Every non-closing, non-declaration tag either self-closes or has
        // a matching close tag.
        let mut stack: Vec<&str> = Vec::new();
        for tag in svg.split('<').skip(1) {
            if tag.starts_with('?') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                let name = name.split('>').next().unwrap().trim();
                assert_eq!(stack.pop(), Some(name), "unbalanced </{name}>");
            } else {
                let body = tag.split('>').next().unwrap();
                if !body.ends_with('/') {
                    stack.push(body.split_whitespace().next().unwrap());
                }
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
    }

    #[test]
    fn charts_are_deterministic_and_well_formed() {
        let series = [Series {
            name: "raw",
            color: "blue",
            points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)],
        }];
        let a = line_chart("test", "t", "m", &series);
        let b = line_chart("test", "t", "m", &series);
        assert_eq!(a, b);
        assert_well_formed(&a);

        let h = heatmap("grid", 2, 3, &[0.0, 1.0, f64::NAN, 0.5, 0.2, 0.9]);
        assert_well_formed(&h);
    }

    #[test]
    fn constant_series_step_curve() {
        // A CDF of constant errors is a single vertical step; rendering
        // must not divide by zero.
        let series = [Series {
            name: "cdf",
            color: "black",
            points: vec![(5.0, 0.25), (5.0, 0.5), (5.0, 0.75), (5.0, 1.0)],
        }];
        let svg = line_chart("cdf", "error", "fraction", &series);
        assert_well_formed(&svg);
    }
}

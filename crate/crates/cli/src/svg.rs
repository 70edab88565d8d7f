//! Hand-emitted SVG line plots: two monotone bound-versus-constraint
//! curves need no plotting dependency.

use std::fmt::Write as _;

/// Plot geometry and axis ranges for a bound-versus-b figure.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub width: u32,
    pub height: u32,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub x_label: String,
    pub y_label: String,
}

impl PlotSpec {
    /// Ranges sized for upper-bound curves: x spans the observed
    /// constraint values, y saturates slightly beyond the control bounds.
    pub fn bound_vs_b(series: &[Series], u_max: f64) -> Self {
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        for s in series {
            for &(x, _) in &s.points {
                if x.is_finite() {
                    x_min = x_min.min(x);
                    x_max = x_max.max(x);
                }
            }
        }
        if !x_min.is_finite() || x_min == x_max {
            x_min = -1.0;
            x_max = 0.0;
        }
        Self {
            width: 800,
            height: 600,
            x_range: (x_min, x_max),
            y_range: (-1.4 * u_max, 1.4 * u_max),
            x_label: "b".into(),
            y_label: "upper bound on u".into(),
        }
    }
}

/// One named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
}

const MARGIN: f64 = 60.0;

/// Render the series to a complete SVG document. Off-range y-values are
/// clamped to the plot band; non-finite points are dropped.
pub fn render(spec: &PlotSpec, series: &[Series]) -> String {
    let w = spec.width as f64;
    let h = spec.height as f64;
    let (x0, x1) = spec.x_range;
    let (y0, y1) = spec.y_range;
    let sx = (w - 2.0 * MARGIN) / (x1 - x0);
    let sy = (h - 2.0 * MARGIN) / (y1 - y0);
    let px = |x: f64| MARGIN + (x - x0) * sx;
    let py = |y: f64| h - MARGIN - (y - y0) * sy;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{}" height="{}" fill="white"/>"#,
        spec.width, spec.height
    );

    // axes box
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * MARGIN,
        h - 2.0 * MARGIN
    );

    // ticks and grid
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let tx = px(fx);
        let ty = py(fy);
        let _ = writeln!(
            svg,
            r#"<line x1="{tx:.1}" y1="{}" x2="{tx:.1}" y2="{}" stroke="lightgray"/>"#,
            MARGIN,
            h - MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ty:.1}" x2="{}" y2="{ty:.1}" stroke="lightgray"/>"#,
            MARGIN,
            w - MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.1}" y="{}" font-size="12" text-anchor="middle">{fx:.1}</text>"#,
            h - MARGIN + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" font-size="12" text-anchor="end">{fy:.1}</text>"#,
            MARGIN - 6.0,
            ty + 4.0
        );
    }

    // axis labels
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 14.0,
        spec.x_label
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        spec.y_label
    );

    // series
    for s in series {
        let mut path = String::new();
        for &(x, y) in &s.points {
            if !x.is_finite() || y.is_nan() {
                continue;
            }
            let y = y.clamp(y0, y1);
            let _ = write!(path, "{:.2},{:.2} ", px(x), py(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            path.trim_end(),
            s.color
        );
    }

    // legend
    for (i, s) in series.iter().enumerate() {
        let ly = MARGIN + 18.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/>"#,
            MARGIN + 10.0,
            MARGIN + 40.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            MARGIN + 46.0,
            ly + 4.0,
            s.label
        );
    }

    svg.push_str("</svg>\n");
    svg
}

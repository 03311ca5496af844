//! Deterministic SVG rendering of PIT-ECDF difference curves with their
//! simultaneous confidence bands.

use sbc_core::sbc::RankEnsemble;
use sbc_core::uniformity::{pit_ecdf_diff, EcdfDiffCurve, Envelope};
use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 48.0;

#[derive(Debug)]
pub struct PlotError(pub String);

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "plot error: {}", self.0)
    }
}

impl std::error::Error for PlotError {}

struct Frame {
    y_max: f64,
}

impl Frame {
    fn x(&self, u: f64) -> f64 {
        MARGIN_LEFT + u * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }
    fn y(&self, v: f64) -> f64 {
        let mid = MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0;
        mid - v / self.y_max * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Staircase points of the curve, starting from the origin.
fn step_points(curve: &EcdfDiffCurve, frame: &Frame) -> String {
    let mut pts = String::new();
    let mut prev = 0.0f64;
    let _ = write!(pts, "{},{}", fmt(frame.x(0.0)), fmt(frame.y(0.0)));
    for (u, v) in curve.grid.iter().zip(&curve.values) {
        let _ = write!(pts, " {},{}", fmt(frame.x(*u)), fmt(frame.y(prev)));
        let _ = write!(pts, " {},{}", fmt(frame.x(*u)), fmt(frame.y(*v)));
        prev = *v;
    }
    pts
}

/// Render a curve, optionally with its envelope. Byte output is a pure
/// function of the inputs.
pub fn render_curve(
    curve: &EcdfDiffCurve,
    envelope: Option<&Envelope>,
    title: &str,
) -> Result<String, PlotError> {
    if let Some(env) = envelope {
        if env.n != curve.n || env.s != curve.s || env.grid.len() != curve.grid.len() {
            return Err(PlotError(format!(
                "envelope built for (N={}, S={}) but curve has (N={}, S={})",
                env.n, env.s, curve.n, curve.s
            )));
        }
    }
    let mut y_max = 0.05f64;
    for v in &curve.values {
        y_max = y_max.max(v.abs());
    }
    if let Some(env) = envelope {
        for v in env.lower.iter().chain(&env.upper) {
            y_max = y_max.max(v.abs());
        }
    }
    y_max *= 1.15;
    let frame = Frame { y_max };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="24" font-family="sans-serif" font-size="16" fill="#222">{}</text>"##,
        MARGIN_LEFT,
        xml_escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="42" font-family="sans-serif" font-size="12" fill="#666">N={}, S={}</text>"##,
        MARGIN_LEFT, curve.n, curve.s
    );

    if let Some(env) = envelope {
        let mut pts = String::new();
        for (u, v) in env.grid.iter().zip(&env.upper) {
            let _ = write!(pts, "{},{} ", fmt(frame.x(*u)), fmt(frame.y(*v)));
        }
        for (u, v) in env.grid.iter().zip(&env.lower).rev() {
            let _ = write!(pts, "{},{} ", fmt(frame.x(*u)), fmt(frame.y(*v)));
        }
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="#c6dbef" stroke="none" opacity="0.8"/>"##,
            pts.trim_end()
        );
    }

    // zero line
    let _ = writeln!(
        svg,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4,3" stroke-width="1"/>"##,
        fmt(frame.x(0.0)),
        fmt(frame.y(0.0)),
        fmt(frame.x(1.0)),
        fmt(frame.y(0.0))
    );
    // axes box
    let _ = writeln!(
        svg,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333" stroke-width="1"/>"##,
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
        fmt(HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    );
    // x ticks
    for k in 0..=4 {
        let u = k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#333" text-anchor="middle">{}</text>"##,
            fmt(frame.x(u)),
            fmt(HEIGHT - MARGIN_BOTTOM + 16.0),
            fmt(u)
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="#333" text-anchor="middle">PIT</text>"##,
        fmt(frame.x(0.5)),
        fmt(HEIGHT - 12.0)
    );
    // y ticks
    for v in [-y_max / 1.15, 0.0, y_max / 1.15] {
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#333" text-anchor="end">{}</text>"##,
            fmt(MARGIN_LEFT - 6.0),
            fmt(frame.y(v) + 4.0),
            fmt(v)
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="16" y="{}" font-family="sans-serif" font-size="12" fill="#333" transform="rotate(-90 16 {})" text-anchor="middle">ECDF difference</text>"##,
        fmt(frame.y(0.0)),
        fmt(frame.y(0.0))
    );

    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>"##,
        step_points(curve, &frame)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render one test quantity of an ensemble against its envelope.
pub fn render_plot(
    ensemble: &RankEnsemble,
    envelope: &Envelope,
    quantity: &str,
) -> Result<String, PlotError> {
    let ranks = ensemble.ranks_for(quantity, true);
    let curve = pit_ecdf_diff(&ranks, ensemble.s).map_err(|e| PlotError(e.to_string()))?;
    render_curve(&curve, Some(envelope), quantity)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// File-system-safe name for a quantity key.
pub fn plot_file_name(quantity: &str) -> String {
    let safe: String = quantity
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    format!("{safe}.svg")
}

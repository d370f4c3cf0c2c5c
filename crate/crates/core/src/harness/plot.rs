//! Self-contained SVG output: learning curves and per-cell grid maps.

use std::fmt::Write as _;

use super::aggregate::CurvePoint;
use super::config::EnvConfig;
use super::eval::PolicySnapshot;
use crate::agents::Policy;
use crate::env::GridNavConfig;
use crate::error::{Error, Result};
use crate::intrinsic::RndModel;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line of the mean with a shaded ±1 std band.
pub fn curve_svg(points: &[CurvePoint], title: &str) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Invalid("cannot plot an empty series".into()));
    }
    if points.iter().any(|p| !(p.step.is_finite() && p.mean.is_finite() && p.std.is_finite())) {
        return Err(Error::Invalid("series contains non-finite values".into()));
    }
    let x_min = points.iter().map(|p| p.step).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.step).fold(f64::NEG_INFINITY, f64::max);
    let y_min = points.iter().map(|p| p.mean - p.std).fold(f64::INFINITY, f64::min).min(0.0);
    let y_max = points.iter().map(|p| p.mean + p.std).fold(f64::NEG_INFINITY, f64::max).max(1.0);
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let sx = |x: f64| MARGIN + (x - x_min) / span(x_min, x_max) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_min) / span(y_min, y_max) * (HEIGHT - 2.0 * MARGIN);

    let line: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", sx(p.step), sy(p.mean))).collect();
    let upper = points.iter().map(|p| format!("{:.2},{:.2}", sx(p.step), sy(p.mean + p.std)));
    let lower = points.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.step), sy(p.mean - p.std)));
    let band: Vec<String> = upper.chain(lower).collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(
        svg,
        r#"<polygon class="band" points="{}" fill="steelblue" fill-opacity="0.25" stroke="none"/>"#,
        band.join(" ")
    );
    let _ = writeln!(
        svg,
        r#"<polyline class="mean" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        line.join(" ")
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">step</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {})">mean episodic return</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, anchor, x, y) in [
        (x_min, "start", x0, y0 + 16.0),
        (x_max, "end", x1, y0 + 16.0),
    ] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v}</text>"#);
    }
    for v in [y_min, y_max] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">{v:.3}</text>"#,
            x0 - 4.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Dark blue to yellow.
fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(40.0, 250.0), lerp(20.0, 230.0), lerp(90.0, 30.0))
}

const CELL: f64 = 12.0;

/// One colored square per free cell; the obstacle is drawn as a single grey
/// mask. Brighter means larger.
pub fn grid_svg(grid: &GridNavConfig, title: &str, value: impl Fn(usize, usize) -> Result<f64>) -> Result<String> {
    let mut cells = Vec::new();
    for y in 0..grid.height {
        for x in 0..grid.width {
            if !grid.obstacle.contains(x, y) {
                cells.push((x, y, value(x, y)?));
            }
        }
    }
    let lo = cells.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let hi = cells.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let w = grid.width as f64 * CELL;
    let h = grid.height as f64 * CELL + 28.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        svg,
        r#"<text x="4" y="18" font-size="13">{} (min {lo:.4}, max {hi:.4})</text>"#,
        escape(title)
    );
    let _ = writeln!(svg, r#"<g transform="translate(0 28)">"#);
    for (x, y, v) in &cells {
        let _ = writeln!(
            svg,
            r#"<rect class="cell" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"><title>({x}, {y}) {v}</title></rect>"#,
            *x as f64 * CELL,
            *y as f64 * CELL,
            color((v - lo) / range)
        );
    }
    let o = &grid.obstacle;
    let _ = writeln!(
        svg,
        r##"<rect class="mask" x="{}" y="{}" width="{}" height="{}" fill="#808080"/>"##,
        o.x as f64 * CELL,
        o.y as f64 * CELL,
        o.width as f64 * CELL,
        o.height as f64 * CELL
    );
    let (gx, gy) = grid.goal;
    let _ = writeln!(
        svg,
        r#"<rect class="goal" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="none" stroke="red" stroke-width="2"/>"#,
        gx as f64 * CELL,
        gy as f64 * CELL
    );
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Intrinsic-reward and policy-entropy maps of a navigation run.
pub fn heatmaps(env: &EnvConfig, policy: &PolicySnapshot, rnd: Option<&RndModel>) -> Result<(String, String)> {
    let EnvConfig::Gridnav(grid) = env else {
        return Err(Error::Invalid(format!("maps need an enumerable grid, not {}", env.name())));
    };
    let rnd = rnd.ok_or_else(|| Error::Invalid("the run has no distillation model to map".into()))?;
    let intrinsic = grid_svg(grid, "intrinsic reward", |x, y| {
        rnd.reward(&grid.observation_of(x, y))
    })?;
    let entropy = grid_svg(grid, "policy entropy", |x, y| {
        Ok(policy.distribution(&grid.observation_of(x, y))?.entropy())
    })?;
    Ok((intrinsic, entropy))
}

//! Minimal deterministic SVG 1.1 plots of planar curves and point clouds.
//! Only the first two coordinates are drawn.

use std::fmt::Write as _;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

#[derive(Debug, Clone)]
pub enum Mark {
    Line { points: Vec<[f64; 2]>, color: &'static str, width: f64, opacity: f64 },
    Dots { points: Vec<[f64; 2]>, color: &'static str, radius: f64 },
}

impl Mark {
    pub fn line(points: Vec<[f64; 2]>, color: &'static str, width: f64, opacity: f64) -> Self {
        Mark::Line { points, color, width, opacity }
    }

    fn points(&self) -> &[[f64; 2]] {
        match self {
            Mark::Line { points, .. } | Mark::Dots { points, .. } => points,
        }
    }
}

/// First two coordinates of every vertex.
pub fn planar(points: &[f64], dim: usize) -> Vec<[f64; 2]> {
    points.chunks(dim).map(|p| [p[0], p.get(1).copied().unwrap_or(0.0)]).collect()
}

/// Outline of `{c + v : vᵀ shape⁻¹ v ≤ level}` for a 2 × 2 row-major shape.
pub fn ellipse(center: [f64; 2], shape: [f64; 4], level: f64, segments: usize) -> Vec<[f64; 2]> {
    let l11 = shape[0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { shape[2] / l11 } else { 0.0 };
    let l22 = (shape[3] - l21 * l21).max(0.0).sqrt();
    let r = level.max(0.0).sqrt();
    (0..=segments)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / segments as f64;
            let (u, v) = (r * a.cos(), r * a.sin());
            [center[0] + l11 * u, center[1] + l21 * u + l22 * v]
        })
        .collect()
}

/// Renders marks on a common, aspect-preserving frame.
pub fn render(title: &str, marks: &[Mark]) -> String {
    let all = marks.iter().flat_map(Mark::points);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        (lo, hi) = ([0.0; 2], [1.0; 2]);
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let off = [
        MARGIN + (SIZE - 2.0 * MARGIN - (hi[0] - lo[0]) * scale) / 2.0,
        MARGIN + (SIZE - 2.0 * MARGIN - (hi[1] - lo[1]) * scale) / 2.0,
    ];
    let px = |p: &[f64; 2]| (off[0] + (p[0] - lo[0]) * scale, SIZE - off[1] - (p[1] - lo[1]) * scale);

    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(out, "<title>{}</title>", escape(title)).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for mark in marks {
        match mark {
            Mark::Line { points, color, width, opacity } => {
                let path: Vec<String> = points
                    .iter()
                    .map(|p| {
                        let (x, y) = px(p);
                        format!("{x:.3},{y:.3}")
                    })
                    .collect();
                writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="{width:.2}" stroke-opacity="{opacity:.2}" points="{}"/>"#,
                    path.join(" ")
                )
                .unwrap();
            }
            Mark::Dots { points, color, radius } => {
                for p in points {
                    let (x, y) = px(p);
                    writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{radius:.2}" fill="{color}"/>"#).unwrap();
                }
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Colours cycled over labelled curves.
pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

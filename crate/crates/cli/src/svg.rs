//! Minimal deterministic SVG writer for projected trajectories.

use std::fmt::Write;

use nalgebra::Vector2;

pub const VELOCITY_COLOR: &str = "#00a000";
pub const FORCE_COLOR: &str = "#ff00ff";
pub const CURVE_COLOR: &str = "#ff8c00";

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;
const GLYPH_PX: f64 = 24.0;

/// A direction arrow anchored at an image point.
#[derive(Debug, Clone, PartialEq)]
pub struct Glyph {
    pub at: Vector2<f64>,
    pub dir: Vector2<f64>,
    pub color: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub polylines: Vec<(String, Vec<Vector2<f64>>)>,
    pub markers: Vec<Vector2<f64>>,
    pub glyphs: Vec<Glyph>,
}

impl Scene {
    fn bounds(&self) -> (Vector2<f64>, f64) {
        let pts = self
            .polylines
            .iter()
            .flat_map(|(_, p)| p.iter())
            .chain(&self.markers)
            .chain(self.glyphs.iter().map(|g| &g.at));
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        for p in pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        if !lo.x.is_finite() {
            return (Vector2::zeros(), 1.0);
        }
        let span = (hi - lo).max().max(1e-6);
        ((lo + hi) / 2.0, span)
    }

    /// Renders with image `v` pointing up and equal scale on both axes.
    pub fn to_svg(&self) -> String {
        let (center, span) = self.bounds();
        let scale = (SIZE - 2.0 * MARGIN) / span;
        let px = |p: &Vector2<f64>| {
            (
                SIZE / 2.0 + (p.x - center.x) * scale,
                SIZE / 2.0 - (p.y - center.y) * scale,
            )
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (id, line) in &self.polylines {
            let points: Vec<String> = line
                .iter()
                .map(|p| {
                    let (x, y) = px(p);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline id="{id}" points="{}" fill="none" stroke="{CURVE_COLOR}" stroke-width="3"/>"#,
                points.join(" ")
            );
        }
        for m in &self.markers {
            let (x, y) = px(m);
            let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="4" fill="{CURVE_COLOR}"/>"#);
        }
        for g in &self.glyphs {
            let (x1, y1) = px(&g.at);
            let (x2, y2) = (x1 + g.dir.x * GLYPH_PX, y1 - g.dir.y * GLYPH_PX);
            let _ = writeln!(
                out,
                r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="{}" stroke-width="2"/>"#,
                g.color
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

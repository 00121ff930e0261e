//! Static SVG phase portraits on a fixed 800 x 600 viewBox.

use std::fmt::Write;

use lienard_core::{Error, Poly, Result};

pub const SIZE_CAP: usize = 5 * 1024 * 1024;

const W: f64 = 800.0;
const H: f64 = 600.0;
const MARGIN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let all_finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !(all_finite && x_min < x_max && y_min < y_max) {
            return Err(Error::InvalidParameter(format!(
                "window bounds must be finite and ordered, got x [{x_min}, {x_max}], y [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    fn to_px(self, x: f64, y: f64) -> (f64, f64) {
        let sx = (W - 2.0 * MARGIN) / (self.x_max - self.x_min);
        let sy = (H - 2.0 * MARGIN) / (self.y_max - self.y_min);
        (
            MARGIN + (x - self.x_min) * sx,
            H - MARGIN - (y - self.y_min) * sy,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Orbit,
    Separatrix,
    Cycle,
}

impl CurveKind {
    fn style(self) -> &'static str {
        match self {
            CurveKind::Orbit => r##"stroke="#1f77b4" stroke-width="1""##,
            CurveKind::Separatrix => r##"stroke="#d62728" stroke-width="1.5""##,
            CurveKind::Cycle => r##"stroke="#2ca02c" stroke-width="2""##,
        }
    }

    fn class(self) -> &'static str {
        match self {
            CurveKind::Orbit => "orbit",
            CurveKind::Separatrix => "separatrix",
            CurveKind::Cycle => "cycle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub kind: CurveKind,
    pub points: Vec<(f64, f64)>,
}

/// Splits a curve into runs of visible points, thinned to half a pixel.
fn visible_runs(win: &Window, pts: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    let mut runs = Vec::new();
    let mut cur: Vec<(f64, f64)> = Vec::new();
    for &(x, y) in pts {
        if !(x.is_finite() && y.is_finite()) || !win.contains(x, y) {
            if cur.len() > 1 {
                runs.push(std::mem::take(&mut cur));
            }
            cur.clear();
            continue;
        }
        let p = win.to_px(x, y);
        if let Some(&(lx, ly)) = cur.last() {
            if (p.0 - lx).hypot(p.1 - ly) < 0.5 {
                continue;
            }
        }
        cur.push(p);
    }
    if cur.len() > 1 {
        runs.push(cur);
    }
    runs
}

fn polyline(out: &mut String, class: &str, style: &str, pts: &[(f64, f64)]) {
    let _ = write!(out, r#"<polyline class="{class}" fill="none" {style} points=""#);
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

/// Axes, the graph of F (sampled on `grid` points), the section
/// {x = 0, y < 0}, the equilibrium and the given curves.
pub fn portrait(f: &Poly, win: Window, grid: usize, curves: &[Curve]) -> Result<String> {
    if grid < 2 {
        return Err(Error::InvalidParameter("graph grid needs at least 2 points".into()));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {W} {H}" width="{W}" height="{H}">"#
    );
    let _ = writeln!(s, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="24" font-family="monospace" font-size="12">F(x) = {f}   x [{}, {}]  y [{}, {}]</text>"#,
        win.x_min, win.x_max, win.y_min, win.y_max
    );
    let axis = r##"stroke="#888888" stroke-width="0.75""##;
    if win.y_min <= 0.0 && win.y_max >= 0.0 {
        polyline(&mut s, "axis", axis, &[win.to_px(win.x_min, 0.0), win.to_px(win.x_max, 0.0)]);
    }
    if win.x_min <= 0.0 && win.x_max >= 0.0 {
        polyline(&mut s, "axis", axis, &[win.to_px(0.0, win.y_min), win.to_px(0.0, win.y_max)]);
        if win.y_min < 0.0 {
            let top = win.y_max.min(0.0);
            polyline(
                &mut s,
                "section",
                r##"stroke="#9467bd" stroke-width="3" stroke-opacity="0.6""##,
                &[win.to_px(0.0, win.y_min), win.to_px(0.0, top)],
            );
        }
    }
    let graph: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let x = win.x_min + (win.x_max - win.x_min) * i as f64 / (grid - 1) as f64;
            (x, f.eval(x))
        })
        .collect();
    for run in visible_runs(&win, &graph) {
        polyline(&mut s, "graph", r##"stroke="#000000" stroke-width="1.5" stroke-dasharray="4 2""##, &run);
    }
    for c in curves {
        for run in visible_runs(&win, &c.points) {
            polyline(&mut s, c.kind.class(), c.kind.style(), &run);
        }
    }
    if win.contains(0.0, 0.0) {
        let (cx, cy) = win.to_px(0.0, 0.0);
        let _ = writeln!(
            s,
            r##"<circle class="equilibrium" cx="{cx:.2}" cy="{cy:.2}" r="3" fill="#000000"/>"##
        );
    }
    s.push_str("</svg>\n");
    if s.len() > SIZE_CAP {
        return Err(Error::SizeCap {
            bytes: s.len(),
            cap: SIZE_CAP,
        });
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x4() -> Poly {
        Poly::monomial(4, 1.0).unwrap()
    }

    #[test]
    fn empty_portrait_has_graph_and_axes_only() {
        let w = Window::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        let s = portrait(&x4(), w, 200, &[]).unwrap();
        assert!(s.contains(r#"class="graph""#));
        assert!(s.contains(r#"class="section""#));
        assert!(s.contains(r#"class="equilibrium""#));
        assert!(!s.contains(r#"class="orbit""#));
        assert_eq!(s, portrait(&x4(), w, 200, &[]).unwrap());
    }

    #[test]
    fn curves_leaving_the_window_are_split() {
        let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let c = Curve {
            kind: CurveKind::Orbit,
            points: vec![(-0.5, 0.0), (0.0, 0.5), (5.0, 5.0), (0.5, 0.0), (0.0, -0.5)],
        };
        let s = portrait(&x4(), w, 50, &[c]).unwrap();
        assert_eq!(s.matches(r#"class="orbit""#).count(), 2);
    }

    #[test]
    fn rejects_bad_windows_and_oversized_output() {
        assert!(Window::new(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(Window::new(0.0, 1.0, 0.0, f64::NAN).is_err());
        let w = Window::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let zigzag: Vec<(f64, f64)> = (0..400_000)
            .map(|i| (-0.9 + 1.8 * ((i % 2) as f64), -0.9 + 1.8 * (i as f64 / 400_000.0)))
            .collect();
        let c = Curve {
            kind: CurveKind::Orbit,
            points: zigzag,
        };
        assert!(matches!(portrait(&x4(), w, 50, &[c]), Err(Error::SizeCap { .. })));
    }
}

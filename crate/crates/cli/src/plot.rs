//! Minimal SVG rendering of the xy projection.

use std::fmt::Write;

use nalgebra::Vector3;

const SIZE: f64 = 600.0;
const PAD: f64 = 20.0;

/// Samples as dots and the trajectory as a polyline, both projected onto xy.
pub fn render_svg(samples: &[Vector3<f64>], path: &[Vector3<f64>]) -> String {
    let all = samples.iter().chain(path);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0, 0.0];
        hi = [1.0, 1.0];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let scale = (SIZE - 2.0 * PAD) / span;
    let map = |p: &Vector3<f64>| (PAD + (p[0] - lo[0]) * scale, SIZE - PAD - (p[1] - lo[1]) * scale);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r##"<g fill="#4c72b0" fill-opacity="0.5">"##);
    for p in samples {
        let (x, y) = map(p);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let points: Vec<String> = path
        .iter()
        .map(|p| {
            let (x, y) = map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#c44e52" stroke-width="2" points="{}"/>"##,
        points.join(" ")
    );
    if let Some(p) = path.first() {
        let (x, y) = map(p);
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="#2ca02c"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

//! Latent scatter plot written as plain SVG.

use std::fmt::Write as _;

use crate::neighbors::PseudoLabel;
use crate::sampler::LatentExport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 520.0;
const MARGIN: f64 = 56.0;
const LEGEND: f64 = 130.0;

fn color(p: PseudoLabel) -> &'static str {
    match p {
        PseudoLabel::EasyMajor => "#9ecae1",
        PseudoLabel::HardMajor => "#3182bd",
        PseudoLabel::EasyMinor => "#fd8d3c",
        PseudoLabel::HardMinor => "#d62728",
    }
}

/// Round step near `span / 5`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

/// First two latent coordinates colored by pseudo label. Kept minors are
/// circles, filtered minors crosses, majors small dots.
pub fn latent_scatter(export: &LatentExport, title: &str) -> String {
    let n = export.z.rows();
    let two_d = export.z.cols() >= 2;
    let y_of = |i: usize| if two_d { export.z.get(i, 1) } else { 0.0 };
    let (x0, x1) = range((0..n).map(|i| export.z.get(i, 0)));
    let (y0, y1) = range((0..n).map(y_of));
    let plot_w = WIDTH - 2.0 * MARGIN - LEGEND;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
        let step = tick_step(hi - lo);
        let mut t = (lo / step).ceil() * step;
        while t <= hi {
            let label = format!("{:.*}", if step < 1.0 { (-step.log10()).ceil() as usize } else { 0 }, t);
            if horizontal {
                let x = sx(t);
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#444"/>"##,
                    HEIGHT - MARGIN,
                    HEIGHT - MARGIN + 5.0
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{x:.2}" y="{}" text-anchor="middle">{label}</text>"#,
                    HEIGHT - MARGIN + 18.0
                );
            } else {
                let y = sy(t);
                let _ = writeln!(
                    s,
                    r##"<line x1="{}" y1="{y:.2}" x2="{MARGIN}" y2="{y:.2}" stroke="#444"/>"##,
                    MARGIN - 5.0
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#,
                    MARGIN - 8.0,
                    y + 4.0
                );
            }
            t += step;
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">z1</text>"#,
        MARGIN + plot_w / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">z2</text>"#,
        MARGIN + plot_h / 2.0,
        MARGIN + plot_h / 2.0
    );

    // majors first so minors stay visible on top
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| export.labels[i].is_minor());
    for i in order {
        let (x, y) = (sx(export.z.get(i, 0)), sy(y_of(i)));
        let c = color(export.pseudo[i]);
        match export.kept[i] {
            Some(true) => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{c}" stroke="black" stroke-width="0.5"/>"#
                );
            }
            Some(false) => {
                let _ = writeln!(
                    s,
                    r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{c}" stroke-width="2"/>"#,
                    x - 4.0,
                    y - 4.0,
                    x + 4.0,
                    y + 4.0,
                    x - 4.0,
                    y + 4.0,
                    x + 4.0,
                    y - 4.0
                );
            }
            None => {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.8" fill="{c}" fill-opacity="0.6"/>"#
                );
            }
        }
    }

    let lx = WIDTH - LEGEND - MARGIN / 2.0 + 10.0;
    let mut ly = MARGIN + 10.0;
    for p in [
        PseudoLabel::EasyMajor,
        PseudoLabel::HardMajor,
        PseudoLabel::EasyMinor,
        PseudoLabel::HardMinor,
    ] {
        let _ = writeln!(s, r#"<circle cx="{lx}" cy="{ly}" r="5" fill="{}"/>"#, color(p));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 12.0,
            ly + 4.0,
            escape(p.as_str())
        );
        ly += 20.0;
    }
    ly += 10.0;
    let _ = writeln!(s, r#"<circle cx="{lx}" cy="{ly}" r="3.5" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}">kept</text>"#, lx + 12.0, ly + 4.0);
    ly += 20.0;
    let _ = writeln!(
        s,
        r#"<path d="M{} {}L{} {}M{} {}L{} {}" stroke="black" stroke-width="2"/>"#,
        lx - 4.0,
        ly - 4.0,
        lx + 4.0,
        ly + 4.0,
        lx - 4.0,
        ly + 4.0,
        lx + 4.0,
        ly - 4.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}">filtered</text>"#, lx + 12.0, ly + 4.0);
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

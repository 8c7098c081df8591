//! Standalone log-log SVG plot of a survey: `delta_N` as circles, the
//! positive part of `delta_N - delta_N*` as triangles, and the fitted power
//! law as a dashed line.

use std::fmt::Write as _;

use specgap::{LevelRecord, PowerLawFit};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const BLUE: &str = "#1f4e9c";
const ORANGE: &str = "#d4762c";
const RED: &str = "#c0392b";

struct LogAxis {
    lo: f64,
    hi: f64,
    start: f64,
    end: f64,
}

impl LogAxis {
    /// Decade-aligned axis covering every value in `values`.
    fn covering(values: impl Iterator<Item = f64>, start: f64, end: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let (lo, mut hi) = (lo.floor(), hi.ceil());
        if hi <= lo {
            hi = lo + 1.0;
        }
        Self { lo, hi, start, end }
    }

    fn map(&self, v: f64) -> f64 {
        self.start + (v.log10() - self.lo) / (self.hi - self.lo) * (self.end - self.start)
    }

    fn decades(&self) -> impl Iterator<Item = i32> {
        (self.lo as i32)..=(self.hi as i32)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace("--", "- -")
}

fn decade_label(e: i32) -> String {
    match e {
        0 => "1".into(),
        1 => "10".into(),
        _ => format!("10<tspan dy=\"-6\" font-size=\"10\">{e}</tspan>"),
    }
}

fn circle(out: &mut String, x: f64, y: f64) {
    let _ = writeln!(
        out,
        r#"  <circle cx="{x:.2}" cy="{y:.2}" r="4" fill="none" stroke="{BLUE}" stroke-width="1.5"/>"#
    );
}

fn triangle(out: &mut String, x: f64, y: f64) {
    let _ = writeln!(
        out,
        r#"  <polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{ORANGE}"/>"#,
        x,
        y - 5.0,
        x - 4.5,
        y + 3.5,
        x + 4.5,
        y + 3.5
    );
}

/// Renders the plot. `provenance` lines are embedded in a comment.
pub fn render(
    levels: &[LevelRecord],
    fit: Option<&PowerLawFit>,
    title: &str,
    provenance: &[String],
) -> String {
    let diffs: Vec<&LevelRecord> = levels.iter().filter(|l| l.diff > 0.0).collect();
    let xs = LogAxis::covering(levels.iter().map(|l| l.n as f64), LEFT, WIDTH - RIGHT);
    let ys = LogAxis::covering(
        levels
            .iter()
            .map(|l| l.delta_n)
            .chain(diffs.iter().map(|l| l.diff)),
        HEIGHT - BOTTOM,
        TOP,
    );

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    out.push_str("<!--\n");
    for line in provenance {
        let _ = writeln!(out, "  {}", escape(line));
    }
    out.push_str("-->\n");
    let _ = writeln!(out, "  <title>{}</title>", escape(title));
    let _ = writeln!(
        out,
        r#"  <rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"  <defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}"/></clipPath></defs>"#,
        WIDTH - RIGHT - LEFT,
        HEIGHT - BOTTOM - TOP
    );

    // Grid and ticks.
    for e in xs.decades() {
        let x = xs.map(10f64.powi(e));
        let _ = writeln!(
            out,
            r##"  <line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            HEIGHT - BOTTOM
        );
        let _ = writeln!(
            out,
            r#"  <text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            decade_label(e)
        );
    }
    for e in ys.decades() {
        let y = ys.map(10f64.powi(e));
        let _ = writeln!(
            out,
            r##"  <line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            WIDTH - RIGHT
        );
        let _ = writeln!(
            out,
            r#"  <text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + 4.0,
            decade_label(e)
        );
    }
    let _ = writeln!(
        out,
        r#"  <rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        WIDTH - RIGHT - LEFT,
        HEIGHT - BOTTOM - TOP
    );
    let _ = writeln!(
        out,
        r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle">N</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"  <text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );

    // Fit line first, so markers sit on top of it.
    if let Some(f) = fit {
        let (n0, n1) = (10f64.powf(xs.lo), 10f64.powf(xs.hi));
        let _ = writeln!(
            out,
            r#"  <line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{RED}" stroke-width="1.5" stroke-dasharray="6,4" clip-path="url(#plot)"/>"#,
            xs.map(n0),
            ys.map(f.predict(n0)),
            xs.map(n1),
            ys.map(f.predict(n1))
        );
    }
    for l in levels {
        circle(&mut out, xs.map(l.n as f64), ys.map(l.delta_n));
    }
    for l in &diffs {
        triangle(&mut out, xs.map(l.n as f64), ys.map(l.diff));
    }

    // Legend.
    let lx = WIDTH - RIGHT + 16.0;
    circle(&mut out, lx + 6.0, TOP + 12.0);
    let _ = writeln!(
        out,
        r#"  <text x="{:.2}" y="{:.2}">δ_N</text>"#,
        lx + 18.0,
        TOP + 16.0
    );
    triangle(&mut out, lx + 6.0, TOP + 34.0);
    let _ = writeln!(
        out,
        r#"  <text x="{:.2}" y="{:.2}">δ_N − δ_N*</text>"#,
        lx + 18.0,
        TOP + 38.0
    );
    if let Some(f) = fit {
        let _ = writeln!(
            out,
            r#"  <line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{RED}" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
            TOP + 56.0,
            lx + 12.0,
            TOP + 56.0
        );
        let _ = writeln!(
            out,
            r#"  <text x="{:.2}" y="{:.2}">{:.3} N<tspan dy="-6" font-size="10">−{:.3}</tspan></text>"#,
            lx + 18.0,
            TOP + 60.0,
            f.alpha,
            f.beta
        );
    }
    out.push_str("</svg>\n");
    out
}

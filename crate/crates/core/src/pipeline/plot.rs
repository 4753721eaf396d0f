//! Minimal standalone SVG charts.

use std::fmt::Write;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

/// ROC curves, one polyline per `(name, points)`, with the chance diagonal.
pub fn roc_svg(title: &str, curves: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let plot = H - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + x * plot;
    let py = |y: f64| H - MARGIN - y * plot;
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot}" height="{plot}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#aaa" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for t in 0..=4 {
        let v = t as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v}</text>"#, px(v), py(0.0) + 16.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v}</text>"#, px(0.0) - 6.0, py(v) + 4.0);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">false positive rate</text>"#,
        px(0.5),
        H - 20.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">true positive rate</text>"#,
        py(0.5),
        py(0.5)
    );
    for (i, (name, pts)) in curves.iter().enumerate() {
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color(i),
            path.join(" ")
        );
        let ly = MARGIN + 14.0 * i as f64 + 10.0;
        let lx = px(1.0) + 8.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 14.0,
            color(i),
            lx + 18.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: one group per label, one bar per series. Bars grow
/// up or down from a zero line.
pub fn bar_svg(title: &str, labels: &[&str], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    open(&mut out, title);
    let values = series.iter().flat_map(|(_, v)| v.iter().copied());
    let (lo, hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
    let top = MARGIN;
    let height = H - 2.0 * MARGIN - 30.0;
    let y = |v: f64| top + (hi - v) / span * height;
    let width = W - 2.0 * MARGIN;
    let group = width / labels.len().max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##,
        y(0.0),
        MARGIN + width,
        y(0.0)
    );
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{hi:.3}</text>"#, MARGIN - 4.0, y(hi) + 4.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{lo:.3}</text>"#, MARGIN - 4.0, y(lo) + 4.0);
    for (g, label) in labels.iter().enumerate() {
        let gx = MARGIN + g as f64 * group + group * 0.1;
        for (s, (_, vals)) in series.iter().enumerate() {
            let v = vals.get(g).copied().unwrap_or(0.0);
            let (y0, y1) = if v >= 0.0 { (y(v), y(0.0)) } else { (y(0.0), y(v)) };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{y0:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                gx + s as f64 * bar,
                y1 - y0,
                color(s)
            );
        }
        let lx = gx + group * 0.4;
        let ly = H - MARGIN - 10.0;
        let _ = writeln!(
            out,
            r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-35 {lx:.1} {ly:.1})">{}</text>"#,
            escape(label)
        );
    }
    for (s, (name, _)) in series.iter().enumerate() {
        let ly = 40.0 + 14.0 * s as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - 200.0,
            ly - 9.0,
            color(s),
            W - 186.0,
            ly,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

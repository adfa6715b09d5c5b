//! Minimal static SVG charts with fixed formatting, so output bytes depend
//! only on the data.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    s
}

/// Chart with a "no data" note in place of a plot.
pub fn placeholder(title: &str) -> String {
    let mut s = header(title);
    let _ = writeln!(
        s,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="#777" font-size="18">no data</text>"##,
        W / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn nice_max(v: f64) -> f64 {
    if v.is_nan() || v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if v <= m * mag {
            return m * mag;
        }
    }
    10.0 * mag
}

fn axes(s: &mut String, x_label: &str, y_label: &str, y_max: f64) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = y0 - (y0 - y1) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 14.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e5) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let x = W - RIGHT - 170.0;
        let y = TOP + 8.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 14.0, escape(n));
    }
}

/// Lines (or dots with `scatter`) over numeric x.
pub fn xy_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], scatter: bool) -> String {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x_min, mut x_max, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut any = false;
    for &(x, y) in pts {
        any = true;
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_max = y_max.max(y);
    }
    if !any {
        return placeholder(title);
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let y_top = nice_max(y_max);
    let mut s = header(title);
    axes(&mut s, x_label, y_label, y_top);
    let sx = |x: f64| LEFT + (W - LEFT - RIGHT) * (x - x_min) / (x_max - x_min);
    let sy = |y: f64| H - BOTTOM - (H - BOTTOM - TOP) * y / y_top;
    for i in 0..=4 {
        let v = x_min + (x_max - x_min) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(v),
            H - BOTTOM + 16.0,
            tick(v)
        );
    }
    for (i, se) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let finite: Vec<(f64, f64)> = se
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        if scatter {
            for (x, y) in finite {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                    sx(x),
                    sy(y)
                );
            }
        } else {
            let path: Vec<String> = finite
                .iter()
                .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
        }
    }
    legend(&mut s, &series.iter().map(|x| x.name.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Grouped bars; `None` values leave a gap.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter().flatten())
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NAN, f64::max);
    if categories.is_empty() || series.is_empty() || y_max.is_nan() {
        return placeholder(title);
    }
    let y_top = nice_max(y_max);
    let mut s = header(title);
    axes(&mut s, "", y_label, y_top);
    let plot_w = W - LEFT - RIGHT;
    let group_w = plot_w / categories.len() as f64;
    let bar_w = group_w * 0.8 / series.len() as f64;
    for (c, cat) in categories.iter().enumerate() {
        let gx = LEFT + group_w * c as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + group_w / 2.0,
            H - BOTTOM + 16.0,
            escape(cat)
        );
        for (i, (_, values)) in series.iter().enumerate() {
            let Some(v) = values.get(c).copied().flatten().filter(|v| v.is_finite()) else {
                continue;
            };
            let h = (H - BOTTOM - TOP) * v.max(0.0) / y_top;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                gx + group_w * 0.1 + bar_w * i as f64,
                H - BOTTOM - h,
                bar_w,
                h,
                PALETTE[i % PALETTE.len()]
            );
        }
    }
    legend(&mut s, &series.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_give_placeholder() {
        let s = xy_chart("t", "x", "y", &[], false);
        assert!(s.contains("no data"));
        let b = bar_chart("t", "y", &["a".into()], &[("s".into(), vec![None])]);
        assert!(b.contains("no data"));
    }

    #[test]
    fn bars_descend_with_counts() {
        let b = bar_chart(
            "d",
            "count",
            &["A".into(), "B".into()],
            &[("s".into(), vec![Some(3.0), Some(1.0)])],
        );
        let heights: Vec<f64> = b
            .lines()
            .filter(|l| l.starts_with("<rect x") && l.contains("height") && !l.contains("width=\"10\""))
            .map(|l| {
                let h = l.split("height=\"").nth(1).unwrap();
                h[..h.find('"').unwrap()].parse().unwrap()
            })
            .collect();
        assert_eq!(heights.len(), 2);
        assert!(heights[0] > heights[1]);
        assert!(!b.contains("no data"));
    }
}

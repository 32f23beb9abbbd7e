//! Minimal SVG charts for benchmark aggregates: MSE against K as two line
//! series, and MSE against P_o as grouped bars with +-2 sd whiskers.

use std::fmt::Write;

use crate::bench::{CellSummary, Method};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn colour(method: Method) -> &'static str {
    match method {
        Method::Baseline => "#c0392b",
        Method::Msd => "#2471a3",
        Method::BootstrapPf => "#555555",
    }
}

struct Frame {
    y_max: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        TOP + (H - TOP - BOTTOM) * (1.0 - v / self.y_max)
    }
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) || !v.is_finite() {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn open(svg: &mut String, title: &str, x_label: &str, frame: &Frame) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>"#,
        W / 2.0
    );
    let (x0, y0, x1) = (LEFT, H - BOTTOM, W - RIGHT);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>"#);
    for i in 0..=5 {
        let v = frame.y_max * i as f64 / 5.0;
        let y = frame.y(v);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            svg,
            r#"<text class="ytick" x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{x_label}</text>"#,
        (x0 + x1) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.2})">MSE</text>"#,
        (TOP + y0) / 2.0,
        (TOP + y0) / 2.0
    );
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}

fn legend(svg: &mut String, methods: &[Method]) {
    for (i, m) in methods.iter().enumerate() {
        let x = W - RIGHT - 150.0;
        let y = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(svg, r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{}"/>"#, y - 10.0, colour(*m));
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 18.0,
            match m {
                Method::Baseline => "baseline BMAPF",
                Method::Msd => "MSD-BMAPF",
                Method::BootstrapPf => "bootstrap PF",
            }
        );
    }
}

fn methods_of(cells: &[&CellSummary]) -> Vec<Method> {
    let mut m: Vec<Method> = cells.iter().map(|c| c.method).collect();
    m.sort();
    m.dedup();
    m
}

/// Mean MSE against K, one line per method.
pub fn mse_vs_k(cells: &[&CellSummary]) -> String {
    let mut ks: Vec<usize> = cells.iter().map(|c| c.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let frame = Frame {
        y_max: nice_max(cells.iter().map(|c| c.mse_mean).fold(0.0, f64::max) * 1.05),
    };
    let x_of = |k: usize| {
        let i = ks.iter().position(|&x| x == k).unwrap_or(0) as f64;
        let span = W - LEFT - RIGHT - 40.0;
        LEFT + 20.0 + if ks.len() > 1 { span * i / (ks.len() - 1) as f64 } else { span / 2.0 }
    };
    let mut svg = String::new();
    open(&mut svg, "Averaged MSE versus number of models", "K", &frame);
    for &k in &ks {
        let x = x_of(k);
        let _ = writeln!(
            svg,
            r#"<text class="xtick" x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{k}</text>"#,
            H - BOTTOM + 16.0
        );
    }
    let methods = methods_of(cells);
    for m in &methods {
        let mut pts: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.method == *m)
            .map(|c| (x_of(c.k), frame.y(c.mse_mean)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let _ = writeln!(svg, r#"<g class="series" data-method="{}">"#, m.label());
        for w in pts.windows(2) {
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
                w[0].0,
                w[0].1,
                w[1].0,
                w[1].1,
                colour(*m)
            );
        }
        for (x, y) in &pts {
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="{}"/>"#,
                x - 3.0,
                y - 3.0,
                colour(*m)
            );
        }
        svg.push_str("</g>\n");
    }
    legend(&mut svg, &methods);
    svg.push_str("</svg>\n");
    svg
}

/// Grouped bars of mean MSE per P_o with mean +- 2 sd whiskers.
pub fn mse_vs_po(cells: &[&CellSummary]) -> String {
    let mut pos: Vec<f64> = cells.iter().filter_map(|c| c.po).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    let frame = Frame {
        y_max: nice_max(
            cells
                .iter()
                .map(|c| c.mse_mean + 2.0 * c.mse_std)
                .fold(0.0, f64::max)
                * 1.05,
        ),
    };
    let methods = methods_of(cells);
    let group_w = (W - LEFT - RIGHT) / pos.len().max(1) as f64;
    let bar_w = group_w * 0.7 / methods.len().max(1) as f64;
    let mut svg = String::new();
    open(&mut svg, "MSE (mean and two standard deviations) versus P_o", "P_o", &frame);
    for (gi, po) in pos.iter().enumerate() {
        let gx = LEFT + group_w * gi as f64 + group_w * 0.15;
        let _ = writeln!(svg, r#"<g class="bar-group" data-po="{po}">"#);
        for (mi, m) in methods.iter().enumerate() {
            let Some(c) = cells.iter().find(|c| c.method == *m && c.po == Some(*po)) else {
                continue;
            };
            let x = gx + bar_w * mi as f64;
            let top = frame.y(c.mse_mean);
            let base = frame.y(0.0);
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                bar_w * 0.9,
                base - top,
                colour(*m)
            );
            let cx = x + bar_w * 0.45;
            let hi = frame.y(c.mse_mean + 2.0 * c.mse_std);
            let lo = frame.y((c.mse_mean - 2.0 * c.mse_std).max(0.0));
            let _ = writeln!(svg, r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="black"/>"#);
            for y in [lo, hi] {
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
                    cx - 4.0,
                    cx + 4.0
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text class="xtick" x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{po}</text>"#,
            gx + group_w * 0.35,
            H - BOTTOM + 16.0
        );
        svg.push_str("</g>\n");
    }
    legend(&mut svg, &methods);
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(method: Method, k: usize, po: Option<f64>, mean: f64) -> CellSummary {
        CellSummary {
            experiment: "x".into(),
            method,
            k,
            po,
            mse_mean: mean,
            mse_std: 0.1,
            n_runs: 10,
        }
    }

    #[test]
    fn line_chart_shape() {
        let cells: Vec<CellSummary> = (2..=20)
            .flat_map(|k| [cell(Method::Baseline, k, None, 2.0), cell(Method::Msd, k, None, 1.0)])
            .collect();
        let refs: Vec<&CellSummary> = cells.iter().collect();
        let svg = mse_vs_k(&refs);
        assert_eq!(svg.matches(r#"class="xtick""#).count(), 19);
        assert_eq!(svg.matches(r#"class="series""#).count(), 2);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn bar_chart_shape() {
        let cells: Vec<CellSummary> = [0.1, 0.3, 0.5, 0.7, 0.9]
            .iter()
            .flat_map(|&p| [cell(Method::Baseline, 3, Some(p), 2.0), cell(Method::Msd, 3, Some(p), 1.0)])
            .collect();
        let refs: Vec<&CellSummary> = cells.iter().collect();
        let svg = mse_vs_po(&refs);
        assert_eq!(svg.matches(r#"class="bar-group""#).count(), 5);
    }

    #[test]
    fn nice_max_rounds_up() {
        assert_eq!(nice_max(0.83), 1.0);
        assert_eq!(nice_max(3.2), 5.0);
        assert_eq!(nice_max(0.0), 1.0);
    }
}

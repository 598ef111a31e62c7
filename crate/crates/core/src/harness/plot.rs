//! Log-log SVG rendering of a study. Coordinates are printed with fixed
//! precision so the bytes depend only on the report.

use std::fmt::Write as _;

use super::report::{fit_slope, StudyReport};
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 440.0;
const PAD: f64 = 64.0;

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        PAD + (x.log10() - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y.log10() - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let m = 0.08 * (hi - lo);
        (lo - m, hi + m)
    }
}

/// Renders `mean` against the level on log-log axes with the fitted slope
/// and any reference guides anchored at the coarsest level.
pub fn render(report: &StudyReport) -> Result<String> {
    let rows: Vec<_> = report.rows.iter().filter(|r| r.level > 0.0 && r.mean > 0.0).collect();
    if rows.len() < 2 {
        return Err(Error::TooFewLevels(report.id.clone()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.level).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let slope = fit_slope(&xs, &ys);
    let lx = xs.iter().map(|x| x.log10());
    let ly = ys.iter().map(|y| y.log10());
    let (x0, x1) = padded(
        lx.clone().fold(f64::INFINITY, f64::min),
        lx.fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = padded(
        ly.clone().fold(f64::INFINITY, f64::min),
        ly.fold(f64::NEG_INFINITY, f64::max),
    );
    let ax = Axes { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle">{}</text>"#,
        W / 2.0,
        report.id
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">log10 {}</text>"#,
        W / 2.0,
        H - 20.0,
        report.level_name
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">log10 {}</text>"#,
        H / 2.0,
        H / 2.0,
        report.metric_name
    );
    for (k, (a, b)) in [(x0, x1), (y0, y1)].into_iter().enumerate() {
        for i in 0..=4 {
            let v = a + (b - a) * f64::from(i) / 4.0;
            if k == 0 {
                let x = ax.px(10f64.powf(v));
                let _ = writeln!(
                    s,
                    r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#,
                    H - PAD + 16.0
                );
            } else {
                let y = ax.py(10f64.powf(v));
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{y:.2}" text-anchor="end">{v:.2}</text>"#,
                    PAD - 6.0
                );
            }
        }
    }
    for (i, g) in report.guides.iter().enumerate() {
        let (xa, xb) = (xs[0], xs[xs.len() - 1]);
        let ya = ys[0];
        let yb = ya * (xb / xa).powf(*g);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 4"/>"#,
            ax.px(xa),
            ax.py(ya),
            ax.px(xb),
            ax.py(yb)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="gray">order {g}</text>"#,
            W - PAD - 90.0,
            PAD + 36.0 + 16.0 * i as f64
        );
    }
    let pts: Vec<String> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| format!("{:.2},{:.2}", ax.px(*x), ax.py(*y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        pts.join(" ")
    );
    for p in &pts {
        let (x, y) = p.split_once(',').expect("formatted pair");
        let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3.5" fill="steelblue"/>"#);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" fill="steelblue">fitted slope {slope:.3}</text>"#,
        PAD + 10.0,
        PAD + 20.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}

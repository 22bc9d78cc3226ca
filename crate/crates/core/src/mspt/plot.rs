//! Self-contained SVG of two score distributions: translucent histograms
//! under their KDE curves, actual in orange and the random baseline in blue.

use std::fmt::Write as _;
use std::path::Path;

use super::MsptError;
use super::density::{Bin, histogram, kde_curve};

pub const ACTUAL_COLOR: &str = "#ff7f0e";
pub const BASELINE_COLOR: &str = "#1f77b4";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const BINS: usize = 20;
const KDE_POINTS: usize = 200;
const TICKS: usize = 5;

/// Fixed two-decimal coordinates; never prints "-0.00".
fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" { "0.00".to_string() } else { s }
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 { format!("{v:.0}") } else { num(v) }
}

struct Series {
    curve: Vec<(f64, f64)>,
    bins: Vec<Bin>,
    n: usize,
}

impl Series {
    fn new(samples: &[f64]) -> Result<Self, MsptError> {
        Ok(Self {
            curve: kde_curve(samples, KDE_POINTS)?,
            bins: histogram(samples, BINS)?,
            n: samples.len(),
        })
    }

    fn bar_height(&self, b: &Bin) -> f64 {
        b.count as f64 / (self.n as f64 * (b.right - b.left))
    }

    fn x_range(&self) -> (f64, f64) {
        let lo = self.curve[0].0.min(self.bins[0].left);
        let hi = self.curve[self.curve.len() - 1]
            .0
            .max(self.bins[self.bins.len() - 1].right);
        (lo, hi)
    }

    fn y_max(&self) -> f64 {
        let k = self.curve.iter().map(|p| p.1).fold(0.0, f64::max);
        self.bins.iter().map(|b| self.bar_height(b)).fold(k, f64::max)
    }
}

/// Renders the plot. Both sample sets must hold at least two finite values.
pub fn render_distribution_svg(actual: &[f64], random: &[f64]) -> Result<String, MsptError> {
    let a = Series::new(actual)?;
    let r = Series::new(random)?;
    let (alo, ahi) = a.x_range();
    let (rlo, rhi) = r.x_range();
    let (x0, x1) = (alo.min(rlo), ahi.max(rhi));
    let y1 = a.y_max().max(r.y_max()) * 1.05;
    let y1 = if y1 > 0.0 { y1 } else { 1.0 };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - y / y1 * ph;

    let mut s = String::new();
    let w = &mut s;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#,
        W = WIDTH,
        H = HEIGHT
    )
    .unwrap();
    writeln!(
        w,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();

    for (series, color, id) in [(&r, BASELINE_COLOR, "baseline"), (&a, ACTUAL_COLOR, "actual")] {
        writeln!(
            w,
            r#"<g id="hist-{id}" fill="{color}" fill-opacity="0.35" stroke="none">"#
        )
        .unwrap();
        for b in series.bins.iter().filter(|b| b.count > 0) {
            let top = sy(series.bar_height(b));
            writeln!(
                w,
                r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                num(sx(b.left)),
                num(top),
                num(sx(b.right) - sx(b.left)),
                num(sy(0.0) - top)
            )
            .unwrap();
        }
        writeln!(w, "</g>").unwrap();
    }
    for (series, color, id) in [(&r, BASELINE_COLOR, "baseline"), (&a, ACTUAL_COLOR, "actual")] {
        let pts: Vec<String> = series
            .curve
            .iter()
            .map(|&(x, y)| format!("{},{}", num(sx(x)), num(sy(y))))
            .collect();
        writeln!(
            w,
            r#"<polyline id="kde-{id}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
    }

    // axes
    let (bx, by) = (num(sx(x0)), num(sy(0.0)));
    writeln!(w, r#"<g stroke="black" stroke-width="1">"#).unwrap();
    writeln!(w, r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}"/>"#, num(sx(x1))).unwrap();
    writeln!(w, r#"<line x1="{bx}" y1="{by}" x2="{bx}" y2="{}"/>"#, num(sy(y1))).unwrap();
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let px = num(sx(x0 + f * (x1 - x0)));
        let py = num(sy(f * y1));
        writeln!(
            w,
            r#"<line x1="{px}" y1="{by}" x2="{px}" y2="{}"/>"#,
            num(sy(0.0) + 5.0)
        )
        .unwrap();
        writeln!(w, r#"<line x1="{bx}" y1="{py}" x2="{}" y2="{py}"/>"#, num(sx(x0) - 5.0)).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(sx(x0 + f * (x1 - x0))),
            num(sy(0.0) + 18.0),
            tick_label(x0 + f * (x1 - x0))
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(sx(x0) - 8.0),
            num(sy(f * y1) + 4.0),
            tick_label(f * y1)
        )
        .unwrap();
    }
    writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">F1-BERTScore</text>"#,
        num(LEFT + pw / 2.0),
        num(HEIGHT - 14.0)
    )
    .unwrap();
    writeln!(
        w,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">density</text>"#,
        y = num(TOP + ph / 2.0)
    )
    .unwrap();

    // legend
    let lx = WIDTH - RIGHT - 150.0;
    for (i, (color, label)) in [(ACTUAL_COLOR, "actual"), (BASELINE_COLOR, "random baseline")]
        .iter()
        .enumerate()
    {
        let ly = TOP + 10.0 + 18.0 * i as f64;
        writeln!(
            w,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="3"/>"#,
            num(lx),
            num(ly),
            num(lx + 24.0),
            num(ly)
        )
        .unwrap();
        writeln!(
            w,
            r#"<text x="{}" y="{}">{label}</text>"#,
            num(lx + 30.0),
            num(ly + 4.0)
        )
        .unwrap();
    }
    writeln!(w, "</svg>").unwrap();
    Ok(s)
}

/// Renders first, then writes, so invalid input never leaves a file behind.
pub fn emit_distribution_plot(actual: &[f64], random: &[f64], path: &Path) -> Result<(), MsptError> {
    let svg = render_distribution_svg(actual, random)?;
    std::fs::write(path, svg)?;
    Ok(())
}

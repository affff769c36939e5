//! Static SVG plots of coincidence ratio against relative analyzer angle.
//!
//! Axes are fixed to `phi in [0, pi/2]` and ratio in `[0, 0.5]`. Points carry
//! `+/- 3 se` bars.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::interface::output::write_text;
use crate::models::ModelKind;
use crate::physics::{classical_coincidence_ratio, qm_coincidence_ratio, ExperimentConfig};
use crate::runner::BatchResult;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const Y_MAX: f64 = 0.5;
const CURVE_SAMPLES: usize = 200;
pub const ERROR_BAR_SE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Circle,
    Square,
}

#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub color: &'static str,
    pub style: LineStyle,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn sample(label: &str, color: &'static str, style: LineStyle, f: impl Fn(f64) -> f64) -> Self {
        let points = (0..=CURVE_SAMPLES)
            .map(|i| {
                let phi = FRAC_PI_2 * i as f64 / CURVE_SAMPLES as f64;
                (phi, f(phi))
            })
            .collect();
        Curve {
            label: label.to_string(),
            color,
            style,
            points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub marker: Marker,
    /// `(phi, mean, se)`; a missing se draws no bar.
    pub points: Vec<(f64, f64, Option<f64>)>,
}

impl Series {
    pub fn from_batch(batch: &BatchResult, label: &str, color: &'static str, marker: Marker) -> Self {
        Series {
            label: label.to_string(),
            color,
            marker,
            points: batch.per_angle.iter().map(|a| (a.angle, a.ratio_mean, a.ratio_se)).collect(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub curves: Vec<Curve>,
    pub series: Vec<Series>,
}

fn px(phi: f64) -> f64 {
    LEFT + (WIDTH - LEFT - RIGHT) * phi / FRAC_PI_2
}

fn py(ratio: f64) -> f64 {
    let r = ratio.clamp(0.0, Y_MAX);
    HEIGHT - BOTTOM - (HEIGHT - TOP - BOTTOM) * r / Y_MAX
}

/// `k pi / d` in lowest terms.
fn pi_fraction(k: u32, d: u32) -> String {
    if k == 0 {
        return "0".into();
    }
    let g = (1..=k.min(d)).rev().find(|g| k.is_multiple_of(*g) && d.is_multiple_of(*g)).unwrap_or(1);
    let (n, d) = (k / g, d / g);
    let n = if n == 1 { String::new() } else { n.to_string() };
    if d == 1 { format!("{n}π") } else { format!("{n}π/{d}") }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn render(&self) -> Result<String> {
        if self.curves.is_empty() && self.series.is_empty() {
            return Err(Error::Contract("plot has no curves and no points".into()));
        }
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="28" text-anchor="middle" font-size="18">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        self.axes(&mut s);
        for c in &self.curves {
            let d: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let dash = match c.style {
                LineStyle::Solid => "",
                LineStyle::Dashed => r#" stroke-dasharray="8,5""#,
            };
            let _ = writeln!(
                s,
                r#"<polyline class="curve" fill="none" stroke="{}" stroke-width="2"{dash} points="{}"/>"#,
                c.color,
                d.join(" ")
            );
        }
        for series in &self.series {
            for &(phi, mean, se) in &series.points {
                let (x, y) = (px(phi), py(mean));
                if let Some(se) = se {
                    let half = ERROR_BAR_SE * se;
                    let (y0, y1) = (py(mean - half), py(mean + half));
                    let _ = writeln!(
                        s,
                        r#"<line class="error-bar" x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="{}" stroke-width="1.5"/>"#,
                        series.color
                    );
                }
                match series.marker {
                    Marker::Circle => {
                        let _ = writeln!(
                            s,
                            r#"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"/>"#,
                            series.color
                        );
                    }
                    Marker::Square => {
                        let _ = writeln!(
                            s,
                            r#"<rect class="point" x="{:.2}" y="{:.2}" width="8" height="8" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                            x - 4.0,
                            y - 4.0,
                            series.color
                        );
                    }
                }
            }
        }
        self.legend(&mut s);
        s.push_str("</svg>\n");
        Ok(s)
    }

    fn axes(&self, s: &mut String) {
        let (x0, x1, y0, y1) = (px(0.0), px(FRAC_PI_2), py(0.0), py(Y_MAX));
        let _ = writeln!(
            s,
            r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black" stroke-width="1.5"/>"#
        );
        for k in 0..=8 {
            let phi = FRAC_PI_2 * k as f64 / 8.0;
            let x = px(phi);
            let label = pi_fraction(k, 16);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="12">{label}</text>"#,
                y0 + 6.0,
                y0 + 22.0
            );
        }
        for k in 0..=5 {
            let r = Y_MAX * k as f64 / 5.0;
            let y = py(r);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="12">{r:.1}</text>"#,
                x0 - 6.0,
                x0 - 10.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">relative analyzer angle φ (rad)</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 20.0
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(22,{:.2}) rotate(-90)" text-anchor="middle" font-size="14">coincidence ratio R(φ)/R0</text>"#,
            (y0 + y1) / 2.0
        );
    }

    fn legend(&self, s: &mut String) {
        let x = WIDTH - RIGHT - 230.0;
        let mut y = TOP + 15.0;
        for c in &self.curves {
            let dash = if c.style == LineStyle::Dashed { r#" stroke-dasharray="8,5""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}" font-size="12">{}</text>"#,
                x + 30.0,
                c.color,
                x + 38.0,
                y + 4.0,
                escape(&c.label)
            );
            y += 18.0;
        }
        for series in &self.series {
            let marker = match series.marker {
                Marker::Circle => format!(r#"<circle cx="{}" cy="{y}" r="4" fill="{}"/>"#, x + 15.0, series.color),
                Marker::Square => format!(
                    r#"<rect x="{}" y="{}" width="8" height="8" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                    x + 11.0,
                    y - 4.0,
                    series.color
                ),
            };
            let _ = writeln!(
                s,
                r#"{marker}<text x="{}" y="{}" font-size="12">{} (±3 se)</text>"#,
                x + 38.0,
                y + 4.0,
                escape(&series.label)
            );
            y += 18.0;
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render()?)
    }
}

pub fn reference_curves(cfg: &ExperimentConfig) -> Vec<Curve> {
    vec![
        Curve::sample("quantum calculation", "black", LineStyle::Solid, |phi| qm_coincidence_ratio(phi, cfg)),
        Curve::sample("classical calculation", "red", LineStyle::Dashed, |phi| {
            classical_coincidence_ratio(phi, cfg)
        }),
    ]
}

/// Collapse points and local-realistic squares over both reference curves.
pub fn figure1(collapse: &BatchResult, local: &BatchResult) -> Plot {
    Plot {
        title: format!("Collapse and local realistic models (F2 = {:.4})", collapse.f2),
        curves: reference_curves(&collapse.config),
        series: vec![
            Series::from_batch(collapse, "collapse model", "blue", Marker::Circle),
            Series::from_batch(local, "local realistic model", "darkgreen", Marker::Square),
        ],
    }
}

/// One batch of any model over both reference curves.
pub fn single(batch: &BatchResult) -> Plot {
    let marker = match batch.model {
        ModelKind::LocalRealistic => Marker::Square,
        _ => Marker::Circle,
    };
    Plot {
        title: format!("{} (F2 = {:.4})", batch.model, batch.f2),
        curves: reference_curves(&batch.config),
        series: vec![Series::from_batch(batch, batch.model.name(), "blue", marker)],
    }
}

/// Smeared-model points over both reference curves.
pub fn figure2(smeared: &BatchResult) -> Plot {
    let sigma = smeared.model.sigma().unwrap_or(0.0);
    Plot {
        title: format!("Smeared polarization model (σ = {sigma:.4} rad, F2 = {:.4})", smeared.f2),
        curves: reference_curves(&smeared.config),
        series: vec![Series::from_batch(smeared, "smeared model", "blue", Marker::Circle)],
    }
}

//! Deterministic CSV, JSON and SVG emission with atomic writes.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Header row plus comma-separated records.
pub struct Csv {
    text: String,
    columns: usize,
}

pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}
impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::S(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: header.join(",") + "\n", columns: header.len() }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        let parts: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::F(x) => fmt_f64(x),
                Cell::I(x) => x.to_string(),
                Cell::U(x) => x.to_string(),
                Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                Cell::S(s) => s,
            })
            .collect();
        self.text.push_str(&parts.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[macro_export]
macro_rules! cells {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}

struct SciFormatter(CompactFormatter);

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

/// JSON with every float at 17 significant digits, newline-terminated.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter(CompactFormatter));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Common envelope of every JSON report.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema_version: u32,
    pub experiment: &'a str,
    pub group: &'a str,
    pub results: T,
}

pub enum Mark {
    /// Circle per point; the third coordinate scales the radius.
    Circles(Vec<(f64, f64, f64)>),
    Line(Vec<(f64, f64)>),
}

pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub mark: Mark,
}

#[derive(Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Labelled vertical reference lines.
    pub vlines: Vec<(f64, String)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    fn tx(&self, x: f64) -> Option<f64> {
        if self.log_x { (x > 0.0).then(|| x.log10()) } else { Some(x) }.filter(|v| v.is_finite())
    }

    fn ty(&self, y: f64) -> Option<f64> {
        if self.log_y { (y > 0.0).then(|| y.log10()) } else { Some(y) }.filter(|v| v.is_finite())
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for s in &self.series {
            let pts: Vec<(f64, f64)> = match &s.mark {
                Mark::Circles(p) => p.iter().map(|q| (q.0, q.1)).collect(),
                Mark::Line(p) => p.clone(),
            };
            for (x, y) in pts {
                if let (Some(a), Some(b)) = (self.tx(x), self.ty(y)) {
                    xs.push(a);
                    ys.push(b);
                }
            }
        }
        xs.extend(self.vlines.iter().filter_map(|v| self.tx(v.0)));
        let span = |v: &[f64]| -> (f64, f64) {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(&xs);
        let (y0, y1) = span(&ys);
        (x0, x1, y0, y1)
    }

    /// Deterministic SVG: fixed viewport, fixed number formatting, no timestamps.
    pub fn to_svg(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(s, r#"<path d="M{l:.2} {t:.2} L{l:.2} {b:.2} L{r:.2} {b:.2}" stroke="black" fill="none"/>"#);
        let label = |v: f64, log: bool| if log { format!("1e{v:.2}") } else { format!("{v:.4}") };
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let (xp, yp) = (px(xv), py(yv));
            let _ = writeln!(s, r#"<line x1="{xp:.2}" y1="{b:.2}" x2="{xp:.2}" y2="{:.2}" stroke="black"/>"#, b + 5.0);
            let _ = writeln!(
                s,
                r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                b + 18.0,
                label(xv, self.log_x)
            );
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{yp:.2}" x2="{l:.2}" y2="{yp:.2}" stroke="black"/>"#, l - 5.0);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                l - 8.0,
                yp + 4.0,
                label(yv, self.log_y)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for (x, name) in &self.vlines {
            if let Some(xv) = self.tx(*x) {
                let xp = px(xv);
                let _ = writeln!(
                    s,
                    r#"<line x1="{xp:.2}" y1="{t:.2}" x2="{xp:.2}" y2="{b:.2}" stroke="gray" stroke-dasharray="4 3"/>"#
                );
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, xp + 3.0, t + 12.0, escape(name));
            }
        }
        for (k, series) in self.series.iter().enumerate() {
            match &series.mark {
                Mark::Circles(pts) => {
                    for &(x, y, w) in pts {
                        if let (Some(a), Some(bv)) = (self.tx(x), self.ty(y)) {
                            let _ = writeln!(
                                s,
                                r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="{}" fill-opacity="0.6"/>"#,
                                px(a),
                                py(bv),
                                3.0 * w.max(0.5),
                                series.color
                            );
                        }
                    }
                }
                Mark::Line(pts) => {
                    let path: Vec<String> = pts
                        .iter()
                        .filter_map(|&(x, y)| Some((self.tx(x)?, self.ty(y)?)))
                        .map(|(a, bv)| format!("{:.2} {:.2}", px(a), py(bv)))
                        .collect();
                    if !path.is_empty() {
                        let _ = writeln!(
                            s,
                            r#"<path d="M{}" stroke="{}" fill="none" stroke-width="1.5"/>"#,
                            path.join(" L"),
                            series.color
                        );
                    }
                }
            }
            let ly = t + 14.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{}" text-anchor="end">{}</text>"#,
                r,
                ly,
                series.color,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

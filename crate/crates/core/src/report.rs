//! Sweep output: CSV tables and SVG heatmaps.
//!
//! CSV columns are `x_m,y_m,eps_theory_m,eps_mc_m,mc_stderr_m,degenerate_trials`,
//! rows ordered by y then x. Floats are written in shortest round-trip
//! scientific notation, failed values as `nan`.

use std::fmt::Write as _;
use std::io;

use crate::error::{Error, Result};
use crate::harness::{GridSweepResult, PointRecord};
use crate::linalg::Vec3;

pub const CSV_HEADER: [&str; 6] = [
    "x_m",
    "y_m",
    "eps_theory_m",
    "eps_mc_m",
    "mc_stderr_m",
    "degenerate_trials",
];

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub y: f64,
    pub eps_theory: f64,
    pub eps_mc: f64,
    pub mc_stderr: f64,
    pub degenerate_trials: usize,
}

impl From<&PointRecord> for SweepRow {
    fn from(r: &PointRecord) -> Self {
        Self {
            x: r.led.x,
            y: r.led.y,
            eps_theory: r.e_ps_theory,
            eps_mc: r.e_ps_mc,
            mc_stderr: r.mc_std_err,
            degenerate_trials: r.degenerate_trials,
        }
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER).map_err(io_err)?;
    for r in rows {
        w.write_record([
            format_float(r.x),
            format_float(r.y),
            format_float(r.eps_theory),
            format_float(r.eps_mc),
            format_float(r.mc_stderr),
            r.degenerate_trials.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn sweep_csv(result: &GridSweepResult) -> Result<String> {
    let rows: Vec<SweepRow> = result.records.iter().map(SweepRow::from).collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf)?;
    String::from_utf8(buf).map_err(io_err)
}

fn parse_field<T: std::str::FromStr>(s: &str, line: u64, col: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {col} value `{s}`")))
}

/// Reads a table in the format produced by [`write_csv`].
pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().map(str::trim).ne(CSV_HEADER) {
        return Err(Error::Parse(format!(
            "unexpected header `{}` (expected `{}`)",
            header.iter().collect::<Vec<_>>().join(","),
            CSV_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| parse_field::<f64>(&rec[i], line, CSV_HEADER[i]);
        let row = SweepRow {
            x: f(0)?,
            y: f(1)?,
            eps_theory: f(2)?,
            eps_mc: f(3)?,
            mc_stderr: f(4)?,
            degenerate_trials: parse_field(&rec[5], line, CSV_HEADER[5])?,
        };
        if !(row.x.is_finite() && row.y.is_finite()) {
            return Err(Error::Parse(format!("line {line}: coordinates must be finite")));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok(rows)
}

// viridis, sampled at 9 stops
const PALETTE: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (PALETTE.len() - 1) as f64;
    let i = (t.floor() as usize).min(PALETTE.len() - 2);
    let f = t - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (PALETTE[i][k] + f * (PALETTE[i + 1][k] - PALETTE[i][k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn unique_sorted(vals: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = vals.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    v
}

fn min_spacing(v: &[f64]) -> Option<f64> {
    v.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

const PANEL: f64 = 320.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const GAP: f64 = 40.0;
const BAR_W: f64 = 16.0;
const BAR_GAP: f64 = 60.0;

struct Axes {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    ext: [f64; 4],
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.ext[0]) / (self.ext[1] - self.ext[0]) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + (self.ext[3] - y) / (self.ext[3] - self.ext[2]) * self.h
    }
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    let pts: Vec<String> = (0..10)
        .map(|i| {
            let rad = if i % 2 == 0 { r } else { 0.45 * r };
            let a = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
            format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect();
    format!(
        "<polygon points=\"{}\" fill=\"#1f4fd8\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n",
        pts.join(" ")
    )
}

/// Heatmap of both error columns side by side on a shared colour scale.
/// `markers` are drawn as stars (estimator positions). Output depends only
/// on the inputs.
pub fn render_svg(rows: &[SweepRow], markers: &[Vec3]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let xs = unique_sorted(rows.iter().map(|r| r.x));
    let ys = unique_sorted(rows.iter().map(|r| r.y));
    let dx = min_spacing(&xs).or(min_spacing(&ys)).unwrap_or(1.0);
    let dy = min_spacing(&ys).unwrap_or(dx);
    let ext = [
        xs[0] - dx / 2.0,
        xs[xs.len() - 1] + dx / 2.0,
        ys[0] - dy / 2.0,
        ys[ys.len() - 1] + dy / 2.0,
    ];
    let aspect = (ext[3] - ext[2]) / (ext[1] - ext[0]);
    let (w, h) = if aspect <= 1.0 {
        (PANEL, PANEL * aspect.max(0.1))
    } else {
        (PANEL / aspect.min(10.0), PANEL)
    };

    let finite = rows
        .iter()
        .flat_map(|r| [r.eps_theory, r.eps_mc])
        .filter(|v| v.is_finite());
    let (vmin, vmax) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (vmin, vmax) = if vmin.is_finite() { (vmin, vmax) } else { (0.0, 1.0) };
    let norm = |v: f64| if vmax > vmin { (v - vmin) / (vmax - vmin) } else { 0.5 };

    let width = MARGIN_L + 2.0 * w + GAP + BAR_GAP + BAR_W + 70.0;
    let height = MARGIN_T + h + MARGIN_B;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>");

    type Column = fn(&SweepRow) -> f64;
    let panels: [(&str, Column); 2] = [
        ("theoretical e_ps (m)", |r| r.eps_theory),
        ("Monte Carlo e_ps (m)", |r| r.eps_mc),
    ];
    for (p, (title, value)) in panels.iter().enumerate() {
        let ax = Axes {
            x0: MARGIN_L + p as f64 * (w + GAP),
            y0: MARGIN_T,
            w,
            h,
            ext,
        };
        let _ = writeln!(s, "<g>");
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"13\">{title}</text>",
            ax.x0 + w / 2.0,
            MARGIN_T - 14.0
        );
        for r in rows {
            let v = value(r);
            let fill = if v.is_finite() {
                color(norm(v))
            } else {
                "#bbbbbb".into()
            };
            let (x0, x1) = (ax.px(r.x - dx / 2.0), ax.px(r.x + dx / 2.0));
            let (y0, y1) = (ax.py(r.y + dy / 2.0), ax.py(r.y - dy / 2.0));
            let _ = writeln!(
                s,
                "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\" stroke=\"{fill}\" stroke-width=\"0.5\"/>",
                x1 - x0,
                y1 - y0
            );
        }
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"#000000\"/>",
            ax.x0, ax.y0
        );
        for t in ticks(ext[0], ext[1]) {
            let x = ax.px(t);
            let yb = ax.y0 + h;
            let _ = writeln!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{yb:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#000000\"/>\n<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{t:.2}</text>",
                yb + 4.0,
                yb + 16.0
            );
        }
        for t in ticks(ext[2], ext[3]) {
            let y = ax.py(t);
            let _ = writeln!(
                s,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#000000\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{t:.2}</text>",
                ax.x0 - 4.0,
                ax.x0,
                ax.x0 - 6.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">x (m)</text>",
            ax.x0 + w / 2.0,
            ax.y0 + h + 36.0
        );
        let _ = writeln!(
            s,
            "<text x=\"{0:.2}\" y=\"{1:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 {0:.2} {1:.2})\">y (m)</text>",
            ax.x0 - 40.0,
            ax.y0 + h / 2.0
        );
        for m in markers {
            s.push_str(&star(ax.px(m.x), ax.py(m.y), 8.0));
        }
        let _ = writeln!(s, "</g>");
    }

    // colour bar
    let bx = MARGIN_L + 2.0 * w + GAP + BAR_GAP - 30.0;
    let steps = 64;
    for i in 0..steps {
        let t0 = i as f64 / steps as f64;
        let y = MARGIN_T + h * (1.0 - (i + 1) as f64 / steps as f64);
        let _ = writeln!(
            s,
            "<rect x=\"{bx:.2}\" y=\"{y:.2}\" width=\"{BAR_W:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            h / steps as f64 + 0.5,
            color(t0 + 0.5 / steps as f64)
        );
    }
    let _ = writeln!(
        s,
        "<rect x=\"{bx:.2}\" y=\"{MARGIN_T:.2}\" width=\"{BAR_W:.2}\" height=\"{h:.2}\" fill=\"none\" stroke=\"#000000\"/>"
    );
    for (frac, v) in [(0.0, vmin), (0.5, 0.5 * (vmin + vmax)), (1.0, vmax)] {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\">{v:.4}</text>",
            bx + BAR_W + 4.0,
            MARGIN_T + h * (1.0 - frac) + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

//! Rate-distortion points, the RD CSV schema and plot emission.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::{self, Read, Write};
use std::path::Path;

use super::fidelity::format_score;
use super::MetricsError;

pub const RD_HEADER: [&str; 7] = ["method", "metric", "bpp", "score", "qp", "ds", "dt"];

/// Metrics where a smaller value means better quality.
const LOWER_IS_BETTER: [&str; 5] = ["lpips", "dists", "fid", "fvd", "mse"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub bpp: f64,
    pub score: f64,
    pub qp: i32,
    pub ds: u32,
    pub dt: u32,
}

impl RdPoint {
    pub fn new(bpp: f64, score: f64) -> Self {
        Self {
            bpp,
            score,
            qp: 0,
            ds: 1,
            dt: 1,
        }
    }

    pub fn with_operating_point(mut self, qp: i32, ds: u32, dt: u32) -> Self {
        self.qp = qp;
        self.ds = ds;
        self.dt = dt;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    pub method: String,
    pub metric: String,
    pub higher_is_better: bool,
    /// Sorted by strictly increasing bpp.
    pub points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(
        method: impl Into<String>,
        metric: impl Into<String>,
        mut points: Vec<RdPoint>,
    ) -> Result<Self, MetricsError> {
        let method = method.into();
        let metric = metric.into();
        let label = format!("{method}/{metric}");
        for p in &points {
            if !(p.bpp.is_finite() && p.bpp > 0.0) {
                return Err(MetricsError::InvalidCurve {
                    curve: label,
                    reason: format!("bpp must be positive, got {}", p.bpp),
                });
            }
            if p.score.is_nan() {
                return Err(MetricsError::InvalidCurve {
                    curve: label,
                    reason: "score is NaN".into(),
                });
            }
        }
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        if let Some(w) = points.windows(2).find(|w| w[0].bpp == w[1].bpp) {
            return Err(MetricsError::InvalidCurve {
                curve: label,
                reason: format!("duplicate bpp {}", w[0].bpp),
            });
        }
        let higher_is_better = !LOWER_IS_BETTER.contains(&metric.to_ascii_lowercase().as_str());
        Ok(Self {
            method,
            metric,
            higher_is_better,
            points,
        })
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.method, self.metric)
    }
}

fn csv_err(line: u64, reason: impl Into<String>) -> MetricsError {
    MetricsError::Csv {
        line,
        reason: reason.into(),
    }
}

/// Parses an RD CSV into one curve per `(method, metric)`, in order of first appearance.
pub fn read_rd_csv(reader: impl Read) -> Result<Vec<RdCurve>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    if headers.iter().ne(RD_HEADER.iter().copied()) {
        return Err(csv_err(1, format!("expected header {}", RD_HEADER.join(","))));
    }
    let mut groups: Vec<((String, String), Vec<RdPoint>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, MetricsError> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| csv_err(line, format!("{} is not a number: {:?}", RD_HEADER[i], &rec[i])))
        };
        let int = |i: usize| -> Result<i64, MetricsError> {
            rec[i]
                .parse::<i64>()
                .map_err(|_| csv_err(line, format!("{} is not an integer: {:?}", RD_HEADER[i], &rec[i])))
        };
        let bpp = num(2)?;
        if !(bpp.is_finite() && bpp > 0.0) {
            return Err(csv_err(line, format!("bpp must be positive, got {bpp}")));
        }
        let score = num(3)?;
        let (qp, ds, dt) = (int(4)?, int(5)?, int(6)?);
        let qp = i32::try_from(qp).map_err(|_| csv_err(line, "qp out of range"))?;
        let ds = u32::try_from(ds).map_err(|_| csv_err(line, "ds out of range"))?;
        let dt = u32::try_from(dt).map_err(|_| csv_err(line, "dt out of range"))?;
        let key = (rec[0].to_string(), rec[1].to_string());
        let point = RdPoint::new(bpp, score).with_operating_point(qp, ds, dt);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push(point),
            None => groups.push((key, vec![point])),
        }
    }
    groups
        .into_iter()
        .map(|((method, metric), pts)| RdCurve::new(method, metric, pts))
        .collect()
}

/// Reads externally computed scores (e.g. perceptual metrics) from an RD CSV file.
pub fn ingest_scores(path: impl AsRef<Path>) -> Result<Vec<RdCurve>, MetricsError> {
    read_rd_csv(fs::File::open(path)?)
}

fn write_rows(curves: &[RdCurve], out: &mut impl Write) -> io::Result<()> {
    for c in curves {
        for p in &c.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.method,
                c.metric,
                p.bpp,
                format_score(p.score),
                p.qp,
                p.ds,
                p.dt
            )?;
        }
    }
    Ok(())
}

pub fn write_rd_csv(curves: &[RdCurve], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{}", RD_HEADER.join(","))?;
    write_rows(curves, &mut out)
}

/// Appends rows to an RD CSV, writing the header first if the file is new or empty.
pub fn append_rd_rows(path: impl AsRef<Path>, curves: &[RdCurve]) -> io::Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{}", RD_HEADER.join(","))?;
    }
    write_rows(curves, &mut f)
}

pub fn write_bdrate_report(rows: &[(String, String, f64)], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "method,metric,bdrate_percent")?;
    for (method, metric, bd) in rows {
        writeln!(out, "{method},{metric},{bd:.6}")?;
    }
    Ok(())
}

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static SVG with a log10 rate axis and one polyline per curve.
pub fn render_svg(curves: &[RdCurve]) -> String {
    let finite: Vec<(f64, f64)> = curves
        .iter()
        .flat_map(|c| c.points.iter())
        .filter(|p| p.score.is_finite())
        .map(|p| (p.bpp.log10(), p.score))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = finite.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if finite.is_empty() {
        (x0, x1, y0, y1) = (-4.0, -1.0, 0.0, 1.0);
    }
    x0 = x0.floor();
    x1 = x1.ceil().max(x0 + 1.0);
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = (y1 - y0) * 0.05;
    (y0, y1) = (y0 - pad, y1 + pad);
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let metric_names: Vec<&str> = {
        let mut m: Vec<&str> = curves.iter().map(|c| c.metric.as_str()).collect();
        m.dedup();
        m
    };
    let mut s = String::new();
    // Writing to a String cannot fail.
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let mut decade = x0 as i32;
    while decade as f64 <= x1 {
        let x = sx(decade as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ccc"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{decade}</text>"##,
            MARGIN_T,
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 16.0
        );
        decade += 1;
    }
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#eee"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.4}</text>"##,
            MARGIN_L + plot_w,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">bits per pixel (log scale)</text>"#,
        MARGIN_L + plot_w / 2.0,
        SVG_H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(&metric_names.join(" / "))
    );
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .filter(|p| p.score.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.bpp.log10()), sy(p.score)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_L + plot_w + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(&c.label())
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the points CSV and the SVG plot.
pub fn emit_rd(curves: &[RdCurve], csv_path: impl AsRef<Path>, svg_path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let mut csv = Vec::new();
    write_rd_csv(curves, &mut csv)?;
    fs::write(csv_path, csv)?;
    fs::write(svg_path, render_svg(curves))?;
    Ok(())
}

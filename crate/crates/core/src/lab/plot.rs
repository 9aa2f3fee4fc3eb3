//! Static SVG line charts from CSV files.
//!
//! The first column is the x axis; every other column whose cells all parse
//! as numbers becomes a series. Non-numeric columns are skipped.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("no numeric data to plot")]
    Empty,
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub title: String,
    pub width: u32,
    pub height: u32,
    /// Draw step functions instead of straight segments.
    pub stairs: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            title: String::new(),
            width: 800,
            height: 480,
            stairs: false,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

struct Series {
    name: String,
    values: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e9 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

/// Renders CSV text as an SVG document.
pub fn csv_to_svg(csv_text: &str, opts: &PlotOptions) -> Result<String, PlotError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(
                rec.get(k)
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite()),
            );
        }
    }
    if headers.is_empty() || cols[0].is_empty() || cols[0].iter().any(Option::is_none) {
        return Err(PlotError::Empty);
    }
    let xs: Vec<f64> = cols[0].iter().map(|v| v.expect("checked above")).collect();
    let series: Vec<Series> = headers
        .iter()
        .zip(&cols)
        .skip(1)
        .filter(|(_, c)| c.iter().all(Option::is_some))
        .map(|(h, c)| Series {
            name: h.clone(),
            values: c.iter().map(|v| v.expect("filtered")).collect(),
        })
        .collect();
    if series.is_empty() {
        return Err(PlotError::Empty);
    }
    Ok(render(&headers[0], &xs, &series, opts))
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    }
}

fn render(x_label: &str, xs: &[f64], series: &[Series], opts: &PlotOptions) -> String {
    let (w, h) = (opts.width as f64, opts.height as f64);
    let pw = w - MARGIN_LEFT - MARGIN_RIGHT;
    let ph = h - MARGIN_TOP - MARGIN_BOTTOM;
    let (x0, x1) = bounds(xs.iter().copied());
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.values.iter().copied()));
    let (y0, y1) = (y0.min(0.0), y1);
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        opts.width, opts.height, opts.width, opts.height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !opts.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            escape(&opts.title)
        );
    }
    // axes
    let _ = writeln!(
        svg,
        r#"<path d="M{l:.1},{t:.1} V{b:.1} H{r:.1}" fill="none" stroke="black"/>"#,
        l = MARGIN_LEFT,
        t = MARGIN_TOP,
        b = MARGIN_TOP + ph,
        r = MARGIN_LEFT + pw
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(xv),
            MARGIN_TOP + ph + 16.0,
            fmt_num(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            sy(yv) + 4.0,
            fmt_num(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        h - 12.0,
        escape(x_label)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut pts = String::new();
        for (i, (&x, &y)) in xs.iter().zip(&s.values).enumerate() {
            if opts.stairs && i > 0 {
                let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(s.values[i - 1]));
            }
            let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = MARGIN_TOP + 16.0 * k as f64;
        let lx = MARGIN_LEFT + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

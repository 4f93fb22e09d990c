//! Figure panels: density, likelihood ratio, hazard and `g(t; v)` at n = 3.

use std::fmt::Write as _;
use std::path::Path;

use tourney_core::dist::catalog;
use tourney_core::equilibrium::total_marginal_benefit;
use tourney_core::{NoiseDistribution, PrizeSchedule};

use crate::CliError;

pub const PLAYERS: usize = 3;

/// One panel: a shared abscissa and named series.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub comment: Option<String>,
    pub columns: Vec<String>,
    pub t: Vec<f64>,
    pub series: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut out = Vec::new();
        if let Some(c) = &self.comment {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = vec!["t".to_string()];
            header.extend(self.columns.iter().cloned());
            w.write_record(&header).map_err(io)?;
            for (i, t) in self.t.iter().enumerate() {
                let mut row = vec![t.to_string()];
                row.extend(self.series.iter().map(|s| s[i].to_string()));
                w.write_record(&row).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        }
        String::from_utf8(out).map_err(|e| CliError::Io(e.to_string()))
    }

    /// Reads back what `to_csv` wrote.
    pub fn from_csv(name: &str, text: &str) -> Result<Self, CliError> {
        let mut comment = None;
        let mut body = text;
        if let Some(rest) = text.strip_prefix("# ") {
            let end = rest.find('\n').unwrap_or(rest.len());
            comment = Some(rest[..end].to_string());
            body = &rest[(end + 1).min(rest.len())..];
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let header = r.headers().map_err(io)?.clone();
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut t = Vec::new();
        let mut series = vec![Vec::new(); columns.len()];
        for rec in r.records() {
            let rec = rec.map_err(io)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| CliError::Io(e.to_string())))
                .collect::<Result<_, _>>()?;
            t.push(vals[0]);
            for (s, v) in series.iter_mut().zip(&vals[1..]) {
                s.push(*v);
            }
        }
        Ok(Self {
            name: name.to_string(),
            comment,
            columns,
            t,
            series,
        })
    }
}

fn io(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

const PALETTE: [&str; 9] = [
    "#c0392b", "#27ae60", "#2471a3", "#e67e22", "#8e44ad", "#16a085", "#7f8c8d", "#d4ac0d", "#2c3e50",
];

/// Line plot of every series in the table.
pub fn render_svg(table: &Table) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 150.0, 30.0, 40.0);
    let finite = |v: &f64| v.is_finite();
    let xmin = table.t.first().copied().unwrap_or(0.0);
    let xmax = table.t.last().copied().unwrap_or(1.0);
    let mut ymin = table.series.iter().flatten().copied().filter(finite).fold(f64::INFINITY, f64::min);
    let mut ymax = table
        .series
        .iter()
        .flatten()
        .copied()
        .filter(finite)
        .fold(f64::NEG_INFINITY, f64::max);
    if !ymin.is_finite() {
        (ymin, ymax) = (0.0, 1.0);
    }
    ymin = ymin.min(0.0);
    if ymax <= ymin {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin).max(1e-300) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - ymin) / (ymax - ymin) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="18" font-size="13">{}</text>"#, table.name);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for k in 0..=4 {
        let fx = xmin + (xmax - xmin) * k as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            sx(fx),
            h - bottom + 15.0,
            fx
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            left - 5.0,
            sy(fy) + 4.0,
            fy
        );
    }
    for (i, (col, ys)) in table.columns.iter().zip(&table.series).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (x, y) in table.t.iter().zip(ys) {
            if y.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(*x), sy(y.min(ymax)));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.trim_end()
        );
        let ly = top + 15.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            w - right + 10.0,
            w - right + 30.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{col}</text>"#, w - right + 35.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

fn lambda(d: &NoiseDistribution, x: f64) -> f64 {
    d.likelihood_ratio(x).unwrap_or(f64::NAN)
}

fn hazard(d: &NoiseDistribution, x: f64) -> f64 {
    d.hazard(x).unwrap_or(f64::NAN)
}

fn schedules() -> [(&'static str, PrizeSchedule); 3] {
    [
        ("wta", PrizeSchedule::winner_take_all(PLAYERS)),
        ("two", PrizeSchedule::top_equal(2, PLAYERS)),
        ("eps", PrizeSchedule::equal_sharing(PLAYERS)),
    ]
}

fn panels(
    prefix: &str,
    dists: &[(&str, NoiseDistribution)],
    t: Vec<f64>,
    comment: Option<String>,
) -> Result<Vec<Table>, CliError> {
    let names: Vec<String> = dists.iter().map(|(n, _)| n.to_string()).collect();
    let simple = |kind: &str, f: &dyn Fn(&NoiseDistribution, f64) -> f64| Table {
        name: format!("{prefix}_{kind}"),
        comment: comment.clone(),
        columns: names.clone(),
        t: t.clone(),
        series: dists.iter().map(|(_, d)| t.iter().map(|&x| f(d, x)).collect()).collect(),
    };
    let density = simple("density", &|d, x| d.pdf(x));
    let lr = simple("lambda", &lambda);
    let hz = simple("hazard", &hazard);
    let mut columns = Vec::new();
    let mut series = Vec::new();
    for (name, d) in dists {
        for (label, v) in schedules() {
            columns.push(if dists.len() == 1 {
                label.to_string()
            } else {
                format!("{name}_{label}")
            });
            series.push(
                t.iter()
                    .map(|&x| total_marginal_benefit(d, &v, x))
                    .collect::<Result<Vec<f64>, _>>()?,
            );
        }
    }
    let g = Table {
        name: format!("{prefix}_g"),
        comment,
        columns,
        t,
        series,
    };
    Ok(vec![density, lr, hz, g])
}

/// Tables for `fig1` (three trimodal densities) or `fig2` (decreasing hazard).
pub fn build(which: &str, points: usize) -> Result<Vec<Table>, CliError> {
    if points < 2 {
        return Err(CliError::Config("need at least two grid points".into()));
    }
    match which {
        "fig1" => {
            let dists = [
                ("red", catalog::trimodal_red()),
                ("green", catalog::trimodal_green()),
                ("blue", catalog::trimodal_blue()),
            ];
            let comment = format!(
                "normalization_factor red={} green={} blue={}",
                dists[0].1.normalization_factor(),
                dists[1].1.normalization_factor(),
                dists[2].1.normalization_factor()
            );
            let (lo, hi) = dists[0].1.support();
            panels("fig1", &dists, grid(lo, hi, points), Some(comment))
        }
        "fig2" => {
            let d = catalog::erf_hazard();
            let comment = format!("normalization_factor erf_hazard={}", d.normalization_factor());
            panels("fig2", &[("erf_hazard", d)], grid(0.0, 3.0, points), Some(comment))
        }
        other => Err(CliError::Config(format!("unknown figure `{other}`; use fig1 or fig2"))),
    }
}

/// Writes `<name>.csv` and `<name>.svg` for every panel; the SVG is drawn
/// from the CSV text.
pub fn write(tables: &[Table], dir: &Path) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for t in tables {
        let csv_text = t.to_csv()?;
        let svg = render_svg(&Table::from_csv(&t.name, &csv_text)?);
        for (ext, body) in [("csv", &csv_text), ("svg", &svg)] {
            let path = dir.join(format!("{}.{ext}", t.name));
            std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            files.push(path.display().to_string());
        }
    }
    Ok(files)
}

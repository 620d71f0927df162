//! SVG line plots of the figure CSVs. Purely presentational: the values
//! are drawn exactly as they appear in the files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub struct Series {
    pub label: String,
    pub color: &'static str,
    /// SVG stroke-dasharray; `None` draws solid.
    pub dash: Option<&'static str>,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        mag
    } else if norm < 3.5 {
        2.0 * mag
    } else if norm < 7.5 {
        5.0 * mag
    } else {
        10.0 * mag
    };
    let mut ticks = Vec::new();
    let mut t = (lo / step).ceil() * step;
    while t <= hi + step * 1e-9 {
        ticks.push(t);
        t += step;
    }
    ticks
}

/// Render a line plot with the axes fit to the data.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &x in &s.xs {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
        }
        for &y in &s.ys {
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
    }
    if !ymin.is_finite() {
        ymin = 0.0;
        ymax = 1.0;
    }
    if (ymax - ymin).abs() < 1e-12 {
        ymin -= 0.5;
        ymax += 0.5;
    }
    let pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    let px = |x: f64| MARGIN_L + (x - xmin) / (xmax - xmin).max(1e-300) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - ymin) / (ymax - ymin) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        WIDTH / 2.0
    ));

    for t in nice_ticks(xmin, xmax) {
        let x = px(t);
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{0:.1}\" x2=\"{x:.1}\" y2=\"{1:.1}\" stroke=\"#ddd\"/>\n",
            MARGIN_T,
            HEIGHT - MARGIN_B
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{t:.4}</text>\n",
            HEIGHT - MARGIN_B + 18.0
        ));
    }
    for t in nice_ticks(ymin, ymax) {
        let y = py(t);
        svg.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{y:.1}\" x2=\"{1:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            MARGIN_L,
            WIDTH - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{t:.4}</text>\n",
            MARGIN_L - 6.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"black\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\">{xlabel}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"13\" transform=\"rotate(-90 18 {})\">{ylabel}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));

    for (i, s) in series.iter().enumerate() {
        let mut points = String::new();
        for (x, y) in s.xs.iter().zip(&s.ys) {
            points.push_str(&format!("{:.2},{:.2} ", px(*x), py(*y)));
        }
        let dash = s
            .dash
            .map(|d| format!(" stroke-dasharray=\"{d}\""))
            .unwrap_or_default();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"{dash} points=\"{points}\"/>\n",
            s.color
        ));
        let ly = MARGIN_T + 16.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{2}\" \
             stroke-width=\"1.6\"{dash}/>\n",
            WIDTH - MARGIN_R - 150.0,
            WIDTH - MARGIN_R - 110.0,
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            WIDTH - MARGIN_R - 104.0,
            ly + 4.0,
            s.label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

struct Csv {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn read_csv(path: &Path) -> Result<Csv> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let mut columns = vec![Vec::new(); header.len()];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        for (i, field) in line.split(',').enumerate() {
            if i >= columns.len() {
                bail!("row wider than header in {}", path.display());
            }
            columns[i].push(field.parse::<f64>().with_context(|| {
                format!("parsing field '{field}' in {}", path.display())
            })?);
        }
    }
    Ok(Csv { header, columns })
}

impl Csv {
    fn column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let idx = self
            .header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("column '{name}' missing from {}", path.display()))?;
        Ok(self.columns[idx].clone())
    }
}

fn figure_plot(dir: &Path, csv_name: &str, title: &str, ylabel: &str) -> Result<Option<PathBuf>> {
    let path = dir.join(csv_name);
    if !path.exists() {
        return Ok(None);
    }
    let csv = read_csv(&path)?;
    let t = csv.column("t", &path)?;
    let series = vec![
        Series {
            label: "truth".into(),
            color: "#cc0000",
            dash: None,
            xs: t.clone(),
            ys: csv.column("truth_mean", &path)?,
        },
        Series {
            label: "sme".into(),
            color: "#0044cc",
            dash: Some("8 3 2 3"),
            xs: t.clone(),
            ys: csv.column("sme_mean", &path)?,
        },
        Series {
            label: "qekf".into(),
            color: "#008822",
            dash: Some("6 4"),
            xs: t,
            ys: csv.column("qekf_mean", &path)?,
        },
    ];
    let svg = line_plot(title, "t", ylabel, &series);
    let out = path.with_extension("svg");
    fs::write(&out, svg)?;
    Ok(Some(out))
}

/// Render every figure CSV found in `dir` to an SVG next to it.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let figures = [
        ("fig4_sigma_x.csv", "sigma_x estimates", "<sigma_x>"),
        ("fig5_sigma_y.csv", "sigma_y estimates", "<sigma_y>"),
        ("fig6_sigma_z.csv", "sigma_z estimates", "<sigma_z>"),
        ("fig7_q.csv", "disturbance estimates", "q"),
    ];
    for (csv_name, title, ylabel) in figures {
        if let Some(path) = figure_plot(dir, csv_name, title, ylabel)? {
            written.push(path);
        }
    }
    let timing = dir.join("fig8_timing.csv");
    if timing.exists() {
        let csv = read_csv(&timing)?;
        let n = csv.column("n_prime", &timing)?;
        let series = vec![
            Series {
                label: "sme".into(),
                color: "#cc0000",
                dash: None,
                xs: n.clone(),
                ys: csv.column("sme_seconds", &timing)?,
            },
            Series {
                label: "qekf".into(),
                color: "#008822",
                dash: Some("8 3 2 3"),
                xs: n,
                ys: csv.column("qekf_seconds", &timing)?,
            },
        ];
        let svg = line_plot("filter cost vs cavity dimension", "n_prime", "seconds", &series);
        let out = timing.with_extension("svg");
        fs::write(&out, svg)?;
        written.push(out);
    }
    if written.is_empty() {
        bail!("no figure CSVs found in {}", dir.display());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_renders_polylines() {
        let s = Series {
            label: "a".into(),
            color: "#cc0000",
            dash: None,
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![0.0, 1.0, 0.5],
        };
        let svg = line_plot("test", "x", "y", &[s]);
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn emit_plots_requires_columns() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("fig7_q.csv"), "t,bogus\n0,1\n").unwrap();
        assert!(emit_plots(dir.path()).is_err());
    }
}

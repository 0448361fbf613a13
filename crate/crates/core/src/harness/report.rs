//! Result tables (CSV) and reward-curve charts (hand-emitted SVG, no
//! graphics dependency).

use crate::{Error, Result};

/// One row of the detection-delay results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub p: usize,
    pub m: usize,
    pub delta: f64,
    pub sigma: f64,
    pub mean_add: f64,
    pub stderr: f64,
    pub false_alarm_rate: f64,
    pub seed_count: usize,
}

pub const RESULTS_HEADER: &str =
    "method,p,m,delta,sigma,mean_add,stderr,false_alarm_rate,seed_count";

pub fn format_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.p,
            r.m,
            r.delta,
            r.sigma,
            r.mean_add,
            r.stderr,
            r.false_alarm_rate,
            r.seed_count
        ));
    }
    out
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { row: 1, col: 1, msg: "empty results file".into() })?;
    if header.trim() != RESULTS_HEADER {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Parse {
                row: idx + 1,
                col: fields.len(),
                msg: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse_f = |col: usize| -> Result<f64> {
            fields[col].trim().parse().map_err(|_| Error::Parse {
                row: idx + 1,
                col: col + 1,
                msg: format!("bad number {:?}", fields[col]),
            })
        };
        let parse_u = |col: usize| -> Result<usize> {
            fields[col].trim().parse().map_err(|_| Error::Parse {
                row: idx + 1,
                col: col + 1,
                msg: format!("bad count {:?}", fields[col]),
            })
        };
        rows.push(ResultRow {
            method: fields[0].trim().to_string(),
            p: parse_u(1)?,
            m: parse_u(2)?,
            delta: parse_f(3)?,
            sigma: parse_f(4)?,
            mean_add: parse_f(5)?,
            stderr: parse_f(6)?,
            false_alarm_rate: parse_f(7)?,
            seed_count: parse_u(8)?,
        });
    }
    Ok(rows)
}

/// Reward-curve CSV: `episode,<label1>,<label2>,...`.
pub fn format_curves_csv(labels: &[String], curves: &[Vec<f64>]) -> String {
    let mut out = String::from("episode");
    for label in labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    let len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    for t in 0..len {
        out.push_str(&format!("{}", t + 1));
        for curve in curves {
            out.push(',');
            if let Some(v) = curve.get(t) {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    out
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 500.0;
const MARGIN: f64 = 60.0;
const TICKS: usize = 5;
const SERIES_COLORS: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// Line chart with one polyline per series in a fixed 800x500 viewbox,
/// 5 ticks per axis.
pub fn svg_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<f64>)],
) -> String {
    let n = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, s) in series {
        for &v in s {
            y_min = y_min.min(v);
            y_max = y_max.max(v);
        }
    }
    if !y_min.is_finite() || !y_max.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
    }
    let x_max = n.max(2) as f64;
    let plot_w = SVG_W - 2.0 * MARGIN;
    let plot_h = SVG_H - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - 1.0) / (x_max - 1.0) * plot_w;
    let sy = |y: f64| SVG_H - MARGIN - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        SVG_W / 2.0,
        xml_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        SVG_H - MARGIN,
        SVG_W - MARGIN
    ));
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{}\" stroke=\"black\"/>\n",
        SVG_H - MARGIN
    ));
    // ticks
    for i in 0..TICKS {
        let frac = i as f64 / (TICKS - 1) as f64;
        let xv = 1.0 + frac * (x_max - 1.0);
        let x = sx(xv);
        svg.push_str(&format!(
            "  <line x1=\"{x}\" y1=\"{0}\" x2=\"{x}\" y2=\"{1}\" stroke=\"black\"/>\n",
            SVG_H - MARGIN,
            SVG_H - MARGIN + 6.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            SVG_H - MARGIN + 20.0,
            fmt_tick(xv.round())
        ));
        let yv = y_min + frac * (y_max - y_min);
        let y = sy(yv);
        svg.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{y}\" x2=\"{MARGIN}\" y2=\"{y}\" stroke=\"black\"/>\n",
            MARGIN - 6.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            MARGIN - 10.0,
            y + 4.0,
            fmt_tick(yv)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        SVG_W / 2.0,
        SVG_H - 12.0,
        xml_escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 18 {0})\">{1}</text>\n",
        SVG_H / 2.0,
        xml_escape(y_label)
    ));
    // series
    for (idx, (label, values)) in series.iter().enumerate() {
        let color = SERIES_COLORS[idx % SERIES_COLORS.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(t, &v)| format!("{:.2},{:.2}", sx((t + 1) as f64), sy(v)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = MARGIN + 18.0 * idx as f64;
        svg.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            SVG_W - MARGIN - 160.0,
            SVG_W - MARGIN - 130.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
            SVG_W - MARGIN - 124.0,
            ly + 4.0,
            xml_escape(label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

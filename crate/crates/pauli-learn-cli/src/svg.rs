//! Minimal static SVG renderers for decay curves, estimate bars, and the
//! feasibility region. Data display only, no interactivity.

use pauli_learn::fit::FeasibleRegion;
use pauli_learn::sim::CbDataset;

const W: f64 = 760.0;
const H: f64 = 460.0;
const MARGIN: f64 = 60.0;

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"11\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        title
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ly}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"14\" y=\"{cy}\" transform=\"rotate(-90 14 {cy})\" text-anchor=\"middle\">{y_label}</text>\n",
        m = MARGIN,
        t = MARGIN / 2.0,
        b = H - MARGIN,
        r = W - MARGIN / 2.0,
        cx = W / 2.0,
        ly = H - 18.0,
        cy = H / 2.0,
    )
}

struct Scale {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Scale {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0).max(1e-300) * (W - 1.5 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        (H - MARGIN) - (v - self.y0) / (self.y1 - self.y0).max(1e-300) * (H - 1.5 * MARGIN)
    }
}

const COLORS: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];

/// Per-run mean decay curves over depth.
pub fn decay_chart(dataset: &CbDataset) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for run in &dataset.runs {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for row in &run.rows {
            match pts.iter_mut().find(|(x, _)| *x == row.x) {
                Some((_, y)) => *y += row.mean,
                None => pts.push((row.x, row.mean)),
            }
        }
        let per_x = run.rows.len() as f64 / pts.len().max(1) as f64;
        for p in &mut pts {
            p.1 /= per_x;
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        series.push((run.meta.run_id.clone(), pts));
    }
    let xmax = series
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.0))
        .fold(1.0f64, f64::max);
    let scale = Scale { x0: 0.0, x1: xmax, y0: -0.05, y1: 1.05 };
    let mut out = header("cycle benchmarking decays");
    out.push_str(&axes("depth", "sign-corrected mean"));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", scale.x(x), scale.y(y))).collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>\n",
            path.join(" ")
        ));
        if i < 24 {
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>\n",
                W - MARGIN / 2.0 - 150.0,
                MARGIN / 2.0 + 12.0 * i as f64,
                name
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Estimates with error bars.
pub fn bar_chart(labels: &[String], values: &[f64], sigmas: &[f64]) -> String {
    let n = labels.len().max(1);
    let lo = values
        .iter()
        .zip(sigmas)
        .map(|(v, s)| v - 3.0 * s)
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
        - 0.01;
    let scale = Scale { x0: 0.0, x1: n as f64, y0: lo.min(0.9), y1: 1.01 };
    let mut out = header("learnable fidelity estimates");
    out.push_str(&axes("basis functional", "lambda"));
    let bw = (W - 1.5 * MARGIN) / n as f64 * 0.6;
    for (i, ((label, &v), &s)) in labels.iter().zip(values).zip(sigmas).enumerate() {
        let xc = scale.x(i as f64 + 0.5);
        let y = scale.y(v);
        let ybase = scale.y(scale.y0);
        out.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#1f77b4\" opacity=\"0.7\"/>\n",
            xc - bw / 2.0,
            y,
            bw,
            (ybase - y).max(0.0)
        ));
        let (e0, e1) = (scale.y(v - s), scale.y(v + s));
        out.push_str(&format!(
            "<line x1=\"{xc:.1}\" y1=\"{e0:.1}\" x2=\"{xc:.1}\" y2=\"{e1:.1}\" stroke=\"black\"/>\n"
        ));
        out.push_str(&format!(
            "<text x=\"{xc:.1}\" y=\"{:.1}\" transform=\"rotate(-60 {xc:.1} {:.1})\" text-anchor=\"end\" font-size=\"9\">{label}</text>\n",
            H - MARGIN + 12.0,
            H - MARGIN + 12.0,
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Feasible region boundary polygon in the reporting coordinates.
pub fn region_chart(region: &FeasibleRegion) -> String {
    let (xl, yl) = match region.coords.len() {
        2 => (
            format!("lambda_{}", region.coords[0].pauli),
            format!("lambda_{}", region.coords[1].pauli),
        ),
        _ => ("gauge parameter".to_string(), String::new()),
    };
    let mut out = header("feasible region of the unlearnable degrees of freedom");
    out.push_str(&axes(&xl, &yl));
    if region.rows.is_empty() {
        out.push_str("<text x=\"300\" y=\"200\">empty region</text>\n</svg>\n");
        return out;
    }
    let x_min = region.rows.iter().map(|r| r.lo).fold(f64::INFINITY, f64::min);
    let x_max = region.rows.iter().map(|r| r.hi).fold(f64::NEG_INFINITY, f64::max);
    let y_min = region.rows.first().map(|r| r.y).unwrap_or(0.0);
    let y_max = region.rows.last().map(|r| r.y).unwrap_or(1.0);
    let pad_x = (x_max - x_min).max(1e-6) * 0.15;
    let pad_y = (y_max - y_min).max(1e-6) * 0.15;
    let scale =
        Scale { x0: x_min - pad_x, x1: x_max + pad_x, y0: y_min - pad_y, y1: y_max + pad_y };
    let mut pts: Vec<String> = Vec::new();
    for row in &region.rows {
        pts.push(format!("{:.1},{:.1}", scale.x(row.lo), scale.y(row.y)));
    }
    for row in region.rows.iter().rev() {
        pts.push(format!("{:.1},{:.1}", scale.x(row.hi), scale.y(row.y)));
    }
    out.push_str(&format!(
        "<polygon points=\"{}\" fill=\"#1f77b4\" opacity=\"0.5\" stroke=\"#1f77b4\"/>\n",
        pts.join(" ")
    ));
    out.push_str("</svg>\n");
    out
}

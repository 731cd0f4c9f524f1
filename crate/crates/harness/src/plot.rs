//! Deterministic SVG rendering of distance-over-time summaries. The output
//! is plain generated markup with no timestamps or randomness, so identical
//! inputs produce byte-identical files.

use rendezvous_core::Error;

use crate::metrics::SummaryRow;

pub struct Curve {
    pub label: String,
    pub rows: Vec<SummaryRow>,
}

/// Parses a `step,mean_dist,std_dist` summary produced by an evaluation.
pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>, Error> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if idx == 0 {
            if line.trim() != "step,mean_dist,std_dist" {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected summary header, got '{line}'"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let step = fields[0].trim().parse::<usize>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad step '{}': {e}", fields[0]),
        })?;
        let mean_dist = fields[1].trim().parse::<f64>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad mean_dist '{}': {e}", fields[1]),
        })?;
        let std_dist = fields[2].trim().parse::<f64>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad std_dist '{}': {e}", fields[2]),
        })?;
        rows.push(SummaryRow {
            step,
            mean_dist,
            std_dist,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "summary holds no data rows".into(),
        });
    }
    Ok(rows)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders mean curves with a mean +/- std band per summary.
pub fn render_svg(curves: &[Curve]) -> Result<String, Error> {
    if curves.is_empty() {
        return Err(Error::InvalidConfig("nothing to plot".into()));
    }
    let x_max = curves
        .iter()
        .flat_map(|c| c.rows.iter().map(|r| r.step))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let y_peak = curves
        .iter()
        .flat_map(|c| c.rows.iter().map(|r| r.mean_dist + r.std_dist))
        .fold(0.0f64, f64::max);
    let y_max = (y_peak.ceil()).max(1.0);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |step: f64| MARGIN_LEFT + step / x_max * plot_w;
    let sy = |d: f64| MARGIN_TOP + (1.0 - (d.clamp(0.0, y_max)) / y_max) * plot_h;

    let mut svg = String::with_capacity(16 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // Grid and tick labels.
    for i in 0..=5 {
        let frac = i as f64 / 5.0;
        let x = MARGIN_LEFT + frac * plot_w;
        let y = MARGIN_TOP + plot_h - frac * plot_h;
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            "  <line x1=\"{MARGIN_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" \
             fill=\"#333333\">{:.0}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            frac * x_max
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\" \
             fill=\"#333333\">{:.1}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            frac * y_max
        ));
    }

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" \
         stroke=\"#333333\" stroke-width=\"1.5\"/>\n",
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.2}\" \
         stroke=\"#333333\" stroke-width=\"1.5\"/>\n",
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" \
         fill=\"#111111\">step</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" \
         fill=\"#111111\" transform=\"rotate(-90 18 {:.2})\">inter-agent distance (m)</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    for (k, curve) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut band = String::new();
        for r in &curve.rows {
            band.push_str(&format!(
                "{:.2},{:.2} ",
                sx(r.step as f64),
                sy(r.mean_dist + r.std_dist)
            ));
        }
        for r in curve.rows.iter().rev() {
            band.push_str(&format!(
                "{:.2},{:.2} ",
                sx(r.step as f64),
                sy(r.mean_dist - r.std_dist)
            ));
        }
        svg.push_str(&format!(
            "  <polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
            band.trim_end()
        ));
        let mut line = String::new();
        for r in &curve.rows {
            line.push_str(&format!("{:.2},{:.2} ", sx(r.step as f64), sy(r.mean_dist)));
        }
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            line.trim_end()
        ));

        let ly = MARGIN_TOP + 16.0 + k as f64 * 20.0;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        svg.push_str(&format!(
            "  <line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"#111111\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            escape(&curve.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

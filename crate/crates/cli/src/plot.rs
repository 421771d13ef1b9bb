//! SVG rendering of precision/recall curves.

use salfuse_core::EvalReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 56.0;

fn x_of(recall: f64) -> f64 {
    MARGIN_LEFT + recall * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn y_of(precision: f64) -> f64 {
    HEIGHT - MARGIN_BOTTOM - precision * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

/// A self-contained SVG line chart of the report's PR curve, recall on the
/// x axis and precision on the y axis.
pub fn pr_curve_svg(report: &EvalReport) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // gridlines and tick labels every 0.2
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let (x, y) = (x_of(v), y_of(v));
        svg.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#ddd\"/>\n",
            y_of(0.0),
            y_of(1.0)
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            x_of(0.0),
            x_of(1.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{v:.1}</text>\n",
            y_of(0.0) + 20.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.1}</text>\n",
            x_of(0.0) - 8.0,
            y + 4.0
        ));
    }

    // axes
    svg.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        x_of(0.0),
        y_of(0.0),
        x_of(1.0),
        y_of(0.0)
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        x_of(0.0),
        y_of(0.0),
        x_of(0.0),
        y_of(1.0)
    ));

    let points: Vec<String> = report
        .pr_curve
        .iter()
        .map(|p| format!("{:.2},{:.2}", x_of(p.recall), y_of(p.precision)))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fd0\" stroke-width=\"2\"/>\n",
        points.join(" ")
    ));

    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-size=\"16\">{} / {} (mean MAE {:.4})</text>\n",
        MARGIN_LEFT,
        escape(&report.dataset),
        escape(&report.method),
        report.mean_mae
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">Recall</text>\n",
        (x_of(0.0) + x_of(1.0)) / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">Precision</text>\n",
        (y_of(0.0) + y_of(1.0)) / 2.0,
        (y_of(0.0) + y_of(1.0)) / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

//! Single-series SVG line charts: axes, tick labels, one polyline.
//! Non-finite points are skipped so a partially failed sweep still plots.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;

pub fn line_chart(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let finite: Vec<(f64, f64)> =
        points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    if finite.len() < 2 {
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">not enough finite points</text>\n",
            WIDTH / 2.0,
            HEIGHT / 2.0
        ));
        svg.push_str("</svg>\n");
        return svg;
    }

    let (x_lo, x_hi) = padded_range(finite.iter().map(|p| p.0));
    let (y_lo, y_hi) = padded_range(finite.iter().map(|p| p.1));
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT),
            HEIGHT
                - MARGIN_BOTTOM
                - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM),
        )
    };

    // axes
    let (origin_x, origin_y) = (MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM);
    svg.push_str(&format!(
        "  <line x1=\"{origin_x}\" y1=\"{origin_y}\" x2=\"{}\" y2=\"{origin_y}\" stroke=\"black\"/>\n",
        WIDTH - MARGIN_RIGHT
    ));
    svg.push_str(&format!(
        "  <line x1=\"{origin_x}\" y1=\"{origin_y}\" x2=\"{origin_x}\" y2=\"{MARGIN_TOP}\" stroke=\"black\"/>\n"
    ));

    for i in 0..TICKS {
        let frac = i as f64 / (TICKS - 1) as f64;
        let xv = x_lo + frac * (x_hi - x_lo);
        let yv = y_lo + frac * (y_hi - y_lo);
        let (px, _) = to_px(xv, y_lo);
        let (_, py) = to_px(x_lo, yv);
        svg.push_str(&format!(
            "  <line x1=\"{px}\" y1=\"{origin_y}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            origin_y + 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            origin_y + 18.0,
            tick(xv)
        ));
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{py}\" x2=\"{origin_x}\" y2=\"{py}\" stroke=\"black\"/>\n",
            origin_x - 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            origin_x - 8.0,
            py + 4.0,
            tick(yv)
        ));
    }

    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        escape(y_label)
    ));

    let coordinates: Vec<String> = finite
        .iter()
        .map(|&(x, y)| {
            let (px, py) = to_px(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    svg.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
        coordinates.join(" ")
    ));
    svg.push_str("</svg>\n");
    svg
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) =
        values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        // flat series: open up a window around the value
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        lo -= pad;
        hi += pad;
    } else {
        let pad = (hi - lo) * 0.05;
        lo -= pad;
        hi += pad;
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        format!("{v:.4}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

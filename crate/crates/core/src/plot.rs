//! Self-contained SVG log-log plots for sweep results: mean curves with
//! one-standard-deviation bands, optional certificate overlays, and decade
//! tick marks. Output is plain deterministic text.

/// One plotted curve.
#[derive(Clone, Debug)]
pub struct PlotSeries {
    pub label: String,
    /// `(x, y)` points, positive values (log axes).
    pub points: Vec<(f64, f64)>,
    /// Optional `(x, lo, hi)` band.
    pub band: Option<Vec<(f64, f64, f64)>>,
    pub color: String,
    /// Dashed line (used for certificate overlays and guides).
    pub dashed: bool,
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

/// Render a log-log plot. Non-positive values are clipped to the smallest
/// positive value in the data so bands touching zero stay drawable.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[PlotSeries]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            xs.push(x);
            ys.push(y);
        }
        if let Some(band) = &s.band {
            for &(x, lo, hi) in band {
                xs.push(x);
                ys.push(lo);
                ys.push(hi);
            }
        }
    }
    let positive_min = |values: &[f64]| {
        values
            .iter()
            .copied()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min)
    };
    let x_min = positive_min(&xs);
    let y_min = positive_min(&ys);
    let x_max = xs.iter().copied().fold(0.0f64, f64::max).max(x_min * 10.0);
    let y_max = ys.iter().copied().fold(0.0f64, f64::max).max(y_min * 10.0);
    let (lx0, lx1) = (x_min.log10().floor(), x_max.log10().ceil());
    let (ly0, ly1) = (y_min.log10().floor(), y_max.log10().ceil());
    let map_x = move |x: f64| {
        let lx = x.max(x_min).log10();
        MARGIN_L + (lx - lx0) / (lx1 - lx0).max(1e-12) * (WIDTH - MARGIN_L - MARGIN_R)
    };
    let map_y = move |y: f64| {
        let ly = y.max(y_min).log10();
        HEIGHT - MARGIN_B - (ly - ly0) / (ly1 - ly0).max(1e-12) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Decade grid and tick labels.
    let mut decade = lx0 as i64;
    while decade <= lx1 as i64 {
        let x = map_x(10f64.powi(decade as i32));
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{MARGIN_T}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            HEIGHT - MARGIN_B
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">1e{decade}</text>\n",
            HEIGHT - MARGIN_B + 18.0
        ));
        decade += 1;
    }
    let mut decade = ly0 as i64;
    while decade <= ly1 as i64 {
        let y = map_y(10f64.powi(decade as i32));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n",
            WIDTH - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">1e{decade}</text>\n",
            MARGIN_L - 6.0,
            y + 4.0
        ));
        decade += 1;
    }
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    ));

    for s in series {
        if let Some(band) = &s.band {
            if band.len() >= 2 {
                let mut path = String::from("M");
                for &(x, _lo, hi) in band {
                    path.push_str(&format!(" {:.2},{:.2}", map_x(x), map_y(hi)));
                }
                for &(x, lo, _hi) in band.iter().rev() {
                    path.push_str(&format!(" {:.2},{:.2}", map_x(x), map_y(lo)));
                }
                path.push_str(" Z");
                svg.push_str(&format!(
                    "<path d=\"{path}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                    s.color
                ));
            }
        }
        if s.points.len() >= 2 {
            let coords: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", map_x(x), map_y(y)))
                .collect();
            let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{dash}/>\n",
                coords.join(" "),
                s.color
            ));
        }
        for &(x, y) in &s.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{}\"/>\n",
                map_x(x),
                map_y(y),
                s.color
            ));
        }
    }

    // Legend.
    let mut ly = MARGIN_T + 14.0;
    for s in series {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly:.2}\" x2=\"{}\" y2=\"{ly:.2}\" stroke=\"{}\" stroke-width=\"2\"{}/>\n",
            MARGIN_L + 10.0,
            MARGIN_L + 34.0,
            s.color,
            if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" }
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            MARGIN_L + 40.0,
            ly + 4.0,
            escape(&s.label)
        ));
        ly += 16.0;
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

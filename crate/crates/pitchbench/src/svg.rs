//! Small self-contained SVG charts for the evaluation reports: grouped
//! bars for per-group scores and polylines for trends over a swept
//! condition. No styling dependencies; every figure is one standalone
//! file a browser can open.

use crate::error::{Error, Result};

/// One plotted tracker/variant: a label and one value per category (bar
/// chart) or per x position (line chart). NaN values render as gaps.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f",
];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 64.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round a raw maximum up to a tidy axis limit (1/2/5 times a power of
/// ten), so tick labels come out clean.
fn nice_ceiling(max: f64) -> f64 {
    if !(max > 0.0) {
        return 1.0;
    }
    let exp = max.log10().floor();
    let base = 10f64.powf(exp);
    for m in [1.0, 2.0, 5.0, 10.0] {
        if m * base >= max - 1e-12 {
            return m * base;
        }
    }
    10.0 * base
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v >= 10.0 {
        format!("{v:.0}")
    } else if v >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

struct Frame {
    plot_w: f64,
    plot_h: f64,
    y_max: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        MARGIN_TOP + self.plot_h * (1.0 - (v / self.y_max).clamp(0.0, 1.0))
    }
}

fn open_svg(out: &mut String, title: &str, y_label: &str, frame: &Frame) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + frame.plot_w / 2.0,
        esc(title)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_TOP + frame.plot_h / 2.0,
        MARGIN_TOP + frame.plot_h / 2.0,
        esc(y_label)
    ));
    // horizontal gridlines with y-axis tick labels, quarters of the range
    for i in 0..=4 {
        let v = frame.y_max * i as f64 / 4.0;
        let y = frame.y(v);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
            MARGIN_LEFT,
            MARGIN_LEFT + frame.plot_w
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            fmt_tick(v)
        ));
    }
}

fn legend(out: &mut String, series: &[Series]) {
    for (i, s) in series.iter().enumerate() {
        let x = WIDTH - MARGIN_RIGHT + 16.0;
        let y = MARGIN_TOP + 18.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
            PALETTE[i % PALETTE.len()]
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            x + 18.0,
            y + 10.0,
            esc(&s.label)
        ));
    }
}

fn check(series: &[Series], n: usize) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Domain("chart needs at least one series".into()));
    }
    if n == 0 {
        return Err(Error::Domain("chart needs at least one x position".into()));
    }
    for s in series {
        if s.values.len() != n {
            return Err(Error::Domain(format!(
                "series '{}' has {} values, expected {n}",
                s.label,
                s.values.len()
            )));
        }
    }
    Ok(())
}

fn y_extent(series: &[Series]) -> f64 {
    let max = series
        .iter()
        .flat_map(|s| s.values.iter())
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    nice_ceiling(max)
}

/// Grouped vertical bars: one cluster per category, one bar per series.
pub fn grouped_bar_chart(
    title: &str,
    categories: &[String],
    series: &[Series],
    y_label: &str,
) -> Result<String> {
    check(series, categories.len())?;
    let frame = Frame {
        plot_w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        plot_h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        y_max: y_extent(series),
    };
    let mut out = String::new();
    open_svg(&mut out, title, y_label, &frame);

    let cluster_w = frame.plot_w / categories.len() as f64;
    let bar_w = (cluster_w * 0.8) / series.len() as f64;
    for (ci, cat) in categories.iter().enumerate() {
        let cluster_x = MARGIN_LEFT + cluster_w * ci as f64 + cluster_w * 0.1;
        for (si, s) in series.iter().enumerate() {
            let v = s.values[ci];
            if !v.is_finite() {
                continue;
            }
            let y = frame.y(v);
            let h = MARGIN_TOP + frame.plot_h - y;
            out.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"><title>{}: {v:.3}</title></rect>\n",
                cluster_x + bar_w * si as f64,
                bar_w.max(1.0) - 1.0,
                PALETTE[si % PALETTE.len()],
                esc(&s.label),
            ));
        }
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_LEFT + cluster_w * (ci as f64 + 0.5),
            MARGIN_TOP + frame.plot_h + 20.0,
            esc(cat)
        ));
    }
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP + frame.plot_h,
        MARGIN_LEFT + frame.plot_w,
        MARGIN_TOP + frame.plot_h
    ));
    legend(&mut out, series);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Polyline chart over numeric x positions (e.g. reverberation times).
pub fn line_chart(
    title: &str,
    x_values: &[f64],
    series: &[Series],
    x_label: &str,
    y_label: &str,
) -> Result<String> {
    check(series, x_values.len())?;
    let frame = Frame {
        plot_w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        plot_h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        y_max: y_extent(series),
    };
    let (x_lo, x_hi) = x_values
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let to_x = |x: f64| MARGIN_LEFT + frame.plot_w * (x - x_lo) / span;

    let mut out = String::new();
    open_svg(&mut out, title, y_label, &frame);
    for &x in x_values {
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            to_x(x),
            MARGIN_TOP + frame.plot_h + 20.0,
            fmt_tick(x)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + frame.plot_w / 2.0,
        HEIGHT - 16.0,
        esc(x_label)
    ));
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let points: Vec<String> = x_values
            .iter()
            .zip(&s.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(&x, &v)| format!("{:.1},{:.1}", to_x(x), frame.y(v)))
            .collect();
        if points.len() > 1 {
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                points.join(" ")
            ));
        }
        for p in &points {
            let (px, py) = p.split_once(',').unwrap();
            out.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
        }
    }
    out.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP + frame.plot_h,
        MARGIN_LEFT + frame.plot_w,
        MARGIN_TOP + frame.plot_h
    ));
    legend(&mut out, series);
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series() -> Vec<Series> {
        vec![
            Series { label: "alpha".into(), values: vec![1.0, 2.5, 0.5] },
            Series { label: "beta".into(), values: vec![4.0, 0.0, 3.0] },
        ]
    }

    #[test]
    fn bar_chart_draws_one_bar_per_value() {
        let cats: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let svg = grouped_bar_chart("demo", &cats, &series(), "score").unwrap();
        // 6 data bars + 1 background rect + 2 legend swatches
        assert_eq!(svg.matches("<rect").count(), 9);
        assert!(svg.contains("alpha"));
        assert!(svg.contains("</svg>"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn line_chart_draws_one_polyline_per_series() {
        let svg = line_chart("demo", &[0.1, 0.3, 0.6], &series(), "t", "score").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 6);
    }

    #[test]
    fn nan_values_become_gaps_not_points() {
        let s = vec![Series { label: "a".into(), values: vec![1.0, f64::NAN, 2.0] }];
        let svg = line_chart("demo", &[0.0, 1.0, 2.0], &s, "x", "y").unwrap();
        assert_eq!(svg.matches("<circle").count(), 2);
        let cats: Vec<String> = ["a", "b", "c"].iter().map(|x| x.to_string()).collect();
        let svg = grouped_bar_chart("demo", &cats, &s, "y").unwrap();
        // 2 data bars + background + 1 legend swatch
        assert_eq!(svg.matches("<rect").count(), 4);
    }

    #[test]
    fn axis_ceiling_is_tidy() {
        assert_eq!(nice_ceiling(0.73), 1.0);
        assert_eq!(nice_ceiling(1.2), 2.0);
        assert_eq!(nice_ceiling(4.9), 5.0);
        assert_eq!(nice_ceiling(37.0), 50.0);
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(5.0), 5.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let cats: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert!(grouped_bar_chart("demo", &cats, &series(), "y").is_err());
        assert!(line_chart("demo", &[1.0], &series(), "x", "y").is_err());
        assert!(grouped_bar_chart("demo", &cats, &[], "y").is_err());
    }

    #[test]
    fn labels_are_escaped() {
        let s = vec![Series { label: "a<b&c".into(), values: vec![1.0] }];
        let cats = vec!["x>y".to_string()];
        let svg = grouped_bar_chart("t<t", &cats, &s, "y").unwrap();
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(svg.contains("x&gt;y"));
        assert!(!svg.contains("a<b"));
    }
}

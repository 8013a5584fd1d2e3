//! SVG line chart of cumulative group rewards, fairness on vs off.

use std::fmt::Write;

use fairmas::config::GroupLabel;
use fairmas::engine::SimulationResult;
use thiserror::Error;

pub const WIDTH: f64 = 820.0;
pub const HEIGHT: f64 = 520.0;
pub const MARGIN_LEFT: f64 = 80.0;
pub const MARGIN_RIGHT: f64 = 190.0;
pub const MARGIN_TOP: f64 = 50.0;
pub const MARGIN_BOTTOM: f64 = 60.0;
/// Space above the highest value, as a fraction of it.
pub const HEADROOM: f64 = 0.05;

const Y_TICKS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ChartError {
    #[error("fairness-on run has {on} rounds but fairness-off run has {off}")]
    RoundMismatch { on: usize, off: usize },
}

pub struct Series<'a> {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    pub values: &'a [f64],
}

fn series_of(result: &SimulationResult, group: &GroupLabel) -> Vec<f64> {
    result
        .cumulative_by_group_per_round
        .get(group)
        .cloned()
        .unwrap_or_else(|| vec![0.0; result.rounds.len()])
}

/// Top of the y axis: the largest cumulative value plus [`HEADROOM`].
pub fn y_axis_max(values: impl IntoIterator<Item = f64>) -> f64 {
    let max = values.into_iter().fold(0.0f64, f64::max);
    if max > 0.0 {
        max * (1.0 + HEADROOM)
    } else {
        1.0
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Four series (A/B × on/off): fairness on drawn solid, off dashed.
pub fn emit_chart(on: &SimulationResult, off: &SimulationResult) -> Result<String, ChartError> {
    let n = on.rounds.len();
    if n != off.rounds.len() {
        return Err(ChartError::RoundMismatch {
            on: n,
            off: off.rounds.len(),
        });
    }
    let (a, b) = (GroupLabel::a(), GroupLabel::b());
    let data = [
        (series_of(on, &a), "Group A, fairness on", "#1f77b4", false),
        (series_of(on, &b), "Group B, fairness on", "#ff7f0e", false),
        (series_of(off, &a), "Group A, fairness off", "#1f77b4", true),
        (series_of(off, &b), "Group B, fairness off", "#ff7f0e", true),
    ];
    let series: Vec<Series> = data
        .iter()
        .map(|(v, label, color, dashed)| Series {
            label: label.to_string(),
            color,
            dashed: *dashed,
            values: v,
        })
        .collect();
    Ok(line_chart(
        "Cumulative group rewards: fairness on (solid) vs off (dashed)",
        "Round",
        "Cumulative group reward",
        &series,
    ))
}

/// Generic multi-series line chart; x runs over `1..=len` of the series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let y_max = y_axis_max(series.iter().flat_map(|s| s.values.iter().copied()));
    let x_at = |round: usize| {
        if n <= 1 {
            MARGIN_LEFT + plot_w / 2.0
        } else {
            MARGIN_LEFT + plot_w * (round - 1) as f64 / (n - 1) as f64
        }
    };
    let y_at = |v: f64| MARGIN_TOP + plot_h * (1.0 - v / y_max);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="28" font-size="16" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );

    // axes
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}"/><line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}"/></g>"#,
        x0 + plot_w
    );

    // y ticks and grid
    for i in 0..=Y_TICKS {
        let v = y_max * i as f64 / Y_TICKS as f64;
        let y = y_at(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" font-size="11" text-anchor="end">{v:.0}</text>"##,
            x0 + plot_w,
            x0 - 6.0,
            y + 4.0
        );
    }

    // x ticks: about ten, always including the first and last round
    if n > 0 {
        let step = n.div_ceil(10).max(1);
        let mut ticks: Vec<usize> = (1..=n).step_by(step).collect();
        if ticks.last() != Some(&n) {
            ticks.push(n);
        }
        for r in ticks {
            let x = x_at(r);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" font-size="11" text-anchor="middle">{r}</text>"#,
                y0 + 5.0,
                y0 + 18.0
            );
        }
    }

    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    for s in series {
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x_at(i + 1), y_at(v)))
            .collect();
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="2"{dash} points="{}"><title>{}</title></polyline>"#,
            s.color,
            points.join(" "),
            escape(&s.label)
        );
    }

    // legend
    let lx = WIDTH - MARGIN_RIGHT + 15.0;
    for (i, s) in series.iter().enumerate() {
        let ly = MARGIN_TOP + 10.0 + 22.0 * i as f64;
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/><text x="{}" y="{}" font-size="11">{}</text>"#,
            lx + 28.0,
            s.color,
            lx + 34.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

//! Minimal SVG line plots, one series per impairment level.

use std::fmt::Write;

use super::output::{format_significant, Table};
use super::ExperimentKind;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_Y: f64 = 45.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    markers_only: bool,
}

pub(super) fn figure_for(kind: ExperimentKind, table: &Table) -> Option<String> {
    let (title, y_label, columns, log_y): (&str, &str, &[(&str, bool)], bool) = match kind {
        ExperimentKind::MseSweep => (
            "Normalized channel-estimation MSE",
            "normalized MSE",
            &[("mse_closed_form", false), ("mse_empirical", true)],
            true,
        ),
        ExperimentKind::OptimalTp => (
            "Optimal training length (joint power)",
            "T_p",
            &[("t_p_opt", false)],
            false,
        ),
        ExperimentKind::EqualPowerTp => (
            "Optimal training length (equal power)",
            "T_p",
            &[("t_p_opt", false)],
            false,
        ),
        ExperimentKind::RateSweep => (
            "Approximated achievable rate",
            "bits/channel use",
            &[("rate_bits", false)],
            false,
        ),
        ExperimentKind::RateGain => (
            "Relative rate gain",
            "gain [%]",
            &[("gain_percent", false)],
            false,
        ),
        ExperimentKind::Validate => return None,
    };
    let x_col = table.column("snr_db")?;
    let d_col = table.column("delta")?;

    let mut series: Vec<Series> = Vec::new();
    for &(name, markers_only) in columns {
        let y_col = table.column(name)?;
        let mut deltas: Vec<f64> = Vec::new();
        for row in table.rows() {
            let d = row[d_col].as_f64()?;
            if !deltas.contains(&d) {
                deltas.push(d);
            }
        }
        for d in deltas {
            let points = table
                .rows()
                .iter()
                .filter(|r| r[d_col].as_f64() == Some(d))
                .filter_map(|r| Some((r[x_col].as_f64()?, r[y_col].as_f64()?)))
                .filter(|&(_, y)| !log_y || y > 0.0)
                .collect();
            let label = if columns.len() > 1 {
                format!(
                    "δ={} {}",
                    format_significant(d, 4),
                    if markers_only { "(MC)" } else { "" }
                )
            } else {
                format!("δ={}", format_significant(d, 4))
            };
            series.push(Series {
                label,
                points,
                markers_only,
            });
        }
    }
    Some(render(title, "SNR [dB]", y_label, &series, log_y))
}

fn render(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let all: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (x, ty(y))))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_Y + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#,
        WIDTH / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let y_text = if log_y {
            format!("1e{}", format_significant(yv, 3))
        } else {
            format_significant(yv, 4)
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(xv),
            HEIGHT - MARGIN_Y + 16.0,
            format_significant(xv, 4)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y_text}</text>"#,
            MARGIN_LEFT - 6.0,
            py(yv) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y_label}</text>"#,
        MARGIN_Y + plot_h / 2.0,
        MARGIN_Y + plot_h / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if s.markers_only {
            for &(x, y) in &s.points {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="none" stroke="{color}"/>"#,
                    px(x),
                    py(ty(y))
                );
            }
        } else {
            let path: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(ty(y))))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = MARGIN_Y + 14.0 + 16.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text x="{}" y="{:.1}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 22.0,
            ly,
            s.label.trim_end()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

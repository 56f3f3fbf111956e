//! CMC curve rendering and the rank-1/5/10 metric table.

use std::fmt::Write;

use egolink::eval::EvalReport;

use crate::error::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

/// Renders the report's CMC curve as a standalone SVG document. Pure
/// function of the report, so re-runs are byte-identical.
pub fn cmc_svg(report: &EvalReport) -> Result<String, CliError> {
    if report.cmc.is_empty() {
        return Err(CliError::validation("report contains an empty CMC curve"));
    }
    let max_rank = report.cmc.len();
    let x = |rank: usize| {
        MARGIN + (rank - 1) as f64 / (max_rank.max(2) - 1) as f64 * (WIDTH - 2.0 * MARGIN)
    };
    let y = |value: f64| HEIGHT - MARGIN - value * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    // axes
    let _ = writeln!(
        svg,
        "  <line x1=\"{m}\" y1=\"{y0}\" x2=\"{xe}\" y2=\"{y0}\" stroke=\"black\"/>",
        m = MARGIN,
        y0 = HEIGHT - MARGIN,
        xe = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{y0}\" stroke=\"black\"/>",
        m = MARGIN,
        y0 = HEIGHT - MARGIN
    );
    for tick in 0..=10 {
        let value = tick as f64 / 10.0;
        let ty = y(value);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x1}\" y1=\"{ty:.2}\" x2=\"{x2}\" y2=\"{ty:.2}\" stroke=\"lightgray\"/>",
            x1 = MARGIN,
            x2 = WIDTH - MARGIN
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{tx}\" y=\"{py:.2}\" font-size=\"11\" text-anchor=\"end\">{value:.1}</text>",
            tx = MARGIN - 6.0,
            py = ty + 4.0
        );
    }
    for rank in 1..=max_rank {
        let tx = x(rank);
        let _ = writeln!(
            svg,
            "  <text x=\"{tx:.2}\" y=\"{py}\" font-size=\"11\" text-anchor=\"middle\">{rank}</text>",
            py = HEIGHT - MARGIN + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{cx}\" y=\"{py}\" font-size=\"13\" text-anchor=\"middle\">rank</text>",
        cx = WIDTH / 2.0,
        py = HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        "  <text x=\"16\" y=\"{cy}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {cy})\">match rate</text>",
        cy = HEIGHT / 2.0
    );

    let points: Vec<String> = report
        .cmc
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", x(i + 1), y(v)))
        .collect();
    let _ = writeln!(
        svg,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>",
        points.join(" ")
    );
    for (i, &v) in report.cmc.iter().enumerate() {
        let _ = writeln!(
            svg,
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>",
            x(i + 1),
            y(v)
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

/// Rank-1/5/10 and mAP table. Ranks beyond the curve's length report its
/// final value, which a saturated CMC makes exact.
pub fn metric_table(report: &EvalReport) -> String {
    let at = |rank: usize| report.cmc[rank.min(report.cmc.len()) - 1];
    let mut out = String::new();
    let _ = writeln!(out, "queries  {}", report.num_valid_queries);
    let _ = writeln!(out, "rank-1   {:.4}", at(1));
    let _ = writeln!(out, "rank-5   {:.4}", at(5));
    let _ = writeln!(out, "rank-10  {:.4}", at(10));
    let _ = writeln!(out, "mAP      {:.4}", report.map);
    out
}

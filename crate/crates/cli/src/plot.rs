use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::prelude::*;

/// Step-function ECDFs of both arms on one chart.
pub fn ecdf_svg(path: &Path, title: &str, x_label: &str, arms: &[(&str, &[(f64, f64)])]) -> Result<()> {
    let xs = arms.iter().flat_map(|(_, pts)| pts.iter().map(|p| p.0));
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return Err(anyhow!("no values to plot for {title}"));
    }
    let pad = ((hi - lo) * 0.05).max(hi.abs() * 1e-6).max(1e-9);
    let (lo, hi) = (lo - pad, hi + pad);

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(lo..hi, 0.0..1.0)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc("cumulative fraction")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;

    let colors = [BLUE, RED, GREEN, BLACK];
    for (i, (name, pts)) in arms.iter().enumerate() {
        let color = colors[i % colors.len()];
        let mut steps = vec![(lo, 0.0)];
        let mut prev = 0.0;
        for &(x, f) in pts.iter() {
            steps.push((x, prev));
            steps.push((x, f));
            prev = f;
        }
        steps.push((hi, prev));
        chart
            .draw_series(LineSeries::new(steps, color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerRight)
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

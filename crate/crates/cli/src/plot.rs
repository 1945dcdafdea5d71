//! Static SVG plots of density estimates.

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use privmix::diagnostics::DensityEstimate;
use privmix::experiment::Truth;

const WIDTH: u32 = 720;
const HEIGHT: u32 = 420;

/// Posterior mean with its pointwise band (when present) and the true density.
pub fn density_svg(d: &DensityEstimate, truth: Option<Truth>, title: &str) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, HEIGHT)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
        let (lo, hi) = (d.grid[0], d.grid[d.grid.len() - 1]);
        let truth_vals: Vec<f64> = truth.map(|t| d.grid.iter().map(|&x| t.density(x)).collect()).unwrap_or_default();
        let top = d
            .upper95
            .iter()
            .flatten()
            .chain(&d.mean)
            .chain(&truth_vals)
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max)
            * 1.05;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(32)
            .y_label_area_size(48)
            .build_cartesian_2d(lo..hi, 0.0..top.max(1e-12))
            .map_err(|e| anyhow!("{e}"))?;
        chart.configure_mesh().x_desc("x").y_desc("density").draw().map_err(|e| anyhow!("{e}"))?;

        if let (Some(l), Some(u)) = (&d.lower95, &d.upper95) {
            let mut band: Vec<(f64, f64)> = d.grid.iter().copied().zip(u.iter().copied()).collect();
            band.extend(d.grid.iter().copied().zip(l.iter().copied()).rev());
            chart
                .draw_series(std::iter::once(Polygon::new(band, BLUE.mix(0.15).filled())))
                .map_err(|e| anyhow!("{e}"))?
                .label("95% band")
                .legend(|(x, y)| Rectangle::new([(x, y - 4), (x + 16, y + 4)], BLUE.mix(0.15).filled()));
        }
        chart
            .draw_series(LineSeries::new(d.grid.iter().copied().zip(d.mean.iter().copied()), BLUE.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label("posterior mean")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLUE.stroke_width(2)));
        if !truth_vals.is_empty() {
            chart
                .draw_series(LineSeries::new(d.grid.iter().copied().zip(truth_vals.iter().copied()), BLACK))
                .map_err(|e| anyhow!("{e}"))?
                .label("truth")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK.mix(0.3))
            .draw()
            .map_err(|e| anyhow!("{e}"))?;
        root.present().map_err(|e| anyhow!("{e}"))?;
    }
    Ok(svg)
}

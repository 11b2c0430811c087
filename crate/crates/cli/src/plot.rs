//! Static SVG figures.

use std::f64::consts::{PI, TAU};

use kicked_rotor::scenario::DensityGrid;
use plotters::coord::Shift;
use plotters::prelude::*;
use plotters::style::text_anchor::{HPos, Pos, VPos};

const PALETTE: [RGBColor; 6] = [
    RGBColor(0, 0, 0),
    RGBColor(200, 30, 30),
    RGBColor(30, 90, 200),
    RGBColor(20, 140, 60),
    RGBColor(150, 60, 170),
    RGBColor(220, 130, 0),
];

pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Curve {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points, dashed: false }
    }
}

pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub curves: Vec<Curve>,
    /// Horizontal reference lines.
    pub reference: Vec<f64>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) =
        values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.1 * lo.abs().max(1e-3) };
    (lo - pad, hi + pad)
}

fn caption(root: &DrawingArea<SVGBackend, Shift>, hash: &str) -> Result<(), String> {
    let (w, h) = root.dim_in_pixel();
    let style = TextStyle::from(("sans-serif", 11).into_font())
        .color(&RGBColor(90, 90, 90))
        .pos(Pos::new(HPos::Center, VPos::Bottom));
    root.draw(&Text::new(format!("config {hash}"), (w as i32 / 2, h as i32 - 4), style)).map_err(|e| e.to_string())
}

pub fn line_plot(plot: &LinePlot, hash: &str) -> Result<String, String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (720, 440)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| e.to_string())?;
        let (x0, x1) = range(plot.curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)));
        let (y0, y1) =
            range(plot.curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)).chain(plot.reference.iter().copied()));
        let mut chart = ChartBuilder::on(&root)
            .caption(&plot.title, ("sans-serif", 18))
            .margin(12)
            .margin_bottom(28)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, y0..y1)
            .map_err(|e| e.to_string())?;
        chart
            .configure_mesh()
            .x_desc(&plot.x_label)
            .y_desc(&plot.y_label)
            .light_line_style(WHITE)
            .draw()
            .map_err(|e| e.to_string())?;
        for &r in &plot.reference {
            let grey = RGBColor(120, 120, 120);
            chart
                .draw_series(DashedLineSeries::new(vec![(x0, r), (x1, r)], 6, 4, grey.stroke_width(1)))
                .map_err(|e| e.to_string())?;
        }
        for (i, c) in plot.curves.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let style = color.stroke_width(2);
            let series = if c.dashed {
                chart.draw_series(DashedLineSeries::new(c.points.clone(), 8, 5, style))
            } else {
                chart.draw_series(LineSeries::new(c.points.clone(), style))
            }
            .map_err(|e| e.to_string())?;
            if !c.label.is_empty() {
                series
                    .label(&c.label)
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
            }
        }
        if plot.curves.iter().any(|c| !c.label.is_empty()) {
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.85))
                .border_style(BLACK)
                .position(SeriesLabelPosition::UpperRight)
                .draw()
                .map_err(|e| e.to_string())?;
        }
        caption(&root, hash)?;
        root.present().map_err(|e| e.to_string())?;
    }
    Ok(svg)
}

/// Perceptually ordered white-to-dark-red ramp over `[0, 1]`.
fn heat(x: f64) -> RGBColor {
    let x = x.clamp(0.0, 1.0);
    let stops =
        [(255.0, 255.0, 255.0), (255.0, 220.0, 120.0), (240.0, 120.0, 40.0), (180.0, 20.0, 20.0), (80.0, 0.0, 0.0)];
    let s = x * (stops.len() - 1) as f64;
    let i = (s.floor() as usize).min(stops.len() - 2);
    let f = s - i as f64;
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    RGBColor(lerp(stops[i].0, stops[i + 1].0), lerp(stops[i].1, stops[i + 1].1), lerp(stops[i].2, stops[i + 1].2))
}

/// Density at the grid node nearest to `(θ, φ)`.
fn lookup(grid: &DensityGrid, theta: f64, phi: f64) -> f64 {
    let nt = grid.theta.len();
    let np = grid.phi.len();
    let i = ((theta / PI * nt as f64).floor() as usize).min(nt - 1);
    let j = (phi.rem_euclid(TAU) / TAU * np as f64).round() as usize % np;
    grid.value(i, j)
}

/// Orthographic views of the unit sphere. `view` maps disk coordinates
/// `(u, v, w)` (w toward the viewer) to `(x, y, z)`.
fn sphere_view(
    area: &DrawingArea<SVGBackend, Shift>,
    grid: &DensityGrid,
    (vmin, vmax): (f64, f64),
    title: &str,
    view: impl Fn(f64, f64, f64) -> (f64, f64, f64),
) -> Result<(), String> {
    let (w, h) = area.dim_in_pixel();
    let n = 72i32;
    let cell = ((w.min(h) as i32 - 60) / n).max(1);
    let (ox, oy) = ((w as i32 - n * cell) / 2, 34);
    let title_style = TextStyle::from(("sans-serif", 14).into_font()).pos(Pos::new(HPos::Center, VPos::Top));
    area.draw(&Text::new(title.to_string(), (w as i32 / 2, 8), title_style)).map_err(|e| e.to_string())?;
    for a in 0..n {
        for b in 0..n {
            let u = (a as f64 + 0.5) / n as f64 * 2.0 - 1.0;
            let v = 1.0 - (b as f64 + 0.5) / n as f64 * 2.0;
            let r2 = u * u + v * v;
            if r2 > 1.0 {
                continue;
            }
            let (x, y, z) = view(u, v, (1.0 - r2).sqrt());
            let theta = z.clamp(-1.0, 1.0).acos();
            let phi = y.atan2(x);
            let color = heat((lookup(grid, theta, phi) - vmin) / (vmax - vmin));
            let (px, py) = (ox + a * cell, oy + b * cell);
            area.draw(&Rectangle::new([(px, py), (px + cell, py + cell)], color.filled()))
                .map_err(|e| e.to_string())?;
        }
    }
    let outline: Vec<(i32, i32)> = (0..=96)
        .map(|k| {
            let t = TAU * k as f64 / 96.0;
            let r = n as f64 * cell as f64 / 2.0;
            ((ox as f64 + r + r * t.cos()).round() as i32, (oy as f64 + r - r * t.sin()).round() as i32)
        })
        .collect();
    area.draw(&PathElement::new(outline, BLACK.stroke_width(1))).map_err(|e| e.to_string())
}

/// Two orthographic views: from `+y` (the `xz` plane face-on) and from `+z`.
pub fn density_plot(grid: &DensityGrid, title: &str, hash: &str) -> Result<String, String> {
    let vmin = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if vmax > vmin { (vmin, vmax) } else { (vmin - 1.0, vmin + 1.0) };
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (760, 460)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| e.to_string())?;
        let (head, body) = root.split_vertically(30);
        let style = TextStyle::from(("sans-serif", 18).into_font()).pos(Pos::new(HPos::Center, VPos::Top));
        head.draw(&Text::new(title.to_string(), (380, 6), style)).map_err(|e| e.to_string())?;
        let (left, right) = body.split_horizontally(380);
        // screen right = +x, up = +z, toward the viewer = +y
        sphere_view(&left, grid, span, "viewed along -y (x right, z up)", |u, v, w| (u, w, v))?;
        // screen right = +x, up = +y, toward the viewer = +z
        sphere_view(&right, grid, span, "viewed along -z (x right, y up)", |u, v, w| (u, v, w))?;
        let legend = format!("white = {vmin:.4e}, dark red = {vmax:.4e} per steradian");
        let style = TextStyle::from(("sans-serif", 12).into_font()).pos(Pos::new(HPos::Center, VPos::Bottom));
        root.draw(&Text::new(legend, (380, 430), style)).map_err(|e| e.to_string())?;
        caption(&root, hash)?;
        root.present().map_err(|e| e.to_string())?;
    }
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(points: Vec<(f64, f64)>) -> LinePlot {
        LinePlot {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            curves: vec![Curve::new("c", points)],
            reference: vec![],
        }
    }

    #[test]
    fn constant_series_gets_a_range_around_it() {
        let (lo, hi) = range([0.5, 0.5, 0.5].into_iter());
        assert!(lo < 0.5 && hi > 0.5 && hi - lo < 0.2);
        let svg = line_plot(&plot(vec![(0.0, 0.5), (1.0, 0.5)]), "abc").unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("config abc"));
    }

    #[test]
    fn output_is_deterministic() {
        let p = plot((0..50).map(|i| (i as f64, (i as f64 / 7.0).sin())).collect());
        assert_eq!(line_plot(&p, "h").unwrap(), line_plot(&p, "h").unwrap());
    }

    #[test]
    fn reference_line_is_drawn() {
        let mut p = plot(vec![(0.0, 0.6), (1.0, 0.7)]);
        let without = line_plot(&p, "h").unwrap();
        p.reference.push(0.5);
        let with = line_plot(&p, "h").unwrap();
        assert!(with.len() > without.len());
    }

    #[test]
    fn heat_ramp_endpoints() {
        assert_eq!(heat(0.0), RGBColor(255, 255, 255));
        assert_eq!(heat(1.0), RGBColor(80, 0, 0));
        assert_eq!(heat(2.0), heat(1.0));
    }

    #[test]
    fn density_views_render() {
        let n = 8;
        let grid = DensityGrid {
            theta: (0..n).map(|i| (i as f64 + 0.5) * PI / n as f64).collect(),
            phi: (0..n).map(|j| TAU * j as f64 / n as f64).collect(),
            values: vec![1.0 / (4.0 * PI); n * n],
            theta_weights: vec![0.0; n],
            raw_integral: 1.0,
        };
        let svg = density_plot(&grid, "uniform", "h").unwrap();
        assert!(svg.contains("config h") && svg.matches("<rect").count() > 2 * 72 * 50);
    }
}

//! Three-way explanation masks: blue for negative, pink for positive and
//! yellow for weights within the threshold band around zero.

use std::fmt::Write as _;

use super::Explanation;
use crate::data::ImageShape;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaskColor {
    Blue,
    Pink,
    Yellow,
}

impl MaskColor {
    pub fn rgb(self) -> [u8; 3] {
        match self {
            MaskColor::Blue => [46, 94, 214],
            MaskColor::Pink => [240, 128, 176],
            MaskColor::Yellow => [250, 222, 60],
        }
    }
}

/// Classifies each weight against `threshold_fraction · max|w|`.
pub fn mask_colors(weights: &[f64], threshold_fraction: f64) -> Vec<MaskColor> {
    let max = weights.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = threshold_fraction * max;
    weights
        .iter()
        .map(|&w| {
            if w.abs() <= cut {
                MaskColor::Yellow
            } else if w > 0.0 {
                MaskColor::Pink
            } else {
                MaskColor::Blue
            }
        })
        .collect()
}

/// A rendered per-pixel mask plus the signed intensities used for the heatmap.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedMask {
    pub height: usize,
    pub width: usize,
    pub colors: Vec<MaskColor>,
    /// Pixel weights divided by the largest magnitude (0 when all weights are 0).
    pub intensity: Vec<f64>,
}

impl RenderedMask {
    pub fn count(&self, color: MaskColor) -> usize {
        self.colors.iter().filter(|&&c| c == color).count()
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for c in &self.colors {
            out.extend_from_slice(&c.rgb());
        }
        out
    }

    /// SVG heatmap: one square per pixel, diverging blue–white–pink scale.
    pub fn to_svg(&self, cell: usize) -> String {
        let (w, h) = (self.width * cell, self.height * cell);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
        );
        for (i, &v) in self.intensity.iter().enumerate() {
            let (r, c) = (i / self.width, i % self.width);
            let [red, green, blue] = diverging(v);
            let _ = writeln!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"#{red:02x}{green:02x}{blue:02x}\"/>",
                c * cell,
                r * cell
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn diverging(v: f64) -> [u8; 3] {
    let t = v.clamp(-1.0, 1.0);
    let target = if t >= 0.0 {
        MaskColor::Pink.rgb()
    } else {
        MaskColor::Blue.rgb()
    };
    let a = t.abs();
    let mix = |c: u8| (255.0 + (f64::from(c) - 255.0) * a).round() as u8;
    [mix(target[0]), mix(target[1]), mix(target[2])]
}

/// Renders an explanation onto its image grid. Multi-channel weights are
/// summed per pixel (channel-major layout).
pub fn render_explanation(
    explanation: &Explanation,
    shape: ImageShape,
    threshold_fraction: f64,
) -> Result<RenderedMask> {
    let w = &explanation.weights;
    if shape.len() != w.len() || shape.channels == 0 {
        return invalid(format!(
            "image shape {}x{}x{} does not cover {} weights",
            shape.height,
            shape.width,
            shape.channels,
            w.len()
        ));
    }
    if !(0.0..1.0).contains(&threshold_fraction) {
        return invalid(format!(
            "threshold fraction {threshold_fraction} outside [0, 1)"
        ));
    }
    let plane = shape.height * shape.width;
    let pixels: Vec<f64> = (0..plane)
        .map(|p| (0..shape.channels).map(|c| w[c * plane + p]).sum())
        .collect();
    let max = pixels.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let intensity = pixels
        .iter()
        .map(|v| if max > 0.0 { v / max } else { 0.0 })
        .collect();
    Ok(RenderedMask {
        height: shape.height,
        width: shape.width,
        colors: mask_colors(&pixels, threshold_fraction),
        intensity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explanation(weights: Vec<f64>) -> Explanation {
        Explanation {
            weights,
            intercept: 0.0,
            target_class: 0,
            r_squared: 0.0,
            query_point_id: None,
        }
    }

    fn square(side: usize) -> ImageShape {
        ImageShape {
            height: side,
            width: side,
            channels: 1,
        }
    }

    #[test]
    fn zero_weights_are_all_yellow() {
        let m = render_explanation(&explanation(vec![0.0; 9]), square(3), 0.1).unwrap();
        assert_eq!(m.count(MaskColor::Yellow), 9);
    }

    #[test]
    fn two_by_two_example() {
        let m =
            render_explanation(&explanation(vec![1.0, -1.0, 0.0, 0.0]), square(2), 0.1).unwrap();
        assert_eq!(
            m.colors,
            vec![
                MaskColor::Pink,
                MaskColor::Blue,
                MaskColor::Yellow,
                MaskColor::Yellow
            ]
        );
        let ppm = m.to_ppm();
        assert!(ppm.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(ppm.len(), 11 + 12);
        let svg = m.to_svg(10);
        assert_eq!(svg.matches("<rect").count(), 4);
    }

    #[test]
    fn partition_is_exhaustive() {
        let w: Vec<f64> = (0..16).map(|i| ((i as f64) * 1.7).sin()).collect();
        let m = render_explanation(&explanation(w), square(4), 0.3).unwrap();
        let total =
            m.count(MaskColor::Pink) + m.count(MaskColor::Blue) + m.count(MaskColor::Yellow);
        assert_eq!(total, 16);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(render_explanation(&explanation(vec![0.0; 5]), square(2), 0.1).is_err());
    }
}

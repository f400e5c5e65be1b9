//! Deterministic pictures: external-ray checkerboards for quadratic
//! polynomials, basins of (6/5)z + z⁶, tangent-line classes on a real slice
//! of a Koch chart, and Green-function level bands.

pub mod fig3;
pub mod image;

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottcher1d::{external_data_lenient, ExternalData};
use crate::error::{Error, Result};
use crate::green::{GreenEvaluator, GreenLevel};

pub use fig3::{
    critical_line_directions, fig3_classes, fig3_default_config, fig3_overlay, fig3_relabeling, render_fig3,
    tangent_class, Fig3Setup, Fig3Side, LineClass, OverlayReport, RelabelingReport,
};
pub use image::{ImageBuffer, Rgb};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    #[default]
    Standard,
    Gray,
}

impl Palette {
    /// Color of class k (k < 8), darkened by `shade` ∈ [0, 1].
    pub fn class(self, k: usize, shade: f64) -> Rgb {
        const COLORS: [Rgb; 8] = [
            [230, 80, 60],
            [60, 150, 230],
            [250, 200, 50],
            [90, 190, 100],
            [170, 90, 200],
            [240, 140, 40],
            [60, 200, 200],
            [200, 120, 160],
        ];
        let base = match self {
            Palette::Standard => COLORS[k % 8],
            Palette::Gray => {
                let g = (60 + (k % 8) * 25) as u8;
                [g, g, g]
            }
        };
        let f = 1.0 - 0.6 * shade.clamp(0.0, 1.0);
        base.map(|c| (c as f64 * f).round() as u8)
    }

    pub fn escaped(self) -> Rgb {
        [20, 20, 30]
    }

    pub fn undecided(self) -> Rgb {
        [128, 128, 128]
    }

    pub fn checker(self, even: bool) -> Rgb {
        match (self, even) {
            (Palette::Standard, true) => [245, 240, 225],
            (Palette::Standard, false) => [40, 60, 110],
            (Palette::Gray, true) => [235, 235, 235],
            (Palette::Gray, false) => [50, 50, 50],
        }
    }
}

/// Pixel (i, j) sits at world point center + axes·(dx, dy), where (dx, dy)
/// runs over the window with x to the right and y up.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderConfig {
    pub center: [f64; 2],
    /// world width of the window; the height follows the pixel aspect ratio
    pub width: f64,
    pub pixels: [usize; 2],
    pub max_iter: usize,
    /// columns are the world images of the window's x and y directions
    pub axes: [[f64; 2]; 2],
    pub palette: Palette,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            width: 4.0,
            pixels: [600, 600],
            max_iter: 200,
            axes: [[1.0, 0.0], [0.0, 1.0]],
            palette: Palette::Standard,
            seed: 0,
            out: None,
        }
    }
}

impl RenderConfig {
    pub fn new(center: [f64; 2], width: f64, pixels: [usize; 2]) -> Self {
        Self { center, width, pixels, ..Self::default() }
    }

    pub fn with_max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    /// Rotates the whole window (center included) about the world origin.
    pub fn rotated(mut self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let rot = |p: [f64; 2]| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        self.center = rot(self.center);
        self.axes = [rot(self.axes[0]), rot(self.axes[1])];
        self
    }

    /// Applies a linear map of the world plane to the whole window.
    pub fn transformed(mut self, a: [[f64; 2]; 2]) -> Self {
        let app = |p: [f64; 2]| [a[0][0] * p[0] + a[0][1] * p[1], a[1][0] * p[0] + a[1][1] * p[1]];
        self.center = app(self.center);
        self.axes = [app(self.axes[0]), app(self.axes[1])];
        self
    }

    pub fn height(&self) -> f64 {
        self.width * self.pixels[1] as f64 / self.pixels[0] as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels[0] == 0 || self.pixels[1] == 0 {
            return Err(Error::InvalidArgument("image has no pixels".into()));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::InvalidArgument(format!("window width {} is not positive", self.width)));
        }
        Ok(())
    }

    pub fn world(&self, i: usize, j: usize) -> [f64; 2] {
        let dx = ((i as f64 + 0.5) / self.pixels[0] as f64 - 0.5) * self.width;
        let dy = (0.5 - (j as f64 + 0.5) / self.pixels[1] as f64) * self.height();
        [
            self.center[0] + self.axes[0][0] * dx + self.axes[1][0] * dy,
            self.center[1] + self.axes[0][1] * dx + self.axes[1][1] * dy,
        ]
    }

    pub fn world_complex(&self, i: usize, j: usize) -> C64 {
        let [x, y] = self.world(i, j);
        C64::new(x, y)
    }

    /// Pixel values in row-major order.
    pub fn map_pixels<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize) -> T + Sync,
    {
        let [w, h] = self.pixels;
        (0..w * h).into_par_iter().map(|k| f(k % w, k / w)).collect()
    }
}

/// sectors per turn in the checkerboard is 2^ANGLE_BITS
pub const ANGLE_BITS: u32 = 4;

/// Default parameter for the quadratic picture: inside the main cardioid.
pub const FIG1_DEFAULT_C: C64 = C64::new(-0.5, 0.3);

/// Whether z² + c has an attracting fixed point, so the filled Julia set is connected.
pub fn in_main_cardioid(c: C64) -> bool {
    (1.0 - (1.0 - 4.0 * c).sqrt()).norm() < 1.0
}

fn checker(palette: Palette, d: Result<ExternalData>) -> Rgb {
    match d {
        Ok(d) if d.potential > 0.0 => {
            let sector = (d.angle * (1u64 << ANGLE_BITS) as f64).floor() as i64;
            let band = d.potential.log2().floor() as i64;
            palette.checker((sector + band).rem_euclid(2) == 0)
        }
        _ => palette.class(1, 0.3),
    }
}

/// Left: z² + c; right: the model z².
pub fn render_fig1(cfg: &RenderConfig, c: C64) -> Result<(ImageBuffer, ImageBuffer)> {
    cfg.validate()?;
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let quad = [c, zero, one];
    let model = [zero, zero, one];
    let [w, h] = cfg.pixels;
    let left = ImageBuffer::from_fn(w, h, |i, j| checker(cfg.palette, external_data_lenient(&quad, cfg.world_complex(i, j))));
    let right =
        ImageBuffer::from_fn(w, h, |i, j| checker(cfg.palette, external_data_lenient(&model, cfg.world_complex(i, j))));
    Ok((left, right))
}

/// P(z) = (6/5) z + z⁶.
pub fn fig2_map(z: C64) -> C64 {
    z * 1.2 + z.powu(6)
}

pub fn fig2_derivative(z: C64) -> C64 {
    C64::new(1.2, 0.0) + z.powu(5) * 6.0
}

/// The fifth roots of −1/5, ordered by argument from π/5.
pub fn fig2_critical_points() -> [C64; 5] {
    let r = 0.2f64.powf(0.2);
    std::array::from_fn(|k| C64::from_polar(r, PI / 5.0 + 2.0 * PI * k as f64 / 5.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum BasinPixel {
    Fixed { index: u8, n: u32 },
    Escaped { n: u32 },
    Undecided,
}

impl BasinPixel {
    /// Same class, ignoring iteration counts.
    pub fn same_class(self, other: BasinPixel) -> bool {
        match (self, other) {
            (BasinPixel::Fixed { index: a, .. }, BasinPixel::Fixed { index: b, .. }) => a == b,
            (BasinPixel::Escaped { .. }, BasinPixel::Escaped { .. }) => true,
            (BasinPixel::Undecided, BasinPixel::Undecided) => true,
            _ => false,
        }
    }

    pub fn decided(self) -> bool {
        self != BasinPixel::Undecided
    }
}

/// Orbits within this distance of a critical fixed point are captured
/// (the map is a contraction by a factor ≤ 1/2 there).
const FIG2_CAPTURE: f64 = 0.05;
const FIG2_ESCAPE: f64 = 2.0;

pub fn fig2_classify(z: C64, max_iter: usize) -> BasinPixel {
    let crit = fig2_critical_points();
    let mut u = z;
    for n in 0..=max_iter {
        if u.norm() > FIG2_ESCAPE || !u.norm().is_finite() {
            return BasinPixel::Escaped { n: n as u32 };
        }
        if let Some(k) = crit.iter().position(|c| (u - c).norm() < FIG2_CAPTURE) {
            return BasinPixel::Fixed { index: k as u8, n: n as u32 };
        }
        u = fig2_map(u);
    }
    BasinPixel::Undecided
}

pub fn fig2_classes(cfg: &RenderConfig) -> Vec<BasinPixel> {
    cfg.map_pixels(|i, j| fig2_classify(cfg.world_complex(i, j), cfg.max_iter))
}

pub fn render_fig2(cfg: &RenderConfig) -> Result<ImageBuffer> {
    cfg.validate()?;
    let classes = fig2_classes(cfg);
    let [w, h] = cfg.pixels;
    Ok(ImageBuffer::from_fn(w, h, |i, j| match classes[j * w + i] {
        BasinPixel::Fixed { index, n } => cfg.palette.class(index as usize, n as f64 / 30.0),
        BasinPixel::Escaped { .. } => cfg.palette.escaped(),
        BasinPixel::Undecided => cfg.palette.undecided(),
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub schema: u32,
    pub pixels: usize,
    /// class k of the original picture corresponds to class permutation[k]
    pub permutation: Vec<usize>,
    pub agreement: f64,
}

/// Compares the picture of the window rotated by 72° with the original
/// after relabeling the critical points by z ↦ e^{2πi/5} z.
pub fn fig2_symmetry(cfg: &RenderConfig) -> Result<SymmetryReport> {
    cfg.validate()?;
    let omega = C64::from_polar(1.0, 2.0 * PI / 5.0);
    let crit = fig2_critical_points();
    let permutation: Vec<usize> = crit
        .iter()
        .map(|c| {
            let target = c * omega;
            (0..5).min_by(|&a, &b| (crit[a] - target).norm().total_cmp(&(crit[b] - target).norm())).expect("five points")
        })
        .collect();
    let base = fig2_classes(cfg);
    let turned = fig2_classes(&cfg.clone().rotated(2.0 * PI / 5.0));
    let agree = base
        .iter()
        .zip(&turned)
        .filter(|(a, b)| match (a, b) {
            (BasinPixel::Fixed { index: x, .. }, BasinPixel::Fixed { index: y, .. }) => permutation[*x as usize] == *y as usize,
            _ => a.same_class(**b),
        })
        .count();
    Ok(SymmetryReport { schema: 1, pixels: base.len(), permutation, agreement: agree as f64 / base.len() as f64 })
}

/// Bands of the Green function G_F on the real slice of a two-dimensional germ.
pub fn render_green_levels(cfg: &RenderConfig, ev: &GreenEvaluator, bands_per_unit: f64) -> Result<ImageBuffer> {
    cfg.validate()?;
    if ev.h().blocks().m() != 2 {
        return Err(Error::InvalidArgument("green-levels renders two-dimensional germs".into()));
    }
    let [w, h] = cfg.pixels;
    Ok(ImageBuffer::from_fn(w, h, |i, j| {
        let [x, y] = cfg.world(i, j);
        match ev.evaluate(&[C64::new(x, 0.0), C64::new(y, 0.0)]) {
            Ok(g) => match g.g_f {
                GreenLevel::MinusInfinity => cfg.palette.class(0, 0.0),
                GreenLevel::Finite(v) if v < 0.0 => {
                    let band = (v * bands_per_unit).floor() as i64;
                    cfg.palette.class(band.rem_euclid(2) as usize, (-v / 10.0).min(1.0))
                }
                GreenLevel::Finite(_) => cfg.palette.escaped(),
            },
            Err(_) => cfg.palette.escaped(),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bottcher1d::external_data;

    fn small(w: f64, px: usize) -> RenderConfig {
        RenderConfig::new([0.0, 0.0], w, [px, px])
    }

    #[test]
    fn window_geometry() {
        let cfg = RenderConfig::new([1.0, -1.0], 2.0, [4, 2]);
        assert_eq!(cfg.world(0, 0), [0.25, -0.75]);
        assert_eq!(cfg.world(3, 1), [1.75, -1.25]);
        let r = small(2.0, 4).rotated(PI / 2.0);
        let p = r.world(0, 0);
        assert!((p[0] + 0.75).abs() < 1e-15 && (p[1] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn fig2_critical_points_are_superattracting_fixed_points() {
        for c in fig2_critical_points() {
            assert!((fig2_map(c) - c).norm() < 1e-12);
            assert!(fig2_derivative(c).norm() < 1e-12);
        }
        assert_eq!(fig2_map(C64::new(0.0, 0.0)), C64::new(0.0, 0.0));
        assert!((fig2_derivative(C64::new(0.0, 0.0)).norm() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn fig2_is_deterministic_and_symmetric() {
        let cfg = small(2.4, 120);
        assert_eq!(render_fig2(&cfg).unwrap().to_ppm(), render_fig2(&cfg).unwrap().to_ppm());
        let rep = fig2_symmetry(&cfg).unwrap();
        assert!(rep.agreement >= 0.999, "{rep:?}");
        let mut p = rep.permutation.clone();
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn fig1_model_cells_are_polar_grid() {
        let cfg = small(4.0, 64);
        let (_, right) = render_fig1(&cfg, FIG1_DEFAULT_C).unwrap();
        for (i, j) in [(3, 5), (60, 2), (10, 50), (40, 40)] {
            let z = cfg.world_complex(i, j);
            let angle = (z.arg() / (2.0 * PI)).rem_euclid(1.0);
            let d = ExternalData { potential: z.norm().ln(), angle };
            assert_eq!(right.pixel(i, j), checker(cfg.palette, Ok(d)));
        }
    }

    #[test]
    fn fig1_angles_double() {
        let c = FIG1_DEFAULT_C;
        let poly = [c, C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let cfg = small(4.0, 40);
        let mut checked = 0;
        for j in 0..40 {
            for i in 0..40 {
                let z = cfg.world_complex(i, j);
                if let (Ok(a), Ok(b)) = (external_data(&poly, z), external_data(&poly, z * z + c)) {
                    let d = (b.angle - 2.0 * a.angle).rem_euclid(1.0);
                    assert!(d.min(1.0 - d) < 1e-9, "{z}");
                    assert!((b.potential - 2.0 * a.potential).abs() < 1e-9);
                    checked += 1;
                }
            }
        }
        assert!(checked > 500);
        assert!(in_main_cardioid(c) && !in_main_cardioid(C64::new(0.3, 0.0)));
    }
}

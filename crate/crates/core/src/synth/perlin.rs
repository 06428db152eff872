//! Classic 2-D gradient noise on a square lattice.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;

use crate::error::{Error, Result};
use crate::imaging::ScalarField;

/// Random unit gradients at the lattice corners covering an `h x w` field.
#[derive(Debug, Clone)]
pub struct PerlinLattice {
    period: usize,
    rows: usize,
    cols: usize,
    gradients: Vec<[f64; 2]>,
}

/// Quintic fade `6t^5 - 15t^4 + 10t^3`.
#[inline]
pub fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

impl PerlinLattice {
    pub fn new(height: usize, width: usize, period: usize, seed: u64) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidArgument("Perlin period must be at least 1".into()));
        }
        if height == 0 || width == 0 {
            return Err(Error::ZeroDimension { height, width });
        }
        let rows = height.div_ceil(period) + 1;
        let cols = width.div_ceil(period) + 1;
        let mut rng = crate::seed::rng(seed);
        let gradients = (0..rows * cols)
            .map(|_| {
                let theta = rng.gen::<f64>() * 2.0 * PI;
                [theta.cos(), theta.sin()]
            })
            .collect();
        Ok(Self {
            period,
            rows,
            cols,
            gradients,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Gradient `[gx, gy]` at lattice corner `(row, col)`.
    pub fn gradient(&self, row: usize, col: usize) -> [f64; 2] {
        self.gradients[row * self.cols + col]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Raw noise at pixel coordinates; zero on every lattice point.
    pub fn raw(&self, y: f64, x: f64) -> f64 {
        let p = self.period as f64;
        let (ly, lx) = (y / p, x / p);
        let (iy, ix) = (ly.floor() as usize, lx.floor() as usize);
        let (fy, fx) = (ly - iy as f64, lx - ix as f64);
        let corner = |dy: usize, dx: usize| {
            let [gx, gy] = self.gradient(iy + dy, ix + dx);
            gx * (fx - dx as f64) + gy * (fy - dy as f64)
        };
        let (u, v) = (fade(fx), fade(fy));
        let top = corner(0, 0) + u * (corner(0, 1) - corner(0, 0));
        let bottom = corner(1, 0) + u * (corner(1, 1) - corner(1, 0));
        top + v * (bottom - top)
    }
}

/// Maps raw noise in `[-1/sqrt(2), 1/sqrt(2)]` affinely onto `[0, 1]`.
#[inline]
pub fn to_unit(raw: f64) -> f64 {
    (0.5 + raw / SQRT_2).clamp(0.0, 1.0)
}

/// `h x w` Perlin field with lattice period `period` pixels, values in `[0, 1]`.
pub fn generate_perlin(height: usize, width: usize, period: usize, seed: u64) -> Result<ScalarField> {
    let lattice = PerlinLattice::new(height, width, period, seed)?;
    let mut data = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            data.push(to_unit(lattice.raw(y as f64, x as f64)));
        }
    }
    ScalarField::new(height, width, data)
}

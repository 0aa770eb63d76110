//! Core landscapes `g(z)` with `g(0) = 0`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use crate::seeding::StreamRng;

pub fn sphere(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// Axis-scaled quadratic with condition number 1e6.
pub fn ellipsoid(z: &[f64]) -> f64 {
    let k = z.len();
    z.iter()
        .enumerate()
        .map(|(i, v)| 10f64.powf(6.0 * i as f64 / (k - 1) as f64) * v * v)
        .sum()
}

pub fn rastrigin(z: &[f64]) -> f64 {
    let k = z.len() as f64;
    let cos_sum: f64 = z.iter().map(|v| (2.0 * PI * v).cos()).sum();
    10.0 * (k - cos_sum) + sphere(z)
}

/// Plain Rosenbrock, minimum 0 at the all-ones vector.
pub fn rosenbrock(z: &[f64]) -> f64 {
    z.windows(2)
        .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

/// Rosenbrock moved so that its minimum sits at the origin.
pub fn rosenbrock_centered(z: &[f64]) -> f64 {
    let shifted: Vec<f64> = z.iter().map(|v| v + 1.0).collect();
    rosenbrock(&shifted)
}

/// Quadratic that is 100 times steeper on the side of each axis pointing
/// the same way as the optimum coordinate.
pub fn attractive_sector(z: &[f64], x_opt: &[f64]) -> f64 {
    z.iter()
        .zip(x_opt)
        .map(|(v, o)| {
            let s = if v * o > 0.0 { 100.0 } else { 1.0 };
            s * v * v
        })
        .sum()
}

pub fn bent_cigar(z: &[f64]) -> f64 {
    z[0] * z[0] + 1e6 * z[1..].iter().map(|v| v * v).sum::<f64>()
}

pub fn schaffers_f7(z: &[f64]) -> f64 {
    let k = z.len();
    let sum: f64 = z
        .windows(2)
        .map(|w| {
            let s = (w[0] * w[0] + w[1] * w[1]).sqrt();
            let r = s.sqrt();
            r + r * (50.0 * s.powf(0.2)).sin().powi(2)
        })
        .sum();
    (sum / (k - 1) as f64).powi(2)
}

pub const GALLAGHER_PEAKS: usize = 101;

/// Gallagher-style landscape: a mixture of rotated Gaussian peaks, the
/// tallest one (height 10) centred on the optimum.
#[derive(Debug, Clone)]
pub struct Peaks {
    centers: Vec<Vec<f64>>,
    heights: Vec<f64>,
    // per-peak per-coordinate curvature, already permuted
    scales: Vec<Vec<f64>>,
}

impl Peaks {
    pub fn generate(rng: &mut StreamRng, x_opt: &[f64]) -> Self {
        let k = x_opt.len();
        let mut centers = Vec::with_capacity(GALLAGHER_PEAKS);
        let mut heights = Vec::with_capacity(GALLAGHER_PEAKS);
        let mut scales = Vec::with_capacity(GALLAGHER_PEAKS);
        for i in 0..GALLAGHER_PEAKS {
            let (center, height, alpha) = if i == 0 {
                (x_opt.to_vec(), 10.0, 1000.0)
            } else {
                let c: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..=4.0)).collect();
                let h = 1.1 + 8.0 * (i - 1) as f64 / (GALLAGHER_PEAKS - 2) as f64;
                let a = 10f64.powf(rng.random_range(0.0..=3.0));
                (c, h, a)
            };
            let mut s: Vec<f64> = (0..k)
                .map(|j| alpha.powf(0.5 * j as f64 / (k - 1) as f64) / alpha.powf(0.25))
                .collect();
            // Fisher-Yates with the stream so peaks get distinct axis orders
            for j in (1..k).rev() {
                let t = rng.random_range(0..=j);
                s.swap(j, t);
            }
            centers.push(center);
            heights.push(height);
            scales.push(s);
        }
        Self { centers, heights, scales }
    }

    /// Value at `x`, where `rotation` maps offsets from a peak centre into
    /// the peak's own axes.
    pub fn value(&self, x: &[f64], rotation: &DMatrix<f64>) -> f64 {
        let k = x.len();
        let mut offset = vec![0.0; k];
        let mut best = 0.0f64;
        for ((center, &height), scale) in self.centers.iter().zip(&self.heights).zip(&self.scales) {
            for (o, (a, c)) in offset.iter_mut().zip(x.iter().zip(center)) {
                *o = a - c;
            }
            let mut q = 0.0;
            for (r, s) in scale.iter().enumerate() {
                let d: f64 = (0..k).map(|c| rotation[(r, c)] * offset[c]).sum();
                q += s * d * d;
            }
            best = best.max(height * (-q / (2.0 * k as f64)).exp());
        }
        (10.0 - best).powi(2)
    }
}

//! Two-component isotropic Gaussian mixture in the plane, observed through
//! its second coordinate. Small enough that everything is closed form, so it
//! serves as the worked example for the heuristic sampler.

use rand::Rng;
use serde::Serialize;

use crate::error::{ensure_dim, invalid, Result};
use crate::rng::{normal, uniform};
use crate::scores::ScoreProvider;
use crate::special::softmax_into;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mixture2d {
    pub means: [[f64; 2]; 2],
    pub weights: [f64; 2],
    /// Per-coordinate variance of each component.
    pub var: f64,
    /// Variance of the noise on the observed coordinate.
    pub noise_var: f64,
}

impl Default for Mixture2d {
    /// `0.5·N((0,0), 0.4 I) + 0.5·N((4,4), 0.4 I)`, `y = x₂ + N(0, 0.81)`.
    fn default() -> Self {
        Self {
            means: [[0.0, 0.0], [4.0, 4.0]],
            weights: [0.5, 0.5],
            var: 0.4,
            noise_var: 0.81,
        }
    }
}

impl Mixture2d {
    pub fn validate(&self) -> Result<()> {
        if !(self.var > 0.0 && self.noise_var >= 0.0) {
            return Err(invalid("var", "must be positive"));
        }
        let s = self.weights[0] + self.weights[1];
        if self.weights.iter().any(|w| *w < 0.0) || (s - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", "must be a probability vector"));
        }
        Ok(())
    }

    fn pick<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
        usize::from(uniform(rng) >= w[0])
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let k = Self::pick(&self.weights, rng);
        let sd = self.var.sqrt();
        [self.means[k][0] + sd * normal(rng), self.means[k][1] + sd * normal(rng)]
    }

    pub fn measure<R: Rng + ?Sized>(&self, x: &[f64; 2], rng: &mut R) -> f64 {
        x[1] + self.noise_var.sqrt() * normal(rng)
    }

    /// Component responsibilities of the prior smoothed to variance
    /// `var + σ²`, at `x`.
    fn smoothed_weights(&self, sigma: f64, x: &[f64]) -> Vec<f64> {
        let v = self.var + sigma * sigma;
        let lw: Vec<f64> = (0..2)
            .map(|k| {
                let d2 = (x[0] - self.means[k][0]).powi(2) + (x[1] - self.means[k][1]).powi(2);
                self.weights[k].ln() - d2 / (2.0 * v)
            })
            .collect();
        let mut w = Vec::new();
        softmax_into(&lw, &mut w);
        w
    }

    /// `∇ log (p ∗ N(0, σ² I))(x)`.
    pub fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(2, x.len())?;
        let v = self.var + sigma * sigma;
        let w = self.smoothed_weights(sigma, x);
        Ok((0..2)
            .map(|i| (0..2).map(|k| w[k] * (self.means[k][i] - x[i]) / v).sum())
            .collect())
    }

    /// Posterior component weights given `y`.
    pub fn posterior_weights(&self, y: f64) -> [f64; 2] {
        let v = self.var + self.noise_var;
        let lw: Vec<f64> = (0..2)
            .map(|k| self.weights[k].ln() - (y - self.means[k][1]).powi(2) / (2.0 * v))
            .collect();
        let mut w = Vec::new();
        softmax_into(&lw, &mut w);
        [w[0], w[1]]
    }

    /// An exact draw from `p(x | y)`.
    pub fn sample_posterior<R: Rng + ?Sized>(&self, y: f64, rng: &mut R) -> [f64; 2] {
        let w = self.posterior_weights(y);
        let k = Self::pick(&w, rng);
        let sd = self.var.sqrt();
        let x1 = self.means[k][0] + sd * normal(rng);
        let x2 = if self.noise_var == 0.0 {
            y
        } else {
            let prec = 1.0 / self.var + 1.0 / self.noise_var;
            let mean = (self.means[k][1] / self.var + y / self.noise_var) / prec;
            mean + normal(rng) / prec.sqrt()
        };
        [x1, x2]
    }

    /// Index of the nearer component mean.
    pub fn nearest_component(&self, x: &[f64]) -> usize {
        let d = |k: usize| (x[0] - self.means[k][0]).powi(2) + (x[1] - self.means[k][1]).powi(2);
        usize::from(d(1) < d(0))
    }
}

impl ScoreProvider for Mixture2d {
    fn dim(&self) -> usize {
        2
    }

    fn label(&self) -> String {
        "mixture2d".into()
    }

    fn score(&self, sigma: f64, x: &[f64]) -> Result<Vec<f64>> {
        Mixture2d::score(self, sigma, x)
    }
}

//! Quadrature rules on the unit sphere of light directions.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SphereSampler {
    /// Golden-angle spiral, equal weights `4 pi / N`.
    #[default]
    Fibonacci,
    /// Midpoint rule in polar angle times trapezoid in azimuth, `2 m^2` nodes for `m = round(sqrt(N/2))`.
    LatLong,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    pub sampler: SphereSampler,
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(sampler: SphereSampler, n: usize) -> Result<Self> {
        match sampler {
            SphereSampler::Fibonacci => fibonacci(n),
            SphereSampler::LatLong => lat_long(n),
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.directions.iter().zip(&self.weights).map(|(v, w)| w * f(v)).sum()
    }
}

fn fibonacci(n: usize) -> Result<SphereQuadrature> {
    if n == 0 {
        return Err(Error::invalid("sphere sampling needs at least one direction"));
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let directions = (0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (golden * k as f64).sin_cos();
            [r * c, r * s, z]
        })
        .collect();
    Ok(SphereQuadrature {
        sampler: SphereSampler::Fibonacci,
        directions,
        weights: vec![2.0 * TAU / n as f64; n],
    })
}

fn lat_long(n: usize) -> Result<SphereQuadrature> {
    let m = ((n as f64 / 2.0).sqrt().round() as usize).max(2);
    let (n_theta, n_phi) = (m, 2 * m);
    let mut directions = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = (i as f64 + 0.5) * PI / n_theta as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..n_phi {
            let (sp, cp) = (TAU * j as f64 / n_phi as f64).sin_cos();
            directions.push([st * cp, st * sp, ct]);
            weights.push(st);
        }
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= 2.0 * TAU / total;
    }
    Ok(SphereQuadrature {
        sampler: SphereSampler::LatLong,
        directions,
        weights,
    })
}

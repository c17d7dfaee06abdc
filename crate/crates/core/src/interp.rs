//! Interpolation of gridded samples: multilinear and cubic B-spline.
//!
//! Samples outside the array are treated as zero. Cubic B-spline interpolation
//! works on prefiltered coefficients (see [`Interpolation::prepare`]); the
//! prefilter assumes zero samples beyond both ends of each axis.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    Multilinear,
    CubicBSpline,
}

const POLE: f64 = -0.267_949_192_431_122_7; // sqrt(3) - 2

impl Interpolation {
    /// Number of taps per axis.
    pub fn width(&self) -> usize {
        match self {
            Interpolation::Multilinear => 2,
            Interpolation::CubicBSpline => 4,
        }
    }

    /// Cells by which the interpolant's support exceeds the samples' support.
    pub fn margin(&self) -> usize {
        match self {
            Interpolation::Multilinear => 1,
            Interpolation::CubicBSpline => 2,
        }
    }

    /// First tap index and tap weights at fractional index `pos`.
    #[inline]
    pub fn taps(&self, pos: f64) -> (i64, [f64; 4]) {
        let fl = pos.floor();
        let t = pos - fl;
        let i = fl as i64;
        match self {
            Interpolation::Multilinear => (i, [1.0 - t, t, 0.0, 0.0]),
            Interpolation::CubicBSpline => {
                let s = 1.0 - t;
                let w0 = s * s * s / 6.0;
                let w3 = t * t * t / 6.0;
                let w1 = (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0;
                let w2 = 1.0 - w0 - w1 - w3;
                (i - 1, [w0, w1, w2, w3])
            }
        }
    }

    /// Converts samples to interpolation coefficients in place (no-op for multilinear).
    pub fn prepare(&self, data: &mut [f64], dims: &[usize]) {
        if *self == Interpolation::CubicBSpline {
            for axis in 0..dims.len() {
                prefilter_axis(data, dims, axis);
            }
        }
    }
}

/// Cubic B-spline prefilter along one axis of a row-major array.
pub fn prefilter_axis(data: &mut [f64], dims: &[usize], axis: usize) {
    let n = dims[axis];
    assert_eq!(data.len(), dims.iter().product::<usize>());
    if n < 2 {
        return;
    }
    let stride: usize = dims[axis + 1..].iter().product();
    let block = n * stride;
    let mut line = vec![0.0; n];
    for chunk in data.chunks_mut(block) {
        for inner in 0..stride {
            for (k, v) in line.iter_mut().enumerate() {
                *v = chunk[k * stride + inner];
            }
            prefilter_line(&mut line);
            for (k, v) in line.iter().enumerate() {
                chunk[k * stride + inner] = *v;
            }
        }
    }
}

/// In-place cubic B-spline prefilter of a line with zero extension.
pub fn prefilter_line(c: &mut [f64]) {
    let n = c.len();
    let z = POLE;
    for k in 1..n {
        c[k] += z * c[k - 1];
    }
    c[n - 1] *= -z / (1.0 - z * z);
    for k in (0..n - 1).rev() {
        c[k] = z * (c[k + 1] - c[k]);
    }
    for v in c.iter_mut() {
        *v *= 6.0;
    }
}

/// Interpolates `coeffs` (row-major, shape `dims`) at fractional index `pos`.
pub fn sample<const D: usize>(coeffs: &[f64], dims: [usize; D], pos: [f64; D], interp: Interpolation) -> f64 {
    let width = interp.width();
    let mut base = [0i64; D];
    let mut weights = [[0.0; 4]; D];
    for a in 0..D {
        let (b, w) = interp.taps(pos[a]);
        // all taps outside this axis: nothing to add
        if b + width as i64 <= 0 || b >= dims[a] as i64 {
            return 0.0;
        }
        base[a] = b;
        weights[a] = w;
    }
    let mut strides = [1usize; D];
    for a in (0..D.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    let mut total = 0.0;
    let mut tap = [0usize; D];
    'outer: loop {
        let mut w = 1.0;
        let mut flat = 0usize;
        let mut inside = true;
        for a in 0..D {
            let i = base[a] + tap[a] as i64;
            if i < 0 || i >= dims[a] as i64 {
                inside = false;
                break;
            }
            w *= weights[a][tap[a]];
            flat += i as usize * strides[a];
        }
        if inside {
            total += w * coeffs[flat];
        }
        for a in (0..D).rev() {
            tap[a] += 1;
            if tap[a] < width {
                continue 'outer;
            }
            tap[a] = 0;
        }
        break;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multilinear_reproduces_affine_functions() {
        let dims = [4, 5, 6];
        let f = |i: f64, j: f64, k: f64| 1.0 + 2.0 * i - 0.5 * j + 0.25 * k;
        let mut data = vec![0.0; 120];
        for i in 0..4 {
            for j in 0..5 {
                for k in 0..6 {
                    data[(i * 5 + j) * 6 + k] = f(i as f64, j as f64, k as f64);
                }
            }
        }
        for pos in [[0.5, 1.25, 3.75], [2.9, 0.1, 4.0], [1.0, 2.0, 3.0]] {
            let v = sample(&data, dims, pos, Interpolation::Multilinear);
            assert!((v - f(pos[0], pos[1], pos[2])).abs() < 1e-12);
        }
        assert_eq!(sample(&data, dims, [-2.0, 1.0, 1.0], Interpolation::Multilinear), 0.0);
    }

    #[test]
    fn cubic_interpolates_samples() {
        let n = 40;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 - 20.0) / 4.0;
                (-x * x).exp()
            })
            .collect();
        let mut c = samples.clone();
        Interpolation::CubicBSpline.prepare(&mut c, &[n]);
        for (i, s) in samples.iter().enumerate() {
            let v = sample(&c, [n], [i as f64], Interpolation::CubicBSpline);
            assert!((v - s).abs() < 1e-10, "{i}: {v} vs {s}");
        }
        // between nodes: fourth-order accurate
        let x = 0.37;
        let v = sample(&c, [n], [20.0 + 4.0 * x], Interpolation::CubicBSpline);
        assert!((v - (-x * x as f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn cubic_reproduces_cubics_in_the_interior() {
        let n = 64;
        let f = |x: f64| 0.3 * x * x * x - x * x + 2.0;
        // a cubic is not compactly supported, so check far from the ends
        let mut c: Vec<f64> = (0..n).map(|i| f(i as f64 / 8.0)).collect();
        Interpolation::CubicBSpline.prepare(&mut c, &[n]);
        let v = sample(&c, [n], [30.3], Interpolation::CubicBSpline);
        assert!((v - f(30.3 / 8.0)).abs() < 1e-6);
    }

    #[test]
    fn tap_weights_partition_unity() {
        for interp in [Interpolation::Multilinear, Interpolation::CubicBSpline] {
            for pos in [0.0, 0.3, 1.7, -2.2] {
                let (_, w) = interp.taps(pos);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }
}

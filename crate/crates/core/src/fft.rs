//! 4D complex FFT built from `rustfft` line transforms.
//!
//! Conventions: forward is the unnormalised sum `sum_x f(x) e^{-i x.eta}`, inverse
//! carries `1/(N0 N1 N2 N3)`. Data are row-major with the last axis fastest.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

pub struct Fft4 {
    dims: [usize; 4],
    forward: [Arc<dyn Fft<f64>>; 4],
    inverse: [Arc<dyn Fft<f64>>; 4],
}

impl Fft4 {
    pub fn new(dims: [usize; 4]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.map(|n| planner.plan_fft(n, FftDirection::Forward));
        let inverse = dims.map(|n| planner.plan_fft(n, FftDirection::Inverse));
        Fft4 {
            dims,
            forward,
            inverse,
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        for axis in 0..4 {
            transform_axis(data, self.dims, axis, self.forward[axis].as_ref());
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len());
        for axis in 0..4 {
            transform_axis(data, self.dims, axis, self.inverse[axis].as_ref());
        }
        let scale = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }
}

/// Transforms every line of `data` along `axis` in place.
pub fn transform_axis(data: &mut [Complex64], dims: [usize; 4], axis: usize, fft: &dyn Fft<f64>) {
    let n = dims[axis];
    if n <= 1 {
        return;
    }
    let stride: usize = dims[axis + 1..].iter().product();
    let block = n * stride;
    let scratch_len = fft.get_inplace_scratch_len();
    if stride == 1 {
        data.par_chunks_mut(block.max(n * 64)).for_each(|chunk| {
            let mut scratch = vec![Complex64::default(); scratch_len];
            for line in chunk.chunks_exact_mut(n) {
                fft.process_with_scratch(line, &mut scratch);
            }
        });
        return;
    }
    data.par_chunks_mut(block).for_each(|chunk| {
        let mut scratch = vec![Complex64::default(); scratch_len];
        let mut line = vec![Complex64::default(); n];
        for inner in 0..stride {
            for (k, z) in line.iter_mut().enumerate() {
                *z = chunk[k * stride + inner];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (k, z) in line.iter().enumerate() {
                chunk[k * stride + inner] = *z;
            }
        }
    });
}

/// Angular frequencies `2 pi k / (n h)` in FFT order, `k` in `[-n/2, n/2)`.
pub fn fft_frequencies(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            // for even n the Nyquist bin lands on -n/2
            let k = if i < n.div_ceil(2) { i as i64 } else { i as i64 - n as i64 };
            std::f64::consts::TAU * k as f64 / (n as f64 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let dims = [4, 6, 5, 8];
        let plan = Fft4::new(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let orig: Vec<Complex64> = (0..plan.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut data = orig.clone();
        plan.forward(&mut data);
        plan.inverse(&mut data);
        let err: f64 = data.iter().zip(&orig).map(|(a, b)| (a - b).norm_sqr()).sum();
        let nrm: f64 = orig.iter().map(|a| a.norm_sqr()).sum();
        assert!((err / nrm).sqrt() < 1e-14);
    }

    #[test]
    fn matches_direct_dft_on_one_bin() {
        let dims = [3, 4, 2, 5];
        let plan = Fft4::new(dims);
        let n: usize = dims.iter().product();
        let orig: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
        let mut data = orig.clone();
        plan.forward(&mut data);
        let k = [1usize, 3, 1, 2];
        let mut direct = Complex64::default();
        for (flat, z) in orig.iter().enumerate() {
            let mut rem = flat;
            let mut phase = 0.0;
            for axis in (0..4).rev() {
                let i = rem % dims[axis];
                rem /= dims[axis];
                phase += (i * k[axis]) as f64 / dims[axis] as f64;
            }
            direct += z * Complex64::from_polar(1.0, -std::f64::consts::TAU * phase);
        }
        let idx = ((k[0] * dims[1] + k[1]) * dims[2] + k[2]) * dims[3] + k[3];
        assert!((data[idx] - direct).norm() < 1e-12);
    }

    #[test]
    fn frequency_layout() {
        let f = fft_frequencies(4, 0.5);
        let unit = std::f64::consts::TAU / 2.0;
        assert_eq!(f, vec![0.0, unit, -2.0 * unit, -unit]);
        let f = fft_frequencies(5, 1.0);
        assert!((f[2] - 2.0 * std::f64::consts::TAU / 5.0).abs() < 1e-15);
        assert!((f[3] + 2.0 * std::f64::consts::TAU / 5.0).abs() < 1e-15);
    }
}

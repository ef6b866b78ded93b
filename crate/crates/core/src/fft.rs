//! Square 2D FFTs built from `rustfft` row transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned forward/inverse transforms for `m x m` row-major arrays.
///
/// The forward transform is unnormalized; the inverse divides by `m^2`, so
/// `inverse(forward(x)) == x` up to rounding.
#[derive(Clone)]
pub struct Fft2 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("m", &self.m).finish()
    }
}

impl Fft2 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&*self.forward, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&*self.inverse, data);
        let s = 1.0 / (self.m * self.m) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn apply(&self, fft: &dyn Fft<f64>, data: &mut [Complex64]) {
        let m = self.m;
        assert_eq!(data.len(), m * m, "FFT buffer has wrong length");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, m);
        fft.process_with_scratch(data, &mut scratch);
        transpose(data, m);
    }
}

fn transpose(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

/// Signed frequency of DFT bin `k` on an `m`-point axis.
#[inline]
pub fn signed_freq(k: usize, m: usize) -> i64 {
    if k < m.div_ceil(2) {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

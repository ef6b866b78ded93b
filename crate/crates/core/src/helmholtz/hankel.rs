//! Hankel function of the first kind and order zero, `H0(x) = J0(x) + i Y0(x)`.
//!
//! Three regimes: the ascending series for `x < 2`, Miller's backward
//! recurrence with the Neumann series for `Y0` on `[2, 25]`, and the Hankel
//! asymptotic expansion beyond.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_MAX: f64 = 2.0;
const ASYMPTOTIC_MIN: f64 = 25.0;

/// `H0^(1)(x)` for `x > 0`.
pub fn hankel0_1(x: f64) -> Result<Complex64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Hankel function needs a finite positive argument, got {x}"
        )));
    }
    Ok(hankel0_1_unchecked(x))
}

/// Same as [`hankel0_1`] without argument validation; callers guarantee `x > 0`.
pub fn hankel0_1_unchecked(x: f64) -> Complex64 {
    let (j0, y0) = if x < SERIES_MAX {
        series(x)
    } else if x <= ASYMPTOTIC_MIN {
        miller(x)
    } else {
        return asymptotic(x);
    };
    Complex64::new(j0, y0)
}

fn series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut j0 = 1.0;
    let mut harmonic = 0.0;
    let mut ysum = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        harmonic += 1.0 / kf;
        j0 += term;
        ysum -= harmonic * term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    let y0 = FRAC_2_PI * (((0.5 * x).ln() + EULER_GAMMA) * j0 + ysum);
    (j0, y0)
}

fn miller(x: f64) -> (f64, f64) {
    let start = x + 25.0 + 4.0 * x.sqrt();
    let m = 2 * (start / 2.0).ceil() as usize;
    let mut jp1 = 0.0;
    let mut jk = 1e-30;
    // norm = J0 + 2 sum J_2k, ysum = sum (-1)^k J_2k / k
    let mut norm = 0.0;
    let mut ysum = 0.0;
    let mut j0 = 0.0;
    for k in (0..=m).rev() {
        if k % 2 == 0 {
            if k == 0 {
                norm += jk;
                j0 = jk;
            } else {
                norm += 2.0 * jk;
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                ysum += sign * jk / (k / 2) as f64;
            }
        }
        if k == 0 {
            break;
        }
        let jm1 = 2.0 * k as f64 / x * jk - jp1;
        jp1 = jk;
        jk = jm1;
        if jk.abs() > 1e250 {
            jk *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            ysum *= 1e-250;
        }
    }
    let j0 = j0 / norm;
    let ysum = ysum / norm;
    let y0 = FRAC_2_PI * ((0.5 * x).ln() + EULER_GAMMA) * j0 - 2.0 * FRAC_2_PI * ysum;
    (j0, y0)
}

fn asymptotic(x: f64) -> Complex64 {
    // H0(x) ~ sqrt(2/(pi x)) e^{i(x - pi/4)} sum_k i^k a_k / x^k,
    // a_k = prod_{m<=k} (-(2m-1)^2) / (k! 8^k)
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= Complex64::new(0.0, 1.0) * (-odd * odd / (kf * 8.0 * x));
        let size = term.norm();
        if size > last {
            break;
        }
        sum += term;
        last = size;
        if size < 1e-17 {
            break;
        }
    }
    let phase = Complex64::from_polar(1.0, x - FRAC_PI_4);
    sum * phase * (2.0 / (PI * x)).sqrt()
}

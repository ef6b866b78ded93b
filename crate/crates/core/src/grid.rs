//! Cell-centred sampling grids on `[-1, 1]^2`, complex fields living on them,
//! and the cartoon-like test phantoms.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use crate::error::{Error, Result};

/// Half-width `a` of the computational domain `[-a, a]^2`.
pub const DOMAIN_HALF_WIDTH: f64 = 1.0;

/// Radius `R` of the ball that must contain every contrast support.
pub const SUPPORT_RADIUS: f64 = 0.75;

/// Uniform cell-centred grid with `n` samples per axis.
///
/// Sample `(i, j)` sits at `(-a + (i + 1/2) h, -a + (j + 1/2) h)`; `i` is the
/// row (first coordinate) and storage is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid2D {
    n: usize,
}

impl Grid2D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of samples, `n^2`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width `h = 2a / n`.
    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * DOMAIN_HALF_WIDTH / self.n as f64
    }

    /// Coordinate of the `i`-th cell centre along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -DOMAIN_HALF_WIDTH + (i as f64 + 0.5) * self.h()
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

/// Complex samples of a function on a [`Grid2D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n() {
            let x = grid.coord(i);
            for j in 0..grid.n() {
                values.push(f(x, grid.coord(j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_real_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        Self::from_fn(grid, |x, y| Complex64::new(f(x, y), 0.0))
    }

    /// Field with i.i.d. standard complex Gaussian entries.
    pub fn random(grid: Grid2D, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let values = (0..grid.len())
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Discrete inner product `h^2 sum a conj(b)`.
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        let h2 = self.grid.h() * self.grid.h();
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        s * h2
    }

    /// Quadrature-weighted L2 norm, `sqrt(h^2 sum |f|^2)`.
    pub fn norm(&self) -> f64 {
        let h = self.grid.h();
        h * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: Complex64, x: &ComplexField) {
        for (v, xv) in self.values.iter_mut().zip(&x.values) {
            *v += a * xv;
        }
    }

    /// Pointwise product.
    pub fn hadamard(&self, other: &ComplexField) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    /// Real part, returned as a complex field with zero imaginary part.
    pub fn real_part(&self) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|v| Complex64::new(v.re, 0.0))
                .collect(),
        }
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest distance from the origin of a cell whose value is nonzero.
    pub fn support_radius(&self) -> f64 {
        let mut r: f64 = 0.0;
        for i in 0..self.grid.n() {
            for j in 0..self.grid.n() {
                if self.values[self.grid.index(i, j)] != Complex64::new(0.0, 0.0) {
                    let [x, y] = self.grid.point(i, j);
                    r = r.max(x.hypot(y));
                }
            }
        }
        r
    }
}

impl Index<(usize, usize)> for ComplexField {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.values[self.grid.index(i, j)]
    }
}

impl IndexMut<(usize, usize)> for ComplexField {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        let k = self.grid.index(i, j);
        &mut self.values[k]
    }
}

impl Add for &ComplexField {
    type Output = ComplexField;

    fn add(self, rhs: &ComplexField) -> ComplexField {
        let values = self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect();
        ComplexField {
            grid: self.grid,
            values,
        }
    }
}

impl Sub for &ComplexField {
    type Output = ComplexField;

    fn sub(self, rhs: &ComplexField) -> ComplexField {
        let values = self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect();
        ComplexField {
            grid: self.grid,
            values,
        }
    }
}

impl Mul<f64> for &ComplexField {
    type Output = ComplexField;

    fn mul(self, rhs: f64) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * rhs).collect(),
        }
    }
}

/// Relative discrete L2 error `||f - g|| / ||g||`.
pub fn rel_l2_error(f: &ComplexField, g: &ComplexField) -> Result<f64> {
    g.grid.check_same(&f.grid)?;
    let denom = g.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((f - g).norm() / denom)
}

/// Deterministic RNG shared by phantoms, noise and test fields.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Geometry of a test scatterer.
#[derive(Debug, Clone, PartialEq)]
pub enum PhantomKind {
    /// Smooth-edged blob: a disk whose radius carries a trigonometric
    /// perturbation, filled with a smooth profile. Stand-in for the scatterer
    /// of the first experiment, whose exact geometry is not published.
    CartoonBlob,
    /// Indicator of the axis-aligned square `|x|_inf <= 0.3`.
    CenteredSquare,
    /// Indicator of a user-supplied mask (nonzero entries of a field).
    CustomMask(ComplexField),
}

impl PhantomKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhantomKind::CartoonBlob => "cartoon-blob",
            PhantomKind::CenteredSquare => "centered-square",
            PhantomKind::CustomMask(_) => "custom-mask",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    /// Parses the mask-free kinds; `custom-mask` needs a mask and is built
    /// directly.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartoon-blob" => Ok(PhantomKind::CartoonBlob),
            "centered-square" => Ok(PhantomKind::CenteredSquare),
            "custom-mask" => Err(Error::Config(
                "custom-mask phantoms need a mask file".to_string(),
            )),
            other => Err(Error::Config(format!("unknown phantom kind '{other}'"))),
        }
    }
}

/// Half side length of the centred square phantom.
pub const SQUARE_HALF_SIDE: f64 = 0.3;

/// Full phantom description: geometry, jump height and an optional smooth
/// background bump.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub kind: PhantomKind,
    pub amplitude: f64,
    pub smooth_background: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct BlobShape {
    cx: f64,
    cy: f64,
    r0: f64,
}

const BLOB: BlobShape = BlobShape {
    cx: 0.05,
    cy: -0.03,
    r0: 0.42,
};

fn blob_radius(theta: f64) -> f64 {
    BLOB.r0 + 0.07 * (3.0 * theta).cos() + 0.04 * (2.0 * theta + 0.4).sin()
}

/// `(1 - t^2)^3` for `t < 1`: a C^2 bump.
fn c2_bump(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        let s = 1.0 - t * t;
        s * s * s
    }
}

const BACKGROUND_RADIUS: f64 = 0.72;

impl Phantom {
    pub fn new(kind: PhantomKind, amplitude: f64) -> Self {
        Self {
            kind,
            amplitude,
            smooth_background: None,
        }
    }

    pub fn with_background(mut self, height: f64) -> Self {
        self.smooth_background = Some(height);
        self
    }

    pub fn render(&self, grid: Grid2D) -> Result<ComplexField> {
        let mut f = make_phantom(&self.kind, grid, self.amplitude)?;
        if let Some(b) = self.smooth_background {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::Config(format!(
                    "smooth background height must be nonnegative, got {b}"
                )));
            }
            let bg = ComplexField::from_real_fn(grid, |x, y| {
                b * c2_bump(x.hypot(y) / BACKGROUND_RADIUS)
            });
            f = &f + &bg;
        }
        Ok(f)
    }
}

/// Renders a phantom of the given kind and jump height on `grid`.
pub fn make_phantom(kind: &PhantomKind, grid: Grid2D, amplitude: f64) -> Result<ComplexField> {
    if !amplitude.is_finite() || amplitude < 0.0 {
        return Err(Error::Config(format!(
            "phantom amplitude must be nonnegative, got {amplitude}"
        )));
    }
    let field = match kind {
        PhantomKind::CenteredSquare => ComplexField::from_real_fn(grid, |x, y| {
            if x.abs().max(y.abs()) <= SQUARE_HALF_SIDE {
                amplitude
            } else {
                0.0
            }
        }),
        PhantomKind::CartoonBlob => {
            // smooth interior profile, normalised below so the largest sample
            // equals the amplitude
            let raw = ComplexField::from_real_fn(grid, |x, y| {
                let dx = x - BLOB.cx;
                let dy = y - BLOB.cy;
                let r = dx.hypot(dy);
                let theta = dy.atan2(dx);
                if r < blob_radius(theta) {
                    1.0 - 0.3 * ((x + 0.2).powi(2) + (y - 0.15).powi(2))
                } else {
                    0.0
                }
            });
            let peak = raw.max_abs();
            if peak > 0.0 {
                raw.scaled(Complex64::new(amplitude / peak, 0.0))
            } else {
                raw
            }
        }
        PhantomKind::CustomMask(mask) => {
            grid.check_same(&mask.grid())?;
            let f = ComplexField::from_values(
                grid,
                mask.values()
                    .iter()
                    .map(|v| {
                        if v.norm() > 0.0 {
                            Complex64::new(amplitude, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect(),
            )?;
            if mask.support_radius() >= SUPPORT_RADIUS {
                return Err(Error::Config(format!(
                    "mask support reaches radius {:.3}, must stay inside {SUPPORT_RADIUS}",
                    mask.support_radius()
                )));
            }
            f
        }
    };
    Ok(field)
}

/// Largest radius reached by the blob boundary; used by tests.
pub fn blob_max_radius() -> f64 {
    let mut r: f64 = 0.0;
    for s in 0..3600 {
        let theta = 2.0 * PI * s as f64 / 3600.0;
        let rb = blob_radius(theta);
        r = r.max((BLOB.cx + rb * theta.cos()).hypot(BLOB.cy + rb * theta.sin()));
    }
    r
}

/// Boundary mask of a phantom: cells whose 4-neighbourhood contains both an
/// inside and an outside cell (support of the jump set).
pub fn jump_set(f: &ComplexField) -> Vec<bool> {
    let grid = f.grid();
    let n = grid.n();
    let inside = |i: usize, j: usize| f[(i, j)].norm() > 0.0;
    let mut edge = vec![false; grid.len()];
    for i in 0..n {
        for j in 0..n {
            let here = inside(i, j);
            let mut differs = false;
            if i > 0 {
                differs |= inside(i - 1, j) != here;
            }
            if i + 1 < n {
                differs |= inside(i + 1, j) != here;
            }
            if j > 0 {
                differs |= inside(i, j - 1) != here;
            }
            if j + 1 < n {
                differs |= inside(i, j + 1) != here;
            }
            edge[grid.index(i, j)] = differs;
        }
    }
    edge
}

/// Cells within `width` pixels (Chebyshev distance) of a marked cell.
pub fn dilate(mask: &[bool], n: usize, width: usize) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    let w = width as isize;
    for i in 0..n {
        for j in 0..n {
            if !mask[i * n + j] {
                continue;
            }
            for di in -w..=w {
                for dj in -w..=w {
                    let (ii, jj) = (i as isize + di, j as isize + dj);
                    if ii >= 0 && jj >= 0 && (ii as usize) < n && (jj as usize) < n {
                        out[ii as usize * n + jj as usize] = true;
                    }
                }
            }
        }
    }
    out
}

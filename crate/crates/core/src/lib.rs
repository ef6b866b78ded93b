//! Inverse medium scattering in two dimensions with shearlet sparsity.
//!
//! The crate covers the forward Helmholtz problem (Lippmann-Schwinger solves
//! with an FFT volume potential and GMRES), the multistatic measurement
//! operator with its derivative and adjoint, thresholded Landweber
//! reconstructions with shearlet, pixel-L^p or no penalty, and the
//! Schrodinger backscattering / inverse Born pipeline.

pub mod born;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod grid;
pub mod helmholtz;
pub mod inversion;
pub mod io;
pub mod measurement;
pub mod shearlet;

pub use error::{Error, Result};
pub use grid::{rel_l2_error, ComplexField, Grid2D, Phantom, PhantomKind};
pub use shearlet::{CoefficientSet, ShearletSystem};

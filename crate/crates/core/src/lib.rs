//! Numerical toolkit for the fractional generalized Langevin model of
//! single-file diffusion.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] and [`mlf`]: gamma and Mittag-Leffler functions;
//! * [`quad`]: adaptive Gauss-Kronrod quadrature;
//! * [`fraccalc`]: fractional integrals and Caputo derivatives on grids;
//! * [`laplace`]: numerical Laplace inversion of the model transfer functions;
//! * [`gle`]: Green function, mean, variance, MSD and asymptotic laws;
//! * [`msd_models`]: closed-form MSD curves and regime analysis;
//! * [`simulate`]: Monte Carlo sampling of the Gaussian solution process;
//! * [`fpe`]: the effective Fokker-Planck equation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fpe;
pub mod fraccalc;
pub mod gle;
pub mod laplace;
pub mod mlf;
pub mod msd_models;
pub mod quad;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};

//! Resonant Jaynes-Cummings oracle for the probe-detector model.
//!
//! A two-level probe atom enters the cavity in its ground state, couples
//! resonantly for a dimensionless interaction phase y = g t, and is then
//! measured. Finding it excited heralds a one-count event whose effect on
//! the field must equal the `H(y)` jump model. This module rederives that
//! jump from the full 2d x 2d atom-field unitary with no shared code
//! against [`crate::jump::apply_jump`], so the two act as independent
//! checks of each other.
//!
//! Joint basis ordering: |g,0> .. |g,d-1>, |e,0> .. |e,d-1>.
//!
//! Truncation convention: the interaction couples |g,n> with |e,n-1>
//! inside closed two-dimensional blocks, so every block fits the
//! truncated space except the partner of |e,d-1>, which would be |g,d>.
//! That single level is left inert, keeping the matrix exactly unitary.
//! With the atom starting in |g> the level is never populated anyway.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, DIM_MIN};
use crate::jump::{JumpOutcome, ZERO_JUMP_THRESHOLD};

/// How to build the atom-field unitary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnitaryConstruction {
    /// Closed-form rotation in each {|g,n>, |e,n-1>} block.
    #[default]
    AnalyticBlocks,
    /// Scaled-and-squared Taylor series of exp(-i y H) for the same
    /// truncated coupling H. Slower; exists to cross-check the blocks.
    SeriesExponential,
}

fn validate(y: f64, dim: usize) -> Result<()> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::BadInteractionPhase(y));
    }
    if dim < DIM_MIN {
        return Err(Error::DimensionTooSmall(dim));
    }
    Ok(())
}

/// The 2d x 2d interaction-picture evolution operator at phase y.
///
/// In each coupled block the action is a rotation:
/// |g,n>   -> cos(y sqrt(n)) |g,n>   - i sin(y sqrt(n)) |e,n-1>
/// |e,n-1> -> cos(y sqrt(n)) |e,n-1> - i sin(y sqrt(n)) |g,n>
pub fn jc_unitary(y: f64, dim: usize, how: UnitaryConstruction) -> Result<DMatrix<Complex64>> {
    validate(y, dim)?;
    match how {
        UnitaryConstruction::AnalyticBlocks => Ok(analytic_unitary(y, dim)),
        UnitaryConstruction::SeriesExponential => Ok(series_unitary(y, dim)),
    }
}

fn analytic_unitary(y: f64, dim: usize) -> DMatrix<Complex64> {
    let d = dim;
    let mut u = DMatrix::from_element(2 * d, 2 * d, Complex64::new(0.0, 0.0));
    u[(0, 0)] = Complex64::new(1.0, 0.0); // |g,0> is uncoupled
    u[(2 * d - 1, 2 * d - 1)] = Complex64::new(1.0, 0.0); // |e,d-1> kept inert
    for n in 1..d {
        let angle = y * (n as f64).sqrt();
        let c = Complex64::new(angle.cos(), 0.0);
        let ms = Complex64::new(0.0, -angle.sin());
        let g_n = n;
        let e_nm1 = d + n - 1;
        u[(g_n, g_n)] = c;
        u[(e_nm1, e_nm1)] = c;
        u[(e_nm1, g_n)] = ms;
        u[(g_n, e_nm1)] = ms;
    }
    u
}

fn series_unitary(y: f64, dim: usize) -> DMatrix<Complex64> {
    let d = dim;
    // truncated coupling: H |g,n> = sqrt(n) |e,n-1>, and conjugate
    let mut h = DMatrix::from_element(2 * d, 2 * d, Complex64::new(0.0, 0.0));
    for n in 1..d {
        let w = Complex64::new((n as f64).sqrt(), 0.0);
        h[(d + n - 1, n)] = w;
        h[(n, d + n - 1)] = w;
    }
    let a = h.map(|z| z * Complex64::new(0.0, -y));
    // spectral norm of the coupling is sqrt(d-1), known exactly
    let spectral = y * ((d - 1) as f64).sqrt();
    matrix_exp(&a, spectral)
}

/// exp(A) by scaling and squaring with a plain Taylor series; `spectral`
/// is an upper bound on the 2-norm of A.
fn matrix_exp(a: &DMatrix<Complex64>, spectral: f64) -> DMatrix<Complex64> {
    let n = a.nrows();
    let squarings = if spectral > 0.5 {
        (spectral / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new(0.5f64.powi(squarings as i32), 0.0);
    let b = a.map(|z| z * scale);

    let mut sum = DMatrix::identity(n, n);
    let mut term: DMatrix<Complex64> = DMatrix::identity(n, n);
    for k in 1..=64u32 {
        term = (&term * &b).map(|z| z / k as f64);
        sum += &term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Field state conditioned on finding the probe excited, computed the
/// long way round: embed rho with the atom in |g>, evolve with the full
/// unitary, project the atom on |e>, trace it out, renormalize.
///
/// `norm` is the click probability. Errs with
/// [`Error::ZeroJumpWeight`] when that probability is negligible
/// (vacuum, or y at an exact revival).
pub fn conditioned_field_state(
    y: f64,
    rho: &DensityMatrix,
    how: UnitaryConstruction,
) -> Result<JumpOutcome> {
    let d = rho.dim();
    let u = jc_unitary(y, d, how)?;

    let mut joint = DMatrix::from_element(2 * d, 2 * d, Complex64::new(0.0, 0.0));
    for m in 0..d {
        for n in 0..d {
            joint[(m, n)] = rho.element(m, n); // |g><g| (x) rho
        }
    }
    let evolved = &u * joint * u.adjoint();

    // excited block <e,m| . |e,n>
    let mut field = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    let mut norm = 0.0;
    for m in 0..d {
        for n in 0..d {
            field[(m, n)] = evolved[(d + m, d + n)];
        }
        norm += field[(m, m)].re;
    }
    if norm <= ZERO_JUMP_THRESHOLD {
        return Err(Error::ZeroJumpWeight(norm));
    }
    let inv = Complex64::new(1.0 / norm, 0.0);
    let field = field.map(|z| z * inv);
    let tail = (rho.tail_mass_bound() / norm).min(1.0);
    Ok(JumpOutcome {
        state: DensityMatrix::from_parts(field, tail),
        norm,
    })
}

/// Probability that the probe exits excited, from the diagonal alone:
/// sum_n sin^2(y sqrt(n)) chi_n. Independent of the unitary route; the
/// two must agree to machine precision.
pub fn excitation_probability(y: f64, rho: &DensityMatrix) -> Result<f64> {
    validate(y, rho.dim())?;
    let chi = rho.number_distribution();
    Ok((1..rho.dim())
        .map(|n| {
            let s = (y * (n as f64).sqrt()).sin();
            s * s * chi.get(n)
        })
        .sum())
}

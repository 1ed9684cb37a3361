//! Truncated single-mode Fock space: density matrices, standard state
//! preparations, and photon-number statistics.
//!
//! Every state lives on the first `dim` number levels |0>..|dim-1|. States
//! are not renormalized after truncation; the dropped probability mass is
//! tracked explicitly in [`DensityMatrix::tail_mass_bound`] so downstream
//! tolerances can account for it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use statrs::function::factorial::ln_factorial;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Hard cap on the truncation dimension.
pub const DIM_CAP: usize = 512;

/// Smallest useful truncation: room for |0> and |1>.
pub const DIM_MIN: usize = 2;

/// Default bound on the probability mass dropped by truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

/// How the truncation dimension of a prepared state is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Use exactly this many levels.
    Dim(usize),
    /// Use the smallest dimension whose certified tail mass is at or
    /// below this bound.
    TailBound(f64),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::TailBound(DEFAULT_TAIL_TOLERANCE)
    }
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Truncation::Dim(d) => write!(f, "dim({d})"),
            // exponential form: "tail(1e-12)" echoes back parseable and short
            Truncation::TailBound(eps) => write!(f, "tail({eps:e})"),
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    /// Accepts `dim(n)` or `tail(eps)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config {
            line: 0,
            message: msg,
        };
        let s = s.trim();
        let (name, arg) = s
            .strip_suffix(')')
            .and_then(|rest| rest.split_once('('))
            .ok_or_else(|| bad(format!("bad truncation '{s}': expected dim(n) or tail(eps)")))?;
        match name.trim().to_ascii_lowercase().as_str() {
            "dim" => {
                let d: usize = arg
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("'{arg}' is not a dimension")))?;
                Ok(Truncation::Dim(d))
            }
            "tail" => {
                let eps: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("'{arg}' is not a tolerance")))?;
                Ok(Truncation::TailBound(eps))
            }
            other => Err(bad(format!("unknown truncation kind '{other}'"))),
        }
    }
}

impl Truncation {
    fn validate(&self) -> Result<()> {
        match *self {
            Truncation::Dim(d) if d < DIM_MIN => Err(Error::DimensionTooSmall(d)),
            Truncation::Dim(d) if d > DIM_CAP => Err(Error::DimensionTooLarge {
                requested: d,
                cap: DIM_CAP,
            }),
            Truncation::TailBound(eps) if !(eps > 0.0 && eps < 1.0) => {
                Err(Error::BadTailTolerance(eps))
            }
            _ => Ok(()),
        }
    }
}

/// A state of the truncated mode, stored as a dense complex matrix in the
/// number basis, together with an upper bound on the probability mass the
/// truncation discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
    tail_mass_bound: f64,
}

impl DensityMatrix {
    /// Wraps a raw matrix. Callers must guarantee Hermiticity and
    /// trace <= 1; `check_invariants` verifies after the fact.
    pub fn from_parts(mat: DMatrix<Complex64>, tail_mass_bound: f64) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "density matrix must be square");
        DensityMatrix {
            mat,
            tail_mass_bound,
        }
    }

    /// Diagonal matrix from number-basis probabilities.
    pub fn from_diagonal(probs: &[f64], tail_mass_bound: f64) -> Self {
        let d = probs.len();
        let mat = DMatrix::from_fn(d, d, |m, n| {
            if m == n {
                Complex64::new(probs[n], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        DensityMatrix::from_parts(mat, tail_mass_bound)
    }

    /// Pure state |psi><psi| from a number-basis amplitude vector.
    pub fn from_amplitudes(amps: &[Complex64], tail_mass_bound: f64) -> Self {
        let d = amps.len();
        let mat = DMatrix::from_fn(d, d, |m, n| amps[m] * amps[n].conj());
        DensityMatrix::from_parts(mat, tail_mass_bound)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn element(&self, m: usize, n: usize) -> Complex64 {
        self.mat[(m, n)]
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|n| self.mat[(n, n)].re).sum()
    }

    /// Number-basis probabilities chi_n = <n|rho|n>.
    pub fn number_distribution(&self) -> FockDistribution {
        FockDistribution::new((0..self.dim()).map(|n| self.mat[(n, n)].re).collect())
    }

    /// Structural invariants: Hermiticity to 1e-12 elementwise, real
    /// non-negative diagonal, and unit trace up to 1e-10 plus tail slack.
    /// Positivity is a separate, more expensive check.
    pub fn check_invariants(&self) -> Result<()> {
        let d = self.dim();
        if d < DIM_MIN {
            return Err(Error::DimensionTooSmall(d));
        }
        for m in 0..d {
            let diag = self.mat[(m, m)];
            if diag.im.abs() > 1e-12 || diag.re < -1e-12 || diag.re > 1.0 + 1e-10 {
                return Err(Error::BadTable(format!(
                    "diagonal element {m} is not a probability: {diag}"
                )));
            }
            for n in (m + 1)..d {
                let delta = (self.mat[(m, n)] - self.mat[(n, m)].conj()).norm();
                if delta > 1e-12 {
                    return Err(Error::BadTable(format!(
                        "Hermiticity violated at ({m},{n}) by {delta:.3e}"
                    )));
                }
            }
        }
        let trace_error = (self.trace() - 1.0).abs();
        if trace_error > 1e-10 + self.tail_mass_bound {
            return Err(Error::BadTable(format!(
                "trace deviates from 1 by {trace_error:.3e} with tail bound {:.3e}",
                self.tail_mass_bound
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue, for positivity tests. O(d^3).
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.mat.clone().symmetric_eigen();
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Photon-number probabilities chi_n over the truncated levels.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    probs: Vec<f64>,
}

impl FockDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        FockDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// chi_n, zero beyond the truncated range.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// <n> over the truncated levels.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// <n^2> over the truncated levels.
    pub fn mean_square(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64) * (n as f64) * p)
            .sum()
    }
}

/// First two number moments plus the Mandel Q parameter.
///
/// Q = (<n^2> - <n>^2)/<n> - 1. It is reported as `None` for states with
/// <n> = 0 where the ratio is undefined (vacuum).
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStatistics {
    pub chi: FockDistribution,
    pub mean: f64,
    pub mean_square: f64,
    pub mandel_q: Option<f64>,
}

/// Number statistics of a state, read off the matrix diagonal.
pub fn photon_statistics(rho: &DensityMatrix) -> PhotonStatistics {
    let chi = rho.number_distribution();
    let mean = chi.mean();
    let mean_square = chi.mean_square();
    let mandel_q = if mean > 0.0 {
        Some((mean_square - mean * mean) / mean - 1.0)
    } else {
        None
    };
    PhotonStatistics {
        chi,
        mean,
        mean_square,
        mandel_q,
    }
}

/// One-count rate gamma * <n> of a detector with coupling gamma watching
/// this state. With gamma = 1 this is just the mean photon number.
pub fn absorption_rate(rho: &DensityMatrix, gamma: f64) -> f64 {
    gamma * rho.number_distribution().mean()
}

/// The state families the detector experiments start from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatePrep {
    /// Thermal state with mean photon number `mean` > 0.
    Thermal { mean: f64 },
    /// Coherent state |alpha> with |alpha|^2 <= 50.
    Coherent { alpha: Complex64 },
    /// Number state |level>.
    Fock { level: usize },
    /// Squeezed vacuum with squeeze parameter r >= 0, sinh^2(r) <= 25.
    SqueezedVacuum { r: f64 },
}

impl fmt::Display for StatePrep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatePrep::Thermal { mean } => write!(f, "thermal({mean})"),
            StatePrep::Coherent { alpha } => {
                if alpha.im == 0.0 {
                    write!(f, "coherent({})", alpha.re)
                } else {
                    write!(f, "coherent({},{})", alpha.re, alpha.im)
                }
            }
            StatePrep::Fock { level } => write!(f, "fock({level})"),
            StatePrep::SqueezedVacuum { r } => write!(f, "squeezed({r})"),
        }
    }
}

impl FromStr for StatePrep {
    type Err = Error;

    /// Accepts `thermal(nbar)`, `coherent(re[,im])`, `fock(n)`,
    /// `squeezed(r)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config {
            line: 0,
            message: format!("bad state '{s}': {msg}"),
        };
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| bad("expected name(args)"))?;
        if !s.ends_with(')') {
            return Err(bad("missing closing parenthesis"));
        }
        let name = &s[..open];
        let args: Vec<&str> = s[open + 1..s.len() - 1]
            .split(',')
            .map(str::trim)
            .collect();
        let num = |a: &str| -> Result<f64> {
            a.parse::<f64>()
                .map_err(|_| bad(&format!("'{a}' is not a number")))
        };
        match (name, args.as_slice()) {
            ("thermal", [m]) => Ok(StatePrep::Thermal { mean: num(m)? }),
            ("coherent", [re]) => Ok(StatePrep::Coherent {
                alpha: Complex64::new(num(re)?, 0.0),
            }),
            ("coherent", [re, im]) => Ok(StatePrep::Coherent {
                alpha: Complex64::new(num(re)?, num(im)?),
            }),
            ("fock", [n]) => {
                let level = n
                    .parse::<usize>()
                    .map_err(|_| bad(&format!("'{n}' is not a level index")))?;
                Ok(StatePrep::Fock { level })
            }
            ("squeezed", [r]) => Ok(StatePrep::SqueezedVacuum { r: num(r)? }),
            _ => Err(bad("unknown state family or wrong argument count")),
        }
    }
}

/// Builds the requested state at the requested truncation.
pub fn prepare(prep: &StatePrep, how: Truncation) -> Result<DensityMatrix> {
    how.validate()?;
    match *prep {
        StatePrep::Thermal { mean } => thermal_state(mean, how),
        StatePrep::Coherent { alpha } => coherent_state(alpha, how),
        StatePrep::Fock { level } => fock_state(level, how),
        StatePrep::SqueezedVacuum { r } => squeezed_vacuum(r, how),
    }
}

/// Thermal state: chi_n = nbar^n / (nbar+1)^(n+1), a geometric ladder with
/// ratio q = nbar/(nbar+1). The discarded tail is exactly q^dim.
fn thermal_state(mean: f64, how: Truncation) -> Result<DensityMatrix> {
    if !mean.is_finite() || mean <= 0.0 {
        return Err(Error::NonPositiveMeanPhotons(mean));
    }
    let q = mean / (mean + 1.0);
    let dim = match how {
        Truncation::Dim(d) => d,
        Truncation::TailBound(eps) => {
            // smallest d with q^d <= eps
            let d = (eps.ln() / q.ln()).ceil() as usize;
            let d = d.max(DIM_MIN);
            if d > DIM_CAP {
                return Err(Error::TailNeedsTooManyLevels {
                    tolerance: eps,
                    cap: DIM_CAP,
                });
            }
            d
        }
    };
    let chi0 = 1.0 / (mean + 1.0);
    let mut probs = Vec::with_capacity(dim);
    let mut p = chi0;
    for _ in 0..dim {
        probs.push(p);
        p *= q;
    }
    Ok(DensityMatrix::from_diagonal(&probs, q.powi(dim as i32)))
}

/// Coherent state |alpha>: c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!),
/// kept as the full projector so off-diagonal coherences survive.
///
/// The tail bound is the geometric-ratio remainder of the Poisson weights:
/// for d > nbar, sum_{n>=d} p_n <= p_d / (1 - nbar/(d+1)).
fn coherent_state(alpha: Complex64, how: Truncation) -> Result<DensityMatrix> {
    let nbar = alpha.norm_sqr();
    if nbar > 50.0 {
        return Err(Error::AmplitudeTooLarge(nbar));
    }
    if nbar == 0.0 {
        return vacuum(how);
    }

    // Poisson remainder bound after keeping levels below d; infinity while
    // the ratio argument does not certify convergence.
    let remainder = |p_d: f64, d: usize| -> f64 {
        let ratio = nbar / (d as f64 + 1.0);
        if ratio < 1.0 {
            p_d / (1.0 - ratio)
        } else {
            f64::INFINITY
        }
    };

    let dim = match how {
        Truncation::Dim(d) => d,
        Truncation::TailBound(eps) => {
            let mut p = (-nbar).exp(); // p_0
            let mut d = 0usize;
            loop {
                // p is the Poisson weight at level d
                if d >= DIM_MIN && remainder(p, d) <= eps {
                    break d;
                }
                if d >= DIM_CAP {
                    return Err(Error::TailNeedsTooManyLevels {
                        tolerance: eps,
                        cap: DIM_CAP,
                    });
                }
                p *= nbar / (d as f64 + 1.0);
                d += 1;
            }
        }
    };

    let ln_mag_alpha = nbar.ln() / 2.0;
    let phase = alpha.arg();
    let amps: Vec<Complex64> = (0..dim)
        .map(|n| {
            let ln_mag = -nbar / 2.0 + n as f64 * ln_mag_alpha - 0.5 * ln_factorial(n as u64);
            Complex64::from_polar(ln_mag.exp(), n as f64 * phase)
        })
        .collect();

    let p_dim = (-nbar + dim as f64 * nbar.ln() - ln_factorial(dim as u64)).exp();
    let tail = remainder(p_dim, dim).min(1.0);
    Ok(DensityMatrix::from_amplitudes(&amps, tail))
}

fn fock_state(level: usize, how: Truncation) -> Result<DensityMatrix> {
    let dim = match how {
        Truncation::Dim(d) => {
            if level >= d {
                return Err(Error::FockLevelTooLarge { level, dim: d });
            }
            d
        }
        Truncation::TailBound(_) => {
            let d = (level + 1).max(DIM_MIN);
            if d > DIM_CAP {
                return Err(Error::DimensionTooLarge {
                    requested: d,
                    cap: DIM_CAP,
                });
            }
            d
        }
    };
    let mut probs = vec![0.0; dim];
    probs[level] = 1.0;
    Ok(DensityMatrix::from_diagonal(&probs, 0.0))
}

/// Squeezed vacuum: only even levels are occupied,
/// c_2k = (-tanh r)^k sqrt((2k)!) / (2^k k!) / sqrt(cosh r).
/// Even-level weights decay at worst geometrically with ratio tanh^2(r),
/// which gives the certified tail bound.
fn squeezed_vacuum(r: f64, how: Truncation) -> Result<DensityMatrix> {
    if r < 0.0 || !r.is_finite() {
        return Err(Error::NegativeSqueeze(r));
    }
    let s = r.sinh().powi(2);
    if s > 25.0 {
        return Err(Error::SqueezeTooLarge(s));
    }
    if r == 0.0 {
        return vacuum(how);
    }

    let t = r.tanh();
    let t2 = t * t;
    let geo = t2 / (1.0 - t2); // = sinh^2 r, the remainder ratio sum
    let p0 = 1.0 / r.cosh();

    // largest occupied level 2k_max
    let k_max = match how {
        Truncation::Dim(d) => (d - 1) / 2,
        Truncation::TailBound(eps) => {
            let mut p = p0;
            let mut k = 0usize;
            loop {
                if p * geo <= eps {
                    break k;
                }
                if 2 * (k + 1) + 1 > DIM_CAP {
                    return Err(Error::TailNeedsTooManyLevels {
                        tolerance: eps,
                        cap: DIM_CAP,
                    });
                }
                p *= t2 * (2.0 * k as f64 + 1.0) / (2.0 * k as f64 + 2.0);
                k += 1;
            }
        }
    };
    let dim = match how {
        Truncation::Dim(d) => d,
        Truncation::TailBound(_) => (2 * k_max + 1).max(DIM_MIN),
    };

    let ln_t = t.ln();
    let ln_cosh = r.cosh().ln();
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    let mut p_last = p0;
    for k in 0..=k_max {
        let kf = k as f64;
        let ln_mag = 0.5 * ln_factorial(2 * k as u64) - kf * std::f64::consts::LN_2
            - ln_factorial(k as u64)
            + kf * ln_t
            - 0.5 * ln_cosh;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        amps[2 * k] = Complex64::new(sign * ln_mag.exp(), 0.0);
        p_last = amps[2 * k].norm_sqr();
    }
    let tail = (p_last * geo).min(1.0);
    Ok(DensityMatrix::from_amplitudes(&amps, tail))
}

fn vacuum(how: Truncation) -> Result<DensityMatrix> {
    let dim = match how {
        Truncation::Dim(d) => d,
        Truncation::TailBound(_) => DIM_MIN,
    };
    let mut probs = vec![0.0; dim];
    probs[0] = 1.0;
    Ok(DensityMatrix::from_diagonal(&probs, 0.0))
}

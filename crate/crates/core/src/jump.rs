//! The catalog of one-count jump models and their action on states.
//!
//! A detector click takes `rho` to `J rho / Tr(J rho)`. Four of the five
//! models act through a lowering operator `O` with `J rho = O rho O^dag`
//! and `O|n> = w(n)|n-1>`:
//!
//! * `A`: w(n) = sqrt(n), plain annihilation
//! * `E`: w(n) = 1, the exponential phase operator
//! * `H(y)`: w(n) = sin(y sqrt(n)), a resonant two-level probe at
//!   dimensionless interaction phase y
//! * `Beta(b)`: w(n) = n^(1/2-b), a family sweeping from A at b = 0 to
//!   E at b = 1/2
//!
//! The fifth, `N`, is the number-count channel `J rho = nhat rho nhat`.
//! It preserves the photon number and has no lowering operator, so the
//! matrix route treats it separately.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockDistribution, PhotonStatistics};

/// Jump norms at or below this are treated as "no photon to subtract".
pub const ZERO_JUMP_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpModel {
    A,
    E,
    H { y: f64 },
    N,
    Beta { beta: f64 },
}

impl JumpModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpModel::H { y } if !(y > 0.0 && y.is_finite()) => {
                Err(Error::BadInteractionPhase(y))
            }
            JumpModel::Beta { beta } if !(0.0..=0.5).contains(&beta) => {
                Err(Error::BadFamilyExponent(beta))
            }
            _ => Ok(()),
        }
    }

    /// True for models expressible as a single lowering operator.
    pub fn is_lowering(&self) -> bool {
        !matches!(self, JumpModel::N)
    }

    /// Lowering weight w(n). Zero at n = 0 for every model: a lowering
    /// operator annihilates the vacuum. Unused for `N`.
    fn weight(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let x = n as f64;
        match *self {
            JumpModel::A => x.sqrt(),
            JumpModel::E => 1.0,
            JumpModel::H { y } => (y * x.sqrt()).sin(),
            JumpModel::Beta { beta } => x.powf(0.5 - beta),
            JumpModel::N => unreachable!("N has no lowering weight"),
        }
    }

    /// Diagonal strength of the jump at level n: the factor multiplying
    /// chi_n in Tr(J rho). For lowering models this is w(n)^2, for `N`
    /// it is n^2. Zero at n = 0 for every model.
    ///
    /// Computed directly rather than by squaring [`Self::weight`], so
    /// integer-valued cases like A's strength(n) = n stay exact.
    pub fn strength(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let x = n as f64;
        match *self {
            JumpModel::A => x,
            JumpModel::E => 1.0,
            JumpModel::H { y } => {
                let s = (y * x.sqrt()).sin();
                s * s
            }
            JumpModel::Beta { beta } => x.powf(1.0 - 2.0 * beta),
            JumpModel::N => x * x,
        }
    }

    /// Growth of the strength with level, used to bound how much invisible
    /// tail mass a jump can pull into the visible range: strength(n) is
    /// O(factor) for n up to `dim`.
    fn tail_amplification(&self, dim: usize) -> f64 {
        let d = dim as f64;
        match *self {
            JumpModel::A => d,
            JumpModel::E | JumpModel::H { .. } => 1.0,
            JumpModel::Beta { beta } => d.powf(1.0 - 2.0 * beta),
            JumpModel::N => d * d,
        }
    }
}

impl fmt::Display for JumpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            JumpModel::A => write!(f, "A"),
            JumpModel::E => write!(f, "E"),
            JumpModel::H { y } => write!(f, "H({y})"),
            JumpModel::N => write!(f, "N"),
            JumpModel::Beta { beta } => write!(f, "Beta({beta})"),
        }
    }
}

impl FromStr for JumpModel {
    type Err = Error;

    /// Accepts `A`, `E`, `N`, `H(y)`, `Beta(b)`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config {
            line: 0,
            message: msg,
        };
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        let model = match lower.as_str() {
            "a" => JumpModel::A,
            "e" => JumpModel::E,
            "n" => JumpModel::N,
            _ => {
                let (name, arg) = lower
                    .strip_suffix(')')
                    .and_then(|rest| rest.split_once('('))
                    .ok_or_else(|| bad(format!("unknown jump model '{s}'")))?;
                let value: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad model parameter '{arg}'")))?;
                match name.trim() {
                    "h" => JumpModel::H { y: value },
                    "beta" => JumpModel::Beta { beta: value },
                    other => return Err(bad(format!("unknown jump model '{other}'"))),
                }
            }
        };
        model.validate()?;
        Ok(model)
    }
}

/// Matrix form of a lowering-type jump operator on `dim` levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LoweringOperator {
    model: JumpModel,
    weights: Vec<f64>,
}

/// Builds the lowering operator of `model`. `N` is rejected: its jump is
/// not of the form `O rho O^dag` with a lowering `O`.
pub fn lowering_operator(model: JumpModel, dim: usize) -> Result<LoweringOperator> {
    model.validate()?;
    if !model.is_lowering() {
        return Err(Error::NotALoweringModel);
    }
    if dim < crate::fock::DIM_MIN {
        return Err(Error::DimensionTooSmall(dim));
    }
    let weights = (0..dim)
        .map(|n| if n == 0 { 0.0 } else { model.weight(n) })
        .collect();
    Ok(LoweringOperator { model, weights })
}

impl LoweringOperator {
    pub fn model(&self) -> JumpModel {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// w(n); zero at n = 0 and beyond the truncation.
    pub fn weight(&self, n: usize) -> f64 {
        self.weights.get(n).copied().unwrap_or(0.0)
    }

    /// Dense matrix with w(n) on the first superdiagonal: O|n> = w(n)|n-1>.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for n in 1..d {
            m[(n - 1, n)] = Complex64::new(self.weights[n], 0.0);
        }
        m
    }
}

/// A normalized post-count state together with the jump norm
/// `Tr(J rho)` that normalized it.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOutcome {
    pub state: DensityMatrix,
    pub norm: f64,
}

/// Applies one count of `model` to `rho`:
/// `rho -> J rho / Tr(J rho)`.
///
/// The output keeps the input dimension; for lowering models the top
/// level is left empty. Errors with [`Error::ZeroJumpWeight`] when
/// `Tr(J rho)` is at or below [`ZERO_JUMP_THRESHOLD`] (for instance on
/// vacuum) since no click can occur.
pub fn apply_jump(model: JumpModel, rho: &DensityMatrix) -> Result<JumpOutcome> {
    model.validate()?;
    let d = rho.dim();
    let chi = rho.number_distribution();
    let norm: f64 = (0..d).map(|n| model.strength(n) * chi.get(n)).sum();
    if norm <= ZERO_JUMP_THRESHOLD {
        return Err(Error::ZeroJumpWeight(norm));
    }
    let inv = 1.0 / norm;
    let mat = if model.is_lowering() {
        DMatrix::from_fn(d, d, |m, n| {
            if m + 1 < d && n + 1 < d {
                // the diagonal takes strength(m+1) rather than w(m+1)^2:
                // same quantity, but exact where the weight is a root,
                // so diagonals match predict_pn bit for bit
                let factor = if m == n {
                    model.strength(m + 1)
                } else {
                    model.weight(m + 1) * model.weight(n + 1)
                };
                rho.element(m + 1, n + 1) * (factor * inv)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    } else {
        // number-count channel: (n rho n)[m][n] = m n rho[m][n]
        DMatrix::from_fn(d, d, |m, n| {
            rho.element(m, n) * ((m as f64) * (n as f64) * inv)
        })
    };
    let tail = (rho.tail_mass_bound() * model.tail_amplification(d) * inv).min(1.0);
    Ok(JumpOutcome {
        state: DensityMatrix::from_parts(mat, tail),
        norm,
    })
}

/// Closed-form probability of finding `n` photons right after one count
/// of `model` on a state with diagonal `chi`:
///
/// * lowering models: P_n = w(n+1)^2 chi_{n+1} / sum_m w(m)^2 chi_m
/// * `N`:             P_n = n^2 chi_n / <n^2>
///
/// This is an algebraic route independent of the matrix route in
/// [`apply_jump`]; the two must agree on the diagonal.
pub fn predict_pn(model: JumpModel, chi: &FockDistribution, n: usize) -> Result<f64> {
    model.validate()?;
    let norm = jump_norm(model, chi)?;
    let source = if model.is_lowering() { n + 1 } else { n };
    Ok(model.strength(source) * chi.get(source) / norm)
}

/// Post-count distribution over every level of `chi` at once.
pub fn predict_distribution(model: JumpModel, chi: &FockDistribution) -> Result<Vec<f64>> {
    model.validate()?;
    let norm = jump_norm(model, chi)?;
    Ok((0..chi.len())
        .map(|n| {
            let source = if model.is_lowering() { n + 1 } else { n };
            model.strength(source) * chi.get(source) / norm
        })
        .collect())
}

/// Tr(J rho) for a diagonal-only view of the state.
pub fn jump_norm(model: JumpModel, chi: &FockDistribution) -> Result<f64> {
    let norm: f64 = (0..chi.len())
        .map(|n| model.strength(n) * chi.get(n))
        .sum();
    if norm <= ZERO_JUMP_THRESHOLD {
        return Err(Error::ZeroJumpWeight(norm));
    }
    Ok(norm)
}

/// Mean photon number right after one count, in closed form:
///
/// * `A`: <n>_f = <n^2>/<n> - 1, i.e. <n>_i + Q. Subtracting a photon
///   from super-Poissonian light *raises* the mean.
/// * `E`: <n>_f = <n>/(1 - chi_0) - 1.
///
/// Only these two models admit a moment-only formula; the others need the
/// full distribution.
pub fn mean_after_jump(model: JumpModel, stats: &PhotonStatistics) -> Result<f64> {
    model.validate()?;
    match model {
        JumpModel::A => {
            if stats.mean <= 0.0 {
                return Err(Error::DegenerateMean(
                    "model A needs <n> > 0".to_string(),
                ));
            }
            Ok(stats.mean_square / stats.mean - 1.0)
        }
        JumpModel::E => {
            let chi0 = stats.chi.get(0);
            if 1.0 - chi0 <= 0.0 {
                return Err(Error::DegenerateMean(
                    "model E needs chi_0 < 1".to_string(),
                ));
            }
            Ok(stats.mean / (1.0 - chi0) - 1.0)
        }
        other => Err(Error::MeanFormulaUnavailable(other.to_string())),
    }
}

/// The two thermal occupations compatible with a measured chi_1.
///
/// For a thermal state chi_1 = chi_0 (1 - chi_0), so
/// chi_0 = 1/2 +- sqrt(1/4 - chi_1). Returns (upper, lower); the upper
/// branch is the one with mean photon number below 1. Valid only for
/// 0 < chi_1 <= 1/4 (chi_1 = 1/4 is the degenerate double root at
/// nbar = 1).
pub fn chi0_branches(chi1: f64) -> Result<(f64, f64)> {
    if !(chi1 > 0.0 && chi1 <= 0.25) {
        return Err(Error::NoThermalBranch(chi1));
    }
    let disc = (0.25 - chi1).sqrt();
    Ok((0.5 + disc, 0.5 - disc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{photon_statistics, prepare, StatePrep, Truncation};
    use approx::assert_relative_eq;

    fn thermal(mean: f64) -> DensityMatrix {
        prepare(&StatePrep::Thermal { mean }, Truncation::TailBound(1e-15)).unwrap()
    }

    fn coherent(re: f64) -> DensityMatrix {
        prepare(
            &StatePrep::Coherent {
                alpha: Complex64::new(re, 0.0),
            },
            Truncation::TailBound(1e-15),
        )
        .unwrap()
    }

    #[test]
    fn lowering_weights() {
        let a = lowering_operator(JumpModel::A, 8).unwrap();
        assert_eq!(a.weight(4), 2.0);
        assert_eq!(a.weight(0), 0.0);
        let e = lowering_operator(JumpModel::E, 8).unwrap();
        for n in 1..8 {
            assert_eq!(e.weight(n), 1.0);
        }
        let h = lowering_operator(JumpModel::H { y: std::f64::consts::PI }, 8).unwrap();
        assert!(h.weight(1).abs() < 1e-15); // sin(pi) = 0: a pi phase never clicks on |1>
        assert!(lowering_operator(JumpModel::N, 8).is_err());
    }

    #[test]
    fn beta_family_interpolates() {
        let a = lowering_operator(JumpModel::A, 16).unwrap();
        let b0 = lowering_operator(JumpModel::Beta { beta: 0.0 }, 16).unwrap();
        let e = lowering_operator(JumpModel::E, 16).unwrap();
        let bh = lowering_operator(JumpModel::Beta { beta: 0.5 }, 16).unwrap();
        for n in 1..16 {
            assert_relative_eq!(b0.weight(n), a.weight(n), max_relative = 1e-15);
            assert_eq!(bh.weight(n), e.weight(n));
        }
    }

    #[test]
    fn operator_matrix_shape() {
        let op = lowering_operator(JumpModel::A, 4).unwrap();
        let m = op.matrix();
        assert_eq!(m[(2, 3)].re, 3.0f64.sqrt());
        assert_eq!(m[(3, 2)].re, 0.0);
        assert_eq!(m[(0, 0)].re, 0.0);
    }

    #[test]
    fn annihilation_on_number_state() {
        let rho = prepare(&StatePrep::Fock { level: 3 }, Truncation::Dim(6)).unwrap();
        let out = apply_jump(JumpModel::A, &rho).unwrap();
        assert_eq!(out.norm, 3.0);
        assert_eq!(out.state.element(2, 2).re, 1.0);
        assert_eq!(out.state.dim(), 6);
        out.state.check_invariants().unwrap();
    }

    #[test]
    fn vacuum_cannot_click() {
        let rho = prepare(&StatePrep::Fock { level: 0 }, Truncation::Dim(4)).unwrap();
        for model in [JumpModel::A, JumpModel::E, JumpModel::H { y: 2.0 }, JumpModel::N] {
            assert!(matches!(
                apply_jump(model, &rho),
                Err(Error::ZeroJumpWeight(_))
            ));
        }
    }

    #[test]
    fn thermal_is_fixed_point_of_e() {
        let rho = thermal(0.8);
        let out = apply_jump(JumpModel::E, &rho).unwrap();
        let before = rho.number_distribution();
        let after = out.state.number_distribution();
        for n in 0..rho.dim() {
            assert!(
                (after.get(n) - before.get(n)).abs() < 1e-10 + rho.tail_mass_bound() * 10.0,
                "level {n} moved"
            );
        }
    }

    #[test]
    fn coherent_is_fixed_point_of_a() {
        let rho = coherent(1.2);
        let out = apply_jump(JumpModel::A, &rho).unwrap();
        let d = rho.dim();
        // full matrix comparison, not just the diagonal; the top level is
        // emptied by the jump so compare below it
        let mut max_dev = 0.0f64;
        for m in 0..d - 1 {
            for n in 0..d - 1 {
                max_dev = max_dev.max((out.state.element(m, n) - rho.element(m, n)).norm());
            }
        }
        assert!(max_dev < 1e-9, "deviation {max_dev}");
        assert_relative_eq!(out.norm, 1.44, max_relative = 1e-9);
    }

    #[test]
    fn number_channel_preserves_number() {
        let rho = thermal(1.0);
        let stats = photon_statistics(&rho);
        let out = apply_jump(JumpModel::N, &rho).unwrap();
        let after = out.state.number_distribution();
        for n in 0..rho.dim() {
            assert_relative_eq!(
                after.get(n),
                n as f64 * n as f64 * stats.chi.get(n) / stats.mean_square,
                epsilon = 1e-15
            );
        }
        assert_relative_eq!(out.norm, stats.mean_square, max_relative = 1e-12);
    }

    #[test]
    fn matrix_and_algebraic_routes_agree() {
        let states = [
            thermal(0.7),
            coherent(1.5),
            prepare(&StatePrep::SqueezedVacuum { r: 0.8 }, Truncation::TailBound(1e-15)).unwrap(),
        ];
        let models = [
            JumpModel::A,
            JumpModel::E,
            JumpModel::H { y: 2.0 },
            JumpModel::N,
            JumpModel::Beta { beta: 0.3 },
        ];
        for rho in &states {
            let chi = rho.number_distribution();
            for &model in &models {
                let out = match apply_jump(model, rho) {
                    Ok(out) => out,
                    Err(Error::ZeroJumpWeight(_)) => continue,
                    Err(e) => panic!("{e}"),
                };
                let diag = out.state.number_distribution();
                for n in 0..rho.dim() {
                    let predicted = predict_pn(model, &chi, n).unwrap();
                    assert!(
                        (diag.get(n) - predicted).abs() < 1e-12,
                        "{model} level {n}: {} vs {}",
                        diag.get(n),
                        predicted
                    );
                }
            }
        }
    }

    #[test]
    fn predicted_click_statistics_thermal() {
        // chi_0 = 0.6 thermal: P_0^A = chi_0^2 = 0.36, P_1^A = 0.288,
        // P_0^E = chi_0 = 0.6
        let rho = thermal(2.0 / 3.0);
        let chi = rho.number_distribution();
        assert_relative_eq!(
            predict_pn(JumpModel::A, &chi, 0).unwrap(),
            0.36,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            predict_pn(JumpModel::A, &chi, 1).unwrap(),
            0.288,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            predict_pn(JumpModel::E, &chi, 0).unwrap(),
            0.6,
            epsilon = 1e-12
        );
    }

    #[test]
    fn predicted_click_statistics_coherent() {
        let rho = coherent(1.0);
        let chi = rho.number_distribution();
        let e1 = (-1.0f64).exp();
        // an A click leaves a coherent state untouched
        assert_relative_eq!(
            predict_pn(JumpModel::A, &chi, 1).unwrap(),
            e1,
            epsilon = 1e-12
        );
        // E click: P_0 = chi_1/(1 - chi_0) = e^{-1}/(1 - e^{-1}) ~ 0.582
        assert_relative_eq!(
            predict_pn(JumpModel::E, &chi, 0).unwrap(),
            e1 / (1.0 - e1),
            epsilon = 1e-12
        );
        assert!((predict_pn(JumpModel::E, &chi, 0).unwrap() - 0.582).abs() < 5e-4);
    }

    #[test]
    fn full_distribution_sums_to_one() {
        let chi = thermal(1.3).number_distribution();
        for model in [JumpModel::A, JumpModel::E, JumpModel::H { y: 3.0 }, JumpModel::N] {
            let p = predict_distribution(model, &chi).unwrap();
            let total: f64 = p.iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn post_click_means() {
        // thermal: A doubles the mean, E keeps it
        let stats = photon_statistics(&thermal(1.0));
        assert_relative_eq!(
            mean_after_jump(JumpModel::A, &stats).unwrap(),
            2.0,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            mean_after_jump(JumpModel::E, &stats).unwrap(),
            1.0,
            max_relative = 1e-10
        );
        // coherent: A leaves the mean alone (Q = 0)
        let stats = photon_statistics(&coherent(1.4));
        assert_relative_eq!(
            mean_after_jump(JumpModel::A, &stats).unwrap(),
            stats.mean,
            max_relative = 1e-9
        );
        assert!(matches!(
            mean_after_jump(JumpModel::H { y: 2.0 }, &stats),
            Err(Error::MeanFormulaUnavailable(_))
        ));
    }

    #[test]
    fn post_click_mean_matches_applied_jump() {
        for mean in [0.3, 0.7, 1.9] {
            let rho = thermal(mean);
            let stats = photon_statistics(&rho);
            for model in [JumpModel::A, JumpModel::E] {
                let closed = mean_after_jump(model, &stats).unwrap();
                let applied = photon_statistics(&apply_jump(model, &rho).unwrap().state).mean;
                assert_relative_eq!(closed, applied, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn thermal_branches() {
        let (upper, lower) = chi0_branches(0.24).unwrap();
        assert_relative_eq!(upper, 0.6, epsilon = 1e-12);
        assert_relative_eq!(lower, 0.4, epsilon = 1e-12);
        // branches merge at the nbar = 1 point
        let (u, l) = chi0_branches(0.25).unwrap();
        assert_eq!(u, 0.5);
        assert_eq!(l, 0.5);
        // round trip: chi_1 = chi_0 (1 - chi_0) on both branches
        for chi1 in [0.01, 0.09, 0.2, 0.24] {
            let (u, l) = chi0_branches(chi1).unwrap();
            assert_relative_eq!(u * (1.0 - u), chi1, epsilon = 1e-12);
            assert_relative_eq!(l * (1.0 - l), chi1, epsilon = 1e-12);
        }
        assert!(chi0_branches(0.26).is_err());
        assert!(chi0_branches(0.0).is_err());
        assert!(chi0_branches(-0.1).is_err());
    }

    #[test]
    fn model_parameter_validation() {
        assert!(matches!(
            apply_jump(JumpModel::H { y: 0.0 }, &thermal(1.0)),
            Err(Error::BadInteractionPhase(_))
        ));
        assert!(matches!(
            apply_jump(JumpModel::Beta { beta: 0.6 }, &thermal(1.0)),
            Err(Error::BadFamilyExponent(_))
        ));
        assert!(matches!(
            apply_jump(JumpModel::Beta { beta: -0.1 }, &thermal(1.0)),
            Err(Error::BadFamilyExponent(_))
        ));
    }

    #[test]
    fn model_text_round_trip() {
        for text in ["A", "E", "H(2)", "N", "Beta(0.25)"] {
            let model: JumpModel = text.parse().unwrap();
            assert_eq!(model.to_string(), text);
        }
        assert_eq!("h(2.5)".parse::<JumpModel>().unwrap(), JumpModel::H { y: 2.5 });
        assert_eq!("beta(0.1)".parse::<JumpModel>().unwrap(), JumpModel::Beta { beta: 0.1 });
        assert!("Q".parse::<JumpModel>().is_err());
        assert!("H(-1)".parse::<JumpModel>().is_err());
        assert!("H()".parse::<JumpModel>().is_err());
    }
}

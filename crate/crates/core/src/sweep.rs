//! Prediction curves over state-parameter grids, and their CSV form.
//!
//! Each figure sweeps the closed-form post-count probabilities of two
//! rival jump models across a family of input states, which is the raw
//! material for telling the models apart in an experiment:
//!
//! * `coherent-chi0`: P_0, P_1 for A and E against chi_0, coherent input,
//! * `thermal-chi0`:  the same against chi_0, thermal input,
//! * `thermal-chi1`:  the same against a measured chi_1, thermal input,
//!   with one section per chi_0 branch,
//! * `thermal-y`:     P_0, P_1 for the probe model H(y) against the
//!   interaction phase y, thermal input at chi_0 = 0.6.
//!
//! Rows are exact closed forms of the ideal (untruncated) states, so the
//! curves carry no truncation error; agreement with the generic
//! finite-state route of [`crate::jump::predict_pn`] is enforced in tests.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::jump::chi0_branches;

/// Open-interval margin that keeps grids away from the singular
/// endpoints chi_0 = 0 and chi_0 = 1.
pub const GRID_MARGIN: f64 = 1e-3;

/// Thermal occupation used by the `thermal-y` probe sweep.
pub const PROBE_SWEEP_CHI0: f64 = 0.6;

/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    CoherentChi0,
    ThermalChi0,
    ThermalChi1,
    ThermalY,
}

impl Figure {
    pub const ALL: [Figure; 4] = [
        Figure::CoherentChi0,
        Figure::ThermalChi0,
        Figure::ThermalChi1,
        Figure::ThermalY,
    ];

    pub fn header(&self) -> &'static [&'static str] {
        match self {
            Figure::ThermalY => &["y", "P0_H", "P1_H"],
            _ => &["x", "P0_A", "P1_A", "P0_E", "P1_E"],
        }
    }

    pub fn default_grid(&self) -> GridSpec {
        match self {
            Figure::CoherentChi0 | Figure::ThermalChi0 => GridSpec {
                start: GRID_MARGIN,
                stop: 1.0 - GRID_MARGIN,
                points: DEFAULT_POINTS,
            },
            Figure::ThermalChi1 => GridSpec {
                start: GRID_MARGIN,
                stop: 0.25,
                points: DEFAULT_POINTS,
            },
            Figure::ThermalY => GridSpec {
                start: 1.0,
                stop: 10.0,
                points: DEFAULT_POINTS,
            },
        }
    }

    /// Valid x range, open endpoints already shrunk by the margin.
    fn domain(&self) -> (f64, f64) {
        match self {
            Figure::CoherentChi0 | Figure::ThermalChi0 => (GRID_MARGIN, 1.0 - GRID_MARGIN),
            Figure::ThermalChi1 => (GRID_MARGIN, 0.25),
            Figure::ThermalY => (GRID_MARGIN, f64::INFINITY),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Figure::CoherentChi0 => "coherent-chi0",
            Figure::ThermalChi0 => "thermal-chi0",
            Figure::ThermalChi1 => "thermal-chi1",
            Figure::ThermalY => "thermal-y",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coherent-chi0" => Ok(Figure::CoherentChi0),
            "thermal-chi0" => Ok(Figure::ThermalChi0),
            "thermal-chi1" => Ok(Figure::ThermalChi1),
            "thermal-y" => Ok(Figure::ThermalY),
            other => Err(Error::BadGrid(format!("unknown figure '{other}'"))),
        }
    }
}

/// Uniform grid: `points` values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        GridSpec {
            start,
            stop,
            points,
        }
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points as f64 - 1.0)
    }

    fn values(&self) -> Vec<f64> {
        let n = self.points;
        let step = self.step();
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.stop
                } else {
                    self.start + i as f64 * step
                }
            })
            .collect()
    }

    fn validate(&self, figure: Figure) -> Result<()> {
        if self.points < 2 {
            return Err(Error::BadGrid(format!(
                "need at least 2 points, got {}",
                self.points
            )));
        }
        if !self.start.is_finite() || !self.stop.is_finite() || self.start >= self.stop {
            return Err(Error::BadGrid(format!(
                "need start < stop, got [{}, {}]",
                self.start, self.stop
            )));
        }
        let (lo, hi) = figure.domain();
        if self.start < lo || self.stop > hi {
            return Err(Error::BadGrid(format!(
                "grid [{}, {}] leaves {figure}'s domain [{lo}, {hi}]",
                self.start, self.stop
            )));
        }
        Ok(())
    }
}

/// One block of rows; `thermal-chi1` has one block per chi_0 branch,
/// the other figures a single unlabeled block.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub label: Option<String>,
    /// Each row is `[x, column values...]` matching the table header.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub sections: Vec<SweepSection>,
}

impl SweepTable {
    /// x values of one section.
    pub fn xs(&self, section: usize) -> Vec<f64> {
        self.sections[section].rows.iter().map(|r| r[0]).collect()
    }

    /// Values of a named column in one section.
    pub fn column(&self, section: usize, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(
            self.sections[section]
                .rows
                .iter()
                .map(|r| r[idx])
                .collect(),
        )
    }
}

/// Post-count probabilities P_0 and P_1 under A and E for a thermal state
/// with ground occupation chi_0, in closed form:
/// P_n^A = (n+1)(1-chi_0)^n chi_0^2, and thermal states are fixed points
/// of E so P_n^E = chi_n.
pub fn thermal_predictions(chi0: f64) -> [f64; 4] {
    let q = 1.0 - chi0;
    [
        chi0 * chi0,
        2.0 * chi0 * chi0 * q,
        chi0,
        chi0 * q,
    ]
}

/// Same under a coherent state with ground occupation chi_0 = e^{-nbar}:
/// coherent states are eigenstates of the annihilator, so P_n^A = chi_n,
/// while P_n^E = chi_{n+1}/(1 - chi_0).
pub fn coherent_predictions(chi0: f64) -> [f64; 4] {
    let nbar = -chi0.ln();
    [
        chi0,
        chi0 * nbar,
        chi0 * nbar / (1.0 - chi0),
        chi0 * nbar * nbar / (2.0 * (1.0 - chi0)),
    ]
}

/// P_0 and P_1 for the probe model H(y) on a thermal state with ground
/// occupation `chi0`: P_n = sin^2(y sqrt(n+1)) chi_{n+1} / Z with
/// Z = sum_m sin^2(y sqrt(m)) chi_m. The geometric series is summed to
/// machine negligibility.
pub fn probe_predictions(y: f64, chi0: f64) -> [f64; 2] {
    let q = 1.0 - chi0;
    let mut z = 0.0;
    let mut chi = chi0 * q; // chi_1
    let mut n = 1usize;
    while chi > 1e-22 && n < 2048 {
        let s = (y * (n as f64).sqrt()).sin();
        z += s * s * chi;
        chi *= q;
        n += 1;
    }
    let s1 = y.sin();
    let s2 = (y * std::f64::consts::SQRT_2).sin();
    let chi1 = chi0 * q;
    let chi2 = chi1 * q;
    [s1 * s1 * chi1 / z, s2 * s2 * chi2 / z]
}

/// Evaluates a figure on the given grid (default grid when `None`).
pub fn sweep_figure(figure: Figure, grid: Option<GridSpec>) -> Result<SweepTable> {
    let grid = grid.unwrap_or_else(|| figure.default_grid());
    grid.validate(figure)?;
    let xs = grid.values();
    let header: Vec<String> = figure.header().iter().map(|s| s.to_string()).collect();

    let section_from = |label: Option<&str>, f: &dyn Fn(f64) -> Vec<f64>| SweepSection {
        label: label.map(|s| s.to_string()),
        rows: xs
            .iter()
            .map(|&x| {
                let mut row = vec![x];
                row.extend(f(x));
                row
            })
            .collect(),
    };

    let sections = match figure {
        Figure::ThermalChi0 => {
            vec![section_from(None, &|x| thermal_predictions(x).to_vec())]
        }
        Figure::CoherentChi0 => {
            vec![section_from(None, &|x| coherent_predictions(x).to_vec())]
        }
        Figure::ThermalChi1 => {
            // grid is validated to (0, 1/4], so both branches exist
            let upper = section_from(Some("upper"), &|x| {
                thermal_predictions(chi0_branches(x).unwrap().0).to_vec()
            });
            let lower = section_from(Some("lower"), &|x| {
                thermal_predictions(chi0_branches(x).unwrap().1).to_vec()
            });
            vec![upper, lower]
        }
        Figure::ThermalY => {
            vec![section_from(None, &|y| {
                probe_predictions(y, PROBE_SWEEP_CHI0).to_vec()
            })]
        }
    };

    Ok(SweepTable { header, sections })
}

/// Serializes a float with 17 significant digits, enough to reparse the
/// exact same f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the table as CSV: one header line, then rows with `.` decimal
/// separators; labeled sections are introduced by `# section: <label>`
/// comment lines.
pub fn write_csv<W: Write>(table: &SweepTable, out: &mut W) -> io::Result<()> {
    writeln!(out, "{}", table.header.join(","))?;
    for section in &table.sections {
        if let Some(label) = &section.label {
            writeln!(out, "# section: {label}")?;
        }
        for row in &section.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
    }
    Ok(())
}

/// Reads back exactly what [`write_csv`] wrote.
pub fn read_csv<R: BufRead>(input: R) -> Result<SweepTable> {
    let mut lines = input.lines().enumerate();
    let bad = |line: usize, message: String| Error::Config {
        line: line + 1,
        message,
    };
    let io_err = |e: io::Error| Error::BadTable(format!("read failed: {e}"));

    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::BadTable("empty table".to_string()))?;
    let header: Vec<String> = first
        .map_err(io_err)?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let width = header.len();

    let mut sections: Vec<SweepSection> = Vec::new();
    let mut current = SweepSection {
        label: None,
        rows: Vec::new(),
    };
    let mut started = false;
    for (lineno, line) in lines {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(label) = rest.strip_prefix("section:") {
                if started {
                    sections.push(current);
                }
                current = SweepSection {
                    label: Some(label.trim().to_string()),
                    rows: Vec::new(),
                };
                started = true;
            }
            continue;
        }
        started = true;
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(lineno, format!("'{cell}' is not a number")))
            })
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(bad(
                lineno,
                format!("expected {width} columns, got {}", row.len()),
            ));
        }
        current.rows.push(row);
    }
    if started {
        sections.push(current);
    }
    if sections.is_empty() {
        return Err(Error::BadTable("table has no rows".to_string()));
    }
    Ok(SweepTable { header, sections })
}

/// x positions of pronounced dips: local minima whose value is below
/// `1e-3` of the column maximum. For oscillatory columns these mark the
/// (numerical) zeros.
pub fn find_dips(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let max = ys.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 || ys.len() < 3 {
        return Vec::new();
    }
    let threshold = 1e-3 * max;
    let mut dips = Vec::new();
    for i in 1..ys.len() - 1 {
        if ys[i] <= ys[i - 1] && ys[i] <= ys[i + 1] && ys[i] < threshold {
            dips.push(xs[i]);
        }
    }
    dips
}

/// Human-readable summary: per-column extrema, plus dip locations for
/// columns that have them.
pub fn table_report(figure: Figure, table: &SweepTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("# sweep report: {figure}\n"));
    out.push_str(&format!("columns = {}\n", table.header.join(",")));
    for (si, section) in table.sections.iter().enumerate() {
        let name = section
            .label
            .clone()
            .unwrap_or_else(|| "all".to_string());
        let xs = table.xs(si);
        out.push_str(&format!(
            "section {name}: rows = {}, x in [{}, {}]\n",
            section.rows.len(),
            format_float(xs[0]),
            format_float(*xs.last().unwrap())
        ));
        for (ci, col) in table.header.iter().enumerate().skip(1) {
            let ys: Vec<f64> = section.rows.iter().map(|r| r[ci]).collect();
            let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            out.push_str(&format!(
                "  {col}: min = {}, max = {}\n",
                format_float(min),
                format_float(max)
            ));
            let dips = find_dips(&xs, &ys);
            if !dips.is_empty() {
                let marks: Vec<String> = dips.iter().map(|&x| format!("{x:.6}")).collect();
                out.push_str(&format!("  {col}: dips near {}\n", marks.join(", ")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{prepare, StatePrep, Truncation};
    use crate::jump::{predict_pn, JumpModel};
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn thermal_sweep_reference_points() {
        let grid = GridSpec::new(0.6, 0.9, 61);
        let table = sweep_figure(Figure::ThermalChi0, Some(grid)).unwrap();
        let row = &table.sections[0].rows[0];
        assert_relative_eq!(row[0], 0.6);
        assert_relative_eq!(row[1], 0.36, epsilon = 1e-15); // P0_A
        assert_relative_eq!(row[2], 0.288, epsilon = 1e-15); // P1_A
        assert_relative_eq!(row[3], 0.6, epsilon = 1e-15); // P0_E
        assert_relative_eq!(row[4], 0.24, epsilon = 1e-15); // P1_E
    }

    #[test]
    fn coherent_sweep_reference_points() {
        let e1 = (-1.0f64).exp();
        let grid = GridSpec::new(e1, 0.9, 10);
        let table = sweep_figure(Figure::CoherentChi0, Some(grid)).unwrap();
        let row = &table.sections[0].rows[0];
        assert_relative_eq!(row[2], e1, epsilon = 1e-15); // P1_A = chi_1 = e^{-1}
        assert_relative_eq!(row[4], e1 / (2.0 * (1.0 - e1)), epsilon = 1e-15); // P1_E
        assert!((row[4] - 0.291).abs() < 5e-4);
    }

    #[test]
    fn closed_forms_match_generic_route() {
        // the sweep rows are closed forms of the ideal state; the generic
        // route predicts from a tightly truncated matrix
        for chi0 in [0.3, 0.6, 0.85] {
            let nbar_th = (1.0 - chi0) / chi0;
            let rho = prepare(
                &StatePrep::Thermal { mean: nbar_th },
                Truncation::TailBound(1e-15),
            )
            .unwrap();
            let chi = rho.number_distribution();
            let row = thermal_predictions(chi0);
            assert_relative_eq!(row[0], predict_pn(JumpModel::A, &chi, 0).unwrap(), epsilon = 1e-12);
            assert_relative_eq!(row[1], predict_pn(JumpModel::A, &chi, 1).unwrap(), epsilon = 1e-12);
            assert_relative_eq!(row[2], predict_pn(JumpModel::E, &chi, 0).unwrap(), epsilon = 1e-12);
            assert_relative_eq!(row[3], predict_pn(JumpModel::E, &chi, 1).unwrap(), epsilon = 1e-12);

            let nbar_coh = -chi0.ln();
            let rho = prepare(
                &StatePrep::Coherent {
                    alpha: Complex64::new(nbar_coh.sqrt(), 0.0),
                },
                Truncation::TailBound(1e-15),
            )
            .unwrap();
            let chi = rho.number_distribution();
            let row = coherent_predictions(chi0);
            assert_relative_eq!(row[0], predict_pn(JumpModel::A, &chi, 0).unwrap(), epsilon = 1e-11);
            assert_relative_eq!(row[2], predict_pn(JumpModel::E, &chi, 0).unwrap(), epsilon = 1e-11);
        }
        // probe closed form against the generic route
        let rho = prepare(
            &StatePrep::Thermal { mean: (1.0 - 0.6) / 0.6 },
            Truncation::TailBound(1e-15),
        )
        .unwrap();
        let chi = rho.number_distribution();
        for y in [1.5, 4.0, 9.0] {
            let row = probe_predictions(y, 0.6);
            assert_relative_eq!(
                row[0],
                predict_pn(JumpModel::H { y }, &chi, 0).unwrap(),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                row[1],
                predict_pn(JumpModel::H { y }, &chi, 1).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn branch_sweep_has_two_sections() {
        let table = sweep_figure(Figure::ThermalChi1, None).unwrap();
        assert_eq!(table.sections.len(), 2);
        assert_eq!(table.sections[0].label.as_deref(), Some("upper"));
        assert_eq!(table.sections[1].label.as_deref(), Some("lower"));
        // at chi_1 = 0.24 the branches are chi_0 = 0.6 and 0.4
        let grid = GridSpec::new(0.24, 0.25, 2);
        let table = sweep_figure(Figure::ThermalChi1, Some(grid)).unwrap();
        assert_relative_eq!(table.sections[0].rows[0][3], 0.6, epsilon = 1e-12);
        assert_relative_eq!(table.sections[1].rows[0][3], 0.4, epsilon = 1e-12);
        // the sections merge at the double root chi_1 = 1/4
        assert_relative_eq!(table.sections[0].rows[1][3], 0.5, epsilon = 1e-12);
        assert_relative_eq!(table.sections[1].rows[1][3], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn probe_sweep_vanishes_at_sine_zeros() {
        // P_0^H ~ sin^2(y): zero at y = pi; P_1^H ~ sin^2(y sqrt(2))
        let table = sweep_figure(Figure::ThermalY, Some(GridSpec::new(PI, 10.0, 5))).unwrap();
        assert!(table.sections[0].rows[0][1] < 1e-30);
        let start = PI / std::f64::consts::SQRT_2;
        let table = sweep_figure(Figure::ThermalY, Some(GridSpec::new(start, 10.0, 5))).unwrap();
        assert!(table.sections[0].rows[0][2] < 1e-30);
    }

    #[test]
    fn probe_dips_sit_at_multiples_of_pi() {
        let grid = GridSpec::new(1.0, 10.0, 1000);
        let table = sweep_figure(Figure::ThermalY, Some(grid)).unwrap();
        let xs = table.xs(0);
        let p0 = table.column(0, "P0_H").unwrap();
        let dips = find_dips(&xs, &p0);
        let step = grid.step();
        for k in 1..=3 {
            let target = k as f64 * PI;
            assert!(
                dips.iter().any(|&x| (x - target).abs() <= step),
                "no dip within one step of {k} pi"
            );
        }
    }

    #[test]
    fn csv_round_trips_exactly() {
        for figure in Figure::ALL {
            let table = sweep_figure(figure, None).unwrap();
            let mut buf = Vec::new();
            write_csv(&table, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            assert_eq!(table, back, "{figure} did not round trip");
        }
    }

    #[test]
    fn csv_format_details() {
        let table = sweep_figure(Figure::ThermalChi0, Some(GridSpec::new(0.5, 0.6, 2))).unwrap();
        let mut buf = Vec::new();
        write_csv(&table, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,P0_A,P1_A,P0_E,P1_E");
        let first = lines.next().unwrap();
        assert!(first.starts_with("5.0000000000000000e-1,"));
        assert!(!text.contains(';'));
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            sweep_figure(Figure::ThermalChi0, Some(GridSpec::new(0.5, 0.4, 10))),
            Err(Error::BadGrid(_))
        ));
        assert!(matches!(
            sweep_figure(Figure::ThermalChi0, Some(GridSpec::new(0.5, 0.6, 1))),
            Err(Error::BadGrid(_))
        ));
        // endpoints chi_0 = 0 and 1 are singular and stay excluded
        assert!(matches!(
            sweep_figure(Figure::ThermalChi0, Some(GridSpec::new(0.0, 0.9, 10))),
            Err(Error::BadGrid(_))
        ));
        assert!(matches!(
            sweep_figure(Figure::CoherentChi0, Some(GridSpec::new(0.5, 1.0, 10))),
            Err(Error::BadGrid(_))
        ));
        // chi_1 beyond 1/4 has no thermal state
        assert!(matches!(
            sweep_figure(Figure::ThermalChi1, Some(GridSpec::new(0.1, 0.3, 10))),
            Err(Error::BadGrid(_))
        ));
    }

    #[test]
    fn report_lists_extrema_and_dips() {
        let table = sweep_figure(Figure::ThermalY, Some(GridSpec::new(1.0, 10.0, 500))).unwrap();
        let report = table_report(Figure::ThermalY, &table);
        assert!(report.contains("P0_H: min"));
        assert!(report.contains("dips near"));
    }
}

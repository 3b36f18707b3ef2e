use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use super::program::{build_program, ResponseFunctionProgram};
use super::simplex::{solve_min_max, LpSolution};
use crate::bounds::{linear_bounds, SettingTag};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const EQUAL_TOL: f64 = 1e-9;

fn check_tag(tag: SettingTag) -> Result<()> {
    match tag {
        SettingTag::E | SettingTag::F | SettingTag::G | SettingTag::H => Ok(()),
        _ => Err(Error::UnsupportedSetting(tag)),
    }
}

/// Closed form against the floating-point program on the same cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub setting: SettingTag,
    pub closed_form: (f64, f64),
    /// `None` when the program is infeasible.
    pub lp: Option<(f64, f64)>,
    /// Both endpoints agree within `1e-9`.
    pub equal: bool,
    /// The program's interval lies inside the closed form.
    pub closed_form_valid: bool,
    pub deltas: Option<(f64, f64)>,
}

impl OracleReport {
    pub fn infeasible(&self) -> bool {
        self.lp.is_none()
    }
}

/// Compares the closed form and the program on joint selected cells
/// `P(X, Y, S=1 | Z)`, one block per stratum.
pub fn oracle_check(tag: SettingTag, cells: &[[[f64; 2]; 2]]) -> Result<OracleReport> {
    check_tag(tag)?;
    let closed = linear_bounds(tag, cells)?;
    let program = build_program(tag, cells)?;
    let sol: LpSolution<f64> = solve_min_max(&program);
    let closed_form = (closed.lower, closed.upper);
    Ok(match sol.interval() {
        None => OracleReport { setting: tag, closed_form, lp: None, equal: false, closed_form_valid: false, deltas: None },
        Some((lo, hi)) => {
            let deltas = (closed.lower - lo, closed.upper - hi);
            OracleReport {
                setting: tag,
                closed_form,
                lp: Some((lo, hi)),
                equal: deltas.0.abs() <= EQUAL_TOL && deltas.1.abs() <= EQUAL_TOL,
                closed_form_valid: closed.lower <= lo + EQUAL_TOL && closed.upper >= hi - EQUAL_TOL,
                deltas: Some(deltas),
            }
        }
    })
}

/// Exact comparison in rational arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOracleReport {
    pub setting: SettingTag,
    pub closed_form: (BigRational, BigRational),
    pub lp: Option<(BigRational, BigRational)>,
    pub program: ResponseFunctionProgram,
    pub solution: LpSolution<BigRational>,
}

impl ExactOracleReport {
    pub fn equal(&self) -> bool {
        self.lp.as_ref().is_some_and(|lp| *lp == self.closed_form)
    }

    pub fn closed_form_valid(&self) -> bool {
        self.lp
            .as_ref()
            .is_some_and(|(lo, hi)| self.closed_form.0 <= *lo && self.closed_form.1 >= *hi)
    }
}

pub fn oracle_check_exact(tag: SettingTag, cells: &[[[BigRational; 2]; 2]]) -> Result<ExactOracleReport> {
    check_tag(tag)?;
    let closed = linear_bounds(tag, cells)?;
    let program = ResponseFunctionProgram::new(tag, cells)?;
    let solution = solve_min_max::<BigRational>(&program);
    Ok(ExactOracleReport {
        setting: tag,
        closed_form: (closed.lower, closed.upper),
        lp: solution.interval(),
        program,
        solution,
    })
}

/// Cells of a random causal model of the design, in exact arithmetic.
///
/// Draws integer weights over the response-function assignments, zeroing
/// each with probability `sparsity`, normalizes them to `q` and pushes `q`
/// through the constraint rows. The result is feasible by construction.
/// Returns the cells together with the generating `q`.
pub fn random_instance<R: Rng + ?Sized>(
    tag: SettingTag,
    rng: &mut R,
    sparsity: f64,
) -> Result<(Vec<[[BigRational; 2]; 2]>, Vec<BigRational>)> {
    let strata = if tag.has_instrument() { 2 } else { 1 };
    let zero: Vec<[[BigRational; 2]; 2]> =
        vec![[[BigRational::zero(), BigRational::zero()], [BigRational::zero(), BigRational::zero()]]; strata];
    let program = ResponseFunctionProgram::new(tag, &zero)?;
    let n = program.variables.len();
    let mut w: Vec<u64> = (0..n)
        .map(|_| if rng.random::<f64>() < sparsity { 0 } else { rng.random_range(1..=50) })
        .collect();
    if w.iter().all(|v| *v == 0) {
        let k = rng.random_range(0..n);
        w[k] = 1;
    }
    let total: u64 = w.iter().sum();
    let q: Vec<BigRational> = w
        .iter()
        .map(|v| BigRational::new(BigInt::from(*v), BigInt::from(total)))
        .collect();
    let values = program.row_values(&q);
    let mut cells = zero;
    for (row, value) in program.rows.iter().zip(values).skip(1) {
        let (x, y, z) = parse_cell(&row.name);
        cells[z][x][y] = value;
    }
    Ok((cells, q))
}

/// Cell coordinates from a row name such as `p011.1`.
fn parse_cell(name: &str) -> (usize, usize, usize) {
    let b = name.as_bytes();
    let x = (b[1] - b'0') as usize;
    let y = (b[2] - b'0') as usize;
    let z = name.split_once('.').map_or(0, |(_, z)| z.parse().expect("stratum digit"));
    (x, y, z)
}

/// Floating-point view of exact cells.
pub fn cells_to_f64(cells: &[[[BigRational; 2]; 2]]) -> Vec<[[f64; 2]; 2]> {
    cells.iter().map(|b| b.clone().map(|row| row.map(|v| v.to_f64()))).collect()
}

use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::bounds::SettingTag;
use crate::error::{Error, Result};
use crate::scalar::rational_from_f64;

/// One joint assignment of response functions.
///
/// * `rx`: the exposure value, or with an instrument a function of `Z` where
///   bit `z` holds `X` at `Z = z`.
/// * `ry`: bit `x` holds `Y` at `X = x`; so 0 never, 1 is `1 - X`, 2 is `X`,
///   3 always.
/// * `rs`: bit `y` holds `S` at `Y = y` when selection depends on the outcome;
///   bit `2y + x` when it depends on exposure and outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ResponseTuple {
    pub rx: u8,
    pub ry: u8,
    pub rs: Option<u8>,
}

impl ResponseTuple {
    pub fn exposure(&self, z: usize, instrument: bool) -> usize {
        if instrument {
            ((self.rx >> z) & 1) as usize
        } else {
            self.rx as usize
        }
    }

    /// Potential outcome `Y(x)`.
    pub fn outcome(&self, x: usize) -> usize {
        ((self.ry >> x) & 1) as usize
    }

    pub fn selected(&self, x: usize, y: usize, exposure_dependent: bool) -> bool {
        match self.rs {
            None => true,
            Some(rs) => {
                let bit = if exposure_dependent { 2 * y + x } else { y };
                (rs >> bit) & 1 == 1
            }
        }
    }

    /// `q` followed by the three digits, or `q<rx>_<ry>_<rs>` once a digit exceeds 9.
    pub fn label(&self) -> String {
        match self.rs {
            None => format!("q{}{}", self.rx, self.ry),
            Some(rs) if rs < 10 => format!("q{}{}{}", self.rx, self.ry, rs),
            Some(rs) => format!("q{}_{}_{}", self.rx, self.ry, rs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub name: String,
    /// Variables with coefficient one; all others are zero.
    pub indices: Vec<usize>,
    #[serde(serialize_with = "ser_rational")]
    pub rhs: BigRational,
}

fn ser_rational<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// The response-function program `min/max obj . q` subject to `q >= 0` and the rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseFunctionProgram {
    pub setting: SettingTag,
    pub variables: Vec<ResponseTuple>,
    pub rows: Vec<ConstraintRow>,
    /// `Y(1) - Y(0)` per variable.
    pub objective: Vec<i8>,
    /// Whether the cell right-hand sides sum to at most one within every stratum.
    pub mass_consistent: bool,
}

struct Shape {
    instrument: bool,
    selection: Option<bool>,
}

fn shape(tag: SettingTag) -> Result<Shape> {
    Ok(match tag {
        SettingTag::A => Shape { instrument: false, selection: None },
        SettingTag::B => Shape { instrument: true, selection: None },
        SettingTag::E => Shape { instrument: false, selection: Some(false) },
        SettingTag::F => Shape { instrument: true, selection: Some(false) },
        SettingTag::G => Shape { instrument: false, selection: Some(true) },
        SettingTag::H => Shape { instrument: true, selection: Some(true) },
        SettingTag::C | SettingTag::D => return Err(Error::UnsupportedSetting(tag)),
    })
}

impl ResponseFunctionProgram {
    /// Builds the program from exact cells, one `[x][y]` block per stratum.
    ///
    /// For `A`/`B` the cells are `P(X, Y | Z)`; otherwise `P(X, Y, S=1 | Z)`.
    /// Right-hand sides are not required to be mutually consistent, so an
    /// incompatible instance yields an infeasible program.
    pub fn new(tag: SettingTag, cells: &[[[BigRational; 2]; 2]]) -> Result<Self> {
        let sh = shape(tag)?;
        let strata = if sh.instrument { 2 } else { 1 };
        if cells.len() != strata {
            return Err(Error::ShapeMismatch {
                tag,
                expected: if sh.instrument { "instrument-stratified" } else { "unstratified" },
            });
        }
        let nx: u8 = if sh.instrument { 4 } else { 2 };
        let ns: Option<u8> = sh.selection.map(|dep| if dep { 16 } else { 4 });
        let mut variables = Vec::new();
        for rx in 0..nx {
            for ry in 0..4u8 {
                match ns {
                    None => variables.push(ResponseTuple { rx, ry, rs: None }),
                    Some(ns) => {
                        for rs in 0..ns {
                            variables.push(ResponseTuple { rx, ry, rs: Some(rs) });
                        }
                    }
                }
            }
        }

        let mut rows = vec![ConstraintRow {
            name: "sum".into(),
            indices: (0..variables.len()).collect(),
            rhs: BigRational::one(),
        }];
        let mut mass_consistent = true;
        let exposure_dependent = sh.selection.unwrap_or(false);
        for (z, block) in cells.iter().enumerate() {
            let mut mass = BigRational::zero();
            for x in 0..2 {
                for y in 0..2 {
                    let indices = variables
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| {
                            v.exposure(z, sh.instrument) == x
                                && v.outcome(x) == y
                                && v.selected(x, y, exposure_dependent)
                        })
                        .map(|(i, _)| i)
                        .collect();
                    let mut name = format!("p{x}{y}");
                    if sh.selection.is_some() {
                        name.push('1');
                    }
                    if sh.instrument {
                        let _ = write!(name, ".{z}");
                    }
                    mass += &block[x][y];
                    rows.push(ConstraintRow { name, indices, rhs: block[x][y].clone() });
                }
            }
            let negative = block.iter().flatten().any(|v| *v < BigRational::zero());
            if mass > BigRational::one() || negative {
                mass_consistent = false;
            }
        }
        let objective = variables
            .iter()
            .map(|v| v.outcome(1) as i8 - v.outcome(0) as i8)
            .collect();
        Ok(Self { setting: tag, variables, rows, objective, mass_consistent })
    }

    /// Line-oriented text form: `var`, `row` and `obj` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for v in &self.variables {
            match v.rs {
                Some(rs) => writeln!(out, "var ({},{},{})", v.rx, v.ry, rs),
                None => writeln!(out, "var ({},{})", v.rx, v.ry),
            }
            .expect("write to string");
        }
        for row in &self.rows {
            let idx: Vec<String> = row.indices.iter().map(|i| i.to_string()).collect();
            writeln!(out, "row {}: {} = {}", row.name, idx.join(" "), row.rhs).expect("write to string");
        }
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(i, c)| format!("{}{i}", if *c > 0 { '+' } else { '-' }))
            .collect();
        writeln!(out, "obj: {}", obj.join(" ")).expect("write to string");
        out
    }

    /// `rows . q` for each row.
    pub fn row_values(&self, q: &[BigRational]) -> Vec<BigRational> {
        self.rows
            .iter()
            .map(|r| r.indices.iter().fold(BigRational::zero(), |acc, &i| acc + &q[i]))
            .collect()
    }

    pub fn objective_value(&self, q: &[BigRational]) -> BigRational {
        self.objective
            .iter()
            .zip(q)
            .fold(BigRational::zero(), |acc, (c, v)| match c {
                1 => acc + v,
                -1 => acc - v,
                _ => acc,
            })
    }
}

/// Builds a program from floating-point cells, converted exactly.
pub fn build_program(tag: SettingTag, cells: &[[[f64; 2]; 2]]) -> Result<ResponseFunctionProgram> {
    let exact: Vec<[[BigRational; 2]; 2]> = cells
        .iter()
        .map(|b| b.map(|row| row.map(rational_from_f64)))
        .collect();
    ResponseFunctionProgram::new(tag, &exact)
}

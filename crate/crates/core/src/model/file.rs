//! JSON problem files. Matrices are row-major arrays of arrays; a bare
//! number is accepted for 1×1 entries and `{"table": [...]}` gives one
//! matrix per grid point. Omitted coefficients are zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::grid::TimeGrid;
use crate::model::marks::{MarkComponent, MarkMeasure};
use crate::model::spec::{CoefficientSet, CostSet, Dims, InitialState, ProblemSpec};
use crate::model::track::MatrixTrack;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Literal(Vec<Vec<f64>>),
    Table { table: Vec<Vec<Vec<f64>>> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsFile {
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub d: usize,
    #[serde(default)]
    pub l: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default)]
    pub t0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsFile {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixSpec>,
    #[serde(rename = "A_bar", default, skip_serializing_if = "Option::is_none")]
    pub a_bar: Option<MatrixSpec>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixSpec>,
    #[serde(rename = "B_bar", default, skip_serializing_if = "Option::is_none")]
    pub b_bar: Option<MatrixSpec>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<MatrixSpec>>,
    #[serde(rename = "C_bar", default, skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<Vec<MatrixSpec>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<MatrixSpec>>,
    #[serde(rename = "D_bar", default, skip_serializing_if = "Option::is_none")]
    pub d_bar: Option<Vec<MatrixSpec>>,
    /// One list of per-atom matrices for each jump component.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<MatrixSpec>>>,
    #[serde(rename = "M_bar", default, skip_serializing_if = "Option::is_none")]
    pub m_bar: Option<Vec<Vec<MatrixSpec>>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<Vec<MatrixSpec>>>,
    #[serde(rename = "N_bar", default, skip_serializing_if = "Option::is_none")]
    pub n_bar: Option<Vec<Vec<MatrixSpec>>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFile {
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<MatrixSpec>,
    #[serde(rename = "Q_bar", default, skip_serializing_if = "Option::is_none")]
    pub q_bar: Option<MatrixSpec>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<MatrixSpec>,
    #[serde(rename = "S_bar", default, skip_serializing_if = "Option::is_none")]
    pub s_bar: Option<MatrixSpec>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<MatrixSpec>,
    #[serde(rename = "R_bar", default, skip_serializing_if = "Option::is_none")]
    pub r_bar: Option<MatrixSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dims: DimsFile,
    pub grid: GridFile,
    #[serde(default)]
    pub coefficients: CoefficientsFile,
    #[serde(default)]
    pub cost: CostFile,
    #[serde(default)]
    pub marks: Vec<MarkComponent>,
    pub initial_state: InitialState,
    #[serde(rename = "weight_K", default)]
    pub weight_k: f64,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Shape(format!("{what}: ragged matrix rows")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_track(spec: &Option<MatrixSpec>, shape: (usize, usize), what: &str) -> Result<MatrixTrack> {
    let t = match spec {
        None => return Ok(MatrixTrack::zeros(shape.0, shape.1)),
        Some(MatrixSpec::Scalar(v)) => MatrixTrack::Constant(DMatrix::from_element(1, 1, *v)),
        Some(MatrixSpec::Literal(rows)) => MatrixTrack::Constant(to_matrix(rows, what)?),
        Some(MatrixSpec::Table { table }) => {
            if table.is_empty() {
                return Err(Error::Shape(format!("{what}: empty table")));
            }
            MatrixTrack::Sampled(table.iter().map(|m| to_matrix(m, what)).collect::<Result<_>>()?)
        }
    };
    // dimension check happens in validation with the expected shape in the message
    if t.shape() == (0, 0) && shape != (0, 0) {
        return Err(Error::Shape(format!("{what}: empty matrix")));
    }
    Ok(t)
}

fn to_list(spec: &Option<Vec<MatrixSpec>>, count: usize, shape: (usize, usize), what: &str) -> Result<Vec<MatrixTrack>> {
    match spec {
        None => Ok(vec![MatrixTrack::zeros(shape.0, shape.1); count]),
        Some(v) => v
            .iter()
            .enumerate()
            .map(|(i, s)| to_track(&Some(s.clone()), shape, &format!("{what}[{i}]")))
            .collect(),
    }
}

fn to_atom_list(
    spec: &Option<Vec<Vec<MatrixSpec>>>,
    marks: &MarkMeasure,
    shape: (usize, usize),
    what: &str,
) -> Result<Vec<MatrixTrack>> {
    match spec {
        None => Ok(vec![MatrixTrack::zeros(shape.0, shape.1); marks.atoms_total()]),
        Some(per_comp) => {
            if per_comp.len() != marks.len() {
                return Err(Error::Shape(format!(
                    "{what}: {} components given, marks define {}",
                    per_comp.len(),
                    marks.len()
                )));
            }
            let mut out = Vec::new();
            for (j, (list, comp)) in per_comp.iter().zip(marks.components()).enumerate() {
                if list.len() != comp.atoms.len() {
                    return Err(Error::Shape(format!(
                        "{what}[{j}]: {} matrices for {} atoms",
                        list.len(),
                        comp.atoms.len()
                    )));
                }
                for (a, s) in list.iter().enumerate() {
                    out.push(to_track(&Some(s.clone()), shape, &format!("{what}[{j}][{a}]"))?);
                }
            }
            Ok(out)
        }
    }
}

impl ProblemFile {
    pub fn into_spec(self) -> Result<ProblemSpec> {
        let dims = Dims { n: self.dims.n, m: self.dims.m, d: self.dims.d, l: self.dims.l };
        let (n, m, d) = (dims.n, dims.m, dims.d);
        let grid = TimeGrid::new(self.grid.t0, self.grid.horizon, self.grid.dt)?;
        let marks = MarkMeasure::new(self.marks)?;
        let c = &self.coefficients;
        let coeffs = CoefficientSet {
            drift: to_track(&c.a, (n, n), "A")?,
            drift_mean: to_track(&c.a_bar, (n, n), "A_bar")?,
            control_drift: to_track(&c.b, (n, m), "B")?,
            control_drift_mean: to_track(&c.b_bar, (n, m), "B_bar")?,
            diffusion: to_list(&c.c, d, (n, n), "C")?,
            diffusion_mean: to_list(&c.c_bar, d, (n, n), "C_bar")?,
            control_diffusion: to_list(&c.d, d, (n, m), "D")?,
            control_diffusion_mean: to_list(&c.d_bar, d, (n, m), "D_bar")?,
            jump: to_atom_list(&c.m, &marks, (n, n), "M")?,
            jump_mean: to_atom_list(&c.m_bar, &marks, (n, n), "M_bar")?,
            control_jump: to_atom_list(&c.n, &marks, (n, m), "N")?,
            control_jump_mean: to_atom_list(&c.n_bar, &marks, (n, m), "N_bar")?,
        };
        let k = &self.cost;
        let cost = CostSet {
            state_weight: to_track(&k.q, (n, n), "Q")?,
            state_weight_mean: to_track(&k.q_bar, (n, n), "Q_bar")?,
            cross_weight: to_track(&k.s, (m, n), "S")?,
            cross_weight_mean: to_track(&k.s_bar, (m, n), "S_bar")?,
            control_weight: to_track(&k.r, (m, m), "R")?,
            control_weight_mean: to_track(&k.r_bar, (m, m), "R_bar")?,
        };
        ProblemSpec { dims, coeffs, cost, marks, grid, initial: self.initial_state, weight_k: self.weight_k }.validated()
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let one = |t: &MatrixTrack| Some(from_track(t));
        let list = |v: &[MatrixTrack]| Some(v.iter().map(from_track).collect::<Vec<_>>());
        let atoms = |v: &[MatrixTrack]| {
            let mut out = Vec::new();
            let mut it = v.iter();
            for comp in spec.marks.components() {
                out.push(it.by_ref().take(comp.atoms.len()).map(from_track).collect());
            }
            Some(out)
        };
        let c = &spec.coeffs;
        let k = &spec.cost;
        ProblemFile {
            dims: DimsFile { n: spec.dims.n, m: spec.dims.m, d: spec.dims.d, l: spec.dims.l },
            grid: GridFile { t0: spec.grid.t0, horizon: spec.grid.horizon, dt: spec.grid.dt },
            coefficients: CoefficientsFile {
                a: one(&c.drift),
                a_bar: one(&c.drift_mean),
                b: one(&c.control_drift),
                b_bar: one(&c.control_drift_mean),
                c: list(&c.diffusion),
                c_bar: list(&c.diffusion_mean),
                d: list(&c.control_diffusion),
                d_bar: list(&c.control_diffusion_mean),
                m: atoms(&c.jump),
                m_bar: atoms(&c.jump_mean),
                n: atoms(&c.control_jump),
                n_bar: atoms(&c.control_jump_mean),
            },
            cost: CostFile {
                q: one(&k.state_weight),
                q_bar: one(&k.state_weight_mean),
                s: one(&k.cross_weight),
                s_bar: one(&k.cross_weight_mean),
                r: one(&k.control_weight),
                r_bar: one(&k.control_weight_mean),
            },
            marks: spec.marks.components().to_vec(),
            initial_state: spec.initial.clone(),
            weight_k: spec.weight_k,
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn from_track(t: &MatrixTrack) -> MatrixSpec {
    match t {
        MatrixTrack::Constant(m) => MatrixSpec::Literal(rows(m)),
        MatrixTrack::Sampled(v) => MatrixSpec::Table { table: v.iter().map(rows).collect() },
    }
}

/// Parse a problem document; syntax errors carry line and column.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("problem file parse error: {e}")))?;
    file.into_spec()
}

pub fn problem_to_json(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(&ProblemFile::from_spec(spec)).expect("problem files always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "dims": {"n": 1, "m": 1, "d": 1, "l": 1},
        "grid": {"t0": 0.0, "T": 2.0, "dt": 0.5},
        "coefficients": {
            "A": [[-2.0]], "A_bar": 0.5, "B": [[1.0]],
            "C": [[[0.3]]],
            "M": [[[[0.1]], [[0.2]]]]
        },
        "cost": {"Q": [[1.0]], "R": [[1.0]], "R_bar": {"table": [[[1]], [[1]], [[2]], [[2]], [[3]]]}},
        "marks": [{"atoms": [[1.0], [-1.0]], "weights": [0.5, 0.25]}],
        "initial_state": {"deterministic": [1.0]},
        "weight_K": 0.1
    }"#;

    #[test]
    fn parses_sample_document() {
        let s = parse_problem(SAMPLE).unwrap();
        assert_eq!(s.dims.l, 1);
        assert_eq!(s.atoms(), 2);
        assert_eq!(s.coeffs.jump[1].at(0)[(0, 0)], 0.2);
        assert_eq!(s.coeffs.drift_mean.at(0)[(0, 0)], 0.5);
        assert_eq!(s.cost.control_weight_mean.at(4)[(0, 0)], 3.0);
        assert_eq!(s.weight_k, 0.1);
    }

    #[test]
    fn round_trips_through_json() {
        let s = parse_problem(SAMPLE).unwrap();
        let again = parse_problem(&problem_to_json(&s)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn syntax_error_mentions_line_and_column() {
        let err = parse_problem("{\n \"dims\": [,\n}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("column"), "{err}");
    }

    #[test]
    fn table_length_mismatch_is_rejected() {
        let bad = SAMPLE.replace("[[[1]], [[1]], [[2]], [[2]], [[3]]]", "[[[1]], [[1]]]");
        assert!(parse_problem(&bad).is_err());
    }
}

//! JSON model configuration (schema version 1).
//!
//! ```json
//! {
//!   "schema": 1,
//!   "horizon": 1.0,
//!   "dims": { "n1": 1, "n2": 1, "m1": 1, "m2": 1 },
//!   "generator": [[-1.0, 1.0], [2.0, -2.0]],
//!   "jump_atoms": [[0.5, 0.6], [1.5, 0.4]],
//!   "cones": { "pi1": { "kind": "full_space" }, "pi2": { "kind": "nonnegative_orthant" } },
//!   "regimes": [
//!     { "A": 0.1, "B1": [1.0], "C": [0.2], "D": [[0.5]], "R1": [[1.0]], "Q": 1.0, "G": 1.0,
//!       "jumps": [ { "B2": [0.1], "E": [-1.5], "F": [[0.5]], "R2": [[1.0]] },
//!                  { "E": { "knots": [0.0, 0.5], "values": [[0.2], [0.3]] }, "R2": [[1.0]] } ] }
//!   ]
//! }
//! ```
//!
//! Each `jump_atoms` row is `[mark..., weight]`. Every coefficient is either a
//! constant or a `{ "knots", "values" }` table, piecewise constant from each
//! knot to the next. Omitted coefficients are zero. Matrices are row-major.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Atom, Coefficients, ConeKind, ConeSpec, Dims, JumpCoefficients, JumpMeasure, Piece, Regime, RegimeModel};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Table<T> {
    Knots { knots: Vec<f64>, values: Vec<T> },
    Constant(T),
}

impl<T> Table<T> {
    fn knots(&self) -> &[f64] {
        match self {
            Table::Knots { knots, .. } => knots,
            Table::Constant(_) => &[],
        }
    }

    fn at(&self, t: f64) -> &T {
        match self {
            Table::Constant(v) => v,
            Table::Knots { knots, values } => {
                let k = knots.partition_point(|&k| k <= t);
                &values[k.saturating_sub(1)]
            }
        }
    }

    fn check(&self, what: &str) -> Result<()> {
        if let Table::Knots { knots, values } = self {
            if knots.is_empty() || knots.len() != values.len() {
                return Err(Error::Config(format!("{what}: knots and values must be non-empty and of equal length")));
            }
            if knots.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(format!("{what}: knots must be strictly increasing")));
            }
        }
        Ok(())
    }
}

type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimsConfig {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConesConfig {
    pub pi1: ConeKind,
    pub pi2: ConeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    #[serde(rename = "B2", default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<Table<Vec<f64>>>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Table<Vec<f64>>>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Table<Matrix>>,
    #[serde(rename = "R2", default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<Table<Matrix>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Table<f64>>,
    #[serde(rename = "B1", default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<Table<Vec<f64>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Table<Vec<f64>>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Table<Matrix>>,
    #[serde(rename = "R1", default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<Table<Matrix>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Table<f64>>,
    #[serde(rename = "G", default)]
    pub g: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<AtomConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema: u32,
    pub horizon: f64,
    pub dims: DimsConfig,
    pub generator: Matrix,
    #[serde(default)]
    pub jump_atoms: Vec<Vec<f64>>,
    pub cones: ConesConfig,
    pub regimes: Vec<RegimeConfig>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema {} (expected {SCHEMA_VERSION})", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn into_model(self) -> Result<RegimeModel> {
        let dims = Dims { n1: self.dims.n1, n2: self.dims.n2, m1: self.dims.m1, m2: self.dims.m2 };
        let ell = self.regimes.len();
        let generator = matrix("generator", &self.generator, ell, ell)?;

        let mut atoms = Vec::with_capacity(self.jump_atoms.len());
        let mark_len = self.jump_atoms.first().map(|r| r.len());
        for (k, row) in self.jump_atoms.iter().enumerate() {
            if row.is_empty() || Some(row.len()) != mark_len {
                return Err(Error::Config(format!("jump atom row {k} must be [mark..., weight] with a common length")));
            }
            let (mark, weight) = row.split_at(row.len() - 1);
            atoms.push(Atom { mark: mark.to_vec(), weight: weight[0] });
        }
        let nu = JumpMeasure::new(atoms)?;

        let pi1 = ConeSpec::from_kind(self.cones.pi1, dims.m1)?;
        let pi2 = ConeSpec::from_kind(self.cones.pi2, dims.m2)?;

        let regimes = self
            .regimes
            .iter()
            .enumerate()
            .map(|(i, r)| build_regime(i, r, dims, nu.len()))
            .collect::<Result<Vec<_>>>()?;
        RegimeModel::new(dims, self.horizon, generator, nu, pi1, pi2, regimes)
    }
}

/// Load and build a model from a JSON file.
pub fn load_model(path: impl AsRef<Path>) -> Result<RegimeModel> {
    let text = std::fs::read_to_string(path)?;
    ModelConfig::from_json(&text)?.into_model()
}

fn matrix(what: &str, rows: &Matrix, nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::DimensionMismatch { what: format!("{what} rows"), expected: nrows, got: rows.len() });
    }
    let mut m = DMatrix::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch { what: format!("{what} row {i}"), expected: ncols, got: row.len() });
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = *x;
        }
    }
    Ok(m)
}

fn vector(what: &str, v: &[f64], n: usize) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(Error::DimensionMismatch { what: what.into(), expected: n, got: v.len() });
    }
    Ok(DVector::from_column_slice(v))
}

fn build_regime(i: usize, r: &RegimeConfig, dims: Dims, n_atoms: usize) -> Result<Regime> {
    if r.jumps.len() != n_atoms {
        return Err(Error::DimensionMismatch {
            what: format!("regime {} jump coefficient blocks", i + 1),
            expected: n_atoms,
            got: r.jumps.len(),
        });
    }
    let mut knots: Vec<f64> = Vec::new();
    macro_rules! visit {
        ($opt:expr, $name:expr) => {
            if let Some(t) = $opt {
                t.check(&format!("regime {} {}", i + 1, $name))?;
                knots.extend_from_slice(t.knots());
            }
        };
    }
    visit!(&r.a, "A");
    visit!(&r.b1, "B1");
    visit!(&r.c, "C");
    visit!(&r.d, "D");
    visit!(&r.r1, "R1");
    visit!(&r.q, "Q");
    for j in &r.jumps {
        visit!(&j.b2, "B2");
        visit!(&j.e, "E");
        visit!(&j.f, "F");
        visit!(&j.r2, "R2");
    }
    if knots.iter().any(|k| !k.is_finite() || *k < 0.0) {
        return Err(Error::Config(format!("regime {}: knots must be finite and nonnegative", i + 1)));
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    if knots.first().is_none_or(|&k| k > 0.0) {
        knots.insert(0, 0.0);
    }

    let pieces = knots
        .iter()
        .map(|&t| {
            let at_s = |tab: &Option<Table<f64>>| tab.as_ref().map_or(0.0, |x| *x.at(t));
            let at_v = |name: &str, tab: &Option<Table<Vec<f64>>>, n: usize| match tab {
                Some(x) => vector(name, x.at(t), n),
                None => Ok(DVector::zeros(n)),
            };
            let at_m = |name: &str, tab: &Option<Table<Matrix>>, r: usize, c: usize| match tab {
                Some(x) => matrix(name, x.at(t), r, c),
                None => Ok(DMatrix::zeros(r, c)),
            };
            let diffusion = Coefficients {
                a: at_s(&r.a),
                b1: at_v("B1", &r.b1, dims.m1)?,
                c: at_v("C", &r.c, dims.n1)?,
                d: at_m("D", &r.d, dims.n1, dims.m1)?,
                r1: at_m("R1", &r.r1, dims.m1, dims.m1)?,
                q: at_s(&r.q),
            };
            let jumps = r
                .jumps
                .iter()
                .map(|j| {
                    Ok(JumpCoefficients {
                        b2: at_v("B2", &j.b2, dims.m2)?,
                        e: at_v("E", &j.e, dims.n2)?,
                        f: at_m("F", &j.f, dims.n2, dims.m2)?,
                        r2: at_m("R2", &j.r2, dims.m2, dims.m2)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Piece { diffusion, jumps })
        })
        .collect::<Result<Vec<_>>>()?;
    Regime::new(knots, pieces, r.g)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
      "schema": 1,
      "horizon": 1.0,
      "dims": { "n1": 1, "n2": 1, "m1": 1, "m2": 1 },
      "generator": [[-1.0, 1.0], [2.0, -2.0]],
      "jump_atoms": [[0.5, 0.6], [1.5, 0.4]],
      "cones": { "pi1": { "kind": "full_space" }, "pi2": { "kind": "nonnegative_orthant" } },
      "regimes": [
        { "A": 0.1, "B1": [1.0], "C": [0.2], "D": [[0.5]], "R1": [[1.0]], "Q": 1.0, "G": 1.0,
          "jumps": [ { "B2": [0.1], "E": [-1.5], "F": [[0.5]], "R2": [[1.0]] },
                     { "E": { "knots": [0.0, 0.5], "values": [[0.2], [0.3]] }, "R2": [[1.0]] } ] },
        { "A": { "knots": [0.25], "values": [2.0] }, "R1": [[2.0]], "G": 2.0,
          "jumps": [ { "R2": [[1.0]] }, { "R2": [[1.0]] } ] }
      ]
    }"#;

    #[test]
    fn parses_sample() {
        let m = ModelConfig::from_json(SAMPLE).unwrap().into_model().unwrap();
        assert_eq!(m.n_regimes(), 2);
        assert_eq!(m.nu().total_mass(), 1.0);
        assert_eq!(m.nu().atoms()[1].mark, vec![1.5]);
        assert_eq!(m.jump_coefficients(0, 0.2, 1).e[0], 0.2);
        assert_eq!(m.jump_coefficients(0, 0.7, 1).e[0], 0.3);
        assert_eq!(m.jump_coefficients(0, 0.7, 0).e[0], -1.5);
        assert_eq!(m.regime(0).knots(), &[0.0, 0.5]);
        // Knot table starting after 0 extends its first value to the left.
        assert_eq!(m.regime(1).knots(), &[0.0, 0.25]);
        assert_eq!(m.coefficients(1, 0.1).a, 2.0);
        assert_eq!(m.coefficients(1, 0.1).q, 0.0);
        assert_eq!(m.terminal_weight(1), 2.0);
    }

    #[test]
    fn rejects_wrong_schema() {
        let text = SAMPLE.replace("\"schema\": 1", "\"schema\": 2");
        assert!(matches!(ModelConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_dimension() {
        let text = SAMPLE.replace("\"B1\": [1.0]", "\"B1\": [1.0, 2.0]");
        let err = ModelConfig::from_json(&text).unwrap().into_model().unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_missing_atom_blocks() {
        let text = SAMPLE.replace(r#""jumps": [ { "R2": [[1.0]] }, { "R2": [[1.0]] } ]"#, r#""jumps": [ { "R2": [[1.0]] } ]"#);
        assert!(ModelConfig::from_json(&text).unwrap().into_model().is_err());
    }

    #[test]
    fn cone_kinds_parse() {
        let k: ConeKind = serde_json::from_str(r#"{"kind":"half_line","direction":[1.0,0.0]}"#).unwrap();
        assert!(matches!(k, ConeKind::HalfLine { .. }));
        let k: ConeKind = serde_json::from_str(r#"{"kind":"generated","generators":[[1.0],[2.0]]}"#).unwrap();
        assert!(matches!(k, ConeKind::Generated { .. }));
    }
}

//! On-disk instance format: a UTF-8 JSON object.
//!
//! ```json
//! { "n": 2, "criterion": "discounted", "kind": "discrete", "beta": 0.8,
//!   "P0": [[1,0],[0,1]], "P1": [[0,1],[0,1]],
//!   "R0": [0,0], "R1": [1,2], "Q0": [0,0], "Q1": [1,1] }
//! ```
//!
//! `kind = "discrete"` carries row-stochastic `P0`/`P1` (plus `beta` iff the
//! criterion is discounted); `kind = "semi_markov"` carries the transforms
//! `psi0`/`psi1` together with `mtilde0`/`mtilde1`. Matrices are row-major
//! arrays of arrays. Unknown fields are rejected. [`save`] always writes the
//! `semi_markov` form, which is lossless for every instance.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::model::{BanditInstance, Criterion, Discount, ModelError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field {field:?}: {reason}")]
    Schema { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn schema(field: &'static str, reason: impl Into<String>) -> IoError {
    IoError::Schema {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n: usize,
    criterion: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(rename = "P0", default, skip_serializing_if = "Option::is_none")]
    p0: Option<Vec<Vec<f64>>>,
    #[serde(rename = "P1", default, skip_serializing_if = "Option::is_none")]
    p1: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi0: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi1: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mtilde0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mtilde1: Option<Vec<f64>>,
    #[serde(rename = "R0")]
    r0: Vec<f64>,
    #[serde(rename = "R1")]
    r1: Vec<f64>,
    #[serde(rename = "Q0")]
    q0: Vec<f64>,
    #[serde(rename = "Q1")]
    q1: Vec<f64>,
}

fn matrix_from(
    field: &'static str,
    n: usize,
    rows: &[Vec<f64>],
) -> Result<DenseMatrix<f64>, IoError> {
    if rows.len() != n {
        return Err(schema(
            field,
            format!("expected {n} rows, got {}", rows.len()),
        ));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(schema(
                field,
                format!("row {i} has {} entries, expected {n}", row.len()),
            ));
        }
    }
    DenseMatrix::from_rows(rows).map_err(|e| schema(field, e.to_string()))
}

fn vector_from(field: &'static str, n: usize, v: &[f64]) -> Result<Vec<f64>, IoError> {
    if v.len() != n {
        return Err(schema(
            field,
            format!("expected {n} entries, got {}", v.len()),
        ));
    }
    Ok(v.to_vec())
}

/// Parse an instance from JSON text.
pub fn from_json(text: &str) -> Result<BanditInstance<f64>, IoError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let n = file.n;
    let criterion = match file.criterion.as_str() {
        "discounted" => Criterion::Discounted,
        "average" => Criterion::Average,
        other => {
            return Err(schema(
                "criterion",
                format!("expected \"discounted\" or \"average\", got {other:?}"),
            ))
        }
    };
    let r0 = vector_from("R0", n, &file.r0)?;
    let r1 = vector_from("R1", n, &file.r1)?;
    let q0 = vector_from("Q0", n, &file.q0)?;
    let q1 = vector_from("Q1", n, &file.q1)?;

    match file.kind.as_str() {
        "discrete" => {
            for (field, present) in [
                ("psi0", file.psi0.is_some()),
                ("psi1", file.psi1.is_some()),
                ("mtilde0", file.mtilde0.is_some()),
                ("mtilde1", file.mtilde1.is_some()),
            ] {
                if present {
                    return Err(schema(field, "not allowed when kind is \"discrete\""));
                }
            }
            let p0 = matrix_from(
                "P0",
                n,
                file.p0.as_deref().ok_or_else(|| schema("P0", "missing"))?,
            )?;
            let p1 = matrix_from(
                "P1",
                n,
                file.p1.as_deref().ok_or_else(|| schema("P1", "missing"))?,
            )?;
            let discount =
                match criterion {
                    Criterion::Discounted => Discount::Factor(file.beta.ok_or_else(|| {
                        schema("beta", "required for discounted discrete instances")
                    })?),
                    Criterion::Average => {
                        if file.beta.is_some() {
                            return Err(schema("beta", "not allowed under the average criterion"));
                        }
                        Discount::Average
                    }
                };
            Ok(BanditInstance::new_discrete(
                p0, p1, r0, r1, q0, q1, discount,
            )?)
        }
        "semi_markov" => {
            for (field, present) in [
                ("P0", file.p0.is_some()),
                ("P1", file.p1.is_some()),
                ("beta", file.beta.is_some()),
            ] {
                if present {
                    return Err(schema(field, "not allowed when kind is \"semi_markov\""));
                }
            }
            let psi0 = matrix_from(
                "psi0",
                n,
                file.psi0
                    .as_deref()
                    .ok_or_else(|| schema("psi0", "missing"))?,
            )?;
            let psi1 = matrix_from(
                "psi1",
                n,
                file.psi1
                    .as_deref()
                    .ok_or_else(|| schema("psi1", "missing"))?,
            )?;
            let mtilde0 = vector_from(
                "mtilde0",
                n,
                file.mtilde0
                    .as_deref()
                    .ok_or_else(|| schema("mtilde0", "missing"))?,
            )?;
            let mtilde1 = vector_from(
                "mtilde1",
                n,
                file.mtilde1
                    .as_deref()
                    .ok_or_else(|| schema("mtilde1", "missing"))?,
            )?;
            Ok(BanditInstance::new_semi_markov(
                criterion, psi0, psi1, r0, r1, q0, q1, mtilde0, mtilde1,
            )?)
        }
        other => Err(schema(
            "kind",
            format!("expected \"discrete\" or \"semi_markov\", got {other:?}"),
        )),
    }
}

/// Serialize an instance as JSON (always the lossless `semi_markov` form).
pub fn to_json(inst: &BanditInstance<f64>) -> String {
    let n = inst.n();
    let rows =
        |m: &DenseMatrix<f64>| -> Vec<Vec<f64>> { (0..n).map(|i| m.row(i).to_vec()).collect() };
    let file = InstanceFile {
        n,
        criterion: inst.criterion().as_str().to_string(),
        kind: "semi_markov".to_string(),
        beta: None,
        p0: None,
        p1: None,
        psi0: Some(rows(inst.psi(0))),
        psi1: Some(rows(inst.psi(1))),
        mtilde0: Some(inst.mtilde(0).to_vec()),
        mtilde1: Some(inst.mtilde(1).to_vec()),
        r0: inst.r(0).to_vec(),
        r1: inst.r(1).to_vec(),
        q0: inst.q(0).to_vec(),
        q1: inst.q(1).to_vec(),
    };
    serde_json::to_string_pretty(&file).expect("instance serializes")
}

pub fn load(path: impl AsRef<Path>) -> Result<BanditInstance<f64>, IoError> {
    from_json(&fs::read_to_string(path)?)
}

pub fn save(inst: &BanditInstance<f64>, path: impl AsRef<Path>) -> Result<(), IoError> {
    let mut text = to_json(inst);
    text.push('\n');
    Ok(fs::write(path, text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e2_json() -> String {
        r#"{ "n": 2, "criterion": "discounted", "kind": "discrete", "beta": 0.8,
             "P0": [[1,0],[0,1]], "P1": [[0,1],[0,1]],
             "R0": [0,0], "R1": [1,2], "Q0": [0,0], "Q1": [1,1] }"#
            .to_string()
    }

    #[test]
    fn discrete_file_round_trips_through_semi_markov_form() {
        let inst = from_json(&e2_json()).unwrap();
        let again = from_json(&to_json(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn save_load_is_identity_on_disk() {
        let inst = from_json(&e2_json()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e2.json");
        save(&inst, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(inst, loaded);
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = e2_json().replacen("\"n\": 2", "\"n\": 2, \"surprise\": 1", 1);
        let err = from_json(&text).unwrap_err();
        assert!(err.to_string().contains("surprise"), "{err}");
    }

    #[test]
    fn unknown_kind_string_names_the_field() {
        let text = e2_json().replacen("\"discrete\"", "\"banana\"", 1);
        let err = from_json(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("kind") && msg.contains("banana"), "{msg}");
    }

    #[test]
    fn average_criterion_with_substochastic_rows_is_rejected() {
        let text = r#"{ "n": 1, "criterion": "average", "kind": "semi_markov",
             "psi0": [[0.8]], "psi1": [[0.8]], "mtilde0": [1], "mtilde1": [1],
             "R0": [0], "R1": [2], "Q0": [0], "Q1": [1] }"#;
        let err = from_json(text).unwrap_err();
        assert!(err.to_string().contains("row 0"), "{err}");
    }

    #[test]
    fn missing_beta_is_rejected_for_discounted_discrete() {
        let text = e2_json().replacen("\"beta\": 0.8,", "", 1);
        let err = from_json(&text).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn dimension_mismatch_names_the_field() {
        let text = e2_json().replacen("\"R1\": [1,2]", "\"R1\": [1,2,3]", 1);
        let err = from_json(&text).unwrap_err();
        assert!(err.to_string().contains("R1"), "{err}");
    }
}

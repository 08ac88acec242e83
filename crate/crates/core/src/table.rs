//! Flat tables for CSV and JSON export.
//!
//! CSV: `# key=value` metadata lines, a header row, then one row per record.
//! Floats carry 12 significant digits. JSON: one object `{meta, columns,
//! rows}` with the same content and full float precision.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::{self, Write};

use serde_json::{json, Map, Value as Json};

use crate::observables::GroundStateAnalysis;
use crate::sweep::{Boundary, CollapseDataset, Junction, ReducedParams};
use crate::wavefunction::{PositionWaveFunction, Quadrature};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Missing,
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Int(v.into())
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Missing, Into::into)
    }
}

/// Rounds to 12 significant digits and prints the shortest form of the result.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    let a = rounded.abs();
    if a == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

impl Value {
    fn csv_field(&self) -> String {
        match self {
            Value::Float(v) => format_float(*v),
            Value::Int(v) => v.to_string(),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Float(v) => serde_json::Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Value::Int(v) => json!(v),
            Value::Bool(v) => json!(v),
            Value::Text(s) => json!(s),
            Value::Missing => Json::Null,
        }
    }

    fn from_json(v: &Json) -> Value {
        match v {
            Json::Null => Value::Missing,
            Json::Bool(b) => Value::Bool(*b),
            Json::Number(n) => n
                .as_i64()
                .filter(|_| !n.is_f64())
                .map_or_else(|| Value::Float(n.as_f64().unwrap_or(f64::NAN)), Value::Int),
            Json::String(s) => Value::Text(s.clone()),
            other => Value::Text(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            meta: BTreeMap::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl Display) {
        self.meta.insert(key.to_string(), value.to_string());
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension(format!(
                "row has {} fields, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(Value::csv_field).collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Json {
        let meta: Map<String, Json> = self
            .meta
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|r| Json::Array(r.iter().map(Value::to_json).collect()))
            .collect();
        json!({ "meta": meta, "columns": self.columns, "rows": rows })
    }

    pub fn from_json(v: &Json) -> Result<Table> {
        let bad = |what: &str| Error::Dimension(format!("table JSON lacks {what}"));
        let meta = v["meta"]
            .as_object()
            .ok_or_else(|| bad("a meta object"))?
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    v.as_str().map_or_else(|| v.to_string(), String::from),
                )
            })
            .collect();
        let columns = v["columns"]
            .as_array()
            .ok_or_else(|| bad("a columns array"))?
            .iter()
            .map(|c| {
                c.as_str()
                    .map(String::from)
                    .ok_or_else(|| bad("string column names"))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut table = Table {
            meta,
            columns,
            rows: Vec::new(),
        };
        for row in v["rows"].as_array().ok_or_else(|| bad("a rows array"))? {
            let row = row.as_array().ok_or_else(|| bad("array rows"))?;
            table.push(row.iter().map(Value::from_json).collect())?;
        }
        Ok(table)
    }
}

/// Column order of a ground-state record.
pub const ANALYSIS_COLUMNS: [&str; 20] = [
    "E0",
    "gap",
    "parity",
    "n_Z",
    "mean_n",
    "mean_x2",
    "mean_p2",
    "mean_sx",
    "mean_aa",
    "zeta",
    "e_omega",
    "e_gy",
    "e_p2",
    "e_x2",
    "e_stark_offset",
    "e_kinetic",
    "e_potential",
    "e_total",
    "n_max_used",
    "degenerate",
];

pub fn analysis_values(a: &GroundStateAnalysis) -> Vec<Value> {
    let e = &a.energy_parts;
    vec![
        a.e0.into(),
        a.gap.into(),
        a.parity.into(),
        a.n_z.into(),
        a.mean_n.into(),
        a.mean_x2.into(),
        a.mean_p2.into(),
        a.mean_sx.into(),
        a.mean_aa.into(),
        a.zeta.into(),
        e.e_omega.into(),
        e.e_gy.into(),
        e.e_p2.into(),
        e.e_x2.into(),
        e.e_stark_offset.into(),
        e.e_kinetic.into(),
        e.e_potential.into(),
        e.total.into(),
        a.n_max_used.into(),
        a.degenerate.into(),
    ]
}

pub fn analysis_table(a: &GroundStateAnalysis) -> Table {
    let mut t = Table::new(ANALYSIS_COLUMNS);
    t.rows.push(analysis_values(a));
    t
}

const POINT_COLUMNS: [&str; 6] = ["ix", "iy", "omega", "g", "lambda", "chi"];

/// One row per sweep cell. `points` gives each cell's parameters in reduced
/// units; failed cells keep them and leave the observables empty.
pub fn sweep_table<'a>(
    cells: impl IntoIterator<Item = (ReducedParams, &'a crate::sweep::Cell)>,
) -> Table {
    let mut t = Table::new(
        POINT_COLUMNS
            .into_iter()
            .chain(ANALYSIS_COLUMNS)
            .chain(["error"]),
    );
    for (p, c) in cells {
        let mut row: Vec<Value> = vec![
            c.ix.into(),
            c.iy.into(),
            p.omega.into(),
            p.g.into(),
            p.lambda.into(),
            p.chi.into(),
        ];
        match &c.analysis {
            Some(a) => row.extend(analysis_values(a)),
            None => row.extend(std::iter::repeat_n(Value::Missing, ANALYSIS_COLUMNS.len())),
        }
        row.push(c.error.clone().into());
        t.rows.push(row);
    }
    t
}

/// Boundary polylines, one row per vertex, followed by junctions with kind
/// `junction`.
pub fn boundary_table(
    boundaries: &[Boundary],
    junctions: &[Junction],
    x_name: &str,
    y_name: &str,
) -> Table {
    let mut t = Table::new(["kind", "segment", "index", x_name, y_name]);
    for (s, b) in boundaries.iter().enumerate() {
        for (i, p) in b.points.iter().enumerate() {
            t.rows.push(vec![
                b.kind.name().into(),
                s.into(),
                i.into(),
                p[0].into(),
                p[1].into(),
            ]);
        }
    }
    for (i, j) in junctions.iter().enumerate() {
        t.rows.push(vec![
            "junction".into(),
            Value::Missing,
            i.into(),
            j.x.into(),
            j.y.into(),
        ]);
    }
    t
}

pub fn collapse_table(d: &CollapseDataset) -> Table {
    let mut t = Table::new(["lambda", "chi", "x", "y", "analytic", "parity"]);
    t.set_meta("law", d.law.name());
    t.set_meta("omega", format_float(d.omega));
    t.set_meta("max_pairwise_dev", format_float(d.max_pairwise_dev));
    t.set_meta("max_analytic_dev", format_float(d.max_analytic_dev));
    let jumps: Vec<String> = d
        .curves
        .iter()
        .map(|c| format!("{}:{}={}", c.lambda, c.chi, c.discontinuities))
        .collect();
    t.set_meta("discontinuities", jumps.join(";"));
    for c in &d.curves {
        for (k, &x) in d.scaled_x.iter().enumerate() {
            t.rows.push(vec![
                c.lambda.into(),
                c.chi.into(),
                x.into(),
                c.scaled_y[k].into(),
                c.analytic[k].into(),
                c.parity[k].into(),
            ]);
        }
    }
    t
}

pub fn spectrum_table(energies: &[f64], parities: &[i32]) -> Table {
    let mut t = Table::new(["index", "energy", "parity"]);
    for (i, (&e, &p)) in energies.iter().zip(parities).enumerate() {
        t.rows.push(vec![i.into(), e.into(), p.into()]);
    }
    t
}

pub fn wavefunction_table(wf: &PositionWaveFunction) -> Table {
    let axis = match wf.quadrature {
        Quadrature::Position => "x",
        Quadrature::Momentum => "p",
    };
    let mut t = Table::new([axis, "psi_plus", "psi_minus"]);
    for i in 0..wf.grid.len() {
        t.rows.push(vec![
            wf.grid[i].into(),
            wf.psi_plus[i].into(),
            wf.psi_minus[i].into(),
        ]);
    }
    t
}

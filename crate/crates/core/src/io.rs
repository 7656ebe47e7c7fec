//! Interchange formats.
//!
//! Networks are JSON:
//!
//! ```json
//! {"variables": [{"name": "A", "states": ["a0", "a1"], "hidden": false}],
//!  "parents": {"B": ["A"]},
//!  "cpt": {"A": [[0.3, 0.7]], "B": [[0.9, 0.1], [0.2, 0.8]]}}
//! ```
//!
//! CPT rows follow the mixed-radix parent-configuration order with parents in
//! variable-list order (last parent fastest). Datasets are CSV with a header of
//! variable names, state labels in cells, and a marker (default `?`) for missing cells.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{BayesNet, Cpt, Parameters, Structure, Variable};

pub const DEFAULT_MISSING_MARKER: &str = "?";

#[derive(Debug, Serialize, Deserialize)]
struct VariableEntry {
    name: String,
    states: Vec<String>,
    #[serde(default)]
    hidden: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    variables: Vec<VariableEntry>,
    #[serde(default)]
    parents: BTreeMap<String, Vec<String>>,
    cpt: BTreeMap<String, Vec<Vec<f64>>>,
}

pub fn network_to_json(net: &BayesNet) -> Result<String> {
    let s = &net.structure;
    let file = NetworkFile {
        variables: s
            .variables()
            .iter()
            .map(|v| VariableEntry {
                name: v.name.clone(),
                states: v.states.clone(),
                hidden: v.hidden,
            })
            .collect(),
        parents: (0..s.len())
            .map(|i| {
                let ps = s.parents(i).iter().map(|&p| s.variable(p).name.clone()).collect();
                (s.variable(i).name.clone(), ps)
            })
            .collect(),
        cpt: (0..s.len())
            .map(|i| (s.variable(i).name.clone(), net.params.table(i).to_rows()))
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

pub fn network_from_json(text: &str) -> Result<BayesNet> {
    let file: NetworkFile = serde_json::from_str(text)?;
    let variables = file
        .variables
        .into_iter()
        .map(|v| Variable {
            name: v.name,
            states: v.states,
            hidden: v.hidden,
        })
        .collect();
    let mut structure = Structure::new(variables)?;
    for (child, parents) in &file.parents {
        let c = structure.require_index(child)?;
        let ps = parents
            .iter()
            .map(|p| structure.require_index(p))
            .collect::<Result<Vec<_>>>()?;
        if ps.len() != parents.len() || {
            let mut sorted = ps.clone();
            sorted.sort_unstable();
            sorted.dedup();
            sorted.len() != ps.len()
        } {
            return Err(Error::InvalidStructure(format!("`{child}` lists a parent twice")));
        }
        structure.set_parents(c, ps)?;
    }
    if let Some(extra) = file.cpt.keys().find(|k| structure.index_of(k).is_none()) {
        return Err(Error::UnknownVariable(extra.clone()));
    }
    let tables = (0..structure.len())
        .map(|i| {
            let name = &structure.variable(i).name;
            let rows = file
                .cpt
                .get(name)
                .ok_or_else(|| Error::InvalidParameters(format!("no CPT for `{name}`")))?;
            Cpt::from_rows(rows.clone())
                .map_err(|e| Error::InvalidParameters(format!("CPT of `{name}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    BayesNet::new(structure, Parameters::new(tables))
}

pub fn read_network(path: impl AsRef<Path>) -> Result<BayesNet> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::from(e).in_file(path))?;
    network_from_json(&text).map_err(|e| e.in_file(path))
}

pub fn write_network(path: impl AsRef<Path>, net: &BayesNet) -> Result<()> {
    let path = path.as_ref();
    let text = network_to_json(net)?;
    std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

/// Orders labels so that embedded numbers compare numerically (`s2` before `s10`).
fn natural_key(label: &str) -> Vec<(bool, String, u128)> {
    let mut parts = Vec::new();
    let mut chars = label.chars().peekable();
    while let Some(&c) = chars.peek() {
        let digit = c.is_ascii_digit();
        let mut run = String::new();
        while let Some(&d) = chars.peek() {
            if d.is_ascii_digit() != digit {
                break;
            }
            run.push(d);
            chars.next();
        }
        let num = if digit { run.parse().unwrap_or(u128::MAX) } else { 0 };
        parts.push((digit, if digit { String::new() } else { run }, num));
    }
    parts
}

/// Reads CSV. With a schema, columns must be schema variables and labels must be
/// their states; without one, each column's states are its distinct labels in
/// natural order.
pub fn read_csv<R: Read>(reader: R, schema: Option<&[Variable]>, missing_marker: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Dataset::empty(Vec::new()),
        Some(h) => h?,
    };
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();

    let mut raw: Vec<(u64, Vec<String>)> = Vec::new();
    for rec in rows {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(Error::Parse {
                location: format!("line {line}"),
                message: format!("expected {} fields, found {}", names.len(), rec.len()),
            });
        }
        raw.push((line, rec.iter().map(|c| c.trim().to_string()).collect()));
    }

    let variables: Vec<Variable> = match schema {
        Some(schema) => names
            .iter()
            .enumerate()
            .map(|(col, name)| {
                schema
                    .iter()
                    .find(|v| &v.name == name)
                    .cloned()
                    .ok_or_else(|| Error::Parse {
                        location: format!("line 1, column {}", col + 1),
                        message: format!("unknown variable `{name}`"),
                    })
            })
            .collect::<Result<_>>()?,
        None => names
            .iter()
            .enumerate()
            .map(|(col, name)| {
                let mut labels: Vec<String> = raw
                    .iter()
                    .map(|(_, r)| r[col].clone())
                    .filter(|l| l != missing_marker)
                    .collect();
                labels.sort_by_cached_key(|l| natural_key(l));
                labels.dedup();
                Variable::new(name.clone(), labels)
            })
            .collect(),
    };

    let mut records = Vec::with_capacity(raw.len());
    for (line, row) in &raw {
        let mut out = Vec::with_capacity(row.len());
        for (col, (cell, var)) in row.iter().zip(&variables).enumerate() {
            if cell == missing_marker {
                out.push(None);
                continue;
            }
            match var.state_index(cell) {
                Some(s) => out.push(Some(s)),
                None => {
                    return Err(Error::Parse {
                        location: format!("line {line}, column {}", col + 1),
                        message: format!("variable `{}` has no state `{cell}`", var.name),
                    })
                }
            }
        }
        records.push(out);
    }
    Dataset::new(variables, records)
}

pub fn write_csv<W: Write>(writer: W, dataset: &Dataset, missing_marker: &str) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(dataset.variables().iter().map(|v| v.name.as_str()))?;
    for row in dataset.records() {
        w.write_record(row.iter().zip(dataset.variables()).map(|(cell, var)| match cell {
            Some(s) => var.states[*s].as_str(),
            None => missing_marker,
        }))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>, schema: Option<&[Variable]>, missing_marker: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_csv(BufReader::new(file), schema, missing_marker).map_err(|e| e.in_file(path))
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset, missing_marker: &str) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    write_csv(BufWriter::new(file), dataset, missing_marker).map_err(|e| e.in_file(path))
}

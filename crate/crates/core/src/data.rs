//! Datasets with missing cells, ancestral sampling, MCAR corruption and random
//! Dirichlet parameterization.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::model::{Cpt, Parameters, Structure, Variable};

/// A rectangular table of records; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: Vec<Variable>,
    records: Vec<Vec<Option<usize>>>,
}

impl Dataset {
    pub fn new(variables: Vec<Variable>, records: Vec<Vec<Option<usize>>>) -> Result<Self> {
        let mut names = HashSet::new();
        for v in &variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate column `{}`", v.name)));
            }
        }
        for (r, row) in records.iter().enumerate() {
            if row.len() != variables.len() {
                return Err(Error::InvalidArgument(format!(
                    "record {r} has {} cells, expected {}",
                    row.len(),
                    variables.len()
                )));
            }
            for (cell, var) in row.iter().zip(&variables) {
                if let Some(s) = *cell {
                    if s >= var.arity() {
                        return Err(Error::StateOutOfRange {
                            variable: var.name.clone(),
                            state: s,
                            arity: var.arity(),
                        }
                        .at_record(r));
                    }
                }
            }
        }
        let variables = variables.into_iter().map(|v| Variable { hidden: false, ..v }).collect();
        Ok(Dataset { variables, records })
    }

    pub fn empty(variables: Vec<Variable>) -> Result<Self> {
        Dataset::new(variables, Vec::new())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn records(&self) -> &[Vec<Option<usize>>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.variables.len()
    }

    pub fn missing_count(&self) -> usize {
        self.records.iter().flatten().filter(|c| c.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    /// First `n` records and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let head = Dataset {
            variables: self.variables.clone(),
            records: self.records[..n].to_vec(),
        };
        let tail = Dataset {
            variables: self.variables.clone(),
            records: self.records[n..].to_vec(),
        };
        (head, tail)
    }

    /// Structure index of each column. Every column must name an observed variable
    /// of matching arity.
    pub fn column_mapping(&self, structure: &Structure) -> Result<Vec<usize>> {
        self.variables
            .iter()
            .map(|v| {
                let i = structure.index_of(&v.name).ok_or_else(|| {
                    Error::DatasetMismatch(format!("column `{}` is not a network variable", v.name))
                })?;
                let target = structure.variable(i);
                if target.hidden {
                    return Err(Error::DatasetMismatch(format!(
                        "column `{}` is hidden in the network",
                        v.name
                    )));
                }
                if target.arity() != v.arity() {
                    return Err(Error::DatasetMismatch(format!(
                        "column `{}` has {} states but the network variable has {}",
                        v.name,
                        v.arity(),
                        target.arity()
                    )));
                }
                Ok(i)
            })
            .collect()
    }

    /// Complete assignments over all structure variables; fails on any gap.
    pub fn complete_assignments(&self, structure: &Structure) -> Result<Vec<Vec<usize>>> {
        let columns = self.column_mapping(structure)?;
        let mut covered = vec![false; structure.len()];
        for &c in &columns {
            covered[c] = true;
        }
        if let Some(v) = covered.iter().position(|c| !c) {
            return Err(Error::DatasetMismatch(format!(
                "network variable `{}` has no column",
                structure.variable(v).name
            )));
        }
        self.records
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let mut full = vec![0; structure.len()];
                for (col, (&var, cell)) in columns.iter().zip(row).enumerate() {
                    full[var] = cell.ok_or_else(|| Error::IncompleteData {
                        record: r,
                        variable: self.variables[col].name.clone(),
                    })?;
                }
                Ok(full)
            })
            .collect()
    }
}

fn sample_index(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the running sum; take the last state with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Draws `n` i.i.d. records in topological order; hidden variables are dropped.
pub fn ancestral_sample(structure: &Structure, params: &Parameters, n: usize, seed: u64) -> Result<Dataset> {
    params.check(structure)?;
    let order = structure
        .topological_order()
        .ok_or_else(|| Error::InvalidStructure("structure is cyclic".into()))?;
    let observed = structure.observed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut full = vec![0usize; structure.len()];
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        for &v in &order {
            let config = structure.config_index_of(structure.parents(v), &full);
            full[v] = sample_index(&mut rng, params.table(v).row(config));
        }
        records.push(observed.iter().map(|&v| Some(full[v])).collect());
    }
    let variables = observed.iter().map(|&v| structure.variable(v).clone()).collect();
    Dataset::new(variables, records)
}

/// Removes each cell independently with probability `fraction`.
pub fn inject_missing_mcar(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "missing fraction {fraction} is outside [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = dataset
        .records
        .iter()
        .map(|row| {
            row.iter()
                .map(|&cell| {
                    let drop = rng.random::<f64>() < fraction;
                    if drop {
                        None
                    } else {
                        cell
                    }
                })
                .collect()
        })
        .collect();
    Ok(Dataset {
        variables: dataset.variables.clone(),
        records,
    })
}

/// One row drawn from a symmetric Dirichlet(alpha) via normalized Gamma draws.
pub(crate) fn dirichlet_row(rng: &mut impl Rng, alpha: f64, arity: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha checked positive");
    let mut row: Vec<f64> = (0..arity).map(|_| gamma.sample(rng)).collect();
    let total: f64 = row.iter().sum();
    if total > 0.0 && total.is_finite() {
        row.iter_mut().for_each(|x| *x /= total);
    } else {
        // Every draw underflowed (tiny alpha): the limit is a point mass.
        let hit = rng.random_range(0..arity);
        row = (0..arity).map(|i| if i == hit { 1.0 } else { 0.0 }).collect();
    }
    row
}

/// Every CPT row drawn independently from a symmetric Dirichlet(alpha).
pub fn sample_dirichlet_parameters(structure: &Structure, alpha: f64, seed: u64) -> Result<Parameters> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("Dirichlet alpha {alpha} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = (0..structure.len())
        .map(|v| {
            let arity = structure.arity(v);
            let rows = structure.config_count(v);
            let probs = (0..rows).flat_map(|_| dirichlet_row(&mut rng, alpha, arity)).collect();
            Cpt::from_flat(arity, probs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Parameters::new(tables))
}

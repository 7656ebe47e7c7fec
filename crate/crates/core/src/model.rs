//! Discrete Bayesian networks: variables, DAG structure, conditional probability tables.
//!
//! Parent sets are always kept sorted by variable index. A parent configuration is
//! the mixed-radix number formed by the parents' states in that order, with the
//! last (highest-index) parent varying fastest. CPT rows are stored in that order.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

/// Tolerance for CPT row normalization.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
    pub hidden: bool,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: Vec<String>) -> Self {
        Variable {
            name: name.into(),
            states,
            hidden: false,
        }
    }

    /// A variable with states `s0`, `s1`, ...
    pub fn with_arity(name: impl Into<String>, arity: usize) -> Self {
        Variable::new(name, (0..arity).map(|s| format!("s{s}")).collect())
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Variable::with_arity(name, 2)
    }

    pub fn hidden(mut self) -> Self {
        self.hidden = true;
        self
    }

    pub fn arity(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    fn check(&self) -> Result<()> {
        if self.arity() < 2 {
            return Err(Error::InvalidStructure(format!(
                "variable `{}` has {} states; at least 2 are required",
                self.name,
                self.arity()
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.states {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidStructure(format!(
                    "variable `{}` repeats state `{s}`",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// A child together with its (sorted) parent set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FamilyKey {
    pub child: usize,
    pub parents: Vec<usize>,
}

impl FamilyKey {
    pub fn new(child: usize, parents: impl IntoIterator<Item = usize>) -> Self {
        let parents: BTreeSet<usize> = parents.into_iter().collect();
        FamilyKey {
            child,
            parents: parents.into_iter().collect(),
        }
    }

    pub fn describe(&self, structure: &Structure) -> String {
        let name = |i: usize| {
            structure
                .variables()
                .get(i)
                .map_or_else(|| format!("#{i}"), |v| v.name.clone())
        };
        let parents: Vec<String> = self.parents.iter().map(|&p| name(p)).collect();
        format!("{} | {{{}}}", name(self.child), parents.join(", "))
    }
}

impl fmt::Display for FamilyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {:?}", self.child, self.parents)
    }
}

/// Directed graph over named discrete variables.
///
/// Parent sets never contain duplicates or the child itself. Acyclicity is not
/// enforced on mutation; use [`Structure::is_acyclic`] or [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    variables: Vec<Variable>,
    parents: Vec<Vec<usize>>,
}

impl Structure {
    /// An edgeless structure.
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut names = HashSet::new();
        for v in &variables {
            v.check()?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidStructure(format!(
                    "duplicate variable name `{}`",
                    v.name
                )));
            }
        }
        let n = variables.len();
        Ok(Structure {
            variables,
            parents: vec![Vec::new(); n],
        })
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &Variable {
        &self.variables[i]
    }

    pub fn arity(&self, i: usize) -> usize {
        self.variables[i].arity()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn observed(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.variables[i].hidden).collect()
    }

    pub fn hidden(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.variables[i].hidden).collect()
    }

    pub fn parents(&self, child: usize) -> &[usize] {
        &self.parents[child]
    }

    pub fn children(&self, parent: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&c| self.parents[c].binary_search(&parent).is_ok())
            .collect()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    /// All edges as `(from, to)`, ordered by `to` then `from`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "variable index {i} out of range for {} variables",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_index(from)?;
        self.check_index(to)?;
        if from == to {
            return Err(Error::InvalidStructure(format!(
                "`{}` cannot be its own parent",
                self.variables[from].name
            )));
        }
        match self.parents[to].binary_search(&from) {
            Ok(_) => Err(Error::InvalidStructure(format!(
                "edge {} -> {} already present",
                self.variables[from].name, self.variables[to].name
            ))),
            Err(pos) => {
                self.parents[to].insert(pos, from);
                Ok(())
            }
        }
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_index(from)?;
        self.check_index(to)?;
        match self.parents[to].binary_search(&from) {
            Ok(pos) => {
                self.parents[to].remove(pos);
                Ok(())
            }
            Err(_) => Err(Error::InvalidStructure(format!(
                "edge {} -> {} not present",
                self.variables[from].name, self.variables[to].name
            ))),
        }
    }

    /// Replaces a parent set; the result is sorted and deduplicated.
    pub fn set_parents(&mut self, child: usize, parents: impl IntoIterator<Item = usize>) -> Result<()> {
        self.check_index(child)?;
        let set: BTreeSet<usize> = parents.into_iter().collect();
        for &p in &set {
            self.check_index(p)?;
            if p == child {
                return Err(Error::InvalidStructure(format!(
                    "`{}` cannot be its own parent",
                    self.variables[child].name
                )));
            }
        }
        self.parents[child] = set.into_iter().collect();
        Ok(())
    }

    pub fn clear_edges(&mut self) {
        self.parents.iter_mut().for_each(Vec::clear);
    }

    pub fn family(&self, child: usize) -> FamilyKey {
        FamilyKey {
            child,
            parents: self.parents[child].clone(),
        }
    }

    pub fn families(&self) -> Vec<FamilyKey> {
        (0..self.len()).map(|i| self.family(i)).collect()
    }

    /// Number of parent configurations of an arbitrary parent set.
    pub fn config_count_of(&self, parents: &[usize]) -> usize {
        parents.iter().map(|&p| self.arity(p)).product()
    }

    pub fn config_count(&self, child: usize) -> usize {
        self.config_count_of(&self.parents[child])
    }

    /// Mixed-radix index of the parents' states in `assignment` (last parent fastest).
    pub fn config_index_of(&self, parents: &[usize], assignment: &[usize]) -> usize {
        parents
            .iter()
            .fold(0, |acc, &p| acc * self.arity(p) + assignment[p])
    }

    /// Kahn's algorithm, always releasing the lowest ready index first.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (to, ps) in self.parents.iter().enumerate() {
            for &from in ps {
                children[from].push(to);
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            order.push(next);
            for &c in &children[next] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// True if a directed path `from -> ... -> to` exists (a variable reaches itself).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let n = self.len();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p].push(c);
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    queue.push_back(c);
                }
            }
        }
        false
    }

    /// Variables in `seeds` plus all their ancestors, as a membership mask.
    pub fn ancestral_closure(&self, seeds: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut keep = vec![false; self.len()];
        let mut stack: Vec<usize> = seeds.into_iter().collect();
        while let Some(v) = stack.pop() {
            if !keep[v] {
                keep[v] = true;
                stack.extend(self.parents[v].iter().copied());
            }
        }
        keep
    }

    /// Builds a full assignment from `(variable, state label)` pairs.
    pub fn assignment_from_labels(&self, pairs: &[(&str, &str)]) -> Result<Vec<Option<usize>>> {
        let mut out = vec![None; self.len()];
        for &(name, label) in pairs {
            let i = self.require_index(name)?;
            let s = self.variables[i].state_index(label).ok_or_else(|| Error::InvalidArgument(
                format!("variable `{name}` has no state `{label}`"),
            ))?;
            out[i] = Some(s);
        }
        Ok(out)
    }
}

/// One conditional probability table: `rows x arity` probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    arity: usize,
    probs: Vec<f64>,
}

impl Cpt {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let arity = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || arity == 0 {
            return Err(Error::InvalidParameters("empty CPT".into()));
        }
        if rows.iter().any(|r| r.len() != arity) {
            return Err(Error::InvalidParameters("ragged CPT rows".into()));
        }
        Ok(Cpt {
            arity,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_flat(arity: usize, probs: Vec<f64>) -> Result<Self> {
        if arity == 0 || probs.is_empty() || !probs.len().is_multiple_of(arity) {
            return Err(Error::InvalidParameters(format!(
                "{} entries cannot form rows of length {arity}",
                probs.len()
            )));
        }
        Ok(Cpt { arity, probs })
    }

    pub fn uniform(rows: usize, arity: usize) -> Self {
        Cpt {
            arity,
            probs: vec![1.0 / arity as f64; rows * arity],
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn rows(&self) -> usize {
        self.probs.len() / self.arity
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.probs[config * self.arity..(config + 1) * self.arity]
    }

    pub fn prob(&self, config: usize, state: usize) -> f64 {
        self.probs[config * self.arity + state]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks(self.arity).map(<[f64]>::to_vec).collect()
    }
}

/// One CPT per variable, in variable order.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    tables: Vec<Cpt>,
}

impl Parameters {
    pub fn new(tables: Vec<Cpt>) -> Self {
        Parameters { tables }
    }

    pub fn uniform(structure: &Structure) -> Self {
        Parameters {
            tables: (0..structure.len())
                .map(|i| Cpt::uniform(structure.config_count(i), structure.arity(i)))
                .collect(),
        }
    }

    pub fn tables(&self) -> &[Cpt] {
        &self.tables
    }

    pub fn table(&self, i: usize) -> &Cpt {
        &self.tables[i]
    }

    pub fn set_table(&mut self, i: usize, cpt: Cpt) {
        self.tables[i] = cpt;
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Checks shape and normalization against a structure.
    pub fn check(&self, structure: &Structure) -> Result<()> {
        match validate(structure, self).into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidParameters(v.to_string())),
        }
    }
}

/// A structure paired with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    pub structure: Structure,
    pub params: Parameters,
}

impl BayesNet {
    /// Builds a network, rejecting cyclic structures and malformed tables.
    pub fn new(structure: Structure, params: Parameters) -> Result<Self> {
        let report = validate(&structure, &params);
        if let Some(v) = report.first() {
            return Err(match v {
                Violation::Cycle { .. } => Error::InvalidStructure(v.to_string()),
                _ => Error::InvalidParameters(v.to_string()),
            });
        }
        Ok(BayesNet { structure, params })
    }

    pub fn log_likelihood(&self, record: &[usize]) -> Result<f64> {
        log_likelihood_complete(&self.structure, &self.params, record)
    }
}

/// A broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Cycle { variables: Vec<String> },
    TableCount { expected: usize, found: usize },
    TableShape {
        variable: String,
        expected_rows: usize,
        expected_arity: usize,
        rows: usize,
        arity: usize,
    },
    ProbabilityOutOfRange { variable: String, row: usize, state: usize, value: f64 },
    RowNotNormalized { variable: String, row: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { variables } => {
                write!(f, "parent relation is cyclic through {}", variables.join(", "))
            }
            Violation::TableCount { expected, found } => {
                write!(f, "expected {expected} CPTs, found {found}")
            }
            Violation::TableShape {
                variable,
                expected_rows,
                expected_arity,
                rows,
                arity,
            } => write!(
                f,
                "CPT of `{variable}` is {rows}x{arity}, expected {expected_rows}x{expected_arity}"
            ),
            Violation::ProbabilityOutOfRange { variable, row, state, value } => write!(
                f,
                "CPT of `{variable}` row {row} state {state} has probability {value} outside [0, 1]"
            ),
            Violation::RowNotNormalized { variable, row, sum } => {
                write!(f, "CPT of `{variable}` row {row} sums to {sum}")
            }
        }
    }
}

/// Lists every violated invariant of a network; empty when valid.
pub fn validate(structure: &Structure, params: &Parameters) -> Vec<Violation> {
    let mut report = Vec::new();
    if !structure.is_acyclic() {
        // Variables left over after peeling sources and sinks lie on or between cycles.
        let n = structure.len();
        let mut alive = vec![true; n];
        loop {
            let mut changed = false;
            for v in 0..n {
                if !alive[v] {
                    continue;
                }
                let has_parent = structure.parents(v).iter().any(|&p| alive[p]);
                let has_child = (0..n).any(|c| alive[c] && structure.has_edge(v, c));
                if !has_parent || !has_child {
                    alive[v] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        report.push(Violation::Cycle {
            variables: (0..n)
                .filter(|&v| alive[v])
                .map(|v| structure.variable(v).name.clone())
                .collect(),
        });
    }
    if params.len() != structure.len() {
        report.push(Violation::TableCount {
            expected: structure.len(),
            found: params.len(),
        });
        return report;
    }
    for (i, cpt) in params.tables().iter().enumerate() {
        let name = &structure.variable(i).name;
        let (expected_rows, expected_arity) = (structure.config_count(i), structure.arity(i));
        if cpt.rows() != expected_rows || cpt.arity() != expected_arity {
            report.push(Violation::TableShape {
                variable: name.clone(),
                expected_rows,
                expected_arity,
                rows: cpt.rows(),
                arity: cpt.arity(),
            });
            continue;
        }
        for row in 0..cpt.rows() {
            let r = cpt.row(row);
            for (state, &value) in r.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    report.push(Violation::ProbabilityOutOfRange {
                        variable: name.clone(),
                        row,
                        state,
                        value,
                    });
                }
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                report.push(Violation::RowNotNormalized {
                    variable: name.clone(),
                    row,
                    sum,
                });
            }
        }
    }
    report
}

pub(crate) fn check_assignment(structure: &Structure, record: &[usize]) -> Result<()> {
    if record.len() != structure.len() {
        return Err(Error::AssignmentWidth {
            expected: structure.len(),
            got: record.len(),
        });
    }
    for (i, &s) in record.iter().enumerate() {
        if s >= structure.arity(i) {
            return Err(Error::StateOutOfRange {
                variable: structure.variable(i).name.clone(),
                state: s,
                arity: structure.arity(i),
            });
        }
    }
    Ok(())
}

/// `sum_i log theta(x_i | pa_i)` for a complete assignment; `-inf` if any factor is zero.
pub fn log_likelihood_complete(structure: &Structure, params: &Parameters, record: &[usize]) -> Result<f64> {
    check_assignment(structure, record)?;
    if params.len() != structure.len() {
        return Err(Error::InvalidParameters(format!(
            "expected {} CPTs, found {}",
            structure.len(),
            params.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..structure.len() {
        let config = structure.config_index_of(structure.parents(i), record);
        total += params.table(i).prob(config, record[i]).ln();
    }
    Ok(total)
}

/// Iterates over every complete assignment of the given arities, last position fastest.
pub fn for_each_assignment(arities: &[usize], mut f: impl FnMut(&[usize])) {
    let mut current = vec![0usize; arities.len()];
    if arities.contains(&0) {
        return;
    }
    loop {
        f(&current);
        let mut pos = arities.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < arities[pos] {
                break;
            }
            current[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> (Structure, Parameters) {
        let mut s = Structure::new(vec![Variable::binary("A"), Variable::binary("B")]).unwrap();
        s.add_edge(0, 1).unwrap();
        let p = Parameters::new(vec![
            Cpt::from_rows(vec![vec![0.3, 0.7]]).unwrap(),
            Cpt::from_rows(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
        ]);
        (s, p)
    }

    #[test]
    fn empty_network_is_valid() {
        let s = Structure::new(vec![]).unwrap();
        assert!(validate(&s, &Parameters::new(vec![])).is_empty());
    }

    #[test]
    fn two_cycle_is_reported() {
        let mut s = Structure::new(vec![Variable::binary("A"), Variable::binary("B")]).unwrap();
        s.add_edge(0, 1).unwrap();
        s.add_edge(1, 0).unwrap();
        let report = validate(&s, &Parameters::uniform(&s));
        assert_eq!(
            report,
            vec![Violation::Cycle {
                variables: vec!["A".into(), "B".into()]
            }]
        );
    }

    #[test]
    fn unnormalized_row_is_reported() {
        let s = Structure::new(vec![Variable::binary("A")]).unwrap();
        let p = Parameters::new(vec![Cpt::from_rows(vec![vec![0.5, 0.4]]).unwrap()]);
        let report = validate(&s, &p);
        assert_eq!(report.len(), 1);
        assert!(matches!(&report[0], Violation::RowNotNormalized { sum, .. } if (sum - 0.9).abs() < 1e-12));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (s, _) = chain();
        let p = Parameters::new(vec![Cpt::uniform(1, 2), Cpt::uniform(1, 2)]);
        assert!(matches!(validate(&s, &p)[..], [Violation::TableShape { .. }]));
    }

    #[test]
    fn validate_is_idempotent() {
        let (s, p) = chain();
        assert!(validate(&s, &p).is_empty());
        assert_eq!(validate(&s, &p), validate(&s, &p));
    }

    #[test]
    fn likelihood_single_variable() {
        let s = Structure::new(vec![Variable::binary("X")]).unwrap();
        let p = Parameters::uniform(&s);
        let ll = log_likelihood_complete(&s, &p, &[0]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn likelihood_chain_is_product_of_rows() {
        let (s, p) = chain();
        let ll = log_likelihood_complete(&s, &p, &[0, 0]).unwrap();
        assert!((ll - 0.27f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_table_gives_zero_log_likelihood() {
        let (s, _) = chain();
        let p = Parameters::new(vec![
            Cpt::from_rows(vec![vec![0.0, 1.0]]).unwrap(),
            Cpt::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        ]);
        assert_eq!(log_likelihood_complete(&s, &p, &[1, 1]).unwrap(), 0.0);
        assert_eq!(log_likelihood_complete(&s, &p, &[0, 1]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn likelihood_rejects_bad_records() {
        let (s, p) = chain();
        assert!(matches!(
            log_likelihood_complete(&s, &p, &[0]),
            Err(Error::AssignmentWidth { .. })
        ));
        assert!(matches!(
            log_likelihood_complete(&s, &p, &[0, 2]),
            Err(Error::StateOutOfRange { .. })
        ));
        assert!(matches!(
            s.assignment_from_labels(&[("Z", "s0")]),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn likelihood_sums_to_one_over_joint_space() {
        let mut s = Structure::new(vec![
            Variable::binary("A"),
            Variable::with_arity("B", 3),
            Variable::binary("C"),
        ])
        .unwrap();
        s.add_edge(0, 1).unwrap();
        s.add_edge(0, 2).unwrap();
        s.add_edge(1, 2).unwrap();
        let p = Parameters::new(vec![
            Cpt::from_rows(vec![vec![0.25, 0.75]]).unwrap(),
            Cpt::from_rows(vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.1, 0.3]]).unwrap(),
            Cpt::from_rows((0..6).map(|r| vec![0.1 * r as f64 + 0.2, 0.8 - 0.1 * r as f64]).collect()).unwrap(),
        ]);
        assert!(validate(&s, &p).is_empty());
        let mut total = 0.0;
        for_each_assignment(&[2, 3, 2], |x| total += log_likelihood_complete(&s, &p, x).unwrap().exp());
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_index_is_mixed_radix_last_fastest() {
        let s = Structure::new(vec![
            Variable::with_arity("A", 3),
            Variable::binary("B"),
            Variable::binary("C"),
        ])
        .unwrap();
        assert_eq!(s.config_index_of(&[0, 1], &[2, 1, 0]), 5);
        assert_eq!(s.config_index_of(&[0, 1], &[1, 0, 0]), 2);
        assert_eq!(s.config_index_of(&[], &[1, 0, 0]), 0);
    }

    #[test]
    fn structure_rejects_bad_variables_and_edges() {
        assert!(Structure::new(vec![Variable::binary("A"), Variable::binary("A")]).is_err());
        assert!(Structure::new(vec![Variable::new("A", vec!["x".into()])]).is_err());
        assert!(Structure::new(vec![Variable::new("A", vec!["x".into(), "x".into()])]).is_err());
        let mut s = Structure::new(vec![Variable::binary("A"), Variable::binary("B")]).unwrap();
        assert!(s.add_edge(0, 0).is_err());
        s.add_edge(0, 1).unwrap();
        assert!(s.add_edge(0, 1).is_err());
        assert!(s.remove_edge(1, 0).is_err());
    }

    #[test]
    fn reachability_and_topological_order() {
        let mut s = Structure::new((0..4).map(|i| Variable::binary(format!("V{i}"))).collect()).unwrap();
        s.add_edge(3, 1).unwrap();
        s.add_edge(1, 0).unwrap();
        assert_eq!(s.topological_order().unwrap(), vec![2, 3, 1, 0]);
        assert!(s.reaches(3, 0));
        assert!(!s.reaches(0, 3));
        assert_eq!(s.ancestral_closure([0]), vec![true, true, false, true]);
    }
}

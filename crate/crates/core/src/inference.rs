//! Exact inference and expected sufficient statistics.
//!
//! [`posterior_marginal`] runs variable elimination over the ancestral closure of
//! the query and evidence, eliminating in min-fill order (ties to the lowest index).
//! [`CompletionModel`] fixes a network and a dataset and answers family-statistics
//! queries; identical records are grouped so each distinct observation pattern is
//! inferred once.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{FamilyKey, Parameters, Structure};

/// Evidence over every variable of a structure; `None` is unobserved.
pub type Evidence = [Option<usize>];

/// Default cap on the number of entries in a query's joint table.
pub const DEFAULT_QUERY_LIMIT: usize = 1 << 20;

/// Unobserved state spaces up to this size are enumerated per record instead of
/// running one elimination per family.
pub const ENUMERATION_LIMIT: usize = 1 << 12;

/// Probabilities within this distance of 0 or 1 are snapped for count bookkeeping.
pub const STRUCTURAL_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for k in (0..cards.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * cards[k + 1];
    }
    s
}

impl Factor {
    fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    /// CPT of `child` with observed variables fixed to their evidence.
    fn from_cpt(structure: &Structure, params: &Parameters, child: usize, evidence: &Evidence) -> Self {
        let parents = structure.parents(child);
        let mut scope: Vec<usize> = parents.iter().copied().chain([child]).collect();
        scope.sort_unstable();
        let vars: Vec<usize> = scope.iter().copied().filter(|&v| evidence[v].is_none()).collect();
        let cards: Vec<usize> = vars.iter().map(|&v| structure.arity(v)).collect();
        let size: usize = cards.iter().product();
        let cpt = params.table(child);
        let mut full: Vec<usize> = evidence.iter().map(|e| e.unwrap_or(0)).collect();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; vars.len()];
        for _ in 0..size {
            for (k, &v) in vars.iter().enumerate() {
                full[v] = assign[k];
            }
            let config = structure.config_index_of(parents, &full);
            values.push(cpt.prob(config, full[child]));
            for k in (0..vars.len()).rev() {
                assign[k] += 1;
                if assign[k] < cards[k] {
                    break;
                }
                assign[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    fn product(&self, other: &Factor) -> Factor {
        let vars: Vec<usize> = {
            let set: BTreeSet<usize> = self.vars.iter().chain(&other.vars).copied().collect();
            set.into_iter().collect()
        };
        let card_of = |v: usize| {
            self.vars
                .iter()
                .position(|&x| x == v)
                .map(|k| self.cards[k])
                .or_else(|| other.vars.iter().position(|&x| x == v).map(|k| other.cards[k]))
                .expect("variable in union scope")
        };
        let cards: Vec<usize> = vars.iter().map(|&v| card_of(v)).collect();
        let embed = |f: &Factor| -> Vec<usize> {
            let fs = strides(&f.cards);
            vars.iter()
                .map(|v| f.vars.iter().position(|x| x == v).map_or(0, |k| fs[k]))
                .collect()
        };
        let (sa, sb) = (embed(self), embed(other));
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assign = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for k in (0..vars.len()).rev() {
                assign[k] += 1;
                ia += sa[k];
                ib += sb[k];
                if assign[k] < cards[k] {
                    break;
                }
                ia -= sa[k] * cards[k];
                ib -= sb[k] * cards[k];
                assign[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let out_strides = strides(&cards);
        let mut target: Vec<usize> = Vec::with_capacity(self.vars.len());
        let mut j = 0;
        for k in 0..self.vars.len() {
            if k == pos {
                target.push(0);
            } else {
                target.push(out_strides[j]);
                j += 1;
            }
        }
        let mut values = vec![0.0; cards.iter().product()];
        let mut assign = vec![0usize; self.vars.len()];
        let mut it = 0usize;
        for &v in &self.values {
            values[it] += v;
            for k in (0..self.vars.len()).rev() {
                assign[k] += 1;
                it += target[k];
                if assign[k] < self.cards[k] {
                    break;
                }
                it -= target[k] * self.cards[k];
                assign[k] = 0;
            }
        }
        Factor { vars, cards, values }
    }
}

/// Normalized joint distribution over a set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    /// Variables in ascending index order; the last varies fastest.
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub probs: Vec<f64>,
}

impl JointTable {
    /// Probability of a full assignment given as states in `vars` order.
    pub fn prob(&self, states: &[usize]) -> f64 {
        let idx = states
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&s, &c)| acc * c + s);
        self.probs[idx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub table: JointTable,
    /// Natural log of the probability of the evidence.
    pub log_evidence: f64,
}

pub(crate) fn check_evidence(structure: &Structure, evidence: &Evidence) -> Result<()> {
    if evidence.len() != structure.len() {
        return Err(Error::AssignmentWidth {
            expected: structure.len(),
            got: evidence.len(),
        });
    }
    for (i, e) in evidence.iter().enumerate() {
        if let Some(s) = *e {
            if s >= structure.arity(i) {
                return Err(Error::StateOutOfRange {
                    variable: structure.variable(i).name.clone(),
                    state: s,
                    arity: structure.arity(i),
                });
            }
        }
    }
    Ok(())
}

/// Greedy min-fill ordering of `targets` over the interaction graph of `factors`.
fn min_fill_order(factors: &[Factor], targets: &BTreeSet<usize>) -> Vec<usize> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for f in factors {
        for &a in &f.vars {
            let entry = adj.entry(a).or_default();
            entry.extend(f.vars.iter().copied().filter(|&b| b != a));
        }
    }
    let mut remaining = targets.clone();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for &v in &remaining {
            let nbrs: Vec<usize> = adj.get(&v).map(|s| s.iter().copied().collect()).unwrap_or_default();
            let mut fill = 0;
            for (i, &a) in nbrs.iter().enumerate() {
                for &b in &nbrs[i + 1..] {
                    if !adj[&a].contains(&b) {
                        fill += 1;
                    }
                }
            }
            if best.is_none_or(|(bf, _)| fill < bf) {
                best = Some((fill, v));
            }
        }
        let (_, v) = best.expect("nonempty");
        let nbrs: Vec<usize> = adj.remove(&v).map(|s| s.into_iter().collect()).unwrap_or_default();
        for &a in &nbrs {
            let set = adj.get_mut(&a).expect("symmetric adjacency");
            set.remove(&v);
            set.extend(nbrs.iter().copied().filter(|&b| b != a));
        }
        remaining.remove(&v);
        order.push(v);
    }
    order
}

/// `P(query | evidence)` by variable elimination, with the default size limit.
pub fn posterior_marginal(
    structure: &Structure,
    params: &Parameters,
    evidence: &Evidence,
    query: &[usize],
) -> Result<Posterior> {
    posterior_marginal_with_limit(structure, params, evidence, query, DEFAULT_QUERY_LIMIT)
}

pub fn posterior_marginal_with_limit(
    structure: &Structure,
    params: &Parameters,
    evidence: &Evidence,
    query: &[usize],
    limit: usize,
) -> Result<Posterior> {
    check_evidence(structure, evidence)?;
    if params.len() != structure.len() {
        return Err(Error::InvalidParameters(format!(
            "expected {} CPTs, found {}",
            structure.len(),
            params.len()
        )));
    }
    let query_set: BTreeSet<usize> = query.iter().copied().collect();
    if query_set.len() != query.len() {
        return Err(Error::InvalidArgument("query repeats a variable".into()));
    }
    let mut size: usize = 1;
    for &q in &query_set {
        if q >= structure.len() {
            return Err(Error::InvalidArgument(format!("query variable index {q} out of range")));
        }
        if evidence[q].is_some() {
            return Err(Error::InvalidArgument(format!(
                "query variable `{}` is also observed",
                structure.variable(q).name
            )));
        }
        size = size.saturating_mul(structure.arity(q));
    }
    if size > limit {
        return Err(Error::QueryTooLarge { size, limit });
    }

    let observed = evidence.iter().enumerate().filter(|(_, e)| e.is_some()).map(|(i, _)| i);
    let relevant = structure.ancestral_closure(query_set.iter().copied().chain(observed));
    let mut factors: Vec<Factor> = (0..structure.len())
        .filter(|&v| relevant[v])
        .map(|v| Factor::from_cpt(structure, params, v, evidence))
        .collect();
    let eliminate: BTreeSet<usize> = (0..structure.len())
        .filter(|&v| relevant[v] && evidence[v].is_none() && !query_set.contains(&v))
        .collect();

    for v in min_fill_order(&factors, &eliminate) {
        let (with, without): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = without;
        let merged = with
            .iter()
            .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        factors.push(merged.sum_out(v));
    }
    let joint = factors.iter().fold(Factor::scalar(1.0), |acc, f| acc.product(f));
    debug_assert_eq!(joint.vars, query_set.iter().copied().collect::<Vec<_>>());

    let total: f64 = joint.values.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::ZeroProbabilityEvidence);
    }
    let probs = joint.values.iter().map(|v| (v / total).clamp(0.0, 1.0)).collect();
    Ok(Posterior {
        table: JointTable {
            vars: joint.vars,
            cards: joint.cards,
            probs,
        },
        log_evidence: total.ln(),
    })
}

/// Natural log of the probability of the observed cells.
pub fn log_evidence(structure: &Structure, params: &Parameters, evidence: &Evidence) -> Result<f64> {
    Ok(posterior_marginal(structure, params, evidence, &[])?.log_evidence)
}

/// Layout helper for a family's `configs x arity` table.
#[derive(Debug, Clone)]
struct FamilyLayout {
    key: FamilyKey,
    arity: usize,
    configs: usize,
    /// Mixed-radix weight of each parent within the config index.
    parent_weights: Vec<usize>,
}

impl FamilyLayout {
    fn new(structure: &Structure, key: &FamilyKey) -> Result<Self> {
        if key.child >= structure.len() || key.parents.iter().any(|&p| p >= structure.len()) {
            return Err(Error::InvalidArgument(format!("family {key} references unknown variables")));
        }
        if key.parents.contains(&key.child) {
            return Err(Error::InvalidArgument(format!("family {key} lists its child as a parent")));
        }
        let parent_cards: Vec<usize> = key.parents.iter().map(|&p| structure.arity(p)).collect();
        Ok(FamilyLayout {
            key: key.clone(),
            arity: structure.arity(key.child),
            configs: parent_cards.iter().product(),
            parent_weights: strides(&parent_cards),
        })
    }

    fn cells(&self) -> usize {
        self.configs * self.arity
    }

    /// Cell index of a full assignment.
    fn cell(&self, full: &[usize]) -> usize {
        let config: usize = self
            .key
            .parents
            .iter()
            .zip(&self.parent_weights)
            .map(|(&p, &w)| full[p] * w)
            .sum();
        config * self.arity + full[self.key.child]
    }
}

/// `P(child, parents | record)` as a `configs x arity` table (last parent fastest).
pub fn record_family_posterior(
    structure: &Structure,
    params: &Parameters,
    record: &Evidence,
    family: &FamilyKey,
) -> Result<Vec<f64>> {
    check_evidence(structure, record)?;
    let layout = FamilyLayout::new(structure, family)?;
    family_posterior_by_elimination(structure, params, record, &layout)
}

fn family_posterior_by_elimination(
    structure: &Structure,
    params: &Parameters,
    record: &Evidence,
    layout: &FamilyLayout,
) -> Result<Vec<f64>> {
    let members: Vec<usize> = layout.key.parents.iter().copied().chain([layout.key.child]).collect();
    let query: Vec<usize> = {
        let set: BTreeSet<usize> = members.iter().copied().filter(|&v| record[v].is_none()).collect();
        set.into_iter().collect()
    };
    let posterior = posterior_marginal(structure, params, record, &query)?;
    let mut out = vec![0.0; layout.cells()];
    let mut full: Vec<usize> = record.iter().map(|e| e.unwrap_or(0)).collect();
    for (idx, &p) in posterior.table.probs.iter().enumerate() {
        let mut rem = idx;
        for k in (0..query.len()).rev() {
            let c = posterior.table.cards[k];
            full[query[k]] = rem % c;
            rem /= c;
        }
        out[layout.cell(&full)] += p;
    }
    Ok(out)
}

/// Mean, variance and integer range of one expected count.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountMoments {
    pub mean: f64,
    pub variance: f64,
    pub min: u64,
    pub max: u64,
}

impl CountMoments {
    /// Adds `weight` records that each hit this count with probability `p`.
    fn add(&mut self, p: f64, weight: usize) {
        let p = if p <= STRUCTURAL_ZERO {
            0.0
        } else if p >= 1.0 - STRUCTURAL_ZERO {
            1.0
        } else {
            p
        };
        let w = weight as f64;
        self.mean += w * p;
        self.variance += w * p * (1.0 - p);
        if p == 1.0 {
            self.min += weight as u64;
        }
        if p > 0.0 {
            self.max += weight as u64;
        }
    }
}

/// Expected counts of one family under a completion model.
///
/// `cells` is indexed `config * arity + state`; `config_totals[config]` describes the
/// number of records whose parents take that configuration, accumulated from
/// per-record configuration probabilities rather than by summing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyStatistics {
    pub family: FamilyKey,
    pub arity: usize,
    pub cells: Vec<CountMoments>,
    pub config_totals: Vec<CountMoments>,
    pub n_records: u64,
}

impl FamilyStatistics {
    pub fn configs(&self) -> usize {
        self.config_totals.len()
    }

    pub fn cell(&self, config: usize, state: usize) -> &CountMoments {
        &self.cells[config * self.arity + state]
    }

    pub fn means(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mean).collect()
    }

    fn empty(layout: &FamilyLayout) -> Self {
        FamilyStatistics {
            family: layout.key.clone(),
            arity: layout.arity,
            cells: vec![CountMoments::default(); layout.cells()],
            config_totals: vec![CountMoments::default(); layout.configs],
            n_records: 0,
        }
    }

    fn accumulate(&mut self, table: &[f64], weight: usize) {
        for (cell, &p) in self.cells.iter_mut().zip(table) {
            cell.add(p, weight);
        }
        for (config, total) in self.config_totals.iter_mut().enumerate() {
            let p: f64 = table[config * self.arity..(config + 1) * self.arity].iter().sum();
            total.add(p.min(1.0), weight);
        }
        self.n_records += weight as u64;
    }
}

/// Distinct evidence patterns of a dataset, mapped onto a structure's variables.
#[derive(Debug, Clone)]
pub struct Patterns {
    evidence: Vec<Vec<Option<usize>>>,
    counts: Vec<usize>,
    first_record: Vec<usize>,
    n_records: usize,
}

impl Patterns {
    pub fn from_dataset(structure: &Structure, dataset: &Dataset) -> Result<Self> {
        let columns = dataset.column_mapping(structure)?;
        let mut index: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
        let mut patterns = Patterns {
            evidence: Vec::new(),
            counts: Vec::new(),
            first_record: Vec::new(),
            n_records: dataset.len(),
        };
        for (r, row) in dataset.records().iter().enumerate() {
            let mut ev = vec![None; structure.len()];
            for (col, &var) in columns.iter().enumerate() {
                ev[var] = row[col];
            }
            match index.get(&ev) {
                Some(&k) => patterns.counts[k] += 1,
                None => {
                    index.insert(ev.clone(), patterns.evidence.len());
                    patterns.evidence.push(ev);
                    patterns.counts.push(1);
                    patterns.first_record.push(r);
                }
            }
        }
        Ok(patterns)
    }

    pub fn len(&self) -> usize {
        self.evidence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evidence.is_empty()
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    /// `(evidence, multiplicity, index of first record)` for each pattern.
    pub fn iter(&self) -> impl Iterator<Item = (&[Option<usize>], usize, usize)> {
        self.evidence
            .iter()
            .zip(&self.counts)
            .zip(&self.first_record)
            .map(|((e, &c), &r)| (e.as_slice(), c, r))
    }
}

#[derive(Debug, Clone)]
enum PatternPosterior {
    /// Joint posterior over all unobserved variables (ascending), last fastest.
    Joint { unobserved: Vec<usize>, cards: Vec<usize>, probs: Vec<f64> },
    /// Too many unobserved states; families are answered by elimination.
    Eliminate,
}

/// A fixed network plus dataset: the model used to complete missing values.
#[derive(Debug, Clone)]
pub struct CompletionModel {
    structure: Structure,
    params: Parameters,
    patterns: Arc<Patterns>,
    posteriors: Vec<PatternPosterior>,
    log_evidence: Vec<f64>,
}

impl CompletionModel {
    pub fn new(structure: Structure, params: Parameters, patterns: Arc<Patterns>) -> Result<Self> {
        params.check(&structure)?;
        let mut posteriors = Vec::with_capacity(patterns.len());
        let mut log_evidence = Vec::with_capacity(patterns.len());
        for (ev, _, record) in patterns.iter() {
            let (post, le) = pattern_posterior(&structure, &params, ev).map_err(|e| e.at_record(record))?;
            posteriors.push(post);
            log_evidence.push(le);
        }
        Ok(CompletionModel {
            structure,
            params,
            patterns,
            posteriors,
            log_evidence,
        })
    }

    pub fn from_dataset(structure: &Structure, params: &Parameters, dataset: &Dataset) -> Result<Self> {
        let patterns = Arc::new(Patterns::from_dataset(structure, dataset)?);
        CompletionModel::new(structure.clone(), params.clone(), patterns)
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn patterns(&self) -> &Arc<Patterns> {
        &self.patterns
    }

    pub fn n_records(&self) -> usize {
        self.patterns.n_records()
    }

    /// `sum_j log P(o_j | model)`: the observed-data log likelihood.
    pub fn log_likelihood(&self) -> f64 {
        self.patterns
            .iter()
            .zip(&self.log_evidence)
            .map(|((_, count, _), le)| count as f64 * le)
            .sum()
    }

    /// Expected statistics of any family over this structure's variables.
    pub fn family_statistics(&self, family: &FamilyKey) -> Result<FamilyStatistics> {
        let layout = FamilyLayout::new(&self.structure, family)?;
        let mut stats = FamilyStatistics::empty(&layout);
        let mut table = vec![0.0; layout.cells()];
        for ((ev, count, record), post) in self.patterns.iter().zip(&self.posteriors) {
            match post {
                PatternPosterior::Joint { unobserved, cards, probs } => {
                    table.iter_mut().for_each(|t| *t = 0.0);
                    let mut full: Vec<usize> = ev.iter().map(|e| e.unwrap_or(0)).collect();
                    let mut assign = vec![0usize; unobserved.len()];
                    for &p in probs {
                        for (k, &v) in unobserved.iter().enumerate() {
                            full[v] = assign[k];
                        }
                        table[layout.cell(&full)] += p;
                        for k in (0..assign.len()).rev() {
                            assign[k] += 1;
                            if assign[k] < cards[k] {
                                break;
                            }
                            assign[k] = 0;
                        }
                    }
                }
                PatternPosterior::Eliminate => {
                    table = family_posterior_by_elimination(&self.structure, &self.params, ev, &layout)
                        .map_err(|e| e.at_record(record))?;
                }
            }
            for t in table.iter_mut() {
                *t = t.clamp(0.0, 1.0);
            }
            stats.accumulate(&table, count);
        }
        Ok(stats)
    }
}

fn pattern_posterior(structure: &Structure, params: &Parameters, ev: &Evidence) -> Result<(PatternPosterior, f64)> {
    check_evidence(structure, ev)?;
    let unobserved: Vec<usize> = (0..structure.len()).filter(|&v| ev[v].is_none()).collect();
    let cards: Vec<usize> = unobserved.iter().map(|&v| structure.arity(v)).collect();
    let states = cards.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
    match states {
        Some(size) if size <= ENUMERATION_LIMIT => {
            let mut full: Vec<usize> = ev.iter().map(|e| e.unwrap_or(0)).collect();
            let mut probs = Vec::with_capacity(size);
            let mut assign = vec![0usize; unobserved.len()];
            for _ in 0..size {
                for (k, &v) in unobserved.iter().enumerate() {
                    full[v] = assign[k];
                }
                let mut p = 1.0;
                for v in 0..structure.len() {
                    let config = structure.config_index_of(structure.parents(v), &full);
                    p *= params.table(v).prob(config, full[v]);
                }
                probs.push(p);
                for k in (0..assign.len()).rev() {
                    assign[k] += 1;
                    if assign[k] < cards[k] {
                        break;
                    }
                    assign[k] = 0;
                }
            }
            let total: f64 = probs.iter().sum();
            if total <= 0.0 || !total.is_finite() {
                return Err(Error::ZeroProbabilityEvidence);
            }
            probs.iter_mut().for_each(|p| *p = (*p / total).clamp(0.0, 1.0));
            Ok((PatternPosterior::Joint { unobserved, cards, probs }, total.ln()))
        }
        _ => Ok((PatternPosterior::Eliminate, log_evidence(structure, params, ev)?)),
    }
}

/// Expected sufficient statistics for each requested family.
pub fn accumulate_ess(
    structure: &Structure,
    params: &Parameters,
    dataset: &Dataset,
    families: &[FamilyKey],
) -> Result<BTreeMap<FamilyKey, FamilyStatistics>> {
    let model = CompletionModel::from_dataset(structure, params, dataset)?;
    families
        .iter()
        .map(|f| Ok((f.clone(), model.family_statistics(f)?)))
        .collect()
}

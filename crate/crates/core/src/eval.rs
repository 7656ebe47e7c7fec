//! Model-quality metrics: KL divergence between the observed-variable
//! distributions of two networks, and held-out log loss. All values are in nats.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::{ancestral_sample, Dataset};
use crate::error::{Error, Result};
use crate::inference::{log_evidence, posterior_marginal_with_limit, JointTable};
use crate::model::{for_each_assignment, BayesNet, Structure, Variable};

/// Largest joint observed space exact KL will enumerate.
pub const EXACT_KL_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Translates observed variables of one network into another by name and state label.
struct Alignment {
    /// For each observed variable of the source (ascending index): target index.
    target: Vec<usize>,
    /// For each observed variable of the source: source state -> target state.
    states: Vec<Vec<usize>>,
}

impl Alignment {
    fn between(source: &Structure, target: &Structure) -> Result<Self> {
        let src_obs = source.observed();
        let tgt_obs = target.observed();
        if src_obs.len() != tgt_obs.len() {
            return Err(Error::DatasetMismatch(format!(
                "networks observe {} and {} variables",
                src_obs.len(),
                tgt_obs.len()
            )));
        }
        let mut idx = Vec::with_capacity(src_obs.len());
        let mut states = Vec::with_capacity(src_obs.len());
        for &v in &src_obs {
            let var = source.variable(v);
            let t = target
                .index_of(&var.name)
                .filter(|&t| !target.variable(t).hidden)
                .ok_or_else(|| {
                    Error::DatasetMismatch(format!("observed variable `{}` is missing from the other network", var.name))
                })?;
            states.push(state_map(var, target.variable(t))?);
            idx.push(t);
        }
        Ok(Alignment { target: idx, states })
    }
}

fn state_map(from: &Variable, to: &Variable) -> Result<Vec<usize>> {
    if from.arity() != to.arity() {
        return Err(Error::DatasetMismatch(format!(
            "variable `{}` has {} states in one model and {} in the other",
            from.name,
            from.arity(),
            to.arity()
        )));
    }
    from.states
        .iter()
        .map(|label| {
            to.state_index(label).ok_or_else(|| {
                Error::DatasetMismatch(format!("state `{label}` of `{}` is unknown to the other model", from.name))
            })
        })
        .collect()
}

fn observed_joint(structure: &Structure, params: &crate::model::Parameters) -> Result<JointTable> {
    let evidence = vec![None; structure.len()];
    Ok(posterior_marginal_with_limit(structure, params, &evidence, &structure.observed(), EXACT_KL_LIMIT)?.table)
}

fn log_prob_or_neg_inf(structure: &Structure, params: &crate::model::Parameters, evidence: &[Option<usize>]) -> Result<f64> {
    match log_evidence(structure, params, evidence) {
        Ok(v) => Ok(v),
        Err(e) if e.is_zero_probability() => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// `KL(P || Q)` over the observed variables, with hidden variables summed out by
/// each network. Returns `+inf` when Q misses mass that P has.
pub fn kl_divergence(truth: &BayesNet, learned: &BayesNet, mode: KlMode) -> Result<f64> {
    let align = Alignment::between(&truth.structure, &learned.structure)?;
    match mode {
        KlMode::Exact => {
            let p = observed_joint(&truth.structure, &truth.params)?;
            let q = observed_joint(&learned.structure, &learned.params)?;
            // q.vars is ascending in the learned indexing; find where each truth variable lands.
            let slot: Vec<usize> = align
                .target
                .iter()
                .map(|t| q.vars.iter().position(|v| v == t).expect("observed variable in joint"))
                .collect();
            let mut kl = 0.0;
            let mut q_states = vec![0usize; q.vars.len()];
            for_each_assignment(&p.cards, |states| {
                let pp = p.prob(states);
                if pp <= 0.0 {
                    return;
                }
                for (k, &s) in states.iter().enumerate() {
                    q_states[slot[k]] = align.states[k][s];
                }
                let qq = q.prob(&q_states);
                kl += if qq <= 0.0 { f64::INFINITY } else { pp * (pp / qq).ln() };
            });
            // Rounding can leave a tiny negative sum for nearly identical models.
            Ok(kl.max(0.0))
        }
        KlMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("Monte Carlo KL needs at least one sample".into()));
            }
            let sample = ancestral_sample(&truth.structure, &truth.params, samples, seed)?;
            let obs = truth.structure.observed();
            let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
            for row in sample.records() {
                let key: Vec<usize> = row.iter().map(|c| c.expect("sampled records are complete")).collect();
                *counts.entry(key).or_default() += 1;
            }
            let mut patterns: Vec<(Vec<usize>, usize)> = counts.into_iter().collect();
            patterns.sort_unstable();
            let terms: Vec<f64> = patterns
                .par_iter()
                .map(|(states, count)| -> Result<f64> {
                    let mut ev_p = vec![None; truth.structure.len()];
                    let mut ev_q = vec![None; learned.structure.len()];
                    for (k, &s) in states.iter().enumerate() {
                        ev_p[obs[k]] = Some(s);
                        ev_q[align.target[k]] = Some(align.states[k][s]);
                    }
                    let lp = log_evidence(&truth.structure, &truth.params, &ev_p)?;
                    let lq = log_prob_or_neg_inf(&learned.structure, &learned.params, &ev_q)?;
                    Ok(*count as f64 * (lp - lq))
                })
                .collect::<Result<_>>()?;
            Ok(terms.iter().sum::<f64>() / samples as f64)
        }
    }
}

/// Mean `-log P(observed cells)` per record. Hidden variables and missing cells are
/// summed out. A record the model gives zero probability is an error naming it.
pub fn log_loss(net: &BayesNet, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidArgument("log loss needs at least one test record".into()));
    }
    let structure = &net.structure;
    let columns = test.column_mapping(structure)?;
    let maps: Vec<Vec<usize>> = test
        .variables()
        .iter()
        .zip(&columns)
        .map(|(v, &i)| state_map(v, structure.variable(i)))
        .collect::<Result<_>>()?;
    let mut index: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
    let mut patterns: Vec<(Vec<Option<usize>>, usize, usize)> = Vec::new();
    for (r, row) in test.records().iter().enumerate() {
        let mut ev = vec![None; structure.len()];
        for (col, cell) in row.iter().enumerate() {
            ev[columns[col]] = cell.map(|s| maps[col][s]);
        }
        match index.get(&ev) {
            Some(&k) => patterns[k].1 += 1,
            None => {
                index.insert(ev.clone(), patterns.len());
                patterns.push((ev, 1, r));
            }
        }
    }
    let terms: Vec<f64> = patterns
        .par_iter()
        .map(|(ev, count, record)| {
            log_evidence(structure, &net.params, ev)
                .map(|lp| -(*count as f64) * lp)
                .map_err(|e| e.at_record(*record))
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / test.len() as f64)
}

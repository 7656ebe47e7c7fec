//! Independent oracles shared by the integration tests. Nothing here reuses the
//! library's scoring shortcuts: expectations come from exact distributions and
//! marginal likelihoods from explicit enumeration.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structem::data::sample_dirichlet_parameters;
use structem::inference::{log_evidence, record_family_posterior};
use structem::model::{for_each_assignment, log_likelihood_complete};
use structem::scoring::{family_counts, family_score_from_counts};
use structem::special::ln_gamma;
use structem::{BayesNet, Dataset, DirichletPrior, FamilyKey, Parameters, Structure, Variable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Distribution of a sum of independent Bernoulli(p_j) by convolution.
pub fn poisson_binomial(ps: &[f64]) -> Vec<f64> {
    let mut dist = vec![1.0];
    for &p in ps {
        let mut next = vec![0.0; dist.len() + 1];
        for (k, &d) in dist.iter().enumerate() {
            next[k] += d * (1.0 - p);
            next[k + 1] += d * p;
        }
        dist = next;
    }
    dist
}

/// Exact `E[ln Gamma(N + prior)]` for a Poisson-binomial count.
pub fn exact_expected_log_gamma(ps: &[f64], prior: f64) -> f64 {
    poisson_binomial(ps)
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(k, &w)| w * ln_gamma(k as f64 + prior))
        .sum()
}

/// Mean and variance read off the convolved distribution.
pub fn poisson_binomial_moments(ps: &[f64]) -> (f64, f64) {
    let dist = poisson_binomial(ps);
    let mean: f64 = dist.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
    let var = dist.iter().enumerate().map(|(k, w)| (k as f64 - mean).powi(2) * w).sum();
    (mean, var)
}

/// Log probability of observing the counts one draw at a time, each draw
/// predicted from the Dirichlet posterior of the draws before it.
pub fn sequential_predictive(counts: &[usize], priors: &[f64]) -> f64 {
    let mut seen = vec![0.0; counts.len()];
    let mut total = 0.0;
    let alpha: f64 = priors.iter().sum();
    let mut log_p = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            log_p += ((priors[i] + seen[i]) / (alpha + total)).ln();
            seen[i] += 1.0;
            total += 1.0;
        }
    }
    log_p
}

/// Random DAG over `n` variables: a random order, each earlier variable a parent
/// with probability `density`, at most `max_parents` parents.
pub fn random_structure(rng: &mut impl Rng, n: usize, max_parents: usize, density: f64, max_arity: usize) -> Structure {
    let vars = (0..n)
        .map(|i| Variable::with_arity(format!("V{i}"), rng.random_range(2..=max_arity)))
        .collect();
    let mut s = Structure::new(vars).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for (pos, &child) in order.iter().enumerate() {
        let mut candidates: Vec<usize> = order[..pos].to_vec();
        candidates.shuffle(rng);
        for &p in candidates.iter().take(max_parents) {
            if rng.random_bool(density) {
                s.add_edge(p, child).unwrap();
            }
        }
    }
    s
}

pub fn random_network(rng: &mut impl Rng, n: usize, max_parents: usize, density: f64, max_arity: usize) -> BayesNet {
    let s = random_structure(rng, n, max_parents, density, max_arity);
    let params = sample_dirichlet_parameters(&s, 1.0, rng.random()).unwrap();
    BayesNet::new(s, params).unwrap()
}

/// Records of a dataset laid out over a structure's variables.
pub fn evidence_rows(structure: &Structure, data: &Dataset) -> Vec<Vec<Option<usize>>> {
    let columns = data.column_mapping(structure).unwrap();
    data.records()
        .iter()
        .map(|row| {
            let mut ev = vec![None; structure.len()];
            for (c, &v) in columns.iter().enumerate() {
                ev[v] = row[c];
            }
            ev
        })
        .collect()
}

/// Calls `f(completed records, log P(completion | observed, params))` for every joint
/// completion of the unobserved cells. `params` may be `None` when weights are unused.
pub fn for_each_completion(
    structure: &Structure,
    rows: &[Vec<Option<usize>>],
    params: Option<&Parameters>,
    mut f: impl FnMut(&[Vec<usize>], f64),
) {
    let holes: Vec<(usize, usize)> = rows
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().filter(|(_, c)| c.is_none()).map(move |(v, _)| (r, v)))
        .collect();
    assert!(holes.len() <= 16, "too many unobserved cells to enumerate");
    let arities: Vec<usize> = holes.iter().map(|&(_, v)| structure.arity(v)).collect();
    let log_ev: Vec<f64> = match params {
        Some(p) => rows.iter().map(|r| log_evidence(structure, p, r).unwrap()).collect(),
        None => vec![0.0; rows.len()],
    };
    let mut full: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|c| c.unwrap_or(0)).collect()).collect();
    for_each_assignment(&arities, |states| {
        for (k, &(r, v)) in holes.iter().enumerate() {
            full[r][v] = states[k];
        }
        let log_w = match params {
            Some(p) => full
                .iter()
                .zip(&log_ev)
                .map(|(rec, le)| log_likelihood_complete(structure, p, rec).unwrap() - le)
                .sum(),
            None => 0.0,
        };
        f(&full, log_w);
    });
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Closed-form BDe score of completed records.
pub fn complete_score(structure: &Structure, records: &[Vec<usize>], prior: &DirichletPrior) -> f64 {
    structure
        .families()
        .iter()
        .map(|f| family_score_from_counts(&family_counts(structure, records, f), structure.arity(f.child), prior).unwrap())
        .sum()
}

/// `log P(o | M)`: the complete-data marginal likelihood summed over completions.
pub fn true_log_marginal(structure: &Structure, data: &Dataset, prior: &DirichletPrior) -> f64 {
    let rows = evidence_rows(structure, data);
    let mut terms = Vec::new();
    for_each_completion(structure, &rows, None, |full, _| terms.push(complete_score(structure, full, prior)));
    log_sum_exp(&terms)
}

/// `E[log P(o, h | M)]` with completions drawn from `P(h | o, completion model)`.
pub fn enumerated_expected_score(
    target: &Structure,
    completion: &BayesNet,
    data: &Dataset,
    prior: &DirichletPrior,
) -> f64 {
    let rows = evidence_rows(&completion.structure, data);
    let mut total = 0.0;
    for_each_completion(&completion.structure, &rows, Some(&completion.params), |full, log_w| {
        total += log_w.exp() * complete_score(target, full, prior);
    });
    total
}

/// Exact expected family score: each cell and configuration total is a
/// Poisson-binomial count over records, so its `E[ln Gamma]` is taken from the
/// convolved distribution instead of an approximation.
pub fn exact_family_score(
    completion: &BayesNet,
    rows: &[Vec<Option<usize>>],
    family: &FamilyKey,
    prior: &DirichletPrior,
) -> f64 {
    let s = &completion.structure;
    let arity = s.arity(family.child);
    let configs = s.config_count_of(&family.parents);
    let per_record: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| record_family_posterior(s, &completion.params, r, family).unwrap())
        .collect();
    let cell_prior = prior.cell_count(arity, configs);
    let config_prior = prior.config_count(configs);
    let mut total = 0.0;
    for config in 0..configs {
        total += ln_gamma(config_prior) - arity as f64 * ln_gamma(cell_prior);
        let row_ps: Vec<f64> = per_record
            .iter()
            .map(|t| t[config * arity..(config + 1) * arity].iter().sum::<f64>().min(1.0))
            .collect();
        total -= exact_expected_log_gamma(&row_ps, config_prior);
        for state in 0..arity {
            let ps: Vec<f64> = per_record.iter().map(|t| t[config * arity + state]).collect();
            total += exact_expected_log_gamma(&ps, cell_prior);
        }
    }
    total
}

/// Structures over `n` labelled variables: every acyclic subset of the ordered pairs.
pub fn all_dags(variables: &[Variable]) -> Vec<Structure> {
    let n = variables.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << pairs.len()) {
        let mut s = Structure::new(variables.to_vec()).unwrap();
        let mut ok = true;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if mask >> k & 1 == 1 && s.add_edge(a, b).is_err() {
                ok = false;
                break;
            }
        }
        if ok && s.is_acyclic() {
            out.push(s);
        }
    }
    out
}

/// Binary chain `X0 -> ... -> X{n-1}` with rows (0.9, 0.1) / (0.1, 0.9).
pub fn strong_chain(n: usize) -> BayesNet {
    let mut s = Structure::new((0..n).map(|i| Variable::binary(format!("X{i}"))).collect()).unwrap();
    for i in 1..n {
        s.add_edge(i - 1, i).unwrap();
    }
    let mut tables = vec![structem::Cpt::from_rows(vec![vec![0.5, 0.5]]).unwrap()];
    for _ in 1..n {
        tables.push(structem::Cpt::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap());
    }
    BayesNet::new(s, Parameters::new(tables)).unwrap()
}

/// Three binary variables, `records` draws from a random network, then up to
/// `holes` distinct cells blanked.
pub fn enumerable_instance(seed: u64, records: usize, holes: usize) -> Dataset {
    let mut r = rng(seed);
    let vars: Vec<Variable> = (0..3).map(|i| Variable::binary(format!("V{i}"))).collect();
    let mut s = Structure::new(vars.clone()).unwrap();
    s.add_edge(0, 1).unwrap();
    if r.random_bool(0.5) {
        s.add_edge(1, 2).unwrap();
    } else {
        s.add_edge(0, 2).unwrap();
    }
    let params = sample_dirichlet_parameters(&s, 1.0, r.random()).unwrap();
    let full = structem::data::ancestral_sample(&s, &params, records, r.random()).unwrap();
    let mut rows: Vec<Vec<Option<usize>>> = full.records().to_vec();
    let mut cells: Vec<(usize, usize)> = (0..records).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    cells.shuffle(&mut r);
    let k = r.random_range(1..=holes);
    for &(i, j) in &cells[..k] {
        rows[i][j] = None;
    }
    Dataset::new(vars, rows).unwrap()
}

//! Fixtures shared by the benchmarks.

use structem::data::{ancestral_sample, inject_missing_mcar, sample_dirichlet_parameters};
use structem::{BayesNet, Dataset, Structure, Variable};

/// Binary chain `X0 -> X1 -> ... -> X{n-1}` with Dirichlet(1) parameters.
pub fn chain(n: usize, seed: u64) -> BayesNet {
    let mut s = Structure::new((0..n).map(|i| Variable::binary(format!("X{i}"))).collect()).expect("distinct names");
    for i in 1..n {
        s.add_edge(i - 1, i).expect("acyclic");
    }
    let params = sample_dirichlet_parameters(&s, 1.0, seed).expect("valid structure");
    BayesNet::new(s, params).expect("consistent")
}

/// One binary hidden root with `k` binary observed children.
pub fn naive_bayes(k: usize, seed: u64) -> BayesNet {
    let mut vars: Vec<Variable> = (0..k).map(|i| Variable::binary(format!("X{i}"))).collect();
    vars.push(Variable::binary("H").hidden());
    let mut s = Structure::new(vars).expect("distinct names");
    for i in 0..k {
        s.add_edge(k, i).expect("acyclic");
    }
    let params = sample_dirichlet_parameters(&s, 1.0, seed).expect("valid structure");
    BayesNet::new(s, params).expect("consistent")
}

/// `n` records from `net` with each cell blanked with probability `missing`.
pub fn training_data(net: &BayesNet, n: usize, missing: f64, seed: u64) -> Dataset {
    let complete = ancestral_sample(&net.structure, &net.params, n, seed).expect("sampling");
    inject_missing_mcar(&complete, missing, seed ^ 0x5eed).expect("fraction in range")
}

mod common;

use common::*;
use rand::seq::SliceRandom;
use rand::Rng;
use structem::data::{ancestral_sample, inject_missing_mcar, sample_dirichlet_parameters};
use structem::eval::{kl_divergence, log_loss, KlMode};
use structem::model::for_each_assignment;
use structem::search::{bayesian_sem, SemConfig};
use structem::{BayesNet, Cpt, DirichletPrior, Parameters, Structure, Variable};

/// Same variables, fresh random edges and parameters.
fn rival(rng: &mut impl Rng, truth: &BayesNet) -> BayesNet {
    let n = truth.structure.len();
    let mut s = Structure::new(truth.structure.variables().to_vec()).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for (pos, &child) in order.iter().enumerate() {
        for &p in &order[..pos] {
            if s.parents(child).len() < 2 && rng.random_bool(0.4) {
                s.add_edge(p, child).unwrap();
            }
        }
    }
    let params = sample_dirichlet_parameters(&s, 1.0, rng.random()).unwrap();
    BayesNet::new(s, params).unwrap()
}

/// Every joint state with its probability under each network.
fn joint_pairs(p: &BayesNet, q: &BayesNet) -> Vec<(f64, f64)> {
    let arities: Vec<usize> = (0..p.structure.len()).map(|i| p.structure.arity(i)).collect();
    let mut out = Vec::new();
    for_each_assignment(&arities, |x| {
        out.push((p.log_likelihood(x).unwrap().exp(), q.log_likelihood(x).unwrap().exp()));
    });
    out
}

fn enumerated_kl(p: &BayesNet, q: &BayesNet) -> f64 {
    joint_pairs(p, q).iter().filter(|(a, _)| *a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

#[test]
fn kl_is_never_negative_and_matches_enumeration() {
    let mut r = rng(77);
    for _ in 0..100 {
        let n = r.random_range(2..=5);
        let truth = random_network(&mut r, n, 2, 0.5, 3);
        let other = rival(&mut r, &truth);
        let kl = kl_divergence(&truth, &other, KlMode::Exact).unwrap();
        assert!(kl >= 0.0);
        let oracle = enumerated_kl(&truth, &other);
        assert!((kl - oracle).abs() <= 1e-9 * oracle.max(1.0), "{kl} vs {oracle}");
        assert_eq!(kl_divergence(&truth, &truth, KlMode::Exact).unwrap(), 0.0);
    }
}

#[test]
fn monte_carlo_kl_agrees_with_exact_within_sampling_error() {
    let mut r = rng(5);
    let samples = 100_000;
    for case in 0..4 {
        let truth = random_network(&mut r, 5, 2, 0.5, 3);
        let other = rival(&mut r, &truth);
        let exact = kl_divergence(&truth, &other, KlMode::Exact).unwrap();
        let pairs = joint_pairs(&truth, &other);
        let second: f64 = pairs.iter().filter(|(a, _)| *a > 0.0).map(|(a, b)| a * (a / b).ln().powi(2)).sum();
        let se = ((second - exact * exact).max(0.0) / samples as f64).sqrt();
        let mc = kl_divergence(&truth, &other, KlMode::MonteCarlo { samples, seed: case }).unwrap();
        assert!((mc - exact).abs() <= 3.0 * se + 1e-12, "case {case}: {mc} vs {exact} (se {se})");
        assert!((mc - exact).abs() <= 0.02, "case {case}: {mc} vs {exact}");
    }
}

/// Hidden root `H` with binary children; KL is over the children only.
fn hidden_parent(rows: [[f64; 2]; 2], children: usize) -> BayesNet {
    let mut vars: Vec<Variable> = (0..children).map(|i| Variable::binary(format!("X{i}"))).collect();
    vars.push(Variable::binary("H").hidden());
    let mut s = Structure::new(vars).unwrap();
    for c in 0..children {
        s.add_edge(children, c).unwrap();
    }
    let mut tables = vec![Cpt::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap(); children];
    tables.push(Cpt::from_rows(vec![vec![0.5, 0.5]]).unwrap());
    BayesNet::new(s, Parameters::new(tables)).unwrap()
}

#[test]
fn kl_sums_out_hidden_variables() {
    let truth = hidden_parent([[0.85, 0.15], [0.15, 0.85]], 3);
    // Independent fair coins over the same observables.
    let vars: Vec<Variable> = (0..3).map(|i| Variable::binary(format!("X{i}"))).collect();
    let coins = BayesNet::new(
        Structure::new(vars).unwrap(),
        Parameters::new(vec![Cpt::from_rows(vec![vec![0.5, 0.5]]).unwrap(); 3]),
    )
    .unwrap();
    // P(x) = 0.5 * prod(0.85 or 0.15) + 0.5 * prod(0.15 or 0.85) for each of the 8 patterns.
    let mut oracle = 0.0;
    for_each_assignment(&[2, 2, 2], |x| {
        let ones = x.iter().filter(|&&v| v == 1).count() as i32;
        let p = 0.5 * 0.85f64.powi(3 - ones) * 0.15f64.powi(ones) + 0.5 * 0.15f64.powi(3 - ones) * 0.85f64.powi(ones);
        oracle += p * (p / 0.125).ln();
    });
    let kl = kl_divergence(&truth, &coins, KlMode::Exact).unwrap();
    assert!((kl - oracle).abs() < 1e-12, "{kl} vs {oracle}");
    assert_eq!(kl_divergence(&truth, &truth, KlMode::Exact).unwrap(), 0.0);
}

#[test]
fn log_loss_on_complete_records_is_mean_negative_log_likelihood() {
    let mut r = rng(9);
    let net = random_network(&mut r, 4, 2, 0.5, 3);
    let test = ancestral_sample(&net.structure, &net.params, 300, 1).unwrap();
    let oracle: f64 = test
        .records()
        .iter()
        .map(|row| {
            let x: Vec<usize> = row.iter().map(|c| c.unwrap()).collect();
            -net.log_likelihood(&x).unwrap()
        })
        .sum::<f64>()
        / 300.0;
    assert!((log_loss(&net, &test).unwrap() - oracle).abs() < 1e-10);
}

#[test]
fn generating_network_has_lower_held_out_loss_than_a_learned_one() {
    let prior = DirichletPrior::default();
    let truth = strong_chain(5);
    let mut wins = 0;
    for seed in 0..5 {
        let full = ancestral_sample(&truth.structure, &truth.params, 200, seed).unwrap();
        let train = inject_missing_mcar(&full, 0.2, seed).unwrap();
        let test = ancestral_sample(&truth.structure, &truth.params, 2000, 100 + seed).unwrap();
        let empty = Structure::new(truth.structure.variables().to_vec()).unwrap();
        let cfg = SemConfig { seed, ..SemConfig::default() };
        let out = bayesian_sem(&train, &empty, &prior, &cfg).unwrap();
        let learned = BayesNet::new(out.structure, out.params).unwrap();
        if log_loss(&truth, &test).unwrap() <= log_loss(&learned, &test).unwrap() {
            wins += 1;
        }
    }
    assert!(wins >= 4, "generating network won {wins}/5");
}

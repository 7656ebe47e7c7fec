//! Parametric EM for a fixed structure.
//!
//! The M-step sets each CPT row to the Dirichlet posterior mean of the expected
//! counts, `(mu + N') / sum(mu + N')`. That update maximizes
//! `log P(o | theta) + sum N' log theta`, so the trace records the observed-data log
//! likelihood plus the log density of Dirichlet(N' + 1), whose mode is the
//! posterior-mean estimate. This objective never decreases between iterations.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{dirichlet_row, Dataset};
use crate::error::{Error, Result};
use crate::inference::{CompletionModel, FamilyStatistics, Patterns};
use crate::model::{Cpt, Parameters, Structure};
use crate::scoring::DirichletPrior;
use crate::special::ln_gamma;

#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    /// Rows drawn from Dirichlet(1, ..., 1) with a seeded generator.
    Random { seed: u64 },
    Provided(Parameters),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when the objective improves by less than this.
    pub tol: f64,
    pub init: EmInit,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 100,
            tol: 1e-6,
            init: EmInit::Random { seed: 0 },
        }
    }
}

impl EmConfig {
    fn check(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("EM needs max_iters >= 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!("EM tolerance {} must be positive", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: Parameters,
    /// Objective at each evaluated parameter vector; the last entry belongs to `params`.
    pub trace: Vec<f64>,
    /// Parameter updates that changed the estimate.
    pub iterations: usize,
    pub converged: bool,
    /// Completion model at the returned parameters.
    pub model: CompletionModel,
}

/// CPT rows at the Dirichlet posterior mean of a family's expected counts.
pub fn posterior_mean_table(stats: &FamilyStatistics, prior: &DirichletPrior) -> Result<Cpt> {
    let arity = stats.arity;
    let configs = stats.configs();
    let alpha = prior.cell_count(arity, configs);
    let mut probs = Vec::with_capacity(arity * configs);
    for config in 0..configs {
        let row = &stats.cells[config * arity..(config + 1) * arity];
        let total: f64 = row.iter().map(|c| c.mean + alpha).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::InvalidParameters(format!(
                "configuration {config} of {} has no mass",
                stats.family
            )));
        }
        probs.extend(row.iter().map(|c| (c.mean + alpha) / total));
    }
    Cpt::from_flat(arity, probs)
}

/// `log Dir(theta; N' + 1)` summed over every CPT row.
pub fn log_prior_density(structure: &Structure, params: &Parameters, prior: &DirichletPrior) -> f64 {
    let mut total = 0.0;
    for v in 0..structure.len() {
        let arity = structure.arity(v);
        let configs = structure.config_count(v);
        let alpha = prior.cell_count(arity, configs);
        let norm = ln_gamma(arity as f64 * (alpha + 1.0)) - arity as f64 * ln_gamma(alpha + 1.0);
        let table = params.table(v);
        for config in 0..configs {
            total += norm + table.row(config).iter().map(|&t| alpha * t.ln()).sum::<f64>();
        }
    }
    total
}

pub fn random_parameters(structure: &Structure, seed: u64) -> Parameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = (0..structure.len())
        .map(|v| {
            let arity = structure.arity(v);
            let probs = (0..structure.config_count(v))
                .flat_map(|_| dirichlet_row(&mut rng, 1.0, arity))
                .collect();
            Cpt::from_flat(arity, probs).expect("well-formed rows")
        })
        .collect();
    Parameters::new(tables)
}

/// One M-step from the statistics of a completion model.
pub fn m_step(model: &CompletionModel, prior: &DirichletPrior) -> Result<Parameters> {
    let structure = model.structure();
    let tables = structure
        .families()
        .iter()
        .map(|f| posterior_mean_table(&model.family_statistics(f)?, prior))
        .collect::<Result<Vec<_>>>()?;
    Ok(Parameters::new(tables))
}

/// Fits posterior-mean parameters by EM.
pub fn em_fit(structure: &Structure, dataset: &Dataset, prior: &DirichletPrior, config: &EmConfig) -> Result<EmFit> {
    let patterns = Arc::new(Patterns::from_dataset(structure, dataset)?);
    em_fit_patterns(structure, patterns, prior, config)
}

/// [`em_fit`] on pre-grouped records.
pub fn em_fit_patterns(
    structure: &Structure,
    patterns: Arc<Patterns>,
    prior: &DirichletPrior,
    config: &EmConfig,
) -> Result<EmFit> {
    config.check()?;
    let mut params = match &config.init {
        EmInit::Random { seed } => random_parameters(structure, *seed),
        EmInit::Provided(p) => {
            p.check(structure)?;
            p.clone()
        }
    };
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let model = CompletionModel::new(structure.clone(), params.clone(), patterns.clone())?;
        let objective = model.log_likelihood() + log_prior_density(structure, &params, prior);
        let stalled = trace.last().is_some_and(|&last| objective - last < config.tol);
        trace.push(objective);
        if stalled {
            converged = true;
        }
        if converged || iterations >= config.max_iters {
            return Ok(EmFit {
                params,
                trace,
                iterations,
                converged,
                model,
            });
        }
        let next = m_step(&model, prior)?;
        if next == params {
            return Ok(EmFit {
                params,
                trace,
                iterations,
                converged: true,
                model,
            });
        }
        params = next;
        iterations += 1;
    }
}

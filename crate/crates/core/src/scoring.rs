//! Bayesian Dirichlet scores for complete data and their expectations under a
//! completion model.
//!
//! A family's complete-data score is a product of Dirichlet-multinomial marginal
//! likelihoods, one per parent configuration. Its log is a sum of `ln Gamma` terms in
//! single counts, so its expectation under missing data reduces to scalar
//! expectations `E[ln Gamma(N + N')]`, each approximated from the count's mean,
//! variance and integer range by one of [`ExpectedScoreMethod`].

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::inference::{CompletionModel, CountMoments, FamilyStatistics};
use crate::model::{FamilyKey, Parameters, Structure};
use crate::param_em::posterior_mean_table;
use crate::special::{digamma, ln_gamma, normal_cdf, trigamma, GaussHermite};
use crate::data::Dataset;

/// Summation falls back to quadrature above this many integer bins.
pub const MAX_SUMMATION_BINS: u64 = 1_000_000;

/// Below this variance the count is treated as a point mass by Laplace's method.
const LAPLACE_MIN_VARIANCE: f64 = 1e-12;

/// Bisection steps for the Laplace mode.
const LAPLACE_BISECTION_STEPS: usize = 64;

/// Minimizer of `ln Gamma` on the positive reals.
const LN_GAMMA_ARGMIN: f64 = 1.461_632_144_968_362_3;

/// Uniform BDe prior: the equivalent sample size is spread evenly over the cells
/// of every family's joint table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletPrior {
    pub equivalent_sample_size: f64,
}

impl Default for DirichletPrior {
    fn default() -> Self {
        DirichletPrior {
            equivalent_sample_size: 1.0,
        }
    }
}

impl DirichletPrior {
    pub fn new(equivalent_sample_size: f64) -> Result<Self> {
        if !(equivalent_sample_size > 0.0 && equivalent_sample_size.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "equivalent sample size {equivalent_sample_size} must be positive"
            )));
        }
        Ok(DirichletPrior {
            equivalent_sample_size,
        })
    }

    /// Pseudo-count `N'_{x,pa}` of a single cell.
    pub fn cell_count(&self, arity: usize, configs: usize) -> f64 {
        self.equivalent_sample_size / (arity * configs) as f64
    }

    /// Pseudo-count of a whole parent configuration (sum over child states).
    pub fn config_count(&self, configs: usize) -> f64 {
        self.equivalent_sample_size / configs as f64
    }
}

/// Optional structure prior: `edge_log_penalty` per edge. Zero is the uniform prior.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StructurePrior {
    pub edge_log_penalty: f64,
}

impl StructurePrior {
    pub fn family_term(&self, family: &FamilyKey) -> f64 {
        self.edge_log_penalty * family.parents.len() as f64
    }

    pub fn log_prior(&self, structure: &Structure) -> f64 {
        self.edge_log_penalty * structure.edge_count() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExpectedScoreMethod {
    /// `ln Gamma(E[N] + N')`.
    Linear,
    /// Gaussian mass on each integer count between the bounds.
    Summation,
    /// Gauss-Hermite quadrature of the truncated `ln Gamma`.
    Integration { points: usize },
    /// Laplace's method around the mode of `ln Gamma(x) * phi(x)`.
    Laplace,
}

impl ExpectedScoreMethod {
    pub const INTEGRATION: ExpectedScoreMethod = ExpectedScoreMethod::Integration { points: 16 };

    pub fn name(&self) -> &'static str {
        match self {
            ExpectedScoreMethod::Linear => "linear",
            ExpectedScoreMethod::Summation => "summation",
            ExpectedScoreMethod::Integration { .. } => "integration",
            ExpectedScoreMethod::Laplace => "laplace",
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            ExpectedScoreMethod::Integration { points } if points < 2 => Err(Error::InvalidArgument(
                format!("quadrature needs at least 2 points, got {points}"),
            )),
            _ => Ok(()),
        }
    }
}

/// What a structure search optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScoreKind {
    Bde(ExpectedScoreMethod),
    Bic,
}

impl ScoreKind {
    pub fn label(&self) -> String {
        match self {
            ScoreKind::Bde(m) => format!("bde-{}", m.name()),
            ScoreKind::Bic => "bic".to_string(),
        }
    }
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bde-linear" => ScoreKind::Bde(ExpectedScoreMethod::Linear),
            "bde-summation" => ScoreKind::Bde(ExpectedScoreMethod::Summation),
            "bde-integration" => ScoreKind::Bde(ExpectedScoreMethod::INTEGRATION),
            "bde-laplace" => ScoreKind::Bde(ExpectedScoreMethod::Laplace),
            "bic" => ScoreKind::Bic,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown method `{other}` (expected bde-linear, bde-summation, bde-integration, bde-laplace or bic)"
                )))
            }
        })
    }
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Log marginal likelihood of counts under a Dirichlet prior.
pub fn log_dirichlet_factor(counts: &[f64], priors: &[f64]) -> Result<f64> {
    if counts.len() != priors.len() || counts.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} counts and {} prior entries",
            counts.len(),
            priors.len()
        )));
    }
    if let Some(p) = priors.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument(format!("prior count {p} must be positive")));
    }
    if let Some(c) = counts.iter().find(|&&c| !(c >= 0.0 && c.is_finite())) {
        return Err(Error::InvalidArgument(format!("count {c} must be non-negative")));
    }
    let prior_total: f64 = priors.iter().sum();
    let count_total: f64 = counts.iter().sum();
    let cells: f64 = counts
        .iter()
        .zip(priors)
        .map(|(&n, &a)| ln_gamma(a + n) - ln_gamma(a))
        .sum();
    Ok(ln_gamma(prior_total) - ln_gamma(prior_total + count_total) + cells)
}

/// Raw counts of a family over complete assignments, `config * arity + state`.
pub fn family_counts(structure: &Structure, assignments: &[Vec<usize>], family: &FamilyKey) -> Vec<f64> {
    let arity = structure.arity(family.child);
    let mut counts = vec![0.0; structure.config_count_of(&family.parents) * arity];
    for x in assignments {
        let config = structure.config_index_of(&family.parents, x);
        counts[config * arity + x[family.child]] += 1.0;
    }
    counts
}

/// BDe score of one family from its cell counts.
pub fn family_score_from_counts(counts: &[f64], arity: usize, prior: &DirichletPrior) -> Result<f64> {
    let configs = counts.len() / arity;
    let priors = vec![prior.cell_count(arity, configs); arity];
    counts
        .chunks(arity)
        .map(|row| log_dirichlet_factor(row, &priors))
        .sum()
}

/// Log BDe score of a structure given complete data.
pub fn bde_score_complete(structure: &Structure, dataset: &Dataset, prior: &DirichletPrior) -> Result<f64> {
    let assignments = dataset.complete_assignments(structure)?;
    structure
        .families()
        .iter()
        .map(|f| family_score_from_counts(&family_counts(structure, &assignments, f), structure.arity(f.child), prior))
        .sum()
}

/// `E[ln Gamma(N + prior_count)]` for a count with the given moments and range.
pub fn expected_log_gamma(
    mean: f64,
    variance: f64,
    prior_count: f64,
    min_count: u64,
    max_count: u64,
    method: ExpectedScoreMethod,
) -> Result<f64> {
    method.check()?;
    if !(prior_count > 0.0 && prior_count.is_finite()) {
        return Err(Error::InvalidArgument(format!("prior count {prior_count} must be positive")));
    }
    if !variance.is_finite() || variance < 0.0 {
        return Err(Error::InvalidArgument(format!("variance {variance} must be non-negative")));
    }
    if min_count > max_count {
        return Err(Error::InvalidArgument(format!(
            "count bounds [{min_count}, {max_count}] are inverted"
        )));
    }
    let (lo, hi) = (min_count as f64, max_count as f64);
    let slack = 1e-9 * (1.0 + hi);
    if !(mean >= lo - slack && mean <= hi + slack) {
        return Err(Error::InvalidArgument(format!(
            "mean count {mean} lies outside [{min_count}, {max_count}]"
        )));
    }
    let mean = mean.clamp(lo, hi);
    if variance == 0.0 || min_count == max_count {
        return Ok(ln_gamma(mean + prior_count));
    }
    Ok(match method {
        ExpectedScoreMethod::Linear => ln_gamma(mean + prior_count),
        ExpectedScoreMethod::Summation => summation(mean, variance, prior_count, min_count, max_count),
        ExpectedScoreMethod::Integration { points } => {
            integration(mean, variance, prior_count, min_count, max_count, points)
        }
        ExpectedScoreMethod::Laplace => laplace(mean, variance, prior_count, min_count, max_count),
    })
}

fn expected_log_gamma_of(m: &CountMoments, prior_count: f64, method: ExpectedScoreMethod) -> Result<f64> {
    expected_log_gamma(m.mean, m.variance, prior_count, m.min, m.max, method)
}

fn summation(mean: f64, variance: f64, prior: f64, min: u64, max: u64) -> f64 {
    let sd = variance.sqrt();
    // Bins further than 12 sd from the mean carry < 1e-32 of the mass; they are
    // folded into the window's end bins together with the tails.
    let span = 12.0 * sd + 1.0;
    let first = ((mean - span).floor().max(min as f64)) as u64;
    let last = ((mean + span).ceil().min(max as f64)) as u64;
    if last - first > MAX_SUMMATION_BINS {
        log::warn!(
            "summation over {} bins exceeds the cap; using quadrature instead",
            last - first + 1
        );
        return integration(mean, variance, prior, min, max, 16);
    }
    let cdf = |x: f64| normal_cdf((x - mean) / sd);
    let mut total = 0.0;
    let mut below = 0.0;
    for n in first..=last {
        let above = if n == last { 1.0 } else { cdf(n as f64 + 0.5) };
        let p = above - below;
        below = above;
        if p > 0.0 {
            total += p * ln_gamma(n as f64 + prior);
        }
    }
    total
}

fn integration(mean: f64, variance: f64, prior: f64, min: u64, max: u64, points: usize) -> f64 {
    let (lo, hi) = (min as f64 + prior, max as f64 + prior);
    let truncated = |x: f64| ln_gamma(x.clamp(lo, hi));
    let shifted = mean + prior;
    if points == 16 {
        GaussHermite::sixteen().expectation(shifted, variance.sqrt(), truncated)
    } else {
        GaussHermite::new(points).expectation(shifted, variance.sqrt(), truncated)
    }
}

/// Laplace's method for `integral f(x) phi(x; mean + prior, variance) dx` with
/// `f = ln Gamma + shift`; the shift keeps `f` positive on the search bracket so that
/// `ln f` exists, and is subtracted afterwards (the Gaussian integrates to one).
fn laplace(mean: f64, variance: f64, prior: f64, min: u64, max: u64) -> f64 {
    if variance < LAPLACE_MIN_VARIANCE {
        return ln_gamma(mean + prior);
    }
    let center = mean + prior;
    let lo = (min as f64 + prior).max(1e-6);
    let hi = max as f64 + prior;
    let shift = (1.0 - ln_gamma(LN_GAMMA_ARGMIN.clamp(lo, hi))).max(0.0);
    let f = |x: f64| ln_gamma(x) + shift;
    let slope = |x: f64| digamma(x) / f(x) - (x - center) / variance;

    let mode = if slope(lo) <= 0.0 {
        lo
    } else if slope(hi) >= 0.0 {
        hi
    } else {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..LAPLACE_BISECTION_STEPS {
            let mid = 0.5 * (a + b);
            if slope(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    };
    let fm = f(mode);
    let d1 = digamma(mode) / fm;
    let curvature = trigamma(mode) / fm - d1 * d1;
    let scale = 1.0 - variance * curvature;
    if scale <= 0.0 || !scale.is_finite() {
        // ln f is convex enough to cancel the Gaussian's curvature: no interior peak.
        return integration(mean, variance, prior, min, max, 16);
    }
    let gauss = (-0.5 * (mode - center).powi(2) / variance).exp();
    fm * gauss / scale.sqrt() - shift
}

/// Expected log BDe score of one family from its expected statistics.
pub fn expected_family_score(
    stats: &FamilyStatistics,
    prior: &DirichletPrior,
    method: ExpectedScoreMethod,
) -> Result<f64> {
    let arity = stats.arity;
    let configs = stats.configs();
    if stats.cells.len() != arity * configs || configs == 0 {
        return Err(Error::InvalidArgument(format!(
            "statistics for {} have {} cells for {configs} configurations of arity {arity}",
            stats.family,
            stats.cells.len()
        )));
    }
    let cell_prior = prior.cell_count(arity, configs);
    let config_prior = prior.config_count(configs);
    let constant = ln_gamma(config_prior) - arity as f64 * ln_gamma(cell_prior);
    let mut total = 0.0;
    for (config, row_total) in stats.config_totals.iter().enumerate() {
        let mut row = constant - expected_log_gamma_of(row_total, config_prior, method)?;
        for cell in &stats.cells[config * arity..(config + 1) * arity] {
            row += expected_log_gamma_of(cell, cell_prior, method)?;
        }
        total += row;
    }
    Ok(total)
}

pub type FamilyStatisticsMap = BTreeMap<FamilyKey, FamilyStatistics>;

fn lookup<'a>(structure: &Structure, ess: &'a FamilyStatisticsMap, family: &FamilyKey) -> Result<&'a FamilyStatistics> {
    ess.get(family)
        .ok_or_else(|| Error::MissingFamily(family.describe(structure)))
}

/// Expected log score of a structure; the uniform structure prior contributes 0.
pub fn expected_model_score(
    structure: &Structure,
    ess: &FamilyStatisticsMap,
    prior: &DirichletPrior,
    method: ExpectedScoreMethod,
) -> Result<f64> {
    structure
        .families()
        .iter()
        .map(|f| expected_family_score(lookup(structure, ess, f)?, prior, method))
        .sum()
}

/// `sum mu log theta` over a family's cells, with `0 log 0 = 0`.
fn expected_log_likelihood(stats: &FamilyStatistics, table: &[f64]) -> f64 {
    stats
        .cells
        .iter()
        .zip(table)
        .map(|(c, &t)| if c.mean == 0.0 { 0.0 } else { c.mean * t.ln() })
        .sum()
}

/// BIC of one family: expected log likelihood at the posterior-mean estimate minus
/// `(free parameters / 2) ln n`.
pub fn bic_family_score(stats: &FamilyStatistics, prior: &DirichletPrior) -> Result<f64> {
    let table = posterior_mean_table(stats, prior)?;
    let free = (stats.configs() * (stats.arity - 1)) as f64;
    let penalty = if stats.n_records > 0 {
        0.5 * free * (stats.n_records as f64).ln()
    } else {
        0.0
    };
    Ok(expected_log_likelihood(stats, table.as_flat()) - penalty)
}

/// BIC of a structure from expected statistics and fitted parameters.
pub fn bic_score(structure: &Structure, ess: &FamilyStatisticsMap, params_hat: &Parameters) -> Result<f64> {
    params_hat.check(structure)?;
    let mut total = 0.0;
    for f in structure.families() {
        let stats = lookup(structure, ess, &f)?;
        let free = (stats.configs() * (stats.arity - 1)) as f64;
        let penalty = if stats.n_records > 0 {
            0.5 * free * (stats.n_records as f64).ln()
        } else {
            0.0
        };
        total += expected_log_likelihood(stats, params_hat.table(f.child).as_flat()) - penalty;
    }
    Ok(total)
}

/// Cheeseman-Stutz approximation of `log P(D | M)`:
/// `log P(D_bar | M) - log P(D_bar | M, theta) + log P(D | M, theta)` where `D_bar`
/// holds the expected counts.
pub fn cheeseman_stutz(
    structure: &Structure,
    params_hat: &Parameters,
    dataset: &Dataset,
    prior: &DirichletPrior,
    ess: &FamilyStatisticsMap,
) -> Result<f64> {
    let model = CompletionModel::from_dataset(structure, params_hat, dataset)?;
    cheeseman_stutz_with(&model, prior, ess)
}

/// [`cheeseman_stutz`] reusing an existing completion model's likelihood.
pub fn cheeseman_stutz_with(model: &CompletionModel, prior: &DirichletPrior, ess: &FamilyStatisticsMap) -> Result<f64> {
    let structure = model.structure();
    let mut completed = 0.0;
    let mut completed_fit = 0.0;
    for f in structure.families() {
        let stats = lookup(structure, ess, &f)?;
        completed += family_score_from_counts(&stats.means(), stats.arity, prior)?;
        completed_fit += expected_log_likelihood(stats, model.params().table(f.child).as_flat());
    }
    Ok(completed - completed_fit + model.log_likelihood())
}

/// Memoized family scores for one completion model.
#[derive(Debug, Clone, Default)]
pub struct ScoreCache {
    generation: u64,
    entries: HashMap<(FamilyKey, ScoreKind), f64>,
}

impl ScoreCache {
    pub fn new(generation: u64) -> Self {
        ScoreCache {
            generation,
            entries: HashMap::new(),
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn get(&self, generation: u64, family: &FamilyKey, kind: ScoreKind) -> Option<f64> {
        (generation == self.generation)
            .then(|| self.entries.get(&(family.clone(), kind)).copied())
            .flatten()
    }

    pub fn insert(&mut self, generation: u64, family: FamilyKey, kind: ScoreKind, score: f64) {
        if generation != self.generation {
            self.reset(generation);
        }
        self.entries.insert((family, kind), score);
    }

    /// Drops every entry and moves to a new generation.
    pub fn reset(&mut self, generation: u64) {
        self.generation = generation;
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A decomposable score: the score of a structure is the sum of its families' scores.
pub trait FamilyScorer {
    fn family_score(&mut self, family: &FamilyKey) -> Result<f64>;

    fn structure_score(&mut self, structure: &Structure) -> Result<f64> {
        structure.families().iter().map(|f| self.family_score(f)).sum()
    }
}

impl<F: FnMut(&FamilyKey) -> Result<f64>> FamilyScorer for F {
    fn family_score(&mut self, family: &FamilyKey) -> Result<f64> {
        self(family)
    }
}

/// Exact BDe family scores on complete data.
#[derive(Debug, Clone)]
pub struct CompleteDataScorer {
    structure: Structure,
    assignments: Vec<Vec<usize>>,
    prior: DirichletPrior,
    structure_prior: StructurePrior,
    cache: HashMap<FamilyKey, f64>,
}

impl CompleteDataScorer {
    pub fn new(structure: &Structure, dataset: &Dataset, prior: DirichletPrior) -> Result<Self> {
        Ok(CompleteDataScorer {
            assignments: dataset.complete_assignments(structure)?,
            structure: structure.clone(),
            prior,
            structure_prior: StructurePrior::default(),
            cache: HashMap::new(),
        })
    }
}

impl FamilyScorer for CompleteDataScorer {
    fn family_score(&mut self, family: &FamilyKey) -> Result<f64> {
        if let Some(&s) = self.cache.get(family) {
            return Ok(s);
        }
        let counts = family_counts(&self.structure, &self.assignments, family);
        let score = family_score_from_counts(&counts, self.structure.arity(family.child), &self.prior)?
            + self.structure_prior.family_term(family);
        self.cache.insert(family.clone(), score);
        Ok(score)
    }
}

/// Expected family scores under a fixed completion model, with cached statistics.
#[derive(Debug, Clone)]
pub struct ExpectedScorer {
    model: CompletionModel,
    prior: DirichletPrior,
    structure_prior: StructurePrior,
    kind: ScoreKind,
    generation: u64,
    stats: HashMap<FamilyKey, FamilyStatistics>,
    cache: ScoreCache,
    use_cache: bool,
}

impl ExpectedScorer {
    pub fn new(model: CompletionModel, prior: DirichletPrior, kind: ScoreKind, generation: u64) -> Self {
        ExpectedScorer {
            model,
            prior,
            structure_prior: StructurePrior::default(),
            kind,
            generation,
            stats: HashMap::new(),
            cache: ScoreCache::new(generation),
            use_cache: true,
        }
    }

    pub fn with_structure_prior(mut self, structure_prior: StructurePrior) -> Self {
        self.structure_prior = structure_prior;
        self
    }

    /// Disables score memoization (statistics are still cached).
    pub fn without_cache(mut self) -> Self {
        self.use_cache = false;
        self
    }

    pub fn model(&self) -> &CompletionModel {
        &self.model
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn statistics(&mut self, family: &FamilyKey) -> Result<&FamilyStatistics> {
        if !self.stats.contains_key(family) {
            let s = self.model.family_statistics(family)?;
            self.stats.insert(family.clone(), s);
        }
        Ok(&self.stats[family])
    }

    /// Statistics for every family of `structure`.
    pub fn statistics_map(&mut self, structure: &Structure) -> Result<FamilyStatisticsMap> {
        structure
            .families()
            .into_iter()
            .map(|f| {
                let s = self.statistics(&f)?.clone();
                Ok((f, s))
            })
            .collect()
    }

    fn compute(&mut self, family: &FamilyKey) -> Result<f64> {
        let (prior, kind) = (self.prior, self.kind);
        let stats = self.statistics(family)?;
        let score = match kind {
            ScoreKind::Bde(method) => expected_family_score(stats, &prior, method)?,
            ScoreKind::Bic => bic_family_score(stats, &prior)?,
        };
        Ok(score + self.structure_prior.family_term(family))
    }
}

impl FamilyScorer for ExpectedScorer {
    fn family_score(&mut self, family: &FamilyKey) -> Result<f64> {
        if self.use_cache {
            if let Some(s) = self.cache.get(self.generation, family, self.kind) {
                return Ok(s);
            }
        }
        let score = self.compute(family)?;
        if self.use_cache {
            self.cache.insert(self.generation, family.clone(), self.kind, score);
        }
        Ok(score)
    }
}

//! Structure search: greedy hill climbing over DAGs, the structural EM loop, and
//! perturbation restarts for networks with hidden variables.

use std::fmt::{self, Write as _};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{CompletionModel, Patterns};
use crate::model::{Cpt, FamilyKey, Parameters, Structure, Variable};
use crate::param_em::{em_fit_patterns, posterior_mean_table, EmConfig, EmInit};
use crate::scoring::{
    bic_score, cheeseman_stutz_with, DirichletPrior, ExpectedScorer, FamilyScorer, FamilyStatisticsMap,
    ScoreKind, StructurePrior,
};

/// Two expected scores closer than this are equal for SEM convergence.
pub const SEM_SCORE_TOLERANCE: f64 = 1e-9;

/// Moves whose deltas differ by less than this fraction of the structure's
/// total absolute score are treated as tied. Score-equivalent structures
/// otherwise get ordered by rounding noise.
pub const MOVE_RELATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveKind {
    Add,
    Delete,
    Reverse,
}

/// A single edge change. Ordering is lexicographic by (kind, from, to).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeMove {
    pub kind: MoveKind,
    pub from: usize,
    pub to: usize,
}

impl EdgeMove {
    pub fn add(from: usize, to: usize) -> Self {
        EdgeMove { kind: MoveKind::Add, from, to }
    }

    pub fn delete(from: usize, to: usize) -> Self {
        EdgeMove { kind: MoveKind::Delete, from, to }
    }

    pub fn reverse(from: usize, to: usize) -> Self {
        EdgeMove { kind: MoveKind::Reverse, from, to }
    }

    pub fn apply(&self, structure: &mut Structure) -> Result<()> {
        match self.kind {
            MoveKind::Add => structure.add_edge(self.from, self.to),
            MoveKind::Delete => structure.remove_edge(self.from, self.to),
            MoveKind::Reverse => {
                structure.remove_edge(self.from, self.to)?;
                structure.add_edge(self.to, self.from)
            }
        }
    }

    pub fn applied(&self, structure: &Structure) -> Result<Structure> {
        let mut s = structure.clone();
        self.apply(&mut s)?;
        Ok(s)
    }

    /// Families whose parent sets the move changes, after the move.
    fn new_families(&self, structure: &Structure) -> Vec<FamilyKey> {
        let with = |child: usize, extra: Option<usize>, without: Option<usize>| {
            FamilyKey::new(
                child,
                structure
                    .parents(child)
                    .iter()
                    .copied()
                    .filter(|&p| Some(p) != without)
                    .chain(extra),
            )
        };
        match self.kind {
            MoveKind::Add => vec![with(self.to, Some(self.from), None)],
            MoveKind::Delete => vec![with(self.to, None, Some(self.from))],
            MoveKind::Reverse => vec![
                with(self.to, None, Some(self.from)),
                with(self.from, Some(self.to), None),
            ],
        }
    }

    fn touches(&self, hidden: &[bool]) -> bool {
        hidden[self.from] || hidden[self.to]
    }
}

impl fmt::Display for EdgeMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            MoveKind::Add => "add",
            MoveKind::Delete => "delete",
            MoveKind::Reverse => "reverse",
        };
        write!(f, "{kind} {}->{}", self.from, self.to)
    }
}

/// Reflexive reachability: `reach[a][b]` iff a directed path a -> ... -> b exists.
fn reachability(structure: &Structure) -> Vec<Vec<bool>> {
    let n = structure.len();
    let mut children = vec![Vec::new(); n];
    for (from, to) in structure.edges() {
        children[from].push(to);
    }
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &c in &children[v] {
                    if !seen[c] {
                        seen[c] = true;
                        stack.push(c);
                    }
                }
            }
            seen
        })
        .collect()
}

/// Every legal single-edge change of an acyclic structure, in sorted order.
#[allow(clippy::needless_range_loop)]
pub fn neighbors(structure: &Structure, max_parents: usize) -> Vec<EdgeMove> {
    let n = structure.len();
    let reach = reachability(structure);
    let mut moves = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if from == to {
                continue;
            }
            if structure.has_edge(from, to) {
                continue;
            }
            // Adding from -> to closes a cycle iff to already reaches from.
            if !reach[to][from] && structure.parents(to).len() < max_parents {
                moves.push(EdgeMove::add(from, to));
            }
        }
    }
    for (from, to) in structure.edges() {
        moves.push(EdgeMove::delete(from, to));
        // Reversal closes a cycle iff from reaches to by a path other than the edge.
        let indirect = structure
            .children(from)
            .into_iter()
            .any(|c| c != to && reach[c][to]);
        if !indirect && structure.parents(from).len() < max_parents {
            moves.push(EdgeMove::reverse(from, to));
        }
    }
    moves.sort_unstable();
    moves
}

/// A scored move: its delta and the new family scores by child.
type Candidate = (f64, EdgeMove, Vec<(usize, f64)>);

#[derive(Debug, Clone)]
pub struct HillClimbOutcome {
    pub structure: Structure,
    /// Sum of the final structure's family scores.
    pub score: f64,
    pub moves: Vec<EdgeMove>,
}

/// Applies the best strictly improving move until none is left. Ties, up to
/// [`MOVE_RELATIVE_TOLERANCE`], go to the smallest move in [`EdgeMove`] order.
pub fn hill_climb<S: FamilyScorer + ?Sized>(
    initial: &Structure,
    scorer: &mut S,
    max_parents: usize,
) -> Result<HillClimbOutcome> {
    if !initial.is_acyclic() {
        return Err(Error::InvalidStructure("hill climbing needs an acyclic start".into()));
    }
    let mut current = initial.clone();
    let mut scores: Vec<f64> = current
        .families()
        .iter()
        .map(|f| scorer.family_score(f))
        .collect::<Result<_>>()?;
    let mut applied = Vec::new();
    loop {
        let mut best: Option<Candidate> = None;
        let tol = MOVE_RELATIVE_TOLERANCE * scores.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
        for mv in neighbors(&current, max_parents) {
            let mut delta = 0.0;
            let mut updates = Vec::with_capacity(2);
            for fam in mv.new_families(&current) {
                let s = scorer.family_score(&fam)?;
                delta += s - scores[fam.child];
                updates.push((fam.child, s));
            }
            if delta > tol && best.as_ref().is_none_or(|(d, _, _)| delta > *d + tol) {
                best = Some((delta, mv, updates));
            }
        }
        let Some((_, mv, updates)) = best else { break };
        mv.apply(&mut current)?;
        for (child, s) in updates {
            scores[child] = s;
        }
        applied.push(mv);
    }
    Ok(HillClimbOutcome {
        score: scores.iter().sum(),
        structure: current,
        moves: applied,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemConfig {
    pub max_sem_iters: usize,
    pub score: ScoreKind,
    pub em: EmConfig,
    pub max_parents: usize,
    pub n_edge_perturbations: usize,
    pub random_walk_length: usize,
    pub n_random_walks: usize,
    /// Checked between restarts; a running SEM pass always finishes.
    pub time_limit: Option<Duration>,
    pub seed: u64,
    pub structure_prior: StructurePrior,
}

impl Default for SemConfig {
    fn default() -> Self {
        SemConfig {
            max_sem_iters: 30,
            score: ScoreKind::Bde(crate::scoring::ExpectedScoreMethod::Summation),
            em: EmConfig::default(),
            max_parents: 5,
            n_edge_perturbations: 5,
            random_walk_length: 20,
            n_random_walks: 10,
            time_limit: None,
            seed: 0,
            structure_prior: StructurePrior::default(),
        }
    }
}

/// One structural iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SemIteration {
    pub index: usize,
    /// `Score(M_n : M_n)`.
    pub current_score: f64,
    /// `Score(M_{n+1} : M_n)`, the best score found by the search.
    pub expected_score: f64,
    /// Cheeseman-Stutz score of `M_n` at its fitted parameters.
    pub cheeseman_stutz: f64,
    /// BIC of `M_n` from its own expected statistics.
    pub bic: f64,
    pub edges: usize,
    pub em_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord {
    pub phase: RestartPhase,
    pub score: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartPhase {
    Initial,
    EdgePerturbation,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemDiagnostics {
    pub iterations: Vec<SemIteration>,
    pub converged: bool,
    /// Set when inference failed mid-search and the last good model was returned.
    pub failure: Option<String>,
    pub restarts: Vec<RestartRecord>,
    pub timed_out: bool,
}

impl SemDiagnostics {
    /// Tab-separated trace: iteration, expected score, Cheeseman-Stutz, edge count.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("iteration\texpected_score\tcheeseman_stutz\tedges\n");
        for it in &self.iterations {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                it.index, it.expected_score, it.cheeseman_stutz, it.edges
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SemOutcome {
    pub structure: Structure,
    pub params: Parameters,
    pub cheeseman_stutz: f64,
    pub bic: f64,
    pub diagnostics: SemDiagnostics,
}

impl SemOutcome {
    /// Score used to compare runs: Cheeseman-Stutz for BDe, BIC for BIC.
    pub fn comparison_score(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::Bde(_) => self.cheeseman_stutz,
            ScoreKind::Bic => self.bic,
        }
    }
}

/// Builds the family scorer for a completion model; `generation` identifies it.
pub trait ScorerFactory {
    type Scorer: FamilyScorer;

    fn make(&mut self, model: CompletionModel, generation: u64) -> Result<Self::Scorer>;
}

/// The default factory: [`ExpectedScorer`] with the configured score.
#[derive(Debug, Clone, Copy)]
pub struct ExpectedScorerFactory {
    pub prior: DirichletPrior,
    pub kind: ScoreKind,
    pub structure_prior: StructurePrior,
}

impl ScorerFactory for ExpectedScorerFactory {
    type Scorer = ExpectedScorer;

    fn make(&mut self, model: CompletionModel, generation: u64) -> Result<ExpectedScorer> {
        Ok(ExpectedScorer::new(model, self.prior, self.kind, generation).with_structure_prior(self.structure_prior))
    }
}

impl<S: FamilyScorer, F: FnMut(CompletionModel, u64) -> Result<S>> ScorerFactory for F {
    type Scorer = S;

    fn make(&mut self, model: CompletionModel, generation: u64) -> Result<S> {
        self(model, generation)
    }
}

fn statistics_map(model: &CompletionModel, structure: &Structure) -> Result<FamilyStatisticsMap> {
    structure
        .families()
        .into_iter()
        .map(|f| Ok((f.clone(), model.family_statistics(&f)?)))
        .collect()
}

/// Posterior-mean parameters for `structure` from a completion model's statistics.
fn completed_parameters(model: &CompletionModel, structure: &Structure, prior: &DirichletPrior) -> Result<Parameters> {
    let tables: Vec<Cpt> = structure
        .families()
        .iter()
        .map(|f| posterior_mean_table(&model.family_statistics(f)?, prior))
        .collect::<Result<_>>()?;
    Ok(Parameters::new(tables))
}

/// Bayesian structural EM from `initial` with the configured expected score.
pub fn bayesian_sem(dataset: &Dataset, initial: &Structure, prior: &DirichletPrior, config: &SemConfig) -> Result<SemOutcome> {
    let factory = ExpectedScorerFactory {
        prior: *prior,
        kind: config.score,
        structure_prior: config.structure_prior,
    };
    bayesian_sem_with(dataset, initial, prior, config, factory)
}

/// Structural EM with a caller-supplied family scorer per completion model.
///
/// Each iteration fits parameters for `M_n`, freezes `(M_n, theta)` as the
/// completion model, and hill-climbs from `M_n` on the expected score. The loop
/// stops when the search cannot beat `Score(M_n : M_n)`.
pub fn bayesian_sem_with<F: ScorerFactory>(
    dataset: &Dataset,
    initial: &Structure,
    prior: &DirichletPrior,
    config: &SemConfig,
    mut factory: F,
) -> Result<SemOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("structural EM needs at least one record".into()));
    }
    if !initial.is_acyclic() {
        return Err(Error::InvalidStructure("initial structure is cyclic".into()));
    }
    if config.max_sem_iters == 0 {
        return Err(Error::InvalidArgument("max_sem_iters must be at least 1".into()));
    }
    let patterns = Arc::new(Patterns::from_dataset(initial, dataset)?);
    // Fully observed data makes the expected score independent of the
    // completion model, so the first search result is final.
    let complete = patterns.iter().all(|(ev, _, _)| ev.iter().all(Option::is_some));
    let mut diagnostics = SemDiagnostics::default();
    let mut current = initial.clone();
    let mut init = config.em.init.clone();
    let mut last_good: Option<(Structure, Parameters, f64, f64)> = None;

    for index in 0..config.max_sem_iters {
        let step = (|| -> Result<_> {
            let em = EmConfig {
                init: init.clone(),
                ..config.em.clone()
            };
            let fit = em_fit_patterns(&current, patterns.clone(), prior, &em)?;
            let ess = statistics_map(&fit.model, &current)?;
            let cs = cheeseman_stutz_with(&fit.model, prior, &ess)?;
            let bic = bic_score(&current, &ess, &fit.params)?;
            let mut scorer = factory.make(fit.model.clone(), index as u64 + 1)?;
            let current_score = scorer.structure_score(&current)?;
            let climb = hill_climb(&current, &mut scorer, config.max_parents)?;
            Ok((fit, cs, bic, current_score, climb))
        })();
        let (fit, cs, bic, current_score, climb) = match step {
            Ok(v) => v,
            Err(e) => match last_good {
                Some((structure, params, cs, bic)) => {
                    diagnostics.failure = Some(e.to_string());
                    return Ok(SemOutcome {
                        structure,
                        params,
                        cheeseman_stutz: cs,
                        bic,
                        diagnostics,
                    });
                }
                None => return Err(e),
            },
        };
        diagnostics.iterations.push(SemIteration {
            index,
            current_score,
            expected_score: climb.score,
            cheeseman_stutz: cs,
            bic,
            edges: current.edge_count(),
            em_iterations: fit.iterations,
        });
        last_good = Some((current.clone(), fit.params.clone(), cs, bic));
        if climb.score - current_score <= SEM_SCORE_TOLERANCE || climb.structure == current {
            diagnostics.converged = true;
            return Ok(SemOutcome {
                structure: current,
                params: fit.params,
                cheeseman_stutz: cs,
                bic,
                diagnostics,
            });
        }
        if complete {
            let params = completed_parameters(&fit.model, &climb.structure, prior)?;
            let model = CompletionModel::new(climb.structure.clone(), params.clone(), patterns.clone())?;
            let ess = statistics_map(&model, &climb.structure)?;
            diagnostics.converged = true;
            return Ok(SemOutcome {
                cheeseman_stutz: cheeseman_stutz_with(&model, prior, &ess)?,
                bic: bic_score(&climb.structure, &ess, &params)?,
                structure: climb.structure,
                params,
                diagnostics,
            });
        }
        // Warm start: the M-step of the new structure under the old completion model.
        let next_params = completed_parameters(&fit.model, &climb.structure, prior)?;
        init = EmInit::Provided(next_params);
        current = climb.structure;
    }
    // Iteration budget exhausted: the last model we fitted parameters for is the answer.
    let (structure, params, cs, bic) = last_good.expect("max_sem_iters >= 1 is checked");
    Ok(SemOutcome {
        structure,
        params,
        cheeseman_stutz: cs,
        bic,
        diagnostics,
    })
}

/// Every hidden variable is a parent of every observed variable.
pub fn initial_hidden_structure(observed: &[Variable], hidden: &[Variable]) -> Result<Structure> {
    let variables: Vec<Variable> = observed
        .iter()
        .map(|v| Variable { hidden: false, ..v.clone() })
        .chain(hidden.iter().map(|v| Variable { hidden: true, ..v.clone() }))
        .collect();
    let mut s = Structure::new(variables)?;
    let n_obs = observed.len();
    for h in n_obs..n_obs + hidden.len() {
        for o in 0..n_obs {
            s.add_edge(h, o)?;
        }
    }
    Ok(s)
}

/// `count` binary hidden variables named `H0`, `H1`, ... avoiding existing names.
pub fn hidden_variables(count: usize, arity: usize, taken: &[Variable]) -> Vec<Variable> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count {
        let name = format!("H{k}");
        if !taken.iter().any(|v| v.name == name) {
            out.push(Variable::with_arity(name, arity).hidden());
        }
        k += 1;
    }
    out
}

fn random_walk(structure: &Structure, steps: usize, max_parents: usize, rng: &mut impl Rng) -> Structure {
    let mut s = structure.clone();
    for _ in 0..steps {
        let moves = neighbors(&s, max_parents);
        if moves.is_empty() {
            break;
        }
        let mv = moves[rng.random_range(0..moves.len())];
        mv.apply(&mut s).expect("neighbors emits legal moves");
    }
    s
}

fn hidden_perturbation(structure: &Structure, max_parents: usize, rng: &mut impl Rng) -> Option<Structure> {
    let hidden: Vec<bool> = structure.variables().iter().map(|v| v.hidden).collect();
    let moves: Vec<EdgeMove> = neighbors(structure, max_parents)
        .into_iter()
        .filter(|m| m.kind != MoveKind::Delete && m.touches(&hidden))
        .collect();
    if moves.is_empty() {
        return None;
    }
    let mv = moves[rng.random_range(0..moves.len())];
    Some(mv.applied(structure).expect("neighbors emits legal moves"))
}

/// Structural EM from the all-hidden-parents structure, followed by hidden-edge
/// perturbations and random-walk restarts; runs are compared by
/// [`SemOutcome::comparison_score`] and only improvements are kept.
pub fn sem_with_restarts(
    dataset: &Dataset,
    hidden: &[Variable],
    prior: &DirichletPrior,
    config: &SemConfig,
) -> Result<SemOutcome> {
    let initial = initial_hidden_structure(dataset.variables(), hidden)?;
    sem_with_restarts_from(dataset, &initial, prior, config)
}

/// [`sem_with_restarts`] from a given structure. The first run uses `config.em`
/// as given; each restart draws a fresh EM seed from `config.seed`.
pub fn sem_with_restarts_from(
    dataset: &Dataset,
    initial: &Structure,
    prior: &DirichletPrior,
    config: &SemConfig,
) -> Result<SemOutcome> {
    let start = Instant::now();
    let out_of_time = || config.time_limit.is_some_and(|t| start.elapsed() >= t);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let kind = config.score;

    let run = |structure: &Structure, rng: &mut ChaCha8Rng| -> Result<SemOutcome> {
        let mut cfg = config.clone();
        if let EmInit::Random { .. } = cfg.em.init {
            cfg.em.init = EmInit::Random { seed: rng.random() };
        }
        bayesian_sem(dataset, structure, prior, &cfg)
    };

    let mut best = bayesian_sem(dataset, initial, prior, config)?;
    let mut log = vec![RestartRecord {
        phase: RestartPhase::Initial,
        score: best.comparison_score(kind),
        accepted: true,
    }];
    let mut timed_out = false;

    let perturb_edges = |mut local: SemOutcome,
                             rng: &mut ChaCha8Rng,
                             log: &mut Vec<RestartRecord>,
                             timed_out: &mut bool|
     -> Result<SemOutcome> {
        for _ in 0..config.n_edge_perturbations {
            if out_of_time() {
                *timed_out = true;
                break;
            }
            let Some(candidate) = hidden_perturbation(&local.structure, config.max_parents, rng) else {
                break;
            };
            let result = run(&candidate, rng)?;
            let accepted = result.comparison_score(kind) > local.comparison_score(kind);
            log.push(RestartRecord {
                phase: RestartPhase::EdgePerturbation,
                score: result.comparison_score(kind),
                accepted,
            });
            if accepted {
                local = result;
            }
        }
        Ok(local)
    };

    best = perturb_edges(best, &mut rng, &mut log, &mut timed_out)?;
    for _ in 0..config.n_random_walks {
        if timed_out || out_of_time() {
            timed_out = true;
            break;
        }
        let walked = random_walk(&best.structure, config.random_walk_length, config.max_parents, &mut rng);
        let first = run(&walked, &mut rng)?;
        log.push(RestartRecord {
            phase: RestartPhase::RandomWalk,
            score: first.comparison_score(kind),
            accepted: false,
        });
        let refined = perturb_edges(first, &mut rng, &mut log, &mut timed_out)?;
        if refined.comparison_score(kind) > best.comparison_score(kind) {
            if let Some(r) = log.iter_mut().rev().find(|r| r.phase == RestartPhase::RandomWalk) {
                r.accepted = true;
            }
            best = refined;
        }
    }
    best.diagnostics.restarts = log;
    best.diagnostics.timed_out = timed_out;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variable;

    fn vars(n: usize) -> Vec<Variable> {
        (0..n).map(|i| Variable::binary(format!("V{i}"))).collect()
    }

    #[test]
    fn empty_pair_has_two_adds() {
        let s = Structure::new(vars(2)).unwrap();
        assert_eq!(neighbors(&s, 5), vec![EdgeMove::add(0, 1), EdgeMove::add(1, 0)]);
    }

    #[test]
    fn chain_has_five_moves() {
        let mut s = Structure::new(vars(3)).unwrap();
        s.add_edge(0, 1).unwrap();
        s.add_edge(1, 2).unwrap();
        assert_eq!(
            neighbors(&s, 5),
            vec![
                EdgeMove::add(0, 2),
                EdgeMove::delete(0, 1),
                EdgeMove::delete(1, 2),
                EdgeMove::reverse(0, 1),
                EdgeMove::reverse(1, 2),
            ]
        );
    }

    #[test]
    fn saturated_dag_emits_no_adds() {
        let mut s = Structure::new(vars(3)).unwrap();
        s.add_edge(0, 1).unwrap();
        s.add_edge(0, 2).unwrap();
        s.add_edge(1, 2).unwrap();
        let moves = neighbors(&s, 2);
        assert!(moves.iter().all(|m| m.kind != MoveKind::Add));
        // Reversing 0->2 would close 0->1->2->0.
        assert!(moves.contains(&EdgeMove::reverse(0, 1)));
        assert!(!moves.contains(&EdgeMove::reverse(0, 2)));
    }

    #[test]
    fn max_parents_limits_reversals() {
        let mut s = Structure::new(vars(3)).unwrap();
        s.add_edge(1, 0).unwrap();
        s.add_edge(0, 2).unwrap();
        let moves = neighbors(&s, 1);
        assert!(!moves.contains(&EdgeMove::reverse(0, 2)));
        assert!(moves.contains(&EdgeMove::reverse(1, 0)));
    }

    #[test]
    fn local_maximum_is_returned_unchanged() {
        let s = Structure::new(vars(3)).unwrap();
        let mut scorer = |f: &FamilyKey| Ok(-(f.parents.len() as f64));
        let out = hill_climb(&s, &mut scorer, 5).unwrap();
        assert_eq!(out.structure, s);
        assert!(out.moves.is_empty());
    }

    #[test]
    fn climb_follows_best_moves_with_tie_break() {
        // Every edge into V2 is worth +1, everything else 0.
        let s = Structure::new(vars(3)).unwrap();
        let mut scorer = |f: &FamilyKey| Ok(if f.child == 2 { f.parents.len() as f64 } else { 0.0 });
        let out = hill_climb(&s, &mut scorer, 5).unwrap();
        assert_eq!(out.moves, vec![EdgeMove::add(0, 2), EdgeMove::add(1, 2)]);
        assert_eq!(out.score, 2.0);
    }

    #[test]
    fn initial_hidden_structure_shapes() {
        let obs = vars(3);
        assert_eq!(initial_hidden_structure(&obs, &[]).unwrap().edge_count(), 0);
        let hidden = hidden_variables(2, 2, &obs);
        let s = initial_hidden_structure(&obs, &hidden).unwrap();
        assert_eq!(s.edge_count(), 6);
        assert!(s.is_acyclic());
        assert_eq!(s.hidden(), vec![3, 4]);
        assert!(crate::model::validate(&s, &Parameters::uniform(&s)).is_empty());
        assert!(initial_hidden_structure(&obs, &[Variable::binary("V0")]).is_err());
    }

    #[test]
    fn diagnostics_tsv_has_one_line_per_iteration() {
        let d = SemDiagnostics {
            iterations: vec![SemIteration {
                index: 0,
                current_score: -2.0,
                expected_score: -1.5,
                cheeseman_stutz: -1.75,
                bic: -3.0,
                edges: 4,
                em_iterations: 3,
            }],
            ..SemDiagnostics::default()
        };
        assert_eq!(d.to_tsv(), "iteration\texpected_score\tcheeseman_stutz\tedges\n0\t-1.5\t-1.75\t4\n");
    }
}

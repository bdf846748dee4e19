//! Initialisation, selection and variation operators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::engine::Individual;
use crate::error::{Error, Result};
use crate::expr::{depth_of, Node, Program, Semantics};
use crate::semantic::SemanticBounds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    /// Probability that a crossover point is a function node.
    pub internal_node_bias: f64,
    pub init_depth_min: usize,
    pub init_depth_max: usize,
    pub max_depth: usize,
    pub max_length: usize,
    /// Depth limit of subtrees grown by mutation.
    pub mutation_depth: usize,
    pub ssc_max_trials: usize,
    /// Range of ephemeral random constants; `None` means features only.
    pub erc: Option<[f64; 2]>,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            crossover_rate: 0.60,
            mutation_rate: 0.40,
            tournament_size: 7,
            internal_node_bias: 0.90,
            init_depth_min: 1,
            init_depth_max: 5,
            max_depth: 8,
            max_length: 800,
            mutation_depth: 5,
            ssc_max_trials: 20,
            erc: None,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        prob("crossover_rate", self.crossover_rate)?;
        prob("mutation_rate", self.mutation_rate)?;
        prob("internal_node_bias", self.internal_node_bias)?;
        if self.crossover_rate + self.mutation_rate > 1.0 + 1e-12 {
            return Err(Error::Config("crossover_rate + mutation_rate exceeds 1".into()));
        }
        if self.tournament_size == 0 {
            return Err(Error::Config("tournament_size must be at least 1".into()));
        }
        if !(self.init_depth_min <= self.init_depth_max && self.init_depth_max <= self.max_depth) {
            return Err(Error::Config(format!(
                "need init_depth_min <= init_depth_max <= max_depth, got {} / {} / {}",
                self.init_depth_min, self.init_depth_max, self.max_depth
            )));
        }
        if self.mutation_depth > self.max_depth {
            return Err(Error::Config("mutation_depth exceeds max_depth".into()));
        }
        if self.max_length == 0 {
            return Err(Error::Config("max_length must be positive".into()));
        }
        if let Some([lo, hi]) = self.erc {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("invalid erc range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn admits(&self, p: &Program) -> bool {
        p.len() <= self.max_length && depth_of(p.nodes()) <= self.max_depth
    }
}

fn random_terminal<R: Rng + ?Sized>(features: usize, cfg: &VariationConfig, rng: &mut R) -> Node {
    match cfg.erc {
        Some([lo, hi]) if rng.gen_range(0..=features) == features => Node::Const(rng.gen_range(lo..hi)),
        _ => Node::Var(rng.gen_range(0..features) as u32),
    }
}

fn random_function<R: Rng + ?Sized>(rng: &mut R) -> Node {
    Node::FUNCTIONS[rng.gen_range(0..Node::FUNCTIONS.len())]
}

fn terminal_ratio(features: usize, cfg: &VariationConfig) -> f64 {
    let terminals = features + usize::from(cfg.erc.is_some());
    terminals as f64 / (terminals + Node::FUNCTIONS.len()) as f64
}

/// Every branch reaches exactly `depth`.
pub fn full_tree<R: Rng + ?Sized>(depth: usize, features: usize, cfg: &VariationConfig, rng: &mut R) -> Program {
    fn go<R: Rng + ?Sized>(d: usize, out: &mut Vec<Node>, features: usize, cfg: &VariationConfig, rng: &mut R) {
        if d == 0 {
            out.push(random_terminal(features, cfg, rng));
        } else {
            out.push(random_function(rng));
            go(d - 1, out, features, cfg, rng);
            go(d - 1, out, features, cfg, rng);
        }
    }
    let mut nodes = Vec::with_capacity((1 << (depth + 1)) - 1);
    go(depth, &mut nodes, features, cfg, rng);
    Program::from_prefix_unchecked(nodes)
}

/// Grows a tree of depth at most `max_depth`, picking terminals in
/// proportion to their share of the primitive set. With `root_function`
/// the root is always a function node, so the depth is at least 1.
pub fn grow_tree<R: Rng + ?Sized>(
    max_depth: usize,
    root_function: bool,
    features: usize,
    cfg: &VariationConfig,
    rng: &mut R,
) -> Program {
    let ratio = terminal_ratio(features, cfg);
    #[allow(clippy::too_many_arguments)]
    fn go<R: Rng + ?Sized>(
        depth: usize,
        max_depth: usize,
        force_function: bool,
        ratio: f64,
        out: &mut Vec<Node>,
        features: usize,
        cfg: &VariationConfig,
        rng: &mut R,
    ) {
        let terminal = depth >= max_depth || (!force_function && rng.gen_bool(ratio));
        if terminal {
            out.push(random_terminal(features, cfg, rng));
        } else {
            out.push(random_function(rng));
            go(depth + 1, max_depth, false, ratio, out, features, cfg, rng);
            go(depth + 1, max_depth, false, ratio, out, features, cfg, rng);
        }
    }
    let mut nodes = Vec::new();
    go(
        0,
        max_depth,
        root_function && max_depth > 0,
        ratio,
        &mut nodes,
        features,
        cfg,
        rng,
    );
    Program::from_prefix_unchecked(nodes)
}

/// Ramped half-and-half: the population is split into equal blocks, one
/// per depth in `init_depth_min..=init_depth_max`; each block alternates
/// full and grow trees.
pub fn ramped_half_and_half<R: Rng + ?Sized>(
    n: usize,
    features: usize,
    cfg: &VariationConfig,
    rng: &mut R,
) -> Vec<Program> {
    assert!(features > 0, "need at least one feature");
    let levels = cfg.init_depth_max - cfg.init_depth_min + 1;
    let mut out = Vec::with_capacity(n);
    let mut level_start = 0;
    for level in 0..levels {
        let level_end = (level + 1) * n / levels;
        let depth = cfg.init_depth_min + level;
        for i in level_start..level_end {
            let tree = if (i - level_start) % 2 == 0 {
                full_tree(depth, features, cfg, rng)
            } else {
                grow_tree(depth, true, features, cfg, rng)
            };
            out.push(tree);
        }
        level_start = level_end;
    }
    out
}

/// Samples `k` indices uniformly with replacement and returns the best one
/// according to `better(a, b)` (true when `a` is strictly preferred).
/// Ties go to the lowest index.
pub fn tournament_by<R, F>(len: usize, k: usize, rng: &mut R, mut better: F) -> Result<usize>
where
    R: Rng + ?Sized,
    F: FnMut(usize, usize) -> bool,
{
    if len == 0 {
        return Err(Error::Usage("tournament on an empty population".into()));
    }
    let mut best = rng.gen_range(0..len);
    for _ in 1..k.max(1) {
        let c = rng.gen_range(0..len);
        if better(c, best) || (c < best && !better(best, c)) {
            best = c;
        }
    }
    Ok(best)
}

/// Crowded-comparison tournament: lower front rank wins, then larger
/// crowding distance. Returns the index of the winner.
pub fn tournament_select<R: Rng + ?Sized>(pop: &[Individual], k: usize, rng: &mut R) -> Result<usize> {
    tournament_by(pop.len(), k, rng, |a, b| crowded_better(&pop[a], &pop[b]))
}

pub(crate) fn crowded_better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

/// Picks a crossover point: a function node with probability `bias`,
/// otherwise a terminal. Programs without function nodes always yield a
/// terminal.
pub fn select_crossover_point<R: Rng + ?Sized>(p: &Program, bias: f64, rng: &mut R) -> usize {
    let internal = p.nodes().iter().filter(|n| !n.is_terminal()).count();
    let leaves = p.len() - internal;
    let want_internal = internal > 0 && rng.gen_bool(bias);
    let (target, kth) = if want_internal {
        (false, rng.gen_range(0..internal))
    } else {
        (true, rng.gen_range(0..leaves))
    };
    p.nodes()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.is_terminal() == target)
        .nth(kth)
        .map(|(i, _)| i)
        .expect("kth node exists")
}

/// Swaps the subtrees rooted at `a` in `p1` and `b` in `p2`. A child that
/// breaks the depth or length limit is replaced by a copy of the parent it
/// was built from.
pub fn swap_subtrees(p1: &Program, a: usize, p2: &Program, b: usize, cfg: &VariationConfig) -> (Program, Program) {
    let c1 = p1.replace_subtree(a, p2.subtree(b));
    let c2 = p2.replace_subtree(b, p1.subtree(a));
    (
        if cfg.admits(&c1) { c1 } else { p1.clone() },
        if cfg.admits(&c2) { c2 } else { p2.clone() },
    )
}

/// Subtree crossover with 90/10 internal/leaf point selection.
pub fn crossover_90_10<R: Rng + ?Sized>(
    p1: &Program,
    p2: &Program,
    cfg: &VariationConfig,
    rng: &mut R,
) -> (Program, Program) {
    let a = select_crossover_point(p1, cfg.internal_node_bias, rng);
    let b = select_crossover_point(p2, cfg.internal_node_bias, rng);
    swap_subtrees(p1, a, p2, b, cfg)
}

/// Replaces a uniformly chosen node by a freshly grown subtree.
pub fn subtree_mutation<R: Rng + ?Sized>(p: &Program, features: usize, cfg: &VariationConfig, rng: &mut R) -> Program {
    let at = rng.gen_range(0..p.len());
    mutate_at(p, at, features, cfg, rng)
}

pub fn mutate_at<R: Rng + ?Sized>(
    p: &Program,
    at: usize,
    features: usize,
    cfg: &VariationConfig,
    rng: &mut R,
) -> Program {
    let fresh = grow_tree(cfg.mutation_depth, false, features, cfg, rng);
    let child = p.replace_subtree(at, fresh.nodes());
    if cfg.admits(&child) {
        child
    } else {
        p.clone()
    }
}

#[derive(Clone, Debug)]
pub struct SscOutcome {
    pub children: (Program, Program),
    /// Number of banded trials attempted.
    pub trials: usize,
    /// True when a trial landed inside the similarity band.
    pub accepted: bool,
    /// Crossover executions including the fallback.
    pub crossovers: usize,
}

/// Semantic similarity-based crossover. Repeats subtree crossover until a
/// child's mean absolute semantic distance to the parent it was built from
/// falls inside the band, giving up after `ssc_max_trials` attempts and
/// then performing one unconstrained crossover.
pub fn ssc_crossover<R: Rng + ?Sized>(
    p1: &Individual,
    p2: &Individual,
    train: &Dataset,
    cfg: &VariationConfig,
    bounds: &SemanticBounds,
    rng: &mut R,
) -> Result<SscOutcome> {
    let in_band = |child: &Program, parent: &Semantics| -> Result<bool> {
        let d = child.semantics(train)?.mean_abs_distance(parent)?;
        Ok(match bounds.lbss {
            Some(lo) => lo <= d && d <= bounds.ubss,
            None => d <= bounds.ubss,
        })
    };
    for trial in 1..=cfg.ssc_max_trials {
        let (c1, c2) = crossover_90_10(&p1.program, &p2.program, cfg, rng);
        if in_band(&c1, &p1.semantics)? || in_band(&c2, &p2.semantics)? {
            return Ok(SscOutcome {
                children: (c1, c2),
                trials: trial,
                accepted: true,
                crossovers: trial,
            });
        }
    }
    let children = crossover_90_10(&p1.program, &p2.program, cfg, rng);
    Ok(SscOutcome {
        children,
        trials: cfg.ssc_max_trials,
        accepted: false,
        crossovers: cfg.ssc_max_trials + 1,
    })
}

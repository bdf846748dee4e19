//! Evolutionary loops: shared individual representation, breeding, and
//! the NSGA-II / SPEA2 generation steps.

mod nsga2;
mod spea2;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{confusion_from_semantics, Dataset};
use crate::error::{Error, Result};
use crate::expr::{Program, Semantics};
use crate::pareto::nondominated_indices;
use crate::semantic::{augment_objectives, Criterion, SemanticBounds};
use crate::variation::{crossover_90_10, ramped_half_and_half, ssc_crossover, subtree_mutation, VariationConfig};

pub use nsga2::{nsga2_generation, Nsga2State};
pub use spea2::{spea2_density, spea2_generation, truncate_by_nearest_neighbour, Spea2State};

/// A program with its training-set objectives and bookkeeping.
#[derive(Clone, Debug)]
pub struct Individual {
    pub program: Program,
    /// `[tpr, tnr]`, plus the semantic criterion when one is active.
    pub objectives: Vec<f64>,
    /// Training-set outputs.
    pub semantics: Semantics,
    pub rank: usize,
    pub crowding: f64,
    pub spea2_fitness: f64,
}

impl Individual {
    pub fn evaluate(program: Program, train: &Dataset) -> Result<Self> {
        let semantics = program.semantics(train)?;
        let c = confusion_from_semantics(&semantics, train);
        Ok(Self {
            program,
            objectives: vec![c.tpr(), c.tnr()],
            semantics,
            rank: 0,
            crowding: 0.0,
            spea2_fitness: 0.0,
        })
    }

    pub fn tpr(&self) -> f64 {
        self.objectives[0]
    }

    pub fn tnr(&self) -> f64 {
        self.objectives[1]
    }
}

impl AsRef<[f64]> for Individual {
    fn as_ref(&self) -> &[f64] {
        &self.objectives
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nsga2,
    Spea2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Canonical,
    Ssc,
    Sdo,
    Psdo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Canonical, Method::Sdo, Method::Psdo, Method::Ssc];

    pub fn criterion(self) -> Option<Criterion> {
        match self {
            Method::Sdo => Some(Criterion::Sdo),
            Method::Psdo => Some(Criterion::Psdo),
            Method::Canonical | Method::Ssc => None,
        }
    }

    pub fn needs_bounds(self) -> bool {
        self != Method::Canonical
    }
}

macro_rules! name_enum {
    ($ty:ty { $($variant:path => $name:literal),* $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),* })
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)*
                    _ => Err(Error::Config(format!("unknown {}: {s:?}", stringify!($ty).to_lowercase()))),
                }
            }
        }
    };
}

name_enum!(Algorithm { Algorithm::Nsga2 => "nsga2", Algorithm::Spea2 => "spea2" });
name_enum!(Method {
    Method::Canonical => "canonical",
    Method::Ssc => "ssc",
    Method::Sdo => "sdo",
    Method::Psdo => "psdo",
});

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub population: usize,
    pub method: Method,
    pub bounds: Option<SemanticBounds>,
    pub variation: VariationConfig,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("population must be at least 2".into()));
        }
        self.variation.validate()?;
        match (self.method.needs_bounds(), &self.bounds) {
            (true, None) => Err(Error::Config(format!("method {} needs semantic bounds", self.method))),
            (false, Some(_)) => Err(Error::Config("canonical method takes no semantic bounds".into())),
            (_, Some(b)) => b.validate(),
            (false, None) => Ok(()),
        }
    }

    fn bounds(&self) -> &SemanticBounds {
        self.bounds.as_ref().expect("validated: semantic method has bounds")
    }
}

/// Evolution context: configuration plus the training data.
#[derive(Clone, Copy)]
pub struct Engine<'a> {
    pub cfg: &'a EngineConfig,
    pub train: &'a Dataset,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &'a EngineConfig, train: &'a Dataset) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() || train.feature_count() == 0 {
            return Err(Error::Usage("training set needs rows and features".into()));
        }
        Ok(Self { cfg, train })
    }

    pub fn evaluate(&self, program: Program) -> Result<Individual> {
        Individual::evaluate(program, self.train)
    }

    pub fn initial_population<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Individual>> {
        ramped_half_and_half(
            self.cfg.population,
            self.train.feature_count(),
            &self.cfg.variation,
            rng,
        )
        .into_iter()
        .map(|p| self.evaluate(p))
        .collect()
    }

    /// Drops any semantic objective and, for SDO/PSDO, recomputes it
    /// against a fresh pivot.
    pub fn assign_objectives(&self, pool: &mut [Individual]) -> Result<()> {
        for ind in pool.iter_mut() {
            ind.objectives.truncate(2);
        }
        if let Some(criterion) = self.cfg.method.criterion() {
            augment_objectives(pool, criterion, self.cfg.bounds())?;
        }
        Ok(())
    }

    /// Produces `n` offspring. Each parent pair undergoes either crossover
    /// (SSC for that method) or mutation of both parents; any remaining
    /// probability mass copies the parents unchanged.
    pub fn breed<R, S>(&self, parents: &[Individual], n: usize, rng: &mut R, mut select: S) -> Result<Vec<Individual>>
    where
        R: Rng + ?Sized,
        S: FnMut(&mut R) -> Result<usize>,
    {
        let vc = &self.cfg.variation;
        let features = self.train.feature_count();
        let mut out = Vec::with_capacity(n + 1);
        while out.len() < n {
            let a = &parents[select(rng)?];
            let b = &parents[select(rng)?];
            let roll: f64 = rng.gen();
            let (c1, c2) = if roll < vc.crossover_rate {
                if self.cfg.method == Method::Ssc {
                    ssc_crossover(a, b, self.train, vc, self.cfg.bounds(), rng)?.children
                } else {
                    crossover_90_10(&a.program, &b.program, vc, rng)
                }
            } else if roll < vc.crossover_rate + vc.mutation_rate {
                (
                    subtree_mutation(&a.program, features, vc, rng),
                    subtree_mutation(&b.program, features, vc, rng),
                )
            } else {
                (a.program.clone(), b.program.clone())
            };
            out.push(self.evaluate(c1)?);
            if out.len() < n {
                out.push(self.evaluate(c2)?);
            }
        }
        Ok(out)
    }
}

/// Members that are non-dominated on TPR/TNR, in population order.
pub fn classification_front(pop: &[Individual]) -> Vec<&Individual> {
    let two: Vec<&[f64]> = pop.iter().map(|i| &i.objectives[..2]).collect();
    nondominated_indices(&two).into_iter().map(|i| &pop[i]).collect()
}

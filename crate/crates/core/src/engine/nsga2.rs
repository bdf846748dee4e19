use rand::Rng;

use super::{Engine, Individual};
use crate::error::Result;
use crate::pareto::{crowding_distance, fast_nondominated_sort};
use crate::variation::tournament_select;

#[derive(Clone, Debug)]
pub struct Nsga2State {
    pub population: Vec<Individual>,
    pub generation: usize,
}

impl Nsga2State {
    /// Random initial population with ranks and crowding assigned.
    pub fn initialize<R: Rng + ?Sized>(engine: &Engine<'_>, rng: &mut R) -> Result<Self> {
        let pool = engine.initial_population(rng)?;
        let population = survivors(engine, pool, engine.cfg.population)?;
        Ok(Self {
            population,
            generation: 0,
        })
    }
}

/// One generation: breed N offspring, merge with the parents and keep the
/// best N by front, breaking the last front by crowding distance.
pub fn nsga2_generation<R: Rng + ?Sized>(state: Nsga2State, engine: &Engine<'_>, rng: &mut R) -> Result<Nsga2State> {
    let n = engine.cfg.population;
    let k = engine.cfg.variation.tournament_size;
    let parents = state.population;
    let offspring = engine.breed(&parents, n, rng, |r| tournament_select(&parents, k, r))?;
    let mut pool = parents;
    pool.extend(offspring);
    Ok(Nsga2State {
        population: survivors(engine, pool, n)?,
        generation: state.generation + 1,
    })
}

/// Recomputes objectives over the pool, sorts it into fronts and fills `n`
/// slots front by front. Survivors carry their rank and the crowding
/// distance computed within their full front.
fn survivors(engine: &Engine<'_>, mut pool: Vec<Individual>, n: usize) -> Result<Vec<Individual>> {
    engine.assign_objectives(&mut pool)?;
    let partition = fast_nondominated_sort(&pool)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for (rank, front) in partition.fronts.iter().enumerate() {
        let objs: Vec<&[f64]> = front.iter().map(|&i| pool[i].objectives.as_slice()).collect();
        let crowding = crowding_distance(&objs)?;
        for (&i, &d) in front.iter().zip(&crowding) {
            pool[i].rank = rank;
            pool[i].crowding = d;
        }
        let room = n - chosen.len();
        if front.len() <= room {
            chosen.extend_from_slice(front);
        } else {
            let mut order: Vec<usize> = (0..front.len()).collect();
            // Stable: equal crowding keeps the lower index first.
            order.sort_by(|&a, &b| crowding[b].total_cmp(&crowding[a]));
            chosen.extend(order.into_iter().take(room).map(|j| front[j]));
        }
        if chosen.len() == n {
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    Ok(chosen
        .into_iter()
        .map(|i| slots[i].take().expect("chosen once"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::engine::{EngineConfig, Method};
    use crate::expr::Program;
    use crate::semantic::SemanticBounds;
    use crate::variation::VariationConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data() -> Dataset {
        let rows = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                vec![t, (t * 7.0).sin(), 1.0 - t * t]
            })
            .collect();
        Dataset::new("syn", rows, (0..40).map(|i| i % 4 == 0 || i > 33).collect()).unwrap()
    }

    fn cfg(method: Method) -> EngineConfig {
        EngineConfig {
            population: 30,
            method,
            bounds: method
                .needs_bounds()
                .then_some(SemanticBounds { lbss: None, ubss: 0.5 }),
            variation: VariationConfig::default(),
        }
    }

    #[test]
    fn identical_pool_keeps_size() {
        let d = data();
        let c = cfg(Method::Canonical);
        let e = Engine::new(&c, &d).unwrap();
        let ind = e.evaluate("(- x0 x2)".parse::<Program>().unwrap()).unwrap();
        let pool = vec![ind; 60];
        let next = survivors(&e, pool, 30).unwrap();
        assert_eq!(next.len(), 30);
    }

    #[test]
    fn exact_first_front_is_kept() {
        let d = data();
        let c = cfg(Method::Canonical);
        let e = Engine::new(&c, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = e.initial_population(&mut rng).unwrap();
        let mut probe = pool.clone();
        e.assign_objectives(&mut probe).unwrap();
        let partition = fast_nondominated_sort(&probe).unwrap();
        let n = partition.fronts[0].len();
        let kept = survivors(&e, pool, n).unwrap();
        assert!(kept.iter().all(|i| i.rank == 0));
        assert_eq!(kept.len(), n);
    }

    #[test]
    fn generations_are_seeded() {
        let d = data();
        for method in [Method::Canonical, Method::Sdo, Method::Psdo, Method::Ssc] {
            let c = cfg(method);
            let e = Engine::new(&c, &d).unwrap();
            let run = || {
                let mut rng = ChaCha8Rng::seed_from_u64(77);
                let mut s = Nsga2State::initialize(&e, &mut rng).unwrap();
                for _ in 0..2 {
                    s = nsga2_generation(s, &e, &mut rng).unwrap();
                }
                s.population
                    .iter()
                    .map(|i| (i.program.to_string(), i.objectives.clone()))
                    .collect::<Vec<_>>()
            };
            let a = run();
            assert_eq!(a, run());
            assert_eq!(a.len(), 30);
            let m = if method.criterion().is_some() { 3 } else { 2 };
            assert!(a.iter().all(|(_, o)| o.len() == m));
        }
    }
}

use std::cmp::Ordering;

use rand::Rng;

use super::{Engine, Individual};
use crate::error::Result;
use crate::pareto::spea2_raw_fitness;
use crate::variation::tournament_by;

#[derive(Clone, Debug)]
pub struct Spea2State {
    pub population: Vec<Individual>,
    pub archive: Vec<Individual>,
    pub generation: usize,
}

impl Spea2State {
    /// Random population with an empty archive.
    pub fn initialize<R: Rng + ?Sized>(engine: &Engine<'_>, rng: &mut R) -> Result<Self> {
        Ok(Self {
            population: engine.initial_population(rng)?,
            archive: Vec::new(),
            generation: 0,
        })
    }

    /// Population followed by archive.
    pub fn union(&self) -> Vec<Individual> {
        self.population.iter().chain(&self.archive).cloned().collect()
    }
}

/// One generation: fitness assignment over population and archive,
/// environmental selection into the next archive, then tournament mating
/// on the archive to produce the next population.
pub fn spea2_generation<R: Rng + ?Sized>(state: Spea2State, engine: &Engine<'_>, rng: &mut R) -> Result<Spea2State> {
    let n = engine.cfg.population;
    let k = engine.cfg.variation.tournament_size;
    let mut union = state.population;
    union.extend(state.archive);
    engine.assign_objectives(&mut union)?;
    assign_fitness(&mut union)?;
    let archive = environmental_selection(union, n);
    let offspring = engine.breed(&archive, n, rng, |r| {
        tournament_by(archive.len(), k, r, |a, b| {
            archive[a].spea2_fitness < archive[b].spea2_fitness
        })
    })?;
    Ok(Spea2State {
        population: offspring,
        archive,
        generation: state.generation + 1,
    })
}

/// Fitness = raw fitness + 1 / (sigma_k + 2), where sigma_k is the
/// distance to the k-th nearest neighbour, k = floor(sqrt(|union|)).
fn assign_fitness(union: &mut [Individual]) -> Result<()> {
    let raw = spea2_raw_fitness(union)?;
    let objs: Vec<&[f64]> = union.iter().map(|i| i.objectives.as_slice()).collect();
    let density = spea2_density(&objs);
    for ((ind, r), d) in union.iter_mut().zip(raw).zip(density) {
        ind.spea2_fitness = r + d;
        ind.rank = usize::from(r > 0.0);
    }
    Ok(())
}

/// Euclidean distances after min-max scaling each objective over the set.
/// Objectives with zero range are ignored.
fn normalized_distances(objs: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = objs.len();
    let m = objs.first().map_or(0, |o| o.len());
    let mut scale = vec![0.0; m];
    let mut lo = vec![0.0; m];
    for k in 0..m {
        let (min, max) = objs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), o| {
            (a.min(o[k]), b.max(o[k]))
        });
        lo[k] = min;
        scale[k] = if max > min { 1.0 / (max - min) } else { 0.0 };
    }
    let scaled: Vec<Vec<f64>> = objs
        .iter()
        .map(|o| (0..m).map(|k| (o[k] - lo[k]) * scale[k]).collect())
        .collect();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = scaled[i]
                .iter()
                .zip(&scaled[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    dist
}

/// SPEA2 density term `1 / (sigma_k + 2)` for every member.
pub fn spea2_density(objs: &[&[f64]]) -> Vec<f64> {
    let n = objs.len();
    if n < 2 {
        return vec![0.5; n];
    }
    let k = ((n as f64).sqrt().floor() as usize).clamp(1, n - 1);
    let dist = normalized_distances(objs);
    dist.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut others: Vec<f64> = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .collect();
            others.select_nth_unstable_by(k - 1, f64::total_cmp);
            1.0 / (others[k - 1] + 2.0)
        })
        .collect()
}

/// Keeps the non-dominated members (raw fitness 0). A short archive is
/// padded with the best dominated members by fitness; an overfull one is
/// truncated by nearest-neighbour distance.
fn environmental_selection(union: Vec<Individual>, n: usize) -> Vec<Individual> {
    let nondominated: Vec<usize> = (0..union.len()).filter(|&i| union[i].rank == 0).collect();
    let keep: Vec<usize> = match nondominated.len().cmp(&n) {
        Ordering::Equal => nondominated,
        Ordering::Less => {
            let mut order: Vec<usize> = (0..union.len()).collect();
            order.sort_by(|&a, &b| union[a].spea2_fitness.total_cmp(&union[b].spea2_fitness));
            order.truncate(n);
            order.sort_unstable();
            order
        }
        Ordering::Greater => {
            let objs: Vec<&[f64]> = nondominated.iter().map(|&i| union[i].objectives.as_slice()).collect();
            let dist = normalized_distances(&objs);
            truncate_by_nearest_neighbour(&dist, n)
                .into_iter()
                .map(|j| nondominated[j])
                .collect()
        }
    };
    let mut slots: Vec<Option<Individual>> = union.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("kept once")).collect()
}

/// Iteratively removes the member whose sorted list of distances to the
/// remaining members is lexicographically smallest, until `keep` remain.
/// Among equal lists the lowest index is removed first. Returns the kept
/// indices in ascending order.
pub fn truncate_by_nearest_neighbour(dist: &[Vec<f64>], keep: usize) -> Vec<usize> {
    let n = dist.len();
    if keep >= n {
        return (0..n).collect();
    }
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(a.cmp(&b)));
            others
        })
        .collect();
    let mut alive = vec![true; n];
    // First possibly-alive position in each neighbour list.
    let mut head = vec![0usize; n];
    let mut remaining = n;

    let compare = |a: usize, b: usize, alive: &[bool], head: &[usize]| -> Ordering {
        let (la, lb) = (&neighbours[a], &neighbours[b]);
        let (mut ia, mut ib) = (head[a], head[b]);
        loop {
            while ia < la.len() && !alive[la[ia]] {
                ia += 1;
            }
            while ib < lb.len() && !alive[lb[ib]] {
                ib += 1;
            }
            match (ia < la.len(), ib < lb.len()) {
                (true, true) => {
                    let ord = dist[a][la[ia]].total_cmp(&dist[b][lb[ib]]);
                    if ord != Ordering::Equal {
                        return ord;
                    }
                    ia += 1;
                    ib += 1;
                }
                _ => return Ordering::Equal,
            }
        }
    };

    while remaining > keep {
        for i in 0..n {
            if alive[i] {
                while head[i] < neighbours[i].len() && !alive[neighbours[i][head[i]]] {
                    head[i] += 1;
                }
            }
        }
        let mut victim = usize::MAX;
        for i in (0..n).filter(|&i| alive[i]) {
            if victim == usize::MAX {
                victim = i;
                continue;
            }
            // Quick reject on the nearest neighbour before the full walk.
            let near_i = dist[i][neighbours[i][head[i]]];
            let near_v = dist[victim][neighbours[victim][head[victim]]];
            if near_i > near_v {
                continue;
            }
            if compare(i, victim, &alive, &head) == Ordering::Less {
                victim = i;
            }
        }
        alive[victim] = false;
        remaining -= 1;
    }
    (0..n).filter(|&i| alive[i]).collect()
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
                vec![t, (t * 5.0).cos(), t * t]
            })
            .collect();
        Dataset::new("syn", rows, (0..40).map(|i| i % 5 == 0).collect()).unwrap()
    }

    fn fake(objs: &[f64], d: &Dataset) -> Individual {
        let mut ind = Individual::evaluate(Program::var(0), d).unwrap();
        ind.objectives = objs.to_vec();
        ind
    }

    fn brute_truncate(dist: &[Vec<f64>], keep: usize) -> Vec<usize> {
        let mut alive: Vec<usize> = (0..dist.len()).collect();
        while alive.len() > keep {
            let lists: Vec<Vec<f64>> = alive
                .iter()
                .map(|&i| {
                    let mut l: Vec<f64> = alive.iter().filter(|&&j| j != i).map(|&j| dist[i][j]).collect();
                    l.sort_by(f64::total_cmp);
                    l
                })
                .collect();
            let mut victim = 0;
            for c in 1..alive.len() {
                if lists[c]
                    .iter()
                    .zip(&lists[victim])
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    == Some(Ordering::Less)
                {
                    victim = c;
                }
            }
            alive.remove(victim);
        }
        alive
    }

    #[test]
    fn truncation_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let n = 2 + trial % 25;
            let pts: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![(rng.gen_range(0..6) as f64) / 5.0, (rng.gen_range(0..6) as f64) / 5.0])
                .collect();
            let objs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
            let dist = normalized_distances(&objs);
            let keep = rng.gen_range(1..=n);
            assert_eq!(
                truncate_by_nearest_neighbour(&dist, keep),
                brute_truncate(&dist, keep),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn truncation_removes_the_crowded_point() {
        let pts = [vec![0.0, 1.0], vec![0.5, 0.5], vec![0.52, 0.48], vec![1.0, 0.0]];
        let objs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let kept = truncate_by_nearest_neighbour(&normalized_distances(&objs), 3);
        assert_eq!(kept.len(), 3);
        assert!(kept.contains(&0) && kept.contains(&3));
    }

    #[test]
    fn full_front_becomes_archive() {
        let d = data();
        let mut union: Vec<Individual> = (0..6)
            .map(|i| fake(&[i as f64 / 5.0, 1.0 - i as f64 / 5.0], &d))
            .collect();
        assign_fitness(&mut union).unwrap();
        let archive = environmental_selection(union, 6);
        assert_eq!(archive.len(), 6);
        assert!(archive.iter().all(|i| i.rank == 0));
    }

    #[test]
    fn single_winner_is_padded_by_fitness() {
        let d = data();
        let mut union = vec![
            fake(&[0.2, 0.2], &d),
            fake(&[0.9, 0.9], &d),
            fake(&[0.5, 0.5], &d),
            fake(&[0.1, 0.1], &d),
        ];
        assign_fitness(&mut union).unwrap();
        let archive = environmental_selection(union, 3);
        let objs: Vec<Vec<f64>> = archive.iter().map(|i| i.objectives.clone()).collect();
        assert_eq!(objs, vec![vec![0.2, 0.2], vec![0.9, 0.9], vec![0.5, 0.5]]);
    }

    #[test]
    fn density_lies_in_open_half_interval() {
        let pts = [vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0], vec![0.5, 0.5]];
        let objs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        for d in spea2_density(&objs) {
            assert!(d > 0.0 && d <= 0.5);
        }
    }

    #[test]
    fn generations_are_seeded_and_sized() {
        let d = data();
        for method in [Method::Canonical, Method::Sdo] {
            let c = EngineConfig {
                population: 24,
                method,
                bounds: method.needs_bounds().then_some(SemanticBounds {
                    lbss: Some(0.01),
                    ubss: 0.5,
                }),
                variation: VariationConfig::default(),
            };
            let e = Engine::new(&c, &d).unwrap();
            let run = || {
                let mut rng = ChaCha8Rng::seed_from_u64(3);
                let mut s = Spea2State::initialize(&e, &mut rng).unwrap();
                for _ in 0..3 {
                    s = spea2_generation(s, &e, &mut rng).unwrap();
                    assert_eq!(s.population.len(), 24);
                    assert_eq!(s.archive.len(), 24);
                }
                s.archive.iter().map(|i| i.program.to_string()).collect::<Vec<_>>()
            };
            assert_eq!(run(), run());
        }
    }
}

//! Pareto dominance machinery. All objectives are maximised.

use crate::error::{Error, Result};

/// True iff `a` is at least as good as `b` everywhere and strictly better
/// somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "objective vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

fn check_lengths<T: AsRef<[f64]>>(pop: &[T]) -> Result<()> {
    if let Some(first) = pop.first() {
        let m = first.as_ref().len();
        if let Some(bad) = pop.iter().position(|p| p.as_ref().len() != m) {
            return Err(Error::Usage(format!(
                "objective vector {bad} has length {}, expected {m}",
                pop[bad].as_ref().len()
            )));
        }
    }
    Ok(())
}

/// Entry `i` is the number of members that dominate member `i`.
pub fn dominance_rank<T: AsRef<[f64]>>(pop: &[T]) -> Result<Vec<usize>> {
    check_lengths(pop)?;
    Ok((0..pop.len())
        .map(|i| {
            pop.iter()
                .filter(|other| dominates_unchecked(other.as_ref(), pop[i].as_ref()))
                .count()
        })
        .collect())
}

/// Entry `i` is the number of members that member `i` dominates.
pub fn dominance_count<T: AsRef<[f64]>>(pop: &[T]) -> Result<Vec<usize>> {
    check_lengths(pop)?;
    Ok(pop
        .iter()
        .map(|me| {
            pop.iter()
                .filter(|other| dominates_unchecked(me.as_ref(), other.as_ref()))
                .count()
        })
        .collect())
}

/// SPEA2 raw fitness: the summed dominance counts of everyone dominating
/// `i`. Zero exactly for non-dominated members; lower is better.
pub fn spea2_raw_fitness<T: AsRef<[f64]>>(union: &[T]) -> Result<Vec<f64>> {
    let counts = dominance_count(union)?;
    Ok((0..union.len())
        .map(|i| {
            union
                .iter()
                .enumerate()
                .filter(|(_, j)| dominates_unchecked(j.as_ref(), union[i].as_ref()))
                .map(|(j, _)| counts[j] as f64)
                .sum()
        })
        .collect())
}

/// Fronts of a population, best first. Front 0 is the non-dominated set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontPartition {
    pub fronts: Vec<Vec<usize>>,
}

impl FrontPartition {
    /// Front index of every member.
    pub fn ranks(&self, len: usize) -> Vec<usize> {
        let mut ranks = vec![usize::MAX; len];
        for (r, front) in self.fronts.iter().enumerate() {
            for &i in front {
                ranks[i] = r;
            }
        }
        ranks
    }
}

/// Fast non-dominated sorting. Members within a front are listed in
/// ascending index order.
pub fn fast_nondominated_sort<T: AsRef<[f64]>>(pop: &[T]) -> Result<FrontPartition> {
    check_lengths(pop)?;
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_counter = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (pop[i].as_ref(), pop[j].as_ref());
            if dominates_unchecked(a, b) {
                dominated_by[i].push(j);
                domination_counter[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominated_by[j].push(i);
                domination_counter[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_counter[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_counter[j] -= 1;
                if domination_counter[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    Ok(FrontPartition { fronts })
}

/// Indices of the non-dominated members.
pub fn nondominated_indices<T: AsRef<[f64]>>(pop: &[T]) -> Vec<usize> {
    (0..pop.len())
        .filter(|&i| !pop.iter().any(|o| dominates_unchecked(o.as_ref(), pop[i].as_ref())))
        .collect()
}

/// Crowding distance of each member of a front. Per objective the members
/// are sorted, the two extremes get `+inf`, and interior members add the
/// normalised gap between their neighbours. An objective whose values are
/// all equal contributes nothing.
pub fn crowding_distance<T: AsRef<[f64]>>(front: &[T]) -> Result<Vec<f64>> {
    if front.is_empty() {
        return Err(Error::Usage("crowding distance of an empty front".into()));
    }
    check_lengths(front)?;
    let n = front.len();
    let m = front[0].as_ref().len();
    let mut d = vec![0.0; n];
    if n <= 2 {
        d.fill(f64::INFINITY);
        return Ok(d);
    }
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let value = |i: usize| front[i].as_ref()[k];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        d[order[0]] = f64::INFINITY;
        d[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for r in 1..n - 1 {
            let i = order[r];
            if d[i].is_finite() {
                d[i] += (value(order[r + 1]) - value(order[r - 1])).abs() / range;
            }
        }
    }
    Ok(d)
}

//! Exhaustive reference solver for
//! `max sum_l a_l w_l - sum_j p_j d_j` over feasible `(a, d)`.
//!
//! Plain enumeration: every allocation vector, every purchase vector up to
//! a per-band cap. Candidates are visited in lexicographic order of
//! `(a, d)` and only a strictly better value replaces the incumbent, so the
//! reported maximizer is the lexicographically smallest one.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::feasibility::DecisionPair;
use crate::model::MarketStructure;

pub const MAX_CONSUMERS: usize = 12;
/// Upper bound on `2^N * prod_j (g_cap_j + 1)`.
pub const MAX_CANDIDATES: u128 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub pair: DecisionPair,
    pub objective: f64,
}

/// Default purchase cap: `N` goods per band, enough because each consumer
/// takes at most one good.
pub fn default_purchase_cap(n: usize, k: usize) -> Vec<u64> {
    vec![n as u64; k]
}

pub fn solve_exact(
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
    g_cap: &[u64],
) -> Result<OracleSolution> {
    let n = w.len();
    let k = market.k();
    if c.len() != n {
        return Err(validation(format!(
            "{n} virtual valuations for {} levels",
            c.len()
        )));
    }
    if g_cap.len() != k {
        return Err(validation(format!(
            "purchase cap has {} entries for {k} bands",
            g_cap.len()
        )));
    }
    c.iter().try_for_each(|&c| market.check_level(c))?;
    if n > MAX_CONSUMERS {
        return Err(Error::TooLarge(format!(
            "{n} consumers exceeds the limit of {MAX_CONSUMERS}"
        )));
    }
    let purchase_vectors: u128 = g_cap.iter().map(|&g| g as u128 + 1).product();
    let candidates = (1u128 << n) * purchase_vectors;
    if candidates > MAX_CANDIDATES {
        return Err(Error::TooLarge(format!(
            "{candidates} candidate pairs exceeds the limit of {MAX_CANDIDATES}"
        )));
    }

    let supply = market.cumulative_supply();
    let prices = market.prices();

    // Purchase vectors in lexicographic order, with their cumulative sums and cost.
    let mut purchases: Vec<(Vec<u64>, Vec<u64>, f64)> =
        Vec::with_capacity(purchase_vectors as usize);
    let mut d = vec![0u64; k];
    'odometer: loop {
        let cumulative: Vec<u64> = d
            .iter()
            .scan(0u64, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        let cost: f64 = d.iter().zip(prices).map(|(d, p)| *d as f64 * p).sum();
        purchases.push((d.clone(), cumulative, cost));
        // last band turns fastest
        for j in (0..k).rev() {
            if d[j] < g_cap[j] {
                d[j] += 1;
                d[j + 1..].fill(0);
                continue 'odometer;
            }
        }
        break;
    }

    let mut best: Option<(f64, Vec<bool>, Vec<u64>)> = None;
    let mut demand = vec![0u64; k];
    for mask in 0u64..(1u64 << n) {
        // consumer 0 is the most significant bit, so masks ascend lexicographically
        let a: Vec<bool> = (0..n).map(|l| mask >> (n - 1 - l) & 1 == 1).collect();
        demand.iter_mut().for_each(|x| *x = 0);
        let mut value = 0.0;
        for l in 0..n {
            if a[l] {
                demand[c[l] - 1] += 1;
                value += w[l];
            }
        }
        let need: Vec<u64> = demand
            .iter()
            .scan(0u64, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        for (d, cumulative, cost) in &purchases {
            let feasible = (0..k).all(|i| need[i] <= supply[i] + cumulative[i]);
            if !feasible {
                continue;
            }
            let objective = value - cost;
            if best.as_ref().is_none_or(|(b, _, _)| objective > *b) {
                best = Some((objective, a.clone(), d.clone()));
            }
        }
    }

    let (objective, xi, g) = best.ok_or_else(|| Error::Internal("no feasible candidate".into()))?;
    Ok(OracleSolution {
        pair: DecisionPair::new(xi, g),
        objective,
    })
}

/// [`solve_exact`] with every purchase forced to zero.
pub fn solve_fixed_supply(
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
) -> Result<OracleSolution> {
    solve_exact(w, c, market, &vec![0; market.k()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(m: &[u64], p: &[f64]) -> MarketStructure {
        MarketStructure::new(m.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn no_consumers() {
        let mk = market(&[1, 0], &[5.0, 3.0]);
        let s = solve_exact(&[], &[], &mk, &[0, 0]).unwrap();
        assert_eq!(s.objective, 0.0);
        assert!(s.pair.xi.is_empty());
        assert_eq!(s.pair.g, vec![0, 0]);
    }

    #[test]
    fn worked_example_with_purchases() {
        let mk = market(&[1, 0], &[5.0, 3.0]);
        let (w, c) = ([10.0, 6.0, 3.5], [1, 2, 2]);
        let s = solve_exact(&w, &c, &mk, &default_purchase_cap(3, 2)).unwrap();
        assert_eq!(s.objective, 13.5);
        assert_eq!(s.pair.xi, vec![true, true, true]);
        assert_eq!(s.pair.g, vec![0, 2]);
    }

    #[test]
    fn non_positive_valuations_give_empty_solution() {
        let mk = market(&[2, 1], &[5.0, 3.0]);
        let (w, c) = ([-1.0, 0.0, -3.0], [1, 2, 2]);
        let s = solve_exact(&w, &c, &mk, &default_purchase_cap(3, 2)).unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.pair.xi, vec![false; 3]);
        assert_eq!(s.pair.g, vec![0, 0]);
    }

    #[test]
    fn fixed_supply_examples() {
        let s = solve_fixed_supply(&[5.0, 3.0], &[1, 1], &market(&[1], &[1.0])).unwrap();
        assert_eq!(s.objective, 5.0);
        assert_eq!(s.pair.xi, vec![true, false]);

        let mk = market(&[1, 1], &[5.0, 3.0]);
        let s = solve_fixed_supply(&[10.0, 4.0, 6.0], &[1, 1, 2], &mk).unwrap();
        assert_eq!(s.objective, 16.0);

        // band 1 is empty, so the class-1 consumer cannot be served
        let mk = market(&[0, 1], &[5.0, 3.0]);
        let s = solve_fixed_supply(&[10.0, 6.0], &[1, 2], &mk).unwrap();
        assert_eq!(s.objective, 6.0);
        assert_eq!(s.pair.xi, vec![false, true]);
    }

    #[test]
    fn cross_band_exchange_beats_per_class_purchases() {
        let mk = market(&[1, 0], &[5.0, 3.0]);
        let s = solve_exact(&[4.0, 6.0], &[1, 2], &mk, &default_purchase_cap(2, 2)).unwrap();
        assert_eq!(s.objective, 7.0);
        assert_eq!(s.pair.g, vec![0, 1]);
    }

    #[test]
    fn lexicographic_tie_break() {
        let mk = market(&[1], &[9.0]);
        let s = solve_fixed_supply(&[2.0, 2.0], &[1, 1], &mk).unwrap();
        assert_eq!(s.pair.xi, vec![false, true]);
    }

    #[test]
    fn size_guard() {
        let mk = market(&[1], &[1.0]);
        let w = vec![1.0; 13];
        let c = vec![1; 13];
        assert!(matches!(
            solve_fixed_supply(&w, &c, &mk),
            Err(Error::TooLarge(_))
        ));
        let mk = market(&[1, 1, 1], &[3.0, 2.0, 1.0]);
        let w = vec![1.0; 12];
        let c = vec![1; 12];
        assert!(matches!(
            solve_exact(&w, &c, &mk, &[1000, 1000, 1000]),
            Err(Error::TooLarge(_))
        ));
    }
}

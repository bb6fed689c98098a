//! Feasible allocation/purchase pairs and witness assignments.
//!
//! A pair `(xi, g)` is feasible for reported levels `c` iff for every level
//! `i`, the consumers served with `c_l <= i` fit into the goods of bands
//! `1..=i`, free and purchased together.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::model::MarketStructure;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionPair {
    pub xi: Vec<bool>,
    pub g: Vec<u64>,
}

impl DecisionPair {
    pub fn new(xi: Vec<bool>, g: Vec<u64>) -> Self {
        Self { xi, g }
    }

    pub fn served_count(&self) -> usize {
        self.xi.iter().filter(|&&x| x).count()
    }

    pub fn objective(&self, w: &[f64], market: &MarketStructure) -> f64 {
        objective(&self.xi, &self.g, w, market)
    }
}

/// `sum_l xi_l w_l - sum_j p_j g_j`, summed in index order.
pub fn objective(xi: &[bool], g: &[u64], w: &[f64], market: &MarketStructure) -> f64 {
    let served: f64 = xi.iter().zip(w).filter(|(x, _)| **x).map(|(_, w)| *w).sum();
    let cost: f64 = g
        .iter()
        .zip(market.prices())
        .map(|(g, p)| *g as f64 * p)
        .sum();
    served - cost
}

fn check_dims(pair: &DecisionPair, c: &[usize], market: &MarketStructure) -> Result<()> {
    if pair.xi.len() != c.len() {
        return Err(validation(format!(
            "allocation has {} entries for {} consumers",
            pair.xi.len(),
            c.len()
        )));
    }
    if pair.g.len() != market.k() {
        return Err(validation(format!(
            "purchase vector has {} entries for {} levels",
            pair.g.len(),
            market.k()
        )));
    }
    c.iter().try_for_each(|&c| market.check_level(c))
}

pub fn is_feasible(pair: &DecisionPair, c: &[usize], market: &MarketStructure) -> Result<bool> {
    check_dims(pair, c, market)?;
    let k = market.k();
    let mut demand = vec![0u64; k];
    for (&served, &level) in pair.xi.iter().zip(c) {
        if served {
            demand[level - 1] += 1;
        }
    }
    let (mut need, mut have) = (0u64, 0u64);
    for ((d, m), g) in demand.iter().zip(market.supply()).zip(&pair.g) {
        need += d;
        have += m + g;
        if need > have {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One good handed to a consumer: its band and whether it was purchased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub band: usize,
    pub purchased: bool,
}

/// Per-consumer slot; `None` for consumers left unserved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment(pub Vec<Option<Slot>>);

impl Assignment {
    /// Purchased goods handed out, per band.
    pub fn purchased_used(&self, k: usize) -> Vec<u64> {
        let mut used = vec![0; k];
        for s in self.0.iter().flatten().filter(|s| s.purchased) {
            used[s.band - 1] += 1;
        }
        used
    }
}

/// Builds a concrete consumer-to-band matching for a feasible pair: served
/// consumers in ascending class order each take the lowest band that still
/// has a good, free goods before purchased ones. `None` if the pair is
/// infeasible or malformed.
pub fn witness_assignment(
    pair: &DecisionPair,
    c: &[usize],
    market: &MarketStructure,
) -> Option<Assignment> {
    check_dims(pair, c, market).ok()?;
    let k = market.k();
    let mut free: Vec<u64> = market.supply().to_vec();
    let mut bought: Vec<u64> = pair.g.clone();

    let mut order: Vec<usize> = (0..c.len()).filter(|&l| pair.xi[l]).collect();
    order.sort_by_key(|&l| (c[l], l));

    let mut slots = vec![None; c.len()];
    // bands below `floor` are exhausted
    let mut floor = 0;
    for l in order {
        while floor < k && free[floor] + bought[floor] == 0 {
            floor += 1;
        }
        if floor >= c[l] {
            return None;
        }
        let purchased = free[floor] == 0;
        if purchased {
            bought[floor] -= 1;
        } else {
            free[floor] -= 1;
        }
        slots[l] = Some(Slot {
            band: floor + 1,
            purchased,
        });
    }
    Some(Assignment(slots))
}

//! Threshold allocation and purchase rules.
//!
//! The core is a level-by-level removal procedure on a laminar capacity
//! family: drop non-positive virtual valuations, then at each level `i` pool
//! the survivors of level `i - 1` with the positive class-`i` consumers and
//! remove the lowest `r_i = (|pool| - sum_{j<=i} m_j)^+` of them. The highest
//! removed value at each level is that level's threshold.
//!
//! Two purchase rules sit on top of it:
//!
//! * [`PurchaseRule::PerClass`] buys one class-`i` good for each class-`i`
//!   consumer left out under free supply whose virtual valuation exceeds
//!   `p_i`, then serves class `i` above `min(p_i, max(0, thr_i..thr_k))`.
//! * [`PurchaseRule::Exact`] (default) prices supply in directly: every band
//!   `j` gets `P_j` extra goods, each pre-held by a phantom class-`j` bidder
//!   of weight `p_j`, where `P_j` counts the positive consumers able to use
//!   band `j`. The same removal procedure on the enlarged instance yields
//!   the served set, and `g_j` is the number of phantoms removed at band
//!   `j`. This also captures purchases of a cheap higher band that free a
//!   lower band good for a displaced consumer, which the per-class rule
//!   misses, and it matches the exhaustive optimum.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::feasibility::{is_feasible, DecisionPair};
use crate::model::MarketStructure;

/// Order among equal virtual valuations when picking whom to remove.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowerIndexFirst,
    HigherIndexFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PurchaseRule {
    #[default]
    Exact,
    PerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AllocatorConfig {
    pub rule: PurchaseRule,
    pub tie_break: TieBreak,
}

/// Intermediates of one removal pass; sets hold consumer indices, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RemovalRun {
    positive: Vec<Vec<usize>>,
    pools: Vec<Vec<usize>>,
    survivors: Vec<Vec<usize>>,
    removal_counts: Vec<usize>,
    thresholds: Vec<f64>,
}

fn removal_procedure(w: &[f64], c: &[usize], caps: &[u64], tie: TieBreak) -> RemovalRun {
    let k = caps.len();
    let mut positive = vec![Vec::new(); k];
    for (l, (&wl, &cl)) in w.iter().zip(c).enumerate() {
        if wl > 0.0 {
            positive[cl - 1].push(l);
        }
    }

    let order = |a: &usize, b: &usize| -> Ordering {
        w[*a].total_cmp(&w[*b]).then(match tie {
            TieBreak::LowerIndexFirst => a.cmp(b),
            TieBreak::HigherIndexFirst => b.cmp(a),
        })
    };

    let mut pools = Vec::with_capacity(k);
    let mut survivors: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut removal_counts = Vec::with_capacity(k);
    let mut thresholds = Vec::with_capacity(k);
    let mut carried: Vec<usize> = Vec::new();
    for i in 0..k {
        let mut pool: Vec<usize> = carried.iter().chain(&positive[i]).copied().collect();
        pool.sort_unstable();
        pools.push(pool.clone());

        pool.sort_by(order);
        let excess = pool.len().saturating_sub(caps[i] as usize);
        thresholds.push(if excess > 0 { w[pool[excess - 1]] } else { 0.0 });
        removal_counts.push(excess);

        carried = pool.split_off(excess);
        carried.sort_unstable();
        survivors.push(carried.clone());
    }

    RemovalRun {
        positive,
        pools,
        survivors,
        removal_counts,
        thresholds,
    }
}

/// Free-supply pass: everything up to the served sets `A_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSupplyTrace {
    /// `C_i^+`: class-`i` consumers with positive virtual valuation.
    pub positive_sets: Vec<Vec<usize>>,
    /// `L_i`.
    pub pools: Vec<Vec<usize>>,
    /// `N_i`.
    pub survivors: Vec<Vec<usize>>,
    /// `r*_i`.
    pub removal_counts: Vec<usize>,
    /// `w_i^thr`, zero where nothing was removed.
    pub thresholds: Vec<f64>,
    /// `A_i`: class-`i` consumers strictly above `max(0, thr_i..thr_k)`.
    pub served_free: Vec<Vec<usize>>,
}

impl FixedSupplyTrace {
    /// Consumers allocated under free supply alone (`N_k`).
    pub fn final_survivors(&self) -> &[usize] {
        self.survivors.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// `max(0, thr_i, ..., thr_k)` for every level `i`.
    pub fn suffix_thresholds(&self) -> Vec<f64> {
        suffix_max(&self.thresholds)
    }
}

fn suffix_max(thresholds: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; thresholds.len()];
    let mut acc = 0.0f64;
    for i in (0..thresholds.len()).rev() {
        acc = acc.max(thresholds[i]);
        out[i] = acc;
    }
    out
}

fn check_inputs(w: &[f64], c: &[usize], market: &MarketStructure) -> Result<()> {
    if w.len() != c.len() {
        return Err(validation(format!(
            "{} virtual valuations for {} levels",
            w.len(),
            c.len()
        )));
    }
    if let Some(bad) = w.iter().find(|x| x.is_nan()) {
        return Err(validation(format!(
            "virtual valuation {bad} is not a number"
        )));
    }
    c.iter().try_for_each(|&c| market.check_level(c))
}

pub fn fixed_supply_thresholds(
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
) -> Result<FixedSupplyTrace> {
    fixed_supply_thresholds_with(w, c, market, TieBreak::default())
}

pub fn fixed_supply_thresholds_with(
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
    tie: TieBreak,
) -> Result<FixedSupplyTrace> {
    check_inputs(w, c, market)?;
    let run = removal_procedure(w, c, &market.cumulative_supply(), tie);
    let bars = suffix_max(&run.thresholds);
    let served_free = (0..market.k())
        .map(|i| {
            (0..w.len())
                .filter(|&l| c[l] == i + 1 && w[l] > bars[i])
                .collect()
        })
        .collect();
    Ok(FixedSupplyTrace {
        positive_sets: run.positive,
        pools: run.pools,
        survivors: run.survivors,
        removal_counts: run.removal_counts,
        thresholds: run.thresholds,
        served_free,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurchaseDecision {
    /// `E_i`: class-`i` consumers outside `A_i` with virtual valuation above `p_i`.
    pub eligible: Vec<Vec<usize>>,
    pub g: Vec<u64>,
}

/// The per-class purchase rule: `g_i = |E_i|`.
pub fn purchase_rule(
    trace: &FixedSupplyTrace,
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
) -> PurchaseDecision {
    let eligible: Vec<Vec<usize>> = (0..market.k())
        .map(|i| {
            let price = market.prices()[i];
            (0..w.len())
                .filter(|&l| c[l] == i + 1 && !trace.served_free[i].contains(&l) && w[l] > price)
                .collect()
        })
        .collect();
    let g = eligible.iter().map(|e| e.len() as u64).collect();
    PurchaseDecision { eligible, g }
}

/// Serves class-`i` consumers strictly above
/// `vthr_i = min(p_i, max(0, thr_i..thr_k))`, using the free-supply
/// thresholds. Returns the allocation and per-consumer `vthr`.
pub fn final_allocation(
    trace: &FixedSupplyTrace,
    g: &[u64],
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
) -> Result<(Vec<bool>, Vec<f64>)> {
    let bars = trace.suffix_thresholds();
    let vthr: Vec<f64> = c
        .iter()
        .map(|&ci| market.price(ci).min(bars[ci - 1]))
        .collect();
    let xi: Vec<bool> = w.iter().zip(&vthr).map(|(w, t)| w > t).collect();
    let pair = DecisionPair::new(xi, g.to_vec());
    if !is_feasible(&pair, c, market)? {
        return Err(Error::Internal(format!(
            "per-class rule produced an infeasible pair {pair:?}"
        )));
    }
    Ok((pair.xi, vthr))
}

/// The priced pass of [`PurchaseRule::Exact`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedTrace {
    /// Phantom bidders (and extra goods) added at each band.
    pub phantoms: Vec<u64>,
    pub removal_counts: Vec<usize>,
    pub thresholds: Vec<f64>,
    /// Phantom bidders still holding their good after removal.
    pub phantoms_kept: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationTrace {
    pub rule: PurchaseRule,
    pub positive_sets: Vec<Vec<usize>>,
    pub pools: Vec<Vec<usize>>,
    pub survivors: Vec<Vec<usize>>,
    pub removal_counts: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub served_free: Vec<Vec<usize>>,
    /// Per-class purchase candidates `E_i`.
    pub purchase_eligible: Vec<Vec<usize>>,
    pub priced: Option<PricedTrace>,
    pub purchases: Vec<u64>,
    pub served: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub xi: Vec<bool>,
    pub g: Vec<u64>,
    /// Per-consumer virtual threshold: under the exact rule, the consumer is
    /// served when its virtual valuation is above it and not when below.
    /// Under the per-class rule this holds for served consumers only.
    pub vthr: Vec<f64>,
    pub trace: AllocationTrace,
}

impl Allocation {
    pub fn pair(&self) -> DecisionPair {
        DecisionPair::new(self.xi.clone(), self.g.clone())
    }

    pub fn objective(&self, w: &[f64], market: &MarketStructure) -> f64 {
        crate::feasibility::objective(&self.xi, &self.g, w, market)
    }

    /// Consumers served under free supply alone.
    pub fn free_served_count(&self) -> usize {
        self.trace.survivors.last().map_or(0, Vec::len)
    }
}

/// Runs the full mechanism core on virtual valuations `w` reported at levels `c`.
pub fn allocate(
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
    config: AllocatorConfig,
) -> Result<Allocation> {
    let free = fixed_supply_thresholds_with(w, c, market, config.tie_break)?;
    let per_class = purchase_rule(&free, w, c, market);

    let (xi, g, vthr, priced) = match config.rule {
        PurchaseRule::PerClass => {
            let (xi, vthr) = final_allocation(&free, &per_class.g, w, c, market)?;
            (xi, per_class.g.clone(), vthr, None)
        }
        PurchaseRule::Exact => {
            let (xi, g, mut vthr, priced) = priced_allocation(w, c, market, config.tie_break);
            // an unserved consumer's own run says nothing about what it would
            // have had to beat; lift it above everyone and read off its threshold
            for l in (0..w.len()).filter(|&l| !xi[l]) {
                let mut lifted = w.to_vec();
                lifted[l] = f64::INFINITY;
                vthr[l] = priced_allocation(&lifted, c, market, config.tie_break).2[l];
            }
            (xi, g, vthr, Some(priced))
        }
    };

    let pair = DecisionPair::new(xi, g);
    if !is_feasible(&pair, c, market)? {
        return Err(Error::Internal(format!(
            "allocator produced an infeasible pair {pair:?}"
        )));
    }
    let DecisionPair { xi, g } = pair;
    let served = (0..xi.len()).filter(|&l| xi[l]).collect();
    Ok(Allocation {
        trace: AllocationTrace {
            rule: config.rule,
            positive_sets: free.positive_sets,
            pools: free.pools,
            survivors: free.survivors,
            removal_counts: free.removal_counts,
            thresholds: free.thresholds,
            served_free: free.served_free,
            purchase_eligible: per_class.eligible,
            priced,
            purchases: g.clone(),
            served,
        },
        xi,
        g,
        vthr,
    })
}

/// Optimal allocation with purchases disabled: the free-supply survivors.
pub fn allocate_fixed_supply(
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
    tie: TieBreak,
) -> Result<Vec<bool>> {
    let trace = fixed_supply_thresholds_with(w, c, market, tie)?;
    let mut xi = vec![false; w.len()];
    for &l in trace.final_survivors() {
        xi[l] = true;
    }
    Ok(xi)
}

fn priced_allocation(
    w: &[f64],
    c: &[usize],
    market: &MarketStructure,
    tie: TieBreak,
) -> (Vec<bool>, Vec<u64>, Vec<f64>, PricedTrace) {
    let n = w.len();
    let k = market.k();

    // a band-j good can only ever go to a consumer of class >= j
    let mut phantoms = vec![0u64; k];
    for (&wl, &cl) in w.iter().zip(c) {
        if wl > 0.0 {
            for p in phantoms.iter_mut().take(cl) {
                *p += 1;
            }
        }
    }

    let mut weights = w.to_vec();
    let mut levels = c.to_vec();
    for (j, &count) in phantoms.iter().enumerate() {
        for _ in 0..count {
            weights.push(market.prices()[j]);
            levels.push(j + 1);
        }
    }
    let caps: Vec<u64> = market
        .supply()
        .iter()
        .zip(&phantoms)
        .scan(0u64, |acc, (m, ph)| {
            *acc += m + ph;
            Some(*acc)
        })
        .collect();

    let run = removal_procedure(&weights, &levels, &caps, tie);

    let mut xi = vec![false; n];
    let mut phantoms_kept = vec![0u64; k];
    for &l in run.survivors.last().map(Vec::as_slice).unwrap_or(&[]) {
        if l < n {
            xi[l] = true;
        } else {
            phantoms_kept[levels[l] - 1] += 1;
        }
    }
    let g: Vec<u64> = phantoms
        .iter()
        .zip(&phantoms_kept)
        .map(|(p, kept)| p - kept)
        .collect();
    let bars = suffix_max(&run.thresholds);
    let vthr = c.iter().map(|&ci| bars[ci - 1]).collect();

    (
        xi,
        g,
        vthr,
        PricedTrace {
            phantoms,
            removal_counts: run.removal_counts,
            thresholds: run.thresholds,
            phantoms_kept,
        },
    )
}

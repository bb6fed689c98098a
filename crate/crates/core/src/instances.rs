//! Seeded random allocation instances for oracle comparisons.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::MarketStructure;
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub max_n: usize,
    pub max_k: usize,
    pub max_supply: u64,
    pub w_range: (f64, f64),
    pub max_price: f64,
    /// Fraction of instances whose `w` is snapped to a 0.5 grid so ties occur.
    pub tie_fraction: f64,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            max_n: 6,
            max_k: 3,
            max_supply: 2,
            w_range: (-5.0, 15.0),
            max_price: 10.0,
            tie_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub market: MarketStructure,
    pub w: Vec<f64>,
    pub c: Vec<usize>,
}

/// The `index`-th instance of the stream named by `seed`.
pub fn random_instance(params: &InstanceParams, seed: u64, index: u64) -> Result<Instance> {
    let mut rng = stream_rng(seed, index);
    generate(params, &mut rng)
}

fn generate(params: &InstanceParams, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let k = rng.gen_range(1..=params.max_k.max(1));
    let n = rng.gen_range(0..=params.max_n);
    let m: Vec<u64> = (0..k)
        .map(|_| rng.gen_range(0..=params.max_supply))
        .collect();
    let p = loop {
        // (0, max_price]
        let mut p: Vec<f64> = (0..k)
            .map(|_| params.max_price * (1.0 - rng.gen::<f64>()))
            .collect();
        p.sort_by(|a, b| b.total_cmp(a));
        if p.windows(2).all(|w| w[0] > w[1]) {
            break p;
        }
    };
    let snap = rng.gen::<f64>() < params.tie_fraction;
    let (lo, hi) = params.w_range;
    let w = (0..n)
        .map(|_| {
            let x = rng.gen_range(lo..=hi);
            if snap {
                (x * 2.0).round() / 2.0
            } else {
                x
            }
        })
        .collect();
    let c = (0..n).map(|_| rng.gen_range(1..=k)).collect();
    Ok(Instance {
        market: MarketStructure::new(m, p)?,
        w,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_bounds_and_are_reproducible() {
        let params = InstanceParams::default();
        let mut snapped = 0;
        for i in 0..500 {
            let a = random_instance(&params, 7, i).unwrap();
            assert_eq!(a, random_instance(&params, 7, i).unwrap());
            assert!(a.w.len() <= 6 && a.market.k() <= 3);
            assert!(a.market.supply().iter().all(|&m| m <= 2));
            assert!(a.market.prices().iter().all(|&p| p > 0.0 && p <= 10.0));
            assert!(a.w.iter().all(|&w| (-5.0..=15.0).contains(&w)));
            assert!(a.c.iter().all(|&c| c >= 1 && c <= a.market.k()));
            if a.w.len() > 1 && a.w.iter().all(|w| (w * 2.0).fract() == 0.0) {
                snapped += 1;
            }
        }
        assert!(snapped > 100);
    }
}

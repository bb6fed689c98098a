//! The full direct mechanism: reports to virtual valuations, allocation,
//! purchases and payments.

use crate::allocator::{allocate, Allocation, AllocatorConfig};
use crate::error::{validation, Result};
use crate::feasibility::objective;
use crate::model::{MarketStructure, ReportedProfile, ValuationModel};
use crate::payments::{integral_payment, threshold_payment, MechanismOutcome};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    pub market: MarketStructure,
    pub models: Vec<ValuationModel>,
    pub config: AllocatorConfig,
}

impl Mechanism {
    pub fn new(
        market: MarketStructure,
        models: Vec<ValuationModel>,
        config: AllocatorConfig,
    ) -> Result<Self> {
        if let Some(m) = models.iter().find(|m| m.k() != market.k()) {
            return Err(validation(format!(
                "model with {} levels for a market with {}",
                m.k(),
                market.k()
            )));
        }
        Ok(Self {
            market,
            models,
            config,
        })
    }

    pub fn from_scenario(scenario: &Scenario, config: AllocatorConfig) -> Result<Self> {
        Self::new(scenario.market.clone(), scenario.models(), config)
    }

    pub fn n(&self) -> usize {
        self.models.len()
    }

    /// `w(r_l, c_l)` for every consumer, evaluated at the reported level.
    pub fn virtual_valuations(&self, r: &[f64], c: &[usize]) -> Result<Vec<f64>> {
        if r.len() != self.n() || c.len() != self.n() {
            return Err(validation(format!(
                "{} reports for {} consumers",
                r.len().min(c.len()),
                self.n()
            )));
        }
        self.models
            .iter()
            .zip(r.iter().zip(c))
            .map(|(m, (&r, &c))| m.virtual_valuation(r, c))
            .collect()
    }

    pub fn allocate(&self, r: &[f64], c: &[usize]) -> Result<Allocation> {
        let w = self.virtual_valuations(r, c)?;
        allocate(&w, c, &self.market, self.config)
    }

    pub fn run(&self, reports: &ReportedProfile) -> Result<(MechanismOutcome, Allocation)> {
        reports.validate(&self.market)?;
        self.run_reports(&reports.r, &reports.c)
    }

    /// [`Mechanism::run`] on raw report vectors, validated only against
    /// the levels and supports.
    pub fn run_reports(&self, r: &[f64], c: &[usize]) -> Result<(MechanismOutcome, Allocation)> {
        let w = self.virtual_valuations(r, c)?;
        let alloc = allocate(&w, c, &self.market, self.config)?;
        let (t, theta_thresholds) = threshold_payment(&alloc.vthr, &self.models, c, &alloc.xi)?;
        let cost: f64 = alloc
            .g
            .iter()
            .zip(self.market.prices())
            .map(|(g, p)| *g as f64 * p)
            .sum();
        let outcome = MechanismOutcome {
            xi: alloc.xi.clone(),
            g: alloc.g.clone(),
            seller_profit: t.iter().sum::<f64>() - cost,
            virtual_surplus: objective(&alloc.xi, &alloc.g, &w, &self.market),
            t,
            theta_thresholds,
            vthr: alloc.vthr.clone(),
        };
        Ok((outcome, alloc))
    }

    /// Consumer `l`'s payment from the integral form, re-running the
    /// allocation with `l`'s valuation report swept over its level support.
    pub fn integral_payment(
        &self,
        r: &[f64],
        c: &[usize],
        l: usize,
        quad_points: usize,
    ) -> Result<f64> {
        if l >= self.n() {
            return Err(validation(format!("consumer {l} out of range")));
        }
        let support = self.models[l].support(c[l])?;
        let mut probe = r.to_vec();
        integral_payment(
            r[l],
            support,
            |s| {
                probe[l] = s;
                Ok(self.allocate(&probe, c)?.xi[l])
            },
            quad_points,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::PurchaseRule;

    fn worked() -> Mechanism {
        let market = MarketStructure::new(vec![1, 0], vec![5.0, 3.0]).unwrap();
        let model = ValuationModel::uniform(&[20.0, 10.0], vec![0.5, 0.5]).unwrap();
        Mechanism::new(market, vec![model; 3], AllocatorConfig::default()).unwrap()
    }

    #[test]
    fn worked_example_payments() {
        // w = (10, 6, 3.5)
        let reports = ReportedProfile::new(vec![15.0, 8.0, 6.75], vec![1, 2, 2]).unwrap();
        let mut mech = worked();
        let (out, _) = mech.run(&reports).unwrap();
        assert_eq!(out.xi, vec![true; 3]);
        assert_eq!(out.g, vec![0, 2]);
        assert_eq!(out.t, vec![11.5, 6.5, 6.5]);
        assert!((out.seller_profit - 18.5).abs() < 1e-12);
        assert!((out.virtual_surplus - 13.5).abs() < 1e-12);

        mech.config.rule = PurchaseRule::PerClass;
        let (out, _) = mech.run(&reports).unwrap();
        assert_eq!(out.g, vec![0, 2]);
        assert_eq!(out.t, vec![12.5, 6.5, 6.5]);
        assert!((out.seller_profit - 19.5).abs() < 1e-12);
        assert!((out.virtual_surplus - 13.5).abs() < 1e-12);
    }

    #[test]
    fn integral_payment_matches_threshold_on_worked_example() {
        let mech = worked();
        let (r, c) = (vec![15.0, 8.0, 6.75], vec![1, 2, 2]);
        let (out, _) = mech.run_reports(&r, &c).unwrap();
        for l in 0..3 {
            let t = mech.integral_payment(&r, &c, l, 65).unwrap();
            assert!((t - out.t[l]).abs() < 1e-9, "{l}: {t} vs {}", out.t[l]);
        }
    }

    #[test]
    fn empty_market() {
        let market = MarketStructure::new(vec![1], vec![1.0]).unwrap();
        let mech = Mechanism::new(market, vec![], AllocatorConfig::default()).unwrap();
        let (out, _) = mech
            .run(&ReportedProfile::new(vec![], vec![]).unwrap())
            .unwrap();
        assert!(out.t.is_empty());
        assert_eq!(out.seller_profit, 0.0);
    }
}

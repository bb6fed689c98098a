//! Monte Carlo estimates of interim allocation probabilities and payments,
//! and the incentive, participation and revenue checks built on them.
//!
//! Trial `j` always draws the full type profile from stream `j` of the
//! master seed, so every report tested against the same seed sees the same
//! opponents (common random numbers), and results do not depend on how
//! trials are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::AllocatorConfig;
use crate::error::{validation, Error, Result};
use crate::feasibility::{is_feasible, objective, DecisionPair};
use crate::mechanism::Mechanism;
use crate::model::ConsumerType;
use crate::payments::MechanismOutcome;
use crate::rng::stream_rng;
use crate::scenario::{sample_types, Scenario};

/// Seeded bugs used to show the checks have power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    #[default]
    None,
    /// Every payment halved.
    HalvedPayments,
    /// Every payment doubled.
    DoubledPayments,
    /// Everyone served, buying the cheapest goods that make it feasible,
    /// while payments stay those of the genuine mechanism.
    ServeEveryone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub trials: usize,
    pub seed: u64,
    pub config: AllocatorConfig,
    pub corruption: Corruption,
}

impl SimOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            config: AllocatorConfig::default(),
            corruption: Corruption::None,
        }
    }
}

/// Statistical slack: 3 standard errors plus a floor for float noise.
pub const SLACK_SE: f64 = 3.0;
pub const SLACK_FLOOR: f64 = 1e-9;

fn slack(se: f64) -> f64 {
    SLACK_SE * se + SLACK_FLOOR
}

/// Sample mean and its standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs the (possibly corrupted) mechanism on one report profile.
pub fn outcome_with(
    mech: &Mechanism,
    r: &[f64],
    c: &[usize],
    corruption: Corruption,
) -> Result<MechanismOutcome> {
    let (mut out, _) = mech.run_reports(r, c)?;
    let scale = match corruption {
        Corruption::None => return Ok(out),
        Corruption::HalvedPayments => 0.5,
        Corruption::DoubledPayments => 2.0,
        Corruption::ServeEveryone => return serve_everyone(mech, r, c, out),
    };
    out.t.iter_mut().for_each(|t| *t *= scale);
    let cost = purchase_cost(mech, &out.g);
    out.seller_profit = out.t.iter().sum::<f64>() - cost;
    Ok(out)
}

fn purchase_cost(mech: &Mechanism, g: &[u64]) -> f64 {
    g.iter()
        .zip(mech.market.prices())
        .map(|(g, p)| *g as f64 * p)
        .sum()
}

fn serve_everyone(
    mech: &Mechanism,
    r: &[f64],
    c: &[usize],
    genuine: MechanismOutcome,
) -> Result<MechanismOutcome> {
    let k = mech.market.k();
    let n = r.len();
    let mut demand = vec![0u64; k];
    for &ci in c {
        demand[ci - 1] += 1;
    }
    // cumulative purchases must cover the running deficit; buy as late as possible
    let supply = mech.market.cumulative_supply();
    let (mut need, mut bought) = (0u64, 0u64);
    let mut g = vec![0u64; k];
    for i in 0..k {
        need += demand[i];
        let deficit = need.saturating_sub(supply[i]);
        if deficit > bought {
            g[i] = deficit - bought;
            bought = deficit;
        }
    }
    let xi = vec![true; n];
    if !is_feasible(&DecisionPair::new(xi.clone(), g.clone()), c, &mech.market)? {
        return Err(Error::Internal(
            "serve-everyone purchases are infeasible".into(),
        ));
    }
    let t = genuine.t;
    let w = mech.virtual_valuations(r, c)?;
    let cost = purchase_cost(mech, &g);
    Ok(MechanismOutcome {
        seller_profit: t.iter().sum::<f64>() - cost,
        virtual_surplus: objective(&xi, &g, &w, &mech.market),
        xi,
        g,
        t,
        theta_thresholds: genuine.theta_thresholds,
        vthr: genuine.vthr,
    })
}

/// Type profiles for trials `0..trials`.
fn draw_profiles(scenario: &Scenario, trials: usize, seed: u64) -> Result<Vec<Vec<ConsumerType>>> {
    scenario
        .consumers
        .iter()
        .try_for_each(|c| c.model.check_prior())?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|j| sample_types(scenario, &mut stream_rng(seed, j)))
        .collect())
}

/// Per-trial `(xi_l, t_l)` with consumer `l` reporting `(r, c)` and everyone
/// else reporting truthfully.
fn own_samples(
    mech: &Mechanism,
    profiles: &[Vec<ConsumerType>],
    l: usize,
    report: (f64, usize),
    corruption: Corruption,
) -> Result<Vec<(f64, f64)>> {
    profiles
        .par_iter()
        .map(|types| {
            let mut r: Vec<f64> = types.iter().map(|t| t.theta).collect();
            let mut c: Vec<usize> = types.iter().map(|t| t.b).collect();
            r[l] = report.0;
            c[l] = report.1;
            let out = outcome_with(mech, &r, &c, corruption)?;
            Ok((if out.xi[l] { 1.0 } else { 0.0 }, out.t[l]))
        })
        .collect()
}

fn check_report(scenario: &Scenario, l: usize, report: (f64, usize)) -> Result<()> {
    if l >= scenario.n() {
        return Err(validation(format!(
            "consumer {l} out of range for {} consumers",
            scenario.n()
        )));
    }
    scenario.market.check_level(report.1)?;
    let (lo, hi) = scenario.consumers[l].model.support(report.1)?;
    if !(report.0 >= lo && report.0 <= hi) {
        return Err(Error::Domain {
            theta: report.0,
            level: report.1,
            lo,
            hi,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimEstimate {
    pub consumer: usize,
    pub r: f64,
    pub c: usize,
    /// True valuation the utility is evaluated at.
    pub theta: f64,
    pub xi_hat: f64,
    pub xi_se: f64,
    pub t_hat: f64,
    pub t_se: f64,
    pub utility: f64,
    pub utility_se: f64,
    pub trials: usize,
}

fn summarize(
    l: usize,
    report: (f64, usize),
    theta: f64,
    samples: &[(f64, f64)],
) -> InterimEstimate {
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ts: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let us: Vec<f64> = samples.iter().map(|s| theta * s.0 - s.1).collect();
    let (xi_hat, xi_se) = mean_se(&xs);
    let (t_hat, t_se) = mean_se(&ts);
    let (utility, utility_se) = mean_se(&us);
    InterimEstimate {
        consumer: l,
        r: report.0,
        c: report.1,
        theta,
        xi_hat,
        xi_se,
        t_hat,
        t_se,
        utility,
        utility_se,
        trials: samples.len(),
    }
}

/// Interim allocation probability, payment and utility (at valuation
/// `theta`) of consumer `l` reporting `report`.
pub fn estimate_interim(
    scenario: &Scenario,
    l: usize,
    report: (f64, usize),
    theta: f64,
    opts: &SimOptions,
) -> Result<InterimEstimate> {
    if opts.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    check_report(scenario, l, report)?;
    let mech = Mechanism::from_scenario(scenario, opts.config)?;
    let profiles = draw_profiles(scenario, opts.trials, opts.seed)?;
    let samples = own_samples(&mech, &profiles, l, report, opts.corruption)?;
    Ok(summarize(l, report, theta, &samples))
}

/// `points` evenly spaced valuations spanning level `b`'s support.
pub fn theta_grid(scenario: &Scenario, l: usize, b: usize, points: usize) -> Result<Vec<f64>> {
    let (lo, hi) = scenario.consumers[l].model.support(b)?;
    Ok(match points {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| {
                if i + 1 == points {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (points - 1) as f64
                }
            })
            .collect(),
    })
}

type Report = (f64, usize);

/// Lazily filled per-report sample cache for one consumer.
struct ReportCache<'a> {
    mech: &'a Mechanism,
    profiles: &'a [Vec<ConsumerType>],
    l: usize,
    corruption: Corruption,
    entries: Vec<(Report, Vec<(f64, f64)>)>,
}

impl<'a> ReportCache<'a> {
    fn get(&mut self, report: (f64, usize)) -> Result<&[(f64, f64)]> {
        let pos = match self.entries.iter().position(|(k, _)| *k == report) {
            Some(p) => p,
            None => {
                let s = own_samples(self.mech, self.profiles, self.l, report, self.corruption)?;
                self.entries.push((report, s));
                self.entries.len() - 1
            }
        };
        Ok(&self.entries[pos].1)
    }
}

/// One comparison of truthful against misreported interim utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicCheck {
    pub consumer: usize,
    pub theta: f64,
    pub b: usize,
    pub r: f64,
    pub c: usize,
    /// Mean of truthful minus misreport utility over paired trials.
    pub margin: f64,
    pub slack: f64,
}

impl BicCheck {
    fn excess(&self) -> f64 {
        self.margin + self.slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicReport {
    pub trials: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub corruption: Corruption,
    pub checks: usize,
    pub violation_count: usize,
    /// The misreport check closest to (or furthest into) violation.
    pub worst: Option<BicCheck>,
    /// Up to the first 20 violations.
    pub violations: Vec<BicCheck>,
    pub passed: bool,
}

const LISTED_VIOLATIONS: usize = 20;

/// For every consumer in `consumers`, every true type `(theta, b)` with
/// `theta` on a `grid_points` lattice of level `b`, and every misreport
/// `(r, c)` with `c <= b` and `r` on the same lattice inside level `c`'s
/// support, checks that truth-telling is not beaten beyond slack.
pub fn verify_bic(
    scenario: &Scenario,
    consumers: &[usize],
    grid_points: usize,
    opts: &SimOptions,
) -> Result<BicReport> {
    if opts.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    let mech = Mechanism::from_scenario(scenario, opts.config)?;
    let profiles = draw_profiles(scenario, opts.trials, opts.seed)?;
    let k = scenario.market.k();
    let mut checks = 0;
    let mut violations = Vec::new();
    let mut worst: Option<BicCheck> = None;
    for &l in consumers {
        if l >= scenario.n() {
            return Err(validation(format!("consumer {l} out of range")));
        }
        let model = &scenario.consumers[l].model;
        let mut cache = ReportCache {
            mech: &mech,
            profiles: &profiles,
            l,
            corruption: opts.corruption,
            entries: Vec::new(),
        };
        for b in 1..=k {
            let grid = theta_grid(scenario, l, b, grid_points)?;
            for &theta in &grid {
                let truth: Vec<f64> = cache
                    .get((theta, b))?
                    .iter()
                    .map(|s| theta * s.0 - s.1)
                    .collect();
                for c in 1..=b {
                    let (lo, hi) = model.support(c)?;
                    for &r in grid.iter().filter(|&&r| r >= lo && r <= hi) {
                        let mis = cache.get((r, c))?;
                        let diffs: Vec<f64> = truth
                            .iter()
                            .zip(mis)
                            .map(|(u, s)| u - (theta * s.0 - s.1))
                            .collect();
                        let (margin, se) = mean_se(&diffs);
                        let check = BicCheck {
                            consumer: l,
                            theta,
                            b,
                            r,
                            c,
                            margin,
                            slack: slack(se),
                        };
                        checks += 1;
                        if check.excess() < 0.0 {
                            violations.push(check.clone());
                        }
                        // truth against itself is exactly zero and says nothing
                        let identical = (r, c) == (theta, b);
                        if !identical && worst.as_ref().is_none_or(|w| check.excess() < w.excess())
                        {
                            worst = Some(check);
                        }
                    }
                }
            }
        }
    }
    let violation_count = violations.len();
    violations.truncate(LISTED_VIOLATIONS);
    Ok(BicReport {
        trials: opts.trials,
        seed: opts.seed,
        grid_points,
        corruption: opts.corruption,
        checks,
        violation_count,
        worst,
        violations,
        passed: violation_count == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrPoint {
    pub consumer: usize,
    pub theta: f64,
    pub b: usize,
    pub utility: f64,
    pub slack: f64,
    /// Bottom of the support, where utility must also be zero.
    pub at_minimum: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrReport {
    pub trials: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub corruption: Corruption,
    pub points: Vec<IrPoint>,
    pub interim_violations: usize,
    pub ex_post_profiles: usize,
    pub ex_post_violations: usize,
    /// Most negative realized utility seen, 0 if none.
    pub worst_ex_post_utility: f64,
    pub passed: bool,
}

// Realized utilities above this count as non-negative.
const EX_POST_TOLERANCE: f64 = 1e-9;

/// Interim utility of truthful types on a lattice of every level (zero at
/// the bottom of the support, non-negative elsewhere), plus realized
/// utility of every consumer on `ex_post_profiles` truthful profiles.
pub fn verify_ir(
    scenario: &Scenario,
    consumers: &[usize],
    grid_points: usize,
    ex_post_profiles: usize,
    opts: &SimOptions,
) -> Result<IrReport> {
    if opts.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    let mech = Mechanism::from_scenario(scenario, opts.config)?;
    let profiles = draw_profiles(scenario, opts.trials, opts.seed)?;
    let mut points = Vec::new();
    for &l in consumers {
        if l >= scenario.n() {
            return Err(validation(format!("consumer {l} out of range")));
        }
        for b in 1..=scenario.market.k() {
            let grid = theta_grid(scenario, l, b, grid_points.max(1))?;
            let lo = scenario.consumers[l].model.support(b)?.0;
            for theta in grid {
                let samples = own_samples(&mech, &profiles, l, (theta, b), opts.corruption)?;
                let est = summarize(l, (theta, b), theta, &samples);
                let sl = slack(est.utility_se);
                let at_minimum = theta == lo;
                let passed = est.utility >= -sl && (!at_minimum || est.utility.abs() <= sl);
                points.push(IrPoint {
                    consumer: l,
                    theta,
                    b,
                    utility: est.utility,
                    slack: sl,
                    at_minimum,
                    passed,
                });
            }
        }
    }

    // independent draws, separate from the interim ones
    let ex_post_seed = opts.seed ^ 0x9e37_79b9_7f4a_7c15;
    let ex_post = draw_profiles(scenario, ex_post_profiles, ex_post_seed)?;
    let realized: Vec<(usize, f64)> = ex_post
        .par_iter()
        .map(|types| {
            let r: Vec<f64> = types.iter().map(|t| t.theta).collect();
            let c: Vec<usize> = types.iter().map(|t| t.b).collect();
            let out = outcome_with(&mech, &r, &c, opts.corruption)?;
            let mut bad = 0;
            let mut worst = 0.0f64;
            for (l, &theta) in r.iter().enumerate() {
                let u = if out.xi[l] {
                    theta - out.t[l]
                } else {
                    -out.t[l]
                };
                if u < -EX_POST_TOLERANCE {
                    bad += 1;
                }
                worst = worst.min(u);
            }
            Ok((bad, worst))
        })
        .collect::<Result<_>>()?;
    let ex_post_violations = realized.iter().map(|r| r.0).sum();
    let worst_ex_post_utility = realized.iter().map(|r| r.1).fold(0.0, f64::min);
    let interim_violations = points.iter().filter(|p| !p.passed).count();
    Ok(IrReport {
        trials: opts.trials,
        seed: opts.seed,
        grid_points,
        corruption: opts.corruption,
        points,
        interim_violations,
        ex_post_profiles,
        ex_post_violations,
        worst_ex_post_utility,
        passed: interim_violations == 0 && ex_post_violations == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitReport {
    pub trials: usize,
    pub seed: u64,
    pub corruption: Corruption,
    pub profit: f64,
    pub profit_se: f64,
    pub virtual_surplus: f64,
    pub virtual_surplus_se: f64,
    /// Mean of per-trial profit minus virtual surplus.
    pub difference: f64,
    pub difference_se: f64,
    pub slack: f64,
    pub agree: bool,
}

/// Expected seller profit and expected virtual surplus under truthful
/// reporting, from the same profiles.
pub fn estimate_profit(scenario: &Scenario, opts: &SimOptions) -> Result<ProfitReport> {
    if opts.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    let mech = Mechanism::from_scenario(scenario, opts.config)?;
    let samples: Vec<(f64, f64)> = (0..opts.trials as u64)
        .into_par_iter()
        .map(|j| {
            let types = sample_types(scenario, &mut stream_rng(opts.seed, j));
            let r: Vec<f64> = types.iter().map(|t| t.theta).collect();
            let c: Vec<usize> = types.iter().map(|t| t.b).collect();
            let out = outcome_with(&mech, &r, &c, opts.corruption)?;
            Ok((out.seller_profit, out.virtual_surplus))
        })
        .collect::<Result<_>>()?;
    scenario
        .consumers
        .iter()
        .try_for_each(|c| c.model.check_prior())?;
    let ps: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let vs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let ds: Vec<f64> = samples.iter().map(|s| s.0 - s.1).collect();
    let (profit, profit_se) = mean_se(&ps);
    let (virtual_surplus, virtual_surplus_se) = mean_se(&vs);
    let (difference, difference_se) = mean_se(&ds);
    let sl = slack(difference_se);
    Ok(ProfitReport {
        trials: opts.trials,
        seed: opts.seed,
        corruption: opts.corruption,
        profit,
        profit_se,
        virtual_surplus,
        virtual_surplus_se,
        difference,
        difference_se,
        slack: sl,
        agree: difference.abs() <= sl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneIn {
    Valuation,
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub consumer: usize,
    pub direction: MonotoneIn,
    pub lower: (f64, usize),
    pub upper: (f64, usize),
    /// Mean of `xi(upper) - xi(lower)` over paired trials.
    pub increase: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterimReport {
    pub trials: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub corruption: Corruption,
    pub estimates: Vec<InterimEstimate>,
    pub checks: usize,
    pub violations: Vec<MonotonicityCheck>,
    pub passed: bool,
}

/// Interim allocation probability on a lattice of every level: it must not
/// drop as the reported valuation rises, nor as the reported level rises.
pub fn verify_interim(
    scenario: &Scenario,
    consumers: &[usize],
    grid_points: usize,
    opts: &SimOptions,
) -> Result<InterimReport> {
    if opts.trials == 0 {
        return Err(validation("trials must be at least 1"));
    }
    let mech = Mechanism::from_scenario(scenario, opts.config)?;
    let profiles = draw_profiles(scenario, opts.trials, opts.seed)?;
    let k = scenario.market.k();
    let mut estimates = Vec::new();
    let mut checks = 0;
    let mut violations = Vec::new();
    for &l in consumers {
        if l >= scenario.n() {
            return Err(validation(format!("consumer {l} out of range")));
        }
        let model = &scenario.consumers[l].model;
        let mut cache = ReportCache {
            mech: &mech,
            profiles: &profiles,
            l,
            corruption: opts.corruption,
            entries: Vec::new(),
        };
        let mut compare = |lo: (f64, usize),
                           hi: (f64, usize),
                           dir: MonotoneIn,
                           cache: &mut ReportCache|
         -> Result<()> {
            let a: Vec<f64> = cache.get(lo)?.iter().map(|s| s.0).collect();
            let b = cache.get(hi)?;
            let diffs: Vec<f64> = b.iter().zip(&a).map(|(b, a)| b.0 - a).collect();
            let (increase, se) = mean_se(&diffs);
            checks += 1;
            if increase < -slack(se) {
                violations.push(MonotonicityCheck {
                    consumer: l,
                    direction: dir,
                    lower: lo,
                    upper: hi,
                    increase,
                    slack: slack(se),
                });
            }
            Ok(())
        };
        for c in 1..=k {
            let grid = theta_grid(scenario, l, c, grid_points)?;
            for pair in grid.windows(2) {
                compare(
                    (pair[0], c),
                    (pair[1], c),
                    MonotoneIn::Valuation,
                    &mut cache,
                )?;
            }
            if c < k {
                let (lo, hi) = model.support(c + 1)?;
                for &r in grid.iter().filter(|&&r| r >= lo && r <= hi) {
                    compare((r, c), (r, c + 1), MonotoneIn::Level, &mut cache)?;
                }
            }
            for &r in &grid {
                estimates.push(summarize(l, (r, c), r, cache.get((r, c))?));
            }
        }
    }
    Ok(InterimReport {
        trials: opts.trials,
        seed: opts.seed,
        grid_points,
        corruption: opts.corruption,
        estimates,
        checks,
        passed: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarketStructure, ValuationModel};

    fn one_consumer(p: f64) -> Scenario {
        let market = MarketStructure::new(vec![1], vec![p]).unwrap();
        let model = ValuationModel::uniform(&[10.0], vec![1.0]).unwrap();
        Scenario::symmetric(market, model, 1, 0).unwrap()
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sample variance 5/3
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn single_consumer_interim_is_an_indicator() {
        let s = one_consumer(100.0);
        let opts = SimOptions::new(50, 3);
        let above = estimate_interim(&s, 0, (6.0, 1), 6.0, &opts).unwrap();
        assert_eq!((above.xi_hat, above.xi_se, above.t_hat), (1.0, 0.0, 5.0));
        let below = estimate_interim(&s, 0, (4.0, 1), 4.0, &opts).unwrap();
        assert_eq!((below.xi_hat, below.xi_se, below.t_hat), (0.0, 0.0, 0.0));
        let at = estimate_interim(&s, 0, (5.0, 1), 5.0, &opts).unwrap();
        assert_eq!(at.xi_hat, 0.0);
    }

    #[test]
    fn serve_everyone_buys_the_cheapest_cover() {
        let market = MarketStructure::new(vec![0, 1, 0], vec![9.0, 6.0, 3.0]).unwrap();
        let model = ValuationModel::uniform(&[24.0, 16.0, 8.0], vec![1.0 / 3.0; 3]).unwrap();
        let mech = Mechanism::new(market, vec![model; 4], AllocatorConfig::default()).unwrap();
        let (r, c) = ([1.0, 2.0, 3.0, 4.0], [1, 3, 3, 2]);
        let out = outcome_with(&mech, &r, &c, Corruption::ServeEveryone).unwrap();
        assert_eq!(out.xi, vec![true; 4]);
        // level 1 needs one purchase, level 2 fits, level 3 needs two more
        assert_eq!(out.g, vec![1, 0, 2]);
    }

    #[test]
    fn report_outside_support_is_rejected() {
        let s = one_consumer(100.0);
        let opts = SimOptions::new(10, 0);
        assert!(estimate_interim(&s, 0, (11.0, 1), 11.0, &opts).is_err());
        assert!(estimate_interim(&s, 1, (1.0, 1), 1.0, &opts).is_err());
        assert!(estimate_interim(&s, 0, (1.0, 1), 1.0, &SimOptions::new(0, 0)).is_err());
    }

    #[test]
    fn truth_against_truth_has_zero_margin() {
        let s = one_consumer(100.0);
        let report = verify_bic(&s, &[0], 3, &SimOptions::new(20, 1)).unwrap();
        assert!(report.passed);
        // grid {0, 5, 10}: each truth against each report
        assert_eq!(report.checks, 9);
    }
}

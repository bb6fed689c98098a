//! Market, consumer and valuation-distribution types.
//!
//! Goods are never identified individually. A market is described by its
//! per-band free supply `m` (band `i` holds the goods in flexibility set `i`
//! but not in set `i - 1`) and the unit purchase price `p` of each band.
//! Flexibility levels are 1-based throughout the public API; consumer
//! indices are 0-based.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Nesting depth, free supply per band and strictly decreasing band prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketStructure {
    m: Vec<u64>,
    p: Vec<f64>,
}

impl MarketStructure {
    pub fn new(m: Vec<u64>, p: Vec<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(validation("market needs at least one flexibility level"));
        }
        if m.len() != p.len() {
            return Err(validation(format!(
                "supply has {} levels but prices have {}",
                m.len(),
                p.len()
            )));
        }
        if let Some(bad) = p.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(validation(format!("price {bad} is not a positive real")));
        }
        if let Some(w) = p.windows(2).position(|w| w[0] <= w[1]) {
            return Err(validation(format!(
                "prices must be strictly decreasing, but p{} = {} <= p{} = {}",
                w + 1,
                p[w],
                w + 2,
                p[w + 1]
            )));
        }
        Ok(Self { m, p })
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    pub fn supply(&self) -> &[u64] {
        &self.m
    }

    pub fn prices(&self) -> &[f64] {
        &self.p
    }

    /// Price of a band, 1-based.
    pub fn price(&self, level: usize) -> f64 {
        self.p[level - 1]
    }

    /// `sum_{j <= i} m_j` for every level `i`.
    pub fn cumulative_supply(&self) -> Vec<u64> {
        self.m
            .iter()
            .scan(0u64, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.k() {
            return Err(validation(format!(
                "flexibility level {level} outside 1..={}",
                self.k()
            )));
        }
        Ok(())
    }
}

/// A consumer's private type: valuation and flexibility level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumerType {
    pub theta: f64,
    pub b: usize,
}

/// Reported valuations `r` and reported flexibility levels `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedProfile {
    pub r: Vec<f64>,
    pub c: Vec<usize>,
}

impl ReportedProfile {
    pub fn new(r: Vec<f64>, c: Vec<usize>) -> Result<Self> {
        if r.len() != c.len() {
            return Err(validation(format!(
                "{} reported valuations but {} reported levels",
                r.len(),
                c.len()
            )));
        }
        Ok(Self { r, c })
    }

    pub fn truthful(types: &[ConsumerType]) -> Self {
        Self {
            r: types.iter().map(|t| t.theta).collect(),
            c: types.iter().map(|t| t.b).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn validate(&self, market: &MarketStructure) -> Result<()> {
        if self.r.len() != self.c.len() {
            return Err(validation("report vectors differ in length"));
        }
        self.c.iter().try_for_each(|&c| market.check_level(c))
    }

    /// Consumers may under-report their flexibility but never over-report it.
    pub fn check_against(&self, truth: &[ConsumerType]) -> Result<()> {
        if truth.len() != self.len() {
            return Err(validation(format!(
                "{} reports for {} consumers",
                self.len(),
                truth.len()
            )));
        }
        for (l, (c, t)) in self.c.iter().zip(truth).enumerate() {
            if *c > t.b {
                return Err(validation(format!(
                    "consumer {l} reports level {c} above its true level {}",
                    t.b
                )));
            }
        }
        Ok(())
    }

    /// Demand profile `n_i = |{l : c_l = i}|`.
    pub fn demand(&self, k: usize) -> Vec<usize> {
        let mut n = vec![0; k];
        for &c in &self.c {
            n[c - 1] += 1;
        }
        n
    }
}

/// Valuation distribution of one consumer conditioned on one flexibility level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConditionalDist {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Exponential with the given rate, truncated to `[0, upper]`.
    TruncatedExponential {
        rate: f64,
        upper: f64,
    },
    /// Point mass; samples fine but has no density.
    PointMass {
        value: f64,
    },
}

impl ConditionalDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConditionalDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(validation(format!("uniform support [{lo}, {hi}] is empty")));
                }
            }
            ConditionalDist::TruncatedExponential { rate, upper } => {
                if !(rate.is_finite() && rate > 0.0 && upper.is_finite() && upper > 0.0) {
                    return Err(validation(format!(
                        "truncated exponential needs rate > 0 and upper > 0, got {rate}, {upper}"
                    )));
                }
            }
            ConditionalDist::PointMass { value } => {
                if !value.is_finite() {
                    return Err(validation("point mass must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            ConditionalDist::Uniform { lo, hi } => (lo, hi),
            ConditionalDist::TruncatedExponential { upper, .. } => (0.0, upper),
            ConditionalDist::PointMass { value } => (value, value),
        }
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        let (lo, hi) = self.support();
        if theta < lo || theta > hi {
            return 0.0;
        }
        match *self {
            ConditionalDist::Uniform { lo, hi } => 1.0 / (hi - lo),
            ConditionalDist::TruncatedExponential { rate, upper } => {
                rate * (-rate * theta).exp() / -(-rate * upper).exp_m1()
            }
            ConditionalDist::PointMass { .. } => 0.0,
        }
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        1.0 - self.survival(theta)
    }

    /// `1 - F(theta)`, computed directly to keep precision near the top.
    pub fn survival(&self, theta: f64) -> f64 {
        let (lo, hi) = self.support();
        if theta < lo {
            return 1.0;
        }
        if theta >= hi {
            return 0.0;
        }
        match *self {
            ConditionalDist::Uniform { lo, hi } => (hi - theta) / (hi - lo),
            ConditionalDist::TruncatedExponential { rate, upper } => {
                // (e^{-rate theta} - e^{-rate upper}) / (1 - e^{-rate upper})
                (-rate * theta).exp() * -(-rate * (upper - theta)).exp_m1()
                    / -(-rate * upper).exp_m1()
            }
            ConditionalDist::PointMass { .. } => 0.0,
        }
    }

    /// `(1 - F) / f` inside the support, `None` where the density vanishes.
    pub fn inverse_hazard(&self, theta: f64) -> Option<f64> {
        match *self {
            ConditionalDist::Uniform { hi, .. } => Some(hi - theta),
            ConditionalDist::TruncatedExponential { rate, upper } => {
                Some(-(-rate * (upper - theta)).exp_m1() / rate)
            }
            ConditionalDist::PointMass { .. } => None,
        }
    }

    /// `f / (1 - F)`; infinite at the top of the support.
    pub fn hazard(&self, theta: f64) -> f64 {
        match self.inverse_hazard(theta) {
            Some(h) if h > 0.0 => 1.0 / h,
            _ => f64::INFINITY,
        }
    }

    /// Closed-form inverse virtual valuation where one exists.
    fn inverse_virtual_closed(&self, y: f64) -> Option<f64> {
        match *self {
            ConditionalDist::Uniform { hi, .. } => Some((y + hi) / 2.0),
            _ => None,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            ConditionalDist::Uniform { lo, hi } => lo + u * (hi - lo),
            ConditionalDist::TruncatedExponential { rate, upper } => {
                let mass = -(-rate * upper).exp_m1();
                (-(-u * mass).ln_1p() / rate).clamp(0.0, upper)
            }
            ConditionalDist::PointMass { value } => value,
        }
    }
}

/// Per-consumer valuation model: a conditional distribution for each
/// flexibility level plus the prior over levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationModel {
    levels: Vec<ConditionalDist>,
    prior: Vec<f64>,
}

const PRIOR_TOLERANCE: f64 = 1e-9;
const INVERSION_TOLERANCE: f64 = 1e-12;

impl ValuationModel {
    pub fn new(levels: Vec<ConditionalDist>, prior: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(validation("valuation model needs at least one level"));
        }
        if levels.len() != prior.len() {
            return Err(validation(format!(
                "{} conditional distributions but {} prior weights",
                levels.len(),
                prior.len()
            )));
        }
        levels.iter().try_for_each(ConditionalDist::validate)?;
        Ok(Self { levels, prior })
    }

    /// Uniform `[0, u_b]` at every level.
    pub fn uniform(upper: &[f64], prior: Vec<f64>) -> Result<Self> {
        Self::new(
            upper
                .iter()
                .map(|&hi| ConditionalDist::Uniform { lo: 0.0, hi })
                .collect(),
            prior,
        )
    }

    pub fn truncated_exponential(rate: &[f64], upper: f64, prior: Vec<f64>) -> Result<Self> {
        Self::new(
            rate.iter()
                .map(|&rate| ConditionalDist::TruncatedExponential { rate, upper })
                .collect(),
            prior,
        )
    }

    pub fn k(&self) -> usize {
        self.levels.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn level(&self, b: usize) -> Result<&ConditionalDist> {
        self.levels
            .get(b.wrapping_sub(1))
            .ok_or_else(|| validation(format!("flexibility level {b} outside 1..={}", self.k())))
    }

    pub fn support(&self, b: usize) -> Result<(f64, f64)> {
        Ok(self.level(b)?.support())
    }

    pub fn theta_min(&self) -> f64 {
        self.levels
            .iter()
            .map(|d| d.support().0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn theta_max(&self) -> f64 {
        self.levels
            .iter()
            .map(|d| d.support().1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_prior(&self) -> Result<()> {
        if self.prior.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(validation(format!(
                "prior {:?} has a negative weight",
                self.prior
            )));
        }
        let total: f64 = self.prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(validation(format!(
                "prior {:?} sums to {total}, not 1",
                self.prior
            )));
        }
        Ok(())
    }

    /// `w(theta, b) = theta - (1 - F(theta|b)) / f(theta|b)`.
    pub fn virtual_valuation(&self, theta: f64, b: usize) -> Result<f64> {
        let dist = self.level(b)?;
        let (lo, hi) = dist.support();
        if !(theta >= lo && theta <= hi) {
            return Err(Error::Domain {
                theta,
                level: b,
                lo,
                hi,
            });
        }
        if dist.pdf(theta) <= 0.0 {
            return Err(Error::SingularDensity { theta, level: b });
        }
        let ih = dist
            .inverse_hazard(theta)
            .ok_or(Error::SingularDensity { theta, level: b })?;
        Ok(theta - ih)
    }

    /// Smallest `x` in the level-`b` support with `w(x, b) >= y`, or `None`
    /// when `y` exceeds `w(theta_max, b)`.
    pub fn inverse_virtual_valuation(&self, y: f64, b: usize) -> Result<Option<f64>> {
        let dist = self.level(b)?;
        let (lo, hi) = dist.support();
        let w_lo = self.virtual_valuation(lo, b)?;
        let w_hi = self.virtual_valuation(hi, b)?;
        if y > w_hi {
            return Ok(None);
        }
        if y <= w_lo {
            return Ok(Some(lo));
        }
        if let Some(x) = dist.inverse_virtual_closed(y) {
            return Ok(Some(x.clamp(lo, hi)));
        }
        Ok(Some(self.bisect_inverse(y, b, lo, hi)?))
    }

    pub(crate) fn bisect_inverse(&self, y: f64, b: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
        // invariant: w(lo) < y <= w(hi)
        for _ in 0..200 {
            if hi - lo <= INVERSION_TOLERANCE * hi.abs().max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.virtual_valuation(mid, b)? >= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ConsumerType {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut b = self.k();
        for (i, q) in self.prior.iter().enumerate() {
            acc += q;
            if u < acc {
                b = i + 1;
                break;
            }
        }
        // skip trailing zero-weight levels reached only through round-off
        while b > 1 && self.prior[b - 1] == 0.0 {
            b -= 1;
        }
        let theta = self.levels[b - 1].quantile(rng.gen());
        ConsumerType { theta, b }
    }
}

/// Free-function form of [`ValuationModel::virtual_valuation`].
pub fn virtual_valuation(model: &ValuationModel, theta: f64, b: usize) -> Result<f64> {
    model.virtual_valuation(theta, b)
}

/// Which regularity condition a lattice point broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityCondition {
    /// Hazard non-decreasing in theta at a fixed level.
    MonotoneInTheta,
    /// Hazard strictly increasing in the level at a fixed theta.
    StrictInLevel,
    /// Virtual valuation negative at the bottom of each level's support.
    NegativeAtMinimum,
}

/// The first offending lattice pair for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityViolation {
    pub condition: RegularityCondition,
    /// `(theta, level)` of the lower lattice point.
    pub lower: (f64, usize),
    /// `(theta, level)` of the upper lattice point.
    pub upper: (f64, usize),
    pub lower_value: f64,
    pub upper_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub grid_size: usize,
    pub monotone_in_theta: bool,
    pub strict_in_level: bool,
    pub negative_at_minimum: bool,
    pub passed: bool,
    pub violations: Vec<RegularityViolation>,
}

// Float noise allowance for the non-strict comparison.
const HAZARD_SLACK: f64 = 1e-12;

/// Scans the hazard rate on a `grid_size x k` lattice spanning the model's
/// overall valuation range. Points outside a level's support are skipped.
pub fn check_regularity(model: &ValuationModel, grid_size: usize) -> Result<RegularityReport> {
    if grid_size < 2 {
        return Err(validation("regularity lattice needs at least two points"));
    }
    let (lo, hi) = (model.theta_min(), model.theta_max());
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let in_support = |d: &ConditionalDist, x: f64| {
        let (a, b) = d.support();
        x >= a && x <= b && d.pdf(x) > 0.0
    };

    let mut violations = Vec::new();

    let mut monotone_in_theta = true;
    'levels: for (i, dist) in model.levels.iter().enumerate() {
        let mut prev: Option<(f64, f64)> = None;
        for &x in grid.iter().filter(|&&x| in_support(dist, x)) {
            let h = dist.hazard(x);
            if let Some((px, ph)) = prev {
                if h < ph - HAZARD_SLACK * ph.abs().max(1.0) {
                    monotone_in_theta = false;
                    violations.push(RegularityViolation {
                        condition: RegularityCondition::MonotoneInTheta,
                        lower: (px, i + 1),
                        upper: (x, i + 1),
                        lower_value: ph,
                        upper_value: h,
                    });
                    break 'levels;
                }
            }
            prev = Some((x, h));
        }
    }

    let mut strict_in_level = true;
    'pairs: for i in 1..model.k() {
        let (low, high) = (&model.levels[i - 1], &model.levels[i]);
        for &x in grid
            .iter()
            .filter(|&&x| in_support(low, x) && in_support(high, x))
        {
            let (hl, hh) = (low.hazard(x), high.hazard(x));
            // shared top of support: both rates blow up
            if hl.is_infinite() && hh.is_infinite() {
                continue;
            }
            if hh.partial_cmp(&hl) != Some(std::cmp::Ordering::Greater) {
                strict_in_level = false;
                violations.push(RegularityViolation {
                    condition: RegularityCondition::StrictInLevel,
                    lower: (x, i),
                    upper: (x, i + 1),
                    lower_value: hl,
                    upper_value: hh,
                });
                break 'pairs;
            }
        }
    }

    let mut negative_at_minimum = true;
    for b in 1..=model.k() {
        let (a, _) = model.support(b)?;
        let w = match model.virtual_valuation(a, b) {
            Ok(w) => w,
            Err(Error::SingularDensity { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        if w.partial_cmp(&0.0) != Some(std::cmp::Ordering::Less) {
            negative_at_minimum = false;
            violations.push(RegularityViolation {
                condition: RegularityCondition::NegativeAtMinimum,
                lower: (a, b),
                upper: (a, b),
                lower_value: w,
                upper_value: w,
            });
            break;
        }
    }

    Ok(RegularityReport {
        grid_size,
        monotone_in_theta,
        strict_in_level,
        negative_at_minimum,
        passed: monotone_in_theta && strict_in_level && negative_at_minimum,
        violations,
    })
}

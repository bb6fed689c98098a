//! Optimal auctions for flexibly demanded goods with nested flexibility
//! levels, free supply per band and the option to buy extra goods at a price.

pub mod allocator;
pub mod error;
pub mod feasibility;
pub mod instances;
pub mod mechanism;
pub mod model;
pub mod oracle;
pub mod payments;
pub mod rng;
pub mod scenario;
pub mod simulate;

pub use allocator::{allocate, Allocation, AllocatorConfig, PurchaseRule, TieBreak};
pub use error::{Error, Result};
pub use feasibility::{is_feasible, witness_assignment, DecisionPair};
pub use mechanism::Mechanism;
pub use model::{ConditionalDist, ConsumerType, MarketStructure, ReportedProfile, ValuationModel};
pub use payments::MechanismOutcome;
pub use scenario::Scenario;

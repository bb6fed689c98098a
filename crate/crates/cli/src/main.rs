use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use flexauction::allocator::{
    allocate, allocate_fixed_supply, AllocatorConfig, PurchaseRule, TieBreak,
};
use flexauction::feasibility::{is_feasible, objective, witness_assignment, DecisionPair};
use flexauction::instances::{random_instance, InstanceParams};
use flexauction::model::{check_regularity, ReportedProfile};
use flexauction::oracle::{
    default_purchase_cap, solve_exact, solve_fixed_supply, MAX_CANDIDATES, MAX_CONSUMERS,
};
use flexauction::simulate::{
    estimate_profit, verify_bic, verify_interim, verify_ir, Corruption, SimOptions,
};
use flexauction::{Error, Mechanism, Scenario};

mod output;

#[derive(Parser)]
#[command(
    name = "flexauction",
    version,
    about = "Optimal auctions for flexible consumers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Exact,
    PerClass,
}

impl From<Rule> for PurchaseRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Exact => PurchaseRule::Exact,
            Rule::PerClass => PurchaseRule::PerClass,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Bic,
    Ir,
    Profit,
    Interim,
}

#[derive(Clone, Copy, ValueEnum)]
enum Corrupt {
    None,
    Halved,
    Doubled,
    ServeEveryone,
}

impl From<Corrupt> for Corruption {
    fn from(c: Corrupt) -> Self {
        match c {
            Corrupt::None => Corruption::None,
            Corrupt::Halved => Corruption::HalvedPayments,
            Corrupt::Doubled => Corruption::DoubledPayments,
            Corrupt::ServeEveryone => Corruption::ServeEveryone,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the mechanism on a scenario's true types (or given reports).
    Run {
        scenario: PathBuf,
        /// JSON file `{"r": [...], "c": [...]}` overriding truthful reports.
        #[arg(long)]
        reports: Option<PathBuf>,
        /// Include the allocation trace.
        #[arg(long)]
        explain: bool,
        #[arg(long, value_enum, default_value = "exact")]
        rule: Rule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the allocator with exhaustive search on random instances.
    OracleCompare {
        #[arg(long, default_value_t = 10_000)]
        instances: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        max_n: usize,
        #[arg(long, default_value_t = 3)]
        max_k: usize,
        /// Remove higher indices first among equal virtual valuations.
        #[arg(long)]
        invert_ties: bool,
        /// Disable purchases on both sides.
        #[arg(long)]
        fixed_supply: bool,
        #[arg(long, value_enum, default_value = "exact")]
        rule: Rule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo verification suites.
    Verify {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Consumer to test; all of them if omitted.
        #[arg(long)]
        consumer: Option<usize>,
        #[arg(long, default_value_t = 9)]
        grid_points: usize,
        /// Realized-utility profiles for the ir suite.
        #[arg(long, default_value_t = 100_000)]
        ex_post_profiles: usize,
        #[arg(long, value_enum, default_value = "none")]
        corrupt: Corrupt,
        #[arg(long, value_enum, default_value = "exact")]
        rule: Rule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the valuation models' regularity on a lattice.
    CheckRegularity {
        scenario: PathBuf,
        #[arg(long, default_value_t = 257)]
        grid_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit 1: a check failed. Exit 2: bad input.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation(_)
            | Error::Domain { .. }
            | Error::SingularDensity { .. }
            | Error::TooLarge(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

struct Report {
    json: Value,
    passed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        eprintln!("error: {:#}", f.error);
        return ExitCode::from(f.code);
    }
    let (result, out) = match cli.command {
        Command::Run {
            scenario,
            reports,
            explain,
            rule,
            out,
        } => (run(&scenario, reports.as_deref(), explain, rule), out),
        Command::OracleCompare {
            instances,
            seed,
            max_n,
            max_k,
            invert_ties,
            fixed_supply,
            rule,
            out,
        } => (
            oracle_compare(
                instances,
                seed,
                max_n,
                max_k,
                invert_ties,
                fixed_supply,
                rule,
            ),
            out,
        ),
        Command::Verify {
            scenario,
            suite,
            trials,
            seed,
            consumer,
            grid_points,
            ex_post_profiles,
            corrupt,
            rule,
            out,
        } => (
            verify(
                &scenario,
                suite,
                trials,
                seed,
                consumer,
                grid_points,
                ex_post_profiles,
                corrupt,
                rule,
            ),
            out,
        ),
        Command::CheckRegularity {
            scenario,
            grid_size,
            out,
        } => (regularity(&scenario, grid_size), out),
    };
    let report = match result {
        Ok(r) => r,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            return ExitCode::from(f.code);
        }
    };
    let text = output::to_json_string(&report.json);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text + "\n") {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => {
            use std::io::Write;
            // a closed pipe downstream is not our failure
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("AUCTION_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        input(anyhow!(
            "AUCTION_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Ok(Scenario::from_path(path)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportsFile {
    r: Vec<f64>,
    c: Vec<usize>,
}

fn run(path: &Path, reports: Option<&Path>, explain: bool, rule: Rule) -> Result<Report, Failure> {
    let scenario = load(path)?;
    let truth = scenario.true_types()?;
    let profile = match reports {
        None => ReportedProfile::truthful(&truth),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .map_err(input)?;
            let file: ReportsFile = serde_json::from_str(&text)
                .with_context(|| format!("reports file {}", p.display()))
                .map_err(input)?;
            let profile = ReportedProfile::new(file.r, file.c)?;
            if profile.len() != scenario.n() {
                return Err(input(anyhow!(
                    "{} reports for {} consumers",
                    profile.len(),
                    scenario.n()
                )));
            }
            profile.check_against(&truth)?;
            profile
        }
    };
    let config = AllocatorConfig {
        rule: rule.into(),
        ..Default::default()
    };
    let mech = Mechanism::from_scenario(&scenario, config)?;
    let (outcome, allocation) = mech.run(&profile)?;
    let witness =
        witness_assignment(&allocation.pair(), &profile.c, &scenario.market).ok_or_else(|| {
            Failure {
                code: 1,
                error: anyhow!("emitted allocation has no feasible assignment"),
            }
        })?;

    let t: Vec<f64> = outcome
        .t
        .iter()
        .map(|&x| output::round_to(x, 1e-6))
        .collect();
    let mut json = json!({
        "rule": config.rule,
        "xi": outcome.xi.iter().map(|&x| u8::from(x)).collect::<Vec<_>>(),
        "g": outcome.g,
        "t": t,
        "theta_thresholds": outcome.theta_thresholds,
        "virtual_thresholds": outcome.vthr,
        "seller_profit": outcome.seller_profit,
        "virtual_surplus": outcome.virtual_surplus,
        "witness": witness.0,
    });
    if explain {
        json["trace"] = serde_json::to_value(&allocation.trace).map_err(input)?;
    }
    Ok(Report { json, passed: true })
}

fn oracle_compare(
    instances: u64,
    seed: u64,
    max_n: usize,
    max_k: usize,
    invert_ties: bool,
    fixed_supply: bool,
    rule: Rule,
) -> Result<Report, Failure> {
    if max_n > MAX_CONSUMERS {
        return Err(input(anyhow!(
            "--max-n {max_n} exceeds the oracle limit of {MAX_CONSUMERS}"
        )));
    }
    if max_k == 0 {
        return Err(input(anyhow!("--max-k must be at least 1")));
    }
    let worst = (1u128 << max_n).saturating_mul((max_n as u128 + 1).saturating_pow(max_k as u32));
    if !fixed_supply && worst > MAX_CANDIDATES {
        return Err(input(anyhow!(
            "--max-n {max_n} with --max-k {max_k} can exceed the oracle limit of {MAX_CANDIDATES} candidates"
        )));
    }
    let params = InstanceParams {
        max_n,
        max_k,
        ..Default::default()
    };
    let config = AllocatorConfig {
        rule: rule.into(),
        tie_break: if invert_ties {
            TieBreak::HigherIndexFirst
        } else {
            TieBreak::LowerIndexFirst
        },
    };

    let results: Vec<Comparison> = (0..instances)
        .into_par_iter()
        .map(|i| compare_one(&params, seed, i, config, fixed_supply))
        .collect::<Result<_, Error>>()?;

    let mismatches: Vec<&Comparison> = results.iter().filter(|r| !r.matched).collect();
    let max_difference = results.iter().map(|r| r.difference).fold(0.0, f64::max);
    let count = |f: fn(&Comparison) -> bool| results.iter().filter(|r| f(r)).count();
    let infeasible = count(|r| !r.feasible);
    let wasted = count(|r| r.wasted_purchase);
    let misplaced = count(|r| r.misplaced_purchase);
    let passed = mismatches.is_empty() && infeasible == 0 && wasted == 0 && misplaced == 0;
    let json = json!({
        "instances": instances,
        "seed": seed,
        "max_n": max_n,
        "max_k": max_k,
        "rule": config.rule,
        "tie_break": config.tie_break,
        "fixed_supply": fixed_supply,
        "mismatches": mismatches.len(),
        "max_abs_difference": max_difference,
        "infeasible": infeasible,
        "wasted_purchases": wasted,
        "misplaced_purchases": misplaced,
        "first_mismatch": mismatches.first().map(|r| &r.detail),
        "passed": passed,
    });
    Ok(Report { json, passed })
}

struct Comparison {
    matched: bool,
    difference: f64,
    feasible: bool,
    /// Served count differs from free goods used plus goods bought.
    wasted_purchase: bool,
    /// A purchased band-i good went to a consumer of class above i.
    misplaced_purchase: bool,
    detail: Value,
}

fn compare_one(
    params: &InstanceParams,
    seed: u64,
    index: u64,
    config: AllocatorConfig,
    fixed: bool,
) -> Result<Comparison, Error> {
    let inst = random_instance(params, seed, index)?;
    let (w, c, mk) = (&inst.w, &inst.c, &inst.market);
    let k = mk.k();
    let (pair, best) = if fixed {
        let xi = allocate_fixed_supply(w, c, mk, config.tie_break)?;
        (
            DecisionPair::new(xi, vec![0; k]),
            solve_fixed_supply(w, c, mk)?,
        )
    } else {
        let a = allocate(w, c, mk, config)?;
        (
            a.pair(),
            solve_exact(w, c, mk, &default_purchase_cap(w.len(), k))?,
        )
    };
    let value = objective(&pair.xi, &pair.g, w, mk);
    let difference = (value - best.objective).abs();
    let matched = difference <= 1e-9;
    let feasible = is_feasible(&pair, c, mk)?;
    let witness = witness_assignment(&pair, c, mk);
    let (wasted_purchase, misplaced_purchase) = match &witness {
        Some(a) => {
            let free_used = a.0.iter().flatten().filter(|s| !s.purchased).count();
            let bought: u64 = pair.g.iter().sum();
            let misplaced =
                a.0.iter()
                    .zip(c)
                    .any(|(s, &cl)| s.is_some_and(|s| s.purchased && cl > s.band));
            (
                pair.served_count() != free_used + bought as usize,
                misplaced,
            )
        }
        None => (false, false),
    };
    let detail = json!({
        "index": index,
        "instance": inst,
        "allocator": {"xi": pair.xi, "g": pair.g, "objective": value},
        "oracle": {"xi": best.pair.xi, "g": best.pair.g, "objective": best.objective},
    });
    Ok(Comparison {
        matched,
        difference,
        feasible,
        wasted_purchase,
        misplaced_purchase,
        detail,
    })
}

#[allow(clippy::too_many_arguments)]
fn verify(
    path: &Path,
    suite: Suite,
    trials: usize,
    seed: Option<u64>,
    consumer: Option<usize>,
    grid_points: usize,
    ex_post_profiles: usize,
    corrupt: Corrupt,
    rule: Rule,
) -> Result<Report, Failure> {
    let scenario = load(path)?;
    if trials == 0 {
        return Err(input(anyhow!("--trials must be at least 1")));
    }
    let consumers: Vec<usize> = match consumer {
        Some(l) if l >= scenario.n() => {
            return Err(input(anyhow!(
                "consumer {l} out of range for {} consumers",
                scenario.n()
            )))
        }
        Some(l) => vec![l],
        None => (0..scenario.n()).collect(),
    };
    let opts = SimOptions {
        trials,
        seed: seed.unwrap_or(scenario.seed),
        config: AllocatorConfig {
            rule: rule.into(),
            ..Default::default()
        },
        corruption: corrupt.into(),
    };
    let to_value = |v: Result<Value, serde_json::Error>| v.map_err(input);
    let (json, passed) = match suite {
        Suite::Bic => {
            let r = verify_bic(&scenario, &consumers, grid_points, &opts)?;
            (to_value(serde_json::to_value(&r))?, r.passed)
        }
        Suite::Ir => {
            let r = verify_ir(&scenario, &consumers, grid_points, ex_post_profiles, &opts)?;
            (to_value(serde_json::to_value(&r))?, r.passed)
        }
        Suite::Profit => {
            let r = estimate_profit(&scenario, &opts)?;
            (to_value(serde_json::to_value(&r))?, r.agree)
        }
        Suite::Interim => {
            let r = verify_interim(&scenario, &consumers, grid_points, &opts)?;
            (to_value(serde_json::to_value(&r))?, r.passed)
        }
    };
    Ok(Report { json, passed })
}

fn regularity(path: &Path, grid_size: usize) -> Result<Report, Failure> {
    let scenario = load(path)?;
    let reports = scenario
        .consumers
        .iter()
        .map(|c| check_regularity(&c.model, grid_size))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = reports.iter().all(|r| r.passed);
    let json = json!({"grid_size": grid_size, "consumers": reports, "passed": passed});
    Ok(Report { json, passed })
}

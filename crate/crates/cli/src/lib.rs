//! Command implementations behind the `popassign` binary. Every command
//! returns a [`SolveReport`] (or generator output) and an exit code:
//! 0 found, 1 not found, 2 input error.

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use popassign::gen::{generate, GenConfig, PrefStyle};
use popassign::oracle::{
    brute_force_margin, is_popular_with_penalty, unpopularity_margin, verify_certificate, ALL_MATCHINGS_CAP,
};
use popassign::reductions::{parse_market, reduce_penalty_matching, solve_housing, solve_penalty_matching};
use popassign::variants::{solve_k_margin, solve_k_margin_parallel};
use popassign::{
    parse_instance, solve_popular_assignment, solve_truncated, solve_with_constraints, validate, DualCertificate,
    EdgeConstraints, Error, Instance, InstanceDoc, KMarginOutcome, Matching,
};

pub use report::{Outcome, SolveReport, Verification, VerificationStatus, EXIT_ERROR, EXIT_FOUND, EXIT_NOT_FOUND};
use report::{named_levels, CertificateJson, LoadJson};

#[derive(Debug, Parser)]
#[command(name = "popassign", version, about = "Popular assignments under one-sided partial-order preferences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a popular assignment, optionally truncated or with edge constraints.
    Solve(SolveArgs),
    /// Find a popular matching (or one popular with penalty κ).
    Matching(MatchingArgs),
    /// Find an assignment with unpopularity margin at most k, or evaluate one.
    Margin(MarginArgs),
    /// Find a popular allocation of a housing market.
    Housing(HousingArgs),
    /// Print a seeded random instance.
    Gen(GenArgs),
    /// Check whether a given matching is popular.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    /// Reject as soon as some object reaches this level.
    #[arg(long, value_name = "L")]
    pub truncate: Option<usize>,
    /// Re-check the output with the certificate verifier and brute force.
    #[arg(long)]
    pub verify: bool,
    /// Edge that must be used, as `agent,object`. Repeatable.
    #[arg(long, value_name = "AGENT,OBJECT")]
    pub forced: Vec<String>,
    /// Edge that must not be used, as `agent,object`. Repeatable.
    #[arg(long, value_name = "AGENT,OBJECT")]
    pub forbidden: Vec<String>,
}

#[derive(Debug, Args)]
pub struct MatchingArgs {
    pub instance: PathBuf,
    /// Vote weight of being matched over being unmatched.
    #[arg(long, value_name = "KAPPA", default_value_t = 1)]
    pub penalty: usize,
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["k", "evaluate"]))]
pub struct MarginArgs {
    pub instance: PathBuf,
    /// Margin budget.
    #[arg(long, value_name = "K")]
    pub k: Option<usize>,
    /// Matching file whose unpopularity margin is computed.
    #[arg(long, value_name = "MATCHING")]
    pub evaluate: Option<PathBuf>,
    /// Worker threads for the load enumeration.
    #[arg(long, value_name = "W", requires = "k")]
    pub parallel_branches: Option<usize>,
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct HousingArgs {
    pub market: PathBuf,
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 5)]
    pub agents: usize,
    /// Defaults to the number of agents.
    #[arg(long)]
    pub objects: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, value_name = "strict|weak|partial", default_value = "strict")]
    pub pref_style: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub matching: PathBuf,
    /// Judge the matching against all matchings with this penalty instead
    /// of against all assignments.
    #[arg(long, value_name = "KAPPA")]
    pub penalty: Option<usize>,
}

/// What a command produced.
#[derive(Debug)]
pub enum Output {
    Report(SolveReport),
    /// Raw text for standard output (the generator).
    Text(String),
}

impl Output {
    pub fn exit_code(&self) -> i32 {
        match self {
            Output::Report(r) => r.exit_code(),
            Output::Text(_) => EXIT_FOUND,
        }
    }
}

pub fn run(cli: &Cli) -> anyhow::Result<Output> {
    match &cli.command {
        Command::Solve(args) => cmd_solve(args).map(Output::Report),
        Command::Matching(args) => cmd_matching(args).map(Output::Report),
        Command::Margin(args) => cmd_margin(args).map(Output::Report),
        Command::Housing(args) => cmd_housing(args).map(Output::Report),
        Command::Gen(args) => cmd_gen(args).map(Output::Text),
        Command::Verify(args) => cmd_verify(args).map(Output::Report),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Parses an instance file; on failure lists every validation problem.
pub fn load_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = read(path)?;
    match parse_instance(&text) {
        Ok(inst) => Ok(inst),
        Err(err) => {
            let mut msg = format!("invalid instance {}: {err}", path.display());
            if let Ok(doc) = serde_json::from_str::<InstanceDoc>(&text) {
                for v in validate(&doc).violations {
                    msg.push_str(&format!("\n  - {v}"));
                }
            }
            Err(anyhow!(msg))
        }
    }
}

pub fn load_matching(path: &Path, instance: &Instance) -> anyhow::Result<Matching> {
    let pairs: Vec<(String, String)> =
        serde_json::from_str(&read(path)?).with_context(|| format!("{} is not a list of pairs", path.display()))?;
    Matching::from_named_pairs(instance, &pairs).with_context(|| format!("invalid matching {}", path.display()))
}

fn parse_edge(text: &str) -> anyhow::Result<(String, String)> {
    match text.split_once(',') {
        Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim().into(), b.trim().into())),
        _ => bail!("edge `{text}` is not of the form agent,object"),
    }
}

fn no_perfect_matching(command: &str) -> SolveReport {
    let mut report = SolveReport::new(command, Outcome::NoPerfectMatching);
    report.reason = Some("the instance has no perfect matching".into());
    report
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Certificate check at budget `k`, plus an exhaustive margin under the cap.
fn verify_assignment(instance: &Instance, m: &Matching, alpha: &DualCertificate, k: i64) -> Verification {
    let cert = verify_certificate(instance, m, alpha, k);
    let brute = brute_force_margin(instance, m).ok().map(|r| r.margin);
    let passed = cert.is_valid() && brute.map_or(true, |margin| margin <= k);
    Verification {
        status: if passed { VerificationStatus::Passed } else { VerificationStatus::Failed },
        certificate_valid: cert.is_valid(),
        certificate_violations: cert.violations.iter().map(|v| format!("{v:?}")).collect(),
        brute_force_margin: brute,
        brute_force_popular: None,
    }
}

pub fn cmd_solve(args: &SolveArgs) -> anyhow::Result<SolveReport> {
    let instance = load_instance(&args.instance)?;
    let forced = args.forced.iter().map(|s| parse_edge(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let forbidden = args.forbidden.iter().map(|s| parse_edge(s)).collect::<anyhow::Result<Vec<_>>>()?;
    let constraints = EdgeConstraints::from_named(&instance, &forced, &forbidden)?;
    if args.truncate.is_some() && !constraints.is_empty() {
        bail!("--truncate cannot be combined with --forced or --forbidden");
    }
    let start = Instant::now();
    let result = match args.truncate {
        Some(cap) => solve_truncated(&instance, cap),
        None if constraints.is_empty() => solve_popular_assignment(&instance),
        None => solve_with_constraints(&instance, &constraints),
    };
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(Error::NoPerfectMatching) => {
            let mut report = no_perfect_matching("solve");
            report.timing_ms = elapsed_ms(start);
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let mut report = SolveReport::from_outcome("solve", &instance, &outcome, None);
    report.timing_ms = elapsed_ms(start);
    if args.verify {
        if let (Some(m), Some(alpha)) = (outcome.assignment(), outcome.certificate()) {
            let mut v = verify_assignment(&instance, m, alpha, 0);
            if !constraints.admits(&instance, m) {
                v.status = VerificationStatus::Failed;
            }
            report.verification = Some(v);
        }
    }
    Ok(report)
}

pub fn cmd_matching(args: &MatchingArgs) -> anyhow::Result<SolveReport> {
    if args.penalty == 0 {
        bail!("--penalty must be at least 1");
    }
    let instance = load_instance(&args.instance)?;
    let start = Instant::now();
    let solved = solve_penalty_matching(&instance, args.penalty)?;
    let lifted = solved.lifted.as_ref().map(|m| (&instance, m));
    let mut report = SolveReport::from_outcome("matching", &solved.target, &solved.outcome, lifted);
    report.timing_ms = elapsed_ms(start);
    if args.verify {
        if let (Some(m), Some(alpha), Some(lifted)) =
            (solved.outcome.assignment(), solved.outcome.certificate(), &solved.lifted)
        {
            let cert = verify_certificate(&solved.target, m, alpha, 0);
            let popular = if instance.num_agents() <= ALL_MATCHINGS_CAP {
                is_popular_with_penalty(&instance, lifted, args.penalty as i64).ok()
            } else {
                None
            };
            let passed = cert.is_valid() && popular != Some(false);
            report.verification = Some(Verification {
                status: if passed { VerificationStatus::Passed } else { VerificationStatus::Failed },
                certificate_valid: cert.is_valid(),
                certificate_violations: cert.violations.iter().map(|v| format!("{v:?}")).collect(),
                brute_force_margin: None,
                brute_force_popular: popular,
            });
        }
    }
    Ok(report)
}

pub fn cmd_margin(args: &MarginArgs) -> anyhow::Result<SolveReport> {
    let instance = load_instance(&args.instance)?;
    let start = Instant::now();
    if let Some(path) = &args.evaluate {
        let m = load_matching(path, &instance)?;
        if !m.is_perfect() {
            bail!("{} is not an assignment of the instance", path.display());
        }
        let margin = unpopularity_margin(&instance, &m)?;
        let mut report = SolveReport::new("margin", Outcome::Found);
        report.assignment = Some(m.to_named_pairs(&instance));
        report.set_margin(&instance, &margin);
        report.timing_ms = elapsed_ms(start);
        if args.verify {
            let brute = brute_force_margin(&instance, &m).ok().map(|r| r.margin);
            let passed = brute.map_or(true, |b| b == margin.margin);
            report.verification = Some(Verification {
                status: if passed { VerificationStatus::Passed } else { VerificationStatus::Failed },
                certificate_valid: true,
                certificate_violations: Vec::new(),
                brute_force_margin: brute,
                brute_force_popular: None,
            });
        }
        return Ok(report);
    }

    let k = args.k.expect("clap requires --k or --evaluate");
    let result = match args.parallel_branches {
        Some(0) => bail!("--parallel-branches must be at least 1"),
        Some(w) => solve_k_margin_parallel(&instance, k, w),
        None => solve_k_margin(&instance, k),
    };
    let outcome = match result {
        Ok(outcome) => outcome,
        Err(Error::NoPerfectMatching) => {
            let mut report = no_perfect_matching("margin");
            report.timing_ms = elapsed_ms(start);
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    let mut report = SolveReport::new("margin", if outcome.is_found() { Outcome::Found } else { Outcome::NotFound });
    report.branches = Some(outcome.branches());
    report.timing_ms = elapsed_ms(start);
    if let KMarginOutcome::Found { assignment, loads, levels, certificate, certified_margin_bound, .. } = &outcome {
        report.assignment = Some(assignment.to_named_pairs(&instance));
        report.levels = Some(named_levels(&instance, levels));
        report.certificate = Some(CertificateJson::new(&instance, certificate));
        report.certified_margin_bound = Some(*certified_margin_bound);
        report.loads = Some(
            loads
                .iter()
                .map(|(e, load)| {
                    let (a, b) = instance.edge(e);
                    LoadJson {
                        agent: instance.agent_name(a).into(),
                        object: instance.object_name(b).into(),
                        load,
                    }
                })
                .collect(),
        );
        if args.verify {
            report.verification = Some(verify_assignment(&instance, assignment, certificate, k as i64));
        }
    }
    Ok(report)
}

pub fn cmd_housing(args: &HousingArgs) -> anyhow::Result<SolveReport> {
    let market =
        parse_market(&read(&args.market)?).with_context(|| format!("invalid market {}", args.market.display()))?;
    let start = Instant::now();
    let solved = solve_housing(&market)?;
    let mut report = SolveReport::from_outcome("housing", &solved.instance, &solved.outcome, None);
    report.assignment = None;
    report.timing_ms = elapsed_ms(start);
    if let Some(allocation) = &solved.allocation {
        report.cycles = Some(
            allocation
                .cycles()
                .iter()
                .map(|c| c.iter().map(|&a| market.agent_name(a).to_string()).collect())
                .collect(),
        );
    }
    if args.verify {
        if let (Some(m), Some(alpha)) = (solved.outcome.assignment(), solved.outcome.certificate()) {
            report.verification = Some(verify_assignment(&solved.instance, m, alpha, 0));
        }
    }
    Ok(report)
}

pub fn cmd_gen(args: &GenArgs) -> anyhow::Result<String> {
    let style: PrefStyle = args.pref_style.parse()?;
    let instance = generate(&GenConfig {
        agents: args.agents,
        objects: args.objects.unwrap_or(args.agents),
        density: args.density,
        style,
        seed: args.seed,
    })?;
    Ok(instance.to_json())
}

pub fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<SolveReport> {
    let instance = load_instance(&args.instance)?;
    let m = load_matching(&args.matching, &instance)?;
    let start = Instant::now();
    let mut report = match args.penalty {
        None if m.is_perfect() => {
            let margin = unpopularity_margin(&instance, &m)?;
            let mut report = SolveReport::new("verify", if margin.margin == 0 { Outcome::Found } else { Outcome::NotFound });
            report.set_margin(&instance, &margin);
            report
        }
        penalty => {
            // Against all matchings: the margin of the extended matching in
            // the penalty reduction is the penalty-weighted margin.
            let kappa = penalty.unwrap_or(1);
            if kappa == 0 {
                bail!("--penalty must be at least 1");
            }
            let (target, map) = reduce_penalty_matching(&instance, kappa)?;
            let extended = map.extend(&instance, &m)?;
            let margin = unpopularity_margin(&target, &extended)?;
            let mut report = SolveReport::new("verify", if margin.margin == 0 { Outcome::Found } else { Outcome::NotFound });
            report.margin = Some(margin.margin);
            report.witness = Some(map.lift(&margin.witness).to_named_pairs(&instance));
            report
        }
    };
    report.assignment = Some(m.to_named_pairs(&instance));
    report.timing_ms = elapsed_ms(start);
    Ok(report)
}

//! `slx`: batch frontend for secure list decoding experiments.
//!
//! Exit codes: 0 success, 2 invalid input, 3 enumeration budget exceeded,
//! 4 rate hypothesis violated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};
use slx_core::codes::ListCode;
use slx_core::info::{self, InfoContext};
use slx_core::protocols::{self, CheatStrategy};
use slx_core::random_coding::{self, BuildOptions, ReportLevel};
use slx_core::region::{self, Corollary, RateRegion, RegionScalars};
use slx_core::security::{self, Budget, SearchOptions};
use slx_core::{Channel, Distribution, Error};

#[derive(Parser)]
#[command(name = "slx", version, about = "Secure list decoding over discrete memoryless channels")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print JSON instead of text.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Capacity, H0 and P_max of a channel.
    Capacity(CapacityArgs),
    /// κ curve and rate-region boundary as CSV.
    Region(RegionArgs),
    /// Random-coding construction with expurgation.
    Build(BuildArgs),
    /// Sample a threshold code without expurgation.
    Sample(SampleArgs),
    /// Security parameters of a code.
    Eval(EvalArgs),
    /// Bit commitment runs.
    Commit(CommitArgs),
    /// Anonymous auction runs.
    Auction(AuctionArgs),
}

#[derive(Args)]
struct ChannelArg {
    /// Channel JSON file, or `bsc:P`, `z:P`, `noiseless:K`.
    #[arg(long)]
    channel: String,
}

#[derive(Args)]
struct CapacityArgs {
    #[command(flatten)]
    ch: ChannelArg,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    ch: ChannelArg,
    #[arg(long, default_value_t = 128)]
    grid: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// CSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    #[command(flatten)]
    ch: ChannelArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r1: f64,
    #[arg(long)]
    r2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input prior as a JSON list (default: uniform).
    #[arg(long)]
    prior: Option<String>,
    /// Code destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    rates: RateArgs,
    #[arg(long, default_value_t = 16)]
    attempts: usize,
    /// Only ε_A and δ_B of the final code.
    #[arg(long)]
    basic: bool,
    #[arg(long, default_value_t = random_coding::SCORE_TRIALS)]
    trials: u64,
    /// Write the construction report JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    rates: RateArgs,
}

#[derive(Args)]
struct CodeArgs {
    #[command(flatten)]
    ch: ChannelArg,
    #[arg(long)]
    code: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    io: CodeArgs,
    /// Require exhaustive evaluation (exit 3 if over budget).
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Monte-Carlo evaluation.
    #[arg(long)]
    mc: bool,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Random restarts of the δ_D search.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    /// Also cross-check against simulated protocol events.
    #[arg(long)]
    crosscheck: bool,
    /// Write the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CommitArgs {
    #[command(flatten)]
    io: CodeArgs,
    /// Message length in bits; the code must have 2^t messages.
    #[arg(long)]
    t: u32,
    #[arg(long, default_value_t = 0)]
    bit: u8,
    /// Number of runs.
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long)]
    hash_seed: Option<u64>,
    /// Exact hiding/binding analysis.
    #[arg(long)]
    security: bool,
    /// Transcripts as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuctionArgs {
    #[command(flatten)]
    io: CodeArgs,
    /// Bids as `ID:PRICE,ID:PRICE,...` (IDs start at 1).
    #[arg(long)]
    bids: String,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// One bidder sends the δ_D-attaining block instead of its codeword.
    #[arg(long)]
    collude: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::BudgetExceeded { .. } => 3,
            Error::HypothesisViolated(_) => 4,
            _ => 2,
        };
        Self { code, msg: e.to_string() }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

type Outcome = Result<(String, Value), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.cmd {
        Cmd::Capacity(a) => cmd_capacity(a),
        Cmd::Region(a) => cmd_region(a),
        Cmd::Build(a) => cmd_build(a),
        Cmd::Sample(a) => cmd_sample(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Commit(a) => cmd_commit(a),
        Cmd::Auction(a) => cmd_auction(a),
    };
    match result {
        Ok((text, value)) => {
            let body = match cli.format {
                Format::Text => text,
                Format::Json => serde_json::to_string_pretty(&value).expect("json") + "\n",
            };
            // a closed pipe (e.g. `| head`) is not an error for a batch tool
            let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), body.as_bytes());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

#[derive(Deserialize)]
struct ChannelFile {
    #[serde(default)]
    input: Option<Vec<String>>,
    #[serde(default)]
    output: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn load_channel(spec: &str) -> Result<Channel, Failure> {
    let parse = |v: &str| v.parse::<f64>().map_err(|_| invalid(format!("bad channel parameter {v:?}")));
    if let Some((kind, arg)) = spec.split_once(':') {
        match kind {
            "bsc" => return Ok(Channel::bsc(parse(arg)?)?),
            "z" => return Ok(Channel::z_channel(parse(arg)?)?),
            "noiseless" => {
                let k = arg.parse().map_err(|_| invalid(format!("bad alphabet size {arg:?}")))?;
                return Ok(Channel::noiseless(k)?);
            }
            _ => {}
        }
    }
    let text = read(Path::new(spec))?;
    let file: ChannelFile = serde_json::from_str(&text).map_err(|e| invalid(format!("{spec}: {e}")))?;
    let ch = Channel::new(file.rows)?;
    if let Some(inp) = &file.input {
        if inp.len() != ch.input_size() {
            return Err(invalid(format!("{spec}: {} input labels for {} rows", inp.len(), ch.input_size())));
        }
    }
    if let Some(out) = &file.output {
        if out.len() != ch.output_size() {
            return Err(invalid(format!("{spec}: {} output labels for {} columns", out.len(), ch.output_size())));
        }
    }
    Ok(ch)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write(path: &Path, data: &str) -> Result<(), Failure> {
    std::fs::write(path, data).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_code(path: &Path) -> Result<ListCode, Failure> {
    Ok(ListCode::from_json(&read(path)?)?)
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or_else(|| json!(v.to_string()))
}

fn cmd_capacity(a: &CapacityArgs) -> Outcome {
    let w = load_channel(&a.ch.channel)?;
    let cap = info::capacity(&w, a.tol)?;
    let (h0, p_max) = region::h0_and_pmax(&w, a.tol)?;
    let ctx = InfoContext::new(w.clone(), p_max.clone())?;
    let zeta1 = ctx.zeta1();
    let v = ctx.v_max().unwrap_or(f64::INFINITY);
    let mut t = String::new();
    writeln!(t, "# slx capacity channel={} tol={}", a.ch.channel, a.tol).ok();
    writeln!(t, "C = {:.6}", cap.capacity).ok();
    writeln!(t, "H0 = {h0:.6}").ok();
    writeln!(t, "P_max = {:?}", p_max.probs()).ok();
    writeln!(t, "zeta1(P_max) = {zeta1:.6}").ok();
    writeln!(t, "V(W,P_max) = {v:.6}").ok();
    let value = json!({
        "channel": a.ch.channel,
        "capacity": num(cap.capacity),
        "capacity_prior": cap.prior.probs(),
        "iterations": cap.iterations,
        "h0": num(h0),
        "p_max": p_max.probs(),
        "zeta1": num(zeta1),
        "v": num(v),
    });
    Ok((t, value))
}

fn cmd_region(a: &RegionArgs) -> Outcome {
    if a.grid == 0 {
        return Err(invalid("grid must be positive"));
    }
    let w = load_channel(&a.ch.channel)?;
    let region = RateRegion::compute(&w, a.grid, a.tol)?;
    let csv = region.to_csv();
    let scalars = RegionScalars::compute(&w, a.tol)?;
    let mut flags = serde_json::Map::new();
    for (name, which) in [("cor46", Corollary::Cor46), ("cor56", Corollary::Cor56), ("cor66", Corollary::Cor66)] {
        let c = region::corollary_region(&w, which, a.grid.min(64), a.tol)?;
        flags.insert(name.into(), json!({ "applies": c.applies, "tight_up_to": num(c.tight_up_to) }));
    }
    let mut t = String::new();
    writeln!(t, "# slx region channel={} grid={} tol={}", a.ch.channel, a.grid, a.tol).ok();
    writeln!(t, "log|X| = {:.6}  C = {:.6}  H0 = {:.6}", scalars.log_x, scalars.capacity, scalars.h0).ok();
    for (k, v) in &flags {
        writeln!(t, "{k}: applies={}", v["applies"]).ok();
    }
    match &a.out {
        Some(p) => {
            write(p, &csv)?;
            writeln!(t, "wrote {} rows to {}", region.grid(), p.display()).ok();
        }
        None => t.push_str(&csv),
    }
    let value = json!({
        "channel": a.ch.channel,
        "grid": a.grid,
        "log_x": num(scalars.log_x),
        "capacity": num(scalars.capacity),
        "h0": num(scalars.h0),
        "p_max": scalars.p_max.probs(),
        "corollaries": flags,
        "kappa": region.kappa_curve.iter().map(|p| json!([num(p.r1), num(p.kappa)])).collect::<Vec<_>>(),
    });
    Ok((t, value))
}

fn rate_context(r: &RateArgs) -> Result<InfoContext, Failure> {
    let w = load_channel(&r.ch.channel)?;
    let prior = match &r.prior {
        Some(s) => {
            let v: Vec<f64> = serde_json::from_str(s).map_err(|e| invalid(format!("--prior: {e}")))?;
            Distribution::new(v)?
        }
        None => Distribution::uniform(w.input_size()),
    };
    Ok(InfoContext::new(w, prior)?)
}

fn echo(cmd: &str, r: &RateArgs) -> String {
    format!(
        "# slx {cmd} channel={} n={} r1={} r2={} seed={} prior={}\n",
        r.ch.channel,
        r.n,
        r.r1,
        r.r2,
        r.seed,
        r.prior.as_deref().unwrap_or("uniform")
    )
}

fn cmd_build(a: &BuildArgs) -> Outcome {
    let r = &a.rates;
    let ctx = rate_context(r)?;
    let opts = BuildOptions {
        attempts: a.attempts,
        report: if a.basic { ReportLevel::Basic } else { ReportLevel::Full },
        budget: Budget::from_env(),
        trials: a.trials,
        search: SearchOptions { seed: r.seed, ..Default::default() },
    };
    let (code, rep) = random_coding::build_secure_code(&ctx, r.n, r.r1, r.r2, r.seed, &opts)?;
    if let Some(p) = &r.out {
        write(p, &code.to_json())?;
    }
    if let Some(p) = &a.report {
        write(p, &rep.to_json())?;
    }
    let mut t = echo("build", r);
    writeln!(t, "attempts={} best={}", a.attempts, rep.best_attempt).ok();
    writeln!(t, "M={} L={} kept={} eps4={:.6}", rep.m, rep.l, rep.expurgated_m, rep.eps4).ok();
    writeln!(
        t,
        "avg eps_A={:.6} avg eta_A={:.4} avg eta_C={:.4} (before expurgation)",
        rep.avg_eps_a, rep.avg_eta_a, rep.avg_eta_c
    )
    .ok();
    writeln!(t, "kept messages with an eta flag: {}", rep.kept_with_eta_violation).ok();
    writeln!(t, "post-expurgation avg eps_A={:.6} delta_B={:.6}", rep.post_avg_eps_a, rep.post_delta_b).ok();
    if let Some(s) = &rep.security {
        writeln!(t, "{}", security_line(s)).ok();
    }
    let l8 = &rep.lemma8;
    writeln!(t, "dishonest-sender bound: {} (vacuous below n={:.1})", l8.value, l8.threshold_n).ok();
    if let Some(w) = &rep.warning {
        writeln!(t, "warning: {w}").ok();
    }
    let value = serde_json::to_value(&rep).expect("json");
    Ok((t, value))
}

fn cmd_sample(a: &SampleArgs) -> Outcome {
    let r = &a.rates;
    let ctx = rate_context(r)?;
    let sched = random_coding::schedule(&ctx, r.r1, r.r2)?;
    let code = random_coding::sample_code(&ctx, r.n, &sched, r.seed)?;
    let json = code.to_json();
    let mut t = echo("sample", r);
    writeln!(t, "M={} L={} r3={:.6}", code.m(), code.l(), sched.r3).ok();
    match &r.out {
        Some(p) => write(p, &json)?,
        None => t.push_str(&json),
    }
    Ok((t, json!({ "M": code.m(), "L": code.l(), "schedule": sched })))
}

fn security_line(s: &slx_core::SecurityReport) -> String {
    format!(
        "eps_A={:.6} delta_B={:.6} delta_C={:.6} delta_D={:.6}{}",
        s.eps_a,
        s.delta_b,
        s.delta_c,
        s.delta_d,
        if s.delta_d_is_lower_bound { " (delta_D: search lower bound)" } else { "" }
    )
}

fn cmd_eval(a: &EvalArgs) -> Outcome {
    let w = load_channel(&a.io.ch.channel)?;
    let code = load_code(&a.io.code)?;
    code.check_channel(&w)?;
    let budget = Budget::from_env();
    let search = SearchOptions { restarts: a.restarts, seed: a.io.seed, trials: a.trials.min(4000), ..Default::default() };
    let report = if a.mc {
        security::evaluate_monte_carlo(&code, &w, a.trials, a.io.seed, search, &budget)?
    } else if a.exact {
        security::evaluate_exact(&code, &w, &budget).map_err(|e| {
            let mut f = Failure::from(e);
            if f.code == 3 {
                f.msg.push_str("; rerun with --mc for Monte-Carlo estimates");
            }
            f
        })?
    } else if budget.allows_delta_d(&code, &w) && security::delta_c_fits(&code, &w, &budget) {
        security::evaluate_exact(&code, &w, &budget)?
    } else if security::delta_c_fits(&code, &w, &budget) {
        security::evaluate_exact_with_search(&code, &w, search, &budget)?
    } else {
        security::evaluate_monte_carlo(&code, &w, a.trials, a.io.seed, search, &budget)?
    };
    let mut t = String::new();
    writeln!(
        t,
        "# slx eval channel={} code={} seed={} mode={}",
        a.io.ch.channel,
        a.io.code.display(),
        a.io.seed,
        if a.mc { "mc" } else if a.exact { "exact" } else { "auto" }
    )
    .ok();
    writeln!(t, "n={} M={} L={}", code.n(), code.m(), code.l()).ok();
    writeln!(t, "{}", security_line(&report)).ok();
    if let Some(ci) = report.ci95 {
        writeln!(t, "95% half-widths: eps_A {:.4} delta_B {:.4} delta_C {:.4}", ci[0], ci[1], ci[2]).ok();
    }
    let mut value = json!({ "report": report });
    if a.crosscheck {
        let c = security::crosscheck_intuitive(&code, &w, a.trials, a.io.seed, &budget)?;
        for e in &c.entries {
            writeln!(
                t,
                "crosscheck {}: exact {:.6} simulated {:.6} (sigma {:.2e}) {}",
                e.condition,
                e.exact,
                e.estimate,
                e.sigma,
                if e.within { "ok" } else { "OUTSIDE 3 sigma" }
            )
            .ok();
        }
        value["crosscheck"] = serde_json::to_value(&c).expect("json");
    }
    if let Some(p) = &a.out {
        write(p, &serde_json::to_string_pretty(&value).expect("json"))?;
    }
    Ok((t, value))
}

fn write_lines(path: &Option<PathBuf>, lines: &[String]) -> Result<(), Failure> {
    if let Some(p) = path {
        let mut s = lines.join("\n");
        s.push('\n');
        write(p, &s)?;
    }
    Ok(())
}

fn cmd_commit(a: &CommitArgs) -> Outcome {
    let w = load_channel(&a.io.ch.channel)?;
    let code = load_code(&a.io.code)?;
    if a.bit > 1 {
        return Err(invalid("--bit must be 0 or 1"));
    }
    if a.trials == 0 {
        return Err(Error::InsufficientTrials.into());
    }
    let hash_seed = a.hash_seed.unwrap_or(a.io.seed);
    let hash = protocols::make_hash(a.t, hash_seed)?;
    let mut lines = Vec::new();
    let mut accepted = 0u64;
    for run in 0..a.trials {
        let tr = protocols::commit(a.bit, &code, &hash, &w, slx_core::rng::derive_seed(a.io.seed, &[run]))?;
        accepted += tr.accepted as u64;
        lines.push(tr.to_json_line());
    }
    write_lines(&a.out, &lines)?;
    let rate = accepted as f64 / a.trials as f64;
    let mut t = String::new();
    writeln!(
        t,
        "# slx commit channel={} code={} t={} bit={} seed={} hash_seed={} trials={}",
        a.io.ch.channel,
        a.io.code.display(),
        a.t,
        a.bit,
        a.io.seed,
        hash_seed,
        a.trials
    )
    .ok();
    writeln!(t, "hash a={:#b}", hash.a()).ok();
    writeln!(t, "accepted {accepted}/{} ({rate:.4})", a.trials).ok();
    let mut value = json!({ "hash_a": hash.a(), "accepted": accepted, "trials": a.trials, "accept_rate": num(rate) });
    if a.security {
        let s = protocols::bc_security(&code, &hash, &w, &Budget::from_env())?;
        writeln!(
            t,
            "I(f(M);Y)={:.6} H2(M|Y)={:.6} bound={:.6} alice_cheat={:.6}",
            s.bob_info, s.h2, s.bound, s.alice_cheat
        )
        .ok();
        value["security"] = serde_json::to_value(&s).expect("json");
    }
    if lines.len() == 1 && a.out.is_none() {
        t.push_str(&lines[0]);
        t.push('\n');
    }
    Ok((t, value))
}

fn parse_bids(s: &str) -> Result<Vec<(usize, u64)>, Failure> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (id, price) = p.split_once(':').ok_or_else(|| invalid(format!("bid {p:?} is not ID:PRICE")))?;
            let id = id.trim().parse().map_err(|_| invalid(format!("bad player ID in {p:?}")))?;
            let price = price.trim().parse().map_err(|_| invalid(format!("bad price in {p:?}")))?;
            Ok((id, price))
        })
        .collect()
}

fn cmd_auction(a: &AuctionArgs) -> Outcome {
    let w = load_channel(&a.io.ch.channel)?;
    let code = load_code(&a.io.code)?;
    let mut bids = parse_bids(&a.bids)?;
    if a.trials == 0 {
        return Err(Error::InsufficientTrials.into());
    }
    let budget = Budget::from_env();
    let cheat = if a.collude {
        let s = CheatStrategy::from_delta_d(&code, &w, &budget)?
            .ok_or_else(|| invalid("no input block keeps any message listed with probability >= 1/2"))?;
        if !bids.iter().any(|b| b.0 == s.cheater) {
            let top = bids.iter().map(|b| b.1).max().unwrap_or(0);
            bids.push((s.cheater, top.saturating_add(1)));
        }
        Some(s)
    } else {
        None
    };
    let mut lines = Vec::new();
    let (mut verified, mut cheats) = (0u64, 0u64);
    let mut last = None;
    for run in 0..a.trials {
        let tr = protocols::run_auction(&code, &w, &bids, slx_core::rng::derive_seed(a.io.seed, &[run]), cheat.as_ref())?;
        verified += tr.verified as u64;
        cheats += tr.cheat.as_ref().is_some_and(|c| c.success) as u64;
        lines.push(tr.to_json_line());
        last = Some(tr);
    }
    write_lines(&a.out, &lines)?;
    let last = last.expect("at least one run");
    let mut t = String::new();
    writeln!(
        t,
        "# slx auction channel={} code={} bids={} seed={} trials={} collude={}",
        a.io.ch.channel,
        a.io.code.display(),
        a.bids,
        a.io.seed,
        a.trials,
        a.collude
    )
    .ok();
    writeln!(t, "winner={} price={}", last.winner, last.winning_price).ok();
    writeln!(t, "verified {verified}/{}", a.trials).ok();
    let mut value = json!({ "winner": last.winner, "winning_price": last.winning_price, "verified": verified, "trials": a.trials });
    if let Some(c) = &cheat {
        writeln!(t, "collusion cheater={} colluder={} succeeded {cheats}/{}", c.cheater, c.colluder, a.trials).ok();
        value["collusion"] = json!({ "cheater": c.cheater, "colluder": c.colluder, "x_block": c.x_block, "successes": cheats });
    }
    Ok((t, value))
}

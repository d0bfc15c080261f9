use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lcmd_core::harness::{self, ExperimentConfig, RunRequest, Side, Suite, VerifyConfig};
use lcmd_core::scheduling::PaymentRule;
use lcmd_core::{Family, InstanceSpec};

/// Local computation mechanisms: generate instances, answer local queries,
/// check invariants and measure probe counts.
#[derive(Parser)]
#[command(name = "lcmd", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write an instance file.
    Gen {
        #[command(flatten)]
        inst: InstanceArgs,
        /// Write the generated incidence lists as explicit edges.
        #[arg(long)]
        materialize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer local queries (JSON lines) or print the global solution.
    Run(RunArgs),
    /// One local query on an instance, as JSON.
    Query {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long)]
        id: u32,
        #[arg(long, value_enum, default_value_t = SideArg::Left)]
        side: SideArg,
        #[arg(long)]
        rounds: Option<u32>,
    },
    /// Run an invariant suite; exit 1 on any violation.
    Verify(VerifyArgs),
    /// Probe counts of sampled local queries over an n grid.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// matching, scheduling, auction, rsd, or a family name.
    target: Option<String>,
    /// std|res for scheduling, uduv|udubv|ksmb for auctions.
    #[arg(long)]
    mode: Option<String>,
    /// Instance JSON; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated capacities (scheduling) or values (auctions).
    #[arg(long)]
    bids: Option<String>,
    /// JSON array of reported item sets, one per buyer.
    #[arg(long)]
    sets: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long)]
    query_man: Option<u32>,
    #[arg(long)]
    query_job: Option<u32>,
    #[arg(long)]
    query_buyer: Option<u32>,
    #[arg(long)]
    query_item: Option<u32>,
    #[arg(long)]
    query_agent: Option<u32>,
    #[arg(long)]
    all: bool,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    pay_machine: Option<u32>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum, default_value_t = RuleArg::HeightSum)]
    rule: RuleArg,
    #[arg(long)]
    audit: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// matching, scheduling, auctions, rsd or majorization.
    suite: String,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    first_seed: u64,
    #[arg(long)]
    rounds: Option<u32>,
    /// Report CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-violation CSV; rows go to stderr when absent.
    #[arg(long)]
    violations: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    family: String,
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated n grid.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    first_seed: u64,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    /// Record per-query wall time.
    #[arg(long)]
    timing: bool,
    /// Record CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary text; stderr when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Expected,
    Sampled,
    Rerun,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    HeightSum,
    LoadCritical,
}

impl From<RuleArg> for PaymentRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::HeightSum => PaymentRule::HeightSum,
            RuleArg::LoadCritical => PaymentRule::LoadCritical,
        }
    }
}

fn resolve_family(target: &str, mode: Option<&str>) -> anyhow::Result<Family> {
    let named = match (target, mode) {
        ("scheduling", m) => match m.unwrap_or("std") {
            "std" => "scheduling-std",
            "res" => "scheduling-res",
            other => bail!("scheduling mode must be std or res, got {other:?}"),
        },
        ("auction" | "auctions", m) => m.unwrap_or("uduv"),
        ("rsd", _) => "housing",
        (t, _) => t,
    };
    Ok(named.parse()?)
}

fn parse_list<T: std::str::FromStr>(csv: &str) -> anyhow::Result<Vec<T>> {
    csv.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("bad list entry {x:?}"))
        })
        .collect()
}

fn build_spec(a: &InstanceArgs) -> anyhow::Result<InstanceSpec> {
    let sets: Option<Vec<Vec<u32>>> = match &a.sets {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str(&text).context("sets file must be a JSON array of arrays")?)
        }
        None => None,
    };
    let family = a
        .target
        .as_deref()
        .map(|t| resolve_family(t, a.mode.as_deref()))
        .transpose()?;
    let mut spec = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let spec = InstanceSpec::from_json(&text)?;
            if family.is_some_and(|f| f != spec.family) {
                bail!("config describes {}, not {}", spec.family, family.unwrap());
            }
            spec
        }
        None => {
            let Some(family) = family else {
                bail!("give a family or --config");
            };
            let Some(n) = a.n.or(sets.as_ref().map(Vec::len)) else {
                bail!("--n is required without --config");
            };
            let mut s = InstanceSpec::new(family, 1, n, a.m.unwrap_or(n), 1);
            s.k = harness::default_k(family);
            s.d = harness::default_d(family);
            s
        }
    };
    if let Some(x) = a.seed {
        spec.seed = x;
    }
    if let Some(x) = a.n {
        spec.n = x;
    }
    if let Some(x) = a.m {
        spec.m = x;
    }
    if let Some(x) = a.k {
        spec.k = x;
    }
    if let Some(x) = a.d {
        spec.d = x;
    }
    if let Some(b) = &a.bids {
        if spec.family.is_scheduling() {
            spec.bids = Some(parse_list(b)?);
        } else {
            spec.valuations = Some(parse_list(b)?);
        }
    }
    if let Some(sets) = &sets {
        spec.n = sets.len();
        spec.explicit_edges = Some(
            sets.iter()
                .enumerate()
                .flat_map(|(i, s)| s.iter().map(move |&j| [i as u32, j]))
                .collect(),
        );
    }
    spec.validate()?;
    Ok(spec)
}

fn emit(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Cmd) -> anyhow::Result<ExitCode> {
    match cmd {
        Cmd::Gen {
            inst,
            materialize,
            out,
        } => {
            let mut text = harness::cmd_gen(&build_spec(&inst)?, materialize)?;
            text.push('\n');
            emit(out.as_ref(), &text)?;
        }
        Cmd::Run(r) => {
            let spec = build_spec(&r.inst)?;
            let query = r
                .query_man
                .or(r.query_job)
                .or(r.query_buyer)
                .or(r.query_agent);
            let req = RunRequest {
                query,
                query_right: r.query_item,
                all: r.all,
                rounds: r.rounds,
                pay_machine: r.pay_machine,
                scheme: r.scheme.map(|s| {
                    match s {
                        SchemeArg::Expected => "expected",
                        SchemeArg::Sampled => "sampled",
                        SchemeArg::Rerun => "rerun",
                    }
                    .to_string()
                }),
                rule: r.rule.into(),
                audit: r.audit,
            };
            for v in harness::cmd_run(&spec, &req)? {
                println!("{v}");
            }
        }
        Cmd::Query {
            inst,
            id,
            side,
            rounds,
        } => {
            let side = match side {
                SideArg::Left => Side::Left,
                SideArg::Right => Side::Right,
            };
            let v = harness::cmd_query(&build_spec(&inst)?, id, side, rounds)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Cmd::Verify(v) => {
            let suite: Suite = v.suite.parse()?;
            let cfg = VerifyConfig {
                suite,
                n: v.n,
                m: v.m,
                k: v.k,
                d: v.d,
                seeds: v.seeds,
                first_seed: v.first_seed,
                rounds: v.rounds,
            };
            let report = harness::verify(&cfg)?;
            emit(v.out.as_ref(), &report.csv())?;
            match &v.violations {
                Some(p) => fs::write(p, report.failures_csv())
                    .with_context(|| format!("writing {}", p.display()))?,
                None => eprint!("{}", report.failures_csv()),
            }
            if !report.clean() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Bench(b) => {
            let family = resolve_family(&b.family, b.mode.as_deref())?;
            let mut cfg = ExperimentConfig::new(family, b.n);
            cfg.seeds = b.seeds;
            cfg.first_seed = b.first_seed;
            cfg.queries = b.queries;
            if let Some(k) = b.k {
                cfg.k = k;
            }
            if let Some(d) = b.d {
                cfg.d = d;
            }
            cfg.rounds = b.rounds;
            cfg.eps = b.eps;
            cfg.timing = b.timing;
            let records = harness::bench(&cfg)?;
            let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
            let text = format!(
                "# lcmd bench {family} generated {stamp}\n{}",
                harness::bench_csv(&records)
            );
            emit(b.out.as_ref(), &text)?;
            let summary = harness::summary_text(&records);
            match &b.summary {
                Some(p) => {
                    fs::write(p, summary).with_context(|| format!("writing {}", p.display()))?
                }
                None => eprint!("{summary}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("lcmd: {e:#}");
            ExitCode::from(2)
        }
    }
}

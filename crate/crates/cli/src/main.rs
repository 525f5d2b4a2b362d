use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use ramsey_core::bounds::{self, PairScope};
use ramsey_core::coloring::load_coloring;
use ramsey_core::finders::{self, BipartiteResult, FinderResult, Predicate, Strategy};
use ramsey_core::pigeonhole::php_find;
use ramsey_core::privacy::{
    self, AllZero, ComparisonTable, IppInstance, Learner, LeftmostBranch, Parity, TableLearner, DEFAULT_THRESHOLD,
};
use ramsey_core::types::{enumerate_types, tau, ChainType, SubsetType};
use ramsey_core::{Coloring, Scope, SubtreeEmbedding, TowerValue, SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "ramsey",
    version,
    about = "Monochromatic subtrees of colored binary trees, and the privacy lab"
)]
struct Cli {
    /// Seed for every randomized command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the parallel searches (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    /// Per-trial table; only `privacy reduce` supports it.
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical types of m-subsets.
    #[command(subcommand)]
    Types(TypesCmd),
    /// Create or summarize coloring files.
    #[command(subcommand)]
    Colorings(ColoringsCmd),
    /// Monochromatic subtree of a vertex coloring with per-color depth budgets.
    Php {
        #[arg(long)]
        coloring: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<u32>,
    },
    /// Run a subtree finder.
    Find {
        #[arg(long)]
        coloring: PathBuf,
        #[arg(long, value_enum)]
        target: Target,
        #[arg(long, value_enum, default_value_t = StrategyArg::Constructive)]
        strategy: StrategyArg,
        /// Predicate for the oracle; defaults to monochromatic for pairs and per-type for the rest.
        #[arg(long, value_enum)]
        predicate: Option<PredicateArg>,
    },
    /// Evaluate a Ramsey or privacy bound.
    Bounds(BoundsArgs),
    #[command(subcommand)]
    Privacy(PrivacyCmd),
    /// Re-check a subtree against a coloring.
    Verify {
        /// A finder result, a bipartite result, or a bare embedding.
        #[arg(long)]
        embedding: PathBuf,
        #[arg(long)]
        coloring: PathBuf,
        /// Recompute the witness for this predicate instead of using the file's.
        #[arg(long, value_enum)]
        predicate: Option<PredicateArg>,
    },
}

#[derive(Subcommand)]
enum TypesCmd {
    Enumerate {
        #[arg(long)]
        m: usize,
    },
    Count {
        #[arg(long)]
        m: usize,
    },
}

#[derive(Subcommand)]
enum ColoringsCmd {
    Generate {
        #[arg(long, default_value = "random")]
        generator: String,
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        #[arg(long, default_value_t = 2)]
        colors: u32,
        /// all, chains, chains-and-antichains, type:<t>, types:<t>,<t>, chain-type:<bits>, cross:<l>,<r>
        #[arg(long, default_value = "all")]
        scope: String,
        /// Color used by the constant generator.
        #[arg(long)]
        color: Option<u32>,
        /// Write every assignment out instead of the generator reference.
        #[arg(long)]
        tabulate: bool,
    },
    Inspect {
        #[arg(long)]
        coloring: PathBuf,
        /// Stop counting subsets after this many.
        #[arg(long, default_value_t = 1_000_000)]
        max_subsets: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    PairsComparable,
    PairsIncomparable,
    Chains,
    Msubsets,
    Bipartite,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Constructive,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredicateArg {
    Monochromatic,
    TypeMonochromatic,
}

impl From<PredicateArg> for Predicate {
    fn from(p: PredicateArg) -> Self {
        match p {
            PredicateArg::Monochromatic => Predicate::Monochromatic,
            PredicateArg::TypeMonochromatic => Predicate::TypeMonochromatic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Pairs,
    Chains,
    ChainsRecursive,
    Alpha,
    SubtreeCount,
    Privacy,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairScopeArg {
    All,
    Left,
    Right,
    Incomparable,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
    /// Host depth, in decimal; for `privacy` it may be arbitrarily large.
    #[arg(long)]
    n: Option<String>,
    /// For `privacy`: take the host depth to be twr(h, n).
    #[arg(long)]
    tower_height: Option<u32>,
    #[arg(long, value_enum, default_value_t = PairScopeArg::All)]
    scope: PairScopeArg,
    /// For `chains`: only one chain type is colored.
    #[arg(long)]
    single_type: bool,
    /// For `subtree-count`: count level choices over all n+1 host levels.
    #[arg(long)]
    levels: bool,
}

#[derive(Subcommand)]
enum PrivacyCmd {
    /// Turn a learner into an interior-point solver and measure it.
    Reduce {
        #[arg(long)]
        depth: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        points: Vec<u32>,
        /// leftmost, all-zero, parity or table:<file>
        #[arg(long, default_value = "leftmost")]
        learner: String,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Test whether a learner is comparison-based on a whole depth-`depth` tree.
    CheckCb {
        #[arg(long, default_value = "leftmost")]
        learner: String,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.01)]
        gamma: f64,
    },
    /// Color (m+2)-chains by the learner's rounded predictions.
    BuildColoring {
        #[arg(long, default_value = "leftmost")]
        learner: String,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        tabulate: bool,
    },
}

/// A malformed request, reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// What a command produced; `ok == false` means a domain-level failure such as a failed verification.
struct Report {
    doc: Value,
    csv: Option<String>,
    ok: bool,
}

impl Report {
    fn json(doc: Value) -> Self {
        Self {
            doc,
            csv: None,
            ok: true,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|r| emit(&cli, r)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Usage>() { 2 } else { 1 })
        }
    }
}

fn emit(cli: &Cli, r: Report) -> Result<bool> {
    let text = match (cli.format, r.csv) {
        (Format::Csv, Some(csv)) => csv,
        (Format::Csv, None) => return Err(usage("this command has no CSV output")),
        (Format::Json, _) => serde_json::to_string_pretty(&versioned(r.doc))? + "\n",
    };
    match &cli.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(r.ok)
}

fn versioned(doc: Value) -> Value {
    let mut out = Map::new();
    out.insert("schema_version".into(), json!(SCHEMA_VERSION));
    match doc {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("result".into(), other);
        }
    }
    Value::Object(out)
}

fn run(cli: &Cli) -> Result<Report> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match &cli.command {
        Command::Types(cmd) => types(cmd),
        Command::Colorings(cmd) => colorings(cmd, cli.seed),
        Command::Php { coloring, budgets } => {
            let c = read_coloring(coloring)?;
            let (color, embedding) = php_find(c.host(), &c, budgets)?;
            Ok(Report::json(json!({ "color": color, "embedding": embedding })))
        }
        Command::Find {
            coloring,
            target,
            strategy,
            predicate,
        } => find(&read_coloring(coloring)?, *target, *strategy, *predicate),
        Command::Bounds(args) => bounds_cmd(args),
        Command::Privacy(cmd) => privacy_cmd(cmd, cli.seed),
        Command::Verify {
            embedding,
            coloring,
            predicate,
        } => verify(&read_json(embedding)?, &read_coloring(coloring)?, *predicate),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_coloring(path: &Path) -> Result<Coloring> {
    Ok(load_coloring(path)?)
}

fn types(cmd: &TypesCmd) -> Result<Report> {
    Ok(Report::json(match *cmd {
        TypesCmd::Enumerate { m } => {
            let all: Vec<String> = enumerate_types(m).iter().map(|t| t.canonical().to_string()).collect();
            json!({ "m": m, "count": all.len(), "types": all })
        }
        TypesCmd::Count { m } => json!({ "tau": big_number(&tau(m).to_string()) }),
    }))
}

/// A JSON number when it fits in a u64, otherwise the decimal string.
fn big_number(decimal: &str) -> Value {
    decimal.parse::<u64>().map_or_else(|_| json!(decimal), |n| json!(n))
}

fn parse_scope(s: &str) -> Result<Scope> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let scope = match kind {
        "all" => Scope::All,
        "chains" => Scope::Chains,
        "chains-and-antichains" => Scope::ChainsAndAntichains,
        "type" => Scope::Type(SubsetType::parse(arg)?),
        "types" => Scope::Types {
            types: arg
                .split(',')
                .map(SubsetType::parse)
                .collect::<ramsey_core::Result<_>>()?,
        },
        "chain-type" => Scope::ChainType {
            chain: ChainType::parse(arg)?,
        },
        "cross" => {
            let (l, r) = arg
                .split_once(',')
                .ok_or_else(|| usage("cross scope takes <left>,<right>"))?;
            Scope::Cross {
                left_depth: l.trim().parse().map_err(|_| usage(format!("bad depth {l:?}")))?,
                right_depth: r.trim().parse().map_err(|_| usage(format!("bad depth {r:?}")))?,
            }
        }
        _ => return Err(usage(format!("unknown scope {s:?}"))),
    };
    Ok(scope)
}

fn colorings(cmd: &ColoringsCmd, seed: u64) -> Result<Report> {
    match cmd {
        ColoringsCmd::Generate {
            generator,
            depth,
            arity,
            colors,
            scope,
            color,
            tabulate,
        } => {
            let scope = parse_scope(scope)?;
            let mut params = json!({ "depth": depth, "arity": arity, "colors": colors, "scope": scope });
            if let Some(c) = color {
                params["color"] = json!(c);
            }
            let c = Coloring::from_json(&json!({ "generator": generator, "params": params, "seed": seed }))?;
            let c = if *tabulate { c.tabulate()? } else { c };
            Ok(Report::json(c.to_json()))
        }
        ColoringsCmd::Inspect { coloring, max_subsets } => {
            let c = read_coloring(coloring)?;
            let mut histogram = vec![0u64; c.colors as usize];
            let mut seen = 0usize;
            for s in c.subsets().take(*max_subsets) {
                histogram[c.color_of(&s)? as usize] += 1;
                seen += 1;
            }
            let complete = c.subsets().nth(*max_subsets).is_none();
            let generator = c.generator().map(|(g, s)| json!({ "name": g.name(), "seed": s }));
            Ok(Report::json(json!({
                "depth": c.depth,
                "arity": c.arity,
                "colors": c.colors,
                "scope": c.scope,
                "generator": generator,
                "subsets": seen,
                "complete": complete,
                "histogram": histogram,
            })))
        }
    }
}

fn find(c: &Coloring, target: Target, strategy: StrategyArg, predicate: Option<PredicateArg>) -> Result<Report> {
    if let Target::Bipartite = target {
        let r: BipartiteResult = match strategy {
            StrategyArg::Constructive => finders::find_bipartite(c)?,
            StrategyArg::Oracle => finders::oracle_bipartite(c)?,
        };
        return Ok(Report::json(serde_json::to_value(r)?));
    }
    let r: FinderResult = match strategy {
        StrategyArg::Constructive => match target {
            Target::PairsComparable => finders::find_comparable_pairs(c)?,
            Target::PairsIncomparable => finders::find_incomparable_pairs(c)?,
            Target::Chains => finders::find_chains(c)?,
            Target::Msubsets => finders::find_msubsets(c, Strategy::Constructive)?,
            Target::Bipartite => unreachable!(),
        },
        StrategyArg::Oracle => {
            let p = predicate.map(Predicate::from).unwrap_or(match target {
                Target::PairsComparable | Target::PairsIncomparable => Predicate::Monochromatic,
                _ => Predicate::TypeMonochromatic,
            });
            finders::oracle_best(c, p)?
        }
    };
    Ok(Report::json(serde_json::to_value(r)?))
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("this family needs --{name}")))
}

fn bounds_cmd(a: &BoundsArgs) -> Result<Report> {
    let value: TowerValue = match a.family {
        Family::Pairs => {
            let scope = match a.scope {
                PairScopeArg::All => PairScope::All,
                PairScopeArg::Left => PairScope::Left,
                PairScopeArg::Right => PairScope::Right,
                PairScopeArg::Incomparable => PairScope::Incomparable,
            };
            bounds::bound_pairs(need(a.d, "d")?, need(a.k, "k")?, scope)?
        }
        Family::Chains => bounds::bound_chains(need(a.d, "d")?, m32(a)?, need(a.k, "k")?, a.single_type)?,
        Family::ChainsRecursive => bounds::bound_chains_recursive(need(a.d, "d")?, m32(a)?, need(a.k, "k")?)?,
        Family::Alpha => bounds::alpha(need(a.d, "d")?, need(a.k, "k")?)?,
        Family::SubtreeCount => {
            let n = a.n.as_deref().ok_or_else(|| usage("this family needs --n"))?;
            let n: u64 = n.parse().map_err(|_| usage(format!("bad --n {n:?}")))?;
            let d = need(a.d, "d")?;
            let count = if a.levels {
                bounds::subtree_count_bound_levels(n, d)?
            } else {
                bounds::subtree_count_bound(n, d)?
            };
            TowerValue::Exact(count)
        }
        Family::Privacy => {
            let n = a.n.as_deref().ok_or_else(|| usage("this family needs --n"))?;
            let n: TowerValue =
                serde_json::from_value(json!({ "exact": n })).map_err(|_| usage(format!("bad --n {n:?}")))?;
            let n = match a.tower_height {
                Some(h) => bounds::twr(h, n)?,
                None => n,
            };
            bounds::privacy_depth_guarantee(&n, need(a.m, "m")?)?
        }
    };
    Ok(Report::json(serde_json::to_value(value)?))
}

fn m32(a: &BoundsArgs) -> Result<u32> {
    let m = need(a.m, "m")?;
    u32::try_from(m).map_err(|_| usage("--m is too large"))
}

fn learner(which: &str) -> Result<Box<dyn Learner>> {
    Ok(match which {
        "leftmost" => Box::new(LeftmostBranch),
        "all-zero" => Box::new(AllZero),
        "parity" => Box::new(Parity),
        _ => match which.strip_prefix("table:") {
            Some(path) => {
                let table: ComparisonTable = serde_json::from_value(read_json(Path::new(path))?)
                    .with_context(|| format!("table file {path}"))?;
                Box::new(TableLearner { table })
            }
            None => return Err(usage(format!("unknown learner {which:?}"))),
        },
    })
}

fn privacy_cmd(cmd: &PrivacyCmd, seed: u64) -> Result<Report> {
    match cmd {
        PrivacyCmd::Reduce {
            depth,
            points,
            learner: which,
            trials,
            threshold,
        } => {
            let a = learner(which)?;
            let inst = IppInstance::new(*depth, points.clone())?;
            let summary = privacy::reduce_trials(a.as_ref(), &inst, seed, *trials, *threshold)?;
            let mut csv = String::from("trial,seed,output,interior\n");
            for (i, out) in summary.outputs.iter().enumerate() {
                csv += &format!("{i},{},{out},{}\n", seed + i as u64, inst.is_interior(*out));
            }
            Ok(Report {
                doc: serde_json::to_value(&summary)?,
                csv: Some(csv),
                ok: true,
            })
        }
        PrivacyCmd::CheckCb {
            learner: which,
            depth,
            m,
            gamma,
        } => {
            let a = learner(which)?;
            let report = privacy::is_comparison_based(a.as_ref(), &SubtreeEmbedding::whole(*depth), *m, *gamma)?;
            Ok(Report::json(serde_json::to_value(report)?))
        }
        PrivacyCmd::BuildColoring {
            learner: which,
            depth,
            m,
            tabulate,
        } => {
            let a = learner(which)?;
            let c = privacy::build_chain_coloring(a.as_ref(), *depth, *m)?;
            let c = if *tabulate { c.tabulate()? } else { c };
            Ok(Report::json(c.to_json()))
        }
    }
}

fn verify(doc: &Value, c: &Coloring, predicate: Option<PredicateArg>) -> Result<Report> {
    if doc.get("left").is_some() && doc.get("right").is_some() {
        let r: BipartiteResult = serde_json::from_value(doc.clone()).context("bipartite result")?;
        let violation = finders::verify_bipartite(c, &r)?;
        return Ok(verdict(violation));
    }
    let (embedding, stored) = match doc.get("embedding") {
        Some(e) => (e.clone(), doc.get("color_witness").cloned()),
        None => (doc.clone(), None),
    };
    let e: SubtreeEmbedding = serde_json::from_value(embedding).context("embedding")?;
    let witness = match (predicate, stored) {
        (Some(p), _) => finders::witness_for(c, &e, p.into())?,
        (None, Some(w)) => serde_json::from_value(w).context("color_witness")?,
        (None, None) => finders::witness_for(c, &e, Predicate::Monochromatic)?,
    };
    let violation = finders::verify(c, &e, &witness)?;
    Ok(verdict(violation))
}

fn verdict(violation: Option<finders::Violation>) -> Report {
    let ok = violation.is_none();
    Report {
        doc: json!({ "pass": ok, "violation": violation }),
        csv: None,
        ok,
    }
}

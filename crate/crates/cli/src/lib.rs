//! Library face of the `hybridsim` command-line tool; the binary is a thin
//! wrapper so integration tests can drive commands in-process.
//!
//! Every command prints one JSON report to stdout and, when `--out DIR` is
//! given, writes the identical bytes to `DIR/report.json` (`bench` adds
//! `DIR/sweep.csv`). Reports embed the tool version, the full argument echo,
//! and the seed, and contain no timestamps, so reruns are byte-identical.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 capacity-audit failure.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use hybridsim_core::graph::{generate, parse_edge_list, randomize_weights};
use hybridsim_core::lower::{
    audit_information_flow, build_hard_instance, decode_from_distances, encode_sources, lb_value,
    verify_instance,
};
use hybridsim_core::nq::{nq_distributed, nq_oracle};
use hybridsim_core::routing::{route_end_to_end, Token};
use hybridsim_core::sp::{solve_k_ell_sp, DistanceMode, SPInstance};
use hybridsim_core::util::{derive_seed, isqrt, node_rng};
use hybridsim_core::{
    Error, ExecutionTrace, GraphKind, NodeId, Result, SimConfig, WeightedGraph,
};
use rand::Rng;

#[derive(Parser, Debug)]
#[command(
    name = "hybridsim",
    version,
    about = "Hybrid-network simulator: graph generation, neighborhood quality, \
             helper sets, token routing, shortest paths, lower-bound instances, sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a graph and write it as an edge list.
    Gen(GenArgs),
    /// Neighborhood quality (centralized oracle or distributed protocol).
    Nq(NqArgs),
    /// Build and verify adaptive helper sets.
    Helpers(HelpersArgs),
    /// Route one token from each source to every target.
    Route(RouteArgs),
    /// Solve a (k, l) shortest-path instance.
    Ksp(KspArgs),
    /// Forge a lower-bound instance: reweighted edge list plus sidecar.
    Hard(HardArgs),
    /// Repeated decode experiments with an information-flow audit.
    Audit(AuditArgs),
    /// Sweep (graph, k, gamma) cells; write sweep.csv and report.json.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Path,
    Cycle,
    Star,
    Grid,
    Complete,
    ErdosRenyi,
    Barbell,
    Lollipop,
}

#[derive(Args, Debug, Serialize)]
pub struct GenArgs {
    /// Graph family.
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Node count (path, cycle, star, complete, erdos-renyi; optional for
    /// lollipop when --clique is given: tail = n - clique).
    #[arg(long)]
    pub n: Option<u32>,
    /// Grid rows.
    #[arg(long)]
    pub rows: Option<u32>,
    /// Grid columns.
    #[arg(long)]
    pub cols: Option<u32>,
    /// Clique size (lollipop, barbell).
    #[arg(long)]
    pub clique: Option<u32>,
    /// Tail length (lollipop).
    #[arg(long)]
    pub tail: Option<u32>,
    /// Bridge length (barbell).
    #[arg(long)]
    pub bridge: Option<u32>,
    /// Edge probability in thousandths (erdos-renyi).
    #[arg(long)]
    pub p_millis: Option<u32>,
    /// Draw integer edge weights uniformly from [1, w_max] (default: unit).
    #[arg(long, default_value_t = 1)]
    pub w_max: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output edge-list path.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct NqArgs {
    /// Graph edge-list file.
    #[arg(short, long)]
    pub graph: PathBuf,
    /// Number of sources the quality is measured against.
    #[arg(short, long)]
    pub k: u64,
    /// Global-channel budget in bits per node per round.
    #[arg(long)]
    pub gamma: u64,
    /// Run the distributed protocol instead of the centralized oracle.
    #[arg(long, default_value_t = false)]
    pub protocol: bool,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Directory receiving report.json (stdout always gets the report).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct HelpersArgs {
    #[arg(short, long)]
    pub graph: PathBuf,
    #[arg(short, long)]
    pub k: u64,
    #[arg(long)]
    pub gamma: u64,
    /// Number of targets (the lowest node ids).
    #[arg(long, default_value_t = 1)]
    pub targets: u32,
    /// High-probability exponent used by the verifier.
    #[arg(long, default_value_t = 2)]
    pub c: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct RouteArgs {
    #[arg(short, long)]
    pub graph: PathBuf,
    /// Number of sources (the highest node ids), one token per target each.
    #[arg(short, long)]
    pub k: u64,
    #[arg(long)]
    pub gamma: u64,
    /// Number of targets (the lowest node ids).
    #[arg(long, default_value_t = 1)]
    pub targets: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct KspArgs {
    #[arg(short, long)]
    pub graph: PathBuf,
    /// Number of sources (the highest node ids).
    #[arg(long)]
    pub sources: u32,
    /// Number of targets: the lowest node ids, or iid draws with --iid.
    #[arg(long)]
    pub targets: u32,
    #[arg(long)]
    pub gamma: u64,
    /// Draw the targets uniformly at random instead of fixing them.
    #[arg(long, default_value_t = false)]
    pub iid: bool,
    /// Distance phase: exact reference or sampled skeleton.
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Skeleton sampling parameter (nodes join at rate 1/x).
    #[arg(long, default_value_t = 4)]
    pub x: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Exact,
    Skeleton,
}

#[derive(Args, Debug, Serialize)]
pub struct HardArgs {
    #[arg(short, long)]
    pub graph: PathBuf,
    #[arg(short, long)]
    pub k: u64,
    #[arg(long)]
    pub gamma: u64,
    /// Exponent of the separating polynomial p(n) = n^e.
    #[arg(long, default_value_t = 1)]
    pub p_exponent: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Where to write the reweighted edge list.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct AuditArgs {
    #[arg(short, long)]
    pub graph: PathBuf,
    #[arg(short, long)]
    pub k: u64,
    #[arg(long)]
    pub gamma: u64,
    #[arg(long, default_value_t = 1)]
    pub p_exponent: u32,
    /// Number of encode/solve/decode repetitions.
    #[arg(long, default_value_t = 20)]
    pub runs: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    /// Graph family used for every cell.
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Node counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<String>,
    /// Demands per cell: numbers or sqrt | half | full.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    pub ks: Vec<String>,
    /// Budgets per cell: numbers or logsq (= ceil(log2 n)^2).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub gammas: Vec<String>,
    /// Edge probability in thousandths (erdos-renyi).
    #[arg(long)]
    pub p_millis: Option<u32>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for sweep.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse the command line; map usage errors to exit code 1 and help/version
/// display to 0, reserving 2 for capacity-audit failures.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            0
        }
        Err(e) => {
            eprint!("{e}");
            1
        }
    }
}

/// Execute a parsed command; errors go to stderr and become exit codes.
pub fn run(cli: Cli) -> i32 {
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Nq(a) => cmd_nq(a),
        Command::Helpers(a) => cmd_helpers(a),
        Command::Route(a) => cmd_route(a),
        Command::Ksp(a) => cmd_ksp(a),
        Command::Hard(a) => cmd_hard(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn read_graph(path: &PathBuf) -> Result<WeightedGraph> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))?;
    parse_edge_list(&text)
}

fn write_file(path: &PathBuf, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| Error::validation(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| Error::validation(format!("cannot write {}: {e}", path.display())))
}

/// Print the report to stdout and mirror it to `DIR/report.json`.
fn emit(report: &Value, out: &Option<PathBuf>) -> Result<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(report).unwrap());
    print!("{text}");
    if let Some(dir) = out {
        write_file(&dir.join("report.json"), &text)?;
    }
    Ok(())
}

fn envelope<A: Serialize>(command: &str, args: &A, seed: u64, result: Value) -> Value {
    json!({
        "tool": {"name": "hybridsim", "version": env!("CARGO_PKG_VERSION")},
        "command": command,
        "spec": serde_json::to_value(args).unwrap(),
        "seed": seed,
        "result": result,
    })
}

/// The `k` highest node ids, ascending: the standard source convention.
fn high_sources(n: u32, k: u64) -> Result<Vec<NodeId>> {
    if k == 0 || k > n as u64 {
        return Err(Error::validation(format!(
            "k = {k} sources out of range for n = {n}"
        )));
    }
    Ok((n + 1 - k as u32..=n).collect())
}

/// The `l` lowest node ids: the standard fixed-target convention.
fn low_targets(n: u32, l: u32) -> Result<Vec<NodeId>> {
    if l == 0 || l > n {
        return Err(Error::validation(format!(
            "{l} targets out of range for n = {n}"
        )));
    }
    Ok((1..=l).collect())
}

fn one_token_per_pair(sources: &[NodeId], targets: &[NodeId]) -> Vec<Token> {
    let mut tokens = Vec::with_capacity(sources.len() * targets.len());
    for j in 0..targets.len() as u64 {
        for &s in sources {
            tokens.push(Token {
                source: s,
                target_index: j + 1,
                payload: s as u64,
            });
        }
    }
    tokens
}

fn build_kind(a: &GenArgs) -> Result<GraphKind> {
    let need = |opt: Option<u32>, what: &str| {
        opt.ok_or_else(|| Error::validation(format!("--{what} is required for this kind")))
    };
    Ok(match a.kind {
        KindArg::Path => GraphKind::Path { n: need(a.n, "n")? },
        KindArg::Cycle => GraphKind::Cycle { n: need(a.n, "n")? },
        KindArg::Star => GraphKind::Star { n: need(a.n, "n")? },
        KindArg::Complete => GraphKind::Complete { n: need(a.n, "n")? },
        KindArg::Grid => GraphKind::Grid {
            rows: need(a.rows, "rows")?,
            cols: need(a.cols, "cols")?,
        },
        KindArg::ErdosRenyi => GraphKind::Random {
            n: need(a.n, "n")?,
            p_millis: need(a.p_millis, "p-millis")?,
        },
        KindArg::Lollipop => {
            let clique = need(a.clique, "clique")?;
            let tail = match (a.tail, a.n) {
                (Some(t), _) => t,
                (None, Some(n)) if n > clique => n - clique,
                _ => return Err(Error::validation("lollipop needs --tail or --n > --clique")),
            };
            GraphKind::Lollipop { clique, tail }
        }
        KindArg::Barbell => GraphKind::Barbell {
            clique: need(a.clique, "clique")?,
            bridge: need(a.bridge, "bridge")?,
        },
    })
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let kind = build_kind(&a)?;
    let mut g = generate(kind, a.seed)?;
    if a.w_max > 1 {
        g = randomize_weights(&g, a.w_max, a.seed)?;
    }
    write_file(&a.output, &g.to_edge_list())?;
    let result = json!({
        "n": g.n(),
        "edges": g.edges().len(),
        "w_max": g.w_max(),
        "path": a.output.display().to_string(),
    });
    let report = envelope("gen", &a, a.seed, result);
    emit(&report, &None)
}

fn cmd_nq(a: NqArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let result = if a.protocol {
        let cfg = SimConfig::new(a.gamma, a.seed);
        let (rep, _) = nq_distributed(&g, a.k, a.gamma, &cfg)?;
        rep.to_json()
    } else {
        nq_oracle(&g, a.k, a.gamma)?.to_json()
    };
    let report = envelope("nq", &a, a.seed, result);
    emit(&report, &a.out)
}

fn cmd_helpers(a: HelpersArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let targets = low_targets(g.n(), a.targets)?;
    let nq = nq_oracle(&g, a.k, a.gamma)?.value;
    let cfg = SimConfig::new(a.gamma, a.seed);
    let (family, trace) =
        hybridsim_core::cluster::build_helper_sets(&g, &targets, a.k, a.gamma, nq, &cfg)?;
    let check = hybridsim_core::cluster::verify_helper_family(&g, &family, a.c);
    let result = json!({
        "family": family.to_json(),
        "check": serde_json::to_value(&check).unwrap(),
        "rounds": trace.totals.combined_rounds,
        "global_bits": trace.totals.global_bits,
    });
    let report = envelope("helpers", &a, a.seed, result);
    emit(&report, &a.out)
}

fn cmd_route(a: RouteArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let sources = high_sources(g.n(), a.k)?;
    let targets = low_targets(g.n(), a.targets)?;
    let tokens = one_token_per_pair(&sources, &targets);
    let nq = nq_oracle(&g, a.k, a.gamma)?.value;
    let cfg = SimConfig::new(a.gamma, a.seed);
    let (delivery, trace) =
        route_end_to_end(&g, &sources, &targets, &tokens, a.gamma, nq, &cfg)?;
    let result = json!({
        "delivery": delivery.to_json(),
        "rounds": trace.totals.combined_rounds,
        "global_bits": trace.totals.global_bits,
    });
    let report = envelope("route", &a, a.seed, result);
    emit(&report, &a.out)
}

fn cmd_ksp(a: KspArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let n = g.n();
    let sources = high_sources(n, a.sources as u64)?;
    let instance = if a.iid {
        SPInstance::iid(n, sources, a.targets as u64, derive_seed(a.seed, 9))
    } else {
        SPInstance::fixed(n, sources, low_targets(n, a.targets)?)
    };
    let mode = match a.mode {
        ModeArg::Exact => DistanceMode::ExactReference,
        ModeArg::Skeleton => DistanceMode::Skeleton { x: a.x },
    };
    let cfg = SimConfig::new(a.gamma, a.seed);
    let (res, trace) = solve_k_ell_sp(&g, &instance, a.gamma, mode, &cfg)?;
    let mut result = res.to_json();
    result["rounds_total"] = json!(trace.totals.combined_rounds);
    result["global_bits"] = json!(trace.totals.global_bits);
    let report = envelope("ksp", &a, a.seed, result);
    emit(&report, &a.out)
}

fn cmd_hard(a: HardArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let inst = build_hard_instance(&g, a.k, a.gamma, a.p_exponent)?;
    if let Some(path) = &a.output {
        write_file(path, &inst.graph.to_edge_list())?;
    }
    let lb = lb_value(&g, a.k, a.gamma)?;
    let result = json!({
        "sidecar": inst.to_json(),
        "verified": verify_instance(&inst),
        "lb": lb.to_json(),
        "edge_list": a.output.as_ref().map(|p| p.display().to_string()),
    });
    let report = envelope("hard", &a, a.seed, result);
    emit(&report, &a.out)
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    if a.runs == 0 {
        return Err(Error::validation("--runs must be at least 1"));
    }
    let g = read_graph(&a.graph)?;
    let inst = build_hard_instance(&g, a.k, a.gamma, a.p_exponent)?;
    let n = inst.graph.n();
    let mut rng = node_rng(derive_seed(a.seed, 0xA0D1), 0);
    let mut runs: Vec<(ExecutionTrace, bool)> = Vec::new();
    let mut decoded_ok = 0u64;
    for run in 0..a.runs {
        let bits: Vec<bool> = (0..inst.k_prime).map(|_| rng.gen_bool(0.5)).collect();
        let enc = encode_sources(&inst, &bits)?;
        let spec = SPInstance::fixed(n, enc.sources.clone(), vec![inst.v]);
        let cfg = SimConfig::new(a.gamma, derive_seed(a.seed, run));
        let (res, trace) =
            solve_k_ell_sp(&inst.graph, &spec, a.gamma, DistanceMode::ExactReference, &cfg)?;
        let labels: Vec<u64> = enc
            .sources
            .iter()
            .map(|s| res.labels[&(inst.v, *s)])
            .collect();
        let ok = decode_from_distances(&labels, &inst)? == bits;
        decoded_ok += ok as u64;
        runs.push((trace, ok));
    }
    let audit = audit_information_flow(&inst, &runs)?;
    let result = json!({
        "audit": audit.to_json(),
        "decoded_ok": decoded_ok,
        "runs": a.runs,
    });
    let report = envelope("audit", &a, a.seed, result);
    emit(&report, &a.out)
}

fn parse_k_token(token: &str, n: u32) -> Result<u64> {
    match token {
        "sqrt" => Ok(isqrt(n as u64).max(1)),
        "half" => Ok((n as u64 / 2).max(1)),
        "full" => Ok(n as u64),
        _ => token
            .parse::<u64>()
            .map_err(|_| Error::validation(format!("bad demand token '{token}'"))),
    }
}

fn parse_gamma_token(token: &str, n: u32) -> Result<u64> {
    match token {
        "logsq" => {
            let m = hybridsim_core::constants::ceil_log2(n as u64) as u64;
            Ok((m * m).max(1))
        }
        _ => token
            .parse::<u64>()
            .map_err(|_| Error::validation(format!("bad budget token '{token}'"))),
    }
}

fn bench_kind(kind: KindArg, n: u32, p_millis: Option<u32>) -> Result<GraphKind> {
    Ok(match kind {
        KindArg::Path => GraphKind::Path { n },
        KindArg::Cycle => GraphKind::Cycle { n },
        KindArg::Star => GraphKind::Star { n },
        KindArg::Complete => GraphKind::Complete { n },
        KindArg::Grid => {
            let side = isqrt(n as u64) as u32;
            if side * side != n {
                return Err(Error::validation(format!(
                    "grid sweep needs square node counts, got {n}"
                )));
            }
            GraphKind::Grid {
                rows: side,
                cols: side,
            }
        }
        KindArg::ErdosRenyi => GraphKind::Random {
            n,
            p_millis: p_millis
                .ok_or_else(|| Error::validation("--p-millis is required for erdos-renyi"))?,
        },
        KindArg::Lollipop => GraphKind::Lollipop {
            clique: (n / 2).max(2),
            tail: n - (n / 2).max(2),
        },
        KindArg::Barbell => {
            let clique = (n / 3).max(2);
            if 2 * clique > n {
                return Err(Error::validation(format!(
                    "barbell sweep needs n >= 6, got {n}"
                )));
            }
            GraphKind::Barbell {
                clique,
                bridge: n - 2 * clique,
            }
        }
    })
}

struct CellRow {
    name: String,
    n: u32,
    k: u64,
    gamma: u64,
    nq: Option<(i64, i64, u32)>,
    sqrt_bound: f64,
    rounds: u64,
    global_bits: u64,
    stretch: Option<(i64, i64)>,
    status: String,
}

impl CellRow {
    fn csv_line(&self) -> String {
        let (nn, nd, ds) = self.nq.unwrap_or((0, 0, 0));
        let (sn, sd) = self.stretch.unwrap_or((0, 0));
        // Status text is sanitized so the CSV stays one cell per column.
        let status = self.status.replace([',', '\n'], ";");
        format!(
            "{},{},{},{},{},{},{},{:.4},{},{},{},{},{}",
            self.name,
            self.n,
            self.k,
            self.gamma,
            nn,
            nd,
            ds,
            self.sqrt_bound,
            self.rounds,
            self.global_bits,
            sn,
            sd,
            status
        )
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "n": self.n,
            "k": self.k,
            "gamma": self.gamma,
            "nq_num": self.nq.map(|t| t.0),
            "nq_den": self.nq.map(|t| t.1),
            "d_star": self.nq.map(|t| t.2),
            "sqrt_bound": format!("{:.4}", self.sqrt_bound),
            "rounds": self.rounds,
            "global_bits": self.global_bits,
            "stretch_num": self.stretch.map(|t| t.0),
            "stretch_den": self.stretch.map(|t| t.1),
            "status": self.status,
        })
    }
}

fn run_cell(kind: KindArg, n: u32, k: u64, gamma: u64, p_millis: Option<u32>, seed: u64) -> CellRow {
    let name = format!("{}-{n}", format!("{kind:?}").to_lowercase());
    let sqrt_bound = (k as f64 / gamma as f64).sqrt() + 1.0;
    let mut row = CellRow {
        name,
        n,
        k,
        gamma,
        nq: None,
        sqrt_bound,
        rounds: 0,
        global_bits: 0,
        stretch: None,
        status: "ok".into(),
    };
    let outcome = (|| -> Result<()> {
        let g = generate(bench_kind(kind, n, p_millis)?, seed)?;
        let cfg = SimConfig::new(gamma, seed);
        let (rep, t1) = nq_distributed(&g, k, gamma, &cfg)?;
        let (num, den) = hybridsim_core::util::rat_parts(rep.value);
        row.nq = Some((num, den, rep.d_star));
        let sources = high_sources(n, k)?;
        let instance = SPInstance::fixed(n, sources, vec![1]);
        let (res, t2) = solve_k_ell_sp(
            &g,
            &instance,
            gamma,
            DistanceMode::ExactReference,
            &cfg.with_seed(derive_seed(seed, 5)),
        )?;
        let (sn, sd) = hybridsim_core::util::rat_parts(res.stretch);
        row.stretch = Some((sn, sd));
        row.rounds = t1.totals.combined_rounds + t2.totals.combined_rounds;
        row.global_bits = t1.totals.global_bits + t2.totals.global_bits;
        Ok(())
    })();
    if let Err(e) = outcome {
        row.status = format!("failed: {e}");
    }
    row
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let ns: Vec<u32> = a
        .ns
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|_| Error::validation(format!("bad node count '{s}'")))
        })
        .collect::<Result<_>>()?;
    let ks: Vec<String> = a.ks.iter().filter(|s| !s.trim().is_empty()).cloned().collect();
    let gammas: Vec<String> = a
        .gammas
        .iter()
        .filter(|s| !s.trim().is_empty())
        .cloned()
        .collect();
    if ns.is_empty() || ks.is_empty() || gammas.is_empty() {
        return Err(Error::validation("empty sweep grid"));
    }

    // The full grid in deterministic order.
    let mut cells: Vec<(u32, u64, u64)> = Vec::new();
    for &n in &ns {
        for kt in &ks {
            for gt in &gammas {
                cells.push((n, parse_k_token(kt, n)?, parse_gamma_token(gt, n)?));
            }
        }
    }

    // Each cell owns its simulator; rows are reassembled in grid order.
    let mut rows: Vec<Option<CellRow>> = (0..cells.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .enumerate()
            .map(|(i, &(n, k, gamma))| {
                let kind = a.kind;
                let p_millis = a.p_millis;
                let seed = derive_seed(a.seed, i as u64);
                scope.spawn(move || (i, run_cell(kind, n, k, gamma, p_millis, seed)))
            })
            .collect();
        for h in handles {
            let (i, row) = h.join().expect("sweep cell panicked");
            rows[i] = Some(row);
        }
    });
    let rows: Vec<CellRow> = rows.into_iter().map(|r| r.unwrap()).collect();

    let mut csv = String::from(
        "name,n,k,gamma,nq_num,nq_den,d_star,sqrt_bound,rounds,global_bits,\
         stretch_num,stretch_den,status\n",
    );
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    write_file(&a.out.join("sweep.csv"), &csv)?;

    let result = json!({
        "cells": rows.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        "csv": a.out.join("sweep.csv").display().to_string(),
    });
    let report = envelope("bench", &a, a.seed, result);
    emit(&report, &Some(a.out.clone()))
}

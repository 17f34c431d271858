use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use twrouter::decomp::{heuristic_decomposition, RootedDecomposition};
use twrouter::graph::{Instance, Mode};
use twrouter::hardness::{build_gadget, treedepth_witness, verify_equivalence};
use twrouter::io::{emit_td, instance_to_json, parse_instance, parse_td};
use twrouter::oracle::{exact_max_routing, OracleConfig};
use twrouter::router::{prepare, solve, RouterConfig, SolveReport};
use twrouter::wl::wl_decompose;
use twrouter::{gen, Error};

#[derive(Parser)]
#[command(name = "twrouter", version, about = "Disjoint-paths routing on graphs of bounded treewidth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Edge-disjoint paths on a tree decomposition.
    SolveEdp(SolveArgs),
    /// Node-disjoint paths on a path decomposition.
    SolveNdp(SolveArgs),
    /// Well-linked decomposition of an edge-capacitated instance.
    WlDecompose(SolveArgs),
    /// Exact optimum by exhaustive search on small instances.
    Oracle(OracleArgs),
    /// Write a generated instance and its decomposition.
    Gen(GenArgs),
    /// Build the clique gadget from a random Multicolored Clique instance.
    GenHardness(HardnessArgs),
    /// Solve a family of generated instances and print one CSV row each.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (JSON or DIMACS-like).
    #[arg(long)]
    graph: PathBuf,
    /// PACE .td decomposition; a heuristic one is computed when omitted.
    #[arg(long)]
    td: Option<PathBuf>,
    /// Bag size bound (defaults to width + 1).
    #[arg(long)]
    r: Option<usize>,
    /// Skip greedy augmentation of the rounded routing.
    #[arg(long)]
    no_augment: bool,
    #[arg(long, default_value_t = twrouter::relax::DEFAULT_EXACT_LIMIT)]
    exact_limit: usize,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Write the routing as JSON.
    #[arg(long)]
    routing_out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 30)]
    max_vertices: usize,
    #[arg(long, default_value_t = 8)]
    max_pairs: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Grid,
    Ktree,
    Band,
    Caterpillar,
}

#[derive(Args, Clone)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Grid: number of pairs. Other families: number of terminal pairs.
    #[arg(long, default_value = "3")]
    k: String,
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Width parameter of the generator.
    #[arg(long, default_value_t = 2)]
    w: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    td_out: Option<PathBuf>,
}

#[derive(Args)]
struct HardnessArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability of each cross-class edge.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check the equivalence with exhaustive search.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Number of seeds per size.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    json: bool,
}

const CSV_HEADER: &str = "instance,n,m,k,r,lp,flow,l1,l2,routed,bound,constant,ms";

#[derive(Serialize)]
struct Row {
    instance: String,
    #[serde(flatten)]
    report: SolveReport,
}

fn csv_row(name: &str, rep: &SolveReport) -> String {
    format!(
        "{name},{},{},{},{},{:.6},{:.6},{},{},{},{:.6e},{},{:.1}",
        rep.n,
        rep.m,
        rep.k,
        rep.r,
        rep.lp_objective,
        twrouter::Scalar::approx(&rep.flow),
        rep.l1,
        rep.l2,
        rep.routed,
        twrouter::Scalar::approx(&rep.bound),
        rep.constant,
        rep.ms
    )
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(args: &SolveArgs, mode: Option<Mode>) -> Result<(Instance, RootedDecomposition)> {
    let mut inst = parse_instance(&read(&args.graph)?)?;
    if let Some(mode) = mode {
        if inst.mode != mode {
            if mode == Mode::Ndp {
                inst.graph.ensure_node_caps(1);
            }
            inst.mode = mode;
        }
    }
    let d = match &args.td {
        Some(p) => parse_td(&read(p)?)?,
        None => heuristic_decomposition(&inst.graph, inst.mode == Mode::Ndp),
    };
    Ok((inst, d))
}

fn run_solve(args: &SolveArgs, mode: Mode) -> Result<ExitCode> {
    let (inst, d) = load(args, Some(mode))?;
    let cfg = RouterConfig {
        r: args.r,
        exact_limit: args.exact_limit,
        augment: !args.no_augment,
    };
    let (routing, rep) = solve(&inst, &d, &cfg)?;
    routing.audit(&inst)?;
    if let Some(out) = &args.routing_out {
        fs::write(out, serde_json::to_string_pretty(&routing)?)?;
    }
    let name = args.graph.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rep)?);
    } else if args.csv {
        println!("{CSV_HEADER}\n{}", csv_row(name, &rep));
    } else {
        println!("lp objective    {:.6}{}", rep.lp_objective, if rep.lp_exact { "" } else { " (float)" });
        println!("flow |f|        {}", rep.flow);
        println!("r               {} (width {})", rep.r, rep.width);
        println!("l1, l2          {}, {}", rep.l1, rep.l2);
        println!("routed          {} ({} before augmentation)", rep.routed, rep.routed_core);
        println!("bound           {} = {:.6e}", rep.bound, twrouter::Scalar::approx(&rep.bound));
        println!("constant        {} (c_impl = 480 * {} = {})", rep.constant, rep.stats.d_max.max(3), rep.c_impl);
        println!("roundings       {}", rep.stats.roundings.len());
        println!("time            {:.1} ms", rep.ms);
    }
    Ok(if rep.bound_holds() {
        ExitCode::SUCCESS
    } else {
        eprintln!("routing of size {} is below the bound {}", rep.routed_core, rep.bound);
        ExitCode::from(2)
    })
}

fn run_wl(args: &SolveArgs) -> Result<ExitCode> {
    let (inst, d) = load(args, Some(Mode::Edp))?;
    let p = prepare(&inst, &d, args.r, args.exact_limit)?;
    let out = wl_decompose(&p.norm.instance, &p.decomposition, &p.fractional.flow, p.r)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("components      {}", out.components.len());
        for (i, c) in out.components.iter().enumerate() {
            println!(
                "  {i}: {} vertices, z = {}, {} terminals, pi(X) = {}",
                c.vertices.len(),
                c.z,
                c.pi.len(),
                c.weight()
            );
        }
        println!("flow |f|        {}", out.flow);
        println!("l1, l2          {}, {}", out.l1, out.l2);
        println!("total weight    {}", out.total_weight);
        println!("bound           {}", out.bound);
    }
    Ok(if out.bound_holds() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn run_oracle(args: &OracleArgs) -> Result<ExitCode> {
    let inst = parse_instance(&read(&args.graph)?)?;
    let cfg = OracleConfig {
        max_vertices: args.max_vertices,
        max_pairs: args.max_pairs,
        ..OracleConfig::default()
    };
    let res = exact_max_routing(&inst, &cfg)?;
    if args.json {
        let out = serde_json::json!({ "opt": res.opt, "nodes": res.nodes, "paths": res.routing.paths });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("opt {}", res.opt);
        for (p, path) in &res.routing.paths {
            println!("  pair {p}: {path:?}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// `3` or an inclusive range `1..4`.
fn parse_range(s: &str) -> Result<Vec<usize>> {
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim_start_matches('=').trim().parse()?);
            if a > b {
                bail!("empty range {s}");
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse()?]),
    }
}

fn generate(f: &FamilyArgs, k: usize, seed: u64) -> (String, Instance, RootedDecomposition) {
    match f.family {
        Family::Grid => {
            let inst = gen::gen_grid_gap(k);
            let d = heuristic_decomposition(&inst.graph, false);
            (format!("grid-k{k}"), inst, d)
        }
        Family::Ktree => {
            let (inst, d) = gen::gen_partial_ktree(f.n, f.w, k, seed);
            (format!("ktree-n{}-w{}-k{k}-s{seed}", f.n, f.w), inst, d)
        }
        Family::Band => {
            let (inst, d) = gen::gen_band_ndp(f.n, f.w, k, seed, 2);
            (format!("band-n{}-w{}-k{k}-s{seed}", f.n, f.w), inst, d)
        }
        Family::Caterpillar => {
            let (inst, d) = gen::gen_caterpillar_ndp(f.n, f.w, k, seed);
            (format!("caterpillar-n{}-l{}-k{k}-s{seed}", f.n, f.w), inst, d)
        }
    }
}

fn run_gen(args: &GenArgs) -> Result<ExitCode> {
    let k = parse_range(&args.family.k)?[0];
    let (_, inst, d) = generate(&args.family, k, args.family.seed);
    fs::write(&args.out, instance_to_json(&inst))?;
    if let Some(td) = &args.td_out {
        fs::write(td, emit_td(&d, inst.graph.id_bound()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_hardness(args: &HardnessArgs) -> Result<ExitCode> {
    let mcc = twrouter::hardness::random_mcc(args.k, args.n, args.seed, args.density)?;
    let out = build_gadget(&mcc)?;
    let (depth, _) = treedepth_witness(&out, args.k)?;
    println!("classes         {} x {}", mcc.k(), mcc.n());
    println!("edges           {}", mcc.edges.len());
    println!("gadget vertices {}", out.instance.graph.num_vertices());
    println!("pairs           {}", out.instance.k());
    println!("ell             {}", out.ell);
    println!("treedepth       <= {depth} (bound {})", args.k * (args.k - 1) / 2 + args.k + 3);
    if let Some(path) = &args.out {
        fs::write(path, instance_to_json(&out.instance))?;
        let roles = path.with_extension("roles.json");
        fs::write(&roles, serde_json::to_string_pretty(&out.roles)?)?;
    }
    if args.verify {
        let eq = verify_equivalence(&mcc, 40, 8)?;
        println!("clique          {:?}", eq.clique);
        println!("routes ell      {}", eq.routes_ell);
        println!("equivalence     {}", if eq.holds() { "holds" } else { "FAILS" });
        if !eq.holds() {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: &BenchArgs) -> Result<ExitCode> {
    let ks = parse_range(&args.family.k)?;
    let seeds: Vec<u64> = match args.family.family {
        Family::Grid => vec![args.family.seed],
        _ => (args.family.seed..args.family.seed + args.seeds.max(1)).collect(),
    };
    let jobs: Vec<(usize, u64)> = ks.iter().flat_map(|&k| seeds.iter().map(move |&s| (k, s))).collect();
    let cfg = RouterConfig {
        augment: !args.no_augment,
        ..RouterConfig::default()
    };
    let results: Vec<(String, twrouter::Result<SolveReport>)> = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let (name, inst, d) = generate(&args.family, k, seed);
            let start = Instant::now();
            let res = solve(&inst, &d, &cfg).map(|(_, mut rep)| {
                rep.ms = start.elapsed().as_secs_f64() * 1e3;
                rep
            });
            (name, res)
        })
        .collect();
    let mut failed = false;
    let mut rows = Vec::new();
    if !args.json {
        println!("{CSV_HEADER}");
    }
    for (name, res) in results {
        match res {
            Ok(rep) => {
                failed |= !rep.bound_holds();
                if args.json {
                    rows.push(Row { instance: name, report: rep });
                } else {
                    println!("{}", csv_row(&name, &rep));
                }
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                failed = true;
            }
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    }
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::SolveEdp(a) => run_solve(a, Mode::Edp),
        Command::SolveNdp(a) => run_solve(a, Mode::Ndp),
        Command::WlDecompose(a) => run_wl(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Gen(a) => run_gen(a),
        Command::GenHardness(a) => run_hardness(a),
        Command::Bench(a) => run_bench(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Contract(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_EXACT_CAP;
use crate::experiment::{self, GroundTruth, SweepConfig, SweepPoint};
use crate::gen::{self, GenKind, GenSpec};
use crate::graph::{load_edge_list, Graph, LoadOptions};
use crate::index::{build_index, HubIndex, HubSelection};
use crate::pagerank::{reverse_pagerank, DEFAULT_TOL};
use crate::query::QueryParams;
use crate::sampler::{sample_walk, Rng};

#[derive(Parser, Debug)]
#[command(name = "prsim", version, about = "Approximate single-source SimRank")]
pub struct Cli {
    /// SimRank decay factor.
    #[arg(long, global = true, default_value_t = 0.6)]
    pub c: f64,
    /// Additive error bound.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub eps: f64,
    /// Failure probability.
    #[arg(long, global = true, default_value_t = 0.0001)]
    pub delta: f64,
    #[arg(long, global = true, env = "PRSIM_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// Edge list: one "src dst" pair per line, '#' comments.
    #[arg(long)]
    pub graph: PathBuf,
    /// Add the reverse of every edge.
    #[arg(long)]
    pub undirected: bool,
    /// Keep parallel edges.
    #[arg(long)]
    pub keep_duplicates: bool,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph> {
        load_edge_list(
            &self.graph,
            LoadOptions {
                dedupe: !self.keep_duplicates,
                undirected: self.undirected,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HubsArg {
    Count(usize),
    Sqrt,
    AutoM,
}

impl FromStr for HubsArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sqrt" => Ok(HubsArg::Sqrt),
            "auto-m" => Ok(HubsArg::AutoM),
            _ => s
                .parse()
                .map(HubsArg::Count)
                .map_err(|_| format!("expected an integer, \"sqrt\" or \"auto-m\" (got {s:?})")),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct HubArgs {
    /// Number of hubs: an integer, "sqrt" or "auto-m".
    #[arg(long, default_value = "sqrt")]
    pub hubs: HubsArg,
    /// Degree exponent for --hubs auto-m.
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl HubArgs {
    fn selection(&self) -> Result<HubSelection> {
        Ok(match self.hubs {
            HubsArg::Count(k) => HubSelection::Count(k),
            HubsArg::Sqrt => HubSelection::Sqrt,
            HubsArg::AutoM => HubSelection::AutoM {
                gamma: self
                    .gamma
                    .ok_or_else(|| Error::InvalidParameter("--hubs auto-m requires --gamma".into()))?,
            },
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum GenKindArg {
    Powerlaw,
    Er,
    Star,
    Cycle,
    BwCounterexample,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic graph as an edge list.
    Gen {
        kind: GenKindArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 10.0)]
        davg: f64,
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        /// Power-law only: sample unordered pairs and emit both directions.
        #[arg(long)]
        undirected: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Reverse PageRank as "node<TAB>pi", descending.
    Pagerank {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Precompute hub reserves. Also writes the dense id map to
    /// `<output>.ids.tsv`.
    BuildIndex {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        hubs: HubArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Summarize an index file.
    IndexStats {
        #[arg(long)]
        index: PathBuf,
    },
    /// Single-source query: "node<TAB>score", descending.
    Query {
        #[command(flatten)]
        graph: GraphArgs,
        /// Source node (original id).
        #[arg(long)]
        source: u64,
        /// Prebuilt index; built on the fly when absent.
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        hubs: HubArgs,
        /// Only print the top k nodes besides the source.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        sample_scale: f64,
    },
    /// Grade queries from random sources with pooling.
    Eval {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        hubs: HubArgs,
        #[arg(long, default_value_t = 10)]
        queries: usize,
        #[arg(long, default_value_t = 50)]
        k: usize,
        /// Largest graph graded against exact scores.
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        exact_cap: usize,
        /// Walk pairs per node pair when the graph exceeds --exact-cap.
        #[arg(long, default_value_t = 100_000)]
        gt_pairs: u64,
        #[arg(long, default_value_t = 1.0)]
        sample_scale: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Query time across power-law exponents.
    SweepGamma {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        davg: f64,
        #[arg(long, value_delimiter = ',', default_value = "1.5,2,3,4")]
        gammas: Vec<f64>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Query time across graph sizes.
    SweepScale {
        #[arg(long, value_delimiter = ',', default_value = "10000,100000,1000000")]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 3.0)]
        gamma: f64,
        #[arg(long, default_value_t = 10.0)]
        davg: f64,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Debug: √c-walks from a node as JSON lines.
    Sample {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        source: u64,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 100)]
    pub queries: usize,
    /// Graph seeds per point, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value = "sqrt")]
    pub hubs: HubsArg,
    /// Use directed Chung-Lu graphs instead of symmetrized ones.
    #[arg(long)]
    pub directed: bool,
    #[arg(long, default_value_t = 1.0)]
    pub sample_scale: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn params(cli: &Cli, sample_scale: f64) -> Result<QueryParams> {
    let p = QueryParams {
        sample_scale,
        ..QueryParams::new(cli.c, cli.eps, cli.delta)?
    };
    p.validate()?;
    Ok(p)
}

fn load_or_build(cli: &Cli, graph: &Graph, index: Option<&Path>, hubs: &HubArgs) -> Result<HubIndex> {
    match index {
        Some(path) => {
            let idx = HubIndex::load(path)?;
            idx.check_compatible(graph, cli.c)?;
            Ok(idx)
        }
        None => {
            let pr = reverse_pagerank(graph, cli.c, DEFAULT_TOL)?;
            let j0 = hubs.selection()?.resolve(graph, cli.eps)?;
            build_index(graph, &pr, cli.c, cli.eps, j0)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Gen {
            kind,
            n,
            gamma,
            davg,
            p,
            undirected,
            output,
        } => {
            let kind = match kind {
                GenKindArg::Powerlaw => GenKind::PowerLaw {
                    gamma: *gamma,
                    avg_degree: *davg,
                    undirected: *undirected,
                },
                GenKindArg::Er => GenKind::Er { p: *p },
                GenKindArg::Star => GenKind::Star,
                GenKindArg::Cycle => GenKind::Cycle,
                GenKindArg::BwCounterexample => GenKind::BwCounterexample,
            };
            let g = gen::generate(&GenSpec {
                kind,
                n: *n,
                seed: cli.seed,
            })?;
            g.write_edge_list(output)
        }
        Command::Pagerank { graph, tol, output } => {
            let g = graph.load()?;
            let pr = reverse_pagerank(&g, cli.c, *tol)?;
            let mut order: Vec<usize> = (0..g.node_count()).collect();
            order.sort_by(|&a, &b| pr.pi[b].total_cmp(&pr.pi[a]).then(a.cmp(&b)));
            let mut out = open_output(output.as_deref())?;
            for v in order {
                writeln!(out, "{}\t{}", g.label(v as u32), pr.pi[v])?;
            }
            out.flush()?;
            Ok(())
        }
        Command::BuildIndex { graph, hubs, output } => {
            let g = graph.load()?;
            let start = Instant::now();
            let idx = load_or_build(&cli, &g, None, hubs)?;
            idx.save(output)?;
            let mut ids = output.clone().into_os_string();
            ids.push(".ids.tsv");
            g.write_id_map(PathBuf::from(ids))?;
            eprintln!(
                "hubs={} tuples={} r_max={:e} micros={}",
                idx.hubs.len(),
                idx.tuple_count(),
                idx.params.r_max,
                start.elapsed().as_micros()
            );
            Ok(())
        }
        Command::IndexStats { index } => {
            let idx = HubIndex::load(index)?;
            let levels = idx.hubs.iter().map(|h| h.levels.len()).max().unwrap_or(0);
            println!("n\t{}", idx.n);
            println!("m\t{}", idx.m);
            println!("c\t{}", idx.params.c);
            println!("eps\t{}", idx.params.eps);
            println!("r_max\t{:e}", idx.params.r_max);
            println!("hubs\t{}", idx.hubs.len());
            println!("tuples\t{}", idx.tuple_count());
            println!("max_levels\t{levels}");
            Ok(())
        }
        Command::Query {
            graph,
            source,
            index,
            hubs,
            top,
            sample_scale,
        } => {
            let params = params(&cli, *sample_scale)?;
            let g = graph.load()?;
            let u = g.dense_id(*source)?;
            let idx = load_or_build(&cli, &g, index.as_deref(), hubs)?;
            let mut rng = Rng::new(cli.seed);
            let t = experiment::timed_query(&g, &idx, u, &params, &mut rng)?;
            let mut out = open_output(None)?;
            match top {
                Some(k) => {
                    writeln!(out, "{}\t{}", g.label(u), 1.0)?;
                    for v in t.result.scores.top_k(*k) {
                        writeln!(out, "{}\t{}", g.label(v), t.result.scores.get(v))?;
                    }
                }
                None => t.result.scores.write_tsv(&g, &mut out)?,
            }
            out.flush()?;
            let s = &t.result.stats;
            eprintln!(
                "samples={} vb_walks={} hub_hits={} micros={}",
                s.samples, s.vb_walks, s.hub_hits, t.micros
            );
            Ok(())
        }
        Command::Eval {
            graph,
            index,
            hubs,
            queries,
            k,
            exact_cap,
            gt_pairs,
            sample_scale,
            output,
        } => {
            let params = params(&cli, *sample_scale)?;
            let g = graph.load()?;
            let idx = load_or_build(&cli, &g, index.as_deref(), hubs)?;
            let truth = GroundTruth::for_graph(&g, cli.c, *exact_cap, *gt_pairs, cli.seed)?;
            let mut rng = Rng::new(cli.seed);
            let sources = experiment::pick_sources(g.node_count(), *queries, &mut rng);
            let report = experiment::evaluate(&g, &idx, &sources, &params, *k, &truth, &mut rng)?;
            let mut out = open_output(output.as_deref())?;
            report.write_csv(&mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::SweepGamma { n, davg, gammas, sweep } => {
            let points: Vec<(f64, usize)> = gammas.iter().map(|&g| (g, *n)).collect();
            run_sweep(&cli, &points, *davg, sweep)
        }
        Command::SweepScale { ns, gamma, davg, sweep } => {
            let points: Vec<(f64, usize)> = ns.iter().map(|&n| (*gamma, n)).collect();
            run_sweep(&cli, &points, *davg, sweep)
        }
        Command::Sample { graph, source, count } => {
            crate::error::check_decay(cli.c)?;
            let g = graph.load()?;
            let u = g.dense_id(*source)?;
            let mut rng = Rng::new(cli.seed);
            let mut out = open_output(None)?;
            for _ in 0..*count {
                let walk = sample_walk(&g, u, cli.c, &mut rng);
                let labeled = serde_json::json!({
                    "positions": walk.positions.iter().map(|&p| g.label(p)).collect::<Vec<_>>(),
                    "terminal": walk.terminal.map(|t| g.label(t)),
                });
                serde_json::to_writer(&mut out, &labeled).map_err(io::Error::other)?;
                writeln!(out)?;
            }
            out.flush()?;
            Ok(())
        }
    }
}

fn run_sweep(cli: &Cli, points: &[(f64, usize)], davg: f64, args: &SweepArgs) -> Result<()> {
    let hubs = HubArgs {
        hubs: args.hubs,
        gamma: None,
    };
    let mut out = open_output(args.output.as_deref())?;
    writeln!(out, "{}", SweepPoint::HEADER)?;
    for &(gamma, n) in points {
        let hubs = match hubs.hubs {
            HubsArg::AutoM => HubSelection::AutoM { gamma },
            _ => hubs.selection()?,
        };
        let cfg = SweepConfig {
            avg_degree: davg,
            undirected: !args.directed,
            queries: args.queries,
            hubs,
            params: params(cli, args.sample_scale)?,
        };
        for s in 0..args.seeds.max(1) {
            let p = experiment::sweep_point(gamma, n, cli.seed + s, &cfg)?;
            p.write_csv_row(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

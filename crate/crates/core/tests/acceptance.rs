//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::time::{Duration, Instant};

use common::{formula_simrank, levels_for, triangle_dag};
use prsim::eval::{default_iterations, exact_simrank};
use prsim::experiment::{interleaved_points, mean_query_micros, prepare, sweep_point, SweepConfig, SweepPoint};
use prsim::gen;
use prsim::graph::{Graph, NodeId};
use prsim::index::{backward_search, build_index, residue_threshold, HubSelection};
use prsim::pagerank::{exact_lhop_rppr, reverse_pagerank, PageRankVector, DEFAULT_TOL};
use prsim::query::{single_source, QueryParams};
use prsim::sampler::{backward_walk_vb_in, Rng, WalkWorkspace};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= budget, format!("{:.1}s of {}s", t.as_secs_f64(), budget.as_secs()))
}

fn pagerank(g: &Graph, c: f64) -> PageRankVector {
    reverse_pagerank(g, c, DEFAULT_TOL).unwrap()
}

/// ER(50, 0.1) graphs, 10 sources each, graded against the power method.
fn exact_accuracy() -> Outcome {
    let start = Instant::now();
    let (c, eps, delta) = (0.6, 0.1, 0.01);
    let params = QueryParams::new(c, eps, delta).unwrap();
    let (mut pairs, mut good_pairs, mut queries, mut good_queries) = (0usize, 0usize, 0usize, 0usize);
    let mut worst: f64 = 0.0;
    for g_seed in 0..20u64 {
        let g = gen::gen_er(50, 0.1, 1_000 + g_seed).unwrap();
        let exact = exact_simrank(&g, c, default_iterations(c)).unwrap();
        let j0 = HubSelection::Sqrt.resolve(&g, eps).unwrap();
        let index = build_index(&g, &pagerank(&g, c), c, eps, j0).unwrap();
        let sources = prsim::experiment::pick_sources(50, 10, &mut Rng::new(g_seed));
        for (i, &u) in sources.iter().enumerate() {
            let mut rng = Rng::new(g_seed * 100 + i as u64);
            let res = single_source(&g, &index, u, &params, &mut rng).unwrap();
            let mut max_err: f64 = 0.0;
            for v in 0..50 as NodeId {
                let err = (res.scores.get(v) - exact.get(u, v)).abs();
                max_err = max_err.max(err);
                pairs += 1;
                good_pairs += (err <= eps) as usize;
            }
            worst = worst.max(max_err);
            queries += 1;
            good_queries += (max_err <= eps) as usize;
        }
    }
    let pair_frac = good_pairs as f64 / pairs as f64;
    let query_frac = good_queries as f64 / queries as f64;
    let (fast, t) = within_budget(start, Duration::from_secs(120));
    outcome(
        pair_frac >= 0.99 && query_frac >= 1.0 - delta && fast,
        format!(
            "pairs within eps {pair_frac:.4} (>= 0.99), queries with max error <= eps {query_frac:.3} over {queries} seeded queries (>= {}), worst {worst:.4}, {t}",
            1.0 - delta
        ),
    )
}

fn formula_closure() -> Outcome {
    let start = Instant::now();
    let c = 0.6;
    let levels = levels_for(c, 1e-10);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let g = gen::gen_er(20, 0.15, 500 + seed).unwrap();
        let exact = exact_simrank(&g, c, default_iterations(c)).unwrap();
        let s = formula_simrank(&g, &exact, levels);
        for u in 0..20 {
            for v in 0..20 {
                worst = worst.max((s[u * 20 + v] - exact.get(u as NodeId, v as NodeId)).abs());
            }
        }
    }
    let (fast, t) = within_budget(start, Duration::from_secs(30));
    outcome(worst <= 1e-6 && fast, format!("max |formula - power method| = {worst:.2e} (<= 1e-6), {t}"))
}

fn vb_graphs() -> Vec<(&'static str, Graph)> {
    vec![
        ("triangle", triangle_dag()),
        ("er30a", gen::gen_er(30, 0.1, 31).unwrap()),
        ("er30b", gen::gen_er(30, 0.1, 32).unwrap()),
    ]
}

/// Per-cell first and second moments of the VB estimator over `runs` walks,
/// for every target and levels 1..=3.
struct VbMoments {
    cells: usize,
    max_z: f64,
    z_failures: usize,
    max_excess: f64,
}

fn vb_moments(c: f64, runs: usize) -> VbMoments {
    let sqrt_c = c.sqrt();
    let mut m = VbMoments {
        cells: 0,
        max_z: 0.0,
        z_failures: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for (gi, (_, g)) in vb_graphs().into_iter().enumerate() {
        let n = g.node_count();
        let mut ws = WalkWorkspace::new(n);
        for w in 0..n as NodeId {
            let exact = exact_lhop_rppr(&g, w, 3, c).unwrap();
            for level in 1..=3usize {
                let mut rng = Rng::stream(7_000 + gi as u64, (w as u64) << 8 | level as u64);
                let mut sum = vec![0.0; n];
                let mut sq = vec![0.0; n];
                for _ in 0..runs {
                    backward_walk_vb_in(&g, w, level, sqrt_c, &mut rng, &mut ws);
                    for (v, p) in ws.current() {
                        sum[v as usize] += p;
                        sq[v as usize] += p * p;
                    }
                }
                let r = runs as f64;
                for v in 0..n {
                    let pi = exact.get(level, v as NodeId);
                    let mean = sum[v] / r;
                    let second = sq[v] / r;
                    if pi == 0.0 && mean == 0.0 {
                        continue;
                    }
                    m.max_excess = m.max_excess.max(second - pi);
                    m.cells += 1;
                    let var = (second - mean * mean).max(0.0) * r / (r - 1.0);
                    // a cell that was never hit has no empirical spread; fall back
                    // to the variance bound E[π̂²] <= π
                    let se = if var > 0.0 { (var / r).sqrt() } else { (pi / r).sqrt() };
                    let z = (mean - pi).abs() / se;
                    m.max_z = m.max_z.max(z);
                    m.z_failures += (z > 4.0) as usize;
                }
            }
        }
    }
    m
}

fn search_accuracy_and_sizes() -> (Outcome, Vec<(String, bool, usize)>) {
    let c = 0.6;
    let eps = 0.1;
    let r_max = residue_threshold(c, eps);
    let mut worst_full: f64 = 0.0;
    let mut worst_stored: f64 = 0.0;
    let mut min_gap: f64 = 0.0;
    let mut checked = 0usize;
    let mut size_checks = Vec::new();
    for seed in 0..10u64 {
        let g = if seed % 2 == 0 {
            gen::gen_er(100, 0.05, 200 + seed).unwrap()
        } else {
            gen::gen_powerlaw(100, 2.0, 5.0, false, 200 + seed).unwrap()
        };
        let pr = pagerank(&g, c);
        let index = build_index(&g, &pr, c, eps, 100).unwrap();
        let mut size_ok = true;
        for hub in &index.hubs {
            let w = hub.node;
            size_ok &= hub.tuple_count() as f64 <= 100.0 * pr.pi[w as usize] / r_max;
            let search = backward_search(&g, w, r_max, c);
            let exact = exact_lhop_rppr(&g, w, search.reserves.len() + 80, c).unwrap();
            for l in 0..=exact.max_level() {
                let full = search.reserves.get(l).map_or(&[][..], Vec::as_slice);
                let stored = index.lookup(w, l);
                for v in 0..100 as NodeId {
                    let pi = exact.get(l, v);
                    if pi <= 0.0 {
                        continue;
                    }
                    checked += 1;
                    let find = |xs: &[(NodeId, f64)]| xs.iter().find(|p| p.0 == v).map_or(0.0, |p| p.1);
                    let gap_full = pi - find(full);
                    let gap_stored = pi - find(stored);
                    min_gap = min_gap.min(gap_full.min(gap_stored));
                    worst_full = worst_full.max(gap_full);
                    worst_stored = worst_stored.max(gap_stored);
                }
            }
        }
        size_checks.push((format!("random-100-{seed}"), size_ok, index.tuple_count()));
    }
    let tol = 1e-12;
    let pass = min_gap >= -tol && worst_full <= r_max + tol && worst_stored <= 2.0 * r_max + tol;
    (
        outcome(
            pass,
            format!(
                "{checked} cells over 10 graphs, every node a hub: min gap {min_gap:.1e}, max gap of search reserves {worst_full:.3e} (<= r_max = {r_max:.3e}), max gap of stored reserves {worst_stored:.3e} (<= 2 r_max)"
            ),
        ),
        size_checks,
    )
}

fn index_sizes(mut checks: Vec<(String, bool, usize)>) -> Outcome {
    let c = 0.6;
    for (eps, name, g) in [
        (0.05, "powerlaw-2000", gen::gen_powerlaw(2_000, 2.0, 8.0, true, 4).unwrap()),
        (0.1, "er-500", gen::gen_er(500, 0.01, 4).unwrap()),
        (0.05, "star-50", gen::gen_star(50).unwrap()),
    ] {
        let n = g.node_count() as f64;
        let pr = pagerank(&g, c);
        let j0 = HubSelection::Sqrt.resolve(&g, eps).unwrap();
        let index = build_index(&g, &pr, c, eps, j0).unwrap();
        let ok = index
            .hubs
            .iter()
            .all(|h| h.tuple_count() as f64 <= n * pr.pi[h.node as usize] / index.params.r_max);
        checks.push((name.to_string(), ok, index.tuple_count()));
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    outcome(
        failed.is_empty(),
        format!("tuples per hub <= n pi(w) / r_max on {} graphs; violations: {failed:?}", checks.len()),
    )
}

fn walk_cost() -> Outcome {
    let c: f64 = 0.6;
    let sqrt_c = c.sqrt();
    let alpha = 1.0 - sqrt_c;
    let runs = 10_000;
    let mut worst_ratio: f64 = 0.0;
    let mut targets = 0;
    for (gi, g) in [
        gen::gen_er(100, 0.05, 61).unwrap(),
        gen::gen_powerlaw(100, 2.0, 5.0, false, 62).unwrap(),
        gen::gen_powerlaw(100, 1.5, 5.0, true, 63).unwrap(),
    ]
    .iter()
    .enumerate()
    {
        let pr = pagerank(g, c);
        let mut ws = WalkWorkspace::new(100);
        for w in 0..100 as NodeId {
            let mut rng = Rng::stream(9_000 + gi as u64, w as u64);
            let mut total = 0u64;
            for _ in 0..runs {
                // run to exhaustion so every level is paid for
                backward_walk_vb_in(g, w, usize::MAX, sqrt_c, &mut rng, &mut ws);
                total += ws.increments;
            }
            let mean = total as f64 / runs as f64;
            let bound = 2.0 * 100.0 * pr.pi[w as usize] / alpha;
            worst_ratio = worst_ratio.max(mean / bound);
            targets += 1;
        }
    }
    outcome(
        worst_ratio <= 1.0,
        format!("{targets} targets, max mean increments / (2 n pi(w) / (1-sqrt c)) = {worst_ratio:.3}"),
    )
}

fn star_fixture() -> Outcome {
    let c = 0.6;
    let g = gen::gen_star(50).unwrap();
    let params = QueryParams::new(c, 0.05, 0.0001).unwrap();
    let j0 = HubSelection::Sqrt.resolve(&g, 0.05).unwrap();
    let index = build_index(&g, &pagerank(&g, c), c, 0.05, j0).unwrap();
    let u = g.dense_id(2).unwrap();
    let res = single_source(&g, &index, u, &params, &mut Rng::new(8)).unwrap();
    let worst = (3..=50)
        .map(|j| (res.scores.get(g.dense_id(j).unwrap()) - c).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 0.05, format!("max |s(2,j) - 0.6| = {worst:.4} (<= 0.05)"))
}

fn sweep_config(queries: usize) -> SweepConfig {
    SweepConfig {
        avg_degree: 10.0,
        undirected: true,
        queries,
        hubs: HubSelection::Sqrt,
        params: QueryParams::new(0.6, 0.2, 0.0001).unwrap(),
    }
}

fn gamma_trend() -> Outcome {
    let start = Instant::now();
    let cfg = sweep_config(100);
    let mut means = Vec::new();
    let mut work = Vec::new();
    for seed in 0..3 {
        // both exponents of one seed are timed side by side
        let mut pair = vec![
            prepare(1.5, 100_000, seed, &cfg).unwrap(),
            prepare(4.0, 100_000, seed, &cfg).unwrap(),
        ];
        let points = interleaved_points(&mut pair, &cfg.params).unwrap();
        means.push(points);
    }
    let at = |k: usize| -> Vec<SweepPoint> { means.iter().map(|p| p[k].clone()).collect() };
    let (low, high) = (at(0), at(1));
    let (t_low, t_high) = (mean_query_micros(&low), mean_query_micros(&high));
    for pts in [&low, &high] {
        work.push(pts.iter().map(|p| p.mean_vb_increments).sum::<f64>() / pts.len() as f64);
    }
    let (fast, t) = within_budget(start, Duration::from_secs(15 * 60));
    outcome(
        t_low > t_high && fast,
        format!(
            "mean query time {:.1} ms at gamma 1.5 vs {:.1} ms at gamma 4 (100 queries x 3 seeds; backward-walk increments per query {:.0} vs {:.0}), {t}",
            t_low / 1e3,
            t_high / 1e3,
            work[0],
            work[1]
        ),
    )
}

fn scale_trend() -> Outcome {
    let start = Instant::now();
    let cfg = SweepConfig {
        undirected: true,
        ..sweep_config(100)
    };
    let small = sweep_point(3.0, 10_000, 0, &cfg).unwrap();
    let large = sweep_point(3.0, 1_000_000, 0, &cfg).unwrap();
    let ratio = large.mean_query_micros / small.mean_query_micros;
    let (fast, t) = within_budget(start, Duration::from_secs(30 * 60));
    outcome(
        ratio < 20.0 && fast,
        format!(
            "t(1e6) / t(1e4) = {:.1} ms / {:.1} ms = {ratio:.2} (< 20), {t}",
            large.mean_query_micros / 1e3,
            small.mean_query_micros / 1e3
        ),
    )
}

fn determinism() -> Outcome {
    let c = 0.6;
    let eps = 0.1;
    let g = gen::gen_powerlaw(10_000, 2.0, 8.0, true, 5).unwrap();
    let params = QueryParams {
        sample_scale: 0.2,
        ..QueryParams::new(c, eps, 0.0001).unwrap()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let pr = pagerank(&g, c);
            let j0 = HubSelection::Sqrt.resolve(&g, eps).unwrap();
            let index = build_index(&g, &pr, c, eps, j0).unwrap();
            let res = single_source(&g, &index, 42, &params, &mut Rng::new(2024)).unwrap();
            let mut tsv = Vec::new();
            res.scores.write_tsv(&g, &mut tsv).unwrap();
            (index.to_bytes(), tsv)
        })
    };
    let base = run(1);
    let same_run = run(1) == base;
    let same_threads = [2, 4].iter().all(|&t| run(t) == base);
    outcome(
        same_run && same_threads,
        format!("index and query bytes identical on rerun: {same_run}, with 2 and 4 threads: {same_threads}"),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: &str, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failures += (!o.pass) as usize;
        println!("{tag} [{id}] {name}: {}", o.detail);
    };

    report("1", "accuracy against exact SimRank", exact_accuracy());
    report("2", "hitting-probability formula closure", formula_closure());

    let start = Instant::now();
    let m = vb_moments(0.64, 200_000);
    let (fast, t) = within_budget(start, Duration::from_secs(60));
    report(
        "3",
        "variance bounded backward walk is unbiased",
        outcome(
            m.z_failures == 0 && fast,
            format!(
                "{} cells on triangle + 2 random n=30 graphs, levels 1-3, 2e5 walks: max |z| = {:.2}, cells beyond 4 SE: {}, {t}",
                m.cells, m.max_z, m.z_failures
            ),
        ),
    );
    report(
        "4",
        "second moment bound",
        outcome(
            m.max_excess <= 0.01,
            format!("max E[est^2] - pi over {} nonzero cells = {:.2e} (<= 0.01)", m.cells, m.max_excess),
        ),
    );

    let (l1, sizes) = search_accuracy_and_sizes();
    report("5", "backward search accuracy", l1);
    report("6", "index size per hub", index_sizes(sizes));
    report("7", "backward walk cost", walk_cost());
    report("8", "star fixture", star_fixture());
    report("9", "query time falls as gamma grows", gamma_trend());
    report("10", "sublinear query time growth", scale_trend());
    report("11", "determinism", determinism());

    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

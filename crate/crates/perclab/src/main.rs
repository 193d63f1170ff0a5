//! Command-line surface of the percolation laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use perclab::config::{parse_graph_spec, ExperimentSpec, GraphSpec};
use perclab::corpus;
use perclab::formats;
use perclab::report::ResultDoc;
use perclab::runner::run_tasks;
use percolib::experiments as exp;
use percolib::fit;
use percolib::graph::InfiniteTree;
use percolib::matrix::{self, MatrixKind};
use percolib::norms;
use percolib::oracle::{self, EventSpec, Rational};
use percolib::perc;
use percolib::rng::EdgeCoins;
use percolib::{duality, Error as CoreError};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_UNDERPOWERED: u8 = 4;
const EXIT_NONCONVERGENCE: u8 = 5;

#[derive(Parser)]
#[command(name = "perclab", version, about = "Percolation laboratory: graphs, samplers, operator norms, exact oracles, exponent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Graph family: tree(k,d), itree(k), tiling(p,q,l), dual(tiling(p,q,l)), grid(w,h)
    #[arg(long)]
    graph: Option<String>,
    /// Edge probability
    #[arg(long)]
    p: Option<String>,
    /// Operator norm exponent(s), comma separated (e.g. "1,2,inf")
    #[arg(long)]
    q: Option<String>,
    /// Statistic depth / radius parameter
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: $PERCLAB_OUT or ./results)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format for series data: json or csv (json is always written)
    #[arg(long)]
    format: Option<String>,
    /// Plain-text `key = value` config file; file entries override flags
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph or map and write its text serialization
    Gen(Common),
    /// Sample configurations and dump per-sample cluster observables (JSONL)
    Sample(Common),
    /// Build an operator matrix, compute norms and the triangle diagram
    Matrix {
        #[command(flatten)]
        common: Common,
        /// T, C(n), S(n), Bint(n), Sint(n), Aint(n,m)
        #[arg(long, default_value = "T")]
        kind: String,
        /// mc, oracle or tree
        #[arg(long, default_value = "tree")]
        source: String,
        #[arg(long, default_value_t = 4)]
        window_radius: u32,
    },
    /// Run the exact-oracle checks on the bundled corpus and emit goldens
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Also run the ghost-field inequality checks (slower)
        #[arg(long)]
        full: bool,
    },
    /// Tail/scaling experiments: tails, magnetization, trifurcation,
    /// delta-log, ballisticity
    Exponent {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "tails")]
        experiment: String,
        /// Fit window lower end
        #[arg(long)]
        fit_lo: Option<u64>,
        /// Fit window upper end
        #[arg(long)]
        fit_hi: Option<u64>,
    },
    /// Duality experiments: calibrate, roleswap, pu, geometry
    Duality {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "calibrate")]
        mode: String,
    },
    /// Norm-vs-p and norm-vs-q sweeps on exact tree windows
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated p grid
        #[arg(long)]
        p_list: Option<String>,
        #[arg(long, default_value_t = 8)]
        window_radius: u32,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::InvalidParameter(_) => EXIT_INVALID,
            CoreError::CapExceeded(_) => EXIT_CAP,
            CoreError::Underpowered(_) => EXIT_UNDERPOWERED,
            CoreError::NonConvergence(_) => EXIT_NONCONVERGENCE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        CliError {
            code: EXIT_INVALID,
            message: e.to_string(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INVALID,
        message: msg.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(c) => run_gen(c),
        Command::Sample(c) => run_sample(c),
        Command::Matrix {
            common,
            kind,
            source,
            window_radius,
        } => run_matrix(common, kind, source, window_radius),
        Command::Oracle { common, full } => run_oracle(common, full),
        Command::Exponent {
            common,
            experiment,
            fit_lo,
            fit_hi,
        } => run_exponent(common, experiment, fit_lo, fit_hi),
        Command::Duality { common, mode } => run_duality(common, mode),
        Command::Sweep {
            common,
            p_list,
            window_radius,
        } => run_sweep(common, p_list, window_radius),
    };
    match result {
        Ok(doc) => {
            for check in &doc.checks {
                let status = if check.pass { "PASS" } else { "FAIL" };
                println!("[{status}] {}: {}", check.name, check.detail);
            }
            if doc.all_passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("perclab: asserted checks failed");
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(e) => {
            eprintln!("perclab: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Resolve the spec: flags first, then the config file on top.
fn resolve_spec(command: &str, c: &Common) -> Result<ExperimentSpec, CliError> {
    let mut spec = ExperimentSpec::new(command);
    if let Some(g) = &c.graph {
        spec.set("graph", g);
    }
    if let Some(p) = &c.p {
        spec.set("p", p);
    }
    if let Some(q) = &c.q {
        spec.set("q", q);
    }
    if let Some(n) = c.n {
        spec.set("n", n);
    }
    if let Some(s) = c.samples {
        spec.set("samples", s);
    }
    if let Some(s) = c.seed {
        spec.set("seed", s);
    }
    if let Some(f) = &c.format {
        spec.set("format", f);
    }
    if let Some(path) = &c.config {
        spec.merge_config_file(path).map_err(invalid)?;
    }
    // Worker count is an execution knob, not part of the experiment
    // identity: results are bit-identical for every value, so it never
    // enters the spec or its hash.
    spec.entries_remove("workers");
    Ok(spec)
}

fn workers_of(c: &Common, spec: &ExperimentSpec) -> usize {
    let _ = spec;
    c.workers.unwrap_or(1)
}

fn out_dir(c: &Common) -> PathBuf {
    c.out
        .clone()
        .or_else(|| std::env::var_os("PERCLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn spec_u64(spec: &ExperimentSpec, key: &str, default: u64) -> Result<u64, CliError> {
    match spec.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| invalid(format!("bad {key}: {v:?}"))),
    }
}

fn spec_f64(spec: &ExperimentSpec, key: &str, default: f64) -> Result<f64, CliError> {
    match spec.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| invalid(format!("bad {key}: {v:?}"))),
    }
}

fn spec_graph(spec: &ExperimentSpec) -> Result<GraphSpec, CliError> {
    let s = spec.get("graph").ok_or_else(|| invalid("--graph is required"))?;
    parse_graph_spec(s).map_err(invalid)
}

fn want_csv(spec: &ExperimentSpec) -> bool {
    spec.get("format").map(|f| f == "csv").unwrap_or(true)
}

fn write_doc(dir: &Path, name: &str, doc: &ResultDoc) -> Result<(), CliError> {
    formats::write_file(&dir.join(name), doc.to_json().as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

fn run_gen(c: Common) -> Result<ResultDoc, CliError> {
    let spec = resolve_spec("gen", &c)?;
    let gs = spec_graph(&spec)?;
    let dir = out_dir(&c);
    let mut doc;
    match gs.build_map() {
        Ok(map) => {
            doc = ResultDoc::new(&spec).with_graph(map.graph().fingerprint());
            let text = formats::map_to_text(&map);
            let path = dir.join(format!("{}.map.txt", gs.canonical()));
            formats::write_file(&path, text.as_bytes())?;
            let g = map.graph();
            doc.results = json!({
                "file": path.to_string_lossy(),
                "vertices": g.vertex_count(),
                "edges": g.edge_count(),
                "faces": map.faces().len(),
                "boundary": g.boundary_ids().len(),
            });
            let euler = g.vertex_count() as i64 - g.edge_count() as i64 + map.faces().len() as i64 + 1;
            doc.check("euler-formula", euler == 2, format!("V-E+F = {euler}"));
            doc.check("map-validates", map.validate().is_ok(), "rotation and orbit structure");
        }
        Err(_) => {
            let g = gs.build_graph()?;
            doc = ResultDoc::new(&spec).with_graph(g.fingerprint());
            let text = formats::graph_to_text(&g);
            let path = dir.join(format!("{}.graph.txt", gs.canonical()));
            formats::write_file(&path, text.as_bytes())?;
            doc.results = json!({
                "file": path.to_string_lossy(),
                "vertices": g.vertex_count(),
                "edges": g.edge_count(),
                "boundary": g.boundary_ids().len(),
            });
            let round = formats::graph_from_text(&text)
                .map(|g2| formats::graph_to_text(&g2) == text)
                .unwrap_or(false);
            doc.check("text-roundtrip", round, "serialization is bit-exact");
        }
    }
    write_doc(&dir, &format!("{}.gen.json", gs.canonical()), &doc)?;
    Ok(doc)
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

fn run_sample(c: Common) -> Result<ResultDoc, CliError> {
    let spec = resolve_spec("sample", &c)?;
    let gs = spec_graph(&spec)?;
    let g = gs.build_graph()?;
    let p = spec_f64(&spec, "p", 0.5)?;
    let samples = spec_u64(&spec, "samples", 1000)?;
    let seed = spec_u64(&spec, "seed", 0)?;
    let vertex = spec_u64(&spec, "n", 0)? as u32;
    if vertex >= g.vertex_count() {
        return Err(invalid(format!("vertex {vertex} out of range")));
    }
    let dir = out_dir(&c);
    let ambient = g.distances_from(vertex);
    let mut scratch = perc::Scratch::new(g.vertex_count());
    let params = perc::ScanParams::default();
    let mut lines = String::new();
    let mut vol_sum = 0u64;
    for stream in 0..samples {
        let coins = EdgeCoins::new(seed, stream, p);
        let scan = perc::explore_cluster(&g, |e| coins.open(e as u64), vertex, &params, Some(&ambient), &mut scratch);
        vol_sum += scan.volume;
        let record = json!({
            "schema": "percolab-obs-v1",
            "graph": g.family_tag(),
            "graph_fingerprint": format!("{:016x}", g.fingerprint()),
            "p": p,
            "seed": seed,
            "stream": stream,
            "vertex": vertex,
            "observable": "cluster",
            "volume": scan.volume,
            "rad_int": scan.rad_int,
            "rad_ext": scan.rad_ext,
            "boundary_touch": scan.hit_graph_boundary,
        });
        lines.push_str(&record.to_string());
        lines.push('\n');
    }
    let path = dir.join(format!("{}.p{}.obs.jsonl", gs.canonical(), p));
    formats::write_file(&path, lines.as_bytes())?;
    let mut doc = ResultDoc::new(&spec).with_graph(g.fingerprint());
    doc.results = json!({
        "file": path.to_string_lossy(),
        "samples": samples,
        "mean_volume": vol_sum as f64 / samples as f64,
    });
    doc.check("dump-written", true, format!("{samples} records"));
    write_doc(&dir, &format!("{}.sample.json", gs.canonical()), &doc)?;
    Ok(doc)
}

// ---------------------------------------------------------------------------
// matrix
// ---------------------------------------------------------------------------

fn parse_kind(s: &str) -> Result<MatrixKind, CliError> {
    let s = s.trim();
    if s == "T" {
        return Ok(MatrixKind::TwoPoint);
    }
    let parse1 = |inner: &str| -> Result<u32, CliError> {
        inner.parse().map_err(|_| invalid(format!("bad kind parameter {inner:?}")))
    };
    if let Some(i) = s.strip_prefix("C(").and_then(|r| r.strip_suffix(")")) {
        return Ok(MatrixKind::Complement(parse1(i)?));
    }
    if let Some(i) = s.strip_prefix("S(").and_then(|r| r.strip_suffix(")")) {
        return Ok(MatrixKind::Sphere(parse1(i)?));
    }
    if let Some(i) = s.strip_prefix("Bint(").and_then(|r| r.strip_suffix(")")) {
        return Ok(MatrixKind::IntBall(parse1(i)?));
    }
    if let Some(i) = s.strip_prefix("Sint(").and_then(|r| r.strip_suffix(")")) {
        return Ok(MatrixKind::IntSphere(parse1(i)?));
    }
    if let Some(i) = s.strip_prefix("Aint(").and_then(|r| r.strip_suffix(")")) {
        let parts: Vec<&str> = i.split(',').collect();
        if parts.len() == 2 {
            return Ok(MatrixKind::IntAnnulus(parse1(parts[0].trim())?, parse1(parts[1].trim())?));
        }
    }
    Err(invalid(format!("unknown matrix kind {s:?}")))
}

fn parse_q_list(spec: &ExperimentSpec) -> Result<Vec<f64>, CliError> {
    let qs = spec.get("q").unwrap_or("1,2,inf");
    qs.split(',')
        .map(|t| {
            let t = t.trim();
            if t == "inf" {
                Ok(f64::INFINITY)
            } else {
                t.parse::<f64>().map_err(|_| invalid(format!("bad q value {t:?}")))
            }
        })
        .collect()
}

fn run_matrix(c: Common, kind: String, source: String, window_radius: u32) -> Result<ResultDoc, CliError> {
    let mut spec = resolve_spec("matrix", &c)?;
    spec.set("kind", &kind).set("source", &source).set("window_radius", window_radius);
    let gs = spec_graph(&spec)?;
    let g = gs.build_graph()?;
    let p = spec_f64(&spec, "p", 0.5)?;
    let samples = spec_u64(&spec, "samples", 20_000)?;
    let seed = spec_u64(&spec, "seed", 0)?;
    let workers = workers_of(&c, &spec);
    let kind = parse_kind(spec.get("kind").unwrap_or("T"))?;
    let window = matrix::ball_window(&g, 0, window_radius);
    let dist = matrix::window_distances(&g, &window);

    let m = match spec.get("source").unwrap_or("tree") {
        "tree" => matrix::tree_exact_matrix(&g, p, kind, &window)?,
        "oracle" => {
            let rp = Rational::from_decimal_str(spec.get("p").unwrap_or("0.5"))?;
            matrix::exact_matrix(&g, &rp, kind, &window)?
        }
        "mc" => {
            // Fixed logical shards; worker count never changes the merge.
            const SHARDS: u64 = 64;
            if kind.is_intrinsic() {
                let cap = match kind {
                    MatrixKind::IntBall(n) | MatrixKind::IntSphere(n) => n,
                    MatrixKind::IntAnnulus(_, m) => m,
                    _ => unreachable!(),
                };
                let tallies = run_tasks(SHARDS as usize, workers, |i| {
                    let lo = samples * i as u64 / SHARDS;
                    let hi = samples * (i as u64 + 1) / SHARDS;
                    matrix::mc_intrinsic(&g, p, &window, cap, seed, lo..hi)
                });
                let mut merged: Option<matrix::IntrinsicTally> = None;
                for t in tallies {
                    let t = t?;
                    match &mut merged {
                        None => merged = Some(t),
                        Some(m) => m.merge(&t),
                    }
                }
                matrix::matrix_from_intrinsic(&merged.unwrap(), kind, p, g.fingerprint())?
            } else {
                let tallies = run_tasks(SHARDS as usize, workers, |i| {
                    let lo = samples * i as u64 / SHARDS;
                    let hi = samples * (i as u64 + 1) / SHARDS;
                    matrix::mc_two_point(&g, p, &window, seed, lo..hi)
                });
                let mut merged: Option<matrix::TwoPointTally> = None;
                for t in tallies {
                    let t = t?;
                    match &mut merged {
                        None => merged = Some(t),
                        Some(m) => m.merge(&t),
                    }
                }
                matrix::matrix_from_two_point(&merged.unwrap(), kind, &dist, p, g.fingerprint())?
            }
        }
        other => return Err(invalid(format!("unknown source {other:?}"))),
    };

    let dir = out_dir(&c);
    let base = format!("{}.p{}.{}", gs.canonical(), p, kind.label());
    formats::write_file(&dir.join(format!("{base}.pmat")), &formats::matrix_to_bytes(&m))?;
    if want_csv(&spec) {
        formats::write_file(&dir.join(format!("{base}.csv")), formats::matrix_to_csv(&m).as_bytes())?;
    }
    let mut doc = ResultDoc::new(&spec).with_graph(g.fingerprint());
    let mut norm_results = Vec::new();
    for q in parse_q_list(&spec)? {
        let r = norms::operator_norm(&m, q, norms::DEFAULT_NORM_TOL)?;
        doc.check(
            &format!("norm-converged-q={q}"),
            r.converged,
            format!("value {} after {} iterations", r.value, r.iterations),
        );
        norm_results.push(json!({
            "q": if q.is_infinite() { json!("inf") } else { json!(q) },
            "value": r.value,
            "iterations": r.iterations,
            "residual": r.residual,
        }));
    }
    let tri = norms::triangle_diagram(&m, norms::DEFAULT_NORM_TOL)?;
    doc.check(
        "triangle-bound",
        tri.bound_gap >= -1e-9,
        format!("nabla {} <= |T|_2^3 gap {}", tri.nabla, tri.bound_gap),
    );
    doc.check("symmetry", m.max_symmetry_defect() < 1e-12, format!("defect {}", m.max_symmetry_defect()));
    doc.check("entries-in-unit-interval", m.entries_within_unit_interval(), "all entries in [0,1]");
    doc.results = json!({
        "matrix_file": format!("{base}.pmat"),
        "window": m.window.len(),
        "norms": norm_results,
        "triangle": { "nabla": tri.nabla, "argmax": tri.argmax },
        "sidecar": {
            "kind": kind.label(),
            "p": p,
            "sample_count": m.sample_count,
            "graph_fingerprint": format!("{:016x}", m.graph_hash),
        },
    });
    formats::write_file(
        &dir.join(format!("{base}.json")),
        serde_json::to_string_pretty(&doc.results).unwrap().as_bytes(),
    )?;
    write_doc(&dir, &format!("{base}.matrix.json"), &doc)?;
    Ok(doc)
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn run_oracle(c: Common, full: bool) -> Result<ResultDoc, CliError> {
    let mut spec = resolve_spec("oracle", &c)?;
    spec.set("full", full);
    let samples = spec_u64(&spec, "samples", 20_000)?;
    let seed = spec_u64(&spec, "seed", 1)?;
    let workers = workers_of(&c, &spec);
    let dir = out_dir(&c);
    let entries = corpus::corpus();
    let ps = ["0.2", "0.5", "0.8"];

    struct TaskOut {
        name: &'static str,
        p: &'static str,
        checks: Vec<(String, bool, String)>,
        golden: serde_json::Value,
    }

    let tasks: Vec<(usize, usize)> = (0..entries.len())
        .flat_map(|g| (0..ps.len()).map(move |p| (g, p)))
        .collect();
    let outputs = run_tasks(tasks.len(), workers, |ti| -> Result<TaskOut, CoreError> {
        let (gi, pi) = tasks[ti];
        let entry = &entries[gi];
        let g = &entry.graph;
        let rp = Rational::from_decimal_str(ps[pi])?;
        let mut checks = Vec::new();

        // Monte Carlo two-point agreement: exact tail test per pair
        // (normal in the bulk, Poisson for rare counts) at a strict
        // per-pair threshold, so far pairs with sub-count expectations
        // don't raise false alarms at small sample budgets.
        let window: Vec<u32> = (0..g.vertex_count()).collect();
        let exact = oracle::exact_two_point(g, &rp)?;
        let tally = matrix::mc_two_point(g, rp.as_f64(), &window, seed ^ (ti as u64) << 8, 0..samples)?;
        let mut misses = 0u32;
        for i in 0..window.len() {
            for j in 0..window.len() {
                let tau = exact.value(i, j);
                let hits = tally.counts[i * window.len() + j];
                if !count_agrees(hits, samples, tau) {
                    misses += 1;
                }
            }
        }
        checks.push((
            "mc-two-point-agreement".into(),
            misses == 0,
            format!("{misses} pairs beyond the 1e-7 tail threshold"),
        ));

        // BK on the designated triple, exactly.
        let (u, w, v) = entry.triple;
        let a = EventSpec::Connection { u, v: w };
        let b = EventSpec::Connection { u: w, v };
        let bk = oracle::verify_bk(g, &a, &b, &rp)?;
        checks.push((
            "bk-product-bound".into(),
            bk.exact_nonneg && bk.exact_min_bound,
            format!("slack {:.3e}", bk.slack),
        ));

        // Entrywise lemmas for n, m in {0,1,2}.
        let mut min_sc = f64::INFINITY;
        let mut min_int = f64::INFINITY;
        let mut all_nonneg = true;
        for n in 0..=2 {
            for m in 0..=2 {
                let rep = oracle::verify_entrywise_inequalities(g, &rp, n, m)?;
                all_nonneg &= rep.sc_exact_nonneg && rep.intrinsic_exact_nonneg;
                min_sc = min_sc.min(rep.sc_min_slack);
                min_int = min_int.min(rep.intrinsic_min_slack);
            }
        }
        checks.push((
            "entrywise-domination".into(),
            all_nonneg,
            format!("min slacks {min_sc:.3e} / {min_int:.3e}"),
        ));

        if full && g.edge_count() <= oracle::INVERSE_BK_CAP {
            let rep = oracle::verify_inverse_bk(g, &rp, &[0.5, 0.5], &[u, v])?;
            checks.push((
                "ghost-inverse-bk".into(),
                rep.inverse_bk_slack >= -1e-12 && rep.diagrammatic_slack >= -1e-12,
                format!("slacks {:.3e} / {:.3e}", rep.inverse_bk_slack, rep.diagrammatic_slack),
            ));
        }

        let golden = json!({
            "graph": entry.name,
            "graph_fingerprint": format!("{:016x}", g.fingerprint()),
            "p": ps[pi],
            "two_point": exact.to_f64(),
        });
        Ok(TaskOut {
            name: entry.name,
            p: ps[pi],
            checks,
            golden,
        })
    });

    let mut doc = ResultDoc::new(&spec);
    let mut goldens = Vec::new();
    for out in outputs {
        let out = out?;
        for (name, pass, detail) in out.checks {
            doc.check(&format!("{}@p={}:{}", out.name, out.p, name), pass, detail);
        }
        goldens.push(out.golden);
    }
    doc.results = json!({ "corpus_size": entries.len(), "golden_file": "oracle-golden.json" });
    formats::write_file(
        &dir.join("oracle-golden.json"),
        serde_json::to_string_pretty(&goldens).unwrap().as_bytes(),
    )?;
    write_doc(&dir, "oracle.json", &doc)?;
    Ok(doc)
}

/// Does an observed count plausibly come from Binomial(n, tau)? Normal
/// z <= 5.5 when both expected counts are large, exact Poisson tails at a
/// 1e-7 threshold otherwise.
fn count_agrees(hits: u64, n: u64, tau: f64) -> bool {
    // Work with the rarer side for the Poisson approximation.
    let (k, lambda) = if tau <= 0.5 {
        (hits as f64, n as f64 * tau)
    } else {
        ((n - hits) as f64, n as f64 * (1.0 - tau))
    };
    if lambda >= 50.0 {
        let z = (k - lambda).abs() / lambda.sqrt();
        return z <= 5.5;
    }
    if k >= lambda {
        // P(X >= k) = 1 - sum_{j<k} e^{-l} l^j / j!
        let mut term = (-lambda).exp();
        let mut cdf = 0.0;
        let mut j = 0.0;
        while j < k {
            cdf += term;
            j += 1.0;
            term *= lambda / j;
            if term < 1e-300 {
                break;
            }
        }
        1.0 - cdf >= 1e-7
    } else {
        // P(X <= k)
        let mut term = (-lambda).exp();
        let mut cdf = term;
        let mut j = 0.0;
        while j < k {
            j += 1.0;
            term *= lambda / j;
            cdf += term;
        }
        cdf >= 1e-7
    }
}

// ---------------------------------------------------------------------------
// exponent
// ---------------------------------------------------------------------------

fn parse_itree(spec: &ExperimentSpec) -> Option<InfiniteTree> {
    let s = spec.get("graph")?;
    let inner = s.trim().strip_prefix("itree(")?.strip_suffix(")")?;
    let k: u32 = inner.trim().parse().ok()?;
    InfiniteTree::new(k).ok()
}

fn run_exponent(
    c: Common,
    experiment: String,
    fit_lo: Option<u64>,
    fit_hi: Option<u64>,
) -> Result<ResultDoc, CliError> {
    let mut spec = resolve_spec("exponent", &c)?;
    spec.set("experiment", &experiment);
    if let Some(x) = fit_lo {
        spec.set("fit_lo", x);
    }
    if let Some(x) = fit_hi {
        spec.set("fit_hi", x);
    }
    let p = spec_f64(&spec, "p", 0.5)?;
    let samples = spec_u64(&spec, "samples", 100_000)?;
    let seed = spec_u64(&spec, "seed", 0)?;
    let n_max = spec_u64(&spec, "n", 64)?;
    let dir = out_dir(&c);
    let mut doc = ResultDoc::new(&spec);

    match spec.get("experiment").unwrap_or("tails") {
        "tails" => {
            let lo = fit_lo.unwrap_or(n_max / 4);
            let hi = fit_hi.unwrap_or(3 * n_max / 4);
            let grid = fit::log_spaced(1.max(lo / 2), n_max, 8);
            let curves = if let Some(tree) = parse_itree(&spec) {
                exp::tree_tail_curves(tree, p, grid.clone(), grid.clone(), samples, seed)?
            } else {
                let gs = spec_graph(&spec)?;
                let g = gs.build_graph()?;
                exp::patch_tail_curves(&g, p, 0, grid.clone(), grid.clone(), samples, seed)?
            };
            let vol_fit = curves.volume.fit((lo, hi))?;
            let rad_fit = curves.rad_ext.fit((lo, hi))?;
            doc.check("volume-curve-monotone", curves.volume.is_nonincreasing(), "survival nonincreasing");
            doc.check("radius-curve-monotone", curves.rad_ext.is_nonincreasing(), "survival nonincreasing");
            doc.results = json!({
                "volume_slope": vol_fit.slope,
                "volume_stderr": vol_fit.slope_stderr,
                "radius_slope": rad_fit.slope,
                "radius_stderr": rad_fit.slope_stderr,
                "window": [lo, hi],
                "volume_series": curves.volume.probabilities(),
                "radius_series": curves.rad_ext.probabilities(),
            });
            if want_csv(&spec) {
                let rows: Vec<(f64, f64, Option<f64>)> = curves
                    .volume
                    .probabilities()
                    .iter()
                    .map(|&(n, pr)| (n as f64, pr, None))
                    .collect();
                formats::write_file(&dir.join("tails-volume.csv"), formats::series_to_csv("n,P", &rows).as_bytes())?;
                formats::write_file(
                    &dir.join("tails-volume.gp"),
                    formats::gnuplot_script("tails-volume.csv", "volume tail", true).as_bytes(),
                )?;
            }
        }
        "magnetization" => {
            let tree = parse_itree(&spec).ok_or_else(|| invalid("magnetization runs on itree(k)"))?;
            let h_grid: Vec<f64> = (0..5).map(|i| 1e-5 * 10f64.powf(i as f64 / 2.0)).collect();
            let rep = exp::magnetization_scaling_tree(tree, p, &h_grid, samples, seed, 100.0)?;
            doc.check(
                "h-points-powered",
                rep.dropped.is_empty(),
                format!("{} dropped", rep.dropped.len()),
            );
            doc.results = json!({
                "slope": rep.fit.slope,
                "slope_stderr": rep.fit.slope_stderr,
                "series": rep.series.iter().map(|(h, e, r)| json!({
                    "h": h, "mean": e.mean, "stderr": e.stderr, "reference": r,
                })).collect::<Vec<_>>(),
            });
        }
        "trifurcation" => {
            let tree = parse_itree(&spec).ok_or_else(|| invalid("trifurcation runs on itree(k)"))?;
            let grid = [0.55, 0.5875, 0.625, 0.6625, 0.7];
            let horizon = spec_u64(&spec, "n", 24)? as u32;
            let curve = exp::trifurcation_curve_tree(tree, &grid, horizon, samples, seed)?;
            for pt in &curve.points {
                let z = (pt.estimate.mean - pt.recursion).abs() / pt.estimate.stderr.max(1e-12);
                doc.check(
                    &format!("recursion-match-p={}", pt.p),
                    z <= 3.0,
                    format!("z = {z:.2}"),
                );
            }
            doc.results = json!({
                "horizon": curve.horizon,
                "band_ratio": curve.band_ratio,
                "points": curve.points.iter().map(|pt| json!({
                    "p": pt.p, "estimate": pt.estimate.mean, "stderr": pt.estimate.stderr,
                    "recursion": pt.recursion, "limit": pt.limit, "ratio_to_cube": pt.ratio_to_cube,
                })).collect::<Vec<_>>(),
            });
        }
        "delta-log" => {
            let tree = parse_itree(&spec).ok_or_else(|| invalid("delta-log runs on itree(k)"))?;
            let grid = [p];
            let pts = exp::delta_log_tree(tree, &grid, n_max as u32, samples, seed)?;
            let pt = &pts[0];
            doc.check("slope-stable", pt.stable, format!("drift {}", pt.drift));
            doc.results = json!({
                "delta": pt.delta,
                "drift": pt.drift,
                "series": pt.series,
            });
        }
        "ballisticity" => {
            let gs = spec_graph(&spec)?;
            let g = gs.build_graph()?;
            let (x, y) = central_adjacent_pair(&g)?;
            let rep = exp::ballisticity_patch(&g, p, x, y, n_max as u32, samples, seed, 100)?;
            doc.check(
                "log-linear",
                rep.r_squared >= 0.97,
                format!("R^2 = {:.4} over n in {:?}", rep.r_squared, rep.fit_range),
            );
            doc.results = json!({
                "r_squared": rep.r_squared,
                "rate": -rep.fit.slope,
                "connected": rep.connected_samples,
                "tail": rep.conditional_hits,
            });
        }
        other => return Err(invalid(format!("unknown experiment {other:?}"))),
    }
    write_doc(&dir, &format!("exponent-{}.json", spec.get("experiment").unwrap()), &doc)?;
    Ok(doc)
}

fn central_adjacent_pair(g: &percolib::Graph) -> Result<(u32, u32), CliError> {
    let bdist = g.boundary_distance();
    let x = (0..g.vertex_count())
        .max_by_key(|&v| bdist[v as usize])
        .unwrap();
    let y = g
        .neighbors(x)
        .max_by_key(|&(w, _)| bdist[w as usize])
        .map(|(w, _)| w)
        .ok_or_else(|| invalid("graph has an isolated vertex"))?;
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// duality
// ---------------------------------------------------------------------------

fn run_duality(c: Common, mode: String) -> Result<ResultDoc, CliError> {
    let mut spec = resolve_spec("duality", &c)?;
    spec.set("mode", &mode);
    let samples = spec_u64(&spec, "samples", 4000)?;
    let seed = spec_u64(&spec, "seed", 0)?;
    let dir = out_dir(&c);
    let mut doc = ResultDoc::new(&spec);

    match spec.get("mode").unwrap_or("calibrate") {
        "calibrate" => {
            let p_grid: Vec<f64> = (0..=10).map(|i| 0.40 + 0.02 * i as f64).collect();
            let est = exp::estimate_pc_grid_crossing(&[6, 10, 14], &p_grid, samples, seed)?;
            doc.check(
                "square-pc-half",
                (est.value - 0.5).abs() <= 0.02,
                format!("pc = {:.4} +- {:.4}", est.value, est.err),
            );
            doc.results = json!({ "pc": est.value, "err": est.err, "per_size": est.per_size });
        }
        "roleswap" => {
            let layers = spec_u64(&spec, "n", 8)? as u32;
            let direct = percolib::map::build_tiling(7, 3, layers)?;
            let via_dual = percolib::map::build_tiling(3, 7, (layers / 2).max(4))?.dual()?;
            let p_grid: Vec<f64> = (0..=12).map(|i| 0.44 + 0.015 * i as f64).collect();
            let windows = [(2u32, 6u32), (3, 8)];
            let a = exp::estimate_pc_shell_ratio(direct.graph(), 0, &windows, &p_grid, samples, seed)?;
            let b = exp::estimate_pc_shell_ratio(via_dual.map.graph(), 0, &windows, &p_grid, samples, seed ^ 1)?;
            let gap = (a.value - b.value).abs();
            doc.check(
                "role-swap-consistent",
                gap <= a.err + b.err,
                format!("{:.4}+-{:.4} vs {:.4}+-{:.4}", a.value, a.err, b.value, b.err),
            );
            doc.results = json!({
                "pc_direct": a.value, "err_direct": a.err,
                "pc_via_dual": b.value, "err_via_dual": b.err,
                "pu_transported": 1.0 - a.value,
            });
        }
        "pu" => {
            let layers = spec_u64(&spec, "n", 6)? as u32;
            let m = percolib::map::build_tiling(3, 7, layers)?;
            let d = m.dual()?;
            let p_grid: Vec<f64> = (0..=12).map(|i| 0.44 + 0.015 * i as f64).collect();
            let pc_dual = exp::estimate_pc_shell_ratio(d.map.graph(), 0, &[(2, 5), (2, 6)], &p_grid, samples, seed)?;
            let merge_grid: Vec<f64> = (0..=8).map(|i| 0.30 + 0.04 * i as f64).collect();
            let rep = duality::pu_duality(m.graph(), pc_dual, &merge_grid, samples.min(200), seed, 0.2)?;
            doc.check(
                "transport-defined",
                rep.pu_transported > 0.0 && rep.pu_transported < 1.0,
                format!("pu = {:.4} +- {:.4}", rep.pu_transported, rep.pu_transported_err),
            );
            if let Some(diag) = rep.pu_primal_diagnostic {
                doc.check(
                    "primal-diagnostic-agrees",
                    (diag - rep.pu_transported).abs() <= 3.0 * (rep.pu_transported_err + 0.02),
                    format!("merge-scan pu = {diag:.4}"),
                );
            }
            doc.results = json!({
                "pu_transported": rep.pu_transported,
                "err": rep.pu_transported_err,
                "merge_scan": rep.merge_scan,
                "primal_diagnostic": rep.pu_primal_diagnostic,
            });
        }
        "geometry" => {
            let layers = spec_u64(&spec, "n", 9)? as u32;
            let p = spec_f64(&spec, "p", 0.47)?;
            let m = percolib::map::build_tiling(3, 7, layers)?;
            let d = m.dual()?;
            let g = m.graph();
            let (x, y) = interior_dual_pair(g, &d)?;
            let rep = duality::pu_geometry(g, &d, p, x, y, 28, 10, (3, 24), (2, 8), samples, seed, 1 << 22)?;
            doc.check(
                "sandwich-distinct-clusters",
                rep.sandwich.distinct_violations == 0,
                format!("{} checked, {} boundary-skipped", rep.sandwich.checked, rep.sandwich.boundary_skipped),
            );
            doc.check(
                "no-aborts",
                rep.aborted == 0,
                format!("{} aborted explorations", rep.aborted),
            );
            doc.results = json!({
                "d_int_slope": rep.d_int_fit.slope,
                "d_int_stderr": rep.d_int_fit.slope_stderr,
                "conrad_slope": rep.conrad_fit.slope,
                "conrad_stderr": rep.conrad_fit.slope_stderr,
                "connected": rep.connected,
                "sandwich": {
                    "volume_ratio_min": rep.sandwich.volume_ratio_min,
                    "volume_ratio_max": rep.sandwich.volume_ratio_max,
                    "conrad_ratio_min": rep.sandwich.conrad_ratio_min,
                    "conrad_ratio_max": rep.sandwich.conrad_ratio_max,
                },
            });
        }
        other => return Err(invalid(format!("unknown duality mode {other:?}"))),
    }
    write_doc(&dir, &format!("duality-{}.json", spec.get("mode").unwrap()), &doc)?;
    Ok(doc)
}

fn interior_dual_pair(
    g: &percolib::Graph,
    d: &percolib::map::DualMap,
) -> Result<(u32, u32), CliError> {
    let bdist = g.boundary_distance();
    let best = (0..g.vertex_count()).max_by_key(|&v| bdist[v as usize]).unwrap();
    for (w, e) in g.neighbors(best) {
        if d.dual_edge_of_primal[e as usize].is_some() {
            return Ok((best, w));
        }
    }
    Err(invalid("no interior edge at the central vertex"))
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn run_sweep(c: Common, p_list: Option<String>, window_radius: u32) -> Result<ResultDoc, CliError> {
    let mut spec = resolve_spec("sweep", &c)?;
    if let Some(pl) = &p_list {
        spec.set("p_list", pl);
    }
    spec.set("window_radius", window_radius);
    let gs = spec_graph(&spec)?;
    let g = gs.build_graph()?;
    if g.edge_count() + 1 != g.vertex_count() {
        return Err(invalid("sweep uses exact tree matrices; pass a tree(k,d) graph"));
    }
    let dir = out_dir(&c);
    let p_grid: Vec<f64> = spec
        .get("p_list")
        .unwrap_or("0.1,0.2,0.3,0.4,0.45")
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad p {t:?}"))))
        .collect::<Result<_, _>>()?;
    let window = matrix::ball_window(&g, 0, window_radius);
    let degree = g.degree(0) as f64;
    let mut doc = ResultDoc::new(&spec).with_graph(g.fingerprint());

    let q = spec_f64(&spec, "q", 2.0)?;
    let curve = norms::norm_vs_p_curve_tree(&g, q, &p_grid, &window, degree, norms::DEFAULT_NORM_TOL)?;
    let monotone = curve.windows(2).all(|w| w[1].norm.value >= w[0].norm.value - 1e-9);
    doc.check("norm-monotone-in-p", monotone, "coupled monotonicity");

    let q_grid: Vec<f64> = spec
        .get("q_list")
        .unwrap_or("1.1,1.25,1.5,1.75,2.0")
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad q {t:?}"))))
        .collect::<Result<_, _>>()?;
    let p_top = *p_grid.last().unwrap();
    let t = matrix::tree_exact_matrix(&g, p_top, MatrixKind::TwoPoint, &window)?;
    let qcurve = norms::norm_vs_q_curve(&t, &q_grid, norms::DEFAULT_NORM_TOL)?;

    doc.results = json!({
        "p_curve": curve.iter().map(|pt| json!({
            "p": pt.p, "norm": pt.norm.value, "implied_pqq_lower": pt.implied_pqq_lower,
        })).collect::<Vec<_>>(),
        "q_curve": qcurve.series.iter().map(|(q, r)| json!({"q": q, "norm": r.value})).collect::<Vec<_>>(),
        "q_scaled_band_ratio": qcurve.scaled_band_ratio,
    });
    if want_csv(&spec) {
        let rows: Vec<(f64, f64, Option<f64>)> =
            curve.iter().map(|pt| (pt.p, pt.norm.value, None)).collect();
        formats::write_file(&dir.join("norm-vs-p.csv"), formats::series_to_csv("p,norm", &rows).as_bytes())?;
        formats::write_file(
            &dir.join("norm-vs-p.gp"),
            formats::gnuplot_script("norm-vs-p.csv", "two-point operator norm", false).as_bytes(),
        )?;
    }
    write_doc(&dir, "sweep.json", &doc)?;
    Ok(doc)
}

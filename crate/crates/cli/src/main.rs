//! Benchmark runner and scaling harness: selects a kernel, problem size,
//! layout and partitioning, runs it on the work-stealing executor, and emits
//! timing CSV, scaling-efficiency reports, worker statistics and field dumps.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use surge::graph::{plain, FrozenGraph, Graph, ReductionResult, SumReducer};
use surge::kernels::{
    eikonal_graph, eikonal_init, eikonal_residual, eikonal_schema, euler_schema,
    euler_solver_graph, flux_difference_graph, particle_schema, particle_update_graph,
    saxpy_graph, scaling_metrics, shock_bubble_init, stencil_diff_graph, EulerParams,
    ShockBubbleConfig, EIKONAL_PHI, EULER_ENERGY, EULER_MOMENTUM, EULER_RHO, PARTICLE_POSITION,
    PARTICLE_VELOCITY, KERNEL_NAMES,
};
use surge::layout::{convert_layout, LayoutKind, RecordSchema};
use surge::sched::{Executor, ExecutorConfig, StealStrategy};
use surge::tensor::{BoundaryKind, Extents, PartitionSpec, Tensor};
use surge::{Error, Result};

/// Benchmark runner for the tensor/graph runtime.
#[derive(Parser, Debug)]
#[command(name = "surge", about = "benchmark runner and scaling harness")]
struct Args {
    /// Kernel to run: saxpy, particle, flux, eikonal, euler, stencil
    #[arg(long)]
    bench: Option<String>,

    /// Problem extents, e.g. 1000000 or 640,400
    #[arg(long)]
    size: Option<String>,

    /// Data layout: aos (contiguous records) or soa (strided planes)
    #[arg(long, default_value = "aos")]
    layout: String,

    /// Partitions per dimension, e.g. 4 or 2,2
    #[arg(long)]
    partitions: Option<String>,

    /// Sub-partitions per dimension
    #[arg(long)]
    subpartitions: Option<String>,

    #[arg(long, default_value_t = 1)]
    device_workers: usize,

    #[arg(long, default_value_t = 1)]
    host_workers: usize,

    /// Solver steps per activation (euler)
    #[arg(long, default_value_t = 1000)]
    steps: usize,

    /// Timed repeats after one warm-up activation
    #[arg(long, default_value_t = 3)]
    repeats: usize,

    /// Seed for input data and the random steal strategy
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Steal strategy: random or roundrobin
    #[arg(long, default_value = "roundrobin")]
    steal: String,

    /// Dump the result field as CSV to this path
    #[arg(long)]
    dump: Option<PathBuf>,

    /// Append timing rows to this CSV file
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Write per-worker executor statistics CSV to this path
    #[arg(long)]
    stats: Option<PathBuf>,

    /// Device-worker counts for a strong-scaling report, e.g. 1,2,4
    /// (must include the 1-worker baseline)
    #[arg(long)]
    scaling: Option<String>,

    /// Run the fast invariant self-test suite and exit
    #[arg(long, default_value_t = false)]
    selftest: bool,

    /// Self-test only: inject a halo fault to prove the suite detects it
    #[arg(long, default_value_t = false, hide = true)]
    inject_fault: bool,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid {what} component {p:?}")))
        })
        .collect()
}

struct Bench {
    graph: FrozenGraph,
    /// Re-initializes input data before each timed repeat (None when an
    /// activation is idempotent on its inputs).
    reinit: Option<Box<dyn Fn()>>,
    /// Tensor and component to dump after the final run.
    dump_src: (Tensor, usize, usize),
    blocks: usize,
}

struct BenchSetup {
    name: String,
    extents: Vec<usize>,
    layout: LayoutKind,
    partitions: Vec<usize>,
    subpartitions: Vec<usize>,
    steps: usize,
    seed: u64,
}

fn default_size(bench: &str) -> Vec<usize> {
    match bench {
        "saxpy" | "particle" | "stencil" => vec![1_000_000],
        "flux" => vec![512, 512],
        "eikonal" => vec![256, 256],
        "euler" => vec![640, 400],
        _ => vec![1_000_000],
    }
}

fn default_partitions(dims: usize) -> Vec<usize> {
    if dims == 1 {
        vec![4]
    } else {
        let mut p = vec![1; dims];
        p[0] = 2;
        p[1] = 2;
        p
    }
}

fn spec_for(setup: &BenchSetup) -> Result<PartitionSpec> {
    PartitionSpec::with_subpartitions(&setup.partitions, &setup.subpartitions)
}

fn build_bench(setup: &BenchSetup) -> Result<Bench> {
    let exts = Extents::new(&setup.extents)?;
    let spec = spec_for(setup)?;
    let blocks = spec.block_count();
    let mut rng = StdRng::seed_from_u64(setup.seed);
    match setup.name.as_str() {
        "saxpy" => {
            let x = Tensor::new(RecordSchema::scalar_f64(setup.layout), spec.clone(), 0, exts)?;
            let y = Tensor::new(RecordSchema::scalar_f64(setup.layout), spec, 0, exts)?;
            let n = exts.cell_count();
            let vals: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            x.fill_with(0, 0, |c| vals[c[0]]);
            let yt = y.clone();
            let reinit = move || yt.fill_with(0, 0, |c| vals[n + c[0]]);
            reinit();
            let graph = saxpy_graph(1.5, &x, &y)?.freeze()?;
            Ok(Bench { graph, reinit: Some(Box::new(reinit)), dump_src: (y, 0, 0), blocks })
        }
        "particle" => {
            let p = Tensor::new(particle_schema(setup.layout), spec, 0, exts)?;
            let n = exts.cell_count();
            let vals: Vec<f64> = (0..6 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for i in 0..n {
                for l in 0..3 {
                    p.set_global_f64(PARTICLE_POSITION, l, &[i], vals[6 * i + l]);
                    p.set_global_f64(PARTICLE_VELOCITY, l, &[i], vals[6 * i + 3 + l]);
                }
            }
            let graph = particle_update_graph(&p, 0.01)?.freeze()?;
            Ok(Bench { graph, reinit: None, dump_src: (p, PARTICLE_POSITION, 0), blocks })
        }
        "stencil" => {
            let x = Tensor::new(RecordSchema::scalar_f64(setup.layout), spec.clone(), 1, exts)?;
            let y = Tensor::new(RecordSchema::scalar_f64(setup.layout), spec, 1, exts)?;
            let n = exts.cell_count();
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            x.fill_with(0, 0, |c| vals[c[0]]);
            let graph = stencil_diff_graph(&x, &y)?.freeze()?;
            Ok(Bench { graph, reinit: None, dump_src: (y, 0, 0), blocks })
        }
        "flux" => {
            if setup.extents.len() != 2 {
                return Err(Error::Config("flux needs a 2-D size, e.g. --size 512,512".into()));
            }
            let input = Tensor::new(euler_schema(setup.layout), spec.clone(), 1, exts)?;
            let out = Tensor::new(euler_schema(setup.layout), spec, 1, exts)?;
            let (nx, ny) = (setup.extents[0], setup.extents[1]);
            for y in 0..ny {
                for x in 0..nx {
                    let rho = rng.gen_range(0.5..2.0);
                    let p = rng.gen_range(0.5..2.0);
                    let u = rng.gen_range(-0.3..0.3);
                    let v = rng.gen_range(-0.3..0.3);
                    let e = p / 0.4 + 0.5 * rho * (u * u + v * v);
                    input.set_global_f64(EULER_RHO, 0, &[x, y], rho);
                    input.set_global_f64(EULER_ENERGY, 0, &[x, y], e);
                    input.set_global_f64(EULER_MOMENTUM, 0, &[x, y], rho * u);
                    input.set_global_f64(EULER_MOMENTUM, 1, &[x, y], rho * v);
                }
            }
            input.load_boundary(&BoundaryKind::Clamp);
            let h = [1.0 / nx as f64, 1.0 / ny as f64];
            let graph = flux_difference_graph(&input, &out, 1e-4, h, 1.4)?.freeze()?;
            Ok(Bench { graph, reinit: None, dump_src: (out, EULER_RHO, 0), blocks })
        }
        "eikonal" => {
            if setup.extents.len() != 2 {
                return Err(Error::Config("eikonal needs a 2-D size, e.g. --size 256,256".into()));
            }
            let grid = Tensor::new(eikonal_schema(setup.layout), spec, 1, exts)?;
            let residual = eikonal_residual(&grid)?;
            let src = [setup.extents[0] / 2, setup.extents[1] / 2];
            let gt = grid.clone();
            let reinit = move || eikonal_init(&gt, &[src], 1.0);
            reinit();
            let h = 1.0 / setup.extents[1] as f64;
            let graph = eikonal_graph(&grid, &residual, h)?.freeze()?;
            Ok(Bench {
                graph,
                reinit: Some(Box::new(reinit)),
                dump_src: (grid, EIKONAL_PHI, 0),
                blocks,
            })
        }
        "euler" => {
            if setup.extents.len() != 2 {
                return Err(Error::Config("euler needs a 2-D size, e.g. --size 640,400".into()));
            }
            let input = Tensor::new(euler_schema(setup.layout), spec.clone(), 1, exts)?;
            let out = Tensor::new(euler_schema(setup.layout), spec.clone(), 1, exts)?;
            let ws = Tensor::new(RecordSchema::scalar_f64(setup.layout), spec, 0, exts)?;
            let cfg = ShockBubbleConfig::default().scaled_to(&setup.extents);
            let it = input.clone();
            let cfg2 = cfg.clone();
            let reinit = move || shock_bubble_init(&it, &cfg2);
            reinit();
            let max_ws = ReductionResult::new();
            let params = EulerParams { h: cfg.h, ..Default::default() };
            let graph =
                euler_solver_graph(&input, &out, &ws, &max_ws, setup.steps, params)?.freeze()?;
            Ok(Bench {
                graph,
                reinit: Some(Box::new(reinit)),
                dump_src: (input, EULER_RHO, 0),
                blocks,
            })
        }
        other => Err(Error::Config(format!(
            "unknown bench {other:?}; registered kernels: {}",
            KERNEL_NAMES.join(", ")
        ))),
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

struct TimingRecord {
    times: Vec<f64>,
    min: f64,
    median: f64,
}

fn run_bench(bench: &Bench, ex: &Executor, repeats: usize) -> Result<TimingRecord> {
    // warm-up activation
    if let Some(reinit) = &bench.reinit {
        reinit();
    }
    ex.run_and_wait(&bench.graph)?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        if let Some(reinit) = &bench.reinit {
            reinit();
        }
        let start = Instant::now();
        ex.run_and_wait(&bench.graph)?;
        times.push(start.elapsed().as_secs_f64());
    }
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(TimingRecord { min: sorted[0], median: median(&sorted), times })
}

fn executor_for(args: &Args, device_workers: usize) -> Result<Executor> {
    let steal_strategy = match args.steal.as_str() {
        "random" => StealStrategy::Random,
        "roundrobin" => StealStrategy::RoundRobin,
        other => return Err(Error::Config(format!("unknown steal strategy {other:?}"))),
    };
    Executor::new(ExecutorConfig {
        device_workers,
        host_workers: args.host_workers,
        steal_strategy,
        seed: args.seed,
        ..Default::default()
    })
}

fn append_csv(path: &PathBuf, header: &str, rows: &str) -> Result<()> {
    let mut body = String::new();
    if !path.exists() {
        body.push_str(header);
        body.push('\n');
    }
    body.push_str(rows);
    use std::io::Write;
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

const TIMING_HEADER: &str =
    "bench,layout,extents,blocks,device_workers,host_workers,steps,repeat,seconds";

fn run(args: &Args) -> Result<()> {
    let bench_name = args
        .bench
        .clone()
        .ok_or_else(|| Error::Config(format!("--bench is required; kernels: {}", KERNEL_NAMES.join(", "))))?;
    let layout = match args.layout.as_str() {
        "aos" => LayoutKind::Contiguous,
        "soa" => LayoutKind::Strided,
        other => return Err(Error::Config(format!("unknown layout {other:?} (aos|soa)"))),
    };
    let extents = match &args.size {
        Some(s) => parse_list(s, "size")?,
        None => default_size(&bench_name),
    };
    let partitions = match &args.partitions {
        Some(s) => parse_list(s, "partitions")?,
        None => default_partitions(extents.len()),
    };
    let subpartitions = match &args.subpartitions {
        Some(s) => parse_list(s, "subpartitions")?,
        None => vec![1; extents.len()],
    };
    let setup = BenchSetup {
        name: bench_name.clone(),
        extents: extents.clone(),
        layout,
        partitions,
        subpartitions,
        steps: args.steps,
        seed: args.seed,
    };
    let bench = build_bench(&setup)?;
    let extents_str =
        extents.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("x");

    if let Some(spec) = &args.scaling {
        // strong-scaling sweep over device-worker counts
        let counts = parse_list(spec, "scaling")?;
        if !counts.contains(&1) {
            return Err(Error::Input("--scaling needs the 1-worker baseline".into()));
        }
        let mut medians = Vec::new();
        for &n in &counts {
            let ex = executor_for(args, n)?;
            let rec = run_bench(&bench, &ex, args.repeats)?;
            medians.push((n, rec.median));
        }
        let t1 = medians.iter().find(|(n, _)| *n == 1).unwrap().1;
        println!("# strong-scaling report: bench={bench_name} extents={extents_str} (median of {} repeats)", args.repeats);
        println!("n_workers,seconds,strong_eff,weak_eff");
        for (n, tn) in medians {
            let m = scaling_metrics(t1, tn, n)?;
            println!("{n},{tn:.6},{:.2},{:.2}", m.strong_eff, m.weak_eff);
        }
        return Ok(());
    }

    let ex = executor_for(args, args.device_workers)?;
    let rec = run_bench(&bench, &ex, args.repeats)?;

    println!(
        "bench={bench_name} layout={} extents={extents_str} blocks={} workers={}+{} steps={}",
        args.layout, bench.blocks, args.device_workers, args.host_workers, args.steps
    );
    println!(
        "repeats={} min={:.6}s median={:.6}s",
        args.repeats, rec.min, rec.median
    );

    if let Some(path) = &args.csv {
        let mut rows = String::new();
        for (i, t) in rec.times.iter().enumerate() {
            writeln!(
                rows,
                "{bench_name},{},{extents_str},{},{},{},{},{i},{t:.9}",
                args.layout, bench.blocks, args.device_workers, args.host_workers, args.steps
            )
            .unwrap();
        }
        append_csv(path, TIMING_HEADER, &rows)?;
    }
    if let Some(path) = &args.stats {
        let mut rows = String::from("worker_id,domain,processed_nodes,steals_ok,steals_failed\n");
        for s in ex.stats() {
            writeln!(
                rows,
                "{},{:?},{},{},{}",
                s.worker_id, s.domain, s.processed_nodes, s.steals_ok, s.steals_failed
            )
            .unwrap();
        }
        std::fs::write(path, rows)?;
    }
    if let Some(path) = &args.dump {
        let (t, c, l) = &bench.dump_src;
        t.dump_field(*c, *l, path)?;
        println!("field dump written to {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Self-test: fast invariant suite, exits nonzero on any failure.
// ---------------------------------------------------------------------------

fn selftest(inject_fault: bool) -> ExitCode {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        println!("selftest {name}: {}", if ok { "pass" } else { "FAIL" });
        if !ok {
            failures.push(name.to_string());
        }
    };

    // layout bijection: converting AoS -> SoA -> AoS is bit-identical
    {
        let spec = PartitionSpec::new(&[1]).unwrap();
        let exts = Extents::new(&[64]).unwrap();
        let t = Tensor::new(
            RecordSchema::scalar_f64(LayoutKind::Contiguous),
            spec,
            0,
            exts,
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        let vals: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        t.fill_with(0, 0, |c| vals[c[0]]);
        let src = t.block(0).storage();
        let round = convert_layout(&convert_layout(&src, LayoutKind::Strided), LayoutKind::Contiguous);
        let ok = (0..64).all(|i| src.get(0, 0, i).unwrap() == round.get(0, 0, i).unwrap());
        check("layout bijection", ok);
    }

    // halo soundness: 4-block exchange equals the single-block field
    {
        let spec = PartitionSpec::new(&[4]).unwrap();
        let t = Tensor::new(
            RecordSchema::scalar_f64(LayoutKind::Contiguous),
            spec,
            1,
            Extents::new(&[32]).unwrap(),
        )
        .unwrap();
        t.fill_with(0, 0, |c| c[0] as f64);
        t.exchange_halos();
        if inject_fault {
            surge::tensor::corrupt_padding_for_test(&t, 1);
        }
        let mut ok = true;
        for b in 0..4 {
            let block = t.block(b);
            let storage = block.storage();
            // low-face padding must hold the left neighbor's last interior cell
            if b > 0 {
                let got = storage.get(0, 0, block.linear(&[0, 0, 0])).unwrap();
                ok &= got == surge::layout::ScalarValue::F64((b * 8 - 1) as f64);
            }
            if b < 3 {
                let got = storage.get(0, 0, block.linear(&[9, 0, 0])).unwrap();
                ok &= got == surge::layout::ScalarValue::F64((b * 8 + 8) as f64);
            }
        }
        check("halo soundness", ok);
    }

    // diamond graph stress: 100 parallel activations, exactly-once each
    {
        let counter = std::sync::Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let mut g = Graph::default();
        let c0 = counter.clone();
        g.emplace(move || {
            c0.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            Ok(())
        });
        for _ in 0..2 {
            let c = counter.clone();
            g.emplace(move || {
                c.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                Ok(())
            });
        }
        let c3 = counter.clone();
        g.then(move || {
            c3.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            Ok(())
        });
        let f = g.freeze().unwrap();
        let ex = Executor::new(ExecutorConfig {
            device_workers: 2,
            host_workers: 2,
            ..Default::default()
        })
        .unwrap();
        let mut ok = true;
        for _ in 0..100 {
            ok &= ex.run_and_wait(&f).is_ok();
        }
        ok &= counter.load(std::sync::atomic::Ordering::Relaxed) == 400;
        ok &= f.counters_restored();
        check("diamond graph stress", ok);
    }

    // reduction sum over 4 blocks
    {
        let t = Tensor::new(
            RecordSchema::scalar_f64(LayoutKind::Strided),
            PartitionSpec::new(&[4]).unwrap(),
            0,
            Extents::new(&[4096]).unwrap(),
        )
        .unwrap();
        let result = ReductionResult::new();
        let mut g = Graph::default();
        g.split(|c| c[0].set_value(1.0), &[plain(&t)]).unwrap();
        g.then_reduce(&t, &result, SumReducer).unwrap();
        let ok = g.freeze().unwrap().run_serial().is_ok() && result.value() == 4096.0;
        check("reduction sum", ok);
    }

    if failures.is_empty() {
        println!("selftest: all checks passed");
        ExitCode::SUCCESS
    } else {
        println!("selftest: {} check(s) failed: {}", failures.len(), failures.join(", "));
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.selftest {
        return selftest(args.inject_fault);
    }
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

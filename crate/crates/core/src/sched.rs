//! Dual-domain work-stealing executor. Device-priority workers own a device
//! queue and a host queue and prefer device work; host-priority workers own
//! a host queue only. Idle workers steal from peers (host queues from
//! anyone, device queues from device workers) and park after repeated
//! failures. Node execution follows the restore-run-decrement discipline
//! that keeps dependency counters re-armed for conditional re-activation.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use crossbeam_deque::{Injector, Steal, Stealer, Worker as Deque};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::graph::{ExecutionKind, FrozenGraph, Work};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StealStrategy {
    Random,
    RoundRobin,
}

#[derive(Debug, Clone, Copy)]
pub struct ExecutorConfig {
    pub device_workers: usize,
    pub host_workers: usize,
    pub steal_strategy: StealStrategy,
    /// Victims probed per steal call.
    pub steal_attempts: usize,
    /// Consecutive failed work rounds before a worker parks.
    pub park_threshold: usize,
    /// Seed for the per-worker random steal generators.
    pub seed: u64,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            device_workers: 1,
            host_workers: 1,
            steal_strategy: StealStrategy::RoundRobin,
            steal_attempts: 4,
            park_threshold: 4,
            seed: 0,
        }
    }
}

/// Per-worker execution statistics, dumpable as CSV by the harness.
#[derive(Debug, Clone)]
pub struct WorkerStats {
    pub worker_id: usize,
    pub domain: ExecutionKind,
    pub processed_nodes: usize,
    pub steals_ok: usize,
    pub steals_failed: usize,
}

/// One graph activation in flight: the executable plus completion state.
struct RunCtx {
    graph: FrozenGraph,
    pending: AtomicUsize,
    error: Mutex<Option<Error>>,
    failed: AtomicBool,
    done: Mutex<bool>,
    done_cv: Condvar,
}

impl RunCtx {
    fn finish_node(&self) {
        if self.pending.fetch_sub(1, Ordering::AcqRel) == 1 {
            let mut done = self.done.lock().unwrap();
            *done = true;
            self.done_cv.notify_all();
        }
    }

    fn record_error(&self, e: Error) {
        let mut slot = self.error.lock().unwrap();
        if slot.is_none() {
            *slot = Some(e);
        }
        self.failed.store(true, Ordering::Release);
    }
}

type Task = (Arc<RunCtx>, usize);

struct WorkerShared {
    domain: ExecutionKind,
    host_stealer: Stealer<Task>,
    device_stealer: Option<Stealer<Task>>,
    host_inbox: Injector<Task>,
    device_inbox: Option<Injector<Task>>,
    processed: AtomicUsize,
    steals_ok: AtomicUsize,
    steals_failed: AtomicUsize,
    parked: AtomicBool,
}

struct Shared {
    workers: Vec<WorkerShared>,
    device_ids: Vec<usize>,
    shutdown: AtomicBool,
    config: ExecutorConfig,
    // round-robin cursors for cross-worker dispatch of seeds/successors
    device_cursor: AtomicUsize,
    host_cursor: AtomicUsize,
    park_lock: Mutex<()>,
    park_cv: Condvar,
}

impl Shared {
    fn wake_all(&self) {
        let _g = self.park_lock.lock().unwrap();
        self.park_cv.notify_all();
    }

    /// Sends a ready task to some worker's inbox for the given domain.
    fn dispatch_remote(&self, task: Task, kind: ExecutionKind) {
        match kind {
            ExecutionKind::Device => {
                let i = self.device_cursor.fetch_add(1, Ordering::Relaxed) % self.device_ids.len();
                let w = &self.workers[self.device_ids[i]];
                w.device_inbox.as_ref().unwrap().push(task);
            }
            ExecutionKind::Host => {
                let i = self.host_cursor.fetch_add(1, Ordering::Relaxed) % self.workers.len();
                self.workers[i].host_inbox.push(task);
            }
        }
        self.wake_all();
    }
}

/// Queues owned by one worker thread.
struct WorkerCtx {
    id: usize,
    domain: ExecutionKind,
    host_queue: Deque<Task>,
    device_queue: Option<Deque<Task>>,
    rng: StdRng,
    rr_cursor: usize,
}

impl WorkerCtx {
    fn queue(&self, kind: ExecutionKind) -> Option<&Deque<Task>> {
        match kind {
            ExecutionKind::Host => Some(&self.host_queue),
            ExecutionKind::Device => self.device_queue.as_ref(),
        }
    }
}

pub struct Executor {
    shared: Arc<Shared>,
    threads: Vec<std::thread::JoinHandle<()>>,
}

/// Completion handle for one submitted activation.
pub struct RunHandle {
    ctx: Option<Arc<RunCtx>>,
}

impl RunHandle {
    /// Blocks until every node of the activation (including conditional
    /// re-activations) has completed; returns the first node error, if any.
    pub fn wait(self) -> Result<()> {
        let Some(ctx) = self.ctx else { return Ok(()) };
        let mut done = ctx.done.lock().unwrap();
        while !*done {
            done = ctx.done_cv.wait(done).unwrap();
        }
        drop(done);
        let err = ctx.error.lock().unwrap().take();
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl Executor {
    pub fn new(config: ExecutorConfig) -> Result<Self> {
        if config.device_workers + config.host_workers == 0 {
            return Err(Error::Config("executor needs at least one worker".into()));
        }
        let n = config.device_workers + config.host_workers;
        let mut workers = Vec::with_capacity(n);
        let mut ctxs = Vec::with_capacity(n);
        let mut device_ids = Vec::new();
        for id in 0..n {
            let domain = if id < config.device_workers {
                ExecutionKind::Device
            } else {
                ExecutionKind::Host
            };
            let host_queue: Deque<Task> = Deque::new_fifo();
            let device_queue = (domain == ExecutionKind::Device).then(Deque::new_fifo);
            if domain == ExecutionKind::Device {
                device_ids.push(id);
            }
            workers.push(WorkerShared {
                domain,
                host_stealer: host_queue.stealer(),
                device_stealer: device_queue.as_ref().map(|q| q.stealer()),
                host_inbox: Injector::new(),
                device_inbox: (domain == ExecutionKind::Device).then(Injector::new),
                processed: AtomicUsize::new(0),
                steals_ok: AtomicUsize::new(0),
                steals_failed: AtomicUsize::new(0),
                parked: AtomicBool::new(false),
            });
            ctxs.push(WorkerCtx {
                id,
                domain,
                host_queue,
                device_queue,
                rng: StdRng::seed_from_u64(config.seed.wrapping_add(id as u64)),
                rr_cursor: (id + 1) % n,
            });
        }
        let shared = Arc::new(Shared {
            workers,
            device_ids,
            shutdown: AtomicBool::new(false),
            config,
            device_cursor: AtomicUsize::new(0),
            host_cursor: AtomicUsize::new(0),
            park_lock: Mutex::new(()),
            park_cv: Condvar::new(),
        });
        let threads = ctxs
            .into_iter()
            .map(|ctx| {
                let shared = shared.clone();
                std::thread::Builder::new()
                    .name(format!("worker-{}", ctx.id))
                    .spawn(move || worker_loop(shared, ctx))
                    .expect("failed to spawn worker thread")
            })
            .collect();
        Ok(Self { shared, threads })
    }

    /// Submits one activation: seeds every zero-dependency node onto worker
    /// inboxes (device nodes round-robin across device workers, host nodes
    /// across all workers) and returns a completion handle.
    pub fn run(&self, graph: &FrozenGraph) -> Result<RunHandle> {
        if graph.is_empty() {
            return Ok(RunHandle { ctx: None });
        }
        let needs_device = (0..graph.len()).any(|i| graph.kind(i) == ExecutionKind::Device);
        if needs_device && self.shared.device_ids.is_empty() {
            return Err(Error::Usage(
                "graph contains device nodes but the executor has no device workers".into(),
            ));
        }
        let ctx = Arc::new(RunCtx {
            graph: graph.clone(),
            pending: AtomicUsize::new(graph.len()),
            error: Mutex::new(None),
            failed: AtomicBool::new(false),
            done: Mutex::new(false),
            done_cv: Condvar::new(),
        });
        for &r in graph.roots() {
            self.shared.dispatch_remote((ctx.clone(), r), graph.kind(r));
        }
        Ok(RunHandle { ctx: Some(ctx) })
    }

    pub fn run_and_wait(&self, graph: &FrozenGraph) -> Result<()> {
        self.run(graph)?.wait()
    }

    pub fn stats(&self) -> Vec<WorkerStats> {
        self.shared
            .workers
            .iter()
            .enumerate()
            .map(|(id, w)| WorkerStats {
                worker_id: id,
                domain: w.domain,
                processed_nodes: w.processed.load(Ordering::Relaxed),
                steals_ok: w.steals_ok.load(Ordering::Relaxed),
                steals_failed: w.steals_failed.load(Ordering::Relaxed),
            })
            .collect()
    }

    /// Number of workers currently parked waiting for work.
    pub fn parked_workers(&self) -> usize {
        self.shared
            .workers
            .iter()
            .filter(|w| w.parked.load(Ordering::Acquire))
            .count()
    }
}

impl Drop for Executor {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::Release);
        self.shared.wake_all();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

fn worker_loop(shared: Arc<Shared>, mut ctx: WorkerCtx) {
    let secondary = match ctx.domain {
        ExecutionKind::Device => Some(ExecutionKind::Host),
        ExecutionKind::Host => None,
    };
    let mut failures = 0usize;
    loop {
        let primary = ctx.domain;
        let did = execute_work(&shared, &mut ctx, primary)
            || secondary.is_some_and(|q| execute_work(&shared, &mut ctx, q));
        if did {
            failures = 0;
            continue;
        }
        if shared.shutdown.load(Ordering::Acquire) {
            break;
        }
        failures += 1;
        if failures >= shared.config.park_threshold {
            // park with a timeout: a timed wait cannot miss a wake-up
            // between the failed probe and the sleep
            shared.workers[ctx.id].parked.store(true, Ordering::Release);
            let guard = shared.park_lock.lock().unwrap();
            let _ = shared
                .park_cv
                .wait_timeout(guard, Duration::from_millis(1))
                .unwrap();
            shared.workers[ctx.id].parked.store(false, Ordering::Release);
            failures = 0;
        } else {
            std::thread::yield_now();
        }
    }
}

/// One work round for the given queue kind: pop own queue (falling back to
/// the inbox); if the node is not ready push it back; otherwise run it.
/// With nothing local, try to steal.
fn execute_work(shared: &Shared, ctx: &mut WorkerCtx, kind: ExecutionKind) -> bool {
    let Some(queue) = ctx.queue(kind) else { return false };
    let task = queue.pop().or_else(|| {
        let inbox = match kind {
            ExecutionKind::Host => &shared.workers[ctx.id].host_inbox,
            ExecutionKind::Device => shared.workers[ctx.id].device_inbox.as_ref().unwrap(),
        };
        loop {
            match inbox.steal() {
                Steal::Success(t) => break Some(t),
                Steal::Empty => break None,
                Steal::Retry => {}
            }
        }
    });
    if let Some(task) = task {
        if try_execute(shared, ctx, &task) {
            shared.workers[ctx.id].processed.fetch_add(1, Ordering::Relaxed);
            return true;
        }
        ctx.queue(kind).unwrap().push(task);
    }
    steal(shared, ctx, kind)
}

/// Runs the node if its dependency counter is zero: restore the counter to
/// its initial value, run the callable, then release successors. A true
/// conditional predicate instead re-arms and re-seeds the loop body.
fn try_execute(shared: &Shared, ctx: &mut WorkerCtx, task: &Task) -> bool {
    let (run, idx) = task;
    let node_count = run.graph.len();
    debug_assert!(*idx < node_count);
    let nodes = &run.graph.nodes;
    let node = &nodes[*idx];
    if node.dependents.load(Ordering::Acquire) != 0 {
        return false;
    }
    node.dependents.store(node.initial_dependents, Ordering::Relaxed);
    node.epoch.fetch_add(1, Ordering::Relaxed);

    let draining = run.failed.load(Ordering::Acquire);
    let mut reactivate = false;
    if !draining {
        let outcome = catch_unwind(AssertUnwindSafe(|| match &node.work {
            Work::Task(f) => f().map(|()| false),
            Work::Predicate(p) => Ok(p()),
        }));
        match outcome {
            Ok(Ok(r)) => reactivate = r,
            Ok(Err(e)) => run.record_error(e),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "node panicked".into());
                run.record_error(Error::Task(msg));
            }
        }
    }

    if reactivate {
        let cond = node.cond.as_ref().expect("conditional node without body");
        // all body nodes are ancestors of the conditional, so their
        // counters are quiescent; re-arm them to their in-body dependency
        // counts (one-shot external predecessors are excluded) and re-seed
        run.pending.fetch_add(cond.body.len(), Ordering::AcqRel);
        for &(m, deps) in &cond.resets {
            nodes[m].dependents.store(deps, Ordering::Relaxed);
        }
        for &s in &cond.seeds {
            dispatch(shared, ctx, (run.clone(), s), run.graph.kind(s));
        }
    } else {
        for &s in &node.successors {
            if nodes[s].dependents.fetch_sub(1, Ordering::AcqRel) == 1 {
                dispatch(shared, ctx, (run.clone(), s), run.graph.kind(s));
            }
        }
    }
    run.finish_node();
    true
}

/// Puts a ready task where its domain can run it: the worker's own queue if
/// it has one for that domain, else a peer inbox.
fn dispatch(shared: &Shared, ctx: &WorkerCtx, task: Task, kind: ExecutionKind) {
    match ctx.queue(kind) {
        Some(q) => {
            q.push(task);
            shared.wake_all();
        }
        None => shared.dispatch_remote(task, kind),
    }
}

/// Victim order for worker `id` under the round-robin strategy: one past
/// its own index, wrapping, skipping itself.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn round_robin_order(id: usize, n: usize) -> Vec<usize> {
    (1..n).map(|k| (id + k) % n).collect()
}

/// Probes up to `steal_attempts` victims for work of the given kind,
/// trying each victim's inbox and queue.
fn steal(shared: &Shared, ctx: &mut WorkerCtx, kind: ExecutionKind) -> bool {
    let n = shared.workers.len();
    if n <= 1 {
        shared.workers[ctx.id].steals_failed.fetch_add(1, Ordering::Relaxed);
        return false;
    }
    for _ in 0..shared.config.steal_attempts {
        let victim = match shared.config.steal_strategy {
            StealStrategy::RoundRobin => {
                let v = ctx.rr_cursor;
                ctx.rr_cursor = (ctx.rr_cursor + 1) % n;
                if v == ctx.id {
                    ctx.rr_cursor = (v + 1) % n;
                    (v + 1) % n
                } else {
                    v
                }
            }
            StealStrategy::Random => {
                let mut v = ctx.rng.gen_range(0..n);
                if v == ctx.id {
                    v = (v + 1) % n;
                }
                v
            }
        };
        if victim == ctx.id {
            continue;
        }
        let w = &shared.workers[victim];
        let stolen = match kind {
            ExecutionKind::Host => steal_from(&w.host_inbox, Some(&w.host_stealer)),
            ExecutionKind::Device => match (&w.device_inbox, &w.device_stealer) {
                (Some(inbox), stealer) => steal_from(inbox, stealer.as_ref()),
                (None, _) => None,
            },
        };
        if let Some(task) = stolen {
            shared.workers[ctx.id].steals_ok.fetch_add(1, Ordering::Relaxed);
            if try_execute(shared, ctx, &task) {
                shared.workers[ctx.id].processed.fetch_add(1, Ordering::Relaxed);
                return true;
            }
            // unexecutable stolen node joins our own queue
            if let Some(q) = ctx.queue(kind) {
                q.push(task);
            }
            return false;
        }
    }
    shared.workers[ctx.id].steals_failed.fetch_add(1, Ordering::Relaxed);
    false
}

fn steal_from(inbox: &Injector<Task>, stealer: Option<&Stealer<Task>>) -> Option<Task> {
    loop {
        match inbox.steal() {
            Steal::Success(t) => return Some(t),
            Steal::Empty => break,
            Steal::Retry => {}
        }
    }
    let stealer = stealer?;
    loop {
        match stealer.steal() {
            Steal::Success(t) => return Some(t),
            Steal::Empty => return None,
            Steal::Retry => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{plain, Graph, ReductionResult, SumReducer};
    use crate::layout::{LayoutKind, RecordSchema};
    use crate::tensor::{Extents, PartitionSpec, Tensor};
    use std::sync::atomic::AtomicUsize;

    fn executor(device: usize, host: usize) -> Executor {
        Executor::new(ExecutorConfig {
            device_workers: device,
            host_workers: host,
            ..Default::default()
        })
        .unwrap()
    }

    fn field(parts: &[usize], exts: &[usize]) -> Tensor {
        Tensor::new(
            RecordSchema::scalar_f64(LayoutKind::Contiguous),
            PartitionSpec::new(parts).unwrap(),
            0,
            Extents::new(exts).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_node_runs_and_counts() {
        let ex = executor(1, 1);
        let c = Arc::new(AtomicUsize::new(0));
        let c2 = c.clone();
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(move || {
            c2.fetch_add(1, Ordering::Relaxed);
            Ok(())
        });
        ex.run_and_wait(&g.freeze().unwrap()).unwrap();
        assert_eq!(c.load(Ordering::Relaxed), 1);
        let total: usize = ex.stats().iter().map(|s| s.processed_nodes).sum();
        assert_eq!(total, 1);
    }

    #[test]
    fn empty_graph_completes_immediately() {
        let ex = executor(1, 0);
        let g = Graph::new(ExecutionKind::Host).freeze().unwrap();
        ex.run_and_wait(&g).unwrap();
    }

    #[test]
    fn device_worker_takes_host_work() {
        // no host workers: the device worker's secondary priority runs it
        let ex = executor(1, 0);
        let c = Arc::new(AtomicUsize::new(0));
        let c2 = c.clone();
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(move || {
            c2.fetch_add(1, Ordering::Relaxed);
            Ok(())
        });
        ex.run_and_wait(&g.freeze().unwrap()).unwrap();
        assert_eq!(c.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn device_nodes_need_device_workers() {
        let ex = executor(0, 1);
        let x = field(&[2], &[8]);
        let mut g = Graph::default();
        g.split(|c| c[0].set_value(1.0), &[plain(&x)]).unwrap();
        assert!(matches!(ex.run(&g.freeze().unwrap()), Err(Error::Usage(_))));
    }

    #[test]
    fn diamond_runs_exactly_once_under_contention() {
        let ex = executor(2, 2);
        for _ in 0..100 {
            let counts: Vec<Arc<AtomicUsize>> =
                (0..4).map(|_| Arc::new(AtomicUsize::new(0))).collect();
            let order = Arc::new(Mutex::new(Vec::new()));
            let mut g = Graph::new(ExecutionKind::Host);
            for (i, c) in counts.iter().enumerate() {
                let c = c.clone();
                let order = order.clone();
                let f = move || {
                    c.fetch_add(1, Ordering::Relaxed);
                    order.lock().unwrap().push(i);
                    Ok(())
                };
                match i {
                    0 => {
                        g.emplace(f);
                    }
                    1 => {
                        g.then(f);
                    }
                    2 => {
                        g.emplace(f);
                    }
                    _ => {
                        g.then(f);
                    }
                }
            }
            let f = g.freeze().unwrap();
            ex.run_and_wait(&f).unwrap();
            for c in &counts {
                assert_eq!(c.load(Ordering::Relaxed), 1);
            }
            let order = order.lock().unwrap();
            assert_eq!(order[0], 0);
            assert_eq!(order[3], 3);
            assert!(f.counters_restored());
        }
    }

    #[test]
    fn split_graph_parallel_execution() {
        let ex = executor(4, 0);
        let x = field(&[8], &[64]);
        let y = field(&[8], &[64]);
        x.fill_f64(0, 0, 3.0);
        y.fill_f64(0, 0, 1.0);
        let mut g = Graph::default();
        g.split(|c| c[1].set_value(2.0 * c[0].value() + c[1].value()), &[plain(&x), plain(&y)])
            .unwrap();
        ex.run_and_wait(&g.freeze().unwrap()).unwrap();
        for i in 0..64 {
            assert_eq!(y.get_global_f64(0, 0, &[i]), 7.0);
        }
    }

    #[test]
    fn conditional_loop_under_executor() {
        let ex = executor(2, 1);
        let x = field(&[2], &[8]);
        let sum = ReductionResult::new();
        let mut g = Graph::default();
        g.split(|c| c[0].set_value(4.0), &[plain(&x)]).unwrap();

        let mut body = Graph::default();
        body.split(|c| c[0].set_value(c[0].value() - 1.0), &[plain(&x)]).unwrap();
        body.then_reduce(&x, &sum, SumReducer).unwrap();
        let s2 = sum.clone();
        body.conditional(move || s2.value_and_reset() != 0.0).unwrap();
        g.then_subgraph(body);

        let f = g.freeze().unwrap();
        ex.run_and_wait(&f).unwrap();
        assert_eq!(x.get_global_f64(0, 0, &[0]), 0.0);
        assert!(f.counters_restored());
    }

    #[test]
    fn node_failure_aborts_activation() {
        let ex = executor(1, 1);
        let ran_after = Arc::new(AtomicUsize::new(0));
        let ra = ran_after.clone();
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| Err(Error::Task("deliberate".into())));
        g.then(move || {
            ra.fetch_add(1, Ordering::Relaxed);
            Ok(())
        });
        let err = ex.run_and_wait(&g.freeze().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Task(_)));
        // downstream callable skipped in drain mode
        assert_eq!(ran_after.load(Ordering::Relaxed), 0);

        // the executor stays usable
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| Ok(()));
        ex.run_and_wait(&g.freeze().unwrap()).unwrap();
    }

    #[test]
    fn panic_is_reported_as_error() {
        let ex = executor(1, 0);
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| panic!("kernel exploded"));
        let err = ex.run_and_wait(&g.freeze().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Task(m) if m.contains("kernel exploded")));
    }

    #[test]
    fn round_robin_visit_order() {
        assert_eq!(round_robin_order(1, 4), vec![2, 3, 0]);
        assert_eq!(round_robin_order(0, 4), vec![1, 2, 3]);
        assert_eq!(round_robin_order(3, 4), vec![0, 1, 2]);
    }

    #[test]
    fn parked_workers_resume_on_new_work() {
        let ex = executor(2, 2);
        // let workers go idle
        std::thread::sleep(Duration::from_millis(20));
        for _ in 0..5 {
            let c = Arc::new(AtomicUsize::new(0));
            let c2 = c.clone();
            let mut g = Graph::new(ExecutionKind::Host);
            g.emplace(move || {
                c2.fetch_add(1, Ordering::Relaxed);
                Ok(())
            });
            ex.run_and_wait(&g.freeze().unwrap()).unwrap();
            assert_eq!(c.load(Ordering::Relaxed), 1);
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    #[test]
    fn both_steal_strategies_complete_wide_graphs() {
        for strategy in [StealStrategy::RoundRobin, StealStrategy::Random] {
            let ex = Executor::new(ExecutorConfig {
                device_workers: 3,
                host_workers: 1,
                steal_strategy: strategy,
                seed: 42,
                ..Default::default()
            })
            .unwrap();
            let c = Arc::new(AtomicUsize::new(0));
            let mut g = Graph::new(ExecutionKind::Host);
            for _ in 0..32 {
                let c = c.clone();
                g.emplace(move || {
                    c.fetch_add(1, Ordering::Relaxed);
                    Ok(())
                });
            }
            g.then(|| Ok(()));
            ex.run_and_wait(&g.freeze().unwrap()).unwrap();
            assert_eq!(c.load(Ordering::Relaxed), 32);
        }
    }
}

//! Dependency task graph. A fluent builder assembles levels of compute
//! nodes; tensor-splitting operations fan out one node per block with
//! same-partition dependency narrowing; freezing the graph inserts halo
//! transfer nodes implied by padded access modifiers, fixes the dependency
//! counters, and yields an immutable executable shared by the workers.

use std::collections::{BTreeSet, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::iter::IndexedIterator;
use crate::layout::BlockStorage;
use crate::tensor::Tensor;

/// Which worker domain a node prefers; device nodes model GPU kernels and
/// are executed by device-priority workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionKind {
    Host,
    Device,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Compute,
    Transfer,
    Reduce,
    Sync,
    Conditional,
}

/// How a split kernel accesses a tensor argument. Padded modes require the
/// tensor to have padding and cause transfer nodes to be inserted at freeze;
/// shared modes additionally stage the block through a per-node scratch copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    Plain,
    ConcurrentPadded,
    ExclusivePadded,
    SharedPlain,
    SharedConcurrentPadded,
    SharedExclusivePadded,
}

impl AccessMode {
    pub fn padded(self) -> bool {
        matches!(
            self,
            AccessMode::ConcurrentPadded
                | AccessMode::ExclusivePadded
                | AccessMode::SharedConcurrentPadded
                | AccessMode::SharedExclusivePadded
        )
    }

    pub fn exclusive(self) -> bool {
        matches!(self, AccessMode::ExclusivePadded | AccessMode::SharedExclusivePadded)
    }

    pub fn shared(self) -> bool {
        matches!(
            self,
            AccessMode::SharedPlain
                | AccessMode::SharedConcurrentPadded
                | AccessMode::SharedExclusivePadded
        )
    }
}

/// A tensor argument to a split operation together with its access mode.
#[derive(Clone)]
pub struct AccessModifier {
    pub(crate) tensor: Tensor,
    pub(crate) mode: AccessMode,
}

impl AccessModifier {
    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn mode(&self) -> AccessMode {
        self.mode
    }
}

pub fn plain(t: &Tensor) -> AccessModifier {
    AccessModifier { tensor: t.clone(), mode: AccessMode::Plain }
}

pub fn concurrent_padded(t: &Tensor) -> AccessModifier {
    AccessModifier { tensor: t.clone(), mode: AccessMode::ConcurrentPadded }
}

pub fn exclusive_padded(t: &Tensor) -> AccessModifier {
    AccessModifier { tensor: t.clone(), mode: AccessMode::ExclusivePadded }
}

pub fn in_shared(t: &Tensor) -> AccessModifier {
    AccessModifier { tensor: t.clone(), mode: AccessMode::SharedPlain }
}

pub fn concurrent_padded_in_shared(t: &Tensor) -> AccessModifier {
    AccessModifier { tensor: t.clone(), mode: AccessMode::SharedConcurrentPadded }
}

pub fn exclusive_padded_in_shared(t: &Tensor) -> AccessModifier {
    AccessModifier { tensor: t.clone(), mode: AccessMode::SharedExclusivePadded }
}

/// Outcome of an asynchronous reduction: the scalar plus a completion flag.
/// The finalize node publishes with release ordering; readers acquire.
#[derive(Clone, Default)]
pub struct ReductionResult {
    inner: Arc<ReductionInner>,
}

#[derive(Default)]
struct ReductionInner {
    bits: AtomicU64,
    complete: AtomicBool,
}

impl ReductionResult {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn complete(&self) -> bool {
        self.inner.complete.load(Ordering::Acquire)
    }

    /// The reduced value; meaningful only once `complete` is true.
    pub fn value(&self) -> f64 {
        debug_assert!(self.complete(), "reduction result read before completion");
        f64::from_bits(self.inner.bits.load(Ordering::Acquire))
    }

    /// Reads the value and clears the completion flag, re-arming the result
    /// for the next activation (the idiom inside conditional predicates).
    pub fn value_and_reset(&self) -> f64 {
        let v = self.value();
        self.inner.complete.store(false, Ordering::Release);
        v
    }

    fn publish(&self, v: f64) -> Result<()> {
        if self.complete() {
            return Err(Error::Task(
                "reduction result still holds an unread value; call value_and_reset".into(),
            ));
        }
        self.inner.bits.store(v.to_bits(), Ordering::Relaxed);
        self.inner.complete.store(true, Ordering::Release);
        Ok(())
    }
}

/// Associative-commutative scalar combiner for reductions.
pub trait Reducer: Send + Sync + 'static {
    fn identity(&self) -> f64;
    fn combine(&self, a: f64, b: f64) -> f64;
}

pub struct SumReducer;

impl Reducer for SumReducer {
    fn identity(&self) -> f64 {
        0.0
    }

    fn combine(&self, a: f64, b: f64) -> f64 {
        a + b
    }
}

pub struct MaxReducer;

impl Reducer for MaxReducer {
    fn identity(&self) -> f64 {
        f64::NEG_INFINITY
    }

    fn combine(&self, a: f64, b: f64) -> f64 {
        a.max(b)
    }
}

pub(crate) enum Work {
    Task(Box<dyn Fn() -> Result<()> + Send + Sync>),
    Predicate(Box<dyn Fn() -> bool + Send + Sync>),
}

/// Per-block tensor bundle handed to block-level (raw) split kernels.
pub struct BlockContext {
    pub block: usize,
    pub tensors: Vec<Tensor>,
}

#[derive(Clone, PartialEq, Eq)]
struct SplitTag {
    grid: Vec<usize>,
    block: usize,
}

struct BuildNode {
    name: Option<String>,
    kind: ExecutionKind,
    class: NodeClass,
    work: Work,
    preds: BTreeSet<usize>,
    split: Option<SplitTag>,
    modifiers: Vec<AccessModifier>,
    /// For conditional nodes: indices of the loop body (set at build time,
    /// extended with body transfers at freeze).
    cond_body: Option<Vec<usize>>,
}

impl BuildNode {
    fn plain(kind: ExecutionKind, class: NodeClass, work: Work) -> Self {
        Self {
            name: None,
            kind,
            class,
            work,
            preds: BTreeSet::new(),
            split: None,
            modifiers: Vec::new(),
            cond_body: None,
        }
    }
}

/// Mutable graph under construction. Freezing consumes the builder, so a
/// frozen graph cannot be mutated by construction (the type system enforces
/// the frozen-graph build errors).
pub struct Graph {
    nodes: Vec<BuildNode>,
    levels: Vec<Vec<usize>>,
    default_kind: ExecutionKind,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new(ExecutionKind::Device)
    }
}

impl Graph {
    pub fn new(default_kind: ExecutionKind) -> Self {
        Self { nodes: Vec::new(), levels: Vec::new(), default_kind }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn current_level(&mut self) -> usize {
        if self.levels.is_empty() {
            self.levels.push(Vec::new());
        }
        self.levels.len() - 1
    }

    fn new_level(&mut self) {
        if !self.levels.is_empty() && self.levels.last().unwrap().is_empty() {
            return;
        }
        self.levels.push(Vec::new());
    }

    fn prev_level_nodes(&self, level: usize) -> &[usize] {
        if level == 0 {
            &[]
        } else {
            &self.levels[level - 1]
        }
    }

    /// Previous-level dependencies for a per-block node: when the previous
    /// level is also split over the same block grid, only the same-partition
    /// node (plus any non-split nodes) is depended on.
    fn narrowed_preds(&self, level: usize, tag: Option<&SplitTag>) -> BTreeSet<usize> {
        let prev = self.prev_level_nodes(level);
        let narrow = tag.is_some()
            && prev.iter().any(|&p| {
                self.nodes[p].split.as_ref().map(|t| &t.grid) == tag.map(|t| &t.grid)
            });
        prev.iter()
            .copied()
            .filter(|&p| {
                if !narrow {
                    return true;
                }
                match &self.nodes[p].split {
                    Some(t) if Some(&t.grid) == tag.map(|t| &t.grid) => {
                        t.block == tag.unwrap().block
                    }
                    _ => true,
                }
            })
            .collect()
    }

    fn push_node(&mut self, level: usize, node: BuildNode) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(node);
        self.levels[level].push(idx);
        idx
    }

    /// Adds one node at the current level, depending on every node of the
    /// previous level.
    pub fn emplace(&mut self, f: impl Fn() -> Result<()> + Send + Sync + 'static) -> &mut Self {
        self.emplace_on(self.default_kind, f)
    }

    pub fn emplace_on(
        &mut self,
        kind: ExecutionKind,
        f: impl Fn() -> Result<()> + Send + Sync + 'static,
    ) -> &mut Self {
        let level = self.current_level();
        let mut node = BuildNode::plain(kind, NodeClass::Compute, Work::Task(Box::new(f)));
        node.preds = self.prev_level_nodes(level).iter().copied().collect();
        self.push_node(level, node);
        self
    }

    /// Names the most recently added node (names are search keys, not
    /// semantics; the first match wins in `find`).
    pub fn name_last(&mut self, name: &str) -> &mut Self {
        if let Some(n) = self.nodes.last_mut() {
            n.name = Some(name.to_string());
        }
        self
    }

    /// Opens a new level and emplaces there; the node therefore runs after
    /// everything previously emplaced.
    pub fn then(&mut self, f: impl Fn() -> Result<()> + Send + Sync + 'static) -> &mut Self {
        self.new_level();
        self.emplace(f)
    }

    /// One compute node per block of the argument tensors, all at the
    /// current level. The kernel runs once per interior cell with one cursor
    /// per argument, all positioned at the same global cell.
    pub fn split(
        &mut self,
        f: impl for<'a> Fn(&[IndexedIterator<'a>]) + Send + Sync + 'static,
        args: &[AccessModifier],
    ) -> Result<&mut Self> {
        self.split_on(self.default_kind, f, args)
    }

    pub fn split_on(
        &mut self,
        kind: ExecutionKind,
        f: impl for<'a> Fn(&[IndexedIterator<'a>]) + Send + Sync + 'static,
        args: &[AccessModifier],
    ) -> Result<&mut Self> {
        self.check_split_args(args, true)?;
        let f: Arc<dyn for<'a> Fn(&[IndexedIterator<'a>]) + Send + Sync> = Arc::new(f);
        let first = args[0].tensor.clone();
        let n_blocks = first.n_blocks();
        let level = self.current_level();
        for block in 0..n_blocks {
            let f = f.clone();
            let args_own: Vec<AccessModifier> = args.to_vec();
            let scratch: OnceLock<Vec<Option<BlockStorage>>> = OnceLock::new();
            let work = move || -> Result<()> {
                run_cell_kernel(&f, &args_own, block, &scratch)
            };
            self.push_split_node(kind, level, &first, block, args, Box::new(work));
        }
        Ok(self)
    }

    /// Block-level split: the kernel receives the block index and tensors
    /// and manages its own iteration (used for boundary loads, active-list
    /// solvers and other non-per-cell work). Shared modes are not staged.
    pub fn split_raw(
        &mut self,
        f: impl Fn(&BlockContext) -> Result<()> + Send + Sync + 'static,
        args: &[AccessModifier],
    ) -> Result<&mut Self> {
        self.check_split_args(args, false)?;
        let f = Arc::new(f);
        let first = args[0].tensor.clone();
        let level = self.current_level();
        for block in 0..first.n_blocks() {
            let f = f.clone();
            let tensors: Vec<Tensor> = args.iter().map(|a| a.tensor.clone()).collect();
            let work = move || f(&BlockContext { block, tensors: tensors.clone() });
            self.push_split_node(self.default_kind, level, &first, block, args, Box::new(work));
        }
        Ok(self)
    }

    pub fn then_split(
        &mut self,
        f: impl for<'a> Fn(&[IndexedIterator<'a>]) + Send + Sync + 'static,
        args: &[AccessModifier],
    ) -> Result<&mut Self> {
        self.new_level();
        self.split(f, args)
    }

    pub fn then_split_raw(
        &mut self,
        f: impl Fn(&BlockContext) -> Result<()> + Send + Sync + 'static,
        args: &[AccessModifier],
    ) -> Result<&mut Self> {
        self.new_level();
        self.split_raw(f, args)
    }

    fn check_split_args(&self, args: &[AccessModifier], same_extents: bool) -> Result<()> {
        let first = args
            .first()
            .ok_or_else(|| Error::Build("split needs at least one tensor argument".into()))?;
        for a in args {
            if !first.tensor.same_grid(&a.tensor) {
                return Err(Error::Build("split tensors must share the same block grid".into()));
            }
            if same_extents && first.tensor.global_extents() != a.tensor.global_extents() {
                return Err(Error::Build(
                    "per-cell split tensors must share the same global extents".into(),
                ));
            }
            if a.mode.padded() && a.tensor.padding() == 0 {
                return Err(Error::Build("padded access modifier on a tensor with padding 0".into()));
            }
        }
        Ok(())
    }

    fn push_split_node(
        &mut self,
        kind: ExecutionKind,
        level: usize,
        tensor: &Tensor,
        block: usize,
        args: &[AccessModifier],
        work: Box<dyn Fn() -> Result<()> + Send + Sync>,
    ) {
        let tag = SplitTag { grid: tensor.grid().to_vec(), block };
        let mut node = BuildNode::plain(kind, NodeClass::Compute, Work::Task(work));
        node.preds = self.narrowed_preds(level, Some(&tag));
        node.split = Some(tag);
        node.modifiers = args.to_vec();
        self.push_node(level, node);
    }

    /// One Reduce node per block (same-partition narrowed) that folds the
    /// block's interior cells of component 0 in a fixed order, plus one
    /// finalize node combining the per-block partials in block order, so the
    /// result is deterministic regardless of scheduling.
    pub fn then_reduce(
        &mut self,
        tensor: &Tensor,
        result: &ReductionResult,
        reducer: impl Reducer,
    ) -> Result<&mut Self> {
        let reducer: Arc<dyn Reducer> = Arc::new(reducer);
        let n_blocks = tensor.n_blocks();
        let partials: Arc<Vec<AtomicU64>> =
            Arc::new((0..n_blocks).map(|_| AtomicU64::new(0)).collect());

        self.new_level();
        let level = self.current_level();
        for block in 0..n_blocks {
            let tag = SplitTag { grid: tensor.grid().to_vec(), block };
            let tensor = tensor.clone();
            let reducer = reducer.clone();
            let partials = partials.clone();
            let work = move || -> Result<()> {
                let storage = tensor.block(block).storage();
                let mut it = tensor.indexed_cursor(block, &storage);
                let mut acc = reducer.identity();
                loop {
                    acc = reducer.combine(acc, it.value());
                    if !it.advance() {
                        break;
                    }
                }
                partials[block].store(acc.to_bits(), Ordering::Release);
                Ok(())
            };
            let mut node = BuildNode::plain(self.default_kind, NodeClass::Reduce, Work::Task(Box::new(work)));
            node.preds = self.narrowed_preds(level, Some(&tag));
            node.split = Some(tag);
            self.push_node(level, node);
        }

        self.new_level();
        let level = self.current_level();
        let result = result.clone();
        let finalize = move || -> Result<()> {
            let mut acc = reducer.identity();
            for p in partials.iter() {
                acc = reducer.combine(acc, f64::from_bits(p.load(Ordering::Acquire)));
            }
            result.publish(acc)
        };
        let mut node = BuildNode::plain(ExecutionKind::Host, NodeClass::Reduce, Work::Task(Box::new(finalize)));
        node.preds = self.prev_level_nodes(level).iter().copied().collect();
        self.push_node(level, node);
        Ok(self)
    }

    /// Indices of nodes no other node depends on yet.
    fn sinks(&self) -> Vec<usize> {
        let mut has_succ = vec![false; self.nodes.len()];
        for n in &self.nodes {
            for &p in &n.preds {
                has_succ[p] = true;
            }
        }
        (0..self.nodes.len()).filter(|&i| !has_succ[i]).collect()
    }

    /// Joins every dangling chain into one node, then runs the callable.
    /// On an empty graph the callable runs immediately.
    pub fn sync(&mut self, f: impl Fn() -> Result<()> + Send + Sync + 'static) -> Result<&mut Self> {
        if self.nodes.is_empty() {
            f()?;
            return Ok(self);
        }
        let preds: BTreeSet<usize> = self.sinks().into_iter().collect();
        self.new_level();
        let level = self.current_level();
        let mut node = BuildNode::plain(ExecutionKind::Host, NodeClass::Sync, Work::Task(Box::new(f)));
        node.preds = preds;
        self.push_node(level, node);
        Ok(self)
    }

    /// Appends a tail predicate node: while it returns true at run time the
    /// graph body built so far is re-activated, yielding iterative
    /// execution until the predicate is false.
    pub fn conditional(&mut self, p: impl Fn() -> bool + Send + Sync + 'static) -> Result<&mut Self> {
        if self.nodes.is_empty() {
            return Err(Error::Build("conditional requires at least one node".into()));
        }
        let preds: BTreeSet<usize> = self.sinks().into_iter().collect();
        let body: Vec<usize> = (0..=self.nodes.len()).collect();
        self.new_level();
        let level = self.current_level();
        let mut node =
            BuildNode::plain(ExecutionKind::Host, NodeClass::Conditional, Work::Predicate(Box::new(p)));
        node.preds = preds;
        node.cond_body = Some(body);
        self.push_node(level, node);
        Ok(self)
    }

    fn absorb(&mut self, mut sub: Graph, merge_first_level: bool) {
        let offset = self.nodes.len();
        for n in &mut sub.nodes {
            n.preds = n.preds.iter().map(|p| p + offset).collect();
            if let Some(body) = &mut n.cond_body {
                for b in body.iter_mut() {
                    *b += offset;
                }
            }
        }
        let mut sub_levels = sub.levels;
        for lvl in &mut sub_levels {
            for i in lvl.iter_mut() {
                *i += offset;
            }
        }
        let sub_first: Vec<usize> = sub_levels.first().cloned().unwrap_or_default();
        self.nodes.append(&mut sub.nodes);

        if merge_first_level && !sub_levels.is_empty() {
            // emplace: sub's first level joins the current level, depending
            // on the previous level like any emplaced node
            let level = self.current_level();
            let first = sub_levels.remove(0);
            for &i in &first {
                let tag = self.nodes[i].split.clone();
                let preds = self.narrowed_preds(level, tag.as_ref());
                self.nodes[i].preds.extend(preds);
                self.levels[level].push(i);
            }
        } else if !sub_levels.is_empty() {
            // then: sub's first level depends on the parent's last level,
            // narrowed per-partition where both sides are splits
            self.new_level();
            let level = self.current_level();
            let first = sub_levels.remove(0);
            for &i in &first {
                let tag = self.nodes[i].split.clone();
                let preds = self.narrowed_preds(level, tag.as_ref());
                self.nodes[i].preds.extend(preds);
                self.levels[level].push(i);
            }
        }
        self.levels.extend(sub_levels);
        drop(sub_first);
    }

    /// Merges `sub`'s first level into the current level; remaining levels
    /// follow.
    pub fn emplace_subgraph(&mut self, sub: Graph) -> &mut Self {
        self.absorb(sub, true);
        self
    }

    /// Appends `sub` after everything built so far; cross-boundary edges
    /// follow the same-partition narrowing rule.
    pub fn then_subgraph(&mut self, sub: Graph) -> &mut Self {
        self.absorb(sub, false);
        self
    }

    /// Inserts the transfer nodes implied by padded modifiers, fixes the
    /// dependency counters, validates acyclicity and produces the immutable
    /// executable graph.
    pub fn freeze(mut self) -> Result<FrozenGraph> {
        let mut node_level: Vec<usize> = vec![0; self.nodes.len()];
        for (l, lvl) in self.levels.iter().enumerate() {
            for &i in lvl {
                node_level[i] = l;
            }
        }

        // (transfer idx, tensor id, edge, consumer split nodes)
        struct TransferRec {
            idx: usize,
            edge: crate::tensor::TransferEdge,
            consumers: Vec<usize>,
        }
        let mut transfers: Vec<TransferRec> = Vec::new();

        for l in 0..self.levels.len() {
            // unique padded tensors used by this level's split nodes
            let mut padded: Vec<Tensor> = Vec::new();
            for &i in &self.levels[l] {
                for m in &self.nodes[i].modifiers {
                    if m.mode.padded() && !padded.iter().any(|t| t.id() == m.tensor.id()) {
                        padded.push(m.tensor.clone());
                    }
                }
            }
            for tensor in padded {
                let tensor_id = tensor.id();
                let level_transfer_start = transfers.len();
                for edge in tensor.halo_plan() {
                    let t = tensor.clone();
                    let work = move || -> Result<()> {
                        t.execute_transfer(&edge);
                        Ok(())
                    };
                    let mut node =
                        BuildNode::plain(ExecutionKind::Device, NodeClass::Transfer, Work::Task(Box::new(work)));
                    // producer dependency: the previous level's node for the
                    // source block (narrowed), or all of it
                    let tag = SplitTag { grid: tensor.grid().to_vec(), block: edge.src_block };
                    node.preds = self.narrowed_preds(l, Some(&tag));
                    // pass ordering: a later-dimension transfer reads its
                    // source's padding filled by earlier-dimension passes
                    for tr in &transfers[level_transfer_start..] {
                        if tr.edge.dim < edge.dim && tr.edge.dst_block == edge.src_block {
                            node.preds.insert(tr.idx);
                        }
                    }
                    let idx = self.nodes.len();
                    self.nodes.push(node);
                    node_level.push(l);

                    // consumer edges per access mode
                    let mut consumers = Vec::new();
                    for &i in &self.levels[l] {
                        let Some(tag) = &self.nodes[i].split else { continue };
                        let Some(m) = self.nodes[i]
                            .modifiers
                            .iter()
                            .find(|m| m.tensor.id() == tensor_id && m.mode.padded())
                        else {
                            continue;
                        };
                        let consume = tag.block == edge.dst_block
                            || (m.mode.exclusive() && tag.block == edge.src_block);
                        if consume {
                            self.nodes[i].preds.insert(idx);
                            consumers.push(i);
                        }
                    }
                    transfers.push(TransferRec { idx, edge, consumers });
                }
            }
        }

        // successors + dependency counts
        let n = self.nodes.len();
        let mut successors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            for &p in &node.preds {
                successors[p].push(i);
            }
        }

        // acyclicity (Kahn)
        {
            let mut indeg: Vec<usize> = self.nodes.iter().map(|n| n.preds.len()).collect();
            let mut queue: VecDeque<usize> =
                (0..n).filter(|&i| indeg[i] == 0).collect();
            let mut seen = 0;
            while let Some(i) = queue.pop_front() {
                seen += 1;
                for &s in &successors[i] {
                    indeg[s] -= 1;
                    if indeg[s] == 0 {
                        queue.push_back(s);
                    }
                }
            }
            if seen != n {
                return Err(Error::Build("graph contains a dependency cycle".into()));
            }
        }

        // conditional bodies: extend with transfers whose consumers all sit
        // inside the body, then derive per-node in-body dependency counts
        // and the seed set used on re-activation
        let mut conds: Vec<(usize, CondExec)> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let Some(body) = &node.cond_body else { continue };
            let mut in_body = vec![false; n];
            for &b in body {
                in_body[b] = true;
            }
            for tr in &transfers {
                if !tr.consumers.is_empty() && tr.consumers.iter().all(|&c| in_body[c]) {
                    in_body[tr.idx] = true;
                }
            }
            let mut members = Vec::new();
            let mut resets = Vec::new();
            let mut seeds = Vec::new();
            for (m, &inside) in in_body.iter().enumerate() {
                if !inside {
                    continue;
                }
                members.push(m);
                let deps = self.nodes[m].preds.iter().filter(|&&p| in_body[p]).count();
                resets.push((m, deps));
                if deps == 0 {
                    seeds.push(m);
                }
            }
            conds.push((i, CondExec { body: members, resets, seeds }));
        }

        let mut exec: Vec<ExecNode> = Vec::with_capacity(n);
        for (i, node) in self.nodes.into_iter().enumerate() {
            let cond = conds
                .iter()
                .position(|(c, _)| *c == i)
                .map(|pos| conds[pos].1.clone());
            exec.push(ExecNode {
                name: node.name,
                kind: node.kind,
                class: node.class,
                level: node_level[i],
                block: node.split.map(|t| t.block),
                initial_dependents: node.preds.len(),
                // counters start armed; Alg.-3 restoration re-arms them for
                // the next activation as each node runs
                dependents: AtomicUsize::new(node.preds.len()),
                epoch: AtomicUsize::new(0),
                successors: successors[i].clone(),
                work: node.work,
                cond,
            });
        }
        let roots: Vec<usize> =
            (0..n).filter(|&i| exec[i].initial_dependents == 0).collect();
        Ok(FrozenGraph { nodes: Arc::new(exec), roots })
    }
}

#[derive(Clone)]
pub(crate) struct CondExec {
    /// All nodes re-run per loop iteration (includes the conditional).
    pub(crate) body: Vec<usize>,
    /// (node, number of predecessors inside the body) — the dependents
    /// value stored before re-seeding, so external one-shot predecessors
    /// are not waited for again.
    pub(crate) resets: Vec<(usize, usize)>,
    /// Body nodes with no in-body predecessors; pushed to start the iteration.
    pub(crate) seeds: Vec<usize>,
}

pub(crate) struct ExecNode {
    pub(crate) name: Option<String>,
    pub(crate) kind: ExecutionKind,
    pub(crate) class: NodeClass,
    pub(crate) level: usize,
    pub(crate) block: Option<usize>,
    pub(crate) initial_dependents: usize,
    pub(crate) dependents: AtomicUsize,
    pub(crate) epoch: AtomicUsize,
    pub(crate) successors: Vec<usize>,
    pub(crate) work: Work,
    pub(crate) cond: Option<CondExec>,
}

/// An immutable executable graph; cheap to clone and share across workers.
/// Per-activation mutable state is confined to the dependents counters.
#[derive(Clone)]
pub struct FrozenGraph {
    pub(crate) nodes: Arc<Vec<ExecNode>>,
    pub(crate) roots: Vec<usize>,
}

impl FrozenGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn class(&self, i: usize) -> NodeClass {
        self.nodes[i].class
    }

    pub fn kind(&self, i: usize) -> ExecutionKind {
        self.nodes[i].kind
    }

    pub fn initial_dependents(&self, i: usize) -> usize {
        self.nodes[i].initial_dependents
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.nodes[i].successors
    }

    pub fn name(&self, i: usize) -> Option<&str> {
        self.nodes[i].name.as_deref()
    }

    /// Block index for per-partition (split/reduce) nodes.
    pub fn block(&self, i: usize) -> Option<usize> {
        self.nodes[i].block
    }

    pub fn level(&self, i: usize) -> usize {
        self.nodes[i].level
    }

    /// Total times node `i` has executed across all activations.
    pub fn epoch(&self, i: usize) -> usize {
        self.nodes[i].epoch.load(Ordering::Relaxed)
    }

    /// First node with the given name, in insertion order.
    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name.as_deref() == Some(name))
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Single-threaded execution with the same counter mechanics as the
    /// work-stealing executor (restore before run, decrement successors),
    /// including conditional re-activation.
    pub fn run_serial(&self) -> Result<()> {
        let mut queue: VecDeque<usize> = self.roots.iter().copied().collect();
        while let Some(i) = queue.pop_front() {
            let node = &self.nodes[i];
            debug_assert_eq!(node.dependents.load(Ordering::Acquire), 0);
            node.dependents.store(node.initial_dependents, Ordering::Relaxed);
            node.epoch.fetch_add(1, Ordering::Relaxed);
            match &node.work {
                Work::Task(f) => f()?,
                Work::Predicate(p) => {
                    if p() {
                        let cond = node.cond.as_ref().expect("conditional without body");
                        for &(m, deps) in &cond.resets {
                            self.nodes[m].dependents.store(deps, Ordering::Relaxed);
                        }
                        queue.extend(cond.seeds.iter().copied());
                        // loop continues: successors of the conditional are
                        // only released when the predicate goes false
                        continue;
                    }
                }
            }
            for &s in &node.successors {
                if self.nodes[s].dependents.fetch_sub(1, Ordering::AcqRel) == 1 {
                    queue.push_back(s);
                }
            }
        }
        Ok(())
    }

    /// Post-activation invariant: every counter is back at its initial value.
    pub fn counters_restored(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.dependents.load(Ordering::Acquire) == n.initial_dependents)
    }

    /// DOT dump for debugging: one node per graph node (name, class, level),
    /// one edge per dependency.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("digraph g {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let label = match &n.name {
                Some(name) => format!("{name}\\n{:?} L{}", n.class, n.level),
                None => format!("n{i}\\n{:?} L{}", n.class, n.level),
            };
            writeln!(out, "  n{i} [label=\"{label}\"];").unwrap();
        }
        for (i, n) in self.nodes.iter().enumerate() {
            for &s in &n.successors {
                writeln!(out, "  n{i} -> n{s};").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Runs a per-cell kernel over one block, staging shared-mode arguments
/// through a lazily created per-node scratch copy (copy-in, compute,
/// copy-out), which stands in for GPU shared memory.
fn run_cell_kernel(
    f: &Arc<dyn for<'a> Fn(&[IndexedIterator<'a>]) + Send + Sync>,
    args: &[AccessModifier],
    block: usize,
    scratch: &OnceLock<Vec<Option<BlockStorage>>>,
) -> Result<()> {
    let storages: Vec<BlockStorage> = args.iter().map(|a| a.tensor.block(block).storage()).collect();
    let scratch = scratch.get_or_init(|| {
        args.iter()
            .zip(&storages)
            .map(|(a, s)| {
                a.mode
                    .shared()
                    .then(|| BlockStorage::new(s.schema().clone(), s.element_count()))
            })
            .collect()
    });
    let effective: Vec<&BlockStorage> = storages
        .iter()
        .zip(scratch)
        .map(|(real, scr)| match scr {
            Some(s) => {
                s.slots().copy_from(real.slots());
                s
            }
            None => real,
        })
        .collect();

    let mut cursors: Vec<IndexedIterator> = args
        .iter()
        .zip(&effective)
        .map(|(a, s)| a.tensor.indexed_cursor(block, s))
        .collect();
    loop {
        f(&cursors);
        let more = cursors[0].advance();
        for c in cursors[1..].iter_mut() {
            let m = c.advance();
            debug_assert_eq!(m, more, "split argument tensors disagree on interior size");
        }
        if !more {
            break;
        }
    }

    for (real, scr) in storages.iter().zip(scratch) {
        if let Some(s) = scr {
            real.slots().copy_from(s.slots());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iter::GridCursor;
    use crate::layout::{LayoutKind, RecordSchema};
    use crate::tensor::{Extents, PartitionSpec};
    use std::sync::atomic::AtomicUsize;

    fn field(parts: &[usize], padding: usize, exts: &[usize]) -> Tensor {
        Tensor::new(
            RecordSchema::scalar_f64(LayoutKind::Contiguous),
            PartitionSpec::new(parts).unwrap(),
            padding,
            Extents::new(exts).unwrap(),
        )
        .unwrap()
    }

    fn probe() -> (Arc<AtomicUsize>, impl Fn() -> Result<()> + Send + Sync + 'static) {
        let c = Arc::new(AtomicUsize::new(0));
        let c2 = c.clone();
        (c, move || {
            c2.fetch_add(1, Ordering::Relaxed);
            Ok(())
        })
    }

    #[test]
    fn five_node_diamond_structure() {
        // A; then B; emplace C, D at B's level; then E
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| Ok(())).name_last("A");
        g.then(|| Ok(())).name_last("B");
        g.emplace(|| Ok(())).name_last("C");
        g.emplace(|| Ok(())).name_last("D");
        g.then(|| Ok(())).name_last("E");
        let f = g.freeze().unwrap();
        assert_eq!(f.len(), 5);
        let a = f.find("A").unwrap();
        let e = f.find("E").unwrap();
        assert_eq!(f.initial_dependents(a), 0);
        // B, C, D all depend on A only and may run in parallel
        for n in ["B", "C", "D"] {
            let i = f.find(n).unwrap();
            assert_eq!(f.initial_dependents(i), 1);
            assert!(f.successors(a).contains(&i));
        }
        // E waits for B, C and D
        assert_eq!(f.initial_dependents(e), 3);
        assert_eq!(f.roots(), &[a]);
    }

    #[test]
    fn emplace_fan_counts() {
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| Ok(()));
        g.emplace(|| Ok(()));
        g.then(|| Ok(()));
        g.emplace(|| Ok(()));
        g.emplace(|| Ok(()));
        let f = g.freeze().unwrap();
        // three nodes after a 2-node level each wait on both
        for i in 2..5 {
            assert_eq!(f.initial_dependents(i), 2);
        }
    }

    #[test]
    fn serial_run_executes_in_dependency_order() {
        let order = Arc::new(std::sync::Mutex::new(Vec::new()));
        let mut g = Graph::new(ExecutionKind::Host);
        for name in ["A", "B", "C"] {
            let order = order.clone();
            g.then(move || {
                order.lock().unwrap().push(name);
                Ok(())
            });
        }
        let f = g.freeze().unwrap();
        f.run_serial().unwrap();
        assert_eq!(*order.lock().unwrap(), vec!["A", "B", "C"]);
        assert!(f.counters_restored());
    }

    #[test]
    fn split_fans_out_per_block_and_narrows() {
        let x = field(&[4], 0, &[16]);
        let y = field(&[4], 0, &[16]);
        x.fill_f64(0, 0, 2.0);
        y.fill_f64(0, 0, 1.0);
        let mut g = Graph::default();
        g.split(|c| c[1].set_value(4.0 * c[0].value() + c[1].value()), &[plain(&x), plain(&y)])
            .unwrap();
        g.then_split(|c| c[1].set_value(c[1].value() + 1.0), &[plain(&x), plain(&y)]).unwrap();
        let f = g.freeze().unwrap();
        assert_eq!(f.len(), 8);
        // same-partition chain: each second-level node depends on exactly one
        for i in 4..8 {
            assert_eq!(f.initial_dependents(i), 1);
            assert_eq!(f.block(i), Some(i - 4));
        }
        f.run_serial().unwrap();
        for i in 0..16 {
            assert_eq!(y.get_global_f64(0, 0, &[i]), 10.0);
        }
    }

    #[test]
    fn then_split_after_emplace_depends_on_it() {
        let x = field(&[4], 0, &[16]);
        let mut g = Graph::default();
        g.emplace(|| Ok(())).name_last("X");
        g.then_split(|c| c[0].set_value(1.0), &[plain(&x)]).unwrap();
        let f = g.freeze().unwrap();
        let xi = f.find("X").unwrap();
        assert_eq!(f.successors(xi).len(), 4);
        for i in 1..5 {
            assert_eq!(f.initial_dependents(i), 1);
        }
    }

    #[test]
    fn split_grid_mismatch_and_padding_errors() {
        let a = field(&[4], 0, &[16]);
        let b = field(&[2], 0, &[16]);
        let mut g = Graph::default();
        assert!(matches!(g.split(|_| {}, &[plain(&a), plain(&b)]), Err(Error::Build(_))));
        assert!(matches!(g.split(|_| {}, &[concurrent_padded(&a)]), Err(Error::Build(_))));
        assert!(matches!(g.split(|_| {}, &[]), Err(Error::Build(_))));
    }

    #[test]
    fn concurrent_padded_transfer_structure() {
        // 1-D, 4 blocks: 6 transfer nodes; ends wait on 1, middles on 2
        let x = field(&[4], 1, &[16]);
        let y = field(&[4], 1, &[16]);
        let mut g = Graph::default();
        g.split(
            |c| c[1].set_value(c[0].offset(0, 1).value() - c[0].offset(0, -1).value()),
            &[concurrent_padded(&x), plain(&y)],
        )
        .unwrap();
        let f = g.freeze().unwrap();
        let transfers: Vec<usize> =
            (0..f.len()).filter(|&i| f.class(i) == NodeClass::Transfer).collect();
        assert_eq!(transfers.len(), 6);
        let mut deps: Vec<usize> = (0..f.len())
            .filter(|&i| f.class(i) == NodeClass::Compute)
            .map(|i| f.initial_dependents(i))
            .collect();
        deps.sort_unstable();
        assert_eq!(deps, vec![1, 1, 2, 2]);
    }

    #[test]
    fn exclusive_padded_transfer_structure() {
        let x = field(&[4], 1, &[16]);
        let mut g = Graph::default();
        g.split(
            |c| c[0].set_value(c[0].offset(0, 1).value() - c[0].offset(0, -1).value()),
            &[exclusive_padded(&x)],
        )
        .unwrap();
        let f = g.freeze().unwrap();
        let mut deps: Vec<usize> = (0..f.len())
            .filter(|&i| f.class(i) == NodeClass::Compute)
            .map(|i| f.initial_dependents(i))
            .collect();
        deps.sort_unstable();
        // ends: 1 in + 1 out; middles: 2 in + 2 out
        assert_eq!(deps, vec![2, 2, 4, 4]);
    }

    #[test]
    fn plain_padding_zero_no_transfers() {
        let x = field(&[4], 0, &[16]);
        let mut g = Graph::default();
        g.split(|c| c[0].set_value(0.0), &[plain(&x)]).unwrap();
        let f = g.freeze().unwrap();
        assert!((0..f.len()).all(|i| f.class(i) != NodeClass::Transfer));
    }

    #[test]
    fn reduction_values_and_narrowing() {
        let x = field(&[4], 0, &[1000]);
        x.fill_f64(0, 0, 1.0);
        let sum = ReductionResult::new();
        let mut g = Graph::default();
        g.split(|_| {}, &[plain(&x)]).unwrap();
        g.then_reduce(&x, &sum, SumReducer).unwrap();
        let f = g.freeze().unwrap();
        // R_b's only dependency is S_b
        for i in 0..f.len() {
            if f.class(i) == NodeClass::Reduce && f.block(i).is_some() {
                assert_eq!(f.initial_dependents(i), 1);
            }
        }
        f.run_serial().unwrap();
        assert!(sum.complete());
        assert_eq!(sum.value(), 1000.0);

        let max = ReductionResult::new();
        let mut g = Graph::default();
        x.fill_f64(0, 0, 7.25);
        g.then_reduce(&x, &max, MaxReducer).unwrap();
        g.freeze().unwrap().run_serial().unwrap();
        assert_eq!(max.value_and_reset(), 7.25);
        assert!(!max.complete());
    }

    #[test]
    fn stale_reduction_result_errors() {
        let x = field(&[1], 0, &[8]);
        let r = ReductionResult::new();
        let mut g = Graph::default();
        g.then_reduce(&x, &r, SumReducer).unwrap();
        let f = g.freeze().unwrap();
        f.run_serial().unwrap();
        // second activation without value_and_reset
        assert!(matches!(f.run_serial(), Err(Error::Task(_))));
        r.value_and_reset();
        f.run_serial().unwrap();
    }

    #[test]
    fn sync_joins_all_sinks() {
        let (c, inc) = probe();
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| Ok(()));
        g.emplace(|| Ok(()));
        g.emplace(|| Ok(()));
        g.sync(inc).unwrap();
        let f = g.freeze().unwrap();
        assert_eq!(f.initial_dependents(3), 3);
        assert_eq!(f.class(3), NodeClass::Sync);
        f.run_serial().unwrap();
        assert_eq!(c.load(Ordering::Relaxed), 1);

        // empty graph: immediate execution, no node added
        let (c2, inc2) = probe();
        let mut g = Graph::new(ExecutionKind::Host);
        g.sync(inc2).unwrap();
        assert_eq!(g.node_count(), 0);
        assert_eq!(c2.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn conditional_false_runs_once() {
        let (c, inc) = probe();
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(inc);
        g.conditional(|| false).unwrap();
        let f = g.freeze().unwrap();
        f.run_serial().unwrap();
        assert_eq!(c.load(Ordering::Relaxed), 1);
        assert!(f.counters_restored());
    }

    #[test]
    fn map_reduce_loop_runs_four_times() {
        // init sets 4.0 everywhere; loop decrements and sum-reduces until
        // the sum reaches zero — exactly 4 body activations
        let x = field(&[2], 0, &[8]);
        let sum = ReductionResult::new();
        let body_runs = Arc::new(AtomicUsize::new(0));

        let mut init = Graph::default();
        init.split(|c| c[0].set_value(4.0), &[plain(&x)]).unwrap();

        let mut map_reduce = Graph::default();
        let runs = body_runs.clone();
        map_reduce
            .split(
                move |c| {
                    if c[0].global_index(0).unwrap() == 0 {
                        runs.fetch_add(1, Ordering::Relaxed);
                    }
                    c[0].set_value(c[0].value() - 1.0);
                },
                &[plain(&x)],
            )
            .unwrap();
        map_reduce.then_reduce(&x, &sum, SumReducer).unwrap();
        let sum2 = sum.clone();
        map_reduce.conditional(move || sum2.value_and_reset() != 0.0).unwrap();

        init.then_subgraph(map_reduce);
        let f = init.freeze().unwrap();
        f.run_serial().unwrap();
        assert_eq!(body_runs.load(Ordering::Relaxed), 4);
        assert_eq!(x.get_global_f64(0, 0, &[3]), 0.0);
        assert!(f.counters_restored());
    }

    #[test]
    fn subgraph_narrowing_per_partition() {
        let x = field(&[4], 0, &[16]);
        let mut parent = Graph::default();
        parent.split(|c| c[0].set_value(1.0), &[plain(&x)]).unwrap();
        let mut sub = Graph::default();
        sub.split(|c| c[0].set_value(c[0].value() + 1.0), &[plain(&x)]).unwrap();
        parent.then_subgraph(sub);
        let f = parent.freeze().unwrap();
        assert_eq!(f.len(), 8);
        for i in 4..8 {
            assert_eq!(f.initial_dependents(i), 1);
            assert_eq!(f.block(i), Some(i - 4));
        }
        f.run_serial().unwrap();
        assert_eq!(x.get_global_f64(0, 0, &[9]), 2.0);
    }

    #[test]
    fn emplace_subgraph_of_single_node_behaves_as_emplace() {
        let (c, inc) = probe();
        let mut parent = Graph::new(ExecutionKind::Host);
        parent.emplace(|| Ok(()));
        parent.then(|| Ok(()));
        let mut sub = Graph::new(ExecutionKind::Host);
        sub.emplace(inc);
        parent.emplace_subgraph(sub);
        let f = parent.freeze().unwrap();
        assert_eq!(f.len(), 3);
        // the merged node sits on the second level: depends on the root only
        assert_eq!(f.initial_dependents(2), 1);
        f.run_serial().unwrap();
        assert_eq!(c.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn shared_modifier_preserves_semantics() {
        let x = field(&[2], 1, &[8]);
        let y = field(&[2], 1, &[8]);
        x.fill_with(0, 0, |c| c[0] as f64);
        let mut g = Graph::default();
        g.split(
            |c| {
                let l = c[0].offset(0, -1);
                let r = c[0].offset(0, 1);
                if l.valid_in_domain() && r.valid_in_domain() {
                    c[1].set_value(r.value() - l.value());
                }
            },
            &[concurrent_padded_in_shared(&x), plain(&y)],
        )
        .unwrap();
        let f = g.freeze().unwrap();
        f.run_serial().unwrap();
        for i in 1..7 {
            assert_eq!(y.get_global_f64(0, 0, &[i]), 2.0);
        }
        // shared staging must not corrupt the source
        for i in 0..8 {
            assert_eq!(x.get_global_f64(0, 0, &[i]), i as f64);
        }
        // second activation reuses the scratch
        f.run_serial().unwrap();
        assert_eq!(y.get_global_f64(0, 0, &[3]), 2.0);
    }

    #[test]
    fn dot_dump_is_valid_shape() {
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| Ok(())).name_last("root");
        g.then(|| Ok(()));
        let f = g.freeze().unwrap();
        let dot = f.to_dot();
        assert!(dot.starts_with("digraph g {"));
        assert!(dot.contains("root"));
        assert!(dot.contains("n0 -> n1;"));
        assert!(dot.trim_end().ends_with('}'));
    }

    #[test]
    fn node_failure_surfaces() {
        let mut g = Graph::new(ExecutionKind::Host);
        g.emplace(|| Err(Error::Task("boom".into())));
        let f = g.freeze().unwrap();
        assert!(matches!(f.run_serial(), Err(Error::Task(_))));
    }
}

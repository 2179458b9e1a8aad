//! N-dimensional global data space (1-3 dims) partitioned into blocks across
//! virtual devices, with per-block padding, boundary loading, halo-exchange
//! planning and double-buffer swap.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::arena::MultiarchAllocator;
use crate::error::{Error, Result};
use crate::layout::{BlockStorage, RecordSchema};

pub const MAX_DIMS: usize = 3;

/// Per-dimension cell counts of a space (1-3 dims, every size >= 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extents {
    dims: usize,
    sizes: [usize; MAX_DIMS],
}

impl Extents {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.len() > MAX_DIMS {
            return Err(Error::Config(format!(
                "extents must have 1..=3 dimensions, got {}",
                sizes.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("every extent must be >= 1".into()));
        }
        let mut arr = [1; MAX_DIMS];
        arr[..sizes.len()].copy_from_slice(sizes);
        Ok(Self { dims: sizes.len(), sizes: arr })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Size in dimension `d`; 1 for dimensions beyond `dims`.
    pub fn size(&self, d: usize) -> usize {
        self.sizes[d]
    }

    pub fn cell_count(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sizes[..self.dims]
    }
}

/// Partitions (across virtual devices) and sub-partitions (within a device)
/// per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    partitions: [usize; MAX_DIMS],
    subpartitions: [usize; MAX_DIMS],
    dims: usize,
}

impl PartitionSpec {
    pub fn new(partitions: &[usize]) -> Result<Self> {
        Self::with_subpartitions(partitions, &vec![1; partitions.len()])
    }

    pub fn with_subpartitions(partitions: &[usize], subpartitions: &[usize]) -> Result<Self> {
        if partitions.is_empty() || partitions.len() > MAX_DIMS {
            return Err(Error::Config("partition spec must have 1..=3 dimensions".into()));
        }
        if partitions.len() != subpartitions.len() {
            return Err(Error::Config(
                "partitions and subpartitions must have the same dimensionality".into(),
            ));
        }
        if partitions.iter().chain(subpartitions).any(|&c| c == 0) {
            return Err(Error::Config("partition counts must be >= 1".into()));
        }
        let mut p = [1; MAX_DIMS];
        let mut s = [1; MAX_DIMS];
        p[..partitions.len()].copy_from_slice(partitions);
        s[..subpartitions.len()].copy_from_slice(subpartitions);
        Ok(Self { partitions: p, subpartitions: s, dims: partitions.len() })
    }

    pub fn partitions(&self, d: usize) -> usize {
        self.partitions[d]
    }

    pub fn subpartitions(&self, d: usize) -> usize {
        self.subpartitions[d]
    }

    /// Blocks per dimension (partitions x sub-partitions).
    pub fn blocks(&self, d: usize) -> usize {
        self.partitions[d] * self.subpartitions[d]
    }

    pub fn device_count(&self) -> usize {
        self.partitions.iter().product()
    }

    pub fn block_count(&self) -> usize {
        (0..MAX_DIMS).map(|d| self.blocks(d)).product()
    }
}

/// Padding fill rules for global-domain faces.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryKind {
    /// One value per scalar lane (indexed by `prefix(component) + lane`).
    Constant(Vec<f64>),
    /// Linear extrapolation from the two nearest interior cells along the
    /// face normal (f64 lanes; other kinds fall back to clamping).
    FirstOrderExtrapolation,
    /// Nearest interior cell value (kind-agnostic bit copy).
    Clamp,
}

/// The portion of a tensor owned by one virtual device (or one sub-partition
/// of it): interior extents, a uniform padding width, and its own buffer.
pub struct Block {
    coords: [usize; MAX_DIMS],
    interior: [usize; MAX_DIMS],
    padding: usize,
    device_id: usize,
    global_origin: [usize; MAX_DIMS],
    dims: usize,
    storage: Mutex<BlockStorage>,
}

impl Block {
    pub fn coords(&self) -> &[usize] {
        &self.coords[..self.dims]
    }

    pub fn interior(&self, d: usize) -> usize {
        self.interior[d]
    }

    pub fn padded(&self, d: usize) -> usize {
        if d < self.dims {
            self.interior[d] + 2 * self.padding
        } else {
            1
        }
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn device_id(&self) -> usize {
        self.device_id
    }

    /// Global interior coordinate of this block's first interior cell.
    pub fn global_origin(&self, d: usize) -> usize {
        self.global_origin[d]
    }

    pub fn element_count(&self) -> usize {
        (0..self.dims).map(|d| self.padded(d)).product()
    }

    /// Snapshot of the storage handle. The returned storage aliases the
    /// block's buffer; `swap` replaces the handle, not the data.
    pub fn storage(&self) -> BlockStorage {
        self.storage.lock().unwrap().clone()
    }

    /// Linear cell index of padded coordinates.
    #[inline]
    pub fn linear(&self, padded_coords: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for d in 0..self.dims {
            idx += padded_coords[d] * stride;
            stride *= self.padded(d);
        }
        idx
    }
}

struct TensorInner {
    global: Extents,
    padding: usize,
    spec: PartitionSpec,
    schema: RecordSchema,
    grid: [usize; MAX_DIMS],
    blocks: Vec<Block>,
}

/// A partitioned N-dimensional tensor. Cheap to clone; clones share blocks.
#[derive(Clone)]
pub struct Tensor {
    inner: Arc<TensorInner>,
}

/// One halo copy: `src_block`'s interior strip on the face toward
/// `dst_block` into `dst_block`'s padding strip on the opposite face.
/// `dim` doubles as the exchange pass index: transfers are applied one
/// dimension at a time so that later passes carry already-filled corner data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferEdge {
    pub src_block: usize,
    pub dst_block: usize,
    /// Face normal; also the exchange pass this edge belongs to.
    pub dim: usize,
    /// +1 if `dst` sits on the high side of `src` along `dim`.
    pub dir: isize,
}

impl Tensor {
    pub fn new(
        schema: RecordSchema,
        spec: PartitionSpec,
        padding: usize,
        extents: Extents,
    ) -> Result<Self> {
        Self::build(schema, spec, padding, extents, None)
    }

    /// As [`Tensor::new`], carving block buffers out of the allocator's
    /// device arenas (arena index = block device id).
    pub fn with_allocator(
        schema: RecordSchema,
        spec: PartitionSpec,
        padding: usize,
        extents: Extents,
        allocator: &MultiarchAllocator,
    ) -> Result<Self> {
        Self::build(schema, spec, padding, extents, Some(allocator))
    }

    fn build(
        schema: RecordSchema,
        spec: PartitionSpec,
        padding: usize,
        extents: Extents,
        allocator: Option<&MultiarchAllocator>,
    ) -> Result<Self> {
        let dims = extents.dims();
        let mut grid = [1; MAX_DIMS];
        for d in 0..dims {
            let blocks = spec.blocks(d);
            if extents.size(d) % blocks != 0 {
                return Err(Error::Config(format!(
                    "extent {} in dimension {d} is not divisible by {} blocks",
                    extents.size(d),
                    blocks
                )));
            }
            grid[d] = blocks;
        }

        let mut interior = [1; MAX_DIMS];
        for d in 0..dims {
            interior[d] = extents.size(d) / grid[d];
        }

        let n_blocks: usize = grid.iter().product();
        let mut blocks = Vec::with_capacity(n_blocks);
        for idx in 0..n_blocks {
            let coords = unflatten(idx, &grid);
            // device id counts partitions only; sub-partitions share their
            // partition's device
            let mut dev = 0;
            let mut dev_stride = 1;
            for d in 0..dims {
                let part = coords[d] / spec.subpartitions(d);
                dev += part * dev_stride;
                dev_stride *= spec.partitions(d);
            }
            let mut origin = [0; MAX_DIMS];
            for d in 0..dims {
                origin[d] = coords[d] * interior[d];
            }
            let element_count: usize = (0..dims).map(|d| interior[d] + 2 * padding).product();
            let storage = match allocator {
                Some(alloc) => {
                    let slots = alloc
                        .device_arena(dev)
                        .allocate_slots(crate::layout::storage_extent(&schema, element_count))?;
                    BlockStorage::with_buffer(schema.clone(), element_count, slots)?
                }
                None => BlockStorage::new(schema.clone(), element_count),
            };
            blocks.push(Block {
                coords,
                interior,
                padding,
                device_id: dev,
                global_origin: origin,
                dims,
                storage: Mutex::new(storage),
            });
        }

        Ok(Self {
            inner: Arc::new(TensorInner { global: extents, padding, spec, schema, grid, blocks }),
        })
    }

    pub fn dims(&self) -> usize {
        self.inner.global.dims()
    }

    pub fn global_extents(&self) -> Extents {
        self.inner.global
    }

    pub fn padding(&self) -> usize {
        self.inner.padding
    }

    pub fn schema(&self) -> &RecordSchema {
        &self.inner.schema
    }

    pub fn spec(&self) -> PartitionSpec {
        self.inner.spec
    }

    pub fn grid(&self) -> &[usize] {
        &self.inner.grid[..self.dims()]
    }

    pub fn n_blocks(&self) -> usize {
        self.inner.blocks.len()
    }

    pub fn block(&self, idx: usize) -> &Block {
        &self.inner.blocks[idx]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.inner.blocks.iter()
    }

    /// True if `other` has the same block grid shape (precondition for
    /// multi-tensor graph splits).
    pub fn same_grid(&self, other: &Tensor) -> bool {
        self.dims() == other.dims() && self.grid() == other.grid()
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.same_grid(other)
            && self.inner.global == other.inner.global
            && self.inner.padding == other.inner.padding
            && self.inner.schema == other.inner.schema
    }

    /// Identity used to detect aliasing (e.g. the same tensor passed twice
    /// to a split).
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.inner) as usize
    }

    fn block_index(&self, coords: &[usize; MAX_DIMS]) -> usize {
        flatten(coords, &self.inner.grid)
    }

    /// One edge per (block, face with an interior neighbor). Empty when
    /// padding is zero. Edges are ordered by pass (`dim`) so executing them
    /// in order fills corners correctly.
    pub fn halo_plan(&self) -> Vec<TransferEdge> {
        if self.inner.padding == 0 {
            return Vec::new();
        }
        let mut edges = Vec::new();
        for dim in 0..self.dims() {
            for (idx, block) in self.inner.blocks.iter().enumerate() {
                for dir in [-1isize, 1] {
                    let c = block.coords[dim] as isize + dir;
                    if c < 0 || c as usize >= self.inner.grid[dim] {
                        continue;
                    }
                    let mut n_coords = block.coords;
                    n_coords[dim] = c as usize;
                    // this block is the *source*: it sends its interior strip
                    // toward the neighbor's padding
                    edges.push(TransferEdge {
                        src_block: idx,
                        dst_block: self.block_index(&n_coords),
                        dim,
                        dir,
                    });
                }
            }
        }
        edges
    }

    /// Copies the edge's source interior strip into the destination's
    /// padding strip, all components. Idempotent while the source is
    /// unchanged.
    pub fn execute_transfer(&self, edge: &TransferEdge) {
        let p = self.inner.padding;
        if p == 0 {
            return;
        }
        let src = self.block(edge.src_block);
        let dst = self.block(edge.dst_block);
        let src_storage = src.storage();
        let dst_storage = dst.storage();
        let dims = self.dims();

        // Ranges in padded coordinates. Dimensions below the face normal
        // span the full padded range (carrying corner data from earlier
        // passes); dimensions above it span the interior only.
        let mut src_lo = [0usize; MAX_DIMS];
        let mut dst_lo = [0usize; MAX_DIMS];
        let mut span = [1usize; MAX_DIMS];
        for d in 0..dims {
            if d < edge.dim {
                src_lo[d] = 0;
                dst_lo[d] = 0;
                span[d] = src.padded(d);
            } else if d == edge.dim {
                span[d] = p;
                if edge.dir > 0 {
                    // src high interior strip -> dst low padding
                    src_lo[d] = src.interior[d];
                    dst_lo[d] = 0;
                } else {
                    // src low interior strip -> dst high padding
                    src_lo[d] = p;
                    dst_lo[d] = p + dst.interior[d];
                }
            } else {
                src_lo[d] = p;
                dst_lo[d] = p;
                span[d] = src.interior[d];
            }
        }

        copy_region(&src_storage, src, src_lo, &dst_storage, dst, dst_lo, span, dims);
    }

    /// Runs the full halo plan serially in pass order.
    pub fn exchange_halos(&self) {
        for edge in self.halo_plan() {
            self.execute_transfer(&edge);
        }
    }

    /// Fills padding on global-domain faces for every block.
    pub fn load_boundary(&self, kind: &BoundaryKind) {
        for b in 0..self.n_blocks() {
            self.load_boundary_block(b, kind);
        }
    }

    /// Fills global-face padding for one block. Padding is only written on
    /// faces with no interior neighbor; interior cells are never modified.
    pub fn load_boundary_block(&self, block_idx: usize, kind: &BoundaryKind) {
        let p = self.inner.padding;
        if p == 0 {
            return;
        }
        let block = self.block(block_idx);
        let storage = block.storage();
        let dims = self.dims();
        let schema = self.schema();

        for dim in 0..dims {
            for dir in [-1isize, 1] {
                let on_face = if dir < 0 {
                    block.coords[dim] == 0
                } else {
                    block.coords[dim] == self.inner.grid[dim] - 1
                };
                if !on_face {
                    continue;
                }
                // Region spans: full padded below `dim`, interior above, the
                // P padding layers along `dim`.
                let mut lo = [0usize; MAX_DIMS];
                let mut span = [1usize; MAX_DIMS];
                for d in 0..dims {
                    if d < dim {
                        lo[d] = 0;
                        span[d] = block.padded(d);
                    } else if d > dim {
                        lo[d] = p;
                        span[d] = block.interior[d];
                    }
                }
                if dir < 0 {
                    lo[dim] = 0;
                } else {
                    lo[dim] = p + block.interior[dim];
                }
                span[dim] = p;

                for_each_cell(&lo, &span, dims, |coords| {
                    // distance (in layers) from the nearest interior cell
                    let k = if dir < 0 {
                        p - coords[dim]
                    } else {
                        coords[dim] - (p + block.interior[dim]) + 1
                    };
                    let mut near = *coords;
                    let mut next = *coords;
                    if dir < 0 {
                        near[dim] = p;
                        next[dim] = p + 1.min(block.interior[dim] - 1);
                    } else {
                        near[dim] = p + block.interior[dim] - 1;
                        next[dim] = near[dim] - 1.min(block.interior[dim] - 1);
                    }
                    let cell = block.linear(coords);
                    let near_cell = block.linear(&near);
                    let next_cell = block.linear(&next);
                    for (c, desc) in schema.components().iter().enumerate() {
                        for l in 0..desc.arity {
                            let dst_off = schema.offset_unchecked(c, l, cell, block.element_count());
                            match kind {
                                BoundaryKind::Clamp => {
                                    let src_off = schema.offset_unchecked(c, l, near_cell, block.element_count());
                                    storage.slots().set_bits(dst_off, storage.slots().get_bits(src_off));
                                }
                                BoundaryKind::Constant(vals) => {
                                    let v = vals[schema.prefix(c) + l];
                                    storage.slots().set_bits(dst_off, v.to_bits());
                                }
                                BoundaryKind::FirstOrderExtrapolation => {
                                    if desc.scalar_kind == crate::layout::ScalarKind::F64 {
                                        let f1 = storage.get_f64_unchecked(c, l, near_cell);
                                        let f2 = storage.get_f64_unchecked(c, l, next_cell);
                                        let v = f1 + k as f64 * (f1 - f2);
                                        storage.slots().set_bits(dst_off, v.to_bits());
                                    } else {
                                        let src_off =
                                            schema.offset_unchecked(c, l, near_cell, block.element_count());
                                        storage.slots().set_bits(dst_off, storage.slots().get_bits(src_off));
                                    }
                                }
                            }
                        }
                    }
                });
            }
        }
    }

    /// Exchanges block buffers with `other` (handle swap, no data copied).
    pub fn swap(&self, other: &Tensor) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Config("swap requires identical schema, extents, spec and padding".into()));
        }
        for (a, b) in self.inner.blocks.iter().zip(other.inner.blocks.iter()) {
            // lock order is fixed by argument order; swap is a
            // single-threaded (or graph-serialized) operation
            let mut sa = a.storage.lock().unwrap();
            let mut sb = b.storage.lock().unwrap();
            std::mem::swap(&mut *sa, &mut *sb);
        }
        Ok(())
    }

    /// Map a global interior coordinate to (block index, padded coords).
    pub fn locate(&self, global: &[usize]) -> (usize, [usize; MAX_DIMS]) {
        let mut coords = [0usize; MAX_DIMS];
        let mut local = [0usize; MAX_DIMS];
        for d in 0..self.dims() {
            let interior = self.inner.global.size(d) / self.inner.grid[d];
            coords[d] = global[d] / interior;
            local[d] = global[d] % interior + self.inner.padding;
        }
        (self.block_index(&coords), local)
    }

    pub fn get_global_f64(&self, component: usize, lane: usize, global: &[usize]) -> f64 {
        let (b, local) = self.locate(global);
        let block = self.block(b);
        block.storage().get_f64_unchecked(component, lane, block.linear(&local))
    }

    pub fn set_global_f64(&self, component: usize, lane: usize, global: &[usize], v: f64) {
        let (b, local) = self.locate(global);
        let block = self.block(b);
        block.storage().set_f64_unchecked(component, lane, block.linear(&local), v);
    }

    /// Sets every interior cell of (component, lane) to `v`.
    pub fn fill_f64(&self, component: usize, lane: usize, v: f64) {
        self.fill_with(component, lane, |_| v);
    }

    /// Fills interior cells from a function of the global coordinates.
    pub fn fill_with(&self, component: usize, lane: usize, f: impl Fn(&[usize]) -> f64) {
        let dims = self.dims();
        let mut coords = [0usize; MAX_DIMS];
        loop {
            self.set_global_f64(component, lane, &coords, f(&coords[..dims]));
            if !advance(&mut coords, &self.inner.global, dims) {
                break;
            }
        }
    }

    /// Writes the stitched global interior field as CSV: a `# extents:`
    /// header line, then row-major rows of 17-significant-digit floats.
    pub fn dump_field(&self, component: usize, lane: usize, path: &Path) -> Result<()> {
        component_range_check(self.schema(), component, lane)?;
        let mut out = String::new();
        let exts: Vec<String> = self.inner.global.as_slice().iter().map(|e| e.to_string()).collect();
        writeln!(out, "# extents: {}", exts.join(",")).unwrap();

        let dims = self.dims();
        let nx = self.inner.global.size(0);
        let ny = if dims > 1 { self.inner.global.size(1) } else { 1 };
        let nz = if dims > 2 { self.inner.global.size(2) } else { 1 };
        for z in 0..nz {
            for y in 0..ny {
                let mut row = Vec::with_capacity(nx);
                for x in 0..nx {
                    let coords = [x, y, z];
                    row.push(format!("{:.16e}", self.get_global_f64(component, lane, &coords[..dims])));
                }
                writeln!(out, "{}", row.join(",")).unwrap();
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn component_range_check(schema: &RecordSchema, component: usize, lane: usize) -> Result<()> {
    let desc = schema
        .components()
        .get(component)
        .ok_or_else(|| Error::Index(format!("component {component} out of range")))?;
    if lane >= desc.arity {
        return Err(Error::Index(format!("lane {lane} out of range")));
    }
    Ok(())
}

/// Reads back a CSV field dump: (extents, row-major values).
pub fn read_field_dump(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Input("empty field dump".into()))?;
    let exts = header
        .strip_prefix("# extents: ")
        .ok_or_else(|| Error::Input("missing extents header".into()))?
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| Error::Input(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        for tok in line.split(',') {
            values.push(tok.trim().parse::<f64>().map_err(|e| Error::Input(e.to_string()))?);
        }
    }
    Ok((exts, values))
}

fn unflatten(mut idx: usize, grid: &[usize; MAX_DIMS]) -> [usize; MAX_DIMS] {
    let mut coords = [0; MAX_DIMS];
    for d in 0..MAX_DIMS {
        coords[d] = idx % grid[d];
        idx /= grid[d];
    }
    coords
}

fn flatten(coords: &[usize; MAX_DIMS], grid: &[usize; MAX_DIMS]) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for d in 0..MAX_DIMS {
        idx += coords[d] * stride;
        stride *= grid[d];
    }
    idx
}

fn advance(coords: &mut [usize; MAX_DIMS], extents: &Extents, dims: usize) -> bool {
    for d in 0..dims {
        coords[d] += 1;
        if coords[d] < extents.size(d) {
            return true;
        }
        coords[d] = 0;
    }
    false
}

fn for_each_cell(lo: &[usize; MAX_DIMS], span: &[usize; MAX_DIMS], dims: usize, mut f: impl FnMut(&[usize; MAX_DIMS])) {
    let mut rel = [0usize; MAX_DIMS];
    let mut coords = *lo;
    loop {
        f(&coords);
        let mut d = 0;
        loop {
            if d == dims {
                return;
            }
            rel[d] += 1;
            if rel[d] < span[d] {
                coords[d] = lo[d] + rel[d];
                break;
            }
            rel[d] = 0;
            coords[d] = lo[d];
            d += 1;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn copy_region(
    src_storage: &BlockStorage,
    src: &Block,
    src_lo: [usize; MAX_DIMS],
    dst_storage: &BlockStorage,
    dst: &Block,
    dst_lo: [usize; MAX_DIMS],
    span: [usize; MAX_DIMS],
    dims: usize,
) {
    let schema = src_storage.schema();
    let mut rel = [0usize; MAX_DIMS];
    loop {
        let mut s = src_lo;
        let mut t = dst_lo;
        for d in 0..dims {
            s[d] += rel[d];
            t[d] += rel[d];
        }
        let s_cell = src.linear(&s);
        let t_cell = dst.linear(&t);
        for (c, desc) in schema.components().iter().enumerate() {
            for l in 0..desc.arity {
                let from = schema.offset_unchecked(c, l, s_cell, src_storage.element_count());
                let to = schema.offset_unchecked(c, l, t_cell, dst_storage.element_count());
                dst_storage.slots().set_bits(to, src_storage.slots().get_bits(from));
            }
        }
        let mut d = 0;
        loop {
            if d == dims {
                return;
            }
            rel[d] += 1;
            if rel[d] < span[d] {
                break;
            }
            rel[d] = 0;
            d += 1;
        }
    }
}

/// Fault-injection hook for the self-test harness: flips one padding slot of
/// the given block after transfers ran, so halo verification must fail.
#[doc(hidden)]
pub fn corrupt_padding_for_test(tensor: &Tensor, block_idx: usize) {
    if tensor.padding() == 0 {
        return;
    }
    let block = tensor.block(block_idx);
    let storage = block.storage();
    // first padding cell on the low x face, interior in other dims
    let mut coords = [0usize; MAX_DIMS];
    for d in 1..tensor.dims() {
        coords[d] = tensor.padding();
    }
    let cell = block.linear(&coords);
    let off = storage
        .schema()
        .offset_unchecked(0, 0, cell, storage.element_count());
    storage.slots().set_bits(off, storage.slots().get_bits(off) ^ 0x1);
}

//! Layout-agnostic cell cursors over a block's interior. Kernels written
//! against these see identical semantics for contiguous and strided storage,
//! and the same code body serves any dimensionality via `dim_loop`.

use crate::error::{Error, Result};
use crate::layout::{BlockStorage, ScalarValue};
use crate::tensor::{Block, Tensor, MAX_DIMS};

/// Common capability surface of the block-local and global-aware cursors.
/// `global_index` is an optional capability: the block-local cursor reports
/// an unsupported-capability error rather than a wrong answer.
pub trait GridCursor: Sized {
    /// Cursor displaced by `amount` cells along `dim`. The displaced
    /// position may reach into padding but never beyond it (debug-checked).
    fn offset(&self, dim: usize, amount: isize) -> Self;
    /// True while the cursor points at a cell inside its domain (the block
    /// interior, or the global domain for the indexed cursor).
    fn valid_in_domain(&self) -> bool;
    fn global_index(&self, dim: usize) -> Result<usize>;
}

/// Cursor over one block's cells, positioned in interior coordinates
/// (padding cells sit at negative coordinates and at `>= interior`).
#[derive(Clone, Copy)]
pub struct BlockIterator<'a> {
    storage: &'a BlockStorage,
    interior: [usize; MAX_DIMS],
    strides: [usize; MAX_DIMS],
    padding: usize,
    dims: usize,
    pos: [isize; MAX_DIMS],
}

impl<'a> BlockIterator<'a> {
    pub(crate) fn new(block: &Block, storage: &'a BlockStorage, dims: usize) -> Self {
        debug_assert_eq!(storage.element_count(), block.element_count());
        let mut interior = [1usize; MAX_DIMS];
        let mut strides = [0usize; MAX_DIMS];
        let mut stride = 1;
        for d in 0..dims {
            interior[d] = block.interior(d);
            strides[d] = stride;
            stride *= block.padded(d);
        }
        Self { storage, interior, strides, padding: block.padding(), dims, pos: [0; MAX_DIMS] }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Interior-coordinate position (may be negative after offsetting).
    pub fn pos(&self, dim: usize) -> isize {
        self.pos[dim]
    }

    pub fn set_pos(&mut self, pos: &[usize]) {
        debug_assert!(pos.len() >= self.dims);
        for d in 0..self.dims {
            debug_assert!(pos[d] < self.interior[d]);
            self.pos[d] = pos[d] as isize;
        }
    }

    /// Advances through the interior in x-fastest order; false past the end.
    pub fn advance(&mut self) -> bool {
        for d in 0..self.dims {
            self.pos[d] += 1;
            if (self.pos[d] as usize) < self.interior[d] {
                return true;
            }
            self.pos[d] = 0;
        }
        false
    }

    /// Linear cell index into the padded block.
    #[inline]
    pub fn cell(&self) -> usize {
        let mut idx = 0;
        for d in 0..self.dims {
            let padded = self.pos[d] + self.padding as isize;
            debug_assert!(
                padded >= 0 && (padded as usize) < self.interior[d] + 2 * self.padding,
                "cursor left the padded block in dim {d}"
            );
            idx += padded as usize * self.strides[d];
        }
        idx
    }

    pub fn storage(&self) -> &'a BlockStorage {
        self.storage
    }

    #[inline]
    pub fn get(&self, component: usize, lane: usize) -> f64 {
        self.storage.get_f64_unchecked(component, lane, self.cell())
    }

    #[inline]
    pub fn set(&self, component: usize, lane: usize, v: f64) {
        self.storage.set_f64_unchecked(component, lane, self.cell(), v)
    }

    /// Component 0, lane 0 — the whole record for plain scalar fields.
    #[inline]
    pub fn value(&self) -> f64 {
        self.get(0, 0)
    }

    #[inline]
    pub fn set_value(&self, v: f64) {
        self.set(0, 0, v)
    }

    pub fn get_scalar(&self, component: usize, lane: usize) -> Result<ScalarValue> {
        self.storage.get(component, lane, self.cell())
    }

    pub fn set_scalar(&self, component: usize, lane: usize, v: ScalarValue) -> Result<()> {
        self.storage.set(component, lane, self.cell(), v)
    }
}

impl<'a> GridCursor for BlockIterator<'a> {
    fn offset(&self, dim: usize, amount: isize) -> Self {
        debug_assert!(dim < self.dims);
        let mut out = *self;
        out.pos[dim] += amount;
        debug_assert!(
            out.pos[dim] >= -(self.padding as isize)
                && out.pos[dim] < (self.interior[dim] + self.padding) as isize,
            "offset of {amount} in dim {dim} exceeds padding {}",
            self.padding
        );
        out
    }

    fn valid_in_domain(&self) -> bool {
        (0..self.dims).all(|d| self.pos[d] >= 0 && (self.pos[d] as usize) < self.interior[d])
    }

    fn global_index(&self, _dim: usize) -> Result<usize> {
        Err(Error::Unsupported(
            "block-local cursor has no global position; use an indexed cursor".into(),
        ))
    }
}

/// Cursor that additionally knows the block's place in the global domain, so
/// stencils can test proximity to physical boundaries and compute
/// coordinate-dependent values.
#[derive(Clone, Copy)]
pub struct IndexedIterator<'a> {
    inner: BlockIterator<'a>,
    origin: [usize; MAX_DIMS],
    global: [usize; MAX_DIMS],
}

impl<'a> IndexedIterator<'a> {
    pub(crate) fn new(tensor: &Tensor, block_idx: usize, storage: &'a BlockStorage) -> Self {
        let block = tensor.block(block_idx);
        let dims = tensor.dims();
        let mut origin = [0usize; MAX_DIMS];
        let mut global = [1usize; MAX_DIMS];
        for d in 0..dims {
            origin[d] = block.global_origin(d);
            global[d] = tensor.global_extents().size(d);
        }
        Self { inner: BlockIterator::new(block, storage, dims), origin, global }
    }

    pub fn dims(&self) -> usize {
        self.inner.dims
    }

    pub fn pos(&self, dim: usize) -> isize {
        self.inner.pos[dim]
    }

    pub fn set_pos(&mut self, pos: &[usize]) {
        self.inner.set_pos(pos)
    }

    pub fn advance(&mut self) -> bool {
        self.inner.advance()
    }

    pub fn cell(&self) -> usize {
        self.inner.cell()
    }

    pub fn storage(&self) -> &'a BlockStorage {
        self.inner.storage
    }

    #[inline]
    pub fn get(&self, component: usize, lane: usize) -> f64 {
        self.inner.get(component, lane)
    }

    #[inline]
    pub fn set(&self, component: usize, lane: usize, v: f64) {
        self.inner.set(component, lane, v)
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.inner.value()
    }

    #[inline]
    pub fn set_value(&self, v: f64) {
        self.inner.set_value(v)
    }

    pub fn get_scalar(&self, component: usize, lane: usize) -> Result<ScalarValue> {
        self.inner.get_scalar(component, lane)
    }

    pub fn set_scalar(&self, component: usize, lane: usize, v: ScalarValue) -> Result<()> {
        self.inner.set_scalar(component, lane, v)
    }

    /// Global size of the domain along `dim`.
    pub fn domain_size(&self, dim: usize) -> usize {
        self.global[dim]
    }

    /// Signed global coordinate (offset cursors may sit outside the domain).
    pub fn global_pos(&self, dim: usize) -> isize {
        self.origin[dim] as isize + self.inner.pos[dim]
    }
}

impl<'a> GridCursor for IndexedIterator<'a> {
    fn offset(&self, dim: usize, amount: isize) -> Self {
        Self { inner: self.inner.offset(dim, amount), origin: self.origin, global: self.global }
    }

    /// Validity against the *global* domain: an offset cursor in padding
    /// that still maps to a real global cell (an interior neighbor's data)
    /// is valid; one past a physical face is not.
    fn valid_in_domain(&self) -> bool {
        (0..self.dims()).all(|d| {
            let g = self.global_pos(d);
            g >= 0 && (g as usize) < self.global[d]
        })
    }

    fn global_index(&self, dim: usize) -> Result<usize> {
        if dim >= self.dims() {
            return Err(Error::Index(format!("dimension {dim} out of range")));
        }
        let g = self.global_pos(dim);
        if g < 0 || g as usize >= self.global[dim] {
            return Err(Error::Index(format!("cursor outside global domain in dim {dim}")));
        }
        Ok(g as usize)
    }
}

impl Tensor {
    /// Block-local cursor at the block's first interior cell.
    pub fn block_cursor<'a>(&self, block_idx: usize, storage: &'a BlockStorage) -> BlockIterator<'a> {
        BlockIterator::new(self.block(block_idx), storage, self.dims())
    }

    /// Global-aware cursor at the block's first interior cell.
    pub fn indexed_cursor<'a>(&self, block_idx: usize, storage: &'a BlockStorage) -> IndexedIterator<'a> {
        IndexedIterator::new(self, block_idx, storage)
    }
}

/// Runs `body(d)` for `d in 0..count`; lets a kernel body handle all
/// dimensionalities with one loop instead of per-rank variants.
#[inline]
pub fn dim_loop(count: usize, mut body: impl FnMut(usize)) {
    for d in 0..count {
        body(d);
    }
}

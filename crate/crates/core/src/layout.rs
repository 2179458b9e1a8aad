//! Polymorphic record storage: the same record schema can be laid out
//! contiguously (array-of-structs) or strided (struct-of-arrays) inside a
//! block, with all access resolved through (component, lane, cell) indices so
//! kernels are layout-agnostic.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// How the scalars of a record are arranged inside a block.
///
/// `Contiguous` keeps each record's scalars adjacent (AoS), `Strided` stores
/// one plane per scalar lane across all cells (SoA).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutKind {
    Contiguous,
    Strided,
}

/// Scalar element kinds storable in a record component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarKind {
    F64,
    F32,
    I64,
    I32,
    Bool,
}

/// A typed scalar value moving in or out of storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarValue {
    F64(f64),
    F32(f32),
    I64(i64),
    I32(i32),
    Bool(bool),
}

impl ScalarValue {
    pub fn kind(&self) -> ScalarKind {
        match self {
            ScalarValue::F64(_) => ScalarKind::F64,
            ScalarValue::F32(_) => ScalarKind::F32,
            ScalarValue::I64(_) => ScalarKind::I64,
            ScalarValue::I32(_) => ScalarKind::I32,
            ScalarValue::Bool(_) => ScalarKind::Bool,
        }
    }
}

// Every slot is stored at the widest supported scalar width (8 bytes), so
// plane arithmetic is uniform for mixed schemas; narrower kinds round-trip
// through the wide slot.
fn encode(kind: ScalarKind, value: ScalarValue) -> Result<u64> {
    if kind != value.kind() {
        return Err(Error::Index(format!(
            "scalar kind mismatch: slot is {kind:?}, value is {:?}",
            value.kind()
        )));
    }
    Ok(match value {
        ScalarValue::F64(v) => v.to_bits(),
        ScalarValue::F32(v) => v.to_bits() as u64,
        ScalarValue::I64(v) => v as u64,
        ScalarValue::I32(v) => v as u32 as u64,
        ScalarValue::Bool(v) => v as u64,
    })
}

fn decode(kind: ScalarKind, bits: u64) -> ScalarValue {
    match kind {
        ScalarKind::F64 => ScalarValue::F64(f64::from_bits(bits)),
        ScalarKind::F32 => ScalarValue::F32(f32::from_bits(bits as u32)),
        ScalarKind::I64 => ScalarValue::I64(bits as i64),
        ScalarKind::I32 => ScalarValue::I32(bits as u32 as i32),
        ScalarKind::Bool => ScalarValue::Bool(bits != 0),
    }
}

/// One component of a record: a scalar kind and how many lanes it has
/// (1 for a scalar, D for a D-element vector).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentDescriptor {
    pub scalar_kind: ScalarKind,
    pub arity: usize,
}

impl ComponentDescriptor {
    pub fn scalar(kind: ScalarKind) -> Self {
        Self { scalar_kind: kind, arity: 1 }
    }

    pub fn vector(kind: ScalarKind, arity: usize) -> Self {
        Self { scalar_kind: kind, arity }
    }
}

/// Describes the component types of a user-defined record plus the layout
/// kind used when the record is stored in a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordSchema {
    components: Vec<ComponentDescriptor>,
    layout: LayoutKind,
    // prefix[c] = number of scalar lanes before component c
    prefix: Vec<usize>,
    total_scalars: usize,
}

impl RecordSchema {
    pub fn new(components: Vec<ComponentDescriptor>, layout: LayoutKind) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("schema needs at least one component".into()));
        }
        if components.iter().any(|c| c.arity == 0) {
            return Err(Error::Config("component arity must be >= 1".into()));
        }
        let mut prefix = Vec::with_capacity(components.len());
        let mut total = 0;
        for c in &components {
            prefix.push(total);
            total += c.arity;
        }
        Ok(Self { components, layout, prefix, total_scalars: total })
    }

    /// Single-component `f64` scalar schema, the common case for fields.
    pub fn scalar_f64(layout: LayoutKind) -> Self {
        Self::new(vec![ComponentDescriptor::scalar(ScalarKind::F64)], layout).unwrap()
    }

    pub fn layout(&self) -> LayoutKind {
        self.layout
    }

    pub fn with_layout(&self, layout: LayoutKind) -> Self {
        let mut s = self.clone();
        s.layout = layout;
        s
    }

    pub fn components(&self) -> &[ComponentDescriptor] {
        &self.components
    }

    /// Total scalar lanes per record.
    pub fn total_scalars(&self) -> usize {
        self.total_scalars
    }

    /// Scalar lanes preceding component `c`.
    pub fn prefix(&self, component: usize) -> usize {
        self.prefix[component]
    }

    pub fn scalar_kind(&self, component: usize) -> ScalarKind {
        self.components[component].scalar_kind
    }

    fn check(&self, component: usize, lane: usize) -> Result<()> {
        let desc = self.components.get(component).ok_or_else(|| {
            Error::Index(format!(
                "component {component} out of range ({} components)",
                self.components.len()
            ))
        })?;
        if lane >= desc.arity {
            return Err(Error::Index(format!(
                "lane {lane} out of range for component {component} (arity {})",
                desc.arity
            )));
        }
        Ok(())
    }

    /// Slot offset of (component, lane, cell) in a block of `element_count`
    /// cells. Bijective onto `[0, storage_extent)` for both layouts.
    pub fn offset(
        &self,
        component: usize,
        lane: usize,
        cell: usize,
        element_count: usize,
    ) -> Result<usize> {
        self.check(component, lane)?;
        if cell >= element_count {
            return Err(Error::Index(format!(
                "cell {cell} out of range ({element_count} cells)"
            )));
        }
        Ok(self.offset_unchecked(component, lane, cell, element_count))
    }

    #[inline]
    pub(crate) fn offset_unchecked(
        &self,
        component: usize,
        lane: usize,
        cell: usize,
        element_count: usize,
    ) -> usize {
        debug_assert!(component < self.components.len());
        debug_assert!(lane < self.components[component].arity);
        debug_assert!(cell < element_count);
        match self.layout {
            LayoutKind::Contiguous => cell * self.total_scalars + self.prefix[component] + lane,
            LayoutKind::Strided => (self.prefix[component] + lane) * element_count + cell,
        }
    }
}

/// Number of scalar slots needed to store `element_count` records;
/// layout-independent.
pub fn storage_extent(schema: &RecordSchema, element_count: usize) -> usize {
    element_count * schema.total_scalars()
}

/// Checked form of [`RecordSchema::offset`], kept as a free function for
/// callers that reason about raw slot indices.
pub fn component_offset(
    schema: &RecordSchema,
    component: usize,
    lane: usize,
    cell: usize,
    element_count: usize,
) -> Result<usize> {
    schema.offset(component, lane, cell, element_count)
}

pub(crate) struct SlotStore {
    slots: Box<[AtomicU64]>,
}

impl SlotStore {
    pub(crate) fn new(len: usize) -> Self {
        let mut v = Vec::with_capacity(len);
        v.resize_with(len, || AtomicU64::new(0));
        Self { slots: v.into_boxed_slice() }
    }

    pub(crate) fn len(&self) -> usize {
        self.slots.len()
    }
}

/// A view onto a range of 8-byte slots, possibly carved out of a larger
/// arena-owned store. Cheap to clone; clones alias the same slots.
///
/// Slots are atomics so distinct cells may be written by different tasks
/// concurrently; ordering between tasks comes from graph dependencies, the
/// accesses themselves are relaxed.
#[derive(Clone)]
pub struct SlotBuffer {
    store: Arc<SlotStore>,
    offset: usize,
    len: usize,
}

impl SlotBuffer {
    pub fn new(len: usize) -> Self {
        Self { store: Arc::new(SlotStore::new(len)), offset: 0, len }
    }

    pub(crate) fn from_store(store: Arc<SlotStore>, offset: usize, len: usize) -> Self {
        assert!(offset + len <= store.len());
        Self { store, offset, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get_bits(&self, idx: usize) -> u64 {
        debug_assert!(idx < self.len);
        self.store.slots[self.offset + idx].load(Ordering::Relaxed)
    }

    #[inline]
    pub fn set_bits(&self, idx: usize, bits: u64) {
        debug_assert!(idx < self.len);
        self.store.slots[self.offset + idx].store(bits, Ordering::Relaxed);
    }

    /// Copy of all slots, for whole-buffer comparisons in tests.
    pub fn snapshot(&self) -> Vec<u64> {
        (0..self.len).map(|i| self.get_bits(i)).collect()
    }

    pub fn copy_from(&self, other: &SlotBuffer) {
        assert_eq!(self.len, other.len);
        for i in 0..self.len {
            self.set_bits(i, other.get_bits(i));
        }
    }
}

/// Raw scalar storage for one block: a slot buffer plus the schema and the
/// padded cell count that fix the offset arithmetic.
#[derive(Clone)]
pub struct BlockStorage {
    slots: SlotBuffer,
    schema: RecordSchema,
    element_count: usize,
}

impl BlockStorage {
    pub fn new(schema: RecordSchema, element_count: usize) -> Self {
        let slots = SlotBuffer::new(storage_extent(&schema, element_count));
        Self { slots, schema, element_count }
    }

    /// Storage backed by a caller-provided buffer (e.g. carved from an
    /// arena). The buffer must hold at least `storage_extent` slots.
    pub fn with_buffer(schema: RecordSchema, element_count: usize, slots: SlotBuffer) -> Result<Self> {
        if slots.len() < storage_extent(&schema, element_count) {
            return Err(Error::Config(format!(
                "buffer has {} slots, schema needs {}",
                slots.len(),
                storage_extent(&schema, element_count)
            )));
        }
        Ok(Self { slots, schema, element_count })
    }

    pub fn schema(&self) -> &RecordSchema {
        &self.schema
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn slots(&self) -> &SlotBuffer {
        &self.slots
    }

    pub fn view(&self, element_index: usize) -> Result<RecordView<'_>> {
        if element_index >= self.element_count {
            return Err(Error::Index(format!(
                "element {element_index} out of range ({} elements)",
                self.element_count
            )));
        }
        Ok(RecordView { storage: self, element_index })
    }

    #[inline]
    pub fn get(&self, component: usize, lane: usize, cell: usize) -> Result<ScalarValue> {
        let off = self.schema.offset(component, lane, cell, self.element_count)?;
        Ok(decode(self.schema.scalar_kind(component), self.slots.get_bits(off)))
    }

    #[inline]
    pub fn set(&self, component: usize, lane: usize, cell: usize, value: ScalarValue) -> Result<()> {
        let off = self.schema.offset(component, lane, cell, self.element_count)?;
        self.slots.set_bits(off, encode(self.schema.scalar_kind(component), value)?);
        Ok(())
    }

    #[inline]
    pub(crate) fn get_f64_unchecked(&self, component: usize, lane: usize, cell: usize) -> f64 {
        let off = self.schema.offset_unchecked(component, lane, cell, self.element_count);
        f64::from_bits(self.slots.get_bits(off))
    }

    #[inline]
    pub(crate) fn set_f64_unchecked(&self, component: usize, lane: usize, cell: usize, v: f64) {
        let off = self.schema.offset_unchecked(component, lane, cell, self.element_count);
        self.slots.set_bits(off, v.to_bits());
    }
}

/// Logical copy of `src` re-laid-out as `target`. Values for every
/// (component, lane, cell) are preserved; converting back is bit-identical.
pub fn convert_layout(src: &BlockStorage, target: LayoutKind) -> BlockStorage {
    let schema = src.schema.with_layout(target);
    let dst = BlockStorage::new(schema, src.element_count);
    for (c, desc) in src.schema.components().iter().enumerate() {
        for l in 0..desc.arity {
            for cell in 0..src.element_count {
                let from = src.schema.offset_unchecked(c, l, cell, src.element_count);
                let to = dst.schema.offset_unchecked(c, l, cell, dst.element_count);
                dst.slots.set_bits(to, src.slots.get_bits(from));
            }
        }
    }
    dst
}

/// Read/write handle for one record cell; touches only that cell's scalars.
pub struct RecordView<'a> {
    storage: &'a BlockStorage,
    element_index: usize,
}

impl<'a> RecordView<'a> {
    pub fn element_index(&self) -> usize {
        self.element_index
    }

    pub fn get(&self, component: usize, lane: usize) -> Result<ScalarValue> {
        self.storage.get(component, lane, self.element_index)
    }

    pub fn set(&self, component: usize, lane: usize, value: ScalarValue) -> Result<()> {
        self.storage.set(component, lane, self.element_index, value)
    }

    pub fn get_f64(&self, component: usize, lane: usize) -> Result<f64> {
        match self.get(component, lane)? {
            ScalarValue::F64(v) => Ok(v),
            other => Err(Error::Index(format!("expected f64 slot, found {:?}", other.kind()))),
        }
    }

    pub fn set_f64(&self, component: usize, lane: usize, v: f64) -> Result<()> {
        self.set(component, lane, ScalarValue::F64(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema(components: Vec<ComponentDescriptor>, layout: LayoutKind) -> RecordSchema {
        RecordSchema::new(components, layout).unwrap()
    }

    fn f64x(n: usize) -> ComponentDescriptor {
        ComponentDescriptor::vector(ScalarKind::F64, n)
    }

    #[test]
    fn storage_extent_examples() {
        let s = schema(vec![f64x(3), ComponentDescriptor::scalar(ScalarKind::Bool)], LayoutKind::Contiguous);
        assert_eq!(storage_extent(&s, 10), 40);
        assert_eq!(storage_extent(&s, 0), 0);
        let s4 = schema(vec![f64x(4)], LayoutKind::Strided);
        assert_eq!(storage_extent(&s4, 250 * 250), 250_000);
    }

    #[test]
    fn offset_examples() {
        let s = schema(vec![f64x(2)], LayoutKind::Contiguous);
        assert_eq!(s.offset(0, 1, 0, 4).unwrap(), 1);

        let s = schema(vec![f64x(2)], LayoutKind::Strided);
        assert_eq!(s.offset(0, 1, 0, 8).unwrap(), 8);

        // prefix = 3, 3 * 100 + 5
        let s = schema(vec![f64x(3), ComponentDescriptor::scalar(ScalarKind::Bool)], LayoutKind::Strided);
        assert_eq!(s.offset(1, 0, 5, 100).unwrap(), 305);
    }

    #[test]
    fn offset_out_of_range() {
        let s = schema(vec![f64x(2)], LayoutKind::Contiguous);
        assert!(s.offset(1, 0, 0, 4).is_err());
        assert!(s.offset(0, 2, 0, 4).is_err());
        assert!(s.offset(0, 0, 4, 4).is_err());
    }

    #[test]
    fn offset_bijective_both_layouts() {
        let s = schema(
            vec![f64x(3), ComponentDescriptor::scalar(ScalarKind::Bool), f64x(2)],
            LayoutKind::Contiguous,
        );
        for layout in [LayoutKind::Contiguous, LayoutKind::Strided] {
            let s = s.with_layout(layout);
            let n = 7;
            let mut seen = vec![false; storage_extent(&s, n)];
            for (c, desc) in s.components().iter().enumerate() {
                for l in 0..desc.arity {
                    for cell in 0..n {
                        let off = s.offset(c, l, cell, n).unwrap();
                        assert!(!seen[off], "offset {off} hit twice");
                        seen[off] = true;
                    }
                }
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn strided_plane_contiguity() {
        let s = schema(vec![f64x(2), f64x(1)], LayoutKind::Strided);
        let n = 9;
        for (c, desc) in s.components().iter().enumerate() {
            for l in 0..desc.arity {
                let base = s.offset(c, l, 0, n).unwrap();
                for cell in 0..n {
                    assert_eq!(s.offset(c, l, cell, n).unwrap(), base + cell);
                }
            }
        }
    }

    #[test]
    fn view_roundtrip_and_isolation() {
        for layout in [LayoutKind::Contiguous, LayoutKind::Strided] {
            let s = schema(vec![f64x(2), ComponentDescriptor::scalar(ScalarKind::Bool)], layout);
            let storage = BlockStorage::new(s, 6);
            let view = storage.view(2).unwrap();
            view.set_f64(0, 0, 3.5).unwrap();
            assert_eq!(view.get_f64(0, 0).unwrap(), 3.5);

            // writing cell i leaves every other slot bit-identical
            let before = storage.slots().snapshot();
            let touched = storage.schema().offset(1, 0, 4, 6).unwrap();
            storage.view(4).unwrap().set(1, 0, ScalarValue::Bool(true)).unwrap();
            let after = storage.slots().snapshot();
            for (i, (b, a)) in before.iter().zip(after.iter()).enumerate() {
                if i == touched {
                    assert_ne!(b, a);
                } else {
                    assert_eq!(b, a, "slot {i} modified");
                }
            }
        }
    }

    #[test]
    fn mixed_kinds_roundtrip() {
        let s = schema(
            vec![
                ComponentDescriptor::scalar(ScalarKind::F32),
                ComponentDescriptor::scalar(ScalarKind::I64),
                ComponentDescriptor::scalar(ScalarKind::I32),
                ComponentDescriptor::scalar(ScalarKind::Bool),
            ],
            LayoutKind::Strided,
        );
        let storage = BlockStorage::new(s, 3);
        storage.set(0, 0, 1, ScalarValue::F32(1.25)).unwrap();
        storage.set(1, 0, 1, ScalarValue::I64(-9)).unwrap();
        storage.set(2, 0, 1, ScalarValue::I32(-3)).unwrap();
        storage.set(3, 0, 1, ScalarValue::Bool(true)).unwrap();
        assert_eq!(storage.get(0, 0, 1).unwrap(), ScalarValue::F32(1.25));
        assert_eq!(storage.get(1, 0, 1).unwrap(), ScalarValue::I64(-9));
        assert_eq!(storage.get(2, 0, 1).unwrap(), ScalarValue::I32(-3));
        assert_eq!(storage.get(3, 0, 1).unwrap(), ScalarValue::Bool(true));
        // kind mismatch is an index error
        assert!(storage.set(1, 0, 0, ScalarValue::F64(1.0)).is_err());
    }

    #[test]
    fn convert_layout_preserves_values() {
        let s = schema(vec![f64x(3), f64x(1)], LayoutKind::Contiguous);
        let src = BlockStorage::new(s, 7);
        let mut x = 0.5f64;
        for c in 0..2 {
            let arity = src.schema().components()[c].arity;
            for l in 0..arity {
                for cell in 0..7 {
                    x = x * 1.7 + 0.3;
                    src.set(c, l, cell, ScalarValue::F64(x)).unwrap();
                }
            }
        }
        let strided = convert_layout(&src, LayoutKind::Strided);
        for c in 0..2 {
            let arity = src.schema().components()[c].arity;
            for l in 0..arity {
                for cell in 0..7 {
                    assert_eq!(strided.get(c, l, cell).unwrap(), src.get(c, l, cell).unwrap());
                }
            }
        }
        // involution is bit-identical
        let back = convert_layout(&strided, LayoutKind::Contiguous);
        assert_eq!(back.slots().snapshot(), src.slots().snapshot());
        // same-kind conversion is a plain copy
        let copy = convert_layout(&src, LayoutKind::Contiguous);
        assert_eq!(copy.slots().snapshot(), src.slots().snapshot());
    }

    proptest! {
        // Layout transparency: identical access sequences give identical
        // results under either layout.
        #[test]
        fn layout_transparency(writes in proptest::collection::vec((0..4usize, 0..5usize, any::<f64>()), 1..64)) {
            let comps = vec![f64x(2), f64x(2)];
            let aos = BlockStorage::new(schema(comps.clone(), LayoutKind::Contiguous), 5);
            let soa = BlockStorage::new(schema(comps, LayoutKind::Strided), 5);
            for (lane, cell, v) in &writes {
                let (c, l) = (lane / 2, lane % 2);
                aos.set(c, l, *cell, ScalarValue::F64(*v)).unwrap();
                soa.set(c, l, *cell, ScalarValue::F64(*v)).unwrap();
            }
            for c in 0..2 {
                for l in 0..2 {
                    for cell in 0..5 {
                        let a = aos.get(c, l, cell).unwrap();
                        let b = soa.get(c, l, cell).unwrap();
                        if let (ScalarValue::F64(a), ScalarValue::F64(b)) = (a, b) {
                            prop_assert_eq!(a.to_bits(), b.to_bits());
                        }
                    }
                }
            }
        }
    }
}

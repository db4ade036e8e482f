use std::fmt;

use super::{compose, IndexMap, IntTuple, Layout, LayoutError};

/// XOR swizzle on linear indices: the `bits`-wide field starting at bit
/// `base + shift` is XORed into the field starting at `base`.
///
/// With `shift >= bits` the source and target fields are disjoint, which makes
/// the map an involution and hence a bijection on every `[0, 2^k)` with
/// `k >= base + bits + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Swizzle {
    bits: u32,
    base: u32,
    shift: u32,
}

impl Swizzle {
    pub fn new(bits: u32, base: u32, shift: u32) -> Result<Self, LayoutError> {
        if bits > 0 && shift < bits {
            return Err(LayoutError::Swizzle(format!(
                "shift {shift} must be at least bits {bits} for the fields to be disjoint"
            )));
        }
        if bits + base + shift >= usize::BITS {
            return Err(LayoutError::Swizzle("fields exceed the index width".into()));
        }
        Ok(Swizzle { bits, base, shift })
    }

    pub const fn identity() -> Self {
        Swizzle {
            bits: 0,
            base: 0,
            shift: 0,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn shift(&self) -> u32 {
        self.shift
    }

    pub fn apply(&self, i: usize) -> usize {
        let mask = ((1usize << self.bits) - 1) << (self.base + self.shift);
        i ^ ((i & mask) >> self.shift)
    }

    /// 128-byte swizzle for rows of 128 bytes: 16-byte chunks are permuted
    /// by the row index modulo 8. Indices are in elements of `elem_bytes`.
    pub fn sw128(elem_bytes: usize) -> Result<Self, LayoutError> {
        let chunk = chunk_elems(elem_bytes)?;
        Swizzle::new(3, chunk.trailing_zeros(), 3)
    }
}

fn chunk_elems(elem_bytes: usize) -> Result<usize, LayoutError> {
    match elem_bytes {
        1 | 2 | 4 | 8 => Ok(16 / elem_bytes),
        _ => Err(LayoutError::Swizzle(format!(
            "element size {elem_bytes} is not 1, 2, 4 or 8 bytes"
        ))),
    }
}

impl fmt::Display for Swizzle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sw<{},{},{}>", self.bits, self.base, self.shift)
    }
}

/// A layout whose index function is post-composed with an optional swizzle.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComposedLayout {
    inner: Layout,
    post: Option<Swizzle>,
}

impl ComposedLayout {
    pub fn new(inner: Layout, post: Option<Swizzle>) -> Self {
        ComposedLayout { inner, post }
    }

    /// The K-major (row-major) 128-byte swizzled shared-memory atom: 8 rows
    /// of 128 bytes, i.e. `Sw<3,b,3> ∘ (8,128/e):(128/e,1)` in elements.
    ///
    /// This is a named preset; its integer parameters are chosen so that the
    /// atom is a bijection and 16-byte chunks rotate across banks by row.
    pub fn k_major_sw128_atom(elem_bytes: usize) -> Result<Self, LayoutError> {
        let swizzle = Swizzle::sw128(elem_bytes)?;
        let row = 128 / elem_bytes;
        let inner = Layout::new(IntTuple::ints(&[8, row]), IntTuple::ints(&[row, 1]))?;
        Ok(ComposedLayout::new(inner, Some(swizzle)))
    }

    pub fn inner(&self) -> &Layout {
        &self.inner
    }

    pub fn post(&self) -> Option<Swizzle> {
        self.post
    }

    /// Precompose with `b`; the swizzle stays in place.
    pub fn compose(&self, b: &Layout) -> Result<ComposedLayout, LayoutError> {
        Ok(ComposedLayout {
            inner: compose(&self.inner, b)?,
            post: self.post,
        })
    }

    fn post_apply(&self, i: usize) -> usize {
        self.post.map_or(i, |s| s.apply(i))
    }

    pub fn image(&self) -> Vec<usize> {
        self.inner
            .image()
            .into_iter()
            .map(|i| self.post_apply(i))
            .collect()
    }

    pub fn is_bijective(&self) -> bool {
        super::is_permutation(self.image())
    }
}

impl From<Layout> for ComposedLayout {
    fn from(inner: Layout) -> Self {
        ComposedLayout::new(inner, None)
    }
}

impl IndexMap for ComposedLayout {
    fn shape(&self) -> &IntTuple {
        self.inner.shape()
    }

    fn index(&self, i: usize) -> usize {
        self.post_apply(self.inner.call(i))
    }

    fn index_md(&self, coord: &IntTuple) -> Result<usize, LayoutError> {
        Ok(self.post_apply(self.inner.call_md(coord)?))
    }
}

impl fmt::Display for ComposedLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.post {
            Some(s) => write!(f, "{s} o {}", self.inner),
            None => write!(f, "{}", self.inner),
        }
    }
}

//! Integer layout algebra: hierarchical shapes and strides, the layout
//! functions they define, composition, tiling, XOR swizzles and the
//! accumulator-to-operand fragment reshape.
//!
//! A [`Layout`] `shape:stride` maps a (possibly nested) coordinate to a
//! linear index, `Σ aᵢ·dᵢ` over the flattened leaves. Integer arguments are
//! decomposed colexicographically (first mode fastest), so `(4,4):(1,4)` is
//! the identity on `[0,16)` and `(4,4):(4,1)` is the row-major transpose.
//!
//! The layout *function* is insensitive to parenthesization, while the
//! structural operations ([`Layout::mode`], [`reshape_acc_to_operand`]) act
//! on the explicit nesting.

mod compose;
mod parse;
mod reshape;
mod swizzle;
mod tile;

use std::fmt;

pub use compose::compose;
pub use reshape::reshape_acc_to_operand;
pub use swizzle::{ComposedLayout, Swizzle};
pub use tile::tile_to_shape;

/// Errors raised by layout construction and the layout operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("shape {shape} and stride {stride} are not congruent")]
    Incongruent { shape: String, stride: String },
    #[error("coordinate {coord} is out of bounds for shape {shape}")]
    OutOfBounds { coord: String, shape: String },
    #[error("index arithmetic overflowed")]
    Overflow,
    #[error("cannot compose {outer} with {inner}: {reason}")]
    Composition {
        outer: String,
        inner: String,
        reason: String,
    },
    #[error("cannot tile {atom} to {target}: {reason}")]
    Tiling {
        atom: String,
        target: String,
        reason: String,
    },
    #[error("cannot reshape {acc} to {op}: {reason}")]
    Reshape {
        acc: String,
        op: String,
        reason: String,
    },
    #[error("invalid swizzle: {0}")]
    Swizzle(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// A non-negative integer or an ordered, arbitrarily nested tuple of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IntTuple {
    Int(usize),
    Tuple(Vec<IntTuple>),
}

impl IntTuple {
    pub fn tuple(items: impl IntoIterator<Item = IntTuple>) -> Self {
        IntTuple::Tuple(items.into_iter().collect())
    }

    /// Flat tuple of integers, `(a, b, c)`.
    pub fn ints(items: &[usize]) -> Self {
        IntTuple::Tuple(items.iter().copied().map(IntTuple::Int).collect())
    }

    pub fn is_int(&self) -> bool {
        matches!(self, IntTuple::Int(_))
    }

    pub fn as_int(&self) -> Option<usize> {
        match self {
            IntTuple::Int(n) => Some(*n),
            IntTuple::Tuple(_) => None,
        }
    }

    /// Number of top-level modes; an integer has rank 1.
    pub fn rank(&self) -> usize {
        match self {
            IntTuple::Int(_) => 1,
            IntTuple::Tuple(v) => v.len(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            IntTuple::Int(_) => 0,
            IntTuple::Tuple(v) => 1 + v.iter().map(IntTuple::depth).max().unwrap_or(0),
        }
    }

    /// Top-level mode `i`. An integer is its own single mode.
    pub fn get(&self, i: usize) -> Option<&IntTuple> {
        match self {
            IntTuple::Int(_) if i == 0 => Some(self),
            IntTuple::Int(_) => None,
            IntTuple::Tuple(v) => v.get(i),
        }
    }

    pub fn modes(&self) -> Vec<&IntTuple> {
        match self {
            IntTuple::Int(_) => vec![self],
            IntTuple::Tuple(v) => v.iter().collect(),
        }
    }

    /// Leaves in left-to-right order.
    pub fn flatten(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.flatten_into(&mut out);
        out
    }

    fn flatten_into(&self, out: &mut Vec<usize>) {
        match self {
            IntTuple::Int(n) => out.push(*n),
            IntTuple::Tuple(v) => v.iter().for_each(|t| t.flatten_into(out)),
        }
    }

    /// Product of all leaves (1 for the empty tuple).
    pub fn size(&self) -> usize {
        self.flatten().iter().product()
    }

    /// Same nesting structure, leaf for leaf.
    pub fn is_congruent(&self, other: &IntTuple) -> bool {
        match (self, other) {
            (IntTuple::Int(_), IntTuple::Int(_)) => true,
            (IntTuple::Tuple(a), IntTuple::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.is_congruent(y))
            }
            _ => false,
        }
    }

    /// Rebuild this tuple's structure with leaves drawn in order from `leaves`.
    pub(crate) fn map_leaves<F: FnMut(usize) -> IntTuple>(&self, f: &mut F) -> IntTuple {
        match self {
            IntTuple::Int(n) => f(*n),
            IntTuple::Tuple(v) => IntTuple::Tuple(v.iter().map(|t| t.map_leaves(f)).collect()),
        }
    }

    pub(crate) fn unflatten(&self, leaves: &[usize]) -> IntTuple {
        let mut it = leaves.iter().copied();
        self.map_leaves(&mut |_| IntTuple::Int(it.next().expect("leaf count mismatch")))
    }
}

impl From<usize> for IntTuple {
    fn from(n: usize) -> Self {
        IntTuple::Int(n)
    }
}

impl fmt::Display for IntTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntTuple::Int(n) => write!(f, "{n}"),
            IntTuple::Tuple(v) => {
                f.write_str("(")?;
                for (i, t) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{t}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Anything that behaves as an index function over a shaped domain:
/// plain layouts and swizzled (composed) layouts.
pub trait IndexMap {
    fn shape(&self) -> &IntTuple;

    /// Index of the `i`-th element in colexicographic order. Values of `i`
    /// past the domain extend the last mode.
    fn index(&self, i: usize) -> usize;

    /// Index of a hierarchical coordinate congruent to (or coarser than) the shape.
    fn index_md(&self, coord: &IntTuple) -> Result<usize, LayoutError>;

    fn size(&self) -> usize {
        self.shape().size()
    }
}

/// A `shape:stride` pair of congruent integer tuples.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout {
    shape: IntTuple,
    stride: IntTuple,
}

impl Layout {
    pub fn new(shape: IntTuple, stride: IntTuple) -> Result<Self, LayoutError> {
        if !shape.is_congruent(&stride) {
            return Err(LayoutError::Incongruent {
                shape: shape.to_string(),
                stride: stride.to_string(),
            });
        }
        let layout = Layout { shape, stride };
        layout.checked_cosize().ok_or(LayoutError::Overflow)?;
        Ok(layout)
    }

    /// Rank-1 layout `n:d`.
    pub fn leaf(n: usize, d: usize) -> Self {
        Layout {
            shape: IntTuple::Int(n),
            stride: IntTuple::Int(d),
        }
    }

    /// Concatenate layouts as top-level modes.
    pub fn from_modes(modes: impl IntoIterator<Item = Layout>) -> Result<Self, LayoutError> {
        let (shape, stride): (Vec<_>, Vec<_>) =
            modes.into_iter().map(|l| (l.shape, l.stride)).unzip();
        Layout::new(IntTuple::Tuple(shape), IntTuple::Tuple(stride))
    }

    /// Compact layout with the first mode fastest. Unit extents get stride 0.
    pub fn column_major(shape: IntTuple) -> Self {
        let extents = shape.flatten();
        let mut acc = 1usize;
        let strides: Vec<usize> = extents
            .iter()
            .map(|&n| {
                let s = if n == 1 { 0 } else { acc };
                acc *= n;
                s
            })
            .collect();
        let stride = shape.unflatten(&strides);
        Layout { shape, stride }
    }

    /// Compact layout with the last mode fastest. Unit extents get stride 0.
    pub fn row_major(shape: IntTuple) -> Self {
        let extents = shape.flatten();
        let mut strides = vec![0; extents.len()];
        let mut acc = 1usize;
        for (s, &n) in strides.iter_mut().zip(&extents).rev() {
            *s = if n == 1 { 0 } else { acc };
            acc *= n;
        }
        let stride = shape.unflatten(&strides);
        Layout { shape, stride }
    }

    pub fn shape(&self) -> &IntTuple {
        &self.shape
    }

    pub fn stride(&self) -> &IntTuple {
        &self.stride
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn size(&self) -> usize {
        self.shape.size()
    }

    /// `1 + Σ (nᵢ−1)·dᵢ`, or 0 for an empty domain.
    pub fn cosize(&self) -> usize {
        self.checked_cosize()
            .expect("cosize validated at construction")
    }

    fn checked_cosize(&self) -> Option<usize> {
        let (shape, stride) = self.flat_modes();
        if shape.contains(&0) {
            return Some(0);
        }
        shape.iter().zip(&stride).try_fold(1usize, |acc, (&n, &d)| {
            (n - 1).checked_mul(d).and_then(|x| acc.checked_add(x))
        })
    }

    /// Flattened `(extents, strides)`.
    pub fn flat_modes(&self) -> (Vec<usize>, Vec<usize>) {
        (self.shape.flatten(), self.stride.flatten())
    }

    /// Same leaves with all nesting removed.
    pub fn flatten(&self) -> Layout {
        let (s, d) = self.flat_modes();
        if s.len() == 1 {
            return Layout::leaf(s[0], d[0]);
        }
        Layout {
            shape: IntTuple::ints(&s),
            stride: IntTuple::ints(&d),
        }
    }

    /// Top-level mode `i` as a layout of its own.
    pub fn mode(&self, i: usize) -> Option<Layout> {
        Some(Layout {
            shape: self.shape.get(i)?.clone(),
            stride: self.stride.get(i)?.clone(),
        })
    }

    pub fn modes(&self) -> Vec<Layout> {
        (0..self.rank()).filter_map(|i| self.mode(i)).collect()
    }

    /// Function-equal layout with unit modes dropped and contiguous neighbours
    /// merged. The last mode is kept so the extended domain is preserved.
    pub fn coalesce(&self) -> Layout {
        let modes = coalesced_modes(self);
        match modes.as_slice() {
            [(n, d)] => Layout::leaf(*n, *d),
            _ => {
                let (s, d): (Vec<_>, Vec<_>) = modes.into_iter().unzip();
                Layout {
                    shape: IntTuple::ints(&s),
                    stride: IntTuple::ints(&d),
                }
            }
        }
    }

    /// Layout function at `i`; see [`IndexMap::index`].
    pub fn call(&self, i: usize) -> usize {
        let (shape, stride) = self.flat_modes();
        eval_flat(&shape, &stride, i)
    }

    /// Multilinear layout function at a hierarchical coordinate.
    pub fn call_md(&self, coord: &IntTuple) -> Result<usize, LayoutError> {
        eval_md(&self.shape, &self.stride, coord).ok_or_else(|| LayoutError::OutOfBounds {
            coord: coord.to_string(),
            shape: self.shape.to_string(),
        })
    }

    /// All values of the layout function over its domain, in order.
    pub fn image(&self) -> Vec<usize> {
        let (shape, stride) = self.flat_modes();
        let size: usize = shape.iter().product();
        let mut out = Vec::with_capacity(size);
        let mut coord = vec![0usize; shape.len()];
        let mut value = 0usize;
        for _ in 0..size {
            out.push(value);
            // odometer increment, first mode fastest
            for k in 0..shape.len() {
                coord[k] += 1;
                value += stride[k];
                if coord[k] < shape[k] {
                    break;
                }
                value -= stride[k] * shape[k];
                coord[k] = 0;
            }
        }
        out
    }

    /// True if the function restricted to its domain is a bijection onto `[0, size)`.
    pub fn is_bijective(&self) -> bool {
        is_permutation(self.image())
    }
}

pub(crate) fn is_permutation(values: impl IntoIterator<Item = usize>) -> bool {
    let values: Vec<usize> = values.into_iter().collect();
    let mut seen = vec![false; values.len()];
    for v in values {
        match seen.get_mut(v) {
            Some(s) if !*s => *s = true,
            _ => return false,
        }
    }
    true
}

pub(crate) fn coalesced_modes(layout: &Layout) -> Vec<(usize, usize)> {
    let (shape, stride) = layout.flat_modes();
    let last = shape.len() - 1;
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(shape.len());
    for (k, (&n, &d)) in shape.iter().zip(&stride).enumerate() {
        if n == 1 && k != last {
            continue;
        }
        if let Some(prev) = out.last_mut() {
            if d == prev.0 * prev.1 {
                prev.0 *= n;
                continue;
            }
        }
        out.push((n, d));
    }
    if out.is_empty() {
        out.push((1, 0));
    }
    out
}

fn eval_flat(shape: &[usize], stride: &[usize], mut i: usize) -> usize {
    let mut acc = 0usize;
    let last = shape.len().saturating_sub(1);
    for (k, (&n, &d)) in shape.iter().zip(stride).enumerate() {
        if k == last {
            acc += i * d;
        } else {
            acc += (i % n) * d;
            i /= n;
        }
    }
    acc
}

fn eval_md(shape: &IntTuple, stride: &IntTuple, coord: &IntTuple) -> Option<usize> {
    match (shape, stride, coord) {
        (_, _, IntTuple::Int(c)) => {
            if *c >= shape.size() && shape.size() > 0 {
                return None;
            }
            Some(eval_flat(&shape.flatten(), &stride.flatten(), *c))
        }
        (IntTuple::Tuple(s), IntTuple::Tuple(d), IntTuple::Tuple(c)) if s.len() == c.len() => s
            .iter()
            .zip(d)
            .zip(c)
            .try_fold(0usize, |acc, ((s, d), c)| Some(acc + eval_md(s, d, c)?)),
        _ => None,
    }
}

impl IndexMap for Layout {
    fn shape(&self) -> &IntTuple {
        &self.shape
    }

    fn index(&self, i: usize) -> usize {
        self.call(i)
    }

    fn index_md(&self, coord: &IntTuple) -> Result<usize, LayoutError> {
        self.call_md(coord)
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.shape, self.stride)
    }
}

/// Mixed-radix colexicographic decomposition of `i` by `shape`, as a
/// coordinate congruent to the shape. The last leaf absorbs any overflow.
pub fn colex_decompose(shape: &IntTuple, i: usize) -> IntTuple {
    let extents = shape.flatten();
    let last = extents.len().saturating_sub(1);
    let mut rest = i;
    let coords: Vec<usize> = extents
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            if k == last {
                rest
            } else {
                let c = rest % n;
                rest /= n;
                c
            }
        })
        .collect();
    shape.unflatten(&coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Layout {
        s.parse().unwrap()
    }

    #[test]
    fn column_major_is_identity_inclusion() {
        let cm = l("(4,4):(1,4)");
        assert_eq!(cm.call(7), 7);
        assert!((0..16).all(|i| cm.call(i) == i));
    }

    #[test]
    fn row_major_sequence() {
        let rm = l("(4,4):(4,1)");
        assert_eq!(
            rm.image(),
            vec![0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15]
        );
        assert_eq!(Layout::row_major(IntTuple::ints(&[4, 4])), rm);
    }

    #[test]
    fn zero_stride_singleton() {
        assert_eq!(l("(1):(0)").call(0), 0);
    }

    #[test]
    fn multilinear_evaluation() {
        let cm = l("(4,4):(1,4)");
        assert_eq!(cm.call_md(&IntTuple::ints(&[2, 3])).unwrap(), 14);
        let c = l("((4,8,4),(2,2,8)):((128,1,16),(64,8,512))");
        let coord = IntTuple::tuple([IntTuple::ints(&[0, 1, 0]), IntTuple::ints(&[0, 0, 0])]);
        assert_eq!(c.call_md(&coord).unwrap(), 1);
        let zero = c.shape().map_leaves(&mut |_| IntTuple::Int(0));
        assert_eq!(c.call_md(&zero).unwrap(), 0);
    }

    #[test]
    fn coarse_coordinates_decompose_within_mode() {
        let c = l("((4,8,4),(2,2,8)):((128,1,16),(64,8,512))");
        // thread 5 = (1,1,0), value 3 = (1,1,0)
        let v = c.call_md(&IntTuple::ints(&[5, 3])).unwrap();
        assert_eq!(v, 128 + 1 + 64 + 8);
    }

    #[test]
    fn out_of_bounds_coordinate() {
        let cm = l("(4,4):(1,4)");
        assert!(matches!(
            cm.call_md(&IntTuple::ints(&[4, 0])),
            Err(LayoutError::OutOfBounds { .. })
        ));
        assert!(cm.call_md(&IntTuple::ints(&[1, 2, 3])).is_err());
    }

    #[test]
    fn incongruent_is_rejected() {
        let err = Layout::new(IntTuple::ints(&[2, 2]), IntTuple::Int(1)).unwrap_err();
        assert!(matches!(err, LayoutError::Incongruent { .. }));
        let nested = Layout::new(
            IntTuple::tuple([IntTuple::ints(&[2, 2]), 8.into()]),
            IntTuple::ints(&[1, 2, 4]),
        );
        assert!(nested.is_err());
    }

    #[test]
    fn overflow_is_an_error() {
        let err =
            Layout::new(IntTuple::ints(&[2, 2]), IntTuple::ints(&[1, usize::MAX])).unwrap_err();
        assert_eq!(err, LayoutError::Overflow);
    }

    #[test]
    fn size_and_cosize() {
        let c = l("((2,2,16),2,1):((1,2,4),64,0)");
        assert_eq!(c.size(), 128);
        assert_eq!(c.cosize(), 128);
        assert_eq!(l("(3,0):(1,1)").cosize(), 0);
        assert_eq!(l("(4,4):(4,1)").cosize(), 16);
    }

    #[test]
    fn parenthesization_does_not_change_the_function() {
        let a = l("((2,2),8):((1,2),4)");
        let b = l("(2,2,8):(1,2,4)");
        assert_eq!(a.image(), b.image());
        assert_eq!(a.flatten(), b);
    }

    #[test]
    fn extended_domain_runs_the_last_mode() {
        let a = l("(4,4):(1,4)");
        assert_eq!(a.call(20), 20);
        let b = l("(2,3):(3,1)");
        assert_eq!(b.call(7), 3 + 3);
    }

    #[test]
    fn coalesce_preserves_function() {
        for s in [
            "(2,(1,6)):(1,(6,2))",
            "((8,8),64):((64,512),1)",
            "((2,2,16),2,1):((1,2,4),64,0)",
            "(4,1):(1,0)",
        ] {
            let a = l(s);
            let c = a.coalesce();
            assert!(
                (0..a.size() * 2).all(|i| a.call(i) == c.call(i)),
                "{s} vs {c}"
            );
        }
        assert_eq!(l("(2,(1,6)):(1,(6,2))").coalesce().to_string(), "12:1");
        assert_eq!(l("(4,4):(1,4)").coalesce().to_string(), "16:1");
    }

    #[test]
    fn colex_decompose_roundtrips_through_both_views() {
        let c = l("((4,8,4),(2,2,8)):((128,1,16),(64,8,512))");
        for i in [0, 1, 17, 511, 4095] {
            let coord = colex_decompose(c.shape(), i);
            assert_eq!(c.call_md(&coord).unwrap(), c.call(i));
        }
    }
}

//! Software model of the warpgroup MMA register mapping.
//!
//! A warpgroup is 128 threads. For an accumulator atom of `64 × N` (N a
//! multiple of 16) the thread/value layout is
//!
//! ```text
//! ((4,8,4),(2,2,N/8)) : ((128,1,16),(64,8,512))
//! ```
//!
//! mapping `(thread, value)` to the column-major linear index `m + 64·n`.
//! Each thread owns two rows eight apart; four consecutive threads (a quad)
//! share a row pair. The 16-bit register-sourced A operand uses the `64 × 16`
//! instance of the same layout.

use std::fmt;

use crate::attention::Matrix;
use crate::layout::{IntTuple, Layout, LayoutError};

pub const WARPGROUP_THREADS: usize = 128;
pub const ATOM_M: usize = 64;
/// Width of the register-sourced operand atom.
pub const OPERAND_ATOM_K: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WgmmaError {
    #[error("thread {thread} / value {value} outside a {threads}x{values} fragment")]
    OutOfRange {
        thread: usize,
        value: usize,
        threads: usize,
        values: usize,
    },
    #[error("atom width {0} is not a multiple of 16 in 16..=256")]
    AtomWidth(usize),
    #[error("tile {rows}x{cols} does not decompose into {atom_m}x{atom_n} atoms")]
    Tile {
        rows: usize,
        cols: usize,
        atom_m: usize,
        atom_n: usize,
    },
    #[error("lane group width {0} is not one of 4, 8, 16, 32")]
    LaneWidth(usize),
    #[error("expected a multiple of {width} lanes, got {got}")]
    LaneCount { width: usize, got: usize },
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// `(thread, value) → (m, n)` layout of one warpgroup MMA atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadValueLayout {
    layout: Layout,
    atom_m: usize,
    atom_n: usize,
}

impl ThreadValueLayout {
    /// Accumulator (or 16-bit A operand) layout for a `64 × n` atom.
    pub fn new(n: usize) -> Result<Self, WgmmaError> {
        if n == 0 || !n.is_multiple_of(16) || n > 256 {
            return Err(WgmmaError::AtomWidth(n));
        }
        let thr = IntTuple::ints(&[4, 8, 4]);
        let val = IntTuple::ints(&[2, 2, n / 8]);
        let layout = Layout::new(
            IntTuple::tuple([thr, val]),
            IntTuple::tuple([IntTuple::ints(&[128, 1, 16]), IntTuple::ints(&[64, 8, 512])]),
        )?;
        Ok(ThreadValueLayout {
            layout,
            atom_m: ATOM_M,
            atom_n: n,
        })
    }

    pub fn clayout_64x64() -> Self {
        Self::new(64).expect("64 is a valid atom width")
    }

    pub fn clayout_64x16() -> Self {
        Self::new(16).expect("16 is a valid atom width")
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn atom_m(&self) -> usize {
        self.atom_m
    }

    pub fn atom_n(&self) -> usize {
        self.atom_n
    }

    pub fn values_per_thread(&self) -> usize {
        self.atom_m * self.atom_n / WARPGROUP_THREADS
    }

    pub fn tv_to_mn(&self, thread: usize, value: usize) -> Result<(usize, usize), WgmmaError> {
        let values = self.values_per_thread();
        if thread >= WARPGROUP_THREADS || value >= values {
            return Err(WgmmaError::OutOfRange {
                thread,
                value,
                threads: WARPGROUP_THREADS,
                values,
            });
        }
        let idx = self.layout.call_md(&IntTuple::ints(&[thread, value]))?;
        Ok((idx % self.atom_m, idx / self.atom_m))
    }

    /// The two rows (`r`, `r + 8`) that `thread` touches within the atom.
    pub fn rows_of(&self, thread: usize) -> (usize, usize) {
        let even = (thread / 4) % 8 + 16 * (thread / 32);
        (even, even + 8)
    }

    /// `thread,value,m,n` lines, one per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("thread,value,m,n\n");
        for t in 0..WARPGROUP_THREADS {
            for v in 0..self.values_per_thread() {
                let (m, n) = self.tv_to_mn(t, v).expect("in range");
                out.push_str(&format!("{t},{v},{m},{n}\n"));
            }
        }
        out
    }
}

impl fmt::Display for ThreadValueLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CLayout_{}x{} {}", self.atom_m, self.atom_n, self.layout)
    }
}

fn compact_fragment(values: IntTuple, rest_m: usize, rest_n: usize) -> Layout {
    Layout::column_major(IntTuple::tuple([values, rest_m.into(), rest_n.into()]))
}

/// Per-thread register layout of the `bm × bn` accumulator tile when a single
/// `64 × bn` atom spans the tile width: `((2,2,bn/8), bm/64, 1)`, compact.
pub fn accumulator_fragment_layout(bm: usize, bn: usize) -> Result<Layout, WgmmaError> {
    ThreadValueLayout::new(bn)?;
    if bm == 0 || !bm.is_multiple_of(ATOM_M) {
        return Err(WgmmaError::Tile {
            rows: bm,
            cols: bn,
            atom_m: ATOM_M,
            atom_n: bn,
        });
    }
    Ok(compact_fragment(
        IntTuple::ints(&[2, 2, bn / 8]),
        bm / ATOM_M,
        1,
    ))
}

/// Per-thread register layout of a `bm × bk` A operand built from `64 × 16`
/// atoms: `((2,2,2), bm/64, bk/16)`, compact.
pub fn operand_fragment_layout(bm: usize, bk: usize) -> Result<Layout, WgmmaError> {
    if bm == 0 || !bm.is_multiple_of(ATOM_M) || bk == 0 || !bk.is_multiple_of(OPERAND_ATOM_K) {
        return Err(WgmmaError::Tile {
            rows: bm,
            cols: bk,
            atom_m: ATOM_M,
            atom_n: OPERAND_ATOM_K,
        });
    }
    Ok(compact_fragment(
        IntTuple::ints(&[2, 2, 2]),
        bm / ATOM_M,
        bk / OPERAND_ATOM_K,
    ))
}

/// One simulated thread's register slice of a tile.
///
/// `layout` maps the coordinate `(value, rest_m, rest_n)` to a register
/// index; `atom` gives the meaning of `value` within one atom. Values are
/// stored in register order.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    thread: usize,
    atom: ThreadValueLayout,
    layout: Layout,
    values: Vec<f32>,
}

impl Fragment {
    pub fn new(
        thread: usize,
        atom: ThreadValueLayout,
        layout: Layout,
        values: Vec<f32>,
    ) -> Result<Self, WgmmaError> {
        if thread >= WARPGROUP_THREADS {
            return Err(WgmmaError::OutOfRange {
                thread,
                value: 0,
                threads: WARPGROUP_THREADS,
                values: atom.values_per_thread(),
            });
        }
        let v = layout.mode(0).map(|m| m.size()).unwrap_or(0);
        if layout.rank() != 3 || v != atom.values_per_thread() || values.len() != layout.size() {
            return Err(WgmmaError::Tile {
                rows: layout.size(),
                cols: values.len(),
                atom_m: atom.atom_m(),
                atom_n: atom.atom_n(),
            });
        }
        Ok(Fragment {
            thread,
            atom,
            layout,
            values,
        })
    }

    /// Gather `thread`'s accumulator values from a `bm × bn` tile.
    pub fn load_accumulator(tile: &Matrix, thread: usize) -> Result<Self, WgmmaError> {
        let layout = accumulator_fragment_layout(tile.rows(), tile.cols())?;
        let atom = ThreadValueLayout::new(tile.cols())?;
        let mut frag = Fragment::new(
            thread,
            atom,
            layout,
            vec![0.0; tile.rows() * tile.cols() / WARPGROUP_THREADS],
        )?;
        for (reg, (m, n)) in frag.positions().into_iter().enumerate() {
            frag.values[reg] = tile.get(m, n);
        }
        Ok(frag)
    }

    /// Scatter the values back to their tile positions.
    pub fn store(&self, tile: &mut Matrix) {
        for (reg, (m, n)) in self.positions().into_iter().enumerate() {
            tile.set(m, n, self.values[reg]);
        }
    }

    /// Tile position `(m, n)` of every register, indexed by register.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let v = self.atom.values_per_thread();
        let rest_m = self.layout.mode(1).unwrap().size();
        let mut out = vec![(0, 0); self.layout.size()];
        for (i, reg) in self.layout.image().into_iter().enumerate() {
            let value = i % v;
            let mr = (i / v) % rest_m;
            let nr = i / (v * rest_m);
            let (m, n) = self
                .atom
                .tv_to_mn(self.thread, value)
                .expect("value in range");
            out[reg] = (m + ATOM_M * mr, n + self.atom.atom_n() * nr);
        }
        out
    }

    pub fn thread(&self) -> usize {
        self.thread
    }

    pub fn atom(&self) -> &ThreadValueLayout {
        &self.atom
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    /// Number of atom tiles along M covered by this fragment.
    pub fn rest_m(&self) -> usize {
        self.layout.mode(1).unwrap().size()
    }

    /// Reinterpret the register storage under a different `(atom, layout)`.
    pub fn with_layout(self, atom: ThreadValueLayout, layout: Layout) -> Result<Self, WgmmaError> {
        Fragment::new(self.thread, atom, layout, self.values)
    }
}

/// The even and odd row this fragment's thread touches within an atom.
pub fn fragment_rows(frag: &Fragment) -> (usize, usize) {
    frag.atom.rows_of(frag.thread)
}

/// Lanes taking part in one shuffle reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneGroup {
    width: usize,
}

impl LaneGroup {
    pub fn new(width: usize) -> Result<Self, WgmmaError> {
        match width {
            4 | 8 | 16 | 32 => Ok(LaneGroup { width }),
            _ => Err(WgmmaError::LaneWidth(width)),
        }
    }

    pub const QUAD: LaneGroup = LaneGroup { width: 4 };

    pub fn width(&self) -> usize {
        self.width
    }
}

/// XOR-butterfly all-reduce over one lane group: `log2(width)` rounds with
/// offsets `width/2, …, 1`, after which every lane holds the fold of all.
pub fn shfl_reduce<T: Copy>(
    group: LaneGroup,
    per_lane: &[T],
    op: impl Fn(T, T) -> T,
) -> Result<Vec<T>, WgmmaError> {
    if per_lane.len() != group.width {
        return Err(WgmmaError::LaneCount {
            width: group.width,
            got: per_lane.len(),
        });
    }
    shfl_reduce_segments(group, per_lane, op)
}

/// [`shfl_reduce`] applied independently to each aligned group of
/// `group.width()` lanes, e.g. every quad of a warpgroup.
pub fn shfl_reduce_segments<T: Copy>(
    group: LaneGroup,
    lanes: &[T],
    op: impl Fn(T, T) -> T,
) -> Result<Vec<T>, WgmmaError> {
    if lanes.is_empty() || !lanes.len().is_multiple_of(group.width) {
        return Err(WgmmaError::LaneCount {
            width: group.width,
            got: lanes.len(),
        });
    }
    let mut x = lanes.to_vec();
    let mut offset = group.width / 2;
    while offset > 0 {
        // all lanes read before any lane writes, as with a synchronous shuffle
        let snapshot = x.clone();
        for (lane, v) in x.iter_mut().enumerate() {
            *v = op(*v, snapshot[lane ^ offset]);
        }
        offset /= 2;
    }
    Ok(x)
}

pub fn max_op(a: f32, b: f32) -> f32 {
    if a > b {
        a
    } else {
        b
    }
}

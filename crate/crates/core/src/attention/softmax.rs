//! Online softmax over score tiles, and its register-fragment counterpart.

use super::{Matrix, Precision};
use crate::layout::{IntTuple, Layout};
use crate::wgmma_map::{
    max_op, shfl_reduce_segments, Fragment, LaneGroup, ThreadValueLayout, WgmmaError,
    WARPGROUP_THREADS,
};

/// Running state of one Q-tile across the inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxState {
    /// `(old, new)` row maxima.
    pub row_max: Vec<(f32, f32)>,
    pub row_sum: Vec<f32>,
    pub o: Matrix,
}

impl SoftmaxState {
    pub fn new(rows: usize, d: usize) -> Self {
        SoftmaxState {
            row_max: vec![(f32::NEG_INFINITY, f32::NEG_INFINITY); rows],
            row_sum: vec![0.0; rows],
            o: Matrix::zeros(rows, d),
        }
    }

    pub fn rows(&self) -> usize {
        self.row_sum.len()
    }

    /// Current row maxima.
    pub fn max(&self) -> Vec<f32> {
        self.row_max.iter().map(|p| p.1).collect()
    }
}

/// Output of one online-softmax step.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxStep {
    /// `exp(S - m_new)`.
    pub p: Matrix,
    /// `exp(m_old - m_new)` per row.
    pub rescale: Vec<f32>,
}

/// `exp(a - b)` with `exp(-inf - x) = 0`, including `x = -inf`.
pub fn exp_diff(a: f32, b: f32) -> f32 {
    if a == f32::NEG_INFINITY {
        0.0
    } else {
        (a - b).exp()
    }
}

/// Advance `state` by one already scaled score tile.
///
/// On the first tile `O` is left untouched: it is still zero, so the
/// rescale would be a no-op.
pub fn online_softmax_step(state: &mut SoftmaxState, s: &Matrix, first_tile: bool) -> SoftmaxStep {
    assert_eq!(s.rows(), state.rows(), "score tile rows");
    let mut p = Matrix::zeros(s.rows(), s.cols());
    let mut rescale = vec![0.0; s.rows()];
    for r in 0..s.rows() {
        let old = state.row_max[r].1;
        let new = s.row(r).iter().copied().fold(old, max_op);
        state.row_max[r] = (old, new);
        let factor = exp_diff(old, new);
        rescale[r] = factor;

        let mut sum = 0.0f32;
        for (dst, &x) in p.row_mut(r).iter_mut().zip(s.row(r)) {
            *dst = exp_diff(x, new);
            sum += *dst;
        }
        state.row_sum[r] = factor * state.row_sum[r] + sum;
        if !first_tile {
            for o in state.o.row_mut(r) {
                *o *= factor;
            }
        }
    }
    SoftmaxStep { p, rescale }
}

/// `O += P · V` with both operands rounded to `prec`; returns the number of
/// saturated conversions.
pub fn gemm_ii(state: &mut SoftmaxState, p: &Matrix, v: &Matrix, prec: Precision) -> usize {
    let mut p = p.clone();
    let saturated = prec.round_slice(p.as_mut_slice());
    accumulate_pv(&mut state.o, &p, v);
    saturated
}

pub(crate) fn accumulate_pv(o: &mut Matrix, p: &Matrix, v: &Matrix) {
    assert_eq!(p.cols(), v.rows());
    for r in 0..p.rows() {
        let orow = o.row_mut(r);
        for (j, &pj) in p.row(r).iter().enumerate() {
            for (dst, &x) in orow.iter_mut().zip(v.row(j)) {
                *dst += pj * x;
            }
        }
    }
}

/// Divide each row of `O` by its running sum.
pub fn rowwise_finalize(state: &SoftmaxState) -> Matrix {
    let mut o = state.o.clone();
    for (r, &sum) in state.row_sum.iter().enumerate() {
        for x in o.row_mut(r) {
            *x /= sum;
        }
    }
    o
}

/// Scale a thread's accumulator fragment in place and return, per M-rest
/// block, the maxima over its even and odd row.
///
/// Registers are walked four at a time: two on the even row, then two on
/// the odd row.
pub fn threadwise_rowmax(frag: &mut Fragment, scale: f32) -> Vec<(f32, f32)> {
    let layout = frag.layout().clone();
    let v = layout.mode(0).unwrap().size();
    let rest_m = layout.mode(1).unwrap().size();
    let rest_n = layout.mode(2).unwrap().size();
    let values = frag.values_mut();
    let mut out = Vec::with_capacity(rest_m);
    for mr in 0..rest_m {
        let (mut max0, mut max1) = (f32::NEG_INFINITY, f32::NEG_INFINITY);
        for nr in 0..rest_n {
            for i in 0..v {
                let reg = layout
                    .call_md(&IntTuple::ints(&[i, mr, nr]))
                    .expect("coordinate in range");
                values[reg] *= scale;
                if i % 4 < 2 {
                    max0 = max_op(max0, values[reg]);
                } else {
                    max1 = max_op(max1, values[reg]);
                }
            }
        }
        out.push((max0, max1));
    }
    out
}

/// Scaled copy and row maxima of a `bm × bn` score tile, computed the way a
/// warpgroup does: per-thread partial maxima, then a quad shuffle.
pub fn warpgroup_rowmax(s: &Matrix, scale: f32) -> Result<(Matrix, Vec<f32>), WgmmaError> {
    let mut scaled = Matrix::zeros(s.rows(), s.cols());
    let mut partial = Vec::with_capacity(WARPGROUP_THREADS);
    let mut rows_of = Vec::with_capacity(WARPGROUP_THREADS);
    for t in 0..WARPGROUP_THREADS {
        let mut frag = Fragment::load_accumulator(s, t)?;
        partial.push(threadwise_rowmax(&mut frag, scale));
        rows_of.push(crate::wgmma_map::fragment_rows(&frag));
        frag.store(&mut scaled);
    }
    let rest_m = s.rows() / crate::wgmma_map::ATOM_M;
    let mut row_max = vec![f32::NEG_INFINITY; s.rows()];
    for mr in 0..rest_m {
        for half in 0..2 {
            let lanes: Vec<f32> = partial
                .iter()
                .map(|p| if half == 0 { p[mr].0 } else { p[mr].1 })
                .collect();
            let reduced = shfl_reduce_segments(LaneGroup::QUAD, &lanes, max_op)?;
            for (t, &m) in reduced.iter().enumerate() {
                let (r0, r1) = rows_of[t];
                let row = if half == 0 { r0 } else { r1 };
                row_max[row + crate::wgmma_map::ATOM_M * mr] = m;
            }
        }
    }
    Ok((scaled, row_max))
}

/// Round a fragment to operand precision and re-index it as the A operand
/// of the second GEMM.
pub fn convert_operand(
    frag: Fragment,
    prec: Precision,
    op_layout: &Layout,
) -> Result<(Fragment, usize), WgmmaError> {
    let reshaped = crate::layout::reshape_acc_to_operand(frag.layout(), op_layout)?;
    let mut frag = frag.with_layout(ThreadValueLayout::clayout_64x16(), reshaped)?;
    let saturated = prec.round_slice(frag.values_mut());
    Ok((frag, saturated))
}

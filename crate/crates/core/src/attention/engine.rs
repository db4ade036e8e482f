use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::softmax::{gemm_ii, online_softmax_step, rowwise_finalize, SoftmaxState};
use super::{Matrix, Precision, Tensor4};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttentionError {
    #[error("Q, K and V dimensions differ: {q:?} {k:?} {v:?}")]
    Shape {
        q: [usize; 4],
        k: [usize; 4],
        v: [usize; 4],
    },
    #[error("sequence length and head dimension must be at least 1 (N={n}, d={d})")]
    Empty { n: usize, d: usize },
    #[error("{name}={tile} does not divide sequence length {n}")]
    Indivisible {
        name: &'static str,
        tile: usize,
        n: usize,
    },
    #[error("inner tile bK={bk} must equal the head dimension {d}")]
    InnerTile { bk: usize, d: usize },
    #[error("K/V tile order is not a permutation of 0..{0}")]
    Order(usize),
}

/// `Q`, `K`, `V` of shape `(L, N, h, d)` and the softmax scale `1/√d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionProblem {
    pub q: Tensor4,
    pub k: Tensor4,
    pub v: Tensor4,
    pub scale: f32,
}

impl AttentionProblem {
    pub fn new(q: Tensor4, k: Tensor4, v: Tensor4) -> Result<Self, AttentionError> {
        if q.dims() != k.dims() || q.dims() != v.dims() {
            return Err(AttentionError::Shape {
                q: q.dims(),
                k: k.dims(),
                v: v.dims(),
            });
        }
        let [_, n, _, d] = q.dims();
        if n == 0 || d == 0 {
            return Err(AttentionError::Empty { n, d });
        }
        let scale = 1.0 / (d as f32).sqrt();
        Ok(AttentionProblem { q, k, v, scale })
    }

    /// Standard normal `Q`, `K`, `V` (in that order) from a ChaCha8 stream.
    pub fn gaussian(
        batch: usize,
        seqlen: usize,
        heads: usize,
        headdim: usize,
        seed: u64,
    ) -> Result<Self, AttentionError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [batch, seqlen, heads, headdim];
        let q = Tensor4::gaussian(dims, &mut rng);
        let k = Tensor4::gaussian(dims, &mut rng);
        let v = Tensor4::gaussian(dims, &mut rng);
        Self::new(q, k, v)
    }

    /// `[L, N, h, d]`.
    pub fn dims(&self) -> [usize; 4] {
        self.q.dims()
    }

    pub fn seqlen(&self) -> usize {
        self.dims()[1]
    }

    pub fn headdim(&self) -> usize {
        self.dims()[3]
    }

    /// `(batch, head)` pairs in output order.
    pub fn heads(&self) -> Vec<(usize, usize)> {
        let [l, _, h, _] = self.dims();
        (0..l).flat_map(|b| (0..h).map(move |hh| (b, hh))).collect()
    }

    /// Floating-point operations of the two matmuls: `4·N²·d·h·L`.
    pub fn flops(&self) -> u64 {
        let [l, n, h, d] = self.dims().map(|x| x as u64);
        4 * n * n * d * h * l
    }
}

/// Q-tile rows `bm`, K/V-tile rows `bn`; the inner dimension is `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TileConfig {
    pub bm: usize,
    pub bn: usize,
    pub bk: usize,
}

impl TileConfig {
    pub fn new(bm: usize, bn: usize, d: usize) -> Self {
        TileConfig { bm, bn, bk: d }
    }

    /// Tile grid used by the sweep, in row order.
    pub const GRID: [(usize, usize); 4] = [(64, 64), (64, 128), (128, 64), (128, 128)];

    pub fn validate(&self, n: usize, d: usize) -> Result<(), AttentionError> {
        for (name, tile) in [("bM", self.bm), ("bN", self.bn)] {
            if tile == 0 || !n.is_multiple_of(tile) {
                return Err(AttentionError::Indivisible { name, tile, n });
            }
        }
        if self.bk != d {
            return Err(AttentionError::InnerTile { bk: self.bk, d });
        }
        Ok(())
    }

    pub fn q_tiles(&self, n: usize) -> usize {
        n / self.bm
    }

    pub fn kv_tiles(&self, n: usize) -> usize {
        n / self.bn
    }
}

/// Stage reached by the fused engine, reported to an observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmhaEvent {
    LoadQ { q_tile: usize },
    LoadK { q_tile: usize, k_tile: usize },
    GemmI { q_tile: usize, k_tile: usize },
    Softmax { q_tile: usize, k_tile: usize },
    LoadV { q_tile: usize, k_tile: usize },
    GemmII { q_tile: usize, k_tile: usize },
    StoreO { q_tile: usize },
}

pub trait FmhaObserver {
    fn on_event(&mut self, event: FmhaEvent);
}

impl FmhaObserver for () {
    fn on_event(&mut self, _: FmhaEvent) {}
}

impl<F: FnMut(FmhaEvent)> FmhaObserver for F {
    fn on_event(&mut self, event: FmhaEvent) {
        self(event)
    }
}

/// `scale · A Bᵀ`, each dot product summed in index order.
pub fn scaled_abt(a: &Matrix, b: &Matrix, scale: f32) -> Matrix {
    assert_eq!(a.cols(), b.cols());
    Matrix::from_fn(a.rows(), b.rows(), |r, c| {
        let dot: f32 = a
            .row(r)
            .iter()
            .zip(b.row(c))
            .fold(0.0, |acc, (x, y)| acc + x * y);
        scale * dot
    })
}

/// `S = scale · Q Kᵀ` for one head.
pub fn standard_scores(q: &Matrix, k: &Matrix, scale: f32) -> Matrix {
    scaled_abt(q, k, scale)
}

/// Unnormalised `exp(S - rowmax)` and its row sums.
pub fn standard_softmax(s: &Matrix) -> (Matrix, Vec<f32>) {
    let mut state = SoftmaxState::new(s.rows(), 0);
    let step = online_softmax_step(&mut state, s, true);
    (step.p, state.row_sum)
}

/// `O = (P V) / rowsum`.
pub fn standard_output(p: &Matrix, row_sum: &[f32], v: &Matrix) -> Matrix {
    let mut state = SoftmaxState::new(p.rows(), v.cols());
    super::softmax::accumulate_pv(&mut state.o, p, v);
    state.row_sum = row_sum.to_vec();
    rowwise_finalize(&state)
}

/// Dense attention of one head with the full `S` and `P` in hand.
///
/// Normalisation is applied to `P V` rather than to `P`; the two agree to
/// rounding and this form makes a one-tile fused run bit-identical.
pub fn standard_head(q: &Matrix, k: &Matrix, v: &Matrix, scale: f32) -> Matrix {
    let s = standard_scores(q, k, scale);
    let (p, sum) = standard_softmax(&s);
    standard_output(&p, &sum, v)
}

pub fn standard_attention(p: &AttentionProblem) -> Tensor4 {
    map_heads(p, |q, k, v| standard_head(q, k, v, p.scale)).0
}

/// Result of one fused head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub o: Matrix,
    /// Operand conversions that saturated at the half-precision limit.
    pub saturated: usize,
}

/// Fused attention of one head, K/V tiles visited in index order.
pub fn fmha_head(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    scale: f32,
    tile: TileConfig,
    prec: Precision,
    obs: &mut impl FmhaObserver,
) -> Result<HeadOutput, AttentionError> {
    tile.validate(q.rows(), q.cols())?;
    let order: Vec<usize> = (0..tile.kv_tiles(q.rows())).collect();
    fmha_head_ordered(q, k, v, scale, tile, prec, &order, obs)
}

/// [`fmha_head`] with the K/V tiles visited in `order`.
#[allow(clippy::too_many_arguments)]
pub fn fmha_head_ordered(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    scale: f32,
    tile: TileConfig,
    prec: Precision,
    order: &[usize],
    obs: &mut impl FmhaObserver,
) -> Result<HeadOutput, AttentionError> {
    let (n, d) = (q.rows(), q.cols());
    tile.validate(n, d)?;
    let kv_tiles = tile.kv_tiles(n);
    let mut seen = vec![false; kv_tiles];
    if order.len() != kv_tiles
        || !order
            .iter()
            .all(|&j| j < kv_tiles && !std::mem::replace(&mut seen[j], true))
    {
        return Err(AttentionError::Order(kv_tiles));
    }

    let mut saturated = 0;
    let mut o = Matrix::zeros(n, d);
    for qi in 0..tile.q_tiles(n) {
        obs.on_event(FmhaEvent::LoadQ { q_tile: qi });
        let mut q_tile = q.row_block(qi * tile.bm, tile.bm);
        saturated += prec.round_slice(q_tile.as_mut_slice());
        let mut state = SoftmaxState::new(tile.bm, d);

        for (step, &kj) in order.iter().enumerate() {
            obs.on_event(FmhaEvent::LoadK {
                q_tile: qi,
                k_tile: kj,
            });
            let mut k_tile = k.row_block(kj * tile.bn, tile.bn);
            saturated += prec.round_slice(k_tile.as_mut_slice());

            obs.on_event(FmhaEvent::GemmI {
                q_tile: qi,
                k_tile: kj,
            });
            let s = scaled_abt(&q_tile, &k_tile, scale);

            obs.on_event(FmhaEvent::Softmax {
                q_tile: qi,
                k_tile: kj,
            });
            let sm = online_softmax_step(&mut state, &s, step == 0);

            obs.on_event(FmhaEvent::LoadV {
                q_tile: qi,
                k_tile: kj,
            });
            let mut v_tile = v.row_block(kj * tile.bn, tile.bn);
            saturated += prec.round_slice(v_tile.as_mut_slice());

            obs.on_event(FmhaEvent::GemmII {
                q_tile: qi,
                k_tile: kj,
            });
            saturated += gemm_ii(&mut state, &sm.p, &v_tile, prec);
        }

        o.set_row_block(qi * tile.bm, &rowwise_finalize(&state));
        obs.on_event(FmhaEvent::StoreO { q_tile: qi });
    }
    Ok(HeadOutput { o, saturated })
}

/// Fused attention over every head, heads in parallel.
pub fn fmha_forward(
    p: &AttentionProblem,
    tile: TileConfig,
    prec: Precision,
) -> Result<Tensor4, AttentionError> {
    fmha_forward_counted(p, tile, prec).map(|(o, _)| o)
}

/// [`fmha_forward`] plus the total saturation count.
pub fn fmha_forward_counted(
    p: &AttentionProblem,
    tile: TileConfig,
    prec: Precision,
) -> Result<(Tensor4, usize), AttentionError> {
    tile.validate(p.seqlen(), p.headdim())?;
    let (out, heads) = map_heads(p, |q, k, v| {
        fmha_head(q, k, v, p.scale, tile, prec, &mut ()).expect("tile config validated")
    });
    let saturated = heads.iter().map(|h| h.saturated).sum();
    Ok((out, saturated))
}

/// Run `f` per head in parallel; returns the assembled tensor and the raw
/// per-head results.
fn map_heads<T: Send + HeadResult>(
    p: &AttentionProblem,
    f: impl Fn(&Matrix, &Matrix, &Matrix) -> T + Sync,
) -> (Tensor4, Vec<T>) {
    let heads = p.heads();
    let results: Vec<T> = heads
        .par_iter()
        .map(|&(b, h)| f(&p.q.head(b, h), &p.k.head(b, h), &p.v.head(b, h)))
        .collect();
    let mut out = Tensor4::zeros(p.dims());
    for (&(b, h), r) in heads.iter().zip(&results) {
        out.set_head(b, h, r.matrix());
    }
    (out, results)
}

trait HeadResult {
    fn matrix(&self) -> &Matrix;
}

impl HeadResult for Matrix {
    fn matrix(&self) -> &Matrix {
        self
    }
}

impl HeadResult for HeadOutput {
    fn matrix(&self) -> &Matrix {
        &self.o
    }
}

//! Reference attention and the tiled fused engine.
//!
//! Both engines compute `O = softmax(scale · Q Kᵀ) V` per (batch, head); the
//! fused one walks K/V tiles with an online softmax and never forms the full
//! `S` or `P`.

mod engine;
mod metrics;
mod precision;
pub mod softmax;
mod tensor;

pub use engine::{
    fmha_forward, fmha_forward_counted, fmha_head, fmha_head_ordered, scaled_abt,
    standard_attention, standard_head, standard_output, standard_scores, standard_softmax,
    AttentionError, AttentionProblem, FmhaEvent, FmhaObserver, HeadOutput, TileConfig,
};
pub use metrics::{max_rel_error, ErrorStat};
pub use precision::{round_f16, Precision, F16_MAX};
pub use softmax::{
    convert_operand, online_softmax_step, rowwise_finalize, threadwise_rowmax, warpgroup_rowmax,
    SoftmaxState, SoftmaxStep,
};
pub use tensor::{Matrix, StoragePrecision, Tensor4, TENSOR_MAGIC, TENSOR_VERSION};

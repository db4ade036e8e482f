use super::Tensor4;

/// Worst deviation of a tensor from a reference.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorStat {
    /// `max |got - want| / max |want|`.
    pub max_rel: f64,
    pub max_abs: f64,
    /// `[batch, seq, head, dim]` of the largest absolute deviation.
    pub at: [usize; 4],
    pub got: f32,
    pub want: f32,
}

/// Largest elementwise deviation relative to the reference's largest
/// magnitude.
///
/// Attention outputs cross zero, so dividing each deviation by its own
/// reference entry measures the conditioning of that entry rather than the
/// accuracy of the engine. The reference's infinity norm is the scale
/// instead; an all-zero reference scales by 1.
pub fn max_rel_error(got: &Tensor4, want: &Tensor4) -> ErrorStat {
    assert_eq!(got.dims(), want.dims(), "compared tensors differ in shape");
    let [_, n, h, d] = got.dims();
    let mut worst = ErrorStat {
        max_rel: 0.0,
        max_abs: 0.0,
        at: [0; 4],
        got: 0.0,
        want: 0.0,
    };
    let mut scale = 0.0f64;
    for (i, (&a, &b)) in got.as_slice().iter().zip(want.as_slice()).enumerate() {
        scale = scale.max((b as f64).abs());
        let err = (a as f64 - b as f64).abs();
        // NaN anywhere is a failure
        if err > worst.max_abs || (err.is_nan() && !worst.max_abs.is_nan()) {
            worst = ErrorStat {
                max_abs: err,
                at: [i / (n * h * d), (i / (h * d)) % n, (i / d) % h, i % d],
                got: a,
                want: b,
                ..worst
            };
        }
    }
    worst.max_rel = worst.max_abs / if scale > 0.0 { scale } else { 1.0 };
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_worst_element() {
        let a = Tensor4::from_vec([1, 2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let mut b = a.clone();
        b.as_mut_slice()[2] = 3.4;
        let e = max_rel_error(&b, &a);
        assert_eq!(e.at, [0, 1, 0, 0]);
        assert_eq!((e.got, e.want), (3.4, 3.0));
        assert!((e.max_rel - 0.1).abs() < 1e-6);
        assert_eq!(max_rel_error(&a, &a).max_rel, 0.0);
    }

    #[test]
    fn zero_reference_and_nan() {
        let zero = Tensor4::from_vec([1, 1, 1, 1], vec![0.0]);
        let tiny = Tensor4::from_vec([1, 1, 1, 1], vec![1e-6]);
        assert!((max_rel_error(&tiny, &zero).max_rel - 1e-6).abs() < 1e-12);
        let nan = Tensor4::from_vec([1, 1, 1, 1], vec![f32::NAN]);
        assert!(max_rel_error(&nan, &zero).max_rel.is_nan());
    }
}

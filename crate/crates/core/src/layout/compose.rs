use super::{coalesced_modes, IntTuple, Layout, LayoutError};

/// Largest inner domain that debug builds verify pointwise after composing.
const VERIFY_LIMIT: usize = 1 << 16;

/// Layout `R` with `R(i) = outer(inner(i))` for every `i` in the inner domain.
///
/// The result follows the inner layout's mode structure; each inner leaf may
/// expand into a nested mode. Every stride and extent of `inner` must factor
/// through the coalesced shape of `outer`, otherwise the composition is not a
/// layout and is rejected. Debug builds additionally check the result
/// pointwise for inner domains up to 2^16.
pub fn compose(outer: &Layout, inner: &Layout) -> Result<Layout, LayoutError> {
    let result = compose_algebraic(outer, inner)?;
    if cfg!(debug_assertions) && inner.size() <= VERIFY_LIMIT {
        let image = inner.image();
        if let Some(i) = (0..image.len()).find(|&i| result.call(i) != outer.call(image[i])) {
            return Err(LayoutError::Composition {
                outer: outer.to_string(),
                inner: inner.to_string(),
                reason: format!("pointwise mismatch at {i}"),
            });
        }
    }
    Ok(result)
}

/// Composition by the divisibility rules alone, without pointwise checking.
pub(crate) fn compose_algebraic(outer: &Layout, inner: &Layout) -> Result<Layout, LayoutError> {
    let modes = coalesced_modes(outer);
    let fail = |reason: String| LayoutError::Composition {
        outer: outer.to_string(),
        inner: inner.to_string(),
        reason,
    };

    let (leaf_n, leaf_d) = inner.flat_modes();
    // Composing leaf by leaf is exact when the outer function is linear
    // (a single mode) or the inner leaves cover disjoint index ranges.
    if modes.len() > 1 {
        let mut spans: Vec<(usize, usize)> = leaf_n
            .iter()
            .zip(&leaf_d)
            .filter(|&(&n, &d)| n > 1 && d > 0)
            .map(|(&n, &d)| (d, d * n))
            .collect();
        spans.sort_unstable();
        if let Some(w) = spans.windows(2).find(|w| w[0].1 > w[1].0) {
            return Err(fail(format!(
                "inner modes with strides {} and {} overlap",
                w[0].0, w[1].0
            )));
        }
    }

    let pieces: Vec<(IntTuple, IntTuple)> = leaf_n
        .into_iter()
        .zip(leaf_d)
        .map(|(n, d)| compose_leaf(&modes, n, d).map_err(&fail))
        .collect::<Result<_, _>>()?;
    let mut it = pieces.iter();
    let shape = inner
        .shape()
        .map_leaves(&mut |_| it.next().unwrap().0.clone());
    let mut it = pieces.iter();
    let stride = inner
        .shape()
        .map_leaves(&mut |_| it.next().unwrap().1.clone());
    Layout::new(shape, stride)
}

/// Compose coalesced `modes` (last mode unbounded) with the rank-1 layout `n:d`.
fn compose_leaf(
    modes: &[(usize, usize)],
    n: usize,
    d: usize,
) -> Result<(IntTuple, IntTuple), String> {
    if n == 1 {
        return Ok((IntTuple::Int(1), IntTuple::Int(0)));
    }
    if d == 0 {
        return Ok((IntTuple::Int(n), IntTuple::Int(0)));
    }
    let last = modes.len() - 1;

    // Divide the stride out of the leading modes.
    let mut rest_stride = d;
    let mut idx = 0;
    let mut head = None;
    while idx < last {
        let (a, s) = modes[idx];
        if rest_stride.is_multiple_of(a) {
            rest_stride /= a;
            idx += 1;
        } else if a % rest_stride == 0 {
            head = Some((a / rest_stride, s * rest_stride));
            idx += 1;
            break;
        } else {
            return Err(format!("stride {d} does not divide through extent {a}"));
        }
    }
    let mut remaining: Vec<(usize, usize, bool)> = Vec::new();
    match head {
        Some((a, s)) => {
            remaining.push((a, s, false));
            remaining.extend(
                modes[idx..]
                    .iter()
                    .enumerate()
                    .map(|(k, &(a, s))| (a, s, idx + k == last)),
            );
        }
        None => {
            let (_, s) = modes[last];
            remaining.push((usize::MAX, s * rest_stride, true));
        }
    }

    // Keep the first n elements.
    let mut rest_shape = n;
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (a, s, unbounded) in remaining {
        if rest_shape == 1 {
            break;
        }
        if unbounded || rest_shape <= a {
            out.push((rest_shape, s));
            rest_shape = 1;
        } else if rest_shape.is_multiple_of(a) {
            out.push((a, s));
            rest_shape /= a;
        } else {
            return Err(format!("extent {n} does not divide through extent {a}"));
        }
    }
    debug_assert_eq!(rest_shape, 1);
    Ok(match out.as_slice() {
        [(a, s)] => (IntTuple::Int(*a), IntTuple::Int(*s)),
        _ => {
            let (s, d): (Vec<_>, Vec<_>) = out.into_iter().unzip();
            (IntTuple::ints(&s), IntTuple::ints(&d))
        }
    })
}

impl Layout {
    /// `self ∘ inner`; see [`compose`].
    pub fn compose(&self, inner: &Layout) -> Result<Layout, LayoutError> {
        compose(self, inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(s: &str) -> Layout {
        s.parse().unwrap()
    }

    fn check_law(a: &Layout, b: &Layout) -> Layout {
        let r = compose_algebraic(a, b).unwrap();
        assert_eq!(compose(a, b).unwrap(), r);
        for i in 0..b.size() {
            assert_eq!(r.call(i), a.call(b.call(i)), "{a} o {b} at {i}");
        }
        r
    }

    #[test]
    fn known_compositions() {
        let cases = [
            ("(6,2):(8,2)", "(4,3):(3,1)", "((2,2),3):((24,2),8)"),
            ("20:2", "(5,4):(4,1)", "(5,4):(8,2)"),
            ("(10,2):(16,4)", "(5,4):(1,5)", "(5,(2,2)):(16,(80,4))"),
            ("(4,4):(1,4)", "(4,4):(4,1)", "(4,4):(4,1)"),
        ];
        for (a, b, want) in cases {
            let r = check_law(&l(a), &l(b));
            assert_eq!(r.to_string(), want);
        }
    }

    #[test]
    fn identity_then_row_major() {
        let r = check_law(&l("(4,4):(1,4)"), &l("(4,4):(4,1)"));
        assert_eq!(
            r.image(),
            vec![0, 4, 8, 12, 1, 5, 9, 13, 2, 6, 10, 14, 3, 7, 11, 15]
        );
    }

    #[test]
    fn column_major_identity_is_neutral() {
        for a in [
            "((8,8),64):((64,512),1)",
            "(6,2):(8,2)",
            "((2,2,16),2,1):((1,2,4),64,0)",
        ] {
            let a = l(a);
            let id = Layout::column_major(IntTuple::ints(&[
                a.mode(0).unwrap().size(),
                a.size() / a.mode(0).unwrap().size(),
            ]));
            let r = check_law(&a, &id);
            assert_eq!(r.image(), a.image());
        }
    }

    #[test]
    fn transpose_by_precomposition() {
        let (bn, bk) = (64, 64);
        let v = l("((8,8),64):((64,512),1)");
        let t = check_law(&v, &Layout::row_major(IntTuple::ints(&[bk, bn])));
        for n in 0..bn {
            for k in 0..bk {
                let tk = t.call_md(&IntTuple::ints(&[k, n])).unwrap();
                let vn = v.call_md(&IntTuple::ints(&[n, k])).unwrap();
                assert_eq!(tk, vn);
            }
        }
    }

    #[test]
    fn indivisible_pairs_are_rejected() {
        for (a, b) in [
            ("(4,6):(1,10)", "3:2"),
            ("(3,5):(1,7)", "2:2"),
            ("(6,4):(1,7)", "8:1"),
        ] {
            let err = compose_algebraic(&l(a), &l(b)).unwrap_err();
            assert!(matches!(err, LayoutError::Composition { .. }), "{a} o {b}");
        }
    }

    #[test]
    fn zero_strides_and_unit_extents() {
        check_law(&l("(4,4):(1,4)"), &l("(4,1,2):(0,7,1)"));
        check_law(&l("(2,1,8):(3,0,6)"), &l("(2,8):(8,1)"));
        assert!(compose_algebraic(&l("(8,1):(0,1)"), &l("(4,2):(2,2)")).is_err());
        check_law(&l("16:1"), &l("(4,4):(1,1)"));
        let r = check_law(&l("8:3"), &l("1:5"));
        assert_eq!(r.to_string(), "1:0");
    }

    fn pow2_layout() -> impl Strategy<Value = Layout> {
        prop::collection::vec((0u32..4, 0usize..40), 1..=4).prop_map(|modes| {
            let s: Vec<usize> = modes.iter().map(|(e, _)| 1 << e).collect();
            let d: Vec<usize> = modes.iter().map(|&(_, d)| d).collect();
            Layout::new(IntTuple::ints(&s), IntTuple::ints(&d)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn composition_law_power_of_two(a in pow2_layout(), b in crate::testing::disjoint_pow2_layout(3)) {
            let r = compose_algebraic(&a, &b).unwrap();
            for i in 0..b.size() {
                prop_assert_eq!(r.call(i), a.call(b.call(i)));
            }
        }

        #[test]
        fn composition_law_mixed_radix(
            sa in prop::collection::vec(prop::sample::select(vec![1usize, 2, 3, 4, 6]), 1..4),
            da in prop::collection::vec(0usize..30, 4),
            sb in prop::collection::vec(prop::sample::select(vec![1usize, 2, 3, 4, 6]), 1..3),
            db in prop::collection::vec(prop::sample::select(vec![0usize, 1, 2, 3, 4, 6, 12]), 3),
        ) {
            let a = Layout::new(IntTuple::ints(&sa), IntTuple::ints(&da[..sa.len()])).unwrap();
            let b = Layout::new(IntTuple::ints(&sb), IntTuple::ints(&db[..sb.len()])).unwrap();
            if let Ok(r) = compose_algebraic(&a, &b) {
                for i in 0..b.size() {
                    prop_assert_eq!(r.call(i), a.call(b.call(i)));
                }
            }
        }
    }
}

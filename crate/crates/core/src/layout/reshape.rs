use super::{compose, IntTuple, Layout, LayoutError};

/// Re-index an accumulator fragment so it can be traversed as an MMA operand.
///
/// Both layouts are per-thread register layouts of the form
/// `((v0, v1, g), rest_m, rest_k)`: `v0` walks a column pair, `v1` the two
/// rows eight apart, and `g` groups of eight columns. The accumulator's
/// tile-level column groups are `(g_acc, rest_n)`, the operand's are
/// `(g_op, rest_k)`; the operand's strides for `g` and `rest_k` come from
/// composing the former with the latter, the row modes keep the accumulator
/// strides. The result has the operand's shape whenever the accumulator
/// covers its tile width with a single atom.
pub fn reshape_acc_to_operand(acc: &Layout, op: &Layout) -> Result<Layout, LayoutError> {
    let fail = |reason: &str| LayoutError::Reshape {
        acc: acc.to_string(),
        op: op.to_string(),
        reason: reason.to_string(),
    };
    if acc == op {
        return Ok(op.clone());
    }
    if acc.size() != op.size() {
        return Err(fail("fragment sizes differ"));
    }
    if acc.rank() != 3 || op.rank() != 3 {
        return Err(fail("expected ((values), rest_m, rest_k) fragments"));
    }
    let acc_v = acc.mode(0).unwrap();
    let op_v = op.mode(0).unwrap();
    if acc_v.rank() != 3 || op_v.rank() != 3 {
        return Err(fail("value modes must be (pair, row, column-group)"));
    }
    let [a0, a1, ag] = [0, 1, 2].map(|i| acc_v.mode(i).unwrap());
    let [b0, b1, bg] = [0, 1, 2].map(|i| op_v.mode(i).unwrap());
    if a0.size() != b0.size() || a1.size() != b1.size() {
        return Err(fail("value pair/row extents differ"));
    }
    let acc_m = acc.mode(1).unwrap();
    if acc_m.size() != op.mode(1).unwrap().size() {
        return Err(fail("M-rest extents differ"));
    }

    let acc_cols = Layout::from_modes([ag, acc.mode(2).unwrap()])?;
    let g_op = bg.size();
    let k_op = op.mode(2).unwrap().size();
    let op_cols = Layout::new(IntTuple::ints(&[g_op, k_op]), IntTuple::ints(&[1, g_op]))?;
    let cols = compose(&acc_cols, &op_cols).map_err(|_| fail("column groups do not nest"))?;
    let [g, k] = [0, 1].map(|i| cols.mode(i).unwrap());

    let values = Layout::from_modes([
        Layout::new(b0.shape().clone(), a0.stride().clone())?,
        Layout::new(b1.shape().clone(), a1.stride().clone())?,
        g,
    ])?;
    Layout::from_modes([values, acc_m, k])
}

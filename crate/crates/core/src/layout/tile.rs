use super::{ComposedLayout, IntTuple, Layout, LayoutError};

/// Cover `target` by repeating `atom`, tiles ordered column-major.
///
/// Mode `r` of the result is `(atom_r, t_r / e_r)` where `e_r` is the atom's
/// extent in that mode; the tile index advances in units of the atom's
/// cosize. Modes that need a single tile keep the atom's mode unchanged.
pub fn tile_to_shape(atom: &Layout, target: &IntTuple) -> Result<Layout, LayoutError> {
    let fail = |reason: String| LayoutError::Tiling {
        atom: atom.to_string(),
        target: target.to_string(),
        reason,
    };
    let targets = target.modes();
    if targets.len() != atom.rank() {
        return Err(fail(format!(
            "rank {} target for a rank {} atom",
            targets.len(),
            atom.rank()
        )));
    }
    let block = atom.cosize();
    let mut tile_stride = block;
    let mut modes = Vec::with_capacity(targets.len());
    for (r, t) in targets.into_iter().enumerate() {
        let t = t
            .as_int()
            .ok_or_else(|| fail("target modes must be integers".into()))?;
        let a = atom.mode(r).expect("rank checked");
        let e = a.size();
        if t == 0 || e == 0 || t % e != 0 {
            return Err(fail(format!(
                "extent {t} is not a positive multiple of {e}"
            )));
        }
        let count = t / e;
        if count == 1 {
            modes.push(a);
        } else {
            modes.push(Layout::new(
                IntTuple::tuple([a.shape().clone(), IntTuple::Int(count)]),
                IntTuple::tuple([a.stride().clone(), IntTuple::Int(tile_stride)]),
            )?);
            tile_stride *= count;
        }
    }
    if modes.len() == 1 {
        return Ok(modes.pop().unwrap());
    }
    Layout::from_modes(modes)
}

impl ComposedLayout {
    /// Tile the inner layout; the swizzle applies to the whole result.
    pub fn tile_to_shape(&self, target: &IntTuple) -> Result<ComposedLayout, LayoutError> {
        Ok(ComposedLayout::new(
            tile_to_shape(self.inner(), target)?,
            self.post(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::IndexMap;

    fn l(s: &str) -> Layout {
        s.parse().unwrap()
    }

    /// Explicit tiling: element (r, c) lives in tile (r / er, c / ec), tiles
    /// numbered column-major, each tile a copy of the atom offset by its number.
    fn tiled_oracle(
        atom: &dyn IndexMap,
        er: usize,
        ec: usize,
        rows: usize,
        r: usize,
        c: usize,
    ) -> usize {
        let tiles_r = rows / er;
        let tile = r / er + tiles_r * (c / ec);
        let within = atom.index_md(&IntTuple::ints(&[r % er, c % ec])).unwrap();
        tile * er * ec + within
    }

    #[test]
    fn row_major_atom_tiled_down() {
        let atom = l("(8,8):(8,1)");
        let t = tile_to_shape(&atom, &IntTuple::ints(&[16, 8])).unwrap();
        assert_eq!(t.to_string(), "((8,2),8):((8,64),1)");
        for r in 0..16 {
            for c in 0..8 {
                let got = t.call_md(&IntTuple::ints(&[r, c])).unwrap();
                assert_eq!(got, tiled_oracle(&atom, 8, 8, 16, r, c));
            }
        }
    }

    #[test]
    fn own_shape_is_identity() {
        let atom = l("(8,64):(64,1)");
        assert_eq!(
            tile_to_shape(&atom, &IntTuple::ints(&[8, 64])).unwrap(),
            atom
        );
    }

    #[test]
    fn indivisible_target() {
        let atom = l("(8,8):(8,1)");
        for t in [[12, 8], [0, 8], [8, 4]] {
            assert!(matches!(
                tile_to_shape(&atom, &IntTuple::ints(&t)),
                Err(LayoutError::Tiling { .. })
            ));
        }
        assert!(tile_to_shape(&atom, &IntTuple::ints(&[8, 8, 8])).is_err());
    }

    #[test]
    fn swizzled_atom_tiled_to_128_square() {
        let atom = ComposedLayout::k_major_sw128_atom(2).unwrap();
        let t = atom.tile_to_shape(&IntTuple::ints(&[128, 128])).unwrap();
        assert_eq!(t.size(), 16384);
        assert!(t.is_bijective());
        for r in (0..128).step_by(7) {
            for c in (0..128).step_by(5) {
                let got = t.index_md(&IntTuple::ints(&[r, c])).unwrap();
                assert_eq!(got, tiled_oracle(&atom, 8, 64, 128, r, c));
            }
        }
    }

    #[test]
    fn restricted_to_a_tile_equals_the_atom_plus_offset() {
        let atom = ComposedLayout::k_major_sw128_atom(2).unwrap();
        let t = atom.tile_to_shape(&IntTuple::ints(&[64, 128])).unwrap();
        for (tr, tc) in [(0, 0), (3, 1), (7, 0)] {
            let base = t.index_md(&IntTuple::ints(&[8 * tr, 64 * tc])).unwrap();
            for r in 0..8 {
                for c in 0..64 {
                    let got = t
                        .index_md(&IntTuple::ints(&[8 * tr + r, 64 * tc + c]))
                        .unwrap();
                    let want = atom.index_md(&IntTuple::ints(&[r, c])).unwrap();
                    assert_eq!(got, base + want);
                }
            }
        }
    }
}

use rayon::prelude::*;

use super::grid::{FieldKind, GridSpec, ScalarGrid};
use crate::accel::TriangleBvh;

// Points per block edge; each block shares one candidate query.
const BLOCK: usize = 4;

/// Exact unsigned distance from every grid point to the mesh.
///
/// The grid is processed in `4^3` blocks. For a block with center `c` and
/// half-diagonal `r`, every point's closest triangle lies within `d(c) + 2r` of
/// `c`, so one BVH range query yields a candidate list that the block's points
/// scan in order of distance. The values equal per-point closest-point queries
/// bit for bit and do not depend on the thread count.
pub fn compute_udf_grid(bvh: &TriangleBvh, spec: GridSpec) -> ScalarGrid {
    let r = spec.res;
    let mut values = vec![0.0; spec.len()];
    if bvh.triangle_count() == 0 {
        // no geometry: every point is infinitely far; use the cube diagonal
        values.fill(2.0 * 3f64.sqrt());
        return ScalarGrid::from_parts_unchecked(spec, FieldKind::Unsigned, values);
    }
    values.par_chunks_mut(BLOCK * r * r).enumerate().for_each(|(kb, slab)| {
        let k0 = kb * BLOCK;
        let k1 = (k0 + BLOCK).min(r);
        let mut candidates = Vec::new();
        let mut hint = None;
        for j0 in (0..r).step_by(BLOCK) {
            let j1 = (j0 + BLOCK).min(r);
            for i0 in (0..r).step_by(BLOCK) {
                let i1 = (i0 + BLOCK).min(r);
                let lo = spec.point(i0, j0, k0);
                let hi = spec.point(i1 - 1, j1 - 1, k1 - 1);
                let center = nalgebra::center(&lo, &hi);
                let slack = (hi - lo).norm() * 0.5 * (1.0 + 1e-12) + 1e-15;
                let (dc, slot) = bvh.distance_hinted(&center, hint).expect("non-empty bvh");
                hint = Some(slot);
                bvh.candidates_within(&center, dc + 2.0 * slack, &mut candidates);
                for k in k0..k1 {
                    for j in j0..j1 {
                        for i in i0..i1 {
                            let p = spec.point(i, j, k);
                            let (d, _) = bvh.closest_among(&p, &candidates, slack).expect("candidate set is non-empty");
                            slab[i + r * (j + r * (k - k0))] = d;
                        }
                    }
                }
            }
        }
    });
    ScalarGrid::from_parts_unchecked(spec, FieldKind::Unsigned, values)
}

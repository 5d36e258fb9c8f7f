use super::grid::{FieldKind, LabelGrid, ScalarGrid};
use crate::error::{Error, Result};

/// Combines UDF magnitude with the labels: `-udf` inside, `+udf` outside.
///
/// With `shell_epsilon = Some(e)`, the occupied set is additionally dilated by
/// an `e`-voxel band around the surface (`value = min(value, udf - e h)`), which
/// gives zero-thickness sheets a thickness of about `2 e` voxels.
pub fn synthesize_signed_grid(udf: &ScalarGrid, labels: &LabelGrid, shell_epsilon: Option<f64>) -> Result<ScalarGrid> {
    if udf.res() != labels.res() {
        return Err(Error::ResolutionMismatch(udf.res(), labels.res()));
    }
    if udf.kind() != FieldKind::Unsigned {
        return Err(Error::invalid("synthesize_signed_grid expects an unsigned field"));
    }
    let band = shell_epsilon.map(|e| e * udf.spacing());
    let values = udf
        .values()
        .iter()
        .zip(labels.as_slice())
        .map(|(&d, &inside)| {
            let v = if inside { -d } else { d };
            match band {
                Some(b) => v.min(d - b),
                None => v,
            }
        })
        .collect();
    Ok(ScalarGrid::from_parts_unchecked(udf.spec(), FieldKind::Signed, values))
}

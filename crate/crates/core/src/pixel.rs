//! Non-perceptual fallback image distance for smoke tests.
//!
//! This is NOT LPIPS: it is the mean absolute difference of 8-bit RGB
//! channels, scaled to `[0, 1]`. Real analyses should supply learned
//! perceptual scores through the scores file.

use std::path::Path;

use crate::error::{Error, Result};

/// Mean absolute RGB difference in `[0, 1]` between two same-sized images.
pub fn mean_abs_pixel_distance(a: &Path, b: &Path) -> Result<f64> {
    let load = |p: &Path| {
        image::open(p)
            .map(|img| img.to_rgb8())
            .map_err(|e| Error::Image(format!("{}: {e}", p.display())))
    };
    let (ia, ib) = (load(a)?, load(b)?);
    if ia.dimensions() != ib.dimensions() {
        return Err(Error::Dimension(format!(
            "image sizes differ: {:?} vs {:?}",
            ia.dimensions(),
            ib.dimensions()
        )));
    }
    let raw_a = ia.as_raw();
    let total: u64 = raw_a
        .iter()
        .zip(ib.as_raw())
        .map(|(&x, &y)| u64::from(x.abs_diff(y)))
        .sum();
    Ok(total as f64 / (raw_a.len() as f64 * 255.0))
}

/// Distances between consecutive images of a trajectory.
pub fn trajectory_distances<P: AsRef<Path>>(frames: &[P]) -> Result<Vec<f64>> {
    frames
        .windows(2)
        .map(|w| mean_abs_pixel_distance(w[0].as_ref(), w[1].as_ref()))
        .collect()
}

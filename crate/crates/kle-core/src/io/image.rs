//! ASCII portable graymap/pixmap input for grid-L2 spaces.
//!
//! A pixel raster is read as a piecewise-constant function on the unit
//! square: cell (j, k) carries the intensity rescaled to [0, 1] by the
//! declared maxval.  The coefficients land in the matching grid-L2 space —
//! row-major within a channel, one block per channel — so norms and inner
//! products of images mean their L2 counterparts.

use crate::error::{Error, Result};
use crate::space::{HPoint, SpaceSpec};

/// Parses a P2 (graymap, one channel) or P3 (pixmap, three channels)
/// ASCII image of exactly `m` rows by `n` columns and embeds it into
/// `SpaceSpec::grid_l2(m, n, channels)`.  The channel count must match
/// the format.  `#` comments run to end of line, as usual for these
/// formats.
pub fn parse_grid_image(
    text: &str,
    m: usize,
    n: usize,
    channels: usize,
) -> Result<(SpaceSpec, HPoint)> {
    let cleaned: String = text
        .lines()
        .map(|line| line.split('#').next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");
    let mut tokens = cleaned.split_whitespace();
    let magic = tokens.next().ok_or_else(|| Error::BadMagic("<empty>".into()))?;
    let format_channels = match magic {
        "P2" => 1,
        "P3" => 3,
        other => return Err(Error::BadMagic(other.into())),
    };
    if channels != format_channels {
        return Err(Error::DimensionMismatch(format!(
            "{magic} carries {format_channels} channel(s), {channels} requested"
        )));
    }
    let mut next_int = |what: &str| -> Result<u64> {
        tokens
            .next()
            .ok_or_else(|| Error::BadFormat(format!("missing {what}")))?
            .parse::<u64>()
            .map_err(|_| Error::BadFormat(format!("{what} is not a nonnegative integer")))
    };
    let width = next_int("width")? as usize;
    let height = next_int("height")? as usize;
    if width != n || height != m {
        return Err(Error::DimensionMismatch(format!(
            "image is {width}x{height} (width x height), expected {n}x{m}"
        )));
    }
    let maxval = next_int("maxval")?;
    if maxval == 0 {
        return Err(Error::MaxvalZero);
    }

    let space = SpaceSpec::grid_l2(m, n, channels)?;
    let pixels = m * n;
    let mut coeffs = vec![0.0; pixels * channels];
    for p in 0..pixels {
        for c in 0..channels {
            let v = next_int("pixel value")?;
            if v > maxval {
                return Err(Error::BadFormat(format!(
                    "pixel value {v} exceeds maxval {maxval}"
                )));
            }
            // Channel-major blocks, row-major raster within each block.
            coeffs[c * pixels + p] = v as f64 / maxval as f64;
        }
    }
    if tokens.next().is_some() {
        return Err(Error::BadFormat("trailing tokens after pixel data".into()));
    }
    Ok((space, HPoint::from_vec(coeffs)))
}

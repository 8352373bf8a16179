use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;

fn max_magnitude(psi: &ComplexGrid) -> f64 {
    psi.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn to_byte(x: f64) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Binary P5 image of `|ψ|`, mapped linearly from `[0, max]` to `[0, 255]`.
pub fn magnitude_pgm(psi: &ComplexGrid) -> Vec<u8> {
    let mx = max_magnitude(psi);
    let mut out = format!("P5\n{} {}\n255\n", psi.cols(), psi.rows()).into_bytes();
    out.extend(psi.as_slice().iter().map(|z| if mx > 0.0 { to_byte(z.norm() / mx) } else { 0 }));
    out
}

/// Standard HSV to RGB, all components in `[0, 1]`.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    match i as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Binary P6 image: hue from the phase, value from the normalized magnitude.
pub fn phase_ppm(psi: &ComplexGrid) -> Vec<u8> {
    let mx = max_magnitude(psi);
    let mut out = format!("P6\n{} {}\n255\n", psi.cols(), psi.rows()).into_bytes();
    for z in psi.as_slice() {
        let h = (z.arg() + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
        let v = if mx > 0.0 { z.norm() / mx } else { 0.0 };
        let (r, g, b) = hsv_to_rgb(h, 1.0, v);
        out.extend([to_byte(r), to_byte(g), to_byte(b)]);
    }
    out
}

/// Parses the magic, width and height of a binary PNM header.
pub fn read_pnm_header(bytes: &[u8]) -> Result<(String, usize, usize)> {
    let text = String::from_utf8_lossy(&bytes[..bytes.len().min(64)]).into_owned();
    let mut it = text.split_ascii_whitespace();
    let bad = || Error::Format("malformed PNM header".into());
    let magic = it.next().ok_or_else(bad)?.to_string();
    let w = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let h = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    Ok((magic, w, h))
}

/// Writes `<prefix>_mag.pgm` and `<prefix>_phase.ppm`.
pub fn export_images(psi: &ComplexGrid, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    if psi.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("cannot export a non-finite object".into()));
    }
    let base = prefix.to_string_lossy();
    let pgm = PathBuf::from(format!("{base}_mag.pgm"));
    let ppm = PathBuf::from(format!("{base}_phase.ppm"));
    super::write_atomic(&pgm, &magnitude_pgm(psi))?;
    super::write_atomic(&ppm, &phase_ppm(psi))?;
    Ok((pgm, ppm))
}

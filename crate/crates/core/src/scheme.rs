//! Illumination schemes (raster positions) and fractional probe shifts.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, C64};

/// Raster position of a window's upper-left corner, in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Position {
    pub row: f64,
    pub col: f64,
}

impl Position {
    pub fn new(row: f64, col: f64) -> Self {
        Self { row, col }
    }

    /// Integer anchor `(floor(row), floor(col))`.
    pub fn anchor(&self) -> (usize, usize) {
        (self.row.floor() as usize, self.col.floor() as usize)
    }

    /// Fractional remainder as `(fx, fy)`: horizontal first.
    pub fn frac(&self) -> (f64, f64) {
        (self.col - self.col.floor(), self.row - self.row.floor())
    }
}

/// Ordered raster positions together with the window side `m` and object side `n`.
///
/// Construction checks bounds only. Assumption-1 conditions (distinct positions,
/// full coverage, pairwise overlap) are checked by [`validate_scheme`];
/// [`build_scheme`] refuses to return a scheme that fails them.
#[derive(Clone, Debug, PartialEq)]
pub struct IlluminationScheme {
    positions: Vec<Position>,
    m: usize,
    n: usize,
}

impl IlluminationScheme {
    pub fn new(positions: Vec<Position>, m: usize, n: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("scheme needs at least one position".into()));
        }
        if m == 0 || m > n {
            return Err(Error::InvalidParameter(format!("window side {m} must be in 1..={n}")));
        }
        let hi = (n - m) as f64;
        for (i, p) in positions.iter().enumerate() {
            let ok = |v: f64| v.is_finite() && (0.0..=hi).contains(&v);
            if !ok(p.row) || !ok(p.col) {
                return Err(Error::InvalidParameter(format!(
                    "position {i} = ({}, {}) leaves [0, {hi}]",
                    p.row, p.col
                )));
            }
        }
        Ok(Self { positions, m, n })
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn window(&self) -> usize {
        self.m
    }

    pub fn object(&self) -> usize {
        self.n
    }

    pub fn anchors(&self) -> Vec<(usize, usize)> {
        self.positions.iter().map(Position::anchor).collect()
    }

    /// Whether the integer windows of frames `i` and `j` share a pixel.
    pub fn overlaps(&self, i: usize, j: usize) -> bool {
        let (ri, ci) = self.positions[i].anchor();
        let (rj, cj) = self.positions[j].anchor();
        ri.abs_diff(rj) < self.m && ci.abs_diff(cj) < self.m
    }

    /// All ordered pairs `(i, j)` with overlapping windows, `i == j` included.
    pub fn overlap_pairs(&self) -> Vec<(usize, usize)> {
        let k = self.len();
        let mut pairs = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if self.overlaps(i, j) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }
}

/// Findings of [`validate_scheme`]; empty means the scheme is valid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchemeReport {
    /// Condition 1: index pairs with identical positions.
    pub duplicates: Vec<(usize, usize)>,
    /// Condition 2: pixels `(row, col)` not covered by any window.
    pub uncovered: Vec<(usize, usize)>,
    /// Condition 3: windows that overlap no other window.
    pub isolated: Vec<usize>,
}

impl SchemeReport {
    pub fn is_empty(&self) -> bool {
        self.duplicates.is_empty() && self.uncovered.is_empty() && self.isolated.is_empty()
    }
}

impl fmt::Display for SchemeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "scheme satisfies all coverage conditions");
        }
        let mut parts = Vec::new();
        if !self.duplicates.is_empty() {
            parts.push(format!(
                "condition 1 (distinct positions): {} duplicate pair(s), first {:?}",
                self.duplicates.len(),
                self.duplicates[0]
            ));
        }
        if !self.uncovered.is_empty() {
            parts.push(format!(
                "condition 2 (coverage): {} uncovered pixel(s), first {:?}",
                self.uncovered.len(),
                self.uncovered[0]
            ));
        }
        if !self.isolated.is_empty() {
            parts.push(format!(
                "condition 3 (overlap): {} window(s) without an overlap partner, first {}",
                self.isolated.len(),
                self.isolated[0]
            ));
        }
        write!(f, "{}", parts.join("; "))
    }
}

pub fn validate_scheme(scheme: &IlluminationScheme) -> SchemeReport {
    let k = scheme.len();
    let (m, n) = (scheme.window(), scheme.object());
    let pos = scheme.positions();

    let mut duplicates = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if pos[i] == pos[j] {
                duplicates.push((i, j));
            }
        }
    }

    let mut covered = vec![false; n * n];
    for (r0, c0) in scheme.anchors() {
        for r in r0..r0 + m {
            covered[r * n + c0..r * n + c0 + m].iter_mut().for_each(|c| *c = true);
        }
    }
    let uncovered = covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| !c)
        .map(|(p, _)| (p / n, p % n))
        .collect();

    let isolated = (0..k).filter(|&i| !(0..k).any(|j| j != i && scheme.overlaps(i, j))).collect();

    SchemeReport { duplicates, uncovered, isolated }
}

/// Parameters of a jittered square raster.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterSpec {
    pub n: usize,
    pub m: usize,
    pub dx: f64,
    pub dy: f64,
    pub jitter: f64,
    pub shear: bool,
    pub seed: u64,
}

/// Square lattice with spacing `(dx, dy)`, optional half-step shear of odd
/// rows, uniform jitter in `[-jitter, jitter]` per interior coordinate,
/// clamped into `[0, n - m]`. Lattice points run from 0 up to `n - m` along
/// each axis; the first and last lattice lines are neither sheared nor
/// jittered, so the border stays covered. Exact duplicates produced by
/// clamping are dropped.
/// The result is validated; any violated coverage condition is an error.
pub fn build_scheme(spec: &RasterSpec) -> Result<IlluminationScheme> {
    let RasterSpec { n, m, dx, dy, jitter, shear, seed } = *spec;
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("window side {m} must be in 1..={n}")));
    }
    if !(dx >= 1.0 && dy >= 1.0) {
        return Err(Error::InvalidParameter("spacings must be >= 1".into()));
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidParameter("jitter must be >= 0".into()));
    }
    let hi = (n - m) as f64;
    // a final point at n - m closes any remainder strip
    let rows = (hi / dy).ceil() as usize + 1;
    let cols = (hi / dx).ceil() as usize + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(rows * cols);
    for ir in 0..rows {
        for ic in 0..cols {
            let mut row = (ir as f64 * dy).min(hi);
            let mut col = (ic as f64 * dx).min(hi);
            let interior_col = ic > 0 && ic + 1 < cols;
            if shear && ir % 2 == 1 && interior_col {
                col += dx / 2.0;
            }
            if jitter > 0.0 {
                // edge lattice lines stay pinned so the border stays covered
                let jr: f64 = rng.random_range(-jitter..=jitter);
                let jc: f64 = rng.random_range(-jitter..=jitter);
                if ir > 0 && ir + 1 < rows {
                    row += jr;
                }
                if interior_col {
                    col += jc;
                }
            }
            let p = Position::new(row.clamp(0.0, hi), col.clamp(0.0, hi));
            // clamping can land a shifted point exactly on a pinned one; the window is the same
            if !positions.contains(&p) {
                positions.push(p);
            }
        }
    }
    let scheme = IlluminationScheme::new(positions, m, n)?;
    let report = validate_scheme(&scheme);
    if !report.is_empty() {
        return Err(Error::Scheme(report.to_string()));
    }
    Ok(scheme)
}

/// Bilinear shift of `omega` by `(fx, fy)` pixels (horizontal, vertical);
/// samples falling outside the grid count as zero.
pub fn shifted_probe(omega: &ComplexGrid, frac: (f64, f64)) -> ComplexGrid {
    let (fx, fy) = frac;
    if fx == 0.0 && fy == 0.0 {
        return omega.clone();
    }
    let (rows, cols) = (omega.rows(), omega.cols());
    let at = |r: isize, c: isize| -> C64 {
        if r < 0 || c < 0 {
            C64::new(0.0, 0.0)
        } else {
            omega.get(r as usize, c as usize)
        }
    };
    ComplexGrid::from_fn(rows, cols, |r, c| {
        let (r, c) = (r as isize, c as isize);
        at(r, c) * ((1.0 - fy) * (1.0 - fx))
            + at(r, c - 1) * ((1.0 - fy) * fx)
            + at(r - 1, c) * (fy * (1.0 - fx))
            + at(r - 1, c - 1) * (fy * fx)
    })
}

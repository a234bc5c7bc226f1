//! Habitat domains and the vertex-centered grids they rasterise to.
//!
//! Three domain shapes cover the analyses here: axis-aligned boxes (closed
//! forms available), balls (closed forms via Bessel zeros), and raster masks
//! for habitats traced from maps. Every domain sits in a hostile exterior:
//! when a domain becomes a grid, nodes outside (or on the edge of) the
//! habitat carry the Dirichlet value 0 and only the interior nodes are
//! unknowns.
//!
//! Grids are uniform per axis and vertex-centered: a box `[0, L]` at spacing
//! `h` has nodes `0, h, ..., L` with the two end nodes pinned to zero.
//! Masked domains bring their own lattice; the mask *is* the interior
//! classification, and the measured volume is `h^n` times the inside count.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells per axis a rasterisation must produce; anything
/// coarser cannot resolve even the principal mode.
pub const MIN_CELLS_PER_AXIS: usize = 8;

/// A habitat with hostile surroundings.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Axis-aligned box `(0, L_1) x ... x (0, L_n)`, `1 <= n <= 3`.
    Rect { lengths: Vec<f64> },
    /// Open ball of the given radius in `dim` dimensions, `dim >= 1`.
    /// Closed-form eigenvalues exist for any `dim`; grids only up to 3.
    Ball { radius: f64, dim: usize },
    /// Raster habitat: an explicit inside/outside lattice.
    Masked(MaskedDomain),
}

impl Domain {
    pub fn rect(lengths: &[f64]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 3 {
            return Err(Error::InvalidParameter(format!(
                "box domains support 1 to 3 axes, got {}",
                lengths.len()
            )));
        }
        if lengths.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "box side lengths must be positive and finite: {lengths:?}"
            )));
        }
        Ok(Domain::Rect {
            lengths: lengths.to_vec(),
        })
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        if dim < 1 {
            return Err(Error::InvalidParameter(
                "ball dimension must be at least 1".into(),
            ));
        }
        Ok(Domain::Ball { radius, dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Rect { lengths } => lengths.len(),
            Domain::Ball { dim, .. } => *dim,
            Domain::Masked(m) => m.dim(),
        }
    }

    /// Lebesgue volume; for masks this is the measured volume
    /// `h^n * inside count`.
    pub fn volume(&self) -> f64 {
        match self {
            Domain::Rect { lengths } => lengths.iter().product(),
            Domain::Ball { radius, dim } => {
                unit_ball_volume(*dim).expect("dim validated") * radius.powi(*dim as i32)
            }
            Domain::Masked(m) => {
                m.inside.iter().filter(|b| **b).count() as f64 * m.spacing.powi(m.dim() as i32)
            }
        }
    }

    /// The ball of the same dimension and volume. Idempotent on balls up to
    /// floating-point roundoff.
    pub fn symmetrized(&self) -> Domain {
        let n = self.dim();
        let alpha = unit_ball_volume(n).expect("dim validated");
        Domain::Ball {
            radius: (self.volume() / alpha).powf(1.0 / n as f64),
            dim: n,
        }
    }

    /// Vertex-centered grid at target spacing `h`. Box and ball axes are
    /// snapped so an integer number of cells spans the domain exactly (the
    /// realised spacing is within one part in `MIN_CELLS_PER_AXIS` of `h`).
    /// Masked domains return their own lattice; `h` is ignored for them.
    pub fn rasterize(&self, h: f64) -> Result<Grid> {
        match self {
            Domain::Rect { lengths } => {
                if !(h > 0.0) {
                    return Err(Error::InvalidParameter(format!("spacing must be positive, got {h}")));
                }
                let mut shape = Vec::new();
                let mut spacing = Vec::new();
                for (axis, l) in lengths.iter().enumerate() {
                    let cells = (l / h).round().max(1.0) as usize;
                    if cells < MIN_CELLS_PER_AXIS {
                        return Err(Error::Resolution {
                            axis,
                            got: cells,
                            need: MIN_CELLS_PER_AXIS,
                        });
                    }
                    shape.push(cells + 1);
                    spacing.push(l / cells as f64);
                }
                let origin = vec![0.0; lengths.len()];
                let shape_c = shape.clone();
                Grid::build(shape, spacing, origin, |idx, _| {
                    idx.iter()
                        .zip(&shape_c)
                        .all(|(i, s)| *i > 0 && *i + 1 < *s)
                })
            }
            Domain::Ball { radius, dim } => {
                if !(h > 0.0) {
                    return Err(Error::InvalidParameter(format!("spacing must be positive, got {h}")));
                }
                if *dim > 3 {
                    return Err(Error::Unsupported(format!(
                        "grids are supported up to dimension 3, got {dim}"
                    )));
                }
                let cells = (2.0 * radius / h).round().max(1.0) as usize;
                if cells < MIN_CELLS_PER_AXIS {
                    return Err(Error::Resolution {
                        axis: 0,
                        got: cells,
                        need: MIN_CELLS_PER_AXIS,
                    });
                }
                let spacing = vec![2.0 * radius / cells as f64; *dim];
                let shape = vec![cells + 1; *dim];
                let origin = vec![-radius; *dim];
                let r2 = radius * radius * (1.0 - 1e-12);
                Grid::build(shape, spacing, origin, |_, x| {
                    x.iter().map(|v| v * v).sum::<f64>() < r2
                })
            }
            Domain::Masked(m) => {
                let shape = m.node_counts.clone();
                let spacing = vec![m.spacing; m.dim()];
                let origin = vec![0.0; m.dim()];
                let inside = m.inside.clone();
                let dims = shape.clone();
                Grid::build(shape, spacing, origin, |idx, _| {
                    inside[flat_index(idx, &dims)]
                })
            }
        }
    }
}

/// Volume of the unit ball in `n` dimensions, by the two-step recursion
/// `alpha_n = 2 pi alpha_{n-2} / n` with `alpha_1 = 2`, `alpha_2 = pi`.
/// Exact in the sense that no gamma-function evaluation is involved.
pub fn unit_ball_volume(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "unit ball volume needs dimension >= 1".into(),
        ));
    }
    let mut alpha = if n % 2 == 1 { 2.0 } else { std::f64::consts::PI };
    let mut k = 2 - n % 2;
    while k < n {
        k += 2;
        alpha *= 2.0 * std::f64::consts::PI / k as f64;
    }
    Ok(alpha)
}

/// Raster habitat on a uniform lattice. `inside[flat]` marks the nodes that
/// are unknowns; everything else, including the implied exterior beyond the
/// lattice edge, is hostile (Dirichlet 0).
///
/// Indexing is C-order with axis 0 fastest: for a 2-D mask of `node_counts
/// = [nx, ny]`, node `(i, j)` sits at `(i h, j h)` with flat index
/// `i + nx * j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDomain {
    pub spacing: f64,
    /// Nodes per axis, `[nx, ny]` or `[nx, ny, nz]`.
    pub node_counts: Vec<usize>,
    pub inside: Vec<bool>,
}

impl MaskedDomain {
    pub fn new(spacing: f64, node_counts: Vec<usize>, inside: Vec<bool>) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mask spacing must be positive, got {spacing}"
            )));
        }
        if node_counts.len() < 2 || node_counts.len() > 3 {
            return Err(Error::InvalidParameter(
                "masks are 2-D or 3-D".into(),
            ));
        }
        let total: usize = node_counts.iter().product();
        if total == 0 || inside.len() != total {
            return Err(Error::InvalidParameter(format!(
                "mask lattice {node_counts:?} does not match {} entries",
                inside.len()
            )));
        }
        if !inside.iter().any(|b| *b) {
            return Err(Error::InvalidParameter("mask has no inside nodes".into()));
        }
        Ok(MaskedDomain {
            spacing,
            node_counts,
            inside,
        })
    }

    pub fn dim(&self) -> usize {
        self.node_counts.len()
    }

    /// Parse the 2-D text format: a header line `rows cols spacing`, then
    /// `rows` lines of `cols` space-separated 0/1 entries. Row `r` maps to
    /// `y = r h`, column `c` to `x = c h`.
    pub fn read_text(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |reason: String| Error::MaskFormat {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(bad(format!(
                "header must be `rows cols spacing`, got {header:?}"
            )));
        }
        let rows: usize = parts[0]
            .parse()
            .map_err(|_| bad(format!("bad row count {:?}", parts[0])))?;
        let cols: usize = parts[1]
            .parse()
            .map_err(|_| bad(format!("bad column count {:?}", parts[1])))?;
        let spacing: f64 = parts[2]
            .parse()
            .map_err(|_| bad(format!("bad spacing {:?}", parts[2])))?;
        let mut inside = vec![false; rows * cols];
        let mut r = 0;
        for line in lines {
            if r >= rows {
                return Err(bad(format!("more than {rows} data rows")));
            }
            let entries: Vec<&str> = line.split_whitespace().collect();
            if entries.len() != cols {
                return Err(bad(format!(
                    "row {r} has {} entries, expected {cols}",
                    entries.len()
                )));
            }
            for (c, e) in entries.iter().enumerate() {
                inside[c + cols * r] = match *e {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(format!("entry {other:?} in row {r} is not 0/1"))),
                };
            }
            r += 1;
        }
        if r != rows {
            return Err(bad(format!("only {r} of {rows} data rows present")));
        }
        MaskedDomain::new(spacing, vec![cols, rows], inside)
    }

    /// Inverse of [`MaskedDomain::read_text`] (2-D masks only).
    pub fn to_text(&self) -> Result<String> {
        if self.dim() != 2 {
            return Err(Error::Unsupported(
                "the mask text format is 2-D only".into(),
            ));
        }
        let (nx, ny) = (self.node_counts[0], self.node_counts[1]);
        let mut out = String::new();
        let _ = writeln!(out, "{ny} {nx} {}", self.spacing);
        for r in 0..ny {
            for c in 0..nx {
                if c > 0 {
                    out.push(' ');
                }
                out.push(if self.inside[c + nx * r] { '1' } else { '0' });
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Build a mask by sampling a predicate at the lattice nodes of the box
    /// `[0, extents[0]] x ...` at the given spacing.
    pub fn from_fn(
        spacing: f64,
        extents: &[f64],
        inside: impl Fn(&[f64]) -> bool,
    ) -> Result<Self> {
        if extents.len() < 2 || extents.len() > 3 {
            return Err(Error::InvalidParameter("masks are 2-D or 3-D".into()));
        }
        let counts: Vec<usize> = extents
            .iter()
            .map(|e| (e / spacing).round() as usize + 1)
            .collect();
        let total: usize = counts.iter().product();
        let mut flags = vec![false; total];
        let mut coord = vec![0.0; counts.len()];
        for (flat, flag) in flags.iter_mut().enumerate() {
            let mut rem = flat;
            for (k, c) in counts.iter().enumerate() {
                coord[k] = (rem % c) as f64 * spacing;
                rem /= c;
            }
            *flag = inside(&coord);
        }
        MaskedDomain::new(spacing, counts, flags)
    }
}

#[inline]
fn flat_index(idx: &[usize], shape: &[usize]) -> usize {
    let mut flat = 0;
    let mut stride = 1;
    for (i, s) in idx.iter().zip(shape) {
        flat += i * stride;
        stride *= s;
    }
    flat
}

/// A rasterised domain: a uniform lattice with an interior classification.
/// Node values live on the full lattice; only interior nodes are unknowns of
/// the discrete operators, everything else is pinned to 0.
#[derive(Debug, Clone)]
pub struct Grid {
    /// Nodes per axis, axis 0 fastest in flat indexing.
    pub shape: Vec<usize>,
    /// Spacing per axis.
    pub spacing: Vec<f64>,
    /// Coordinate of node `(0, .., 0)`.
    pub origin: Vec<f64>,
    /// Interior flag per node, flat order.
    pub interior: Vec<bool>,
    /// Flat indices of interior nodes, ascending; the unknown ordering.
    pub interior_nodes: Vec<usize>,
    /// Flat node index -> ordinal in `interior_nodes`, `u32::MAX` outside.
    pub interior_ordinal: Vec<u32>,
}

impl Grid {
    fn build(
        shape: Vec<usize>,
        spacing: Vec<f64>,
        origin: Vec<f64>,
        classify: impl Fn(&[usize], &[f64]) -> bool,
    ) -> Result<Grid> {
        let total: usize = shape.iter().product();
        if total == 0 || total > u32::MAX as usize / 2 {
            return Err(Error::InvalidParameter(format!(
                "lattice of {total} nodes is out of range"
            )));
        }
        let dim = shape.len();
        let mut interior = vec![false; total];
        let mut interior_nodes = Vec::new();
        let mut interior_ordinal = vec![u32::MAX; total];
        let mut idx = vec![0usize; dim];
        let mut coord = vec![0.0; dim];
        for flat in 0..total {
            let mut rem = flat;
            for k in 0..dim {
                idx[k] = rem % shape[k];
                rem /= shape[k];
                coord[k] = origin[k] + idx[k] as f64 * spacing[k];
            }
            if classify(&idx, &coord) {
                interior[flat] = true;
                interior_ordinal[flat] = interior_nodes.len() as u32;
                interior_nodes.push(flat);
            }
        }
        if interior_nodes.is_empty() {
            return Err(Error::InvalidParameter(
                "rasterisation produced no interior nodes".into(),
            ));
        }
        Ok(Grid {
            shape,
            spacing,
            origin,
            interior,
            interior_nodes,
            interior_ordinal,
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn interior_count(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Coordinates of a flat node index.
    pub fn coords(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        let mut out = Vec::with_capacity(self.dim());
        for k in 0..self.dim() {
            out.push(self.origin[k] + (rem % self.shape[k]) as f64 * self.spacing[k]);
            rem /= self.shape[k];
        }
        out
    }

    /// Flat index of the lattice neighbour one step along `axis`, or `None`
    /// past the lattice edge (which is hostile exterior).
    pub fn neighbor(&self, flat: usize, axis: usize, step: isize) -> Option<usize> {
        let stride: usize = self.shape[..axis].iter().product();
        let pos = (flat / stride) % self.shape[axis];
        let next = pos as isize + step;
        if next < 0 || next >= self.shape[axis] as isize {
            None
        } else {
            Some((flat as isize + step * stride as isize) as usize)
        }
    }

    /// Bounding box extent per axis, `(shape - 1) * spacing`.
    pub fn extent(&self) -> Vec<f64> {
        self.shape
            .iter()
            .zip(&self.spacing)
            .map(|(s, h)| (s - 1) as f64 * h)
            .collect()
    }

    pub fn into_shared(self) -> Arc<Grid> {
        Arc::new(self)
    }
}

/// Serialisable description of a domain, as it appears in CLI configs and
/// report echoes. Mask domains are referenced by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DomainSpec {
    Rect { lengths: Vec<f64> },
    Ball { radius: f64, dim: usize },
    Mask { path: String },
}

impl DomainSpec {
    pub fn resolve(&self) -> Result<Domain> {
        match self {
            DomainSpec::Rect { lengths } => Domain::rect(lengths),
            DomainSpec::Ball { radius, dim } => Domain::ball(*radius, *dim),
            DomainSpec::Mask { path } => {
                Ok(Domain::Masked(MaskedDomain::read_text(Path::new(path))?))
            }
        }
    }
}

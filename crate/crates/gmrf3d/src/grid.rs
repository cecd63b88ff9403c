//! Regular rectangular 3D grid with the cell, face, and vectorization
//! conventions used by the finite-volume discretization.
//!
//! The domain `[A1,B1] x [A2,B2] x [A3,B3]` is divided into `M x N x P`
//! equally sized cells. Cell `(i, j, k)` maps to the linear index
//! `l = j*M*P + i*P + k`, i.e. the flattening runs fastest along z, then x,
//! then y.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Coordinate axis of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Index of the axis in a 3-vector: x -> 0, y -> 1, z -> 2.
    pub fn dim(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// One of the six faces of a cell. `L/R` bound the cell in x, `F/B` in y,
/// and `D/U` in z (`R`, `B`, `U` on the positive side).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
    Front,
    Back,
    Down,
    Up,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::Left,
        Direction::Right,
        Direction::Front,
        Direction::Back,
        Direction::Down,
        Direction::Up,
    ];

    /// Axis normal to the face.
    pub fn axis(self) -> Axis {
        match self {
            Direction::Left | Direction::Right => Axis::X,
            Direction::Front | Direction::Back => Axis::Y,
            Direction::Down | Direction::Up => Axis::Z,
        }
    }

    /// +1 for faces on the positive side of the cell, -1 otherwise.
    pub fn sign(self) -> i64 {
        match self {
            Direction::Right | Direction::Back | Direction::Up => 1,
            Direction::Left | Direction::Front | Direction::Down => -1,
        }
    }
}

/// Geometry of a regular 3D grid.
///
/// Immutable after construction; shared freely between threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cells along x.
    pub m: usize,
    /// Cells along y.
    pub n: usize,
    /// Cells along z.
    pub p: usize,
    /// Domain bounds `(A1, B1, A2, B2, A3, B3)`.
    pub bounds: (f64, f64, f64, f64, f64, f64),
    /// Cell side length along x.
    #[serde(skip)]
    pub hx: f64,
    /// Cell side length along y.
    #[serde(skip)]
    pub hy: f64,
    /// Cell side length along z.
    #[serde(skip)]
    pub hz: f64,
    /// Cell volume `hx * hy * hz`.
    #[serde(skip)]
    pub volume: f64,
}

/// A cell identified by its integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellHandle {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// A face of a cell: the owning cell plus one of the six directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceHandle {
    pub cell: CellHandle,
    pub direction: Direction,
}

impl GridSpec {
    /// Build a grid with at least 3 cells per axis over a non-degenerate box.
    ///
    /// The 3-cell minimum guarantees that every neighbor class referenced by
    /// the 19-point stencil exists somewhere in the grid.
    pub fn new(m: usize, n: usize, p: usize, bounds: (f64, f64, f64, f64, f64, f64)) -> Result<Self> {
        if m < 3 || n < 3 || p < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 cells per axis, got {m} x {n} x {p}"
            )));
        }
        let (a1, b1, a2, b2, a3, b3) = bounds;
        if !(b1 > a1 && b2 > a2 && b3 > a3) || !bounds_finite(bounds) {
            return Err(Error::InvalidGrid(format!(
                "degenerate bounds ({a1}, {b1}) x ({a2}, {b2}) x ({a3}, {b3})"
            )));
        }
        let hx = (b1 - a1) / m as f64;
        let hy = (b2 - a2) / n as f64;
        let hz = (b3 - a3) / p as f64;
        Ok(GridSpec {
            m,
            n,
            p,
            bounds,
            hx,
            hy,
            hz,
            volume: hx * hy * hz,
        })
    }

    /// Rebuild the derived side lengths, e.g. after deserialization.
    pub fn with_derived(mut self) -> Result<Self> {
        let fresh = GridSpec::new(self.m, self.n, self.p, self.bounds)?;
        self.hx = fresh.hx;
        self.hy = fresh.hy;
        self.hz = fresh.hz;
        self.volume = fresh.volume;
        Ok(self)
    }

    /// Total number of cells `M * N * P`.
    pub fn num_cells(&self) -> usize {
        self.m * self.n * self.p
    }

    /// Linear index `l = j*M*P + i*P + k` of cell `(i, j, k)`.
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> Result<usize> {
        if i >= self.m || j >= self.n || k >= self.p {
            return Err(Error::CellOutOfRange {
                i: i as i64,
                j: j as i64,
                k: k as i64,
                m: self.m,
                n: self.n,
                p: self.p,
            });
        }
        Ok(self.linear_index_unchecked(i, j, k))
    }

    #[inline]
    pub(crate) fn linear_index_unchecked(&self, i: usize, j: usize, k: usize) -> usize {
        j * self.m * self.p + i * self.p + k
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn cell_at(&self, l: usize) -> Result<CellHandle> {
        if l >= self.num_cells() {
            return Err(Error::CellOutOfRange {
                i: l as i64,
                j: -1,
                k: -1,
                m: self.m,
                n: self.n,
                p: self.p,
            });
        }
        let mp = self.m * self.p;
        let j = l / mp;
        let r = l % mp;
        let i = r / self.p;
        let k = r % self.p;
        Ok(CellHandle { i, j, k })
    }

    /// Center `(A1 + (i+1/2)hx, A2 + (j+1/2)hy, A3 + (k+1/2)hz)` of a cell.
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Result<[f64; 3]> {
        self.linear_index(i, j, k)?;
        Ok(self.cell_center_unchecked(i, j, k))
    }

    #[inline]
    pub(crate) fn cell_center_unchecked(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.bounds.0 + (i as f64 + 0.5) * self.hx,
            self.bounds.2 + (j as f64 + 0.5) * self.hy,
            self.bounds.4 + (k as f64 + 0.5) * self.hz,
        ]
    }

    /// The unique cell containing `point`.
    ///
    /// Points on an internal boundary plane belong to the cell on the
    /// positive side (floor convention); points on the outer `B`-side faces
    /// clamp into the last cell, so `locate` is total on the closed domain.
    pub fn locate(&self, point: [f64; 3]) -> Result<CellHandle> {
        let (a1, b1, a2, b2, a3, b3) = self.bounds;
        let [x, y, z] = point;
        if !(a1..=b1).contains(&x) || !(a2..=b2).contains(&y) || !(a3..=b3).contains(&z) {
            return Err(Error::PointOutsideDomain(x, y, z));
        }
        let clamp_floor = |t: f64, a: f64, h: f64, count: usize| -> usize {
            (((t - a) / h).floor() as usize).min(count - 1)
        };
        Ok(CellHandle {
            i: clamp_floor(x, a1, self.hx, self.m),
            j: clamp_floor(y, a2, self.hy, self.n),
            k: clamp_floor(z, a3, self.hz, self.p),
        })
    }

    /// Center of a face (at the half-index location of its direction).
    pub fn face_center(&self, face: FaceHandle) -> [f64; 3] {
        let CellHandle { i, j, k } = face.cell;
        let mut c = self.cell_center_unchecked(i, j, k);
        let d = face.direction;
        let h = match d.axis() {
            Axis::X => self.hx,
            Axis::Y => self.hy,
            Axis::Z => self.hz,
        };
        c[d.axis().dim()] += 0.5 * d.sign() as f64 * h;
        c
    }

    /// Area of a face.
    pub fn face_area(&self, direction: Direction) -> f64 {
        match direction.axis() {
            Axis::X => self.hy * self.hz,
            Axis::Y => self.hx * self.hz,
            Axis::Z => self.hx * self.hy,
        }
    }

    /// The neighboring cell across a face, or `None` on the boundary.
    pub fn neighbor(&self, cell: CellHandle, direction: Direction) -> Option<CellHandle> {
        let CellHandle { i, j, k } = cell;
        let (di, dj, dk) = match direction {
            Direction::Left => (-1, 0, 0),
            Direction::Right => (1, 0, 0),
            Direction::Front => (0, -1, 0),
            Direction::Back => (0, 1, 0),
            Direction::Down => (0, 0, -1),
            Direction::Up => (0, 0, 1),
        };
        let ni = i as i64 + di;
        let nj = j as i64 + dj;
        let nk = k as i64 + dk;
        if ni < 0
            || nj < 0
            || nk < 0
            || ni >= self.m as i64
            || nj >= self.n as i64
            || nk >= self.p as i64
        {
            None
        } else {
            Some(CellHandle {
                i: ni as usize,
                j: nj as usize,
                k: nk as usize,
            })
        }
    }

    /// Number of cells along `axis`.
    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.m,
            Axis::Y => self.n,
            Axis::Z => self.p,
        }
    }

    /// Cell side length along `axis`.
    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.hx,
            Axis::Y => self.hy,
            Axis::Z => self.hz,
        }
    }

    /// Reflect an out-of-range coordinate back into the grid (mirror
    /// convention for stencil neighbors next to a boundary): `-1 -> 0` and
    /// `extent -> extent - 1`. In-range values pass through.
    #[inline]
    pub(crate) fn mirror(&self, axis: Axis, t: i64) -> usize {
        let ext = self.extent(axis) as i64;
        debug_assert!(t >= -1 && t <= ext, "stencil reaches at most one cell out");
        if t < 0 {
            0
        } else if t >= ext {
            (ext - 1) as usize
        } else {
            t as usize
        }
    }
}

fn bounds_finite(b: (f64, f64, f64, f64, f64, f64)) -> bool {
    [b.0, b.1, b.2, b.3, b.4, b.5].iter().all(|v| v.is_finite())
}

//! Points, bounding boxes, and four-point homographies.
//!
//! Two coordinate frames exist: raw image pixels and the standard
//! pitch in meters. A `Point2` knows its frame and refuses mixed-frame
//! arithmetic, so a pixel distance can never silently blend with a
//! metric one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard pitch length in meters.
pub const FIELD_LENGTH_M: f64 = 105.0;
/// Standard pitch width in meters.
pub const FIELD_WIDTH_M: f64 = 68.0;
/// Penalty area depth from the goal line, meters.
pub const PENALTY_AREA_DEPTH_M: f64 = 16.5;
/// Penalty area width, meters.
pub const PENALTY_AREA_WIDTH_M: f64 = 40.32;

/// Pivot magnitudes below this reject the linear solve as singular.
const PIVOT_EPS: f64 = 1e-12;
/// Homogeneous scale magnitudes below this reject a projection.
const PROJECTION_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("points are in different frames ({0} vs {1})")]
    FrameMismatch(Frame, Frame),
    #[error("point is not finite: ({x}, {y})")]
    NonFinitePoint { x: f64, y: f64 },
    #[error("bounding box is not ordered or not finite: [{x0}, {y0}, {x1}, {y1}]")]
    InvalidBox { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("correspondences are degenerate (three collinear points or a repeated point)")]
    SingularConfiguration,
    #[error("matrix is singular or cannot be scaled to unit lower-right entry")]
    SingularMatrix,
    #[error("point ({x}, {y}) projects to infinity under this homography")]
    ProjectionAtInfinity { x: f64, y: f64 },
    #[error("homography maps {expected} points but was given a {given} point")]
    WrongSourceFrame { expected: Frame, given: Frame },
}

/// Coordinate frame of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Raw annotation pixels, origin at the top-left of the image.
    Image,
    /// Standard pitch meters, origin at the top-left corner of the field.
    Field,
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frame::Image => write!(f, "image"),
            Frame::Field => write!(f, "field"),
        }
    }
}

/// A planar point tagged with its coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
    pub frame: Frame,
}

impl Point2 {
    pub fn new(x: f64, y: f64, frame: Frame) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(GeometryError::NonFinitePoint { x, y });
        }
        Ok(Point2 { x, y, frame })
    }

    /// Pixel-frame point. Panics on non-finite input; use `new` at trust
    /// boundaries.
    pub fn image(x: f64, y: f64) -> Self {
        Point2::new(x, y, Frame::Image).expect("finite image point")
    }

    /// Meter-frame point on the standard pitch.
    pub fn field(x: f64, y: f64) -> Self {
        Point2::new(x, y, Frame::Field).expect("finite field point")
    }
}

/// Euclidean distance between two points of the same frame.
pub fn pairwise_distance(a: Point2, b: Point2) -> Result<f64, GeometryError> {
    if a.frame != b.frame {
        return Err(GeometryError::FrameMismatch(a.frame, b.frame));
    }
    Ok(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
}

/// Axis-aligned pixel box, `(x0, y0)` top-left inclusive, `(x1, y1)`
/// bottom-right. Degenerate (zero-area) boxes are allowed; inverted or
/// non-finite ones are not.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        let finite = [x0, y0, x1, y1].iter().all(|v| v.is_finite());
        if !finite || x1 < x0 || y1 < y0 {
            return Err(GeometryError::InvalidBox { x0, y0, x1, y1 });
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    /// Center of the box, in the image frame.
    pub fn center(&self) -> Point2 {
        Point2::image((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

/// A plane projective map between two frames, stored with its
/// lower-right entry normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
    from: Frame,
    to: Frame,
}

impl Homography {
    /// Identity map from image to field coordinates.
    pub fn identity() -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            from: Frame::Image,
            to: Frame::Field,
        }
    }

    /// Wraps an explicit matrix, normalizing so `m[2][2] == 1`.
    /// Rejects singular matrices and those with a vanishing
    /// lower-right entry (not representable in this normalization).
    pub fn from_matrix(m: [[f64; 3]; 3], from: Frame, to: Frame) -> Result<Self, GeometryError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::SingularMatrix);
        }
        if det3(&m).abs() < PIVOT_EPS || m[2][2].abs() < PIVOT_EPS {
            return Err(GeometryError::SingularMatrix);
        }
        let s = m[2][2];
        let mut n = m;
        for row in n.iter_mut() {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        Ok(Homography { m: n, from, to })
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn source_frame(&self) -> Frame {
        self.from
    }

    pub fn target_frame(&self) -> Frame {
        self.to
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Solves for the homography taking each source point to its paired
/// target point. Exactly four correspondences determine the map (eight
/// unknowns under the `h33 = 1` normalization, two equations each).
///
/// All sources must share one frame and all targets another (they may
/// be equal); the result maps source frame to target frame. Degenerate
/// configurations (three collinear points on either side, repeated
/// points) surface as `SingularConfiguration`.
pub fn solve_homography(
    correspondences: &[(Point2, Point2); 4],
) -> Result<Homography, GeometryError> {
    let from = correspondences[0].0.frame;
    let to = correspondences[0].1.frame;
    for (s, t) in correspondences.iter() {
        if s.frame != from {
            return Err(GeometryError::FrameMismatch(from, s.frame));
        }
        if t.frame != to {
            return Err(GeometryError::FrameMismatch(to, t.frame));
        }
    }

    // Two rows per correspondence: the direct linear transform with
    // h33 fixed to 1, giving an 8x8 system in the remaining entries.
    let mut a = [[0.0f64; 9]; 8];
    for (i, (p, q)) in correspondences.iter().enumerate() {
        let (x, y, u, v) = (p.x, p.y, q.x, q.y);
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }

    let h = solve_linear_8(&mut a)?;
    let m = [
        [h[0], h[1], h[2]],
        [h[3], h[4], h[5]],
        [h[6], h[7], 1.0],
    ];
    // The elimination succeeding already implies invertibility for
    // well-scaled inputs; the determinant check guards the pathological
    // remainder so callers never hold a non-invertible map.
    if det3(&m).abs() < PIVOT_EPS {
        return Err(GeometryError::SingularConfiguration);
    }
    Ok(Homography { m, from, to })
}

/// Gaussian elimination with partial pivoting on an 8x8 system held as
/// an augmented 8x9 matrix. Rejects pivots smaller than `PIVOT_EPS`.
fn solve_linear_8(a: &mut [[f64; 9]; 8]) -> Result<[f64; 8], GeometryError> {
    for col in 0..8 {
        let pivot_row = (col..8)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot_row][col].abs() < PIVOT_EPS {
            return Err(GeometryError::SingularConfiguration);
        }
        a.swap(col, pivot_row);
        for row in (col + 1)..8 {
            let f = a[row][col] / a[col][col];
            a[row][col] = 0.0;
            for k in (col + 1)..9 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0f64; 8];
    for row in (0..8).rev() {
        let mut s = a[row][8];
        for k in (row + 1)..8 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::SingularConfiguration);
    }
    Ok(x)
}

/// Applies a homography to a point of its source frame, producing a
/// point in its target frame. Points mapped to the line at infinity
/// (vanishing homogeneous scale) are rejected.
pub fn register_point(h: &Homography, p: Point2) -> Result<Point2, GeometryError> {
    if p.frame != h.from {
        return Err(GeometryError::WrongSourceFrame {
            expected: h.from,
            given: p.frame,
        });
    }
    let m = &h.m;
    let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
    if w.abs() < PROJECTION_EPS {
        return Err(GeometryError::ProjectionAtInfinity { x: p.x, y: p.y });
    }
    let x = (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w;
    let y = (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w;
    Point2::new(x, y, h.to)
}

//! Pose representation and angle conventions.
//!
//! World frame is a flat local East-North-Up frame: `+x` East, `+y` North,
//! `+z` up. Headings are compass headings (clockwise-positive from North),
//! tilt is measured from nadir (0 looks straight down) and all angles are
//! stored in degrees.
//!
//! Orientation bookkeeping uses the Z-Y-X composition
//! `R = Rz(psi) * Ry(theta) * Rx(phi)`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Side length of one horizontal classification cell, metres.
pub const CELL_SIZE: f64 = 50.0;
/// Half extent of the relative horizontal range covered by the cell grid.
pub const CELL_GRID_HALF_EXTENT: f64 = 200.0;
/// Cells per side of the classification grid.
pub const CELLS_PER_SIDE: u8 = 8;
/// Total number of classification cells.
pub const NUM_CELLS: usize = 64;

// sin(1e-9 deg): below this |cos(theta)| the heading and roll axes coincide.
const GIMBAL_COS_THRESHOLD: f64 = 1.745_329_251_994_33e-11;
const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("camera ray does not reach the ground (tilt {theta} deg)")]
    NoIntersection { theta: f64 },
    #[error("camera altitude must be positive, got {z}")]
    NonPositiveAltitude { z: f64 },
    #[error("relative position ({x}, {y}) outside the cell grid")]
    OutsideCellGrid { x: f64, y: f64 },
    #[error("cell id {0} out of range 0..64")]
    InvalidCell(u32),
    #[error("matrix is not a rotation (deviation {deviation:e})")]
    NotARotation { deviation: f64 },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Full camera pose: position in metres and heading/tilt/roll in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose6D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
    pub theta: f64,
    pub phi: f64,
}

impl Pose6D {
    pub fn new(x: f64, y: f64, z: f64, psi: f64, theta: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            z,
            psi,
            theta,
            phi,
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn set_position(&mut self, p: &Vector3<f64>) {
        self.x = p.x;
        self.y = p.y;
        self.z = p.z;
    }

    pub fn rotation(&self) -> Result<RotationMatrix> {
        euler_to_rotmat(self.psi, self.theta, self.phi)
    }

    /// State-vector ordering `[x, y, z, psi, theta, phi]`.
    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.psi, self.theta, self.phi]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// A proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking it is a rotation to within 1e-6.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("rotation matrix"));
        }
        let deviation = rotation_deviation(&m);
        if deviation > ORTHONORMAL_TOLERANCE {
            return Err(GeometryError::NotARotation { deviation });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, rhs: &RotationMatrix) -> Self {
        Self(self.0 * rhs.0)
    }

    /// Rotation by `angle_deg` about the unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle_deg: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle_deg == 0.0 {
            return Self::identity();
        }
        let k = axis / n;
        let (s, c) = angle_deg.to_radians().sin_cos();
        let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
        Self(Matrix3::identity() + kx * s + kx * kx * (1.0 - c))
    }

    /// Rotation from a rotation vector whose norm is the angle in degrees.
    pub fn from_rotation_vector_deg(v: &Vector3<f64>) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    /// Maximum elementwise deviation of `R^T R` from identity, combined with
    /// the determinant error.
    pub fn deviation(&self) -> f64 {
        rotation_deviation(&self.0)
    }
}

fn rotation_deviation(m: &Matrix3<f64>) -> f64 {
    let ortho = (m.transpose() * m - Matrix3::identity()).amax();
    ortho.max((m.determinant() - 1.0).abs())
}

/// `Rz(psi) * Ry(theta) * Rx(phi)`, angles in degrees.
pub fn euler_to_rotmat(psi: f64, theta: f64, phi: f64) -> Result<RotationMatrix> {
    if !(psi.is_finite() && theta.is_finite() && phi.is_finite()) {
        return Err(GeometryError::NonFinite("euler angles"));
    }
    let (sp, cp) = psi.to_radians().sin_cos();
    let (st, ct) = theta.to_radians().sin_cos();
    let (sr, cr) = phi.to_radians().sin_cos();
    #[rustfmt::skip]
    let m = Matrix3::new(
        cp * ct, cp * st * sr - sp * cr, cp * st * cr + sp * sr,
        sp * ct, sp * st * sr + cp * cr, sp * st * cr - cp * sr,
        -st,     ct * sr,                ct * cr,
    );
    Ok(RotationMatrix(m))
}

/// Inverse of [`euler_to_rotmat`].
///
/// Returns `theta` in `[-90, 90]` and `psi`, `phi` in `(-180, 180]`. At gimbal
/// lock (`|theta|` within 1e-9 deg of 90) roll is pinned to zero and the whole
/// rotation about the vertical is reported as heading.
pub fn rotmat_to_euler(r: &RotationMatrix) -> Result<(f64, f64, f64)> {
    let m = r.matrix();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite("rotation matrix"));
    }
    let deviation = rotation_deviation(m);
    if deviation > ORTHONORMAL_TOLERANCE {
        return Err(GeometryError::NotARotation { deviation });
    }
    let cos_theta = m[(0, 0)].hypot(m[(1, 0)]);
    if cos_theta < GIMBAL_COS_THRESHOLD {
        let theta = if -m[(2, 0)] > 0.0 { 90.0 } else { -90.0 };
        let psi = (-m[(0, 1)]).atan2(m[(1, 1)]).to_degrees();
        return Ok((wrap_angle(psi), theta, 0.0));
    }
    let theta = (-m[(2, 0)]).atan2(cos_theta).to_degrees();
    let psi = m[(1, 0)].atan2(m[(0, 0)]).to_degrees();
    let phi = m[(2, 1)].atan2(m[(2, 2)]).to_degrees();
    Ok((wrap_angle(psi), theta, wrap_angle(phi)))
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -180.0 && a <= 180.0 {
        return a;
    }
    let r = a.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Point where the image centre ray meets the ground plane `z = 0`.
///
/// This is where the satellite tile for the pose is centred.
pub fn ground_intersection(pose: &Pose6D) -> Result<(f64, f64)> {
    if !pose.is_finite() {
        return Err(GeometryError::NonFinite("pose"));
    }
    if pose.theta.abs() >= 90.0 {
        return Err(GeometryError::NoIntersection { theta: pose.theta });
    }
    if pose.z <= 0.0 {
        return Err(GeometryError::NonPositiveAltitude { z: pose.z });
    }
    let reach = pose.z * pose.theta.to_radians().tan();
    let (s, c) = pose.psi.to_radians().sin_cos();
    Ok((pose.x + reach * s, pose.y + reach * c))
}

/// One of the 64 horizontal classification cells, numbered row-major from
/// the south-west corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex(u8);

impl CellIndex {
    pub fn new(id: u32) -> Result<Self> {
        if id as usize >= NUM_CELLS {
            return Err(GeometryError::InvalidCell(id));
        }
        Ok(Self(id as u8))
    }

    pub fn from_row_col(row: u8, col: u8) -> Result<Self> {
        if row >= CELLS_PER_SIDE || col >= CELLS_PER_SIDE {
            return Err(GeometryError::InvalidCell(
                row as u32 * CELLS_PER_SIDE as u32 + col as u32,
            ));
        }
        Ok(Self(row * CELLS_PER_SIDE + col))
    }

    pub fn id(self) -> usize {
        self.0 as usize
    }

    pub fn row(self) -> u8 {
        self.0 / CELLS_PER_SIDE
    }

    pub fn col(self) -> u8 {
        self.0 % CELLS_PER_SIDE
    }

    pub fn all() -> impl Iterator<Item = CellIndex> {
        (0..NUM_CELLS as u8).map(CellIndex)
    }
}

/// Classifies a position relative to a tile centre into its grid cell.
pub fn cell_index(x_rel: f64, y_rel: f64) -> Result<CellIndex> {
    if !(x_rel.is_finite() && y_rel.is_finite()) {
        return Err(GeometryError::NonFinite("relative position"));
    }
    let h = CELL_GRID_HALF_EXTENT;
    if !(-h..=h).contains(&x_rel) || !(-h..=h).contains(&y_rel) {
        return Err(GeometryError::OutsideCellGrid { x: x_rel, y: y_rel });
    }
    let last = (CELLS_PER_SIDE - 1) as f64;
    let col = ((x_rel + h) / CELL_SIZE).floor().min(last) as u8;
    let row = ((y_rel + h) / CELL_SIZE).floor().min(last) as u8;
    CellIndex::from_row_col(row, col)
}

pub fn cell_center(c: CellIndex) -> (f64, f64) {
    let origin = -CELL_GRID_HALF_EXTENT + CELL_SIZE / 2.0;
    (
        origin + CELL_SIZE * c.col() as f64,
        origin + CELL_SIZE * c.row() as f64,
    )
}

/// Applies a visual-odometry increment: `p + dp` and `dR * R(pose)`.
pub fn compose_increment(
    pose: &Pose6D,
    dp: &Vector3<f64>,
    dr: &RotationMatrix,
) -> Result<Pose6D> {
    let r = dr.compose(&pose.rotation()?);
    let (psi, theta, phi) = rotmat_to_euler(&r)?;
    let p = pose.position() + dp;
    Ok(Pose6D::new(p.x, p.y, p.z, psi, theta, phi))
}

/// Wrapped difference `a - b` in `(-180, 180]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

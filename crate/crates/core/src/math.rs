//! Rotation, quaternion, and small-vector primitives.
//!
//! Conventions, used everywhere in this crate:
//! - Rotation matrices are stored row-major and act on column vectors
//!   (`y = R * x`).
//! - A device or segment orientation `R` maps local coordinates into the
//!   shared world frame.
//! - All internal math is f64. Network weights serialize as f32 (see `nn`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for rotation invariants (orthonormality, unit norm).
pub const ROT_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Vec3
// ---------------------------------------------------------------------------

/// 3-vector in meters (or m/s² when used for acceleration).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

// ---------------------------------------------------------------------------
// UnitQuaternion
// ---------------------------------------------------------------------------

/// Unit quaternion in scalar-first (w, x, y, z) order.
///
/// Construction normalizes, so the unit-norm invariant holds within
/// [`ROT_TOL`] for any value of this type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl UnitQuaternion {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Builds a unit quaternion from raw components, normalizing them.
    ///
    /// Non-finite components or a (near-)zero norm are rejected.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::invalid_input("quaternion components must be finite"));
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n < 1e-12 {
            return Err(Error::invalid_input("quaternion norm is zero"));
        }
        Ok(Self {
            w: w / n,
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        if !axis.is_finite() || !angle.is_finite() {
            return Err(Error::invalid_input("axis-angle components must be finite"));
        }
        let n = axis.norm();
        if n < 1e-12 {
            return Err(Error::invalid_input("rotation axis has zero length"));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Ok(Self {
            w: c,
            x: axis.x / n * s,
            y: axis.y / n * s,
            z: axis.z / n * s,
        })
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation matrix of this quaternion (`y = R x` convention).
    pub fn to_rot(&self) -> Rot3 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let m = [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ];
        Rot3 { m }
    }
}

// ---------------------------------------------------------------------------
// Rot3
// ---------------------------------------------------------------------------

/// 3x3 rotation matrix, row-major.
///
/// Invariants: `R^T R = I` and `det(R) = +1`, both within [`ROT_TOL`].
/// Checked constructors enforce them; composition helpers preserve them up
/// to floating-point drift (use [`Rot3::orthonormalize`] after long chains).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot3 {
    m: [f64; 9],
}

impl Rot3 {
    pub const fn identity() -> Self {
        Self {
            m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    /// Validating constructor from a row-major 3x3 array.
    pub fn from_row_major(m: [f64; 9]) -> Result<Self> {
        let r = Self { m };
        r.validate()?;
        Ok(r)
    }

    /// Rotation by `angle` (radians, right-handed) about the x axis.
    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c],
        }
    }

    /// Rotation by `angle` about the y axis.
    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c],
        }
    }

    /// Rotation by `angle` about the z axis.
    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[row * 3 + col]
    }

    pub fn as_row_major(&self) -> &[f64; 9] {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self {
            m: [m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]],
        }
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    }

    /// Checks the orthonormality and determinant invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.m.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid_input("rotation entries must be finite"));
        }
        let rtr = self.transpose() * *self;
        let id = Rot3::identity();
        for i in 0..9 {
            if (rtr.m[i] - id.m[i]).abs() > ROT_TOL {
                return Err(Error::invalid_input(format!(
                    "matrix is not orthonormal (R^T R deviates by {:e})",
                    (rtr.m[i] - id.m[i]).abs()
                )));
            }
        }
        if (self.det() - 1.0).abs() > ROT_TOL {
            return Err(Error::invalid_input(format!(
                "matrix determinant {} is not +1",
                self.det()
            )));
        }
        Ok(())
    }

    /// Rotation taking `reference`-frame coordinates of `target`:
    /// returns `reference^T * target`, so `reference * result == target`.
    pub fn relative(reference: &Rot3, target: &Rot3) -> Rot3 {
        reference.transpose() * *target
    }

    /// Applies the rotation to a vector (`y = R x`).
    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z,
        )
    }

    /// Re-orthonormalizes via Gram-Schmidt on the rows. Repairs drift from
    /// long composition chains; the result has det +1 by construction.
    pub fn orthonormalize(&self) -> Rot3 {
        let r0 = Vec3::new(self.m[0], self.m[1], self.m[2]);
        let r1 = Vec3::new(self.m[3], self.m[4], self.m[5]);
        let r0 = r0 * (1.0 / r0.norm());
        let r1 = r1 - r0 * r0.dot(r1);
        let r1 = r1 * (1.0 / r1.norm());
        let r2 = r0.cross(r1);
        Rot3 {
            m: [r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z],
        }
    }

    /// Quaternion of this rotation with canonical sign (w >= 0).
    pub fn to_quat(&self) -> UnitQuaternion {
        let m = &self.m;
        let trace = m[0] + m[4] + m[8];
        let (w, x, y, z);
        if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[7] - m[5]) / s;
            y = (m[2] - m[6]) / s;
            z = (m[3] - m[1]) / s;
        } else if m[0] > m[4] && m[0] > m[8] {
            let s = (1.0 + m[0] - m[4] - m[8]).sqrt() * 2.0;
            w = (m[7] - m[5]) / s;
            x = 0.25 * s;
            y = (m[1] + m[3]) / s;
            z = (m[2] + m[6]) / s;
        } else if m[4] > m[8] {
            let s = (1.0 + m[4] - m[0] - m[8]).sqrt() * 2.0;
            w = (m[2] - m[6]) / s;
            x = (m[1] + m[3]) / s;
            y = 0.25 * s;
            z = (m[5] + m[7]) / s;
        } else {
            let s = (1.0 + m[8] - m[0] - m[4]).sqrt() * 2.0;
            w = (m[3] - m[1]) / s;
            x = (m[2] + m[6]) / s;
            y = (m[5] + m[7]) / s;
            z = 0.25 * s;
        }
        let neg = w < 0.0
            || (w == 0.0 && (x < 0.0 || (x == 0.0 && (y < 0.0 || (y == 0.0 && z < 0.0)))));
        let sign = if neg { -1.0 } else { 1.0 };
        // Norm is 1 up to rounding; re-normalize through the constructor.
        UnitQuaternion::new(sign * w, sign * x, sign * y, sign * z)
            .expect("rotation matrix yields a valid quaternion")
    }
}

impl std::ops::Mul for Rot3 {
    type Output = Rot3;

    fn mul(self, rhs: Rot3) -> Rot3 {
        let a = &self.m;
        let b = &rhs.m;
        let mut m = [0.0; 9];
        for (i, row) in m.chunks_exact_mut(3).enumerate() {
            for (j, out) in row.iter_mut().enumerate() {
                *out = a[i * 3] * b[j] + a[i * 3 + 1] * b[3 + j] + a[i * 3 + 2] * b[6 + j];
            }
        }
        Rot3 { m }
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_unit_quat(rng: &mut ChaCha8Rng) -> UnitQuaternion {
        loop {
            let q = UnitQuaternion::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if let Ok(q) = q {
                return q;
            }
        }
    }

    pub(crate) fn random_rot(rng: &mut ChaCha8Rng) -> Rot3 {
        random_unit_quat(rng).to_rot()
    }
}

#[cfg(test)]
mod tests {
    use super::tests_support::{random_rot, random_unit_quat};
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn assert_rot_close(a: &Rot3, b: &Rot3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (a.get(i, j) - b.get(i, j)).abs() <= tol,
                    "entry ({i},{j}): {} vs {}",
                    a.get(i, j),
                    b.get(i, j)
                );
            }
        }
    }

    #[test]
    fn quat_identity_gives_identity_matrix() {
        let q = UnitQuaternion::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_rot_close(&q.to_rot(), &Rot3::identity(), 1e-15);
    }

    #[test]
    fn quat_half_turn_about_z() {
        let q = UnitQuaternion::new(0.0, 0.0, 0.0, 1.0).unwrap();
        let expected = Rot3::from_row_major([-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap();
        assert_rot_close(&q.to_rot(), &expected, 1e-15);
    }

    #[test]
    fn quat_quarter_turn_matches_hand_computed_matrix() {
        // q = (cos 45deg, 0, 0, sin 45deg): each entry evaluated by hand from
        // the quaternion-to-matrix formula with w = z = sqrt(2)/2.
        let q = UnitQuaternion::new(FRAC_PI_4.cos(), 0.0, 0.0, FRAC_PI_4.sin()).unwrap();
        let expected =
            Rot3::from_row_major([0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_rot_close(&q.to_rot(), &expected, 1e-12);
        assert_rot_close(&q.to_rot(), &Rot3::rot_z(FRAC_PI_2), 1e-12);
    }

    #[test]
    fn quat_rejects_non_finite_input() {
        assert!(UnitQuaternion::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        assert!(UnitQuaternion::new(1.0, f64::INFINITY, 0.0, 0.0).is_err());
        assert!(UnitQuaternion::new(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quat_to_rot_satisfies_rotation_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = random_unit_quat(&mut rng);
            assert!((q.norm() - 1.0).abs() <= ROT_TOL);
            q.to_rot().validate().unwrap();
        }
    }

    #[test]
    fn relative_of_same_rotation_is_identity() {
        let r = Rot3::rot_x(0.7) * Rot3::rot_z(-1.1);
        assert_rot_close(&Rot3::relative(&r, &r), &Rot3::identity(), 1e-12);
    }

    #[test]
    fn relative_to_identity_reference_is_target() {
        let r = Rot3::rot_y(0.4) * Rot3::rot_x(1.3);
        assert_rot_close(&Rot3::relative(&Rot3::identity(), &r), &r, 1e-15);
    }

    #[test]
    fn relative_recovers_composed_offset() {
        // target = reference * offset, so relative(reference, target) = offset.
        let reference = Rot3::rot_z(FRAC_PI_2);
        let offset = Rot3::rot_x(PI / 6.0);
        let target = reference * offset;
        assert_rot_close(&Rot3::relative(&reference, &target), &offset, 1e-12);
    }

    #[test]
    fn relative_round_trips_through_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let a = random_rot(&mut rng);
            let b = random_rot(&mut rng);
            let rel = Rot3::relative(&a, &b);
            assert_rot_close(&(a * rel), &b, 1e-9);
        }
    }

    #[test]
    fn rotate_vec_basic_cases() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        let rotated = Rot3::identity().rotate(v);
        assert_relative_eq!(rotated.x, 1.0);
        assert_relative_eq!(rotated.y, 2.0);
        assert_relative_eq!(rotated.z, 3.0);

        let half_turn = Rot3::rot_z(PI).rotate(Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(half_turn.x, -1.0, epsilon = 1e-12);
        assert_relative_eq!(half_turn.y, 0.0, epsilon = 1e-12);

        let quarter = Rot3::rot_z(FRAC_PI_2).rotate(Vec3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(quarter.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(quarter.y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(quarter.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rotation_preserves_norms_and_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let r = random_rot(&mut rng);
            let u = Vec3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            let v = Vec3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            );
            assert!((r.rotate(u).norm() - u.norm()).abs() <= 1e-9);
            assert!((r.rotate(u).dot(r.rotate(v)) - u.dot(v)).abs() <= 1e-9);
        }
    }

    #[test]
    fn quat_matrix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..1000 {
            let r = random_rot(&mut rng);
            assert_rot_close(&r.to_quat().to_rot(), &r, 1e-12);
        }
    }

    #[test]
    fn from_row_major_rejects_shear() {
        let mut m = *Rot3::identity().as_row_major();
        m[1] = 0.1;
        assert!(Rot3::from_row_major(m).is_err());
    }
}

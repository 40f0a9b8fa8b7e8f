//! Euler rotation `R_Z(theta) R_Y(beta) R_X(gamma)` applied to normals.

use nalgebra::Matrix3;

use crate::scene::Vec3;

/// Compensation angles in the order the field outputs them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Angles {
    pub gamma: f64,
    pub beta: f64,
    pub theta: f64,
}

impl Angles {
    pub fn new(gamma: f64, beta: f64, theta: f64) -> Self {
        Self { gamma, beta, theta }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.gamma, self.beta, self.theta]
    }
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rotation_matrix(a: &Angles) -> Matrix3<f64> {
    rot_z(a.theta) * rot_y(a.beta) * rot_x(a.gamma)
}

/// Rotates `n` about x by gamma, then y by beta, then z by theta.
pub fn compensate_normal(n: &Vec3, a: &Angles) -> Vec3 {
    rotation_matrix(a) * n
}

/// Partial derivatives of `R n` with respect to (gamma, beta, theta).
pub fn compensate_normal_jacobian(n: &Vec3, a: &Angles) -> [Vec3; 3] {
    let (sg, cg) = a.gamma.sin_cos();
    let (sb, cb) = a.beta.sin_cos();
    let (st, ct) = a.theta.sin_cos();
    let drx = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sg, -cg, 0.0, cg, -sg);
    let dry = Matrix3::new(-sb, 0.0, cb, 0.0, 0.0, 0.0, -cb, 0.0, -sb);
    let drz = Matrix3::new(-st, -ct, 0.0, ct, -st, 0.0, 0.0, 0.0, 0.0);
    let (rx, ry, rz) = (rot_x(a.gamma), rot_y(a.beta), rot_z(a.theta));
    [rz * ry * drx * n, rz * dry * rx * n, drz * ry * rx * n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_is_identity() {
        let n = Vec3::new(0.3, -0.4, 0.5);
        assert_eq!(compensate_normal(&n, &Angles::default()), n);
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = compensate_normal(&Vec3::x(), &Angles::new(0.0, 0.0, FRAC_PI_2));
        assert!((r - Vec3::y()).norm() < 1e-12);
    }

    #[test]
    fn quarter_turn_about_x() {
        let r = compensate_normal(&Vec3::z(), &Angles::new(FRAC_PI_2, 0.0, 0.0));
        assert!((r - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let n = Vec3::new(0.2, 0.9, -0.4);
        let a = Angles::new(0.3, -0.2, 0.5);
        let j = compensate_normal_jacobian(&n, &a);
        let h = 1e-6;
        for k in 0..3 {
            let mut p = a.as_array();
            p[k] += h;
            let mut m = a.as_array();
            m[k] -= h;
            let fd = (compensate_normal(&n, &Angles::new(p[0], p[1], p[2]))
                - compensate_normal(&n, &Angles::new(m[0], m[1], m[2])))
                / (2.0 * h);
            assert!((fd - j[k]).norm() < 1e-8);
        }
    }
}

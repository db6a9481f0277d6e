//! Rotations, poses, camera intrinsics and the scale-invariant translation
//! encoding used as the network prediction target.
//!
//! Rotations are stored as unit quaternions in a canonical form (`w >= 0`,
//! sign of the first nonzero component fixed when `w == 0`), which makes
//! equality checks and file output deterministic. All angles are radians;
//! all translations are millimeters.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use rand::Rng;

use crate::error::{Error, Result};

/// Unit-norm tolerance maintained by every constructor and composition.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Orthonormality tolerance for matrices accepted as exact rotations.
pub const ORTHONORMAL_TOL: f64 = 1e-7;
const GRAM_SCHMIDT_EPS: f64 = 1e-8;

/// A 3D rotation stored as a canonical unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    q: UnitQuaternion<f64>,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation {
            q: UnitQuaternion::identity(),
        }
    }

    /// Build from quaternion components `(w, x, y, z)`, normalizing.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::DegenerateInput(format!(
                "quaternion norm {norm} cannot be normalized"
            )));
        }
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z));
        Ok(Self::canonical(q))
    }

    pub fn from_axis_angle(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self::canonical(UnitQuaternion::from_axis_angle(axis, angle))
    }

    /// Accept a matrix that is already orthonormal within [`ORTHONORMAL_TOL`].
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self> {
        let defect = orthonormality_defect(m);
        let det = m.determinant();
        if defect > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::NonRigid(format!(
                "orthonormality defect {defect:.3e}, det {det:.9}"
            )));
        }
        Ok(Self::from_matrix_unchecked(m))
    }

    /// Nearest rotation to an arbitrary matrix (polar factor via SVD).
    ///
    /// Used to snap rotations read from files after their tolerance check.
    pub fn nearest(m: &Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonRigid("matrix has non-finite entries".into()));
        }
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            // flipping the direction of the smallest singular value costs
            // the least in Frobenius norm
            let weakest = svd.singular_values.imin();
            let mut u_fixed = u;
            u_fixed.column_mut(weakest).neg_mut();
            r = u_fixed * v_t;
        }
        Ok(Self::from_matrix_unchecked(&r))
    }

    fn from_matrix_unchecked(m: &Matrix3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*m);
        Self::canonical(UnitQuaternion::from_rotation_matrix(&rot))
    }

    /// Uniform random rotation via the subgroup algorithm on quaternions.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        use std::f64::consts::TAU;
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        Self::from_quaternion(
            a * (TAU * u2).sin(),
            a * (TAU * u2).cos(),
            b * (TAU * u3).sin(),
            b * (TAU * u3).cos(),
        )
        .expect("random quaternion is unit norm")
    }

    fn canonical(q: UnitQuaternion<f64>) -> Self {
        let c = q.coords; // (x, y, z, w)
        let flip = if c.w != 0.0 {
            c.w < 0.0
        } else if c.x != 0.0 {
            c.x < 0.0
        } else if c.y != 0.0 {
            c.y < 0.0
        } else {
            c.z < 0.0
        };
        let q = if flip {
            UnitQuaternion::new_unchecked(-q.into_inner())
        } else {
            q
        };
        Rotation { q }
    }

    /// Quaternion components as `(w, x, y, z)`.
    pub fn quaternion(&self) -> (f64, f64, f64, f64) {
        let c = self.q.coords;
        (c.w, c.x, c.y, c.z)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        *self.q.to_rotation_matrix().matrix()
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Self::canonical(self.q * other.q)
    }

    pub fn inverse(&self) -> Rotation {
        Self::canonical(self.q.inverse())
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.q * v
    }

    /// Geodesic distance to another rotation in radians, in `[0, pi]`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        geodesic_angle(self, other)
    }
}

/// Geodesic angle `2*acos(|<q1, q2>|)` between two rotations.
///
/// Evaluated through the quaternion chord (`theta = 4*asin(c/2)` with
/// `c` the distance to the nearer of the two antipodal quaternions), which
/// resolves angles far below the 1e-8 floor of the arccos form.
pub fn geodesic_angle(r1: &Rotation, r2: &Rotation) -> f64 {
    let a = r1.q.coords;
    let b = r2.q.coords;
    let chord = (a - b).norm().min((a + b).norm());
    4.0 * (chord * 0.5).clamp(0.0, 1.0).asin()
}

fn orthonormality_defect(m: &Matrix3<f64>) -> f64 {
    let residual = m.transpose() * m - Matrix3::identity();
    residual.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Continuous 6D rotation representation: the first two matrix columns
/// before orthonormalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
}

/// Gram-Schmidt the 6D representation into a rotation.
///
/// Columns of the result are `(b1, b2, b1 x b2)` with `b1 = a1/|a1|` and
/// `b2` the normalized component of `a2` orthogonal to `b1`.
pub fn rot6d_to_matrix(r: &Rot6D) -> Result<Rotation> {
    let n1 = r.a1.norm();
    if n1 <= GRAM_SCHMIDT_EPS {
        return Err(Error::DegenerateInput(format!("|a1| = {n1:.3e}")));
    }
    let b1 = r.a1 / n1;
    let u2 = r.a2 - b1 * b1.dot(&r.a2);
    let n2 = u2.norm();
    if n2 <= GRAM_SCHMIDT_EPS {
        return Err(Error::DegenerateInput(format!(
            "component of a2 orthogonal to a1 has norm {n2:.3e}"
        )));
    }
    let b2 = u2 / n2;
    let b3 = b1.cross(&b2);
    Ok(Rotation::from_matrix_unchecked(&Matrix3::from_columns(&[
        b1, b2, b3,
    ])))
}

/// Inverse embedding: first two matrix columns.
pub fn matrix_to_rot6d(rot: &Rotation) -> Rot6D {
    let m = rot.matrix();
    Rot6D {
        a1: m.column(0).into(),
        a2: m.column(1).into(),
    }
}

/// Rigid object pose: rotation plus translation in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }
}

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !fx.is_finite() || !fy.is_finite() || fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "focal lengths must be positive, got ({fx}, {fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParam(
                "image size must be at least 1x1".into(),
            ));
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Combined focal length `sqrt(fx * fy)` used wherever a single `f`
    /// is needed.
    pub fn focal(&self) -> f64 {
        (self.fx * self.fy).sqrt()
    }
}

/// Square detection crop: center and side in pixels, plus the ratio of the
/// crop resolution to the original box side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub center_x: f64,
    pub center_y: f64,
    pub size: f64,
    pub resize_ratio: f64,
}

impl BBox {
    pub fn new(center_x: f64, center_y: f64, size: f64, resize_ratio: f64) -> Result<Self> {
        if !size.is_finite() || size <= 0.0 {
            return Err(Error::InvalidParam(format!("bbox size {size} must be > 0")));
        }
        if !resize_ratio.is_finite() || resize_ratio <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "resize ratio {resize_ratio} must be > 0"
            )));
        }
        Ok(BBox {
            center_x,
            center_y,
            size,
            resize_ratio,
        })
    }
}

/// Scale-invariant translation encoding: in-crop offsets of the projected
/// object center normalized by the crop side, plus a camera-normalized depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteCoords {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Encode a metric translation into crop-relative coordinates.
///
/// `x` and `y` are the offsets of the projected object center from the crop
/// center in units of the crop side; `z = t_z / (r * sqrt(fx * fy))`.
pub fn site_encode(t: &Vector3<f64>, bbox: &BBox, cam: &CameraIntrinsics) -> Result<SiteCoords> {
    if t.z.is_nan() || t.z <= 0.0 {
        return Err(Error::BehindCamera(t.z));
    }
    let u = cam.fx * t.x / t.z + cam.cx;
    let v = cam.fy * t.y / t.z + cam.cy;
    Ok(SiteCoords {
        x: (u - bbox.center_x) / bbox.size,
        y: (v - bbox.center_y) / bbox.size,
        z: t.z / (bbox.resize_ratio * cam.focal()),
    })
}

/// Exact algebraic inverse of [`site_encode`].
pub fn site_decode(s: &SiteCoords, bbox: &BBox, cam: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if s.z.is_nan() || s.z <= 0.0 {
        return Err(Error::InvalidDepth(s.z));
    }
    let t_z = s.z * bbox.resize_ratio * cam.focal();
    let u = s.x * bbox.size + bbox.center_x;
    let v = s.y * bbox.size + bbox.center_y;
    Ok(Vector3::new(
        (u - cam.cx) * t_z / cam.fx,
        (v - cam.cy) * t_z / cam.fy,
        t_z,
    ))
}

/// Combine residual predictions with the coarse stage:
/// rotation composes on the left, every site coordinate adds.
pub fn compose_pose(
    delta_rot: &Rotation,
    delta_site: &SiteCoords,
    coarse_rot: &Rotation,
    coarse_site: &SiteCoords,
) -> (Rotation, SiteCoords) {
    (
        delta_rot.compose(coarse_rot),
        SiteCoords {
            x: coarse_site.x + delta_site.x,
            y: coarse_site.y + delta_site.y,
            z: coarse_site.z + delta_site.z,
        },
    )
}

/// Which stage the global bounding-box features are fed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Classifier,
    Regressor,
}

/// Global crop features that restore the perspective context lost by
/// cropping.
///
/// The classifier stage sees the bounding box relative to the principal
/// point; the regressor stage sees the coarse projected object center
/// instead. Both carry the crop size over the focal length.
pub fn perspective_features(
    bbox: &BBox,
    cam: &CameraIntrinsics,
    stage: Stage,
    coarse_t: Option<&Vector3<f64>>,
) -> Result<[f64; 3]> {
    let f = cam.focal();
    match stage {
        Stage::Classifier => Ok([
            (bbox.center_x - cam.cx) / f,
            (bbox.center_y - cam.cy) / f,
            bbox.size / f,
        ]),
        Stage::Regressor => {
            let t = coarse_t.ok_or(Error::MissingCoarse)?;
            if t.z.is_nan() || t.z <= 0.0 {
                return Err(Error::BehindCamera(t.z));
            }
            Ok([t.x / t.z, t.y / t.z, bbox.size / f])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn quaternion_canonical_form() {
        let r = Rotation::from_quaternion(-0.5, 0.5, 0.5, 0.5).unwrap();
        let (w, x, y, z) = r.quaternion();
        assert!(w > 0.0);
        assert_close(w, 0.5, 1e-15);
        assert_close(x, -0.5, 1e-15);
        assert_close(y, -0.5, 1e-15);
        assert_close(z, -0.5, 1e-15);
    }

    #[test]
    fn rotation_invariants_hold_after_composition() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let r = Rotation::random(&mut rng).compose(&Rotation::random(&mut rng));
            let (w, x, y, z) = r.quaternion();
            let norm = (w * w + x * x + y * y + z * z).sqrt();
            assert_close(norm, 1.0, UNIT_NORM_TOL);
            let m = r.matrix();
            assert!(orthonormality_defect(&m) < ORTHONORMAL_TOL);
            assert_close(m.determinant(), 1.0, ORTHONORMAL_TOL);
        }
    }

    #[test]
    fn nearest_rotation_snaps_noisy_matrices() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..100 {
            let clean = Rotation::random(&mut rng);
            let mut noisy = clean.matrix();
            for v in noisy.iter_mut() {
                *v += rng.gen_range(-1e-5..1e-5);
            }
            let snapped = Rotation::nearest(&noisy).unwrap();
            assert!(geodesic_angle(&clean, &snapped) < 1e-4);
        }
        // a reflection still yields a proper rotation
        let reflection = nalgebra::Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        let snapped = Rotation::nearest(&reflection).unwrap();
        let m = snapped.matrix();
        assert!((m.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rot6d_canonical_basis_is_identity() {
        let r = rot6d_to_matrix(&Rot6D {
            a1: Vector3::new(1.0, 0.0, 0.0),
            a2: Vector3::new(0.0, 1.0, 0.0),
        })
        .unwrap();
        assert_close(geodesic_angle(&r, &Rotation::identity()), 0.0, 1e-12);
    }

    #[test]
    fn rot6d_removes_scale_and_shear() {
        let r = rot6d_to_matrix(&Rot6D {
            a1: Vector3::new(2.0, 0.0, 0.0),
            a2: Vector3::new(1.0, 1.0, 0.0),
        })
        .unwrap();
        assert_close(geodesic_angle(&r, &Rotation::identity()), 0.0, 1e-12);
    }

    #[test]
    fn rot6d_parallel_columns_rejected() {
        let res = rot6d_to_matrix(&Rot6D {
            a1: Vector3::new(1.0, 0.0, 0.0),
            a2: Vector3::new(1e-12, 0.0, 0.0),
        });
        assert!(matches!(res, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn rot6d_of_quarter_turn_about_z() {
        let r = Rotation::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let six = matrix_to_rot6d(&r);
        assert_close(six.a1.x, 0.0, 1e-15);
        assert_close(six.a1.y, 1.0, 1e-15);
        assert_close(six.a2.x, -1.0, 1e-15);
        assert_close(six.a2.y, 0.0, 1e-15);
    }

    #[test]
    fn rot6d_round_trip_on_random_rotations() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..1000 {
            let r = Rotation::random(&mut rng);
            let back = rot6d_to_matrix(&matrix_to_rot6d(&r)).unwrap();
            assert!(geodesic_angle(&r, &back) < 1e-9);
        }
    }

    #[test]
    fn geodesic_angle_basics() {
        let id = Rotation::identity();
        let quarter = Rotation::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        assert_close(geodesic_angle(&id, &id), 0.0, 1e-15);
        assert_close(
            geodesic_angle(&id, &quarter),
            std::f64::consts::FRAC_PI_2,
            1e-12,
        );
        // double cover: q and -q are the same rotation
        let q = Rotation::from_quaternion(0.5, 0.5, 0.5, 0.5).unwrap();
        let neg = Rotation::from_quaternion(-0.5, -0.5, -0.5, -0.5).unwrap();
        assert_close(geodesic_angle(&q, &neg), 0.0, 1e-15);
    }

    #[test]
    fn geodesic_angle_is_a_metric() {
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..200 {
            let (a, b, c) = (
                Rotation::random(&mut rng),
                Rotation::random(&mut rng),
                Rotation::random(&mut rng),
            );
            assert_close(geodesic_angle(&a, &b), geodesic_angle(&b, &a), 1e-12);
            assert!(
                geodesic_angle(&a, &b) + geodesic_angle(&b, &c) + 1e-12 >= geodesic_angle(&a, &c)
            );
        }
    }

    #[test]
    fn compose_pose_identity_delta_is_identity_map() {
        let coarse_rot = Rotation::from_axis_angle(&Vector3::y_axis(), 0.4);
        let coarse_site = SiteCoords {
            x: 0.1,
            y: -0.2,
            z: 2.0,
        };
        let (r, s) = compose_pose(
            &Rotation::identity(),
            &SiteCoords {
                x: 0.0,
                y: 0.0,
                z: 0.0,
            },
            &coarse_rot,
            &coarse_site,
        );
        assert_close(geodesic_angle(&r, &coarse_rot), 0.0, 1e-15);
        assert_eq!(s, coarse_site);
    }

    #[test]
    fn compose_pose_adds_angles_on_shared_axis() {
        let deg = std::f64::consts::PI / 180.0;
        let delta = Rotation::from_axis_angle(&Vector3::x_axis(), 10.0 * deg);
        let coarse = Rotation::from_axis_angle(&Vector3::x_axis(), 20.0 * deg);
        let expected = Rotation::from_axis_angle(&Vector3::x_axis(), 30.0 * deg);
        let zero = SiteCoords {
            x: 0.0,
            y: 0.0,
            z: 0.0,
        };
        let (r, _) = compose_pose(&delta, &zero, &coarse, &zero);
        assert!(geodesic_angle(&r, &expected) < 1e-12);
    }

    #[test]
    fn compose_pose_depth_residual_is_additive() {
        let zero = SiteCoords {
            x: 0.0,
            y: 0.0,
            z: 0.5,
        };
        let coarse = SiteCoords {
            x: 0.0,
            y: 0.0,
            z: 2.0,
        };
        let (_, s) = compose_pose(&Rotation::identity(), &zero, &Rotation::identity(), &coarse);
        assert_close(s.z, 2.5, 1e-15);
    }

    fn test_cam() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn site_encode_center_projection_is_zero() {
        let cam = test_cam();
        let t = Vector3::new(100.0, -40.0, 1000.0);
        let u = cam.fx * t.x / t.z + cam.cx;
        let v = cam.fy * t.y / t.z + cam.cy;
        let bbox = BBox::new(u, v, 128.0, 2.0).unwrap();
        let s = site_encode(&t, &bbox, &cam).unwrap();
        assert_close(s.x, 0.0, 1e-12);
        assert_close(s.y, 0.0, 1e-12);
    }

    #[test]
    fn site_encode_depth_formula() {
        let cam = test_cam();
        let bbox = BBox::new(320.0, 240.0, 128.0, 1.0).unwrap();
        let s = site_encode(&Vector3::new(0.0, 0.0, 1000.0), &bbox, &cam).unwrap();
        assert_close(s.z, 2.0, 1e-12);
    }

    #[test]
    fn site_decode_formula_inversion() {
        let cam = test_cam();
        let bbox = BBox::new(320.0, 240.0, 128.0, 1.0).unwrap();
        let t = site_decode(
            &SiteCoords {
                x: 0.0,
                y: 0.0,
                z: 2.0,
            },
            &bbox,
            &cam,
        )
        .unwrap();
        assert!((t - Vector3::new(0.0, 0.0, 1000.0)).norm() < 1e-9);
    }

    #[test]
    fn site_round_trip_on_random_poses() {
        let mut rng = StdRng::seed_from_u64(77);
        let cam = test_cam();
        for _ in 0..1000 {
            let bbox = BBox::new(
                rng.gen_range(10.0..630.0),
                rng.gen_range(10.0..470.0),
                rng.gen_range(20.0..400.0),
                rng.gen_range(0.3..4.0),
            )
            .unwrap();
            let t = Vector3::new(
                rng.gen_range(-500.0..500.0),
                rng.gen_range(-500.0..500.0),
                rng.gen_range(100.0..5000.0),
            );
            let s = site_encode(&t, &bbox, &cam).unwrap();
            let back = site_decode(&s, &bbox, &cam).unwrap();
            assert!((back - t).norm() < 1e-6, "{t:?} -> {back:?}");
            let s2 = site_encode(&back, &bbox, &cam).unwrap();
            assert!((s2.x - s.x).abs() < 1e-6);
            assert!((s2.y - s.y).abs() < 1e-6);
            assert!((s2.z - s.z).abs() < 1e-6);
        }
    }

    #[test]
    fn site_rejects_invalid_depth() {
        let cam = test_cam();
        let bbox = BBox::new(320.0, 240.0, 128.0, 1.0).unwrap();
        assert!(matches!(
            site_encode(&Vector3::new(0.0, 0.0, -5.0), &bbox, &cam),
            Err(Error::BehindCamera(_))
        ));
        assert!(matches!(
            site_decode(
                &SiteCoords {
                    x: 0.0,
                    y: 0.0,
                    z: -1.0
                },
                &bbox,
                &cam
            ),
            Err(Error::InvalidDepth(_))
        ));
    }

    #[test]
    fn perspective_features_classifier_centered() {
        let cam = test_cam();
        let bbox = BBox::new(320.0, 240.0, 250.0, 1.0).unwrap();
        let f = perspective_features(&bbox, &cam, Stage::Classifier, None).unwrap();
        assert_close(f[0], 0.0, 1e-15);
        assert_close(f[1], 0.0, 1e-15);
        assert_close(f[2], 0.5, 1e-12);
    }

    #[test]
    fn perspective_features_regressor_ratios() {
        let cam = test_cam();
        let bbox = BBox::new(100.0, 100.0, 250.0, 1.0).unwrap();
        let t = Vector3::new(100.0, 0.0, 1000.0);
        let f = perspective_features(&bbox, &cam, Stage::Regressor, Some(&t)).unwrap();
        assert_close(f[0], 0.1, 1e-12);
        assert_close(f[1], 0.0, 1e-15);
        assert_close(f[2], 0.5, 1e-12);
        assert!(matches!(
            perspective_features(&bbox, &cam, Stage::Regressor, None),
            Err(Error::MissingCoarse)
        ));
    }
}

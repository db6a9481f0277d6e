//! Training loss terms as plain scalar functions.
//!
//! Losses return per-sample values; batch reduction is the caller's job.
//! Probabilities are clamped to `[1e-7, 1 - 1e-7]` before any logarithm so
//! values are finite and bit-reproducible. Analytic gradients are provided
//! for the closed-form losses (the two focal losses and the mask BCE); the
//! pose-distance losses are checked by value oracles instead.

use crate::error::{Error, Result};
use crate::geometry::{
    site_decode, site_encode, BBox, CameraIntrinsics, Pose, Rotation, SiteCoords,
};
use crate::symlabels::{pose_distance_symm, Mesh, RotationSoftLabels, SymmetrySet};

/// Probability clamp bound.
pub const PROB_EPS: f64 = 1e-7;
/// Tolerance on probability-vector normalization. The extra term absorbs
/// accumulation error when a finite-difference probe sits exactly on the
/// boundary.
const PROB_SUM_TOL: f64 = 1e-5 + 1e-9;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Weights of the seven loss terms plus the positive-class weight of the
/// binary focal loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub cls_rot: f64,
    pub cls_xy: f64,
    pub cls_z: f64,
    pub reg_rot: f64,
    pub reg_xy: f64,
    pub reg_z: f64,
    pub mask: f64,
    pub positive: f64,
}

impl LossWeights {
    #[allow(clippy::too_many_arguments)] // mirrors the seven-term loss
    pub fn new(
        cls_rot: f64,
        cls_xy: f64,
        cls_z: f64,
        reg_rot: f64,
        reg_xy: f64,
        reg_z: f64,
        mask: f64,
        positive: f64,
    ) -> Result<Self> {
        let w = LossWeights {
            cls_rot,
            cls_xy,
            cls_z,
            reg_rot,
            reg_xy,
            reg_z,
            mask,
            positive,
        };
        let all = [
            cls_rot, cls_xy, cls_z, reg_rot, reg_xy, reg_z, mask, positive,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParam(
                "loss weights must be finite and nonnegative".into(),
            ));
        }
        if positive <= 0.0 {
            return Err(Error::InvalidParam(
                "positive-class weight must be > 0".into(),
            ));
        }
        Ok(w)
    }
}

/// The standard training weights.
impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            cls_rot: 0.05,
            cls_xy: 2.0,
            cls_z: 2.0,
            reg_rot: 1.0,
            reg_xy: 1.0,
            reg_z: 0.2,
            mask: 10.0,
            positive: 100.0,
        }
    }
}

/// Binary focal loss against soft per-bucket labels:
/// `sum_k -w+ l_k (1-p_k)^2 log p_k - (1-l_k) p_k^2 log(1-p_k)`.
pub fn focal_binary_soft(p_hat: &[f64], labels: &RotationSoftLabels, w_plus: f64) -> Result<f64> {
    if p_hat.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} labels",
            p_hat.len(),
            labels.len()
        )));
    }
    let mut loss = 0.0;
    for (&p, &l) in p_hat.iter().zip(labels.values()) {
        let p = clamp_prob(p);
        loss += -w_plus * l * (1.0 - p).powi(2) * p.ln() - (1.0 - l) * p * p * (1.0 - p).ln();
    }
    Ok(loss)
}

/// Gradient of [`focal_binary_soft`] with respect to each prediction.
pub fn focal_binary_soft_grad(
    p_hat: &[f64],
    labels: &RotationSoftLabels,
    w_plus: f64,
) -> Result<Vec<f64>> {
    if p_hat.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} labels",
            p_hat.len(),
            labels.len()
        )));
    }
    Ok(p_hat
        .iter()
        .zip(labels.values())
        .map(|(&p, &l)| {
            let p = clamp_prob(p);
            let one_m = 1.0 - p;
            -w_plus * l * (one_m * one_m / p - 2.0 * one_m * p.ln())
                - (1.0 - l) * (2.0 * p * one_m.ln() - p * p / one_m)
        })
        .collect())
}

/// Multi-class focal loss on the soft-label inner product:
/// `-(1 - s)^2 log s` with `s = sum_j l_j p_j`.
pub fn focal_multiclass(p_hat: &[f64], labels: &[f64]) -> Result<f64> {
    let s = multiclass_inner(p_hat, labels)?;
    Ok(-(1.0 - s).powi(2) * s.ln())
}

/// Gradient of [`focal_multiclass`] with respect to each prediction.
pub fn focal_multiclass_grad(p_hat: &[f64], labels: &[f64]) -> Result<Vec<f64>> {
    let s = multiclass_inner(p_hat, labels)?;
    let ds = 2.0 * (1.0 - s) * s.ln() - (1.0 - s).powi(2) / s;
    Ok(labels.iter().map(|&l| l * ds).collect())
}

fn multiclass_inner(p_hat: &[f64], labels: &[f64]) -> Result<f64> {
    if p_hat.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} labels",
            p_hat.len(),
            labels.len()
        )));
    }
    if p_hat.is_empty() {
        return Err(Error::EmptyInput("focal_multiclass on empty input".into()));
    }
    let sum: f64 = p_hat.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::NotNormalized(sum));
    }
    let s: f64 = p_hat.iter().zip(labels).map(|(&p, &l)| p * l).sum();
    Ok(clamp_prob(s))
}

/// Mean binary cross entropy between a predicted and a binary mask.
pub fn mask_bce(pred: &[f64], gt: &[f64]) -> Result<f64> {
    check_mask_shapes(pred, gt)?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    for (&p, &g) in pred.iter().zip(gt) {
        let p = clamp_prob(p);
        loss -= g * p.ln() + (1.0 - g) * (1.0 - p).ln();
    }
    Ok(loss / n)
}

/// Gradient of [`mask_bce`] with respect to each predicted pixel.
pub fn mask_bce_grad(pred: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
    check_mask_shapes(pred, gt)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let p = clamp_prob(p);
            (-g / p + (1.0 - g) / (1.0 - p)) / n
        })
        .collect())
}

fn check_mask_shapes(pred: &[f64], gt: &[f64]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted pixels vs {} ground-truth pixels",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("mask_bce on empty masks".into()));
    }
    Ok(())
}

/// Disentangled rotation regression loss: the symmetry-aware pose distance
/// between the composed rotation and the annotation, translation held at
/// the ground truth.
pub fn regression_loss_rot(
    delta_rot: &Rotation,
    coarse_rot: &Rotation,
    gt: &Pose,
    mesh: &Mesh,
    sym: &SymmetrySet,
) -> f64 {
    let composed = Pose::new(delta_rot.compose(coarse_rot), gt.translation);
    pose_distance_symm(&composed, gt, mesh, sym)
}

/// Which translation component a disentangled loss substitutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransComponent {
    Xy,
    Z,
}

/// Disentangled translation regression loss: substitute only the predicted
/// `xy` (or `z`) SITE component into the ground-truth pose, decode back to
/// metric translation, and measure the symmetry-aware distance.
pub fn regression_loss_trans(
    component: TransComponent,
    pred_site: &SiteCoords,
    gt: &Pose,
    bbox: &BBox,
    cam: &CameraIntrinsics,
    mesh: &Mesh,
    sym: &SymmetrySet,
) -> Result<f64> {
    let gt_site = site_encode(&gt.translation, bbox, cam)?;
    let substituted = match component {
        TransComponent::Xy => SiteCoords {
            x: pred_site.x,
            y: pred_site.y,
            z: gt_site.z,
        },
        TransComponent::Z => SiteCoords {
            x: gt_site.x,
            y: gt_site.y,
            z: pred_site.z,
        },
    };
    let t = site_decode(&substituted, bbox, cam)?;
    let candidate = Pose::new(gt.rotation, t);
    Ok(pose_distance_symm(&candidate, gt, mesh, sym))
}

/// Weighted sum of the seven loss terms, in the order
/// (cls rot, cls xy, cls z, reg rot, reg xy, reg z, mask).
pub fn total_loss(terms: &[f64; 7], w: &LossWeights) -> Result<f64> {
    if let Some(bad) = terms.iter().find(|t| !t.is_finite()) {
        return Err(Error::NonFinite(format!("loss term {bad}")));
    }
    let weights = [
        w.cls_rot, w.cls_xy, w.cls_z, w.reg_rot, w.reg_xy, w.reg_z, w.mask,
    ];
    let total = terms.iter().zip(weights).map(|(t, w)| t * w).sum::<f64>();
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("total loss {total}")));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlabels::SMOOTH_L1_BETA_MM;
    use crate::testutil::prism36;
    use nalgebra::Vector3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const FD_STEP: f64 = 1e-5;
    const FD_REL_TOL: f64 = 1e-4;

    /// Central finite differences of `f` at `x`, one coordinate at a time.
    fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let mut grad = Vec::with_capacity(x.len());
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + FD_STEP;
            let hi = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let lo = f(&probe);
            probe[i] = x[i];
            grad.push((hi - lo) / (2.0 * FD_STEP));
        }
        grad
    }

    fn assert_grad_close(analytic: &[f64], numeric: &[f64]) {
        for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let scale = a.abs().max(n.abs()).max(1e-8);
            assert!(
                (a - n).abs() / scale < FD_REL_TOL,
                "component {i}: analytic {a} vs numeric {n}"
            );
        }
    }

    #[test]
    fn focal_binary_single_positive_bucket() {
        let labels = RotationSoftLabels::new(vec![1.0]).unwrap();
        let loss = focal_binary_soft(&[0.9], &labels, 100.0).unwrap();
        let expected = -100.0 * 0.01 * 0.9f64.ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        assert!((expected - 0.10536).abs() < 1e-5);
    }

    #[test]
    fn focal_binary_negative_bucket_vanishes_at_zero() {
        // l ~ 0, p -> 0: the negative term p^2 log(1-p) -> 0
        let labels = RotationSoftLabels::new(vec![1e-300]).unwrap();
        let loss = focal_binary_soft(&[0.0], &labels, 100.0).unwrap();
        assert!(loss.abs() < 1e-10, "{loss}");
    }

    #[test]
    fn focal_binary_shape_mismatch() {
        let labels = RotationSoftLabels::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            focal_binary_soft(&[0.5], &labels, 100.0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn focal_binary_gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(1..=16);
            let labels =
                RotationSoftLabels::new((0..n).map(|_| rng.gen_range(1e-6..=1.0)).collect())
                    .unwrap();
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
            let analytic = focal_binary_soft_grad(&p, &labels, 100.0).unwrap();
            let numeric = finite_difference(|x| focal_binary_soft(x, &labels, 100.0).unwrap(), &p);
            assert_grad_close(&analytic, &numeric);
        }
    }

    #[test]
    fn focal_binary_monotonic_in_prediction() {
        let pos = RotationSoftLabels::new(vec![1.0]).unwrap();
        let neg = RotationSoftLabels::new(vec![1e-12]).unwrap();
        let mut prev_pos = f64::INFINITY;
        let mut prev_neg = -f64::INFINITY;
        for i in 1..99 {
            let p = i as f64 / 100.0;
            let lp = focal_binary_soft(&[p], &pos, 100.0).unwrap();
            let ln = focal_binary_soft(&[p], &neg, 100.0).unwrap();
            assert!(lp < prev_pos, "positive loss must decrease in p");
            assert!(ln > prev_neg, "negative loss must increase in p");
            prev_pos = lp;
            prev_neg = ln;
        }
    }

    #[test]
    fn focal_multiclass_one_hot_example() {
        let mut labels = vec![0.0; 5];
        labels[2] = 1.0;
        let mut p = vec![0.05; 5];
        p[2] = 0.8;
        let loss = focal_multiclass(&p, &labels).unwrap();
        let expected = -(0.2f64).powi(2) * 0.8f64.ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((expected - 0.008926).abs() < 1e-6);
    }

    #[test]
    fn focal_multiclass_vanishes_at_perfect_match() {
        let labels = vec![0.0, 1.0];
        let p = vec![0.0, 1.0];
        let loss = focal_multiclass(&p, &labels).unwrap();
        assert!(loss.abs() < 1e-10, "{loss}");
    }

    #[test]
    fn focal_multiclass_rejects_unnormalized() {
        let labels = vec![1.0, 0.0];
        assert!(matches!(
            focal_multiclass(&[0.9, 0.2], &labels),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn focal_multiclass_gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(32);
        for _ in 0..100 {
            let n = rng.gen_range(2..=32);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let labels: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let analytic = focal_multiclass_grad(&p, &labels).unwrap();
            let numeric = finite_difference(|x| focal_multiclass(x, &labels).unwrap(), &p);
            assert_grad_close(&analytic, &numeric);
        }
    }

    #[test]
    fn mask_bce_examples() {
        // predictions equal to the (clamped) binary mask: essentially zero
        let gt = vec![0.0, 1.0, 1.0, 0.0];
        let near = mask_bce(&gt, &gt).unwrap();
        assert!(near < 1e-5, "{near}");
        // uniform 0.5 prediction: ln 2 regardless of the mask
        let half = vec![0.5; 4];
        let loss = mask_bce(&half, &gt).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(matches!(
            mask_bce(&half, &gt[..3]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn mask_bce_gradient_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(33);
        for _ in 0..100 {
            let n = rng.gen_range(1..=64);
            let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
            let gt: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.5))).collect();
            let analytic = mask_bce_grad(&pred, &gt).unwrap();
            let numeric = finite_difference(|x| mask_bce(x, &gt).unwrap(), &pred);
            assert_grad_close(&analytic, &numeric);
        }
    }

    fn test_mesh() -> Mesh {
        Mesh::new(
            vec![
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(30.0, 0.0, 0.0),
                Vector3::new(0.0, 20.0, 0.0),
                Vector3::new(0.0, 0.0, 10.0),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn regression_rot_zero_at_ground_truth() {
        let mesh = test_mesh();
        let sym = SymmetrySet::identity();
        let coarse = Rotation::from_axis_angle(&Vector3::y_axis(), 0.5);
        let gt_rot = Rotation::from_axis_angle(&Vector3::y_axis(), 0.7);
        let delta = gt_rot.compose(&coarse.inverse());
        let gt = Pose::new(gt_rot, Vector3::new(0.0, 0.0, 900.0));
        let loss = regression_loss_rot(&delta, &coarse, &gt, &mesh, &sym);
        assert!(loss < 1e-12, "{loss}");
    }

    #[test]
    fn regression_rot_zero_up_to_symmetry() {
        let mesh = prism36(20.0, 15.0);
        let sym = SymmetrySet::discretized_axis(&Vector3::z(), &Vector3::zeros(), 36).unwrap();
        let gt_rot = Rotation::from_axis_angle(&Vector3::x_axis(), 0.4);
        let gt = Pose::new(gt_rot, Vector3::new(0.0, 0.0, 900.0));
        let step = sym.transforms()[3].rotation;
        // predicted rotation differs from gt by an object symmetry
        let delta = gt_rot.compose(&step).compose(&gt_rot.inverse());
        let loss = regression_loss_rot(&delta, &gt_rot, &gt, &mesh, &sym);
        assert!(loss < 1e-9, "{loss}");
    }

    #[test]
    fn regression_rot_equals_pose_distance_oracle() {
        let mesh = test_mesh();
        let sym = SymmetrySet::identity();
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..50 {
            let delta = Rotation::random(&mut rng);
            let coarse = Rotation::random(&mut rng);
            let gt = Pose::new(Rotation::random(&mut rng), Vector3::new(3.0, -2.0, 700.0));
            let loss = regression_loss_rot(&delta, &coarse, &gt, &mesh, &sym);
            let oracle = pose_distance_symm(
                &Pose::new(delta.compose(&coarse), gt.translation),
                &gt,
                &mesh,
                &sym,
            );
            assert_eq!(loss, oracle);
        }
    }

    fn trans_setup() -> (BBox, CameraIntrinsics, Pose) {
        let cam = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let bbox = BBox::new(300.0, 250.0, 128.0, 2.0).unwrap();
        let gt = Pose::new(
            Rotation::from_axis_angle(&Vector3::z_axis(), 0.2),
            Vector3::new(20.0, -10.0, 1000.0),
        );
        (bbox, cam, gt)
    }

    #[test]
    fn regression_trans_zero_at_ground_truth_components() {
        let (bbox, cam, gt) = trans_setup();
        let mesh = test_mesh();
        let sym = SymmetrySet::identity();
        let gt_site = site_encode(&gt.translation, &bbox, &cam).unwrap();
        for component in [TransComponent::Xy, TransComponent::Z] {
            let loss =
                regression_loss_trans(component, &gt_site, &gt, &bbox, &cam, &mesh, &sym).unwrap();
            assert!(loss < 1e-9, "{loss}");
        }
    }

    #[test]
    fn regression_trans_xy_offset_on_point_mass() {
        // single-vertex mesh: the loss is exactly smoothL1 of the metric
        // offset induced by the site-coordinate error
        let (bbox, cam, gt) = trans_setup();
        let mesh = Mesh::new(vec![Vector3::zeros()], vec![]).unwrap();
        let sym = SymmetrySet::identity();
        let gt_site = site_encode(&gt.translation, &bbox, &cam).unwrap();
        let delta = 0.05;
        let pred = SiteCoords {
            x: gt_site.x + delta,
            y: gt_site.y,
            z: gt_site.z,
        };
        let loss = regression_loss_trans(TransComponent::Xy, &pred, &gt, &bbox, &cam, &mesh, &sym)
            .unwrap();
        let metric_offset = delta * bbox.size * gt.translation.z / cam.fx;
        let expected = metric_offset - SMOOTH_L1_BETA_MM / 2.0;
        assert!((loss - expected).abs() < 1e-9, "{loss} vs {expected}");
    }

    #[test]
    fn regression_trans_rejects_invalid_depth() {
        let (bbox, cam, gt) = trans_setup();
        let mesh = test_mesh();
        let pred = SiteCoords {
            x: 0.0,
            y: 0.0,
            z: -1.0,
        };
        assert!(matches!(
            regression_loss_trans(
                TransComponent::Z,
                &pred,
                &gt,
                &bbox,
                &cam,
                &mesh,
                &SymmetrySet::identity()
            ),
            Err(Error::InvalidDepth(_))
        ));
    }

    #[test]
    fn total_loss_default_weights() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&[0.0; 7], &w).unwrap(), 0.0);
        let unit = total_loss(&[1.0; 7], &w).unwrap();
        assert!((unit - 16.25).abs() < 1e-12, "{unit}");
        // linearity
        let terms = [0.3, 1.2, 0.9, 4.0, 0.1, 2.2, 0.5];
        let doubled: Vec<f64> = terms.iter().map(|t| 2.0 * t).collect();
        let doubled: [f64; 7] = doubled.try_into().unwrap();
        assert!(
            (total_loss(&doubled, &w).unwrap() - 2.0 * total_loss(&terms, &w).unwrap()).abs()
                < 1e-12
        );
        assert!(matches!(
            total_loss(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &w),
            Err(Error::NonFinite(_))
        ));
    }
}

//! Pose-error metrics and recall aggregation.
//!
//! MSSD and MSPD take the minimum over the object's symmetry set of the
//! worst-case vertex error (3D surface distance, respectively projected
//! pixel distance). VSD compares rendered depth images over the union of
//! the two coverage masks; this artifact assumes full visibility (no test
//! scene depth), which is exact on synthetic scenes. Recall aggregation
//! follows the BOP19 threshold grids.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::render::rasterize;
use crate::symlabels::{object_diameter, Mesh, SymmetrySet};

/// MSSD/VSD thresholds as fractions of the object diameter: 0.05 to 0.5.
pub fn diameter_fractions() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

/// MSPD thresholds in pixels before the resolution correction: 5 to 50.
pub fn mspd_base_thresholds() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 5.0).collect()
}

/// Maximum symmetry-aware surface distance in millimeters.
pub fn mssd(est: &Pose, gt: &Pose, mesh: &Mesh, sym: &SymmetrySet) -> f64 {
    let mut best = f64::INFINITY;
    for s in sym.transforms() {
        let mut worst = 0.0f64;
        for x in mesh.vertices() {
            let e = est.transform_point(x);
            let g = gt.transform_point(&s.apply(x));
            worst = worst.max((e - g).norm());
        }
        best = best.min(worst);
    }
    best
}

/// Maximum symmetry-aware projection distance in pixels.
///
/// Infinite when any vertex lands behind the camera under either pose.
pub fn mspd(est: &Pose, gt: &Pose, mesh: &Mesh, sym: &SymmetrySet, cam: &CameraIntrinsics) -> f64 {
    let project = |p: &Vector3<f64>| -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy))
    };
    let mut best = f64::INFINITY;
    for s in sym.transforms() {
        let mut worst = 0.0f64;
        let mut ok = true;
        for x in mesh.vertices() {
            let e = match project(&est.transform_point(x)) {
                Some(p) => p,
                None => {
                    ok = false;
                    break;
                }
            };
            let g = match project(&gt.transform_point(&s.apply(x))) {
                Some(p) => p,
                None => {
                    ok = false;
                    break;
                }
            };
            worst = worst.max(((e.0 - g.0).powi(2) + (e.1 - g.1).powi(2)).sqrt());
        }
        if ok {
            best = best.min(worst);
        }
    }
    best
}

/// Visible surface discrepancy at a single misalignment tolerance `tau`.
pub fn vsd(est: &Pose, gt: &Pose, mesh: &Mesh, cam: &CameraIntrinsics, tau: f64) -> Result<f64> {
    Ok(vsd_profile(est, gt, mesh, cam, &[tau])?[0])
}

/// VSD at several tolerances, sharing one render pair.
pub fn vsd_profile(
    est: &Pose,
    gt: &Pose,
    mesh: &Mesh,
    cam: &CameraIntrinsics,
    taus: &[f64],
) -> Result<Vec<f64>> {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let (d_est, m_est) = rasterize(mesh, est, cam, w, h);
    let (d_gt, m_gt) = rasterize(mesh, gt, cam, w, h);
    let mut union = 0usize;
    let mut diffs: Vec<f64> = Vec::new(); // |d_est - d_gt| on the intersection
    for i in 0..w * h {
        match (m_est.data()[i], m_gt.data()[i]) {
            (true, true) => {
                union += 1;
                diffs.push((d_est.data()[i] - d_gt.data()[i]).abs());
            }
            (true, false) | (false, true) => union += 1,
            (false, false) => {}
        }
    }
    if union == 0 {
        return Err(Error::EmptyRender);
    }
    Ok(taus
        .iter()
        .map(|&tau| {
            let ok = diffs.iter().filter(|&&d| d < tau).count();
            (union - ok) as f64 / union as f64
        })
        .collect())
}

/// Average distance of model points: exact pairing.
pub fn add(est: &Pose, gt: &Pose, mesh: &Mesh) -> f64 {
    let n = mesh.vertices().len() as f64;
    mesh.vertices()
        .iter()
        .map(|x| (est.transform_point(x) - gt.transform_point(x)).norm())
        .sum::<f64>()
        / n
}

/// Average distance of model points: closest-point pairing for symmetric
/// objects, accelerated by a uniform grid. Exact (never approximate).
pub fn add_s(est: &Pose, gt: &Pose, mesh: &Mesh) -> f64 {
    let gt_points: Vec<Vector3<f64>> = mesh
        .vertices()
        .iter()
        .map(|x| gt.transform_point(x))
        .collect();
    let index = PointGrid::build(&gt_points);
    let n = mesh.vertices().len() as f64;
    mesh.vertices()
        .iter()
        .map(|x| index.nearest_distance(&est.transform_point(x)))
        .sum::<f64>()
        / n
}

/// ADD or ADD-S depending on whether the object is tagged symmetric.
pub fn add_adds(est: &Pose, gt: &Pose, mesh: &Mesh, symmetric: bool) -> f64 {
    if symmetric {
        add_s(est, gt, mesh)
    } else {
        add(est, gt, mesh)
    }
}

/// Uniform spatial hash over points supporting exact nearest-neighbor
/// queries by expanding cell shells until no closer point can exist.
///
/// A point in a cell at Chebyshev shell distance `k` is at Euclidean
/// distance greater than `(k - 1) * cell`, so the scan stops as soon as the
/// best match beats that bound.
struct PointGrid {
    points: Vec<Vector3<f64>>,
    cells: BTreeMap<(i64, i64, i64), Vec<u32>>,
    origin: Vector3<f64>,
    cell: f64,
    key_lo: (i64, i64, i64),
    key_hi: (i64, i64, i64),
}

impl PointGrid {
    fn build(points: &[Vector3<f64>]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).norm().max(1e-9);
        let cell = extent / (points.len() as f64).cbrt().max(1.0);
        let mut cells: BTreeMap<(i64, i64, i64), Vec<u32>> = BTreeMap::new();
        let mut key_lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut key_hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let k = Self::key(p, &lo, cell);
            key_lo = (key_lo.0.min(k.0), key_lo.1.min(k.1), key_lo.2.min(k.2));
            key_hi = (key_hi.0.max(k.0), key_hi.1.max(k.1), key_hi.2.max(k.2));
            cells.entry(k).or_default().push(i as u32);
        }
        PointGrid {
            points: points.to_vec(),
            cells,
            origin: lo,
            cell,
            key_lo,
            key_hi,
        }
    }

    fn key(p: &Vector3<f64>, origin: &Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            ((p.x - origin.x) / cell).floor() as i64,
            ((p.y - origin.y) / cell).floor() as i64,
            ((p.z - origin.z) / cell).floor() as i64,
        )
    }

    fn nearest_distance(&self, q: &Vector3<f64>) -> f64 {
        let center = Self::key(q, &self.origin, self.cell);
        let axis_reach = |c: i64, lo: i64, hi: i64| (c - lo).abs().max((hi - c).abs());
        let max_ring = axis_reach(center.0, self.key_lo.0, self.key_hi.0)
            .max(axis_reach(center.1, self.key_lo.1, self.key_hi.1))
            .max(axis_reach(center.2, self.key_lo.2, self.key_hi.2));
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            if best <= (ring - 1) as f64 * self.cell {
                break;
            }
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        if let Some(ids) =
                            self.cells
                                .get(&(center.0 + dx, center.1 + dy, center.2 + dz))
                        {
                            for &i in ids {
                                best = best.min((self.points[i as usize] - q).norm());
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Exact area under the accuracy-versus-threshold step curve, in percent.
pub fn auc(errors: &[f64], max_threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("auc over no errors".into()));
    }
    if max_threshold.is_nan() || max_threshold <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "auc threshold {max_threshold} must be > 0"
        )));
    }
    let n = errors.len() as f64;
    let sum: f64 = errors
        .iter()
        .map(|&e| (1.0 - e / max_threshold).max(0.0))
        .sum();
    Ok(100.0 * sum / n)
}

/// One matched estimate with everything needed to score it.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub scene_id: u32,
    pub im_id: u32,
    pub obj_id: u32,
    pub est: Pose,
    pub score: f64,
    pub gt: Pose,
    pub mesh: Arc<Mesh>,
    pub sym: Arc<SymmetrySet>,
    pub cam: CameraIntrinsics,
}

/// Recall at one threshold setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRecall {
    pub threshold: f64,
    pub recall: f64,
}

/// VSD recall at one (tolerance fraction, error threshold) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VsdRecall {
    pub tau_fraction: f64,
    pub error_threshold: f64,
    pub recall: f64,
}

/// Per-object average recalls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectRecall {
    pub ar_vsd: f64,
    pub ar_mssd: f64,
    pub ar_mspd: f64,
    pub ar: f64,
    pub records: usize,
}

/// The aggregated evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct RecallReport {
    pub ar_vsd: f64,
    pub ar_mssd: f64,
    pub ar_mspd: f64,
    pub ar: f64,
    pub vsd_recalls: Vec<VsdRecall>,
    pub mssd_recalls: Vec<ThresholdRecall>,
    pub mspd_recalls: Vec<ThresholdRecall>,
    pub per_object: BTreeMap<u32, ObjectRecall>,
}

struct RecordErrors {
    obj_id: u32,
    mssd: f64,
    mspd: f64,
    /// VSD error at each diameter fraction tolerance.
    vsd: Vec<f64>,
    diameter: f64,
    mspd_scale: f64,
}

/// Score every record and aggregate recalls over the BOP19 threshold grids.
///
/// MSSD thresholds are `{0.05..0.5} * diameter`; MSPD thresholds are
/// `{5..50} * width/640` pixels; VSD crosses tolerance fractions
/// `{0.05..0.5} * diameter` with error thresholds `{0.05..0.5}`. Records
/// are ordered by (scene, image, object) before aggregation so the result
/// does not depend on input order or parallel scheduling.
pub fn average_recall(records: &[EvalRecord]) -> Result<RecallReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no evaluation records".into()));
    }
    let mut sorted: Vec<&EvalRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.scene_id, r.im_id, r.obj_id));

    let mut diameters: BTreeMap<u32, f64> = BTreeMap::new();
    for r in &sorted {
        if let std::collections::btree_map::Entry::Vacant(e) = diameters.entry(r.obj_id) {
            e.insert(object_diameter(&r.mesh)?);
        }
    }

    let fractions = diameter_fractions();
    let errors: Vec<RecordErrors> = sorted
        .par_iter()
        .map(|r| -> Result<RecordErrors> {
            let diameter = diameters[&r.obj_id];
            let taus: Vec<f64> = fractions.iter().map(|f| f * diameter).collect();
            Ok(RecordErrors {
                obj_id: r.obj_id,
                mssd: mssd(&r.est, &r.gt, &r.mesh, &r.sym),
                mspd: mspd(&r.est, &r.gt, &r.mesh, &r.sym, &r.cam),
                vsd: vsd_profile(&r.est, &r.gt, &r.mesh, &r.cam, &taus)?,
                diameter,
                mspd_scale: r.cam.width as f64 / 640.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = aggregate(&errors, &fractions);
    Ok(report)
}

fn aggregate(errors: &[RecordErrors], fractions: &[f64]) -> RecallReport {
    let recall_over = |pass: &dyn Fn(&RecordErrors) -> bool, set: &[&RecordErrors]| -> f64 {
        set.iter().filter(|e| pass(e)).count() as f64 / set.len() as f64
    };
    let all: Vec<&RecordErrors> = errors.iter().collect();

    let build = |set: &[&RecordErrors]| -> (
        f64,
        f64,
        f64,
        Vec<VsdRecall>,
        Vec<ThresholdRecall>,
        Vec<ThresholdRecall>,
    ) {
        let mssd_recalls: Vec<ThresholdRecall> = fractions
            .iter()
            .map(|&f| ThresholdRecall {
                threshold: f,
                recall: recall_over(&|e| e.mssd < f * e.diameter, set),
            })
            .collect();
        let mspd_recalls: Vec<ThresholdRecall> = mspd_base_thresholds()
            .iter()
            .map(|&t| ThresholdRecall {
                threshold: t,
                recall: recall_over(&|e| e.mspd < t * e.mspd_scale, set),
            })
            .collect();
        let mut vsd_recalls = Vec::with_capacity(fractions.len() * fractions.len());
        for (ti, &tau_fraction) in fractions.iter().enumerate() {
            for &error_threshold in fractions {
                vsd_recalls.push(VsdRecall {
                    tau_fraction,
                    error_threshold,
                    recall: recall_over(&|e| e.vsd[ti] < error_threshold, set),
                });
            }
        }
        let ar_vsd = mean(vsd_recalls.iter().map(|r| r.recall));
        let ar_mssd = mean(mssd_recalls.iter().map(|r| r.recall));
        let ar_mspd = mean(mspd_recalls.iter().map(|r| r.recall));
        (
            ar_vsd,
            ar_mssd,
            ar_mspd,
            vsd_recalls,
            mssd_recalls,
            mspd_recalls,
        )
    };

    let (ar_vsd, ar_mssd, ar_mspd, vsd_recalls, mssd_recalls, mspd_recalls) = build(&all);

    let mut per_object = BTreeMap::new();
    let mut object_ids: Vec<u32> = errors.iter().map(|e| e.obj_id).collect();
    object_ids.sort_unstable();
    object_ids.dedup();
    for obj in object_ids {
        let subset: Vec<&RecordErrors> = errors.iter().filter(|e| e.obj_id == obj).collect();
        let (v, s, p, _, _, _) = build(&subset);
        per_object.insert(
            obj,
            ObjectRecall {
                ar_vsd: v,
                ar_mssd: s,
                ar_mspd: p,
                ar: (v + s + p) / 3.0,
                records: subset.len(),
            },
        );
    }

    RecallReport {
        ar_vsd,
        ar_mssd,
        ar_mspd,
        ar: (ar_vsd + ar_mssd + ar_mspd) / 3.0,
        vsd_recalls,
        mssd_recalls,
        mspd_recalls,
        per_object,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

impl RecallReport {
    /// Pretty JSON with deterministic key order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV mirror: `section,key,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("section,key,value\n");
        for (key, value) in [
            ("ar_vsd", self.ar_vsd),
            ("ar_mssd", self.ar_mssd),
            ("ar_mspd", self.ar_mspd),
            ("ar", self.ar),
        ] {
            out.push_str(&format!("summary,{key},{value}\n"));
        }
        for r in &self.mssd_recalls {
            out.push_str(&format!("recall_mssd,{},{}\n", r.threshold, r.recall));
        }
        for r in &self.mspd_recalls {
            out.push_str(&format!("recall_mspd,{},{}\n", r.threshold, r.recall));
        }
        for r in &self.vsd_recalls {
            out.push_str(&format!(
                "recall_vsd,{}:{},{}\n",
                r.tau_fraction, r.error_threshold, r.recall
            ));
        }
        for (obj, r) in &self.per_object {
            out.push_str(&format!("ar_object,{obj},{}\n", r.ar));
        }
        out
    }
}

/// Highest-classification-score candidate; ties keep the earliest.
pub fn tta_select(candidates: &[(Pose, f64)]) -> Result<&Pose> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("tta_select over no candidates".into()));
    }
    let mut best = 0usize;
    for (i, (_, score)) in candidates.iter().enumerate() {
        if *score > candidates[best].1 {
            best = i;
        }
    }
    Ok(&candidates[best].0)
}

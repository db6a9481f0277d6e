//! Object meshes, symmetry sets, the symmetry-aware pose distance, and the
//! soft classification labels derived from it.
//!
//! A rotation bucket's label is `exp(-rho / sigma)` where `rho` is the
//! minimum over object symmetries of the mean smooth-L1 vertex displacement
//! between the annotated pose and the bucket's prototype pose. Labels are
//! per-bucket binary probabilities and are deliberately not normalized to
//! sum to one.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, SiteCoords};
use crate::so3grid::SO3Grid;

/// Smooth-L1 transition point in millimeters.
pub const SMOOTH_L1_BETA_MM: f64 = 1.0;
/// Meshes with more vertices than this are stride-subsampled for the pose
/// distance so label generation stays fast and reproducible.
pub const POSE_DISTANCE_MAX_VERTICES: usize = 10_000;
/// Default fraction of the object diameter used as the label bandwidth.
pub const DEFAULT_SIGMA_FRACTION: f64 = 0.03;

/// Triangle mesh with vertices in millimeters.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::TooFewVertices { needed: 1, got: 0 });
        }
        if vertices
            .iter()
            .any(|v| !v.x.is_finite() || !v.y.is_finite() || !v.z.is_finite())
        {
            return Err(Error::NonFinite("mesh vertex coordinate".into()));
        }
        let n = vertices.len() as u32;
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::ParseError {
                    location: format!("triangle {t}"),
                    message: format!("vertex index out of range (mesh has {n} vertices)"),
                });
            }
        }
        Ok(Mesh {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Deterministic stride subsample used by the pose distance.
    pub(crate) fn distance_vertices(&self) -> Vec<Vector3<f64>> {
        if self.vertices.len() <= POSE_DISTANCE_MAX_VERTICES {
            return self.vertices.clone();
        }
        let stride = self.vertices.len().div_ceil(POSE_DISTANCE_MAX_VERTICES);
        self.vertices.iter().step_by(stride).copied().collect()
    }
}

/// One rigid symmetry transform: `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryTransform {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl SymmetryTransform {
    pub fn identity() -> Self {
        SymmetryTransform {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate(p) + self.translation
    }
}

/// The set of rigid transforms an object is indistinguishable under.
/// Always contains the identity.
#[derive(Debug, Clone)]
pub struct SymmetrySet {
    transforms: Vec<SymmetryTransform>,
}

impl SymmetrySet {
    /// Identity-only set (asymmetric object).
    pub fn identity() -> Self {
        SymmetrySet {
            transforms: vec![SymmetryTransform::identity()],
        }
    }

    /// Identity plus the given transforms, in order.
    pub fn with_transforms(extra: Vec<SymmetryTransform>) -> Self {
        let mut set = SymmetrySet::identity();
        extra.into_iter().for_each(|t| set.push_transform(t));
        set
    }

    pub fn push_transform(&mut self, transform: SymmetryTransform) {
        self.transforms.push(transform);
    }

    /// Identity plus `steps` rotations about `axis` through `offset`,
    /// at angles `2*pi*k/steps` for `k = 1 .. steps`.
    pub fn discretized_axis(
        axis: &Vector3<f64>,
        offset: &Vector3<f64>,
        steps: u32,
    ) -> Result<Self> {
        let mut set = SymmetrySet::identity();
        set.extend_discretized_axis(axis, offset, steps)?;
        Ok(set)
    }

    pub(crate) fn extend_discretized_axis(
        &mut self,
        axis: &Vector3<f64>,
        offset: &Vector3<f64>,
        steps: u32,
    ) -> Result<()> {
        if steps == 0 {
            return Err(Error::InvalidParam("symmetry steps must be >= 1".into()));
        }
        let norm = axis.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::DegenerateInput("symmetry axis has zero norm".into()));
        }
        let unit = nalgebra::Unit::new_normalize(*axis);
        for k in 1..=steps {
            let angle = std::f64::consts::TAU * (k as f64) / (steps as f64);
            let rotation = Rotation::from_axis_angle(&unit, angle);
            // rotation about a line through `offset`
            let translation = offset - rotation.rotate(offset);
            self.transforms.push(SymmetryTransform {
                rotation,
                translation,
            });
        }
        Ok(())
    }

    pub fn transforms(&self) -> &[SymmetryTransform] {
        &self.transforms
    }

    pub fn len(&self) -> usize {
        self.transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transforms.is_empty()
    }
}

/// Farthest pairwise vertex distance in millimeters.
pub fn object_diameter(mesh: &Mesh) -> Result<f64> {
    let v = mesh.vertices();
    if v.len() < 2 {
        return Err(Error::TooFewVertices {
            needed: 2,
            got: v.len(),
        });
    }
    let mut best = 0.0f64;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            let d2 = (v[i] - v[j]).norm_squared();
            if d2 > best {
                best = d2;
            }
        }
    }
    Ok(best.sqrt())
}

fn smooth_l1(e: f64, beta: f64) -> f64 {
    if e < beta {
        e * e / (2.0 * beta)
    } else {
        e - beta / 2.0
    }
}

/// Symmetry-aware distance between two poses of the same object, in
/// millimeters.
///
/// Minimum over the symmetry set of the mean smooth-L1 displacement of the
/// mesh vertices: `min_S mean_x smoothL1(|T1 x - T2 S x|)`.
pub fn pose_distance_symm(p1: &Pose, p2: &Pose, mesh: &Mesh, sym: &SymmetrySet) -> f64 {
    let verts = mesh.distance_vertices();
    pose_distance_symm_on(p1, p2, &verts, sym)
}

fn pose_distance_symm_on(p1: &Pose, p2: &Pose, verts: &[Vector3<f64>], sym: &SymmetrySet) -> f64 {
    let reference: Vec<Vector3<f64>> = verts.iter().map(|v| p1.transform_point(v)).collect();
    let mut best = f64::INFINITY;
    for s in sym.transforms() {
        let mut acc = 0.0;
        for (v, r) in verts.iter().zip(&reference) {
            let moved = p2.transform_point(&s.apply(v));
            acc += smooth_l1((moved - r).norm(), SMOOTH_L1_BETA_MM);
        }
        let mean = acc / verts.len() as f64;
        if mean < best {
            best = mean;
        }
    }
    best
}

/// Per-bucket rotation labels in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSoftLabels {
    values: Vec<f64>,
}

impl RotationSoftLabels {
    /// Wrap precomputed label values; each must lie in `(0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("rotation labels".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
            return Err(Error::InvalidParam(
                "rotation labels must lie in (0, 1]".into(),
            ));
        }
        Ok(RotationSoftLabels { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `exp(-rho(gt, prototype)/sigma)` for every prototype, translation held
/// at the annotated value on both sides.
pub fn rotation_soft_labels(
    gt: &Pose,
    grid: &SO3Grid,
    mesh: &Mesh,
    sym: &SymmetrySet,
    sigma: f64,
) -> Result<RotationSoftLabels> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidParam(format!("sigma {sigma} must be > 0")));
    }
    let verts = mesh.distance_vertices();
    let values = grid
        .prototypes()
        .iter()
        .map(|proto| {
            let candidate = Pose::new(*proto, gt.translation);
            let rho = pose_distance_symm_on(gt, &candidate, &verts, sym);
            (-rho / sigma).exp()
        })
        .collect();
    Ok(RotationSoftLabels { values })
}

/// Quantization grid over an interval: `bins` equal cells covering
/// `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinRange {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinRange {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || hi <= lo || bins == 0 {
            return Err(Error::InvalidParam(format!(
                "bad bin range [{lo}, {hi}) with {bins} bins"
            )));
        }
        Ok(BinRange { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    /// Bin containing `x`; `None` outside the range.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.bins - 1))
    }
}

/// Default in-crop quantization range for the two offset coordinates.
pub fn default_xy_range() -> BinRange {
    BinRange::new(-0.5, 0.5, 64).unwrap()
}

/// Default normalized-depth quantization range.
pub fn default_z_range() -> BinRange {
    BinRange::new(0.1, 10.0, 1000).unwrap()
}

/// Gaussian translation labels over the quantized SITE coordinates.
#[derive(Debug, Clone)]
pub struct TranslationSoftLabels {
    x_range: BinRange,
    y_range: BinRange,
    z_range: BinRange,
    /// row-major `[y_bin * nx + x_bin]`
    xy: Vec<f64>,
    z: Vec<f64>,
}

impl TranslationSoftLabels {
    pub fn xy(&self) -> &[f64] {
        &self.xy
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn xy_value(&self, x_bin: usize, y_bin: usize) -> f64 {
        self.xy[y_bin * self.x_range.bins + x_bin]
    }

    pub fn x_range(&self) -> BinRange {
        self.x_range
    }

    pub fn y_range(&self) -> BinRange {
        self.y_range
    }

    pub fn z_range(&self) -> BinRange {
        self.z_range
    }
}

/// Gaussian labels centered on the ground-truth SITE coordinates, with a
/// bandwidth of one bin width per axis.
pub fn translation_soft_labels(
    gt_site: &SiteCoords,
    xy_range: (BinRange, BinRange),
    z_range: BinRange,
) -> Result<TranslationSoftLabels> {
    let (x_range, y_range) = xy_range;
    for (name, range, value) in [
        ("tau_x", &x_range, gt_site.x),
        ("tau_y", &y_range, gt_site.y),
        ("tau_z", &z_range, gt_site.z),
    ] {
        if range.bin_of(value).is_none() {
            return Err(Error::OutOfRange(format!(
                "{name} = {value} outside [{}, {})",
                range.lo, range.hi
            )));
        }
    }
    let (sx, sy, sz) = (x_range.width(), y_range.width(), z_range.width());
    let mut xy = Vec::with_capacity(x_range.bins * y_range.bins);
    for yi in 0..y_range.bins {
        let dy = (y_range.center(yi) - gt_site.y) / sy;
        for xi in 0..x_range.bins {
            let dx = (x_range.center(xi) - gt_site.x) / sx;
            xy.push((-0.5 * (dx * dx + dy * dy)).exp());
        }
    }
    let z = (0..z_range.bins)
        .map(|zi| {
            let dz = (z_range.center(zi) - gt_site.z) / sz;
            (-0.5 * dz * dz).exp()
        })
        .collect();
    Ok(TranslationSoftLabels {
        x_range,
        y_range,
        z_range,
        xy,
        z,
    })
}

/// Argmax with ties broken to the lowest index.
pub fn hard_label(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::EmptyInput("hard_label on empty labels".into()));
    }
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic_angle;
    use crate::so3grid::so3_prototypes;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    use crate::testutil::{prism36, tetrahedron, unit_cube};

    #[test]
    fn diameter_of_unit_cube() {
        let d = object_diameter(&unit_cube()).unwrap();
        assert!((d - 3.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diameter_of_coincident_points_is_zero() {
        let mesh = Mesh::new(
            vec![Vector3::new(1.0, 2.0, 3.0), Vector3::new(1.0, 2.0, 3.0)],
            vec![],
        )
        .unwrap();
        assert_eq!(object_diameter(&mesh).unwrap(), 0.0);
    }

    #[test]
    fn diameter_needs_two_vertices() {
        let mesh = Mesh::new(vec![Vector3::zeros()], vec![]).unwrap();
        assert!(matches!(
            object_diameter(&mesh),
            Err(Error::TooFewVertices { .. })
        ));
    }

    #[test]
    fn diameter_matches_brute_force_on_random_clouds() {
        // the implementation is the O(n^2) scan; pin it against an
        // independently-written max fold
        let mut rng = StdRng::seed_from_u64(6);
        let vertices: Vec<Vector3<f64>> = (0..500)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-50.0..50.0),
                )
            })
            .collect();
        let mut expected = 0.0f64;
        for a in &vertices {
            for b in &vertices {
                expected = expected.max((a - b).norm());
            }
        }
        let mesh = Mesh::new(vertices, vec![]).unwrap();
        assert_eq!(object_diameter(&mesh).unwrap(), expected);
    }

    #[test]
    fn pose_distance_zero_for_equal_poses() {
        let mesh = tetrahedron();
        let pose = Pose::new(
            Rotation::from_axis_angle(&Vector3::y_axis(), 0.3),
            Vector3::new(10.0, -5.0, 800.0),
        );
        assert_eq!(
            pose_distance_symm(&pose, &pose, &mesh, &SymmetrySet::identity()),
            0.0
        );
    }

    #[test]
    fn pose_distance_zero_under_symmetry_step() {
        let mesh = prism36(20.0, 15.0);
        let sym = SymmetrySet::discretized_axis(&Vector3::z(), &Vector3::zeros(), 36).unwrap();
        let p1 = Pose::new(Rotation::identity(), Vector3::new(0.0, 0.0, 500.0));
        let step = Rotation::from_axis_angle(&Vector3::z_axis(), std::f64::consts::TAU / 36.0);
        let p2 = Pose::new(step, p1.translation);
        assert!(pose_distance_symm(&p1, &p2, &mesh, &sym) < 1e-9);
    }

    #[test]
    fn pose_distance_smooth_l1_of_constant_offset() {
        // every vertex displaced by exactly 10 mm -> smooth L1 gives 9.5
        let mesh = tetrahedron();
        let p1 = Pose::new(Rotation::identity(), Vector3::zeros());
        let p2 = Pose::new(Rotation::identity(), Vector3::new(10.0, 0.0, 0.0));
        let d = pose_distance_symm(&p1, &p2, &mesh, &SymmetrySet::identity());
        assert!((d - 9.5).abs() < 1e-12, "{d}");
    }

    #[test]
    fn rotation_labels_are_one_at_the_annotated_prototype() {
        let grid = so3_prototypes(1).unwrap();
        let mesh = tetrahedron();
        let sym = SymmetrySet::identity();
        let sigma = DEFAULT_SIGMA_FRACTION * object_diameter(&mesh).unwrap();
        for k in [0, 7, grid.len() - 1] {
            let gt = Pose::new(*grid.prototype(k), Vector3::new(0.0, 0.0, 600.0));
            let labels = rotation_soft_labels(&gt, &grid, &mesh, &sym, sigma).unwrap();
            assert_eq!(labels.values()[k], 1.0);
            assert_eq!(hard_label(labels.values()).unwrap(), k);
            assert!(labels.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        }
    }

    #[test]
    fn rotation_label_at_rho_equal_sigma_is_inv_e() {
        // single-vertex mesh at distance r from the origin: rotating by
        // angle a displaces it by 2 r sin(a/2); pick a so the smooth-L1
        // mean equals sigma
        let r = 100.0;
        let mesh = Mesh::new(vec![Vector3::new(r, 0.0, 0.0)], vec![]).unwrap();
        let sigma = 20.0;
        // displacement d solves d - beta/2 = sigma => d = sigma + 0.5
        let d = sigma + SMOOTH_L1_BETA_MM / 2.0;
        let angle = 2.0 * (d / (2.0 * r)).asin();
        let gt = Pose::new(Rotation::identity(), Vector3::new(0.0, 0.0, 500.0));
        let proto = Rotation::from_axis_angle(&Vector3::z_axis(), angle);
        let candidate = Pose::new(proto, gt.translation);
        let rho = pose_distance_symm(&gt, &candidate, &mesh, &SymmetrySet::identity());
        assert!((rho - sigma).abs() < 1e-9);
        let value = (-rho / sigma).exp();
        assert!((value - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation_labels_invariant_under_gt_symmetry() {
        let grid = so3_prototypes(1).unwrap();
        let mesh = prism36(20.0, 15.0);
        let sym = SymmetrySet::discretized_axis(&Vector3::z(), &Vector3::zeros(), 36).unwrap();
        let sigma = DEFAULT_SIGMA_FRACTION * object_diameter(&mesh).unwrap();
        let gt = Pose::new(
            Rotation::from_axis_angle(&Vector3::x_axis(), 0.7),
            Vector3::new(5.0, 2.0, 700.0),
        );
        let base = rotation_soft_labels(&gt, &grid, &mesh, &sym, sigma).unwrap();
        for s in sym.transforms().iter().step_by(7) {
            let composed = Pose::new(gt.rotation.compose(&s.rotation), gt.translation);
            let labels = rotation_soft_labels(&composed, &grid, &mesh, &sym, sigma).unwrap();
            for (a, b) in base.values().iter().zip(labels.values()) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn symmetry_equivalent_prototypes_share_labels() {
        // custom grid holding a rotation and its symmetry-composed copies
        let sym = SymmetrySet::discretized_axis(&Vector3::z(), &Vector3::zeros(), 36).unwrap();
        let mesh = prism36(20.0, 15.0);
        let base = Rotation::from_axis_angle(&Vector3::y_axis(), 0.9);
        let step = sym.transforms()[5].rotation;
        let protos = vec![
            base,
            base.compose(&step),
            Rotation::from_axis_angle(&Vector3::x_axis(), 2.0),
            base.compose(&step).compose(&step),
        ];
        let grid = SO3Grid::from_prototypes(protos);
        let nudge = Rotation::from_axis_angle(&Vector3::x_axis(), 0.05);
        let gt = Pose::new(base.compose(&nudge), Vector3::new(0.0, 0.0, 900.0));
        let sigma = DEFAULT_SIGMA_FRACTION * object_diameter(&mesh).unwrap();
        let labels = rotation_soft_labels(&gt, &grid, &mesh, &sym, sigma).unwrap();
        let v = labels.values();
        let spread = (v[0] - v[1]).abs().max((v[0] - v[3]).abs());
        assert!(spread < 1e-6, "spread {spread}");
        assert!((v[0] - v[2]).abs() > 1e-3, "unrelated bucket should differ");
    }

    #[test]
    fn larger_sigma_never_decreases_labels() {
        let grid = so3_prototypes(1).unwrap();
        let mesh = tetrahedron();
        let gt = Pose::new(
            Rotation::from_axis_angle(&Vector3::y_axis(), 1.2),
            Vector3::new(0.0, 0.0, 600.0),
        );
        let narrow =
            rotation_soft_labels(&gt, &grid, &mesh, &SymmetrySet::identity(), 5.0).unwrap();
        let wide = rotation_soft_labels(&gt, &grid, &mesh, &SymmetrySet::identity(), 15.0).unwrap();
        for (n, w) in narrow.values().iter().zip(wide.values()) {
            assert!(w + 1e-15 >= *n);
        }
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let grid = so3_prototypes(1).unwrap();
        let mesh = tetrahedron();
        let gt = Pose::identity();
        assert!(matches!(
            rotation_soft_labels(&gt, &grid, &mesh, &SymmetrySet::identity(), 0.0),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn translation_labels_peak_at_their_bin() {
        let x = default_xy_range();
        let z = default_z_range();
        let site = SiteCoords {
            x: x.center(10),
            y: x.center(40),
            z: z.center(250),
        };
        let labels = translation_soft_labels(&site, (x, x), z).unwrap();
        assert_eq!(labels.xy_value(10, 40), 1.0);
        assert_eq!(labels.z()[250], 1.0);
        assert_eq!(hard_label(labels.z()).unwrap(), 250);
        assert_eq!(hard_label(labels.xy()).unwrap(), 40 * 64 + 10);
        // one-bin offset in one axis
        assert!((labels.xy_value(11, 40) - (-0.5f64).exp()).abs() < 1e-12);
        assert!((labels.z()[251] - (-0.5f64).exp()).abs() < 1e-12);
        // symmetric around the peak
        assert_eq!(labels.xy_value(9, 40), labels.xy_value(11, 40));
        assert_eq!(labels.z()[249], labels.z()[251]);
    }

    #[test]
    fn translation_labels_argmax_is_the_containing_bin() {
        let mut rng = StdRng::seed_from_u64(12);
        let x = default_xy_range();
        let z = default_z_range();
        for _ in 0..100 {
            let site = SiteCoords {
                x: rng.gen_range(-0.5..0.5),
                y: rng.gen_range(-0.5..0.5),
                z: rng.gen_range(0.1..10.0),
            };
            let labels = translation_soft_labels(&site, (x, x), z).unwrap();
            let xi = x.bin_of(site.x).unwrap();
            let yi = x.bin_of(site.y).unwrap();
            assert_eq!(hard_label(labels.xy()).unwrap(), yi * 64 + xi);
            assert_eq!(hard_label(labels.z()).unwrap(), z.bin_of(site.z).unwrap());
        }
    }

    #[test]
    fn translation_labels_reject_out_of_range() {
        let x = default_xy_range();
        let z = default_z_range();
        let site = SiteCoords {
            x: 0.7,
            y: 0.0,
            z: 2.0,
        };
        assert!(matches!(
            translation_soft_labels(&site, (x, x), z),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn hard_label_rules() {
        assert_eq!(hard_label(&[0.0, 0.0, 1.0]).unwrap(), 2);
        // tie at 5 and 9 resolves low
        let mut v = vec![0.1; 12];
        v[5] = 0.9;
        v[9] = 0.9;
        assert_eq!(hard_label(&v).unwrap(), 5);
        assert!(matches!(hard_label(&[]), Err(Error::EmptyInput(_))));
        // brute-force parity on random vectors
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..200 {
            let v: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
            let oracle = v
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (i, &x)| {
                    if x > acc.1 {
                        (i, x)
                    } else {
                        acc
                    }
                })
                .0;
            assert_eq!(hard_label(&v).unwrap(), oracle);
        }
    }

    #[test]
    fn hard_label_of_exact_prototype_is_that_bucket() {
        let grid = so3_prototypes(1).unwrap();
        let mesh = tetrahedron();
        let sigma = DEFAULT_SIGMA_FRACTION * object_diameter(&mesh).unwrap();
        for k in (0..grid.len()).step_by(9) {
            let gt = Pose::new(*grid.prototype(k), Vector3::new(0.0, 0.0, 500.0));
            let labels =
                rotation_soft_labels(&gt, &grid, &mesh, &SymmetrySet::identity(), sigma).unwrap();
            assert_eq!(hard_label(labels.values()).unwrap(), k);
        }
    }

    #[test]
    fn oversized_meshes_subsample_deterministically() {
        let vertices: Vec<Vector3<f64>> = (0..25_000)
            .map(|i| Vector3::new(i as f64, (i % 7) as f64, 0.0))
            .collect();
        let mesh = Mesh::new(vertices, vec![]).unwrap();
        let a = mesh.distance_vertices();
        let b = mesh.distance_vertices();
        assert!(a.len() <= POSE_DISTANCE_MAX_VERTICES);
        assert_eq!(a, b);
        assert_eq!(a[0], mesh.vertices()[0]);
        // stride 3 over 25k vertices
        assert_eq!(a[1], mesh.vertices()[3]);
    }

    #[test]
    fn symmetry_set_always_contains_identity() {
        let set = SymmetrySet::discretized_axis(&Vector3::z(), &Vector3::zeros(), 36).unwrap();
        assert_eq!(set.len(), 37);
        let id = &set.transforms()[0];
        assert!(geodesic_angle(&id.rotation, &Rotation::identity()) == 0.0);
        assert_eq!(id.translation, Vector3::zeros());
    }
}

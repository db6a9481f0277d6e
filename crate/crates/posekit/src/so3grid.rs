//! Uniform partition of SO(3) into rotation buckets.
//!
//! The sphere is pixelized with the equal-area HEALPix scheme (RING
//! ordering); each pixel center is lifted to a set of rotations through the
//! Hopf fibration by sweeping an in-plane angle. With `m2 = 12 * n_side^2`
//! out-of-plane centers and `m1 = floor(sqrt(pi * m2))` in-plane steps the
//! bucket count is `K = m2 * m1`, giving 576 / 1944 / 4608 buckets for
//! `n_side` 2 / 3 / 4.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Rotation;

/// A point on the unit sphere: colatitude and longitude in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereCoord {
    pub theta: f64,
    pub phi: f64,
}

/// HEALPix pixel centers of the sphere, RING ordering.
#[derive(Debug, Clone)]
pub struct S2Grid {
    n_side: u32,
    centers: Vec<SphereCoord>,
}

/// RING-scheme HEALPix pixel centers: `12 * n_side^2` equal-area pixels.
pub fn healpix_centers(n_side: u32) -> Result<S2Grid> {
    if n_side < 1 {
        return Err(Error::InvalidParam("n_side must be >= 1".into()));
    }
    let n = n_side as f64;
    let mut centers = Vec::with_capacity(12 * (n_side * n_side) as usize);
    // north polar cap: ring i has 4i pixels
    for i in 1..n_side {
        let fi = i as f64;
        let z = 1.0 - fi * fi / (3.0 * n * n);
        for j in 0..4 * i {
            centers.push(SphereCoord {
                theta: z.acos(),
                phi: (PI / (2.0 * fi)) * (j as f64 + 0.5),
            });
        }
    }
    // equatorial belt: rings n_side ..= 3*n_side, 4*n_side pixels each,
    // every other ring shifted by half a step
    for i in n_side..=3 * n_side {
        let z = 4.0 / 3.0 - 2.0 * (i as f64) / (3.0 * n);
        let s = ((i - n_side + 1) % 2) as f64;
        for j in 0..4 * n_side {
            centers.push(SphereCoord {
                theta: z.clamp(-1.0, 1.0).acos(),
                phi: (PI / (2.0 * n)) * (j as f64 + 0.5 * s),
            });
        }
    }
    // south polar cap mirrors the north
    for i in (1..n_side).rev() {
        let fi = i as f64;
        let z = -(1.0 - fi * fi / (3.0 * n * n));
        for j in 0..4 * i {
            centers.push(SphereCoord {
                theta: z.acos(),
                phi: (PI / (2.0 * fi)) * (j as f64 + 0.5),
            });
        }
    }
    debug_assert_eq!(centers.len(), 12 * (n_side * n_side) as usize);
    Ok(S2Grid { n_side, centers })
}

impl S2Grid {
    pub fn n_side(&self) -> u32 {
        self.n_side
    }

    pub fn centers(&self) -> &[SphereCoord] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// RING index of the pixel containing `(theta, phi)`.
    ///
    /// Membership in the equal-area pixels themselves, not in the Voronoi
    /// cells of the centers (those are not equal-area).
    pub fn pixel_of(&self, theta: f64, phi: f64) -> usize {
        let n_side = self.n_side as i64;
        let n = self.n_side as f64;
        let z = theta.cos();
        let za = z.abs();
        let tt = phi.rem_euclid(TAU) / (PI / 2.0); // in [0, 4)
        if za <= 2.0 / 3.0 {
            let temp1 = n * (0.5 + tt);
            let temp2 = n * 0.75 * z;
            let jp = (temp1 - temp2).floor() as i64;
            let jm = (temp1 + temp2).floor() as i64;
            let ir = n_side + 1 + jp - jm; // belt ring, 1 ..= 2*n_side + 1
            let kshift = 1 - (ir & 1);
            let ip = ((jp + jm - n_side + kshift + 1) / 2).rem_euclid(4 * n_side);
            (2 * n_side * (n_side - 1) + (ir - 1) * 4 * n_side + ip) as usize
        } else {
            let tp = tt.fract();
            let tmp = n * (3.0 * (1.0 - za)).sqrt();
            let jp = (tp * tmp).floor() as i64;
            let jm = ((1.0 - tp) * tmp).floor() as i64;
            let ir = jp + jm + 1; // cap ring, 1 ..= n_side
            let ip = ((tt * ir as f64).floor() as i64).rem_euclid(4 * ir);
            if z > 0.0 {
                (2 * ir * (ir - 1) + ip) as usize
            } else {
                (12 * n_side * n_side - 2 * ir * (ir + 1) + ip) as usize
            }
        }
    }
}

/// Uniform rotation prototypes from the Hopf lift of a HEALPix sphere grid.
#[derive(Debug, Clone)]
pub struct SO3Grid {
    n_side: u32,
    m1: u32,
    prototypes: Vec<Rotation>,
}

/// Number of in-plane steps paired with `12 * n_side^2` sphere pixels so the
/// in-plane and out-of-plane spacings match.
pub fn in_plane_count(n_side: u32) -> u32 {
    let m2 = 12.0 * (n_side as f64) * (n_side as f64);
    (PI * m2).sqrt().floor() as u32
}

/// Generate the `K = 12 * n_side^2 * m1` rotation prototypes.
///
/// A sphere center `(theta, phi)` and in-plane angle `psi` map to the unit
/// quaternion
/// `(cos(theta/2)cos(psi/2), cos(theta/2)sin(psi/2),
///   sin(theta/2)cos(phi + psi/2), sin(theta/2)sin(phi + psi/2))`.
pub fn so3_prototypes(n_side: u32) -> Result<SO3Grid> {
    let sphere = healpix_centers(n_side)?;
    let m1 = in_plane_count(n_side);
    let mut prototypes = Vec::with_capacity(sphere.len() * m1 as usize);
    for c in sphere.centers() {
        let (half_sin, half_cos) = ((c.theta / 2.0).sin(), (c.theta / 2.0).cos());
        for j in 0..m1 {
            let psi = TAU * (j as f64) / (m1 as f64);
            let q = Rotation::from_quaternion(
                half_cos * (psi / 2.0).cos(),
                half_cos * (psi / 2.0).sin(),
                half_sin * (c.phi + psi / 2.0).cos(),
                half_sin * (c.phi + psi / 2.0).sin(),
            )
            .expect("Hopf quaternion is unit norm");
            prototypes.push(q);
        }
    }
    Ok(SO3Grid {
        n_side,
        m1,
        prototypes,
    })
}

impl SO3Grid {
    pub fn n_side(&self) -> u32 {
        self.n_side
    }

    pub fn in_plane_count(&self) -> u32 {
        self.m1
    }

    /// Number of buckets K.
    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn prototypes(&self) -> &[Rotation] {
        &self.prototypes
    }

    pub fn prototype(&self, k: usize) -> &Rotation {
        &self.prototypes[k]
    }

    #[cfg(test)]
    pub(crate) fn from_prototypes(prototypes: Vec<Rotation>) -> Self {
        SO3Grid {
            n_side: 0,
            m1: 0,
            prototypes,
        }
    }

    /// Text export: header plus one `k qw qx qy qz` line per prototype.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# so3grid n_side={} K={}",
            self.n_side,
            self.prototypes.len()
        )?;
        for (k, rot) in self.prototypes.iter().enumerate() {
            let (qw, qx, qy, qz) = rot.quaternion();
            writeln!(
                w,
                "{k} {} {} {} {}",
                crate::bopio::format_float(qw),
                crate::bopio::format_float(qx),
                crate::bopio::format_float(qy),
                crate::bopio::format_float(qz)
            )?;
        }
        Ok(())
    }
}

/// Index of the prototype nearest to `rot` in geodesic angle.
///
/// Equivalent to maximizing `|<q, q_k>|`; ties resolve to the lowest index.
pub fn nearest_bucket(rot: &Rotation, grid: &SO3Grid) -> usize {
    let (w, x, y, z) = rot.quaternion();
    let mut best = 0usize;
    let mut best_dot = -1.0f64;
    for (k, p) in grid.prototypes.iter().enumerate() {
        let (pw, px, py, pz) = p.quaternion();
        let dot = (w * pw + x * px + y * py + z * pz).abs();
        if dot > best_dot {
            best_dot = dot;
            best = k;
        }
    }
    best
}

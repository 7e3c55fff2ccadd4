use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tofmpi_core::transport::{TwoPathScene, GAMMA_R};

use crate::{Result, SceneError};

type V3 = [f64; 3];

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add_scaled(a: V3, s: f64, b: V3) -> V3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Two walls meeting at a vertical seam, opening toward the sensor.
///
/// The sensor sits at the origin looking along +z; the seam is the line
/// `x = 0, z = distance`. Angles are radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CornerScene {
    pub distance: f64,
    pub opening_angle: f64,
    pub reflectivity_left: f64,
    pub reflectivity_right: f64,
    pub width: usize,
    pub height: usize,
    pub fov_h: f64,
    pub fov_v: f64,
    /// Extra `1/(1 + |AB|/falloff_length)²` factor on the interreflection.
    pub falloff: bool,
    /// Metres.
    pub falloff_length: f64,
    pub gamma_r: f64,
}

impl Default for CornerScene {
    fn default() -> Self {
        Self {
            distance: 2.1,
            opening_angle: PI / 2.0,
            reflectivity_left: 0.8,
            reflectivity_right: 0.8,
            width: 128,
            height: 128,
            fov_h: 40f64.to_radians(),
            fov_v: 40f64.to_radians(),
            falloff: true,
            falloff_length: 0.05,
            gamma_r: GAMMA_R,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wall {
    Left,
    Right,
}

/// Geometry of one unmasked pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelHit {
    pub wall: Wall,
    pub point_a: V3,
    pub point_b: V3,
    pub cos_incidence: f64,
    pub scene: TwoPathScene,
}

/// Row-major pixel grid, row 0 at the top. `None` marks rays that miss both walls.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrid {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Option<PixelHit>>,
}

impl SceneGrid {
    pub fn get(&self, col: usize, row: usize) -> Option<&PixelHit> {
        self.pixels[row * self.width + col].as_ref()
    }

    /// Same geometry with every interreflection removed.
    pub fn without_mpi(&self) -> Self {
        let mut out = self.clone();
        for p in out.pixels.iter_mut().flatten() {
            p.scene = p.scene.without_mpi();
        }
        out
    }
}

struct Plane {
    wall: Wall,
    /// Unit normal facing the sensor.
    normal: V3,
    /// Unit in-plane direction pointing away from the seam.
    along: V3,
    reflectivity: f64,
}

impl CornerScene {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SceneError::Config(m));
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return bad(format!("distance must be > 0, got {}", self.distance));
        }
        if !(self.opening_angle > 0.0 && self.opening_angle < PI) {
            return bad(format!(
                "opening angle must lie in (0, π), got {}",
                self.opening_angle
            ));
        }
        for (name, r) in [
            ("left", self.reflectivity_left),
            ("right", self.reflectivity_right),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} reflectivity must lie in [0, 1], got {r}"));
            }
        }
        if self.width < 2 || self.height < 2 {
            return bad(format!(
                "grid must be at least 2x2, got {}x{}",
                self.width, self.height
            ));
        }
        for (name, f) in [("fov_h", self.fov_h), ("fov_v", self.fov_v)] {
            if !(f > 0.0 && f < PI) {
                return bad(format!("{name} must lie in (0, π), got {f}"));
            }
        }
        if !(self.falloff_length.is_finite() && self.falloff_length > 0.0) {
            return bad(format!(
                "falloff length must be > 0, got {}",
                self.falloff_length
            ));
        }
        if !(self.gamma_r.is_finite() && self.gamma_r > 0.0) {
            return bad(format!("gamma_r must be > 0, got {}", self.gamma_r));
        }
        Ok(())
    }

    fn seam(&self) -> V3 {
        [0.0, 0.0, self.distance]
    }

    fn planes(&self) -> [Plane; 2] {
        let (s, c) = (0.5 * self.opening_angle).sin_cos();
        [
            Plane {
                wall: Wall::Right,
                normal: [-c, 0.0, -s],
                along: [s, 0.0, -c],
                reflectivity: self.reflectivity_right,
            },
            Plane {
                wall: Wall::Left,
                normal: [c, 0.0, -s],
                along: [-s, 0.0, -c],
                reflectivity: self.reflectivity_left,
            },
        ]
    }

    /// Unit direction of the ray through the centre of pixel `(col, row)`.
    pub fn ray(&self, col: usize, row: usize) -> V3 {
        let ax = ((col as f64 + 0.5) / self.width as f64 - 0.5) * self.fov_h;
        let ay = (0.5 - (row as f64 + 0.5) / self.height as f64) * self.fov_v;
        let r = [ax.tan(), ay.tan(), 1.0];
        let n = norm(r);
        [r[0] / n, r[1] / n, r[2] / n]
    }

    /// Signed horizontal distance of a column centre from the seam, in pixels.
    pub fn seam_offset_px(&self, col: usize) -> f64 {
        col as f64 + 0.5 - 0.5 * self.width as f64
    }

    /// Nearest point of a wall (a half-plane bounded by the seam) to `p`.
    fn nearest_on(&self, plane: &Plane, p: V3) -> V3 {
        let seam = self.seam();
        let q = add_scaled(p, -dot(plane.normal, sub(p, seam)), plane.normal);
        if dot(sub(q, seam), plane.along) >= 0.0 {
            q
        } else {
            [0.0, p[1], self.distance]
        }
    }

    fn trace_ray(&self, r: V3) -> Option<PixelHit> {
        let seam = self.seam();
        let planes = self.planes();
        let mut best: Option<(f64, usize)> = None;
        for (k, pl) in planes.iter().enumerate() {
            let denom = dot(pl.normal, r);
            // Parallel rays and back faces never hit.
            if denom > -1e-12 {
                continue;
            }
            let t = dot(pl.normal, seam) / denom;
            if !(t > 0.0 && t.is_finite()) {
                continue;
            }
            let a = [t * r[0], t * r[1], t * r[2]];
            if dot(sub(a, seam), pl.along) < -1e-12 * self.distance {
                continue;
            }
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, k));
            }
        }
        let (t, k) = best?;
        let hit = &planes[k];
        let other = &planes[1 - k];
        let a = [t * r[0], t * r[1], t * r[2]];
        let b = self.nearest_on(other, a);
        let ab = norm(sub(a, b));
        let cos_incidence = (-dot(hit.normal, r)).min(1.0);
        let falloff = if self.falloff {
            1.0 / (1.0 + ab / self.falloff_length).powi(2)
        } else {
            1.0
        };
        Some(PixelHit {
            wall: hit.wall,
            point_a: a,
            point_b: b,
            cos_incidence,
            scene: TwoPathScene {
                gamma_r: self.gamma_r,
                d_as: t,
                d_ab: ab,
                rho_sas: hit.reflectivity * cos_incidence,
                rho_sab: hit.reflectivity,
                rho_aba: other.reflectivity * falloff,
                rho_bas: hit.reflectivity,
            },
        })
    }
}

/// Casts every pixel ray and builds its two-path scene.
pub fn trace_corner(scene: &CornerScene) -> Result<SceneGrid> {
    scene.validate()?;
    let (w, h) = (scene.width, scene.height);
    let pixels = (0..w * h)
        .into_par_iter()
        .map(|i| scene.trace_ray(scene.ray(i % w, i / w)))
        .collect();
    Ok(SceneGrid {
        width: w,
        height: h,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn right_angle_distance_matches_plane_intersection() {
        let s = CornerScene::default();
        let g = trace_corner(&s).unwrap();
        for row in 0..s.height {
            for col in 0..s.width {
                let r = s.ray(col, row);
                // Walls x + z = D and −x + z = D.
                let want = s.distance / (r[0].abs() + r[2]);
                let got = g.get(col, row).unwrap().scene.d_as;
                assert!((got - want).abs() < 1e-12, "{col},{row}: {got} vs {want}");
                assert!((1.4..=3.5).contains(&got));
            }
        }
    }

    #[test]
    fn distance_field_is_continuous_across_columns() {
        let s = CornerScene::default();
        let g = trace_corner(&s).unwrap();
        for row in 0..s.height {
            for col in 1..s.width {
                let a = g.get(col - 1, row).unwrap().scene.d_as;
                let b = g.get(col, row).unwrap().scene.d_as;
                assert!((a - b).abs() < 0.02, "jump {a} -> {b}");
            }
        }
    }

    #[test]
    fn right_angle_partner_is_the_seam() {
        let s = CornerScene::default();
        let g = trace_corner(&s).unwrap();
        let p = g.get(100, 40).unwrap();
        assert_eq!(p.wall, Wall::Right);
        assert!(p.point_b[0].abs() < 1e-12 && (p.point_b[2] - s.distance).abs() < 1e-12);
        assert!((p.point_b[1] - p.point_a[1]).abs() < 1e-12);
        assert_eq!(g.get(10, 40).unwrap().wall, Wall::Left);
    }

    #[test]
    fn seam_is_mpi_strong_and_edges_are_weak() {
        let s = CornerScene::default();
        let g = trace_corner(&s).unwrap();
        let row = s.height / 2;
        let seam = g.get(s.width / 2, row).unwrap().scene;
        let edge = g.get(s.width - 1, row).unwrap().scene;
        assert!(seam.d_ab < 0.02);
        assert!(edge.d_ab > 0.5);
        assert!(seam.mpi_product() > 20.0 * edge.mpi_product());
        let mut prev = f64::INFINITY;
        for col in s.width / 2..s.width {
            let p = g.get(col, row).unwrap().scene.mpi_product();
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn falloff_flag_and_mpi_removal() {
        let s = CornerScene {
            falloff: false,
            ..CornerScene::default()
        };
        let g = trace_corner(&s).unwrap();
        let p = g.get(0, 0).unwrap().scene;
        assert_eq!(p.rho_aba, s.reflectivity_right);
        let off = g.without_mpi();
        assert!(off
            .pixels
            .iter()
            .flatten()
            .all(|p| p.scene.mpi_product() == 0.0));
    }

    #[test]
    fn rays_that_miss_are_masked() {
        let s = CornerScene::default();
        assert!(s.trace_ray([0.0, 0.0, -1.0]).is_none());
        // Parallel to the right wall, pointing away from the left one.
        let (sn, cs) = (0.5 * s.opening_angle).sin_cos();
        assert!(s.trace_ray([sn, 0.0, -cs]).is_none());
        assert!(s.trace_ray([0.0, 1.0, 0.0]).is_none());
    }

    #[test]
    fn rejects_bad_scenes() {
        for bad in [
            CornerScene {
                distance: 0.0,
                ..CornerScene::default()
            },
            CornerScene {
                opening_angle: PI,
                ..CornerScene::default()
            },
            CornerScene {
                width: 1,
                ..CornerScene::default()
            },
            CornerScene {
                reflectivity_left: 1.5,
                ..CornerScene::default()
            },
        ] {
            assert!(matches!(trace_corner(&bad), Err(SceneError::Config(_))));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn traced_scenes_are_valid(
            d in 0.5f64..5.0,
            angle in 0.3f64..3.0,
            rl in 0.0f64..=1.0,
            rr in 0.0f64..=1.0,
            fov in 0.1f64..1.2,
        ) {
            let s = CornerScene {
                distance: d,
                opening_angle: angle,
                reflectivity_left: rl,
                reflectivity_right: rr,
                width: 9,
                height: 5,
                fov_h: fov,
                fov_v: fov,
                ..CornerScene::default()
            };
            let g = trace_corner(&s).unwrap();
            for p in g.pixels.iter().flatten() {
                prop_assert!(p.scene.validate().is_ok());
                prop_assert!(p.cos_incidence > 0.0 && p.cos_incidence <= 1.0 + 1e-12);
                // A lies on the seam-side sensor view: never farther than the seam plane.
                prop_assert!(p.point_a[2] <= d + 1e-9);
            }
        }
    }
}

//! Inverse-perspective (birds-eye view) projection of detections.
//!
//! A calibration is four image points outlining a rectangular road patch,
//! ordered near-left, near-right, far-right, far-left, plus the patch's size
//! in feet. The ground rectangle uses image-like axes: `X` grows rightwards
//! from the left edge, `Y` grows towards the camera from the far edge, so the
//! near edge sits at `Y = length`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Detection;
use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    /// Lateral offset, feet, positive to the ego's right.
    pub x: f64,
    /// Longitudinal distance, feet, positive ahead of the ego.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub image_points: [[f64; 2]; 4],
    /// `[width_ft, length_ft]`
    pub ground_rect: [f64; 2],
    pub ego_anchor_px: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BevCalibration {
    pub image_points: [[f64; 2]; 4],
    pub ground_rect: [f64; 2],
    pub ego_anchor_px: f64,
    /// Image → ground homography, row-major, `h[2][2] == 1`.
    pub h: Mat3,
    h_inv: Mat3,
    ego: [f64; 2],
}

/// A detection placed on the ground plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedDetection {
    pub point: GroundPoint,
    /// The contact pixel fell outside the calibrated quadrilateral.
    pub outside_region: bool,
}

impl BevCalibration {
    pub fn new(image_points: [[f64; 2]; 4], ground_rect: [f64; 2], ego_anchor_px: f64) -> Result<Self> {
        let [w, l] = ground_rect;
        if !(w > 0.0 && l > 0.0 && w.is_finite() && l.is_finite()) {
            return Err(Error::DegenerateCalibration(format!(
                "ground_rect {ground_rect:?} must be positive"
            )));
        }
        let ground = ground_corners(ground_rect);
        let h = fit_homography(&image_points, &ground)?;
        let h_inv = invert3(&h).ok_or_else(|| {
            Error::DegenerateCalibration("homography is not invertible".into())
        })?;

        // ego sits on the near edge at the anchor column
        let [nl, nr] = [image_points[0], image_points[1]];
        if (nr[0] - nl[0]).abs() < f64::EPSILON {
            return Err(Error::DegenerateCalibration("near edge is vertical".into()));
        }
        let t = (ego_anchor_px - nl[0]) / (nr[0] - nl[0]);
        let anchor = [ego_anchor_px, nl[1] + t * (nr[1] - nl[1])];
        let ego = apply(&h, anchor);

        Ok(BevCalibration {
            image_points,
            ground_rect,
            ego_anchor_px,
            h,
            h_inv,
            ego,
        })
    }

    pub fn from_file(file: &CalibrationFile) -> Result<Self> {
        Self::new(file.image_points, file.ground_rect, file.ego_anchor_px)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CalibrationFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_file(&file)
    }

    pub fn homography(&self) -> &Mat3 {
        &self.h
    }

    pub fn inverse(&self) -> &Mat3 {
        &self.h_inv
    }

    /// Ground-rectangle coordinates of the ego contact point.
    pub fn ego_ground(&self) -> [f64; 2] {
        self.ego
    }

    /// Maps a pixel to ego-relative ground coordinates.
    pub fn pixel_to_ground(&self, px: [f64; 2]) -> GroundPoint {
        let [gx, gy] = apply(&self.h, px);
        GroundPoint {
            x: gx - self.ego[0],
            y: self.ego[1] - gy,
        }
    }

    /// Inverse of [`pixel_to_ground`](Self::pixel_to_ground).
    pub fn ground_to_pixel(&self, p: GroundPoint) -> [f64; 2] {
        apply(&self.h_inv, [p.x + self.ego[0], self.ego[1] - p.y])
    }

    pub fn contains_pixel(&self, px: [f64; 2]) -> bool {
        point_in_convex_quad(&self.image_points, px)
    }
}

fn ground_corners([w, l]: [f64; 2]) -> [[f64; 2]; 4] {
    [[0.0, l], [w, l], [w, 0.0], [0.0, 0.0]]
}

/// Bottom-center of a bounding box, where the actor meets the road.
pub fn contact_pixel(det: &Detection) -> [f64; 2] {
    let [x0, _, x1, y1] = det.bbox;
    [(x0 + x1) / 2.0, y1]
}

/// Projects a detection's contact pixel into the ego frame. Fails with
/// `OutOfCalibratedRegion` when the pixel lies outside the calibrated quad.
pub fn project_detection(det: &Detection, cal: &BevCalibration) -> Result<GroundPoint> {
    let px = contact_pixel(det);
    if !cal.contains_pixel(px) {
        return Err(Error::OutOfCalibratedRegion { u: px[0], v: px[1] });
    }
    Ok(cal.pixel_to_ground(px))
}

/// Like [`project_detection`] but always projects, flagging out-of-region pixels.
pub fn project_detection_forced(det: &Detection, cal: &BevCalibration) -> ProjectedDetection {
    let px = contact_pixel(det);
    ProjectedDetection {
        point: cal.pixel_to_ground(px),
        outside_region: !cal.contains_pixel(px),
    }
}

/// Solves the 8-unknown direct linear system for the homography mapping each
/// `image[i]` to `ground[i]`, with `h33` fixed to 1.
pub fn fit_homography(image: &[[f64; 2]; 4], ground: &[[f64; 2]; 4]) -> Result<Mat3> {
    for (pts, what) in [(image, "image"), (ground, "ground")] {
        for a in 0..4 {
            for b in (a + 1)..4 {
                for c in (b + 1)..4 {
                    if collinear(pts[a], pts[b], pts[c]) {
                        return Err(Error::DegenerateCalibration(format!(
                            "{what} points {a}, {b}, {c} are collinear"
                        )));
                    }
                }
            }
        }
    }

    let mut a = [[0.0f64; 9]; 8];
    for i in 0..4 {
        let [u, v] = image[i];
        let [x, y] = ground[i];
        a[2 * i] = [u, v, 1.0, 0.0, 0.0, 0.0, -u * x, -v * x, x];
        a[2 * i + 1] = [0.0, 0.0, 0.0, u, v, 1.0, -u * y, -v * y, y];
    }
    let sol = solve_augmented(a)
        .ok_or_else(|| Error::DegenerateCalibration("singular correspondence system".into()))?;
    Ok([
        [sol[0], sol[1], sol[2]],
        [sol[3], sol[4], sol[5]],
        [sol[6], sol[7], 1.0],
    ])
}

fn collinear(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let scale = (b[0] - a[0]).hypot(b[1] - a[1]) * (c[0] - a[0]).hypot(c[1] - a[1]);
    cross.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)
}

/// Gauss-Jordan elimination with partial pivoting on an 8x9 augmented matrix.
#[allow(clippy::needless_range_loop)]
fn solve_augmented(mut a: [[f64; 9]; 8]) -> Option<[f64; 8]> {
    let n = 8;
    let scale = a
        .iter()
        .flat_map(|r| r[..8].iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for k in col..=n {
            a[col][k] /= p;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for k in col..=n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    let mut out = [0.0; 8];
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i][n];
    }
    Some(out)
}

pub fn apply(h: &Mat3, [u, v]: [f64; 2]) -> [f64; 2] {
    let x = h[0][0] * u + h[0][1] * v + h[0][2];
    let y = h[1][0] * u + h[1][1] * v + h[1][2];
    let w = h[2][0] * u + h[2][1] * v + h[2][2];
    [x / w, y / w]
}

/// Inverse normalized so the bottom-right entry is 1.
pub fn invert3(m: &Mat3) -> Option<Mat3> {
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 1, 2, 2), -c(0, 1, 2, 2), c(0, 1, 1, 2)],
        [-c(1, 0, 2, 2), c(0, 0, 2, 2), -c(0, 0, 1, 2)],
        [c(1, 0, 2, 1), -c(0, 0, 2, 1), c(0, 0, 1, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    if !det.is_finite() || det.abs() < 1e-300 {
        return None;
    }
    let norm = if adj[2][2].abs() > 1e-300 { adj[2][2] } else { det };
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for col in 0..3 {
            out[r][col] = adj[r][col] / norm;
        }
    }
    Some(out)
}

fn point_in_convex_quad(quad: &[[f64; 2]; 4], p: [f64; 2]) -> bool {
    let mut sign = 0.0f64;
    for i in 0..4 {
        let a = quad[i];
        let b = quad[(i + 1) % 4];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let tol = 1e-9 * (b[0] - a[0]).hypot(b[1] - a[1]).max(1.0);
        if cross.abs() <= tol {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

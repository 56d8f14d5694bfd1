//! Head-ray geometry: AABB surface sampling, angular offsets from the head
//! forward ray to each object, and per-sample ranking of candidate objects.

mod scene;
mod vec3;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scene::{is_valid_object_id, Aabb, ObjectKind, Scene, SceneObject};
pub use vec3::Vec3;

/// Tolerance on the unit norm of head forward vectors.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Sample points closer than this to the head origin are skipped.
const MIN_RAY_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid AABB: min {min:?} exceeds max {max:?}")]
    InvertedAabb { min: Vec3, max: Vec3 },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("sample spacing must be positive, got {0} mm")]
    InvalidSpacing(f64),
    #[error("forward vector is not unit norm (|f| = {0})")]
    NonUnitForward(f64),
    #[error("head origin coincides with every sample point of object {0:?}")]
    DegenerateGeometry(String),
    #[error("scene has no objects")]
    EmptyScene,
    #[error("timestamps not increasing: {prev_ms} ms then {curr_ms} ms")]
    NonIncreasingTimestamps { prev_ms: f64, curr_ms: f64 },
    #[error("duplicate object id {0:?}")]
    DuplicateId(String),
    #[error("invalid object id {0:?}: expected [A-Za-z0-9_-]+")]
    InvalidId(String),
    #[error("scene has no robot AOI")]
    MissingRobot,
    #[error("scene has {0} robot AOIs, expected exactly one")]
    MultipleRobots(usize),
}

/// One head-pose measurement used as a gaze proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPoseSample {
    pub timestamp_ms: f64,
    pub origin: Vec3,
    pub forward: Vec3,
}

impl HeadPoseSample {
    /// Builds a sample, rejecting forward vectors that are not unit norm.
    pub fn new(timestamp_ms: f64, origin: Vec3, forward: Vec3) -> Result<Self, GeometryError> {
        if !timestamp_ms.is_finite() || !origin.is_finite() || !forward.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let n = forward.norm();
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(GeometryError::NonUnitForward(n));
        }
        Ok(Self {
            timestamp_ms,
            origin,
            forward,
        })
    }

    /// Builds a sample looking from `origin` towards `target`.
    pub fn looking_at(timestamp_ms: f64, origin: Vec3, target: Vec3) -> Result<Self, GeometryError> {
        let forward = (target - origin)
            .normalized()
            .ok_or(GeometryError::NonUnitForward(0.0))?;
        Self::new(timestamp_ms, origin, forward)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub object_id: String,
    pub angle_deg: f64,
}

/// Objects ordered by ascending angular offset at one sampling instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFrame {
    pub timestamp_ms: f64,
    pub entries: Vec<RankedEntry>,
}

impl RankedFrame {
    /// Sorts entries by angle, breaking exact ties by id.
    pub fn from_unsorted(timestamp_ms: f64, mut entries: Vec<RankedEntry>) -> Self {
        entries.sort_by(|a, b| {
            a.angle_deg
                .total_cmp(&b.angle_deg)
                .then_with(|| a.object_id.cmp(&b.object_id))
        });
        Self {
            timestamp_ms,
            entries,
        }
    }

    pub fn first(&self) -> Option<&RankedEntry> {
        self.entries.first()
    }
}

/// Evenly spaced intervals of at most `spacing` covering `[lo, hi]`,
/// endpoints included. A zero extent yields the single coordinate `lo`.
fn axis_coordinates(lo: f64, hi: f64, spacing_m: f64) -> Vec<f64> {
    let extent = hi - lo;
    if extent <= 0.0 {
        return vec![lo];
    }
    // Guard against 200.00000000003 rounding up to 201 intervals.
    let n = ((extent / spacing_m) - 1e-9).ceil().max(1.0) as usize;
    (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + extent * (k as f64) / (n as f64)
            }
        })
        .collect()
}

/// Places sample points on the faces of `aabb`. Each axis is subdivided into
/// evenly spaced intervals no longer than `spacing_mm`; the corners are
/// always included and no point is emitted twice.
pub fn sample_aabb_surface(aabb: &Aabb, spacing_mm: f64) -> Result<Vec<Vec3>, GeometryError> {
    if !(spacing_mm > 0.0) || !spacing_mm.is_finite() {
        return Err(GeometryError::InvalidSpacing(spacing_mm));
    }
    aabb.validate()?;
    let spacing_m = spacing_mm / 1000.0;
    let xs = axis_coordinates(aabb.min.x, aabb.max.x, spacing_m);
    let ys = axis_coordinates(aabb.min.y, aabb.max.y, spacing_m);
    let zs = axis_coordinates(aabb.min.z, aabb.max.z, spacing_m);
    let (nx, ny, nz) = (xs.len() - 1, ys.len() - 1, zs.len() - 1);

    let mut points = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let x_face = i == 0 || i == nx;
        for (j, &y) in ys.iter().enumerate() {
            if x_face || j == 0 || j == ny {
                points.extend(zs.iter().map(|&z| Vec3::new(x, y, z)));
            } else {
                points.push(Vec3::new(x, y, zs[0]));
                if nz > 0 {
                    points.push(Vec3::new(x, y, zs[nz]));
                }
            }
        }
    }
    Ok(points)
}

/// Cosine margin for the screening pass; far above rounding error, so the
/// exact minimum always survives it.
const COSINE_SCREEN_MARGIN: f64 = 1e-9;

/// Smallest angle between `forward` and the rays from `origin` to `points`.
/// Returns `None` if every point coincides with the origin.
///
/// A cheap cosine pass finds the best candidates; the precise `atan2` form
/// is evaluated only for those.
fn min_angle_to_points(origin: Vec3, forward: Vec3, points: &[Vec3]) -> Option<f64> {
    let cosine = |p: Vec3| {
        let ray = p - origin;
        let n = ray.norm();
        (n > MIN_RAY_LENGTH).then(|| (ray, forward.dot(ray) / n))
    };
    let best = points
        .iter()
        .filter_map(|&p| cosine(p).map(|(_, c)| c))
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return None;
    }
    points
        .iter()
        .filter_map(|&p| cosine(p))
        .filter(|(_, c)| *c >= best - COSINE_SCREEN_MARGIN)
        .map(|(ray, _)| forward.angle_deg(ray))
        .min_by(f64::total_cmp)
}

/// Angular offset in degrees from the head ray to the closest sampled
/// surface point of `object`.
pub fn angular_offset_to_object(
    pose: &HeadPoseSample,
    object: &SceneObject,
    spacing_mm: f64,
) -> Result<f64, GeometryError> {
    let points = sample_aabb_surface(&object.aabb, spacing_mm)?;
    min_angle_to_points(pose.origin, pose.forward, &points)
        .ok_or_else(|| GeometryError::DegenerateGeometry(object.id.clone()))
}

/// Ranks every object of `scene` by angular offset, ascending. Exact ties
/// are broken by id so the order is deterministic.
pub fn rank_objects(
    pose: &HeadPoseSample,
    scene: &Scene,
    spacing_mm: f64,
) -> Result<RankedFrame, GeometryError> {
    SceneRanker::new(scene, spacing_mm)?.rank(pose)
}

/// Head angular speed in degrees per second between two samples.
pub fn angular_speed(prev: &HeadPoseSample, curr: &HeadPoseSample) -> Result<f64, GeometryError> {
    let dt_ms = curr.timestamp_ms - prev.timestamp_ms;
    if !(dt_ms > 0.0) {
        return Err(GeometryError::NonIncreasingTimestamps {
            prev_ms: prev.timestamp_ms,
            curr_ms: curr.timestamp_ms,
        });
    }
    Ok(prev.forward.angle_deg(curr.forward) / (dt_ms / 1000.0))
}

/// Ranking context for a static scene: surface grids are sampled once per
/// object at construction and shared immutably afterwards.
#[derive(Debug, Clone)]
pub struct SceneRanker {
    spacing_mm: f64,
    grids: Arc<Vec<(String, Vec<Vec3>)>>,
}

impl SceneRanker {
    pub fn new(scene: &Scene, spacing_mm: f64) -> Result<Self, GeometryError> {
        if scene.is_empty() {
            return Err(GeometryError::EmptyScene);
        }
        let grids = scene
            .objects()
            .iter()
            .map(|o| Ok((o.id.clone(), sample_aabb_surface(&o.aabb, spacing_mm)?)))
            .collect::<Result<Vec<_>, GeometryError>>()?;
        Ok(Self {
            spacing_mm,
            grids: Arc::new(grids),
        })
    }

    pub fn spacing_mm(&self) -> f64 {
        self.spacing_mm
    }

    pub fn rank(&self, pose: &HeadPoseSample) -> Result<RankedFrame, GeometryError> {
        let entries = self
            .grids
            .iter()
            .map(|(id, points)| {
                let angle = min_angle_to_points(pose.origin, pose.forward, points)
                    .ok_or_else(|| GeometryError::DegenerateGeometry(id.clone()))?;
                Ok(RankedEntry {
                    object_id: id.clone(),
                    angle_deg: angle,
                })
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        Ok(RankedFrame::from_unsorted(pose.timestamp_ms, entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(forward: Vec3) -> HeadPoseSample {
        HeadPoseSample::new(0.0, Vec3::ZERO, forward).unwrap()
    }

    fn object(id: &str, aabb: Aabb) -> SceneObject {
        SceneObject::new(id, id, ObjectKind::Object, aabb)
    }

    fn unit_cube() -> Aabb {
        Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn point_box_yields_single_sample() {
        let p = Vec3::new(0.3, -0.2, 1.0);
        assert_eq!(sample_aabb_surface(&Aabb::point(p), 5.0).unwrap(), vec![p]);
    }

    #[test]
    fn coarse_spacing_yields_corners() {
        let pts = sample_aabb_surface(&unit_cube(), 1000.0).unwrap();
        assert_eq!(pts.len(), 8);
        for p in pts {
            for axis in 0..3 {
                let c = p.component(axis);
                assert!(c == 0.0 || c == 1.0);
            }
        }
    }

    #[test]
    fn unit_cube_at_5mm_matches_enumerated_count() {
        // Brute force: every lattice point of the 201^3 grid with at least
        // one index on a boundary.
        let n = 200usize;
        let mut expected = 0usize;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    if [i, j, k].iter().any(|&c| c == 0 || c == n) {
                        expected += 1;
                    }
                }
            }
        }
        let pts = sample_aabb_surface(&unit_cube(), 5.0).unwrap();
        assert_eq!(pts.len(), expected);
        for p in &pts {
            let on_face = (0..3).any(|a| {
                let c = p.component(a);
                c == 0.0 || c == 1.0
            });
            assert!(on_face, "{p:?} is not on a face");
        }
    }

    #[test]
    fn plane_box_is_fully_sampled() {
        let plane = Aabb::new(Vec3::ZERO, Vec3::new(0.01, 0.02, 0.0)).unwrap();
        // 3 x 5 lattice on a zero-thickness box
        assert_eq!(sample_aabb_surface(&plane, 5.0).unwrap().len(), 15);
    }

    #[test]
    fn sampling_rejects_bad_input() {
        assert_eq!(
            sample_aabb_surface(&unit_cube(), 0.0),
            Err(GeometryError::InvalidSpacing(0.0))
        );
        let inverted = Aabb {
            min: Vec3::X,
            max: Vec3::ZERO,
        };
        assert!(matches!(
            sample_aabb_surface(&inverted, 5.0),
            Err(GeometryError::InvertedAabb { .. })
        ));
    }

    #[test]
    fn collinear_and_perpendicular_offsets() {
        let ahead = object("a", Aabb::point(Vec3::new(2.0, 0.0, 0.0)));
        let side = object("b", Aabb::point(Vec3::new(0.0, 2.0, 0.0)));
        assert_eq!(angular_offset_to_object(&pose(Vec3::X), &ahead, 5.0).unwrap(), 0.0);
        assert_eq!(angular_offset_to_object(&pose(Vec3::X), &side, 5.0).unwrap(), 90.0);
    }

    #[test]
    fn origin_on_only_sample_point_is_degenerate() {
        let at_origin = object("a", Aabb::point(Vec3::ZERO));
        assert_eq!(
            angular_offset_to_object(&pose(Vec3::X), &at_origin, 5.0),
            Err(GeometryError::DegenerateGeometry("a".into()))
        );
    }

    #[test]
    fn ahead_object_ranks_first() {
        let scene = Scene::new(
            "s",
            vec![
                object("behind", Aabb::point(Vec3::new(-2.0, 0.0, 0.0))),
                object("ahead", Aabb::point(Vec3::new(2.0, 0.0, 0.0))),
            ],
        )
        .unwrap();
        let frame = rank_objects(&pose(Vec3::X), &scene, 5.0).unwrap();
        assert_eq!(frame.entries[0].object_id, "ahead");
        assert_eq!(frame.entries[0].angle_deg, 0.0);
        assert_eq!(frame.entries[1].angle_deg, 180.0);
    }

    #[test]
    fn symmetric_boxes_tie_break_by_id() {
        let size = Vec3::new(0.1, 0.1, 0.1);
        let left = Aabb::from_center_size(Vec3::new(2.0, 0.5, 0.0), size).unwrap();
        let right = Aabb::from_center_size(Vec3::new(2.0, -0.5, 0.0), size).unwrap();
        let scene = Scene::new("s", vec![object("zeta", left), object("alpha", right)]).unwrap();
        let frame = rank_objects(&pose(Vec3::X), &scene, 5.0).unwrap();
        assert_eq!(frame.entries[0].angle_deg, frame.entries[1].angle_deg);
        assert_eq!(frame.entries[0].object_id, "alpha");
    }

    #[test]
    fn empty_scene_is_rejected() {
        let scene = Scene::new("s", vec![]).unwrap();
        assert_eq!(
            rank_objects(&pose(Vec3::X), &scene, 5.0),
            Err(GeometryError::EmptyScene)
        );
    }

    #[test]
    fn angular_speed_cases() {
        let a = HeadPoseSample::new(0.0, Vec3::ZERO, Vec3::X).unwrap();
        let b = HeadPoseSample::new(500.0, Vec3::ZERO, Vec3::Y).unwrap();
        let c = HeadPoseSample::new(250.0, Vec3::ZERO, Vec3::X).unwrap();
        assert_eq!(angular_speed(&a, &c).unwrap(), 0.0);
        assert!((angular_speed(&a, &b).unwrap() - 180.0).abs() < 1e-12);
        assert!(matches!(
            angular_speed(&b, &a),
            Err(GeometryError::NonIncreasingTimestamps { .. })
        ));
    }

    #[test]
    fn non_unit_forward_is_rejected() {
        assert!(matches!(
            HeadPoseSample::new(0.0, Vec3::ZERO, Vec3::new(1.01, 0.0, 0.0)),
            Err(GeometryError::NonUnitForward(_))
        ));
    }
}

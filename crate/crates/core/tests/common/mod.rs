//! Reference oracles and generators shared by the integration tests. The
//! oracles are deliberately naive and do not call into the library code
//! they check.

#![allow(dead_code)]

use gazeground_core::geometry::{Aabb, RankedEntry, RankedFrame, Vec3};
use gazeground_core::segmentation::{FixationSegment, SegmentationParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Angle in degrees via arccos of the normalized dot product.
pub fn acos_angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

fn ticks(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let extent = hi - lo;
    if extent == 0.0 {
        return vec![lo];
    }
    let mut n = 1usize;
    while extent / n as f64 > spacing * (1.0 + 1e-12) {
        n += 1;
    }
    (0..=n).map(|i| if i == n { hi } else { lo + extent * i as f64 / n as f64 }).collect()
}

/// Number of surface lattice points by enumerating the full 3-D grid and
/// keeping points with at least one boundary coordinate.
pub fn brute_force_surface_count(aabb: &Aabb, spacing_mm: f64) -> usize {
    let s = spacing_mm / 1000.0;
    let xs = ticks(aabb.min.x, aabb.max.x, s);
    let ys = ticks(aabb.min.y, aabb.max.y, s);
    let zs = ticks(aabb.min.z, aabb.max.z, s);
    let mut count = 0;
    for (i, _) in xs.iter().enumerate() {
        for (j, _) in ys.iter().enumerate() {
            for (k, _) in zs.iter().enumerate() {
                let on = i == 0 || i == xs.len() - 1 || j == 0 || j == ys.len() - 1 || k == 0 || k == zs.len() - 1;
                if on {
                    count += 1;
                }
            }
        }
    }
    count
}

/// Minimum angle from the ray to a dense face grid (spacing in mm), face by
/// face.
pub fn dense_offset_deg(origin: Vec3, forward: Vec3, aabb: &Aabb, spacing_mm: f64) -> f64 {
    let s = spacing_mm / 1000.0;
    let lo = [aabb.min.x, aabb.min.y, aabb.min.z];
    let hi = [aabb.max.x, aabb.max.y, aabb.max.z];
    let f = [forward.x, forward.y, forward.z];
    let o = [origin.x, origin.y, origin.z];
    let mut best = f64::INFINITY;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let us = ticks(lo[u], hi[u], s);
        let vs = ticks(lo[v], hi[v], s);
        for face in [lo[axis], hi[axis]] {
            for &a in &us {
                for &b in &vs {
                    let mut p = [0.0; 3];
                    p[axis] = face;
                    p[u] = a;
                    p[v] = b;
                    let d = [p[0] - o[0], p[1] - o[1], p[2] - o[2]];
                    if d.iter().all(|c| c.abs() < 1e-12) {
                        continue;
                    }
                    best = best.min(acos_angle_deg(f, d));
                }
            }
        }
    }
    best
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

pub fn random_aabb(rng: &mut ChaCha8Rng, center_range: f64, max_size: f64) -> Aabb {
    let c = Vec3::new(
        rng.random_range(-center_range..center_range),
        rng.random_range(-center_range..center_range),
        rng.random_range(-center_range..center_range),
    );
    let size = Vec3::new(
        rng.random_range(0.01..max_size),
        rng.random_range(0.01..max_size),
        rng.random_range(0.01..max_size),
    );
    Aabb::from_center_size(c, size).unwrap()
}

// ------------------------------------------------------------ segmentation

#[derive(Debug, Clone)]
pub struct OracleFrame {
    pub t: f64,
    /// Candidate ids in ascending-angle order; empty when suppressed or
    /// nothing is within the threshold.
    pub candidates: Vec<String>,
}

fn key(c: &[String]) -> Vec<String> {
    let mut k = c.to_vec();
    k.sort();
    k
}

fn median_of(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Run-length encoding over candidate membership, the duration convention
/// (span + median period, capped by the next frame and the window end), the
/// minimum-duration filter and left-to-right merging.
pub fn rle_merge_oracle(frames: &[OracleFrame], params: &SegmentationParams, window_end: Option<f64>) -> Vec<FixationSegment> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in 0..frames.len() {
        match runs.last_mut() {
            Some((_, last)) if key(&frames[*last].candidates) == key(&frames[i].candidates) => *last = i,
            _ => runs.push((i, i)),
        }
    }
    let mut raw = Vec::new();
    for (first, last) in runs {
        if frames[first].candidates.is_empty() {
            continue;
        }
        let gaps: Vec<f64> = (1..=last).map(|k| frames[k].t - frames[k - 1].t).collect();
        let mut dur = frames[last].t - frames[first].t + median_of(gaps);
        if last + 1 < frames.len() {
            dur = dur.min(frames[last + 1].t - frames[first].t);
        }
        if let Some(end) = window_end {
            dur = dur.min(end - frames[first].t);
        }
        let dur = dur.max(0.0);
        if dur >= params.min_fixation_ms {
            raw.push(FixationSegment::new(frames[first].candidates.clone(), frames[first].t, dur));
        }
    }
    let mut out: Vec<FixationSegment> = Vec::new();
    for s in raw {
        if let Some(p) = out.last_mut() {
            if key(&p.object_ids) == key(&s.object_ids) && s.start_ms - p.end_ms <= params.merge_window_ms {
                p.duration_ms += s.duration_ms;
                p.end_ms = s.end_ms;
                continue;
            }
        }
        out.push(s);
    }
    out
}

pub const OBJECT_POOL: [&str; 5] = ["bowl", "cereal_box", "cup", "milk_bottle", "the_robot"];

/// Random ranked-frame trace: rate 10-120 Hz, per-frame jitter, occasional
/// dropouts, and sticky gaze that dwells on one or two objects for a while
/// before moving on.
pub fn random_ranked_trace(rng: &mut ChaCha8Rng, params: &SegmentationParams) -> Vec<RankedFrame> {
    let rate = rng.random_range(10.0..120.0);
    let period = 1000.0 / rate;
    let jitter = rng.random_range(0.0..0.45);
    let n = rng.random_range(0..300usize);
    let mut t = rng.random_range(-5000.0..5000.0);
    let mut focus: Vec<usize> = Vec::new();
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random_bool(0.08) {
            // re-target: none, one or two objects
            focus.clear();
            let k = rng.random_range(0..3usize);
            while focus.len() < k {
                let i = rng.random_range(0..OBJECT_POOL.len());
                if !focus.contains(&i) {
                    focus.push(i);
                }
            }
        }
        let entries = OBJECT_POOL
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let near = focus.contains(&i) && !rng.random_bool(0.05);
                let angle = if near {
                    rng.random_range(0.0..params.angular_threshold_deg)
                } else {
                    rng.random_range(params.angular_threshold_deg + 0.01..180.0)
                };
                RankedEntry {
                    object_id: id.to_string(),
                    angle_deg: angle,
                }
            })
            .collect();
        frames.push(RankedFrame::from_unsorted(t, entries));
        let gap: f64 = if rng.random_bool(0.03) {
            period * rng.random_range(2.0..15.0)
        } else {
            period * (1.0 + rng.random_range(-jitter..=jitter))
        };
        t += gap.max(0.5);
    }
    frames
}

pub fn oracle_frames(frames: &[RankedFrame], params: &SegmentationParams) -> Vec<OracleFrame> {
    frames
        .iter()
        .map(|f| OracleFrame {
            t: f.timestamp_ms,
            candidates: f
                .entries
                .iter()
                .filter(|e| e.angle_deg <= params.angular_threshold_deg)
                .map(|e| e.object_id.clone())
                .collect(),
        })
        .collect()
}

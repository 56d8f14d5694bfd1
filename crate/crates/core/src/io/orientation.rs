use crate::geometry::Vec3;

/// Head forward direction for a `[w, x, y, z]` orientation quaternion; the
/// head's own forward axis is +X. Returns `None` for a zero quaternion.
pub fn forward_from_quaternion(q: [f64; 4]) -> Option<Vec3> {
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    let [w, x, y, z] = q.map(|c| c / n);
    Some(Vec3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y + w * z),
        2.0 * (x * z - w * y),
    ))
}

/// Head forward direction for `[yaw, pitch, roll]` in degrees, applied in
/// Z-Y-X order. Positive pitch looks down; roll does not move the forward
/// axis.
pub fn forward_from_euler_deg(e: [f64; 3]) -> Vec3 {
    let (yaw, pitch) = (e[0].to_radians(), e[1].to_radians());
    Vec3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), -pitch.sin())
}

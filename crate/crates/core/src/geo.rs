//! Great-circle distances on a 6371 km sphere.


pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Haversine distance in km between two (lat, lon) points given in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (0.5 * dp).sin().powi(2) + p1.cos() * p2.cos() * (0.5 * dl).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Distance in km from a point to the segment (a, b), using a local
/// equirectangular projection centred on the point. Segments are a few km
/// long in coastline files, where the projection error is negligible.
pub fn point_segment_km(lat: f64, lon: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let kx = EARTH_RADIUS_KM * lat.to_radians().cos() * core::f64::consts::PI / 180.0;
    let ky = EARTH_RADIUS_KM * core::f64::consts::PI / 180.0;
    let (ax, ay) = ((a.1 - lon) * kx, (a.0 - lat) * ky);
    let (bx, by) = ((b.1 - lon) * kx, (b.0 - lat) * ky);
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (-(ax * dx + ay * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (px, py) = (ax + t * dx, ay + t * dy);
    let projected = (px * px + py * py).sqrt();
    // never report more than the exact distance to either endpoint
    projected
        .min(haversine_km(lat, lon, a.0, a.1))
        .min(haversine_km(lat, lon, b.0, b.1))
}

/// Minimum distance from a point to a polyline of (lat, lon) vertices.
pub fn distance_to_polyline_km(lat: f64, lon: f64, vertices: &[(f64, f64)]) -> f64 {
    match vertices.len() {
        0 => f64::INFINITY,
        1 => haversine_km(lat, lon, vertices[0].0, vertices[0].1),
        _ => vertices
            .windows(2)
            .map(|w| point_segment_km(lat, lon, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_degree_of_latitude() {
        let d = haversine_km(53.0, -8.0, 54.0, -8.0);
        assert!((d - 111.194_926_644_558_73).abs() < 1e-9);
        assert_eq!(haversine_km(53.0, -8.0, 53.0, -8.0), 0.0);
    }

    #[test]
    fn segment_distance_perpendicular() {
        // point 0.1 deg north of the midpoint of an east-west segment
        let d = point_segment_km(53.1, -8.0, (53.0, -8.5), (53.0, -7.5));
        assert!((d - 11.119).abs() < 0.01);
        let poly = [(53.0, -8.5), (53.0, -7.5), (54.0, -7.5)];
        assert!((distance_to_polyline_km(53.1, -8.0, &poly) - d).abs() < 1e-12);
    }
}

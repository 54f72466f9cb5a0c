//! Scalar math without `std`. Thin wrappers over `libm` so call sites read
//! like the inherent float methods.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn asin(x: f64) -> f64 {
    libm::asin(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    sqrt(variance(xs))
}

/// Linear-interpolation percentile (`q` in `[0, 100]`) of unsorted data.
pub fn percentile(xs: &[f64], q: f64) -> f64 {
    debug_assert!(!xs.is_empty());
    let mut sorted = alloc::vec::Vec::from(xs);
    sorted.sort_by(f64::total_cmp);
    let pos = (q / 100.0) * (sorted.len() - 1) as f64;
    let lo = floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Great-circle distance in kilometres between two (lat, lon) points in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0;
    let to_rad = core::f64::consts::PI / 180.0;
    let dlat = (lat2 - lat1) * to_rad;
    let dlon = (lon2 - lon1) * to_rad;
    let a = sin(dlat / 2.0) * sin(dlat / 2.0)
        + cos(lat1 * to_rad) * cos(lat2 * to_rad) * sin(dlon / 2.0) * sin(dlon / 2.0);
    2.0 * EARTH_RADIUS_KM * asin(sqrt(a.min(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_linear_interpolation() {
        let xs: alloc::vec::Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert!((percentile(&xs, 99.0) - 99.01).abs() < 1e-12);
        assert_eq!(percentile(&xs, 100.0), 100.0);
        assert_eq!(percentile(&xs, 0.0), 1.0);
    }

    #[test]
    fn haversine_zero_and_symmetry() {
        assert_eq!(haversine_km(30.0, -97.0, 30.0, -97.0), 0.0);
        let d1 = haversine_km(30.0, -97.0, 31.0, -98.0);
        let d2 = haversine_km(31.0, -98.0, 30.0, -97.0);
        assert!((d1 - d2).abs() < 1e-9);
        // one degree of latitude is about 111 km
        assert!((haversine_km(0.0, 0.0, 1.0, 0.0) - 111.19).abs() < 0.1);
    }
}

//! Great-circle distances between bidder offices and project sites.

use thiserror::Error;

/// Earth radius in miles used throughout the crate.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    BadLatitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    BadLongitude(f64),
}

fn check(lat: f64, lon: f64) -> Result<(), GeoError> {
    if !lat.is_finite() || lat.abs() > 90.0 {
        return Err(GeoError::BadLatitude(lat));
    }
    if !lon.is_finite() || lon.abs() > 180.0 {
        return Err(GeoError::BadLongitude(lon));
    }
    Ok(())
}

/// Haversine distance in miles between two (lat, lon) points in degrees.
pub fn haversine_miles(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64, GeoError> {
    check(lat1, lon1)?;
    check(lat2, lon2)?;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    let c = 2.0 * a.sqrt().min(1.0).asin();
    Ok(EARTH_RADIUS_MILES * c)
}

//! Spherical-Earth geometry seen from a satellite at a fixed snapshot.
//!
//! Angles cross the public API in degrees. Lengths are kilometres unless a
//! name says otherwise. The antenna frame has `u` pointing east and `v`
//! pointing north at the subsatellite point, with boresight at nadir.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used throughout.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Speed of light in vacuum.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid orbit geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("cone edge at tilt {0:.4} deg does not intersect the Earth")]
    NoIntersection(f64),
    #[error("point is beyond the satellite horizon")]
    BeyondHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitGeometry {
    pub earth_radius_km: f64,
    pub orbit_height_km: f64,
    pub min_elevation_deg: f64,
    pub wavelength_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub lat: f64,
    pub lon: f64,
}

/// Direction of a ground point as seen from the satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingAngles {
    pub tilt: f64,
    pub azimuth: f64,
    pub u: f64,
    pub v: f64,
    pub slant_range_km: f64,
    pub elevation: f64,
}

impl GroundPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        GroundPoint { lat, lon }
    }

    /// Unit vector in Earth-centred coordinates.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (la, lo) = (self.lat.to_radians(), self.lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    }

    pub fn from_unit_vector(p: [f64; 3]) -> Self {
        let n = norm(p);
        let lat = (p[2] / n).clamp(-1.0, 1.0).asin().to_degrees();
        let mut lon = p[1].atan2(p[0]).to_degrees();
        if lon <= -180.0 {
            lon += 360.0;
        }
        GroundPoint { lat, lon }
    }

    /// Central angle to `other` in radians.
    pub fn central_angle(&self, other: &GroundPoint) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let c = cross(a, b);
        norm(c).atan2(dot(a, b))
    }

    /// Point reached by travelling `arc` radians along initial `bearing` (degrees clockwise from north).
    pub fn destination(&self, bearing_deg: f64, arc: f64) -> GroundPoint {
        let (east, north) = local_axes(self);
        let p = self.unit_vector();
        let b = bearing_deg.to_radians();
        let t = add(scale(north, b.cos()), scale(east, b.sin()));
        GroundPoint::from_unit_vector(add(scale(p, arc.cos()), scale(t, arc.sin())))
    }

    /// Initial bearing towards `other`, degrees clockwise from north.
    pub fn bearing_to(&self, other: &GroundPoint) -> f64 {
        let (east, north) = local_axes(self);
        let q = other.unit_vector();
        dot(q, east).atan2(dot(q, north)).to_degrees()
    }
}

impl OrbitGeometry {
    pub fn new(
        earth_radius_km: f64,
        orbit_height_km: f64,
        min_elevation_deg: f64,
        wavelength_m: f64,
    ) -> Result<Self, GeometryError> {
        let g = OrbitGeometry {
            earth_radius_km,
            orbit_height_km,
            min_elevation_deg,
            wavelength_m,
        };
        g.validate()?;
        Ok(g)
    }

    /// 1300 km orbit, 30 deg minimum elevation, 20 GHz carrier.
    pub fn reference() -> Self {
        OrbitGeometry {
            earth_radius_km: EARTH_RADIUS_KM,
            orbit_height_km: 1300.0,
            min_elevation_deg: 30.0,
            wavelength_m: SPEED_OF_LIGHT / 20e9,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.earth_radius_km > 0.0) {
            return Err(GeometryError::InvalidGeometry(
                "earth radius must be positive",
            ));
        }
        if !(self.orbit_height_km > 0.0) {
            return Err(GeometryError::InvalidGeometry(
                "orbit height must be positive",
            ));
        }
        if !(self.min_elevation_deg > 0.0 && self.min_elevation_deg < 90.0) {
            return Err(GeometryError::InvalidGeometry(
                "minimum elevation must lie in (0, 90)",
            ));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(GeometryError::InvalidGeometry(
                "wavelength must be positive",
            ));
        }
        Ok(())
    }

    fn orbit_radius(&self) -> f64 {
        self.earth_radius_km + self.orbit_height_km
    }

    /// Tilt off nadir at which a ground point is seen at elevation `el_deg`.
    pub fn tilt_from_elevation(&self, el_deg: f64) -> f64 {
        let s = self.earth_radius_km * el_deg.to_radians().cos() / self.orbit_radius();
        s.asin().to_degrees()
    }

    /// Elevation of the ground point hit by a ray at `tilt_deg`.
    pub fn elevation_from_tilt(&self, tilt_deg: f64) -> Result<f64, GeometryError> {
        let c = tilt_deg.to_radians().sin() * self.orbit_radius() / self.earth_radius_km;
        if c > 1.0 {
            return Err(GeometryError::NoIntersection(tilt_deg));
        }
        Ok(c.acos().to_degrees())
    }

    /// Tilt of the ray grazing the Earth.
    pub fn horizon_tilt(&self) -> f64 {
        (self.earth_radius_km / self.orbit_radius())
            .asin()
            .to_degrees()
    }

    /// Earth central angle (deg) and slant range (km) for elevation `el_deg`.
    pub fn central_angle_and_range(&self, el_deg: f64) -> (f64, f64) {
        let tilt = self.tilt_from_elevation(el_deg);
        let gamma = 90.0 - el_deg - tilt;
        if tilt.abs() < 1e-9 {
            return (gamma, self.orbit_height_km);
        }
        // The Earth radius is the side opposite the tilt angle.
        let r = self.earth_radius_km * gamma.to_radians().sin() / tilt.to_radians().sin();
        (gamma, r)
    }

    /// Earth central angle (rad) of the point hit at `tilt` (rad), signed like `tilt`.
    pub fn central_angle_at_tilt(&self, tilt: f64) -> Result<f64, GeometryError> {
        let s = self.orbit_radius() / self.earth_radius_km * tilt.abs().sin();
        if s > 1.0 {
            return Err(GeometryError::NoIntersection(tilt.to_degrees()));
        }
        Ok(tilt.signum() * (s.asin() - tilt.abs()))
    }

    /// Ground arc (km) from the subsatellite point to the point hit at `tilt_deg`.
    pub fn ground_distance_at_tilt(&self, tilt_deg: f64) -> Result<f64, GeometryError> {
        Ok(self.earth_radius_km * self.central_angle_at_tilt(tilt_deg.to_radians())?)
    }

    /// Ground arc from nadir to the minimum-elevation contour.
    pub fn coverage_radius_km(&self) -> f64 {
        let (gamma, _) = self.central_angle_and_range(self.min_elevation_deg);
        self.earth_radius_km * gamma.to_radians()
    }

    /// Tilt of the outermost beam centre whose scan-broadened half beamwidth
    /// still reaches the minimum-elevation contour.
    pub fn effective_max_tilt(&self, nadir_beamwidth_deg: f64) -> f64 {
        let edge = self.tilt_from_elevation(self.min_elevation_deg);
        let half = 0.5 * nadir_beamwidth_deg / edge.to_radians().cos();
        (edge - half).max(0.0)
    }

    /// Half the ground arc between the Earth intersections of the cone edges
    /// `tilt - bw/2` and `tilt + bw/2`, taken in the radial plane.
    pub fn footprint_radius(
        &self,
        tilt_deg: f64,
        beamwidth_deg: f64,
    ) -> Result<f64, GeometryError> {
        let t = tilt_deg.to_radians();
        let hb = 0.5 * beamwidth_deg.to_radians();
        let outer = self.central_angle_at_tilt(t + hb)?;
        let inner = self.central_angle_at_tilt(t - hb)?;
        Ok(0.5 * self.earth_radius_km * (outer - inner))
    }

    /// Footprint radius of a beam whose nadir beamwidth broadens as 1/cos(tilt) when scanned.
    pub fn scanned_footprint_radius(
        &self,
        tilt_deg: f64,
        nadir_beamwidth_deg: f64,
    ) -> Result<f64, GeometryError> {
        self.footprint_radius(tilt_deg, nadir_beamwidth_deg / tilt_deg.to_radians().cos())
    }

    /// Satellite position in Earth-centred km.
    pub fn satellite_position(&self, sat_nadir: &GroundPoint) -> [f64; 3] {
        scale(sat_nadir.unit_vector(), self.orbit_radius())
    }

    /// Pointing angles of `p` from a satellite above `sat_nadir`.
    pub fn ground_to_uv(
        &self,
        sat_nadir: &GroundPoint,
        p: &GroundPoint,
    ) -> Result<PointingAngles, GeometryError> {
        let s_hat = sat_nadir.unit_vector();
        let (east, north) = local_axes(sat_nadir);
        let p_hat = p.unit_vector();
        let sat = scale(s_hat, self.orbit_radius());
        let d = sub(scale(p_hat, self.earth_radius_km), sat);
        let r = norm(d);
        if r == 0.0 {
            return Err(GeometryError::BeyondHorizon);
        }
        let sin_el = -dot(p_hat, d) / r;
        if sin_el < -1e-12 {
            return Err(GeometryError::BeyondHorizon);
        }
        let u = dot(d, east) / r;
        let v = dot(d, north) / r;
        let cos_t = -dot(d, s_hat) / r;
        let tilt = (u.hypot(v)).atan2(cos_t).to_degrees();
        let azimuth = if u == 0.0 && v == 0.0 {
            0.0
        } else {
            v.atan2(u).to_degrees()
        };
        Ok(PointingAngles {
            tilt,
            azimuth,
            u,
            v,
            slant_range_km: r,
            elevation: sin_el.clamp(-1.0, 1.0).asin().to_degrees(),
        })
    }

    /// Ground point hit by the ray with direction cosines `(u, v)`.
    pub fn uv_to_ground(
        &self,
        sat_nadir: &GroundPoint,
        u: f64,
        v: f64,
    ) -> Result<GroundPoint, GeometryError> {
        let w2 = 1.0 - u * u - v * v;
        if w2 < 0.0 {
            return Err(GeometryError::BeyondHorizon);
        }
        let s_hat = sat_nadir.unit_vector();
        let (east, north) = local_axes(sat_nadir);
        let dir = add(
            add(scale(east, u), scale(north, v)),
            scale(s_hat, -w2.sqrt()),
        );
        let sat = scale(s_hat, self.orbit_radius());
        // |sat + t dir| = R, nearest root.
        let b = dot(sat, dir);
        let c = dot(sat, sat) - self.earth_radius_km * self.earth_radius_km;
        let disc = b * b - c;
        if disc < 0.0 {
            return Err(GeometryError::BeyondHorizon);
        }
        let t = -b - disc.sqrt();
        Ok(GroundPoint::from_unit_vector(add(sat, scale(dir, t))))
    }
}

/// East and north unit vectors at `p`. At the poles east is taken along +y.
pub fn local_axes(p: &GroundPoint) -> ([f64; 3], [f64; 3]) {
    let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
    let east = [-lo.sin(), lo.cos(), 0.0];
    let north = [-la.sin() * lo.cos(), -la.sin() * lo.sin(), la.cos()];
    (east, north)
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: [f64; 3], k: f64) -> [f64; 3] {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geo() -> OrbitGeometry {
        OrbitGeometry::reference()
    }

    // Slant range from the cosine rule on the Earth-centre triangle, independent of the law of sines.
    fn slant_oracle(g: &OrbitGeometry, gamma_deg: f64) -> f64 {
        let (r, big) = (g.earth_radius_km, g.earth_radius_km + g.orbit_height_km);
        (r * r + big * big - 2.0 * r * big * gamma_deg.to_radians().cos()).sqrt()
    }

    #[test]
    fn tilt_examples() {
        let g = geo();
        assert_abs_diff_eq!(g.tilt_from_elevation(90.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.tilt_from_elevation(30.0), 45.993, epsilon = 1e-3);
        let expected = (6371.0 / 7671.0 * 60f64.to_radians().cos())
            .asin()
            .to_degrees();
        assert_abs_diff_eq!(g.tilt_from_elevation(60.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(g.tilt_from_elevation(60.0), 24.54, epsilon = 0.01);
    }

    #[test]
    fn central_angle_examples() {
        let g = geo();
        let (gamma, r) = g.central_angle_and_range(90.0);
        assert_abs_diff_eq!(gamma, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 1300.0, epsilon = 1e-9);

        let (gamma, r) = g.central_angle_and_range(30.0);
        assert_abs_diff_eq!(gamma, 14.0, epsilon = 0.1);
        assert_abs_diff_eq!(g.coverage_radius_km(), 1557.5, epsilon = 1.0);
        assert_abs_diff_eq!(r, slant_oracle(&g, gamma), epsilon = 1e-6);

        let (gamma, _) = g.central_angle_and_range(0.0);
        let horizon = 90.0 - (6371.0f64 / 7671.0).asin().to_degrees();
        assert_abs_diff_eq!(gamma, horizon, epsilon = 1e-9);
    }

    #[test]
    fn max_tilt_examples() {
        let g = geo();
        assert_abs_diff_eq!(g.effective_max_tilt(3.64), 43.37, epsilon = 0.02);
        assert_abs_diff_eq!(
            g.effective_max_tilt(0.0),
            g.tilt_from_elevation(30.0),
            epsilon = 1e-12
        );
        let flat = OrbitGeometry {
            min_elevation_deg: 90.0,
            ..g
        };
        assert_eq!(flat.effective_max_tilt(3.64), 0.0);
    }

    #[test]
    fn footprint_radius_examples() {
        let g = geo();
        assert_abs_diff_eq!(g.footprint_radius(0.0, 3.64).unwrap(), 41.3, epsilon = 0.5);
        let tiny: f64 = 1e-4;
        let flat = 1300.0 * (0.5 * tiny).to_radians().tan();
        assert_abs_diff_eq!(
            g.footprint_radius(0.0, tiny).unwrap(),
            flat,
            epsilon = flat * 1e-3
        );
        assert!(matches!(
            g.footprint_radius(g.horizon_tilt(), 3.0),
            Err(GeometryError::NoIntersection(_))
        ));
    }

    #[test]
    fn scanned_footprint_at_max_tilt() {
        let g = geo();
        let tmax = g.effective_max_tilt(3.64);
        assert_abs_diff_eq!(
            g.scanned_footprint_radius(tmax, 3.64).unwrap(),
            156.4,
            epsilon = 0.2
        );
        assert_abs_diff_eq!(
            g.footprint_radius(tmax, 3.64).unwrap(),
            113.2,
            epsilon = 0.2
        );
    }

    #[test]
    fn nadir_point_maps_to_boresight() {
        let g = geo();
        let n = GroundPoint::new(10.0, 20.0);
        let a = g.ground_to_uv(&n, &n).unwrap();
        assert_abs_diff_eq!(a.tilt, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.u, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.slant_range_km, 1300.0, epsilon = 1e-6);
        assert_abs_diff_eq!(a.elevation, 90.0, epsilon = 1e-6);
    }

    #[test]
    fn min_elevation_contour_point() {
        let g = geo();
        let n = GroundPoint::new(0.0, 0.0);
        let arc = g.coverage_radius_km() / g.earth_radius_km;
        let p = n.destination(37.0, arc);
        let a = g.ground_to_uv(&n, &p).unwrap();
        assert_abs_diff_eq!(a.elevation, 30.0, epsilon = 1e-6);
        assert_abs_diff_eq!(a.tilt, 45.993, epsilon = 1e-3);
        // Bearing 37 deg from north is 53 deg from east.
        assert_abs_diff_eq!(a.azimuth, 53.0, epsilon = 1e-6);
    }

    #[test]
    fn beyond_horizon_is_rejected() {
        let g = geo();
        let n = GroundPoint::new(0.0, 0.0);
        assert_eq!(
            g.ground_to_uv(&n, &GroundPoint::new(0.0, 60.0)),
            Err(GeometryError::BeyondHorizon)
        );
        assert_eq!(
            g.uv_to_ground(&n, 0.9, 0.0),
            Err(GeometryError::BeyondHorizon)
        );
    }

    #[test]
    fn distance_matches_slant_range() {
        let g = geo();
        let n = GroundPoint::new(0.0, 0.0);
        for el in [35.0, 50.0, 70.0, 89.0] {
            let (gamma, r) = g.central_angle_and_range(el);
            let p = n.destination(0.0, gamma.to_radians());
            let a = g.ground_to_uv(&n, &p).unwrap();
            assert_abs_diff_eq!(a.slant_range_km, r, epsilon = 1e-6);
            assert_abs_diff_eq!(a.elevation, el, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn triangle_closure(el in 0.0f64..90.0) {
            let g = geo();
            let (gamma, _) = g.central_angle_and_range(el);
            prop_assert!((el + g.tilt_from_elevation(el) + gamma - 90.0).abs() < 1e-9);
        }

        #[test]
        fn tilt_decreases_with_elevation(a in 0.0f64..89.0, d in 0.01f64..1.0) {
            let g = geo();
            prop_assert!(g.tilt_from_elevation(a + d) < g.tilt_from_elevation(a));
        }

        #[test]
        fn footprint_grows_with_tilt(t in 0.0f64..40.0, d in 0.05f64..3.0) {
            let g = geo();
            prop_assert!(g.footprint_radius(t + d, 3.64).unwrap() > g.footprint_radius(t, 3.64).unwrap());
        }

        #[test]
        fn round_trip_under_one_metre(
            lat in -60.0f64..60.0,
            lon in -179.0f64..179.0,
            bearing in 0.0f64..360.0,
            frac in 0.0f64..1.0,
        ) {
            let g = geo();
            let n = GroundPoint::new(lat, lon);
            let arc = frac * g.coverage_radius_km() / g.earth_radius_km;
            let p = n.destination(bearing, arc);
            let a = g.ground_to_uv(&n, &p).unwrap();
            let sh = g.horizon_tilt().to_radians().sin();
            prop_assert!(a.u * a.u + a.v * a.v <= sh * sh + 1e-12);
            let q = g.uv_to_ground(&n, a.u, a.v).unwrap();
            prop_assert!(p.central_angle(&q) * g.earth_radius_km < 1e-3);
        }
    }
}

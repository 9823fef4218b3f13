//! Earth-fixed hexagonal grids of beam centres and the per-beam widening
//! targets that go with each layout design.

use crate::geometry::{GeometryError, GroundPoint, OrbitGeometry, PointingAngles};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const CONTOUR_SAMPLES: usize = 720;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("invalid layout spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Layout family.
///
/// `A` sizes the grid for the widest (edge) footprint and widens every beam
/// to it. `B` sizes it for the nadir footprint without widening. `C` uses
/// the footprint at `alpha` times the maximum tilt and widens only the beams
/// inside that tilt. `D` spaces the grid by the ground distance of a
/// reference tilt and never widens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Design {
    A,
    B,
    C { alpha: f64 },
    D { theta_ref_deg: f64 },
}

impl Design {
    /// The nine reference designs by name.
    pub fn named(name: &str) -> Option<Design> {
        Some(match name {
            "A" => Design::A,
            "B" => Design::B,
            "C1" => Design::C { alpha: 0.5 },
            "C2" => Design::C { alpha: 0.75 },
            "D1" => Design::D { theta_ref_deg: 4.8 },
            "D2" => Design::D { theta_ref_deg: 6.0 },
            "D3" => Design::D { theta_ref_deg: 7.0 },
            "D4" => Design::D { theta_ref_deg: 7.5 },
            "D5" => Design::D { theta_ref_deg: 9.0 },
            _ => return None,
        })
    }

    pub const REFERENCE_NAMES: [&'static str; 9] =
        ["A", "B", "C1", "C2", "D1", "D2", "D3", "D4", "D5"];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub design: Design,
    pub geo: OrbitGeometry,
    pub nadir_beamwidth_deg: f64,
    /// Shift of the grid origin from the subsatellite point, km east and north.
    pub grid_offset_km: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub id: usize,
    pub center: GroundPoint,
    /// Offset grid coordinates: `m` steps east along a row, `n` rows north.
    pub grid: (i64, i64),
    pub pointing: PointingAngles,
    pub widening_deg: (f64, f64),
    pub radius_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamLayout {
    pub spec: LayoutSpec,
    pub sat_nadir: GroundPoint,
    pub grid_spacing_km: f64,
    pub beams: Vec<Beam>,
}

/// One lattice site produced by `build_hex_grid`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSite {
    pub point: GroundPoint,
    pub m: i64,
    pub n: i64,
}

impl LayoutSpec {
    pub fn new(design: Design, geo: OrbitGeometry, nadir_beamwidth_deg: f64) -> Self {
        LayoutSpec {
            design,
            geo,
            nadir_beamwidth_deg,
            grid_offset_km: [0.0, 0.0],
        }
    }

    pub fn max_tilt(&self) -> f64 {
        self.geo.effective_max_tilt(self.nadir_beamwidth_deg)
    }

    /// Beam centres are kept out to the minimum-elevation contour.
    pub fn center_max_tilt(&self) -> f64 {
        self.geo.tilt_from_elevation(self.geo.min_elevation_deg)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        self.geo
            .validate()
            .map_err(|e| LayoutError::InvalidSpec(e.to_string()))?;
        if !(self.nadir_beamwidth_deg > 0.0) {
            return Err(LayoutError::InvalidSpec(
                "nadir beamwidth must be positive".into(),
            ));
        }
        match self.design {
            Design::C { alpha } if !(alpha > 0.0 && alpha < 1.0) => Err(LayoutError::InvalidSpec(
                format!("design C needs 0 < alpha < 1, got {alpha}"),
            )),
            Design::D { theta_ref_deg }
                if !(theta_ref_deg >= self.nadir_beamwidth_deg
                    && theta_ref_deg < self.max_tilt()) =>
            {
                Err(LayoutError::InvalidSpec(format!(
                    "design D needs {} <= theta_ref < {:.3}, got {theta_ref_deg}",
                    self.nadir_beamwidth_deg,
                    self.max_tilt()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Footprint radius every widened beam is stretched to, if any.
    pub fn reference_radius_km(&self) -> Result<Option<f64>, LayoutError> {
        let tmax = self.max_tilt();
        let bw = self.nadir_beamwidth_deg;
        Ok(match self.design {
            Design::A => Some(self.geo.scanned_footprint_radius(tmax, bw)?),
            Design::C { alpha } => Some(self.geo.scanned_footprint_radius(alpha * tmax, bw)?),
            Design::B | Design::D { .. } => None,
        })
    }
}

/// Distance between neighbouring beam centres.
pub fn grid_spacing(spec: &LayoutSpec) -> Result<f64, LayoutError> {
    spec.validate()?;
    let s3 = 3f64.sqrt();
    let geo = &spec.geo;
    Ok(match spec.design {
        Design::B => s3 * geo.footprint_radius(0.0, spec.nadir_beamwidth_deg)?,
        Design::A | Design::C { .. } => s3 * spec.reference_radius_km()?.unwrap(),
        // Half the reference tilt on each side of nadir, so theta_ref equal
        // to the nadir beamwidth reproduces design B.
        Design::D { theta_ref_deg } => s3 * geo.ground_distance_at_tilt(0.5 * theta_ref_deg)?,
    })
}

/// Hexagonal lattice laid out on the tangent plane at `origin` and wrapped
/// onto the sphere by azimuthal-equidistant projection. Rows run east-west.
/// Sites seen from `sat_nadir` at more than `max_tilt_deg` are dropped.
pub fn build_hex_grid(
    d_g: f64,
    origin: &GroundPoint,
    sat_nadir: &GroundPoint,
    geo: &OrbitGeometry,
    max_tilt_deg: f64,
) -> Vec<GridSite> {
    let dy = d_g * 3f64.sqrt() / 2.0;
    let reach = geo.coverage_radius_km() + origin.central_angle(sat_nadir) * geo.earth_radius_km;
    let rows = (reach / dy).ceil() as i64 + 1;
    let cols = (reach / d_g).ceil() as i64 + 1;
    let mut sites = Vec::new();
    for n in -rows..=rows {
        for m in -cols..=cols {
            let x = d_g * (m as f64 + 0.5 * n.rem_euclid(2) as f64);
            let y = dy * n as f64;
            let rho = x.hypot(y);
            if rho > reach + d_g {
                continue;
            }
            let point = if rho == 0.0 {
                *origin
            } else {
                origin.destination(x.atan2(y).to_degrees(), rho / geo.earth_radius_km)
            };
            let Ok(a) = geo.ground_to_uv(sat_nadir, &point) else {
                continue;
            };
            if a.tilt <= max_tilt_deg {
                sites.push(GridSite { point, m, n });
            }
        }
    }
    sites
}

/// Angular extents, radial and tangential, of the ground circle of
/// `radius_km` around a beam centre, seen from the satellite.
pub fn contour_extent(
    geo: &OrbitGeometry,
    sat_nadir: &GroundPoint,
    center: &GroundPoint,
    pointing: &PointingAngles,
    radius_km: f64,
) -> Result<(f64, f64), LayoutError> {
    let (st, ct) = pointing.tilt.to_radians().sin_cos();
    let (sp, cp) = pointing.azimuth.to_radians().sin_cos();
    let p = [st * cp, st * sp, ct];
    let radial = [ct * cp, ct * sp, -st];
    let tangential = [-sp, cp, 0.0];
    let (mut rmin, mut rmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let arc = radius_km / geo.earth_radius_km;
    for i in 0..CONTOUR_SAMPLES {
        let bearing = 360.0 * i as f64 / CONTOUR_SAMPLES as f64;
        let q = center.destination(bearing, arc);
        let a = geo.ground_to_uv(sat_nadir, &q)?;
        let w = (1.0 - a.u * a.u - a.v * a.v).max(0.0).sqrt();
        let d = [a.u, a.v, w];
        let along = crate::geometry::dot(d, p);
        let r = crate::geometry::dot(d, radial).atan2(along).to_degrees();
        let t = crate::geometry::dot(d, tangential)
            .atan2(along)
            .to_degrees();
        rmin = rmin.min(r);
        rmax = rmax.max(r);
        tmin = tmin.min(t);
        tmax = tmax.max(t);
    }
    Ok((rmax - rmin, tmax - tmin))
}

/// Widening `(w_x, w_y)` for a beam: radial and tangential extents of the
/// design's reference footprint, or zero where the design does not widen.
pub fn widening_params(
    spec: &LayoutSpec,
    sat_nadir: &GroundPoint,
    center: &GroundPoint,
    pointing: &PointingAngles,
) -> Result<(f64, f64), LayoutError> {
    let Some(radius) = spec.reference_radius_km()? else {
        return Ok((0.0, 0.0));
    };
    if let Design::C { alpha } = spec.design {
        if pointing.tilt >= alpha * spec.max_tilt() {
            return Ok((0.0, 0.0));
        }
    }
    contour_extent(&spec.geo, sat_nadir, center, pointing, radius)
}

pub fn build_layout(spec: &LayoutSpec, sat_nadir: &GroundPoint) -> Result<BeamLayout, LayoutError> {
    let d_g = grid_spacing(spec)?;
    let [east, north] = spec.grid_offset_km;
    let origin = if east == 0.0 && north == 0.0 {
        *sat_nadir
    } else {
        sat_nadir.destination(
            east.atan2(north).to_degrees(),
            east.hypot(north) / spec.geo.earth_radius_km,
        )
    };
    let sites = build_hex_grid(d_g, &origin, sat_nadir, &spec.geo, spec.center_max_tilt());
    let mut beams = Vec::with_capacity(sites.len());
    for (id, site) in sites.iter().enumerate() {
        let pointing = spec.geo.ground_to_uv(sat_nadir, &site.point)?;
        let widening_deg = widening_params(spec, sat_nadir, &site.point, &pointing)?;
        let radius_km = spec
            .geo
            .scanned_footprint_radius(pointing.tilt, spec.nadir_beamwidth_deg)?;
        beams.push(Beam {
            id,
            center: site.point,
            grid: (site.m, site.n),
            pointing,
            widening_deg,
            radius_km,
        });
    }
    Ok(BeamLayout {
        spec: *spec,
        sat_nadir: *sat_nadir,
        grid_spacing_km: d_g,
        beams,
    })
}

impl BeamLayout {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BW: f64 = 3.64;

    fn spec(design: Design) -> LayoutSpec {
        LayoutSpec::new(design, OrbitGeometry::reference(), BW)
    }

    fn nadir() -> GroundPoint {
        GroundPoint::new(0.0, 0.0)
    }

    #[test]
    fn spacing_values() {
        assert_abs_diff_eq!(
            grid_spacing(&spec(Design::B)).unwrap(),
            71.56,
            epsilon = 0.05
        );
        assert_abs_diff_eq!(
            grid_spacing(&spec(Design::D { theta_ref_deg: BW })).unwrap(),
            grid_spacing(&spec(Design::B)).unwrap(),
            epsilon = 1e-9
        );
        let d3 = grid_spacing(&spec(Design::named("D3").unwrap())).unwrap();
        assert_abs_diff_eq!(d3, 137.8, epsilon = 0.1);
        let a = grid_spacing(&spec(Design::A)).unwrap();
        assert_abs_diff_eq!(a, 3f64.sqrt() * 156.38, epsilon = 0.3);
    }

    #[test]
    fn invalid_specs() {
        assert!(grid_spacing(&spec(Design::C { alpha: 1.5 })).is_err());
        assert!(grid_spacing(&spec(Design::C { alpha: 0.0 })).is_err());
        assert!(grid_spacing(&spec(Design::D {
            theta_ref_deg: 50.0
        }))
        .is_err());
        assert!(Design::named("E").is_none());
    }

    #[test]
    fn tangent_plane_lattice_is_hexagonal() {
        // Every interior site has six neighbours at exactly d_g in the plane.
        let d = 100.0;
        let pos = |m: i64, n: i64| {
            (
                d * (m as f64 + 0.5 * n.rem_euclid(2) as f64),
                d * 3f64.sqrt() / 2.0 * n as f64,
            )
        };
        for (m, n) in [(0, 0), (3, 1), (-2, -3)] {
            let (x0, y0) = pos(m, n);
            let mut count = 0;
            for dn in -2..=2 {
                for dm in -2..=2 {
                    let (x, y) = pos(m + dm, n + dn);
                    let r = (x - x0).hypot(y - y0);
                    if (r - d).abs() < 1e-9 {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, 6);
        }
    }

    #[test]
    fn spherical_lattice_is_nearly_regular() {
        let s = spec(Design::named("D3").unwrap());
        let l = build_layout(&s, &nadir()).unwrap();
        let d = l.grid_spacing_km;
        let r = s.geo.earth_radius_km;
        let by_grid: std::collections::HashMap<_, _> =
            l.beams.iter().map(|b| (b.grid, b)).collect();
        let mut checked = 0;
        for b in &l.beams {
            let (m, n) = b.grid;
            let odd = n.rem_euclid(2);
            let nbrs = [
                (m - 1, n),
                (m + 1, n),
                (m - 1 + odd, n - 1),
                (m + odd, n - 1),
                (m - 1 + odd, n + 1),
                (m + odd, n + 1),
            ];
            let found: Vec<_> = nbrs.iter().filter_map(|g| by_grid.get(g)).collect();
            if found.len() < 6 {
                continue;
            }
            for o in found {
                let dist = b.center.central_angle(&o.center) * r;
                assert!((dist / d - 1.0).abs() < 0.015, "{dist} vs {d}");
            }
            checked += 1;
        }
        assert!(checked > 300);
    }

    #[test]
    fn reference_beam_counts() {
        let kb = build_layout(&spec(Design::B), &nadir()).unwrap().len() as f64;
        let kd3 = build_layout(&spec(Design::named("D3").unwrap()), &nadir())
            .unwrap()
            .len() as f64;
        assert!((kb / 1723.0 - 1.0).abs() < 0.03, "K_B = {kb}");
        assert!((kd3 / 451.0 - 1.0).abs() < 0.03, "K_D3 = {kd3}");
    }

    #[test]
    fn counts_fall_as_spacing_grows() {
        let mut named: Vec<_> = Design::REFERENCE_NAMES
            .iter()
            .map(|n| {
                let s = spec(Design::named(n).unwrap());
                (
                    grid_spacing(&s).unwrap(),
                    build_layout(&s, &nadir()).unwrap().len(),
                )
            })
            .collect();
        named.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in named.windows(2) {
            assert!(w[1].1 < w[0].1, "{:?}", named);
        }
    }

    #[test]
    fn huge_spacing_leaves_origin() {
        let g = OrbitGeometry::reference();
        let sites = build_hex_grid(5000.0, &nadir(), &nadir(), &g, 46.0);
        assert_eq!(sites.len(), 1);
        assert_eq!((sites[0].m, sites[0].n), (0, 0));
    }

    #[test]
    fn widening_rules() {
        let b = build_layout(&spec(Design::B), &nadir()).unwrap();
        assert!(b.beams.iter().all(|x| x.widening_deg == (0.0, 0.0)));

        let s = spec(Design::C { alpha: 0.5 });
        let c = build_layout(&s, &nadir()).unwrap();
        let cut = 0.5 * s.max_tilt();
        for x in &c.beams {
            let widened = x.widening_deg != (0.0, 0.0);
            assert_eq!(widened, x.pointing.tilt < cut);
        }

        let a = build_layout(&spec(Design::A), &nadir()).unwrap();
        assert!(a
            .beams
            .iter()
            .all(|x| x.widening_deg.0 > 0.0 && x.widening_deg.1 > 0.0));
    }

    #[test]
    fn nadir_widening_matches_reference_footprint() {
        let g = OrbitGeometry::reference();
        for (design, radius) in [
            (Design::A, 156.38),
            (Design::C { alpha: 0.5 }, 54.35),
            (Design::C { alpha: 0.75 }, 79.89),
        ] {
            let s = spec(design);
            let p = g.ground_to_uv(&nadir(), &nadir()).unwrap();
            let (wx, wy) = widening_params(&s, &nadir(), &nadir(), &p).unwrap();
            // Oracle: a circle of ground radius r centred at nadir subtends a
            // cone whose half angle follows from the Earth-centre triangle.
            let gam = radius / g.earth_radius_km;
            let big = g.earth_radius_km + g.orbit_height_km;
            let half = (g.earth_radius_km * gam.sin()).atan2(big - g.earth_radius_km * gam.cos());
            assert_abs_diff_eq!(wx, 2.0 * half.to_degrees(), epsilon = 0.01);
            assert_abs_diff_eq!(wy, wx, epsilon = 1e-6);
        }
    }

    #[test]
    fn edge_beams_widen_mostly_in_azimuth() {
        let s = spec(Design::A);
        let a = build_layout(&s, &nadir()).unwrap();
        let edge = a
            .beams
            .iter()
            .max_by(|p, q| p.pointing.tilt.total_cmp(&q.pointing.tilt))
            .unwrap();
        let (wx, wy) = edge.widening_deg;
        let natural = BW / edge.pointing.tilt.to_radians().cos();
        assert!(wy > wx);
        assert!(wx < 1.2 * natural, "{wx} vs {natural}");
    }
}

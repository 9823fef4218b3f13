//! Planar direct-radiating array: element layout, beamformers, phase-taper
//! widening and pattern measurement.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Boresight gain of one radiating element, dBi.
pub const ELEMENT_GAIN_DBI: f64 = 4.7;
/// RF power available per element, W.
pub const POWER_PER_ELEMENT_W: f64 = 0.065;

/// Scale between the requested widening and the edge phase slope of the
/// quadratic taper. Recomputed by `calibrate_taper_gain` in the tests.
pub const TAPER_GAIN: f64 = 1.8010597229003906;

const SAMPLE_STEP_DEG: f64 = 0.01;
const DEFAULT_HALF_SPAN_DEG: f64 = 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("no closed main lobe around the pointing direction")]
    NoMainLobe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Element positions in metres, centred on the array centroid.
    pub positions: Vec<[f64; 2]>,
    pub spacing_m: f64,
    pub wavelength_m: f64,
    pub element_gain_dbi: f64,
    pub power_per_element_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    pub weights: Vec<Complex64>,
    pub power_w: f64,
    pub u: f64,
    pub v: f64,
    pub widening_deg: (f64, f64),
    pub rotation_deg: f64,
}

impl ArrayGeometry {
    /// Hexagonal lattice truncated to the `n` sites nearest the centre.
    pub fn build(n: usize, spacing_m: f64, wavelength_m: f64) -> Self {
        ArrayGeometry {
            positions: hex_patch(n, spacing_m),
            spacing_m,
            wavelength_m,
            element_gain_dbi: ELEMENT_GAIN_DBI,
            power_per_element_w: POWER_PER_ELEMENT_W,
        }
    }

    /// 512 elements at 0.65 wavelength spacing.
    pub fn reference(wavelength_m: f64) -> Self {
        Self::build(512, 0.65 * wavelength_m, wavelength_m)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_power_w(&self) -> f64 {
        self.power_per_element_w * self.len() as f64
    }

    pub fn aperture_radius_m(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(0.0, f64::max)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }

    /// Linear power gain of one element at `tilt_deg` off boresight.
    pub fn element_gain(&self, tilt_deg: f64) -> f64 {
        let c = tilt_deg.to_radians().cos().max(0.0);
        10f64.powf(self.element_gain_dbi / 10.0) * c * c
    }

    /// Per-element phase factors `exp(-j k (x u + y v))` for one direction.
    pub fn steering(&self, u: f64, v: f64) -> Vec<Complex64> {
        let k = self.wavenumber();
        self.positions
            .iter()
            .map(|p| {
                let (s, c) = (-k * (p[0] * u + p[1] * v)).sin_cos();
                Complex64::new(c, s)
            })
            .collect()
    }
}

fn hex_patch(n: usize, spacing: f64) -> Vec<[f64; 2]> {
    if n == 0 {
        return Vec::new();
    }
    // Squared lattice radius a^2 + ab + b^2 is an integer, so ties are exact.
    let mut ring = 1i64;
    while 3 * ring * (ring + 1) + 1 < 2 * n as i64 {
        ring += 1;
    }
    let reach = ring + 2;
    let mut sites = Vec::new();
    for b in -reach..=reach {
        for a in -reach..=reach {
            let x = a as f64 + 0.5 * b as f64;
            let y = b as f64 * 3f64.sqrt() / 2.0;
            let mut az = y.atan2(x);
            if az < 0.0 {
                az += 2.0 * PI;
            }
            sites.push((a * a + a * b + b * b, az, sites.len(), x, y));
        }
    }
    sites.sort_by(|p, q| p.0.cmp(&q.0).then(p.1.total_cmp(&q.1)).then(p.2.cmp(&q.2)));
    sites.truncate(n);
    let cx = sites.iter().map(|s| s.3).sum::<f64>() / n as f64;
    let cy = sites.iter().map(|s| s.4).sum::<f64>() / n as f64;
    sites
        .iter()
        .map(|s| [(s.3 - cx) * spacing, (s.4 - cy) * spacing])
        .collect()
}

/// Rigid rotation by `phi_deg`: `x_r = x cos - y sin`, `y_r = x sin + y cos`.
pub fn rotate_positions(positions: &[[f64; 2]], phi_deg: f64) -> Vec<[f64; 2]> {
    let (s, c) = phi_deg.to_radians().sin_cos();
    positions
        .iter()
        .map(|p| [p[0] * c - p[1] * s, p[0] * s + p[1] * c])
        .collect()
}

/// Uniform-amplitude beam steered to `(u, v)` carrying `power_w`.
pub fn phased_weights(arr: &ArrayGeometry, u: f64, v: f64, power_w: f64) -> BeamWeights {
    widened_weights(arr, u, v, 0.0, 0.0, 0.0, power_w)
}

/// Steered beam with a quadratic phase taper widening it by `wx_deg` along
/// azimuth `phi_deg` and `wy_deg` across it.
pub fn widened_weights(
    arr: &ArrayGeometry,
    u: f64,
    v: f64,
    phi_deg: f64,
    wx_deg: f64,
    wy_deg: f64,
    power_w: f64,
) -> BeamWeights {
    let k = arr.wavenumber();
    let amp = (power_w / arr.len() as f64).sqrt();
    let weights = if wx_deg == 0.0 && wy_deg == 0.0 {
        arr.positions
            .iter()
            .map(|p| Complex64::from_polar(amp, k * (p[0] * u + p[1] * v)))
            .collect()
    } else {
        let radius = arr.aperture_radius_m();
        let ax = taper_coefficient(wx_deg, radius);
        let ay = taper_coefficient(wy_deg, radius);
        // Rotating by -phi puts x_r along the beam azimuth.
        let rotated = rotate_positions(&arr.positions, -phi_deg);
        arr.positions
            .iter()
            .zip(&rotated)
            .map(|(p, r)| {
                let steer = p[0] * u + p[1] * v;
                let taper = ax * r[0] * r[0] + ay * r[1] * r[1];
                Complex64::from_polar(amp, k * (steer + taper))
            })
            .collect()
    };
    BeamWeights {
        weights,
        power_w,
        u,
        v,
        widening_deg: (wx_deg, wy_deg),
        rotation_deg: phi_deg,
    }
}

fn taper_coefficient(w_deg: f64, radius_m: f64) -> f64 {
    if radius_m == 0.0 {
        return 0.0;
    }
    TAPER_GAIN * (0.5 * w_deg.to_radians()).sin() / (2.0 * radius_m)
}

/// Field of `weights` towards `(u, v)`, including the element pattern.
pub fn field(arr: &ArrayGeometry, weights: &[Complex64], u: f64, v: f64) -> Complex64 {
    let k = arr.wavenumber();
    let mut acc = Complex64::new(0.0, 0.0);
    for (p, w) in arr.positions.iter().zip(weights) {
        let (s, c) = (-k * (p[0] * u + p[1] * v)).sin_cos();
        acc += w * Complex64::new(c, s);
    }
    let tilt = (u * u + v * v).sqrt().min(1.0).asin().to_degrees();
    acc * arr.element_gain(tilt).sqrt()
}

pub fn array_factor(
    arr: &ArrayGeometry,
    beam: &BeamWeights,
    directions: &[(f64, f64)],
) -> Vec<Complex64> {
    directions
        .iter()
        .map(|&(u, v)| field(arr, &beam.weights, u, v))
        .collect()
}

/// Direction cosines at angle `t_deg` from the pointing direction, along the
/// great circle heading towards azimuth `cut_deg` in the u-v plane.
fn cut_direction(u0: f64, v0: f64, cut_deg: f64, t_deg: f64) -> (f64, f64) {
    let w0 = (1.0 - u0 * u0 - v0 * v0).max(0.0).sqrt();
    let p = [u0, v0, w0];
    let (s, c) = cut_deg.to_radians().sin_cos();
    let d = [c, s, 0.0];
    let proj = d[0] * p[0] + d[1] * p[1];
    let mut t = [d[0] - proj * p[0], d[1] - proj * p[1], -proj * p[2]];
    let n = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    t = [t[0] / n, t[1] / n, t[2] / n];
    let (st, ct) = t_deg.to_radians().sin_cos();
    (ct * p[0] + st * t[0], ct * p[1] + st * t[1])
}

fn gain_db(arr: &ArrayGeometry, beam: &BeamWeights, cut_deg: f64, t_deg: f64) -> f64 {
    let (u, v) = cut_direction(beam.u, beam.v, cut_deg, t_deg);
    10.0 * field(arr, &beam.weights, u, v).norm_sqr().log10()
}

/// Width of the region within `level_db` of the cut's peak, measured between
/// the outermost crossings within the default span.
pub fn measure_beamwidth(
    arr: &ArrayGeometry,
    beam: &BeamWeights,
    cut_deg: f64,
    level_db: f64,
) -> Result<f64, ArrayError> {
    measure_beamwidth_span(arr, beam, cut_deg, level_db, DEFAULT_HALF_SPAN_DEG)
}

pub fn measure_beamwidth_span(
    arr: &ArrayGeometry,
    beam: &BeamWeights,
    cut_deg: f64,
    level_db: f64,
    half_span_deg: f64,
) -> Result<f64, ArrayError> {
    let n = (half_span_deg / SAMPLE_STEP_DEG).round() as i64;
    let ts: Vec<f64> = (-n..=n).map(|i| i as f64 * SAMPLE_STEP_DEG).collect();
    let g: Vec<f64> = ts.iter().map(|&t| gain_db(arr, beam, cut_deg, t)).collect();
    let peak = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let thr = peak - level_db;
    let centre = n as usize;
    if g[centre] < thr || g[0] >= thr || g[g.len() - 1] >= thr {
        return Err(ArrayError::NoMainLobe);
    }
    let first = g.iter().position(|&x| x >= thr).unwrap();
    let last = g.iter().rposition(|&x| x >= thr).unwrap();
    let f = |t: f64| gain_db(arr, beam, cut_deg, t) - thr;
    let left = bisect(&f, ts[first - 1], ts[first]);
    let right = bisect(&f, ts[last + 1], ts[last]);
    Ok(right - left)
}

/// Root of `f` between `below` (f < 0) and `above` (f >= 0).
fn bisect(f: &dyn Fn(f64) -> f64, mut below: f64, mut above: f64) -> f64 {
    while (above - below).abs() > 1e-5 {
        let mid = 0.5 * (below + above);
        if f(mid) >= 0.0 {
            above = mid;
        } else {
            below = mid;
        }
    }
    0.5 * (below + above)
}

/// Mean -3 dB width over the cuts at 0, 30, 60 and 90 deg.
pub fn mean_beamwidth(arr: &ArrayGeometry, beam: &BeamWeights) -> Result<f64, ArrayError> {
    let mut sum = 0.0;
    for cut in [0.0, 30.0, 60.0, 90.0] {
        sum += measure_beamwidth(arr, beam, cut, 3.0)?;
    }
    Ok(sum / 4.0)
}

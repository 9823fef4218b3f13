//! Downlink channel model, per-hop power allocation and SINR maps.

use crate::array::{widened_weights, ArrayGeometry, BeamWeights};
use crate::geometry::{GeometryError, GroundPoint, OrbitGeometry};
use crate::hopping::{assign_hop_indices, HopError, HopPlan};
use crate::layout::{build_hex_grid, BeamLayout};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const BOLTZMANN: f64 = 1.380649e-23;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Hop(#[from] HopError),
    #[error("beam {0} receives no power at its own centre")]
    DegenerateBeam(usize),
    #[error("SINR map is empty")]
    EmptyMap,
    #[error("threshold not met even with one beam per hop ({0} hops)")]
    NotAchievable(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerScheme {
    Equal,
    SnrEqualizing,
}

impl PowerScheme {
    /// Scheme that gives the better tail SINR for each reference design.
    pub fn default_for(design_name: &str) -> PowerScheme {
        match design_name {
            "B" | "D1" | "C1" | "C2" => PowerScheme::SnrEqualizing,
            _ => PowerScheme::Equal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    /// (elevation deg, loss dB), ascending in elevation.
    pub atmospheric_loss_db: Vec<(f64, f64)>,
    /// (elevation deg, G/T dB/K), ascending in elevation.
    pub g_over_t_db: Vec<(f64, f64)>,
    pub sinr_threshold_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            frequency_hz: 20e9,
            bandwidth_hz: 200e6,
            atmospheric_loss_db: vec![(30.0, 1.1), (45.0, 0.71), (90.0, 0.5)],
            g_over_t_db: vec![(30.0, 8.0), (45.0, 10.0), (90.0, 11.0)],
            sinr_threshold_db: 3.0,
        }
    }
}

/// Piecewise-linear lookup, clamped at both ends.
pub fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    let first = table[0];
    let last = table[table.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let k = table.windows(2).position(|w| x <= w[1].0).unwrap();
    let (a, b) = (table[k], table[k + 1]);
    a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Free-space path loss, linear.
pub fn fspl(range_km: f64, wavelength_m: f64) -> f64 {
    let x = 4.0 * PI * range_km * 1e3 / wavelength_m;
    x * x
}

impl LinkBudget {
    /// Thermal noise power k*B; the receiver temperature rides in the channel via G/T.
    pub fn noise_power(&self) -> f64 {
        BOLTZMANN * self.bandwidth_hz
    }

    pub fn atmospheric_loss_db(&self, el_deg: f64) -> f64 {
        interpolate(&self.atmospheric_loss_db, el_deg)
    }

    pub fn g_over_t_db(&self, el_deg: f64) -> f64 {
        interpolate(&self.g_over_t_db, el_deg)
    }
}

/// Channel towards one ground point: scalar amplitude and direction cosines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointChannel {
    pub amplitude: f64,
    pub common_phase: f64,
    pub u: f64,
    pub v: f64,
}

pub fn point_channel(
    geo: &OrbitGeometry,
    arr: &ArrayGeometry,
    lb: &LinkBudget,
    sat_nadir: &GroundPoint,
    p: &GroundPoint,
) -> Result<PointChannel, LinkError> {
    let a = geo.ground_to_uv(sat_nadir, p)?;
    let gain = arr.element_gain(a.tilt) * db_to_linear(lb.g_over_t_db(a.elevation));
    let loss = fspl(a.slant_range_km, geo.wavelength_m)
        * db_to_linear(lb.atmospheric_loss_db(a.elevation));
    let common_phase = (2.0 * PI * a.slant_range_km * 1e3 / geo.wavelength_m).rem_euclid(2.0 * PI);
    Ok(PointChannel {
        amplitude: (gain / loss).sqrt(),
        common_phase,
        u: a.u,
        v: a.v,
    })
}

/// Per-element channel coefficients towards `p`.
pub fn channel_row(
    geo: &OrbitGeometry,
    arr: &ArrayGeometry,
    lb: &LinkBudget,
    sat_nadir: &GroundPoint,
    p: &GroundPoint,
) -> Result<Vec<Complex64>, LinkError> {
    let c = point_channel(geo, arr, lb, sat_nadir, p)?;
    let common = Complex64::from_polar(c.amplitude, c.common_phase);
    Ok(arr
        .steering(c.u, c.v)
        .into_iter()
        .map(|s| s * common)
        .collect())
}

fn dot(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in h.iter().zip(w) {
        acc += a * b;
    }
    acc
}

fn beam_weights(layout: &BeamLayout, arr: &ArrayGeometry, id: usize, power_w: f64) -> BeamWeights {
    let b = &layout.beams[id];
    let (wx, wy) = b.widening_deg;
    widened_weights(
        arr,
        b.pointing.u,
        b.pointing.v,
        b.pointing.azimuth,
        wx,
        wy,
        power_w,
    )
}

/// Power of each beam in `active`, summing to the array's total power.
pub fn allocate_power(
    scheme: PowerScheme,
    active: &[usize],
    layout: &BeamLayout,
    arr: &ArrayGeometry,
    lb: &LinkBudget,
) -> Result<Vec<f64>, LinkError> {
    let total = arr.total_power_w();
    let n = active.len();
    match scheme {
        PowerScheme::Equal => Ok(vec![total / n as f64; n]),
        PowerScheme::SnrEqualizing => {
            let geo = &layout.spec.geo;
            let mut g = Vec::with_capacity(n);
            for &id in active {
                let w = beam_weights(layout, arr, id, 1.0);
                let h = channel_row(geo, arr, lb, &layout.sat_nadir, &layout.beams[id].center)?;
                let gk = dot(&h, &w.weights).norm_sqr();
                if gk == 0.0 {
                    return Err(LinkError::DegenerateBeam(id));
                }
                g.push(gk);
            }
            let sum_g: f64 = g.iter().sum();
            let c: Vec<f64> = g.iter().map(|gk| sum_g / gk).collect();
            let sum_c: f64 = c.iter().sum();
            Ok(c.iter().map(|ck| total * ck / sum_c).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingGrid {
    pub spacing_km: f64,
    pub points: Vec<GroundPoint>,
    /// Nearest beam centre for each point.
    pub serving: Vec<usize>,
}

/// Hexagonal sensing grid over the coverage area, each point tied to its
/// nearest beam centre (lowest id on ties).
pub fn sensing_grid(layout: &BeamLayout, spacing_km: f64) -> SensingGrid {
    let spec = &layout.spec;
    let sites = build_hex_grid(
        spacing_km,
        &layout.sat_nadir,
        &layout.sat_nadir,
        &spec.geo,
        spec.max_tilt(),
    );
    let points: Vec<GroundPoint> = sites.iter().map(|s| s.point).collect();
    let centers: Vec<[f64; 3]> = layout
        .beams
        .iter()
        .map(|b| b.center.unit_vector())
        .collect();
    let serving = points
        .par_iter()
        .map(|p| nearest(&centers, p.unit_vector()))
        .collect();
    SensingGrid {
        spacing_km,
        points,
        serving,
    }
}

fn nearest(centers: &[[f64; 3]], q: [f64; 3]) -> usize {
    let mut best = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = c[0] * q[0] + c[1] * q[1] + c[2] * q[2];
        if d > best_dot {
            best_dot = d;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrMap {
    pub sinr_db: Vec<f64>,
    pub serving: Vec<usize>,
    pub hop: Vec<usize>,
}

impl SinrMap {
    pub fn percentile(&self, p: f64) -> Result<f64, LinkError> {
        percentile(&self.sinr_db, p)
    }

    /// Empirical CDF as sorted (value, fraction) pairs.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let mut v = self.sinr_db.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        v.into_iter()
            .enumerate()
            .map(|(i, x)| (x, (i + 1) as f64 / n))
            .collect()
    }
}

/// Quantile with linear interpolation between order statistics at `p (n - 1)`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, LinkError> {
    if values.is_empty() {
        return Err(LinkError::EmptyMap);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// SINR at every sensing point, each evaluated in the hop that lights its serving beam.
pub fn evaluate_sinr(
    layout: &BeamLayout,
    plan: &HopPlan,
    grid: &SensingGrid,
    scheme: PowerScheme,
    arr: &ArrayGeometry,
    lb: &LinkBudget,
) -> Result<SinrMap, LinkError> {
    let sets = plan.active_sets();
    let per_hop: Vec<Vec<(usize, Vec<Complex64>)>> = sets
        .par_iter()
        .map(|active| {
            if active.is_empty() {
                return Ok(Vec::new());
            }
            let powers = allocate_power(scheme, active, layout, arr, lb)?;
            Ok(active
                .iter()
                .zip(powers)
                .map(|(&id, p)| (id, beam_weights(layout, arr, id, p).weights))
                .collect())
        })
        .collect::<Result<_, LinkError>>()?;

    let noise = lb.noise_power();
    let geo = &layout.spec.geo;
    let sinr_db = grid
        .points
        .par_iter()
        .zip(&grid.serving)
        .map(|(p, &serving)| {
            let c = point_channel(geo, arr, lb, &layout.sat_nadir, p)?;
            let steer = arr.steering(c.u, c.v);
            let gain = c.amplitude * c.amplitude;
            let (mut signal, mut interference) = (0.0, 0.0);
            for (id, w) in &per_hop[plan.index_of[serving]] {
                let power = gain * dot(&steer, w).norm_sqr();
                if *id == serving {
                    signal = power;
                } else {
                    interference += power;
                }
            }
            Ok(linear_to_db(signal / (interference + noise)))
        })
        .collect::<Result<Vec<f64>, LinkError>>()?;
    let hop = grid.serving.iter().map(|&s| plan.index_of[s]).collect();
    Ok(SinrMap {
        sinr_db,
        serving: grid.serving.clone(),
        hop,
    })
}

/// Hop plan for a layout.
pub fn plan_for(layout: &BeamLayout, n_hops: usize) -> Result<HopPlan, LinkError> {
    let coords: Vec<(i64, i64)> = layout.beams.iter().map(|b| b.grid).collect();
    Ok(assign_hop_indices(&coords, n_hops)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchPolicy {
    pub start: usize,
    pub max: Option<usize>,
    pub percentile: f64,
}

impl Default for SearchPolicy {
    fn default() -> Self {
        SearchPolicy {
            start: 16,
            max: None,
            percentile: 0.05,
        }
    }
}

/// Outcome of one evaluated hop count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopTrial {
    pub n_hops: usize,
    pub percentile_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopSearch {
    pub n_hops: usize,
    pub trials: Vec<HopTrial>,
}

/// Smallest hop count whose SINR percentile meets the threshold. Doubles
/// from `policy.start` until a pass, bisects, then walks down while the
/// next lower count also passes.
pub fn min_hops(
    layout: &BeamLayout,
    scheme: PowerScheme,
    grid: &SensingGrid,
    arr: &ArrayGeometry,
    lb: &LinkBudget,
    policy: &SearchPolicy,
) -> Result<HopSearch, LinkError> {
    let cap = policy.max.unwrap_or(layout.len()).max(1);
    let mut trials: Vec<HopTrial> = Vec::new();
    let mut eval = |n: usize| -> Result<bool, LinkError> {
        if let Some(t) = trials.iter().find(|t| t.n_hops == n) {
            return Ok(t.percentile_db >= lb.sinr_threshold_db);
        }
        let plan = plan_for(layout, n)?;
        let map = evaluate_sinr(layout, &plan, grid, scheme, arr, lb)?;
        let q = map.percentile(policy.percentile)?;
        trials.push(HopTrial {
            n_hops: n,
            percentile_db: q,
        });
        Ok(q >= lb.sinr_threshold_db)
    };

    let mut hi = policy.start.clamp(1, cap);
    let mut lo = 0;
    while !eval(hi)? {
        if hi == cap {
            return Err(LinkError::NotAchievable(cap));
        }
        lo = hi;
        hi = (hi * 2).min(cap);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if eval(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    while hi > 1 && eval(hi - 1)? {
        hi -= 1;
    }
    trials.sort_by_key(|t| t.n_hops);
    Ok(HopSearch { n_hops: hi, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_layout, Design, LayoutSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn geo() -> OrbitGeometry {
        OrbitGeometry::reference()
    }

    #[test]
    fn interpolation() {
        let lb = LinkBudget::default();
        assert_eq!(lb.atmospheric_loss_db(45.0), 0.71);
        assert_eq!(lb.g_over_t_db(45.0), 10.0);
        assert_abs_diff_eq!(lb.atmospheric_loss_db(37.5), 0.905, epsilon = 1e-12);
        assert_eq!(lb.atmospheric_loss_db(10.0), 1.1);
        assert_eq!(lb.g_over_t_db(95.0), 11.0);
    }

    #[test]
    fn free_space_loss_at_nadir() {
        let l = linear_to_db(fspl(1300.0, geo().wavelength_m));
        let hand = 20.0 * (4.0 * PI * 1.3e6 * 20e9 / 299_792_458.0f64).log10();
        assert_abs_diff_eq!(l, hand, epsilon = 1e-9);
        assert_abs_diff_eq!(l, 180.7, epsilon = 0.1);
    }

    #[test]
    fn noise_floor() {
        let lb = LinkBudget::default();
        assert_abs_diff_eq!(linear_to_db(lb.noise_power()), -145.6, epsilon = 0.05);
        let wide = LinkBudget {
            bandwidth_hz: 400e6,
            ..lb.clone()
        };
        assert_abs_diff_eq!(
            linear_to_db(wide.noise_power()) - linear_to_db(lb.noise_power()),
            3.0103,
            epsilon = 1e-4
        );
    }

    #[test]
    fn lone_nadir_snr() {
        let g = geo();
        let arr = ArrayGeometry::reference(g.wavelength_m);
        let lb = LinkBudget::default();
        let n = GroundPoint::new(0.0, 0.0);
        let h = channel_row(&g, &arr, &lb, &n, &n).unwrap();
        let w = widened_weights(&arr, 0.0, 0.0, 0.0, 0.0, 0.0, arr.total_power_w());
        let snr = linear_to_db(dot(&h, &w.weights).norm_sqr() / lb.noise_power());
        // EIRP 10log10(33.28*512) + 4.7 dBi.
        let eirp = linear_to_db(arr.total_power_w() * 512.0) + 4.7;
        let hand = eirp - linear_to_db(fspl(1300.0, g.wavelength_m)) - 0.5 + 11.0 + 145.6;
        assert_abs_diff_eq!(snr, hand, epsilon = 0.05);
        assert_abs_diff_eq!(snr, 22.4, epsilon = 0.3);
    }

    #[test]
    fn percentile_conventions() {
        assert_eq!(percentile(&[4.0; 7], 0.3).unwrap(), 4.0);
        assert_eq!(percentile(&[10.0, 0.0], 0.5).unwrap(), 5.0);
        assert_eq!(percentile(&[], 0.5), Err(LinkError::EmptyMap));
    }

    fn small_layout() -> BeamLayout {
        let s = LayoutSpec::new(Design::named("D5").unwrap(), geo(), 3.64);
        build_layout(&s, &GroundPoint::new(0.0, 0.0)).unwrap()
    }

    #[test]
    fn power_schemes_conserve_power() {
        let l = small_layout();
        let arr = ArrayGeometry::reference(geo().wavelength_m);
        let lb = LinkBudget::default();
        let total = arr.total_power_w();
        assert_abs_diff_eq!(total, 33.28, epsilon = 1e-12);
        let active: Vec<usize> = (0..l.len()).step_by(37).collect();
        for scheme in [PowerScheme::Equal, PowerScheme::SnrEqualizing] {
            let p = allocate_power(scheme, &active, &l, &arr, &lb).unwrap();
            let s: f64 = p.iter().sum();
            assert!((s / total - 1.0).abs() < 1e-12);
        }
        let eq = allocate_power(PowerScheme::Equal, &active[..8], &l, &arr, &lb).unwrap();
        assert!(eq.iter().all(|&x| (x - 4.16).abs() < 1e-12));
        for scheme in [PowerScheme::Equal, PowerScheme::SnrEqualizing] {
            let p = allocate_power(scheme, &[5], &l, &arr, &lb).unwrap();
            assert_abs_diff_eq!(p[0], 33.28, epsilon = 1e-12);
        }
    }

    #[test]
    fn equalizing_equalizes_centre_power() {
        let l = small_layout();
        let g = geo();
        let arr = ArrayGeometry::reference(g.wavelength_m);
        let lb = LinkBudget::default();
        let active: Vec<usize> = (0..l.len()).step_by(23).collect();
        let p = allocate_power(PowerScheme::SnrEqualizing, &active, &l, &arr, &lb).unwrap();
        let rx: Vec<f64> = active
            .iter()
            .zip(&p)
            .map(|(&id, &pk)| {
                let w = beam_weights(&l, &arr, id, pk);
                let h = channel_row(&g, &arr, &lb, &l.sat_nadir, &l.beams[id].center).unwrap();
                dot(&h, &w.weights).norm_sqr()
            })
            .collect();
        for r in &rx {
            assert!((r / rx[0] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_beam_sinr_is_snr() {
        let l = small_layout();
        let g = geo();
        let arr = ArrayGeometry::reference(g.wavelength_m);
        let lb = LinkBudget::default();
        let plan = HopPlan {
            n_hops: l.len(),
            n_cols: 1,
            n_rows: 1,
            blocks_per_super_block: 1,
            index_of: (0..l.len()).collect(),
        };
        let id = 0;
        let grid = SensingGrid {
            spacing_km: 0.0,
            points: vec![l.beams[id].center],
            serving: vec![id],
        };
        let map = evaluate_sinr(&l, &plan, &grid, PowerScheme::Equal, &arr, &lb).unwrap();
        let h = channel_row(&g, &arr, &lb, &l.sat_nadir, &l.beams[id].center).unwrap();
        let w = beam_weights(&l, &arr, id, arr.total_power_w());
        let snr = linear_to_db(dot(&h, &w.weights).norm_sqr() / lb.noise_power());
        assert_abs_diff_eq!(map.sinr_db[0], snr, epsilon = 1e-9);
    }

    #[test]
    fn sensing_grid_assigns_nearest_centre() {
        let l = small_layout();
        let grid = sensing_grid(&l, 40.0);
        for (p, &s) in grid.points.iter().zip(&grid.serving).step_by(11) {
            let best = l
                .beams
                .iter()
                .map(|b| b.center.central_angle(p))
                .fold(f64::INFINITY, f64::min);
            assert!(l.beams[s].center.central_angle(p) <= best + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn interference_never_helps(seed in 0usize..1000) {
            let l = small_layout();
            let g = geo();
            let arr = ArrayGeometry::reference(g.wavelength_m);
            let lb = LinkBudget::default();
            let grid = sensing_grid(&l, 120.0);
            let i = seed % grid.points.len();
            let one = SensingGrid {
                spacing_km: 0.0,
                points: vec![grid.points[i]],
                serving: vec![grid.serving[i]],
            };
            let plan = plan_for(&l, 7).unwrap();
            let map = evaluate_sinr(&l, &plan, &one, PowerScheme::Equal, &arr, &lb).unwrap();
            let s = one.serving[0];
            let active = plan.active_set(plan.index_of[s]).unwrap();
            let p = allocate_power(PowerScheme::Equal, &active, &l, &arr, &lb).unwrap()[0];
            let h = channel_row(&g, &arr, &lb, &l.sat_nadir, &one.points[0]).unwrap();
            let snr = linear_to_db(dot(&h, &beam_weights(&l, &arr, s, p).weights).norm_sqr() / lb.noise_power());
            prop_assert!(map.sinr_db[0] <= snr + 1e-9);
        }
    }
}

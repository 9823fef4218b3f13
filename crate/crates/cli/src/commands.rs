//! The four subcommands: layout, sweep, schedule and report.

use crate::config::{check_scheme_period, ConfigError, DesignEntry, ExperimentConfig};
use crate::output::{sci, Csv, OutputDir};
use beamhop::layout::{build_layout, BeamLayout, LayoutError};
use beamhop::link::{
    evaluate_sinr, min_hops, plan_for, sensing_grid, HopSearch, LinkError, PowerScheme, SensingGrid,
};
use beamhop::scheduler::{
    beam_to_cell, build_schedule, catalog, timeline, validate_ra_timing, FrameConfig,
    ScheduleError, ScheduleResult, Scheme,
};
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("design {design}: {source}")]
    Layout { design: String, source: LayoutError },
    #[error("design {design}: {source}")]
    Link { design: String, source: LinkError },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Schedule(ScheduleError::InvalidConfig(_)) => 2,
            RunError::Link {
                source: LinkError::NotAchievable(_),
                ..
            }
            | RunError::Schedule(ScheduleError::SchemeInfeasible { .. }) => 3,
            _ => 1,
        }
    }
}

fn scheme_name(s: PowerScheme) -> &'static str {
    match s {
        PowerScheme::Equal => "equal",
        PowerScheme::SnrEqualizing => "snr_equalizing",
    }
}

fn sched_name(s: Scheme) -> &'static str {
    match s {
        Scheme::HalfSlot => "half_slot",
        Scheme::FullSlot => "full_slot",
        Scheme::ExtraSweep => "extra_sweep",
        Scheme::ExtraSweep160 => "extra_sweep160",
    }
}

fn layout_for(cfg: &ExperimentConfig, entry: &DesignEntry) -> Result<BeamLayout, RunError> {
    build_layout(&cfg.layout_spec(entry), &cfg.sat_nadir()).map_err(|source| RunError::Layout {
        design: entry.name().to_string(),
        source,
    })
}

fn link_err(entry: &DesignEntry) -> impl Fn(LinkError) -> RunError + '_ {
    move |source| RunError::Link {
        design: entry.name().to_string(),
        source,
    }
}

#[derive(Serialize)]
struct LayoutSummary<'a> {
    design: &'a str,
    k: usize,
    d_g_km: f64,
    n_hops: Option<usize>,
}

fn write_layout(out: &mut OutputDir, name: &str, layout: &BeamLayout) -> std::io::Result<()> {
    let mut csv = Csv::new(&[
        "beam_id",
        "lat",
        "lon",
        "theta_deg",
        "phi_deg",
        "wx_deg",
        "wy_deg",
        "br_km",
    ]);
    for b in &layout.beams {
        csv.row(&[
            b.id.to_string(),
            sci(b.center.lat),
            sci(b.center.lon),
            sci(b.pointing.tilt),
            sci(b.pointing.azimuth),
            sci(b.widening_deg.0),
            sci(b.widening_deg.1),
            sci(b.radius_km),
        ]);
    }
    out.write_csv(&format!("layout_{name}.csv"), csv)
}

fn write_hop_map(
    out: &mut OutputDir,
    name: &str,
    layout: &BeamLayout,
    n_hops: usize,
    max_beams_per_cell: usize,
) -> Result<(), RunError> {
    let plan = plan_for(layout, n_hops).map_err(|source| RunError::Link {
        design: name.to_string(),
        source,
    })?;
    let coords: Vec<(i64, i64)> = layout.beams.iter().map(|b| b.grid).collect();
    let cells = beam_to_cell(&plan, &coords, max_beams_per_cell);
    let mut cell_of = vec![0; layout.len()];
    for c in &cells.cells {
        for &b in &c.beam_ids {
            cell_of[b] = c.cell_id;
        }
    }
    let mut csv = Csv::new(&["beam_id", "i", "j", "ih", "cell_id"]);
    for (b, beam) in layout.beams.iter().enumerate() {
        csv.row(&[
            b.to_string(),
            beam.grid.0.to_string(),
            beam.grid.1.to_string(),
            plan.index_of[b].to_string(),
            cell_of[b].to_string(),
        ]);
    }
    out.write_csv(&format!("hops_{name}_{n_hops}.csv"), csv)?;
    Ok(())
}

pub fn run_layout(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    designs: &[DesignEntry],
    n_hops: Option<usize>,
) -> Result<(), RunError> {
    for entry in designs {
        let t = Instant::now();
        let layout = layout_for(cfg, entry)?;
        let name = entry.name();
        write_layout(out, name, &layout)?;
        if let Some(n) = n_hops {
            write_hop_map(out, name, &layout, n, cfg.scheduler.max_beams_per_cell)?;
        }
        out.write_json(
            &format!("layout_{name}.json"),
            &LayoutSummary {
                design: name,
                k: layout.len(),
                d_g_km: layout.grid_spacing_km,
                n_hops,
            },
        )?;
        out.record_time(&format!("layout {name}"), t.elapsed());
        println!(
            "{name}: K={} d_g={:.1} km",
            layout.len(),
            layout.grid_spacing_km
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub n_hops: usize,
    pub p_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub design: String,
    pub k: usize,
    pub d_g_km: f64,
    pub scheme: PowerScheme,
    /// None when the threshold is missed even at the search ceiling.
    pub n_hops: Option<usize>,
    pub p5_db: Option<f64>,
    pub active_min: Option<usize>,
    pub active_max: Option<usize>,
    pub trials: Vec<TrialRow>,
}

fn write_cdf(out: &mut OutputDir, name: &str, cdf: &[(f64, f64)]) -> std::io::Result<()> {
    let mut csv = Csv::new(&["sinr_dB", "cdf"]);
    for &(x, f) in cdf {
        csv.row(&[sci(x), sci(f)]);
    }
    out.write_csv(name, csv)
}

fn sweep_design(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    entry: &DesignEntry,
    strict: bool,
) -> Result<SweepRow, RunError> {
    let t = Instant::now();
    let name = entry.name();
    let layout = layout_for(cfg, entry)?;
    let grid: SensingGrid = sensing_grid(&layout, cfg.sensing_spacing_km);
    let arr = cfg.array();
    let scheme = cfg.power_scheme(name);
    let mut row = SweepRow {
        design: name.to_string(),
        k: layout.len(),
        d_g_km: layout.grid_spacing_km,
        scheme,
        n_hops: None,
        p5_db: None,
        active_min: None,
        active_max: None,
        trials: Vec::new(),
    };
    let search: HopSearch = match min_hops(&layout, scheme, &grid, &arr, &cfg.link, &cfg.search) {
        Ok(s) => s,
        Err(LinkError::NotAchievable(cap)) if !strict => {
            eprintln!("{name}: threshold not met up to {cap} hops");
            out.record_time(&format!("sweep {name}"), t.elapsed());
            return Ok(row);
        }
        Err(e) => return Err(link_err(entry)(e)),
    };
    let n = search.n_hops;
    let plan = plan_for(&layout, n).map_err(link_err(entry))?;
    let (amin, amax) = plan.active_size_range();
    row.n_hops = Some(n);
    row.active_min = Some(amin);
    row.active_max = Some(amax);
    row.trials = search
        .trials
        .iter()
        .map(|t| TrialRow {
            n_hops: t.n_hops,
            p_db: t.percentile_db,
        })
        .collect();

    for s in [PowerScheme::Equal, PowerScheme::SnrEqualizing] {
        let map =
            evaluate_sinr(&layout, &plan, &grid, s, &arr, &cfg.link).map_err(link_err(entry))?;
        write_cdf(
            out,
            &format!("cdf_{name}_{}.csv", scheme_name(s)),
            &map.cdf(),
        )?;
        if s == scheme {
            row.p5_db = Some(
                map.percentile(cfg.search.percentile)
                    .map_err(link_err(entry))?,
            );
            let mut csv = Csv::new(&["lat", "lon", "beam_id", "ih", "sinr_dB"]);
            for (k, p) in grid.points.iter().enumerate() {
                csv.row(&[
                    sci(p.lat),
                    sci(p.lon),
                    map.serving[k].to_string(),
                    map.hop[k].to_string(),
                    sci(map.sinr_db[k]),
                ]);
            }
            out.write_csv(&format!("sinr_{name}.csv"), csv)?;
        }
    }
    write_hop_map(out, name, &layout, n, cfg.scheduler.max_beams_per_cell)?;
    out.record_time(&format!("sweep {name}"), t.elapsed());
    Ok(row)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    sensing_spacing_km: f64,
    sinr_threshold_db: f64,
    percentile: f64,
    designs: &'a [SweepRow],
}

pub fn run_sweep(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    designs: &[DesignEntry],
    strict: bool,
) -> Result<Vec<SweepRow>, RunError> {
    let mut rows = Vec::new();
    for entry in designs {
        let row = sweep_design(cfg, out, entry, strict)?;
        println!(
            "{:<4} K={:<5} d_g={:>6.1} km  {:<14} N_h={}",
            row.design,
            row.k,
            row.d_g_km,
            scheme_name(row.scheme),
            row.n_hops.map_or("-".to_string(), |n| n.to_string()),
        );
        rows.push(row);
    }
    let mut csv = Csv::new(&[
        "design",
        "k",
        "d_g_km",
        "scheme",
        "n_hops",
        "p5_dB",
        "active_min",
        "active_max",
    ]);
    for r in &rows {
        let opt = |x: Option<usize>| x.map_or(String::new(), |v| v.to_string());
        csv.row(&[
            r.design.clone(),
            r.k.to_string(),
            sci(r.d_g_km),
            scheme_name(r.scheme).to_string(),
            opt(r.n_hops),
            r.p5_db.map_or(String::new(), sci),
            opt(r.active_min),
            opt(r.active_max),
        ]);
    }
    out.write_csv("sweep.csv", csv)?;
    out.write_json(
        "sweep.json",
        &SweepSummary {
            sensing_spacing_km: cfg.sensing_spacing_km,
            sinr_threshold_db: cfg.link.sinr_threshold_db,
            percentile: cfg.search.percentile,
            designs: &rows,
        },
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleRow {
    pub scheme: Scheme,
    pub n_hops: usize,
    pub ssb_period_ms: u32,
    pub cs_slots: usize,
    pub total_slots: usize,
    pub hops_covered: usize,
    pub coverage_ratio: f64,
    pub cs_efficiency: f64,
    pub cs_slot_ratio: f64,
    pub msg4_per_s: f64,
    pub paging_ue_per_s: f64,
    pub ra_violations: usize,
}

fn schedule_row(r: &ScheduleResult, fc: &FrameConfig) -> ScheduleRow {
    ScheduleRow {
        scheme: r.scheme,
        n_hops: r.n_hops,
        ssb_period_ms: r.ssb_period_ms,
        cs_slots: r.cs_slots,
        total_slots: r.total_slots,
        hops_covered: r.hops_covered,
        coverage_ratio: r.kpis.coverage_ratio,
        cs_efficiency: r.kpis.cs_efficiency,
        cs_slot_ratio: r.kpis.cs_slot_ratio,
        msg4_per_s: r.kpis.msg4_per_s,
        paging_ue_per_s: r.kpis.paging_ue_per_s,
        ra_violations: validate_ra_timing(r, fc).len(),
    }
}

fn write_schedule(
    out: &mut OutputDir,
    r: &ScheduleResult,
    fc: &FrameConfig,
) -> Result<ScheduleRow, RunError> {
    let tag = format!(
        "{}_{}_{}ms",
        sched_name(r.scheme),
        r.n_hops,
        r.ssb_period_ms
    );
    let mut csv = Csv::new(&[
        "slot", "symbol0", "nsym", "prb0", "nprb", "signal", "ih", "ssbi",
    ]);
    for a in &r.allocations {
        csv.row(&[
            a.slot.to_string(),
            a.start_symbol.to_string(),
            a.symbol_len.to_string(),
            a.start_prb.to_string(),
            a.prb_len.to_string(),
            a.signal.name().to_string(),
            a.ih.to_string(),
            a.ssbi.map_or(String::new(), |s| s.to_string()),
        ]);
    }
    out.write_csv(&format!("schedule_{tag}.csv"), csv)?;
    #[derive(Serialize)]
    struct Timeline<'a> {
        scheme: Scheme,
        n_hops: usize,
        ssb_period_ms: u32,
        half_frames: &'a [beamhop::scheduler::HalfFrameEntry],
    }
    let tl = timeline(r, fc);
    out.write_json(
        &format!("timeline_{tag}.json"),
        &Timeline {
            scheme: r.scheme,
            n_hops: r.n_hops,
            ssb_period_ms: r.ssb_period_ms,
            half_frames: &tl,
        },
    )?;
    let row = schedule_row(r, fc);
    out.write_json(&format!("kpi_{tag}.json"), &row)?;
    Ok(row)
}

/// One schedule to build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleCase {
    pub scheme: Scheme,
    pub n_hops: usize,
    pub ssb_period_ms: u32,
}

pub fn run_schedule(
    cfg: &ExperimentConfig,
    out: &mut OutputDir,
    cases: &[ScheduleCase],
    strict: bool,
) -> Result<Vec<ScheduleRow>, RunError> {
    let cat = catalog();
    let mut rows = Vec::new();
    for case in cases {
        let t = Instant::now();
        check_scheme_period(case.scheme, case.ssb_period_ms)
            .map_err(ScheduleError::InvalidConfig)?;
        let fc = FrameConfig {
            ssb_period_ms: case.ssb_period_ms,
            ..cfg.scheduler.frame.clone()
        };
        let r = build_schedule(case.scheme, case.n_hops, &fc, &cat)?;
        let row = write_schedule(out, &r, &fc)?;
        out.record_time(
            &format!(
                "schedule {} {} {}ms",
                sched_name(case.scheme),
                case.n_hops,
                case.ssb_period_ms
            ),
            t.elapsed(),
        );
        println!(
            "{:<15} N_h={:<4} {:>3} ms  CS slots {:>4}/{:<5} efficiency {:>6.2}%  coverage {:>6.2}%  RA violations {}",
            sched_name(row.scheme),
            row.n_hops,
            row.ssb_period_ms,
            row.cs_slots,
            row.total_slots,
            100.0 * row.cs_efficiency,
            100.0 * row.coverage_ratio,
            row.ra_violations,
        );
        rows.push(row);
        if strict && r.hops_covered < r.n_hops {
            write_schedule_summary(out, &rows)?;
            return Err(ScheduleError::SchemeInfeasible {
                scheme: r.scheme,
                n_hops: r.n_hops,
                covered: r.hops_covered,
            }
            .into());
        }
    }
    write_schedule_summary(out, &rows)?;
    Ok(rows)
}

fn write_schedule_summary(out: &mut OutputDir, rows: &[ScheduleRow]) -> std::io::Result<()> {
    let mut csv = Csv::new(&[
        "scheme",
        "n_hops",
        "ssb_period_ms",
        "cs_slots",
        "total_slots",
        "coverage_ratio",
        "cs_efficiency",
        "msg4_per_s",
        "paging_ue_per_s",
        "ra_violations",
    ]);
    for r in rows {
        csv.row(&[
            sched_name(r.scheme).to_string(),
            r.n_hops.to_string(),
            r.ssb_period_ms.to_string(),
            r.cs_slots.to_string(),
            r.total_slots.to_string(),
            sci(r.coverage_ratio),
            sci(r.cs_efficiency),
            sci(r.msg4_per_s),
            sci(r.paging_ue_per_s),
            r.ra_violations.to_string(),
        ]);
    }
    out.write_csv("schedules.csv", csv)
}

/// Scheduling cases of the reference comparison for the given hop counts:
/// the three 20 ms schemes, the 160 ms extra sweep and the plain 160 ms
/// full-slot sweep.
pub fn reference_cases(n_hops: &[usize]) -> Vec<ScheduleCase> {
    let mut cases = Vec::new();
    for &n in n_hops {
        for scheme in [Scheme::HalfSlot, Scheme::FullSlot, Scheme::ExtraSweep] {
            cases.push(ScheduleCase {
                scheme,
                n_hops: n,
                ssb_period_ms: 20,
            });
        }
    }
    for &n in n_hops {
        cases.push(ScheduleCase {
            scheme: Scheme::ExtraSweep160,
            n_hops: n,
            ssb_period_ms: 160,
        });
    }
    for &n in n_hops {
        cases.push(ScheduleCase {
            scheme: Scheme::FullSlot,
            n_hops: n,
            ssb_period_ms: 160,
        });
    }
    cases
}

#[derive(Serialize)]
struct Report<'a> {
    designs: &'a [SweepRow],
    schedules: &'a [ScheduleRow],
}

pub fn run_report(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    println!("Minimum hop count per design");
    let sweep = run_sweep(cfg, out, &cfg.designs, false)?;
    println!();
    println!("Common-signaling schedules");
    let schedules = run_schedule(cfg, out, &reference_cases(&cfg.scheduler.n_hops), false)?;
    out.write_json(
        "report.json",
        &Report {
            designs: &sweep,
            schedules: &schedules,
        },
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_case_list() {
        let cases = reference_cases(&[62, 107]);
        assert_eq!(cases.len(), 10);
        assert!(cases
            .iter()
            .all(|c| check_scheme_period(c.scheme, c.ssb_period_ms).is_ok()));
        assert_eq!(cases.iter().filter(|c| c.ssb_period_ms == 160).count(), 4);
    }

    #[test]
    fn exit_codes() {
        let cfg = RunError::Config(ConfigError::Invalid {
            field: "x".into(),
            message: "y".into(),
        });
        assert_eq!(cfg.exit_code(), 2);
        let inf = RunError::Schedule(ScheduleError::SchemeInfeasible {
            scheme: Scheme::ExtraSweep,
            n_hops: 107,
            covered: 80,
        });
        assert_eq!(inf.exit_code(), 3);
        let na = RunError::Link {
            design: "A".into(),
            source: LinkError::NotAchievable(121),
        };
        assert_eq!(na.exit_code(), 3);
    }
}

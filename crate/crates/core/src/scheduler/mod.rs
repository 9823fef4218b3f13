//! FR2 NR frame model and common-signaling schedules for hopped beams.
//!
//! Each hop is served in a window of one slot or half a slot. Within a
//! window the fixed blocks (CORESET1, CORESET0, SSB) are placed first and
//! the PDSCH messages are then committed greedily in priority order, each
//! commit checked by an exact packing of everything committed so far.

mod catalog;
mod packing;

pub use catalog::{
    catalog, default_table_starts, required_res, shape_res, variants, Signal, SignalResource,
    CODE_RATE, CORESET0_SHAPE, CORESET1_SHAPE, QPSK_BITS, SSB_REQUIRED_SNR_DB, SSB_SHAPE,
    SUBCARRIERS_PER_PRB,
};
pub use packing::{pack, place_greedy, Grid, Item, Rect};

use crate::hopping::{block_dims, blocks_per_super_block, HopPlan};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid frame configuration: {0}")]
    InvalidConfig(String),
    #[error("{scheme:?} covers only {covered} of {n_hops} hops in one SSB period")]
    SchemeInfeasible {
        scheme: Scheme,
        n_hops: usize,
        covered: usize,
    },
}

/// Which start symbols a PDSCH of a given length may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAllocation {
    /// Any start symbol inside the window.
    AnyStart,
    /// Start symbols of the default PDSCH time-domain allocation table.
    DefaultTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub subcarrier_spacing_khz: u32,
    pub symbols_per_slot: usize,
    pub slots_per_half_frame: usize,
    pub total_prbs: usize,
    pub ssb_period_ms: u32,
    pub max_ssb_per_half_frame: usize,
    /// First PRB of CORESET0; the SSB sits directly above it.
    pub coreset0_prb: usize,
    pub time_allocation: TimeAllocation,
    /// Upper bound on MSG4 messages committed to one window.
    pub max_msg4_per_window: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            subcarrier_spacing_khz: 120,
            symbols_per_slot: 14,
            slots_per_half_frame: 40,
            total_prbs: 132,
            ssb_period_ms: 20,
            max_ssb_per_half_frame: 64,
            coreset0_prb: 36,
            time_allocation: TimeAllocation::AnyStart,
            max_msg4_per_window: 9,
        }
    }
}

/// SIB1 and SIB19 repeat every 160 ms.
pub const SUPER_PERIOD_MS: u32 = 160;
/// Largest MSG2-to-MSG3 grant delay, slots.
pub const MAX_GRANT_DELAY_SLOTS: usize = 32;
/// Contention-resolution timer started at MSG3, ms.
pub const CONTENTION_TIMER_MS: f64 = 64.0;

impl FrameConfig {
    pub fn with_period(ssb_period_ms: u32) -> Self {
        FrameConfig {
            ssb_period_ms,
            ..Self::default()
        }
    }

    pub fn slot_duration_ms(&self) -> f64 {
        15.0 / self.subcarrier_spacing_khz as f64
    }

    pub fn slots_per_ms(&self) -> usize {
        (self.subcarrier_spacing_khz / 15) as usize
    }

    pub fn slots_per_period(&self) -> usize {
        self.ssb_period_ms as usize * self.slots_per_ms()
    }

    pub fn half_frames_per_period(&self) -> usize {
        self.slots_per_period() / self.slots_per_half_frame
    }

    pub fn periods_per_super_period(&self) -> usize {
        (SUPER_PERIOD_MS / self.ssb_period_ms) as usize
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let bad = |m: &str| Err(ScheduleError::InvalidConfig(m.to_string()));
        if self.subcarrier_spacing_khz != 120
            || self.symbols_per_slot != 14
            || self.slots_per_half_frame != 40
            || self.max_ssb_per_half_frame != 64
        {
            return bad("only the 120 kHz numerology with 64 SSB per half frame is modelled");
        }
        if !matches!(self.ssb_period_ms, 20 | 160) {
            return bad("ssb_period_ms must be 20 or 160");
        }
        if self.total_prbs > 256 {
            return bad("total_prbs must not exceed 256");
        }
        if self.coreset0_prb + CORESET0_SHAPE.0 + SSB_SHAPE.0 > self.total_prbs {
            return bad("CORESET0 and SSB do not fit in the carrier at this offset");
        }
        if self.max_msg4_per_window == 0 {
            return bad("max_msg4_per_window must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsbPosition {
    pub ssbi: usize,
    pub slot: usize,
    pub start_symbol: usize,
}

/// Slots of a half frame that may carry SSB: four in every five slot pairs.
pub fn ssb_slots(fc: &FrameConfig) -> Vec<usize> {
    (0..fc.slots_per_half_frame)
        .filter(|s| s % 10 < 8)
        .collect()
}

/// SSB start symbol by SSB index with two SSB per slot.
pub fn ssb_start_symbol(ssbi: usize) -> usize {
    [4, 8, 2, 6][ssbi % 4]
}

/// SSB positions in a half frame with one or two SSB per slot.
pub fn ssb_burst_layout(fc: &FrameConfig, ssb_per_slot: usize) -> Vec<SsbPosition> {
    let slots = ssb_slots(fc);
    match ssb_per_slot {
        1 => slots
            .iter()
            .enumerate()
            .map(|(k, &slot)| SsbPosition {
                ssbi: k,
                slot,
                start_symbol: if slot % 2 == 0 { 4 } else { 2 },
            })
            .collect(),
        _ => (0..2 * slots.len())
            .map(|k| SsbPosition {
                ssbi: k,
                slot: slots[k / 2],
                start_symbol: ssb_start_symbol(k),
            })
            .collect(),
    }
}

/// Symbols of a slot that serve one hop and the fixed blocks inside them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub sym0: usize,
    pub sym1: usize,
    pub ssb_symbol: Option<usize>,
    pub coreset1: bool,
}

impl Window {
    /// Half-slot window of SSB index `ssbi` when two SSB share a slot.
    pub fn half_slot(ssbi: usize) -> Self {
        let (sym0, sym1) = [(0, 8), (8, 14), (0, 6), (6, 14)][ssbi % 4];
        Window {
            sym0,
            sym1,
            ssb_symbol: Some(ssb_start_symbol(ssbi)),
            coreset1: ssbi.is_multiple_of(2),
        }
    }

    /// Whole slot carrying one SSB at its first standard position.
    pub fn full_slot(start_symbol: usize) -> Self {
        Window {
            sym0: 0,
            sym1: 14,
            ssb_symbol: Some(start_symbol),
            coreset1: true,
        }
    }

    /// Whole slot without SSB.
    pub fn plain_slot() -> Self {
        Window {
            sym0: 0,
            sym1: 14,
            ssb_symbol: None,
            coreset1: true,
        }
    }

    fn fixed_blocks(&self, fc: &FrameConfig) -> Vec<(Signal, Rect)> {
        let mut v = Vec::new();
        if self.coreset1 {
            v.push((
                Signal::Coreset1Ss1,
                Rect {
                    sym0: self.sym0,
                    nsym: CORESET1_SHAPE.1,
                    prb0: 0,
                    nprb: fc.total_prbs,
                },
            ));
        }
        if let Some(s) = self.ssb_symbol {
            v.push((
                Signal::Coreset0Ss0,
                Rect {
                    sym0: s,
                    nsym: CORESET0_SHAPE.1,
                    prb0: fc.coreset0_prb,
                    nprb: CORESET0_SHAPE.0,
                },
            ));
            v.push((
                Signal::Ssb,
                Rect {
                    sym0: s,
                    nsym: SSB_SHAPE.1,
                    prb0: fc.coreset0_prb + CORESET0_SHAPE.0,
                    nprb: SSB_SHAPE.0,
                },
            ));
        }
        v
    }
}

/// Messages requested in one window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Load {
    pub sibs: Vec<Signal>,
    /// Lay the window out as if this SIB were sent, then give its
    /// resources to one more MSG4. Keeps the layout identical across SSB
    /// periods with and without system information.
    pub freed_sib: Option<Signal>,
    pub paging: bool,
    pub msg2: bool,
    pub msg4: bool,
}

/// One committed block inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub signal: Signal,
    pub ue: u32,
    pub rect: Rect,
}

fn item_for(r: &SignalResource, w: &Window, fc: &FrameConfig) -> Item {
    let mut shapes = Vec::new();
    for &(nprb, nsym) in &r.shapes {
        let starts: Vec<usize> = match fc.time_allocation {
            TimeAllocation::AnyStart => (w.sym0..w.sym1).collect(),
            TimeAllocation::DefaultTable => default_table_starts(nsym).to_vec(),
        };
        for s in starts {
            if s >= w.sym0 && s + nsym <= w.sym1 {
                shapes.push((s, nsym, nprb));
            }
        }
    }
    Item { shapes }
}

/// A message to place: its variants, largest first, and how many copies to try.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub variants: Vec<SignalResource>,
    pub max_count: usize,
}

/// Requests for `load` in priority order: system information, one MSG4,
/// paging, further MSG4 up to the per-window limit, then MSG2.
pub fn requests_for(load: &Load, fc: &FrameConfig, cat: &[SignalResource]) -> Vec<Request> {
    let req = |signal, max_count| Request {
        variants: variants(cat, signal),
        max_count,
    };
    let mut out: Vec<Request> = load
        .sibs
        .iter()
        .chain(load.freed_sib.iter())
        .map(|&s| req(s, 1))
        .collect();
    if load.msg4 {
        out.push(req(Signal::Msg4, 1));
    }
    if load.paging {
        out.push(req(Signal::Paging, 1));
    }
    if load.msg4 && fc.max_msg4_per_window > 1 {
        out.push(req(Signal::Msg4, fc.max_msg4_per_window - 1));
    }
    if load.msg2 {
        out.push(req(Signal::Msg2, 1));
    }
    out
}

/// Fill one window: fixed blocks first, then each request in order, trying
/// its variants largest first and repeating it up to its count while the
/// whole committed set still packs.
pub fn pack_requests(fc: &FrameConfig, w: &Window, requests: &[Request]) -> Vec<Placement> {
    let mut grid = Grid::new(fc.symbols_per_slot, fc.total_prbs);
    let mut out = Vec::new();
    for (signal, rect) in w.fixed_blocks(fc) {
        grid.fill(&rect);
        out.push(Placement {
            signal,
            ue: 0,
            rect,
        });
    }
    let base = grid.clone();
    let mut committed: Vec<&SignalResource> = Vec::new();
    let mut items: Vec<Item> = Vec::new();
    let mut layout: Vec<Rect> = Vec::new();
    for req in requests {
        for _ in 0..req.max_count {
            let mut added = false;
            for r in &req.variants {
                let item = item_for(r, w, fc);
                if let Some(rect) = place_greedy(&grid, &item, w.sym0, w.sym1) {
                    grid.fill(&rect);
                    layout.push(rect);
                } else {
                    // Rearranging what is already committed may still make room.
                    items.push(item.clone());
                    let Some(rects) = pack(&base, &items, w.sym0, w.sym1) else {
                        items.pop();
                        continue;
                    };
                    items.pop();
                    grid = base.clone();
                    for rc in &rects {
                        grid.fill(rc);
                    }
                    layout = rects;
                }
                items.push(item);
                committed.push(r);
                added = true;
                break;
            }
            if !added {
                break;
            }
        }
    }
    for (r, rect) in committed.iter().zip(layout.iter()) {
        out.push(Placement {
            signal: r.signal,
            ue: r.ue,
            rect: *rect,
        });
    }
    out
}

type TemplateKey = (FrameConfig, Window, Load, Vec<SignalResource>);

/// `pack_window` results are pure functions of their inputs and are reused
/// across schedules within the process.
fn template_cache() -> &'static Mutex<HashMap<TemplateKey, Vec<Placement>>> {
    static CACHE: OnceLock<Mutex<HashMap<TemplateKey, Vec<Placement>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// `pack_window` through the process-wide cache.
pub fn cached_window(
    fc: &FrameConfig,
    w: &Window,
    load: &Load,
    cat: &[SignalResource],
) -> Vec<Placement> {
    let key = (fc.clone(), *w, load.clone(), cat.to_vec());
    if let Some(hit) = template_cache().lock().unwrap().get(&key) {
        return hit.clone();
    }
    let placed = pack_window(fc, w, load, cat);
    template_cache().lock().unwrap().insert(key, placed.clone());
    placed
}

pub fn pack_window(
    fc: &FrameConfig,
    w: &Window,
    load: &Load,
    cat: &[SignalResource],
) -> Vec<Placement> {
    let mut out = pack_requests(fc, w, &requests_for(load, fc, cat));
    let Some(freed) = load.freed_sib else {
        return out;
    };
    let Some(k) = out.iter().position(|p| p.signal == freed) else {
        return out;
    };
    let area = out.remove(k).rect;
    let msg4s = out.iter().filter(|p| p.signal == Signal::Msg4).count();
    if !load.msg4 || msg4s >= fc.max_msg4_per_window {
        return out;
    }
    let fitting = variants(cat, Signal::Msg4).into_iter().find_map(|r| {
        r.shapes
            .iter()
            .find(|&&(nprb, nsym)| nprb <= area.nprb && nsym <= area.nsym)
            .map(|&(nprb, nsym)| (r.ue, nprb, nsym))
    });
    if let Some((ue, nprb, nsym)) = fitting {
        out.push(Placement {
            signal: Signal::Msg4,
            ue,
            rect: Rect {
                sym0: area.sym0,
                nsym,
                prb0: area.prb0,
                nprb,
            },
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    HalfSlot,
    FullSlot,
    ExtraSweep,
    ExtraSweep160,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Scheme> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "halfslot" => Some(Scheme::HalfSlot),
            "fullslot" => Some(Scheme::FullSlot),
            "extrasweep" => Some(Scheme::ExtraSweep),
            "extrasweep160" => Some(Scheme::ExtraSweep160),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    /// Slot counted from the start of the 160 ms super-period.
    pub slot: usize,
    pub start_symbol: usize,
    pub symbol_len: usize,
    pub start_prb: usize,
    pub prb_len: usize,
    pub signal: Signal,
    pub ih: usize,
    pub ssbi: Option<usize>,
    pub ue: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    pub coverage_ratio: f64,
    /// Fraction of slots in an SSB period free of common signaling.
    pub cs_efficiency: f64,
    /// Fraction of slots in an SSB period carrying common signaling.
    pub cs_slot_ratio: f64,
    /// Worst-beam MSG4 capacity.
    pub msg4_per_s: f64,
    /// Worst-beam paging capacity.
    pub paging_ue_per_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfFrameUse {
    Data,
    Shared,
    CsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfFrameEntry {
    pub half_frame: usize,
    pub cs_slots: usize,
    pub usage: HalfFrameUse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub scheme: Scheme,
    pub n_hops: usize,
    pub ssb_period_ms: u32,
    /// Allocations over one 160 ms super-period.
    pub allocations: Vec<Allocation>,
    /// Slots of one SSB period carrying common signaling.
    pub cs_slots: usize,
    pub total_slots: usize,
    pub hops_covered: usize,
    pub kpis: Kpis,
}

/// One pass of a hop over a window.
struct Visit {
    slot: usize,
    window: Window,
    load: Load,
    ssbi: Option<usize>,
}

/// System information of one SSB period: (sent, laid out but freed).
/// With a 20 ms period SIB1 goes out in the first period of each 160 ms,
/// SIB19 in the second, and the others reuse the SIB1 layout.
fn sibs_for_period(fc: &FrameConfig, period: usize) -> (Vec<Signal>, Option<Signal>) {
    if fc.ssb_period_ms >= SUPER_PERIOD_MS {
        (vec![Signal::Sib1, Signal::Sib19], None)
    } else {
        match period {
            0 => (vec![Signal::Sib1], None),
            1 => (vec![Signal::Sib19], None),
            _ => (vec![], Some(Signal::Sib1)),
        }
    }
}

/// Slot offset inside the SSB period of the `k`-th slot of a sweep that
/// takes every slot of whole half frames, starting at half frame `hf0`.
fn plain_sweep_slot(fc: &FrameConfig, hf0: usize, k: usize) -> usize {
    (hf0 + k / fc.slots_per_half_frame) * fc.slots_per_half_frame + k % fc.slots_per_half_frame
}

/// Visits of hop `ih` in SSB period `period`, or `None` if the hop does not fit.
fn visits(
    scheme: Scheme,
    n_hops: usize,
    ih: usize,
    period: usize,
    fc: &FrameConfig,
) -> Option<Vec<Visit>> {
    let hf_budget = fc.half_frames_per_period();
    let spf = fc.slots_per_half_frame;
    let (sibs, freed_sib) = sibs_for_period(fc, period);
    let half = ssb_burst_layout(fc, 2);
    let full = ssb_burst_layout(fc, 1);
    let half_visit = |load: Load| -> Option<Visit> {
        let hf = ih / half.len();
        if hf >= hf_budget {
            return None;
        }
        let pos = half[ih % half.len()];
        Some(Visit {
            slot: hf * spf + pos.slot,
            window: Window::half_slot(pos.ssbi),
            load,
            ssbi: Some(pos.ssbi),
        })
    };
    let full_visit = |load: Load| -> Option<Visit> {
        let hf = ih / full.len();
        if hf >= hf_budget {
            return None;
        }
        let pos = full[ih % full.len()];
        Some(Visit {
            slot: hf * spf + pos.slot,
            window: Window::full_slot(pos.start_symbol),
            load,
            ssbi: Some(pos.ssbi),
        })
    };
    let extra_visit = |hf0: usize, load: Load| -> Option<Visit> {
        let slot = plain_sweep_slot(fc, hf0, ih);
        if slot >= fc.slots_per_period() {
            return None;
        }
        Some(Visit {
            slot,
            window: Window::plain_slot(),
            load,
            ssbi: None,
        })
    };
    let all = Load {
        sibs: sibs.clone(),
        freed_sib,
        paging: true,
        msg2: true,
        msg4: true,
    };
    match scheme {
        Scheme::HalfSlot => Some(vec![half_visit(all)?]),
        Scheme::FullSlot => Some(vec![full_visit(all)?]),
        Scheme::ExtraSweep => {
            let first = half_visit(Load {
                sibs,
                freed_sib,
                paging: true,
                ..Load::default()
            })?;
            let second = extra_visit(
                n_hops.div_ceil(half.len()),
                Load {
                    msg2: true,
                    msg4: true,
                    ..Load::default()
                },
            )?;
            Some(vec![first, second])
        }
        Scheme::ExtraSweep160 => {
            let first = full_visit(Load {
                sibs,
                freed_sib,
                paging: true,
                msg2: true,
                msg4: false,
            })?;
            let second = extra_visit(
                n_hops.div_ceil(full.len()),
                Load {
                    msg4: true,
                    ..Load::default()
                },
            )?;
            Some(vec![first, second])
        }
    }
}

/// Build the schedule of `n_hops` hops over one 160 ms super-period.
/// Hops that do not fit the SSB period are left out and lower the coverage ratio.
pub fn build_schedule(
    scheme: Scheme,
    n_hops: usize,
    fc: &FrameConfig,
    cat: &[SignalResource],
) -> Result<ScheduleResult, ScheduleError> {
    fc.validate()?;
    if n_hops == 0 {
        return Err(ScheduleError::InvalidConfig(
            "n_hops must be at least 1".into(),
        ));
    }
    if scheme == Scheme::ExtraSweep160 && fc.ssb_period_ms != 160 {
        return Err(ScheduleError::InvalidConfig(
            "ExtraSweep160 needs a 160 ms SSB period".into(),
        ));
    }
    let per_period = fc.slots_per_period();
    let mut cache: HashMap<(Window, Load), Vec<Placement>> = HashMap::new();
    let mut allocations = Vec::new();
    let mut hops_covered = 0;
    let mut cs_slot_set = BTreeSet::new();
    for period in 0..fc.periods_per_super_period() {
        for ih in 0..n_hops {
            let Some(vs) = visits(scheme, n_hops, ih, period, fc) else {
                continue;
            };
            if period == 0 {
                hops_covered += 1;
            }
            for v in vs {
                let placed = cache
                    .entry((v.window, v.load.clone()))
                    .or_insert_with(|| cached_window(fc, &v.window, &v.load, cat));
                if period == 0 {
                    cs_slot_set.insert(v.slot);
                }
                for p in placed.iter() {
                    allocations.push(Allocation {
                        slot: period * per_period + v.slot,
                        start_symbol: p.rect.sym0,
                        symbol_len: p.rect.nsym,
                        start_prb: p.rect.prb0,
                        prb_len: p.rect.nprb,
                        signal: p.signal,
                        ih,
                        ssbi: v.ssbi,
                        ue: p.ue,
                    });
                }
            }
        }
    }
    allocations.sort_by_key(|a| (a.slot, a.start_symbol, a.start_prb));
    let mut result = ScheduleResult {
        scheme,
        n_hops,
        ssb_period_ms: fc.ssb_period_ms,
        allocations,
        cs_slots: cs_slot_set.len(),
        total_slots: per_period,
        hops_covered,
        kpis: Kpis {
            coverage_ratio: 0.0,
            cs_efficiency: 0.0,
            cs_slot_ratio: 0.0,
            msg4_per_s: 0.0,
            paging_ue_per_s: 0.0,
        },
    };
    result.kpis = kpis(&result);
    Ok(result)
}

/// Same as `build_schedule`, but a partial sweep is an error.
pub fn build_schedule_strict(
    scheme: Scheme,
    n_hops: usize,
    fc: &FrameConfig,
    cat: &[SignalResource],
) -> Result<ScheduleResult, ScheduleError> {
    let r = build_schedule(scheme, n_hops, fc, cat)?;
    if r.hops_covered < n_hops {
        return Err(ScheduleError::SchemeInfeasible {
            scheme,
            n_hops,
            covered: r.hops_covered,
        });
    }
    Ok(r)
}

/// Per-hop totals over the super-period: (MSG4 messages, paged UE).
pub fn per_hop_capacity(result: &ScheduleResult) -> Vec<(usize, u32)> {
    let mut v = vec![(0usize, 0u32); result.n_hops];
    for a in &result.allocations {
        match a.signal {
            Signal::Msg4 => v[a.ih].0 += 1,
            Signal::Paging => v[a.ih].1 += a.ue,
            _ => {}
        }
    }
    v
}

pub fn kpis(result: &ScheduleResult) -> Kpis {
    let seconds = SUPER_PERIOD_MS as f64 / 1000.0;
    let cap = per_hop_capacity(result);
    let (msg4, paging) = if result.hops_covered == 0 {
        (0, 0)
    } else {
        (
            cap.iter().map(|c| c.0).min().unwrap_or(0),
            cap.iter().map(|c| c.1).min().unwrap_or(0),
        )
    };
    let ratio = result.cs_slots as f64 / result.total_slots as f64;
    Kpis {
        coverage_ratio: (result.hops_covered as f64 / result.n_hops as f64).min(1.0),
        cs_efficiency: 1.0 - ratio,
        cs_slot_ratio: ratio,
        msg4_per_s: msg4 as f64 / seconds,
        paging_ue_per_s: paging as f64 / seconds,
    }
}

/// Classify each half frame of the first SSB period by its common-signaling load.
pub fn timeline(result: &ScheduleResult, fc: &FrameConfig) -> Vec<HalfFrameEntry> {
    let spf = fc.slots_per_half_frame;
    let mut slots: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for a in result
        .allocations
        .iter()
        .filter(|a| a.slot < result.total_slots)
    {
        slots.entry(a.slot / spf).or_default().insert(a.slot);
    }
    (0..result.total_slots / spf)
        .map(|hf| {
            let n = slots.get(&hf).map_or(0, BTreeSet::len);
            let usage = if n == 0 {
                HalfFrameUse::Data
            } else if n == spf {
                HalfFrameUse::CsOnly
            } else {
                HalfFrameUse::Shared
            };
            HalfFrameEntry {
                half_frame: hf,
                cs_slots: n,
                usage,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RaViolation {
    /// No MSG4 occasion follows the MSG2 closely enough.
    ContentionResolution {
        ih: usize,
        msg2_slot: usize,
        next_msg4_slot: Option<usize>,
    },
}

/// Check every MSG2 occasion against the next MSG4 occasion of the same hop.
/// MSG3 is granted 1 to 32 slots after MSG2, and MSG4 must arrive after
/// MSG3 and before the contention-resolution timer expires.
pub fn validate_ra_timing(result: &ScheduleResult, fc: &FrameConfig) -> Vec<RaViolation> {
    let horizon = fc.periods_per_super_period() * fc.slots_per_period();
    let timer = (CONTENTION_TIMER_MS * fc.slots_per_ms() as f64).round() as usize;
    let mut msg2: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut msg4: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for a in &result.allocations {
        match a.signal {
            Signal::Msg2 => {
                msg2.entry(a.ih).or_default().insert(a.slot);
            }
            Signal::Msg4 => {
                msg4.entry(a.ih).or_default().insert(a.slot);
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    for (&ih, t2s) in &msg2 {
        let empty = BTreeSet::new();
        let t4s = msg4.get(&ih).unwrap_or(&empty);
        for &t2 in t2s {
            // The schedule repeats every super-period.
            let next = t4s
                .range(t2 + 2..)
                .next()
                .copied()
                .or_else(|| t4s.iter().next().map(|&t| t + horizon))
                .filter(|&t| t >= t2 + 2);
            let ok = next.is_some_and(|t4| t4 - t2 <= MAX_GRANT_DELAY_SLOTS + timer);
            if !ok {
                out.push(RaViolation::ContentionResolution {
                    ih,
                    msg2_slot: t2,
                    next_msg4_slot: next,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellType {
    A,
    B,
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub cell_id: usize,
    pub beam_ids: Vec<usize>,
    pub cell_type: CellType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellMap {
    pub cells: Vec<Cell>,
    pub max_beams_per_cell: usize,
}

/// Group beams into cells of consecutive hop indexes. Walking a super-block
/// in fill order, hop indexes run through `0..n_hops` repeatedly; each pass
/// is cut into ranges of `max_beams_per_cell` indexes and each range of each
/// pass becomes one cell. `coords` are the beams' grid coordinates.
pub fn beam_to_cell(plan: &HopPlan, coords: &[(i64, i64)], max_beams_per_cell: usize) -> CellMap {
    assert_eq!(coords.len(), plan.index_of.len());
    let n = plan.n_hops;
    let (cols, rows) = block_dims(n);
    let height = (blocks_per_super_block(n) * rows) as i64;
    let max = max_beams_per_cell.max(1);
    let mut groups: BTreeMap<(i64, i64, usize, usize), Vec<usize>> = BTreeMap::new();
    for (b, &(i, j)) in coords.iter().enumerate() {
        let sb = (i.div_euclid(height), j.div_euclid(cols as i64));
        let lin = (i.rem_euclid(height) as usize) * cols + j.rem_euclid(cols as i64) as usize;
        let pass = lin / n;
        let range = (lin % n) / max;
        groups.entry((sb.0, sb.1, pass, range)).or_default().push(b);
    }
    let cells = groups
        .into_iter()
        .enumerate()
        .map(|(cell_id, ((_, _, _, range), beam_ids))| Cell {
            cell_id,
            beam_ids,
            cell_type: if max >= n {
                CellType::Single
            } else if range % 2 == 0 {
                CellType::A
            } else {
                CellType::B
            },
        })
        .collect();
    CellMap {
        cells,
        max_beams_per_cell: max,
    }
}

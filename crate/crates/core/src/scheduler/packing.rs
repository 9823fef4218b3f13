//! Exact rectangle packing inside one slot's symbol x PRB grid.

/// A placed rectangle: symbols `[sym0, sym0 + nsym)`, PRBs `[prb0, prb0 + nprb)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub sym0: usize,
    pub nsym: usize,
    pub prb0: usize,
    pub nprb: usize,
}

impl Rect {
    pub fn sym_end(&self) -> usize {
        self.sym0 + self.nsym
    }

    pub fn prb_end(&self) -> usize {
        self.prb0 + self.nprb
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        self.sym0 < o.sym_end()
            && o.sym0 < self.sym_end()
            && self.prb0 < o.prb_end()
            && o.prb0 < self.prb_end()
    }

    pub fn area(&self) -> usize {
        self.nsym * self.nprb
    }
}

/// Occupancy of one slot, one bitmask of PRBs per symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    rows: Vec<u256>,
    prbs: usize,
}

#[allow(non_camel_case_types)]
type u256 = [u128; 2];

fn span_mask(prb0: usize, n: usize) -> u256 {
    let mut m = [0u128; 2];
    for p in prb0..prb0 + n {
        m[p / 128] |= 1u128 << (p % 128);
    }
    m
}

impl Grid {
    pub fn new(symbols: usize, prbs: usize) -> Self {
        assert!(prbs <= 256);
        Grid {
            rows: vec![[0, 0]; symbols],
            prbs,
        }
    }

    pub fn symbols(&self) -> usize {
        self.rows.len()
    }

    pub fn prbs(&self) -> usize {
        self.prbs
    }

    pub fn fits(&self, r: &Rect) -> bool {
        if r.sym_end() > self.rows.len() || r.prb_end() > self.prbs {
            return false;
        }
        let m = span_mask(r.prb0, r.nprb);
        self.rows[r.sym0..r.sym_end()]
            .iter()
            .all(|row| row[0] & m[0] == 0 && row[1] & m[1] == 0)
    }

    pub fn fill(&mut self, r: &Rect) {
        let m = span_mask(r.prb0, r.nprb);
        for row in &mut self.rows[r.sym0..r.sym_end()] {
            row[0] |= m[0];
            row[1] |= m[1];
        }
    }

    pub fn clear(&mut self, r: &Rect) {
        let m = span_mask(r.prb0, r.nprb);
        for row in &mut self.rows[r.sym0..r.sym_end()] {
            row[0] &= !m[0];
            row[1] &= !m[1];
        }
    }

    pub fn is_free(&self, sym: usize, prb: usize) -> bool {
        self.rows[sym][prb / 128] & (1u128 << (prb % 128)) == 0
    }

    /// PRB indexes where a free run starts in some symbol of the range.
    fn run_starts(&self, sym0: usize, sym1: usize) -> Vec<usize> {
        let mut starts = Vec::new();
        for s in sym0..sym1 {
            for p in 0..self.prbs {
                if self.is_free(s, p) && (p == 0 || !self.is_free(s, p - 1)) {
                    starts.push(p);
                }
            }
        }
        starts.sort_unstable();
        starts.dedup();
        starts
    }

    /// Free cells within the symbol range.
    pub fn free_area(&self, sym0: usize, sym1: usize) -> usize {
        let used: u32 = self.rows[sym0..sym1]
            .iter()
            .map(|r| r[0].count_ones() + r[1].count_ones())
            .sum();
        (sym1 - sym0) * self.prbs - used as usize
    }
}

/// Candidate `(sym0, nsym, nprb)` choices for one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub shapes: Vec<(usize, usize, usize)>,
}

/// Search nodes explored before `pack` gives up and reports no placement.
pub const DEFAULT_NODE_BUDGET: usize = 2_000;

/// Cells on the rectangle's outline that touch an occupied cell or the
/// edge of the window.
fn contact(g: &Grid, r: &Rect, sym0: usize, sym1: usize) -> usize {
    let blocked = |s: isize, p: isize| -> bool {
        s < sym0 as isize
            || s >= sym1 as isize
            || p < 0
            || p >= g.prbs() as isize
            || !g.is_free(s as usize, p as usize)
    };
    let (s0, s1) = (r.sym0 as isize, r.sym_end() as isize);
    let (p0, p1) = (r.prb0 as isize, r.prb_end() as isize);
    let mut n = 0;
    for p in p0..p1 {
        n += blocked(s0 - 1, p) as usize + blocked(s1, p) as usize;
    }
    for s in s0..s1 {
        n += blocked(s, p0 - 1) as usize + blocked(s, p1) as usize;
    }
    n
}

/// Best single placement of `item` in the current grid: most contact, then
/// smallest area, then lowest PRB and symbol.
pub fn place_greedy(g: &Grid, item: &Item, sym0: usize, sym1: usize) -> Option<Rect> {
    let mut best: Option<(Rect, (std::cmp::Reverse<usize>, std::cmp::Reverse<usize>))> = None;
    for &(s, nsym, nprb) in &item.shapes {
        if s < sym0 || s + nsym > sym1 || nprb > g.prbs() {
            continue;
        }
        for p in 0..=g.prbs() - nprb {
            let r = Rect {
                sym0: s,
                nsym,
                prb0: p,
                nprb,
            };
            if !g.fits(&r) {
                continue;
            }
            let exposed = 2 * (r.nsym + r.nprb) - contact(g, &r, sym0, sym1);
            let key = (std::cmp::Reverse(exposed), std::cmp::Reverse(r.area()));
            let better = match &best {
                None => true,
                Some((b, k)) => key > *k || (key == *k && (r.prb0, r.sym0) < (b.prb0, b.sym0)),
            };
            if better {
                best = Some((r, key));
            }
        }
    }
    best.map(|b| b.0)
}

/// Place every item without overlap inside symbols `[sym0, sym1)` of
/// `grid`, or report that none was found. Two complete searches run in turn,
/// each limited to `DEFAULT_NODE_BUDGET` nodes: the left-justified search is
/// quick on loose windows, the cell-by-cell search on tight ones.
pub fn pack(grid: &Grid, items: &[Item], sym0: usize, sym1: usize) -> Option<Vec<Rect>> {
    pack_greedy_orders(grid, items, sym0, sym1)
        .or_else(|| pack_columns(grid, items, sym0, sym1, DEFAULT_NODE_BUDGET))
        .or_else(|| pack_left_justified(grid, items, sym0, sym1, DEFAULT_NODE_BUDGET))
        .or_else(|| pack_with_budget(grid, items, sym0, sym1, DEFAULT_NODE_BUDGET))
}

/// Place items one at a time with `place_greedy`, trying a few fixed item
/// orders: as given, tallest first, widest first, largest first, longest
/// possible shape first.
pub fn pack_greedy_orders(
    grid: &Grid,
    items: &[Item],
    sym0: usize,
    sym1: usize,
) -> Option<Vec<Rect>> {
    let fit = |it: &Item| -> Vec<(usize, usize, usize)> {
        it.shapes
            .iter()
            .copied()
            .filter(|s| s.0 >= sym0 && s.0 + s.1 <= sym1)
            .collect()
    };
    let tallest = |it: &Item| fit(it).iter().map(|s| s.1).min().unwrap_or(0);
    let widest = |it: &Item| fit(it).iter().map(|s| s.2).min().unwrap_or(0);
    let largest = |it: &Item| fit(it).iter().map(|s| s.1 * s.2).min().unwrap_or(0);
    let can_be_tall = |it: &Item| fit(it).iter().map(|s| s.1).max().unwrap_or(0);
    let keys: [&dyn Fn(&Item) -> usize; 4] = [&tallest, &widest, &largest, &can_be_tall];
    let mut orders: Vec<Vec<usize>> = vec![(0..items.len()).collect()];
    for key in keys {
        let mut o: Vec<usize> = (0..items.len()).collect();
        o.sort_by_key(|&k| std::cmp::Reverse(key(&items[k])));
        orders.push(o);
    }
    'orders: for order in orders {
        let mut g = grid.clone();
        let mut out = vec![None; items.len()];
        for k in order {
            let Some(r) = place_greedy(&g, &items[k], sym0, sym1) else {
                continue 'orders;
            };
            g.fill(&r);
            out[k] = Some(r);
        }
        return Some(out.into_iter().map(Option::unwrap).collect());
    }
    None
}

/// Any packing can be slid toward PRB 0 until each item touches PRB 0 or
/// something on its low side, so it suffices to try PRBs that start a free
/// run, placing items in order of their first PRB.
pub fn pack_left_justified(
    grid: &Grid,
    items: &[Item],
    sym0: usize,
    sym1: usize,
    budget: usize,
) -> Option<Vec<Rect>> {
    let mut g = grid.clone();
    let mut placed: Vec<Option<Rect>> = vec![None; items.len()];
    let mut nodes_left = budget;
    if justified(
        &mut g,
        items,
        &mut placed,
        sym0,
        sym1,
        (0, 0),
        &mut nodes_left,
    ) {
        Some(placed.into_iter().map(Option::unwrap).collect())
    } else {
        None
    }
}

fn justified(
    g: &mut Grid,
    items: &[Item],
    placed: &mut [Option<Rect>],
    sym0: usize,
    sym1: usize,
    floor: (usize, usize),
    nodes_left: &mut usize,
) -> bool {
    if placed.iter().all(Option::is_some) {
        return true;
    }
    if *nodes_left == 0 {
        return false;
    }
    *nodes_left -= 1;
    let pending: usize = items
        .iter()
        .zip(placed.iter())
        .filter(|(_, p)| p.is_none())
        .map(|(it, _)| it.shapes.iter().map(|s| s.1 * s.2).min().unwrap_or(0))
        .sum();
    if pending > g.free_area(sym0, sym1) {
        return false;
    }
    let starts = g.run_starts(sym0, sym1);
    let mut tried: Vec<&Item> = Vec::new();
    for k in 0..items.len() {
        if placed[k].is_some() || tried.contains(&&items[k]) {
            continue;
        }
        tried.push(&items[k]);
        for &(s, nsym, nprb) in &items[k].shapes {
            if s < sym0 || s + nsym > sym1 {
                continue;
            }
            for &p in &starts {
                if (p, s) < floor {
                    continue;
                }
                let r = Rect {
                    sym0: s,
                    nsym,
                    prb0: p,
                    nprb,
                };
                if !g.fits(&r) {
                    continue;
                }
                g.fill(&r);
                placed[k] = Some(r);
                if justified(g, items, placed, sym0, sym1, (p, s), nodes_left) {
                    return true;
                }
                placed[k] = None;
                g.clear(&r);
            }
        }
    }
    false
}

/// Scanning cells PRB by PRB and symbol by symbol, the first free cell of
/// any packing is either left empty or is the lowest-PRB, first-symbol
/// corner of some item. Branching on exactly those choices enumerates every
/// packing once, and the search stops when the free area left can no
/// longer hold the pending items.
pub fn pack_with_budget(
    grid: &Grid,
    items: &[Item],
    sym0: usize,
    sym1: usize,
    budget: usize,
) -> Option<Vec<Rect>> {
    cell_search(grid, items, sym0, sym1, budget, false)
}

/// Like `pack_with_budget`, but a skipped cell takes the rest of its free
/// run down the column with it. Not complete, much narrower.
pub fn pack_columns(
    grid: &Grid,
    items: &[Item],
    sym0: usize,
    sym1: usize,
    budget: usize,
) -> Option<Vec<Rect>> {
    cell_search(grid, items, sym0, sym1, budget, true)
}

fn cell_search(
    grid: &Grid,
    items: &[Item],
    sym0: usize,
    sym1: usize,
    budget: usize,
    skip_runs: bool,
) -> Option<Vec<Rect>> {
    let mut g = grid.clone();
    let mut placed: Vec<Option<Rect>> = vec![None; items.len()];
    let min_area: Vec<usize> = items
        .iter()
        .map(|it| {
            it.shapes
                .iter()
                .filter(|s| s.0 >= sym0 && s.0 + s.1 <= sym1)
                .map(|s| s.1 * s.2)
                .min()
                .unwrap_or(usize::MAX / 2)
        })
        .collect();
    let pending: usize = min_area.iter().sum();
    let mut s = Search {
        items,
        min_area: &min_area,
        sym0,
        sym1,
        nodes_left: budget,
        skip_runs,
    };
    let free = g.free_area(sym0, sym1);
    if s.run(&mut g, &mut placed, free, pending, 0) {
        Some(placed.into_iter().map(Option::unwrap).collect())
    } else {
        None
    }
}

struct Search<'a> {
    items: &'a [Item],
    min_area: &'a [usize],
    sym0: usize,
    sym1: usize,
    nodes_left: usize,
    /// Leave a whole vertical free run empty instead of a single cell.
    skip_runs: bool,
}

impl Search<'_> {
    fn first_free(&self, g: &Grid, from: usize) -> Option<(usize, usize)> {
        let h = self.sym1 - self.sym0;
        (from..g.prbs() * h)
            .map(|c| (c / h, self.sym0 + c % h))
            .find(|&(p, s)| g.is_free(s, p))
    }

    fn run(
        &mut self,
        g: &mut Grid,
        placed: &mut [Option<Rect>],
        free: usize,
        pending: usize,
        from: usize,
    ) -> bool {
        if pending == 0 {
            return true;
        }
        if pending > free || self.nodes_left == 0 {
            return false;
        }
        self.nodes_left -= 1;
        let Some((p, s)) = self.first_free(g, from) else {
            return false;
        };
        let h = self.sym1 - self.sym0;
        let cell = p * h + (s - self.sym0);
        let items = self.items;
        let mut tried: Vec<&Item> = Vec::new();
        for k in 0..items.len() {
            if placed[k].is_some() || tried.contains(&&items[k]) {
                continue;
            }
            // Identical items are interchangeable; only the first unplaced one is tried.
            tried.push(&items[k]);
            for &(s0, nsym, nprb) in &items[k].shapes {
                if s0 != s || s0 + nsym > self.sym1 {
                    continue;
                }
                let r = Rect {
                    sym0: s0,
                    nsym,
                    prb0: p,
                    nprb,
                };
                if !g.fits(&r) {
                    continue;
                }
                g.fill(&r);
                placed[k] = Some(r);
                let pend = pending - self.min_area[k];
                if self.run(g, placed, free - r.area(), pend, cell + 1) {
                    return true;
                }
                placed[k] = None;
                g.clear(&r);
            }
        }
        // Leave the cell, or its whole run down the PRB column, empty.
        let mut nsym = 1;
        if self.skip_runs {
            while s + nsym < self.sym1 && g.is_free(s + nsym, p) {
                nsym += 1;
            }
        }
        let waste = Rect {
            sym0: s,
            nsym,
            prb0: p,
            nprb: 1,
        };
        g.fill(&waste);
        let ok = self.run(g, placed, free - nsym, pending, cell + nsym);
        g.clear(&waste);
        ok
    }
}

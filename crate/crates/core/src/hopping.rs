//! Hop-index assignment over the beam grid.
//!
//! Indexes are laid out in blocks of `n_rows x n_cols` (rows step east along
//! the grid, columns step north). When `n_rows * n_cols` exceeds the hop
//! count, consecutive blocks keep counting cyclically from where the previous
//! block stopped until a block ends on the last index. The stacked blocks
//! form a super-block that tiles the grid.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopError {
    #[error("hop index {0} out of range for {1} hops")]
    IndexOutOfRange(usize, usize),
    #[error("hop count must be at least 1")]
    ZeroHops,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopPlan {
    pub n_hops: usize,
    pub n_cols: usize,
    pub n_rows: usize,
    pub blocks_per_super_block: usize,
    /// Hop index of each beam, in beam order.
    pub index_of: Vec<usize>,
}

/// Columns and rows of one block for `n_hops` hops.
pub fn block_dims(n_hops: usize) -> (usize, usize) {
    let mut cols = (n_hops as f64).sqrt().ceil() as usize;
    // Guard the float square root against rounding on perfect squares.
    while cols > 1 && (cols - 1) * (cols - 1) >= n_hops {
        cols -= 1;
    }
    while cols * cols < n_hops {
        cols += 1;
    }
    let rows = n_hops.div_ceil(cols);
    (cols, rows)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Number of blocks stacked before the cyclic fill ends on the last index.
pub fn blocks_per_super_block(n_hops: usize) -> usize {
    let (c, r) = block_dims(n_hops);
    let cells = c * r;
    n_hops / gcd(n_hops, cells)
}

/// Hop index of the super-block cell at row `i` (east steps) and column `j` (north rows).
pub fn super_block_index(n_hops: usize, i: i64, j: i64) -> usize {
    let (cols, rows) = block_dims(n_hops);
    let height = (blocks_per_super_block(n_hops) * rows) as i64;
    let r = i.rem_euclid(height) as usize;
    let c = j.rem_euclid(cols as i64) as usize;
    (r * cols + c) % n_hops
}

/// Assign hop indexes to grid coordinates `(i, j)`.
pub fn assign_hop_indices(coords: &[(i64, i64)], n_hops: usize) -> Result<HopPlan, HopError> {
    if n_hops == 0 {
        return Err(HopError::ZeroHops);
    }
    let (n_cols, n_rows) = block_dims(n_hops);
    let index_of = coords
        .iter()
        .map(|&(i, j)| super_block_index(n_hops, i, j))
        .collect();
    Ok(HopPlan {
        n_hops,
        n_cols,
        n_rows,
        blocks_per_super_block: blocks_per_super_block(n_hops),
        index_of,
    })
}

impl HopPlan {
    /// Beam ids illuminated in hop `ih`, ascending.
    pub fn active_set(&self, ih: usize) -> Result<Vec<usize>, HopError> {
        if ih >= self.n_hops {
            return Err(HopError::IndexOutOfRange(ih, self.n_hops));
        }
        Ok(self
            .index_of
            .iter()
            .enumerate()
            .filter(|(_, &h)| h == ih)
            .map(|(b, _)| b)
            .collect())
    }

    /// All active sets at once, indexed by hop.
    pub fn active_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.n_hops];
        for (b, &h) in self.index_of.iter().enumerate() {
            sets[h].push(b);
        }
        sets
    }

    /// Smallest and largest active-set size over all hops.
    pub fn active_size_range(&self) -> (usize, usize) {
        let sets = self.active_sets();
        let min = sets.iter().map(Vec::len).min().unwrap_or(0);
        let max = sets.iter().map(Vec::len).max().unwrap_or(0);
        (min, max)
    }
}

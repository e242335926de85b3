use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::schedule::ArchConfig;

/// Dense data memory: `replicas` identical copies of the current dense tile,
/// each striped over `banks` banks. Row `j` of the tile lives in bank
/// `j mod banks` at depth `j / banks`; every row is `lanes` values wide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseDataMemory {
    replicas: usize,
    banks: usize,
    depth: usize,
    lanes: usize,
    rows: usize,
    cols: usize,
    /// `[replica][bank][depth][lane]`, flattened.
    cells: Vec<i32>,
}

impl DenseDataMemory {
    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn banks(&self) -> usize {
        self.banks
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bank_of(&self, row: usize) -> usize {
        row % self.banks
    }

    /// One port read: `lanes` values of tile row `row` from `replica`.
    /// Lanes past the loaded column count read as zero.
    pub fn read(&self, replica: usize, row: usize) -> &[i32] {
        let bank = row % self.banks;
        let depth = row / self.banks;
        let base = ((replica * self.banks + bank) * self.depth + depth) * self.lanes;
        &self.cells[base..base + self.lanes]
    }

    /// Whole contents of one replica, in row order.
    pub fn replica_rows(&self, replica: usize) -> Vec<&[i32]> {
        (0..self.rows).map(|r| self.read(replica, r)).collect()
    }
}

/// Writes a dense tile into every replica. Costs `rows * cols * replicas`
/// element transfers at `load_bw` elements per cycle.
pub fn load_tile(tile: &DenseMatrix, cfg: &ArchConfig) -> Result<(DenseDataMemory, usize)> {
    if tile.rows() > cfg.tile_width || tile.cols() > cfg.lanes {
        return Err(Error::InvalidConfig(format!(
            "{}x{} dense tile exceeds {}x{} memory",
            tile.rows(),
            tile.cols(),
            cfg.tile_width,
            cfg.lanes
        )));
    }
    let (banks, depth, lanes) = (cfg.row_groups(), cfg.bank_depth(), cfg.lanes);
    let mut ddm = DenseDataMemory {
        replicas: cfg.replicas,
        banks,
        depth,
        lanes,
        rows: tile.rows(),
        cols: tile.cols(),
        cells: vec![0; cfg.replicas * banks * depth * lanes],
    };
    for replica in 0..cfg.replicas {
        for r in 0..tile.rows() {
            let base = ((replica * banks + r % banks) * depth + r / banks) * lanes;
            ddm.cells[base..base + tile.cols()].copy_from_slice(tile.row(r));
        }
    }
    let cycles = (tile.rows() * tile.cols() * cfg.replicas).div_ceil(cfg.load_bw);
    Ok((ddm, cycles))
}

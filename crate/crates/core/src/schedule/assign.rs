use crate::error::{Error, Result};
use crate::matrix::SparseMatrix;
use crate::pcoo::{PacketLayout, PcooPacket};
use crate::schedule::TileSchedule;

/// Compresses a sparse tile into packets and deals its rows round-robin
/// (row `i` to PE `i mod K`). Each PE's rows are concatenated, so a PE
/// moves on to its next row as soon as the current one ends; the shorter
/// lists are then padded with idle packets.
///
/// With a zero-bit value field only binary tiles are accepted.
pub fn assign_rows(tile: &SparseMatrix, pes: usize, layout: PacketLayout) -> Result<TileSchedule> {
    if pes == 0 {
        return Err(Error::InvalidConfig("zero PEs".into()));
    }
    if tile.cols() > layout.tile_width() {
        return Err(Error::ColumnOutOfRange { col: tile.cols() - 1, width: layout.tile_width() });
    }
    let h = layout.value_bits();
    let mut columns: Vec<Vec<PcooPacket>> = vec![Vec::new(); pes];
    for i in 0..tile.rows() {
        let out = &mut columns[i % pes];
        let (cols, vals) = tile.row(i);
        if cols.is_empty() {
            out.push(PcooPacket::EMPTY_ROW);
            continue;
        }
        let last = cols.len() - 1;
        for (n, (&c, &v)) in cols.iter().zip(vals).enumerate() {
            let value = match h {
                0 if v == 1 => 0,
                0 => return Err(Error::ValueOutOfRange { value: v as i64, bits: 0 }),
                32 => v,
                _ if (v as i64) >= -(1i64 << (h - 1)) && (v as i64) < 1i64 << (h - 1) => v,
                _ => return Err(Error::ValueOutOfRange { value: v as i64, bits: h }),
            };
            out.push(PcooPacket::element(c as u32, value, n == 0, n == last));
        }
    }
    Ok(TileSchedule::from_columns(&columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::Format;
    use crate::schedule::schedule_stats;
    use proptest::prelude::*;

    fn tile_with_row_nnz(nnz: &[usize], width: usize) -> SparseMatrix {
        let t = nnz.iter().enumerate().flat_map(|(r, &n)| (0..n).map(move |c| (r, c, 1))).collect();
        SparseMatrix::from_triplets(nnz.len(), width, t, Format::BINARY).unwrap()
    }

    #[test]
    fn concatenation_example() {
        let tile = tile_with_row_nnz(&[3, 1, 1, 1, 2, 1, 1, 1], 8);
        let s = assign_rows(&tile, 4, PacketLayout::new(8, 0).unwrap()).unwrap();
        assert_eq!(s.cycles(), 5);
        let loads: Vec<usize> = (0..4).map(|p| s.column(p).filter(|q| !q.is_idle()).count()).collect();
        assert_eq!(loads, vec![5, 2, 2, 2]);
        let stats = schedule_stats(&s);
        let pads: Vec<usize> = stats.per_pe.iter().map(|c| c.pad_idle).collect();
        assert_eq!(pads, vec![0, 3, 3, 3]);
        // PE 0 carries rows 0 and 4 back to back.
        let col0: Vec<PcooPacket> = s.column(0).collect();
        assert!(col0[0].sor && !col0[0].eor && col0[2].eor && col0[3].sor && col0[4].eor);
    }

    #[test]
    fn all_empty_rows() {
        let tile = tile_with_row_nnz(&[0, 0, 0, 0], 8);
        let s = assign_rows(&tile, 4, PacketLayout::new(8, 0).unwrap()).unwrap();
        assert_eq!(s.cycles(), 1);
        assert!(s.cycle(0).iter().all(PcooPacket::is_empty_row));
    }

    #[test]
    fn value_width_checks() {
        let t = SparseMatrix::from_triplets(1, 4, vec![(0, 1, 5)], Format::new(4, 0).unwrap()).unwrap();
        assert!(assign_rows(&t, 2, PacketLayout::new(8, 0).unwrap()).is_err());
        assert!(assign_rows(&t, 2, PacketLayout::new(8, 3).unwrap()).is_err());
        let s = assign_rows(&t, 2, PacketLayout::new(8, 4).unwrap()).unwrap();
        assert_eq!(s.get(0, 0), PcooPacket::element(1, 5, true, true));
    }

    proptest! {
        #[test]
        fn conservation_and_balance(nnz in proptest::collection::vec(0usize..9, 1..40), pes in 1usize..9) {
            let tile = tile_with_row_nnz(&nnz, 8);
            let s = assign_rows(&tile, pes, PacketLayout::new(8, 0).unwrap()).unwrap();
            let valid: Vec<usize> = (0..pes).map(|p| s.column(p).filter(|q| q.vld).count()).collect();
            prop_assert_eq!(valid.iter().sum::<usize>(), tile.nnz());
            let max_row = *nnz.iter().max().unwrap();
            // Round-robin dealing keeps per-PE loads within one row of each other
            // for every prefix; in aggregate they differ by at most ceil(m/K) rows' worth.
            let rows_per_pe = nnz.len().div_ceil(pes);
            let spread = valid.iter().max().unwrap() - valid.iter().min().unwrap();
            prop_assert!(spread <= max_row * rows_per_pe);
            for p in 0..pes {
                let col: Vec<PcooPacket> = s.column(p).collect();
                prop_assert_eq!(col.iter().filter(|q| q.sor).count(), col.iter().filter(|q| q.eor).count());
                prop_assert_eq!(col.iter().filter(|q| q.sor).count(), (p..nnz.len()).step_by(pes).count());
            }
        }
    }
}

use crate::error::{Error, Result};
use crate::pcoo::PcooPacket;
use crate::schedule::TileSchedule;

/// Schedule for a dense left operand of `rows` rows and `width` columns.
///
/// Every row shares one column sweep `0..width`, so each PE replays the same
/// sweep once per row it owns and all active PEs read the same dense row in
/// any given cycle. PEs without a row in the final pass receive idle packets.
pub fn build_dmm_schedule(rows: usize, width: usize, pes: usize) -> Result<TileSchedule> {
    if pes == 0 || width == 0 {
        return Err(Error::InvalidConfig("dense schedule needs PEs and a nonzero width".into()));
    }
    let passes = rows.div_ceil(pes);
    let mut packets = Vec::with_capacity(passes * width * pes);
    for pass in 0..passes {
        let active = (rows - pass * pes).min(pes);
        for col in 0..width {
            let pkt = PcooPacket::element(col as u32, 0, col == 0, col + 1 == width);
            packets.extend(std::iter::repeat_n(pkt, active));
            packets.extend(std::iter::repeat_n(PcooPacket::IDLE, pes - active));
        }
    }
    TileSchedule::from_packets(pes, packets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{schedule_stats, stall_collisions, ArchConfig};

    #[test]
    fn balanced_sweep() {
        let s = build_dmm_schedule(8, 8, 8).unwrap();
        assert_eq!(s.cycles(), 8);
        assert!(s.packets().iter().all(|p| p.vld));
        assert!(s.cycle(0).iter().all(|p| p.sor && p.col == 0));
        assert!(s.cycle(7).iter().all(|p| p.eor && p.col == 7));
    }

    #[test]
    fn one_extra_row_adds_a_pass() {
        let s = build_dmm_schedule(9, 8, 8).unwrap();
        assert_eq!(s.cycles(), 16);
        for c in 8..16 {
            assert_eq!(s.cycle(c).iter().filter(|p| p.is_idle()).count(), 7);
        }
    }

    #[test]
    fn stalling_adds_nothing() {
        let cfg = ArchConfig::new(8, 4, 1, 16, 0).unwrap();
        for rows in [1, 8, 13, 40] {
            let s = build_dmm_schedule(rows, 16, 8).unwrap();
            let stalled = stall_collisions(&s, &cfg);
            assert_eq!(stalled, s);
            let stats = schedule_stats(&stalled);
            assert_eq!(stats.total.stall_idle, 0);
            if rows % 8 == 0 {
                assert_eq!(stats.total.pad_idle, 0);
            }
        }
    }
}

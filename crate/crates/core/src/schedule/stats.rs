use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::schedule::TileSchedule;

/// How the slots of one PE column (or a whole schedule) are spent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub valid: usize,
    pub empty_row: usize,
    /// Idle slots before the PE's last real packet: collision stalls.
    pub stall_idle: usize,
    /// Idle slots after it: waiting for the slowest PE.
    pub pad_idle: usize,
}

impl SlotCounts {
    pub fn total(&self) -> usize {
        self.valid + self.empty_row + self.stall_idle + self.pad_idle
    }
}

impl AddAssign for SlotCounts {
    fn add_assign(&mut self, o: SlotCounts) {
        self.valid += o.valid;
        self.empty_row += o.empty_row;
        self.stall_idle += o.stall_idle;
        self.pad_idle += o.pad_idle;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleStats {
    pub cycles: usize,
    pub per_pe: Vec<SlotCounts>,
    pub total: SlotCounts,
}

/// Classifies every slot. Stalls only ever precede a PE's remaining work and
/// padding only follows it, so position alone separates the two.
pub fn schedule_stats(schedule: &TileSchedule) -> ScheduleStats {
    let per_pe: Vec<SlotCounts> = (0..schedule.pes())
        .map(|pe| {
            let col: Vec<_> = schedule.column(pe).collect();
            let busy_until = col.iter().rposition(|p| !p.is_idle()).map_or(0, |i| i + 1);
            let mut c = SlotCounts { pad_idle: col.len() - busy_until, ..Default::default() };
            for p in &col[..busy_until] {
                if p.vld {
                    c.valid += 1;
                } else if p.is_idle() {
                    c.stall_idle += 1;
                } else {
                    c.empty_row += 1;
                }
            }
            c
        })
        .collect();
    let mut total = SlotCounts::default();
    for c in &per_pe {
        total += *c;
    }
    ScheduleStats { cycles: schedule.cycles(), per_pe, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcoo::PcooPacket;

    #[test]
    fn balanced_schedule_has_no_idle() {
        let p = PcooPacket::element(0, 0, true, true);
        let s = TileSchedule::from_columns(&[vec![p, PcooPacket::EMPTY_ROW], vec![p, p]]);
        let st = schedule_stats(&s);
        assert_eq!(st.total, SlotCounts { valid: 3, empty_row: 1, stall_idle: 0, pad_idle: 0 });
    }

    #[test]
    fn identity_holds() {
        let p = PcooPacket::element(0, 0, true, true);
        let i = PcooPacket::IDLE;
        let s = TileSchedule::from_columns(&[vec![i, p, i, p], vec![p], vec![]]);
        let st = schedule_stats(&s);
        assert_eq!(st.per_pe[0], SlotCounts { valid: 2, empty_row: 0, stall_idle: 2, pad_idle: 0 });
        assert_eq!(st.per_pe[1].pad_idle, 3);
        assert_eq!(st.per_pe[2].pad_idle, 4);
        assert_eq!(st.total.total(), st.cycles * 3);
    }
}

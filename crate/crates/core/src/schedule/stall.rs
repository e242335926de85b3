use crate::pcoo::PcooPacket;
use crate::schedule::{ArchConfig, TileSchedule};

/// Inserts idle packets so that no replica group ever needs two different
/// rows from one bank in the same cycle.
///
/// Groups are scheduled independently. In every output cycle the PEs of a
/// group are visited round-robin, starting one position later each cycle. A
/// valid packet is issued when its row is already granted this cycle (the
/// priority decoder shares the read) or when its bank is still free;
/// otherwise the PE receives an idle packet and retries next cycle. Empty-row
/// packets never touch the dense memory and always issue. Per-PE order is
/// unchanged, and trailing padding of the input is dropped and re-applied.
pub fn stall_collisions(schedule: &TileSchedule, cfg: &ArchConfig) -> TileSchedule {
    let pes = schedule.pes();
    let group = cfg.group_size().min(pes).max(1);
    let banks = cfg.row_groups();

    let mut queues: Vec<Vec<PcooPacket>> = schedule.columns();
    for q in &mut queues {
        while q.last().is_some_and(PcooPacket::is_idle) {
            q.pop();
        }
    }

    let mut out: Vec<Vec<PcooPacket>> = vec![Vec::new(); pes];
    // Per-bank grant stamped with the cycle it was made in, so nothing needs
    // clearing between cycles.
    let mut granted_cycle = vec![usize::MAX; banks];
    let mut granted_row = vec![0u32; banks];

    for g0 in (0..pes).step_by(group) {
        let members = g0..(g0 + group).min(pes);
        let size = members.len();
        let mut head = vec![0usize; size];
        let mut remaining: usize = members.clone().map(|p| queues[p].len()).sum();
        let mut cycle = 0usize;
        while remaining > 0 {
            for step in 0..size {
                let local = (cycle + step) % size;
                let pe = g0 + local;
                let Some(&pkt) = queues[pe].get(head[local]) else {
                    out[pe].push(PcooPacket::IDLE);
                    continue;
                };
                let issue = if pkt.vld {
                    let bank = pkt.col as usize % banks;
                    if granted_cycle[bank] != cycle {
                        granted_cycle[bank] = cycle;
                        granted_row[bank] = pkt.col;
                        true
                    } else {
                        granted_row[bank] == pkt.col
                    }
                } else {
                    true
                };
                if issue {
                    out[pe].push(pkt);
                    head[local] += 1;
                    remaining -= 1;
                } else {
                    out[pe].push(PcooPacket::IDLE);
                }
            }
            cycle += 1;
        }
        granted_cycle.iter_mut().for_each(|c| *c = usize::MAX);
    }
    TileSchedule::from_columns(&out)
}

use std::collections::HashMap;

use super::{HazardKind, OpRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mitigation {
    /// Consumer becomes VecMulAcc and accumulates in the engine register.
    Accumulate,
    /// Result is forwarded to the engine input, bypassing the scratchpad.
    Forward,
    None,
}

/// Mitigation for a same-queue read `gap` cycles after a write to the same
/// address, under the 2-cycle write-to-read latency.
pub fn resolve_same_queue_hazard(gap: u64) -> Result<Mitigation> {
    mitigation_for(gap, 2)
}

pub(crate) fn mitigation_for(gap: u64, latency: u64) -> Result<Mitigation> {
    match gap {
        0 => Err(Error::Config(
            "same-queue gap of 0 cycles cannot occur: a queue issues one op per cycle".into(),
        )),
        1 => Ok(Mitigation::Accumulate),
        g if g <= latency => Ok(Mitigation::Forward),
        _ => Ok(Mitigation::None),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HazardViolation {
    pub cycle: u64,
    pub vpe: usize,
    pub ps_unit: u64,
    pub writer_cycle: u64,
    pub writer_vpe: usize,
    pub reason: &'static str,
}

/// Replays an op log against the write-to-read latency model. Every op reads
/// and writes its PS unit; a read within `latency` cycles of a write by
/// another engine is a violation, and a close read by the same engine must
/// carry the matching Accum or Forward mitigation.
pub fn audit_hazards(ops: &[OpRecord], latency: u64) -> Vec<HazardViolation> {
    let mut order: Vec<usize> = (0..ops.len()).collect();
    order.sort_by_key(|&i| (ops[i].cycle, ops[i].vpe));
    let mut last_write: HashMap<u64, (u64, usize)> = HashMap::new();
    let mut out = Vec::new();
    for i in order {
        let op = &ops[i];
        if let Some(&(wc, wv)) = last_write.get(&op.ps_unit) {
            let gap = op.cycle.saturating_sub(wc);
            let mut flag = |reason| {
                out.push(HazardViolation {
                    cycle: op.cycle,
                    vpe: op.vpe,
                    ps_unit: op.ps_unit,
                    writer_cycle: wc,
                    writer_vpe: wv,
                    reason,
                })
            };
            if gap <= latency {
                if wv != op.vpe {
                    flag("read after another engine's write inside the latency window");
                } else {
                    let want = match mitigation_for(gap, latency) {
                        Ok(Mitigation::Accumulate) => Some(HazardKind::SameQueue1CycleAccum),
                        Ok(Mitigation::Forward) => Some(HazardKind::SameQueue2CycleForward),
                        _ => None,
                    };
                    if want.is_none() || op.hazard != want {
                        flag("close same-engine read without matching mitigation");
                    }
                }
            }
        }
        last_write.insert(op.ps_unit, (op.cycle, op.vpe));
    }
    out
}

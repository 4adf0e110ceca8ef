/// Outcome of offering one item to the arbiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Place into `vpe`. `routed` is set when a hazard forced the choice.
    Place { vpe: usize, routed: bool },
    /// The owning queue is full; issue stops until it drains.
    Stall { vpe: usize },
    /// Every queue is full.
    Full,
}

/// Queue selection. Items whose PS row is owned by an engine go to that
/// engine; the rest go to the shortest queue, ties broken round-robin.
#[derive(Debug, Clone)]
pub struct Arbiter {
    depth: usize,
    next: usize,
}

impl Arbiter {
    pub fn new(depth: usize) -> Self {
        Arbiter { depth, next: 0 }
    }

    /// Fixed row-to-engine mapping used by the row- and column-compressed
    /// baselines: row `r` always goes to engine `r mod n`.
    pub fn arbitrate_static(&self, queue_lens: &[usize], row: usize) -> Assignment {
        let v = row % queue_lens.len();
        if queue_lens[v] < self.depth {
            Assignment::Place { vpe: v, routed: false }
        } else {
            Assignment::Stall { vpe: v }
        }
    }

    pub fn arbitrate(&mut self, queue_lens: &[usize], owner: Option<usize>) -> Assignment {
        if let Some(v) = owner {
            return if queue_lens[v] < self.depth {
                Assignment::Place { vpe: v, routed: true }
            } else {
                Assignment::Stall { vpe: v }
            };
        }
        let n = queue_lens.len();
        let mut best: Option<usize> = None;
        for k in 0..n {
            let v = (self.next + k) % n;
            if queue_lens[v] < self.depth && best.is_none_or(|b| queue_lens[v] < queue_lens[b]) {
                best = Some(v);
            }
        }
        match best {
            Some(v) => {
                self.next = (v + 1) % n;
                Assignment::Place { vpe: v, routed: false }
            }
            None => Assignment::Full,
        }
    }
}

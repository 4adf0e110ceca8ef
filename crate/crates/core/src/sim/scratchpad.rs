use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionKind {
    /// Adjacency values.
    A,
    /// Z rows.
    B,
    /// Partial sums.
    C,
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    stamp: u64,
    ready_at: u64,
    dirty: bool,
    pins: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insert {
    Inserted { evicted: Option<(u64, bool)> },
    /// Every resident unit is pinned or still arriving.
    NoVictim,
}

/// LRU set of fixed-size row segments held by one scratchpad partition.
#[derive(Debug, Clone)]
pub struct Residency {
    cap: usize,
    units: HashMap<u64, Unit>,
    lru: BTreeMap<u64, u64>,
    clock: u64,
}

impl Residency {
    pub fn new(cap: usize) -> Self {
        Residency {
            cap,
            units: HashMap::new(),
            lru: BTreeMap::new(),
            clock: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn ready_at(&self, key: u64) -> Option<u64> {
        self.units.get(&key).map(|u| u.ready_at)
    }

    pub fn touch(&mut self, key: u64) -> bool {
        self.clock += 1;
        let clock = self.clock;
        match self.units.get_mut(&key) {
            Some(u) => {
                self.lru.remove(&u.stamp);
                u.stamp = clock;
                self.lru.insert(clock, key);
                true
            }
            None => false,
        }
    }

    pub fn mark_dirty(&mut self, key: u64) {
        if let Some(u) = self.units.get_mut(&key) {
            u.dirty = true;
        }
    }

    pub fn pin(&mut self, key: u64) {
        if let Some(u) = self.units.get_mut(&key) {
            u.pins += 1;
        }
    }

    pub fn unpin(&mut self, key: u64) {
        if let Some(u) = self.units.get_mut(&key) {
            u.pins = u.pins.saturating_sub(1);
        }
    }

    /// Loads `key`, evicting the least recently used unit that is neither
    /// pinned nor in flight. With `prefer`, the oldest unit satisfying it is
    /// chosen first.
    pub fn insert(
        &mut self,
        key: u64,
        ready_at: u64,
        now: u64,
        prefer: Option<&dyn Fn(u64) -> bool>,
    ) -> Insert {
        debug_assert!(!self.units.contains_key(&key));
        let mut evicted = None;
        if self.units.len() >= self.cap {
            let free = |k: &u64| {
                let u = &self.units[k];
                u.pins == 0 && u.ready_at <= now
            };
            let mut victim = None;
            if let Some(p) = prefer {
                victim = self.lru.values().copied().find(|k| free(k) && p(*k));
            }
            if victim.is_none() {
                victim = self.lru.values().copied().find(free);
            }
            let Some(v) = victim else {
                return Insert::NoVictim;
            };
            let u = self.units.remove(&v).expect("lru and map agree");
            self.lru.remove(&u.stamp);
            evicted = Some((v, u.dirty));
        }
        self.clock += 1;
        self.units.insert(
            key,
            Unit {
                stamp: self.clock,
                ready_at,
                dirty: false,
                pins: 0,
            },
        );
        self.lru.insert(self.clock, key);
        Insert::Inserted { evicted }
    }

    pub fn dirty_keys(&self) -> Vec<u64> {
        let mut k: Vec<u64> = self
            .units
            .iter()
            .filter(|(_, u)| u.dirty)
            .map(|(&k, _)| k)
            .collect();
        k.sort_unstable();
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankRequest {
    pub part: PartitionKind,
    pub addr: u64,
    pub write: bool,
}

const AB_READ_PORTS: usize = 4;
const C_READ_PORTS: u8 = 2;
const C_WRITE_PORTS: u8 = 2;

/// Per-cycle port accounting. A and B banks have four read ports and serve
/// identical addresses with one port (broadcast); C banks have two read and
/// two write ports. Addresses interleave across banks.
#[derive(Debug, Clone)]
pub struct BankModel {
    a: Vec<Vec<u64>>,
    b: Vec<Vec<u64>>,
    c_reads: Vec<u8>,
    c_writes: Vec<u8>,
}

impl BankModel {
    pub fn new(ab_banks: usize, c_banks: usize) -> Self {
        BankModel {
            a: vec![Vec::with_capacity(AB_READ_PORTS); ab_banks.max(1)],
            b: vec![Vec::with_capacity(AB_READ_PORTS); ab_banks.max(1)],
            c_reads: vec![0; c_banks.max(1)],
            c_writes: vec![0; c_banks.max(1)],
        }
    }

    pub fn begin_cycle(&mut self) {
        self.a.iter_mut().for_each(Vec::clear);
        self.b.iter_mut().for_each(Vec::clear);
        self.c_reads.fill(0);
        self.c_writes.fill(0);
    }

    /// Grants all of `reqs` or none of them.
    pub fn try_issue(&mut self, reqs: &[BankRequest]) -> bool {
        let snapshot = self.clone_touched(reqs);
        for r in reqs {
            if !self.take(r) {
                self.restore(snapshot);
                return false;
            }
        }
        true
    }

    fn take(&mut self, r: &BankRequest) -> bool {
        match r.part {
            PartitionKind::A | PartitionKind::B => {
                let banks = if r.part == PartitionKind::A {
                    &mut self.a
                } else {
                    &mut self.b
                };
                let n = banks.len() as u64;
                let bank = &mut banks[(r.addr % n) as usize];
                if bank.contains(&r.addr) {
                    true
                } else if bank.len() < AB_READ_PORTS {
                    bank.push(r.addr);
                    true
                } else {
                    false
                }
            }
            PartitionKind::C => {
                let n = self.c_reads.len() as u64;
                let b = (r.addr % n) as usize;
                let (slot, cap) = if r.write {
                    (&mut self.c_writes[b], C_WRITE_PORTS)
                } else {
                    (&mut self.c_reads[b], C_READ_PORTS)
                };
                if *slot < cap {
                    *slot += 1;
                    true
                } else {
                    false
                }
            }
        }
    }

    fn clone_touched(&self, reqs: &[BankRequest]) -> Vec<(BankRequest, usize, u8)> {
        reqs.iter()
            .map(|r| match r.part {
                PartitionKind::A => (*r, self.a[(r.addr % self.a.len() as u64) as usize].len(), 0),
                PartitionKind::B => (*r, self.b[(r.addr % self.b.len() as u64) as usize].len(), 0),
                PartitionKind::C => {
                    let b = (r.addr % self.c_reads.len() as u64) as usize;
                    let v = if r.write { self.c_writes[b] } else { self.c_reads[b] };
                    (*r, 0, v)
                }
            })
            .collect()
    }

    fn restore(&mut self, snap: Vec<(BankRequest, usize, u8)>) {
        for (r, len, count) in snap.into_iter().rev() {
            match r.part {
                PartitionKind::A => {
                    let n = self.a.len() as u64;
                    self.a[(r.addr % n) as usize].truncate(len)
                }
                PartitionKind::B => {
                    let n = self.b.len() as u64;
                    self.b[(r.addr % n) as usize].truncate(len)
                }
                PartitionKind::C => {
                    let b = (r.addr % self.c_reads.len() as u64) as usize;
                    if r.write {
                        self.c_writes[b] = count;
                    } else {
                        self.c_reads[b] = count;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AccessOutcome {
    pub hits: u64,
    pub misses: u64,
    pub bank_conflicts: u64,
    /// Units evicted to make room, with their dirty flag.
    pub evicted: Vec<(u64, bool)>,
}

/// One cycle of reads from a partition by independent requesters: resident
/// units hit, absent ones are loaded (LRU eviction), and requests beyond the
/// bank ports conflict.
pub fn scratchpad_access(
    res: &mut Residency,
    banks: &mut BankModel,
    kind: PartitionKind,
    units: &[u64],
    now: u64,
) -> AccessOutcome {
    let mut out = AccessOutcome::default();
    for &u in units {
        if res.touch(u) {
            out.hits += 1;
        } else {
            out.misses += 1;
            if let Insert::Inserted {
                evicted: Some(e), ..
            } = res.insert(u, now, now, None)
            {
                out.evicted.push(e);
            }
        }
        let granted = banks.try_issue(&[BankRequest {
            part: kind,
            addr: u,
            write: false,
        }]);
        out.bank_conflicts += !granted as u64;
    }
    out
}

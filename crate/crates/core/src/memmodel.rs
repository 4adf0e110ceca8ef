//! Trace-driven cache/DRAM model producing a mean access time (MAT).

use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub cycle: u64,
    pub addr: u64,
    pub kind: AccessKind,
    pub size: u32,
}

/// Accesses that left the scratchpad, in issue order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemTrace {
    records: Vec<TraceRecord>,
}

impl MemTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record. Cycles must not go backwards.
    pub fn push(&mut self, rec: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if rec.cycle < last.cycle {
                return Err(Error::Malformed(format!(
                    "trace cycle {} precedes {}",
                    rec.cycle, last.cycle
                )));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.records.iter().map(|r| r.size as u64).sum()
    }

    /// One `cycle,0xaddr,R|W,size` line per record.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 24);
        for r in &self.records {
            let k = match r.kind {
                AccessKind::Read => 'R',
                AccessKind::Write => 'W',
            };
            let _ = writeln!(s, "{},{:#x},{},{}", r.cycle, r.addr, k, r.size);
        }
        s
    }

    pub fn from_csv(reader: impl BufRead) -> Result<Self> {
        let mut t = MemTrace::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(err("expected 4 fields"));
            }
            let cycle = f[0].parse().map_err(|_| err("bad cycle"))?;
            let hex = f[1]
                .strip_prefix("0x")
                .ok_or_else(|| err("address must start with 0x"))?;
            let addr = u64::from_str_radix(hex, 16).map_err(|_| err("bad address"))?;
            let kind = match f[2] {
                "R" => AccessKind::Read,
                "W" => AccessKind::Write,
                _ => return Err(err("kind must be R or W")),
            };
            let size = f[3].parse().map_err(|_| err("bad size"))?;
            t.push(TraceRecord {
                cycle,
                addr,
                kind,
                size,
            })
            .map_err(|e| err(&e.to_string()))?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CacheConfig {
    pub capacity: u64,
    pub line_size: u64,
    pub associativity: u64,
    pub hit_latency: u64,
    pub dram_latency: u64,
    pub dram_capacity: u64,
    /// Shared DRAM bandwidth; only reported, as the DRAM floor of
    /// multi-processor runs.
    pub dram_bytes_per_cycle: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            capacity: 2 << 20,
            line_size: 64,
            associativity: 8,
            hit_latency: 10,
            dram_latency: 100,
            dram_capacity: 4 << 30,
            dram_bytes_per_cycle: 64,
        }
    }
}

impl CacheConfig {
    pub fn fully_associative(capacity: u64, line_size: u64) -> Self {
        CacheConfig {
            capacity,
            line_size,
            associativity: capacity / line_size.max(1),
            ..Self::default()
        }
    }

    pub fn n_sets(&self) -> u64 {
        self.capacity / (self.line_size * self.associativity)
    }

    pub fn validate(&self) -> Result<()> {
        if self.line_size == 0 || self.associativity == 0 || self.capacity == 0 {
            return Err(Error::Config("cache sizes must be positive".into()));
        }
        if !self.capacity.is_multiple_of(self.line_size * self.associativity) {
            return Err(Error::Config(format!(
                "capacity {} not divisible by line_size*associativity {}",
                self.capacity,
                self.line_size * self.associativity
            )));
        }
        if self.hit_latency == 0 || self.dram_latency < self.hit_latency {
            return Err(Error::Config(
                "need 0 < hit_latency <= dram_latency".into(),
            ));
        }
        if self.dram_bytes_per_cycle == 0 {
            return Err(Error::Config("dram_bytes_per_cycle must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplayStats {
    /// Records whose lines were all present.
    pub hits: u64,
    pub misses: u64,
    pub mat: f64,
    /// Line fills plus dirty write-backs.
    pub dram_requests: u64,
    pub dram_bytes: u64,
    pub writebacks: u64,
}

#[derive(Clone, Copy)]
struct Way {
    tag: u64,
    dirty: bool,
    last_use: u64,
}

/// Set-associative LRU, write-allocate, write-back.
pub struct Cache {
    cfg: CacheConfig,
    sets: Vec<Vec<Way>>,
    clock: u64,
    pub fills: u64,
    pub writebacks: u64,
}

impl Cache {
    pub fn new(cfg: CacheConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Cache {
            sets: vec![Vec::with_capacity(cfg.associativity as usize); cfg.n_sets() as usize],
            cfg,
            clock: 0,
            fills: 0,
            writebacks: 0,
        })
    }

    /// Touches one line; returns whether it hit.
    pub fn access_line(&mut self, line: u64, write: bool) -> bool {
        self.clock += 1;
        let n_sets = self.sets.len() as u64;
        let set = &mut self.sets[(line % n_sets) as usize];
        let tag = line / n_sets;
        if let Some(w) = set.iter_mut().find(|w| w.tag == tag) {
            w.last_use = self.clock;
            w.dirty |= write;
            return true;
        }
        self.fills += 1;
        let way = Way {
            tag,
            dirty: write,
            last_use: self.clock,
        };
        if (set.len() as u64) < self.cfg.associativity {
            set.push(way);
        } else {
            let victim = set
                .iter_mut()
                .min_by_key(|w| w.last_use)
                .expect("associativity > 0");
            if victim.dirty {
                self.writebacks += 1;
            }
            *victim = way;
        }
        false
    }

    /// Touches every line of a record; hit iff all of them hit.
    pub fn access(&mut self, rec: &TraceRecord) -> bool {
        let ls = self.cfg.line_size;
        let first = rec.addr / ls;
        let last = (rec.addr + (rec.size.max(1) as u64) - 1) / ls;
        let write = rec.kind == AccessKind::Write;
        let mut all = true;
        for line in first..=last {
            all &= self.access_line(line, write);
        }
        all
    }
}

pub fn replay(trace: &MemTrace, cfg: &CacheConfig) -> Result<ReplayStats> {
    let mut cache = Cache::new(*cfg)?;
    let mut hits = 0u64;
    for r in trace.records() {
        hits += cache.access(r) as u64;
    }
    let misses = trace.len() as u64 - hits;
    let mat = if trace.is_empty() {
        cfg.hit_latency as f64
    } else {
        (hits * cfg.hit_latency + misses * cfg.dram_latency) as f64 / trace.len() as f64
    };
    let dram_requests = cache.fills + cache.writebacks;
    Ok(ReplayStats {
        hits,
        misses,
        mat,
        dram_requests,
        dram_bytes: dram_requests * cfg.line_size,
        writebacks: cache.writebacks,
    })
}

/// Matrix whose rows an address belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Adj,
    Z,
    Ps,
    /// Conflict copies of PS written by a later processor.
    Buffer,
}

const REGION_BITS: u32 = 40;

/// Row-major byte layout of each role in its own 2^40-byte region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMap {
    pub feature_dim: usize,
    /// Columns per segment (the vector-op width).
    pub seg_width: usize,
    pub value_bytes: usize,
}

impl AddressMap {
    pub fn base(role: Role) -> u64 {
        let idx = match role {
            Role::Adj => 0u64,
            Role::Z => 1,
            Role::Ps => 2,
            Role::Buffer => 3,
        };
        idx << REGION_BITS
    }

    pub fn addr(&self, role: Role, row: usize, seg: usize) -> Result<u64> {
        let off = (row as u128 * self.feature_dim as u128 + (seg * self.seg_width) as u128)
            * self.value_bytes as u128;
        if off >= 1u128 << REGION_BITS {
            return Err(Error::AddressOverflow(format!(
                "{role:?} row {row} segment {seg} lies outside its region"
            )));
        }
        Ok(Self::base(role) + off as u64)
    }

    /// Byte offset into the adjacency region.
    pub fn adj(&self, offset: u64) -> Result<u64> {
        if offset >= 1u64 << REGION_BITS {
            return Err(Error::AddressOverflow(format!(
                "adjacency offset {offset} lies outside its region"
            )));
        }
        Ok(Self::base(Role::Adj) + offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(cycle: u64, addr: u64, size: u32) -> TraceRecord {
        TraceRecord {
            cycle,
            addr,
            kind: AccessKind::Read,
            size,
        }
    }

    #[test]
    fn repeated_address() {
        let mut t = MemTrace::new();
        for c in 0..100 {
            t.push(read(c, 0x1000, 8)).unwrap();
        }
        let s = replay(&t, &CacheConfig::default()).unwrap();
        assert_eq!((s.hits, s.misses), (99, 1));
        assert_eq!(s.mat, (99.0 * 10.0 + 100.0) / 100.0);
    }

    #[test]
    fn streaming_twice_capacity_thrashes() {
        let cfg = CacheConfig {
            capacity: 4096,
            ..CacheConfig::default()
        };
        let lines = 2 * cfg.capacity / cfg.line_size;
        let mut t = MemTrace::new();
        for pass in 0..2 {
            for l in 0..lines {
                t.push(read(pass * lines + l, l * 64, 64)).unwrap();
            }
        }
        let s = replay(&t, &cfg).unwrap();
        assert_eq!(s.hits, 0);
        assert_eq!(s.misses, 2 * lines);
    }

    #[test]
    fn empty_trace_mat() {
        let s = replay(&MemTrace::new(), &CacheConfig::default()).unwrap();
        assert_eq!(s.mat, 10.0);
        assert_eq!(s.hits + s.misses, 0);
    }

    #[test]
    fn dirty_lines_write_back() {
        let cfg = CacheConfig::fully_associative(128, 64);
        let mut t = MemTrace::new();
        for (c, a) in [0u64, 64, 128].into_iter().enumerate() {
            t.push(TraceRecord {
                cycle: c as u64,
                addr: a,
                kind: AccessKind::Write,
                size: 64,
            })
            .unwrap();
        }
        let s = replay(&t, &cfg).unwrap();
        assert_eq!(s.writebacks, 1);
        assert_eq!(s.dram_requests, 4);
    }

    #[test]
    fn multi_line_record_needs_every_line() {
        let mut t = MemTrace::new();
        t.push(read(0, 0, 64)).unwrap();
        t.push(read(1, 0, 128)).unwrap();
        t.push(read(2, 0, 128)).unwrap();
        let s = replay(&t, &CacheConfig::default()).unwrap();
        assert_eq!((s.hits, s.misses), (1, 2));
    }

    #[test]
    fn csv_round_trip_and_golden() {
        let mut t = MemTrace::new();
        t.push(read(3, 0x100_0000_0000, 512)).unwrap();
        t.push(TraceRecord {
            cycle: 7,
            addr: 0x40,
            kind: AccessKind::Write,
            size: 64,
        })
        .unwrap();
        let csv = t.to_csv();
        assert_eq!(csv, "3,0x10000000000,R,512\n7,0x40,W,64\n");
        assert_eq!(MemTrace::from_csv(csv.as_bytes()).unwrap(), t);
        assert!(MemTrace::from_csv("1,40,R,8\n".as_bytes()).is_err());
        assert!(matches!(
            MemTrace::from_csv("5,0x0,R,8\n4,0x0,R,8\n".as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn address_map_layout() {
        let m = AddressMap {
            feature_dim: 128,
            seg_width: 64,
            value_bytes: 8,
        };
        let zb = AddressMap::base(Role::Z);
        assert_eq!(m.addr(Role::Z, 0, 0).unwrap(), zb);
        assert_eq!(m.addr(Role::Z, 1, 0).unwrap(), zb + 128 * 8);
        assert_eq!(
            m.addr(Role::Ps, 5, 1).unwrap(),
            AddressMap::base(Role::Ps) + (5 * 128 + 64) * 8
        );
        assert!(m.addr(Role::Z, 1 << 40, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(CacheConfig::default().validate().is_ok());
        let bad = CacheConfig {
            capacity: 1000,
            ..CacheConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}

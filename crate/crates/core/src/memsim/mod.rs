//! Simulated gmem/smem/rmem hierarchy.
//!
//! Every byte moved by a traced run is recorded twice: as a [`TrafficEvent`]
//! in the log and in the per-(region, tensor class) counters. Tile copies
//! into shared memory are additionally recorded as [`CopyEvent`]s.

mod bank;
mod report;
mod runs;
mod schedule;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bank::{bank_conflicts, phase_conflict_degree, Sweep, BANK_COUNT, BANK_WIDTH_BYTES};
pub use report::{write_csv, ReportRow, RunReport};
pub use runs::{run_fmha_traced, run_standard_traced, smem_footprint};
pub use schedule::{trace_overlap, CostModel, EventKind, ScheduleEvent, ScheduleTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Gmem,
    Smem,
    Rmem,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Gmem, Region::Smem, Region::Rmem];

    pub fn name(self) -> &'static str {
        match self {
            Region::Gmem => "gmem",
            Region::Smem => "smem",
            Region::Rmem => "rmem",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TensorClass {
    Q,
    K,
    V,
    S,
    P,
    /// Output as stored in global memory.
    O,
    /// Output accumulator held in registers.
    OAcc,
}

/// Bytes per element for each tensor class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElemBytes {
    pub q: usize,
    pub k: usize,
    pub v: usize,
    pub s: usize,
    pub p: usize,
    pub o: usize,
    pub o_acc: usize,
}

impl Default for ElemBytes {
    /// Half-precision operands and output, single-precision accumulators.
    fn default() -> Self {
        ElemBytes {
            q: 2,
            k: 2,
            v: 2,
            s: 4,
            p: 4,
            o: 2,
            o_acc: 4,
        }
    }
}

impl ElemBytes {
    pub fn of(&self, class: TensorClass) -> usize {
        match class {
            TensorClass::Q => self.q,
            TensorClass::K => self.k,
            TensorClass::V => self.v,
            TensorClass::S => self.s,
            TensorClass::P => self.p,
            TensorClass::O => self.o,
            TensorClass::OAcc => self.o_acc,
        }
    }
}

/// Simulator settings; `smem_capacity_bytes` is unlimited when absent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub preset: Option<String>,
    pub smem_capacity_bytes: Option<usize>,
    pub elem_bytes: ElemBytes,
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, MemError> {
        toml::from_str(s).map_err(|e| MemError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MemError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MemError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemError {
    #[error("smem allocation '{name}' of {requested} bytes exceeds capacity ({in_use} of {capacity} in use)")]
    Capacity {
        name: String,
        requested: usize,
        in_use: usize,
        capacity: usize,
    },
    #[error("simulator config: {0}")]
    Config(String),
    #[error(transparent)]
    Attention(#[from] crate::attention::AttentionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counter {
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub transactions: u64,
}

impl Counter {
    pub fn total(&self) -> u64 {
        self.bytes_read + self.bytes_written
    }

    fn add(&mut self, other: &Counter) {
        self.bytes_read += other.bytes_read;
        self.bytes_written += other.bytes_written;
        self.transactions += other.transactions;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Read,
    Write,
}

/// `(q_tile, k_tile)` a transfer belongs to, where applicable.
pub type TileId = (usize, Option<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrafficEvent {
    pub region: Region,
    pub class: TensorClass,
    pub access: Access,
    pub bytes: u64,
    pub head: (usize, usize),
    pub tile: Option<TileId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CopyEvent {
    pub src: Region,
    pub dst: Region,
    pub class: TensorClass,
    pub bytes: u64,
    pub tile: TileId,
    pub issue_step: u64,
    pub complete_step: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Allocation {
    pub name: String,
    pub bytes: usize,
}

/// One simulator instance; owns its counters for the duration of a run.
#[derive(Debug, Clone)]
pub struct MemSim {
    config: SimConfig,
    counters: BTreeMap<(Region, TensorClass), Counter>,
    events: Vec<TrafficEvent>,
    copies: Vec<CopyEvent>,
    allocations: Vec<Allocation>,
    smem_in_use: usize,
    smem_peak: usize,
    step: u64,
    head: (usize, usize),
}

impl MemSim {
    pub fn new(config: SimConfig) -> Self {
        MemSim {
            config,
            counters: BTreeMap::new(),
            events: Vec::new(),
            copies: Vec::new(),
            allocations: Vec::new(),
            smem_in_use: 0,
            smem_peak: 0,
            step: 0,
            head: (0, 0),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn elem(&self, class: TensorClass) -> usize {
        self.config.elem_bytes.of(class)
    }

    /// Attribute subsequent traffic to `(batch, head)`.
    pub fn set_head(&mut self, head: (usize, usize)) {
        self.head = head;
    }

    fn record(
        &mut self,
        region: Region,
        class: TensorClass,
        access: Access,
        elems: usize,
        tile: Option<TileId>,
    ) -> u64 {
        let bytes = (elems * self.elem(class)) as u64;
        let c = self.counters.entry((region, class)).or_default();
        match access {
            Access::Read => c.bytes_read += bytes,
            Access::Write => c.bytes_written += bytes,
        }
        c.transactions += 1;
        self.events.push(TrafficEvent {
            region,
            class,
            access,
            bytes,
            head: self.head,
            tile,
        });
        bytes
    }

    pub fn read(&mut self, region: Region, class: TensorClass, elems: usize, tile: Option<TileId>) {
        self.record(region, class, Access::Read, elems, tile);
    }

    pub fn write(
        &mut self,
        region: Region,
        class: TensorClass,
        elems: usize,
        tile: Option<TileId>,
    ) {
        self.record(region, class, Access::Write, elems, tile);
    }

    /// Tile transfer: a read at `src`, a write at `dst` and a copy event.
    pub fn copy(
        &mut self,
        src: Region,
        dst: Region,
        class: TensorClass,
        elems: usize,
        tile: TileId,
    ) {
        let bytes = self.record(src, class, Access::Read, elems, Some(tile));
        self.record(dst, class, Access::Write, elems, Some(tile));
        let issue = self.step;
        self.step += 1;
        self.copies.push(CopyEvent {
            src,
            dst,
            class,
            bytes,
            tile,
            issue_step: issue,
            complete_step: issue + 1,
        });
    }

    /// Reserve shared memory, failing when the configured capacity is hit.
    pub fn alloc_smem(&mut self, name: &str, bytes: usize) -> Result<(), MemError> {
        if let Some(capacity) = self.config.smem_capacity_bytes {
            if self.smem_in_use + bytes > capacity {
                return Err(MemError::Capacity {
                    name: name.to_string(),
                    requested: bytes,
                    in_use: self.smem_in_use,
                    capacity,
                });
            }
        }
        self.smem_in_use += bytes;
        self.smem_peak = self.smem_peak.max(self.smem_in_use);
        self.allocations.push(Allocation {
            name: name.to_string(),
            bytes,
        });
        Ok(())
    }

    pub fn free_all_smem(&mut self) {
        self.smem_in_use = 0;
    }

    pub fn counter(&self, region: Region, class: TensorClass) -> Counter {
        self.counters
            .get(&(region, class))
            .copied()
            .unwrap_or_default()
    }

    pub fn region_total(&self, region: Region) -> Counter {
        let mut total = Counter::default();
        for (_, c) in self
            .counters
            .range((region, TensorClass::Q)..=(region, TensorClass::OAcc))
        {
            total.add(c);
        }
        total
    }

    pub fn events(&self) -> &[TrafficEvent] {
        &self.events
    }

    pub fn copies(&self) -> &[CopyEvent] {
        &self.copies
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocations
    }

    pub fn smem_peak(&self) -> usize {
        self.smem_peak
    }

    /// Freeze the counters into a report.
    pub fn into_report(self, label: String, flops: u64) -> RunReport {
        RunReport {
            label,
            counters: self.counters,
            events: self.events,
            copies: self.copies,
            allocations: self.allocations,
            smem_peak: self.smem_peak,
            flops,
            max_rel_error: None,
            conflict_degree: None,
        }
    }
}

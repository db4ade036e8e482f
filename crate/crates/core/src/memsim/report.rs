use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::{Allocation, CopyEvent, Counter, Region, TensorClass, TrafficEvent};

/// Immutable result of a traced run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub label: String,
    #[serde(skip)]
    pub counters: BTreeMap<(Region, TensorClass), Counter>,
    #[serde(skip)]
    pub events: Vec<TrafficEvent>,
    #[serde(skip)]
    pub copies: Vec<CopyEvent>,
    pub allocations: Vec<Allocation>,
    pub smem_peak: usize,
    pub flops: u64,
    pub max_rel_error: Option<f64>,
    pub conflict_degree: Option<usize>,
}

/// One CSV/JSON line: a run's totals for one memory region.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportRow {
    pub config: String,
    pub region: String,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub transactions: u64,
    pub conflict_degree: Option<usize>,
    pub flops: u64,
    pub max_rel_error: Option<f64>,
}

impl RunReport {
    pub fn counter(&self, region: Region, class: TensorClass) -> Counter {
        self.counters
            .get(&(region, class))
            .copied()
            .unwrap_or_default()
    }

    pub fn region_total(&self, region: Region) -> Counter {
        let mut total = Counter::default();
        for ((r, _), c) in &self.counters {
            if *r == region {
                total.add(c);
            }
        }
        total
    }

    pub fn with_error(mut self, max_rel_error: f64) -> Self {
        self.max_rel_error = Some(max_rel_error);
        self
    }

    pub fn with_conflict_degree(mut self, degree: usize) -> Self {
        self.conflict_degree = Some(degree);
        self
    }

    /// One row per region, gmem first. The conflict degree is reported on
    /// the smem row only.
    pub fn rows(&self) -> Vec<ReportRow> {
        Region::ALL
            .iter()
            .map(|&region| {
                let c = self.region_total(region);
                ReportRow {
                    config: self.label.clone(),
                    region: region.name().to_string(),
                    bytes_read: c.bytes_read,
                    bytes_written: c.bytes_written,
                    transactions: c.transactions,
                    conflict_degree: if region == Region::Smem {
                        self.conflict_degree
                    } else {
                        None
                    },
                    flops: self.flops,
                    max_rel_error: self.max_rel_error,
                }
            })
            .collect()
    }
}

/// CSV with a header line. Empty optional cells stay empty.
pub fn write_csv<W: Write>(rows: &[ReportRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    if rows.is_empty() {
        out.write_record([
            "config",
            "region",
            "bytesRead",
            "bytesWritten",
            "transactions",
            "conflictDegree",
            "flops",
            "maxRelError",
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memsim::{MemSim, SimConfig};

    fn report() -> RunReport {
        let mut sim = MemSim::new(SimConfig::default());
        sim.read(Region::Gmem, TensorClass::Q, 4, None);
        sim.copy(Region::Gmem, Region::Smem, TensorClass::K, 2, (0, Some(0)));
        sim.into_report("demo".into(), 16)
            .with_error(1.5e-7)
            .with_conflict_degree(4)
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&report().rows(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "config,region,bytesRead,bytesWritten,transactions,conflictDegree,flops,maxRelError"
        );
        assert_eq!(lines[1], "demo,gmem,12,0,2,,16,1.5e-7");
        assert_eq!(lines[2], "demo,smem,0,4,1,4,16,1.5e-7");
        assert_eq!(lines[3], "demo,rmem,0,0,0,,16,1.5e-7");
    }

    #[test]
    fn empty_csv_still_has_header() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("config,region"));
    }

    #[test]
    fn json_rows() {
        let json = serde_json::to_value(report().rows()).unwrap();
        assert_eq!(json[0]["bytesRead"], 12);
        assert_eq!(json[1]["conflictDegree"], 4);
        assert!(json[0]["conflictDegree"].is_null());
    }
}

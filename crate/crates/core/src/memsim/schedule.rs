//! Issue/complete timeline of one Q-tile's main loop with the K prefetch.
//!
//! A single issuing thread walks the program. Asynchronous copies are
//! issued at the current step and complete `copy` steps later without
//! moving the thread. Blocking events (the Q copy, both GEMMs, the softmax
//! and the output store) start once their barrier dependencies have
//! completed and advance the thread to their completion step.

use std::fmt;

use crate::attention::TileConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    CopyQ,
    CopyK(usize),
    CopyV(usize),
    GemmI(usize),
    Softmax(usize),
    GemmII(usize),
    CopyO,
}

impl EventKind {
    fn is_async(self) -> bool {
        matches!(self, EventKind::CopyK(_) | EventKind::CopyV(_))
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::CopyQ => write!(f, "COPY-Q"),
            EventKind::CopyK(j) => write!(f, "COPY-K[{j}]"),
            EventKind::CopyV(j) => write!(f, "COPY-V[{j}]"),
            EventKind::GemmI(j) => write!(f, "GEMM-I[{j}]"),
            EventKind::Softmax(j) => write!(f, "SOFTMAX[{j}]"),
            EventKind::GemmII(j) => write!(f, "GEMM-II[{j}]"),
            EventKind::CopyO => write!(f, "COPY-O"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleEvent {
    pub kind: EventKind,
    pub issue: u64,
    pub complete: u64,
    /// Indices of the copies whose barrier this event waits on.
    pub deps: Vec<usize>,
}

/// Step costs of each event class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub copy: u64,
    pub gemm: u64,
    pub softmax: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            copy: 1,
            gemm: 1,
            softmax: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleTrace {
    pub tile: TileConfig,
    pub events: Vec<ScheduleEvent>,
}

struct Builder {
    costs: CostModel,
    now: u64,
    events: Vec<ScheduleEvent>,
}

impl Builder {
    fn push(&mut self, kind: EventKind, deps: Vec<usize>) -> usize {
        let ready = deps
            .iter()
            .map(|&i| self.events[i].complete)
            .max()
            .unwrap_or(0);
        let issue = self.now.max(ready);
        let cost = match kind {
            EventKind::GemmI(_) | EventKind::GemmII(_) => self.costs.gemm,
            EventKind::Softmax(_) => self.costs.softmax,
            _ => self.costs.copy,
        };
        let complete = issue + cost;
        if !kind.is_async() {
            self.now = complete;
        }
        self.events.push(ScheduleEvent {
            kind,
            issue,
            complete,
            deps,
        });
        self.events.len() - 1
    }
}

/// Schedule of one Q-tile over `n_tiles_k` K/V tiles.
///
/// The K tile for iteration `j+1` is issued right after GEMM-I of
/// iteration `j`, which has finished reading the single K buffer. The only
/// dependency edges are barrier waits: GEMM-I on the Q and K copies, GEMM-II
/// on the V copy. Everything else is ordered by the issuing thread.
pub fn trace_overlap(tile: TileConfig, n_tiles_k: usize, costs: CostModel) -> ScheduleTrace {
    assert!(n_tiles_k >= 1, "at least one K/V tile");
    let mut b = Builder {
        costs,
        now: 0,
        events: Vec::new(),
    };
    let q = b.push(EventKind::CopyQ, vec![]);
    let mut k = b.push(EventKind::CopyK(0), vec![]);
    for j in 0..n_tiles_k {
        let v = b.push(EventKind::CopyV(j), vec![]);
        b.push(EventKind::GemmI(j), vec![q, k]);
        if j + 1 < n_tiles_k {
            k = b.push(EventKind::CopyK(j + 1), vec![]);
        }
        b.push(EventKind::Softmax(j), vec![]);
        b.push(EventKind::GemmII(j), vec![v]);
    }
    b.push(EventKind::CopyO, vec![]);
    ScheduleTrace {
        tile,
        events: b.events,
    }
}

impl ScheduleTrace {
    pub fn find(&self, kind: EventKind) -> Option<&ScheduleEvent> {
        self.events.iter().find(|e| e.kind == kind)
    }

    /// Every event issues no earlier than each dependency completes.
    pub fn dependencies_respected(&self) -> bool {
        self.events.iter().enumerate().all(|(i, e)| {
            e.issue <= e.complete
                && e.deps
                    .iter()
                    .all(|&d| d < i && self.events[d].complete <= e.issue)
        })
    }

    /// K tile `j+1` is issued before GEMM-II of iteration `j` completes, for
    /// every `j` that has a successor.
    pub fn prefetch_holds(&self) -> bool {
        let n = self
            .events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::GemmII(_)))
            .count();
        (0..n.saturating_sub(1)).all(|j| {
            match (
                self.find(EventKind::CopyK(j + 1)),
                self.find(EventKind::GemmII(j)),
            ) {
                (Some(k), Some(g)) => k.issue < g.complete,
                _ => false,
            }
        })
    }

    pub fn span(&self) -> u64 {
        self.events.iter().map(|e| e.complete).max().unwrap_or(0)
    }

    /// `event issue complete deps` table followed by a bar per event.
    pub fn to_text(&self) -> String {
        let width = self
            .events
            .iter()
            .map(|e| e.kind.to_string().len())
            .max()
            .unwrap_or(0);
        let mut out = format!(
            "# schedule bM={} bN={} d={}\n{:<width$} {:>5} {:>8}  deps\n",
            self.tile.bm, self.tile.bn, self.tile.bk, "event", "issue", "complete"
        );
        let span = self.span() as usize;
        for e in &self.events {
            let deps: Vec<String> = e
                .deps
                .iter()
                .map(|&d| self.events[d].kind.to_string())
                .collect();
            let mut bar = vec!['.'; span];
            for c in bar
                .iter_mut()
                .take(e.complete as usize)
                .skip(e.issue as usize)
            {
                *c = '#';
            }
            out.push_str(&format!(
                "{:<width$} {:>5} {:>8}  {:<24} |{}|\n",
                e.kind.to_string(),
                e.issue,
                e.complete,
                if deps.is_empty() {
                    "-".to_string()
                } else {
                    deps.join(",")
                },
                bar.into_iter().collect::<String>(),
            ));
        }
        out
    }
}

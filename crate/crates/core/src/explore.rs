//! Exhaustive interleaving check of the coherence protocol on a tiny
//! instance: two caches sharing one block homed at node 0.
//!
//! Every reachable state is expanded by each enabled action: a core issues
//! a Load, Store or Replacement (crit on or off), or the head of any
//! (src, dst, vnet) channel is delivered. Channels are FIFO, so messages on
//! different vnets may overtake each other in any order, which covers every
//! outcome priority arbitration can produce.

use std::collections::{BTreeMap, HashSet, VecDeque};

use crate::coherence::{
    check_swmr, AccessOutcome, CacheController, CacheState, Directory, MemOp, MsgType, OpKind,
    Outgoing, Performed, ProtocolMsg,
};
use crate::memhier::CacheGeometry;
use crate::network::vnet_of;

const N: usize = 2;
const ADDR: u64 = 0;

#[derive(Debug, Clone, Copy)]
pub struct ExploreParams {
    /// Core operations (loads, stores, replacements) per explored path.
    pub depth: usize,
    pub crit_forwards: bool,
}

impl Default for ExploreParams {
    fn default() -> Self {
        ExploreParams {
            depth: 6,
            crit_forwards: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExploreReport {
    pub states: usize,
    pub transitions: usize,
    pub quiescent_checks: usize,
    pub performed_ops: usize,
    pub failures: Vec<String>,
}

impl ExploreReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Op { node: usize, kind: Kind, crit: bool },
    Deliver((usize, usize, u8)),
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Load,
    Store,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct World {
    caches: Vec<CacheController>,
    dir: Directory,
    chans: BTreeMap<(usize, usize, u8), VecDeque<ProtocolMsg>>,
    issued: usize,
    waiting: [bool; N],
    last: u64,
}

impl World {
    fn new(crit_forwards: bool) -> Self {
        let g = CacheGeometry::new(256, 4, 64).expect("valid geometry");
        World {
            caches: (0..N)
                .map(|i| CacheController::new(i, N, g, g, crit_forwards))
                .collect(),
            dir: Directory::new(0, crit_forwards),
            chans: BTreeMap::new(),
            issued: 0,
            waiting: [false; N],
            last: 0,
        }
    }

    fn send(&mut self, out: Vec<Outgoing>) {
        for o in out {
            let m = o.msg;
            let vnet = vnet_of(m.msg_type.class(), m.crit).0;
            self.chans.entry((m.src, m.dst, vnet)).or_default().push_back(m);
        }
    }

    fn perform(&mut self, p: &Performed) -> Result<(), String> {
        if p.read != self.last {
            return Err(format!("read {} but last write was {}", p.read, self.last));
        }
        if let Some(w) = p.written {
            self.last = w;
        }
        Ok(())
    }

    fn quiescent(&self) -> bool {
        self.chans.is_empty() && !self.waiting.iter().any(|&w| w)
    }

    fn check_quiescent(&self) -> Result<(), String> {
        let states: Vec<CacheState> = self.caches.iter().map(|c| c.state_of(ADDR)).collect();
        let report = check_swmr(&states);
        if !report.is_empty() {
            return Err(format!("SWMR: {}", report.join("; ")));
        }
        if self.dir.is_busy(ADDR) {
            return Err("directory still busy with nothing in flight".into());
        }
        let owner = self
            .caches
            .iter()
            .find(|c| matches!(c.state_of(ADDR), CacheState::M | CacheState::O | CacheState::E));
        let value = match owner {
            Some(c) => c.data_of(ADDR).unwrap_or(0),
            None => self.dir.memory_of(ADDR),
        };
        if value != self.last {
            return Err(format!("block value {value} but last write was {}", self.last));
        }
        Ok(())
    }

    fn actions(&self, depth: usize) -> Vec<Action> {
        let mut acts = Vec::new();
        if self.issued < depth {
            for node in 0..N {
                if self.waiting[node] {
                    continue;
                }
                for crit in [false, true] {
                    acts.push(Action::Op { node, kind: Kind::Load, crit });
                    acts.push(Action::Op { node, kind: Kind::Store, crit });
                }
                if self.caches[node].state_of(ADDR).is_stable()
                    && self.caches[node].state_of(ADDR) != CacheState::I
                {
                    acts.push(Action::Op {
                        node,
                        kind: Kind::Replace,
                        crit: false,
                    });
                }
            }
        }
        acts.extend(self.chans.keys().map(|&k| Action::Deliver(k)));
        acts
    }

    fn apply(&mut self, a: Action, performed: &mut usize) -> Result<(), String> {
        match a {
            Action::Op { node, kind, crit } => {
                self.issued += 1;
                let op = match kind {
                    Kind::Replace => {
                        let out = self.caches[node].evict(ADDR)?;
                        self.send(out);
                        return Ok(());
                    }
                    Kind::Load => OpKind::Load,
                    Kind::Store => OpKind::Store(self.issued as u64),
                };
                let (outcome, out) = self.caches[node].access(MemOp {
                    kind: op,
                    addr: ADDR,
                    crit,
                })?;
                self.send(out);
                match outcome {
                    AccessOutcome::Hit { perf, .. } => {
                        *performed += 1;
                        self.perform(&perf)?;
                    }
                    AccessOutcome::Pending => self.waiting[node] = true,
                }
            }
            Action::Deliver(key) => {
                let q = self.chans.get_mut(&key).expect("enabled channel");
                let m = q.pop_front().expect("non-empty channel");
                if q.is_empty() {
                    self.chans.remove(&key);
                }
                match m.msg_type {
                    MsgType::GetS | MsgType::GetX | MsgType::PutX | MsgType::Unblock => {
                        let out = self.dir.handle(&m)?;
                        self.send(out);
                    }
                    _ => {
                        let (out, done) = self.caches[m.dst].handle(&m)?;
                        self.send(out);
                        if let Some(c) = done {
                            if !self.waiting[m.dst] {
                                return Err(format!("node {} completed an op it never issued", m.dst));
                            }
                            self.waiting[m.dst] = false;
                            *performed += 1;
                            self.perform(&c.perf)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Explores every interleaving up to `depth` core operations.
pub fn explore(p: ExploreParams) -> ExploreReport {
    let mut report = ExploreReport::default();
    let root = World::new(p.crit_forwards);
    let mut seen: HashSet<World> = HashSet::new();
    let mut stack = vec![root.clone()];
    seen.insert(root);

    while let Some(w) = stack.pop() {
        report.states += 1;
        if w.quiescent() {
            report.quiescent_checks += 1;
            if let Err(e) = w.check_quiescent() {
                report.failures.push(format!("{e} in {w:?}"));
                continue;
            }
        }
        let acts = w.actions(p.depth);
        if acts.is_empty() && !w.quiescent() {
            report.failures.push(format!("stuck with no enabled action: {w:?}"));
            continue;
        }
        for a in acts {
            let mut next = w.clone();
            report.transitions += 1;
            if let Err(e) = next.apply(a, &mut report.performed_ops) {
                report.failures.push(format!("{a:?}: {e}"));
                continue;
            }
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
        if report.failures.len() > 10 {
            break;
        }
    }
    report
}

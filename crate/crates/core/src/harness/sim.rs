//! The cycle loop tying cores, cache and directory controllers and the
//! network together.
//!
//! Per cycle: sample link contention, step the cores, let controllers consume
//! the messages delivered last cycle, then inject due messages and advance
//! the network. Cycles in which nothing can happen are skipped; link
//! contention over skipped cycles is accounted in one step since buffers do
//! not change in between.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Config;
use super::stats::{RunStats, Violations};
use crate::coherence::{
    check_swmr, AccessOutcome, CacheController, CacheState, Delay, Directory, MsgType, OpKind,
    Outgoing, Performed, ProtocolMsg, TxnId,
};
use crate::error::{Result, SimError};
use crate::memhier::Addr;
use crate::network::{Cycle, Message, MessageClass, Network, NetworkParams};
use crate::topology::Topology;
use crate::workload::{gen_microbenchmark, CoreState, Program};

const MAX_LOGGED_VIOLATIONS: usize = 20;

#[derive(Debug)]
enum Event {
    Inject(ProtocolMsg),
    Respond { core: usize, value: u64 },
}

#[derive(Debug)]
struct Timed {
    at: Cycle,
    seq: u64,
    ev: Event,
}

impl PartialEq for Timed {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}
impl Eq for Timed {}
impl PartialOrd for Timed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Timed {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// A core spinning on a held lock whose test loads hit in its L1.
#[derive(Debug, Clone, Copy)]
struct Park {
    addr: Addr,
    issued: Cycle,
    value: u64,
}

pub struct Simulation {
    cfg: Config,
    program: Program,
    net: Network,
    caches: Vec<CacheController>,
    dirs: Vec<Directory>,
    cores: Vec<CoreState>,
    injects: BinaryHeap<Reverse<Timed>>,
    responses: BinaryHeap<Reverse<Timed>>,
    seq: u64,
    deliveries: Vec<Message>,
    parked: Vec<Option<Park>>,
    wait_since: Vec<Option<Cycle>>,
    finished: Vec<bool>,
    cs_start: Vec<Option<Cycle>>,
    resp: Vec<Option<u64>>,
    /// Cores able to issue without waiting for a response.
    n_ready: usize,
    crit_cycles: u64,
    last_value: HashMap<Addr, u64>,
    lock_holder: Option<usize>,
    open_txns: HashMap<TxnId, bool>,
    crit_reqs: u64,
    noncrit_reqs: u64,
    violations: Violations,
    violation_log: Vec<String>,
    rng: ChaCha8Rng,
    trace: Option<Box<dyn Write + Send>>,
}

impl Simulation {
    pub fn new(cfg: Config) -> Result<Self> {
        cfg.validate()?;
        let program = gen_microbenchmark(cfg.workload(), cfg.mem_bytes())?;
        Self::with_program(cfg, program)
    }

    /// Runs an arbitrary program instead of the microbenchmark. Processors
    /// beyond the program's thread count stay idle.
    pub fn with_program(cfg: Config, mut program: Program) -> Result<Self> {
        cfg.validate()?;
        program.validate()?;
        if program.threads.len() > cfg.procs {
            return Err(SimError::Config(format!(
                "program has {} threads for {} processors",
                program.threads.len(),
                cfg.procs
            )));
        }
        program.threads.resize(cfg.procs, Vec::new());
        let topo = Arc::new(Topology::build(cfg.topology, cfg.procs)?);
        let net = Network::new(
            topo,
            NetworkParams {
                bandwidth: cfg.bandwidth,
                hop_latency: cfg.hop_latency,
                msg_bytes_control: cfg.msg_bytes_control,
                msg_bytes_data: cfg.msg_bytes_data,
                cam_enabled: cfg.cam,
            },
        );
        let (l1, l2) = (cfg.l1_geometry()?, cfg.l2_geometry()?);
        let n = cfg.procs;
        Ok(Simulation {
            caches: (0..n)
                .map(|i| CacheController::new(i, n, l1, l2, cfg.crit_forwards))
                .collect(),
            dirs: (0..n).map(|i| Directory::new(i, cfg.crit_forwards)).collect(),
            cores: (0..n).map(|i| CoreState::new(i, cfg.crit_tagging)).collect(),
            injects: BinaryHeap::new(),
            responses: BinaryHeap::new(),
            seq: 0,
            deliveries: Vec::new(),
            parked: vec![None; n],
            wait_since: vec![None; n],
            finished: vec![false; n],
            cs_start: vec![None; n],
            resp: vec![None; n],
            n_ready: n,
            crit_cycles: 0,
            last_value: HashMap::new(),
            lock_holder: None,
            open_txns: HashMap::new(),
            crit_reqs: 0,
            noncrit_reqs: 0,
            violations: Violations::default(),
            violation_log: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            trace: None,
            net,
            program,
            cfg,
        })
    }

    /// Emits one line per message send/receive and per state transition:
    /// `cycle node event addr old_state new_state crit`.
    pub fn set_trace(&mut self, sink: Box<dyn Write + Send>) {
        self.trace = Some(sink);
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    fn trace_line(&mut self, cycle: Cycle, node: usize, event: &str, addr: Addr, old: &str, new: &str, crit: bool) {
        if let Some(t) = self.trace.as_mut() {
            let _ = writeln!(t, "{cycle} {node} {event} {addr:#x} {old} {new} {}", crit as u8);
        }
    }

    fn violation(&mut self, kind: fn(&mut Violations) -> &mut u64, what: String) {
        *kind(&mut self.violations) += 1;
        if self.violation_log.len() < MAX_LOGGED_VIOLATIONS {
            self.violation_log.push(what);
        }
    }

    fn latency(&self, d: Delay) -> Cycle {
        match d {
            Delay::None => 0,
            Delay::L2 => self.cfg.lat_l2,
            Delay::MissDetect => self.cfg.lat_l1 + self.cfg.lat_l2,
            Delay::Memory => self.cfg.lat_mem,
        }
    }

    fn schedule(&mut self, now: Cycle, out: Vec<Outgoing>) {
        for o in out {
            let mut at = now + self.latency(o.delay);
            if self.cfg.jitter > 0 {
                at += self.rng.gen_range(0..=self.cfg.jitter);
            }
            self.seq += 1;
            self.injects.push(Reverse(Timed {
                at,
                seq: self.seq,
                ev: Event::Inject(o.msg),
            }));
        }
    }

    fn respond(&mut self, at: Cycle, core: usize, value: u64) {
        self.seq += 1;
        self.responses.push(Reverse(Timed {
            at,
            seq: self.seq,
            ev: Event::Respond { core, value },
        }));
    }

    fn protocol_err(cycle: Cycle, node: usize, detail: String) -> SimError {
        SimError::Protocol {
            cycle,
            node,
            detail,
        }
    }

    fn record_perf(&mut self, node: usize, p: &Performed) {
        let expect = self.last_value.get(&p.addr).copied().unwrap_or(0);
        if p.read != expect {
            self.violation(
                |v| &mut v.data_value,
                format!("node {node} read {} from {:#x}, last write was {expect}", p.read, p.addr),
            );
        }
        if let Some(w) = p.written {
            self.last_value.insert(p.addr, w);
        }
        if p.addr == self.program.map.lock {
            match (p.kind, p.written) {
                (OpKind::TestAndSet, Some(1)) => {
                    if let Some(h) = self.lock_holder {
                        self.violation(
                            |v| &mut v.lock_safety,
                            format!("node {node} acquired the lock held by {h}"),
                        );
                    }
                    self.lock_holder = Some(node);
                }
                (OpKind::Store(0), _) => {
                    if self.lock_holder != Some(node) {
                        self.violation(
                            |v| &mut v.lock_safety,
                            format!("node {node} released a lock held by {:?}", self.lock_holder),
                        );
                    }
                    self.lock_holder = None;
                }
                _ => {}
            }
        }
    }

    fn audit_crit(&mut self, m: &ProtocolMsg) {
        let expected = if m.msg_type.class() == MessageClass::Forward && !self.cfg.crit_forwards {
            false
        } else {
            m.txn_crit
        };
        let origin = match m.msg_type {
            MsgType::GetS | MsgType::GetX | MsgType::PutX => {
                self.open_txns.insert(m.txn, m.txn_crit);
                Some(m.txn_crit)
            }
            MsgType::Unblock | MsgType::WbAck => self.open_txns.remove(&m.txn),
            _ => self.open_txns.get(&m.txn).copied(),
        };
        if m.crit != expected || origin != Some(m.txn_crit) {
            self.violation(
                |v| &mut v.crit_audit,
                format!(
                    "{} for {:?} carries crit={} (transaction crit {:?})",
                    m.msg_type, m.txn, m.crit, origin
                ),
            );
        }
    }

    fn swmr_block(&mut self, addr: Addr, cycle: Cycle) {
        let states: Vec<CacheState> = self.caches.iter().map(|c| c.state_of(addr)).collect();
        let report = check_swmr(&states);
        if !report.is_empty() {
            self.violation(
                |v| &mut v.swmr,
                format!("cycle {cycle} block {addr:#x}: {}", report.join("; ")),
            );
        }
    }

    fn inclusion_scan(&mut self) {
        let problems: Vec<String> = self.caches.iter().flat_map(|c| c.check_inclusion()).collect();
        for p in problems {
            self.violation(|v| &mut v.inclusion, p);
        }
    }

    /// Architectural value of a block: the owner's copy, else memory.
    pub fn block_value(&self, addr: Addr) -> u64 {
        use CacheState::*;
        for c in &self.caches {
            if matches!(c.state_of(addr), M | O | E | OM | MI | OI) {
                return c.data_of(addr).unwrap_or(0);
            }
        }
        self.dirs[crate::coherence::home_node(addr, self.cfg.procs)].memory_of(addr)
    }

    fn step_cores(&mut self, cycle: Cycle) -> Result<()> {
        let due = self.responses.peek().is_some_and(|Reverse(t)| t.at <= cycle);
        if !due && self.n_ready == 0 {
            return Ok(());
        }
        let mut resp = std::mem::take(&mut self.resp);
        resp.fill(None);
        while let Some(Reverse(t)) = self.responses.peek() {
            if t.at > cycle {
                break;
            }
            let Reverse(t) = self.responses.pop().expect("peeked");
            if let Event::Respond { core, value } = t.ev {
                resp[core] = Some(value);
            }
        }
        for i in 0..self.cores.len() {
            if self.parked[i].is_some() || self.finished[i] {
                continue;
            }
            let r = resp[i];
            if r.is_none() && self.cores[i].outstanding().is_some() {
                continue;
            }
            if r.is_some() {
                self.wait_since[i] = None;
            }
            let code = &self.program.threads[i];
            let was_crit = self.cores[i].crit();
            let op = self.cores[i]
                .step(code, r)
                .map_err(|e| Self::protocol_err(cycle, i, e))?;
            match (was_crit, self.cores[i].crit()) {
                (false, true) => self.cs_start[i] = Some(cycle),
                (true, false) => {
                    if let Some(s) = self.cs_start[i].take() {
                        self.crit_cycles += cycle - s;
                    }
                }
                _ => {}
            }
            if self.cores[i].is_done(code) {
                self.finished[i] = true;
                continue;
            }
            let Some(op) = op else { continue };
            let old = self.trace.as_ref().map(|_| self.caches[i].state_of(op.addr));
            let (outcome, out) = self.caches[i]
                .access(op)
                .map_err(|e| Self::protocol_err(cycle, i, e))?;
            if let Some(old) = old {
                let new = self.caches[i].state_of(op.addr);
                if new != old {
                    self.trace_line(cycle, i, "state", op.addr, old.name(), new.name(), op.crit);
                }
            }
            self.schedule(cycle, out);
            match outcome {
                AccessOutcome::Hit { l1, perf } => {
                    self.record_perf(i, &perf);
                    let spinning = l1 && perf.read != 0 && self.cores[i].is_lock_test(&self.program.threads[i]);
                    if spinning {
                        self.parked[i] = Some(Park {
                            addr: op.addr,
                            issued: cycle,
                            value: perf.read,
                        });
                    } else {
                        let lat = if l1 {
                            self.cfg.lat_l1
                        } else {
                            self.cfg.lat_l1 + self.cfg.lat_l2
                        };
                        self.respond(cycle + lat, i, perf.result());
                    }
                }
                AccessOutcome::Pending => self.wait_since[i] = Some(cycle),
            }
        }
        self.resp = resp;
        self.n_ready = (0..self.cores.len())
            .filter(|&i| {
                !self.finished[i] && self.parked[i].is_none() && self.cores[i].outstanding().is_none()
            })
            .count();
        Ok(())
    }

    fn consume_deliveries(&mut self, cycle: Cycle) -> Result<()> {
        let deliveries = std::mem::take(&mut self.deliveries);
        for m in deliveries {
            let b = m.body;
            let node = b.dst;
            if self.trace.is_some() {
                let ev = format!("recv:{}", b.msg_type);
                self.trace_line(cycle, node, &ev, b.addr, "-", "-", b.crit);
            }
            match b.msg_type {
                MsgType::GetS | MsgType::GetX | MsgType::PutX | MsgType::Unblock => {
                    let old = self.trace.as_ref().map(|_| self.dirs[node].state_of(b.addr));
                    let out = self.dirs[node]
                        .handle(&b)
                        .map_err(|e| Self::protocol_err(cycle, node, e))?;
                    if let Some(old) = old {
                        let new = self.dirs[node].state_of(b.addr);
                        if new != old {
                            self.trace_line(cycle, node, "dirstate", b.addr, old.name(), new.name(), b.crit);
                        }
                    }
                    self.schedule(cycle, out);
                    if b.msg_type == MsgType::Unblock {
                        self.swmr_block(b.addr, cycle);
                    }
                }
                _ => {
                    let old = self.trace.as_ref().map(|_| self.caches[node].state_of(b.addr));
                    let (out, done) = self.caches[node]
                        .handle(&b)
                        .map_err(|e| Self::protocol_err(cycle, node, e))?;
                    if let Some(old) = old {
                        let new = self.caches[node].state_of(b.addr);
                        if new != old {
                            self.trace_line(cycle, node, "state", b.addr, old.name(), new.name(), b.crit);
                        }
                    }
                    self.schedule(cycle, out);
                    if let Some(c) = done {
                        self.record_perf(node, &c.perf);
                        self.respond(cycle + 1, node, c.perf.result());
                    }
                    if let Some(p) = self.parked[node] {
                        if !self.caches[node].l1_readable(p.addr) {
                            // next cycle at which the spinning core would have re-issued
                            let period = self.cfg.lat_l1;
                            let k = (cycle - p.issued) / period + 1;
                            self.respond(p.issued + k * period, node, p.value);
                            self.parked[node] = None;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn inject_due(&mut self, cycle: Cycle) {
        while let Some(Reverse(t)) = self.injects.peek() {
            if t.at > cycle {
                break;
            }
            let Reverse(t) = self.injects.pop().expect("peeked");
            let Event::Inject(m) = t.ev else { continue };
            self.audit_crit(&m);
            match m.msg_type {
                MsgType::GetS | MsgType::GetX => {
                    if m.crit {
                        self.crit_reqs += 1;
                    } else {
                        self.noncrit_reqs += 1;
                    }
                }
                _ => {}
            }
            if self.trace.is_some() {
                let ev = format!("send:{}", m.msg_type);
                self.trace_line(cycle, m.src, &ev, m.addr, "-", "-", m.crit);
            }
            self.net.inject(m, cycle);
        }
    }

    fn all_done(&self) -> bool {
        self.finished.iter().all(|&f| f)
            && self.injects.is_empty()
            && self.responses.is_empty()
            && self.deliveries.is_empty()
            && self.net.in_transit() == 0
    }

    fn next_cycle(&self, cycle: Cycle) -> Option<Cycle> {
        if !self.deliveries.is_empty() {
            return Some(cycle + 1);
        }
        if self.n_ready > 0 {
            return Some(cycle + 1);
        }
        [
            self.injects.peek().map(|Reverse(t)| t.at),
            self.responses.peek().map(|Reverse(t)| t.at),
            self.net.next_event(cycle),
        ]
        .into_iter()
        .flatten()
        .min()
        .map(|c| c.max(cycle + 1))
    }

    fn stuck_report(&self) -> String {
        (0..self.cores.len())
            .filter(|&i| !self.finished[i])
            .map(|i| {
                let c = &self.cores[i];
                format!(
                    "core {i} pc {} outstanding {:?} parked {}",
                    c.pc(),
                    c.outstanding(),
                    self.parked[i].is_some()
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    pub fn run(mut self) -> Result<RunStats> {
        let mut cycle: Cycle = 0;
        let mut prev: Cycle = 0;
        let mut next_scan = self.cfg.inclusion_interval;
        loop {
            self.net.sample_contention(cycle - prev);
            self.step_cores(cycle)?;
            self.consume_deliveries(cycle)?;
            self.inject_due(cycle);
            self.deliveries = self.net.advance(cycle);

            if self.cfg.inclusion_interval > 0 && cycle >= next_scan {
                self.inclusion_scan();
                next_scan = cycle + self.cfg.inclusion_interval;
            }
            if self.all_done() {
                break;
            }
            let Some(next) = self.next_cycle(cycle) else {
                return Err(SimError::Deadlock {
                    budget: self.cfg.cycle_budget,
                    stuck: format!("no pending events at cycle {cycle}: {}", self.stuck_report()),
                });
            };
            if next > self.cfg.cycle_budget {
                return Err(SimError::Deadlock {
                    budget: self.cfg.cycle_budget,
                    stuck: self.stuck_report(),
                });
            }
            if let Some(i) = (0..self.cores.len())
                .find(|&i| self.wait_since[i].is_some_and(|s| next - s > self.cfg.watchdog))
            {
                return Err(SimError::Deadlock {
                    budget: self.cfg.cycle_budget,
                    stuck: format!(
                        "core {i} blocked on one request for more than {} cycles: {}",
                        self.cfg.watchdog,
                        self.stuck_report()
                    ),
                });
            }
            prev = cycle;
            cycle = next;
        }
        self.finish(cycle)
    }

    fn finish(mut self, total_cycles: Cycle) -> Result<RunStats> {
        let mut blocks = self.program.map.counters.clone();
        blocks.push(self.program.map.lock);
        for &a in &blocks {
            self.swmr_block(a, total_cycles);
        }
        self.inclusion_scan();
        if self.net.injected() != self.net.delivered() {
            let what = format!(
                "{} messages injected but {} delivered",
                self.net.injected(),
                self.net.delivered()
            );
            self.violation(|v| &mut v.conservation, what);
        }
        let counter_values = self
            .program
            .map
            .counters
            .iter()
            .map(|&a| self.block_value(a))
            .collect();
        let links = self.net.links().iter().map(|l| l.stats).collect();
        Ok(RunStats {
            total_cycles,
            crit_cycles: self.crit_cycles,
            crit_reqs: self.crit_reqs,
            noncrit_reqs: self.noncrit_reqs,
            links,
            counter_values,
            messages: self.net.injected(),
            violations: self.violations,
            violation_log: self.violation_log,
            config: self.cfg,
        })
    }
}

pub fn run_simulation(cfg: &Config) -> Result<RunStats> {
    Simulation::new(cfg.clone())?.run()
}

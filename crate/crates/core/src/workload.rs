//! Lock-intensive shared-counter microbenchmark and the in-order core model
//! that runs it.

use std::fmt::{self, Write as _};

use crate::coherence::{MemOp, OpKind};
use crate::error::{config_err, Result};
use crate::memhier::Addr;

const BLOCK: Addr = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoreValue {
    Const(u64),
    /// One more than the value returned by the thread's last load.
    LoadedPlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instr {
    Load(Addr),
    Store(Addr, StoreValue),
    Lock(Addr),
    Unlock(Addr),
    CritEnter,
    CritExit,
    Delay(u64),
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Load(a) => write!(f, "LOAD {a:#x}"),
            Instr::Store(a, StoreValue::Const(v)) => write!(f, "STORE {a:#x} {v}"),
            Instr::Store(a, StoreValue::LoadedPlusOne) => write!(f, "STORE {a:#x} LOADED+1"),
            Instr::Lock(a) => write!(f, "LOCK {a:#x}"),
            Instr::Unlock(a) => write!(f, "UNLOCK {a:#x}"),
            Instr::CritEnter => f.write_str("CRIT_ENTER"),
            Instr::CritExit => f.write_str("CRIT_EXIT"),
            Instr::Delay(n) => write!(f, "DELAY {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressMap {
    pub lock: Addr,
    pub counters: Vec<Addr>,
    /// `[start, end)` byte range of each thread's private scratch region.
    pub scratch: Vec<(Addr, Addr)>,
}

impl AddressMap {
    pub fn top(&self) -> Addr {
        self.scratch
            .iter()
            .map(|r| r.1)
            .chain(self.counters.iter().map(|c| c + BLOCK))
            .chain(std::iter::once(self.lock + BLOCK))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub threads: Vec<Vec<Instr>>,
    pub map: AddressMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MicrobenchParams {
    pub threads: usize,
    pub counters: usize,
    pub iters: usize,
    pub noncrit_work: usize,
}

/// Builds the shared-counter microbenchmark. Every iteration a thread streams
/// through `noncrit_work` fresh blocks of its private region (load, then
/// store), takes the global lock and increments every counter.
pub fn gen_microbenchmark(p: MicrobenchParams, mem_bytes: u64) -> Result<Program> {
    if p.threads == 0 || p.counters == 0 || p.iters == 0 {
        return config_err(format!(
            "threads, counters and iters must be >= 1 (got {}, {}, {})",
            p.threads, p.counters, p.iters
        ));
    }
    let lock = 0;
    let counters: Vec<Addr> = (1..=p.counters as Addr).map(|i| i * BLOCK).collect();
    let scratch_base = (p.counters as Addr + 1) * BLOCK;
    let region = (p.iters * p.noncrit_work) as Addr * BLOCK;
    let scratch: Vec<(Addr, Addr)> = (0..p.threads as Addr)
        .map(|t| (scratch_base + t * region, scratch_base + (t + 1) * region))
        .collect();
    let map = AddressMap {
        lock,
        counters,
        scratch,
    };
    if map.top() > mem_bytes {
        return config_err(format!(
            "workload needs {:#x} bytes of memory but only {mem_bytes:#x} are configured",
            map.top()
        ));
    }

    let threads = (0..p.threads)
        .map(|t| {
            let mut code = Vec::with_capacity(p.iters * (2 * p.noncrit_work + 2 * p.counters + 4));
            let mut next_scratch = map.scratch[t].0;
            for _ in 0..p.iters {
                for _ in 0..p.noncrit_work {
                    code.push(Instr::Load(next_scratch));
                    code.push(Instr::Store(next_scratch, StoreValue::LoadedPlusOne));
                    next_scratch += BLOCK;
                }
                code.push(Instr::Lock(map.lock));
                code.push(Instr::CritEnter);
                for &c in &map.counters {
                    code.push(Instr::Load(c));
                    code.push(Instr::Store(c, StoreValue::LoadedPlusOne));
                }
                code.push(Instr::CritExit);
                code.push(Instr::Unlock(map.lock));
            }
            code
        })
        .collect();
    let prog = Program { threads, map };
    prog.validate()?;
    Ok(prog)
}

impl Program {
    /// Checks LOCK … CRIT_ENTER … CRIT_EXIT … UNLOCK nesting in every thread.
    pub fn validate(&self) -> Result<()> {
        for (t, code) in self.threads.iter().enumerate() {
            let mut held: Option<Addr> = None;
            let mut crit = false;
            for (pc, ins) in code.iter().enumerate() {
                let bad = |why: &str| config_err(format!("thread {t} pc {pc} ({ins}): {why}"));
                match *ins {
                    Instr::Lock(a) => {
                        if held.is_some() {
                            return bad("nested lock");
                        }
                        held = Some(a);
                    }
                    Instr::Unlock(a) => {
                        if crit {
                            return bad("unlock inside critical markers");
                        }
                        if held != Some(a) {
                            return bad("unlock of a lock not held");
                        }
                        held = None;
                    }
                    Instr::CritEnter => {
                        if crit {
                            return bad("nested CRIT_ENTER");
                        }
                        if held.is_none() {
                            return bad("CRIT_ENTER outside a lock");
                        }
                        crit = true;
                    }
                    Instr::CritExit => {
                        if !crit {
                            return bad("CRIT_EXIT without CRIT_ENTER");
                        }
                        crit = false;
                    }
                    _ => {}
                }
            }
            if crit || held.is_some() {
                return config_err(format!("thread {t} ends inside a critical section"));
            }
        }
        Ok(())
    }

    /// Line-oriented listing: a `# thread N` header, then `pc instruction`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (t, code) in self.threads.iter().enumerate() {
            let _ = writeln!(s, "# thread {t}");
            for (pc, ins) in code.iter().enumerate() {
                let _ = writeln!(s, "{pc} {ins}");
            }
        }
        s
    }

    /// Number of counter loads and stores issued inside critical sections.
    pub fn crit_mem_ops(&self) -> usize {
        self.threads
            .iter()
            .map(|code| {
                let mut crit = false;
                code.iter()
                    .filter(|i| {
                        match i {
                            Instr::CritEnter => crit = true,
                            Instr::CritExit => crit = false,
                            _ => {}
                        }
                        crit && matches!(i, Instr::Load(_) | Instr::Store(..))
                    })
                    .count()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LockPhase {
    Test,
    Set,
}

/// In-order core with at most one outstanding memory request.
#[derive(Debug, Clone)]
pub struct CoreState {
    pub id: usize,
    pc: usize,
    crit: bool,
    crit_tagging: bool,
    outstanding: Option<MemOp>,
    delay_remaining: u64,
    lock_phase: LockPhase,
    loaded: u64,
}

impl CoreState {
    /// With `crit_tagging` off the markers still execute but never raise the
    /// crit flag.
    pub fn new(id: usize, crit_tagging: bool) -> Self {
        CoreState {
            id,
            pc: 0,
            crit: false,
            crit_tagging,
            outstanding: None,
            delay_remaining: 0,
            lock_phase: LockPhase::Test,
            loaded: 0,
        }
    }

    pub fn pc(&self) -> usize {
        self.pc
    }

    pub fn crit(&self) -> bool {
        self.crit
    }

    pub fn outstanding(&self) -> Option<MemOp> {
        self.outstanding
    }

    pub fn is_done(&self, program: &[Instr]) -> bool {
        self.pc >= program.len() && self.outstanding.is_none()
    }

    /// Spinning on a held lock: the test load is outstanding.
    pub fn is_lock_test(&self, program: &[Instr]) -> bool {
        matches!(program.get(self.pc), Some(Instr::Lock(_)))
            && self.lock_phase == LockPhase::Test
            && self.outstanding.is_some()
    }

    pub fn apply_crit_marker(&mut self, marker: Instr) -> std::result::Result<(), String> {
        match (marker, self.crit) {
            (Instr::CritEnter, false) => self.crit = self.crit_tagging,
            (Instr::CritExit, _) if self.crit || !self.crit_tagging => self.crit = false,
            (Instr::CritEnter | Instr::CritExit, _) => {
                return Err(format!("core {}: badly nested {marker}", self.id))
            }
            _ => return Err(format!("core {}: {marker} is not a crit marker", self.id)),
        }
        Ok(())
    }

    fn request(&mut self, kind: OpKind, addr: Addr) -> Option<MemOp> {
        let op = MemOp {
            kind,
            addr,
            crit: self.crit,
        };
        self.outstanding = Some(op);
        Some(op)
    }

    /// One cycle: retire a completed request, then issue or execute the next
    /// instruction if idle.
    pub fn step(
        &mut self,
        program: &[Instr],
        response: Option<u64>,
    ) -> std::result::Result<Option<MemOp>, String> {
        if let Some(v) = response {
            if self.outstanding.take().is_none() {
                return Err(format!("core {}: response with no outstanding request", self.id));
            }
            match program[self.pc] {
                Instr::Load(_) => {
                    self.loaded = v;
                    self.pc += 1;
                }
                Instr::Store(..) | Instr::Unlock(_) => self.pc += 1,
                Instr::Lock(_) => match (self.lock_phase, v) {
                    (LockPhase::Test, 0) => self.lock_phase = LockPhase::Set,
                    (LockPhase::Test, _) => {}
                    (LockPhase::Set, 0) => {
                        self.lock_phase = LockPhase::Test;
                        self.pc += 1;
                    }
                    (LockPhase::Set, _) => self.lock_phase = LockPhase::Test,
                },
                other => {
                    return Err(format!("core {}: response while executing {other}", self.id))
                }
            }
        } else if self.outstanding.is_some() {
            return Ok(None);
        }

        let Some(&ins) = program.get(self.pc) else {
            return Ok(None);
        };
        Ok(match ins {
            Instr::Load(a) => self.request(OpKind::Load, a),
            Instr::Store(a, v) => {
                let value = match v {
                    StoreValue::Const(c) => c,
                    StoreValue::LoadedPlusOne => self.loaded + 1,
                };
                self.request(OpKind::Store(value), a)
            }
            Instr::Lock(a) => match self.lock_phase {
                LockPhase::Test => self.request(OpKind::Load, a),
                LockPhase::Set => self.request(OpKind::TestAndSet, a),
            },
            Instr::Unlock(a) => self.request(OpKind::Store(0), a),
            Instr::CritEnter | Instr::CritExit => {
                self.apply_crit_marker(ins)?;
                self.pc += 1;
                None
            }
            Instr::Delay(n) => {
                if self.delay_remaining == 0 {
                    self.delay_remaining = n;
                }
                self.delay_remaining = self.delay_remaining.saturating_sub(1);
                if self.delay_remaining == 0 {
                    self.pc += 1;
                }
                None
            }
        })
    }
}

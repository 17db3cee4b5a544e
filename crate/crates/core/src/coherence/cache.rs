use std::collections::BTreeMap;

use super::{home_node, CacheState, Delay, MsgType, Outgoing, ProtocolMsg, TxnId, BLOCK_SHIFT};
use crate::memhier::{Addr, CacheArray, CacheGeometry, Lookup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Load,
    Store(u64),
    /// Atomic test-and-set: writes 1 when the old value is 0, returns the old value.
    TestAndSet,
}

impl OpKind {
    pub fn needs_write(self) -> bool {
        !matches!(self, OpKind::Load)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemOp {
    pub kind: OpKind,
    pub addr: Addr,
    pub crit: bool,
}

/// A memory operation taking effect on a block's data token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Performed {
    pub addr: Addr,
    pub kind: OpKind,
    /// Value observed before the operation.
    pub read: u64,
    pub written: Option<u64>,
}

impl Performed {
    /// Value handed back to the core.
    pub fn result(&self) -> u64 {
        match self.kind {
            OpKind::Store(v) => v,
            _ => self.read,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessOutcome {
    /// Serviced locally; `l1` tells whether the L1 alone satisfied it.
    Hit { l1: bool, perf: Performed },
    /// A coherence transaction was started (or queued behind a writeback).
    Pending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Completion {
    pub perf: Performed,
    pub txn: TxnId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Line {
    state: CacheState,
    data: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Mshr {
    op: MemOp,
    txn: TxnId,
    have_data: bool,
    exclusive: bool,
    acks_expected: Option<u32>,
    acks_received: u32,
}

/// Per-node cache controller: an L2 that is the coherence point plus a
/// tag-only inclusive L1 filter, a writeback buffer and a single MSHR.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheController {
    node: usize,
    n_nodes: usize,
    crit_forwards: bool,
    l1: CacheArray<()>,
    l2: CacheArray<Line>,
    /// Blocks evicted from the L2 that await WB_Ack (MI, OI, II).
    wb: BTreeMap<Addr, Line>,
    mshr: Option<Mshr>,
    stalled: Option<MemOp>,
    next_seq: u64,
}

type StepResult = Result<(Vec<Outgoing>, Option<Completion>), String>;

impl CacheController {
    pub fn new(
        node: usize,
        n_nodes: usize,
        l1: CacheGeometry,
        l2: CacheGeometry,
        crit_forwards: bool,
    ) -> Self {
        CacheController {
            node,
            n_nodes,
            crit_forwards,
            l1: CacheArray::new(l1),
            l2: CacheArray::new(l2),
            wb: BTreeMap::new(),
            mshr: None,
            stalled: None,
            next_seq: 0,
        }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn is_busy(&self) -> bool {
        self.mshr.is_some() || self.stalled.is_some()
    }

    /// Current protocol state of `addr` at this node.
    pub fn state_of(&self, addr: Addr) -> CacheState {
        let addr = block(addr);
        if let Some(l) = self.l2.peek(addr) {
            l.state
        } else if let Some(l) = self.wb.get(&addr) {
            l.state
        } else {
            CacheState::I
        }
    }

    pub fn data_of(&self, addr: Addr) -> Option<u64> {
        let addr = block(addr);
        self.l2
            .peek(addr)
            .or_else(|| self.wb.get(&addr))
            .map(|l| l.data)
    }

    /// Whether a load of `addr` would hit in the L1.
    pub fn l1_readable(&self, addr: Addr) -> bool {
        let addr = block(addr);
        self.l1.contains(addr) && self.state_of(addr).can_read()
    }

    pub fn pending_writebacks(&self) -> usize {
        self.wb.len()
    }

    /// Inclusion check: every L1 block must be readable in the L2.
    pub fn check_inclusion(&self) -> Vec<String> {
        self.l1
            .iter()
            .filter(|(a, _)| !self.l2.peek(*a).is_some_and(|l| l.state.can_read()))
            .map(|(a, _)| {
                format!(
                    "node {}: L1 holds {a:#x} but L2 state is {}",
                    self.node,
                    self.state_of(a)
                )
            })
            .collect()
    }

    fn home(&self, addr: Addr) -> usize {
        home_node(addr, self.n_nodes)
    }

    fn new_txn(&mut self, addr: Addr) -> TxnId {
        let seq = self.next_seq;
        self.next_seq += 1;
        TxnId {
            requester: self.node,
            addr,
            seq,
        }
    }

    fn request(&self, msg_type: MsgType, op: &MemOp, txn: TxnId, delay: Delay) -> Outgoing {
        Outgoing {
            msg: ProtocolMsg {
                msg_type,
                addr: op.addr,
                src: self.node,
                dst: self.home(op.addr),
                requester: self.node,
                acks: 0,
                data: 0,
                exclusive: false,
                crit: op.crit,
                txn,
                txn_crit: op.crit,
            },
            delay,
        }
    }

    /// Reply to a forwarded request or invalidation on behalf of its transaction.
    fn reply(&self, to: &ProtocolMsg, msg_type: MsgType, data: u64) -> Outgoing {
        Outgoing {
            msg: ProtocolMsg {
                msg_type,
                addr: to.addr,
                src: self.node,
                dst: to.requester,
                requester: to.requester,
                acks: to.acks,
                data,
                exclusive: false,
                crit: to.txn_crit,
                txn: to.txn,
                txn_crit: to.txn_crit,
            },
            delay: Delay::L2,
        }
    }

    fn touch_l1(&mut self, addr: Addr) -> bool {
        if self.l1.lookup(addr) != Lookup::Miss {
            return true;
        }
        if let Some((_, victim)) = self.l1.select_victim(addr) {
            self.l1.remove(victim);
        }
        self.l1.install(addr, ());
        false
    }

    fn perform(line: &mut Line, op: &MemOp) -> Performed {
        let read = line.data;
        let written = match op.kind {
            OpKind::Load => None,
            OpKind::Store(v) => Some(v),
            OpKind::TestAndSet => (read == 0).then_some(1),
        };
        if let Some(v) = written {
            line.data = v;
        }
        Performed {
            addr: op.addr,
            kind: op.kind,
            read,
            written,
        }
    }

    /// A core request. At most one may be outstanding.
    pub fn access(&mut self, op: MemOp) -> Result<(AccessOutcome, Vec<Outgoing>), String> {
        if self.is_busy() {
            return Err(format!(
                "node {}: core request {op:?} while another is outstanding",
                self.node
            ));
        }
        let op = MemOp {
            addr: block(op.addr),
            ..op
        };
        self.start(op, Delay::MissDetect)
    }

    fn start(&mut self, op: MemOp, delay: Delay) -> Result<(AccessOutcome, Vec<Outgoing>), String> {
        use CacheState::*;
        let addr = op.addr;
        if self.wb.contains_key(&addr) {
            self.stalled = Some(op);
            return Ok((AccessOutcome::Pending, Vec::new()));
        }
        let write = op.kind.needs_write();
        let state = self.l2.peek(addr).map(|l| l.state);
        match state {
            Some(s) if (!write && s.can_read()) || (write && s.can_write()) => {
                let l1 = self.touch_l1(addr);
                if !l1 {
                    self.l2.lookup(addr);
                }
                let line = self.l2.peek_mut(addr).expect("resident");
                if write {
                    line.state = M;
                }
                let perf = Self::perform(line, &op);
                Ok((AccessOutcome::Hit { l1, perf }, Vec::new()))
            }
            Some(s @ (S | O)) => {
                self.l2.lookup(addr);
                self.l2.peek_mut(addr).expect("resident").state = if s == S { SM } else { OM };
                let txn = self.new_txn(addr);
                self.mshr = Some(Mshr::new(op, txn));
                Ok((
                    AccessOutcome::Pending,
                    vec![self.request(MsgType::GetX, &op, txn, delay)],
                ))
            }
            None => {
                let mut out = Vec::new();
                if let Some((_, victim)) = self.l2.select_victim_where(addr, |l| l.state.is_stable()) {
                    out.extend(self.evict_line(victim));
                }
                if self.l2.is_set_full(addr) {
                    return Err(format!(
                        "node {}: no replaceable way for {addr:#x}",
                        self.node
                    ));
                }
                self.l2.install(
                    addr,
                    Line {
                        state: if write { IM } else { IS },
                        data: 0,
                    },
                );
                let txn = self.new_txn(addr);
                self.mshr = Some(Mshr::new(op, txn));
                let t = if write { MsgType::GetX } else { MsgType::GetS };
                out.push(self.request(t, &op, txn, delay));
                Ok((AccessOutcome::Pending, out))
            }
            Some(s) => Err(format!(
                "node {}: core request {op:?} to block in transient state {s}",
                self.node
            )),
        }
    }

    /// Explicit replacement of a stable block (used by the exhaustive checker
    /// and by tests). Returns the writeback message, if any.
    pub fn evict(&mut self, addr: Addr) -> Result<Vec<Outgoing>, String> {
        let addr = block(addr);
        match self.l2.peek(addr).map(|l| l.state) {
            Some(s) if s.is_stable() => Ok(self.evict_line(addr).into_iter().collect()),
            Some(s) => Err(format!(
                "node {}: cannot replace {addr:#x} in transient state {s}",
                self.node
            )),
            None => Ok(Vec::new()),
        }
    }

    fn evict_line(&mut self, addr: Addr) -> Option<Outgoing> {
        use CacheState::*;
        let line = self.l2.remove(addr).expect("victim resident");
        self.l1.remove(addr);
        let wb_state = match line.state {
            M | E => MI,
            O => OI,
            _ => return None,
        };
        self.wb.insert(
            addr,
            Line {
                state: wb_state,
                data: line.data,
            },
        );
        let txn = self.new_txn(addr);
        let op = MemOp {
            kind: OpKind::Load,
            addr,
            crit: false,
        };
        let mut out = self.request(MsgType::PutX, &op, txn, Delay::None);
        out.msg.data = line.data;
        Some(out)
    }

    /// A message delivered from the network.
    pub fn handle(&mut self, msg: &ProtocolMsg) -> StepResult {
        use CacheState::*;
        let addr = msg.addr;
        let err = |what: &str, s: CacheState| {
            Err(format!(
                "node {}: unexpected {} for {addr:#x} in state {s} ({what})",
                self.node, msg.msg_type
            ))
        };
        let state = self.state_of(addr);
        match msg.msg_type {
            MsgType::FwdGetS => {
                let (next, data) = match state {
                    M | E => (O, self.data_of(addr)),
                    O | OM | OI => (state, self.data_of(addr)),
                    MI => (OI, self.data_of(addr)),
                    _ => return err("not owner", state),
                };
                self.set_state(addr, next);
                Ok((vec![self.reply(msg, MsgType::DataOwner, data.unwrap_or(0))], None))
            }
            MsgType::FwdGetX => {
                let data = self.data_of(addr).unwrap_or(0);
                match state {
                    M | E | O => {
                        self.l2.remove(addr);
                        self.l1.remove(addr);
                    }
                    OM => {
                        self.set_state(addr, IM);
                        self.l1.remove(addr);
                        self.mshr.as_mut().expect("OM has an MSHR").reset();
                    }
                    MI | OI => self.set_state(addr, II),
                    _ => return err("not owner", state),
                }
                Ok((vec![self.reply(msg, MsgType::DataOwner, data)], None))
            }
            MsgType::Inv => {
                match state {
                    S => {
                        self.l2.remove(addr);
                        self.l1.remove(addr);
                    }
                    SM => {
                        self.set_state(addr, IM);
                        self.l1.remove(addr);
                        self.mshr.as_mut().expect("SM has an MSHR").reset();
                    }
                    // stale sharer after a silent S replacement
                    I | IS | IM => {}
                    _ => return err("invalidation of a non-sharer", state),
                }
                Ok((vec![self.reply(msg, MsgType::InvAck, 0)], None))
            }
            MsgType::DataDir | MsgType::DataOwner => {
                let Some(mshr) = self.mshr.as_mut() else {
                    return err("no outstanding request", state);
                };
                if mshr.txn != msg.txn || !matches!(state, IS | IM | SM | OM) {
                    return err("data for another transaction", state);
                }
                mshr.have_data = true;
                mshr.exclusive = msg.msg_type == MsgType::DataDir && msg.exclusive;
                mshr.acks_expected = Some(msg.acks);
                if state != OM {
                    self.l2.peek_mut(addr).expect("allocated").data = msg.data;
                }
                Ok(self.try_complete(addr))
            }
            MsgType::InvAck => {
                let Some(mshr) = self.mshr.as_mut() else {
                    return err("no outstanding request", state);
                };
                if mshr.txn != msg.txn || !matches!(state, IM | SM | OM) {
                    return err("ack for another transaction", state);
                }
                mshr.acks_received += 1;
                Ok(self.try_complete(addr))
            }
            MsgType::WbAck => {
                if !matches!(state, MI | OI | II) {
                    return err("no writeback pending", state);
                }
                self.wb.remove(&addr);
                match self.stalled.take() {
                    Some(op) if op.addr == addr => {
                        let (outcome, out) = self.start(op, Delay::None)?;
                        debug_assert_eq!(outcome, AccessOutcome::Pending);
                        Ok((out, None))
                    }
                    other => {
                        self.stalled = other;
                        Ok((Vec::new(), None))
                    }
                }
            }
            MsgType::GetS | MsgType::GetX | MsgType::PutX | MsgType::Unblock => {
                err("directory message at a cache", state)
            }
        }
    }

    fn set_state(&mut self, addr: Addr, s: CacheState) {
        if let Some(l) = self.l2.peek_mut(addr) {
            l.state = s;
        } else if let Some(l) = self.wb.get_mut(&addr) {
            l.state = s;
        }
    }

    fn try_complete(&mut self, addr: Addr) -> (Vec<Outgoing>, Option<Completion>) {
        use CacheState::*;
        let mshr = self.mshr.expect("outstanding request");
        let state = self.state_of(addr);
        let done = mshr.have_data
            && match state {
                IS => true,
                _ => mshr.acks_expected == Some(mshr.acks_received),
            };
        if !done {
            return (Vec::new(), None);
        }
        self.mshr = None;
        let final_state = match state {
            IS if mshr.exclusive => E,
            IS => S,
            _ => M,
        };
        let line = self.l2.peek_mut(addr).expect("allocated");
        line.state = final_state;
        let perf = Self::perform(line, &mshr.op);
        if mshr.op.kind.needs_write() {
            line.state = M;
        }
        self.touch_l1(addr);
        let unblock = Outgoing {
            msg: ProtocolMsg {
                msg_type: MsgType::Unblock,
                addr,
                src: self.node,
                dst: self.home(addr),
                requester: self.node,
                acks: 0,
                data: 0,
                exclusive: final_state != S,
                crit: mshr.op.crit,
                txn: mshr.txn,
                txn_crit: mshr.op.crit,
            },
            delay: Delay::None,
        };
        (
            vec![unblock],
            Some(Completion {
                perf,
                txn: mshr.txn,
            }),
        )
    }

    pub fn crit_forwards(&self) -> bool {
        self.crit_forwards
    }
}

impl Mshr {
    fn new(op: MemOp, txn: TxnId) -> Self {
        Mshr {
            op,
            txn,
            have_data: false,
            exclusive: false,
            acks_expected: None,
            acks_received: 0,
        }
    }

    /// Lost the copy the upgrade was based on; wait for fresh data.
    fn reset(&mut self) {
        self.have_data = false;
        self.acks_expected = None;
        self.acks_received = 0;
    }
}

fn block(addr: Addr) -> Addr {
    addr & !((1 << BLOCK_SHIFT) - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use CacheState::*;

    fn ctrl(node: usize) -> CacheController {
        let l1 = CacheGeometry::new(256 << 10, 4, 64).unwrap();
        let l2 = CacheGeometry::new(16 << 20, 4, 64).unwrap();
        CacheController::new(node, 4, l1, l2, true)
    }

    fn tiny(node: usize) -> CacheController {
        let g = CacheGeometry::new(128, 2, 64).unwrap(); // 1 set, 2 ways
        CacheController::new(node, 4, g, g, true)
    }

    fn incoming(t: MsgType, addr: Addr, requester: usize, txn: TxnId) -> ProtocolMsg {
        ProtocolMsg {
            msg_type: t,
            addr,
            src: 0,
            dst: 0,
            requester,
            acks: 0,
            data: 0,
            exclusive: false,
            crit: false,
            txn,
            txn_crit: false,
        }
    }

    fn load(addr: Addr, crit: bool) -> MemOp {
        MemOp {
            kind: OpKind::Load,
            addr,
            crit,
        }
    }

    fn store(addr: Addr, v: u64) -> MemOp {
        MemOp {
            kind: OpKind::Store(v),
            addr,
            crit: false,
        }
    }

    /// Bring `addr` into `state` at node 1 via the normal message flow.
    fn fill(c: &mut CacheController, addr: Addr, exclusive: bool, write: bool) {
        let op = if write { store(addr, 7) } else { load(addr, false) };
        let (_, out) = c.access(op).unwrap();
        let txn = out.last().unwrap().msg.txn;
        let mut d = incoming(MsgType::DataDir, addr, c.node(), txn);
        d.exclusive = exclusive;
        let (_, done) = c.handle(&d).unwrap();
        assert!(done.is_some());
    }

    #[test]
    fn load_miss_sends_crit_gets() {
        let mut c = ctrl(1);
        let (o, out) = c.access(load(0x40, true)).unwrap();
        assert_eq!(o, AccessOutcome::Pending);
        assert_eq!(c.state_of(0x40), IS);
        assert_eq!(out.len(), 1);
        let m = out[0].msg;
        assert_eq!(m.msg_type, MsgType::GetS);
        assert!(m.crit && m.txn_crit);
        assert_eq!(m.dst, 1);
        assert_eq!(out[0].delay, Delay::MissDetect);
    }

    #[test]
    fn exclusive_grant_then_silent_upgrade() {
        let mut c = ctrl(1);
        fill(&mut c, 0x80, true, false);
        assert_eq!(c.state_of(0x80), E);
        let (o, out) = c.access(store(0x80, 3)).unwrap();
        assert!(matches!(o, AccessOutcome::Hit { l1: true, .. }));
        assert!(out.is_empty());
        assert_eq!(c.state_of(0x80), M);
        assert_eq!(c.data_of(0x80), Some(3));
    }

    #[test]
    fn owner_supplies_data_on_fwd_gets() {
        let mut c = ctrl(1);
        fill(&mut c, 0x80, true, true);
        assert_eq!(c.state_of(0x80), M);
        let txn = TxnId {
            requester: 3,
            addr: 0x80,
            seq: 0,
        };
        let (out, _) = c.handle(&incoming(MsgType::FwdGetS, 0x80, 3, txn)).unwrap();
        assert_eq!(c.state_of(0x80), O);
        assert_eq!(out[0].msg.msg_type, MsgType::DataOwner);
        assert_eq!(out[0].msg.dst, 3);
        assert_eq!(out[0].msg.data, 7);
    }

    #[test]
    fn sharer_acks_invalidation() {
        let mut c = ctrl(1);
        fill(&mut c, 0xC0, false, false);
        assert_eq!(c.state_of(0xC0), S);
        let txn = TxnId {
            requester: 2,
            addr: 0xC0,
            seq: 0,
        };
        let (out, _) = c.handle(&incoming(MsgType::Inv, 0xC0, 2, txn)).unwrap();
        assert_eq!(c.state_of(0xC0), I);
        assert_eq!(out[0].msg.msg_type, MsgType::InvAck);
        assert_eq!(out[0].msg.dst, 2);
        assert!(!c.l1_readable(0xC0));
    }

    #[test]
    fn upgrade_waits_for_all_acks() {
        let mut c = ctrl(1);
        fill(&mut c, 0x40, false, false);
        let (_, out) = c.access(store(0x40, 9)).unwrap();
        assert_eq!(c.state_of(0x40), SM);
        let txn = out[0].msg.txn;
        let mut d = incoming(MsgType::DataDir, 0x40, 1, txn);
        d.acks = 2;
        assert!(c.handle(&d).unwrap().1.is_none());
        assert!(c.handle(&incoming(MsgType::InvAck, 0x40, 1, txn)).unwrap().1.is_none());
        let (out, done) = c.handle(&incoming(MsgType::InvAck, 0x40, 1, txn)).unwrap();
        assert_eq!(done.unwrap().perf.written, Some(9));
        assert_eq!(c.state_of(0x40), M);
        assert_eq!(out[0].msg.msg_type, MsgType::Unblock);
        assert!(out[0].msg.exclusive);
    }

    #[test]
    fn acks_may_arrive_before_data() {
        let mut c = ctrl(1);
        let (_, out) = c.access(store(0x40, 5)).unwrap();
        let txn = out[0].msg.txn;
        assert!(c.handle(&incoming(MsgType::InvAck, 0x40, 1, txn)).unwrap().1.is_none());
        let mut d = incoming(MsgType::DataOwner, 0x40, 1, txn);
        d.acks = 1;
        assert!(c.handle(&d).unwrap().1.is_some());
    }

    #[test]
    fn replacement_writes_back_dirty_victim() {
        let mut c = tiny(1);
        fill(&mut c, 0x000, true, true);
        fill(&mut c, 0x040, false, false);
        // third block evicts LRU 0x000 (M) with a PUTX
        let (_, out) = c.access(load(0x080, true)).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].msg.msg_type, MsgType::PutX);
        assert!(!out[0].msg.crit, "writebacks are never critical");
        assert_eq!(out[0].msg.data, 7);
        assert_eq!(c.state_of(0x000), MI);
        assert_eq!(c.pending_writebacks(), 1);
    }

    #[test]
    fn request_to_block_in_writeback_stalls_until_ack() {
        let mut c = ctrl(1);
        fill(&mut c, 0x40, true, true);
        let put = c.evict(0x40).unwrap();
        assert_eq!(put[0].msg.msg_type, MsgType::PutX);
        let (o, out) = c.access(load(0x40, false)).unwrap();
        assert_eq!(o, AccessOutcome::Pending);
        assert!(out.is_empty());
        let (out, _) = c
            .handle(&incoming(MsgType::WbAck, 0x40, 1, put[0].msg.txn))
            .unwrap();
        assert_eq!(out[0].msg.msg_type, MsgType::GetS);
        assert_eq!(c.state_of(0x40), IS);
    }

    #[test]
    fn forward_during_writeback_race() {
        let mut c = ctrl(1);
        fill(&mut c, 0x40, true, true);
        c.evict(0x40).unwrap();
        let txn = TxnId {
            requester: 2,
            addr: 0x40,
            seq: 0,
        };
        let (out, _) = c.handle(&incoming(MsgType::FwdGetX, 0x40, 2, txn)).unwrap();
        assert_eq!(out[0].msg.data, 7);
        assert_eq!(c.state_of(0x40), II);
        c.handle(&incoming(MsgType::WbAck, 0x40, 1, txn)).unwrap();
        assert_eq!(c.state_of(0x40), I);
    }

    #[test]
    fn unexpected_message_is_an_error() {
        let mut c = ctrl(1);
        let txn = TxnId {
            requester: 2,
            addr: 0x40,
            seq: 0,
        };
        assert!(c.handle(&incoming(MsgType::FwdGetS, 0x40, 2, txn)).is_err());
        assert!(c.handle(&incoming(MsgType::WbAck, 0x40, 2, txn)).is_err());
    }

    #[test]
    fn test_and_set_semantics() {
        let mut c = ctrl(1);
        let tas = MemOp {
            kind: OpKind::TestAndSet,
            addr: 0x40,
            crit: false,
        };
        let (_, out) = c.access(tas).unwrap();
        assert_eq!(out[0].msg.msg_type, MsgType::GetX);
        let mut d = incoming(MsgType::DataDir, 0x40, 1, out[0].msg.txn);
        d.exclusive = true;
        let (_, done) = c.handle(&d).unwrap();
        let p = done.unwrap().perf;
        assert_eq!((p.read, p.written), (0, Some(1)));
        let (o, _) = c.access(tas).unwrap();
        let AccessOutcome::Hit { perf, .. } = o else {
            panic!("expected hit")
        };
        assert_eq!((perf.read, perf.written), (1, None));
    }
}

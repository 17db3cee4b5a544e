use std::collections::{BTreeMap, VecDeque};

use super::{Delay, MsgType, Outgoing, ProtocolMsg, TxnId};
use crate::memhier::Addr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirState {
    Invalid,
    Shared,
    Owned,
    Exclusive,
    Busy,
}

impl DirState {
    pub fn name(self) -> &'static str {
        match self {
            DirState::Invalid => "Invalid",
            DirState::Shared => "Shared",
            DirState::Owned => "Owned",
            DirState::Exclusive => "Exclusive",
            DirState::Busy => "Busy",
        }
    }
}

/// State the block settles into once the requester's Unblock arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Settle {
    /// Exclusive owner (GETX, or GETS on an uncached block).
    Exclusive,
    AddSharer,
    /// Old owner keeps O, requester becomes a sharer.
    OwnedAddSharer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct BusyInfo {
    requester: usize,
    msg_type: MsgType,
    crit: bool,
    txn: TxnId,
    settle: Settle,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DirEntry {
    pub state: DirState,
    pub owner: Option<usize>,
    /// Bitmask of sharers (the owner is never included).
    pub sharers: u64,
    pub memory: u64,
    busy: Option<BusyInfo>,
    pending: VecDeque<ProtocolMsg>,
}

impl Default for DirEntry {
    fn default() -> Self {
        DirEntry {
            state: DirState::Invalid,
            owner: None,
            sharers: 0,
            memory: 0,
            busy: None,
            pending: VecDeque::new(),
        }
    }
}

impl DirEntry {
    pub fn sharer_list(&self) -> Vec<usize> {
        (0..64).filter(|i| self.sharers & (1 << i) != 0).collect()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Crit bit of the transaction holding the block Busy.
    pub fn busy_crit(&self) -> Option<bool> {
        self.busy.map(|b| b.crit)
    }
}

/// The directory slice of one home node. Blocks never touched are Invalid
/// with a zero data token.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Directory {
    node: usize,
    crit_forwards: bool,
    entries: BTreeMap<Addr, DirEntry>,
}

type DirResult = Result<Vec<Outgoing>, String>;

impl Directory {
    pub fn new(node: usize, crit_forwards: bool) -> Self {
        Directory {
            node,
            crit_forwards,
            entries: BTreeMap::new(),
        }
    }

    pub fn entry(&self, addr: Addr) -> Option<&DirEntry> {
        self.entries.get(&addr)
    }

    pub fn state_of(&self, addr: Addr) -> DirState {
        self.entries
            .get(&addr)
            .map_or(DirState::Invalid, |e| e.state)
    }

    pub fn memory_of(&self, addr: Addr) -> u64 {
        self.entries.get(&addr).map_or(0, |e| e.memory)
    }

    pub fn is_busy(&self, addr: Addr) -> bool {
        self.state_of(addr) == DirState::Busy
    }

    pub fn handle(&mut self, msg: &ProtocolMsg) -> DirResult {
        let entry = self.entries.entry(msg.addr).or_default();
        match msg.msg_type {
            MsgType::GetS | MsgType::GetX | MsgType::PutX => {
                if entry.state == DirState::Busy {
                    entry.pending.push_back(*msg);
                    return Ok(Vec::new());
                }
                let node = self.node;
                let crit_forwards = self.crit_forwards;
                process(node, crit_forwards, self.entries.get_mut(&msg.addr).unwrap(), msg)
            }
            MsgType::Unblock => {
                let Some(busy) = entry.busy else {
                    return Err(format!(
                        "dir {}: Unblock for {:#x} in state {}",
                        self.node,
                        msg.addr,
                        entry.state.name()
                    ));
                };
                if busy.requester != msg.src || busy.txn != msg.txn {
                    return Err(format!(
                        "dir {}: Unblock from {} for {:#x} but busy with {:?}",
                        self.node, msg.src, msg.addr, busy.txn
                    ));
                }
                let r = busy.requester;
                match busy.settle {
                    Settle::Exclusive => {
                        entry.state = DirState::Exclusive;
                        entry.owner = Some(r);
                        entry.sharers = 0;
                    }
                    Settle::AddSharer => {
                        entry.state = DirState::Shared;
                        entry.sharers |= 1 << r;
                    }
                    Settle::OwnedAddSharer => {
                        entry.state = DirState::Owned;
                        entry.sharers |= 1 << r;
                    }
                }
                if busy.settle == Settle::Exclusive && busy.msg_type == MsgType::GetS && !msg.exclusive {
                    return Err(format!(
                        "dir {}: exclusive grant for {:#x} unblocked as shared",
                        self.node, msg.addr
                    ));
                }
                entry.busy = None;
                self.drain(msg.addr)
            }
            other => Err(format!(
                "dir {}: cache-side message {other} for {:#x}",
                self.node, msg.addr
            )),
        }
    }

    /// Services queued requests until the block goes Busy again.
    fn drain(&mut self, addr: Addr) -> DirResult {
        let node = self.node;
        let crit_forwards = self.crit_forwards;
        let entry = self.entries.get_mut(&addr).expect("entry exists");
        let mut out = Vec::new();
        while entry.state != DirState::Busy {
            let Some(next) = entry.pending.pop_front() else {
                break;
            };
            out.extend(process(node, crit_forwards, entry, &next)?);
        }
        Ok(out)
    }
}

fn process(node: usize, crit_forwards: bool, e: &mut DirEntry, req: &ProtocolMsg) -> DirResult {
    let r = req.requester;
    let send = |msg_type: MsgType, dst: usize, acks: u32, data: u64, exclusive: bool, delay: Delay| {
        let crit = if msg_type.class() == crate::network::MessageClass::Forward {
            req.crit && crit_forwards
        } else {
            req.crit
        };
        Outgoing {
            msg: ProtocolMsg {
                msg_type,
                addr: req.addr,
                src: node,
                dst,
                requester: r,
                acks,
                data,
                exclusive,
                crit,
                txn: req.txn,
                txn_crit: req.txn_crit,
            },
            delay,
        }
    };
    let busy = |e: &mut DirEntry, settle: Settle| {
        e.state = DirState::Busy;
        e.busy = Some(BusyInfo {
            requester: r,
            msg_type: req.msg_type,
            crit: req.crit,
            txn: req.txn,
            settle,
        });
    };
    let unexpected = |e: &DirEntry| {
        Err(format!(
            "dir {node}: {} from {r} for {:#x} in state {} (owner {:?})",
            req.msg_type,
            req.addr,
            e.state.name(),
            e.owner
        ))
    };
    let mem = e.memory;
    let mut out = Vec::new();
    match (req.msg_type, e.state) {
        (MsgType::GetS, DirState::Invalid) => {
            out.push(send(MsgType::DataDir, r, 0, mem, true, Delay::Memory));
            busy(e, Settle::Exclusive);
        }
        (MsgType::GetS, DirState::Shared) => {
            out.push(send(MsgType::DataDir, r, 0, mem, false, Delay::Memory));
            busy(e, Settle::AddSharer);
        }
        (MsgType::GetS, DirState::Exclusive | DirState::Owned) => {
            let owner = e.owner.expect("owned block has an owner");
            if owner == r {
                return unexpected(e);
            }
            out.push(send(MsgType::FwdGetS, owner, 0, 0, false, Delay::None));
            busy(e, Settle::OwnedAddSharer);
        }
        (MsgType::GetX, DirState::Invalid) => {
            out.push(send(MsgType::DataDir, r, 0, mem, true, Delay::Memory));
            busy(e, Settle::Exclusive);
        }
        (MsgType::GetX, DirState::Shared) => {
            let others = e.sharers & !(1 << r);
            for s in bits(others) {
                out.push(send(MsgType::Inv, s, 0, 0, false, Delay::None));
            }
            out.push(send(
                MsgType::DataDir,
                r,
                others.count_ones(),
                mem,
                true,
                Delay::Memory,
            ));
            busy(e, Settle::Exclusive);
        }
        (MsgType::GetX, DirState::Exclusive | DirState::Owned) => {
            let owner = e.owner.expect("owned block has an owner");
            let others = e.sharers & !(1 << r);
            for s in bits(others) {
                out.push(send(MsgType::Inv, s, 0, 0, false, Delay::None));
            }
            if owner == r {
                if e.state == DirState::Exclusive {
                    return unexpected(e);
                }
                // requester already owns the data; Data_Dir only carries the ack count
                out.push(send(
                    MsgType::DataDir,
                    r,
                    others.count_ones(),
                    0,
                    true,
                    Delay::None,
                ));
            } else {
                out.push(send(
                    MsgType::FwdGetX,
                    owner,
                    others.count_ones(),
                    0,
                    false,
                    Delay::None,
                ));
            }
            busy(e, Settle::Exclusive);
        }
        (MsgType::PutX, _) => {
            if e.owner == Some(r) {
                e.memory = req.data;
                e.owner = None;
                e.state = if e.sharers != 0 {
                    DirState::Shared
                } else {
                    DirState::Invalid
                };
            }
            // otherwise stale: ownership moved while the writeback was in flight
            out.push(send(MsgType::WbAck, r, 0, 0, false, Delay::None));
        }
        _ => return unexpected(e),
    }
    Ok(out)
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask & (1 << i) != 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(t: MsgType, r: usize, addr: Addr, crit: bool) -> ProtocolMsg {
        ProtocolMsg {
            msg_type: t,
            addr,
            src: r,
            dst: 0,
            requester: r,
            acks: 0,
            data: 0,
            exclusive: false,
            crit,
            txn: TxnId {
                requester: r,
                addr,
                seq: 0,
            },
            txn_crit: crit,
        }
    }

    fn unblock(r: usize, addr: Addr, exclusive: bool) -> ProtocolMsg {
        let mut m = req(MsgType::Unblock, r, addr, false);
        m.exclusive = exclusive;
        m
    }

    fn types(out: &[Outgoing]) -> Vec<(MsgType, usize)> {
        out.iter().map(|o| (o.msg.msg_type, o.msg.dst)).collect()
    }

    #[test]
    fn invalid_gets_grants_exclusive() {
        let mut d = Directory::new(0, true);
        let out = d.handle(&req(MsgType::GetS, 1, 0x40, true)).unwrap();
        assert_eq!(types(&out), vec![(MsgType::DataDir, 1)]);
        assert!(out[0].msg.exclusive && out[0].msg.crit);
        assert_eq!(out[0].delay, Delay::Memory);
        assert_eq!(d.state_of(0x40), DirState::Busy);
        d.handle(&unblock(1, 0x40, true)).unwrap();
        let e = d.entry(0x40).unwrap();
        assert_eq!(e.state, DirState::Exclusive);
        assert_eq!(e.owner, Some(1));
    }

    fn exclusive_at(d: &mut Directory, n: usize) {
        d.handle(&req(MsgType::GetS, n, 0x40, false)).unwrap();
        d.handle(&unblock(n, 0x40, true)).unwrap();
    }

    #[test]
    fn shared_getx_invalidates_sharers() {
        let mut d = Directory::new(0, true);
        d.entries.insert(
            0x40,
            DirEntry {
                state: DirState::Shared,
                sharers: 0b101,
                ..DirEntry::default()
            },
        );
        let out = d.handle(&req(MsgType::GetX, 1, 0x40, true)).unwrap();
        assert_eq!(
            types(&out),
            vec![(MsgType::Inv, 0), (MsgType::Inv, 2), (MsgType::DataDir, 1)]
        );
        assert_eq!(out[2].msg.acks, 2);
        assert!(out.iter().all(|o| o.msg.crit));
        assert_eq!(d.state_of(0x40), DirState::Busy);
        d.handle(&unblock(1, 0x40, true)).unwrap();
        let e = d.entry(0x40).unwrap();
        assert_eq!((e.state, e.owner, e.sharers), (DirState::Exclusive, Some(1), 0));
    }

    #[test]
    fn busy_queues_requests_fifo() {
        let mut d = Directory::new(0, true);
        d.handle(&req(MsgType::GetS, 1, 0x40, false)).unwrap();
        assert!(d.handle(&req(MsgType::GetS, 2, 0x40, false)).unwrap().is_empty());
        assert!(d.handle(&req(MsgType::GetX, 3, 0x40, true)).unwrap().is_empty());
        assert_eq!(d.entry(0x40).unwrap().pending_len(), 2);
        // unblocking serves node 2 next, not the critical node 3
        let out = d.handle(&unblock(1, 0x40, true)).unwrap();
        assert_eq!(types(&out), vec![(MsgType::FwdGetS, 1)]);
        assert_eq!(d.entry(0x40).unwrap().pending_len(), 1);
    }

    #[test]
    fn owned_gets_and_getx() {
        let mut d = Directory::new(0, true);
        exclusive_at(&mut d, 1);
        let out = d.handle(&req(MsgType::GetS, 2, 0x40, false)).unwrap();
        assert_eq!(types(&out), vec![(MsgType::FwdGetS, 1)]);
        d.handle(&unblock(2, 0x40, false)).unwrap();
        let e = d.entry(0x40).unwrap();
        assert_eq!((e.state, e.owner, e.sharer_list()), (DirState::Owned, Some(1), vec![2]));

        // upgrade by the owner itself only needs the ack count
        let out = d.handle(&req(MsgType::GetX, 1, 0x40, false)).unwrap();
        assert_eq!(types(&out), vec![(MsgType::Inv, 2), (MsgType::DataDir, 1)]);
        assert_eq!(out[1].msg.acks, 1);
        assert_eq!(out[1].delay, Delay::None);
    }

    #[test]
    fn forwards_follow_crit_forwards_switch() {
        let mut d = Directory::new(0, false);
        exclusive_at(&mut d, 1);
        let out = d.handle(&req(MsgType::GetX, 2, 0x40, true)).unwrap();
        assert_eq!(types(&out), vec![(MsgType::FwdGetX, 1)]);
        assert!(!out[0].msg.crit);
        assert!(out[0].msg.txn_crit);
    }

    #[test]
    fn putx_from_owner_and_stale() {
        let mut d = Directory::new(0, true);
        exclusive_at(&mut d, 1);
        let mut p = req(MsgType::PutX, 1, 0x40, false);
        p.data = 42;
        let out = d.handle(&p).unwrap();
        assert_eq!(types(&out), vec![(MsgType::WbAck, 1)]);
        assert_eq!(d.state_of(0x40), DirState::Invalid);
        assert_eq!(d.memory_of(0x40), 42);
        // stale PUTX leaves state and memory untouched
        let mut p = req(MsgType::PutX, 3, 0x40, false);
        p.data = 99;
        d.handle(&p).unwrap();
        assert_eq!(d.memory_of(0x40), 42);
    }

    #[test]
    fn protocol_violations_are_errors() {
        let mut d = Directory::new(0, true);
        assert!(d.handle(&unblock(1, 0x40, true)).is_err());
        assert!(d.handle(&req(MsgType::InvAck, 1, 0x40, false)).is_err());
    }
}

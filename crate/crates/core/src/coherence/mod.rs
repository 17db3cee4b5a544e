//! MOESI blocking-directory protocol with criticality propagation.
//!
//! Controllers are pure state machines: they consume an event and return
//! the messages to send together with a latency class. Timing is applied by
//! the caller, which lets the same code drive both the cycle-level simulator
//! and the exhaustive state-space checker.

mod cache;
mod directory;

pub use cache::{AccessOutcome, CacheController, Completion, MemOp, OpKind, Performed};
pub use directory::{DirEntry, DirState, Directory};

use std::fmt;

use crate::memhier::Addr;
use crate::network::MessageClass;

pub const BLOCK_SHIFT: u32 = 6;

/// Block-interleaved home directory for `addr`.
pub fn home_node(addr: Addr, n_nodes: usize) -> usize {
    ((addr >> BLOCK_SHIFT) % n_nodes as u64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgType {
    GetS,
    GetX,
    PutX,
    FwdGetS,
    FwdGetX,
    Inv,
    DataDir,
    DataOwner,
    InvAck,
    WbAck,
    /// Requester to directory once it holds data and every ack.
    Unblock,
}

impl MsgType {
    pub fn class(self) -> MessageClass {
        use MsgType::*;
        match self {
            GetS | GetX | PutX => MessageClass::Request,
            FwdGetS | FwdGetX | Inv => MessageClass::Forward,
            DataDir | DataOwner | InvAck | WbAck | Unblock => MessageClass::Response,
        }
    }

    pub fn carries_data(self) -> bool {
        matches!(self, MsgType::DataDir | MsgType::DataOwner | MsgType::PutX)
    }

    pub fn name(self) -> &'static str {
        use MsgType::*;
        match self {
            GetS => "GETS",
            GetX => "GETX",
            PutX => "PUTX",
            FwdGetS => "Fwd_GETS",
            FwdGetX => "Fwd_GETX",
            Inv => "INV",
            DataDir => "Data_Dir",
            DataOwner => "Data_Owner",
            InvAck => "InvAck",
            WbAck => "WB_Ack",
            Unblock => "Unblock",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Transaction identity used for audit logging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxnId {
    pub requester: usize,
    pub addr: Addr,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProtocolMsg {
    pub msg_type: MsgType,
    pub addr: Addr,
    pub src: usize,
    pub dst: usize,
    pub requester: usize,
    pub acks: u32,
    pub data: u64,
    /// Data_Dir: exclusive-clean grant. Unblock: requester ended with E/M.
    pub exclusive: bool,
    /// Selects the critical virtual networks.
    pub crit: bool,
    pub txn: TxnId,
    /// Crit bit of the core request that started the transaction.
    pub txn_crit: bool,
}

impl ProtocolMsg {
    pub fn class(&self) -> MessageClass {
        self.msg_type.class()
    }
}

/// Latency class attached to an outgoing message by the controller that
/// produced it; the simulator maps it to cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Delay {
    None,
    /// L2 array access at a remote owner or sharer.
    L2,
    /// L1 + L2 tag check before a miss leaves the node.
    MissDetect,
    /// Memory access at the home.
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Outgoing {
    pub msg: ProtocolMsg,
    pub delay: Delay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CacheState {
    M,
    O,
    E,
    S,
    I,
    IS,
    IM,
    SM,
    OM,
    MI,
    OI,
    /// Lost ownership while a writeback was in flight; waiting for the stale WB_Ack.
    II,
}

impl CacheState {
    pub fn name(self) -> &'static str {
        use CacheState::*;
        match self {
            M => "M",
            O => "O",
            E => "E",
            S => "S",
            I => "I",
            IS => "IS",
            IM => "IM",
            SM => "SM",
            OM => "OM",
            MI => "MI",
            OI => "OI",
            II => "II",
        }
    }

    pub fn is_stable(self) -> bool {
        use CacheState::*;
        matches!(self, M | O | E | S | I)
    }

    pub fn can_read(self) -> bool {
        use CacheState::*;
        matches!(self, M | O | E | S | SM | OM)
    }

    pub fn can_write(self) -> bool {
        matches!(self, CacheState::M | CacheState::E)
    }
}

impl fmt::Display for CacheState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Single-writer/multiple-reader check over every node's state for one block.
/// Upgrading states count as the permission they still hold (SM as S, OM as O).
/// Returns an empty list when the block is coherent.
pub fn check_swmr(states: &[CacheState]) -> Vec<String> {
    use CacheState::*;
    let mut report = Vec::new();
    let writers: Vec<usize> = idx_where(states, |s| matches!(s, M | E));
    let owners: Vec<usize> = idx_where(states, |s| matches!(s, O | OM));
    let readers: Vec<usize> = idx_where(states, |s| matches!(s, S | SM));
    if writers.len() > 1 {
        report.push(format!("multiple exclusive holders at nodes {writers:?}"));
    }
    if let Some(&w) = writers.first() {
        let others: Vec<usize> = owners
            .iter()
            .chain(readers.iter())
            .copied()
            .filter(|&n| n != w)
            .collect();
        if !others.is_empty() {
            report.push(format!(
                "node {w} holds {} while nodes {others:?} also hold copies",
                states[w]
            ));
        }
    }
    if owners.len() > 1 {
        report.push(format!("multiple owners at nodes {owners:?}"));
    }
    report
}

fn idx_where(states: &[CacheState], f: impl Fn(CacheState) -> bool) -> Vec<usize> {
    states
        .iter()
        .enumerate()
        .filter(|(_, s)| f(**s))
        .map(|(i, _)| i)
        .collect()
}

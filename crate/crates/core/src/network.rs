//! Link-level interconnect with six virtual networks and criticality-aware
//! arbitration at each link's input buffers.
//!
//! Routers are perfect: a message arriving at a router is enqueued on its
//! next link in the same cycle. Only links serialize, one whole message at a
//! time.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::sync::Arc;

use crate::coherence::ProtocolMsg;
use crate::topology::{NodeKind, Topology};

pub type Cycle = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageClass {
    Request,
    Forward,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VNetId(pub u8);

pub const N_VNETS: usize = 6;

impl VNetId {
    pub fn is_crit(self) -> bool {
        self.0 >= 3
    }
}

pub fn vnet_of(class: MessageClass, crit: bool) -> VNetId {
    let base = match class {
        MessageClass::Request => 0,
        MessageClass::Forward => 1,
        MessageClass::Response => 2,
    };
    VNetId(base + if crit { 3 } else { 0 })
}

/// `bandwidth` bytes per 10 cycles per link direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandwidthModel {
    pub bandwidth: u64,
}

impl BandwidthModel {
    pub fn serialization_cycles(&self, size_bytes: u64) -> Cycle {
        (size_bytes * 10).div_ceil(self.bandwidth).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub body: ProtocolMsg,
    pub size_bytes: u64,
    pub inject_cycle: Cycle,
    pub seqno: u64,
}

impl Message {
    pub fn class(&self) -> MessageClass {
        self.body.class()
    }

    pub fn crit(&self) -> bool {
        self.body.crit
    }

    pub fn vnet(&self) -> VNetId {
        vnet_of(self.class(), self.crit())
    }

    pub fn src(&self) -> usize {
        self.body.src
    }

    pub fn dst(&self) -> usize {
        self.body.dst
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub busy_cycles: u64,
    pub contention_cycles: u64,
    pub transmitted: u64,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub src: usize,
    pub dst: usize,
    dst_is_endpoint: bool,
    buffers: [VecDeque<Message>; N_VNETS],
    /// Buffered message counts, non-critical and critical vnets.
    queued: [u32; 2],
    busy_until: Cycle,
    /// Messages past arbitration, with the cycle they reach `dst`.
    in_flight: VecDeque<(Cycle, Message)>,
    pub stats: LinkStats,
}

impl Link {
    fn new(src: usize, dst: usize, dst_is_endpoint: bool) -> Self {
        Link {
            src,
            dst,
            dst_is_endpoint,
            buffers: Default::default(),
            queued: [0; 2],
            busy_until: 0,
            in_flight: VecDeque::new(),
            stats: LinkStats::default(),
        }
    }

    pub fn buffered(&self, vnet: VNetId) -> usize {
        self.buffers[vnet.0 as usize].len()
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_empty() && !self.has_buffered()
    }

    fn has_crit(&self) -> bool {
        self.queued[1] > 0
    }

    fn has_noncrit(&self) -> bool {
        self.queued[0] > 0
    }

    fn has_buffered(&self) -> bool {
        self.queued != [0, 0]
    }

    /// Queues `msg` in seqno order within its vnet. Messages can reach a link
    /// out of injection order from different upstream links; keeping every
    /// buffer sorted makes the baseline pick the same message whether or not
    /// traffic is split across crit vnets.
    pub fn enqueue(&mut self, msg: Message) {
        let v = msg.vnet();
        self.queued[v.is_crit() as usize] += 1;
        let buf = &mut self.buffers[v.0 as usize];
        let at = buf.partition_point(|m| m.seqno < msg.seqno);
        buf.insert(at, msg);
    }

    /// True when both critical and non-critical messages wait in the input
    /// buffers; counts one contention cycle when so.
    pub fn sample_contention(&mut self, _cycle: Cycle) -> bool {
        self.sample_contention_span(1)
    }

    /// Same as [`Link::sample_contention`] for `cycles` consecutive cycles
    /// over which the buffers are known not to change.
    pub fn sample_contention_span(&mut self, cycles: u64) -> bool {
        let contended = self.has_crit() && self.has_noncrit();
        if contended {
            self.stats.contention_cycles += cycles;
        }
        contended
    }

    /// Picks the next message to transmit. With `cam_enabled`, any message in
    /// the critical vnets wins; ties and the baseline use lowest seqno.
    pub fn arbitrate(
        &mut self,
        cycle: Cycle,
        cam_enabled: bool,
        bw: &BandwidthModel,
        hop_latency: Cycle,
    ) -> Option<Message> {
        if self.busy_until > cycle || !self.has_buffered() {
            return None;
        }
        let range = if cam_enabled && self.has_crit() { 3..N_VNETS } else { 0..N_VNETS };
        let vnet = range
            .filter_map(|v| self.buffers[v].front().map(|m| (m.seqno, v)))
            .min()?
            .1;
        let msg = self.buffers[vnet].pop_front().expect("non-empty");
        self.queued[(vnet >= 3) as usize] -= 1;
        let ser = bw.serialization_cycles(msg.size_bytes);
        self.busy_until = cycle + ser;
        self.stats.busy_cycles += ser;
        self.stats.transmitted += 1;
        self.in_flight.push_back((cycle + ser + hop_latency, msg));
        Some(msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkParams {
    pub bandwidth: u64,
    pub hop_latency: Cycle,
    pub msg_bytes_control: u64,
    pub msg_bytes_data: u64,
    pub cam_enabled: bool,
}

/// Network state for one simulation.
#[derive(Debug, Clone)]
pub struct Network {
    topo: Arc<Topology>,
    params: NetworkParams,
    bw: BandwidthModel,
    links: Vec<Link>,
    /// Links with buffered messages, and a membership flag per link.
    pending: Vec<usize>,
    is_pending: Vec<bool>,
    /// One entry per message on a link: (arrival cycle, link index).
    arrivals: BinaryHeap<Reverse<(Cycle, usize)>>,
    next_seqno: u64,
    /// Messages whose source and destination coincide; delivered on the next advance.
    local: Vec<Message>,
    injected: u64,
    delivered: u64,
}

impl Network {
    pub fn new(topo: Arc<Topology>, params: NetworkParams) -> Self {
        let links: Vec<Link> = topo
            .links()
            .iter()
            .map(|l| Link::new(l.src.index, l.dst.index, l.dst.kind == NodeKind::Endpoint))
            .collect();
        let n_links = links.len();
        Network {
            bw: BandwidthModel {
                bandwidth: params.bandwidth,
            },
            topo,
            params,
            links,
            pending: Vec::new(),
            is_pending: vec![false; n_links],
            arrivals: BinaryHeap::new(),
            next_seqno: 0,
            local: Vec::new(),
            injected: 0,
            delivered: 0,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn size_of(&self, body: &ProtocolMsg) -> u64 {
        if body.msg_type.carries_data() {
            self.params.msg_bytes_data
        } else {
            self.params.msg_bytes_control
        }
    }

    /// Assigns the next seqno and queues `body` at the first link of its route.
    /// Returns the seqno.
    pub fn inject(&mut self, body: ProtocolMsg, cycle: Cycle) -> u64 {
        let seqno = self.next_seqno;
        self.next_seqno += 1;
        self.injected += 1;
        let msg = Message {
            size_bytes: self.size_of(&body),
            body,
            inject_cycle: cycle,
            seqno,
        };
        if body.src == body.dst {
            self.local.push(msg);
        } else {
            let l = self.topo.route_index(body.src, body.dst);
            self.enqueue(l, msg);
        }
        seqno
    }

    fn enqueue(&mut self, link: usize, msg: Message) {
        self.links[link].enqueue(msg);
        if !self.is_pending[link] {
            self.is_pending[link] = true;
            self.pending.push(link);
        }
    }

    pub fn sample_contention(&mut self, cycles: u64) {
        for &l in &self.pending {
            self.links[l].sample_contention_span(cycles);
        }
    }

    /// Moves messages whose hop completes at `cycle` to their next link or
    /// delivers them, then arbitrates every free link. Returns deliveries in
    /// a deterministic order.
    pub fn advance(&mut self, cycle: Cycle) -> Vec<Message> {
        let mut delivered: Vec<Message> = std::mem::take(&mut self.local);
        // heap order (cycle, link index) then per-link FIFO keeps arrivals deterministic
        while let Some(&Reverse((at, i))) = self.arrivals.peek() {
            if at > cycle {
                break;
            }
            debug_assert_eq!(at, cycle, "missed an arrival");
            self.arrivals.pop();
            let (_, msg) = self.links[i].in_flight.pop_front().expect("arrival recorded");
            let here = self.links[i].dst;
            if here == msg.dst() && self.links[i].dst_is_endpoint {
                delivered.push(msg);
            } else {
                let next = self.topo.route_index(here, msg.dst());
                self.enqueue(next, msg);
            }
        }
        let (cam, hop) = (self.params.cam_enabled, self.params.hop_latency);
        let mut k = 0;
        while k < self.pending.len() {
            let i = self.pending[k];
            let link = &mut self.links[i];
            if link.arbitrate(cycle, cam, &self.bw, hop).is_some() {
                let at = link.in_flight.back().expect("just sent").0;
                self.arrivals.push(Reverse((at, i)));
            }
            if link.has_buffered() {
                k += 1;
            } else {
                self.is_pending[i] = false;
                self.pending.swap_remove(k);
            }
        }
        self.delivered += delivered.len() as u64;
        delivered
    }

    /// Earliest cycle after `now` at which the network changes state.
    pub fn next_event(&self, now: Cycle) -> Option<Cycle> {
        if !self.local.is_empty() {
            return Some(now + 1);
        }
        let arrival = self.arrivals.peek().map(|Reverse((c, _))| *c);
        self.pending
            .iter()
            .map(|&i| self.links[i].busy_until.max(now + 1))
            .chain(arrival)
            .min()
    }

    pub fn in_transit(&self) -> u64 {
        self.injected - self.delivered
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }
}

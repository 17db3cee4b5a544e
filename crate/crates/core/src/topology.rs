//! Interconnect graphs (crossbar, 2D torus, hypercube) with deterministic
//! minimal routing.
//!
//! Endpoints are numbered `0..n_endpoints`. In the torus and hypercube every
//! endpoint is also a router; the crossbar adds one central router with index
//! `n_endpoints`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{config_err, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyKind {
    Crossbar,
    Torus2d,
    Hypercube,
}

impl TopologyKind {
    pub const ALL: [TopologyKind; 3] = [
        TopologyKind::Crossbar,
        TopologyKind::Torus2d,
        TopologyKind::Hypercube,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Crossbar => "crossbar",
            TopologyKind::Torus2d => "torus2d",
            TopologyKind::Hypercube => "hypercube",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TopologyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crossbar" => Ok(TopologyKind::Crossbar),
            "torus2d" => Ok(TopologyKind::Torus2d),
            "hypercube" => Ok(TopologyKind::Hypercube),
            other => config_err(format!(
                "unknown topology `{other}` (expected crossbar, torus2d or hypercube)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Endpoint,
    Router,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub index: usize,
    pub kind: NodeKind,
}

impl NodeId {
    pub fn endpoint(index: usize) -> Self {
        NodeId {
            index,
            kind: NodeKind::Endpoint,
        }
    }
}

/// A unidirectional link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId {
    pub src: NodeId,
    pub dst: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Crossbar,
    Torus { width: usize, height: usize },
    Hypercube { dim: u32 },
}

#[derive(Debug, Clone)]
pub struct Topology {
    kind: TopologyKind,
    n_endpoints: usize,
    shape: Shape,
    nodes: Vec<NodeId>,
    links: Vec<LinkId>,
    link_index: HashMap<(usize, usize), usize>,
    /// `route[at * n_nodes + dest]` is the index of the next link, or `NO_LINK`.
    route: Vec<u32>,
}

const NO_LINK: u32 = u32::MAX;

/// Squarest factorization `width × height` with `width ≥ height ≥ 2`.
pub fn torus_dims(n: usize) -> Option<(usize, usize)> {
    let mut best = None;
    let mut h = 2;
    while h * h <= n {
        if n % h == 0 {
            best = Some((n / h, h));
        }
        h += 1;
    }
    best
}

impl Topology {
    pub fn build(kind: TopologyKind, n_endpoints: usize) -> Result<Topology> {
        if n_endpoints < 2 {
            return config_err(format!(
                "{kind} needs at least 2 endpoints, got {n_endpoints}"
            ));
        }
        let shape = match kind {
            TopologyKind::Crossbar => Shape::Crossbar,
            TopologyKind::Torus2d => match torus_dims(n_endpoints) {
                Some((width, height)) => Shape::Torus { width, height },
                None => {
                    return config_err(format!(
                        "torus2d needs n_endpoints = W×H with W,H ≥ 2; {n_endpoints} has no such factorization"
                    ))
                }
            },
            TopologyKind::Hypercube => {
                if !n_endpoints.is_power_of_two() {
                    return config_err(format!(
                        "hypercube needs a power-of-two endpoint count, got {n_endpoints}"
                    ));
                }
                Shape::Hypercube {
                    dim: n_endpoints.trailing_zeros(),
                }
            }
        };

        let mut nodes: Vec<NodeId> = (0..n_endpoints).map(NodeId::endpoint).collect();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        match shape {
            Shape::Crossbar => {
                let router = n_endpoints;
                nodes.push(NodeId {
                    index: router,
                    kind: NodeKind::Router,
                });
                for e in 0..n_endpoints {
                    pairs.push((e, router));
                    pairs.push((router, e));
                }
            }
            Shape::Torus { width, height } => {
                for i in 0..n_endpoints {
                    let (x, y) = (i % width, i / width);
                    let mut nbrs = vec![
                        (x + 1) % width + y * width,
                        (x + width - 1) % width + y * width,
                        x + ((y + 1) % height) * width,
                        x + ((y + height - 1) % height) * width,
                    ];
                    // W or H of 2 makes the wraparound coincide with the direct link
                    nbrs.sort_unstable();
                    nbrs.dedup();
                    pairs.extend(nbrs.into_iter().map(|j| (i, j)));
                }
            }
            Shape::Hypercube { dim } => {
                for i in 0..n_endpoints {
                    for k in 0..dim {
                        pairs.push((i, i ^ (1 << k)));
                    }
                }
            }
        }

        let mut links = Vec::with_capacity(pairs.len());
        let mut link_index = HashMap::with_capacity(pairs.len());
        for (s, d) in pairs {
            let id = LinkId {
                src: nodes[s],
                dst: nodes[d],
            };
            if link_index.insert((s, d), links.len()).is_some() {
                return Err(SimError::Internal(format!("duplicate link {s}->{d}")));
            }
            links.push(id);
        }

        let mut topo = Topology {
            kind,
            n_endpoints,
            shape,
            nodes,
            links,
            link_index,
            route: Vec::new(),
        };
        topo.route = topo.build_route_table()?;
        Ok(topo)
    }

    fn build_route_table(&self) -> Result<Vec<u32>> {
        let n = self.nodes.len();
        let mut route = vec![NO_LINK; n * n];
        for at in 0..n {
            for dest in 0..n {
                if at == dest {
                    continue;
                }
                let next = self.route_rule(at, dest);
                let idx = self.link_index.get(&(at, next)).ok_or_else(|| {
                    SimError::Internal(format!("routing chose missing link {at}->{next}"))
                })?;
                route[at * n + dest] = *idx as u32;
            }
        }
        Ok(route)
    }

    /// Next node on the minimal deterministic route from `at` to `dest`.
    fn route_rule(&self, at: usize, dest: usize) -> usize {
        match self.shape {
            Shape::Crossbar => {
                let router = self.n_endpoints;
                if at == router {
                    dest
                } else {
                    router
                }
            }
            Shape::Torus { width, height } => {
                let (x, y) = (at % width, at / width);
                let (dx, dy) = (dest % width, dest / width);
                if x != dx {
                    let nx = ring_step(x, dx, width);
                    nx + y * width
                } else {
                    let ny = ring_step(y, dy, height);
                    x + ny * width
                }
            }
            Shape::Hypercube { .. } => {
                let diff = at ^ dest;
                at ^ (1 << diff.trailing_zeros())
            }
        }
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n_endpoints(&self) -> usize {
        self.n_endpoints
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, idx: usize) -> LinkId {
        self.links[idx]
    }

    pub fn link_index(&self, link: LinkId) -> Option<usize> {
        self.link_index
            .get(&(link.src.index, link.dst.index))
            .copied()
    }

    /// `(width, height)` for a torus.
    pub fn torus_shape(&self) -> Option<(usize, usize)> {
        match self.shape {
            Shape::Torus { width, height } => Some((width, height)),
            _ => None,
        }
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        match self.nodes.get(node.index) {
            Some(n) if *n == node => Ok(()),
            _ => Err(SimError::Internal(format!(
                "node {node:?} is not part of this {} topology",
                self.kind
            ))),
        }
    }

    pub fn next_hop(&self, at: NodeId, dest: NodeId) -> Result<LinkId> {
        self.next_link_index(at, dest).map(|i| self.links[i])
    }

    pub fn next_link_index(&self, at: NodeId, dest: NodeId) -> Result<usize> {
        self.check_node(at)?;
        self.check_node(dest)?;
        if at == dest {
            return Err(SimError::Internal(format!(
                "next_hop called with at == dest ({at:?})"
            )));
        }
        Ok(self.route[at.index * self.nodes.len() + dest.index] as usize)
    }

    /// Hot-path variant of [`Topology::next_link_index`] on raw node indices.
    #[inline]
    pub(crate) fn route_index(&self, at: usize, dest: usize) -> usize {
        debug_assert_ne!(at, dest);
        self.route[at * self.nodes.len() + dest] as usize
    }

    pub fn min_hops(&self, src: NodeId, dest: NodeId) -> Result<usize> {
        self.check_node(src)?;
        self.check_node(dest)?;
        let (a, b) = (src.index, dest.index);
        if a == b {
            return Ok(0);
        }
        Ok(match self.shape {
            Shape::Crossbar => {
                if a == self.n_endpoints || b == self.n_endpoints {
                    1
                } else {
                    2
                }
            }
            Shape::Torus { width, height } => {
                ring_distance(a % width, b % width, width)
                    + ring_distance(a / width, b / width, height)
            }
            Shape::Hypercube { .. } => (a ^ b).count_ones() as usize,
        })
    }
}

fn ring_distance(a: usize, b: usize, len: usize) -> usize {
    let fwd = (b + len - a) % len;
    fwd.min(len - fwd)
}

/// One step along a ring of `len` from `from` toward `to`, taking the shorter
/// direction; ties go toward increasing coordinate.
fn ring_step(from: usize, to: usize, len: usize) -> usize {
    let fwd = (to + len - from) % len;
    if fwd <= len - fwd {
        (from + 1) % len
    } else {
        (from + len - 1) % len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn bfs(topo: &Topology, src: usize) -> Vec<usize> {
        let n = topo.nodes().len();
        let mut adj = vec![Vec::new(); n];
        for l in topo.links() {
            adj[l.src.index].push(l.dst.index);
        }
        let mut dist = vec![usize::MAX; n];
        dist[src] = 0;
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        dist
    }

    #[test]
    fn crossbar_counts() {
        let t = Topology::build(TopologyKind::Crossbar, 4).unwrap();
        assert_eq!(t.nodes().len(), 5);
        assert_eq!(t.n_links(), 8);
        assert_eq!(t.nodes()[4].kind, NodeKind::Router);
    }

    #[test]
    fn hypercube_counts_by_pair_enumeration() {
        let t = Topology::build(TopologyKind::Hypercube, 16).unwrap();
        assert_eq!(t.nodes().len(), 16);
        let mut pairs = 0;
        for i in 0..16usize {
            for j in 0..16usize {
                if (i ^ j).count_ones() == 1 {
                    pairs += 1;
                }
            }
        }
        assert_eq!(pairs, 64);
        assert_eq!(t.n_links(), 64);
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(matches!(
            Topology::build(TopologyKind::Hypercube, 12),
            Err(SimError::Config(_))
        ));
        assert!(Topology::build(TopologyKind::Crossbar, 1).is_err());
        assert!(Topology::build(TopologyKind::Torus2d, 7).is_err());
        assert!(Topology::build(TopologyKind::Torus2d, 2).is_err());
    }

    #[test]
    fn torus_shapes() {
        assert_eq!(torus_dims(16), Some((4, 4)));
        assert_eq!(torus_dims(4), Some((2, 2)));
        assert_eq!(torus_dims(8), Some((4, 2)));
        let t = Topology::build(TopologyKind::Torus2d, 4).unwrap();
        // collapsed wraparound: each node has two distinct neighbours
        assert_eq!(t.n_links(), 8);
        let t = Topology::build(TopologyKind::Torus2d, 16).unwrap();
        assert_eq!(t.n_links(), 64);
    }

    #[test]
    fn next_hop_examples() {
        let xb = Topology::build(TopologyKind::Crossbar, 8).unwrap();
        let l = xb.next_hop(NodeId::endpoint(3), NodeId::endpoint(7)).unwrap();
        assert_eq!(l.src, NodeId::endpoint(3));
        assert_eq!(l.dst.kind, NodeKind::Router);

        let torus = Topology::build(TopologyKind::Torus2d, 16).unwrap();
        // (0,0) -> (2,3) = node 14; tie in x goes toward increasing x
        let l = torus
            .next_hop(NodeId::endpoint(0), NodeId::endpoint(14))
            .unwrap();
        assert_eq!(l.dst, NodeId::endpoint(1));

        let hc = Topology::build(TopologyKind::Hypercube, 16).unwrap();
        let l = hc.next_hop(NodeId::endpoint(0), NodeId::endpoint(11)).unwrap();
        assert_eq!(l.dst, NodeId::endpoint(1));
    }

    #[test]
    fn min_hops_examples() {
        let torus = Topology::build(TopologyKind::Torus2d, 16).unwrap();
        let hc = Topology::build(TopologyKind::Hypercube, 16).unwrap();
        let xb = Topology::build(TopologyKind::Crossbar, 16).unwrap();
        let e = NodeId::endpoint;
        assert_eq!(torus.min_hops(e(0), e(14)).unwrap(), 3);
        assert_eq!(bfs(&torus, 0)[14], 3);
        assert_eq!(hc.min_hops(e(0), e(11)).unwrap(), 3);
        assert_eq!(xb.min_hops(e(2), e(9)).unwrap(), 2);
        for t in [&torus, &hc, &xb] {
            assert_eq!(t.min_hops(e(5), e(5)).unwrap(), 0);
        }
    }

    #[test]
    fn routes_realize_bfs_distance() {
        for (kind, n) in [
            (TopologyKind::Crossbar, 16),
            (TopologyKind::Torus2d, 16),
            (TopologyKind::Hypercube, 16),
            (TopologyKind::Torus2d, 8),
            (TopologyKind::Torus2d, 4),
        ] {
            let t = Topology::build(kind, n).unwrap();
            let nodes = t.nodes().to_vec();
            for &s in &nodes {
                let dist = bfs(&t, s.index);
                for &d in &nodes {
                    let hops = t.min_hops(s, d).unwrap();
                    assert_eq!(hops, dist[d.index], "{kind} {s:?}->{d:?}");
                    let mut at = s;
                    let mut steps = 0;
                    while at != d {
                        let l = t.next_hop(at, d).unwrap();
                        assert_eq!(l.src, at);
                        at = l.dst;
                        steps += 1;
                        assert!(steps <= nodes.len());
                    }
                    assert_eq!(steps, hops);
                }
            }
        }
    }

    #[test]
    fn small_torus_matches_small_hypercube() {
        let t = Topology::build(TopologyKind::Torus2d, 4).unwrap();
        let h = Topology::build(TopologyKind::Hypercube, 4).unwrap();
        for a in 0..4 {
            assert_eq!(bfs(&t, a), bfs(&h, a));
        }
    }

    #[test]
    fn parses_kind_names() {
        for k in TopologyKind::ALL {
            assert_eq!(k.name().parse::<TopologyKind>().unwrap(), k);
        }
        assert!("Crossbar".parse::<TopologyKind>().is_err());
    }
}

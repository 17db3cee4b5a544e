//! Set-associative cache arrays with LRU replacement.


use crate::error::{config_err, Result};

pub type Addr = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheGeometry {
    pub capacity_bytes: u64,
    pub associativity: u64,
    pub block_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AddrParts {
    pub tag: u64,
    pub set: u64,
    pub offset: u64,
}

impl CacheGeometry {
    pub fn new(capacity_bytes: u64, associativity: u64, block_bytes: u64) -> Result<Self> {
        for (name, v) in [
            ("capacity", capacity_bytes),
            ("associativity", associativity),
            ("block size", block_bytes),
        ] {
            if v == 0 || !v.is_power_of_two() {
                return config_err(format!("cache {name} must be a power of two, got {v}"));
            }
        }
        if capacity_bytes < associativity * block_bytes {
            return config_err(format!(
                "cache of {capacity_bytes} B cannot hold {associativity} ways of {block_bytes} B"
            ));
        }
        Ok(CacheGeometry {
            capacity_bytes,
            associativity,
            block_bytes,
        })
    }

    pub fn n_sets(&self) -> u64 {
        self.capacity_bytes / (self.associativity * self.block_bytes)
    }

    /// Splits `addr`; `mem_bytes` bounds the physical address space.
    pub fn split_address(&self, addr: Addr, mem_bytes: u64) -> Result<AddrParts> {
        if addr >= mem_bytes {
            return config_err(format!(
                "address {addr:#x} outside the {mem_bytes:#x}-byte memory"
            ));
        }
        Ok(self.split(addr))
    }

    #[inline]
    pub fn split(&self, addr: Addr) -> AddrParts {
        let block = addr / self.block_bytes;
        AddrParts {
            tag: block / self.n_sets(),
            set: block % self.n_sets(),
            offset: addr % self.block_bytes,
        }
    }

    #[inline]
    pub fn block_addr(&self, addr: Addr) -> Addr {
        addr & !(self.block_bytes - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit(usize),
    Miss,
}

/// Cache array keyed by block address. Each set keeps its entries in LRU
/// order, most recently used first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheArray<T> {
    geom: CacheGeometry,
    sets: Vec<Vec<(u64, T)>>,
}

impl<T> CacheArray<T> {
    pub fn new(geom: CacheGeometry) -> Self {
        let sets = std::iter::repeat_with(Vec::new)
            .take(geom.n_sets() as usize)
            .collect();
        CacheArray { geom, sets }
    }

    pub fn geometry(&self) -> &CacheGeometry {
        &self.geom
    }

    fn block_from(&self, tag: u64, set: u64) -> Addr {
        (tag * self.geom.n_sets() + set) * self.geom.block_bytes
    }

    /// Looks up `addr` and, on a hit, moves it to the MRU position. The
    /// returned way is the entry's position before promotion.
    pub fn lookup(&mut self, addr: Addr) -> Lookup {
        let p = self.geom.split(addr);
        let set = &mut self.sets[p.set as usize];
        match set.iter().position(|(t, _)| *t == p.tag) {
            Some(way) => {
                let e = set.remove(way);
                set.insert(0, e);
                Lookup::Hit(way)
            }
            None => Lookup::Miss,
        }
    }

    /// Access without touching LRU order.
    pub fn peek(&self, addr: Addr) -> Option<&T> {
        let p = self.geom.split(addr);
        self.sets[p.set as usize]
            .iter()
            .find(|(t, _)| *t == p.tag)
            .map(|(_, v)| v)
    }

    pub fn peek_mut(&mut self, addr: Addr) -> Option<&mut T> {
        let p = self.geom.split(addr);
        self.sets[p.set as usize]
            .iter_mut()
            .find(|(t, _)| *t == p.tag)
            .map(|(_, v)| v)
    }

    pub fn contains(&self, addr: Addr) -> bool {
        self.peek(addr).is_some()
    }

    pub fn is_set_full(&self, addr: Addr) -> bool {
        let p = self.geom.split(addr);
        self.sets[p.set as usize].len() as u64 >= self.geom.associativity
    }

    /// LRU entry of the set `addr` maps to, if the set is full, as
    /// `(way, block address)`.
    pub fn select_victim(&self, addr: Addr) -> Option<(usize, Addr)> {
        self.select_victim_where(addr, |_| true)
    }

    /// Least recently used entry satisfying `eligible`, only when the set is full.
    pub fn select_victim_where(
        &self,
        addr: Addr,
        eligible: impl Fn(&T) -> bool,
    ) -> Option<(usize, Addr)> {
        let p = self.geom.split(addr);
        let set = &self.sets[p.set as usize];
        if (set.len() as u64) < self.geom.associativity {
            return None;
        }
        set.iter()
            .enumerate()
            .rev()
            .find(|(_, (_, v))| eligible(v))
            .map(|(way, (tag, _))| (way, self.block_from(*tag, p.set)))
    }

    /// Installs `addr` at MRU. The set must have a free way.
    pub fn install(&mut self, addr: Addr, value: T) {
        let p = self.geom.split(addr);
        let assoc = self.geom.associativity;
        let set = &mut self.sets[p.set as usize];
        debug_assert!(!set.iter().any(|(t, _)| *t == p.tag), "duplicate tag");
        assert!((set.len() as u64) < assoc, "install into a full set");
        set.insert(0, (p.tag, value));
    }

    pub fn remove(&mut self, addr: Addr) -> Option<T> {
        let p = self.geom.split(addr);
        let set = &mut self.sets[p.set as usize];
        let way = set.iter().position(|(t, _)| *t == p.tag)?;
        Some(set.remove(way).1)
    }

    /// Resident block addresses of one set in LRU order (MRU first).
    pub fn set_order(&self, addr: Addr) -> Vec<Addr> {
        let p = self.geom.split(addr);
        self.sets[p.set as usize]
            .iter()
            .map(|(t, _)| self.block_from(*t, p.set))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Addr, &T)> + '_ {
        self.sets.iter().enumerate().flat_map(move |(set, ways)| {
            ways.iter()
                .map(move |(tag, v)| (self.block_from(*tag, set as u64), v))
        })
    }

    pub fn max_set_occupancy(&self) -> usize {
        self.sets.iter().map(Vec::len).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MEM: u64 = 512 << 20;

    fn l1() -> CacheGeometry {
        CacheGeometry::new(256 << 10, 4, 64).unwrap()
    }

    #[test]
    fn geometry_sets() {
        assert_eq!(l1().n_sets(), 1024);
        assert_eq!(CacheGeometry::new(16 << 20, 4, 64).unwrap().n_sets(), 65536);
        assert!(CacheGeometry::new(3000, 4, 64).is_err());
    }

    #[test]
    fn split_examples() {
        let g = l1();
        assert_eq!(
            g.split_address(0x12345, MEM).unwrap(),
            AddrParts {
                tag: 0x1,
                set: 0x08D,
                offset: 0x05
            }
        );
        assert_eq!(
            g.split_address(0, MEM).unwrap(),
            AddrParts {
                tag: 0,
                set: 0,
                offset: 0
            }
        );
        let a = g.split(0x1000);
        let b = g.split(0x1001);
        assert_eq!((a.tag, a.set), (b.tag, b.set));
        assert!(g.split_address(MEM, MEM).is_err());
    }

    fn same_set_addrs(g: &CacheGeometry, n: u64) -> Vec<Addr> {
        let stride = g.n_sets() * g.block_bytes;
        (0..n).map(|i| 0x40 + i * stride).collect()
    }

    #[test]
    fn lru_eviction_on_fifth_install() {
        let g = l1();
        let mut c = CacheArray::new(g);
        assert_eq!(c.lookup(0x40), Lookup::Miss);
        let addrs = same_set_addrs(&g, 5);
        for &a in &addrs[..4] {
            c.install(a, ());
        }
        assert!(matches!(c.lookup(addrs[3]), Lookup::Hit(_)));
        // order is now D, C, B, A -> victim A
        let (_, victim) = c.select_victim(addrs[4]).unwrap();
        assert_eq!(victim, addrs[0]);
        c.remove(victim);
        c.install(addrs[4], ());
        assert_eq!(c.lookup(addrs[0]), Lookup::Miss);
    }

    #[test]
    fn retouch_changes_victim() {
        let g = l1();
        let mut c = CacheArray::new(g);
        let addrs = same_set_addrs(&g, 4);
        for &a in &addrs {
            c.install(a, ());
        }
        assert_eq!(c.select_victim(addrs[0]).unwrap().1, addrs[0]);
        c.lookup(addrs[0]);
        assert_eq!(c.select_victim(addrs[0]).unwrap().1, addrs[1]);
    }

    #[test]
    fn non_full_set_has_no_victim() {
        let g = l1();
        let mut c = CacheArray::new(g);
        c.install(0x40, ());
        assert!(c.select_victim(0x40).is_none());
    }

    proptest! {
        #[test]
        fn occupancy_and_order_invariants(ops in proptest::collection::vec((0u64..12, any::<bool>()), 1..200)) {
            let g = CacheGeometry::new(1024, 4, 64).unwrap(); // 4 sets
            let mut c: CacheArray<()> = CacheArray::new(g);
            for (blk, touch) in ops {
                let addr = blk * 64;
                if c.lookup(addr) == Lookup::Miss || !touch {
                    if !c.contains(addr) {
                        if let Some((_, v)) = c.select_victim(addr) {
                            c.remove(v);
                        }
                        c.install(addr, ());
                    }
                }
                prop_assert!(c.max_set_occupancy() <= 4);
                let order = c.set_order(addr);
                let mut dedup = order.clone();
                dedup.sort();
                dedup.dedup();
                prop_assert_eq!(dedup.len(), order.len());
            }
        }
    }
}

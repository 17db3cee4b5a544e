use std::fmt::Write as _;
use std::path::Path;

use crate::error::{config_err, Result, SimError};
use crate::memhier::CacheGeometry;
use crate::topology::{Topology, TopologyKind};
use crate::workload::MicrobenchParams;

/// Every knob of a run. Defaults reproduce the baseline machine: 16
/// in-order processors, 256 KB 4-way L1, 16 MB 4-way L2, 64 B blocks,
/// 512 MB memory, link bandwidth 125.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config {
    pub topology: TopologyKind,
    pub procs: usize,

    pub l1_kb: u64,
    pub l1_assoc: u64,
    pub l2_kb: u64,
    pub l2_assoc: u64,
    pub block_bytes: u64,
    pub mem_mb: u64,

    pub lat_l1: u64,
    pub lat_l2: u64,
    pub lat_mem: u64,

    pub bandwidth: u64,
    pub hop_latency: u64,
    pub msg_bytes_control: u64,
    pub msg_bytes_data: u64,

    pub cam: bool,
    /// Forward-class messages inherit the transaction's crit bit.
    pub crit_forwards: bool,
    /// Crit markers raise the core's crit flag; off tags every request non-critical.
    pub crit_tagging: bool,

    pub counters: usize,
    pub iters: usize,
    pub noncrit_work: usize,

    pub seed: u64,
    /// Maximum random extra cycles added to each controller output (0 = off).
    pub jitter: u64,
    pub cycle_budget: u64,
    /// Longest a core may wait on one memory request.
    pub watchdog: u64,
    /// Cycles between full inclusion scans (0 = only at the end).
    pub inclusion_interval: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            topology: TopologyKind::Crossbar,
            procs: 16,
            l1_kb: 256,
            l1_assoc: 4,
            l2_kb: 16384,
            l2_assoc: 4,
            block_bytes: 64,
            mem_mb: 512,
            lat_l1: 1,
            lat_l2: 10,
            lat_mem: 160,
            bandwidth: 125,
            hop_latency: 1,
            msg_bytes_control: 8,
            msg_bytes_data: 72,
            cam: false,
            crit_forwards: true,
            crit_tagging: true,
            counters: 300,
            iters: 50,
            noncrit_work: 1000,
            seed: 0,
            jitter: 0,
            cycle_budget: 500_000_000,
            watchdog: 1_000_000,
            inclusion_interval: 0,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => config_err(format!("{key}: expected on/off, got `{v}`")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.replace('_', "")
        .parse()
        .map_err(|_| SimError::Config(format!("{key}: `{v}` is not a valid number")))
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "topology" => self.topology = v.parse()?,
            "procs" | "threads" => self.procs = parse_num(key, v)?,
            "l1_kb" => self.l1_kb = parse_num(key, v)?,
            "l1_assoc" => self.l1_assoc = parse_num(key, v)?,
            "l2_kb" => self.l2_kb = parse_num(key, v)?,
            "l2_assoc" => self.l2_assoc = parse_num(key, v)?,
            "block_bytes" => self.block_bytes = parse_num(key, v)?,
            "mem_mb" => self.mem_mb = parse_num(key, v)?,
            "lat_l1" => self.lat_l1 = parse_num(key, v)?,
            "lat_l2" => self.lat_l2 = parse_num(key, v)?,
            "lat_mem" => self.lat_mem = parse_num(key, v)?,
            "bandwidth" => self.bandwidth = parse_num(key, v)?,
            "hop_latency" => self.hop_latency = parse_num(key, v)?,
            "msg_bytes_control" => self.msg_bytes_control = parse_num(key, v)?,
            "msg_bytes_data" => self.msg_bytes_data = parse_num(key, v)?,
            "cam" => self.cam = parse_bool(key, v)?,
            "crit_forwards" => self.crit_forwards = parse_bool(key, v)?,
            "crit_tagging" => self.crit_tagging = parse_bool(key, v)?,
            "counters" => self.counters = parse_num(key, v)?,
            "iters" => self.iters = parse_num(key, v)?,
            "noncrit_work" => self.noncrit_work = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "jitter" => self.jitter = parse_num(key, v)?,
            "cycle_budget" => self.cycle_budget = parse_num(key, v)?,
            "watchdog" => self.watchdog = parse_num(key, v)?,
            "inclusion_interval" => self.inclusion_interval = parse_num(key, v)?,
            other => return config_err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return config_err(format!("line {}: expected `key = value`, got `{raw}`", n + 1));
            };
            self.set(k, v)
                .map_err(|e| SimError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Config::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Serializes every key in the `key = value` format `apply_text` reads.
    pub fn to_text(&self) -> String {
        let b = |x: bool| if x { "on" } else { "off" };
        let mut s = String::new();
        let _ = writeln!(s, "topology = {}", self.topology);
        for (k, v) in [
            ("procs", self.procs as u64),
            ("l1_kb", self.l1_kb),
            ("l1_assoc", self.l1_assoc),
            ("l2_kb", self.l2_kb),
            ("l2_assoc", self.l2_assoc),
            ("block_bytes", self.block_bytes),
            ("mem_mb", self.mem_mb),
            ("lat_l1", self.lat_l1),
            ("lat_l2", self.lat_l2),
            ("lat_mem", self.lat_mem),
            ("bandwidth", self.bandwidth),
            ("hop_latency", self.hop_latency),
            ("msg_bytes_control", self.msg_bytes_control),
            ("msg_bytes_data", self.msg_bytes_data),
            ("counters", self.counters as u64),
            ("iters", self.iters as u64),
            ("noncrit_work", self.noncrit_work as u64),
            ("seed", self.seed),
            ("jitter", self.jitter),
            ("cycle_budget", self.cycle_budget),
            ("watchdog", self.watchdog),
            ("inclusion_interval", self.inclusion_interval),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        for (k, v) in [
            ("cam", self.cam),
            ("crit_forwards", self.crit_forwards),
            ("crit_tagging", self.crit_tagging),
        ] {
            let _ = writeln!(s, "{k} = {}", b(v));
        }
        s
    }

    pub fn l1_geometry(&self) -> Result<CacheGeometry> {
        CacheGeometry::new(self.l1_kb << 10, self.l1_assoc, self.block_bytes)
    }

    pub fn l2_geometry(&self) -> Result<CacheGeometry> {
        CacheGeometry::new(self.l2_kb << 10, self.l2_assoc, self.block_bytes)
    }

    pub fn mem_bytes(&self) -> u64 {
        self.mem_mb << 20
    }

    pub fn workload(&self) -> MicrobenchParams {
        MicrobenchParams {
            threads: self.procs,
            counters: self.counters,
            iters: self.iters,
            noncrit_work: self.noncrit_work,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.procs > 64 {
            return config_err(format!("at most 64 processors supported, got {}", self.procs));
        }
        Topology::build(self.topology, self.procs)?;
        if self.block_bytes != 64 {
            return config_err(format!(
                "block_bytes must be 64 (the protocol's block interleaving), got {}",
                self.block_bytes
            ));
        }
        self.l1_geometry()?;
        self.l2_geometry()?;
        if self.mem_mb == 0 {
            return config_err("mem_mb must be positive");
        }
        if self.lat_l1 == 0 {
            return config_err("lat_l1 must be at least 1 cycle");
        }
        if self.bandwidth == 0 {
            return config_err("bandwidth must be positive");
        }
        if self.msg_bytes_control == 0 || self.msg_bytes_data == 0 {
            return config_err("message sizes must be positive");
        }
        if self.counters == 0 || self.iters == 0 {
            return config_err("counters and iters must be at least 1");
        }
        Ok(())
    }

    /// Short stable identifier of everything but the CAM flag.
    pub fn pair_id(&self) -> String {
        let mut id = format!(
            "{}.{}p.c{}.bw{}",
            self.topology, self.procs, self.counters, self.bandwidth
        );
        let d = Config::default();
        if self.iters != d.iters {
            let _ = write!(id, ".i{}", self.iters);
        }
        if self.noncrit_work != d.noncrit_work {
            let _ = write!(id, ".w{}", self.noncrit_work);
        }
        if self.jitter != 0 {
            let _ = write!(id, ".j{}.s{}", self.jitter, self.seed);
        }
        id
    }

    pub fn config_id(&self) -> String {
        format!("{}.{}", self.pair_id(), if self.cam { "cam" } else { "base" })
    }

    /// True when `self` and `other` differ at most in the CAM flag.
    pub fn pairs_with(&self, other: &Config) -> bool {
        let mut a = self.clone();
        a.cam = other.cam;
        a == *other
    }
}

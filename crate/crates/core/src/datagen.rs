//! Deterministic tree datasets in the edge-list layout.
//!
//! All randomness comes from [`SplitMix64`], so a given [`GenConfig`]
//! always produces the same bytes. Draw order:
//!
//! * `RandomTree(n)`: for node `i` in `1..n`, `parent(i) = below(i)`.
//! * Then for each edge in id order: `name` (length `1 + below(15)`), then
//!   `c1..cN` (length `1 + below(20)` each); every character is
//!   `ALPHABET[below(62)]`.
//!
//! where `below(k) = next_u64() % k`. Edge ids are assigned in BFS order
//! from the root (node 0), visiting children in ascending node id.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{TableSchema, Value, NAME_MAX_LEN, PAYLOAD_MAX_LEN};

pub const ALPHABET: &[u8; 62] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

/// SplitMix64 (Steele, Lea, Flood). Each step adds the golden-ratio
/// increment to the state and returns a mixed copy of it.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// `next_u64() % bound`; `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }

    fn alnum(&mut self, max_len: u32) -> String {
        let len = 1 + self.below(max_len as u64) as usize;
        (0..len).map(|_| ALPHABET[self.below(62) as usize] as char).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeMode {
    /// Every inner node has exactly `fanout` children, `height` levels deep.
    Balanced,
    /// `node_count` nodes; each non-root node picks a uniformly random
    /// parent among the nodes with smaller ids.
    Random { node_count: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub fanout: u32,
    pub height: u32,
    pub payload_cols: usize,
    pub seed: u64,
    pub mode: TreeMode,
}

impl GenConfig {
    pub fn balanced(fanout: u32, height: u32, payload_cols: usize, seed: u64) -> Self {
        GenConfig { fanout, height, payload_cols, seed, mode: TreeMode::Balanced }
    }

    pub fn random(node_count: u32, payload_cols: usize, seed: u64) -> Self {
        GenConfig { fanout: 1, height: 0, payload_cols, seed, mode: TreeMode::Random { node_count } }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            TreeMode::Balanced => {
                if self.fanout == 0 {
                    return Err(Error::InvalidConfig("fanout must be at least 1".into()));
                }
                let edges = balanced_edge_count(self.fanout, self.height)
                    .ok_or_else(|| Error::InvalidConfig("tree too large".into()))?;
                if edges > i32::MAX as u64 {
                    return Err(Error::InvalidConfig(format!("{edges} edges exceed int32 ids")));
                }
            }
            TreeMode::Random { node_count } => {
                if node_count == 0 {
                    return Err(Error::InvalidConfig("node_count must be at least 1".into()));
                }
                if node_count > i32::MAX as u32 {
                    return Err(Error::InvalidConfig("node_count exceeds int32 ids".into()));
                }
            }
        }
        Ok(())
    }
}

/// `fanout + fanout^2 + ... + fanout^height`, `None` on overflow.
pub fn balanced_edge_count(fanout: u32, height: u32) -> Option<u64> {
    let mut total: u64 = 0;
    let mut level: u64 = 1;
    for _ in 0..height {
        level = level.checked_mul(fanout as u64)?;
        total = total.checked_add(level)?;
    }
    Some(total)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: i32,
    pub from: i32,
    pub to: i32,
    pub name: String,
    pub payload: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub schema: TableSchema,
    pub edges: Vec<Edge>,
    /// Depth of the deepest node (0 for a lone root).
    pub height: u32,
}

impl Dataset {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn header(&self) -> String {
        let names: Vec<&str> = self.schema.columns.iter().map(|f| f.name.as_str()).collect();
        names.join(",")
    }

    /// The whole CSV document, header included, `\n` line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.edges.len() * (24 + 21 * self.schema.columns.len()));
        out.push_str(&self.header());
        out.push('\n');
        for e in &self.edges {
            let _ = write!(out, "{},{},{},{}", e.id, e.from, e.to, e.name);
            for p in &e.payload {
                out.push(',');
                out.push_str(p);
            }
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<Value>> {
        self.edges
            .iter()
            .map(|e| {
                let mut row = alloc::vec![
                    Value::Int(e.id),
                    Value::Int(e.from),
                    Value::Int(e.to),
                    Value::Str(e.name.clone()),
                ];
                row.extend(e.payload.iter().map(|p| Value::Str(p.clone())));
                row
            })
            .collect()
    }
}

/// Generates the edge table `table_name` for `cfg`.
pub fn generate_tree(cfg: &GenConfig, table_name: &str) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = SplitMix64::new(cfg.seed);
    let (links, height) = match cfg.mode {
        TreeMode::Balanced => balanced_links(cfg.fanout, cfg.height),
        TreeMode::Random { node_count } => random_links(node_count, &mut rng),
    };
    let edges = links
        .into_iter()
        .enumerate()
        .map(|(id, (from, to))| {
            let name = rng.alnum(NAME_MAX_LEN);
            let payload = (0..cfg.payload_cols).map(|_| rng.alnum(PAYLOAD_MAX_LEN)).collect();
            Edge { id: id as i32, from: from as i32, to: to as i32, name, payload }
        })
        .collect();
    Ok(Dataset { schema: TableSchema::edges(table_name, cfg.payload_cols), edges, height })
}

fn balanced_links(fanout: u32, height: u32) -> (Vec<(u32, u32)>, u32) {
    let mut links = Vec::new();
    let mut frontier: Vec<u32> = alloc::vec![0];
    let mut next_id = 1u32;
    for _ in 0..height {
        let mut next = Vec::with_capacity(frontier.len() * fanout as usize);
        for &parent in &frontier {
            for _ in 0..fanout {
                links.push((parent, next_id));
                next.push(next_id);
                next_id += 1;
            }
        }
        frontier = next;
    }
    (links, height)
}

fn random_links(node_count: u32, rng: &mut SplitMix64) -> (Vec<(u32, u32)>, u32) {
    let n = node_count as usize;
    let mut children: Vec<Vec<u32>> = alloc::vec![Vec::new(); n];
    for i in 1..n {
        let parent = rng.below(i as u64) as usize;
        children[parent].push(i as u32);
    }
    // Children are pushed in ascending id order already.
    let mut links = Vec::with_capacity(n.saturating_sub(1));
    let mut depth = alloc::vec![0u32; n];
    let mut height = 0;
    let mut queue = VecDeque::from([0u32]);
    while let Some(node) = queue.pop_front() {
        for &child in &children[node as usize] {
            depth[child as usize] = depth[node as usize] + 1;
            height = height.max(depth[child as usize]);
            links.push((node, child));
            queue.push_back(child);
        }
    }
    (links, height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Published first outputs of SplitMix64 seeded with 1234567.
        let mut r = SplitMix64::new(1234567);
        assert_eq!(r.next_u64(), 6457827717110365317);
        assert_eq!(r.next_u64(), 3203168211198807973);
        assert_eq!(r.next_u64(), 9817491932198370423);
    }

    #[test]
    fn balanced_counts() {
        let d = generate_tree(&GenConfig::balanced(2, 2, 0, 1), "edges").unwrap();
        assert_eq!(d.edge_count(), 6);
        assert_eq!(d.height, 2);
        let d = generate_tree(&GenConfig::balanced(3, 0, 0, 1), "edges").unwrap();
        assert_eq!(d.edge_count(), 0);
        assert_eq!(d.to_csv(), "id,from,to,name\n");
        assert_eq!(balanced_edge_count(10, 5), Some(111_110));
        assert_eq!(balanced_edge_count(1, 7), Some(7));
        for (k, h) in [(2u64, 3u32), (3, 4), (5, 2)] {
            assert_eq!(balanced_edge_count(k as u32, h), Some((k.pow(h + 1) - k) / (k - 1)));
        }
    }

    #[test]
    fn random_tree_shape() {
        let d = generate_tree(&GenConfig::random(500, 2, 9), "edges").unwrap();
        assert_eq!(d.edge_count(), 499);
        let mut seen = alloc::vec![false; 500];
        for e in &d.edges {
            assert!(e.from < e.to, "parent id must be smaller");
            assert!(!seen[e.to as usize]);
            seen[e.to as usize] = true;
            assert!(e.name.len() <= 15 && e.payload.iter().all(|p| (1..=20).contains(&p.len())));
        }
        assert!(!seen[0]);
    }

    #[test]
    fn same_config_same_bytes() {
        let cfg = GenConfig::random(300, 3, 42);
        assert_eq!(generate_tree(&cfg, "e").unwrap().to_csv(), generate_tree(&cfg, "e").unwrap().to_csv());
        let other = GenConfig::random(300, 3, 43);
        assert_ne!(generate_tree(&cfg, "e").unwrap().to_csv(), generate_tree(&other, "e").unwrap().to_csv());
    }
}

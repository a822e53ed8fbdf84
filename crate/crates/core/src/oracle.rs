//! Exact cost-to-go for every reachable state, by breadth-first search from
//! the solved state over the quarter-turn graph.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::cube::{
    index_to_state, relative_state, state_index, Action, CubeError, CubeState, StateIndex,
    NUM_STATES,
};

pub const MAGIC: &[u8; 8] = b"CUBE2ORC";
pub const FORMAT_VERSION: u8 = 1;
const UNSEEN: u8 = u8::MAX;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad oracle file: {0}")]
    Format(String),
    #[error(transparent)]
    Cube(#[from] CubeError),
}

/// Depth of every state index plus the per-depth population.
#[derive(Clone, PartialEq, Eq)]
pub struct OracleTable {
    costs: Vec<u8>,
    histogram: Vec<u32>,
}

impl std::fmt::Debug for OracleTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OracleTable")
            .field("states", &self.costs.len())
            .field("histogram", &self.histogram)
            .finish()
    }
}

struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet(vec![0; n.div_ceil(64)])
    }

    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn clear(&mut self) {
        self.0.iter_mut().for_each(|w| *w = 0);
    }

    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

/// Layer-by-layer BFS. Frontiers are visited in ascending index order, so the
/// table is identical on every run.
pub fn build_oracle() -> OracleTable {
    let mut costs = vec![UNSEEN; NUM_STATES];
    let mut frontier = BitSet::new(NUM_STATES);
    let mut next = BitSet::new(NUM_STATES);
    let solved = state_index(&CubeState::solved()).expect("solved state is canonical");
    costs[solved.as_usize()] = 0;
    frontier.insert(solved.as_usize());
    let mut histogram = vec![1u32];
    let mut depth = 0u8;
    while !frontier.is_empty() {
        depth += 1;
        let mut found = 0u32;
        for i in frontier.iter() {
            let idx = StateIndex::new(i as u32).expect("frontier holds valid indices");
            for a in Action::ALL {
                let j = idx.apply(a).as_usize();
                if costs[j] == UNSEEN {
                    costs[j] = depth;
                    next.insert(j);
                    found += 1;
                }
            }
        }
        if found > 0 {
            histogram.push(found);
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    OracleTable { costs, histogram }
}

impl OracleTable {
    pub fn histogram(&self) -> &[u32] {
        &self.histogram
    }

    pub fn max_depth(&self) -> usize {
        self.histogram.len() - 1
    }

    pub fn reachable(&self) -> usize {
        self.costs.iter().filter(|&&c| c != UNSEEN).count()
    }

    pub fn cost_at(&self, i: StateIndex) -> u8 {
        self.costs[i.as_usize()]
    }

    /// Minimal number of quarter turns from `s` to solved.
    pub fn cost(&self, s: &CubeState) -> Result<u8, CubeError> {
        Ok(self.cost_at(state_index(s)?))
    }

    /// Minimal number of quarter turns from `from` to `to`.
    pub fn pair_cost(&self, from: &CubeState, to: &CubeState) -> Result<u8, CubeError> {
        self.cost(&relative_state(from, to)?)
    }

    /// A shortest path from `s` to solved, following decreasing depth.
    pub fn solve(&self, s: &CubeState) -> Result<Vec<Action>, CubeError> {
        let mut idx = state_index(s)?;
        let mut path = Vec::new();
        while self.cost_at(idx) > 0 {
            let d = self.cost_at(idx);
            let a = Action::ALL
                .into_iter()
                .find(|&a| self.cost_at(idx.apply(a)) + 1 == d)
                .expect("every non-solved state has a descending neighbour");
            path.push(a);
            idx = idx.apply(a);
        }
        Ok(path)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[FORMAT_VERSION])?;
        w.write_all(&self.costs)?;
        for &h in &self.histogram {
            w.write_all(&h.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), OracleError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let f = fs::File::create(path)?;
        self.write_to(io::BufWriter::new(f))?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<OracleTable, OracleError> {
        let header = MAGIC.len() + 1;
        if bytes.len() < header + NUM_STATES || &bytes[..MAGIC.len()] != MAGIC {
            return Err(OracleError::Format("missing magic or truncated".into()));
        }
        if bytes[MAGIC.len()] != FORMAT_VERSION {
            return Err(OracleError::Format(format!(
                "unsupported version {}",
                bytes[MAGIC.len()]
            )));
        }
        let costs = bytes[header..header + NUM_STATES].to_vec();
        let footer = &bytes[header + NUM_STATES..];
        if footer.len() % 4 != 0 || footer.is_empty() {
            return Err(OracleError::Format("histogram footer misaligned".into()));
        }
        let histogram: Vec<u32> = footer
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut recount = vec![0u32; histogram.len()];
        for &c in &costs {
            let bin = recount
                .get_mut(c as usize)
                .ok_or_else(|| OracleError::Format(format!("depth {c} outside histogram")))?;
            *bin += 1;
        }
        if recount != histogram {
            return Err(OracleError::Format("histogram does not match depths".into()));
        }
        Ok(OracleTable { costs, histogram })
    }

    pub fn load(path: &Path) -> Result<OracleTable, OracleError> {
        OracleTable::from_bytes(&fs::read(path)?)
    }

    /// Loads the table at `path`, building and saving it when absent.
    pub fn load_or_build(path: &Path) -> Result<OracleTable, OracleError> {
        if path.exists() {
            return OracleTable::load(path);
        }
        let table = build_oracle();
        table.save(path)?;
        Ok(table)
    }

    /// Iterator over `(state, cost)` for a dense index range; handy for audits.
    pub fn states(&self) -> impl Iterator<Item = (CubeState, u8)> + '_ {
        (0..NUM_STATES as u32).map(|i| {
            let idx = StateIndex::new(i).expect("in range");
            (index_to_state(idx), self.cost_at(idx))
        })
    }
}

pub fn oracle_cost(t: &OracleTable, s: &CubeState) -> Result<u8, CubeError> {
    t.cost(s)
}

pub fn oracle_pair_cost(t: &OracleTable, from: &CubeState, to: &CubeState) -> Result<u8, CubeError> {
    t.pair_cost(from, to)
}

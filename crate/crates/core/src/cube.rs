//! Sticker-level model of the 2x2x2 cube.
//!
//! A state is a vector of 24 sticker colours. Faces are stored in the order
//! U, D, F, B, L, R, four stickers per face, row-major as seen when looking
//! straight at that face in the usual net orientation:
//!
//! ```text
//!            U0 U1                  U: back row on top
//!            U2 U3
//!    L0 L1   F0 F1   R0 R1   B0 B1  L/F/R/B: U edge on top
//!    L2 L3   F2 F3   R2 R3   B2 B3
//!            D0 D1                  D: front row on top
//!            D2 D3
//! ```
//!
//! The solved colour of face `f` is `f` itself (U=0, D=1, F=2, B=3, L=4, R=5).
//!
//! Only the quarter turns U, U', F, F', R and R' are generators. None of them
//! moves the down-left-back corner, so its stickers (D2, B3, L2) never change
//! and whole-cube rotations are quotiented out. The reachable set is the
//! 7!·3⁶ = 3,674,160 states that [`state_index`] ranks densely.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

/// Number of stickers on the cube.
pub const STICKERS: usize = 24;
/// Number of sticker colours.
pub const COLORS: usize = 6;
/// Number of generators in the action set.
pub const NUM_ACTIONS: usize = 6;
/// Size of the reachable state space, 7!·3⁶.
pub const NUM_STATES: usize = 5040 * 729;

const NUM_PERMS: usize = 5040;
const NUM_TWISTS: usize = 729;

/// Sticker positions of the fixed down-left-back corner (D2, B3, L2).
pub const DLB_STICKERS: [usize; 3] = [6, 15, 18];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CubeError {
    #[error("expected {STICKERS} stickers, got {0}")]
    Length(usize),
    #[error("sticker {pos} has colour {color}, outside 0..{COLORS}")]
    ColorRange { pos: usize, color: u8 },
    #[error("colour {color} appears {count} times, expected 4")]
    ColorCount { color: usize, count: usize },
    #[error("down-left-back corner is not in its solved orientation")]
    NotCanonical,
    #[error("sticker colours do not form a reachable cube state")]
    Unreachable,
    #[error("state index {0} out of range 0..{NUM_STATES}")]
    IndexRange(u32),
    #[error("cannot parse {0:?}")]
    Parse(String),
}

/// One of the six quarter-turn generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    U = 0,
    UPrime = 1,
    F = 2,
    FPrime = 3,
    R = 4,
    RPrime = 5,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::U,
        Action::UPrime,
        Action::F,
        Action::FPrime,
        Action::R,
        Action::RPrime,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn inverse(self) -> Action {
        // Clockwise/counter-clockwise pairs sit next to each other.
        Self::ALL[self.index() ^ 1]
    }

    /// Gather permutation: `apply(s)[i] = s[perm[i]]`.
    pub fn perm(self) -> &'static [u8; STICKERS] {
        &tables().action_perms[self.index()]
    }

    pub fn name(self) -> &'static str {
        ["U", "U'", "F", "F'", "R", "R'"][self.index()]
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = CubeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| CubeError::Parse(s.to_string()))
    }
}

/// Inverse of an action.
pub fn inverse(a: Action) -> Action {
    a.inverse()
}

/// A cube configuration as 24 sticker colours.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeState([u8; STICKERS]);

impl CubeState {
    pub fn solved() -> CubeState {
        let mut s = [0u8; STICKERS];
        for (i, c) in s.iter_mut().enumerate() {
            *c = (i / 4) as u8;
        }
        CubeState(s)
    }

    /// Checks colour range, colour counts and the fixed corner. Full
    /// reachability is checked by [`state_index`].
    pub fn from_stickers(stickers: &[u8]) -> Result<CubeState, CubeError> {
        if stickers.len() != STICKERS {
            return Err(CubeError::Length(stickers.len()));
        }
        let mut counts = [0usize; COLORS];
        for (pos, &color) in stickers.iter().enumerate() {
            if color as usize >= COLORS {
                return Err(CubeError::ColorRange { pos, color });
            }
            counts[color as usize] += 1;
        }
        if let Some((color, &count)) = counts.iter().enumerate().find(|(_, &n)| n != 4) {
            return Err(CubeError::ColorCount { color, count });
        }
        let solved = CubeState::solved();
        if DLB_STICKERS.iter().any(|&p| stickers[p] != solved.0[p]) {
            return Err(CubeError::NotCanonical);
        }
        let mut s = [0u8; STICKERS];
        s.copy_from_slice(stickers);
        Ok(CubeState(s))
    }

    pub fn stickers(&self) -> &[u8; STICKERS] {
        &self.0
    }

    pub fn apply(&self, a: Action) -> CubeState {
        let perm = a.perm();
        let mut out = [0u8; STICKERS];
        for (o, &p) in out.iter_mut().zip(perm.iter()) {
            *o = self.0[p as usize];
        }
        CubeState(out)
    }

    pub fn apply_all<I: IntoIterator<Item = Action>>(&self, actions: I) -> CubeState {
        actions.into_iter().fold(*self, |s, a| s.apply(a))
    }

    pub fn is_solved(&self) -> bool {
        *self == CubeState::solved()
    }

    /// Number of positions at which two states show different colours.
    pub fn hamming(&self, other: &CubeState) -> usize {
        self.0.iter().zip(other.0.iter()).filter(|(a, b)| a != b).count()
    }
}

impl fmt::Debug for CubeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CubeState({self})")
    }
}

impl fmt::Display for CubeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.0 {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for CubeState {
    type Err = CubeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits: Option<Vec<u8>> = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| c.to_digit(10).map(|d| d as u8))
            .collect();
        let digits = digits.ok_or_else(|| CubeError::Parse(s.to_string()))?;
        CubeState::from_stickers(&digits)
    }
}

pub fn solved_state() -> CubeState {
    CubeState::solved()
}

pub fn apply_action(s: &CubeState, a: Action) -> CubeState {
    s.apply(a)
}

pub fn is_solved(s: &CubeState) -> bool {
    s.is_solved()
}

/// Parses space-separated generator names such as `"U R' F"`.
pub fn parse_actions(text: &str) -> Result<Vec<Action>, CubeError> {
    text.split_whitespace().map(str::parse).collect()
}

pub fn format_actions(actions: &[Action]) -> String {
    actions.iter().map(|a| a.name()).collect::<Vec<_>>().join(" ")
}

/// Maximum number of identical consecutive actions in a scramble.
pub const MAX_REPEATS: usize = 3;

/// Samples the next scramble action uniformly, redrawing whenever it would be
/// the fourth identical action in a row.
#[derive(Debug, Clone, Default)]
pub struct ScrambleSampler {
    last: Option<Action>,
    run: usize,
}

impl ScrambleSampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Action {
        loop {
            let a = Action::ALL[rng.gen_range(0..NUM_ACTIONS)];
            if self.last == Some(a) && self.run >= MAX_REPEATS {
                continue;
            }
            self.record(a);
            return a;
        }
    }

    /// Registers an action chosen elsewhere so the repeat count stays correct.
    pub fn record(&mut self, a: Action) {
        if self.last == Some(a) {
            self.run += 1;
        } else {
            self.last = Some(a);
            self.run = 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScrambleSequence {
    pub actions: Vec<Action>,
    pub resulting_state: CubeState,
}

pub fn random_scramble<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ScrambleSequence {
    random_scramble_from(rng, k, &CubeState::solved())
}

pub fn random_scramble_from<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    start: &CubeState,
) -> ScrambleSequence {
    let mut sampler = ScrambleSampler::new();
    let actions: Vec<Action> = (0..k).map(|_| sampler.next(rng)).collect();
    let resulting_state = start.apply_all(actions.iter().copied());
    ScrambleSequence {
        actions,
        resulting_state,
    }
}

/// True when no action occurs more than [`MAX_REPEATS`] times in a row.
pub fn respects_repeat_limit(actions: &[Action]) -> bool {
    actions
        .windows(MAX_REPEATS + 1)
        .all(|w| w.iter().any(|&a| a != w[0]))
}

/// Dense rank of a reachable state, in `0..NUM_STATES`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateIndex(u32);

impl StateIndex {
    pub fn new(value: u32) -> Result<StateIndex, CubeError> {
        if (value as usize) < NUM_STATES {
            Ok(StateIndex(value))
        } else {
            Err(CubeError::IndexRange(value))
        }
    }

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn as_usize(self) -> usize {
        self.0 as usize
    }

    fn perm_rank(self) -> usize {
        self.as_usize() / NUM_TWISTS
    }

    fn twist_rank(self) -> usize {
        self.as_usize() % NUM_TWISTS
    }

    /// Index reached by applying `a`, using the coordinate move tables.
    pub fn apply(self, a: Action) -> StateIndex {
        let t = tables();
        let p = t.perm_moves[self.perm_rank()][a.index()] as usize;
        let o = t.twist_moves[self.twist_rank()][a.index()] as usize;
        StateIndex((p * NUM_TWISTS + o) as u32)
    }
}

// Corner slots. The first seven hold the movable cubies; slot 7 is DLB.
// Each entry lists the sticker positions of that corner: the U/D sticker
// first, then the other two in a fixed rotational sense.
const CORNER_COORDS: [[i8; 3]; 8] = [
    [1, 1, 1],    // URF
    [-1, 1, 1],   // UFL
    [-1, 1, -1],  // ULB
    [1, 1, -1],   // UBR
    [1, -1, 1],   // DFR
    [-1, -1, 1],  // DLF
    [1, -1, -1],  // DRB
    [-1, -1, -1], // DLB
];

/// Corner coordinate and outward normal of each sticker position.
fn sticker_geometry() -> [([i8; 3], [i8; 3]); STICKERS] {
    const U: [i8; 3] = [0, 1, 0];
    const D: [i8; 3] = [0, -1, 0];
    const F: [i8; 3] = [0, 0, 1];
    const B: [i8; 3] = [0, 0, -1];
    const L: [i8; 3] = [-1, 0, 0];
    const R: [i8; 3] = [1, 0, 0];
    [
        ([-1, 1, -1], U),
        ([1, 1, -1], U),
        ([-1, 1, 1], U),
        ([1, 1, 1], U),
        ([-1, -1, 1], D),
        ([1, -1, 1], D),
        ([-1, -1, -1], D),
        ([1, -1, -1], D),
        ([-1, 1, 1], F),
        ([1, 1, 1], F),
        ([-1, -1, 1], F),
        ([1, -1, 1], F),
        ([1, 1, -1], B),
        ([-1, 1, -1], B),
        ([1, -1, -1], B),
        ([-1, -1, -1], B),
        ([-1, 1, -1], L),
        ([-1, 1, 1], L),
        ([-1, -1, -1], L),
        ([-1, -1, 1], L),
        ([1, 1, 1], R),
        ([1, 1, -1], R),
        ([1, -1, 1], R),
        ([1, -1, -1], R),
    ]
}

struct Tables {
    action_perms: [[u8; STICKERS]; NUM_ACTIONS],
    corner_facelets: [[u8; 3]; 8],
    perm_moves: Vec<[u16; NUM_ACTIONS]>,
    twist_moves: Vec<[u16; NUM_ACTIONS]>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(build_tables)
}

fn cross(a: [i8; 3], b: [i8; 3]) -> [i8; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [i8; 3], b: [i8; 3]) -> i8 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Quarter turn of a layer, clockwise as seen from outside that face.
fn rotate(face: Action, v: [i8; 3]) -> [i8; 3] {
    let [x, y, z] = v;
    match face {
        Action::U => [-z, y, x],
        Action::F => [y, -x, z],
        Action::R => [x, z, -y],
        _ => unreachable!("only clockwise base turns are rotated"),
    }
}

fn in_layer(face: Action, corner: [i8; 3]) -> bool {
    match face {
        Action::U => corner[1] == 1,
        Action::F => corner[2] == 1,
        Action::R => corner[0] == 1,
        _ => unreachable!(),
    }
}

fn build_tables() -> Tables {
    let geom = sticker_geometry();
    let find = |corner: [i8; 3], normal: [i8; 3]| -> usize {
        geom.iter()
            .position(|&(c, n)| c == corner && n == normal)
            .expect("sticker geometry is complete")
    };

    let mut action_perms = [[0u8; STICKERS]; NUM_ACTIONS];
    for face in [Action::U, Action::F, Action::R] {
        // dest[p] = where the sticker at p travels under one clockwise turn.
        let mut dest = [0usize; STICKERS];
        for (p, &(c, n)) in geom.iter().enumerate() {
            dest[p] = if in_layer(face, c) {
                find(rotate(face, c), rotate(face, n))
            } else {
                p
            };
        }
        let mut gather = [0u8; STICKERS];
        for (p, &q) in dest.iter().enumerate() {
            gather[q] = p as u8;
        }
        let mut inv = [0u8; STICKERS];
        for (i, &g) in gather.iter().enumerate() {
            inv[g as usize] = i as u8;
        }
        action_perms[face.index()] = gather;
        action_perms[face.index() + 1] = inv;
    }

    let mut corner_facelets = [[0u8; 3]; 8];
    for (slot, &c) in CORNER_COORDS.iter().enumerate() {
        let ud = [0, c[1], 0];
        let a = [c[0], 0, 0];
        let b = [0, 0, c[2]];
        // Keep the same rotational sense around every corner.
        let (n1, n2) = if dot(cross(ud, a), c) > 0 { (a, b) } else { (b, a) };
        corner_facelets[slot] = [find(c, ud) as u8, find(c, n1) as u8, find(c, n2) as u8];
    }

    let mut t = Tables {
        action_perms,
        corner_facelets,
        perm_moves: Vec::new(),
        twist_moves: Vec::new(),
    };
    t.perm_moves = (0..NUM_PERMS)
        .map(|p| {
            let cubies = Cubies::from_ranks(p, 0);
            let mut row = [0u16; NUM_ACTIONS];
            for a in Action::ALL {
                let next = Cubies::from_stickers_with(&t, &cubies.to_stickers_with(&t).apply_with(&t, a))
                    .expect("moves preserve validity");
                row[a.index()] = next.perm_rank() as u16;
            }
            row
        })
        .collect();
    t.twist_moves = (0..NUM_TWISTS)
        .map(|o| {
            let cubies = Cubies::from_ranks(0, o);
            let mut row = [0u16; NUM_ACTIONS];
            for a in Action::ALL {
                let next = Cubies::from_stickers_with(&t, &cubies.to_stickers_with(&t).apply_with(&t, a))
                    .expect("moves preserve validity");
                row[a.index()] = next.twist_rank() as u16;
            }
            row
        })
        .collect();
    t
}

impl CubeState {
    fn apply_with(&self, t: &Tables, a: Action) -> CubeState {
        let perm = &t.action_perms[a.index()];
        let mut out = [0u8; STICKERS];
        for (o, &p) in out.iter_mut().zip(perm.iter()) {
            *o = self.0[p as usize];
        }
        CubeState(out)
    }
}

/// Corner-level description: which cubie sits in each slot and how it is
/// twisted (0..3, the facelet index holding the cubie's U/D sticker).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cubies {
    perm: [u8; 8],
    twist: [u8; 8],
}

impl Cubies {
    fn from_ranks(perm_rank: usize, twist_rank: usize) -> Cubies {
        let mut perm = [0u8; 8];
        perm[..7].copy_from_slice(&unrank_perm7(perm_rank));
        perm[7] = 7;
        let mut twist = [0u8; 8];
        let mut rest = twist_rank;
        let mut sum = 0;
        for t in twist.iter_mut().take(6) {
            *t = (rest % 3) as u8;
            sum += *t as usize;
            rest /= 3;
        }
        twist[6] = ((3 - sum % 3) % 3) as u8;
        Cubies { perm, twist }
    }

    fn perm_rank(&self) -> usize {
        rank_perm7(&self.perm[..7])
    }

    fn twist_rank(&self) -> usize {
        self.twist[..6]
            .iter()
            .rev()
            .fold(0usize, |acc, &t| acc * 3 + t as usize)
    }

    fn from_stickers_with(t: &Tables, s: &CubeState) -> Result<Cubies, CubeError> {
        let solved = CubeState::solved();
        let home_colors = |cubie: usize, k: usize| solved.0[t.corner_facelets[cubie][k] as usize];
        let mut perm = [0u8; 8];
        let mut twist = [0u8; 8];
        let mut seen = [false; 8];
        for slot in 0..8 {
            let f = t.corner_facelets[slot];
            let colors = [s.0[f[0] as usize], s.0[f[1] as usize], s.0[f[2] as usize]];
            let o = colors
                .iter()
                .position(|&c| c <= 1)
                .ok_or(CubeError::Unreachable)?;
            let ud = colors[o];
            let c1 = colors[(o + 1) % 3];
            let c2 = colors[(o + 2) % 3];
            let cubie = (0..8)
                .find(|&k| home_colors(k, 0) == ud && home_colors(k, 1) == c1 && home_colors(k, 2) == c2)
                .ok_or(CubeError::Unreachable)?;
            if seen[cubie] {
                return Err(CubeError::Unreachable);
            }
            seen[cubie] = true;
            perm[slot] = cubie as u8;
            twist[slot] = o as u8;
        }
        if perm[7] != 7 || twist[7] != 0 {
            return Err(CubeError::NotCanonical);
        }
        if twist.iter().map(|&t| t as usize).sum::<usize>() % 3 != 0 {
            return Err(CubeError::Unreachable);
        }
        Ok(Cubies { perm, twist })
    }

    fn to_stickers_with(&self, t: &Tables) -> CubeState {
        let solved = CubeState::solved();
        let mut out = [0u8; STICKERS];
        for (pos, home) in self.home_positions_with(t).iter().enumerate() {
            out[pos] = solved.0[*home as usize];
        }
        CubeState(out)
    }

    /// `home[pos]` is the solved position of the sticker now at `pos`.
    fn home_positions_with(&self, t: &Tables) -> [u8; STICKERS] {
        let mut home = [0u8; STICKERS];
        for slot in 0..8 {
            let cubie = self.perm[slot] as usize;
            let o = self.twist[slot] as usize;
            for k in 0..3 {
                let pos = t.corner_facelets[slot][(k + o) % 3] as usize;
                home[pos] = t.corner_facelets[cubie][k];
            }
        }
        home
    }
}

fn rank_perm7(perm: &[u8]) -> usize {
    let mut rank = 0;
    for i in 0..perm.len() {
        let smaller = perm[i + 1..].iter().filter(|&&p| p < perm[i]).count();
        rank = rank * (perm.len() - i) + smaller;
    }
    rank
}

fn unrank_perm7(mut rank: usize) -> [u8; 7] {
    let mut digits = [0usize; 7];
    for i in (0..7).rev() {
        let base = 7 - i;
        digits[i] = rank % base;
        rank /= base;
    }
    let mut pool: Vec<u8> = (0..7).collect();
    let mut out = [0u8; 7];
    for (o, d) in out.iter_mut().zip(digits) {
        *o = pool.remove(d);
    }
    out
}

/// Dense rank of a canonical state.
pub fn state_index(s: &CubeState) -> Result<StateIndex, CubeError> {
    let c = Cubies::from_stickers_with(tables(), s)?;
    Ok(StateIndex((c.perm_rank() * NUM_TWISTS + c.twist_rank()) as u32))
}

pub fn index_to_state(i: StateIndex) -> CubeState {
    Cubies::from_ranks(i.perm_rank(), i.twist_rank()).to_stickers_with(tables())
}

/// Sticker permutation `P` with `s[i] = solved[P[i]]`; unique for reachable
/// states because the fixed corner removes whole-cube symmetry.
pub fn home_positions(s: &CubeState) -> Result<[u8; STICKERS], CubeError> {
    let t = tables();
    Ok(Cubies::from_stickers_with(t, s)?.home_positions_with(t))
}

/// State `w` such that any action sequence taking `from` to `to` takes the
/// solved state to `w`. Distances are invariant under this translation.
pub fn relative_state(from: &CubeState, to: &CubeState) -> Result<CubeState, CubeError> {
    let p_from = home_positions(from)?;
    let p_to = home_positions(to)?;
    let mut inv = [0u8; STICKERS];
    for (i, &p) in p_from.iter().enumerate() {
        inv[p as usize] = i as u8;
    }
    let solved = CubeState::solved();
    let mut out = [0u8; STICKERS];
    for (o, &p) in out.iter_mut().zip(p_to.iter()) {
        *o = solved.0[inv[p as usize] as usize];
    }
    Ok(CubeState(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng) -> CubeState {
        index_to_state(StateIndex(rng.gen_range(0..NUM_STATES as u32)))
    }

    #[test]
    fn solved_layout() {
        let s = solved_state();
        assert_eq!(
            s.stickers().to_vec(),
            vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5]
        );
        assert!(is_solved(&s));
        assert_eq!(state_index(&s).unwrap().value(), 0);
    }

    #[test]
    fn perms_are_bijections_of_order_four() {
        for a in Action::ALL {
            let mut sorted = a.perm().to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..24).collect::<Vec<u8>>());

            let mut s = solved_state().apply(Action::R).apply(Action::F);
            let orig = s;
            for _ in 0..4 {
                s = s.apply(a);
            }
            assert_eq!(s, orig);
            // 12 stickers move under a quarter turn.
            let moved = a.perm().iter().enumerate().filter(|(i, &p)| *i != p as usize).count();
            assert_eq!(moved, 12);
        }
    }

    #[test]
    fn inverse_pairs() {
        assert_eq!(inverse(Action::U), Action::UPrime);
        assert_eq!(inverse(inverse(Action::F)), Action::F);
        for a in Action::ALL {
            let p = a.perm();
            let q = a.inverse().perm();
            for i in 0..STICKERS {
                assert_eq!(q[p[i] as usize] as usize, i);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s = random_state(&mut rng);
            for a in Action::ALL {
                assert_eq!(s.apply(a).apply(a.inverse()), s);
            }
        }
    }

    #[test]
    fn fixed_corner_never_moves() {
        for a in Action::ALL {
            for p in DLB_STICKERS {
                assert_eq!(a.perm()[p] as usize, p);
            }
        }
    }

    #[test]
    fn u_turn_moves_front_row_to_left() {
        let s = solved_state().apply(Action::U);
        // Front face's top row now shows the right face colour.
        assert_eq!(&s.stickers()[8..10], &[5, 5]);
        // Left face's top row now shows the front colour.
        assert_eq!(&s.stickers()[16..18], &[2, 2]);
        assert!(!s.is_solved());
    }

    #[test]
    fn index_round_trip_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100_000 {
            let i = StateIndex(rng.gen_range(0..NUM_STATES as u32));
            let s = index_to_state(i);
            assert_eq!(state_index(&s).unwrap(), i);
        }
        assert_eq!(NUM_STATES, 3_674_160);
        assert!(StateIndex::new(NUM_STATES as u32).is_err());
    }

    #[test]
    fn move_tables_agree_with_stickers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let s = random_state(&mut rng);
            let i = state_index(&s).unwrap();
            for a in Action::ALL {
                assert_eq!(i.apply(a), state_index(&s.apply(a)).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_stickers() {
        assert_eq!(CubeState::from_stickers(&[0; 23]), Err(CubeError::Length(23)));
        let mut bad = *solved_state().stickers();
        bad[0] = 9;
        assert!(matches!(CubeState::from_stickers(&bad), Err(CubeError::ColorRange { .. })));
        let mut bad = *solved_state().stickers();
        bad.swap(0, 4);
        assert!(CubeState::from_stickers(&bad).is_ok());
        assert_eq!(
            state_index(&CubeState::from_stickers(&bad).unwrap()),
            Err(CubeError::Unreachable)
        );
        let mut bad = *solved_state().stickers();
        bad.swap(6, 15);
        assert_eq!(CubeState::from_stickers(&bad), Err(CubeError::NotCanonical));
        // A single twisted corner has the right colours but is unreachable.
        let t = tables();
        let f = t.corner_facelets[0];
        let mut twisted = *solved_state().stickers();
        let c = [twisted[f[0] as usize], twisted[f[1] as usize], twisted[f[2] as usize]];
        twisted[f[0] as usize] = c[2];
        twisted[f[1] as usize] = c[0];
        twisted[f[2] as usize] = c[1];
        let s = CubeState::from_stickers(&twisted).unwrap();
        assert_eq!(state_index(&s), Err(CubeError::Unreachable));
    }

    #[test]
    fn scramble_limits_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let empty = random_scramble(&mut rng, 0);
        assert!(empty.actions.is_empty());
        assert!(empty.resulting_state.is_solved());
        for _ in 0..10_000 {
            let seq = random_scramble(&mut rng, 12);
            assert!(respects_repeat_limit(&seq.actions));
            assert_eq!(seq.resulting_state, solved_state().apply_all(seq.actions.iter().copied()));
        }
    }

    #[test]
    fn scramble_undone_by_inverse_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seq = random_scramble(&mut rng, 14);
        let back = seq
            .resulting_state
            .apply_all(seq.actions.iter().rev().map(|a| a.inverse()));
        assert!(back.is_solved());
    }

    #[test]
    fn text_notation_round_trips() {
        let s = solved_state().apply_all(parse_actions("U R' F F").unwrap());
        assert_eq!(s.to_string().parse::<CubeState>().unwrap(), s);
        assert_eq!(format_actions(&parse_actions("U R' F").unwrap()), "U R' F");
        assert!(parse_actions("U X").is_err());
    }

    #[test]
    fn relative_state_translates_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let s = random_state(&mut rng);
            let seq = random_scramble(&mut rng, 5);
            let t = s.apply_all(seq.actions.iter().copied());
            assert_eq!(relative_state(&s, &t).unwrap(), seq.resulting_state);
            assert!(relative_state(&s, &s).unwrap().is_solved());
        }
    }
}

//! Per-site encryption decisions: the period-N SE-array masks (one per
//! factor category) plus the baseline r<=p draw they replace.

use crate::cipher::TestPrf;
use crate::mpeg1::{Category, FlcKind};

/// The three control factors, stored as fixed point with 4 decimal digits so
/// serialization is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Factors {
    p_sr: u16,
    p_sd: u16,
    p_mv: u16,
}

pub const FACTOR_ONE: u16 = 10_000;

impl Factors {
    /// Build from real-valued factors in [0,1]; each is rounded to 4 decimal
    /// digits. Panics outside [0,1].
    pub fn new(p_sr: f64, p_sd: f64, p_mv: f64) -> Self {
        Factors {
            p_sr: fixed(p_sr),
            p_sd: fixed(p_sd),
            p_mv: fixed(p_mv),
        }
    }

    pub fn from_fixed(p_sr: u16, p_sd: u16, p_mv: u16) -> Self {
        assert!(p_sr <= FACTOR_ONE && p_sd <= FACTOR_ONE && p_mv <= FACTOR_ONE);
        Factors { p_sr, p_sd, p_mv }
    }

    /// Fixed-point value (0..=10000) for a category.
    pub fn fixed(&self, cat: Category) -> u16 {
        match cat {
            Category::Sr => self.p_sr,
            Category::Sd => self.p_sd,
            Category::Mv => self.p_mv,
        }
    }

    pub fn real(&self, cat: Category) -> f64 {
        self.fixed(cat) as f64 / FACTOR_ONE as f64
    }

    pub fn as_fixed_triple(&self) -> (u16, u16, u16) {
        (self.p_sr, self.p_sd, self.p_mv)
    }

    pub fn is_zero(&self) -> bool {
        self.p_sr == 0 && self.p_sd == 0 && self.p_mv == 0
    }
}

fn fixed(p: f64) -> u16 {
    assert!((0.0..=1.0).contains(&p), "factor {p} outside [0,1]");
    (p * FACTOR_ONE as f64).round() as u16
}

/// round(N*p) on exact fixed-point input: floor(N*p + 0.5) without floats.
pub fn round_count(n: usize, p_fixed: u16) -> usize {
    (n * p_fixed as usize + FACTOR_ONE as usize / 2) / FACTOR_ONE as usize
}

/// Period-N binary selection array with exactly round(N*p) ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    bits: Vec<bool>,
    count: usize,
}

/// Default mask period: a power of two comfortably above the ~300-element
/// minimum needed for fine-grained factor resolution.
pub const DEFAULT_PERIOD: u16 = 1024;

impl SelectionMask {
    pub fn n(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_selected(&self, i: u64) -> bool {
        self.bits[(i % self.bits.len() as u64) as usize]
    }
}

/// Choose round(N*p) distinct positions by a seeded partial Fisher-Yates
/// shuffle. Deterministic in (p, N, seed).
pub fn build_mask(p_fixed: u16, n: usize, seed: u64) -> SelectionMask {
    assert!(n >= 1, "mask period must be positive");
    assert!(p_fixed <= FACTOR_ONE);
    let count = round_count(n, p_fixed);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    let mut rng = TestPrf::seeded(seed);
    for k in 0..count.min(n.saturating_sub(1)) {
        let j = k + (rng.next_u64() % (n - k) as u64) as usize;
        idx.swap(k, j);
    }
    let mut bits = vec![false; n];
    for &i in &idx[..count] {
        bits[i as usize] = true;
    }
    SelectionMask { bits, count }
}

/// The factor category an FLC kind belongs to.
pub fn category_of(kind: FlcKind) -> Category {
    match kind {
        FlcKind::IntraDcDiff { .. } => Category::Sr,
        FlcKind::CoeffSign { .. } | FlcKind::EscapeLevel { .. } => Category::Sd,
        FlcKind::MvSign { .. } | FlcKind::MvResidual { .. } => Category::Mv,
    }
}

/// Baseline per-element draw: uniform r in [0,1) with 53-bit resolution,
/// selected iff r <= p.
pub fn select_typical(p_fixed: u16, rng: &mut TestPrf) -> bool {
    let r = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    r <= p_fixed as f64 / FACTOR_ONE as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    SeArray,
    Typical,
}

/// Stateful single-pass walker: one per stream, consulted once per site in
/// stream order. Each category advances its own element counter, so the
/// factors are independent knobs.
pub struct SelectionWalker {
    strategy: Strategy,
    factors: Factors,
    masks: [SelectionMask; 3],
    rngs: [TestPrf; 3],
    counters: [u64; 3],
}

impl SelectionWalker {
    /// `seeds` are the per-category mask seeds (sr, sd, mv) from
    /// `cipher::derive_seed`.
    pub fn new(strategy: Strategy, factors: Factors, n: usize, seeds: [u64; 3]) -> Self {
        let cats = [Category::Sr, Category::Sd, Category::Mv];
        SelectionWalker {
            strategy,
            factors,
            masks: std::array::from_fn(|i| build_mask(factors.fixed(cats[i]), n, seeds[i])),
            rngs: std::array::from_fn(|i| TestPrf::seeded(seeds[i])),
            counters: [0; 3],
        }
    }

    /// Decide the next site of `kind`, advancing that category's counter.
    pub fn decide(&mut self, kind: FlcKind) -> bool {
        let cat = category_of(kind) as usize;
        let i = self.counters[cat];
        self.counters[cat] += 1;
        match self.strategy {
            Strategy::SeArray => self.masks[cat].is_selected(i),
            Strategy::Typical => {
                let p = self.factors.fixed([Category::Sr, Category::Sd, Category::Mv][cat]);
                select_typical(p, &mut self.rngs[cat])
            }
        }
    }

    pub fn counters(&self) -> [u64; 3] {
        self.counters
    }
}

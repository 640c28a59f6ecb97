//! The information-causality game.
//!
//! Alice holds `N = 2^n` uniform bits, Bob an index `K`, and Alice may send a
//! single classical bit. They share independent copies of one box and play the
//! nested random-access-code protocol: at each level Alice feeds the XOR of a
//! bit pair into a box and forwards `first ⊕ output`, so the `2^{j}` bits of
//! level `j` become `2^{j-1}` bits of level `j+1`, down to the one message bit.
//! Bob walks back down the tree along the binary digits of `K`, querying one
//! box per level with `y = digit` and XOR-ing its output into his guess.
//!
//! With `e_I = (C00 + C10)/2` and `e_II = (C01 − C11)/2` a single level
//! succeeds with probability `(1 + e_I)/2` for `y = 0` and `(1 + e_II)/2` for
//! `y = 1`; errors at different levels are independent, so the path bias is
//! the product of the level biases. Bob flips his answer when that product is
//! negative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::{CorrelatorVector, JointBox};
use crate::error::GameError;

/// Classical bits Alice sends.
pub const MESSAGE_BITS: usize = 1;
/// Largest level count for exact evaluation.
pub const MAX_LEVELS: usize = 24;
/// Largest level count for Monte Carlo play (each trial stores `2^n` bits).
pub const MAX_MC_LEVELS: usize = 16;
/// Per-bit rows are listed only up to this many data bits.
pub const PER_BIT_LIMIT: u64 = 64;

/// Level biases of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasPair {
    #[serde(rename = "e_I")]
    pub e_i: f64,
    #[serde(rename = "e_II")]
    pub e_ii: f64,
}

impl BiasPair {
    pub fn from_correlators(c: &CorrelatorVector) -> Self {
        Self {
            e_i: (c.c00 + c.c10) / 2.0,
            e_ii: (c.c01 - c.c11) / 2.0,
        }
    }

    pub fn isotropic(e: f64) -> Self {
        Self { e_i: e, e_ii: e }
    }

    /// `4(e_I² + e_II²)`, equal to the information-causality quadratic.
    pub fn s_ic(&self) -> f64 {
        4.0 * (self.e_i * self.e_i + self.e_ii * self.e_ii)
    }

    /// Bias of one level queried with `y = digit`.
    pub fn level(&self, digit: u8) -> f64 {
        if digit == 0 {
            self.e_i
        } else {
            self.e_ii
        }
    }

    /// Bias of the path to data bit `k` (0-based) in an `n`-level tree.
    pub fn path_bias(&self, n: usize, k: u64) -> f64 {
        (0..n).map(|j| self.level((k >> j & 1) as u8)).product()
    }
}

/// Shannon entropy of a Bernoulli(`p`) variable in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// `1 − h((1 + |x|)/2)`, evaluated without cancellation for small `x`.
pub fn information_from_bias(x: f64) -> f64 {
    let x = x.abs();
    if x >= 1.0 {
        return 1.0;
    }
    // (1+x)ln(1+x) + (1−x)ln(1−x) = 2x·atanh(x) + ln(1 − x²); the second
    // form loses at most a factor two to cancellation for small x.
    let nats = if x < 0.5 {
        2.0 * x * x.atanh() + (-x * x).ln_1p()
    } else {
        (1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p()
    };
    nats / (2.0 * std::f64::consts::LN_2)
}

/// `1 − h(p)` for a guess that is correct with probability `p`.
pub fn information_from_success(p: f64) -> f64 {
    information_from_bias(2.0 * p - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GameMode {
    Exact,
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub n: usize,
    pub resource: JointBox,
    pub mode: GameMode,
}

impl GameConfig {
    pub fn new(n: usize, resource: JointBox, mode: GameMode) -> Result<Self, GameError> {
        if n == 0 {
            return Err(GameError::ZeroLevels);
        }
        let limit = match mode {
            GameMode::Exact => MAX_LEVELS,
            GameMode::MonteCarlo { trials, .. } => {
                if trials == 0 {
                    return Err(GameError::NoTrials);
                }
                MAX_MC_LEVELS
            }
        };
        if n > limit {
            return Err(GameError::TooManyLevels(n));
        }
        resource.validate().into_result()?;
        Ok(Self { n, resource, mode })
    }

    pub fn data_bits(&self) -> u64 {
        1 << self.n
    }

    pub fn biases(&self) -> BiasPair {
        BiasPair::from_correlators(&self.resource.correlators())
    }
}

/// All paths with the same number of `y = 1` queries share one bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathClass {
    pub ones: usize,
    pub multiplicity: u64,
    pub bias: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "I")]
    pub info: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitResult {
    /// 1-based index of the data bit.
    #[serde(rename = "K")]
    pub k: u64,
    pub bias: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "I")]
    pub info: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameResult {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: u64,
    pub mode: GameMode,
    #[serde(flatten)]
    pub biases: BiasPair,
    pub message_bits: usize,
    pub unbiased: bool,
    pub classes: Vec<PathClass>,
    /// Per-bit rows; omitted in exact mode above [`PER_BIT_LIMIT`] data bits.
    #[serde(rename = "per_K", skip_serializing_if = "Option::is_none")]
    pub per_k: Option<Vec<BitResult>>,
    pub total: f64,
    pub ic_satisfied: bool,
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Exact total information `Σ_K I(a_K : guess)` from the level biases,
/// grouped by the number of `y = 1` queries on each path.
pub fn exact_classes(biases: BiasPair, n: usize) -> (Vec<PathClass>, f64) {
    let classes: Vec<PathClass> = (0..=n)
        .map(|ones| {
            let bias = biases.e_i.powi((n - ones) as i32) * biases.e_ii.powi(ones as i32);
            PathClass {
                ones,
                multiplicity: binomial(n, ones),
                bias,
                p: (1.0 + bias.abs()) / 2.0,
                info: information_from_bias(bias),
            }
        })
        .collect();
    let total = classes.iter().map(|c| c.multiplicity as f64 * c.info).sum();
    (classes, total)
}

pub fn exact_total_information(config: &GameConfig) -> Result<GameResult, GameError> {
    if config.mode != GameMode::Exact {
        return Err(GameError::WrongMode { expected: "exact" });
    }
    let biases = config.biases();
    let n = config.n;
    let big_n = config.data_bits();
    let (classes, total) = exact_classes(biases, n);
    let per_k = (big_n <= PER_BIT_LIMIT).then(|| {
        (0..big_n)
            .map(|k| {
                let bias = biases.path_bias(n, k);
                BitResult {
                    k: k + 1,
                    bias,
                    p: (1.0 + bias.abs()) / 2.0,
                    info: information_from_bias(bias),
                    trials: None,
                    stderr: None,
                }
            })
            .collect()
    });
    Ok(GameResult {
        n,
        big_n,
        mode: GameMode::Exact,
        biases,
        message_bits: MESSAGE_BITS,
        unbiased: config.resource.is_unbiased(),
        classes,
        per_k,
        total,
        ic_satisfied: total <= MESSAGE_BITS as f64,
    })
}

/// One level-1 round: Alice's message and the box state Bob decodes from.
#[derive(Debug, Clone, Copy)]
pub struct Level1<'a> {
    resource: &'a JointBox,
    pub x: u8,
    pub a: u8,
    pub message: u8,
}

impl Level1<'_> {
    /// Bob's guess of `a_y`: the message XOR his box output for input `y`.
    pub fn guess<R: Rng + ?Sized>(&self, y: u8, rng: &mut R) -> u8 {
        self.message ^ self.resource.sample_bob_given(self.x, self.a, y, rng)
    }
}

/// Alice's half of the two-bit protocol: `x = a0 ⊕ a1`, message `a0 ⊕ a`.
pub fn level1_protocol<'a, R: Rng + ?Sized>(
    a0: u8,
    a1: u8,
    resource: &'a JointBox,
    rng: &mut R,
) -> Level1<'a> {
    let x = a0 ^ a1;
    let a = resource.sample_alice(x, rng);
    Level1 {
        resource,
        x,
        a,
        message: a0 ^ a,
    }
}

/// One box use; `y`/`b` are `None` when Bob never queries that box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoxUse {
    pub level: u8,
    pub node: u32,
    pub x: u8,
    pub a: u8,
    pub y: Option<u8>,
    pub b: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    /// Alice's data bits as a `0`/`1` string, bit 1 first.
    pub data: String,
    /// 1-based target index.
    #[serde(rename = "K")]
    pub k: u64,
    pub uses: Vec<BoxUse>,
    pub message: u8,
    pub guess: u8,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub seed: u64,
    pub n: usize,
    pub trials: Vec<TrialRecord>,
}

impl Transcript {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serializes")
    }
}

/// Independent stream for trial `t`; results do not depend on scheduling.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn play_trial<R: Rng>(resource: &JointBox, biases: BiasPair, n: usize, rng: &mut R) -> TrialRecord {
    let big_n = 1usize << n;
    let data: Vec<u8> = (0..big_n).map(|_| rng.gen_range(0..2u8)).collect();
    let k = rng.gen_range(0..big_n);

    // Alice compresses level by level; uses[j][i] is box i of level j+1.
    let mut uses: Vec<Vec<BoxUse>> = Vec::with_capacity(n);
    let mut bits = data.clone();
    for level in 1..=n {
        let mut row = Vec::with_capacity(bits.len() / 2);
        let next: Vec<u8> = bits
            .chunks_exact(2)
            .enumerate()
            .map(|(node, pair)| {
                let round = level1_protocol(pair[0], pair[1], resource, rng);
                row.push(BoxUse {
                    level: level as u8,
                    node: node as u32,
                    x: round.x,
                    a: round.a,
                    y: None,
                    b: None,
                });
                round.message
            })
            .collect();
        uses.push(row);
        bits = next;
    }
    let message = bits[0];

    // Bob descends from the message towards data bit k.
    let mut guess = message;
    for level in (1..=n).rev() {
        let node = k >> level;
        let y = (k >> (level - 1) & 1) as u8;
        let u = &mut uses[level - 1][node];
        let b = resource.sample_bob_given(u.x, u.a, y, rng);
        u.y = Some(y);
        u.b = Some(b);
        guess ^= b;
    }
    if biases.path_bias(n, k as u64) < 0.0 {
        guess ^= 1;
    }
    TrialRecord {
        data: data.iter().map(|&d| char::from(b'0' + d)).collect(),
        k: k as u64 + 1,
        uses: uses.into_iter().flatten().collect(),
        message,
        guess,
        correct: guess == data[k],
    }
}

/// Plays the nested protocol `trials` times with sampled box outputs.
/// Each trial draws fresh data bits and a uniform target index.
pub fn monte_carlo_game(config: &GameConfig) -> Result<(GameResult, Transcript), GameError> {
    let GameMode::MonteCarlo { trials, seed } = config.mode else {
        return Err(GameError::WrongMode {
            expected: "monte_carlo",
        });
    };
    let n = config.n;
    let biases = config.biases();
    let resource = config.resource;
    let records: Vec<TrialRecord> = (0..trials as u64)
        .into_par_iter()
        .map(|t| play_trial(&resource, biases, n, &mut trial_rng(seed, t)))
        .collect();

    let big_n = config.data_bits();
    let mut counts = vec![(0usize, 0usize); big_n as usize];
    for r in &records {
        let slot = &mut counts[(r.k - 1) as usize];
        slot.0 += 1;
        slot.1 += r.correct as usize;
    }
    let per_k: Vec<BitResult> = counts
        .iter()
        .enumerate()
        .map(|(k, &(count, hits))| {
            let p = if count == 0 {
                0.5
            } else {
                hits as f64 / count as f64
            };
            BitResult {
                k: k as u64 + 1,
                bias: 2.0 * p - 1.0,
                p,
                info: information_from_success(p),
                trials: Some(count),
                stderr: Some(if count == 0 {
                    f64::NAN
                } else {
                    (p * (1.0 - p) / count as f64).sqrt()
                }),
            }
        })
        .collect();
    let total: f64 = per_k.iter().map(|b| b.info).sum();
    let (classes, _) = exact_classes(biases, n);
    let result = GameResult {
        n,
        big_n,
        mode: config.mode,
        biases,
        message_bits: MESSAGE_BITS,
        unbiased: resource.is_unbiased(),
        classes,
        per_k: Some(per_k),
        total,
        ic_satisfied: total <= MESSAGE_BITS as f64,
    };
    Ok((
        result,
        Transcript {
            seed,
            n,
            trials: records,
        },
    ))
}

/// Smallest level count `n ≤ n_max` whose exact total exceeds the one
/// communicated bit, or `None` if information causality holds throughout.
pub fn ic_threshold_scan(resource: &JointBox, n_max: usize) -> Result<Option<usize>, GameError> {
    if n_max > MAX_LEVELS {
        return Err(GameError::TooManyLevels(n_max));
    }
    resource.validate().into_result()?;
    Ok(threshold_for_biases(
        BiasPair::from_correlators(&resource.correlators()),
        n_max,
    ))
}

/// [`ic_threshold_scan`] on bare level biases.
pub fn threshold_for_biases(biases: BiasPair, n_max: usize) -> Option<usize> {
    (1..=n_max.min(MAX_LEVELS)).find(|&n| exact_classes(biases, n).1 > MESSAGE_BITS as f64)
}

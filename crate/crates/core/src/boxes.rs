//! The 16-entry probability table `P(a,b|x,y)` and everything that acts on it
//! directly: vertex constructors, validation, mixing, local relabelings and
//! sampling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::BoxError;

/// Tolerance for normalization and non-signalling checks on float tables.
pub const BOX_TOL: f64 = 1e-12;

/// Flat index of `P(a,b|x,y)` in the `(x, y, a, b)` row-major table.
#[inline]
pub const fn index(x: u8, y: u8, a: u8, b: u8) -> usize {
    ((x as usize) << 3) | ((y as usize) << 2) | ((a as usize) << 1) | (b as usize)
}

#[inline]
fn sign(bit: u8) -> f64 {
    if bit & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Label `(mu, nu, sigma)` of an extreme non-local box: `a ⊕ b = xy ⊕ mu·x ⊕ nu·y ⊕ sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NonlocalLabel {
    pub mu: bool,
    pub nu: bool,
    pub sigma: bool,
}

impl NonlocalLabel {
    pub const PR: NonlocalLabel = NonlocalLabel {
        mu: false,
        nu: false,
        sigma: false,
    };

    pub const fn new(mu: bool, nu: bool, sigma: bool) -> Self {
        Self { mu, nu, sigma }
    }

    /// Decodes the three low bits of `bits`, `mu` most significant.
    pub const fn from_bits(bits: u8) -> Self {
        Self::new(bits & 4 != 0, bits & 2 != 0, bits & 1 != 0)
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..8).map(Self::from_bits)
    }

    /// Output parity `a ⊕ b` required on inputs `(x, y)`.
    pub fn parity(&self, x: u8, y: u8) -> u8 {
        (x & y) ^ (self.mu as u8 & x) ^ (self.nu as u8 & y) ^ self.sigma as u8
    }
}

impl fmt::Display for NonlocalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "NL{}{}{}",
            self.mu as u8, self.nu as u8, self.sigma as u8
        )
    }
}

/// Label `(mu, nu, sigma, tau)` of a local deterministic box: `a = mu·x ⊕ nu`, `b = sigma·y ⊕ tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalLabel {
    pub mu: bool,
    pub nu: bool,
    pub sigma: bool,
    pub tau: bool,
}

impl LocalLabel {
    pub const fn new(mu: bool, nu: bool, sigma: bool, tau: bool) -> Self {
        Self { mu, nu, sigma, tau }
    }

    /// Decodes the four low bits of `bits`, `mu` most significant.
    pub const fn from_bits(bits: u8) -> Self {
        Self::new(bits & 8 != 0, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0)
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..16).map(Self::from_bits)
    }

    pub fn alice(&self, x: u8) -> u8 {
        (self.mu as u8 & x) ^ self.nu as u8
    }

    pub fn bob(&self, y: u8) -> u8 {
        (self.sigma as u8 & y) ^ self.tau as u8
    }
}

impl fmt::Display for LocalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "L{}{}{}{}",
            self.mu as u8, self.nu as u8, self.sigma as u8, self.tau as u8
        )
    }
}

/// One of the 24 vertices of the non-signalling polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vertex {
    Nonlocal(NonlocalLabel),
    Local(LocalLabel),
}

impl Vertex {
    /// The eight non-local vertices followed by the sixteen local ones.
    pub fn all() -> impl Iterator<Item = Vertex> {
        NonlocalLabel::all()
            .map(Vertex::Nonlocal)
            .chain(LocalLabel::all().map(Vertex::Local))
    }

    pub fn to_box(&self) -> JointBox {
        match self {
            Vertex::Nonlocal(l) => JointBox::nonlocal(*l),
            Vertex::Local(l) => JointBox::local(*l),
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, Vertex::Local(_))
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Nonlocal(l) => l.fmt(f),
            Vertex::Local(l) => l.fmt(f),
        }
    }
}

impl FromStr for Vertex {
    type Err = BoxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || BoxError::UnknownVertex(s.to_string());
        let (digits, nonlocal) = if let Some(rest) = s.strip_prefix("NL") {
            (rest, true)
        } else if let Some(rest) = s.strip_prefix('L') {
            (rest, false)
        } else {
            return Err(unknown());
        };
        let bits: Vec<bool> = digits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(unknown()),
            })
            .collect::<Result<_, _>>()?;
        match (nonlocal, bits.as_slice()) {
            (true, &[mu, nu, sigma]) => Ok(Vertex::Nonlocal(NonlocalLabel::new(mu, nu, sigma))),
            (false, &[mu, nu, sigma, tau]) => {
                Ok(Vertex::Local(LocalLabel::new(mu, nu, sigma, tau)))
            }
            _ => Err(unknown()),
        }
    }
}

/// The four correlators `C_xy = P(a = b|x,y) − P(a ≠ b|x,y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelatorVector {
    pub c00: f64,
    pub c01: f64,
    pub c10: f64,
    pub c11: f64,
}

impl CorrelatorVector {
    pub const fn new(c00: f64, c01: f64, c10: f64, c11: f64) -> Self {
        Self { c00, c01, c10, c11 }
    }

    /// Correlators of the isotropic box with bias `e`: `(e, e, e, −e)`.
    pub fn isotropic(e: f64) -> Self {
        Self::new(e, e, e, -e)
    }

    /// Entries in the order `(c00, c01, c10, c11)`.
    pub fn to_array(self) -> [f64; 4] {
        [self.c00, self.c01, self.c10, self.c11]
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn get(&self, x: u8, y: u8) -> f64 {
        match (x & 1, y & 1) {
            (0, 0) => self.c00,
            (0, _) => self.c01,
            (_, 0) => self.c10,
            _ => self.c11,
        }
    }

    /// Exchanges the roles of the two middle subscripts, `C01 ↔ C10`.
    pub fn swap_middle(self) -> Self {
        Self::new(self.c00, self.c10, self.c01, self.c11)
    }

    pub fn sum(&self) -> f64 {
        self.c00 + self.c01 + self.c10 + self.c11
    }

    pub fn sum_squares(&self) -> f64 {
        self.to_array().iter().map(|c| c * c).sum()
    }

    pub fn scale(self, w: f64) -> Self {
        Self::from_array(self.to_array().map(|c| c * w))
    }

    pub fn plus(self, other: Self) -> Self {
        Self::new(
            self.c00 + other.c00,
            self.c01 + other.c01,
            self.c10 + other.c10,
            self.c11 + other.c11,
        )
    }
}

/// One-party marginals `P(a|x)` and `P(b|y)`, indexed `[input][output]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Marginals {
    pub alice: [[f64; 2]; 2],
    pub bob: [[f64; 2]; 2],
    pub unbiased: bool,
}

/// Residuals of the three box invariants; each is a maximum absolute deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub normalization_residual: f64,
    /// Magnitude of the most negative entry, 0 if none.
    pub positivity_residual: f64,
    pub alice_signalling_residual: f64,
    pub bob_signalling_residual: f64,
    pub normalized: bool,
    pub positive: bool,
    pub non_signalling: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.normalized && self.positive && self.non_signalling
    }

    pub fn signalling_residual(&self) -> f64 {
        self.alice_signalling_residual
            .max(self.bob_signalling_residual)
    }

    /// Maps the first failing verdict to an error.
    pub fn into_result(self) -> Result<(), BoxError> {
        if !self.normalized || !self.positive {
            Err(BoxError::InvalidBox(self))
        } else if !self.non_signalling {
            Err(BoxError::SignallingBox {
                residual: self.signalling_residual(),
            })
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "normalization {:e} ({}), positivity {:e} ({}), signalling {:e} ({})",
            self.normalization_residual,
            if self.normalized { "ok" } else { "FAIL" },
            self.positivity_residual,
            if self.positive { "ok" } else { "FAIL" },
            self.signalling_residual(),
            if self.non_signalling { "ok" } else { "FAIL" },
        )
    }
}

/// A bipartite box: 16 probabilities `P(a,b|x,y)` stored `(x, y, a, b)` row-major.
///
/// Tables built through [`JointBox::from_table`] are not checked; use
/// [`JointBox::try_new`] or [`JointBox::validate`] when the source is untrusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointBox {
    p: [f64; 16],
}

impl JointBox {
    pub const fn from_table(p: [f64; 16]) -> Self {
        Self { p }
    }

    pub fn try_new(p: [f64; 16]) -> Result<Self, BoxError> {
        let b = Self::from_table(p);
        b.validate().into_result()?;
        Ok(b)
    }

    pub fn from_slice(p: &[f64]) -> Result<Self, BoxError> {
        let table: [f64; 16] = p.try_into().map_err(|_| BoxError::WrongLength(p.len()))?;
        Self::try_new(table)
    }

    pub fn table(&self) -> &[f64; 16] {
        &self.p
    }

    pub fn prob(&self, a: u8, b: u8, x: u8, y: u8) -> f64 {
        self.p[index(x, y, a, b)]
    }

    /// Extreme non-local box: `1/2` wherever `a ⊕ b = xy ⊕ mu·x ⊕ nu·y ⊕ sigma`.
    pub fn nonlocal(label: NonlocalLabel) -> Self {
        let mut p = [0.0; 16];
        for (x, y, a, b) in events() {
            if a ^ b == label.parity(x, y) {
                p[index(x, y, a, b)] = 0.5;
            }
        }
        Self { p }
    }

    /// The PR box, `NL000`.
    pub fn pr() -> Self {
        Self::nonlocal(NonlocalLabel::PR)
    }

    /// Local deterministic box: all weight on `a = mu·x ⊕ nu`, `b = sigma·y ⊕ tau`.
    pub fn local(label: LocalLabel) -> Self {
        let mut p = [0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                p[index(x, y, label.alice(x), label.bob(y))] = 1.0;
            }
        }
        Self { p }
    }

    /// White noise: every entry `1/4`.
    pub fn maximally_mixed() -> Self {
        Self { p: [0.25; 16] }
    }

    /// The unbiased box with the given correlators,
    /// `P(a,b|x,y) = (1 + (−1)^{a⊕b} C_xy) / 4`.
    pub fn from_correlators(c: CorrelatorVector) -> Result<Self, BoxError> {
        let mut p = [0.0; 16];
        for (x, y, a, b) in events() {
            p[index(x, y, a, b)] = (1.0 + sign(a ^ b) * c.get(x, y)) / 4.0;
        }
        Self::try_new(p)
    }

    /// Convex combination `Σ w_i · box_i`.
    pub fn mix(terms: &[(f64, &JointBox)]) -> Result<Self, BoxError> {
        let mut sum = 0.0;
        for (i, &(w, _)) in terms.iter().enumerate() {
            if w < 0.0 {
                return Err(BoxError::NegativeWeight {
                    index: i,
                    weight: w,
                });
            }
            sum += w;
        }
        if (sum - 1.0).abs() > BOX_TOL {
            return Err(BoxError::WeightSumMismatch { sum });
        }
        let mut p = [0.0; 16];
        for &(w, b) in terms {
            for (acc, q) in p.iter_mut().zip(b.p.iter()) {
                *acc += w * q;
            }
        }
        Ok(Self { p })
    }

    pub fn correlators(&self) -> CorrelatorVector {
        let c = |x: u8, y: u8| {
            (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| sign(a ^ b) * self.p[index(x, y, a, b)])
                .sum::<f64>()
        };
        CorrelatorVector::new(c(0, 0), c(0, 1), c(1, 0), c(1, 1))
    }

    fn alice_marginal(&self, a: u8, x: u8, y: u8) -> f64 {
        self.p[index(x, y, a, 0)] + self.p[index(x, y, a, 1)]
    }

    fn bob_marginal(&self, b: u8, x: u8, y: u8) -> f64 {
        self.p[index(x, y, 0, b)] + self.p[index(x, y, 1, b)]
    }

    pub fn validate(&self) -> ValidationReport {
        let mut normalization: f64 = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let s: f64 = (0..4).map(|ab| self.p[index(x, y, 0, 0) + ab]).sum();
                normalization = normalization.max((s - 1.0).abs());
            }
        }
        let min = self.p.iter().copied().fold(f64::INFINITY, f64::min);
        let positivity = if min < 0.0 || min.is_nan() { -min } else { 0.0 };
        let mut alice: f64 = 0.0;
        let mut bob: f64 = 0.0;
        for o in 0..2 {
            for i in 0..2 {
                alice =
                    alice.max((self.alice_marginal(o, i, 0) - self.alice_marginal(o, i, 1)).abs());
                bob = bob.max((self.bob_marginal(o, 0, i) - self.bob_marginal(o, 1, i)).abs());
            }
        }
        ValidationReport {
            normalization_residual: normalization,
            positivity_residual: positivity,
            alice_signalling_residual: alice,
            bob_signalling_residual: bob,
            normalized: normalization <= BOX_TOL,
            positive: positivity == 0.0 && !min.is_nan(),
            non_signalling: alice <= BOX_TOL && bob <= BOX_TOL,
        }
    }

    pub fn marginals(&self) -> Result<Marginals, BoxError> {
        let report = self.validate();
        if !report.non_signalling {
            return Err(BoxError::SignallingBox {
                residual: report.signalling_residual(),
            });
        }
        let mut alice = [[0.0; 2]; 2];
        let mut bob = [[0.0; 2]; 2];
        for i in 0..2u8 {
            for o in 0..2u8 {
                alice[i as usize][o as usize] = self.alice_marginal(o, i, 0);
                bob[i as usize][o as usize] = self.bob_marginal(o, 0, i);
            }
        }
        let unbiased = alice
            .iter()
            .chain(bob.iter())
            .flatten()
            .all(|m| (m - 0.5).abs() <= BOX_TOL);
        Ok(Marginals {
            alice,
            bob,
            unbiased,
        })
    }

    pub fn is_unbiased(&self) -> bool {
        self.marginals().map(|m| m.unbiased).unwrap_or(false)
    }

    /// Relabels the box: `Q[g(e)] = P[e]` for every event `e`.
    pub fn apply_symmetry(&self, g: &SymmetryElement) -> Self {
        let mut q = [0.0; 16];
        for e in events() {
            let (x, y, a, b) = g.map_event(e);
            q[index(x, y, a, b)] = self.p[index(e.0, e.1, e.2, e.3)];
        }
        Self { p: q }
    }

    /// Searches the relabeling orbit for the sign pattern
    /// `C00, C10, C01 ≥ 0, C11 ≤ 0`.
    ///
    /// When parity forbids the pattern, returns the orbit element with the
    /// largest `(C00 + C10)² + (C01 − C11)²` instead and `achieved = false`.
    pub fn canonicalize(&self) -> Canonical {
        let s_ic = |c: &CorrelatorVector| (c.c00 + c.c10).powi(2) + (c.c01 - c.c11).powi(2);
        let mut best: Option<(SymmetryElement, JointBox, f64)> = None;
        for g in SymmetryElement::all() {
            let image = self.apply_symmetry(&g);
            let c = image.correlators();
            if c.c00 >= 0.0 && c.c10 >= 0.0 && c.c01 >= 0.0 && c.c11 <= 0.0 {
                return Canonical {
                    element: g,
                    image,
                    achieved: true,
                };
            }
            let s = s_ic(&c);
            if best.as_ref().is_none_or(|(_, _, bs)| s > *bs) {
                best = Some((g, image, s));
            }
        }
        let (element, image, _) = best.expect("orbit is nonempty");
        Canonical {
            element,
            image,
            achieved: false,
        }
    }

    /// Draws `(a, b)` from `P(·,·|x,y)`.
    pub fn sample<R: Rng + ?Sized>(&self, x: u8, y: u8, rng: &mut R) -> (u8, u8) {
        let base = index(x, y, 0, 0);
        let ab = draw(&self.p[base..base + 4], rng);
        ((ab >> 1) as u8, (ab & 1) as u8)
    }

    /// Draws Alice's output from `P(a|x)` without fixing Bob's input.
    pub fn sample_alice<R: Rng + ?Sized>(&self, x: u8, rng: &mut R) -> u8 {
        let weights = [self.alice_marginal(0, x, 0), self.alice_marginal(1, x, 0)];
        draw(&weights, rng) as u8
    }

    /// Draws Bob's output from `P(b|a,x,y)`, completing a joint draw begun by
    /// [`JointBox::sample_alice`].
    pub fn sample_bob_given<R: Rng + ?Sized>(&self, x: u8, a: u8, y: u8, rng: &mut R) -> u8 {
        let weights = [self.p[index(x, y, a, 0)], self.p[index(x, y, a, 1)]];
        draw(&weights, rng) as u8
    }

    pub fn to_json(&self, meta: Option<&str>) -> String {
        serde_json::to_string(&BoxFile {
            p: self.p.to_vec(),
            meta: meta.map(str::to_string),
        })
        .expect("box serializes")
    }

    /// Parses `{"p": [16 numbers], "meta": ...}` and validates the table.
    pub fn from_json(s: &str) -> Result<(Self, Option<String>), BoxError> {
        let file: BoxFile = serde_json::from_str(s).map_err(|e| BoxError::Parse(e.to_string()))?;
        Ok((Self::from_slice(&file.p)?, file.meta))
    }
}

/// Result of [`JointBox::canonicalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonical {
    pub element: SymmetryElement,
    pub image: JointBox,
    pub achieved: bool,
}

/// On-disk box format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxFile {
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<String>,
}

/// All `(x, y, a, b)` in table order.
pub fn events() -> impl Iterator<Item = (u8, u8, u8, u8)> {
    (0..16u8).map(|i| (i >> 3 & 1, i >> 2 & 1, i >> 1 & 1, i & 1))
}

/// Inverse-CDF draw over unnormalized nonnegative weights.
fn draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..weights.len());
    }
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        acc += w;
        if u < acc {
            return i;
        }
    }
    last
}

/// Local relabeling: outputs `a → a ⊕ αx ⊕ β`, `b → b ⊕ γy ⊕ δ`, then input
/// flips, then an optional exchange of the parties. The 128 elements form a
/// group under [`SymmetryElement::then`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SymmetryElement {
    pub flip_a_const: bool,
    pub flip_a_x: bool,
    pub flip_b_const: bool,
    pub flip_b_y: bool,
    pub swap_x: bool,
    pub swap_y: bool,
    pub swap_parties: bool,
}

impl SymmetryElement {
    pub const IDENTITY: SymmetryElement = SymmetryElement {
        flip_a_const: false,
        flip_a_x: false,
        flip_b_const: false,
        flip_b_y: false,
        swap_x: false,
        swap_y: false,
        swap_parties: false,
    };

    pub fn from_bits(bits: u8) -> Self {
        let bit = |k: u8| bits >> k & 1 == 1;
        Self {
            flip_a_const: bit(0),
            flip_a_x: bit(1),
            flip_b_const: bit(2),
            flip_b_y: bit(3),
            swap_x: bit(4),
            swap_y: bit(5),
            swap_parties: bit(6),
        }
    }

    pub fn bits(&self) -> u8 {
        self.flip_a_const as u8
            | (self.flip_a_x as u8) << 1
            | (self.flip_b_const as u8) << 2
            | (self.flip_b_y as u8) << 3
            | (self.swap_x as u8) << 4
            | (self.swap_y as u8) << 5
            | (self.swap_parties as u8) << 6
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..128u8).map(Self::from_bits)
    }

    /// Image of the event `(x, y, a, b)`.
    pub fn map_event(&self, (x, y, a, b): (u8, u8, u8, u8)) -> (u8, u8, u8, u8) {
        let a = a ^ (self.flip_a_x as u8 & x) ^ self.flip_a_const as u8;
        let b = b ^ (self.flip_b_y as u8 & y) ^ self.flip_b_const as u8;
        let x = x ^ self.swap_x as u8;
        let y = y ^ self.swap_y as u8;
        if self.swap_parties {
            (y, x, b, a)
        } else {
            (x, y, a, b)
        }
    }

    fn permutation(&self) -> [usize; 16] {
        let mut perm = [0; 16];
        for (i, e) in events().enumerate() {
            let (x, y, a, b) = self.map_event(e);
            perm[i] = index(x, y, a, b);
        }
        perm
    }

    fn from_permutation(perm: &[usize; 16]) -> Self {
        Self::all()
            .find(|g| &g.permutation() == perm)
            .expect("relabelings are closed under composition and inversion")
    }

    /// The element acting as `self` followed by `next`.
    pub fn then(&self, next: &SymmetryElement) -> Self {
        let first = self.permutation();
        let second = next.permutation();
        Self::from_permutation(&first.map(|i| second[i]))
    }

    pub fn inverse(&self) -> Self {
        let perm = self.permutation();
        let mut inv = [0; 16];
        for (i, &j) in perm.iter().enumerate() {
            inv[j] = i;
        }
        Self::from_permutation(&inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nl(mu: u8, nu: u8, sigma: u8) -> JointBox {
        JointBox::nonlocal(NonlocalLabel::new(mu == 1, nu == 1, sigma == 1))
    }

    fn l(mu: u8, nu: u8, sigma: u8, tau: u8) -> JointBox {
        JointBox::local(LocalLabel::new(mu == 1, nu == 1, sigma == 1, tau == 1))
    }

    #[test]
    fn pr_box_support() {
        let pr = JointBox::pr();
        for (x, y, a, b) in events() {
            let expected = if a ^ b == x & y { 0.5 } else { 0.0 };
            assert_eq!(pr.prob(a, b, x, y), expected);
        }
    }

    #[test]
    fn anti_pr_flips_parity() {
        let anti = nl(0, 0, 1);
        for (x, y, a, b) in events() {
            let expected = if a ^ b == (x & y) ^ 1 { 0.5 } else { 0.0 };
            assert_eq!(anti.prob(a, b, x, y), expected);
        }
    }

    #[test]
    fn nonlocal_vertex_correlators() {
        assert_eq!(
            nl(1, 0, 0).correlators(),
            CorrelatorVector::new(1.0, 1.0, -1.0, 1.0)
        );
        assert_eq!(
            JointBox::pr().correlators(),
            CorrelatorVector::new(1.0, 1.0, 1.0, -1.0)
        );
    }

    #[test]
    fn local_vertex_correlators() {
        assert_eq!(
            l(0, 0, 0, 0).correlators(),
            CorrelatorVector::new(1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(
            l(0, 1, 0, 1).correlators(),
            CorrelatorVector::new(1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(
            l(1, 0, 1, 0).correlators(),
            CorrelatorVector::new(1.0, -1.0, -1.0, 1.0)
        );
        let b = l(0, 1, 0, 1);
        for x in 0..2 {
            for y in 0..2 {
                assert_eq!(b.prob(1, 1, x, y), 1.0);
            }
        }
    }

    #[test]
    fn maximally_mixed_is_uniform_and_unbiased() {
        let m = JointBox::maximally_mixed();
        assert!(m.table().iter().all(|&p| p == 0.25));
        assert_eq!(m.correlators(), CorrelatorVector::default());
        let marg = m.marginals().unwrap();
        assert!(marg.unbiased);
        assert!(marg
            .alice
            .iter()
            .chain(marg.bob.iter())
            .flatten()
            .all(|&p| p == 0.5));
    }

    #[test]
    fn every_nonlocal_vertex_follows_parity_rule() {
        for label in NonlocalLabel::all() {
            let c = JointBox::nonlocal(label).correlators();
            for x in 0..2 {
                for y in 0..2 {
                    let expected = sign(label.parity(x, y));
                    assert_eq!(c.get(x, y), expected, "{label} at ({x},{y})");
                }
            }
            let negatives = c.to_array().iter().filter(|&&v| v < 0.0).count();
            assert_eq!(negatives % 2, 1, "{label}");
        }
    }

    #[test]
    fn every_local_vertex_factorizes() {
        for label in LocalLabel::all() {
            let c = JointBox::local(label).correlators();
            for x in 0..2 {
                for y in 0..2 {
                    let expected = sign(label.alice(x)) * sign(label.bob(y));
                    assert_eq!(c.get(x, y), expected, "{label}");
                }
            }
        }
    }

    #[test]
    fn mix_examples() {
        let pr = JointBox::pr();
        assert_eq!(JointBox::mix(&[(1.0, &pr)]).unwrap(), pr);

        let noise = JointBox::maximally_mixed();
        let half = JointBox::mix(&[(0.5, &pr), (0.5, &noise)]).unwrap();
        assert_eq!(
            half.correlators(),
            CorrelatorVector::new(0.5, 0.5, 0.5, -0.5)
        );

        let mixed = JointBox::mix(&[(0.5, &pr), (0.3, &nl(1, 0, 0)), (0.2, &noise)]).unwrap();
        let c = mixed.correlators().to_array();
        for (got, want) in c.iter().zip([0.8, 0.8, 0.2, -0.2]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mix_rejects_bad_weights() {
        let pr = JointBox::pr();
        assert!(matches!(
            JointBox::mix(&[(-0.1, &pr), (1.1, &pr)]),
            Err(BoxError::NegativeWeight { index: 0, .. })
        ));
        assert!(matches!(
            JointBox::mix(&[(0.5, &pr), (0.4, &pr)]),
            Err(BoxError::WeightSumMismatch { .. })
        ));
    }

    #[test]
    fn marginals_examples() {
        let m = JointBox::pr().marginals().unwrap();
        assert!(m.unbiased);
        let m = l(0, 0, 0, 0).marginals().unwrap();
        assert!(!m.unbiased);
        assert_eq!(m.alice[0][0], 1.0);
        assert_eq!(m.alice[1][0], 1.0);
    }

    #[test]
    fn validate_flags_signalling_table() {
        assert!(JointBox::pr().validate().is_valid());
        let r = JointBox::pr().validate();
        assert_eq!(r.normalization_residual, 0.0);
        assert_eq!(r.signalling_residual(), 0.0);

        let mut p = [0.25; 16];
        p[index(0, 0, 0, 0)] = 0.6;
        p[index(0, 0, 0, 1)] = 0.2;
        p[index(0, 0, 1, 0)] = 0.1;
        p[index(0, 0, 1, 1)] = 0.1;
        let r = JointBox::from_table(p).validate();
        assert!(r.normalized && r.positive && !r.non_signalling);
        assert!(matches!(
            r.into_result(),
            Err(BoxError::SignallingBox { .. })
        ));
        assert!(matches!(
            JointBox::from_table(p).marginals(),
            Err(BoxError::SignallingBox { .. })
        ));

        let mut p = JointBox::maximally_mixed().table().to_owned();
        p[0] = -0.01;
        p[1] = 0.26;
        p[2] = 0.26;
        p[3] = 0.24 + 0.25;
        let r = JointBox::from_table(p).validate();
        assert!(!r.positive);
        assert!((r.positivity_residual - 0.01).abs() < 1e-15);
    }

    #[test]
    fn symmetry_examples() {
        let pr = JointBox::pr();
        assert_eq!(pr.apply_symmetry(&SymmetryElement::IDENTITY), pr);

        let flip_b = SymmetryElement {
            flip_b_const: true,
            ..Default::default()
        };
        let img = pr.apply_symmetry(&flip_b);
        assert_eq!(
            img.correlators(),
            CorrelatorVector::new(-1.0, -1.0, -1.0, 1.0)
        );
        assert_eq!(img, nl(0, 0, 1));

        let swap = SymmetryElement {
            swap_parties: true,
            ..Default::default()
        };
        let b = JointBox::mix(&[(0.4, &l(1, 0, 0, 1)), (0.35, &nl(0, 1, 0)), (0.25, &pr)]).unwrap();
        let c = b.correlators();
        let close = |u: CorrelatorVector, v: CorrelatorVector| {
            u.to_array()
                .iter()
                .zip(v.to_array())
                .all(|(p, q)| (p - q).abs() < 1e-15)
        };
        let d = b.apply_symmetry(&swap).correlators();
        assert!(close(d, CorrelatorVector::new(c.c00, c.c10, c.c01, c.c11)));

        let flip_ax = SymmetryElement {
            flip_a_x: true,
            ..Default::default()
        };
        let d = b.apply_symmetry(&flip_ax).correlators();
        assert!(close(
            d,
            CorrelatorVector::new(c.c00, c.c01, -c.c10, -c.c11)
        ));
    }

    #[test]
    fn symmetry_group_has_order_128() {
        let mut perms: Vec<_> = SymmetryElement::all().map(|g| g.permutation()).collect();
        perms.sort();
        perms.dedup();
        assert_eq!(perms.len(), 128);
        for g in SymmetryElement::all().step_by(5) {
            assert_eq!(g.then(&g.inverse()), SymmetryElement::IDENTITY);
            assert_eq!(SymmetryElement::from_bits(g.bits()), g);
        }
    }

    #[test]
    fn symmetry_maps_vertices_to_vertices() {
        let vertices: Vec<JointBox> = Vertex::all().map(|v| v.to_box()).collect();
        for g in SymmetryElement::all() {
            for v in &vertices {
                let img = v.apply_symmetry(&g);
                assert!(vertices.contains(&img));
            }
        }
    }

    #[test]
    fn canonicalize_reaches_sign_pattern() {
        let b = nl(1, 0, 0);
        let canon = b.canonicalize();
        assert!(canon.achieved);
        let c = canon.image.correlators();
        assert!(c.c00 >= 0.0 && c.c10 >= 0.0 && c.c01 >= 0.0 && c.c11 <= 0.0);

        // All four correlators positive: the product of signs is invariant,
        // so the pattern is unreachable.
        let local =
            JointBox::mix(&[(0.5, &l(0, 0, 0, 0)), (0.5, &JointBox::maximally_mixed())]).unwrap();
        let canon = local.canonicalize();
        assert!(!canon.achieved);
    }

    #[test]
    fn sample_respects_pr_support() {
        let pr = JointBox::pr();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (a, b) = pr.sample(0, 0, &mut rng);
            assert_eq!(a, b);
            let (a, b) = pr.sample(1, 1, &mut rng);
            assert_ne!(a, b);
        }
    }

    #[test]
    fn sample_is_seed_deterministic() {
        let b = JointBox::from_correlators(CorrelatorVector::isotropic(0.3)).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|i| b.sample(i % 2, (i / 2) % 2, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }

    #[test]
    fn sampled_correlator_matches_analytic() {
        let pr = JointBox::pr();
        let b = JointBox::mix(&[(0.3, &pr), (0.7, &JointBox::maximally_mixed())]).unwrap();
        let c00 = b.correlators().c00;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let agree = (0..n).filter(|_| {
            let (a, b) = b.sample(0, 0, &mut rng);
            a == b
        });
        let empirical = 2.0 * agree.count() as f64 / n as f64 - 1.0;
        // C = 2q − 1 with q binomial: σ_C = 2 √(q(1 − q)/n).
        let q = (1.0 + c00) / 2.0;
        let sigma = 2.0 * (q * (1.0 - q) / n as f64).sqrt();
        assert!(
            (empirical - c00).abs() < 4.0 * sigma,
            "{empirical} vs {c00}"
        );
    }

    #[test]
    fn sequential_sampling_matches_joint_distribution() {
        let b = JointBox::mix(&[(0.6, &l(1, 1, 0, 1)), (0.4, &nl(0, 1, 1))]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let a = b.sample_alice(1, &mut rng);
            let bb = b.sample_bob_given(1, a, 0, &mut rng);
            counts[(a * 2 + bb) as usize] += 1;
        }
        for (ab, &count) in counts.iter().enumerate() {
            let p = b.prob((ab >> 1) as u8, (ab & 1) as u8, 1, 0);
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((count as f64 / n as f64 - p).abs() <= 5.0 * sigma + 1e-12);
        }
    }

    #[test]
    fn vertex_names_round_trip() {
        let names: Vec<String> = Vertex::all().map(|v| v.to_string()).collect();
        assert_eq!(names.len(), 24);
        assert_eq!(names[0], "NL000");
        assert_eq!(names[8], "L0000");
        for n in &names {
            assert_eq!(&n.parse::<Vertex>().unwrap().to_string(), n);
        }
        assert!("NL00".parse::<Vertex>().is_err());
        assert!("L0102".parse::<Vertex>().is_err());
        assert!("X000".parse::<Vertex>().is_err());
    }

    #[test]
    fn json_format() {
        let pr = JointBox::pr();
        let s = pr.to_json(Some("NL000"));
        assert!(s.starts_with("{\"p\":[0.5,0.0,0.0,0.5,"));
        let (back, meta) = JointBox::from_json(&s).unwrap();
        assert_eq!(back, pr);
        assert_eq!(meta.as_deref(), Some("NL000"));
        assert!(matches!(
            JointBox::from_json("{\"p\":[0.25,0.25]}"),
            Err(BoxError::WrongLength(2))
        ));
    }

    fn vertex_mixture() -> impl Strategy<Value = JointBox> {
        prop::collection::vec(0.0f64..1.0, 24).prop_map(|w| {
            let total: f64 = w.iter().sum::<f64>().max(1e-9);
            let boxes: Vec<JointBox> = Vertex::all().map(|v| v.to_box()).collect();
            let terms: Vec<(f64, &JointBox)> =
                w.iter().map(|wi| wi / total).zip(boxes.iter()).collect();
            let mut p = [0.0; 16];
            for (wi, b) in terms {
                for (acc, q) in p.iter_mut().zip(b.table()) {
                    *acc += wi * q;
                }
            }
            JointBox::from_table(p)
        })
    }

    proptest! {
        #[test]
        fn correlators_are_affine(p in vertex_mixture(), q in vertex_mixture(), w in 0.0f64..=1.0) {
            let m = JointBox::mix(&[(w, &p), (1.0 - w, &q)]).unwrap();
            let lhs = m.correlators().to_array();
            let rhs = p.correlators().scale(w).plus(q.correlators().scale(1.0 - w)).to_array();
            for (a, b) in lhs.iter().zip(rhs) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn symmetry_inverse_restores_box(p in vertex_mixture(), bits in 0u8..128) {
            let g = SymmetryElement::from_bits(bits);
            let back = p.apply_symmetry(&g).apply_symmetry(&g.inverse());
            prop_assert_eq!(back, p);
        }

        #[test]
        fn vertex_mixtures_validate(p in vertex_mixture(), bits in 0u8..128) {
            prop_assert!(p.validate().is_valid());
            prop_assert!(p.apply_symmetry(&SymmetryElement::from_bits(bits)).validate().is_valid());
        }
    }
}

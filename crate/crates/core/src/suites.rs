//! Randomized property suites behind `corrbox verify`.
//!
//! Each suite draws its inputs from a seeded ChaCha stream and counts
//! violations; a suite passes when the count is zero.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boxes::{
    CorrelatorVector, JointBox, LocalLabel, NonlocalLabel, SymmetryElement, Vertex,
};
use crate::criteria::{self, amgm_gap, chsh, geometry, merge_condition, quadratics, tlm};
use crate::game::{self, BiasPair, GameConfig, GameMode};
use crate::slices::{self, MixtureFamily, SecondTerm};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    pub detail: String,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Name, default sample count, and description of every suite.
pub const SUITES: &[(&str, usize, &str)] = &[
    ("census", 24, "vertex CHSH values and quadratic forms"),
    ("affine", 10_000, "correlators are affine under mixing"),
    (
        "symmetry",
        10_000,
        "relabelings invert and preserve validity",
    ),
    ("amgm", 100_000, "AM-GM gap is nonnegative"),
    (
        "dominance",
        100_000,
        "Landau-satisfied vectors satisfy the IC quadratic",
    ),
    ("geometry", 10_000, "vector identity S = sum C^2 + 2A"),
    (
        "equality",
        10_000,
        "gap vanishes exactly on equal omega pairs",
    ),
    (
        "permutation",
        10_000,
        "NLS quadratic is the IC quadratic with C01 and C10 swapped",
    ),
    ("local-soundness", 10_000, "local mixtures satisfy CHSH"),
    (
        "closed-form",
        1_000,
        "closed-form slice correlators match mixed tables",
    ),
    (
        "merge",
        100,
        "merging families have coinciding Landau and IC radii",
    ),
    (
        "no-merge",
        201,
        "local-vertex families never meet the merge condition",
    ),
    ("ray-order", 25, "Landau radius never exceeds IC radius"),
    ("bias", 10_000, "level biases reproduce the IC quadratic"),
    (
        "composition",
        20,
        "path bias equals brute-force enumeration for two levels",
    ),
    (
        "game-oracle",
        100_000,
        "Monte Carlo success rates within 5 sigma of exact",
    ),
    (
        "game-boundary",
        14,
        "threshold scan finds a witness iff e > 1/sqrt(2)",
    ),
];

pub fn suite_names() -> impl Iterator<Item = &'static str> {
    SUITES.iter().map(|s| s.0)
}

pub fn default_samples(name: &str) -> Option<usize> {
    SUITES.iter().find(|s| s.0 == name).map(|s| s.1)
}

/// Runs one suite; `samples = None` uses its default size.
pub fn run_suite(name: &str, samples: Option<usize>, seed: u64) -> Option<SuiteOutcome> {
    let (name, default, _) = *SUITES.iter().find(|s| s.0 == name)?;
    let n = samples.unwrap_or(default);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (checked, violations, detail) = match name {
        "census" => census(),
        "affine" => affine(n, &mut rng),
        "symmetry" => symmetry(n, &mut rng),
        "amgm" => amgm(n, &mut rng),
        "dominance" => dominance(n, &mut rng),
        "geometry" => geometry_identity(n, &mut rng),
        "equality" => equality(n, &mut rng),
        "permutation" => permutation(n, &mut rng),
        "local-soundness" => local_soundness(n, &mut rng),
        "closed-form" => closed_form(n, &mut rng),
        "merge" => merge(n),
        "no-merge" => no_merge(n),
        "ray-order" => ray_order(n),
        "bias" => bias(n, &mut rng),
        "composition" => composition(n, &mut rng),
        "game-oracle" => game_oracle(n, &mut rng),
        "game-boundary" => game_boundary(n),
        _ => unreachable!("listed suite"),
    };
    Some(SuiteOutcome {
        name,
        checked,
        violations,
        detail,
    })
}

type Tally = (usize, usize, String);

fn uniform_vector<R: Rng>(rng: &mut R) -> CorrelatorVector {
    CorrelatorVector::new(
        rng.gen_range(-1.0..=1.0),
        rng.gen_range(-1.0..=1.0),
        rng.gen_range(-1.0..=1.0),
        rng.gen_range(-1.0..=1.0),
    )
}

fn random_vertex_mixture<R: Rng>(rng: &mut R, vertices: &[JointBox]) -> JointBox {
    let weights: Vec<f64> = vertices
        .iter()
        .map(|_| -rng.gen::<f64>().max(1e-300).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    let terms: Vec<(f64, &JointBox)> = weights.iter().map(|w| w / total).zip(vertices).collect();
    let mut p = [0.0; 16];
    for (w, b) in terms {
        for (acc, q) in p.iter_mut().zip(b.table()) {
            *acc += w * q;
        }
    }
    JointBox::from_table(p)
}

fn all_vertices() -> Vec<JointBox> {
    Vertex::all().map(|v| v.to_box()).collect()
}

fn census() -> Tally {
    let mut bad = 0;
    for v in Vertex::all() {
        let c = v.to_box().correlators();
        let ch = chsh(&c).expect("vertex correlators are in range");
        let q = quadratics(&c).expect("vertex correlators are in range");
        let forms = [q.s_ic, q.s_nls, q.s_third];
        let ok = if v.is_local() {
            ch.b_max == 2.0 && forms.iter().all(|&s| s == 4.0 || s == 0.0)
        } else {
            let violated = forms.iter().filter(|&&s| s == 8.0).count();
            ch.b_max == 4.0
                && forms.iter().all(|&s| s == 0.0 || s == 8.0)
                && (violated == 1 || violated == 3)
        };
        bad += !ok as usize;
    }
    (24, bad, String::new())
}

fn affine<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let vertices = all_vertices();
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p = random_vertex_mixture(rng, &vertices);
        let q = random_vertex_mixture(rng, &vertices);
        let w: f64 = rng.gen();
        let m = JointBox::mix(&[(w, &p), (1.0 - w, &q)]).expect("weights sum to one");
        let want = p
            .correlators()
            .scale(w)
            .plus(q.correlators().scale(1.0 - w));
        let err = max_abs_diff(m.correlators(), want);
        worst = worst.max(err);
        bad += (err > 1e-12) as usize;
    }
    (n, bad, format!("max deviation {worst:e}"))
}

fn symmetry<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let vertices = all_vertices();
    let mut bad = 0;
    for _ in 0..n {
        let b = random_vertex_mixture(rng, &vertices);
        let g = SymmetryElement::from_bits(rng.gen_range(0..128));
        let img = b.apply_symmetry(&g);
        let ok = img.apply_symmetry(&g.inverse()) == b
            && b.validate().is_valid()
            && img.validate().is_valid();
        bad += !ok as usize;
    }
    (n, bad, String::new())
}

fn amgm<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for _ in 0..n {
        let g = amgm_gap(&uniform_vector(rng)).gap;
        worst = worst.min(g);
        bad += (g < -1e-12) as usize;
    }
    (n, bad, format!("min gap {worst:e}"))
}

fn dominance<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    let mut quantum = 0;
    for _ in 0..n {
        let c = uniform_vector(rng);
        if tlm(&c).expect("in range").satisfied {
            quantum += 1;
            bad += (criteria::s_ic(&c) > 4.0 + 1e-9) as usize;
        }
    }
    (n, bad, format!("{quantum} Landau-satisfied samples"))
}

fn canonical_vector<R: Rng>(rng: &mut R) -> CorrelatorVector {
    CorrelatorVector::new(
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..=1.0),
        rng.gen_range(0.0..=1.0),
        rng.gen_range(-1.0..=0.0),
    )
}

fn geometry_identity<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let c = canonical_vector(rng);
        let g = geometry(&c).expect("canonical sign pattern");
        worst = worst.max(g.identity_residual());
        bad += (g.identity_residual() > 1e-12 || g.s_from_vectors != criteria::s_ic(&c)) as usize;
    }
    (n, bad, format!("max residual {worst:e}"))
}

/// Half the samples are built on the equality set `|C00| = |C10|`,
/// `|C01| = |C11|`; the others are uniform. The gap must vanish on the
/// former and equal `(√ω00 − √ω10)² + (√ω01 − √ω11)²` everywhere.
fn equality<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    for i in 0..n {
        let c = if i % 2 == 0 {
            let (u, v): (f64, f64) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            let s = |r: &mut R| if r.gen::<bool>() { 1.0 } else { -1.0 };
            CorrelatorVector::new(u, v, s(rng) * u, s(rng) * v)
        } else {
            uniform_vector(rng)
        };
        let g = amgm_gap(&c);
        let split = (g.omega00.sqrt() - g.omega10.sqrt()).powi(2)
            + (g.omega01.sqrt() - g.omega11.sqrt()).powi(2);
        let mut ok = (g.gap - split).abs() <= 1e-12;
        if i % 2 == 0 {
            ok &= g.gap.abs() <= 1e-12;
            let abs = CorrelatorVector::new(c.c00.abs(), c.c01.abs(), c.c10.abs(), -c.c11.abs());
            ok &= merge_condition(&abs, 1e-12);
        }
        bad += !ok as usize;
    }
    (n, bad, String::new())
}

fn permutation<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    for _ in 0..n {
        let c = uniform_vector(rng);
        bad += ((criteria::s_nls(&c) - criteria::s_ic(&c.swap_middle())).abs() > 1e-12) as usize;
    }
    (n, bad, String::new())
}

fn local_soundness<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let locals: Vec<JointBox> = LocalLabel::all().map(JointBox::local).collect();
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let b = random_vertex_mixture(rng, &locals);
        let bmax = chsh(&b.correlators()).expect("in range").b_max;
        worst = worst.max(bmax);
        bad += (bmax > 2.0 + 1e-9) as usize;
    }
    (n, bad, format!("max B {worst}"))
}

fn random_family<R: Rng>(rng: &mut R) -> MixtureFamily {
    let base = NonlocalLabel::from_bits(rng.gen_range(0..8));
    let s = rng.gen_range(0..24u8);
    let second = if s < 8 {
        SecondTerm::Nonlocal(NonlocalLabel::from_bits(s))
    } else {
        SecondTerm::Local(LocalLabel::from_bits(s - 8))
    };
    MixtureFamily::new(base, second)
}

fn closed_form<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    for _ in 0..n {
        let f = random_family(rng);
        let (mut lambda, mut eta): (f64, f64) = (rng.gen(), rng.gen());
        if lambda + eta > 1.0 {
            (lambda, eta) = (1.0 - lambda, 1.0 - eta);
        }
        let spec = f.at(lambda, eta).expect("weights in the triangle");
        let closed = match f.second {
            SecondTerm::Nonlocal(l) => slices::case_a_correlators(f.base, l, lambda, eta),
            SecondTerm::Local(l) => slices::case_b_correlators(f.base, l, lambda, eta),
            SecondTerm::Noise => unreachable!(),
        }
        .expect("weights in the triangle");
        let built = spec.to_box().expect("valid mixture");
        bad += (max_abs_diff(closed, built.correlators()) > 1e-12) as usize;
    }
    (n, bad, String::new())
}

/// Families `NL0νσ + NL0ν'σ'` with distinct vertices.
fn merging_families() -> Vec<MixtureFamily> {
    let mu0: Vec<NonlocalLabel> = NonlocalLabel::all().filter(|l| !l.mu).collect();
    let mut out = Vec::new();
    for &a in &mu0 {
        for &b in &mu0 {
            if a != b {
                out.push(MixtureFamily::new(a, SecondTerm::Nonlocal(b)));
            }
        }
    }
    out
}

fn merge(n_rays: usize) -> Tally {
    let tol = slices::DEFAULT_TOL;
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    let families = merging_families();
    for f in &families {
        match slices::merge_report(f, n_rays, tol) {
            Ok(rep) => {
                worst = worst.max(rep.max_discrepancy);
                bad += (rep.max_discrepancy > 10.0 * tol) as usize;
            }
            Err(_) => bad += 1,
        }
        let grid = slices::sweep(f, 41).expect("resolution >= 2");
        bad += grid
            .classified()
            .filter(|c| !merge_condition(&c.values.expect("classified").c, 1e-12))
            .count();
    }
    (
        families.len(),
        bad,
        format!("max radius discrepancy {worst:e}"),
    )
}

fn no_merge(resolution: usize) -> Tally {
    let mut bad = 0;
    let mut cells = 0;
    for base in NonlocalLabel::all() {
        for second in LocalLabel::all().step_by(5) {
            let f = MixtureFamily::new(base, SecondTerm::Local(second));
            let grid = slices::sweep(&f, resolution.max(2)).expect("resolution >= 2");
            for c in grid.classified().filter(|c| c.eta > 1e-9) {
                cells += 1;
                bad += merge_condition(&c.values.expect("classified").c, 1e-12) as usize;
            }
        }
    }
    (cells, bad, String::new())
}

fn ray_order(n_rays: usize) -> Tally {
    let tol = slices::DEFAULT_TOL;
    let mut bad = 0;
    let mut rays = 0;
    for base in NonlocalLabel::all() {
        for s in 0..24u8 {
            let second = if s < 8 {
                SecondTerm::Nonlocal(NonlocalLabel::from_bits(s))
            } else {
                SecondTerm::Local(LocalLabel::from_bits(s - 8))
            };
            match slices::merge_report(&MixtureFamily::new(base, second), n_rays, tol) {
                Ok(rep) => {
                    for r in &rep.rays {
                        rays += 1;
                        bad += (r.r_tlm > r.r_ic + tol) as usize;
                    }
                }
                Err(_) => bad += 1,
            }
        }
    }
    (rays, bad, String::new())
}

fn bias<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    for _ in 0..n {
        let c = uniform_vector(rng);
        bad +=
            ((BiasPair::from_correlators(&c).s_ic() - criteria::s_ic(&c)).abs() > 1e-12) as usize;
    }
    (n, bad, String::new())
}

/// Random unbiased box whose correlators stay inside `[-1, 1]`.
fn random_unbiased_box<R: Rng>(rng: &mut R) -> JointBox {
    JointBox::from_correlators(uniform_vector(rng)).expect("correlators in range")
}

/// Success probability of the two-level protocol for target `k` (0-based),
/// by summing over all 16 data patterns and all outcomes of the three boxes.
pub fn brute_force_two_level(resource: &JointBox, k: usize) -> f64 {
    let biases = BiasPair::from_correlators(&resource.correlators());
    let flip = biases.path_bias(2, k as u64) < 0.0;
    let top_y = (k >> 1) as u8 & 1;
    let low_y = k as u8 & 1;
    let on_path = k >> 1;
    let mut success = 0.0;
    for data in 0..16u8 {
        let d = |i: u8| data >> i & 1;
        // Level-1 boxes 0 and 1 (pairs (d0,d1), (d2,d3)), then the level-2 box.
        let x0 = d(0) ^ d(1);
        let x1 = d(2) ^ d(3);
        let y_low = |node: usize| if node == on_path { low_y } else { 0 };
        for o0 in 0..4u8 {
            let (a0, b0) = (o0 >> 1, o0 & 1);
            let p0 = resource.prob(a0, b0, x0, y_low(0));
            for o1 in 0..4u8 {
                let (a1, b1) = (o1 >> 1, o1 & 1);
                let p1 = resource.prob(a1, b1, x1, y_low(1));
                let c0 = d(0) ^ a0;
                let c1 = d(2) ^ a1;
                let x2 = c0 ^ c1;
                for o2 in 0..4u8 {
                    let (a2, b2) = (o2 >> 1, o2 & 1);
                    let p2 = resource.prob(a2, b2, x2, top_y);
                    let message = c0 ^ a2;
                    let b_low = if on_path == 0 { b0 } else { b1 };
                    let guess = message ^ b2 ^ b_low ^ flip as u8;
                    if guess == d(k as u8) {
                        success += p0 * p1 * p2 / 16.0;
                    }
                }
            }
        }
    }
    success
}

fn composition<R: Rng>(n: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let b = if i == 0 {
            JointBox::pr()
        } else {
            random_unbiased_box(rng)
        };
        let biases = BiasPair::from_correlators(&b.correlators());
        for k in 0..4 {
            let want = (1.0 + biases.path_bias(2, k as u64).abs()) / 2.0;
            let err = (brute_force_two_level(&b, k) - want).abs();
            worst = worst.max(err);
            bad += (err > 1e-12) as usize;
        }
    }
    (4 * n, bad, format!("max deviation {worst:e}"))
}

fn game_oracle<R: Rng>(trials: usize, rng: &mut R) -> Tally {
    let mut bad = 0;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        let b = random_unbiased_box(rng);
        let seed = rng.gen();
        let cfg = GameConfig::new(
            n,
            b,
            GameMode::MonteCarlo {
                trials: trials.max(1),
                seed,
            },
        )
        .expect("valid config");
        let (mc, _) = game::monte_carlo_game(&cfg).expect("monte carlo mode");
        let biases = cfg.biases();
        for bit in mc.per_k.as_deref().unwrap_or_default() {
            let exact = (1.0 + biases.path_bias(n, bit.k - 1).abs()) / 2.0;
            let count = bit.trials.unwrap_or(0).max(1) as f64;
            let sigma = (exact * (1.0 - exact) / count).sqrt();
            let z = if sigma > 0.0 {
                (bit.p - exact).abs() / sigma
            } else {
                (bit.p - exact).abs() * 1e12
            };
            worst = worst.max(z);
            checked += 1;
            bad += (z > 5.0) as usize;
        }
    }
    (checked, bad, format!("max |z| {worst:.3}"))
}

fn game_boundary(n_max: usize) -> Tally {
    let mut bad = 0;
    for i in 0..=10 {
        let e = i as f64 / 10.0;
        let witness = game::threshold_for_biases(BiasPair::isotropic(e), n_max).is_some();
        bad += (witness != (e > FRAC_1_SQRT_2 + 1e-9)) as usize;
    }
    (11, bad, String::new())
}

fn max_abs_diff(a: CorrelatorVector, b: CorrelatorVector) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for name in suite_names() {
            let samples = match name {
                "merge" => Some(10),
                "no-merge" => Some(21),
                "ray-order" => Some(5),
                "game-oracle" => Some(20_000),
                "game-boundary" => None,
                _ => Some(500),
            };
            let out = run_suite(name, samples, 17).unwrap();
            assert!(out.passed(), "{name}: {out:?}");
            assert!(out.checked > 0, "{name}");
        }
        assert!(run_suite("nope", None, 0).is_none());
    }

    #[test]
    fn brute_force_matches_pr_and_noise() {
        for k in 0..4 {
            assert_eq!(brute_force_two_level(&JointBox::pr(), k), 1.0);
            assert!((brute_force_two_level(&JointBox::maximally_mixed(), k) - 0.5).abs() < 1e-15);
        }
    }
}

//! Two-parameter mixture families `λ·NL + η·B + (1 − λ − η)·noise`, their
//! closed-form correlators, grid classification and ray bisection of the
//! criterion boundaries.

use std::f64::consts::FRAC_PI_2;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::{CorrelatorVector, JointBox, LocalLabel, NonlocalLabel, Vertex};
use crate::criteria::{self, TLM_TOL, VERDICT_TOL};
use crate::error::SliceError;
use crate::fmt::g12;

/// Slack on `λ + η ≤ 1`.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Pre-sampling points used to check that a criterion crosses once along a ray.
pub const RAY_PRESAMPLES: usize = 33;
pub const DEFAULT_RESOLUTION: usize = 201;
pub const DEFAULT_TOL: f64 = 1e-8;
/// A ray point counts as satisfying a criterion when its margin is at least `-RAY_EPS`.
const RAY_EPS: f64 = 1e-12;

#[inline]
fn sign(bit: bool) -> f64 {
    if bit {
        -1.0
    } else {
        1.0
    }
}

/// The term weighted by `η`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SecondTerm {
    Nonlocal(NonlocalLabel),
    Local(LocalLabel),
    /// No second vertex: `η` adds to the white-noise weight.
    Noise,
}

/// A family of mixtures parametrized by `(λ, η)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MixtureFamily {
    pub base: NonlocalLabel,
    pub second: SecondTerm,
}

impl MixtureFamily {
    pub fn new(base: NonlocalLabel, second: SecondTerm) -> Self {
        Self { base, second }
    }

    pub fn at(&self, lambda: f64, eta: f64) -> Result<MixtureSpec, SliceError> {
        MixtureSpec::new(self.base, self.second, lambda, eta)
    }

    /// Closed-form correlators at `(λ, η)` without weight validation.
    pub fn correlators_at(&self, lambda: f64, eta: f64) -> CorrelatorVector {
        let base = nonlocal_term(self.base).scale(lambda);
        let second = match self.second {
            SecondTerm::Nonlocal(l) => nonlocal_term(l).scale(eta),
            SecondTerm::Local(l) => local_term(l).scale(eta),
            SecondTerm::Noise => CorrelatorVector::default(),
        };
        base.plus(second)
    }

    /// Criterion margin at `(λ, η)`; nonnegative where the criterion holds.
    pub fn margin(&self, criterion: Criterion, lambda: f64, eta: f64) -> f64 {
        let c = self.correlators_at(lambda, eta);
        match criterion {
            Criterion::Local => criteria::LOCAL_BOUND - chsh_max(&c),
            Criterion::Quantum => {
                let t = tlm_unchecked(&c);
                t.1 - t.0
            }
            Criterion::Ic => criteria::QUADRATIC_BOUND - criteria::s_ic(&c),
            Criterion::Nls => criteria::QUADRATIC_BOUND - criteria::s_nls(&c),
            Criterion::Third => criteria::QUADRATIC_BOUND - criteria::s_third(&c),
            Criterion::NonSignalling => 1.0 - lambda - eta,
        }
    }
}

impl fmt::Display for MixtureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.second {
            SecondTerm::Nonlocal(l) => write!(f, "{}+{}", self.base, l),
            SecondTerm::Local(l) => write!(f, "{}+{}", self.base, l),
            SecondTerm::Noise => write!(f, "{}", self.base),
        }
    }
}

impl FromStr for MixtureFamily {
    type Err = SliceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || SliceError::UnknownFamily(s.to_string());
        let mut parts = s.split('+').map(str::trim);
        let base = match parts.next().map(str::parse::<Vertex>) {
            Some(Ok(Vertex::Nonlocal(l))) => l,
            _ => return Err(unknown()),
        };
        let second = match parts.next().map(str::parse::<Vertex>) {
            None => SecondTerm::Noise,
            Some(Ok(Vertex::Nonlocal(l))) => SecondTerm::Nonlocal(l),
            Some(Ok(Vertex::Local(l))) => SecondTerm::Local(l),
            Some(Err(_)) => return Err(unknown()),
        };
        if parts.next().is_some() {
            return Err(unknown());
        }
        Ok(Self { base, second })
    }
}

/// One member `λ·NL^{base} + η·second + (1 − λ − η)·noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureSpec {
    pub base: NonlocalLabel,
    pub second: SecondTerm,
    pub lambda: f64,
    pub eta: f64,
}

impl MixtureSpec {
    pub fn new(
        base: NonlocalLabel,
        second: SecondTerm,
        lambda: f64,
        eta: f64,
    ) -> Result<Self, SliceError> {
        check_weights(lambda, eta)?;
        Ok(Self {
            base,
            second,
            lambda,
            eta,
        })
    }

    pub fn family(&self) -> MixtureFamily {
        MixtureFamily::new(self.base, self.second)
    }

    pub fn correlators(&self) -> CorrelatorVector {
        self.family().correlators_at(self.lambda, self.eta)
    }

    /// Builds the mixture table from the vertex tables.
    pub fn to_box(&self) -> Result<JointBox, SliceError> {
        let base = JointBox::nonlocal(self.base);
        let noise = JointBox::maximally_mixed();
        let noise_weight = (1.0 - self.lambda - self.eta).max(0.0);
        let scale = self.lambda + self.eta + noise_weight;
        let second = match self.second {
            SecondTerm::Nonlocal(l) => JointBox::nonlocal(l),
            SecondTerm::Local(l) => JointBox::local(l),
            SecondTerm::Noise => noise,
        };
        Ok(JointBox::mix(&[
            (self.lambda / scale, &base),
            (self.eta / scale, &second),
            (noise_weight / scale, &noise),
        ])?)
    }
}

fn check_weights(lambda: f64, eta: f64) -> Result<(), SliceError> {
    if lambda >= 0.0 && eta >= 0.0 && lambda + eta <= 1.0 + WEIGHT_TOL {
        Ok(())
    } else {
        Err(SliceError::InvalidWeights { lambda, eta })
    }
}

/// Correlators of `NL^{μνσ}`: `C_xy = (−1)^{xy ⊕ μx ⊕ νy ⊕ σ}`.
fn nonlocal_term(l: NonlocalLabel) -> CorrelatorVector {
    let (mu, nu, sigma) = (l.mu, l.nu, l.sigma);
    CorrelatorVector::new(
        sign(sigma),
        sign(nu ^ sigma),
        sign(mu ^ sigma),
        sign(!(nu ^ mu ^ sigma)),
    )
}

/// Correlators of `L^{μνστ}`: `C_xy = (−1)^{μx ⊕ ν ⊕ σy ⊕ τ}`.
fn local_term(l: LocalLabel) -> CorrelatorVector {
    let (mu, nu, sigma, tau) = (l.mu, l.nu, l.sigma, l.tau);
    CorrelatorVector::new(
        sign(nu ^ tau),
        sign(nu ^ sigma ^ tau),
        sign(mu ^ nu ^ tau),
        sign(mu ^ nu ^ sigma ^ tau),
    )
}

/// Closed-form correlators of `λ·NL^{base} + η·NL^{second} + noise`.
pub fn case_a_correlators(
    base: NonlocalLabel,
    second: NonlocalLabel,
    lambda: f64,
    eta: f64,
) -> Result<CorrelatorVector, SliceError> {
    check_weights(lambda, eta)?;
    Ok(nonlocal_term(base)
        .scale(lambda)
        .plus(nonlocal_term(second).scale(eta)))
}

/// Closed-form correlators of `λ·NL^{base} + η·L^{second} + noise`.
pub fn case_b_correlators(
    base: NonlocalLabel,
    second: LocalLabel,
    lambda: f64,
    eta: f64,
) -> Result<CorrelatorVector, SliceError> {
    check_weights(lambda, eta)?;
    Ok(nonlocal_term(base)
        .scale(lambda)
        .plus(local_term(second).scale(eta)))
}

fn chsh_max(c: &CorrelatorVector) -> f64 {
    let total = c.sum();
    c.to_array()
        .iter()
        .map(|cxy| (total - 2.0 * cxy).abs())
        .fold(0.0, f64::max)
}

/// `(A, rhs)` of the Landau condition without the range check.
fn tlm_unchecked(c: &CorrelatorVector) -> (f64, f64) {
    let w = |x: f64| (1.0 - x * x).max(0.0);
    (
        (c.c00 * c.c10 - c.c01 * c.c11).abs(),
        (w(c.c00) * w(c.c10)).sqrt() + (w(c.c01) * w(c.c11)).sqrt(),
    )
}

/// Criteria whose boundaries are traced in a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// CHSH, `B ≤ 2`.
    Local,
    /// Landau condition.
    Quantum,
    /// Information-causality quadratic.
    Ic,
    /// Non-locality-swapping quadratic.
    Nls,
    /// Third quadratic.
    Third,
    /// `λ + η ≤ 1`.
    NonSignalling,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::Local,
        Criterion::Quantum,
        Criterion::Ic,
        Criterion::Nls,
        Criterion::Third,
        Criterion::NonSignalling,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Local => "local",
            Criterion::Quantum => "tlm",
            Criterion::Ic => "ic",
            Criterion::Nls => "nls",
            Criterion::Third => "third",
            Criterion::NonSignalling => "ns",
        }
    }

    /// Bit used in [`CellFlags`].
    pub fn flag(&self) -> u8 {
        1 << Criterion::ALL
            .iter()
            .position(|c| c == self)
            .expect("listed")
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s || (s == "quantum" && *c == Criterion::Quantum))
            .ok_or_else(|| format!("unknown criterion {s:?}"))
    }
}

/// Bit-vector of satisfied criteria, bit order `local, quantum, ic, nls, third, ns`.
/// Zero marks a cell outside the polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct CellFlags(pub u8);

impl CellFlags {
    pub fn has(&self, c: Criterion) -> bool {
        self.0 & c.flag() != 0
    }

    pub fn in_polytope(&self) -> bool {
        self.has(Criterion::NonSignalling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellValues {
    pub c: CorrelatorVector,
    pub b_max: f64,
    pub tlm_a: f64,
    pub tlm_rhs: f64,
    pub s_ic: f64,
    pub s_nls: f64,
    pub s_third: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
    pub eta: f64,
    /// `None` outside `λ + η ≤ 1`.
    pub values: Option<CellValues>,
    pub flags: CellFlags,
}

/// Classification of a `resolution × resolution` grid over `[0,1]²`; cell
/// `(i, j)` sits at `λ = i/(res−1)`, `η = j/(res−1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceGrid {
    #[serde(serialize_with = "serialize_display")]
    pub family: MixtureFamily,
    pub resolution: usize,
    pub step: f64,
    pub cells: Vec<Cell>,
}

fn serialize_display<S: serde::Serializer>(f: &MixtureFamily, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(f)
}

fn classify(family: &MixtureFamily, i: usize, j: usize, step: f64) -> Cell {
    let lambda = i as f64 * step;
    let eta = j as f64 * step;
    if lambda + eta > 1.0 + WEIGHT_TOL {
        return Cell {
            i,
            j,
            lambda,
            eta,
            values: None,
            flags: CellFlags(0),
        };
    }
    let c = family.correlators_at(lambda, eta);
    let b_max = chsh_max(&c);
    let (tlm_a, tlm_rhs) = tlm_unchecked(&c);
    let values = CellValues {
        c,
        b_max,
        tlm_a,
        tlm_rhs,
        s_ic: criteria::s_ic(&c),
        s_nls: criteria::s_nls(&c),
        s_third: criteria::s_third(&c),
    };
    let quad = |s: f64| s <= criteria::QUADRATIC_BOUND + VERDICT_TOL;
    let mut flags = 0;
    for (criterion, ok) in [
        (
            Criterion::Local,
            b_max <= criteria::LOCAL_BOUND + VERDICT_TOL,
        ),
        (Criterion::Quantum, tlm_a <= tlm_rhs + TLM_TOL),
        (Criterion::Ic, quad(values.s_ic)),
        (Criterion::Nls, quad(values.s_nls)),
        (Criterion::Third, quad(values.s_third)),
        (Criterion::NonSignalling, true),
    ] {
        if ok {
            flags |= criterion.flag();
        }
    }
    Cell {
        i,
        j,
        lambda,
        eta,
        values: Some(values),
        flags: CellFlags(flags),
    }
}

/// Classifies every grid cell of the family's `(λ, η)` triangle.
pub fn sweep(family: &MixtureFamily, resolution: usize) -> Result<SliceGrid, SliceError> {
    if resolution < 2 {
        return Err(SliceError::Resolution(resolution));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let cells = (0..resolution * resolution)
        .into_par_iter()
        .map(|k| classify(family, k / resolution, k % resolution, step))
        .collect();
    Ok(SliceGrid {
        family: *family,
        resolution,
        step,
        cells,
    })
}

pub const SLICE_CSV_HEADER: &str =
    "lambda,eta,c00,c01,c10,c11,b_max,tlm_a,tlm_rhs,s_ic,s_nls,s_third,flags";

impl SliceGrid {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.resolution + j]
    }

    pub fn classified(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.values.is_some())
    }

    /// One row per cell; out-of-polytope rows leave the numeric columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() * 160);
        out.push_str(SLICE_CSV_HEADER);
        out.push('\n');
        for cell in &self.cells {
            let _ = write!(out, "{},{}", g12(cell.lambda), g12(cell.eta));
            match &cell.values {
                Some(v) => {
                    for x in [
                        v.c.c00, v.c.c01, v.c.c10, v.c.c11, v.b_max, v.tlm_a, v.tlm_rhs, v.s_ic,
                        v.s_nls, v.s_third,
                    ] {
                        let _ = write!(out, ",{}", g12(x));
                    }
                }
                None => out.push_str(",,,,,,,,,,"),
            }
            let _ = writeln!(out, ",{}", cell.flags.0);
        }
        out
    }

    /// Static region map: λ to the right, η upwards.
    pub fn to_svg(&self) -> String {
        const CELL: usize = 3;
        const MARGIN: usize = 40;
        const LEGEND: usize = 170;
        let side = self.resolution * CELL;
        let width = side + 2 * MARGIN + LEGEND;
        let height = side + 2 * MARGIN;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        );
        let _ = writeln!(
            out,
            r#"<rect width="{width}" height="{height}" fill="white"/>"#
        );
        for cell in &self.cells {
            let Some(color) = region_color(cell.flags) else {
                continue;
            };
            let x = MARGIN + cell.i * CELL;
            let y = MARGIN + (self.resolution - 1 - cell.j) * CELL;
            let _ = writeln!(
                out,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{color}"/>"#
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">lambda</text>"#,
            MARGIN + side / 2,
            height - 10
        );
        let _ = writeln!(
            out,
            r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">eta</text>"#,
            MARGIN + side / 2,
            MARGIN + side / 2
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{}</text>"#,
            MARGIN + side / 2,
            self.family
        );
        let lx = side + 2 * MARGIN;
        for (k, (label, color)) in LEGEND_ENTRIES.iter().enumerate() {
            let y = MARGIN + k * 20;
            let _ = writeln!(
                out,
                r#"<rect x="{lx}" y="{y}" width="12" height="12" fill="{color}"/><text x="{}" y="{}" font-size="11">{label}</text>"#,
                lx + 18,
                y + 10
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

const LEGEND_ENTRIES: [(&str, &str); 4] = [
    ("local", "#4c72b0"),
    ("quantum (TLM)", "#55a868"),
    ("IC only", "#dd8452"),
    ("non-signalling", "#c44e52"),
];

fn region_color(flags: CellFlags) -> Option<&'static str> {
    if !flags.in_polytope() {
        None
    } else if flags.has(Criterion::Local) {
        Some(LEGEND_ENTRIES[0].1)
    } else if flags.has(Criterion::Quantum) {
        Some(LEGEND_ENTRIES[1].1)
    } else if flags.has(Criterion::Ic) {
        Some(LEGEND_ENTRIES[2].1)
    } else {
        Some(LEGEND_ENTRIES[3].1)
    }
}

/// Largest `r` with `r·(cos θ, sin θ)` inside `λ + η ≤ 1`.
pub fn ray_limit(theta: f64) -> f64 {
    1.0 / (theta.cos() + theta.sin())
}

fn ray_point(theta: f64, r: f64) -> (f64, f64) {
    ((r * theta.cos()).max(0.0), (r * theta.sin()).max(0.0))
}

/// Radius at which `criterion` stops holding along the ray at angle `theta`
/// (`θ ∈ [0, π/2]`), located by bisection to within `tol`. Returns the ray
/// length when the criterion holds all the way to the polytope edge.
pub fn boundary_along_ray(
    family: &MixtureFamily,
    theta: f64,
    criterion: Criterion,
    tol: f64,
) -> Result<f64, SliceError> {
    let r_max = ray_limit(theta);
    if criterion == Criterion::NonSignalling {
        return Ok(r_max);
    }
    let holds = |r: f64| {
        let (lambda, eta) = ray_point(theta, r);
        family.margin(criterion, lambda, eta) >= -RAY_EPS
    };
    locate_transition(r_max, tol, holds).ok_or(SliceError::NonMonotoneAlongRay { theta, criterion })
}

/// Bisection for the single point on `[0, r_max]` where `holds` turns false.
/// `None` when the coarse pre-sample shows more than one transition.
fn locate_transition(r_max: f64, tol: f64, holds: impl Fn(f64) -> bool) -> Option<f64> {
    let n = RAY_PRESAMPLES - 1;
    let samples: Vec<bool> = (0..=n)
        .map(|k| holds(r_max * k as f64 / n as f64))
        .collect();
    let Some(k) = samples.iter().position(|ok| !ok) else {
        return Some(r_max);
    };
    if samples[k..].iter().any(|&ok| ok) {
        return None;
    }
    if k == 0 {
        return Some(0.0);
    }
    let mut lo = r_max * (k - 1) as f64 / n as f64;
    let mut hi = r_max * k as f64 / n as f64;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Transition radii of every criterion along one ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCurve {
    pub theta: f64,
    pub r_local: f64,
    pub r_tlm: f64,
    pub r_ic: f64,
    pub r_nls: f64,
    pub r_third: f64,
    pub r_ns: f64,
    /// `|r_tlm − r_ic|`.
    pub merge_gap: f64,
    pub tol: f64,
}

pub fn boundary_curve(
    family: &MixtureFamily,
    theta: f64,
    tol: f64,
) -> Result<BoundaryCurve, SliceError> {
    let r = |c| boundary_along_ray(family, theta, c, tol);
    let r_tlm = r(Criterion::Quantum)?;
    let r_ic = r(Criterion::Ic)?;
    Ok(BoundaryCurve {
        theta,
        r_local: r(Criterion::Local)?,
        r_tlm,
        r_ic,
        r_nls: r(Criterion::Nls)?,
        r_third: r(Criterion::Third)?,
        r_ns: r(Criterion::NonSignalling)?,
        merge_gap: (r_tlm - r_ic).abs(),
        tol,
    })
}

/// Equally spaced angles covering `[0, π/2]`, endpoints included.
pub fn ray_angles(n_rays: usize) -> Vec<f64> {
    match n_rays {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n)
            .map(|k| FRAC_PI_2 * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeReport {
    #[serde(serialize_with = "serialize_display")]
    pub family: MixtureFamily,
    pub tol: f64,
    pub rays: Vec<BoundaryCurve>,
    pub max_discrepancy: f64,
    pub worst_theta: f64,
}

/// Quantum and information-causality radii on `n_rays` rays and their largest gap.
pub fn merge_report(
    family: &MixtureFamily,
    n_rays: usize,
    tol: f64,
) -> Result<MergeReport, SliceError> {
    if n_rays == 0 {
        return Err(SliceError::NoRays);
    }
    let rays = ray_angles(n_rays)
        .into_par_iter()
        .map(|theta| boundary_curve(family, theta, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let worst = rays
        .iter()
        .max_by(|a, b| a.merge_gap.total_cmp(&b.merge_gap))
        .expect("at least one ray");
    Ok(MergeReport {
        family: *family,
        tol,
        max_discrepancy: worst.merge_gap,
        worst_theta: worst.theta,
        rays,
    })
}

pub const BOUNDARY_CSV_HEADER: &str = "theta,r_local,r_tlm,r_ic,r_nls,r_ns,merge_gap";

impl MergeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(BOUNDARY_CSV_HEADER);
        out.push('\n');
        for r in &self.rays {
            let row = [
                r.theta,
                r.r_local,
                r.r_tlm,
                r.r_ic,
                r.r_nls,
                r.r_ns,
                r.merge_gap,
            ];
            let _ = writeln!(out, "{}", row.map(g12).join(","));
        }
        out
    }
}

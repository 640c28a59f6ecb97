//! Correlator-level criteria.
//!
//! Every test reports its raw value next to the verdict so that sweeps can use
//! signed distances to the bound. Verdicts on the CHSH and quadratic bounds
//! use an additive tolerance of [`VERDICT_TOL`]; the Landau condition uses
//! the tighter [`TLM_TOL`].

use serde::Serialize;

use crate::boxes::{CorrelatorVector, JointBox};
use crate::error::CriteriaError;

/// Additive slack on CHSH and quadratic bounds.
pub const VERDICT_TOL: f64 = 1e-9;
/// Additive slack on the Landau inequality `A ≤ rhs`.
pub const TLM_TOL: f64 = 1e-12;
/// Slack on the `[-1, 1]` range check; float mixtures overshoot by an ulp.
pub const RANGE_TOL: f64 = 1e-12;

pub const LOCAL_BOUND: f64 = 2.0;
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;
pub const NO_SIGNALLING_BOUND: f64 = 4.0;
pub const QUADRATIC_BOUND: f64 = 4.0;

/// Report label for the third quadratic form, which no known principle implies.
pub const THIRD_STATUS: &str = "conjectural bound";

const NAMES: [&str; 4] = ["C00", "C01", "C10", "C11"];

pub fn check_range(c: &CorrelatorVector) -> Result<(), CriteriaError> {
    for (name, value) in NAMES.iter().zip(c.to_array()) {
        // Negated so that NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(value.abs() <= 1.0 + RANGE_TOL) {
            return Err(CriteriaError::OutOfRangeCorrelator { name, value });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshReport {
    pub b00: f64,
    pub b01: f64,
    pub b10: f64,
    pub b11: f64,
    pub b_max: f64,
    pub local_ok: bool,
    pub tsirelson_ok: bool,
    pub nosignalling_max_ok: bool,
}

/// CHSH values `B_xy = |Σ C − 2 C_xy|` and their maximum.
pub fn chsh(c: &CorrelatorVector) -> Result<ChshReport, CriteriaError> {
    check_range(c)?;
    let total = c.sum();
    let b = |cxy: f64| (total - 2.0 * cxy).abs();
    let (b00, b01, b10, b11) = (b(c.c00), b(c.c01), b(c.c10), b(c.c11));
    let b_max = b00.max(b01).max(b10).max(b11);
    Ok(ChshReport {
        b00,
        b01,
        b10,
        b11,
        b_max,
        local_ok: b_max <= LOCAL_BOUND + VERDICT_TOL,
        tsirelson_ok: b_max <= TSIRELSON_BOUND + VERDICT_TOL,
        nosignalling_max_ok: b_max <= NO_SIGNALLING_BOUND + VERDICT_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TlmReport {
    pub a_value: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl TlmReport {
    /// `rhs − A`; nonnegative inside the quantum set.
    pub fn margin(&self) -> f64 {
        self.rhs - self.a_value
    }
}

fn omega(c: f64) -> f64 {
    (1.0 - c * c).max(0.0)
}

/// Landau's condition for unbiased quantum correlators:
/// `|C00 C10 − C01 C11| ≤ √((1−C00²)(1−C10²)) + √((1−C01²)(1−C11²))`.
pub fn tlm(c: &CorrelatorVector) -> Result<TlmReport, CriteriaError> {
    check_range(c)?;
    let a_value = (c.c00 * c.c10 - c.c01 * c.c11).abs();
    let rhs = (omega(c.c00) * omega(c.c10)).sqrt() + (omega(c.c01) * omega(c.c11)).sqrt();
    Ok(TlmReport {
        a_value,
        rhs,
        satisfied: a_value <= rhs + TLM_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticReport {
    /// `(C00 + C10)² + (C01 − C11)²`, the information-causality form.
    pub s_ic: f64,
    /// `(C00 + C01)² + (C10 − C11)²`, the non-locality-swapping form.
    pub s_nls: f64,
    /// `(C10 + C01)² + (C00 − C11)²`.
    pub s_third: f64,
    pub ic_ok: bool,
    pub nls_ok: bool,
    pub third_ok: bool,
}

pub fn s_ic(c: &CorrelatorVector) -> f64 {
    (c.c00 + c.c10).powi(2) + (c.c01 - c.c11).powi(2)
}

pub fn s_nls(c: &CorrelatorVector) -> f64 {
    (c.c00 + c.c01).powi(2) + (c.c10 - c.c11).powi(2)
}

pub fn s_third(c: &CorrelatorVector) -> f64 {
    (c.c10 + c.c01).powi(2) + (c.c00 - c.c11).powi(2)
}

pub fn quadratics(c: &CorrelatorVector) -> Result<QuadraticReport, CriteriaError> {
    check_range(c)?;
    let (ic, nls, third) = (s_ic(c), s_nls(c), s_third(c));
    let ok = |s: f64| s <= QUADRATIC_BOUND + VERDICT_TOL;
    Ok(QuadraticReport {
        s_ic: ic,
        s_nls: nls,
        s_third: third,
        ic_ok: ok(ic),
        nls_ok: ok(nls),
        third_ok: ok(third),
    })
}

/// Plane-vector picture of the information-causality form.
///
/// With `r1 = (C00, C01)`, `r2 = (−C10, C11)` and `r3 = (C11, C10)`, the
/// quadratic form is `|r1 − r2|²`, `r3` is `r2` rotated by a right angle, and
/// the Landau quantity is the parallelogram area spanned by `r1` and `r3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryReport {
    pub r1: [f64; 2],
    pub r2: [f64; 2],
    pub r3: [f64; 2],
    /// Signed angle from `r1` to `r3`.
    pub phi: f64,
    pub s_from_vectors: f64,
    pub a_area: f64,
    pub sum_c_squared: f64,
}

impl GeometryReport {
    /// `|S − (Σ C² + 2A)|`.
    pub fn identity_residual(&self) -> f64 {
        (self.s_from_vectors - (self.sum_c_squared + 2.0 * self.a_area)).abs()
    }
}

pub fn geometry(c: &CorrelatorVector) -> Result<GeometryReport, CriteriaError> {
    check_range(c)?;
    if !(c.c00 >= 0.0 && c.c10 >= 0.0 && c.c01 >= 0.0 && c.c11 <= 0.0) {
        return Err(CriteriaError::SignConventionViolated(c.to_array()));
    }
    let r1 = [c.c00, c.c01];
    let r2 = [-c.c10, c.c11];
    let r3 = [c.c11, c.c10];
    let diff = [r1[0] - r2[0], r1[1] - r2[1]];
    let cross = r1[0] * r3[1] - r1[1] * r3[0];
    let dot = r1[0] * r3[0] + r1[1] * r3[1];
    Ok(GeometryReport {
        r1,
        r2,
        r3,
        phi: cross.atan2(dot),
        s_from_vectors: diff[0] * diff[0] + diff[1] * diff[1],
        a_area: cross.abs(),
        sum_c_squared: c.sum_squares(),
    })
}

/// AM-GM slack between the quadratic bound 4 and its Landau-derived upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub omega00: f64,
    pub omega01: f64,
    pub omega10: f64,
    pub omega11: f64,
    pub gap: f64,
}

pub fn amgm_gap(c: &CorrelatorVector) -> GapReport {
    let (w00, w01, w10, w11) = (omega(c.c00), omega(c.c01), omega(c.c10), omega(c.c11));
    GapReport {
        omega00: w00,
        omega01: w01,
        omega10: w10,
        omega11: w11,
        gap: w00 + w10 + w01 + w11 - 2.0 * (w00 * w10).sqrt() - 2.0 * (w01 * w11).sqrt(),
    }
}

/// `C00 = C10` and `C01 = −C11` within `tol`, i.e. `r1 + r2 = 0`.
pub fn merge_condition(c: &CorrelatorVector, tol: f64) -> bool {
    (c.c00 - c.c10).abs() <= tol && (c.c01 + c.c11).abs() <= tol
}

/// Every criterion evaluated on one box, flattened for JSON/CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub c00: f64,
    pub c01: f64,
    pub c10: f64,
    pub c11: f64,
    pub b_max: f64,
    pub tlm_a: f64,
    pub tlm_rhs: f64,
    pub s_ic: f64,
    pub s_nls: f64,
    pub s_third: f64,
    pub gap: f64,
    pub merge: bool,
    pub unbiased: bool,
    pub local_ok: bool,
    pub tsirelson_ok: bool,
    pub quantum_ok: bool,
    pub ic_ok: bool,
    pub nls_ok: bool,
    pub third_ok: bool,
    pub third_status: &'static str,
}

pub const REPORT_CSV_HEADER: &str = "c00,c01,c10,c11,b_max,tlm_a,tlm_rhs,s_ic,s_nls,s_third,gap,merge,unbiased,local_ok,tsirelson_ok,quantum_ok,ic_ok,nls_ok,third_ok";

impl CriteriaReport {
    /// Row matching [`REPORT_CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        let floats = [
            self.c00,
            self.c01,
            self.c10,
            self.c11,
            self.b_max,
            self.tlm_a,
            self.tlm_rhs,
            self.s_ic,
            self.s_nls,
            self.s_third,
            self.gap,
        ];
        let flags = [
            self.merge,
            self.unbiased,
            self.local_ok,
            self.tsirelson_ok,
            self.quantum_ok,
            self.ic_ok,
            self.nls_ok,
            self.third_ok,
        ];
        floats
            .iter()
            .map(|&x| crate::fmt::g12(x))
            .chain(flags.iter().map(|b| b.to_string()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Tolerance used by [`full_report`] for the merge flag.
pub const MERGE_TOL: f64 = 1e-12;

pub fn full_report(b: &JointBox) -> Result<CriteriaReport, CriteriaError> {
    b.validate().into_result()?;
    let unbiased = b.marginals()?.unbiased;
    correlator_report(&b.correlators(), unbiased)
}

/// [`full_report`] for a bare correlator vector; `unbiased` is the caller's claim.
pub fn correlator_report(
    c: &CorrelatorVector,
    unbiased: bool,
) -> Result<CriteriaReport, CriteriaError> {
    let ch = chsh(c)?;
    let t = tlm(c)?;
    let q = quadratics(c)?;
    Ok(CriteriaReport {
        c00: c.c00,
        c01: c.c01,
        c10: c.c10,
        c11: c.c11,
        b_max: ch.b_max,
        tlm_a: t.a_value,
        tlm_rhs: t.rhs,
        s_ic: q.s_ic,
        s_nls: q.s_nls,
        s_third: q.s_third,
        gap: amgm_gap(c).gap,
        merge: merge_condition(c, MERGE_TOL),
        unbiased,
        local_ok: ch.local_ok,
        tsirelson_ok: ch.tsirelson_ok,
        quantum_ok: t.satisfied,
        ic_ok: q.ic_ok,
        nls_ok: q.nls_ok,
        third_ok: q.third_ok,
        third_status: THIRD_STATUS,
    })
}

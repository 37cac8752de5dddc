//! Problem specification, the semiclassical rescaling, and pointwise
//! evaluation of the principal symbols and of tr σ_k.
//!
//! A problem is a pair of real polynomials (P, Q) on ℝⁿ with deg P = m ≥ 1
//! and deg Q ≤ m. After rescaling, the top homogeneous part P_m picks up the
//! normalization "+1" while Q's top part stays unshifted; lower homogeneous
//! parts enter with fractional weights h^{j/(m+1)}.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::poly::{ellipticity_check, sphere_lattice, HomogeneousDecomposition, Polynomial};
use crate::{Error, Result};

const SPHERE_SAMPLES: usize = 8192;

/// Validated problem data: dimensions, polynomials, their homogeneous
/// decompositions, and the recorded top-degree nondegeneracy margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct ProblemSpec {
    n: usize,
    m: u32,
    p: Polynomial,
    q: Polynomial,
    p_parts: HomogeneousDecomposition,
    q_parts: HomogeneousDecomposition,
    p_m: Polynomial,
    q_m: Polynomial,
    ellipticity_margin: f64,
    ellipticity_witness: Vec<f64>,
    flipped: bool,
}

#[derive(Serialize, Deserialize)]
struct SpecRecord {
    n: usize,
    m: u32,
    #[serde(rename = "P")]
    p: Polynomial,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    q: Option<Polynomial>,
}

impl TryFrom<SpecRecord> for ProblemSpec {
    type Error = Error;
    fn try_from(r: SpecRecord) -> Result<Self> {
        ProblemSpec::new(r.n, r.m, r.p, r.q)
    }
}

impl From<ProblemSpec> for SpecRecord {
    fn from(s: ProblemSpec) -> Self {
        let q = if s.q.is_zero() { None } else { Some(s.q) };
        SpecRecord {
            n: s.n,
            m: s.m,
            p: s.p,
            q,
        }
    }
}

impl ProblemSpec {
    pub fn new(n: usize, m: u32, p: Polynomial, q: Option<Polynomial>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("dimension n must be ≥ 1".into()));
        }
        if m == 0 {
            return Err(Error::Input("degree m must be ≥ 1".into()));
        }
        if p.dim() != n {
            return Err(Error::Input(format!(
                "P has dimension {}, spec says n = {n}",
                p.dim()
            )));
        }
        let q = q.unwrap_or_else(|| Polynomial::zero(n));
        if q.dim() != n {
            return Err(Error::Input(format!(
                "Q has dimension {}, spec says n = {n}",
                q.dim()
            )));
        }
        if p.degree() != m as i64 {
            return Err(Error::Input(format!(
                "deg P = {} but spec says m = {m}",
                p.degree()
            )));
        }
        if q.degree() > m as i64 {
            return Err(Error::Input(format!(
                "deg Q = {} exceeds m = {m}",
                q.degree()
            )));
        }

        let mut p = p;
        let mut p_parts = p.homogeneous_decompose();
        let mut p_m = p_parts.part_or_zero(m, n);
        let q_parts = q.homogeneous_decompose();
        let q_m = q_parts.part_or_zero(m, n);

        let sphere = sphere_lattice(n, SPHERE_SAMPLES);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in &sphere {
            let v = p_m.eval(w)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let mut flipped = false;
        if hi < 0.0 {
            p = p.scale(-1.0);
            p_parts = p.homogeneous_decompose();
            p_m = p_parts.part_or_zero(m, n);
            (lo, hi) = (-hi, -lo);
            flipped = true;
        }
        if lo <= 0.0 && q.is_zero() {
            return Err(Error::Input(format!(
                "P_m is not sign-definite on the sphere (range [{lo:.3e}, {hi:.3e}]) and Q = 0"
            )));
        }

        let (ellipticity_margin, ellipticity_witness) =
            ellipticity_check(&p_m, &q_m, SPHERE_SAMPLES)?;

        Ok(ProblemSpec {
            n,
            m,
            p,
            q,
            p_parts,
            q_parts,
            p_m,
            q_m,
            ellipticity_margin,
            ellipticity_witness,
            flipped,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("spec parse: {e}")))
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn p(&self) -> &Polynomial {
        &self.p
    }
    pub fn q(&self) -> &Polynomial {
        &self.q
    }
    /// Top homogeneous part of P (after any sign normalization).
    pub fn p_m(&self) -> &Polynomial {
        &self.p_m
    }
    /// Degree-m homogeneous part of Q (zero polynomial when absent).
    pub fn q_m(&self) -> &Polynomial {
        &self.q_m
    }
    pub fn p_part(&self, degree: u32) -> Polynomial {
        self.p_parts.part_or_zero(degree, self.n)
    }
    pub fn q_part(&self, degree: u32) -> Polynomial {
        self.q_parts.part_or_zero(degree, self.n)
    }
    /// Infimum heuristic for P_m² + Q_m² on the unit sphere, with witness.
    pub fn ellipticity_margin(&self) -> f64 {
        self.ellipticity_margin
    }
    pub fn ellipticity_witness(&self) -> &[f64] {
        &self.ellipticity_witness
    }
    /// Whether P was negated at ingestion to enforce the P_m > 0 convention.
    pub fn flipped(&self) -> bool {
        self.flipped
    }
    pub fn ellipticity_ok(&self) -> bool {
        self.ellipticity_margin > 0.0
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Input(format!(
                "point has length {}, spec dimension is {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Pointwise data of the two h-principal symbols at (x, ξ).
#[derive(Debug, Clone, Copy)]
pub struct SymbolPoint {
    pub t: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub a0: f64,
    pub b0: f64,
}

/// (T, τ₁, τ₂) with T = ((P_m+1)² + Q_m²)^{1/2}, τ₁ = (P_m+1)/T,
/// τ₂ = |Q_m|/T.
pub fn tau_decomposition(spec: &ProblemSpec, x: &[f64]) -> Result<(f64, f64, f64)> {
    spec.check_point(x)?;
    let pm1 = spec.p_m.eval(x)? + 1.0;
    let qm = spec.q_m.eval(x)?;
    let t = pm1.hypot(qm);
    if t < 1e-300 {
        return Err(Error::Domain(format!(
            "T vanishes at x = {x:?}; the rescaled operator is singular there"
        )));
    }
    Ok((t, pm1 / t, qm.abs() / t))
}

/// Evaluates a₀ = (ξ² + T²)^{−1} and b₀ = τ₁·T·a₀ at (x, ξ).
pub fn principal_symbols(spec: &ProblemSpec, x: &[f64], xi: &[f64]) -> Result<SymbolPoint> {
    spec.check_point(x)?;
    spec.check_point(xi)?;
    let (t, tau1, tau2) = tau_decomposition(spec, x)?;
    let xi2: f64 = xi.iter().map(|v| v * v).sum();
    let a0 = 1.0 / (xi2 + t * t);
    let b0 = tau1 * t * a0;
    Ok(SymbolPoint {
        t,
        tau1,
        tau2,
        a0,
        b0,
    })
}

/// tr σ_k = 2·Re((b₀ + i√(a₀ − b₀²))^k). The radicand equals
/// (ξ² + Q_m²)/(ξ² + T²)² and is nonnegative up to rounding.
pub fn tr_sigma_k(spec: &ProblemSpec, x: &[f64], xi: &[f64], k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::Input("k must be ≥ 1".into()));
    }
    let s = principal_symbols(spec, x, xi)?;
    tr_sigma_k_point(&s, k)
}

/// Same as [`tr_sigma_k`] from an already-evaluated symbol point.
pub fn tr_sigma_k_point(s: &SymbolPoint, k: u32) -> Result<f64> {
    let radicand = s.a0 - s.b0 * s.b0;
    if radicand < -1e-12 * (1.0 + s.a0) {
        return Err(Error::Internal(format!(
            "a₀ − b₀² = {radicand:.3e} < 0 at a symbol point (a₀ = {:.6e}, b₀ = {:.6e})",
            s.a0, s.b0
        )));
    }
    let z = Complex64::new(s.b0, radicand.max(0.0).sqrt());
    Ok(2.0 * z.powu(k).re)
}

/// P(x,h) and Q(x,h) with the lower homogeneous parts weighted by
/// h^{j/(m+1)}; P carries the extra "+1".
#[derive(Debug, Clone)]
pub struct SemiclassicalPolynomial {
    pub h: f64,
    pub m: u32,
    pub p_h: Polynomial,
    pub q_h: Polynomial,
}

impl SemiclassicalPolynomial {
    pub fn eval_p(&self, x: &[f64]) -> Result<f64> {
        self.p_h.eval(x)
    }
    pub fn eval_q(&self, x: &[f64]) -> Result<f64> {
        self.q_h.eval(x)
    }
}

/// Assembles P(x,h) = (P_m + 1) + Σ_{j=1}^{m} h^{j/(m+1)} P_{m−j} and the
/// analogous Q(x,h) without the unit shift.
pub fn build_semiclassical(spec: &ProblemSpec, h: f64) -> Result<SemiclassicalPolynomial> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Input(format!(
            "h must be positive and finite, got {h}"
        )));
    }
    let n = spec.n();
    let m = spec.m();
    let exponent = |j: u32| h.powf(j as f64 / (m as f64 + 1.0));

    let mut p_h = spec.p_m().add(&Polynomial::constant(n, 1.0)?)?;
    let mut q_h = spec.q_m().clone();
    for j in 1..=m {
        let w = exponent(j);
        p_h = p_h.add(&spec.p_part(m - j).scale(w))?;
        q_h = q_h.add(&spec.q_part(m - j).scale(w))?;
    }
    Ok(SemiclassicalPolynomial { h, m, p_h, q_h })
}

/// Maps a rescaled eigenvalue back to the original problem:
/// λ = (λ′ − 1)·h^{−m/(m+1)}.
pub fn undilate(lambda_prime: Complex64, h: f64, m: u32) -> Complex64 {
    (lambda_prime - 1.0) * h.powf(-(m as f64) / (m as f64 + 1.0))
}

//! Sparse multivariate real polynomials: evaluation, homogeneous
//! decomposition, and the sampling-based ellipticity check for the pair
//! (P_m, Q_m).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sparse multivariate polynomial over ℝ. Terms are kept sorted by exponent
/// vector (graded lexicographic) with no duplicate exponent vectors and no
/// explicit zero coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRecord", into = "PolyRecord")]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// Wire format: `{"dim": n, "terms": [{"e": [...], "c": ...}]}`. Duplicate
/// exponent vectors are merged by summing coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolyRecord {
    dim: usize,
    terms: Vec<TermRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TermRecord {
    e: Vec<u32>,
    c: f64,
}

impl TryFrom<PolyRecord> for Polynomial {
    type Error = Error;

    fn try_from(rec: PolyRecord) -> Result<Self> {
        Polynomial::new(rec.dim, rec.terms.into_iter().map(|t| (t.e, t.c)).collect())
    }
}

impl From<Polynomial> for PolyRecord {
    fn from(p: Polynomial) -> Self {
        PolyRecord {
            dim: p.dim,
            terms: p
                .terms
                .into_iter()
                .map(|t| TermRecord {
                    e: t.exponents,
                    c: t.coeff,
                })
                .collect(),
        }
    }
}

fn graded_lex(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    let ta: u64 = a.iter().map(|&e| e as u64).sum();
    let tb: u64 = b.iter().map(|&e| e as u64).sum();
    ta.cmp(&tb).then_with(|| a.cmp(b))
}

impl Polynomial {
    /// Builds a polynomial, merging duplicate exponent vectors by summing
    /// coefficients and dropping exact zeros.
    pub fn new(dim: usize, terms: Vec<(Vec<u32>, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("polynomial dimension must be positive".into()));
        }
        let mut merged: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != dim {
                return Err(Error::Input(format!(
                    "exponent vector length {} does not match dim {}",
                    e.len(),
                    dim
                )));
            }
            if !c.is_finite() {
                return Err(Error::Input(format!("non-finite coefficient {c}")));
            }
            *merged.entry(e).or_insert(0.0) += c;
        }
        let mut terms: Vec<Term> = merged
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|(exponents, coeff)| Term { exponents, coeff })
            .collect();
        terms.sort_by(|a, b| graded_lex(&a.exponents, &b.exponents));
        Ok(Polynomial { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: vec![] }
    }

    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        Polynomial::new(dim, vec![(vec![0; dim], c)])
    }

    /// Single monomial c·x^e.
    pub fn monomial(dim: usize, e: Vec<u32>, c: f64) -> Result<Self> {
        Polynomial::new(dim, vec![(e, c)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max total degree; −1 for the zero polynomial by convention.
    pub fn degree(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| t.exponents.iter().map(|&e| e as i64).sum::<i64>())
            .max()
            .unwrap_or(-1)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Input(format!(
                "point of length {} for polynomial in {} variables",
                x.len(),
                self.dim
            )));
        }
        let mut acc = 0.0;
        for t in &self.terms {
            let mut m = t.coeff;
            for (xi, &e) in x.iter().zip(&t.exponents) {
                m *= xi.powi(e as i32);
            }
            acc += m;
        }
        Ok(acc)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.coeff * s != 0.0)
            .map(|t| Term {
                exponents: t.exponents.clone(),
                coeff: t.coeff * s,
            })
            .collect();
        Polynomial {
            dim: self.dim,
            terms,
        }
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        if self.dim != other.dim {
            return Err(Error::Input("dimension mismatch in polynomial sum".into()));
        }
        let mut terms: Vec<(Vec<u32>, f64)> = self
            .terms
            .iter()
            .map(|t| (t.exponents.clone(), t.coeff))
            .collect();
        terms.extend(other.terms.iter().map(|t| (t.exponents.clone(), t.coeff)));
        Polynomial::new(self.dim, terms)
    }

    /// Returns Some(d) when every term has total degree exactly d. The zero
    /// polynomial is homogeneous of every degree; returns Some(-1).
    pub fn homogeneous_degree(&self) -> Option<i64> {
        let d = self.degree();
        if self
            .terms
            .iter()
            .all(|t| t.exponents.iter().map(|&e| e as i64).sum::<i64>() == d)
        {
            Some(d)
        } else {
            None
        }
    }

    pub fn homogeneous_decompose(&self) -> HomogeneousDecomposition {
        let mut parts: BTreeMap<u32, Vec<(Vec<u32>, f64)>> = BTreeMap::new();
        for t in &self.terms {
            let d: u32 = t.exponents.iter().sum();
            parts
                .entry(d)
                .or_default()
                .push((t.exponents.clone(), t.coeff));
        }
        let parts: BTreeMap<u32, Polynomial> = parts
            .into_iter()
            .map(|(d, ts)| {
                (
                    d,
                    Polynomial::new(self.dim, ts).expect("terms already valid"),
                )
            })
            .collect();
        HomogeneousDecomposition {
            top_degree: self.degree(),
            parts,
        }
    }
}

/// Split of a polynomial into its homogeneous parts, keyed by degree.
#[derive(Debug, Clone)]
pub struct HomogeneousDecomposition {
    pub parts: BTreeMap<u32, Polynomial>,
    pub top_degree: i64,
}

impl HomogeneousDecomposition {
    pub fn part(&self, degree: u32) -> Option<&Polynomial> {
        self.parts.get(&degree)
    }

    /// Degree-j part, materializing zero when absent.
    pub fn part_or_zero(&self, degree: u32, dim: usize) -> Polynomial {
        self.parts
            .get(&degree)
            .cloned()
            .unwrap_or_else(|| Polynomial::zero(dim))
    }

    pub fn reconstruct(&self, dim: usize) -> Polynomial {
        let mut acc = Polynomial::zero(dim);
        for p in self.parts.values() {
            acc = acc.add(p).expect("parts share dim");
        }
        acc
    }
}

/// Deterministic, near-uniform point set on the unit sphere S^{n−1}.
///
/// n = 1 uses {±1}; n = 2 equally spaced angles; n = 3 a Fibonacci lattice;
/// higher n falls back to normalized SplitMix64 Gaussian samples.
pub fn sphere_lattice(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let count = count.max(2);
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * (i as f64) / (count as f64);
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * ((i as f64) + 0.5) / (count as f64);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let th = 2.0 * std::f64::consts::PI * (i as f64) / golden;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut state = 0x9e3779b97f4a7c15u64;
            let mut next = move || {
                state = state.wrapping_add(0x9e3779b97f4a7c15);
                let mut z = state;
                z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
                (z ^ (z >> 31)) as f64 / u64::MAX as f64
            };
            (0..count)
                .map(|_| {
                    let mut v: Vec<f64> = (0..dim)
                        .map(|_| {
                            let (u1, u2) = (next().max(1e-12), next());
                            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                        })
                        .collect();
                    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-300);
                    v.iter_mut().for_each(|c| *c /= norm);
                    v
                })
                .collect()
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|c| *c /= n);
    }
}

/// Heuristic check of the joint ellipticity condition on the top-degree pair:
/// estimates min over the unit sphere of P_m(ω)² + Q_m(ω)² by dense sampling
/// plus coordinate-descent refinement from the 10 best samples, and verifies
/// that (P_m+1)² + Q_m² stays positive on a sampled ball of radius 10.
///
/// Returns (margin, witness). margin > 0 means "plausibly satisfied" — this
/// is a sampling heuristic, not a positivity certificate. A margin of 0 is a
/// report of violation, not an error.
pub fn ellipticity_check(
    p_m: &Polynomial,
    q_m: &Polynomial,
    samples: usize,
) -> Result<(f64, Vec<f64>)> {
    if p_m.dim() != q_m.dim() {
        return Err(Error::Input("P_m and Q_m dimension mismatch".into()));
    }
    if samples == 0 {
        return Err(Error::Input("samples must be at least 1".into()));
    }
    let dp = p_m
        .homogeneous_degree()
        .ok_or_else(|| Error::Input("P_m is not homogeneous".into()))?;
    if dp < 1 {
        return Err(Error::Input("P_m must have degree at least 1".into()));
    }
    if !q_m.is_zero() {
        let dq = q_m
            .homogeneous_degree()
            .ok_or_else(|| Error::Input("Q_m is not homogeneous".into()))?;
        if dq != dp {
            return Err(Error::Input(format!(
                "degree mismatch: deg P_m = {dp}, deg Q_m = {dq}"
            )));
        }
    }
    let dim = p_m.dim();
    let f = |x: &[f64]| -> f64 {
        let p = p_m.eval(x).expect("dim checked");
        let q = q_m.eval(x).expect("dim checked");
        p * p + q * q
    };

    let lattice = sphere_lattice(dim, samples);
    let mut scored: Vec<(f64, usize)> = lattice.iter().map(|w| f(w)).zip(0..).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best_val = scored[0].0;
    let mut best_wit = lattice[scored[0].1].clone();

    // local refinement from the 10 best lattice points
    for &(_, idx) in scored.iter().take(10) {
        let mut w = lattice[idx].clone();
        let mut val = f(&w);
        let mut step = 0.1;
        while step > 1e-7 {
            let mut improved = false;
            for i in 0..dim {
                for sgn in [1.0, -1.0] {
                    let mut cand = w.clone();
                    cand[i] += sgn * step;
                    normalize(&mut cand);
                    let cv = f(&cand);
                    if cv < val {
                        val = cv;
                        w = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if val < best_val {
            best_val = val;
            best_wit = w;
        }
    }

    // shifted-pair positivity over a ball of radius 10
    let shell_dirs = sphere_lattice(dim, (samples / 8).max(16));
    let g = |x: &[f64]| -> f64 {
        let p = p_m.eval(x).expect("dim checked") + 1.0;
        let q = q_m.eval(x).expect("dim checked");
        p * p + q * q
    };
    let mut ball_min = g(&vec![0.0; dim]);
    let mut ball_wit = vec![0.0; dim];
    for level in 1..=20 {
        let r = 10.0 * (level as f64) / 20.0;
        for w in &shell_dirs {
            let x: Vec<f64> = w.iter().map(|c| c * r).collect();
            let v = g(&x);
            if v < ball_min {
                ball_min = v;
                ball_wit = x;
            }
        }
    }
    if ball_min <= 0.0 {
        return Ok((0.0, ball_wit));
    }

    Ok((best_val, best_wit))
}

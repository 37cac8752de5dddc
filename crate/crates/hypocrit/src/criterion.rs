//! Assembles the leading trace coefficient H₀;n,k by independent routes,
//! applies trace-class thresholds, and issues classification verdicts.
//!
//! Routes:
//! * `closedQ0` — closed form for Q = 0 (odd n vanishes by parity; even n
//!   reduces to a moment of (P_m+1));
//! * `semiNumeric` — radial-angular x-integral with the fiber integral
//!   C_{n,k} evaluated per point;
//! * `directOracle` — direct phase-space quadrature of tr σ_k, the coarse
//!   adjudicator for sign and exponent disputes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::fiber::c_nk_rform;
use crate::quad::{integrate_1d, integrate_rn, integrate_rn_pair, sphere_volume, Domain};
use crate::symbol::{principal_symbols, tau_decomposition, tr_sigma_k_point, ProblemSpec};
use crate::{poly, Error, Result};

/// Smallest k making the k-th power of the block operator trace class:
/// the least integer with k > n(m+1)/m.
pub fn trace_class_threshold(n: usize, m: u32) -> u32 {
    let n = n as u64;
    let m = m as u64;
    (n * (m + 1) / m) as u32 + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Route {
    #[serde(rename = "closedQ0")]
    ClosedQ0,
    #[serde(rename = "semiNumeric")]
    SemiNumeric,
    #[serde(rename = "directOracle")]
    DirectOracle,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::ClosedQ0 => "closedQ0",
            Route::SemiNumeric => "semiNumeric",
            Route::DirectOracle => "directOracle",
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RouteValue {
    pub value: f64,
    #[serde(rename = "errEstimate")]
    pub err_estimate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Indeterminate,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
            Sign::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CriterionReport {
    pub n: usize,
    pub m: u32,
    pub k: u32,
    pub k_min: u32,
    pub routes: BTreeMap<Route, RouteValue>,
    pub consistent: bool,
    pub best_route: Route,
    pub sign: Sign,
    pub nonvanishing: bool,
    /// |value| / errEstimate on the most accurate route (∞ when err = 0).
    pub margin: f64,
    pub verdict: String,
    pub paper_discrepancies: Vec<String>,
}

fn check_threshold(n: usize, m: u32, k: u32) -> Result<u32> {
    let k_min = trace_class_threshold(n, m);
    if k < k_min {
        return Err(Error::Domain(format!(
            "k below trace-class threshold {k_min} (n = {n}, m = {m}, k = {k})"
        )));
    }
    Ok(k_min)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn closed_q0_even(spec: &ProblemSpec, k: u32, tol: f64, exponent: i32) -> Result<RouteValue> {
    let n = spec.n();
    let ell = n / 2;
    let sign = if ell % 2 == 0 { 1.0 } else { -1.0 };
    let mut denom = 1.0;
    for i in 1..=n as u32 {
        denom *= (k - i) as f64;
    }
    let pref = 2.0 * sign * sphere_volume(n)? * factorial(n - 1) / denom;
    let p_m = spec.p_m().clone();
    let moment = integrate_rn(
        move |x: &[f64]| (p_m.eval(x).expect("dim checked") + 1.0).powi(exponent),
        n,
        tol,
    )?;
    if !moment.converged {
        return Err(Error::Numeric(format!(
            "moment quadrature did not converge (estimate {:.3e})",
            moment.err_estimate
        )));
    }
    Ok(RouteValue {
        value: pref * moment.value,
        err_estimate: pref.abs() * moment.err_estimate,
    })
}

/// Closed form for Q = 0: zero for odd n; for n = 2ℓ,
/// 2(−1)^ℓ·C_n·(n−1)!/((k−1)⋯(k−n))·∫(P_m+1)^{n−k} dx.
pub fn h0_closed_q0(spec: &ProblemSpec, k: u32, tol: f64) -> Result<RouteValue> {
    if !spec.q().is_zero() {
        return Err(Error::Input("closed route requires Q = 0".into()));
    }
    check_threshold(spec.n(), spec.m(), k)?;
    let n = spec.n();
    if n % 2 == 1 {
        return Ok(RouteValue {
            value: 0.0,
            err_estimate: 0.0,
        });
    }
    let (kk, nn, m) = (k as i64, n as i64, spec.m() as i64);
    if (kk - nn) * m <= nn {
        return Err(Error::Domain(format!(
            "moment integral diverges: (k−n)·m = {} ≤ n = {nn}",
            (kk - nn) * m
        )));
    }
    closed_q0_even(spec, k, tol, n as i32 - k as i32)
}

fn poisoned<T>(slot: &Mutex<Option<Error>>, e: Error, fallback: T) -> T {
    let mut guard = slot.lock().expect("poison slot");
    if guard.is_none() {
        *guard = Some(e);
    }
    fallback
}

/// H₀;n,k = 2·C_n·∫_{ℝⁿ} T^{n−k}·Re C_{n,k}(τ₁(x), τ₂(x)) dx, with the
/// fiber integral's own error estimate propagated through the outer
/// quadrature.
pub fn h0_semi_numeric(spec: &ProblemSpec, k: u32, tol: f64) -> Result<RouteValue> {
    let n = spec.n();
    check_threshold(n, spec.m(), k)?;
    if !spec.ellipticity_ok() {
        return Err(Error::Input(
            "top-degree nondegeneracy margin is not positive; refusing to integrate".into(),
        ));
    }
    if n > 3 {
        return Err(Error::Unsupported(format!("n = {n} > 3 not supported")));
    }
    let inner_tol = (tol / 10.0).max(1e-13);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let power = n as i32 - k as i32;
    let g = |x: &[f64]| -> (f64, f64) {
        let (t, tau1, tau2) = match tau_decomposition(spec, x) {
            Ok(v) => v,
            Err(e) => return poisoned(&failure, e, (0.0, 0.0)),
        };
        let fib = match c_nk_rform(tau1, tau2, n as u32, k, inner_tol) {
            Ok(v) => v,
            Err(e) => return poisoned(&failure, e, (0.0, 0.0)),
        };
        let w = t.powi(power);
        (w * fib.value.re, w * fib.err_estimate)
    };
    let (outer, inner_err) = integrate_rn_pair(g, n, tol)?;
    if let Some(e) = failure.into_inner().expect("poison slot") {
        return Err(e);
    }
    if !outer.converged {
        return Err(Error::Numeric(format!(
            "outer quadrature did not converge (estimate {:.3e}, partial value {:.6e})",
            outer.err_estimate, outer.value
        )));
    }
    let c_n = 2.0 * sphere_volume(n)?;
    Ok(RouteValue {
        value: c_n * outer.value,
        err_estimate: c_n * (outer.err_estimate + inner_err),
    })
}

/// Direct phase-space quadrature of tr σ_k over ℝⁿ × ℝⁿ (n ≤ 2): the
/// ξ-integral reduces to its radial part since tr σ_k depends on ξ only
/// through |ξ|². Coarse but independent of the fiber machinery.
pub fn h0_direct_oracle(spec: &ProblemSpec, k: u32, tol: f64) -> Result<RouteValue> {
    let n = spec.n();
    check_threshold(n, spec.m(), k)?;
    if n > 2 {
        return Err(Error::Unsupported(
            "direct phase-space oracle implemented for n ≤ 2 only".into(),
        ));
    }
    let c_n = sphere_volume(n)?;
    let inner_tol = (tol / 10.0).max(1e-12);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let g = |x: &[f64]| -> (f64, f64) {
        let x = x.to_vec();
        let inner = integrate_1d(
            |rho| {
                let mut xi = vec![0.0; n];
                xi[0] = rho;
                let pt = match principal_symbols(spec, &x, &xi) {
                    Ok(v) => v,
                    Err(e) => return poisoned(&failure, e, 0.0),
                };
                match tr_sigma_k_point(&pt, k) {
                    Ok(v) => v * rho.powi(n as i32 - 1),
                    Err(e) => poisoned(&failure, e, 0.0),
                }
            },
            Domain::SemiInfinite(0.0),
            inner_tol,
        );
        if !inner.converged {
            return poisoned(
                &failure,
                Error::Numeric(format!(
                    "inner ξ-quadrature did not converge (estimate {:.3e})",
                    inner.err_estimate
                )),
                (0.0, 0.0),
            );
        }
        (c_n * inner.value, c_n * inner.err_estimate)
    };
    let (outer, inner_err) = integrate_rn_pair(g, n, tol)?;
    if let Some(e) = failure.into_inner().expect("poison slot") {
        return Err(e);
    }
    if !outer.converged {
        return Err(Error::Numeric(format!(
            "outer x-quadrature did not converge (estimate {:.3e})",
            outer.err_estimate
        )));
    }
    Ok(RouteValue {
        value: outer.value,
        err_estimate: outer.err_estimate + inner_err,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    pub tol: f64,
    pub with_oracle: bool,
    pub oracle_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: 1e-8,
            with_oracle: false,
            oracle_tol: 1e-3,
        }
    }
}

fn routes_agree(a: RouteValue, b: RouteValue) -> bool {
    (a.value - b.value).abs() <= 3.0 * (a.err_estimate + b.err_estimate) + 1e-12
}

/// Populates all applicable routes, checks mutual consistency, and issues
/// the nonvanishing verdict for the leading trace coefficient.
pub fn classify(spec: &ProblemSpec, k: u32, opts: &ClassifyOptions) -> Result<CriterionReport> {
    let n = spec.n();
    let m = spec.m();
    let k_min = check_threshold(n, m, k)?;

    let mut routes: BTreeMap<Route, RouteValue> = BTreeMap::new();
    let mut discrepancies: Vec<String> = vec![
        "C_{2,k} closed form: two global sign conventions circulate for the antiderivative \
         evaluation; the base case C_{2,k}(1,0) must equal L(2,k) = -1/((k-1)(k-2)) < 0, so the \
         stored sign constant is -1 relative to the alternative transcription (quadrature-adjudicated)."
            .into(),
        "even-n closed form: moment exponent n-k adopted for the (P_m+1) moment; the -k \
         alternative is rejected by the direct phase-space oracle and by trace-class convergence."
            .into(),
    ];

    if spec.q().is_zero() {
        routes.insert(Route::ClosedQ0, h0_closed_q0(spec, k, opts.tol)?);
        if n % 2 == 0 {
            if let Ok(rejected) = closed_q0_even(spec, k, opts.tol, -(k as i32)) {
                let adopted = routes[&Route::ClosedQ0];
                discrepancies.push(format!(
                    "closedQ0 value under adopted exponent n-k: {:.12e}; under rejected exponent -k: {:.12e}",
                    adopted.value, rejected.value
                ));
            }
        }
    }
    routes.insert(Route::SemiNumeric, h0_semi_numeric(spec, k, opts.tol)?);
    if opts.with_oracle && n <= 2 {
        routes.insert(
            Route::DirectOracle,
            h0_direct_oracle(spec, k, opts.oracle_tol)?,
        );
    }

    let mut consistent = true;
    let entries: Vec<(Route, RouteValue)> = routes.iter().map(|(r, v)| (*r, *v)).collect();
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            if !routes_agree(entries[i].1, entries[j].1) {
                consistent = false;
            }
        }
    }

    let (best_route, best) = entries
        .iter()
        .min_by(|a, b| a.1.err_estimate.total_cmp(&b.1.err_estimate))
        .map(|(r, v)| (*r, *v))
        .expect("at least one route populated");

    let margin = if best.err_estimate > 0.0 {
        best.value.abs() / best.err_estimate
    } else if best.value != 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let nonvanishing =
        consistent && best.value.abs() > 3.0 * best.err_estimate && best.value != 0.0;
    let sign = if !nonvanishing {
        Sign::Indeterminate
    } else if best.value > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    };

    let verdict = if !consistent {
        "routes inconsistent: values disagree beyond combined error estimates; no verdict".into()
    } else if nonvanishing {
        format!(
            "criterion satisfied: leading trace coefficient is nonvanishing ({sign}), so the \
             nonlinear eigenvalue problem has a nontrivial solution for all small h and the \
             associated operator is not analytic hypoelliptic at the origin"
        )
    } else {
        "inconclusive at leading order: the leading trace coefficient vanishes within its error \
         estimate (parity or cancellation); higher-order coefficients are not examined here"
            .into()
    };

    Ok(CriterionReport {
        n,
        m,
        k,
        k_min,
        routes,
        consistent,
        best_route,
        sign,
        nonvanishing,
        margin,
        verdict,
        paper_discrepancies: discrepancies,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Tau1InfReport {
    pub value: f64,
    /// True when the infimum is approached along directions at infinity
    /// rather than attained at a sampled interior point.
    pub attained_in_limit: bool,
    pub witness: Vec<f64>,
}

fn tau1_sq_at(spec: &ProblemSpec, x: &[f64]) -> f64 {
    match tau_decomposition(spec, x) {
        Ok((_, t1, _)) => t1 * t1,
        Err(_) => 0.0,
    }
}

fn normalize(x: &mut [f64]) {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r > 0.0 {
        for v in x.iter_mut() {
            *v /= r;
        }
    } else {
        x[0] = 1.0;
    }
}

fn descend<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64], on_sphere: bool) -> (f64, Vec<f64>) {
    let mut w = start.to_vec();
    if on_sphere {
        normalize(&mut w);
    }
    let mut val = f(&w);
    let mut step = 0.1;
    let mut sweeps = 0;
    while step > 1e-8 && sweeps < 500 {
        sweeps += 1;
        let mut improved = false;
        for i in 0..w.len() {
            for sgn in [1.0, -1.0] {
                let mut cand = w.clone();
                cand[i] += sgn * step;
                if on_sphere {
                    normalize(&mut cand);
                }
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
    (val, w)
}

fn extremum_tau1_sq(
    spec: &ProblemSpec,
    budget: usize,
    maximize: bool,
) -> Result<(f64, Vec<f64>, bool)> {
    let n = spec.n();
    let sgn = if maximize { -1.0 } else { 1.0 };
    let f_interior = |x: &[f64]| sgn * tau1_sq_at(spec, x);

    let dirs = poly::sphere_lattice(n, (budget / 32).max(128));
    let mut best = f_interior(&vec![0.0; n]);
    let mut best_wit = vec![0.0; n];
    for level in 1..=24 {
        let r = 12.0 * level as f64 / 24.0;
        for w in &dirs {
            let x: Vec<f64> = w.iter().map(|c| c * r).collect();
            let v = f_interior(&x);
            if v < best {
                best = v;
                best_wit = x;
            }
        }
    }
    let (best, best_wit) = descend(&f_interior, &best_wit, false);

    // directional limits r → ∞: τ₁² → P_m(ω)²/(P_m(ω)² + Q_m(ω)²)
    let f_limit = |w: &[f64]| -> f64 {
        let pm = spec.p_m().eval(w).expect("dim checked");
        let qm = spec.q_m().eval(w).expect("dim checked");
        let denom = pm * pm + qm * qm;
        if denom < 1e-300 {
            return sgn * if maximize { 1.0 } else { 0.0 };
        }
        sgn * pm * pm / denom
    };
    let limit_dirs = poly::sphere_lattice(n, budget.max(1024));
    let mut scored: Vec<(f64, usize)> = limit_dirs.iter().map(|w| f_limit(w)).zip(0..).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best_lim = scored[0].0;
    let mut best_lim_wit = limit_dirs[scored[0].1].clone();
    for &(_, idx) in scored.iter().take(10) {
        let (v, w) = descend(&f_limit, &limit_dirs[idx], true);
        if v < best_lim {
            best_lim = v;
            best_lim_wit = w;
        }
    }

    if best_lim < best {
        Ok((sgn * best_lim, best_lim_wit, true))
    } else {
        Ok((sgn * best, best_wit, false))
    }
}

/// Numeric infimum of τ₁² over ℝⁿ, combining interior sampling on nested
/// balls with directional limits along the sphere at infinity.
pub fn tau1_inf(spec: &ProblemSpec, budget: usize) -> Result<Tau1InfReport> {
    if spec.n() > 3 {
        return Err(Error::Unsupported("tau1_inf supports n ≤ 3".into()));
    }
    let (value, witness, attained_in_limit) = extremum_tau1_sq(spec, budget, false)?;
    Ok(Tau1InfReport {
        value,
        attained_in_limit,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ThresholdClass {
    AllBelowThreshold,
    AllAboveThreshold,
    Mixed,
}

/// n = 2 classification against the threshold u* = (3−√3)/4 for u = τ₁²:
/// the integrand's real part has one sign on each side, so a range of τ₁²
/// entirely on one side decides the sign of the k = 4 coefficient without
/// integration.
pub fn lemma_n2_classify(spec: &ProblemSpec, budget: usize) -> Result<ThresholdClass> {
    if spec.n() != 2 {
        return Err(Error::Domain(format!(
            "threshold classification is specific to n = 2 (got n = {})",
            spec.n()
        )));
    }
    let u_star = (3.0 - 3f64.sqrt()) / 4.0;
    let (inf, _, _) = extremum_tau1_sq(spec, budget, false)?;
    let (sup, _, _) = extremum_tau1_sq(spec, budget, true)?;
    if inf > u_star {
        Ok(ThresholdClass::AllAboveThreshold)
    } else if sup < u_star {
        Ok(ThresholdClass::AllBelowThreshold)
    } else {
        Ok(ThresholdClass::Mixed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub h0: f64,
    pub err: f64,
    pub sign: Sign,
    pub nonvanishing: bool,
    #[serde(rename = "kMin")]
    pub k_min: u32,
    pub route: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Sign-change locations refined by bisection on α ↦ H₀(α).
    pub crossings: Vec<f64>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,H0,err,sign,nonvanishing,kMin,route\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{},{},{},{}\n",
                r.alpha, r.h0, r.err, r.sign, r.nonvanishing, r.k_min, r.route
            ));
        }
        out
    }
}

/// Sweeps H₀ over a family of problems parametrized by α, recording per-row
/// values and refining any sign change by bisection.
pub fn alpha_sweep_with<F>(family: F, k: u32, alphas: &[f64], tol: f64) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<ProblemSpec> + Sync,
{
    if alphas.is_empty() {
        return Err(Error::Input("α grid is empty".into()));
    }
    let eval = |alpha: f64| -> Result<(RouteValue, u32)> {
        let spec = family(alpha)?;
        let k_min = trace_class_threshold(spec.n(), spec.m());
        let v = h0_semi_numeric(&spec, k, tol)?;
        Ok((v, k_min))
    };

    use rayon::prelude::*;
    let rows: Vec<SweepRow> = alphas
        .par_iter()
        .map(|&alpha| match eval(alpha) {
            Ok((v, k_min)) => {
                let nonvanishing = v.value.abs() > 3.0 * v.err_estimate;
                let sign = if !nonvanishing {
                    Sign::Indeterminate
                } else if v.value > 0.0 {
                    Sign::Positive
                } else {
                    Sign::Negative
                };
                SweepRow {
                    alpha,
                    h0: v.value,
                    err: v.err_estimate,
                    sign,
                    nonvanishing,
                    k_min,
                    route: "semiNumeric".into(),
                }
            }
            Err(_) => SweepRow {
                alpha,
                h0: f64::NAN,
                err: f64::NAN,
                sign: Sign::Indeterminate,
                nonvanishing: false,
                k_min: 0,
                route: "error".into(),
            },
        })
        .collect();

    let mut crossings = Vec::new();
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.nonvanishing && b.nonvanishing && a.sign != b.sign {
            let (mut lo, mut hi) = (a.alpha, b.alpha);
            let (mut flo, _fhi) = (a.h0, b.h0);
            let width_floor = (hi - lo).abs() * 1e-6;
            for _ in 0..40 {
                if (hi - lo).abs() <= width_floor {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let fm = match eval(mid) {
                    Ok((v, _)) => v.value,
                    Err(_) => break,
                };
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            crossings.push(0.5 * (lo + hi));
        }
    }
    Ok(SweepResult { rows, crossings })
}

/// Family variant scaling the base problem's Q by α (α = 0 degenerates to
/// the Q = 0 problem).
pub fn alpha_sweep(base: &ProblemSpec, k: u32, alphas: &[f64], tol: f64) -> Result<SweepResult> {
    if base.q().is_zero() {
        return Err(Error::Input(
            "α sweep scales Q; the base problem must have Q ≠ 0".into(),
        ));
    }
    let n = base.n();
    let m = base.m();
    let p = base.p().clone();
    let q = base.q().clone();
    alpha_sweep_with(
        move |alpha| ProblemSpec::new(n, m, p.clone(), Some(q.scale(alpha))),
        k,
        alphas,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn poly(dim: usize, terms: &[(&[u32], f64)]) -> Polynomial {
        Polynomial::new(dim, terms.iter().map(|(e, c)| (e.to_vec(), *c)).collect()).unwrap()
    }

    fn disk_spec() -> ProblemSpec {
        ProblemSpec::new(2, 2, poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0)]), None).unwrap()
    }

    fn cross_spec(alpha: f64) -> ProblemSpec {
        ProblemSpec::new(
            2,
            2,
            poly(2, &[(&[2, 0], 1.0), (&[0, 2], 1.0)]),
            Some(poly(2, &[(&[1, 1], alpha)])),
        )
        .unwrap()
    }

    fn x2x2_spec() -> ProblemSpec {
        ProblemSpec::new(1, 2, poly(1, &[(&[2], 1.0)]), Some(poly(1, &[(&[2], 1.0)]))).unwrap()
    }

    fn quartic_1d() -> ProblemSpec {
        ProblemSpec::new(1, 4, poly(1, &[(&[4], 1.0)]), None).unwrap()
    }

    fn ball3_spec() -> ProblemSpec {
        ProblemSpec::new(
            3,
            2,
            poly(
                3,
                &[(&[2, 0, 0], 1.0), (&[0, 2, 0], 1.0), (&[0, 0, 2], 1.0)],
            ),
            Some(poly(3, &[(&[1, 1, 0], 1.0)])),
        )
        .unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(trace_class_threshold(2, 2), 4);
        assert_eq!(trace_class_threshold(1, 2), 2);
        assert_eq!(trace_class_threshold(2, 1), 5);
        assert_eq!(trace_class_threshold(3, 2), 5);
        assert_eq!(trace_class_threshold(1, 4), 2);
        assert_eq!(trace_class_threshold(3, 4), 4);
        for n in 1..=3usize {
            for m in 1..=6u32 {
                let k = trace_class_threshold(n, m) as f64;
                let bound = n as f64 * (m as f64 + 1.0) / m as f64;
                assert!(k > bound && k - 1.0 <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn closed_q0_odd_is_zero() {
        let v = h0_closed_q0(&quartic_1d(), 3, 1e-10).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.err_estimate, 0.0);
    }

    #[test]
    fn closed_q0_disk_k4_and_k5() {
        let v = h0_closed_q0(&disk_spec(), 4, 1e-11).unwrap();
        assert_relative_eq!(v.value, -2.0 * PI * PI / 3.0, max_relative = 1e-8);

        let v = h0_closed_q0(&disk_spec(), 5, 1e-11).unwrap();
        assert_relative_eq!(v.value, -PI * PI / 6.0, max_relative = 1e-8);
    }

    #[test]
    fn closed_q0_requires_q_zero_and_threshold() {
        assert!(matches!(
            h0_closed_q0(&cross_spec(1.0), 4, 1e-9),
            Err(Error::Input(_))
        ));
        let err = h0_closed_q0(&disk_spec(), 3, 1e-9).unwrap_err();
        assert!(err.to_string().contains("trace-class threshold 4"));
    }

    #[test]
    fn semi_matches_closed_disk_k4() {
        let closed = h0_closed_q0(&disk_spec(), 4, 1e-11).unwrap();
        let semi = h0_semi_numeric(&disk_spec(), 4, 1e-8).unwrap();
        assert_relative_eq!(semi.value, closed.value, max_relative = 1e-6);
        assert!(
            (semi.value - closed.value).abs()
                <= 3.0 * (semi.err_estimate + closed.err_estimate) + 1e-12
        );
    }

    #[test]
    fn semi_parity_odd_n() {
        let v = h0_semi_numeric(&quartic_1d(), 3, 1e-9).unwrap();
        assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn semi_frozen_value_1d_k3() {
        // frozen from an independent multiprecision evaluation
        let v = h0_semi_numeric(&x2x2_spec(), 3, 1e-9).unwrap();
        assert_relative_eq!(v.value, -0.85986051888588211, max_relative = 1e-7);
        assert!(v.value < 0.0);

        // magnitude identity: |H₀| = 3π·∫ τ₁τ₂²T^{−2} dx
        let spec = x2x2_spec();
        let moment = integrate_rn(
            |x: &[f64]| {
                let (t, t1, t2) = tau_decomposition(&spec, x).unwrap();
                t1 * t2 * t2 / (t * t)
            },
            1,
            1e-10,
        )
        .unwrap();
        assert_relative_eq!(moment.value, 0.091234034633500108, max_relative = 1e-8);
        assert_relative_eq!(v.value, -3.0 * PI * moment.value, max_relative = 1e-7);
    }

    #[test]
    fn semi_frozen_value_3d_k5() {
        // frozen from an independent multiprecision evaluation
        let v = h0_semi_numeric(&ball3_spec(), 5, 1e-7).unwrap();
        assert_relative_eq!(v.value, 0.7163191498318011, max_relative = 1e-5);
        assert!(v.value > 0.0);
    }

    #[test]
    fn oracle_parity_1d() {
        let v = h0_direct_oracle(&quartic_1d(), 3, 1e-5).unwrap();
        assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-5);
    }

    #[test]
    fn oracle_agrees_semi_1d_k3() {
        let oracle = h0_direct_oracle(&x2x2_spec(), 3, 1e-6).unwrap();
        let semi = h0_semi_numeric(&x2x2_spec(), 3, 1e-8).unwrap();
        assert_relative_eq!(oracle.value, semi.value, max_relative = 1e-3);
    }

    #[test]
    fn oracle_disk_k4() {
        let oracle = h0_direct_oracle(&disk_spec(), 4, 1e-4).unwrap();
        assert_relative_eq!(oracle.value, -2.0 * PI * PI / 3.0, max_relative = 1e-2);
    }

    #[test]
    fn oracle_rejects_n3() {
        assert!(matches!(
            h0_direct_oracle(&ball3_spec(), 5, 1e-3),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn classify_disk_k4() {
        let r = classify(&disk_spec(), 4, &ClassifyOptions::default()).unwrap();
        assert_eq!(r.k_min, 4);
        assert!(r.consistent);
        assert!(r.nonvanishing);
        assert_eq!(r.sign, Sign::Negative);
        assert!(r.routes.contains_key(&Route::ClosedQ0));
        assert!(r.routes.contains_key(&Route::SemiNumeric));
        assert!(r.verdict.contains("criterion satisfied"));
        assert!(r.paper_discrepancies.len() >= 3);
    }

    #[test]
    fn classify_odd_case_inconclusive() {
        let r = classify(&quartic_1d(), 3, &ClassifyOptions::default()).unwrap();
        assert!(!r.nonvanishing);
        assert_eq!(r.sign, Sign::Indeterminate);
        assert!(r.verdict.contains("inconclusive"));
    }

    #[test]
    fn classify_refuses_below_threshold() {
        let err = classify(&disk_spec(), 3, &ClassifyOptions::default()).unwrap_err();
        assert!(err.to_string().contains("k below trace-class threshold 4"));
    }

    #[test]
    fn classify_n3_cross_positive() {
        let r = classify(
            &ball3_spec(),
            5,
            &ClassifyOptions {
                tol: 1e-7,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.nonvanishing);
        assert_eq!(r.sign, Sign::Positive);
    }

    #[test]
    fn classify_with_oracle_consistent() {
        let opts = ClassifyOptions {
            tol: 1e-8,
            with_oracle: true,
            oracle_tol: 1e-5,
        };
        let r = classify(&x2x2_spec(), 3, &opts).unwrap();
        assert!(r.routes.contains_key(&Route::DirectOracle));
        assert!(r.consistent);
        assert!(r.nonvanishing);
        assert_eq!(r.sign, Sign::Negative);
    }

    #[test]
    fn monotone_refinement_keeps_verdict() {
        for tol in [1e-6, 5e-7, 2.5e-7] {
            let r = classify(
                &disk_spec(),
                4,
                &ClassifyOptions {
                    tol,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(r.nonvanishing, "verdict lost at tol {tol}");
        }
    }

    #[test]
    fn q_to_zero_continuity() {
        let closed = h0_closed_q0(&disk_spec(), 4, 1e-11).unwrap().value;
        let mut prev_gap = f64::INFINITY;
        for eps in [0.1, 0.01, 0.001] {
            let v = h0_semi_numeric(&cross_spec(eps), 4, 1e-8).unwrap();
            let gap = (v.value - closed).abs();
            assert!(gap < prev_gap, "gap {gap} did not shrink at ε = {eps}");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-4);
    }

    #[test]
    fn tau1_inf_cross_family() {
        let r = tau1_inf(&cross_spec(1.0), 20_000).unwrap();
        assert_abs_diff_eq!(r.value, 0.8, epsilon = 1e-6);
        assert!(r.attained_in_limit);
        let w = &r.witness;
        assert_abs_diff_eq!(w[0].abs(), w[1].abs(), epsilon = 1e-4);

        let r = tau1_inf(&cross_spec(0.7), 20_000).unwrap();
        assert_abs_diff_eq!(r.value, 4.0 / 4.49, epsilon = 1e-6);
    }

    #[test]
    fn tau1_inf_q0_is_one() {
        let r = tau1_inf(&disk_spec(), 5_000).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lemma_n2_cases() {
        assert_eq!(
            lemma_n2_classify(&cross_spec(1.0), 10_000).unwrap(),
            ThresholdClass::AllAboveThreshold
        );
        assert_eq!(
            lemma_n2_classify(&disk_spec(), 10_000).unwrap(),
            ThresholdClass::AllAboveThreshold
        );
        assert_eq!(
            lemma_n2_classify(&cross_spec(10.0), 10_000).unwrap(),
            ThresholdClass::Mixed
        );
        assert!(lemma_n2_classify(&x2x2_spec(), 1000).is_err());
    }

    #[test]
    fn sweep_small_grid_all_negative() {
        let result = alpha_sweep(&cross_spec(1.0), 4, &[0.2, 0.6, 1.0], 1e-7).unwrap();
        assert_eq!(result.rows.len(), 3);
        for row in &result.rows {
            assert!(row.nonvanishing, "α = {}", row.alpha);
            assert_eq!(row.sign, Sign::Negative);
            assert_eq!(row.k_min, 4);
            assert_eq!(row.route, "semiNumeric");
        }
        assert!(result.crossings.is_empty());

        let csv = result.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "alpha,H0,err,sign,nonvanishing,kMin,route"
        );
        assert_eq!(csv.lines().count(), 4);
        let first = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 7);
        assert_relative_eq!(fields[0].parse::<f64>().unwrap(), 0.2);
    }

    #[test]
    fn sweep_alpha_zero_matches_closed() {
        let result = alpha_sweep(&cross_spec(1.0), 4, &[0.0], 1e-8).unwrap();
        let closed = h0_closed_q0(&disk_spec(), 4, 1e-11).unwrap();
        let row = &result.rows[0];
        assert!(row.nonvanishing);
        assert_relative_eq!(row.h0, closed.value, max_relative = 1e-6);
    }

    #[test]
    fn sweep_requires_nonzero_q() {
        assert!(alpha_sweep(&disk_spec(), 4, &[0.1], 1e-8).is_err());
    }

    #[test]
    fn report_serialization_shape() {
        let r = classify(&quartic_1d(), 3, &ClassifyOptions::default()).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("kMin").is_some());
        assert!(json.get("paperDiscrepancies").is_some());
        assert!(json["routes"].get("semiNumeric").is_some());
        assert!(json["routes"]["semiNumeric"].get("errEstimate").is_some());
    }
}

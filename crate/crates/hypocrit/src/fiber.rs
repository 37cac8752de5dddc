//! One-dimensional fiber integrals over the radial frequency variable:
//! L(n,k), C_{n,k}(τ₁,τ₂), their closed forms and recursion, with mutual
//! numerical validation.
//!
//! Closed forms transcribed from printed displays are adjudicated against
//! the r-form quadrature oracle; `SIGN_VS_PRINTED` records the resolved
//! global sign of the n = 2 closed form (the printed display is off by a
//! factor −1 relative to the direct antiderivative evaluation, which the
//! oracle confirms).

use num_complex::Complex64;

use crate::quad::{integrate_1d, Domain};
use crate::{Error, Result};

/// Sign of the adjudicated n = 2 closed form relative to the printed one.
/// Resolved at build time by `verify_sign_adjudication` and frozen here:
/// the printed display evaluates to +1/((k−1)(k−2)) at (τ₁,τ₂) = (1,0), but
/// the base case L(2,k) = −1/((k−1)(k−2)) and the quadrature oracle force
/// the negative.
pub const SIGN_VS_PRINTED: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberRoute {
    Closed,
    Recursion,
    QuadratureRForm,
    QuadratureTForm,
}

/// A fiber-integral value with its provenance and error bound.
#[derive(Debug, Clone, Copy)]
pub struct FiberValue {
    pub value: Complex64,
    pub err_estimate: f64,
    pub route: FiberRoute,
}

fn check_orders(n: u32, k: u32) -> Result<()> {
    if k <= n {
        return Err(Error::Domain(format!(
            "L({n},{k}) requires k > n (integral diverges / recursion denominator vanishes)"
        )));
    }
    Ok(())
}

/// L(n,k) by the recursion L(n,k) = i·(n−1)/(k−1)·L(n−1,k−1) grounded at
/// L(2,j) = −1/((j−1)(j−2)).
pub fn l_closed(n: u32, k: u32) -> Result<Complex64> {
    if n < 2 {
        return Err(Error::Domain(format!(
            "L closed form requires n ≥ 2, got {n}"
        )));
    }
    check_orders(n, k)?;
    let base_j = k - n + 2;
    let mut v = Complex64::new(-1.0 / (((base_j - 1) * (base_j - 2)) as f64), 0.0);
    for nu in 3..=n {
        let kk = k - n + nu; // order paired with dimension nu on the way up
        v *= Complex64::new(0.0, (nu - 1) as f64 / (kk - 1) as f64);
    }
    Ok(v)
}

/// L(n,k) by adaptive quadrature of ∫₀^∞ (1−ir)^{−k} r^{n−1} dr.
pub fn l_numeric(n: u32, k: u32, tol: f64) -> Result<FiberValue> {
    if n < 1 {
        return Err(Error::Domain("L requires n ≥ 1".into()));
    }
    check_orders(n, k)?;
    let r = integrate_1d(
        |t| Complex64::new(1.0, -t).powu(k).inv() * t.powi(n as i32 - 1),
        Domain::SemiInfinite(0.0),
        tol,
    );
    if !r.converged {
        return Err(Error::Numeric(format!(
            "L({n},{k}) quadrature did not converge: estimate {:.3e} (partial value {:.6e}{:+.6e}i)",
            r.err_estimate, r.value.re, r.value.im
        )));
    }
    Ok(FiberValue {
        value: r.value,
        err_estimate: r.err_estimate,
        route: FiberRoute::QuadratureRForm,
    })
}

fn check_tau(tau1: f64, tau2: f64) -> Result<()> {
    if (tau1 * tau1 + tau2 * tau2 - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "(τ₁,τ₂) = ({tau1},{tau2}) is not on the unit circle"
        )));
    }
    Ok(())
}

/// C_{n,k} by the defining r-form
/// ∫₀^∞ (1+r²)^{−k} (τ₁ + i(τ₂²+r²)^{1/2})^k r^{n−1} dr.
/// Smooth integrand for every n ≥ 1; this is the module's oracle route.
pub fn c_nk_rform(tau1: f64, tau2: f64, n: u32, k: u32, tol: f64) -> Result<FiberValue> {
    check_tau(tau1, tau2)?;
    check_orders(n, k)?;
    let r = integrate_1d(
        |t| {
            let w = Complex64::new(tau1, (tau2 * tau2 + t * t).sqrt());
            w.powu(k) * (1.0 + t * t).powi(-(k as i32)) * t.powi(n as i32 - 1)
        },
        Domain::SemiInfinite(0.0),
        tol,
    );
    if !r.converged {
        return Err(Error::Numeric(format!(
            "C_{{{n},{k}}} r-form quadrature did not converge (estimate {:.3e})",
            r.err_estimate
        )));
    }
    Ok(FiberValue {
        value: r.value,
        err_estimate: r.err_estimate,
        route: FiberRoute::QuadratureRForm,
    })
}

/// C_{n,k} by the t-form ∫_{τ₂}^∞ (τ₁ − it)^{−k} (t² − τ₂²)^{(n−2)/2} t dt,
/// valid for n ≥ 2 (at n = 1 the endpoint weight is singular; the r-form
/// already is that case after t² = τ₂² + r²).
pub fn c_nk_tform(tau1: f64, tau2: f64, n: u32, k: u32, tol: f64) -> Result<FiberValue> {
    check_tau(tau1, tau2)?;
    check_orders(n, k)?;
    if n < 2 {
        return Err(Error::Unsupported(
            "t-form requires n ≥ 2; use the r-form for n = 1".into(),
        ));
    }
    let half = (n as i32 - 2) as f64 / 2.0;
    let r = integrate_1d(
        |s| {
            // substitute t = τ₂ + s to put the lower endpoint at 0
            let t = tau2 + s;
            let w = Complex64::new(tau1, -t);
            let weight = (t * t - tau2 * tau2).max(0.0).powf(half);
            w.powu(k).inv() * (weight * t)
        },
        Domain::SemiInfinite(0.0),
        tol,
    );
    if !r.converged {
        return Err(Error::Numeric(format!(
            "C_{{{n},{k}}} t-form quadrature did not converge (estimate {:.3e})",
            r.err_estimate
        )));
    }
    Ok(FiberValue {
        value: r.value,
        err_estimate: r.err_estimate,
        route: FiberRoute::QuadratureTForm,
    })
}

/// Closed form for n = 2: direct antiderivative evaluation of the t-form,
/// C_{2,k} = τ₁(τ₁+iτ₂)^{k−1}/(k−1) − (τ₁+iτ₂)^{k−2}/(k−2)
/// (equal to `SIGN_VS_PRINTED` times the printed display).
pub fn c_2k_closed(tau1: f64, tau2: f64, k: u32) -> Result<Complex64> {
    check_tau(tau1, tau2)?;
    if k < 3 {
        return Err(Error::Domain(format!(
            "closed C_{{2,k}} requires k ≥ 3, got {k}"
        )));
    }
    let z = Complex64::new(tau1, tau2);
    Ok(z.powu(k - 1) * (tau1 / (k - 1) as f64) - z.powu(k - 2) / (k - 2) as f64)
}

/// Re C_{2,4} as a polynomial in u = τ₁², with the adjudicated global sign:
/// SIGN_VS_PRINTED · (−1/2 + 2u − (4/3)u²).
pub fn re_c24_poly(u: f64) -> f64 {
    SIGN_VS_PRINTED * (-0.5 + 2.0 * u - 4.0 / 3.0 * u * u)
}

/// Zeros of Re C_{2,4} in u = τ₁²: (3 ± √3)/4.
pub fn roots_re_c24() -> (f64, f64) {
    let s = 3.0_f64.sqrt();
    ((3.0 - s) / 4.0, (3.0 + s) / 4.0)
}

/// Runs the sign-adjudication protocol: compares the closed n = 2 form with
/// the r-form oracle on a fixed probe set and returns the resolved sign
/// relative to the printed display. Errors if neither sign reconciles.
pub fn verify_sign_adjudication() -> Result<f64> {
    let probes: [(f64, f64); 5] = [
        (1.0, 0.0),
        (0.9486832980505138, 0.31622776601683794), // (3,1)/√10
        (
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ),
        (0.31622776601683794, 0.9486832980505138),
        (0.0, 1.0),
    ];
    let mut worst_as_is: f64 = 0.0;
    let mut worst_negated: f64 = 0.0;
    for &(t1, t2) in &probes {
        for k in [3u32, 4, 6] {
            let closed = c_2k_closed(t1, t2, k)?;
            let oracle = c_nk_rform(t1, t2, 2, k, 1e-12)?.value;
            worst_as_is = worst_as_is.max((closed - oracle).norm());
            worst_negated = worst_negated.max((-closed - oracle).norm());
        }
    }
    if worst_as_is < 1e-9 {
        Ok(SIGN_VS_PRINTED)
    } else if worst_negated < 1e-9 {
        Ok(-SIGN_VS_PRINTED)
    } else {
        Err(Error::InconsistentRoutes(format!(
            "closed C_2k matches the oracle under neither sign (as-is {worst_as_is:.3e}, negated {worst_negated:.3e})"
        )))
    }
}

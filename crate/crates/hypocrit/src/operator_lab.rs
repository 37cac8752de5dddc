//! Desk-scale discrete realization of the rescaled operator family:
//! Dirichlet finite-difference discretization of
//! L(h) = −h²Δ + P(x,h)² + Q(x,h)², the derived operators A = L^{−1},
//! A^{1/2}, B = A^{1/2}·P·A^{1/2}, the block linearization
//! D = [[2B, A^{1/2}], [−A^{1/2}, 0]], trace powers, semiclassical fits of
//! the scaled traces, and extraction of nonlinear eigenpairs.

use faer::prelude::SolveLstsq;
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::symbol::{build_semiclassical, undilate, ProblemSpec};
use crate::{Error, Result};

/// Uniform Dirichlet grid on [−R, R] with N interior points,
/// spacing Δ = 2R/(N+1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Grid1D {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl Grid1D {
    pub fn new(r: f64, n: usize) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Input(format!(
                "half-width R must be positive, got {r}"
            )));
        }
        if n < 3 {
            return Err(Error::Input(format!(
                "grid needs N ≥ 3 interior points, got {n}"
            )));
        }
        Ok(Grid1D { r, n })
    }

    pub fn delta(&self) -> f64 {
        2.0 * self.r / (self.n as f64 + 1.0)
    }

    pub fn points(&self) -> Vec<f64> {
        let d = self.delta();
        (0..self.n)
            .map(|i| -self.r + (i as f64 + 1.0) * d)
            .collect()
    }
}

/// Dense realizations of L, A = L^{−1}, A^{1/2}, B, and the 2N×2N block
/// operator D at a fixed h.
#[derive(Debug)]
pub struct DiscreteOperators {
    pub h: f64,
    pub grid: Grid1D,
    pub dim: usize,
    pub l: Mat<f64>,
    pub a: Mat<f64>,
    pub ahalf: Mat<f64>,
    pub b: Mat<f64>,
    pub d: Mat<f64>,
    pub p_diag: Vec<f64>,
    pub q_diag: Vec<f64>,
    pub l_min_eig: f64,
    pub l_max_eig: f64,
    pub ahalf_cond: f64,
}

fn symmetrize(m: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Builds the dense operator suite on the grid. n = 1 uses the full grid;
/// n = 2 tensorizes the same 1-D grid per axis and is restricted to
/// N ≤ 60 per axis.
pub fn build_operators(spec: &ProblemSpec, h: f64, grid: &Grid1D) -> Result<DiscreteOperators> {
    let n_dim = spec.n();
    if n_dim > 2 {
        return Err(Error::Unsupported(
            "operator lab supports n = 1 (and small n = 2 grids) only".into(),
        ));
    }
    if n_dim == 2 && grid.n > 60 {
        return Err(Error::Input(format!(
            "n = 2 lab restricted to N ≤ 60 per axis (got N = {})",
            grid.n
        )));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Input(format!("h must be positive, got {h}")));
    }
    let sp = build_semiclassical(spec, h)?;
    let xs = grid.points();
    let d2 = grid.delta() * grid.delta();
    let hd = h * h / d2;

    let (size, p_diag, q_diag): (usize, Vec<f64>, Vec<f64>) = if n_dim == 1 {
        let p: Result<Vec<f64>> = xs.iter().map(|&x| sp.eval_p(&[x])).collect();
        let q: Result<Vec<f64>> = xs.iter().map(|&x| sp.eval_q(&[x])).collect();
        (grid.n, p?, q?)
    } else {
        let nn = grid.n;
        let mut p = Vec::with_capacity(nn * nn);
        let mut q = Vec::with_capacity(nn * nn);
        for &x in &xs {
            for &y in &xs {
                p.push(sp.eval_p(&[x, y])?);
                q.push(sp.eval_q(&[x, y])?);
            }
        }
        (nn * nn, p, q)
    };

    let l = if n_dim == 1 {
        Mat::from_fn(size, size, |i, j| {
            if i == j {
                2.0 * hd + p_diag[i] * p_diag[i] + q_diag[i] * q_diag[i]
            } else if i.abs_diff(j) == 1 {
                -hd
            } else {
                0.0
            }
        })
    } else {
        let nn = grid.n;
        Mat::from_fn(size, size, |r, c| {
            let (i1, j1) = (r / nn, r % nn);
            let (i2, j2) = (c / nn, c % nn);
            if r == c {
                4.0 * hd + p_diag[r] * p_diag[r] + q_diag[r] * q_diag[r]
            } else if (i1 == i2 && j1.abs_diff(j2) == 1) || (j1 == j2 && i1.abs_diff(i2) == 1) {
                -hd
            } else {
                0.0
            }
        })
    };

    let evd = l
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigendecomposition of L failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let l_min_eig = (0..size).map(|i| s[i]).fold(f64::INFINITY, f64::min);
    let l_max_eig = (0..size).map(|i| s[i]).fold(f64::NEG_INFINITY, f64::max);
    if l_min_eig <= 0.5 {
        return Err(Error::Domain(format!(
            "h too large or domain too small: smallest eigenvalue of L is {l_min_eig:.6e} ≤ 1/2"
        )));
    }

    let u_inv = Mat::from_fn(size, size, |i, j| u[(i, j)] / s[j]);
    let u_invsqrt = Mat::from_fn(size, size, |i, j| u[(i, j)] / s[j].sqrt());
    let ut = u.transpose();
    let a = symmetrize(&(&u_inv * ut));
    let ahalf = symmetrize(&(&u_invsqrt * ut));

    let pa = Mat::from_fn(size, size, |i, j| p_diag[i] * ahalf[(i, j)]);
    let b = symmetrize(&(&ahalf * &pa));

    let d = Mat::from_fn(2 * size, 2 * size, |i, j| match (i < size, j < size) {
        (true, true) => 2.0 * b[(i, j)],
        (true, false) => ahalf[(i, j - size)],
        (false, true) => -ahalf[(i - size, j)],
        (false, false) => 0.0,
    });

    Ok(DiscreteOperators {
        h,
        grid: *grid,
        dim: size,
        l,
        a,
        ahalf,
        b,
        d,
        p_diag,
        q_diag,
        l_min_eig,
        l_max_eig,
        ahalf_cond: (l_max_eig / l_min_eig).sqrt(),
    })
}

/// Trace of the k-th matrix power by iterated multiplication
/// (k−1 products; no eigendecomposition).
pub fn trace_power(m: &Mat<f64>, k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::Input("trace power requires k ≥ 1".into()));
    }
    let n = m.nrows();
    if k == 1 {
        return Ok((0..n).map(|i| m[(i, i)]).sum());
    }
    let mut acc = m * m;
    for _ in 2..k {
        acc = &acc * m;
    }
    Ok((0..n).map(|i| acc[(i, i)]).sum())
}

/// Tr D(h)^k for k ≥ 2.
pub fn trace_dk(ops: &DiscreteOperators, k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::Input("trace of D^k requires k ≥ 2".into()));
    }
    trace_power(&ops.d, k)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FitOptions {
    /// Recompute each trace on the half-resolution grid as well and
    /// extrapolate the Δ² discretization error before fitting.
    pub grid_refine: bool,
}

/// Scaled-trace samples against h, the fitted expansion coefficients, and
/// fit diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceExperiment {
    pub k: u32,
    pub jmax: u32,
    pub grid: Grid1D,
    /// Decreasing h values.
    pub h_grid: Vec<f64>,
    pub traces: Vec<f64>,
    /// (2πh)^n · Tr D(h)^k — the quantity the expansion describes.
    pub scaled_traces: Vec<f64>,
    /// Ĥ_j for j = 0..=jmax against powers h^{j/(m+1)}.
    pub coefficients: Vec<f64>,
    pub coefficient_stderr: Vec<f64>,
    pub residual: f64,
    /// Spread of Ĥ₀ between the full-grid fit and refits on the upper/lower
    /// halves of the h-grid.
    pub h0_stability: f64,
    pub condition_number: f64,
    pub grid_refined: bool,
}

/// h-grid half of an experiment configuration file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HGridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// On-disk description of a trace experiment:
/// `{"spec": "...", "k": …, "hGrid": {...}, "grid": {"R": …, "N": …}, "jmax": …}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub spec: String,
    pub k: u32,
    pub h_grid: HGridSpec,
    pub grid: Grid1D,
    pub jmax: u32,
}

/// Descending geometric grid from `max` down to `min`.
pub fn geometric_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max > min) {
        return Err(Error::Input(format!(
            "geometric grid needs 0 < min < max, got [{min}, {max}]"
        )));
    }
    if points < 2 {
        return Err(Error::Input(
            "geometric grid needs at least 2 points".into(),
        ));
    }
    let ratio = (min / max).powf(1.0 / (points as f64 - 1.0));
    let mut g: Vec<f64> = (0..points).map(|i| max * ratio.powi(i as i32)).collect();
    g[points - 1] = min;
    Ok(g)
}

fn lstsq_fit(ts: &[f64], y: &[f64], jmax: u32, m: u32) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
    let rows = ts.len();
    let cols = jmax as usize + 1;
    let x = Mat::from_fn(rows, cols, |i, j| ts[i].powf(j as f64 / (m as f64 + 1.0)));
    let xtx = x.transpose() * &x;
    let evd = xtx
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("normal-matrix eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let smin = (0..cols).map(|i| s[i]).fold(f64::INFINITY, f64::min);
    let smax = (0..cols).map(|i| s[i]).fold(f64::NEG_INFINITY, f64::max);
    let cond = (smax / smin.max(f64::MIN_POSITIVE)).sqrt();
    if !(smin > 0.0) || cond > 1e12 {
        return Err(Error::Numeric(format!(
            "ill-conditioned design matrix (condition ≈ {cond:.3e}); jmax too large for this h-grid"
        )));
    }
    let rhs = Mat::from_fn(rows, 1, |i, _| y[i]);
    let sol = x.qr().solve_lstsq(&rhs);
    let coeffs: Vec<f64> = (0..cols).map(|i| sol[(i, 0)]).collect();

    let mut rss = 0.0;
    for i in 0..rows {
        let mut fit = 0.0;
        for j in 0..cols {
            fit += coeffs[j] * x[(i, j)];
        }
        rss += (fit - y[i]).powi(2);
    }
    let residual = rss.sqrt();
    let sigma2 = if rows > cols {
        rss / (rows - cols) as f64
    } else {
        0.0
    };
    let uu = evd.U();
    let stderr: Vec<f64> = (0..cols)
        .map(|j| {
            let inv_jj: f64 = (0..cols).map(|t| uu[(j, t)] * uu[(j, t)] / s[t]).sum();
            (sigma2 * inv_jj).sqrt()
        })
        .collect();
    Ok((coeffs, stderr, residual, cond))
}

/// Computes Tr D(h)^k on the h-grid, scales by (2πh)^n, and least-squares
/// fits the coefficients of Σ_j Ĥ_j·h^{j/(m+1)}.
pub fn semiclassical_fit(
    spec: &ProblemSpec,
    k: u32,
    h_grid: &[f64],
    grid: &Grid1D,
    jmax: u32,
    opts: &FitOptions,
) -> Result<TraceExperiment> {
    if h_grid.len() < jmax as usize + 3 {
        return Err(Error::Input(format!(
            "h-grid has {} points; need at least jmax + 3 = {}",
            h_grid.len(),
            jmax + 3
        )));
    }
    if h_grid.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::Input("h values must be positive".into()));
    }
    let mut hs = h_grid.to_vec();
    hs.sort_by(|a, b| b.total_cmp(a));

    let n_dim = spec.n() as i32;
    let trace_at = |h: f64, g: &Grid1D| -> Result<f64> {
        let ops = build_operators(spec, h, g)?;
        trace_dk(&ops, k)
    };

    // The h-loop stays serial: the linear algebra inside each trace is
    // already parallel, and nesting it in a worker pool starves it when
    // the pool is small.
    let entries: Result<Vec<(f64, f64)>> = hs
        .iter()
        .map(|&h| {
            let t = trace_at(h, grid)?;
            if opts.grid_refine {
                let half = Grid1D::new(grid.r, (grid.n / 2).max(3))?;
                let t_half = trace_at(h, &half)?;
                let rho = half.delta() / grid.delta();
                Ok((h, t + (t - t_half) / (rho * rho - 1.0)))
            } else {
                Ok((h, t))
            }
        })
        .collect();
    let entries = entries?;

    let traces: Vec<f64> = entries.iter().map(|&(_, t)| t).collect();
    let scaled: Vec<f64> = entries
        .iter()
        .map(|&(h, t)| (2.0 * std::f64::consts::PI * h).powi(n_dim) * t)
        .collect();

    let m = spec.m();
    let (coefficients, coefficient_stderr, residual, condition_number) =
        lstsq_fit(&hs, &scaled, jmax, m)?;

    let mut h0_stability: f64 = 0.0;
    let half_len = hs.len() / 2;
    for half in [&hs[..half_len], &hs[hs.len() - half_len..]] {
        if half.len() < 3 {
            continue;
        }
        let yh: Vec<f64> = if std::ptr::eq(half.as_ptr(), hs.as_ptr()) {
            scaled[..half_len].to_vec()
        } else {
            scaled[hs.len() - half_len..].to_vec()
        };
        let jmax_sub = jmax.min(half.len() as u32 - 2);
        if let Ok((c, _, _, _)) = lstsq_fit(half, &yh, jmax_sub, m) {
            h0_stability = h0_stability.max((c[0] - coefficients[0]).abs());
        }
    }

    Ok(TraceExperiment {
        k,
        jmax,
        grid: *grid,
        h_grid: hs,
        traces,
        scaled_traces: scaled,
        coefficients,
        coefficient_stderr,
        residual,
        h0_stability,
        condition_number,
        grid_refined: opts.grid_refine,
    })
}

impl TraceExperiment {
    /// CSV: per-h rows, then a fit summary block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,traceDk,scaledTrace\n");
        for i in 0..self.h_grid.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.h_grid[i], self.traces[i], self.scaled_traces[i]
            ));
        }
        out.push_str("\nj,Hj,stderr\n");
        for (j, (c, e)) in self
            .coefficients
            .iter()
            .zip(&self.coefficient_stderr)
            .enumerate()
        {
            out.push_str(&format!("{j},{c:.16e},{e:.16e}\n"));
        }
        out
    }
}

/// An eigenvalue μ of D with the derived nonlinear eigendata.
#[derive(Debug, Clone)]
pub struct NonlinearEigenpair {
    pub mu: Complex64,
    pub lambda_prime: Complex64,
    /// Undilated eigenvalue (λ′ − 1)·h^{−m/(m+1)}.
    pub lambda: Complex64,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    /// ‖(I − 2λ′B + λ′²A)u‖ / ‖u‖.
    pub residual_u: f64,
    /// ‖(L − 2λ′P + λ′²)v‖ / ‖v‖.
    pub residual_v: f64,
    pub accepted: bool,
}

fn mat_vec_complex(m: &Mat<f64>, v: &[Complex64]) -> Vec<Complex64> {
    let n = m.nrows();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..m.ncols() {
            let mij = m[(i, j)];
            re += mij * v[j].re;
            im += mij * v[j].im;
        }
        out[i] = Complex64::new(re, im);
    }
    out
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Extracts all eigenvalues of D with |μ| > 1e-6, computes residuals for
/// both problem forms, undilates, verifies conjugate pairing, and sorts by
/// residual.
pub fn nonlinear_eigs(
    spec: &ProblemSpec,
    ops: &DiscreteOperators,
    tol: f64,
) -> Result<Vec<NonlinearEigenpair>> {
    // The nonsymmetric eigensolver picks its blocking strategy from the
    // declared parallelism degree, and the degree-one path can stall for
    // hundreds of seconds on these near-skew block matrices at certain
    // sizes. Advertising two lanes keeps it on the fast path even when
    // the thread pool has a single worker.
    let prev = faer::get_global_parallelism();
    let bumped = prev.degree() < 2;
    if bumped {
        faer::set_global_parallelism(faer::Par::rayon(2));
    }
    let evd = ops.d.eigen();
    if bumped {
        faer::set_global_parallelism(prev);
    }
    let evd =
        evd.map_err(|e| Error::Numeric(format!("eigendecomposition of D failed: {e:?}")))?;
    let s = evd.S();
    let uu = evd.U();
    let size = ops.dim;
    let two_n = 2 * size;
    let m = spec.m();

    let mus: Vec<Complex64> = (0..two_n)
        .map(|i| Complex64::new(s[i].re, s[i].im))
        .collect();
    for &mu in &mus {
        if mu.im.abs() > 1e-10 * (1.0 + mu.norm()) {
            let ok = mus
                .iter()
                .any(|&other| (other - mu.conj()).norm() <= 1e-8 * (1.0 + mu.norm()));
            if !ok {
                return Err(Error::Numeric(format!(
                    "conjugate pairing violated for eigenvalue {mu}"
                )));
            }
        }
    }

    let mut pairs = Vec::new();
    for idx in 0..two_n {
        let mu = mus[idx];
        if mu.norm() <= 1e-6 {
            continue;
        }
        let lambda_prime = mu.inv();
        let full: Vec<Complex64> = (0..two_n)
            .map(|i| Complex64::new(uu[(i, idx)].re, uu[(i, idx)].im))
            .collect();
        let u: Vec<Complex64> = full[..size].to_vec();
        let nu = norm2(&u);
        if nu < 1e-12 {
            continue;
        }
        let v = mat_vec_complex(&ops.ahalf, &u);

        let bu = mat_vec_complex(&ops.b, &u);
        let au = mat_vec_complex(&ops.a, &u);
        let lp2 = lambda_prime * lambda_prime;
        let mut r_u = 0.0;
        for i in 0..size {
            let r = u[i] - 2.0 * lambda_prime * bu[i] + lp2 * au[i];
            r_u += r.norm_sqr();
        }
        let residual_u = r_u.sqrt() / nu;

        let lv = mat_vec_complex(&ops.l, &v);
        let nv = norm2(&v);
        let mut r_v = 0.0;
        for i in 0..size {
            let r = lv[i] - 2.0 * lambda_prime * ops.p_diag[i] * v[i] + lp2 * v[i];
            r_v += r.norm_sqr();
        }
        let residual_v = r_v.sqrt() / nv.max(1e-300);

        pairs.push(NonlinearEigenpair {
            mu,
            lambda_prime,
            lambda: undilate(lambda_prime, ops.h, m),
            u,
            v,
            residual_u,
            residual_v,
            accepted: residual_u <= tol && residual_v <= tol,
        });
    }

    pairs.sort_by(|a, b| {
        (a.residual_u + a.residual_v)
            .total_cmp(&(b.residual_u + b.residual_v))
            .then(a.mu.re.total_cmp(&b.mu.re))
            .then(a.mu.im.total_cmp(&b.mu.im))
    });
    Ok(pairs)
}

fn sturm_count(diag: &[f64], off2: f64, sigma: f64) -> usize {
    let pivmin = f64::MIN_POSITIVE / f64::EPSILON * off2.max(1.0);
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in diag.iter().enumerate() {
        d = if i == 0 {
            a - sigma
        } else {
            (a - sigma) - off2 / d
        };
        if d.abs() < pivmin {
            d = -pivmin;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// `index`-th smallest eigenvalue (0-based) of the Dirichlet discretization
/// of −d²/dx² + W(x)² on [−R, R], by Sturm-sequence bisection on the
/// symmetric tridiagonal matrix.
pub fn schrodinger_eigen_k(
    w: &crate::poly::Polynomial,
    grid: &Grid1D,
    index: usize,
) -> Result<f64> {
    if w.dim() != 1 {
        return Err(Error::Input(
            "potential must be a polynomial in one variable".into(),
        ));
    }
    if w.degree() < 1 {
        return Err(Error::Input("potential must be nonconstant".into()));
    }
    if index >= grid.n {
        return Err(Error::Input(format!(
            "eigenvalue index {index} out of range for N = {}",
            grid.n
        )));
    }
    let d2 = grid.delta() * grid.delta();
    let offd = 1.0 / d2;
    let diag: Result<Vec<f64>> = grid
        .points()
        .iter()
        .map(|&x| Ok(2.0 / d2 + w.eval(&[x])?.powi(2)))
        .collect();
    let diag = diag?;
    let off2 = offd * offd;

    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = dmin - 2.0 * offd;
    let mut hi = dmax + 2.0 * offd;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(&diag, off2, mid) >= index + 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest eigenvalue of −d²/dx² + W(x)² (Dirichlet).
pub fn schrodinger_eigen(w: &crate::poly::Polynomial, grid: &Grid1D) -> Result<f64> {
    schrodinger_eigen_k(w, grid, 0)
}

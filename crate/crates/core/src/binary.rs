//! Element design under binary (on/off) constraints.
//!
//! The per-cell element problem is the complex quadratic
//! `f_o(q) = q^H A_o q - 2 Re{b_o^T q}`. With `q = varpi (x + 1) / 2` and
//! `x in {-1, +1}^M` it becomes the real binary quadratic
//! `F_r(x) = x^T A x - 2 b^T x`, which is handled here by the hidden
//! convexity (HC) solver and by [`crate::sphere`] exactly.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, RMat, RVec, Regularized};
use crate::model::ElementConstraint;
use crate::wmmse::{cell_kernel, BeamformerState, Network};

/// Complex quadratic element problem of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementDesignProblem {
    /// Hermitian PSD, `M x M`.
    pub a_o: CMat,
    pub b_o: CVec,
}

impl ElementDesignProblem {
    pub fn elements(&self) -> usize {
        self.b_o.len()
    }

    /// `q^H A_o q - 2 Re{b_o^T q}`.
    pub fn objective(&self, q: &CVec) -> f64 {
        self.a_o.dotc_quad(q) - 2.0 * self.b_o.dot(q).re
    }

    /// Unconstrained minimizer `A_o^{-1} conj(b_o)`, ridge-regularized when
    /// `A_o` is singular or badly conditioned.
    pub fn unconstrained_optimum(&self) -> Result<(CVec, Regularized)> {
        let rhs = CMat::from_column_slice(self.elements(), 1, self.b_o.conjugate().as_slice());
        let (ch, mut reg) = linalg::hpd_cholesky(&self.a_o)?;
        let diag = ch.l_dirty().diagonal();
        let (lo, hi) = diag
            .iter()
            .map(|z| z.re * z.re)
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        let sol = if hi > 0.0 && lo / hi < 1e-14 {
            reg = Regularized(true);
            let m = self.elements() as f64;
            let ridge = 1e-10 * linalg::trace_re(&self.a_o).max(f64::MIN_POSITIVE) / m;
            let mut a = self.a_o.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += cr(ridge);
            }
            linalg::solve_hpd(&a, &rhs)?.0
        } else {
            ch.solve(&rhs)
        };
        Ok((sol.column(0).into_owned(), reg))
    }
}

trait QuadExt {
    fn dotc_quad(&self, q: &CVec) -> f64;
}

impl QuadExt for CMat {
    fn dotc_quad(&self, q: &CVec) -> f64 {
        q.dotc(&(self * q)).re
    }
}

/// Build `A_o`, `b_o` of cell `cell` from the current precoders, decoders
/// and weights:
///
/// `A_o = (sum_k w_k F_{k,cell}) ⊙ (sum_u T W_u W_u^H T^H)^T`,
/// `b_o = sum_{k in cell} w_k diag(T W_k V_k U_k^H H_{k,cell})`.
pub fn assemble_element_problem(
    net: &Network,
    state: &BeamformerState,
    cell: usize,
) -> ElementDesignProblem {
    let m = net.elements();
    let t = net.waveguides[cell].matrix();
    let kernel = cell_kernel(net, state, cell);
    let mut tx_cov = CMat::zeros(m, m);
    let mut b_o = CVec::zeros(m);
    for k in 0..net.users_per_cell() {
        let user = net.user(cell, k);
        let tw = &t * &state.w[user];
        tx_cov += &tw * tw.adjoint();
        let left = &tw * &state.v[user];
        let right = state.u[user].adjoint() * net.h(user, cell);
        let wgt = net.weight(user);
        for r in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..left.ncols() {
                acc += left[(r, s)] * right[(s, r)];
            }
            b_o[r] += acc * wgt;
        }
    }
    let a_o = kernel.component_mul(&tx_cov.transpose());
    ElementDesignProblem {
        a_o: linalg::hermitian_part(&a_o),
        b_o,
    }
}

/// Real binary quadratic `F_r(x) = x^T A x - 2 b^T x` over `x in {-1,1}^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub a: RMat,
    pub b: RVec,
}

impl QuadraticForm {
    pub fn new(a: RMat, b: RVec) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "A is {}x{}, b has {} entries",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        let qf = Self { a, b };
        qf.check()?;
        Ok(qf)
    }

    fn check(&self) -> Result<()> {
        let scale = self.a.amax().max(f64::MIN_POSITIVE);
        if (&self.a - self.a.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidConfig("A must be symmetric".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Random instance: `A = G^T G / M` and `b` with entries uniform on
    /// `(-1, 1)`, `G` likewise.
    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let g = RMat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let a = g.transpose() * g / m as f64;
        let b = RVec::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        Self { a, b }
    }

    pub fn objective(&self, x: &RVec) -> f64 {
        x.dot(&(&self.a * x)) - 2.0 * self.b.dot(x)
    }

    /// Plain-text format: `quadform M`, then the `M` rows of `A`, then `b`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "quadform {}", self.dim());
        let fmt = |it: &mut dyn Iterator<Item = f64>| {
            it.map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
        };
        for r in 0..self.dim() {
            let _ = writeln!(s, "{}", fmt(&mut self.a.row(r).iter().copied()));
        }
        let _ = writeln!(s, "{}", fmt(&mut self.b.iter().copied()));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let perr = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (ln, header) = lines.next().ok_or_else(|| perr(0, "empty input"))?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some("quadform") {
            return Err(perr(ln, "expected 'quadform M'"));
        }
        let m: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| perr(ln, "bad dimension"))?;
        let mut read_row = |what: &str| -> Result<Vec<f64>> {
            let (ln, row) = lines
                .next()
                .ok_or_else(|| perr(ln, &format!("missing {what}")))?;
            let v: Vec<f64> = row
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| perr(ln, "bad number")))
                .collect::<Result<_>>()?;
            if v.len() != m {
                return Err(perr(ln, &format!("{what} must have {m} entries")));
            }
            Ok(v)
        };
        let mut a = RMat::zeros(m, m);
        for r in 0..m {
            let row = read_row("row of A")?;
            for (c, x) in row.into_iter().enumerate() {
                a[(r, c)] = x;
            }
        }
        let b = RVec::from_vec(read_row("b")?);
        Self::new(a, b)
    }
}

/// `A = varpi^2 Re{A_o} / 4`, `b = varpi Re{b_o} / 2 - varpi^2 Re{A_o} 1 / 4`.
pub fn to_real_binary(problem: &ElementDesignProblem, varpi: f64) -> QuadraticForm {
    let re_a = problem.a_o.map(|z| z.re);
    let re_a = (&re_a + re_a.transpose()) * 0.5;
    let a = &re_a * (varpi * varpi / 4.0);
    let row_sums = RVec::from_iterator(re_a.nrows(), re_a.row_iter().map(|r| r.sum()));
    let b = problem.b_o.map(|z| z.re) * (varpi / 2.0) - row_sums * (varpi * varpi / 4.0);
    QuadraticForm { a, b }
}

/// `{-1,1}^M -> {0, varpi}^M`.
pub fn signs_to_response(x: &RVec, varpi: f64) -> CVec {
    x.map(|s| cr(varpi * (s + 1.0) / 2.0))
}

/// `{0, varpi}^M -> {-1,1}^M` (real part thresholded at `varpi / 2`).
pub fn response_to_signs(q: &CVec, varpi: f64) -> RVec {
    q.map(|z| if 2.0 * z.re - varpi >= 0.0 { 1.0 } else { -1.0 })
}

/// Sign with `sign(0) = +1`.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn sign_projection(x: &RVec) -> RVec {
    x.map(sign)
}

/// Eigen-decomposition cached for repeated relaxed solves.
#[derive(Debug, Clone)]
pub struct Spectral {
    /// Ascending eigenvalues.
    pub values: RVec,
    pub vectors: RMat,
}

impl Spectral {
    pub fn new(a: &RMat) -> Self {
        let (values, vectors) = linalg::sym_eigen_sorted(a);
        Self { values, vectors }
    }
}

/// Minimizer of `x^T A x - 2 b^T x` on the sphere `||x||^2 = s`.
#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    /// Dual variable with `mu > -lambda_min`.
    pub mu: f64,
    /// Solution in the eigenbasis of `A`.
    pub x_hat: RVec,
    /// Solution in the original coordinates.
    pub x: RVec,
    /// Relaxed objective value.
    pub value: f64,
    /// `sum b_hat^2 / (lambda + mu)^2 - s` at the returned `mu`.
    pub dual_residual: f64,
    /// `b_hat` vanished on the bottom eigenspace; the leftover norm was put
    /// on the bottom eigenvector.
    pub hard_case: bool,
}

const BISECTION_ITERS: usize = 200;

/// Solve the sphere-constrained quadratic through its convex dual: with
/// `x_hat_i = sign(b_hat_i) sqrt(theta_i)`, `theta_i = b_hat_i^2 / (lambda_i + mu)^2`
/// and `mu` the root of `sum theta_i = s` on `(-lambda_min, inf)`.
pub fn solve_sphere_relaxation(spec: &Spectral, b: &RVec, norm_sq: f64) -> RelaxedSolution {
    let b_hat = spec.vectors.tr_mul(b);
    solve_sphere_relaxation_hat(spec, &b_hat, norm_sq)
}

pub(crate) fn solve_sphere_relaxation_hat(
    spec: &Spectral,
    b_hat: &RVec,
    norm_sq: f64,
) -> RelaxedSolution {
    let lam = &spec.values;
    let n = lam.len();
    let lam_min = lam[0];
    let lam_max = lam[n - 1];
    let h = |mu: f64| -> f64 {
        b_hat
            .iter()
            .zip(lam.iter())
            .map(|(b, l)| {
                let den = l + mu;
                b * b / (den * den)
            })
            .sum::<f64>()
            - norm_sq
    };
    let eps = 1e-12 * (1.0 + lam_max.abs());
    let lo0 = -lam_min + eps;
    let (mu, hard_case) = if h(lo0) <= 0.0 {
        (lo0, true)
    } else {
        let mut lo = lo0;
        let mut gap = (b_hat.norm() / norm_sq.sqrt()).max(eps);
        let mut hi = -lam_min + gap;
        while h(hi) > 0.0 {
            lo = hi;
            gap *= 2.0;
            hi = -lam_min + gap;
        }
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let hm = h(mid);
            if hm.abs() <= 1e-10 * norm_sq {
                lo = mid;
                hi = mid;
                break;
            }
            if hm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), false)
    };
    let dual_residual = h(mu);
    let mut x_hat = RVec::from_iterator(n, b_hat.iter().zip(lam.iter()).map(|(b, l)| b / (l + mu)));
    if hard_case {
        let rest = (norm_sq - x_hat.norm_squared()).max(0.0);
        x_hat[0] = sign(x_hat[0]) * (x_hat[0] * x_hat[0] + rest).sqrt();
        log::debug!("sphere relaxation hit the hard case (leftover norm {rest:e})");
    }
    let nrm = x_hat.norm();
    if nrm > 0.0 {
        x_hat *= norm_sq.sqrt() / nrm;
    } else {
        x_hat[0] = norm_sq.sqrt();
    }
    let value = x_hat
        .iter()
        .zip(lam.iter())
        .zip(b_hat.iter())
        .map(|((x, l), b)| l * x * x - 2.0 * b * x)
        .sum();
    let x = &spec.vectors * &x_hat;
    RelaxedSolution {
        mu,
        x_hat,
        x,
        value,
        dual_residual,
        hard_case,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalSearch {
    /// One coordinate-flip pass in index order.
    #[default]
    SinglePass,
    /// Repeat passes until no flip improves.
    UntilStable,
    Off,
}

#[derive(Debug, Clone)]
pub struct HcOutcome {
    pub x: RVec,
    pub objective: f64,
    pub relaxed: RelaxedSolution,
    /// Whether the projected relaxed point replaced `x_prev`.
    pub accepted_candidate: bool,
    pub flips: usize,
}

/// Single-pass local search flipping coordinates that strictly decrease
/// `F_r`. Returns the number of accepted flips.
pub fn local_search(qf: &QuadraticForm, x: &mut RVec) -> usize {
    local_search_pass(qf, x, &mut (&qf.a * &*x))
}

pub fn local_search_until_stable(qf: &QuadraticForm, x: &mut RVec) -> usize {
    let mut ax = &qf.a * &*x;
    let mut total = 0;
    loop {
        let f = local_search_pass(qf, x, &mut ax);
        total += f;
        if f == 0 {
            return total;
        }
    }
}

fn local_search_pass(qf: &QuadraticForm, x: &mut RVec, ax: &mut RVec) -> usize {
    let mut flips = 0;
    for k in 0..x.len() {
        // F(x with x_k negated) - F(x) = -4 x_k (sum_{m != k} A_km x_m - b_k)
        let kappa = ax[k] - qf.a[(k, k)] * x[k] - qf.b[k];
        let delta = -4.0 * x[k] * kappa;
        if delta < 0.0 {
            let step = -2.0 * x[k];
            x[k] = -x[k];
            ax.axpy(step, &qf.a.column(k), 1.0);
            flips += 1;
        }
    }
    flips
}

pub fn hc_solve(qf: &QuadraticForm, x_prev: &RVec) -> HcOutcome {
    hc_solve_with(qf, x_prev, LocalSearch::SinglePass)
}

/// Hidden-convexity step: relax to the sphere `||x||^2 = M`, solve it in
/// closed form, project to signs, keep the projection only if it does not
/// increase `F_r` over `x_prev`, then run local search.
pub fn hc_solve_with(qf: &QuadraticForm, x_prev: &RVec, ls: LocalSearch) -> HcOutcome {
    let spec = Spectral::new(&qf.a);
    let relaxed = solve_sphere_relaxation(&spec, &qf.b, qf.dim() as f64);
    let candidate = sign_projection(&relaxed.x);
    let (mut x, accepted) = if qf.objective(&candidate) <= qf.objective(x_prev) {
        (candidate, true)
    } else {
        (x_prev.clone(), false)
    };
    let flips = match ls {
        LocalSearch::SinglePass => local_search(qf, &mut x),
        LocalSearch::UntilStable => local_search_until_stable(qf, &mut x),
        LocalSearch::Off => 0,
    };
    HcOutcome {
        objective: qf.objective(&x),
        x,
        relaxed,
        accepted_candidate: accepted,
        flips,
    }
}

/// Closest-point baseline: threshold the unconstrained optimum onto `{0, varpi}`.
pub fn projection_baseline(
    problem: &ElementDesignProblem,
    varpi: f64,
) -> Result<(CVec, Regularized)> {
    let (q, reg) = problem.unconstrained_optimum()?;
    let c = ElementConstraint::Binary { varpi };
    Ok((q.map(|z| c.project(z)), reg))
}

/// Closest-point baseline on the Lorentzian circle.
pub fn gray_projection_baseline(problem: &ElementDesignProblem) -> Result<(CVec, Regularized)> {
    let (q, reg) = problem.unconstrained_optimum()?;
    Ok((q.map(|z| ElementConstraint::Lorentzian.project(z)), reg))
}

//! Exact binary element design by depth-first sphere decoding.
//!
//! The binary quadratic `F_r(x) = x^T A x - 2 b^T x` is rewritten as
//! `||C x - d||^2 - ||d||^2 - zeta M` with `C^T C = A + zeta I` upper
//! triangular, then searched level by level from `x_M` down to `x_1`.

use crate::binary::{hc_solve, QuadraticForm, Spectral};
use crate::error::{Error, Result};
use crate::linalg::{self, RMat, RVec};

#[derive(Debug, Clone)]
pub struct SdProblem {
    /// Upper triangular with positive diagonal.
    pub c: RMat,
    pub d: RVec,
    pub zeta: f64,
    /// Coordinates whose optimal value is known in advance, `+1` or `-1`.
    pub fixed: Vec<Option<f64>>,
    pub qf: QuadraticForm,
}

const CHOLESKY_RETRIES: usize = 20;

impl SdProblem {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// `||C x - d||^2`.
    pub fn distance_sq(&self, x: &RVec) -> f64 {
        (&self.c * x - &self.d).norm_squared()
    }

    /// Squared radius that just contains `x`.
    pub fn radius_sq_through(&self, x: &RVec) -> f64 {
        let m = self.dim() as f64;
        (self.qf.objective(x) + self.zeta * m + self.d.norm_squared()) * (1.0 + 1e-9)
    }

    pub fn fixed_count(&self) -> usize {
        self.fixed.iter().filter(|f| f.is_some()).count()
    }
}

/// Coordinate fixing: `x_k = +1` is optimal whenever
/// `sum_{m != k} |A_km| - b_k < 0`, and `x_k = -1` whenever
/// `-sum_{m != k} |A_km| - b_k > 0`.
pub fn optimality_fixing(a: &RMat, b: &RVec) -> Vec<Option<f64>> {
    (0..b.len())
        .map(|k| {
            let off: f64 = (0..b.len())
                .filter(|&m| m != k)
                .map(|m| a[(k, m)].abs())
                .sum();
            if off - b[k] < 0.0 {
                Some(1.0)
            } else if -off - b[k] > 0.0 {
                Some(-1.0)
            } else {
                None
            }
        })
        .collect()
}

pub fn build_sd_problem(qf: &QuadraticForm) -> Result<SdProblem> {
    let m = qf.dim();
    if m == 0 {
        return Err(Error::Dimension("empty quadratic form".into()));
    }
    let (eig, _) = linalg::sym_eigen_sorted(&qf.a);
    let floor = 1e-8 * (1.0 + qf.a.trace() / m as f64);
    let mut zeta = (floor - eig[0]).max(0.0);
    for attempt in 0..CHOLESKY_RETRIES {
        let mut a = qf.a.clone();
        for i in 0..m {
            a[(i, i)] += zeta;
        }
        if let Some(ch) = a.clone().cholesky() {
            let l = ch.l();
            let c = l.transpose();
            if c.diagonal().iter().all(|&x| x > 0.0) {
                let d = l
                    .solve_lower_triangular(&qf.b)
                    .ok_or(Error::Singular("sphere decoder factor"))?;
                return Ok(SdProblem {
                    c,
                    d,
                    zeta,
                    fixed: optimality_fixing(&a, &qf.b),
                    qf: qf.clone(),
                });
            }
        }
        log::debug!("cholesky retry {attempt} with zeta {zeta:e}");
        zeta = (zeta * 10.0).max(floor);
    }
    Err(Error::Singular("A + zeta I"))
}

/// Leading-block relaxation data for every level.
#[derive(Debug, Clone)]
pub struct LowerBoundCache {
    /// Entry `j` serves the leading `j x j` block, `j = 1..M-1`.
    levels: Vec<Option<(Spectral, RMat)>>,
}

impl LowerBoundCache {
    pub fn new(p: &SdProblem) -> Self {
        let m = p.dim();
        let mut levels = vec![None];
        for j in 1..m {
            levels.push(Some(level_data(p, j)));
        }
        Self { levels }
    }

    /// Lower bound on `min ||C11 x - t||^2` over `x in {-1,1}^j`, with `C11`
    /// the leading `j x j` block.
    pub fn bound(&self, j: usize, t: &RVec) -> f64 {
        match &self.levels[j] {
            Some((spec, p)) => relaxed_bound(spec, p, t, j),
            None => 0.0,
        }
    }
}

fn level_data(p: &SdProblem, j: usize) -> (Spectral, RMat) {
    let c11 = p.c.view((0, 0), (j, j)).into_owned();
    let spec = Spectral::new(&(c11.transpose() * &c11));
    let proj = &c11 * &spec.vectors;
    (spec, proj)
}

/// Dual bound of `min x^T A x - 2 (C11^T t)^T x + ||t||^2` on `||x||^2 = j`.
/// Every `mu > -lambda_min` gives a valid bound by weak duality, so the
/// best one seen during bisection is returned.
fn relaxed_bound(spec: &Spectral, proj: &RMat, t: &RVec, j: usize) -> f64 {
    let b_hat = proj.tr_mul(t);
    let s = j as f64;
    let lam = &spec.values;
    let tt = t.norm_squared();
    let dual = |mu: f64| -> f64 {
        let mut v = -mu * s;
        for (b, l) in b_hat.iter().zip(lam.iter()) {
            v -= b * b / (l + mu);
        }
        v + tt
    };
    let slope = |mu: f64| -> f64 {
        b_hat
            .iter()
            .zip(lam.iter())
            .map(|(b, l)| b * b / ((l + mu) * (l + mu)))
            .sum::<f64>()
            - s
    };
    let eps = 1e-12 * (1.0 + lam[lam.len() - 1].abs());
    let mut lo = -lam[0] + eps;
    let mut best = dual(lo);
    if slope(lo) > 0.0 {
        let mut hi = -lam[0] + (b_hat.norm() / s.sqrt()).max(eps);
        let mut it = 0;
        while slope(hi) > 0.0 && it < 60 {
            lo = hi;
            hi = -lam[0] + 2.0 * (hi + lam[0]);
            it += 1;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            best = best.max(dual(mid));
            let h = slope(mid);
            if h.abs() <= 1e-9 * s {
                break;
            }
            if h > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.max(dual(hi));
    }
    let margin = 1e-10 * (1.0 + tt + best.abs());
    (best - margin).max(0.0)
}

/// Lower bound for levels `1..k-1` given the assignment `q_tail` of
/// levels `k..M` (1-based, `q_tail[0]` is `x_k`).
pub fn hc_lower_bound(p: &SdProblem, q_tail: &[f64], k: usize) -> f64 {
    let m = p.dim();
    assert!(k >= 2 && k <= m, "level {k} outside 2..={m}");
    assert_eq!(q_tail.len(), m - k + 1);
    let j = k - 1;
    let tail = RVec::from_column_slice(q_tail);
    let t = p.d.rows(0, j) - p.c.view((0, j), (j, m - j)) * tail;
    let (spec, proj) = level_data(p, j);
    relaxed_bound(&spec, &proj, &t, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdVariant {
    Plain,
    /// Coordinate fixing only.
    OptimalCondition,
    /// Relaxation lower bound only.
    LowerBound,
    /// Both.
    Accelerated,
}

impl SdVariant {
    pub const ALL: [SdVariant; 4] = [
        Self::Plain,
        Self::OptimalCondition,
        Self::LowerBound,
        Self::Accelerated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::OptimalCondition => "optimal_condition",
            Self::LowerBound => "lower_bound",
            Self::Accelerated => "accelerated",
        }
    }

    pub fn options(self) -> SdOptions {
        let (fixing, lower_bound) = match self {
            Self::Plain => (false, false),
            Self::OptimalCondition => (true, false),
            Self::LowerBound => (false, true),
            Self::Accelerated => (true, true),
        };
        SdOptions {
            fixing,
            lower_bound,
            shrink_radius: true,
        }
    }
}

impl std::str::FromStr for SdVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown SD variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SdOptions {
    pub fixing: bool,
    pub lower_bound: bool,
    /// Tighten the radius to every improved point; off keeps `r0` fixed.
    pub shrink_radius: bool,
}

impl Default for SdOptions {
    fn default() -> Self {
        SdVariant::Accelerated.options()
    }
}

#[derive(Debug, Clone)]
pub struct SdResult {
    /// Entries in `{-1, +1}`.
    pub q_star: RVec,
    /// `F_r(q_star)`.
    pub objective: f64,
    pub nodes_visited: u64,
    /// Squared radius after each improvement, starting with `r0^2`.
    pub radius_trace: Vec<f64>,
}

struct Search<'a> {
    p: &'a SdProblem,
    opts: SdOptions,
    lb: Option<LowerBoundCache>,
    x: Vec<f64>,
    /// `acc[i] = sum over assigned j of C_ij x_j`.
    acc: Vec<f64>,
    radius_sq: f64,
    best: Option<(Vec<f64>, f64)>,
    nodes: u64,
    trace: Vec<f64>,
}

impl Search<'_> {
    fn descend(&mut self, level: usize, partial: f64) {
        if level == 0 {
            let improves = match &self.best {
                Some((_, v)) => partial < *v,
                None => partial < self.radius_sq,
            };
            if improves {
                self.best = Some((self.x.clone(), partial));
                if self.opts.shrink_radius {
                    self.radius_sq = partial;
                    self.trace.push(partial);
                }
            }
            return;
        }
        let idx = level - 1;
        let fixed = if self.opts.fixing {
            self.p.fixed[idx]
        } else {
            None
        };
        let choices: &[f64] = match fixed {
            Some(v) if v > 0.0 => &[1.0],
            Some(_) => &[-1.0],
            None => &[-1.0, 1.0],
        };
        let g = self.acc[idx] - self.p.d[idx];
        let cdiag = self.p.c[(idx, idx)];
        for &v in choices {
            let r = g + cdiag * v;
            let term = r * r;
            let budget = self.radius_sq - partial;
            if !(term <= budget) {
                continue;
            }
            if fixed.is_none() {
                self.nodes += 1;
            }
            if let (Some(lb), true) = (&self.lb, idx >= 1) {
                let t = RVec::from_fn(idx, |i, _| {
                    self.p.d[i] - self.acc[i] - self.p.c[(i, idx)] * v
                });
                if budget - term < lb.bound(idx, &t) {
                    continue;
                }
            }
            self.x[idx] = v;
            for i in 0..idx {
                self.acc[i] += self.p.c[(i, idx)] * v;
            }
            self.descend(idx, partial + term);
            for i in 0..idx {
                self.acc[i] -= self.p.c[(i, idx)] * v;
            }
        }
    }
}

/// Depth-first search inside `||C x - d||^2 < r0_sq`, children visited in
/// the order `-1`, `+1`. Fixed levels are passed through without counting
/// as nodes.
pub fn sd_search(p: &SdProblem, r0_sq: f64, opts: SdOptions) -> Result<SdResult> {
    let m = p.dim();
    let mut s = Search {
        p,
        opts,
        lb: opts.lower_bound.then(|| LowerBoundCache::new(p)),
        x: vec![0.0; m],
        acc: vec![0.0; m],
        radius_sq: r0_sq,
        best: None,
        nodes: 0,
        trace: vec![r0_sq],
    };
    s.descend(m, 0.0);
    let (x, _) = s.best.ok_or(Error::EmptySphere { radius_sq: r0_sq })?;
    let q_star = RVec::from_vec(x);
    Ok(SdResult {
        objective: p.qf.objective(&q_star),
        q_star,
        nodes_visited: s.nodes,
        radius_trace: s.trace,
    })
}

/// Build, seed the radius from HC started at `x_prev`, and search.
pub fn sd_solve(qf: &QuadraticForm, x_prev: &RVec, opts: SdOptions) -> Result<SdResult> {
    let p = build_sd_problem(qf)?;
    let hc = hc_solve(qf, x_prev);
    sd_search(&p, p.radius_sq_through(&hc.x), opts)
}

//! Reference implementations used as oracles by the integration tests.
#![allow(dead_code)]

use hmimo_core::binary::QuadraticForm;
use hmimo_core::model::{build_waveguide, ChannelSet, ScenarioConfig};
use hmimo_core::{BeamformerState, CMat, CVec, Network, RMat, RVec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cmat<R: Rng>(r: usize, c: usize, rng: &mut R) -> CMat {
    CMat::from_fn(r, c, |_, _| cgauss(rng))
}

pub fn cvec<R: Rng>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| cgauss(rng))
}

pub fn signs(m: usize, mask: u64) -> RVec {
    RVec::from_fn(m, |i, _| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
}

/// Exhaustive minimum of `x^T A x - 2 b^T x` over `{-1,1}^M`; first found wins.
pub fn brute_force(qf: &QuadraticForm) -> (RVec, f64) {
    let m = qf.b.len();
    let mut best = (RVec::zeros(m), f64::INFINITY);
    for mask in 0u64..(1 << m) {
        let x = signs(m, mask);
        let f = x.dot(&(&qf.a * &x)) - 2.0 * qf.b.dot(&x);
        if f < best.1 {
            best = (x, f);
        }
    }
    best
}

/// Second-best value over all sign vectors, to detect near ties.
pub fn optimality_gap(qf: &QuadraticForm) -> f64 {
    let m = qf.b.len();
    let mut vals: Vec<f64> = (0u64..(1 << m))
        .map(|mask| {
            let x = signs(m, mask);
            x.dot(&(&qf.a * &x)) - 2.0 * qf.b.dot(&x)
        })
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals[1] - vals[0]
}

pub fn random_qf(m: usize, seed: u64) -> QuadraticForm {
    QuadraticForm::random(m, &mut rng(seed))
}

/// Minimum of `f` over all `levels^M` phase combinations `2 pi k / levels`.
pub fn phase_grid_min(m: usize, levels: usize, f: impl Fn(&CVec) -> f64) -> f64 {
    let total = levels.pow(m as u32);
    let mut best = f64::INFINITY;
    let mut q = CVec::zeros(m);
    for idx in 0..total {
        let mut r = idx;
        for e in q.iter_mut() {
            let k = r % levels;
            r /= levels;
            *e = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / levels as f64);
        }
        best = best.min(f(&q));
    }
    best
}

/// Small multi-cell network with i.i.d. Gaussian channels of unit scale.
pub fn random_network(
    seed: u64,
    cells: usize,
    users: usize,
    n: usize,
    d: usize,
    m_y: usize,
    m_x: usize,
) -> Network {
    let cfg = ScenarioConfig {
        cells,
        users_per_cell: users,
        user_antennas: n,
        streams: d,
        rf_chains: m_y,
        elements_per_rf: m_x,
        p_tot: 1.0,
        p_rf: Some(1.0),
        sigma2: 0.3,
        ..ScenarioConfig::default()
    };
    let mut r = rng(seed);
    let links = (0..cells * users * cells)
        .map(|_| cmat(n, m_y * m_x, &mut r))
        .collect();
    let ch = ChannelSet::from_links(cells, users, links).unwrap();
    let wg = (0..cells).map(|b| build_waveguide(&cfg, b)).collect();
    Network::new(&cfg, ch, wg).unwrap()
}

/// Random precoders, decoders, HPD weights and unit-modulus responses.
pub fn random_state(net: &Network, seed: u64) -> BeamformerState {
    let mut r = rng(seed);
    let users = net.total_users();
    let d = net.streams;
    let n = net.user_antennas();
    let mut st = BeamformerState {
        w: (0..users)
            .map(|u| cmat(net.rf_chains(net.cell_of(u)), d, &mut r))
            .collect(),
        u: (0..users).map(|_| cmat(n, d, &mut r)).collect(),
        v: (0..users)
            .map(|_| {
                let g = cmat(d, d, &mut r);
                &g * g.adjoint() + CMat::identity(d, d) * Complex64::new(0.1, 0.0)
            })
            .collect(),
        q: (0..net.cells())
            .map(|_| cvec(net.elements(), &mut r).map(|z| z / z.norm()))
            .collect(),
    };
    // every RF chain strictly inside its budget
    for cell in 0..net.cells() {
        for rf in 0..net.rf_chains(cell) {
            let p = hmimo_core::wmmse::rf_power(net, &st, cell, rf);
            let target = net.p_rf * r.random_range(0.2..0.9);
            let s = Complex64::new((target / p).sqrt(), 0.0);
            for k in 0..net.users_per_cell() {
                let mut row = st.w[net.user(cell, k)].row_mut(rf);
                row *= s;
            }
        }
    }
    st
}

/// `ln |det X|` through an LU factorization.
pub fn ln_det_lu(x: &CMat) -> f64 {
    x.clone().lu().determinant().norm().ln()
}

/// Rate of `user` from first principles: `ln det(I + S^H X^{-1} S)` with
/// `X` the interference-plus-noise covariance.
pub fn rate_oracle(net: &Network, state: &BeamformerState, user: usize) -> f64 {
    let n = net.user_antennas();
    let mut x = CMat::identity(n, n) * Complex64::new(net.sigma2, 0.0);
    let mut s = CMat::zeros(n, net.streams);
    for bs in 0..net.cells() {
        let g = CMat::from_diagonal(&state.q[bs]) * net.waveguides[bs].matrix();
        for k in 0..net.users_per_cell() {
            let other = net.user(bs, k);
            let hw = net.h(user, bs) * &g * &state.w[other];
            if other == user {
                s = hw;
            } else {
                x += &hw * hw.adjoint();
            }
        }
    }
    let xi = x.try_inverse().unwrap();
    let d = net.streams;
    ln_det_lu(&(CMat::identity(d, d) + s.adjoint() * xi * &s))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn rmat_sym<R: Rng>(m: usize, rng: &mut R) -> RMat {
    let g = RMat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    g.transpose() * g
}

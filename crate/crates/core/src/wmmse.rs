//! WMMSE / block-coordinate-descent machinery for the multi-cell downlink.
//!
//! Users are indexed cell-major: user `k` of cell `i` is `i * U + k`. The
//! effective precoder of that user is `diag(q_i) T_i W_{i_k}`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec, Regularized};
use crate::model::{ChannelSet, ScenarioConfig, WaveguideModel};

/// Channels, propagation matrices and the fixed system constants the
/// block updates need.
#[derive(Debug, Clone)]
pub struct Network {
    pub channels: ChannelSet,
    pub waveguides: Vec<WaveguideModel>,
    pub sigma2: f64,
    /// Per-user priorities, cell-major.
    pub weights: Vec<f64>,
    /// Per-RF-chain power budget, W.
    pub p_rf: f64,
    pub streams: usize,
}

impl Network {
    pub fn new(
        cfg: &ScenarioConfig,
        channels: ChannelSet,
        waveguides: Vec<WaveguideModel>,
    ) -> Result<Self> {
        let weights = (0..cfg.cells)
            .flat_map(|i| (0..cfg.users_per_cell).map(move |k| (i, k)))
            .map(|(i, k)| cfg.weight(i, k))
            .collect();
        let net = Self {
            channels,
            waveguides,
            sigma2: cfg.sigma2,
            weights,
            p_rf: cfg.p_rf(),
            streams: cfg.streams,
        };
        net.check()?;
        Ok(net)
    }

    fn check(&self) -> Result<()> {
        if self.waveguides.len() != self.cells() {
            return Err(Error::Dimension(
                "one waveguide model per BS required".into(),
            ));
        }
        if self
            .waveguides
            .iter()
            .any(|w| w.elements() != self.channels.elements())
        {
            return Err(Error::Dimension(
                "waveguide element count must match channel width".into(),
            ));
        }
        if self.weights.len() != self.total_users() {
            return Err(Error::Dimension("one weight per user required".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig(
                "noise variance must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.channels.cells()
    }

    pub fn users_per_cell(&self) -> usize {
        self.channels.users_per_cell()
    }

    pub fn total_users(&self) -> usize {
        self.cells() * self.users_per_cell()
    }

    pub fn user_antennas(&self) -> usize {
        self.channels.user_antennas()
    }

    pub fn elements(&self) -> usize {
        self.channels.elements()
    }

    pub fn rf_chains(&self, cell: usize) -> usize {
        self.waveguides[cell].rf_chains()
    }

    pub fn user(&self, cell: usize, k: usize) -> usize {
        cell * self.users_per_cell() + k
    }

    pub fn cell_of(&self, user: usize) -> usize {
        user / self.users_per_cell()
    }

    pub fn weight(&self, user: usize) -> f64 {
        self.weights[user]
    }

    /// Channel from BS `bs` to (flat) user `user`.
    pub fn h(&self, user: usize, bs: usize) -> &CMat {
        let u = self.users_per_cell();
        self.channels.get(user / u, user % u, bs)
    }
}

/// All optimization variables of the WMMSE reformulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    /// Digital precoders, `M_y x d`, per user.
    pub w: Vec<CMat>,
    /// Linear decoders, `N x d`, per user.
    pub u: Vec<CMat>,
    /// MSE weights, `d x d` Hermitian PSD, per user.
    pub v: Vec<CMat>,
    /// Element responses, length `M`, per BS.
    pub q: Vec<CVec>,
}

impl BeamformerState {
    /// Random complex Gaussian precoders scaled so every RF chain uses its
    /// full budget; decoders and weights start at zero / identity.
    pub fn initial<R: Rng + ?Sized>(net: &Network, q: Vec<CVec>, rng: &mut R) -> Self {
        let d = net.streams;
        let mut w = Vec::with_capacity(net.total_users());
        for user in 0..net.total_users() {
            let my = net.rf_chains(net.cell_of(user));
            w.push(CMat::from_fn(my, d, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            }));
        }
        let mut state = Self {
            w,
            u: vec![CMat::zeros(net.user_antennas(), d); net.total_users()],
            v: vec![CMat::identity(d, d); net.total_users()],
            q,
        };
        for cell in 0..net.cells() {
            for rf in 0..net.rf_chains(cell) {
                let p = rf_power(net, &state, cell, rf);
                if p > 0.0 {
                    let s = cr((net.p_rf / p).sqrt());
                    for k in 0..net.users_per_cell() {
                        let mut row = state.w[net.user(cell, k)].row_mut(rf);
                        row *= s;
                    }
                }
            }
        }
        state
    }

    /// `diag(q_i) T_i` for every BS.
    pub fn analog(&self, net: &Network) -> Vec<CMat> {
        net.waveguides
            .iter()
            .zip(&self.q)
            .map(|(wg, q)| wg.apply_response(q))
            .collect()
    }
}

/// Power drawn from RF chain `rf` of BS `cell`: `sum_k [W W^H]_{rf,rf}`.
pub fn rf_power(net: &Network, state: &BeamformerState, cell: usize, rf: usize) -> f64 {
    (0..net.users_per_cell())
        .map(|k| state.w[net.user(cell, k)].row(rf).norm_squared())
        .sum()
}

/// Stack of row `rf` of every user's precoder in `cell` (conjugated), i.e.
/// the per-RF-chain variable of length `d * U`.
pub fn stacked_rf_precoder(net: &Network, state: &BeamformerState, cell: usize, rf: usize) -> CVec {
    let d = net.streams;
    let mut out = CVec::zeros(d * net.users_per_cell());
    for k in 0..net.users_per_cell() {
        let row = state.w[net.user(cell, k)].row(rf);
        for s in 0..d {
            out[k * d + s] = row[s].conj();
        }
    }
    out
}

pub fn set_stacked_rf_precoder(
    net: &Network,
    state: &mut BeamformerState,
    cell: usize,
    rf: usize,
    w: &CVec,
) {
    let d = net.streams;
    for k in 0..net.users_per_cell() {
        let mut row = state.w[net.user(cell, k)].row_mut(rf);
        for s in 0..d {
            row[s] = w[k * d + s].conj();
        }
    }
}

/// Desired-signal matrix `H_{i_k,i} G_{i_k}` and the full received
/// covariance `sum_{j,u} J_{i_k,j,u} + sigma^2 I` of one user.
fn received(net: &Network, state: &BeamformerState, analog: &[CMat], user: usize) -> (CMat, CMat) {
    let n = net.user_antennas();
    let own = net.cell_of(user);
    let mut cov = CMat::identity(n, n) * cr(net.sigma2);
    let mut signal = CMat::zeros(n, net.streams);
    for bs in 0..net.cells() {
        let hq = net.h(user, bs) * &analog[bs];
        for k in 0..net.users_per_cell() {
            let other = net.user(bs, k);
            let hg = &hq * &state.w[other];
            cov += &hg * hg.adjoint();
            if other == user {
                debug_assert_eq!(bs, own);
                signal = hg;
            }
        }
    }
    (signal, linalg::hermitian_part(&cov))
}

/// Rate of one user in nats per channel use.
pub fn user_rate(net: &Network, state: &BeamformerState, user: usize) -> Result<f64> {
    let analog = state.analog(net);
    user_rate_with(net, state, &analog, user)
}

fn user_rate_with(
    net: &Network,
    state: &BeamformerState,
    analog: &[CMat],
    user: usize,
) -> Result<f64> {
    let (signal, cov) = received(net, state, analog, user);
    let interference = linalg::hermitian_part(&(&cov - &signal * signal.adjoint()));
    // log det(I + S X^{-1}) = log det(X + S) - log det(X)
    let r = linalg::logdet_hpd(&cov)? - linalg::logdet_hpd(&interference)?;
    Ok(r.max(0.0))
}

/// Per-user rates (nats) of every user.
pub fn user_rates(net: &Network, state: &BeamformerState) -> Result<Vec<f64>> {
    let analog = state.analog(net);
    (0..net.total_users())
        .map(|u| user_rate_with(net, state, &analog, u))
        .collect()
}

pub fn weighted_sum_rate(net: &Network, state: &BeamformerState) -> Result<f64> {
    Ok(user_rates(net, state)?
        .iter()
        .enumerate()
        .map(|(u, r)| net.weight(u) * r)
        .sum())
}

/// MSE matrix of one user for the current decoder.
pub fn mse_matrix(net: &Network, state: &BeamformerState, user: usize) -> CMat {
    let analog = state.analog(net);
    mse_matrix_with(net, state, &analog, user)
}

fn mse_matrix_with(net: &Network, state: &BeamformerState, analog: &[CMat], user: usize) -> CMat {
    let (signal, cov) = received(net, state, analog, user);
    let u = &state.u[user];
    let cross = u.adjoint() * &signal;
    let d = net.streams;
    let e = CMat::identity(d, d) - &cross - cross.adjoint() + u.adjoint() * &cov * u;
    linalg::hermitian_part(&e)
}

/// `sum_k w_k (Tr{V_k E_k} - log det V_k)`.
pub fn wmmse_objective(net: &Network, state: &BeamformerState) -> Result<f64> {
    let analog = state.analog(net);
    let mut total = 0.0;
    for user in 0..net.total_users() {
        let e = mse_matrix_with(net, state, &analog, user);
        let v = &state.v[user];
        total += net.weight(user) * (linalg::trace_re(&(v * &e)) - linalg::logdet_hpd(v)?);
    }
    Ok(total)
}

/// Set every decoder to its MMSE receiver.
pub fn update_decoders(net: &Network, state: &mut BeamformerState) -> Result<Regularized> {
    let analog = state.analog(net);
    let mut flagged = false;
    for user in 0..net.total_users() {
        let (signal, cov) = received(net, state, &analog, user);
        let (u, reg) = linalg::solve_hpd(&cov, &signal)?;
        flagged |= reg.0;
        state.u[user] = u;
    }
    Ok(Regularized(flagged))
}

/// Set every weight matrix to the inverse of its MSE matrix.
pub fn update_weights(net: &Network, state: &mut BeamformerState) -> Result<Regularized> {
    let analog = state.analog(net);
    let mut flagged = false;
    for user in 0..net.total_users() {
        let e = mse_matrix_with(net, state, &analog, user);
        let (v, reg) = linalg::inverse_hpd(&e)?;
        flagged |= reg.0;
        state.v[user] = v;
    }
    Ok(Regularized(flagged))
}

/// `sum over all users k of w_k H_{k,cell}^H U_k V_k U_k^H H_{k,cell}`,
/// the `M x M` matrix every per-cell quadratic form is built from.
pub fn cell_kernel(net: &Network, state: &BeamformerState, cell: usize) -> CMat {
    let m = net.elements();
    let mut k = CMat::zeros(m, m);
    for user in 0..net.total_users() {
        let uh = state.u[user].adjoint() * net.h(user, cell);
        k += uh.adjoint() * &state.v[user] * &uh * cr(net.weight(user));
    }
    linalg::hermitian_part(&k)
}

/// Quantities shared by all per-RF subproblems of one cell.
struct CellPrecoderContext {
    /// `G^H K G` with `G = diag(q) T`; `mu_m` sits on its diagonal.
    gram: CMat,
    /// Per user of the cell: `G^H (w_k H_k^H U_k V_k)`, `M_y x d`.
    linear: Vec<CMat>,
}

impl CellPrecoderContext {
    fn new(net: &Network, state: &BeamformerState, cell: usize) -> Self {
        let g = net.waveguides[cell].apply_response(&state.q[cell]);
        let kernel = cell_kernel(net, state, cell);
        let gram = linalg::hermitian_part(&(g.adjoint() * &kernel * &g));
        let linear = (0..net.users_per_cell())
            .map(|k| {
                let user = net.user(cell, k);
                let p = net.h(user, cell).adjoint() * &state.u[user] * &state.v[user].adjoint();
                g.adjoint() * p * cr(net.weight(user))
            })
            .collect();
        Self { gram, linear }
    }

    /// `(mu, d^H)` for RF chain `rf` using the current rows of `W`.
    fn subproblem(
        &self,
        net: &Network,
        state: &BeamformerState,
        cell: usize,
        rf: usize,
    ) -> (f64, CVec) {
        let d = net.streams;
        let users = net.users_per_cell();
        let mut dh = CVec::zeros(d * users);
        for m in 0..self.gram.ncols() {
            if m == rf {
                continue;
            }
            let coef = self.gram[(rf, m)];
            if coef == cr(0.0) {
                continue;
            }
            for k in 0..users {
                let row = state.w[net.user(cell, k)].row(m);
                for s in 0..d {
                    dh[k * d + s] += coef * row[s];
                }
            }
        }
        for k in 0..users {
            for s in 0..d {
                dh[k * d + s] -= self.linear[k][(rf, s)];
            }
        }
        (self.gram[(rf, rf)].re.max(0.0), dh)
    }
}

/// Coefficients of the per-RF-chain problem
/// `min mu ||w||^2 + 2 Re{d^H w}  s.t. ||w||^2 <= P`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfSubproblem {
    pub mu: f64,
    pub d: CVec,
}

impl RfSubproblem {
    pub fn objective(&self, w: &CVec) -> f64 {
        self.mu * w.norm_squared() + 2.0 * self.d.dotc(w).re
    }
}

pub fn precoder_subproblem(
    net: &Network,
    state: &BeamformerState,
    cell: usize,
    rf: usize,
) -> RfSubproblem {
    let ctx = CellPrecoderContext::new(net, state, cell);
    let (mu, dh) = ctx.subproblem(net, state, cell, rf);
    RfSubproblem {
        mu,
        d: dh.conjugate(),
    }
}

/// Global minimizer `-min{1/mu, sqrt(P)/||d||} d` of the per-RF problem.
pub fn update_precoder_rf(mu: f64, d: &CVec, p_rf: f64) -> CVec {
    let nd = d.norm();
    if nd == 0.0 {
        return CVec::zeros(d.len());
    }
    let cap = p_rf.sqrt() / nd;
    let scale = if mu > 0.0 { (1.0 / mu).min(cap) } else { cap };
    d * cr(-scale)
}

/// Gauss-Seidel sweep over all RF chains: cells outer, RF index inner, each
/// update seeing the latest rows of the others.
pub fn update_all_precoders(net: &Network, state: &mut BeamformerState) {
    for cell in 0..net.cells() {
        let ctx = CellPrecoderContext::new(net, state, cell);
        for rf in 0..net.rf_chains(cell) {
            let (mu, dh) = ctx.subproblem(net, state, cell, rf);
            let w = update_precoder_rf(mu, &dh.conjugate(), net.p_rf);
            set_stacked_rf_precoder(net, state, cell, rf, &w);
        }
    }
}

/// Per-user and weighted-sum rates in bits per channel use.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RateReport {
    pub user_rates: Vec<f64>,
    pub weighted_sum_rate: f64,
}

impl RateReport {
    pub fn evaluate(net: &Network, state: &BeamformerState) -> Result<Self> {
        let user_rates: Vec<f64> = user_rates(net, state)?
            .into_iter()
            .map(|r| r / std::f64::consts::LN_2)
            .collect();
        let weighted_sum_rate = user_rates
            .iter()
            .enumerate()
            .map(|(u, r)| net.weight(u) * r)
            .sum();
        Ok(Self {
            user_rates,
            weighted_sum_rate,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{build_waveguide, generate_channels};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(h: f64, sigma2: f64) -> Network {
        let ch = ChannelSet::from_links(1, 1, vec![CMat::from_element(1, 1, cr(h))]).unwrap();
        Network {
            channels: ch,
            waveguides: vec![WaveguideModel::identity(1)],
            sigma2,
            weights: vec![1.0],
            p_rf: 1.0,
            streams: 1,
        }
    }

    fn scalar_state(p: f64) -> BeamformerState {
        BeamformerState {
            w: vec![CMat::from_element(1, 1, cr(p))],
            u: vec![CMat::zeros(1, 1)],
            v: vec![CMat::identity(1, 1)],
            q: vec![CVec::from_element(1, cr(1.0))],
        }
    }

    pub(crate) fn random_setup(seed: u64) -> (Network, BeamformerState) {
        let cfg = ScenarioConfig {
            cells: 2,
            users_per_cell: 2,
            user_antennas: 2,
            streams: 1,
            rf_chains: 2,
            elements_per_rf: 3,
            sigma2: 1e-13,
            seed,
            ..Default::default()
        };
        let ch = generate_channels(&cfg);
        let wg = (0..cfg.cells).map(|b| build_waveguide(&cfg, b)).collect();
        let net = Network::new(&cfg, ch, wg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let q = (0..cfg.cells)
            .map(|_| {
                CVec::from_fn(cfg.elements(), |_, _| {
                    Complex64::from_polar(1.0, rng.random_range(0.0..6.28))
                })
            })
            .collect();
        let mut st = BeamformerState::initial(&net, q, &mut rng);
        for u in st.u.iter_mut() {
            *u = CMat::from_fn(2, 1, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 1e5
            });
        }
        (net, st)
    }

    #[test]
    fn zero_precoder_zero_rate() {
        let net = scalar_net(2.0, 0.5);
        let st = scalar_state(0.0);
        assert_eq!(user_rate(&net, &st, 0).unwrap(), 0.0);
    }

    #[test]
    fn scalar_shannon_rate() {
        let net = scalar_net(2.0, 0.5);
        let st = scalar_state(0.7);
        let expect = (1.0f64 + 4.0 * 0.49 / 0.5).ln();
        assert!((user_rate(&net, &st, 0).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn mse_identity_cases() {
        let net = scalar_net(2.0, 0.5);
        let st = scalar_state(0.7);
        assert!((mse_matrix(&net, &st, 0)[(0, 0)] - cr(1.0)).norm() < 1e-15);
        let mut st0 = scalar_state(0.0);
        st0.u[0] = CMat::from_element(1, 1, Complex64::new(0.3, -0.4));
        let e = mse_matrix(&net, &st0, 0)[(0, 0)];
        assert!((e - cr(1.0 + 0.5 * 0.25)).norm() < 1e-15);
    }

    #[test]
    fn scalar_mmse_decoder() {
        let (h, p, s2) = (2.0, 0.7, 0.5);
        let net = scalar_net(h, s2);
        let mut st = scalar_state(p);
        update_decoders(&net, &mut st).unwrap();
        let expect = h * p / (h * h * p * p + s2);
        assert!((st.u[0][(0, 0)] - cr(expect)).norm() < 1e-14);
    }

    #[test]
    fn weight_update_inverts_mse() {
        let (net, mut st) = random_setup(5);
        update_decoders(&net, &mut st).unwrap();
        update_weights(&net, &mut st).unwrap();
        for user in 0..net.total_users() {
            let prod = &st.v[user] * mse_matrix(&net, &st, user);
            assert!((prod - CMat::identity(1, 1)).norm() < 1e-10);
        }
    }

    #[test]
    fn block_updates_never_increase_objective() {
        for seed in 0..10 {
            let (net, mut st) = random_setup(seed);
            let mut prev = wmmse_objective(&net, &st).unwrap();
            for _ in 0..3 {
                update_decoders(&net, &mut st).unwrap();
                let o = wmmse_objective(&net, &st).unwrap();
                assert!(
                    o <= prev + 1e-9 * prev.abs().max(1.0),
                    "decoder step {prev} -> {o}"
                );
                prev = o;
                update_weights(&net, &mut st).unwrap();
                let o = wmmse_objective(&net, &st).unwrap();
                assert!(
                    o <= prev + 1e-9 * prev.abs().max(1.0),
                    "weight step {prev} -> {o}"
                );
                prev = o;
                update_all_precoders(&net, &mut st);
                let o = wmmse_objective(&net, &st).unwrap();
                assert!(
                    o <= prev + 1e-9 * prev.abs().max(1.0),
                    "precoder step {prev} -> {o}"
                );
                prev = o;
            }
        }
    }

    #[test]
    fn precoder_closed_form_examples() {
        let d = CVec::from_vec(vec![cr(1.0), cr(0.0)]);
        let w = update_precoder_rf(2.0, &d, 1.0);
        assert!((w - CVec::from_vec(vec![cr(-0.5), cr(0.0)])).norm() < 1e-15);
        let w = update_precoder_rf(2.0, &d, 0.09);
        assert!((w - CVec::from_vec(vec![cr(-0.3), cr(0.0)])).norm() < 1e-15);
        let w = update_precoder_rf(3.0, &CVec::zeros(3), 1.0);
        assert_eq!(w, CVec::zeros(3));
        // mu = 0: full power against d
        let w = update_precoder_rf(0.0, &CVec::from_vec(vec![cr(0.0), cr(2.0)]), 4.0);
        assert!((w - CVec::from_vec(vec![cr(0.0), cr(-2.0)])).norm() < 1e-15);
    }

    #[test]
    fn zero_channels_give_trivial_subproblem() {
        let (mut net, st) = random_setup(1);
        let links = net
            .channels
            .links()
            .iter()
            .map(|h| CMat::zeros(h.nrows(), h.ncols()))
            .collect();
        net.channels = ChannelSet::from_links(2, 2, links).unwrap();
        let sp = precoder_subproblem(&net, &st, 1, 0);
        assert_eq!(sp.mu, 0.0);
        assert_eq!(sp.d.norm(), 0.0);
    }

    #[test]
    fn stacked_precoder_power_identity() {
        let (net, st) = random_setup(2);
        for cell in 0..net.cells() {
            for rf in 0..net.rf_chains(cell) {
                let direct: f64 = (0..net.users_per_cell())
                    .map(|k| {
                        let w = &st.w[net.user(cell, k)];
                        (w * w.adjoint())[(rf, rf)].re
                    })
                    .sum();
                let stacked = stacked_rf_precoder(&net, &st, cell, rf).norm_squared();
                assert!((direct - stacked).abs() <= 1e-12 * direct.max(1e-300));
            }
        }
    }

    #[test]
    fn initial_state_uses_full_rf_power() {
        let (net, st) = random_setup(4);
        for cell in 0..net.cells() {
            for rf in 0..net.rf_chains(cell) {
                assert!((rf_power(&net, &st, cell, rf) - net.p_rf).abs() < 1e-12 * net.p_rf);
            }
        }
    }
}

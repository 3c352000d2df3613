//! Geometric multipath downlink channels for the multi-cell layout.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cr, CMat, CVec};
use crate::model::config::{ChannelParams, ScenarioConfig};

/// LoS response of a uniform linear array: `exp(j 2 pi delta / lambda (m-1) sin phi)`.
pub fn los_steering(m: usize, delta: f64, lambda: f64, phi: f64) -> CVec {
    let k = 2.0 * PI * delta / lambda * phi.sin();
    CVec::from_fn(m, |i, _| Complex64::from_polar(1.0, k * i as f64))
}

/// Element layout of the planar BS array: `rf_chains` microstrips stacked
/// along y, `elements_per_rf` elements along x, microstrip-major ordering.
#[derive(Debug, Clone, Copy)]
pub struct BsArray {
    pub elements_per_rf: usize,
    pub rf_chains: usize,
    pub delta_x: f64,
    pub delta_y: f64,
    pub lambda: f64,
}

impl BsArray {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            elements_per_rf: cfg.elements_per_rf,
            rf_chains: cfg.rf_chains,
            delta_x: cfg.delta_x,
            delta_y: cfg.delta_y,
            lambda: cfg.wavelength(),
        }
    }

    pub fn elements(&self) -> usize {
        self.elements_per_rf * self.rf_chains
    }

    pub fn response(&self, azimuth: f64, elevation: f64) -> CVec {
        let k = 2.0 * PI / self.lambda;
        let ux = azimuth.sin() * elevation.cos();
        let uy = elevation.sin();
        CVec::from_fn(self.elements(), |r, _| {
            let mx = (r % self.elements_per_rf) as f64;
            let my = (r / self.elements_per_rf) as f64;
            Complex64::from_polar(1.0, k * (mx * self.delta_x * ux + my * self.delta_y * uy))
        })
    }
}

/// Half-wavelength ULA at the user.
pub fn user_response(n: usize, arrival: f64) -> CVec {
    los_steering(n, 0.5, 1.0, arrival)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub arrival: f64,
    pub departure_azimuth: f64,
    pub departure_elevation: f64,
}

/// Amplitude factor `sqrt(10^(-PL/10))` of the log-distance pathloss law.
pub fn pathloss_amplitude(params: &ChannelParams, distance: f64) -> f64 {
    let pl_db = params.pathloss_ref_db + 10.0 * params.pathloss_exponent * distance.log10();
    10f64.powf(-pl_db / 20.0)
}

/// `amplitude * sqrt(1/P) * sum_p g_p a_user(theta_p) a_bs(phi_p)^H`.
pub fn channel_from_paths(n: usize, bs: &BsArray, paths: &[Path], amplitude: f64) -> CMat {
    let mut h = CMat::zeros(n, bs.elements());
    for p in paths {
        let au = user_response(n, p.arrival);
        let ab = bs.response(p.departure_azimuth, p.departure_elevation);
        h += (au * ab.adjoint()) * p.gain;
    }
    h * cr(amplitude / (paths.len().max(1) as f64).sqrt())
}

pub fn draw_paths<R: Rng + ?Sized>(rng: &mut R, count: usize, elevation_spread: f64) -> Vec<Path> {
    (0..count)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Path {
                gain: Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2,
                arrival: rng.random_range(-FRAC_PI_2..FRAC_PI_2),
                departure_azimuth: rng.random_range(-FRAC_PI_2..FRAC_PI_2),
                departure_elevation: if elevation_spread > 0.0 {
                    rng.random_range(-elevation_spread..elevation_spread)
                } else {
                    0.0
                },
            }
        })
        .collect()
}

/// BS sites on a regular polygon whose side is the inter-cell distance.
pub fn bs_positions(cells: usize, spacing: f64) -> Vec<[f64; 2]> {
    if cells == 1 {
        return vec![[0.0, 0.0]];
    }
    let radius = spacing / (2.0 * (PI / cells as f64).sin());
    (0..cells)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / cells as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

/// Users uniform (in area) on the annulus `[min_distance, radius]` around
/// their own BS.
pub fn drop_users<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    bs: &[[f64; 2]],
    rng: &mut R,
) -> Vec<[f64; 2]> {
    let r_min = cfg.channel.min_distance;
    let r_max = cfg.cell_radius();
    let mut out = Vec::with_capacity(cfg.total_users());
    for site in bs {
        for _ in 0..cfg.users_per_cell {
            let r = rng.random_range(r_min * r_min..r_max * r_max).sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            out.push([site[0] + r * a.cos(), site[1] + r * a.sin()]);
        }
    }
    out
}

/// Complex channels `H[i_k][j]` from every BS `j` to every user `k` of
/// every cell `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    cells: usize,
    users_per_cell: usize,
    h: Vec<CMat>,
}

impl ChannelSet {
    /// `links` is ordered cell-major over users, then by BS.
    pub fn from_links(cells: usize, users_per_cell: usize, links: Vec<CMat>) -> Result<Self> {
        if links.len() != cells * users_per_cell * cells {
            return Err(Error::Dimension(format!(
                "expected {} links, got {}",
                cells * users_per_cell * cells,
                links.len()
            )));
        }
        let shape = links[0].shape();
        if links.iter().any(|h| h.shape() != shape) {
            return Err(Error::Dimension("channel shapes differ".into()));
        }
        Ok(Self {
            cells,
            users_per_cell,
            h: links,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    pub fn user_antennas(&self) -> usize {
        self.h[0].nrows()
    }

    pub fn elements(&self) -> usize {
        self.h[0].ncols()
    }

    /// Channel from BS `bs` to user `user` of cell `cell`.
    pub fn get(&self, cell: usize, user: usize, bs: usize) -> &CMat {
        &self.h[(cell * self.users_per_cell + user) * self.cells + bs]
    }

    pub fn links(&self) -> &[CMat] {
        &self.h
    }

    /// Text dump: a header line followed by one block per link with `N`
    /// rows of `M` whitespace-separated `re im` pairs.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "channelset cells {} users {} n {} m {}",
            self.cells,
            self.users_per_cell,
            self.user_antennas(),
            self.elements()
        );
        for i in 0..self.cells {
            for k in 0..self.users_per_cell {
                for j in 0..self.cells {
                    let _ = writeln!(s, "link {i} {k} {j}");
                    let h = self.get(i, k, j);
                    for r in 0..h.nrows() {
                        let row: Vec<String> = h
                            .row(r)
                            .iter()
                            .map(|z| format!("{:?} {:?}", z.re, z.im))
                            .collect();
                        let _ = writeln!(s, "{}", row.join(" "));
                    }
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let perr = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (ln, header) = lines.next().ok_or_else(|| perr(0, "empty input"))?;
        let tok: Vec<&str> = header.split_whitespace().collect();
        if tok.len() != 9 || tok[0] != "channelset" {
            return Err(perr(ln, "expected 'channelset cells L users U n N m M'"));
        }
        let num =
            |i: usize| -> Result<usize> { tok[i].parse().map_err(|_| perr(ln, "bad dimension")) };
        let (cells, users, n, m) = (num(2)?, num(4)?, num(6)?, num(8)?);
        let mut links = Vec::with_capacity(cells * users * cells);
        for _ in 0..cells * users * cells {
            let (ln, tag) = lines.next().ok_or_else(|| perr(ln, "missing link block"))?;
            if !tag.starts_with("link") {
                return Err(perr(ln, "expected 'link i k j'"));
            }
            let mut h = CMat::zeros(n, m);
            for r in 0..n {
                let (ln, row) = lines.next().ok_or_else(|| perr(ln, "missing row"))?;
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| perr(ln, "bad number")))
                    .collect::<Result<_>>()?;
                if vals.len() != 2 * m {
                    return Err(perr(ln, "wrong row length"));
                }
                for c in 0..m {
                    h[(r, c)] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
                }
            }
            links.push(h);
        }
        Self::from_links(cells, users, links)
    }
}

/// Draw a full channel set for the scenario. The stream of random numbers
/// depends only on `cfg.seed` and the configuration.
pub fn generate_channels(cfg: &ScenarioConfig) -> ChannelSet {
    generate_channels_seeded(cfg, cfg.seed)
}

pub fn generate_channels_seeded(cfg: &ScenarioConfig, seed: u64) -> ChannelSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = bs_positions(cfg.cells, cfg.inter_cell_distance);
    let users = drop_users(cfg, &sites, &mut rng);
    let array = BsArray::from_config(cfg);
    let mut links = Vec::with_capacity(cfg.total_users() * cfg.cells);
    for u in &users {
        for site in &sites {
            let dist = ((u[0] - site[0]).powi(2) + (u[1] - site[1]).powi(2))
                .sqrt()
                .max(cfg.channel.min_distance);
            let paths = draw_paths(&mut rng, cfg.channel.paths, cfg.channel.elevation_spread);
            links.push(channel_from_paths(
                cfg.user_antennas,
                &array,
                &paths,
                pathloss_amplitude(&cfg.channel, dist),
            ));
        }
    }
    ChannelSet::from_links(cfg.cells, cfg.users_per_cell, links).expect("consistent shapes")
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::waveguide::Feeding;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Parameters of the geometric multipath channel and the user drop.
///
/// None of these are pinned by the system model; they are engineering
/// defaults that put cell-edge SNR at 30 dBm in a moderate regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    /// Number of propagation paths per BS/user link.
    pub paths: usize,
    /// Log-distance pathloss exponent.
    pub pathloss_exponent: f64,
    /// Pathloss at the 1 m reference distance, dB.
    pub pathloss_ref_db: f64,
    /// Minimum BS-user distance, m.
    pub min_distance: f64,
    /// Radius of the disc users are dropped in; `None` means half the
    /// inter-cell distance.
    pub cell_radius: Option<f64>,
    /// Half-width of the uniform elevation range of departure angles, rad.
    pub elevation_spread: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            paths: 4,
            pathloss_exponent: 2.5,
            // free-space loss at 1 m and 28 GHz
            pathloss_ref_db: 61.4,
            min_distance: 10.0,
            cell_radius: None,
            elevation_spread: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// All physical and system parameters of a multi-cell scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Number of cells (one BS per cell).
    pub cells: usize,
    pub users_per_cell: usize,
    /// Receive antennas per user.
    pub user_antennas: usize,
    /// Data streams per user.
    pub streams: usize,
    /// Microstrips per BS, one RF chain each.
    pub rf_chains: usize,
    /// Metamaterial elements on each microstrip.
    pub elements_per_rf: usize,
    /// Total power budget, W.
    pub p_tot: f64,
    /// Per-RF-chain budget, W. Defaults to `p_tot / M`.
    pub p_rf: Option<f64>,
    /// Noise variance, W.
    pub sigma2: f64,
    /// Carrier frequency, Hz.
    pub frequency: f64,
    /// Waveguide attenuation coefficient, 1/m.
    pub alpha: f64,
    /// Waveguide wavenumber, rad/m.
    pub beta: f64,
    /// Element spacing along a microstrip, m.
    pub delta_x: f64,
    /// Spacing between microstrips, m.
    pub delta_y: f64,
    /// Amplitude of an element in the "on" state.
    pub varpi: f64,
    /// Distance between neighbouring BSs, m.
    pub inter_cell_distance: f64,
    /// Per-user priorities, cell-major; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    pub feeding: Feeding,
    pub seed: u64,
    pub channel: ChannelParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let frequency = 28e9;
        let lambda = SPEED_OF_LIGHT / frequency;
        Self {
            cells: 3,
            users_per_cell: 2,
            user_antennas: 2,
            streams: 2,
            rf_chains: 4,
            elements_per_rf: 8,
            p_tot: dbm_to_watts(30.0),
            p_rf: None,
            sigma2: dbm_to_watts(-104.0),
            frequency,
            alpha: 0.6,
            beta: 29.56 * frequency / 1e9,
            delta_x: lambda / 8.0,
            delta_y: lambda / 2.0,
            varpi: 0.8,
            inter_cell_distance: 400.0,
            weights: None,
            feeding: Feeding::Edge,
            seed: 0,
            channel: ChannelParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// Total number of elements per BS.
    pub fn elements(&self) -> usize {
        self.rf_chains * self.elements_per_rf
    }

    pub fn total_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn p_rf(&self) -> f64 {
        self.p_rf.unwrap_or(self.p_tot / self.elements() as f64)
    }

    pub fn weight(&self, cell: usize, user: usize) -> f64 {
        match &self.weights {
            Some(w) => w[cell * self.users_per_cell + user],
            None => 1.0,
        }
    }

    pub fn cell_radius(&self) -> f64 {
        self.channel
            .cell_radius
            .unwrap_or(self.inter_cell_distance / 2.0)
    }

    /// Same scenario with a different number of elements per microstrip.
    pub fn with_elements_per_rf(&self, m_x: usize) -> Self {
        Self {
            elements_per_rf: m_x,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.cells == 0 || self.users_per_cell == 0 || self.streams == 0 {
            return bad("cells, users_per_cell and streams must be positive".into());
        }
        if self.rf_chains == 0 || self.elements_per_rf == 0 {
            return bad("rf_chains and elements_per_rf must be positive".into());
        }
        if self.rf_chains < self.users_per_cell * self.streams {
            return bad(format!(
                "need M_y >= U*d, got M_y = {} < {}",
                self.rf_chains,
                self.users_per_cell * self.streams
            ));
        }
        if self.user_antennas < self.streams {
            return bad(format!(
                "need N >= d, got N = {} < d = {}",
                self.user_antennas, self.streams
            ));
        }
        let positive = [
            ("p_tot", self.p_tot),
            ("p_rf", self.p_rf()),
            ("sigma2", self.sigma2),
            ("frequency", self.frequency),
            ("delta_x", self.delta_x),
            ("delta_y", self.delta_y),
            ("varpi", self.varpi),
            ("inter_cell_distance", self.inter_cell_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite() && self.beta.is_finite()) {
            return bad("alpha must be non-negative and beta finite".into());
        }
        if let Some(w) = &self.weights {
            if w.len() != self.total_users() {
                return bad(format!(
                    "expected {} weights, got {}",
                    self.total_users(),
                    w.len()
                ));
            }
            if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return bad("weights must be non-negative".into());
            }
        }
        let ch = &self.channel;
        if ch.paths == 0 || !(ch.min_distance > 0.0) || !(self.cell_radius() > ch.min_distance) {
            return bad("channel needs >= 1 path and cell_radius > min_distance > 0".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

//! SNR scaling of a single-microstrip MISO link.
//!
//! One RF chain drives `M` elements; a single-antenna user sits at angle
//! `phi`. Closed forms are compared with the exact received-signal model
//! `A |a^H Q t w|^2 / sigma^2`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, CVec};
use crate::model::{los_steering, microstrip_coefficients, Feeding, IndexOffset, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisoConfig {
    pub elements: usize,
    /// Transmit power budget, W.
    pub p: f64,
    /// Noise power, W.
    pub sigma2: f64,
    /// Element radiating area factor.
    pub area: f64,
    /// User angle, rad.
    pub phi: f64,
    pub delta: f64,
    pub wavelength: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl MisoConfig {
    /// Constants of the published scaling figure: 28 GHz, `delta = lambda / 8`,
    /// `p / sigma^2 = 1`, `A = 1`, `alpha = 0.6`, `beta = 29.56 f / 1e9`.
    pub fn reference(elements: usize) -> Self {
        let f = 28e9;
        let wavelength = SPEED_OF_LIGHT / f;
        Self {
            elements,
            p: 1.0,
            sigma2: 1.0,
            area: 1.0,
            phi: 0.0,
            delta: wavelength / 8.0,
            wavelength,
            alpha: 0.6,
            beta: 29.56 * f / 1e9,
        }
    }

    pub fn psi(&self) -> f64 {
        2.0 * PI * self.delta / self.wavelength * self.phi.sin() + self.delta * self.beta
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.p, self.sigma2, self.area, self.delta, self.wavelength];
        if self.elements == 0 || positive.iter().any(|x| !(*x > 0.0)) || self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "invalid MISO configuration {self:?}"
            )));
        }
        Ok(())
    }

    fn steering(&self) -> CVec {
        los_steering(self.elements, self.delta, self.wavelength, self.phi)
    }

    fn waveguide(&self) -> CVec {
        microstrip_coefficients(
            self.elements,
            self.delta,
            self.alpha,
            self.beta,
            Feeding::Edge,
            IndexOffset::ZeroBased,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    Digital,
    HybridDA,
    HmimoGray,
    HmimoBinary,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Self::Digital,
        Self::HybridDA,
        Self::HmimoGray,
        Self::HmimoBinary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Digital => "digital",
            Self::HybridDA => "hybrid_da",
            Self::HmimoGray => "hmimo_gray",
            Self::HmimoBinary => "hmimo_binary",
        }
    }

    /// SNR per unit `p M A / sigma^2`.
    pub fn coefficient(self) -> f64 {
        match self {
            Self::Digital | Self::HybridDA => 1.0,
            Self::HmimoGray => 0.5,
            Self::HmimoBinary => 2.0 / (PI * PI),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown architecture '{s}'")))
    }
}

pub fn snr_closed_form(cfg: &MisoConfig, arch: Architecture) -> f64 {
    arch.coefficient() * cfg.p * cfg.elements as f64 * cfg.area / cfg.sigma2
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisoOutcome {
    pub snr: f64,
    /// `||Q t w||^2` (or `||w||^2` for the digital array).
    pub tx_power: f64,
    /// Transmit power above the budget by more than 1%.
    pub over_budget: bool,
}

/// Per-element transmitted field `Q t w` (digital: `w` itself) of the
/// prescribed beamformer.
pub fn transmit_field(cfg: &MisoConfig, arch: Architecture) -> CVec {
    let m = cfg.elements as f64;
    let a = cfg.steering();
    match arch {
        Architecture::Digital => &a * cr((cfg.p / m).sqrt()),
        // phase shifters behind one RF chain, all-ones feed
        Architecture::HybridDA => &a * cr((cfg.p / m).sqrt()),
        Architecture::HmimoGray => {
            let psi = cfg.psi();
            let q = CVec::from_fn(cfg.elements, |i, _| {
                (Complex64::from_polar(1.0, i as f64 * psi) + Complex64::i()) * 0.5
            });
            q.component_mul(&cfg.waveguide()) * cr((2.0 * cfg.p / m).sqrt())
        }
        Architecture::HmimoBinary => {
            let q = binary_design(cfg);
            q.component_mul(&cfg.waveguide()) * cr((2.0 * cfg.p / m).sqrt())
        }
    }
}

/// `q_m = 1` where `cos((m-1) psi) > 0`, else `0`.
pub fn binary_design(cfg: &MisoConfig) -> CVec {
    let psi = cfg.psi();
    CVec::from_fn(cfg.elements, |i, _| {
        if (i as f64 * psi).cos() > 0.0 {
            cr(1.0)
        } else {
            cr(0.0)
        }
    })
}

pub fn snr_simulated(cfg: &MisoConfig, arch: Architecture) -> MisoOutcome {
    let x = transmit_field(cfg, arch);
    let gain = cfg.steering().dotc(&x).norm_sqr();
    let tx_power = x.norm_squared();
    MisoOutcome {
        snr: cfg.area * gain / cfg.sigma2,
        tx_power,
        over_budget: tx_power > cfg.p * 1.01,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisoRow {
    #[serde(rename = "M")]
    pub elements: usize,
    pub architecture: String,
    pub snr_theory: f64,
    pub snr_sim: f64,
    pub ratio: f64,
    pub tx_power: f64,
}

pub fn snr_sweep(base: &MisoConfig, elements: &[usize], archs: &[Architecture]) -> Vec<MisoRow> {
    let mut rows = Vec::with_capacity(elements.len() * archs.len());
    for &m in elements {
        let cfg = MisoConfig {
            elements: m,
            ..*base
        };
        for &arch in archs {
            let theory = snr_closed_form(&cfg, arch);
            let sim = snr_simulated(&cfg, arch);
            if sim.over_budget {
                log::warn!(
                    "{} at M={m} transmits {:.4} W against a {} W budget",
                    arch.name(),
                    sim.tx_power,
                    cfg.p
                );
            }
            rows.push(MisoRow {
                elements: m,
                architecture: arch.name().to_string(),
                snr_theory: theory,
                snr_sim: sim.snr,
                ratio: sim.snr / theory,
                tx_power: sim.tx_power,
            });
        }
    }
    rows
}

pub fn write_rows<W: Write>(rows: &[MisoRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{cr, CMat, CVec};
use crate::model::config::ScenarioConfig;

/// Where the RF chain feeds its microstrip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feeding {
    /// Port at the left end; the reference wave travels one way.
    #[default]
    Edge,
    /// Port at the midpoint; the wave travels outwards to both ends.
    Center,
}

/// Distance convention for edge feeding: element `m` sits `m * delta`
/// (one-based, multi-cell model) or `(m - 1) * delta` (zero-based, single
/// microstrip MISO analysis) away from the port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexOffset {
    #[default]
    OneBased,
    ZeroBased,
}

/// Coefficients `exp(-rho (alpha + j beta))` sampled along one microstrip.
pub fn microstrip_coefficients(
    elements: usize,
    delta: f64,
    alpha: f64,
    beta: f64,
    feeding: Feeding,
    offset: IndexOffset,
) -> CVec {
    let k = Complex64::new(alpha, beta);
    CVec::from_fn(elements, |i, _| {
        let m = (i + 1) as f64;
        let rho = match feeding {
            Feeding::Edge => match offset {
                IndexOffset::OneBased => m * delta,
                IndexOffset::ZeroBased => (m - 1.0) * delta,
            },
            Feeding::Center => (m - (elements as f64 + 1.0) / 2.0).abs() * delta,
        };
        (-k * rho).exp()
    })
}

/// Block-diagonal propagation matrix `T` of one BS, kept as its per-strip
/// coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideModel {
    strips: Vec<CVec>,
    elements_per_rf: usize,
}

impl WaveguideModel {
    pub fn from_strips(strips: Vec<CVec>) -> Self {
        let elements_per_rf = strips.first().map_or(0, |s| s.len());
        assert!(
            strips.iter().all(|s| s.len() == elements_per_rf),
            "all microstrips must have the same length"
        );
        Self {
            strips,
            elements_per_rf,
        }
    }

    /// `T = I_M`: one RF chain per element (fully digital array).
    pub fn identity(elements: usize) -> Self {
        Self::from_strips(vec![CVec::from_element(1, cr(1.0)); elements])
    }

    /// All-ones strips, the sub-connected hybrid array.
    pub fn ones(rf_chains: usize, elements_per_rf: usize) -> Self {
        Self::from_strips(vec![
            CVec::from_element(elements_per_rf, cr(1.0));
            rf_chains
        ])
    }

    pub fn rf_chains(&self) -> usize {
        self.strips.len()
    }

    pub fn elements_per_rf(&self) -> usize {
        self.elements_per_rf
    }

    pub fn elements(&self) -> usize {
        self.strips.len() * self.elements_per_rf
    }

    pub fn strip(&self, rf: usize) -> &CVec {
        &self.strips[rf]
    }

    /// Column `rf` of `T` as a full length-`M` vector.
    pub fn column(&self, rf: usize) -> CVec {
        let mut col = CVec::zeros(self.elements());
        col.rows_mut(rf * self.elements_per_rf, self.elements_per_rf)
            .copy_from(&self.strips[rf]);
        col
    }

    pub fn matrix(&self) -> CMat {
        let mut t = CMat::zeros(self.elements(), self.rf_chains());
        for (rf, s) in self.strips.iter().enumerate() {
            t.view_mut((rf * self.elements_per_rf, rf), (self.elements_per_rf, 1))
                .copy_from(s);
        }
        t
    }

    /// `diag(q) T` without forming `diag(q)`.
    pub fn apply_response(&self, q: &CVec) -> CMat {
        let mut t = self.matrix();
        for (r, mut row) in t.row_iter_mut().enumerate() {
            row *= q[r];
        }
        t
    }
}

pub fn build_waveguide(cfg: &ScenarioConfig, _bs: usize) -> WaveguideModel {
    build_waveguide_with(cfg, cfg.feeding, IndexOffset::OneBased)
}

pub fn build_waveguide_with(
    cfg: &ScenarioConfig,
    feeding: Feeding,
    offset: IndexOffset,
) -> WaveguideModel {
    let strip = microstrip_coefficients(
        cfg.elements_per_rf,
        cfg.delta_x,
        cfg.alpha,
        cfg.beta,
        feeding,
        offset,
    );
    WaveguideModel::from_strips(vec![strip; cfg.rf_chains])
}

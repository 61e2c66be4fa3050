use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::element::Element;

/// Static imperfections of the apparatus.
///
/// Angle and phase errors are Gaussian and redrawn for every trial; the
/// splitter ratio error is a fixed offset on every non-polarizing splitter.
/// Missing keys take their ideal values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImperfectionConfig {
    /// Standard deviation of every wave-plate fast-axis angle, radians.
    pub waveplate_angle_sigma: f64,
    /// Standard deviation of every interferometer phase, radians.
    pub mzi_phase_sigma: f64,
    /// Offset added to the power reflectivity of every 50:50 splitter.
    pub bs_ratio_delta: f64,
    /// Probability that a photon reaching a gated detector is registered.
    pub detector_efficiency: f64,
    /// Probability of a dark click per detector per gate.
    pub dark_click_prob: f64,
}

impl Default for ImperfectionConfig {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ImperfectionConfig {
    /// No errors, unit efficiency, no dark clicks.
    pub const fn ideal() -> Self {
        Self {
            waveplate_angle_sigma: 0.0,
            mzi_phase_sigma: 0.0,
            bs_ratio_delta: 0.0,
            detector_efficiency: 1.0,
            dark_click_prob: 0.0,
        }
    }

    /// An illustrative setting whose success fractions sit above both
    /// single-qubit thresholds with some margin. Not fitted to any data.
    pub const fn demonstration() -> Self {
        Self {
            waveplate_angle_sigma: 0.03,
            mzi_phase_sigma: 0.25,
            bs_ratio_delta: 0.03,
            detector_efficiency: 0.6,
            dark_click_prob: 2e-3,
        }
    }

    pub fn is_ideal(&self) -> bool {
        *self == Self::ideal()
    }

    /// True when every trial sees the same optics.
    pub fn is_static(&self) -> bool {
        self.waveplate_angle_sigma == 0.0 && self.mzi_phase_sigma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidConfig(format!("{what} = {v}")));
        for (name, v) in [
            ("waveplate_angle_sigma", self.waveplate_angle_sigma),
            ("mzi_phase_sigma", self.mzi_phase_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(name, v);
            }
        }
        if !(self.bs_ratio_delta.is_finite() && self.bs_ratio_delta.abs() <= 0.5) {
            return bad("bs_ratio_delta", self.bs_ratio_delta);
        }
        for (name, v) in [
            ("detector_efficiency", self.detector_efficiency),
            ("dark_click_prob", self.dark_click_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(name, v);
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// One trial's random offsets, one per element, drawn in element order.
    pub fn draw<R: Rng + ?Sized>(&self, elements: &[Element], rng: &mut R) -> Perturbation {
        let wp = Normal::new(0.0, self.waveplate_angle_sigma).ok();
        let ph = Normal::new(0.0, self.mzi_phase_sigma).ok();
        let offsets = elements
            .iter()
            .map(|e| {
                let dist = if e.kind.is_wave_plate() && self.waveplate_angle_sigma > 0.0 {
                    wp
                } else if e.kind.is_phase() && self.mzi_phase_sigma > 0.0 {
                    ph
                } else {
                    None
                };
                dist.map_or(0.0, |d| d.sample(rng))
            })
            .collect();
        Perturbation { offsets }
    }
}

/// Per-element angle or phase offsets for one trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub offsets: Vec<f64>,
}

impl Perturbation {
    pub fn none(len: usize) -> Self {
        Self {
            offsets: vec![0.0; len],
        }
    }

    pub fn offset(&self, index: usize) -> f64 {
        self.offsets.get(index).copied().unwrap_or(0.0)
    }
}

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Amplitude, ModeBasis, ModeLabel, Pol, StateVector, ZERO};

use super::element::{unitarity_defect, Element};
use super::imperfection::{ImperfectionConfig, Perturbation};

/// Tolerance for the per-element unitarity check.
pub const UNITARITY_TOL: f64 = 1e-12;

/// A single-photon mode: spatial path, arrival bin (in detours) and
/// polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OpticalMode {
    pub path: &'static str,
    pub timebin: u32,
    pub pol: Pol,
}

impl OpticalMode {
    pub const fn new(path: &'static str, timebin: u32, pol: Pol) -> Self {
        Self { path, timebin, pol }
    }

    pub fn label(&self) -> ModeLabel {
        ModeLabel::optical(self.path, self.timebin, self.pol)
    }
}

impl fmt::Display for OpticalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, t{}, {})", self.path, self.timebin, self.pol)
    }
}

/// Sparse single-photon state over optical modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpticalState {
    amps: BTreeMap<OpticalMode, Amplitude>,
}

impl OpticalState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn single(mode: OpticalMode) -> Self {
        let mut s = Self::default();
        s.add(mode, Complex64::new(1.0, 0.0));
        s
    }

    /// Places a time-bin ⊗ polarization state on `path`, early in bin 0 and
    /// late in bin 1.
    pub fn from_timebin_state(state: &StateVector, path: &'static str) -> Result<Self> {
        if state.basis() != &ModeBasis::timebin_polarization() {
            return Err(Error::BasisMismatch(
                "expected a time-bin ⊗ polarization state".into(),
            ));
        }
        let mut s = Self::default();
        for (label, a) in state.basis().labels().iter().zip(state.amplitudes()) {
            let (bin, pol) = (label.timebin.expect("bin"), label.pol.expect("pol"));
            s.add(OpticalMode::new(path, bin, pol), *a);
        }
        Ok(s)
    }

    /// Reads bins `offset` and `offset + 1` of `path` back as an (E, L) state.
    /// Not normalized.
    pub fn to_timebin_state(&self, path: &'static str, offset: u32) -> StateVector {
        let basis = ModeBasis::timebin_polarization();
        let amps = basis
            .labels()
            .iter()
            .map(|l| {
                let bin = l.timebin.expect("bin") + offset;
                self.get(&OpticalMode::new(path, bin, l.pol.expect("pol")))
            })
            .collect();
        StateVector::new(basis, amps).expect("4 amplitudes")
    }

    pub fn get(&self, mode: &OpticalMode) -> Amplitude {
        self.amps.get(mode).copied().unwrap_or(ZERO)
    }

    pub fn add(&mut self, mode: OpticalMode, a: Amplitude) {
        *self.amps.entry(mode).or_insert(ZERO) += a;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OpticalMode, &Amplitude)> {
        self.amps.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// Probability mass on `path`, all bins.
    pub fn path_probability(&self, path: &str) -> f64 {
        self.amps
            .iter()
            .filter(|(m, _)| m.path == path)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Dense form over the modes present.
    pub fn to_state_vector(&self) -> Result<StateVector> {
        let labels = self.amps.keys().map(|m| m.label()).collect();
        StateVector::new(ModeBasis::new(labels)?, self.amps.values().copied().collect())
    }
}

/// A gated single-photon detector terminating a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detector {
    pub path: &'static str,
    pub gate_bin: u32,
}

/// Ordered element list with detectors on terminal paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpticalNetwork {
    pub elements: Vec<Element>,
    pub detectors: Vec<Detector>,
}

impl OpticalNetwork {
    pub fn new(elements: Vec<Element>) -> Self {
        Self {
            elements,
            detectors: Vec::new(),
        }
    }

    /// `self` followed by `next`; detectors of both are kept.
    pub fn then(mut self, next: OpticalNetwork) -> Self {
        self.elements.extend(next.elements);
        self.detectors.extend(next.detectors);
        self
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Checks wiring and that every element's perturbed local map is unitary.
    pub fn check(&self, cfg: &ImperfectionConfig, draws: &Perturbation) -> Result<()> {
        for (index, e) in self.elements.iter().enumerate() {
            let ports = e.kind.ports();
            if e.inputs.len() != ports || e.outputs.len() != ports {
                return Err(Error::InvalidArgument(format!(
                    "element #{index} ({}) needs {ports} input and output paths",
                    e.kind.name()
                )));
            }
            let m = e.kind.local_matrix(draws.offset(index), cfg.bs_ratio_delta);
            if m.len() != 2 * ports {
                return Err(Error::NonUnitary {
                    index,
                    kind: e.kind.name().into(),
                    deviation: f64::INFINITY,
                });
            }
            let deviation = unitarity_defect(&m);
            if deviation > UNITARITY_TOL {
                return Err(Error::NonUnitary {
                    index,
                    kind: e.kind.name().into(),
                    deviation,
                });
            }
        }
        Ok(())
    }

    /// Propagates amplitudes through every element, without detection.
    pub fn evolve(
        &self,
        input: &OpticalState,
        cfg: &ImperfectionConfig,
        draws: &Perturbation,
    ) -> Result<OpticalState> {
        self.check(cfg, draws)?;
        let mut state = input.clone();
        for (index, e) in self.elements.iter().enumerate() {
            state = apply_element(e, &state, draws.offset(index), cfg.bs_ratio_delta);
        }
        Ok(state)
    }

    /// Full propagation followed by gated detection with efficiency and dark
    /// clicks.
    pub fn propagate(
        &self,
        input: &OpticalState,
        cfg: &ImperfectionConfig,
        draws: &Perturbation,
    ) -> Result<DetectionDistribution> {
        let norm = input.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 && norm != 0.0 {
            return Err(Error::NotNormalized(norm));
        }
        let out = self.evolve(input, cfg, draws)?;
        Ok(DetectionDistribution::from_output(&out, &self.detectors, cfg))
    }
}

fn apply_element(e: &Element, state: &OpticalState, offset: f64, bs_delta: f64) -> OpticalState {
    let m = e.kind.local_matrix(offset, bs_delta);
    let shift = u32::from(matches!(e.kind, super::element::ElementKind::Delay));
    let mut out = OpticalState::default();
    // input vectors per time bin, indexed 2·port + pol
    let mut by_bin: BTreeMap<u32, Vec<Amplitude>> = BTreeMap::new();
    for (mode, a) in state.iter() {
        match e.inputs.iter().position(|p| *p == mode.path) {
            Some(port) => {
                let v = by_bin
                    .entry(mode.timebin)
                    .or_insert_with(|| vec![ZERO; m.len()]);
                v[2 * port + mode.pol.index()] += *a;
            }
            None => out.add(*mode, *a),
        }
    }
    for (bin, v) in by_bin {
        for (row_idx, row) in m.iter().enumerate() {
            let a: Amplitude = row.iter().zip(&v).map(|(x, y)| x * y).sum();
            if a != ZERO {
                let pol = Pol::BOTH[row_idx % 2];
                out.add(OpticalMode::new(e.outputs[row_idx / 2], bin + shift, pol), a);
            }
        }
    }
    out
}

/// Where one photon ends up, and what the detectors report.
///
/// `photon_*` fields describe the photon alone. `clicks` and the `silent_*`
/// fields describe what is registered once efficiency and dark clicks are
/// applied; together they sum to 1. When a real click and dark clicks
/// coincide the real click is reported; several dark clicks resolve to the
/// lowest detector index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionDistribution {
    /// Photon arrives at detector `k` inside its gate.
    pub photon_in_gate: Vec<f64>,
    /// Photon reaches a detector outside the gate window.
    pub photon_out_of_gate: f64,
    /// Photon leaves through a path without a detector.
    pub photon_lost: f64,
    /// Probability that detector `k` is the one reported.
    pub clicks: Vec<f64>,
    /// The part of `clicks` caused by the photon itself.
    pub real_clicks: Vec<f64>,
    /// No click; the photon was at a detector outside the gate.
    pub silent_out_of_gate: f64,
    /// No click; the photon was lost or missed by an inefficient detector.
    pub silent_undetected: f64,
}

impl DetectionDistribution {
    fn from_output(out: &OpticalState, detectors: &[Detector], cfg: &ImperfectionConfig) -> Self {
        let mut in_gate = vec![0.0; detectors.len()];
        let mut out_of_gate = 0.0;
        let mut lost = 0.0;
        for (mode, a) in out.iter() {
            let p = a.norm_sqr();
            match detectors.iter().position(|d| d.path == mode.path) {
                Some(k) if detectors[k].gate_bin == mode.timebin => in_gate[k] += p,
                Some(_) => out_of_gate += p,
                None => lost += p,
            }
        }
        Self::with_detection(in_gate, out_of_gate, lost, cfg)
    }

    fn with_detection(
        in_gate: Vec<f64>,
        out_of_gate: f64,
        lost: f64,
        cfg: &ImperfectionConfig,
    ) -> Self {
        let eta = cfg.detector_efficiency;
        let d = cfg.dark_click_prob;
        let real: f64 = in_gate.iter().sum::<f64>() * eta;
        let missed = in_gate.iter().sum::<f64>() * (1.0 - eta);
        // no real click: the photon was missed, out of gate, lost or absent
        let no_real = 1.0 - real;
        let mut clicks = Vec::with_capacity(in_gate.len());
        let mut quiet = 1.0;
        for p in &in_gate {
            clicks.push(eta * p + no_real * d * quiet);
            quiet *= 1.0 - d;
        }
        let vacuum = (1.0 - in_gate.iter().sum::<f64>() - out_of_gate - lost).max(0.0);
        let real_clicks = in_gate.iter().map(|p| eta * p).collect();
        Self {
            real_clicks,
            photon_in_gate: in_gate,
            photon_out_of_gate: out_of_gate,
            photon_lost: lost,
            clicks,
            silent_out_of_gate: out_of_gate * quiet,
            silent_undetected: (lost + missed + vacuum) * quiet,
        }
    }

    /// Sum of every reported category; 1 up to rounding.
    pub fn total(&self) -> f64 {
        self.clicks.iter().sum::<f64>() + self.silent_out_of_gate + self.silent_undetected
    }

    pub fn click_probability(&self) -> f64 {
        self.clicks.iter().sum()
    }

    pub fn photon_total(&self) -> f64 {
        self.photon_in_gate.iter().sum::<f64>() + self.photon_out_of_gate + self.photon_lost
    }

    /// Click distribution given that some detector fired.
    pub fn conditional(&self) -> Option<Vec<f64>> {
        let t = self.click_probability();
        (t > 0.0).then(|| self.clicks.iter().map(|c| c / t).collect())
    }

    /// Photon arrival distribution over detectors given in-gate arrival.
    pub fn conditional_photon(&self) -> Option<Vec<f64>> {
        let t: f64 = self.photon_in_gate.iter().sum();
        (t > 0.0).then(|| self.photon_in_gate.iter().map(|c| c / t).collect())
    }

    /// Picks an outcome from a uniform `u ∈ [0, 1)`. Photon clicks are laid
    /// out before dark clicks, each in detector order.
    pub fn sample(&self, u: f64) -> Option<Click> {
        let mut acc = 0.0;
        for (detector, p) in self.real_clicks.iter().enumerate() {
            acc += p;
            if u < acc {
                return Some(Click { detector, dark: false });
            }
        }
        for (detector, (c, r)) in self.clicks.iter().zip(&self.real_clicks).enumerate() {
            acc += c - r;
            if u < acc {
                return Some(Click { detector, dark: true });
            }
        }
        None
    }
}

/// A reported detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Click {
    pub detector: usize,
    /// Caused by a dark count rather than the photon.
    pub dark: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::element::ElementKind;

    fn mode(p: &'static str, b: u32, pol: Pol) -> OpticalMode {
        OpticalMode::new(p, b, pol)
    }

    #[test]
    fn pbs_routes_h_and_v() {
        let net = OpticalNetwork::new(vec![Element::pbs(["a", "b"], ["t", "r"])]);
        let cfg = ImperfectionConfig::ideal();
        let none = Perturbation::none(1);
        let h = net
            .evolve(&OpticalState::single(mode("a", 0, Pol::H)), &cfg, &none)
            .unwrap();
        assert!((h.get(&mode("t", 0, Pol::H)).norm() - 1.0).abs() < 1e-15);
        let v = net
            .evolve(&OpticalState::single(mode("a", 0, Pol::V)), &cfg, &none)
            .unwrap();
        assert!((v.get(&mode("r", 0, Pol::V)).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn delay_shifts_bin_and_mirror_renames() {
        let net = OpticalNetwork::new(vec![Element::delay("a"), Element::mirror("a", "b")]);
        let out = net
            .evolve(
                &OpticalState::single(mode("a", 0, Pol::V)),
                &ImperfectionConfig::ideal(),
                &Perturbation::none(2),
            )
            .unwrap();
        assert!((out.get(&mode("b", 1, Pol::V)).norm() - 1.0).abs() < 1e-15);
        assert_eq!(out.iter().count(), 1);
    }

    #[test]
    fn non_unitary_element_is_rejected() {
        let net = OpticalNetwork::new(vec![
            Element::delay("a"),
            Element::on(
                ElementKind::Matrix {
                    rows: vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [0.5, 0.0]]],
                },
                "a",
            ),
        ]);
        let err = net
            .propagate(
                &OpticalState::single(mode("a", 0, Pol::H)),
                &ImperfectionConfig::ideal(),
                &Perturbation::none(2),
            )
            .unwrap_err();
        assert!(matches!(err, Error::NonUnitary { index: 1, .. }));
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let net = OpticalNetwork::new(vec![Element::delay("a")]);
        let mut s = OpticalState::single(mode("a", 0, Pol::H));
        s.add(mode("a", 0, Pol::V), Complex64::new(1.0, 0.0));
        assert!(matches!(
            net.propagate(&s, &ImperfectionConfig::ideal(), &Perturbation::none(1)),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn vacuum_gives_only_dark_clicks() {
        let mut net = OpticalNetwork::new(vec![Element::delay("a")]);
        net.detectors = vec![
            Detector { path: "a", gate_bin: 1 },
            Detector { path: "b", gate_bin: 1 },
        ];
        let mut cfg = ImperfectionConfig::ideal();
        let d = net
            .propagate(&OpticalState::vacuum(), &cfg, &Perturbation::none(1))
            .unwrap();
        assert_eq!(d.clicks, vec![0.0, 0.0]);
        assert!((d.total() - 1.0).abs() < 1e-15);
        cfg.dark_click_prob = 0.1;
        let d = net
            .propagate(&OpticalState::vacuum(), &cfg, &Perturbation::none(1))
            .unwrap();
        assert!((d.clicks[0] - 0.1).abs() < 1e-15);
        assert!((d.clicks[1] - 0.09).abs() < 1e-15);
        assert!((d.total() - 1.0).abs() < 1e-15);
        assert_eq!(d.sample(0.05), Some(Click { detector: 0, dark: true }));
        assert_eq!(d.sample(0.15), Some(Click { detector: 1, dark: true }));
        assert_eq!(d.sample(0.5), None);
    }

    #[test]
    fn gate_rejects_wrong_bin() {
        let mut net = OpticalNetwork::new(vec![Element::delay("a")]);
        net.detectors = vec![Detector { path: "a", gate_bin: 0 }];
        let d = net
            .propagate(
                &OpticalState::single(mode("a", 0, Pol::H)),
                &ImperfectionConfig::ideal(),
                &Perturbation::none(1),
            )
            .unwrap();
        assert_eq!(d.clicks, vec![0.0]);
        assert!((d.silent_out_of_gate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn timebin_round_trip() {
        let st = crate::protocol::init_state();
        let o = OpticalState::from_timebin_state(&st, "x").unwrap();
        let back = o.to_timebin_state("x", 0);
        assert_eq!(back, st);
        assert!((o.path_probability("x") - 1.0).abs() < 1e-15);
    }
}

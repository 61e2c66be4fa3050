//! The three stages of the apparatus as element lists.
//!
//! Stage 1 turns an `h` photon into the time-bin/polarization entangled
//! state with a HWP and an unbalanced polarizing interferometer. Stage 2 is
//! Bob's station. Stage 3 converts the E/L arrival times into two paths with
//! a 50:50 splitter and a matching detour, then analyzes path and
//! polarization jointly with two interferometers and four gated detectors.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{Pol, StateVector};
use crate::protocol::{BobChoice, ProjectionLabel, UnitaryLabel, VaaOutcome, VaaVariant};

use super::element::{deg, Element, ElementKind, Retarder};
use super::imperfection::{ImperfectionConfig, Perturbation};
use super::network::{DetectionDistribution, Detector, OpticalMode, OpticalNetwork, OpticalState};

pub const SOURCE: &str = "source";
/// Stage 1 output, entering Bob's station.
pub const TO_BOB: &str = "to_bob";
/// Bob's output, entering Alice's analyzer.
pub const TO_ALICE: &str = "to_alice";
/// Where Bob's PBS sends the rejected polarization.
pub const BOB_REJECT: &str = "bob_reject";
pub const DETECTORS: [&str; 4] = ["det0", "det1", "det2", "det3"];

/// Gate window of the analyzer detectors, in detours after the early bin.
pub const GATE_BIN: u32 = 1;

/// Connecting-loop phase of the analyzer, first basis.
pub const CONNECTING_PHASE_FIRST: f64 = PI / 2.0;
/// Polarizing-interferometer phase of the analyzer, first basis.
pub const POLARIZING_PHASE_FIRST: f64 = 3.0 * PI / 4.0;

/// `(connecting loop, polarizing interferometer)` phases. The second basis
/// adds π to the first and π/2 to the second.
pub fn analyzer_phases(variant: VaaVariant) -> (f64, f64) {
    match variant {
        VaaVariant::First => (CONNECTING_PHASE_FIRST, POLARIZING_PHASE_FIRST),
        VaaVariant::Second => (CONNECTING_PHASE_FIRST + PI, POLARIZING_PHASE_FIRST + PI / 2.0),
    }
}

/// Which VAA outcome each detector announces.
pub fn detector_outcomes(variant: VaaVariant) -> [VaaOutcome; 4] {
    let o = |s: &str| s.parse::<VaaOutcome>().expect("valid outcome");
    match variant {
        VaaVariant::First => [o("+rh"), o("-lh"), o("-rv"), o("+lv")],
        VaaVariant::Second => [o("+lh"), o("-rh"), o("-lv"), o("+rv")],
    }
}

/// The input photon: `h`, early, at the source.
pub fn source_state() -> OpticalState {
    OpticalState::single(OpticalMode::new(SOURCE, 0, Pol::H))
}

pub fn build_stage1() -> OpticalNetwork {
    OpticalNetwork::new(vec![
        Element::hwp(SOURCE, deg(22.5)),
        Element::pbs([SOURCE, "s1_vac"], ["s1_short", "s1_long"]),
        Element::mirror("s1_long", "s1_long_a"),
        Element::delay("s1_long_a"),
        // interferometer phase, nominally zero
        Element::phase("s1_long_a", 0.0),
        Element::mirror("s1_long_a", "s1_long_b"),
        Element::pbs(["s1_short", "s1_long_b"], [TO_BOB, "s1_dump"]),
    ])
}

/// Wave plates (applied in order) that turn `|ℓ⟩` into `|h⟩` up to phase.
pub fn projection_plates(label: ProjectionLabel) -> Vec<(Retarder, f64)> {
    use ProjectionLabel::*;
    use Retarder::*;
    match label {
        H => vec![],
        V => vec![(Hwp, deg(45.0))],
        Plus => vec![(Hwp, deg(22.5))],
        Minus => vec![(Hwp, deg(-22.5))],
        R => vec![(Qwp, deg(45.0))],
        L => vec![(Qwp, deg(-45.0))],
    }
}

/// Wave plates (applied in order) realizing `(σa ± σb)/√2` up to phase.
pub fn unitary_plates(label: UnitaryLabel) -> Vec<(Retarder, f64)> {
    use Retarder::*;
    use UnitaryLabel::*;
    match label {
        XPlusY => vec![(Hwp, deg(-45.0)), (Qwp, 0.0)],
        XMinusY => vec![(Hwp, deg(-45.0)), (Qwp, deg(90.0))],
        YPlusZ => vec![(Hwp, 0.0), (Qwp, deg(-45.0))],
        YMinusZ => vec![(Hwp, 0.0), (Qwp, deg(45.0))],
        ZPlusX => vec![(Hwp, deg(22.5))],
        ZMinusX => vec![(Hwp, deg(-22.5))],
    }
}

fn plate(path: &'static str, (kind, angle): (Retarder, f64)) -> Element {
    let kind = match kind {
        Retarder::Hwp => ElementKind::Hwp { angle },
        Retarder::Qwp => ElementKind::Qwp { angle },
    };
    Element::on(kind, path)
}

/// Bob's projection: rotate `ℓ` to `h`, keep `h` at a PBS, rotate back.
pub fn build_stage2(label: ProjectionLabel) -> OpticalNetwork {
    let pre = projection_plates(label);
    let mut els: Vec<Element> = pre.iter().map(|&p| plate(TO_BOB, p)).collect();
    els.push(Element::pbs([TO_BOB, "s2_vac"], [TO_ALICE, BOB_REJECT]));
    els.extend(
        pre.iter()
            .rev()
            .map(|&(k, a)| plate(TO_ALICE, (k, a + deg(90.0)))),
    );
    OpticalNetwork::new(els)
}

/// Bob's Second Challenge unitary: wave plates only.
pub fn build_stage2_unitary(label: UnitaryLabel) -> OpticalNetwork {
    let mut els: Vec<Element> = unitary_plates(label)
        .into_iter()
        .map(|p| plate(TO_BOB, p))
        .collect();
    els.push(Element::mirror(TO_BOB, TO_ALICE));
    OpticalNetwork::new(els)
}

pub fn build_bob(choice: BobChoice) -> OpticalNetwork {
    match choice {
        BobChoice::Project(l) => build_stage2(l),
        BobChoice::Apply(u) => build_stage2_unitary(u),
    }
}

/// Alice's VAA analyzer, input on [`TO_ALICE`].
pub fn build_stage3(variant: VaaVariant) -> OpticalNetwork {
    let (connecting, polarizing) = analyzer_phases(variant);
    let mut net = OpticalNetwork::new(vec![
        // E/L → D/R conversion
        Element::bs([TO_ALICE, "s3_vac"], ["s3_r", "s3_d"]),
        Element::mirror("s3_d", "s3_d_a"),
        Element::delay("s3_d_a"),
        Element::mirror("s3_d_a", "s3_d_b"),
        Element::phase("s3_r", connecting),
        // polarizing interferometer
        Element::pbs(["s3_d_b", "s3_r"], ["s3_a", "s3_b"]),
        Element::qwp("s3_b", deg(-45.0)),
        Element::phase("s3_b", polarizing),
        Element::pbs(["s3_a", "s3_b"], ["s3_o1", "s3_o2"]),
        // polarization analysis
        Element::hwp("s3_o1", deg(-22.5)),
        Element::hwp("s3_o2", deg(22.5)),
        Element::pbs(["s3_o1", "s3_vac1"], [DETECTORS[0], DETECTORS[1]]),
        Element::pbs(["s3_o2", "s3_vac2"], [DETECTORS[2], DETECTORS[3]]),
    ]);
    net.detectors = DETECTORS
        .iter()
        .map(|&path| Detector {
            path,
            gate_bin: GATE_BIN,
        })
        .collect();
    net
}

/// The complete three-stage apparatus for one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pipeline {
    pub choice: BobChoice,
    pub variant: VaaVariant,
    pub network: OpticalNetwork,
}

impl Pipeline {
    pub fn new(choice: BobChoice, variant: VaaVariant) -> Self {
        let network = build_stage1()
            .then(build_bob(choice))
            .then(build_stage3(variant));
        Self {
            choice,
            variant,
            network,
        }
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, cfg: &ImperfectionConfig, rng: &mut R) -> Perturbation {
        cfg.draw(&self.network.elements, rng)
    }

    /// Detection statistics for one photon from the source.
    pub fn propagate(
        &self,
        cfg: &ImperfectionConfig,
        draws: &Perturbation,
    ) -> Result<DetectionDistribution> {
        self.network.propagate(&source_state(), cfg, draws)
    }

    pub fn ideal(&self) -> Result<DetectionDistribution> {
        let cfg = ImperfectionConfig::ideal();
        self.propagate(&cfg, &Perturbation::none(self.network.len()))
    }

    pub fn outcome_of(&self, detector: usize) -> VaaOutcome {
        detector_outcomes(self.variant)[detector]
    }
}

/// Runs a time-bin/polarization state straight into the analyzer.
pub fn analyze(
    state: &StateVector,
    variant: VaaVariant,
    cfg: &ImperfectionConfig,
    draws: &Perturbation,
) -> Result<DetectionDistribution> {
    let input = OpticalState::from_timebin_state(state, TO_ALICE)?;
    build_stage3(variant).propagate(&input, cfg, draws)
}

/// Averages the ideal-detector distribution over fully random interferometer
/// phases.
///
/// Each phase enters the amplitudes linearly through `e^{iφ}`, so the photon
/// probabilities are trigonometric polynomials of degree one per phase and an
/// 8-point uniform grid per phase gives the exact average.
pub fn dephased_distribution(pipeline: &Pipeline) -> Result<DetectionDistribution> {
    const STEPS: usize = 8;
    let phase_idx: Vec<usize> = pipeline
        .network
        .elements
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind.is_phase())
        .map(|(i, _)| i)
        .collect();
    let cfg = ImperfectionConfig::ideal();
    let n = pipeline.network.len();
    let combos = STEPS.pow(phase_idx.len() as u32);
    let mut acc: Option<DetectionDistribution> = None;
    for c in 0..combos {
        let mut draws = Perturbation::none(n);
        let mut rest = c;
        for &i in &phase_idx {
            draws.offsets[i] = 2.0 * PI * (rest % STEPS) as f64 / STEPS as f64;
            rest /= STEPS;
        }
        let d = pipeline.propagate(&cfg, &draws)?;
        acc = Some(match acc {
            None => d,
            Some(mut a) => {
                add_into(&mut a, &d);
                a
            }
        });
    }
    let mut a = acc.expect("at least one combination");
    scale(&mut a, 1.0 / combos as f64);
    Ok(a)
}

fn add_into(a: &mut DetectionDistribution, b: &DetectionDistribution) {
    for (x, y) in a.photon_in_gate.iter_mut().zip(&b.photon_in_gate) {
        *x += y;
    }
    for (x, y) in a.clicks.iter_mut().zip(&b.clicks) {
        *x += y;
    }
    for (x, y) in a.real_clicks.iter_mut().zip(&b.real_clicks) {
        *x += y;
    }
    a.photon_out_of_gate += b.photon_out_of_gate;
    a.photon_lost += b.photon_lost;
    a.silent_out_of_gate += b.silent_out_of_gate;
    a.silent_undetected += b.silent_undetected;
}

fn scale(a: &mut DetectionDistribution, s: f64) {
    a.photon_in_gate.iter_mut().for_each(|x| *x *= s);
    a.clicks.iter_mut().for_each(|x| *x *= s);
    a.real_clicks.iter_mut().for_each(|x| *x *= s);
    a.photon_out_of_gate *= s;
    a.photon_lost *= s;
    a.silent_out_of_gate *= s;
    a.silent_undetected *= s;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{apply, fidelity, inner, Operator};
    use crate::optics::element::jones;
    use crate::protocol::{
        challenge_post_state, init_state, measure_in_basis, projected_state, vaa_basis, Game,
    };

    fn ideal() -> ImperfectionConfig {
        ImperfectionConfig::ideal()
    }

    fn stage1_output(draws: &Perturbation) -> StateVector {
        build_stage1()
            .evolve(&source_state(), &ideal(), draws)
            .unwrap()
            .to_timebin_state(TO_BOB, 0)
    }

    #[test]
    fn stage1_prepares_init() {
        let out = stage1_output(&Perturbation::none(build_stage1().len()));
        assert!((fidelity(&out, &init_state()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stage1_angle_error_fidelity() {
        for eps in [0.01, 0.05, 0.2] {
            let mut d = Perturbation::none(build_stage1().len());
            d.offsets[0] = eps;
            let f = fidelity(&stage1_output(&d), &init_state()).unwrap();
            assert!((f - (2.0 * eps).cos().powi(2)).abs() < 1e-12, "{eps}");
        }
    }

    #[test]
    fn stage2_matches_projection() {
        let input = OpticalState::from_timebin_state(&init_state(), TO_BOB).unwrap();
        for l in ProjectionLabel::ALL {
            let net = build_stage2(l);
            let out = net
                .evolve(&input, &ideal(), &Perturbation::none(net.len()))
                .unwrap();
            let st = out.to_timebin_state(TO_ALICE, 0);
            assert!((st.norm_sqr() - 0.5).abs() < 1e-12, "{l}");
            let st = st.normalized().unwrap();
            assert!((fidelity(&st, &projected_state(l)).unwrap() - 1.0).abs() < 1e-12);
            assert!((out.path_probability(BOB_REJECT) - 0.5).abs() < 1e-12);
        }
        // v projection on |E,h⟩ passes nothing
        let eh = projected_state(ProjectionLabel::H);
        let net = build_stage2(ProjectionLabel::V);
        let out = net
            .evolve(
                &OpticalState::from_timebin_state(&eh, TO_BOB).unwrap(),
                &ideal(),
                &Perturbation::none(net.len()),
            )
            .unwrap();
        assert!(out.path_probability(TO_ALICE) < 1e-24);
    }

    #[test]
    fn projection_plates_rotate_target_to_h() {
        for l in ProjectionLabel::ALL {
            let mut s = l.ket();
            for (k, a) in projection_plates(l) {
                s = apply(&jones(k, a), &s).unwrap();
            }
            assert!((inner(&ProjectionLabel::H.ket(), &s).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_plates_match_operators() {
        for u in UnitaryLabel::ALL {
            let mut op = Operator::identity(crate::linalg::ModeBasis::polarization());
            for (k, a) in unitary_plates(u) {
                op = jones(k, a).compose(&op).unwrap();
            }
            let target = u.polarization_operator();
            // equal up to a global phase
            let (mut i0, mut best) = (0, 0.0);
            for i in 0..4 {
                let m = target.get(i / 2, i % 2).norm();
                if m > best {
                    (i0, best) = (i, m);
                }
            }
            let phase = op.get(i0 / 2, i0 % 2) / target.get(i0 / 2, i0 % 2);
            assert!((phase.norm() - 1.0).abs() < 1e-12, "{u}");
            assert!(op.max_abs_diff(&target.scale(phase)).unwrap() < 1e-12, "{u}");
        }
    }

    #[test]
    fn stage2_unitary_matches_post_states() {
        let input = OpticalState::from_timebin_state(&init_state(), TO_BOB).unwrap();
        for u in UnitaryLabel::ALL {
            let net = build_stage2_unitary(u);
            let out = net
                .evolve(&input, &ideal(), &Perturbation::none(net.len()))
                .unwrap();
            let st = out.to_timebin_state(TO_ALICE, 0);
            assert!((fidelity(&st, &challenge_post_state(u)).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn analyzer_routes_each_vaa_state_to_one_detector() {
        for variant in VaaVariant::BOTH {
            let basis = vaa_basis(variant);
            let routing = detector_outcomes(variant);
            for (o, s) in basis.outcomes.iter().zip(&basis.states) {
                let n = build_stage3(variant).len();
                let d = analyze(s, variant, &ideal(), &Perturbation::none(n)).unwrap();
                let k = routing.iter().position(|r| r == o).unwrap();
                assert!((d.photon_in_gate[k] - 0.5).abs() < 1e-12, "{variant} {o}");
                assert!((d.photon_in_gate.iter().sum::<f64>() - 0.5).abs() < 1e-12);
                assert!((d.photon_out_of_gate - 0.5).abs() < 1e-12);
            }
            // the routing is a permutation of the basis outcomes
            let mut a = routing.to_vec();
            let mut b = basis.outcomes.to_vec();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pipeline_matches_measurement_oracle() {
        for variant in VaaVariant::BOTH {
            let basis = vaa_basis(variant);
            for choice in BobChoice::all(Game::Projection)
                .into_iter()
                .chain(BobChoice::all(Game::SecondChallenge))
            {
                let p = Pipeline::new(choice, variant);
                let d = p.ideal().unwrap();
                let post = match choice {
                    BobChoice::Project(l) => projected_state(l),
                    BobChoice::Apply(u) => challenge_post_state(u),
                };
                let expect = measure_in_basis(&post, &basis.states).unwrap();
                let cond = d.conditional().unwrap();
                for (k, c) in cond.iter().enumerate() {
                    let j = basis.outcomes.iter().position(|o| *o == p.outcome_of(k)).unwrap();
                    assert!((c - expect[j]).abs() < 1e-9, "{variant} {choice} det{k}");
                }
                let pass = if choice.game() == Game::Projection { 0.5 } else { 1.0 };
                assert!((d.click_probability() - 0.5 * pass).abs() < 1e-12);
                assert!((d.total() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn h_projection_conditional_distribution() {
        let p = Pipeline::new(BobChoice::Project(ProjectionLabel::H), VaaVariant::First);
        let d = p.ideal().unwrap().conditional().unwrap();
        // detectors announce +rh, −lh, −rv, +lv
        for (a, e) in d.iter().zip([0.5, 0.5, 0.0, 0.0]) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dephased_asymptote() {
        // σz eigenstates carry no E/L coherence and survive dephasing; every
        // other post-state is spread uniformly over the four detectors
        for variant in VaaVariant::BOTH {
            for choice in BobChoice::all(Game::Projection)
                .into_iter()
                .chain(BobChoice::all(Game::SecondChallenge))
            {
                let p = Pipeline::new(choice, variant);
                let d = dephased_distribution(&p).unwrap();
                assert!((d.total() - 1.0).abs() < 1e-12);
                let expect = match choice {
                    BobChoice::Project(ProjectionLabel::H) => [0.5, 0.5, 0.0, 0.0],
                    BobChoice::Project(ProjectionLabel::V) => [0.0, 0.0, 0.5, 0.5],
                    _ => [0.25; 4],
                };
                for (a, e) in d.conditional().unwrap().iter().zip(expect) {
                    assert!((a - e).abs() < 1e-12, "{variant} {choice}");
                }
            }
        }
    }
}

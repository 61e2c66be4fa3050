//! Invariant checks run by `meanking verify`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use crate::error::Result;
use crate::golden;
use crate::linalg::{fidelity, inner, sigma_x, sigma_y, sigma_z, EXACT_TOL, ONE, ZERO};
use crate::optics::{ImperfectionConfig, Pipeline};
use crate::protocol::{
    challenge_post_state, challenge_table, challenge_unitary, infer_choice, init_state,
    measure_in_basis, projected_state, vaa_basis, BobChoice, ChallengeTable, Game,
    ProjectionLabel, VaaVariant, ZERO_PROBABILITY,
};
use crate::strategies::{
    evaluate_projection_game, evaluate_second_challenge, BlochDirection, SingleQubitStrategy,
    CHALLENGE_THRESHOLD, ENTANGLED_SUCCESS, PROJECTION_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// Passes when `worst ≤ tol`.
    fn within(name: &str, worst: f64, tol: f64) -> Self {
        Self::new(name, worst <= tol, format!("max deviation {worst:.3e} (tol {tol:.0e})"))
    }
}

fn all_choices() -> Vec<BobChoice> {
    let mut v = BobChoice::all(Game::Projection);
    v.extend(BobChoice::all(Game::SecondChallenge));
    v
}

fn pauli_check() -> Check {
    let mut worst = 0.0f64;
    for op in [sigma_x(), sigma_y(), sigma_z()] {
        worst = worst.max(op.unitarity_defect());
        worst = worst.max(op.adjoint().max_abs_diff(&op).unwrap_or(f64::INFINITY));
    }
    Check::within("pauli operators hermitian and unitary", worst, EXACT_TOL)
}

fn vaa_orthonormality() -> Check {
    let mut worst = 0.0f64;
    for v in VaaVariant::BOTH {
        let b = vaa_basis(v);
        for i in 0..4 {
            for j in 0..4 {
                let g = inner(&b.states[i], &b.states[j]).unwrap_or(ZERO);
                let e = if i == j { ONE } else { ZERO };
                worst = worst.max((g - e).norm());
            }
        }
    }
    Check::within("VAA bases orthonormal", worst, EXACT_TOL)
}

fn vaa_complement() -> Check {
    let mut worst = 0.0f64;
    for v in VaaVariant::BOTH {
        let b = vaa_basis(v);
        for (o, s) in b.outcomes.iter().zip(&b.states) {
            for l in o.answers() {
                let ov = inner(&projected_state(l.flipped()), s).map_or(1.0, |a| a.norm());
                worst = worst.max(ov);
            }
        }
    }
    Check::within("VAA states orthogonal to complementary projections", worst, EXACT_TOL)
}

fn uniform_overlap() -> Check {
    let worst = ProjectionLabel::ALL
        .iter()
        .map(|&l| (fidelity(&projected_state(l), &init_state()).unwrap_or(0.0) - 0.5).abs())
        .fold(0.0, f64::max);
    Check::within("|⟨'ℓ'|init⟩|² = 1/2 for all six labels", worst, EXACT_TOL)
}

fn retrodiction() -> Check {
    let mut wrong = 0;
    for v in VaaVariant::BOTH {
        let b = vaa_basis(v);
        for c in all_choices() {
            let post = match c {
                BobChoice::Project(l) => projected_state(l),
                BobChoice::Apply(u) => challenge_post_state(u),
            };
            let p = measure_in_basis(&post, &b.states).expect("orthonormal basis");
            for (o, prob) in b.outcomes.iter().zip(p) {
                if prob > ZERO_PROBABILITY && infer_choice(*o, c) != c {
                    wrong += 1;
                }
            }
        }
    }
    Check::new(
        "retrodiction exact for every choice and outcome",
        wrong == 0,
        format!("{wrong} outcome(s) with a wrong answer"),
    )
}

fn challenge_inference() -> Check {
    match ChallengeTable::build() {
        Ok(t) => Check::new(
            "challenge inference unambiguous",
            t == *challenge_table(),
            format!("{} table entries", t.entries().count()),
        ),
        Err(e) => Check::new("challenge inference unambiguous", false, e.to_string()),
    }
}

fn challenge_unitarity() -> Check {
    let worst = crate::protocol::UnitaryLabel::ALL
        .iter()
        .map(|&u| challenge_unitary(u).unitarity_defect())
        .fold(0.0, f64::max);
    Check::within("challenge unitaries unitary", worst, EXACT_TOL)
}

fn optics_unitarity() -> Check {
    let cfg = ImperfectionConfig::demonstration();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for v in VaaVariant::BOTH {
        for c in all_choices() {
            let p = Pipeline::new(c, v);
            let draws = p.draw(&cfg, &mut rng);
            if let Err(e) = p.network.check(&cfg, &draws) {
                return Check::new("optical elements unitary", false, format!("{v} {c}: {e}"));
            }
        }
    }
    Check::new("optical elements unitary", true, "all pipelines, perturbed")
}

fn oracle_equivalence() -> Check {
    let mut worst = 0.0f64;
    for v in VaaVariant::BOTH {
        let b = vaa_basis(v);
        for c in all_choices() {
            let p = Pipeline::new(c, v);
            let cond = match p.ideal().ok().and_then(|d| d.conditional()) {
                Some(c) => c,
                None => return Check::new("optics matches protocol", false, format!("{v} {c}: no clicks")),
            };
            let post = match c {
                BobChoice::Project(l) => projected_state(l),
                BobChoice::Apply(u) => challenge_post_state(u),
            };
            let expect = measure_in_basis(&post, &b.states).expect("orthonormal basis");
            for (k, x) in cond.iter().enumerate() {
                let j = b
                    .outcomes
                    .iter()
                    .position(|o| *o == p.outcome_of(k))
                    .expect("routing is a permutation");
                worst = worst.max((x - expect[j]).abs());
            }
        }
    }
    Check::within("ideal optics matches protocol measurement", worst, 1e-9)
}

/// Total probability over a seeded random sweep of imperfection configs.
pub fn conservation_sweep(points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let choices = all_choices();
    let mut worst = 0.0f64;
    for i in 0..points {
        let cfg = ImperfectionConfig {
            waveplate_angle_sigma: 0.5 * unit.sample(&mut rng),
            mzi_phase_sigma: 3.0 * unit.sample(&mut rng),
            bs_ratio_delta: 0.4 * (unit.sample(&mut rng) - 0.5),
            detector_efficiency: unit.sample(&mut rng),
            dark_click_prob: 0.2 * unit.sample(&mut rng),
        };
        let v = VaaVariant::BOTH[i % 2];
        let c = choices[i % choices.len()];
        let p = Pipeline::new(c, v);
        let draws = p.draw(&cfg, &mut rng);
        let d = p.propagate(&cfg, &draws)?;
        worst = worst
            .max((d.total() - 1.0).abs())
            .max((d.photon_total() - 1.0).abs());
    }
    Ok(worst)
}

fn conservation() -> Check {
    match conservation_sweep(100, 5) {
        Ok(w) => Check::within("probability conserved across imperfection sweep", w, 1e-9),
        Err(e) => Check::new("probability conserved across imperfection sweep", false, e.to_string()),
    }
}

fn thresholds() -> Check {
    let t = evaluate_projection_game(&SingleQubitStrategy::textbook());
    let d = BlochDirection::from_vector([-1.0, -1.0, -1.0]).expect("nonzero");
    let c = evaluate_second_challenge(&SingleQubitStrategy::new(d, d));
    let worst = (t - PROJECTION_THRESHOLD).abs().max((c - CHALLENGE_THRESHOLD).abs());
    Check::within("single-qubit strategies reach the thresholds", worst, EXACT_TOL)
}

fn dominance() -> Check {
    let ok = ENTANGLED_SUCCESS > PROJECTION_THRESHOLD && ENTANGLED_SUCCESS > CHALLENGE_THRESHOLD;
    Check::new(
        "entangled protocol beats both single-qubit optima",
        ok,
        format!(
            "1 > {PROJECTION_THRESHOLD:.7} and 1 > {CHALLENGE_THRESHOLD:.7}"
        ),
    )
}

/// Runs every invariant check, plus the golden files in `golden_dir` if
/// given.
pub fn run_checks(golden_dir: Option<&Path>) -> Result<Vec<Check>> {
    let mut checks = vec![
        pauli_check(),
        uniform_overlap(),
        vaa_orthonormality(),
        vaa_complement(),
        challenge_unitarity(),
        challenge_inference(),
        retrodiction(),
        optics_unitarity(),
        oracle_equivalence(),
        conservation(),
        thresholds(),
        dominance(),
    ];
    if let Some(dir) = golden_dir {
        for g in golden::check_dir(dir)? {
            checks.push(Check {
                name: format!("golden file {}", g.file),
                pass: g.pass,
                detail: g.detail,
            });
        }
    }
    Ok(checks)
}

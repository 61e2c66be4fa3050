//! Reference values written to JSON files and checked back.
//!
//! Each document is regenerated from the library and compared number by
//! number against the stored file, so a change in conventions or a corrupted
//! file is reported with the file name and the first differing location.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::Result;
use crate::linalg::{apply, fidelity, StateVector};
use crate::optics::{
    dephased_distribution, deg, detector_outcomes, jones, ImperfectionConfig, Pipeline, Retarder,
};
use crate::protocol::{
    challenge_table, init_state, projected_state, vaa_basis, BobChoice, Game, Observable,
    ProjectionLabel, VaaVariant,
};
use crate::strategies::{
    evaluate_projection_game, evaluate_second_challenge, BlochDirection, SingleQubitStrategy,
    CHALLENGE_THRESHOLD, PROJECTION_THRESHOLD,
};

/// Absolute tolerance for numeric comparison.
pub const GOLDEN_TOL: f64 = 1e-9;

/// Expected band of Monte Carlo success fractions for the demonstration
/// config at 10⁴ trials per setting.
pub const DEMO_AVERAGE_BAND: [f64; 2] = [0.94, 0.965];
pub const DEMO_CHANNEL_FLOOR: f64 = 0.92;

/// The directory shipped with the library sources.
pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("golden")
}

fn state_json(s: &StateVector) -> Value {
    json!(s.to_pairs())
}

fn vaa_bases() -> Value {
    let mut out = serde_json::Map::new();
    for v in VaaVariant::BOTH {
        let b = vaa_basis(v);
        let states: Vec<Value> = b
            .outcomes
            .iter()
            .zip(&b.states)
            .map(|(o, s)| json!({"outcome": o, "amplitudes": state_json(s)}))
            .collect();
        out.insert(v.to_string(), Value::Array(states));
    }
    json!({
        "basis_order": ["E,h", "E,v", "L,h", "L,v"],
        "bases": out,
    })
}

fn projected_states() -> Value {
    let states: Vec<Value> = ProjectionLabel::ALL
        .iter()
        .map(|&l| {
            let s = projected_state(l);
            json!({
                "label": l,
                "amplitudes": state_json(&s),
                "overlap_with_init": fidelity(&s, &init_state()).expect("same basis"),
            })
        })
        .collect();
    json!({"init": state_json(&init_state()), "projected": states})
}

fn challenge_states() -> Value {
    let t = challenge_table();
    let supports: Vec<Value> = t
        .supports()
        .iter()
        .map(|s| {
            json!({
                "variant": s.variant,
                "unitary": s.unitary,
                "amplitudes": state_json(&crate::protocol::challenge_post_state(s.unitary)),
                "probabilities": s.probabilities,
                "support": s.support,
            })
        })
        .collect();
    json!({"post_states": supports})
}

fn inference() -> Value {
    let mut projection = Vec::new();
    for v in VaaVariant::BOTH {
        for o in v.outcomes() {
            let answers: serde_json::Map<String, Value> = Observable::ALL
                .iter()
                .map(|&obs| (format!("{obs:?}").to_lowercase(), json!(o.answer(obs))))
                .collect();
            projection.push(json!({"variant": v, "outcome": o, "answers": answers}));
        }
    }
    let challenge: Vec<Value> = challenge_table()
        .entries()
        .map(|(o, p, u)| json!({"outcome": o, "pair": p.to_string(), "unitary": u}))
        .collect();
    json!({"projection": projection, "challenge": challenge})
}

fn jones_doc() -> Value {
    let q45 = jones(Retarder::Qwp, deg(45.0));
    let r_out = apply(&q45, &ProjectionLabel::R.ket()).expect("2-dim");
    let h_out = apply(&jones(Retarder::Hwp, deg(22.5)), &ProjectionLabel::H.ket()).expect("2-dim");
    json!({
        "convention": "J(theta, delta) = R(theta) diag(exp(-i delta/2), exp(i delta/2)) R(-theta), R(theta) = [[cos, -sin], [sin, cos]], fast axis angle from h",
        "hwp_22_5": jones(Retarder::Hwp, deg(22.5)).to_rows(),
        "qwp_45": q45.to_rows(),
        "hwp_22_5_on_h": state_json(&h_out),
        "qwp_45_on_r": state_json(&r_out),
        "qwp_45_on_r_fidelity_with_h": fidelity(&r_out, &ProjectionLabel::H.ket()).expect("2-dim"),
    })
}

fn all_choices() -> Vec<BobChoice> {
    let mut v = BobChoice::all(Game::Projection);
    v.extend(BobChoice::all(Game::SecondChallenge));
    v
}

fn optics_ideal() -> Result<Value> {
    let mut rows = Vec::new();
    for v in VaaVariant::BOTH {
        for c in all_choices() {
            let d = Pipeline::new(c, v).ideal()?;
            rows.push(json!({
                "variant": v,
                "choice": c,
                "click_probability": d.click_probability(),
                "conditional": d.conditional(),
                "out_of_gate": d.photon_out_of_gate,
                "lost": d.photon_lost,
            }));
        }
    }
    let routing: serde_json::Map<String, Value> = VaaVariant::BOTH
        .iter()
        .map(|v| (v.to_string(), json!(detector_outcomes(*v))))
        .collect();
    Ok(json!({"routing": routing, "distributions": rows}))
}

fn dephased() -> Result<Value> {
    let mut rows = Vec::new();
    for v in VaaVariant::BOTH {
        for c in all_choices() {
            let d = dephased_distribution(&Pipeline::new(c, v))?;
            rows.push(json!({
                "variant": v,
                "choice": c,
                "click_probability": d.click_probability(),
                "conditional": d.conditional(),
            }));
        }
    }
    Ok(json!({"fully_dephased": rows}))
}

fn thresholds() -> Value {
    let textbook = SingleQubitStrategy::textbook();
    let d = BlochDirection::from_vector([-1.0, -1.0, -1.0]).expect("nonzero");
    let challenge = SingleQubitStrategy::new(d, d);
    json!({
        "projection": PROJECTION_THRESHOLD,
        "second_challenge": CHALLENGE_THRESHOLD,
        "projection_strategy": {"angles": textbook.angles(), "value": evaluate_projection_game(&textbook)},
        "second_challenge_strategy": {"angles": challenge.angles(), "value": evaluate_second_challenge(&challenge)},
        "entangled": 1.0,
    })
}

fn demonstration() -> Value {
    json!({
        "config": ImperfectionConfig::demonstration(),
        "trials_per_setting": 10000,
        "average_band": DEMO_AVERAGE_BAND,
        "channel_floor": DEMO_CHANNEL_FLOOR,
    })
}

/// Every reference document, keyed by file name.
pub fn documents() -> Result<Vec<(&'static str, Value)>> {
    Ok(vec![
        ("vaa_bases.json", vaa_bases()),
        ("projected_states.json", projected_states()),
        ("challenge_post_states.json", challenge_states()),
        ("inference.json", inference()),
        ("jones.json", jones_doc()),
        ("optics_ideal.json", optics_ideal()?),
        ("dephased.json", dephased()?),
        ("thresholds.json", thresholds()),
        ("demonstration.json", demonstration()),
    ])
}

/// Writes all documents into `dir`.
pub fn write_all(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let docs = documents().map_err(|e| std::io::Error::other(e.to_string()))?;
    let mut written = Vec::new();
    for (name, doc) in docs {
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(&doc).expect("plain data") + "\n";
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

/// Result of checking one file.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GoldenCheck {
    pub file: String,
    pub pass: bool,
    pub detail: String,
}

/// Compares every document against the files in `dir`.
pub fn check_dir(dir: &Path) -> Result<Vec<GoldenCheck>> {
    let mut out = Vec::new();
    for (name, expected) in documents()? {
        let path = dir.join(name);
        let file = path.display().to_string();
        let stored = match fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) => {
                out.push(GoldenCheck {
                    file,
                    pass: false,
                    detail: format!("cannot read: {e}"),
                });
                continue;
            }
        };
        let check = match serde_json::from_str::<Value>(&stored) {
            Err(e) => GoldenCheck {
                file,
                pass: false,
                detail: format!("invalid JSON: {e}"),
            },
            Ok(v) => match first_difference(&expected, &v, "$") {
                None => GoldenCheck {
                    file,
                    pass: true,
                    detail: "matches".into(),
                },
                Some(diff) => GoldenCheck {
                    file,
                    pass: false,
                    detail: diff,
                },
            },
        };
        out.push(check);
    }
    Ok(out)
}

/// Location and description of the first mismatch, numbers compared within
/// [`GOLDEN_TOL`].
pub fn first_difference(expected: &Value, got: &Value, at: &str) -> Option<String> {
    match (expected, got) {
        (Value::Number(a), Value::Number(b)) => {
            let (a, b) = (a.as_f64()?, b.as_f64()?);
            ((a - b).abs() > GOLDEN_TOL).then(|| format!("{at}: expected {a}, found {b}"))
        }
        (Value::Array(a), Value::Array(b)) => {
            if a.len() != b.len() {
                return Some(format!("{at}: expected {} items, found {}", a.len(), b.len()));
            }
            a.iter()
                .zip(b)
                .enumerate()
                .find_map(|(i, (x, y))| first_difference(x, y, &format!("{at}[{i}]")))
        }
        (Value::Object(a), Value::Object(b)) => {
            if let Some(k) = a.keys().find(|k| !b.contains_key(*k)) {
                return Some(format!("{at}: missing key `{k}`"));
            }
            if let Some(k) = b.keys().find(|k| !a.contains_key(*k)) {
                return Some(format!("{at}: unexpected key `{k}`"));
            }
            a.iter()
                .find_map(|(k, x)| first_difference(x, &b[k], &format!("{at}.{k}")))
        }
        (a, b) if a == b => None,
        (a, b) => Some(format!("{at}: expected {a}, found {b}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differences_are_located() {
        let a = json!({"x": [1.0, 2.0], "y": "s"});
        assert_eq!(first_difference(&a, &a, "$"), None);
        let b = json!({"x": [1.0, 2.5], "y": "s"});
        assert!(first_difference(&a, &b, "$").unwrap().starts_with("$.x[1]"));
        let c = json!({"x": [1.0, 2.0 + 1e-12], "y": "s"});
        assert_eq!(first_difference(&a, &c, "$"), None);
        let d = json!({"x": [1.0, 2.0]});
        assert!(first_difference(&a, &d, "$").unwrap().contains("missing key"));
    }

    #[test]
    fn shipped_files_match() {
        let checks = check_dir(&default_dir()).unwrap();
        for c in &checks {
            assert!(c.pass, "{}: {}", c.file, c.detail);
        }
        assert_eq!(checks.len(), documents().unwrap().len());
    }

    #[test]
    fn write_then_check_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_all(dir.path()).unwrap();
        assert!(check_dir(dir.path()).unwrap().iter().all(|c| c.pass));
        let f = dir.path().join("thresholds.json");
        let s = fs::read_to_string(&f).unwrap().replace("0.83333", "0.73333");
        fs::write(&f, s).unwrap();
        let bad: Vec<GoldenCheck> = check_dir(dir.path())
            .unwrap()
            .into_iter()
            .filter(|c| !c.pass)
            .collect();
        assert_eq!(bad.len(), 1);
        assert!(bad[0].file.ends_with("thresholds.json"));
    }
}

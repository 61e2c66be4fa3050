//! Single-qubit benchmark strategies: Alice sends a bare polarization qubit
//! (no time-bin partner) and makes one two-outcome measurement after Bob.
//!
//! Two evaluation routes are provided. [`evaluate_projection_game`] and
//! [`evaluate_second_challenge`] work on state vectors and follow the Born
//! rule literally. The search uses Bloch-vector closed forms, which are
//! cross-checked against the state-vector route in the tests.
//!
//! The grid search is numerical evidence for the thresholds, not a proof of
//! global optimality.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{apply, inner, ModeBasis, StateVector};
use crate::protocol::{ChallengePair, Game, Observable, UnitaryLabel};

/// `(2 + 2^{-1/2})/3`, the best single-qubit projection-game success.
pub const PROJECTION_THRESHOLD: f64 = (2.0 + std::f64::consts::FRAC_1_SQRT_2) / 3.0;

/// `5/6`, the best single-qubit Second Challenge success.
pub const CHALLENGE_THRESHOLD: f64 = 5.0 / 6.0;

/// Success of the ideal entangled protocol in either game.
pub const ENTANGLED_SUCCESS: f64 = 1.0;

/// Smallest accepted grid resolution.
pub const MIN_RESOLUTION: usize = 64;

pub fn threshold(game: Game) -> f64 {
    match game {
        Game::Projection => PROJECTION_THRESHOLD,
        Game::SecondChallenge => CHALLENGE_THRESHOLD,
    }
}

/// A point on the Bloch sphere, `θ ∈ [0, π]`, `φ ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDirection {
    pub theta: f64,
    pub phi: f64,
}

impl BlochDirection {
    /// Folds arbitrary angles into the canonical ranges without moving the
    /// point.
    pub fn new(theta: f64, phi: f64) -> Self {
        let mut theta = theta.rem_euclid(2.0 * PI);
        let mut phi = phi;
        if theta > PI {
            theta = 2.0 * PI - theta;
            phi += PI;
        }
        let mut phi = phi.rem_euclid(2.0 * PI);
        if phi >= 2.0 * PI {
            phi = 0.0;
        }
        Self { theta, phi }
    }

    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(n > 1e-15) || !n.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot normalize {v:?}")));
        }
        let theta = (v[2] / n).clamp(-1.0, 1.0).acos();
        Ok(Self::new(theta, v[1].atan2(v[0])))
    }

    pub fn x() -> Self {
        Self::new(PI / 2.0, 0.0)
    }

    pub fn y() -> Self {
        Self::new(PI / 2.0, PI / 2.0)
    }

    pub fn z() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn vector(self) -> [f64; 3] {
        bloch(self.theta, self.phi)
    }

    /// `cos(θ/2)|h⟩ + e^{iφ} sin(θ/2)|v⟩`.
    pub fn ket(self) -> StateVector {
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        StateVector::new(
            ModeBasis::polarization(),
            vec![Complex64::new(c, 0.0), Complex64::from_polar(s, self.phi)],
        )
        .expect("2-dim")
    }

    /// The antipodal point.
    pub fn opposite(self) -> Self {
        Self::new(PI - self.theta, self.phi + PI)
    }
}

fn bloch(theta: f64, phi: f64) -> [f64; 3] {
    let s = theta.sin();
    [s * phi.cos(), s * phi.sin(), theta.cos()]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitStrategy {
    pub prep: BlochDirection,
    /// Measurement axis; outcome 0 is the `+meas` state.
    pub meas: BlochDirection,
}

impl SingleQubitStrategy {
    pub fn new(prep: BlochDirection, meas: BlochDirection) -> Self {
        Self { prep, meas }
    }

    /// Prepare `|r⟩`, measure along `(x+z)/√2`.
    pub fn textbook() -> Self {
        Self::new(BlochDirection::y(), BlochDirection::new(PI / 4.0, 0.0))
    }

    /// `(θ_prep, φ_prep, θ_meas, φ_meas)`.
    pub fn angles(&self) -> [f64; 4] {
        [self.prep.theta, self.prep.phi, self.meas.theta, self.meas.phi]
    }

    fn from_angles(a: [f64; 4]) -> Self {
        Self::new(BlochDirection::new(a[0], a[1]), BlochDirection::new(a[2], a[3]))
    }
}

fn measurement_kets(meas: BlochDirection) -> [StateVector; 2] {
    [meas.ket(), meas.opposite().ket()]
}

fn prob(a: &StateVector, b: &StateVector) -> f64 {
    inner(a, b).expect("same basis").norm_sqr()
}

/// Bob measures a uniformly chosen Pauli observable; Alice measures along
/// `meas` and names the likelihood-maximizing eigenstate for the revealed
/// observable.
pub fn evaluate_projection_game(s: &SingleQubitStrategy) -> f64 {
    let prep = s.prep.ket();
    let ms = measurement_kets(s.meas);
    let mut total = 0.0;
    for obs in Observable::ALL {
        let eigen: Vec<StateVector> = obs.labels().iter().map(|l| l.ket()).collect();
        for m in &ms {
            total += eigen
                .iter()
                .map(|b| prob(b, &prep) * prob(m, b))
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    total / 3.0
}

/// Bob applies one of the six `(σa ± σb)/√2` uniformly; Alice measures along
/// `meas` and, told the pair, names the likelihood-maximizing member.
pub fn evaluate_second_challenge(s: &SingleQubitStrategy) -> f64 {
    let prep = s.prep.ket();
    let ms = measurement_kets(s.meas);
    let mut total = 0.0;
    for pair in ChallengePair::ALL {
        let outs: Vec<StateVector> = pair
            .labels()
            .iter()
            .map(|u| apply(&u.polarization_operator(), &prep).expect("2-dim"))
            .collect();
        for m in &ms {
            let p: Vec<f64> = outs.iter().map(|o| prob(m, o)).collect();
            // ties go to the first member; either choice gives the same value
            let guess = if p[0] >= p[1] { 0 } else { 1 };
            total += p[guess];
        }
    }
    total / 6.0
}

/// Per-preparation data for the closed-form evaluators.
#[derive(Debug, Clone, Copy)]
enum Prepared {
    /// `|p_x|, |p_y|, |p_z|`
    Projection([f64; 3]),
    /// `R_{U1} p − R_{U2} p` for each pair, `R_U` the π rotation of `U`.
    Challenge([[f64; 3]; 3]),
}

fn rotation_axis(u: UnitaryLabel) -> [f64; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match u {
        UnitaryLabel::XPlusY => [r, r, 0.0],
        UnitaryLabel::XMinusY => [r, -r, 0.0],
        UnitaryLabel::YPlusZ => [0.0, r, r],
        UnitaryLabel::YMinusZ => [0.0, r, -r],
        UnitaryLabel::ZPlusX => [r, 0.0, r],
        UnitaryLabel::ZMinusX => [-r, 0.0, r],
    }
}

impl Prepared {
    fn new(game: Game, p: [f64; 3]) -> Self {
        match game {
            Game::Projection => Prepared::Projection([p[0].abs(), p[1].abs(), p[2].abs()]),
            Game::SecondChallenge => Prepared::Challenge(ChallengePair::ALL.map(|pair| {
                let [u1, u2] = pair.labels();
                let (k1, k2) = (rotation_axis(u1), rotation_axis(u2));
                let (c1, c2) = (2.0 * dot(k1, p), 2.0 * dot(k2, p));
                // R_k p = 2(k·p)k − p; the −p terms cancel in the difference
                [0, 1, 2].map(|i| c1 * k1[i] - c2 * k2[i])
            })),
        }
    }

    /// `1/2 + (1/6)Σ_e max(|p_e|, |n_e|)` or `1/2 + (1/12)Σ_pairs |n·w|`.
    #[inline]
    fn value(&self, n: [f64; 3]) -> f64 {
        match self {
            Prepared::Projection(a) => {
                let s = a[0].max(n[0].abs()) + a[1].max(n[1].abs()) + a[2].max(n[2].abs());
                0.5 + s / 6.0
            }
            Prepared::Challenge(w) => {
                let s = dot(w[0], n).abs() + dot(w[1], n).abs() + dot(w[2], n).abs();
                0.5 + s / 12.0
            }
        }
    }
}

/// Closed-form value of a strategy; agrees with the state-vector evaluators.
pub fn evaluate_fast(game: Game, s: &SingleQubitStrategy) -> f64 {
    Prepared::new(game, s.prep.vector()).value(s.meas.vector())
}

pub fn evaluate(game: Game, s: &SingleQubitStrategy) -> f64 {
    match game {
        Game::Projection => evaluate_projection_game(s),
        Game::SecondChallenge => evaluate_second_challenge(s),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub game: Game,
    pub resolution: usize,
    /// Best value after refinement.
    pub optimum: f64,
    pub argmax: SingleQubitStrategy,
    /// Best value on the grid alone.
    pub grid_optimum: f64,
    pub grid_argmax: SingleQubitStrategy,
    pub evaluations: u64,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// θ on `0..=N` steps of `π/N`, φ on `0..N` steps of `2π/N`.
fn grid(resolution: usize) -> Vec<([f64; 2], [f64; 3])> {
    let n = resolution as f64;
    let mut out = Vec::with_capacity((resolution + 1) * resolution);
    for i in 0..=resolution {
        let theta = PI * i as f64 / n;
        for j in 0..resolution {
            let phi = 2.0 * PI * j as f64 / n;
            out.push(([theta, phi], bloch(theta, phi)));
        }
    }
    out
}

/// Exhaustive grid over (prep, meas) followed by cyclic golden-section
/// refinement from the best cell.
///
/// Ties on the grid go to the lexicographically smallest
/// `(θ_prep, φ_prep, θ_meas, φ_meas)` index, so the result does not depend on
/// thread scheduling.
pub fn search_optimum(game: Game, resolution: usize) -> Result<SearchReport> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution} is below the minimum of {MIN_RESOLUTION}"
        )));
    }
    let start = Instant::now();
    let points = grid(resolution);
    let np = points.len();

    let (grid_value, best_idx) = points
        .par_iter()
        .enumerate()
        .map(|(ip, (_, p))| {
            let prepared = Prepared::new(game, *p);
            let mut best = (f64::NEG_INFINITY, 0usize);
            for (im, (_, n)) in points.iter().enumerate() {
                let v = prepared.value(*n);
                if v > best.0 {
                    best = (v, ip * np + im);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
                    a
                } else {
                    b
                }
            },
        );

    let (pa, ma) = (points[best_idx / np].0, points[best_idx % np].0);
    let grid_argmax = SingleQubitStrategy::from_angles([pa[0], pa[1], ma[0], ma[1]]);
    let step_theta = PI / resolution as f64;
    let step_phi = 2.0 * PI / resolution as f64;
    let (optimum, argmax, refine_evals) = refine(
        game,
        grid_argmax.angles(),
        grid_value,
        [step_theta, step_phi, step_theta, step_phi],
    );
    Ok(SearchReport {
        game,
        resolution,
        optimum,
        argmax,
        grid_optimum: grid_value,
        grid_argmax,
        evaluations: (np as u64) * (np as u64) + refine_evals,
        elapsed: start.elapsed(),
    })
}

pub fn search_projection_optimum(resolution: usize) -> Result<SearchReport> {
    search_optimum(Game::Projection, resolution)
}

pub fn search_second_challenge_optimum(resolution: usize) -> Result<SearchReport> {
    search_optimum(Game::SecondChallenge, resolution)
}

const REFINE_TOL: f64 = 1e-7;

fn refine(
    game: Game,
    start: [f64; 4],
    start_value: f64,
    steps: [f64; 4],
) -> (f64, SingleQubitStrategy, u64) {
    let mut evals = 0u64;
    let mut f = |a: [f64; 4]| {
        evals += 1;
        let prep = bloch(a[0], a[1]);
        Prepared::new(game, prep).value(bloch(a[2], a[3]))
    };
    let mut x = start;
    let mut fx = start_value;
    let mut scale = 1.0;
    while scale * steps.iter().cloned().fold(0.0, f64::max) > REFINE_TOL {
        let mut improved = false;
        for i in 0..4 {
            let h = steps[i] * scale;
            let (t, ft) = golden_max(
                |t| {
                    let mut y = x;
                    y[i] = t;
                    f(y)
                },
                x[i] - h,
                x[i] + h,
                1e-10,
            );
            if ft > fx + 1e-15 {
                x[i] = t;
                fx = ft;
                improved = true;
            }
        }
        if !improved {
            scale /= 2.0;
        }
    }
    (fx, SingleQubitStrategy::from_angles(x), evals)
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_strategy_hits_threshold() {
        let v = evaluate_projection_game(&SingleQubitStrategy::textbook());
        assert!((v - PROJECTION_THRESHOLD).abs() <= 1e-12, "{v}");
        assert!((PROJECTION_THRESHOLD - 0.9023689).abs() < 1e-7);
    }

    #[test]
    fn h_prep_z_meas_is_two_thirds() {
        let s = SingleQubitStrategy::new(BlochDirection::z(), BlochDirection::z());
        assert!((evaluate_projection_game(&s) - 2.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn known_challenge_optimum() {
        // prep = meas = (−1, −1, −1)/√3
        let d = BlochDirection::from_vector([-1.0, -1.0, -1.0]).unwrap();
        let v = evaluate_second_challenge(&SingleQubitStrategy::new(d, d));
        assert!((v - CHALLENGE_THRESHOLD).abs() <= 1e-12, "{v}");
    }

    #[test]
    fn axis_permutation_symmetry() {
        // cyclic x→y→z→x on both prep and meas
        let perm = |v: [f64; 3]| [v[2], v[0], v[1]];
        let p = [0.3, -0.5, 0.81];
        let n = [-0.7, 0.2, 0.4];
        let mk = |p, n| {
            SingleQubitStrategy::new(
                BlochDirection::from_vector(p).unwrap(),
                BlochDirection::from_vector(n).unwrap(),
            )
        };
        let a = evaluate_projection_game(&mk(p, n));
        let b = evaluate_projection_game(&mk(perm(p), perm(n)));
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn direction_normalization() {
        let d = BlochDirection::new(-0.3, 0.1);
        assert!((0.0..=PI).contains(&d.theta) && (0.0..2.0 * PI).contains(&d.phi));
        let v = d.vector();
        let w = bloch(-0.3, 0.1);
        for i in 0..3 {
            assert!((v[i] - w[i]).abs() < 1e-12);
        }
        let r = BlochDirection::y().ket();
        assert!((r.amplitudes()[1] - Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-12);
    }

    #[test]
    fn rejects_coarse_grid() {
        assert!(search_projection_optimum(32).is_err());
    }

    #[test]
    fn searches_at_64_and_128() {
        for game in [Game::Projection, Game::SecondChallenge] {
            let lo = search_optimum(game, 64).unwrap();
            let hi = search_optimum(game, 128).unwrap();
            let t = threshold(game);
            for r in [&lo, &hi] {
                assert!((r.optimum - t).abs() < 1e-3, "{game}: {}", r.optimum);
                assert!(r.optimum <= 1.0 + 1e-12);
                assert!(r.optimum >= r.grid_optimum);
                assert!(r.optimum < ENTANGLED_SUCCESS);
                assert!((evaluate(game, &r.argmax) - r.optimum).abs() < 1e-9);
            }
            assert!(hi.optimum >= lo.optimum - 1e-9);
        }
        let hi = search_projection_optimum(128).unwrap();
        assert!(hi.optimum >= evaluate_projection_game(&SingleQubitStrategy::textbook()) - 1e-15);
    }

    fn angle_strategy() -> impl Strategy<Value = SingleQubitStrategy> {
        (0.0..PI, 0.0..2.0 * PI, 0.0..PI, 0.0..2.0 * PI).prop_map(|(a, b, c, d)| {
            SingleQubitStrategy::new(BlochDirection::new(a, b), BlochDirection::new(c, d))
        })
    }

    proptest! {
        #[test]
        fn fast_route_matches_state_vectors(s in angle_strategy()) {
            for game in [Game::Projection, Game::SecondChallenge] {
                let slow = evaluate(game, &s);
                let fast = evaluate_fast(game, &s);
                prop_assert!((slow - fast).abs() < 1e-12, "{:?} {} {}", game, slow, fast);
            }
        }

        #[test]
        fn values_are_bounded(s in angle_strategy()) {
            let p = evaluate_projection_game(&s);
            let c = evaluate_second_challenge(&s);
            prop_assert!((0.5 - 1e-12..=PROJECTION_THRESHOLD + 1e-12).contains(&p));
            prop_assert!((0.5 - 1e-12..=CHALLENGE_THRESHOLD + 1e-12).contains(&c));
        }
    }
}

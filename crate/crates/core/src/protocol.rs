//! The abstract retrodiction protocol on one photon's time-bin ⊗ polarization
//! space: Alice's entangled preparation, Bob's six projections (or six
//! unitaries in the Second Challenge), the VAA measurement, and Alice's
//! inference.
//!
//! Polarization phase conventions:
//!
//! * `|±⟩ = (|h⟩ ± |v⟩)/√2`: eigenstates of σx
//! * `|r⟩ = (|h⟩ + i|v⟩)/√2`, `|l⟩ = (|h⟩ − i|v⟩)/√2`: eigenstates of σy
//! * `|h⟩`, `|v⟩`: eigenstates of σz
//!
//! The auxiliary qubit is the arrival time: `E` (early, bin 0) or `L` (late,
//! bin 1).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{
    self, apply, inner, lift, orthogonal_complement, sigma_x, sigma_y, sigma_z, tensor, Amplitude,
    ModeBasis, Operator, StateVector, FRAC_1_SQRT_2, I, INV_SQRT_I, ONE, SQRT_I, ZERO,
};

/// Probabilities below this are treated as exactly zero.
pub const ZERO_PROBABILITY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Game {
    /// Bob projects onto one of six polarization states.
    Projection,
    /// Bob applies one of six unitaries `(σa ± σb)/√2`.
    SecondChallenge,
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Game::Projection => "projection",
            Game::SecondChallenge => "second_challenge",
        })
    }
}

impl FromStr for Game {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projection" => Ok(Game::Projection),
            "second_challenge" | "second-challenge" | "challenge" => Ok(Game::SecondChallenge),
            _ => Err(Error::InvalidArgument(format!("unknown game `{s}`"))),
        }
    }
}

/// The three observables Bob may choose between in the projection game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observable {
    X,
    Y,
    Z,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::X, Observable::Y, Observable::Z];

    pub fn labels(self) -> [ProjectionLabel; 2] {
        use ProjectionLabel::*;
        match self {
            Observable::X => [Plus, Minus],
            Observable::Y => [R, L],
            Observable::Z => [H, V],
        }
    }

    pub fn operator(self) -> Operator {
        match self {
            Observable::X => sigma_x(),
            Observable::Y => sigma_y(),
            Observable::Z => sigma_z(),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Observable::X => "σx",
            Observable::Y => "σy",
            Observable::Z => "σz",
        })
    }
}

/// Bob's six polarization projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProjectionLabel {
    Plus,
    Minus,
    R,
    L,
    H,
    V,
}

impl ProjectionLabel {
    pub const ALL: [ProjectionLabel; 6] = [
        ProjectionLabel::Plus,
        ProjectionLabel::Minus,
        ProjectionLabel::R,
        ProjectionLabel::L,
        ProjectionLabel::H,
        ProjectionLabel::V,
    ];

    pub fn observable(self) -> Observable {
        use ProjectionLabel::*;
        match self {
            Plus | Minus => Observable::X,
            R | L => Observable::Y,
            H | V => Observable::Z,
        }
    }

    /// The other member of the same observable pair.
    pub fn flipped(self) -> Self {
        use ProjectionLabel::*;
        match self {
            Plus => Minus,
            Minus => Plus,
            R => L,
            L => R,
            H => V,
            V => H,
        }
    }

    pub fn symbol(self) -> &'static str {
        use ProjectionLabel::*;
        match self {
            Plus => "+",
            Minus => "-",
            R => "r",
            L => "l",
            H => "h",
            V => "v",
        }
    }

    /// Polarization amplitudes `(h, v)`.
    pub fn amplitudes(self) -> [Amplitude; 2] {
        use ProjectionLabel::*;
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Plus => [s, s],
            Minus => [s, -s],
            R => [s, I * s],
            L => [s, -I * s],
            H => [ONE, ZERO],
            V => [ZERO, ONE],
        }
    }

    /// The polarization ket `|ℓ⟩`.
    pub fn ket(self) -> StateVector {
        StateVector::new(ModeBasis::polarization(), self.amplitudes().to_vec())
            .expect("2-dim polarization ket")
    }

    /// `|ℓ⟩⟨ℓ|` on polarization.
    pub fn projector(self) -> Operator {
        let a = self.amplitudes();
        let mut m = Vec::with_capacity(4);
        for i in 0..2 {
            for j in 0..2 {
                m.push(a[i] * a[j].conj());
            }
        }
        Operator::new(ModeBasis::polarization(), ModeBasis::polarization(), m).expect("2x2")
    }
}

impl fmt::Display for ProjectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for ProjectionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use ProjectionLabel::*;
        match s.trim() {
            "+" | "plus" => Ok(Plus),
            "-" | "−" | "minus" => Ok(Minus),
            "r" => Ok(R),
            "l" => Ok(L),
            "h" => Ok(H),
            "v" => Ok(V),
            other => Err(Error::InvalidArgument(format!(
                "unknown projection label `{other}`"
            ))),
        }
    }
}

impl Serialize for ProjectionLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for ProjectionLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The three pairs of Second Challenge unitaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChallengePair {
    XY,
    YZ,
    ZX,
}

impl ChallengePair {
    pub const ALL: [ChallengePair; 3] = [ChallengePair::XY, ChallengePair::YZ, ChallengePair::ZX];

    pub fn labels(self) -> [UnitaryLabel; 2] {
        use UnitaryLabel::*;
        match self {
            ChallengePair::XY => [XPlusY, XMinusY],
            ChallengePair::YZ => [YPlusZ, YMinusZ],
            ChallengePair::ZX => [ZPlusX, ZMinusX],
        }
    }
}

impl fmt::Display for ChallengePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChallengePair::XY => "xy",
            ChallengePair::YZ => "yz",
            ChallengePair::ZX => "zx",
        })
    }
}

/// Bob's six Second Challenge unitaries `(σa ± σb)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnitaryLabel {
    XPlusY,
    XMinusY,
    YPlusZ,
    YMinusZ,
    ZPlusX,
    ZMinusX,
}

impl UnitaryLabel {
    pub const ALL: [UnitaryLabel; 6] = [
        UnitaryLabel::XPlusY,
        UnitaryLabel::XMinusY,
        UnitaryLabel::YPlusZ,
        UnitaryLabel::YMinusZ,
        UnitaryLabel::ZPlusX,
        UnitaryLabel::ZMinusX,
    ];

    pub fn pair(self) -> ChallengePair {
        use UnitaryLabel::*;
        match self {
            XPlusY | XMinusY => ChallengePair::XY,
            YPlusZ | YMinusZ => ChallengePair::YZ,
            ZPlusX | ZMinusX => ChallengePair::ZX,
        }
    }

    pub fn symbol(self) -> &'static str {
        use UnitaryLabel::*;
        match self {
            XPlusY => "x+y",
            XMinusY => "x-y",
            YPlusZ => "y+z",
            YMinusZ => "y-z",
            ZPlusX => "z+x",
            ZMinusX => "z-x",
        }
    }

    /// `(σa ± σb)/√2` on polarization.
    pub fn polarization_operator(self) -> Operator {
        use UnitaryLabel::*;
        let (a, b, sign) = match self {
            XPlusY => (sigma_x(), sigma_y(), 1.0),
            XMinusY => (sigma_x(), sigma_y(), -1.0),
            YPlusZ => (sigma_y(), sigma_z(), 1.0),
            YMinusZ => (sigma_y(), sigma_z(), -1.0),
            ZPlusX => (sigma_z(), sigma_x(), 1.0),
            ZMinusX => (sigma_z(), sigma_x(), -1.0),
        };
        a.add(&b.scale(Complex64::new(sign, 0.0)))
            .expect("same basis")
            .scale(Complex64::new(FRAC_1_SQRT_2, 0.0))
    }
}

impl fmt::Display for UnitaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for UnitaryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('−', "-").to_ascii_lowercase();
        UnitaryLabel::ALL
            .into_iter()
            .find(|u| u.symbol() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown unitary label `{s}`")))
    }
}

impl Serialize for UnitaryLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for UnitaryLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What Bob does to the photon in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BobChoice {
    Project(ProjectionLabel),
    Apply(UnitaryLabel),
}

impl BobChoice {
    pub fn game(self) -> Game {
        match self {
            BobChoice::Project(_) => Game::Projection,
            BobChoice::Apply(_) => Game::SecondChallenge,
        }
    }

    /// All six choices of a game, in canonical order.
    pub fn all(game: Game) -> Vec<BobChoice> {
        match game {
            Game::Projection => ProjectionLabel::ALL.map(BobChoice::Project).to_vec(),
            Game::SecondChallenge => UnitaryLabel::ALL.map(BobChoice::Apply).to_vec(),
        }
    }
}

impl fmt::Display for BobChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BobChoice::Project(l) => l.fmt(f),
            BobChoice::Apply(u) => u.fmt(f),
        }
    }
}

impl FromStr for BobChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(u) = s.parse::<UnitaryLabel>() {
            return Ok(BobChoice::Apply(u));
        }
        s.parse::<ProjectionLabel>()
            .map(BobChoice::Project)
            .map_err(|_| Error::InvalidArgument(format!("unknown choice `{s}`")))
    }
}

impl Serialize for BobChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BobChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which of the two VAA bases Alice measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VaaVariant {
    First,
    Second,
}

impl VaaVariant {
    pub const BOTH: [VaaVariant; 2] = [VaaVariant::First, VaaVariant::Second];

    /// Outcome labels in measurement order.
    pub fn outcomes(self) -> [VaaOutcome; 4] {
        use ProjectionLabel::*;
        let o = VaaOutcome::new_unchecked;
        match self {
            VaaVariant::First => [o(Plus, R, H), o(Plus, L, V), o(Minus, R, V), o(Minus, L, H)],
            VaaVariant::Second => [o(Minus, L, V), o(Minus, R, H), o(Plus, L, H), o(Plus, R, V)],
        }
    }
}

impl fmt::Display for VaaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VaaVariant::First => "first",
            VaaVariant::Second => "second",
        })
    }
}

impl FromStr for VaaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" | "1" => Ok(VaaVariant::First),
            "second" | "2" => Ok(VaaVariant::Second),
            _ => Err(Error::InvalidArgument(format!("unknown VAA variant `{s}`"))),
        }
    }
}

/// A VAA basis outcome, named by the answer it gives for each observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VaaOutcome {
    x: ProjectionLabel,
    y: ProjectionLabel,
    z: ProjectionLabel,
}

impl VaaOutcome {
    const fn new_unchecked(x: ProjectionLabel, y: ProjectionLabel, z: ProjectionLabel) -> Self {
        Self { x, y, z }
    }

    pub fn new(x: ProjectionLabel, y: ProjectionLabel, z: ProjectionLabel) -> Result<Self> {
        let ok = x.observable() == Observable::X
            && y.observable() == Observable::Y
            && z.observable() == Observable::Z;
        if ok {
            Ok(Self { x, y, z })
        } else {
            Err(Error::InvalidArgument(format!(
                "`{x}{y}{z}` is not an (x, y, z) answer triple"
            )))
        }
    }

    pub fn answer(self, obs: Observable) -> ProjectionLabel {
        match obs {
            Observable::X => self.x,
            Observable::Y => self.y,
            Observable::Z => self.z,
        }
    }

    pub fn answers(self) -> [ProjectionLabel; 3] {
        [self.x, self.y, self.z]
    }

    pub fn variant(self) -> VaaVariant {
        if VaaVariant::First.outcomes().contains(&self) {
            VaaVariant::First
        } else {
            VaaVariant::Second
        }
    }
}

impl fmt::Display for VaaOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.x, self.y, self.z)
    }
}

impl FromStr for VaaOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('−', "-");
        let chars: Vec<String> = s.chars().map(String::from).collect();
        if chars.len() != 3 {
            return Err(Error::InvalidArgument(format!("bad VAA outcome `{s}`")));
        }
        VaaOutcome::new(chars[0].parse()?, chars[1].parse()?, chars[2].parse()?)
    }
}

impl Serialize for VaaOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VaaOutcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Result of Bob's projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOutcome {
    pub probability: f64,
    /// `None` when the projection fails with certainty.
    pub post_state: Option<StateVector>,
}

fn tp_state(amps: [Amplitude; 4]) -> StateVector {
    StateVector::new(ModeBasis::timebin_polarization(), amps.to_vec()).expect("4-dim")
}

fn timebin_ket(e: Amplitude, l: Amplitude) -> StateVector {
    StateVector::new(ModeBasis::timebin(), vec![e, l]).expect("2-dim")
}

/// `|init⟩ = 2^{-1/2}(|E,h⟩ + |L,v⟩)`.
pub fn init_state() -> StateVector {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    tp_state([s, ZERO, ZERO, s])
}

/// The six post-projection states `|'ℓ'⟩ = 2^{-1/2}(a_E|E,ℓ⟩ + a_L|L,ℓ⟩)`.
pub fn projected_state(label: ProjectionLabel) -> StateVector {
    use ProjectionLabel::*;
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let (e, l) = match label {
        Plus => (s, s),
        Minus => (s, -s),
        R => (s, -I * s),
        L => (s, I * s),
        H => (ONE, ZERO),
        V => (ZERO, ONE),
    };
    tensor(&timebin_ket(e, l), &label.ket()).expect("disjoint slots")
}

/// Bob's projection of `state` onto `|'ℓ'⟩`.
pub fn project(state: &StateVector, label: ProjectionLabel) -> Result<ProjectionOutcome> {
    state.require_normalized()?;
    let target = projected_state(label);
    let probability = inner(&target, state)?.norm_sqr();
    let post_state = (probability > ZERO_PROBABILITY).then_some(target);
    Ok(ProjectionOutcome {
        probability,
        post_state,
    })
}

/// The four VAA states of one basis, in [`VaaVariant::outcomes`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct VaaBasis {
    pub variant: VaaVariant,
    pub outcomes: [VaaOutcome; 4],
    pub states: [StateVector; 4],
}

impl VaaBasis {
    pub fn state(&self, outcome: VaaOutcome) -> Option<&StateVector> {
        self.outcomes
            .iter()
            .position(|&o| o == outcome)
            .map(|i| &self.states[i])
    }
}

fn first_vaa_states() -> [StateVector; 4] {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let (w, wb) = (half * SQRT_I, half * INV_SQRT_I);
    [
        tp_state([a, w, wb, ZERO]),
        tp_state([ZERO, wb, w, a]),
        tp_state([ZERO, -wb, -w, a]),
        tp_state([a, -w, -wb, ZERO]),
    ]
}

/// The unit vector (up to phase) orthogonal to the three projected states
/// carrying the complementary label in each pair.
fn constructed_vaa_state(outcome: VaaOutcome) -> Result<StateVector> {
    let constraints: Vec<StateVector> = outcome
        .answers()
        .iter()
        .map(|l| projected_state(l.flipped()))
        .collect();
    let comp = orthogonal_complement(&constraints)?;
    match comp.as_slice() {
        [v] => Ok(v.phase_fixed()),
        _ => Err(Error::BadMeasurementBasis(format!(
            "constraints for {outcome} leave a {}-dim complement",
            comp.len()
        ))),
    }
}

/// One of the two VAA bases.
///
/// The first is written out amplitude by amplitude; the second is obtained by
/// solving the orthogonality constraints, since only its state names are
/// known.
pub fn vaa_basis(variant: VaaVariant) -> VaaBasis {
    let outcomes = variant.outcomes();
    let states = match variant {
        VaaVariant::First => first_vaa_states(),
        VaaVariant::Second => outcomes.map(|o| {
            constructed_vaa_state(o).expect("second VAA basis constraints have rank 3")
        }),
    };
    VaaBasis {
        variant,
        outcomes,
        states,
    }
}

/// Born-rule probabilities of a complete orthonormal measurement.
pub fn measure_in_basis(state: &StateVector, basis: &[StateVector]) -> Result<Vec<f64>> {
    state.require_normalized()?;
    if basis.len() != state.dim() {
        return Err(Error::BadMeasurementBasis(format!(
            "{} vectors for a {}-dim space",
            basis.len(),
            state.dim()
        )));
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().skip(i) {
            let g = inner(a, b)?;
            let expect = if i == j { ONE } else { ZERO };
            if (g - expect).norm() > 1e-10 {
                return Err(Error::BadMeasurementBasis(format!(
                    "⟨b{i}|b{j}⟩ = {g}"
                )));
            }
        }
    }
    basis
        .iter()
        .map(|b| inner(b, state).map(|a| a.norm_sqr()))
        .collect()
}

/// Alice's announcement for the observable Bob reveals.
pub fn alice_answer(outcome: VaaOutcome, pair: Observable) -> ProjectionLabel {
    outcome.answer(pair)
}

/// `I ⊗ (σa ± σb)/√2`.
pub fn challenge_unitary(label: UnitaryLabel) -> Operator {
    lift(&label.polarization_operator()).expect("polarization operator")
}

/// `challenge_unitary(ℓ)|init⟩`.
pub fn challenge_post_state(label: UnitaryLabel) -> StateVector {
    apply(&challenge_unitary(label), &init_state()).expect("4-dim")
}

/// Outcome support of one Second Challenge post-state in one basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChallengeSupport {
    pub variant: VaaVariant,
    pub unitary: UnitaryLabel,
    pub probabilities: Vec<f64>,
    pub support: Vec<VaaOutcome>,
}

/// Second Challenge inference map, built by measuring all six post-states.
#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeTable {
    entries: BTreeMap<(VaaOutcome, ChallengePair), UnitaryLabel>,
    supports: Vec<ChallengeSupport>,
}

impl ChallengeTable {
    /// Fails if any outcome is compatible with both or neither member of a
    /// pair.
    pub fn build() -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut supports = Vec::new();
        for variant in VaaVariant::BOTH {
            let basis = vaa_basis(variant);
            let mut by_label = BTreeMap::new();
            for u in UnitaryLabel::ALL {
                let probabilities = measure_in_basis(&challenge_post_state(u), &basis.states)?;
                let support: Vec<VaaOutcome> = basis
                    .outcomes
                    .iter()
                    .zip(&probabilities)
                    .filter(|(_, &p)| p > ZERO_PROBABILITY)
                    .map(|(&o, _)| o)
                    .collect();
                by_label.insert(u, support.clone());
                supports.push(ChallengeSupport {
                    variant,
                    unitary: u,
                    probabilities,
                    support,
                });
            }
            for pair in ChallengePair::ALL {
                for outcome in basis.outcomes {
                    let mut hits = pair
                        .labels()
                        .into_iter()
                        .filter(|u| by_label[u].contains(&outcome));
                    match (hits.next(), hits.next()) {
                        (Some(u), None) => {
                            entries.insert((outcome, pair), u);
                        }
                        _ => {
                            return Err(Error::AmbiguousInference {
                                outcome: outcome.to_string(),
                                pair: pair.to_string(),
                            })
                        }
                    }
                }
            }
        }
        Ok(Self { entries, supports })
    }

    pub fn infer(&self, outcome: VaaOutcome, pair: ChallengePair) -> Option<UnitaryLabel> {
        self.entries.get(&(outcome, pair)).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (VaaOutcome, ChallengePair, UnitaryLabel)> + '_ {
        self.entries.iter().map(|(&(o, p), &u)| (o, p, u))
    }

    pub fn supports(&self) -> &[ChallengeSupport] {
        &self.supports
    }
}

/// The process-wide inference table.
///
/// # Panics
///
/// If the table cannot be built unambiguously; that would mean the state
/// algebra above is wrong.
pub fn challenge_table() -> &'static ChallengeTable {
    static TABLE: OnceLock<ChallengeTable> = OnceLock::new();
    TABLE.get_or_init(|| ChallengeTable::build().expect("Second Challenge inference table"))
}

/// Alice's Second Challenge answer once told which pair applies.
pub fn challenge_infer(outcome: VaaOutcome, pair: ChallengePair) -> UnitaryLabel {
    challenge_table()
        .infer(outcome, pair)
        .expect("table covers every outcome of both bases")
}

/// Alice's guess for either game from a measured outcome.
pub fn infer_choice(outcome: VaaOutcome, bob: BobChoice) -> BobChoice {
    match bob {
        BobChoice::Project(l) => BobChoice::Project(alice_answer(outcome, l.observable())),
        BobChoice::Apply(u) => BobChoice::Apply(challenge_infer(outcome, u.pair())),
    }
}

/// State handed to Alice's analyzer after Bob acts on `|init⟩`, and the
/// probability that Bob lets the photon through.
pub fn bob_output(choice: BobChoice) -> (f64, StateVector) {
    match choice {
        BobChoice::Project(l) => (0.5, projected_state(l)),
        BobChoice::Apply(u) => (1.0, challenge_post_state(u)),
    }
}

/// The rank-2 polarization projector `I ⊗ |ℓ⟩⟨ℓ|` Bob's optics actually
/// implement.
pub fn polarization_projector(label: ProjectionLabel) -> Operator {
    linalg::lift(&label.projector()).expect("polarization operator")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fidelity, EXACT_TOL};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Amplitude {
        Complex64::new(re, im)
    }

    fn close(a: Amplitude, b: Amplitude) -> bool {
        (a - b).norm() < 1e-12
    }

    fn outcome(s: &str) -> VaaOutcome {
        s.parse().unwrap()
    }

    #[test]
    fn init_amplitudes() {
        let s = FRAC_1_SQRT_2;
        let v = init_state();
        let expect = [s, 0.0, 0.0, s];
        for (a, e) in v.amplitudes().iter().zip(expect) {
            assert!(close(*a, c(e, 0.0)));
        }
        assert!((v.norm_sqr() - 1.0).abs() < EXACT_TOL);
        let lv = StateVector::basis_state(
            ModeBasis::timebin_polarization(),
            &crate::linalg::ModeLabel::timebin_pol(linalg::LATE, linalg::Pol::V),
        )
        .unwrap();
        assert!(close(inner(&lv, &v).unwrap(), c(s, 0.0)));
    }

    #[test]
    fn r_is_plus_one_eigenstate_of_sigma_y() {
        let r = ProjectionLabel::R.ket();
        let out = apply(&sigma_y(), &r).unwrap();
        assert!(close(inner(&r, &out).unwrap(), ONE));
        let l = ProjectionLabel::L.ket();
        let out = apply(&sigma_y(), &l).unwrap();
        assert!(close(inner(&l, &out).unwrap(), -ONE));
    }

    #[test]
    fn projected_states_match_written_forms() {
        // |'h'⟩ = |E,h⟩
        let h = projected_state(ProjectionLabel::H);
        assert!(close(h.amplitudes()[0], ONE));
        assert!((h.norm_sqr() - 1.0).abs() < EXACT_TOL);
        // |'−'⟩ = 2^{-1/2}(|E,−⟩ − |L,−⟩) = (1/2)(1, −1, −1, 1)
        let m = projected_state(ProjectionLabel::Minus);
        for (a, e) in m.amplitudes().iter().zip([0.5, -0.5, -0.5, 0.5]) {
            assert!(close(*a, c(e, 0.0)));
        }
        // |'r'⟩ = 2^{-1/2}(|E,r⟩ − i|L,r⟩) = (1/2)(1, i, −i, 1)
        let r = projected_state(ProjectionLabel::R);
        let expect = [c(0.5, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.5, 0.0)];
        for (a, e) in r.amplitudes().iter().zip(expect) {
            assert!(close(*a, e));
        }
    }

    #[test]
    fn projected_states_equal_rank_two_projection_of_init() {
        for l in ProjectionLabel::ALL {
            let p = apply(&polarization_projector(l), &init_state()).unwrap();
            assert!((p.norm_sqr() - 0.5).abs() < EXACT_TOL);
            let p = p.normalized().unwrap();
            // same phase, not just same ray
            for (a, b) in p.amplitudes().iter().zip(projected_state(l).amplitudes()) {
                assert!(close(*a, *b), "{l}");
            }
        }
    }

    #[test]
    fn uniform_overlap_with_init() {
        for l in ProjectionLabel::ALL {
            let f = fidelity(&projected_state(l), &init_state()).unwrap();
            assert!((f - 0.5).abs() < EXACT_TOL, "{l}: {f}");
        }
    }

    #[test]
    fn project_examples() {
        let o = project(&init_state(), ProjectionLabel::Plus).unwrap();
        assert!((o.probability - 0.5).abs() < EXACT_TOL);
        assert_eq!(o.post_state, Some(projected_state(ProjectionLabel::Plus)));

        let o = project(&projected_state(ProjectionLabel::H), ProjectionLabel::V).unwrap();
        assert!(o.probability.abs() < EXACT_TOL);
        assert!(o.post_state.is_none());

        let o = project(&projected_state(ProjectionLabel::R), ProjectionLabel::R).unwrap();
        assert!((o.probability - 1.0).abs() < EXACT_TOL);
    }

    #[test]
    fn project_rejects_unnormalized() {
        let v = init_state().scale(c(2.0, 0.0));
        assert!(matches!(
            project(&v, ProjectionLabel::H),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn first_vaa_leading_state() {
        let b = vaa_basis(VaaVariant::First);
        let s = FRAC_1_SQRT_2;
        let expect = [c(s, 0.0), c(0.5 * s, 0.5 * s), c(0.5 * s, -0.5 * s), ZERO];
        for (a, e) in b.states[0].amplitudes().iter().zip(expect) {
            assert!(close(*a, e));
        }
        assert_eq!(b.outcomes[0].to_string(), "+rh");
    }

    #[test]
    fn vaa_bases_are_orthonormal() {
        for variant in VaaVariant::BOTH {
            let b = vaa_basis(variant);
            for i in 0..4 {
                for j in 0..4 {
                    let g = inner(&b.states[i], &b.states[j]).unwrap();
                    let e = if i == j { ONE } else { ZERO };
                    assert!((g - e).norm() <= EXACT_TOL, "{variant} {i}{j}");
                }
            }
        }
    }

    #[test]
    fn vaa_states_orthogonal_to_complementary_projections() {
        for variant in VaaVariant::BOTH {
            let b = vaa_basis(variant);
            for (o, s) in b.outcomes.iter().zip(&b.states) {
                for l in o.answers() {
                    let ov = inner(&projected_state(l.flipped()), s).unwrap().norm();
                    assert!(ov <= EXACT_TOL, "{o} vs '{}'", l.flipped());
                }
            }
        }
    }

    #[test]
    fn constructed_first_basis_matches_written_one() {
        // the null-space construction reproduces the written first basis
        let b = vaa_basis(VaaVariant::First);
        for (o, s) in b.outcomes.iter().zip(&b.states) {
            let built = constructed_vaa_state(*o).unwrap();
            assert!((fidelity(&built, s).unwrap() - 1.0).abs() < EXACT_TOL);
        }
    }

    /// Null vectors from an SVD of the 3×4 constraint matrices, computed
    /// outside this crate and frozen here (phase: first nonzero amplitude
    /// real positive).
    #[test]
    fn second_basis_matches_svd_oracle() {
        let q = 0.5 * FRAC_1_SQRT_2;
        let s = FRAC_1_SQRT_2;
        let frozen: [(&str, [Amplitude; 4]); 4] = [
            ("-lv", [ZERO, c(0.5, 0.0), c(0.0, -0.5), c(-0.5, 0.5)]),
            ("-rh", [c(s, 0.0), c(-q, q), c(-q, -q), ZERO]),
            ("+lh", [c(s, 0.0), c(q, -q), c(q, q), ZERO]),
            ("+rv", [ZERO, c(0.5, 0.0), c(0.0, -0.5), c(0.5, -0.5)]),
        ];
        let b = vaa_basis(VaaVariant::Second);
        for (name, amps) in frozen {
            let expect = tp_state(amps);
            let got = b.state(outcome(name)).unwrap();
            assert!((fidelity(got, &expect).unwrap() - 1.0).abs() < 1e-12, "{name}");
        }
        let pv = b.state(outcome("+rv")).unwrap();
        for l in [ProjectionLabel::Minus, ProjectionLabel::L, ProjectionLabel::H] {
            assert!(inner(pv, &projected_state(l)).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn measure_examples() {
        let first = vaa_basis(VaaVariant::First);
        let p = measure_in_basis(&projected_state(ProjectionLabel::H), &first.states).unwrap();
        for (a, e) in p.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((a - e).abs() < EXACT_TOL);
        }
        let p = measure_in_basis(&projected_state(ProjectionLabel::Plus), &first.states).unwrap();
        for (a, e) in p.iter().zip([0.5, 0.5, 0.0, 0.0]) {
            assert!((a - e).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn measure_rejects_bad_basis() {
        let first = vaa_basis(VaaVariant::First);
        let st = init_state();
        assert!(measure_in_basis(&st, &first.states[..3]).is_err());
        let mut dup = first.states.to_vec();
        dup[1] = dup[0].clone();
        assert!(matches!(
            measure_in_basis(&st, &dup),
            Err(Error::BadMeasurementBasis(_))
        ));
    }

    #[test]
    fn each_projection_gives_two_half_outcomes() {
        for variant in VaaVariant::BOTH {
            let b = vaa_basis(variant);
            for l in ProjectionLabel::ALL {
                let mut p = measure_in_basis(&projected_state(l), &b.states).unwrap();
                p.sort_by(|a, b| b.partial_cmp(a).unwrap());
                for (a, e) in p.iter().zip([0.5, 0.5, 0.0, 0.0]) {
                    assert!((a - e).abs() < EXACT_TOL);
                }
            }
        }
    }

    #[test]
    fn retrodiction_is_always_correct() {
        for variant in VaaVariant::BOTH {
            let b = vaa_basis(variant);
            for l in ProjectionLabel::ALL {
                let p = measure_in_basis(&projected_state(l), &b.states).unwrap();
                for (o, prob) in b.outcomes.iter().zip(p) {
                    if prob > ZERO_PROBABILITY {
                        assert_eq!(alice_answer(*o, l.observable()), l, "{variant} {o}");
                    }
                }
            }
        }
    }

    #[test]
    fn alice_answer_examples() {
        assert_eq!(alice_answer(outcome("+lv"), Observable::Z), ProjectionLabel::V);
        assert_eq!(alice_answer(outcome("+lv"), Observable::X), ProjectionLabel::Plus);
        assert_eq!(alice_answer(outcome("-rv"), Observable::Y), ProjectionLabel::R);
    }

    #[test]
    fn outcome_parsing() {
        assert_eq!(outcome("−rv"), outcome("-rv"));
        assert!("rh+".parse::<VaaOutcome>().is_err());
        assert!("+rhx".parse::<VaaOutcome>().is_err());
        assert_eq!(outcome("+rv").variant(), VaaVariant::Second);
    }

    #[test]
    fn challenge_unitary_post_states() {
        // (½i)^{1/2}(|E,v⟩ − i|L,h⟩)
        let pre = c(0.5, 0.5);
        let expect = tp_state([ZERO, pre, -I * pre, ZERO]);
        let got = challenge_post_state(UnitaryLabel::XPlusY);
        for (a, e) in got.amplitudes().iter().zip(expect.amplitudes()) {
            assert!(close(*a, *e));
        }
        // −2^{-1/2}(|E,l⟩ + i|L,r⟩) = −(1/2)(1, −i, i, −1)
        let expect = [c(-0.5, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.5, 0.0)];
        let got = challenge_post_state(UnitaryLabel::YMinusZ);
        for (a, e) in got.amplitudes().iter().zip(expect) {
            assert!(close(*a, e));
        }
        // 2^{-1/2}(|E,+⟩ + |L,−⟩)
        let got = challenge_post_state(UnitaryLabel::ZPlusX);
        for (a, e) in got.amplitudes().iter().zip([0.5, 0.5, 0.5, -0.5]) {
            assert!(close(*a, c(e, 0.0)));
        }
    }

    #[test]
    fn challenge_unitaries_square_to_identity() {
        for u in UnitaryLabel::ALL {
            let op = u.polarization_operator();
            assert!(op.is_unitary(EXACT_TOL));
            let sq = op.compose(&op).unwrap();
            assert!(sq.max_abs_diff(&Operator::identity(ModeBasis::polarization())).unwrap() <= EXACT_TOL);
            assert!(challenge_unitary(u).is_unitary(EXACT_TOL));
        }
    }

    #[test]
    fn challenge_table_builds_with_two_outcome_supports() {
        let t = ChallengeTable::build().unwrap();
        assert_eq!(t.entries().count(), 2 * 4 * 3);
        for s in t.supports() {
            assert_eq!(s.support.len(), 2, "{} {}", s.variant, s.unitary);
            for p in &s.probabilities {
                assert!(p.abs() < 1e-12 || (p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn challenge_inference_is_correct_on_support() {
        for variant in VaaVariant::BOTH {
            let b = vaa_basis(variant);
            for u in UnitaryLabel::ALL {
                let p = measure_in_basis(&challenge_post_state(u), &b.states).unwrap();
                for (o, prob) in b.outcomes.iter().zip(p) {
                    if prob > ZERO_PROBABILITY {
                        assert_eq!(challenge_infer(*o, u.pair()), u);
                    }
                }
            }
        }
    }

    #[test]
    fn label_round_trips() {
        for c in BobChoice::all(Game::Projection)
            .into_iter()
            .chain(BobChoice::all(Game::SecondChallenge))
        {
            assert_eq!(c.to_string().parse::<BobChoice>().unwrap(), c);
            let js = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<BobChoice>(&js).unwrap(), c);
        }
        assert!("q".parse::<BobChoice>().is_err());
    }

    proptest! {
        #[test]
        fn born_rule_sums_to_one(re in proptest::array::uniform4(-1.0f64..1.0),
                                 im in proptest::array::uniform4(-1.0f64..1.0),
                                 second in any::<bool>()) {
            let amps: Vec<Amplitude> = re.iter().zip(&im).map(|(a, b)| c(*a, *b)).collect();
            let st = StateVector::new(ModeBasis::timebin_polarization(), amps).unwrap();
            prop_assume!(st.norm_sqr() > 1e-6);
            let st = st.normalized().unwrap();
            let variant = if second { VaaVariant::Second } else { VaaVariant::First };
            let p = measure_in_basis(&st, &vaa_basis(variant).states).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{Amplitude, ModeBasis, Operator, I, ONE, ZERO};

/// Retardance of a half-wave plate.
pub const HALF_WAVE: f64 = PI;
/// Retardance of a quarter-wave plate.
pub const QUARTER_WAVE: f64 = PI / 2.0;

/// Degrees to radians.
pub fn deg(x: f64) -> f64 {
    x.to_radians()
}

/// Linear retarder with fast axis at `angle` from horizontal and retardance
/// `delta`:
///
/// ```text
/// J(θ, δ) = R(θ) · diag(e^{-iδ/2}, e^{iδ/2}) · R(−θ),   R(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]
/// ```
///
/// With this convention `HWP(22.5°)|h⟩ = −i|+⟩` and `QWP(45°)|r⟩ ∝ |h⟩`.
/// The inverse of a retarder at `θ` is the same retarder at `θ + 90°`.
pub fn retarder(angle: f64, delta: f64) -> [[Amplitude; 2]; 2] {
    let (s, c) = angle.sin_cos();
    let a = Complex64::from_polar(1.0, -delta / 2.0);
    let b = Complex64::from_polar(1.0, delta / 2.0);
    [
        [a * c * c + b * s * s, (a - b) * c * s],
        [(a - b) * c * s, a * s * s + b * c * c],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Retarder {
    Hwp,
    Qwp,
}

impl Retarder {
    pub fn retardance(self) -> f64 {
        match self {
            Retarder::Hwp => HALF_WAVE,
            Retarder::Qwp => QUARTER_WAVE,
        }
    }
}

/// Jones matrix of a wave plate as a polarization operator.
pub fn jones(kind: Retarder, angle: f64) -> Operator {
    Operator::from_rows(ModeBasis::polarization(), retarder(angle, kind.retardance()))
        .expect("2x2")
}

/// What an element does to the modes on its ports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ElementKind {
    /// Half-wave plate, fast axis angle in radians.
    Hwp { angle: f64 },
    /// Quarter-wave plate, fast axis angle in radians.
    Qwp { angle: f64 },
    /// Transmits h, reflects v: `in0 h → out0`, `in0 v → out1`,
    /// `in1 h → out1`, `in1 v → out0`.
    Pbs,
    /// Polarization-independent splitter with power reflectivity `R`:
    /// `out0 = t·in0 + i r·in1`, `out1 = i r·in0 + t·in1`.
    Bs { reflectivity: f64 },
    /// Common phase `e^{iφ}` on both polarizations.
    Phase { phi: f64 },
    /// One detour of extra path length: time bin + 1.
    Delay,
    /// Routes one path into another unchanged.
    Mirror,
    /// Arbitrary local map over `(port, pol)` in row-major order, for tests
    /// and custom components.
    Matrix { rows: Vec<Vec<[f64; 2]>> },
}

impl ElementKind {
    pub fn name(&self) -> &'static str {
        match self {
            ElementKind::Hwp { .. } => "HWP",
            ElementKind::Qwp { .. } => "QWP",
            ElementKind::Pbs => "PBS",
            ElementKind::Bs { .. } => "BS",
            ElementKind::Phase { .. } => "phase",
            ElementKind::Delay => "delay",
            ElementKind::Mirror => "mirror",
            ElementKind::Matrix { .. } => "matrix",
        }
    }

    pub fn ports(&self) -> usize {
        match self {
            ElementKind::Pbs | ElementKind::Bs { .. } => 2,
            ElementKind::Matrix { rows } => rows.len() / 2,
            _ => 1,
        }
    }

    /// Does a wave-plate angle error apply?
    pub fn is_wave_plate(&self) -> bool {
        matches!(self, ElementKind::Hwp { .. } | ElementKind::Qwp { .. })
    }

    /// Does an interferometer phase error apply?
    pub fn is_phase(&self) -> bool {
        matches!(self, ElementKind::Phase { .. })
    }

    /// Local map over `(port, pol)` indices `2·port + pol`, given the
    /// element's perturbation offset and the global splitter ratio error.
    pub fn local_matrix(&self, offset: f64, bs_ratio_delta: f64) -> Vec<Vec<Amplitude>> {
        let two = |m: [[Amplitude; 2]; 2]| m.iter().map(|r| r.to_vec()).collect();
        match self {
            ElementKind::Hwp { angle } => two(retarder(angle + offset, HALF_WAVE)),
            ElementKind::Qwp { angle } => two(retarder(angle + offset, QUARTER_WAVE)),
            ElementKind::Phase { phi } => {
                let p = Complex64::from_polar(1.0, phi + offset);
                two([[p, ZERO], [ZERO, p]])
            }
            ElementKind::Delay | ElementKind::Mirror => two([[ONE, ZERO], [ZERO, ONE]]),
            ElementKind::Pbs => {
                // rows: out0h, out0v, out1h, out1v; cols: in0h, in0v, in1h, in1v
                let mut m = vec![vec![ZERO; 4]; 4];
                m[0][0] = ONE;
                m[3][1] = ONE;
                m[2][2] = ONE;
                m[1][3] = ONE;
                m
            }
            ElementKind::Bs { reflectivity } => {
                let big_r = (reflectivity + bs_ratio_delta).clamp(0.0, 1.0);
                let r = I * big_r.sqrt();
                let t = Complex64::new((1.0 - big_r).sqrt(), 0.0);
                let mut m = vec![vec![ZERO; 4]; 4];
                for pol in 0..2 {
                    m[pol][pol] = t;
                    m[pol][2 + pol] = r;
                    m[2 + pol][pol] = r;
                    m[2 + pol][2 + pol] = t;
                }
                m
            }
            ElementKind::Matrix { rows } => rows
                .iter()
                .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                .collect(),
        }
    }
}

/// `max |M†M − I|` of a square local map.
pub fn unitarity_defect(m: &[Vec<Amplitude>]) -> f64 {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for row in m {
                acc += row[i].conj() * row[j];
            }
            let expect = if i == j { ONE } else { ZERO };
            worst = worst.max((acc - expect).norm());
        }
    }
    worst
}

/// One component wired between named paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Element {
    pub kind: ElementKind,
    pub inputs: Vec<&'static str>,
    pub outputs: Vec<&'static str>,
}

impl Element {
    /// A one-port element acting in place on `path`.
    pub fn on(kind: ElementKind, path: &'static str) -> Self {
        Self {
            kind,
            inputs: vec![path],
            outputs: vec![path],
        }
    }

    pub fn hwp(path: &'static str, angle: f64) -> Self {
        Self::on(ElementKind::Hwp { angle }, path)
    }

    pub fn qwp(path: &'static str, angle: f64) -> Self {
        Self::on(ElementKind::Qwp { angle }, path)
    }

    pub fn phase(path: &'static str, phi: f64) -> Self {
        Self::on(ElementKind::Phase { phi }, path)
    }

    pub fn delay(path: &'static str) -> Self {
        Self::on(ElementKind::Delay, path)
    }

    pub fn mirror(from: &'static str, to: &'static str) -> Self {
        Self {
            kind: ElementKind::Mirror,
            inputs: vec![from],
            outputs: vec![to],
        }
    }

    pub fn pbs(inputs: [&'static str; 2], outputs: [&'static str; 2]) -> Self {
        Self {
            kind: ElementKind::Pbs,
            inputs: inputs.to_vec(),
            outputs: outputs.to_vec(),
        }
    }

    pub fn bs(inputs: [&'static str; 2], outputs: [&'static str; 2]) -> Self {
        Self {
            kind: ElementKind::Bs { reflectivity: 0.5 },
            inputs: inputs.to_vec(),
            outputs: outputs.to_vec(),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ElementKind::Hwp { angle } | ElementKind::Qwp { angle } => write!(
                f,
                "{}({:.1}°) on {}",
                self.kind.name(),
                angle.to_degrees(),
                self.inputs[0]
            ),
            ElementKind::Phase { phi } => write!(f, "phase({phi:.4}) on {}", self.inputs[0]),
            _ => write!(
                f,
                "{} [{}] → [{}]",
                self.kind.name(),
                self.inputs.join(", "),
                self.outputs.join(", ")
            ),
        }
    }
}

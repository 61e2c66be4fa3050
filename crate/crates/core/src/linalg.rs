//! Dense complex linear algebra over small labeled mode bases.
//!
//! Every vector and operator carries the ordered list of mode labels it is
//! expressed in, so that mixing a polarization ket with a time-bin ket, or
//! applying a 2×2 Jones matrix to a 4-dim state, is caught as an error rather
//! than silently producing garbage.
//!
//! Canonical orderings (used for serialization and golden files):
//!
//! * polarization: `h`, `v`
//! * time bin: `E` (bin 0), `L` (bin 1)
//! * time bin ⊗ polarization: `(E,h)`, `(E,v)`, `(L,h)`, `(L,v)`
//!
//! In general labels sort by `(path, timebin, polarization)` with absent slots
//! first, which reproduces the orderings above.

use std::fmt;

use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability amplitude.
pub type Amplitude = Complex64;

/// Default tolerance for "exact" comparisons.
pub const EXACT_TOL: f64 = 1e-12;

pub const ZERO: Amplitude = Complex64::new(0.0, 0.0);
pub const ONE: Amplitude = Complex64::new(1.0, 0.0);
pub const I: Amplitude = Complex64::new(0.0, 1.0);

/// `2^{-1/2}`.
pub const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `i^{+1/2} = (1+i)/√2`.
pub const SQRT_I: Amplitude = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);

/// `i^{-1/2} = (1-i)/√2`.
pub const INV_SQRT_I: Amplitude = Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);

/// Time bin of the early arrival.
pub const EARLY: u32 = 0;
/// Time bin of the late arrival (one detour later).
pub const LATE: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub const BOTH: [Pol; 2] = [Pol::H, Pol::V];

    pub fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }
}

impl fmt::Display for Pol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pol::H => "h",
            Pol::V => "v",
        })
    }
}

/// A mode label: any subset of the (path, time bin, polarization) slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeLabel {
    pub path: Option<&'static str>,
    pub timebin: Option<u32>,
    pub pol: Option<Pol>,
}

impl ModeLabel {
    pub const fn pol(pol: Pol) -> Self {
        Self {
            path: None,
            timebin: None,
            pol: Some(pol),
        }
    }

    pub const fn timebin(bin: u32) -> Self {
        Self {
            path: None,
            timebin: Some(bin),
            pol: None,
        }
    }

    pub const fn timebin_pol(bin: u32, pol: Pol) -> Self {
        Self {
            path: None,
            timebin: Some(bin),
            pol: Some(pol),
        }
    }

    pub const fn optical(path: &'static str, bin: u32, pol: Pol) -> Self {
        Self {
            path: Some(path),
            timebin: Some(bin),
            pol: Some(pol),
        }
    }

    /// Merge two labels with disjoint slots.
    pub fn merge(&self, other: &ModeLabel) -> Result<ModeLabel> {
        fn pick<T: Copy>(a: Option<T>, b: Option<T>, slot: &'static str) -> Result<Option<T>> {
            match (a, b) {
                (Some(_), Some(_)) => Err(Error::OverlappingSlots(slot)),
                (x, None) | (None, x) => Ok(x),
            }
        }
        Ok(ModeLabel {
            path: pick(self.path, other.path, "path")?,
            timebin: pick(self.timebin, other.timebin, "timebin")?,
            pol: pick(self.pol, other.pol, "polarization")?,
        })
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::with_capacity(3);
        if let Some(p) = self.path {
            parts.push(p.to_string());
        }
        if let Some(t) = self.timebin {
            parts.push(match (self.path, t) {
                (None, EARLY) => "E".to_string(),
                (None, LATE) => "L".to_string(),
                _ => format!("t{t}"),
            });
        }
        if let Some(p) = self.pol {
            parts.push(p.to_string());
        }
        write!(f, "|{}⟩", parts.join(","))
    }
}

/// Ordered list of unique mode labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeBasis {
    labels: Vec<ModeLabel>,
}

impl ModeBasis {
    pub fn new(labels: Vec<ModeLabel>) -> Result<Self> {
        let mut sorted = labels.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLabel(w[0].to_string()));
        }
        Ok(Self { labels })
    }

    /// `(h, v)`.
    pub fn polarization() -> Self {
        Self {
            labels: Pol::BOTH.iter().map(|&p| ModeLabel::pol(p)).collect(),
        }
    }

    /// `(E, L)`.
    pub fn timebin() -> Self {
        Self {
            labels: vec![ModeLabel::timebin(EARLY), ModeLabel::timebin(LATE)],
        }
    }

    /// `(E,h), (E,v), (L,h), (L,v)`.
    pub fn timebin_polarization() -> Self {
        let mut labels = Vec::with_capacity(4);
        for bin in [EARLY, LATE] {
            for pol in Pol::BOTH {
                labels.push(ModeLabel::timebin_pol(bin, pol));
            }
        }
        Self { labels }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn index_of(&self, label: &ModeLabel) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Product basis in canonical (sorted) order, plus the position of each
    /// `(i, j)` pair of factor indices.
    fn product(&self, other: &ModeBasis) -> Result<(ModeBasis, Vec<(usize, usize)>)> {
        let mut merged = Vec::with_capacity(self.dim() * other.dim());
        for (i, a) in self.labels.iter().enumerate() {
            for (j, b) in other.labels.iter().enumerate() {
                merged.push((a.merge(b)?, (i, j)));
            }
        }
        merged.sort_by(|x, y| x.0.cmp(&y.0));
        let (labels, pairs) = merged.into_iter().unzip();
        Ok((ModeBasis::new(labels)?, pairs))
    }
}

/// A ket over a labeled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: ModeBasis,
    amps: Vec<Amplitude>,
}

impl StateVector {
    pub fn new(basis: ModeBasis, amps: Vec<Amplitude>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amps.len(),
            });
        }
        Ok(Self { basis, amps })
    }

    /// All-zero vector.
    pub fn zero(basis: ModeBasis) -> Self {
        let amps = vec![ZERO; basis.dim()];
        Self { basis, amps }
    }

    pub fn basis_state(basis: ModeBasis, label: &ModeLabel) -> Result<Self> {
        let idx = basis
            .index_of(label)
            .ok_or_else(|| Error::BasisMismatch(format!("{label} not in basis")))?;
        let mut v = Self::zero(basis);
        v.amps[idx] = ONE;
        Ok(v)
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn amplitude(&self, label: &ModeLabel) -> Option<Amplitude> {
        self.basis.index_of(label).map(|i| self.amps[i])
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= EXACT_TOL
    }

    /// Errors unless `|norm² − 1| ≤ 1e-12`.
    pub fn require_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.norm_sqr()))
        }
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sqr().sqrt();
        (n > 0.0).then(|| self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: Amplitude) -> Self {
        Self {
            basis: self.basis.clone(),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, other: &StateVector) -> Result<Self> {
        same_basis(&self.basis, &other.basis)?;
        Ok(Self {
            basis: self.basis.clone(),
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &StateVector) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    /// Fix the global phase so the first non-negligible amplitude is real and
    /// positive.
    pub fn phase_fixed(&self) -> Self {
        match self.amps.iter().find(|a| a.norm() > 1e-9) {
            Some(a) => self.scale(a.conj() / a.norm()),
            None => self.clone(),
        }
    }

    /// `[[re, im], ...]` in basis order.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.amps.iter().map(|a| [a.re, a.im]).collect()
    }

    pub fn from_pairs(basis: ModeBasis, pairs: &[[f64; 2]]) -> Result<Self> {
        Self::new(basis, pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.amps.len()))?;
        for a in &self.amps {
            seq.serialize_element(&[a.re, a.im])?;
        }
        seq.end()
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (label, a) in self.basis.labels.iter().zip(&self.amps) {
            if a.norm() < 1e-15 {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i){}", a.re, a.im, label)?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

fn same_basis(a: &ModeBasis, b: &ModeBasis) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::BasisMismatch(format!(
            "{} labels vs {} labels",
            a.dim(),
            b.dim()
        )))
    }
}

/// `⟨a|b⟩`, conjugating the first argument.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<Amplitude> {
    same_basis(&a.basis, &b.basis)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`; insensitive to global phase.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    let ov = inner(a, b)?.norm_sqr();
    let n = a.norm_sqr() * b.norm_sqr();
    Ok(if n > 0.0 { ov / n } else { 0.0 })
}

/// Product state on the canonical product basis.
pub fn tensor(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let (basis, pairs) = a.basis.product(&b.basis)?;
    let amps = pairs.iter().map(|&(i, j)| a.amps[i] * b.amps[j]).collect();
    StateVector::new(basis, amps)
}

/// Orthonormal basis of the complement of `span(constraints)`.
///
/// Modified Gram–Schmidt over the constraints followed by the canonical basis
/// vectors; vectors whose residual falls below `1e-9` are dropped.
pub fn orthogonal_complement(constraints: &[StateVector]) -> Result<Vec<StateVector>> {
    let basis = match constraints.first() {
        Some(c) => c.basis.clone(),
        None => return Err(Error::InvalidArgument("no constraint vectors".into())),
    };
    let mut span: Vec<StateVector> = Vec::new();
    let extend = |v: &StateVector, span: &mut Vec<StateVector>| -> Result<bool> {
        let mut r = v.clone();
        for u in span.iter() {
            let c = inner(u, &r)?;
            r = r.sub(&u.scale(c))?;
        }
        // second pass for numerical orthogonality
        for u in span.iter() {
            let c = inner(u, &r)?;
            r = r.sub(&u.scale(c))?;
        }
        if r.norm_sqr().sqrt() > 1e-9 {
            span.push(r.normalized().expect("nonzero residual"));
            Ok(true)
        } else {
            Ok(false)
        }
    };
    for c in constraints {
        same_basis(&basis, &c.basis)?;
        extend(c, &mut span)?;
    }
    let rank = span.len();
    for label in basis.labels().to_vec() {
        extend(&StateVector::basis_state(basis.clone(), &label)?, &mut span)?;
    }
    Ok(span.split_off(rank))
}

/// A linear map between labeled bases, stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    in_basis: ModeBasis,
    out_basis: ModeBasis,
    matrix: Vec<Amplitude>,
}

impl Operator {
    pub fn new(in_basis: ModeBasis, out_basis: ModeBasis, matrix: Vec<Amplitude>) -> Result<Self> {
        let expected = in_basis.dim() * out_basis.dim();
        if matrix.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: matrix.len(),
            });
        }
        Ok(Self {
            in_basis,
            out_basis,
            matrix,
        })
    }

    /// Square operator from rows.
    pub fn from_rows<const N: usize>(basis: ModeBasis, rows: [[Amplitude; N]; N]) -> Result<Self> {
        Self::new(basis.clone(), basis, rows.iter().flatten().copied().collect())
    }

    pub fn identity(basis: ModeBasis) -> Self {
        let d = basis.dim();
        let mut m = vec![ZERO; d * d];
        for i in 0..d {
            m[i * d + i] = ONE;
        }
        Self {
            in_basis: basis.clone(),
            out_basis: basis,
            matrix: m,
        }
    }

    pub fn in_basis(&self) -> &ModeBasis {
        &self.in_basis
    }

    pub fn out_basis(&self) -> &ModeBasis {
        &self.out_basis
    }

    pub fn rows(&self) -> usize {
        self.out_basis.dim()
    }

    pub fn cols(&self) -> usize {
        self.in_basis.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> Amplitude {
        self.matrix[row * self.cols() + col]
    }

    pub fn adjoint(&self) -> Self {
        let (r, c) = (self.rows(), self.cols());
        let mut m = vec![ZERO; r * c];
        for i in 0..r {
            for j in 0..c {
                m[j * r + i] = self.get(i, j).conj();
            }
        }
        Self {
            in_basis: self.out_basis.clone(),
            out_basis: self.in_basis.clone(),
            matrix: m,
        }
    }

    /// `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        same_basis(&self.in_basis, &rhs.out_basis)?;
        let (r, k, c) = (self.rows(), self.cols(), rhs.cols());
        let mut m = vec![ZERO; r * c];
        for i in 0..r {
            for j in 0..c {
                m[i * c + j] = (0..k).map(|t| self.get(i, t) * rhs.get(t, j)).sum();
            }
        }
        Operator::new(rhs.in_basis.clone(), self.out_basis.clone(), m)
    }

    pub fn scale(&self, c: Amplitude) -> Self {
        Self {
            in_basis: self.in_basis.clone(),
            out_basis: self.out_basis.clone(),
            matrix: self.matrix.iter().map(|a| a * c).collect(),
        }
    }

    pub fn add(&self, rhs: &Operator) -> Result<Self> {
        same_basis(&self.in_basis, &rhs.in_basis)?;
        same_basis(&self.out_basis, &rhs.out_basis)?;
        Ok(Self {
            in_basis: self.in_basis.clone(),
            out_basis: self.out_basis.clone(),
            matrix: self.matrix.iter().zip(&rhs.matrix).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Self> {
        self.add(&rhs.scale(-ONE))
    }

    /// `max |self_ij − rhs_ij|`.
    pub fn max_abs_diff(&self, rhs: &Operator) -> Result<f64> {
        same_basis(&self.in_basis, &rhs.in_basis)?;
        same_basis(&self.out_basis, &rhs.out_basis)?;
        Ok(self
            .matrix
            .iter()
            .zip(&rhs.matrix)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        match self.adjoint().compose(self) {
            Ok(p) => p
                .max_abs_diff(&Operator::identity(self.in_basis.clone()))
                .unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.rows() == self.cols() && self.unitarity_defect() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.in_basis == self.out_basis
            && self
                .max_abs_diff(&self.adjoint())
                .map(|d| d <= tol)
                .unwrap_or(false)
    }

    /// Eigenvalues of a 2×2 Hermitian operator, ascending.
    pub fn eigenvalues_2x2_hermitian(&self) -> Result<[f64; 2]> {
        if self.rows() != 2 || self.cols() != 2 {
            return Err(Error::InvalidArgument("operator is not 2×2".into()));
        }
        let a = self.get(0, 0).re;
        let d = self.get(1, 1).re;
        let b = self.get(0, 1);
        let mean = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        Ok([mean - disc, mean + disc])
    }

    /// Rows of `[re, im]` pairs.
    pub fn to_rows(&self) -> Vec<Vec<[f64; 2]>> {
        (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|j| {
                        let a = self.get(i, j);
                        [a.re, a.im]
                    })
                    .collect()
            })
            .collect()
    }
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

/// Matrix–vector product.
pub fn apply(op: &Operator, v: &StateVector) -> Result<StateVector> {
    same_basis(&op.in_basis, &v.basis)?;
    let c = op.cols();
    let amps = (0..op.rows())
        .map(|i| (0..c).map(|j| op.get(i, j) * v.amps[j]).sum())
        .collect();
    StateVector::new(op.out_basis.clone(), amps)
}

/// `I_timebin ⊗ op` for a polarization operator, on the canonical
/// time-bin ⊗ polarization basis.
pub fn lift(op: &Operator) -> Result<Operator> {
    let pol = ModeBasis::polarization();
    if op.in_basis != pol || op.out_basis != pol {
        return Err(Error::BasisMismatch(
            "lift expects an operator on the polarization basis".into(),
        ));
    }
    let mut m = vec![ZERO; 16];
    for block in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                m[(2 * block + i) * 4 + 2 * block + j] = op.get(i, j);
            }
        }
    }
    Operator::new(
        ModeBasis::timebin_polarization(),
        ModeBasis::timebin_polarization(),
        m,
    )
}

fn c(re: f64, im: f64) -> Amplitude {
    Complex64::new(re, im)
}

/// `σx = |+⟩⟨+| − |−⟩⟨−|`.
pub fn sigma_x() -> Operator {
    Operator::from_rows(ModeBasis::polarization(), [[ZERO, ONE], [ONE, ZERO]]).expect("2x2")
}

/// `σy = |r⟩⟨r| − |l⟩⟨l|` with `|r⟩ = (|h⟩ + i|v⟩)/√2`.
pub fn sigma_y() -> Operator {
    Operator::from_rows(ModeBasis::polarization(), [[ZERO, c(0.0, -1.0)], [I, ZERO]]).expect("2x2")
}

/// `σz = |h⟩⟨h| − |v⟩⟨v|`.
pub fn sigma_z() -> Operator {
    Operator::from_rows(ModeBasis::polarization(), [[ONE, ZERO], [ZERO, c(-1.0, 0.0)]])
        .expect("2x2")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pol_state(h: Amplitude, v: Amplitude) -> StateVector {
        StateVector::new(ModeBasis::polarization(), vec![h, v]).unwrap()
    }

    fn ket_h() -> StateVector {
        pol_state(ONE, ZERO)
    }

    fn ket_plus() -> StateVector {
        pol_state(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0))
    }

    fn tb(e: Amplitude, l: Amplitude) -> StateVector {
        StateVector::new(ModeBasis::timebin(), vec![e, l]).unwrap()
    }

    fn init() -> StateVector {
        let s = c(FRAC_1_SQRT_2, 0.0);
        StateVector::new(ModeBasis::timebin_polarization(), vec![s, ZERO, ZERO, s]).unwrap()
    }

    #[test]
    fn canonical_product_order() {
        let labels: Vec<String> = ModeBasis::timebin_polarization()
            .labels()
            .iter()
            .map(|l| l.to_string())
            .collect();
        assert_eq!(labels, ["|E,h⟩", "|E,v⟩", "|L,h⟩", "|L,v⟩"]);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let l = ModeLabel::pol(Pol::H);
        assert!(matches!(
            ModeBasis::new(vec![l, l]),
            Err(Error::DuplicateLabel(_))
        ));
    }

    #[test]
    fn inner_with_basis_state() {
        let eh = StateVector::basis_state(
            ModeBasis::timebin_polarization(),
            &ModeLabel::timebin_pol(EARLY, Pol::H),
        )
        .unwrap();
        let ov = inner(&eh, &init()).unwrap();
        assert!((ov - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inner_conjugates_first_argument() {
        let a = pol_state(I, ZERO);
        let b = pol_state(ONE, ZERO);
        assert!((inner(&a, &b).unwrap() - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn inner_basis_mismatch() {
        assert!(matches!(
            inner(&ket_h(), &init()),
            Err(Error::BasisMismatch(_))
        ));
    }

    #[test]
    fn tensor_basis_states() {
        let e = tb(ONE, ZERO);
        let v = tensor(&e, &ket_h()).unwrap();
        assert_eq!(v.basis(), &ModeBasis::timebin_polarization());
        assert_eq!(v.amplitudes()[0], ONE);
        assert_eq!(v.norm_sqr(), 1.0);
    }

    #[test]
    fn tensor_is_order_independent() {
        let e = tb(c(0.6, 0.0), c(0.0, 0.8));
        let p = ket_plus();
        let a = tensor(&e, &p).unwrap();
        let b = tensor(&p, &e).unwrap();
        assert_eq!(a.basis(), b.basis());
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_builds_projected_plus() {
        let s = c(FRAC_1_SQRT_2, 0.0);
        let v = tensor(&tb(s, s), &ket_plus()).unwrap();
        // 2^{-1/2}(|E,+⟩ + |L,+⟩) has all amplitudes 1/2
        for a in v.amplitudes() {
            assert!((a - c(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_overlapping_slots() {
        assert!(matches!(
            tensor(&ket_h(), &ket_plus()),
            Err(Error::OverlappingSlots("polarization"))
        ));
    }

    #[test]
    fn pauli_action() {
        let out = apply(&sigma_z(), &ket_h()).unwrap();
        assert!((inner(&ket_h(), &out).unwrap() - ONE).norm() < 1e-15);
        let out = apply(&sigma_x(), &ket_plus()).unwrap();
        assert!((inner(&ket_plus(), &out).unwrap() - ONE).norm() < 1e-15);
        let r = pol_state(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2));
        let out = apply(&sigma_y(), &r).unwrap();
        assert!((inner(&r, &out).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn apply_identity_and_mismatch() {
        let v = init();
        let id = Operator::identity(ModeBasis::timebin_polarization());
        assert_eq!(apply(&id, &v).unwrap(), v);
        assert!(apply(&sigma_x(), &v).is_err());
    }

    #[test]
    fn paulis_are_hermitian_with_unit_eigenvalues() {
        for s in [sigma_x(), sigma_y(), sigma_z()] {
            assert!(s.is_hermitian(EXACT_TOL));
            assert!(s.is_unitary(EXACT_TOL));
            let ev = s.eigenvalues_2x2_hermitian().unwrap();
            assert!((ev[0] + 1.0).abs() < EXACT_TOL && (ev[1] - 1.0).abs() < EXACT_TOL);
        }
    }

    #[test]
    fn lift_identity_and_wrong_basis() {
        let id4 = lift(&Operator::identity(ModeBasis::polarization())).unwrap();
        assert_eq!(id4, Operator::identity(ModeBasis::timebin_polarization()));
        assert!(lift(&id4).is_err());
    }

    #[test]
    fn lift_hadamard_on_init() {
        let had = sigma_z().add(&sigma_x()).unwrap().scale(c(FRAC_1_SQRT_2, 0.0));
        let out = apply(&lift(&had).unwrap(), &init()).unwrap();
        // 2^{-1/2}(|E,+⟩ + |L,−⟩) = (1/2)(1, 1, 1, −1)
        let expect = [0.5, 0.5, 0.5, -0.5];
        for (a, e) in out.amplitudes().iter().zip(expect) {
            assert!((a - c(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn complement_of_single_vector() {
        let comp = orthogonal_complement(&[ket_plus()]).unwrap();
        assert_eq!(comp.len(), 1);
        assert!(inner(&ket_plus(), &comp[0]).unwrap().norm() < 1e-15);
        assert!(comp[0].is_normalized());
    }

    #[test]
    fn serialization_is_pairs() {
        let s = serde_json::to_string(&pol_state(ONE, I)).unwrap();
        assert_eq!(s, "[[1.0,0.0],[0.0,1.0]]");
    }

    fn arb_amp() -> impl Strategy<Value = Amplitude> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b))
    }

    fn arb_unitary2() -> impl Strategy<Value = Operator> {
        (0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3, 0.0f64..6.3).prop_map(|(a, b, g, d)| {
            let e = |x: f64| Complex64::from_polar(1.0, x);
            let (co, si) = (c(g.cos(), 0.0), c(g.sin(), 0.0));
            Operator::from_rows(
                ModeBasis::polarization(),
                [
                    [e(a) * co, -e(a + b) * si],
                    [e(d) * si, e(b + d) * co],
                ],
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn tensor_norm_is_multiplicative(e in arb_amp(), l in arb_amp(), h in arb_amp(), v in arb_amp()) {
            let a = tb(e, l);
            let b = pol_state(h, v);
            let t = tensor(&a, &b).unwrap();
            prop_assert!((t.norm_sqr() - a.norm_sqr() * b.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn lift_preserves_unitarity(u in arb_unitary2()) {
            prop_assert!(u.is_unitary(1e-12));
            prop_assert!(lift(&u).unwrap().is_unitary(1e-12));
        }

        #[test]
        fn self_inner_is_norm(e in arb_amp(), l in arb_amp(), h in arb_amp(), v in arb_amp()) {
            let s = StateVector::new(ModeBasis::timebin_polarization(), vec![e, l, h, v]).unwrap();
            prop_assume!(s.norm_sqr() > 1e-6);
            let n = s.normalized().unwrap();
            prop_assert!((inner(&n, &n).unwrap() - ONE).norm() < 1e-12);
        }
    }
}

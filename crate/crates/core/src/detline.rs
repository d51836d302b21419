//! Determinant lines as exact log-coefficient bookkeeping.
//!
//! An element of a determinant line is a positive multiple of a formal
//! tensor word of frames. A frame is the class of an admissible scalar
//! product on some object, named by a label; its dual carries exponent -1.
//! Two products on the same object are related by
//! `<,>_2 = Det(A)^{-1/2} <,>_1` where `<v,w>_2 = <Av,w>_1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::category::{HObject, Morphism, RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::spectral::{self, DetClassStatus, LadderConfig};

#[derive(Clone, Debug, PartialEq, Default)]
pub struct DetLineElement {
    word: BTreeMap<String, i32>,
    pub log_coeff: f64,
}

impl DetLineElement {
    /// `exp(log_coeff)` in the scalar line.
    pub fn scalar(log_coeff: f64) -> Self {
        Self { word: BTreeMap::new(), log_coeff }
    }

    /// The class of the product named `label`, coefficient 1.
    pub fn frame(label: impl Into<String>) -> Self {
        Self::frame_pow(label, 1)
    }

    pub fn frame_pow(label: impl Into<String>, exponent: i32) -> Self {
        let mut word = BTreeMap::new();
        if exponent != 0 {
            word.insert(label.into(), exponent);
        }
        Self { word, log_coeff: 0.0 }
    }

    pub fn with_log(mut self, log_coeff: f64) -> Self {
        self.log_coeff = log_coeff;
        self
    }

    pub fn word(&self) -> &BTreeMap<String, i32> {
        &self.word
    }

    pub fn exponent(&self, label: &str) -> i32 {
        self.word.get(label).copied().unwrap_or(0)
    }

    pub fn is_scalar(&self) -> bool {
        self.word.is_empty()
    }

    pub fn same_line(&self, other: &Self) -> bool {
        self.word == other.word
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut word = self.word.clone();
        for (k, e) in &other.word {
            let v = word.entry(k.clone()).or_insert(0);
            *v += e;
            if *v == 0 {
                word.remove(k);
            }
        }
        Self { word, log_coeff: self.log_coeff + other.log_coeff }
    }

    pub fn dual(&self) -> Self {
        Self { word: self.word.iter().map(|(k, e)| (k.clone(), -e)).collect(), log_coeff: -self.log_coeff }
    }

    pub fn pow(&self, k: i32) -> Self {
        Self {
            word: if k == 0 { BTreeMap::new() } else { self.word.iter().map(|(l, e)| (l.clone(), e * k)).collect() },
            log_coeff: self.log_coeff * k as f64,
        }
    }

    pub fn scaled(&self, log_factor: f64) -> Self {
        Self { log_coeff: self.log_coeff + log_factor, ..self.clone() }
    }

    /// Replaces `from` by `to` in the word (same exponent), no coefficient change.
    pub fn relabel(&self, from: &str, to: &str) -> Self {
        let e = self.exponent(from);
        let mut out = self.clone();
        out.word.remove(from);
        out.tensor(&Self::frame_pow(to, e))
    }

    /// Replaces frame `old` by frame `new` where `<,>_old = <A·,·>_new`
    /// (`log_det_a = log Det_tau(A)`): `<,>_old = Det(A)^{-1/2} <,>_new`.
    pub fn reexpress(&self, old: &str, new: &str, log_det_a: f64) -> Self {
        let e = self.exponent(old);
        self.relabel(old, new).scaled(-0.5 * e as f64 * log_det_a)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.same_line(other) && (self.log_coeff - other.log_coeff).abs() <= tol
    }
}

impl fmt::Display for DetLineElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({:.12})", self.log_coeff)?;
        if self.word.is_empty() {
            return write!(f, " (scalar line)");
        }
        for (k, e) in &self.word {
            write!(f, " [{k}]^{e}")?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct DetLineRepr {
    frame: Vec<(String, i32)>,
    log_coeff: f64,
}

impl Serialize for DetLineElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DetLineRepr { frame: self.word.iter().map(|(k, e)| (k.clone(), *e)).collect(), log_coeff: self.log_coeff }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DetLineElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = DetLineRepr::deserialize(d)?;
        let mut out = Self::scalar(r.log_coeff);
        for (k, e) in r.frame {
            out = out.tensor(&Self::frame_pow(k, e));
        }
        Ok(out)
    }
}

/// `log Det_tau(A)` with `<v,w>_old = <Av,w>_new`, i.e. `A = P_new^{-1} P_old`.
pub fn log_det_product_change(p_old: &[CMat], p_new: &[CMat], weights: &[f64]) -> f64 {
    p_old
        .iter()
        .zip(p_new)
        .zip(weights)
        .map(|((a, b), w)| w * (linalg::log_abs_det(a) - linalg::log_abs_det(b)))
        .sum()
}

fn object_products(obj: &HObject) -> Vec<CMat> {
    (0..obj.dims().len()).map(|j| obj.product_fiber(j)).collect()
}

/// The class of the object's own product, named `label`.
pub fn element_from_product(obj: &HObject, label: &str) -> DetLineElement {
    let _ = obj;
    DetLineElement::frame(label)
}

/// The class of the object's product, re-expressed in the frame of the
/// standard product (named `std_label`).
pub fn element_in_standard_frame(obj: &HObject, std_label: &str) -> DetLineElement {
    let standard: Vec<CMat> = obj.dims().iter().map(|&d| linalg::eye(d)).collect();
    let log_det = log_det_product_change(&object_products(obj), &standard, &obj.backend().fiber_weights());
    DetLineElement::frame("tmp").reexpress("tmp", std_label, log_det)
}

/// `f_*` for an isomorphism `f: M -> N`: `f_*<,>_M = sqrt(Det(f f*)) <,>_N`.
pub fn push_forward(f: &Morphism, x: &DetLineElement, source: &str, target: &str) -> Result<DetLineElement> {
    let log_det = spectral::fk_det(f)?;
    let e = x.exponent(source);
    Ok(x.relabel(source, target).scaled(e as f64 * log_det))
}

/// Canonical `det M ⊗ det N -> det(M ⊕ N)`: the sum of the two products.
pub fn direct_sum_iso(x: &DetLineElement, m: &str, y: &DetLineElement, n: &str, sum: &str) -> Result<DetLineElement> {
    if x.exponent(m) != y.exponent(n) {
        return Err(Error::FrameMismatch("direct sum of lines with different exponents".into()));
    }
    let e = x.exponent(m);
    let mut out = x.relabel(m, "__sum").tensor(&y.relabel(n, "__sum"));
    out.word.remove("__sum");
    Ok(out.tensor(&DetLineElement::frame_pow(sum, e)))
}

/// Labels for the three terms of a short exact sequence.
#[derive(Clone, Debug)]
pub struct SequenceLabels<'a> {
    pub middle: &'a str,
    pub sub: &'a str,
    pub quotient: &'a str,
}

/// Log-coefficients produced by `psi_{alpha,beta}` on the class of the
/// middle product: `psi(<,>_M) = exp(log_sub + log_quotient) <,>_{M'} ⊗ <,>_{M''}`.
#[derive(Clone, Copy, Debug)]
pub struct SequenceSplit {
    pub log_sub: f64,
    pub log_quotient: f64,
}

/// Checks exactness of `0 -> M' -> M -> M'' -> 0` and computes the
/// coefficients of the induced products relative to the declared products of
/// `M'` and `M''`.
pub fn sequence_split(alpha: &Morphism, beta: &Morphism, tol: f64) -> Result<SequenceSplit> {
    if !alpha.target().same_shape(beta.source()) {
        return Err(Error::ShapeMismatch("target(alpha) != source(beta)".into()));
    }
    let weights = alpha.backend().fiber_weights();
    let a = alpha.normalized_fibers();
    let b = beta.normalized_fibers();
    let mut log_sub = 0.0;
    let mut log_quotient = 0.0;
    for j in 0..a.len() {
        let ra = linalg::ranges(&a[j], tol);
        if ra.rank() != a[j].ncols() {
            return Err(Error::NotExact(format!("alpha is not injective on fiber {j}")));
        }
        let rb = linalg::ranges(&b[j], tol);
        if rb.rank() != b[j].nrows() {
            return Err(Error::NotExact(format!("beta is not surjective on fiber {j}")));
        }
        if a[j].ncols() + b[j].nrows() != a[j].nrows() {
            return Err(Error::NotExact(format!("dimensions do not add up on fiber {j}")));
        }
        let bnorm = rb.values.first().copied().unwrap_or(1.0);
        let gap = linalg::frobenius(&(&b[j] * &ra.image));
        if gap > 1e-8 * bnorm.max(1.0) {
            return Err(Error::NotExact(format!("ker beta != im alpha on fiber {j} (gap {gap:.3e})")));
        }
        // induced product on M': Gram alpha^H alpha in orthonormal coordinates
        log_sub += weights[j] * 2.0 * ra.values.iter().map(|s| s.ln()).sum::<f64>();
        // gamma = W (beta W)^{-1}, W = orthogonal complement of im alpha
        let bw = &b[j] * &ra.cokernel;
        log_quotient -= weights[j] * 2.0 * linalg::log_abs_det(&bw);
    }
    Ok(SequenceSplit { log_sub, log_quotient })
}

/// `psi_{alpha,beta}: det M -> det M' ⊗ det M''`, output in the declared
/// frames of `M'` and `M''`. `x` must be expressed in the frame of `M`'s product.
pub fn exact_sequence_iso(
    alpha: &Morphism,
    beta: &Morphism,
    x: &DetLineElement,
    labels: &SequenceLabels<'_>,
) -> Result<DetLineElement> {
    let split = sequence_split(alpha, beta, RANK_TOL)?;
    let e = x.exponent(labels.middle);
    if e == 0 {
        return Err(Error::FrameMismatch(format!("element does not involve frame {}", labels.middle)));
    }
    let mut out = x.relabel(labels.middle, "__psi");
    out.word.remove("__psi");
    let out = out
        .tensor(&DetLineElement::frame_pow(labels.sub, e))
        .tensor(&DetLineElement::frame_pow(labels.quotient, e));
    Ok(out.scaled(-0.5 * e as f64 * (split.log_sub + split.log_quotient)))
}

/// The canonical element `(<,>_A / <,>_{A'}) · sqrt(Det(alpha* alpha))` of
/// the determinant line of a tau-trivial torsion object `(alpha: A' -> A)`,
/// in the declared frames (`A'` taken modulo `ker alpha` with the restricted
/// product).
pub fn canonical_trivialization(
    alpha: &Morphism,
    cfg: &LadderConfig,
    target: &str,
    source: &str,
) -> Result<DetLineElement> {
    let density = spectral::singular_density(alpha, cfg.rank_tol);
    let rank_mass = density.positive_mass();
    if (alpha.target().dim_tau() - rank_mass).abs() > 1e-9 * (1.0 + rank_mass) {
        return Err(Error::NoCanonicalElement("image is not dense; not a torsion object".into()));
    }
    let positive = density.filter(|_| true);
    let v = spectral::classify(&positive, cfg);
    match v.status {
        DetClassStatus::Convergent => {
            let log = v.log_integral.expect("convergent verdict carries the integral");
            Ok(DetLineElement::frame(target)
                .tensor(&DetLineElement::frame_pow(source, -1))
                .with_log(log))
        }
        DetClassStatus::Divergent => Err(Error::NoCanonicalElement(v.note.unwrap_or_else(|| "divergent".into()))),
        DetClassStatus::Inconclusive => Err(Error::Inconclusive(v.note.unwrap_or_default())),
    }
}

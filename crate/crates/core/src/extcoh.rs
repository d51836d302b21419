//! Extended objects, chain complexes and their extended cohomology.
//!
//! Everything is computed in coordinates orthonormal for the declared
//! products ("normalized" fibers), so spectral data never depends on frames.

use std::sync::Arc;

use serde::Serialize;

use crate::category::{CategoryBackend, HObject, Morphism, RANK_TOL};
use crate::detline::DetLineElement;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::spectral::{self, DetClassStatus, DetClassVerdict, LadderConfig, SpectralDensity};

/// Relative tolerance below which Laplacian eigenvalues count as harmonic.
pub const HARMONIC_TOL: f64 = 1e-10;

/// `(alpha: A' -> A)` with `ker alpha` quotiented out.
#[derive(Clone, Debug)]
pub struct ExtendedObject {
    alpha: Morphism,
    coimage: Vec<CMat>,
    projective_dim: f64,
    density: SpectralDensity,
    verdict: DetClassVerdict,
}

pub fn extended_object(alpha: &Morphism) -> ExtendedObject {
    extended_object_with(alpha, &LadderConfig::default())
}

pub fn extended_object_with(alpha: &Morphism, cfg: &LadderConfig) -> ExtendedObject {
    extended_object_by(alpha, cfg, |f| linalg::ranges(f, cfg.rank_tol))
}

/// Rank decisions against absolute per-fiber thresholds.
pub fn extended_object_thresholds(alpha: &Morphism, cfg: &LadderConfig, thresholds: &[f64]) -> ExtendedObject {
    let mut j = 0;
    extended_object_by(alpha, cfg, |f| {
        let r = linalg::ranges_abs(f, thresholds[j]);
        j += 1;
        r
    })
}

fn extended_object_by(
    alpha: &Morphism,
    cfg: &LadderConfig,
    mut ranges: impl FnMut(&CMat) -> linalg::Ranges,
) -> ExtendedObject {
    let backend = alpha.backend().clone();
    let weights = backend.fiber_weights();
    let mut fibers = Vec::new();
    let mut coimage = Vec::new();
    let mut values = Vec::new();
    let mut projective_dim = 0.0;
    for (j, f) in alpha.normalized_fibers().iter().enumerate() {
        let r = ranges(f);
        fibers.push(f * &r.coimage);
        projective_dim += weights[j] * (f.nrows() - r.rank()) as f64;
        values.extend(r.values.iter().map(|&s| (s, weights[j])));
        coimage.push(r.coimage);
    }
    let source = HObject::sub(&backend, fibers.iter().map(|f| f.ncols()).collect());
    let target = HObject::sub(&backend, alpha.target().dims().to_vec());
    let alpha = Morphism::from_fibers(source, target, fibers).expect("restricted fibers are consistent");
    let density = SpectralDensity::from_values(values);
    let verdict = spectral::classify(&density, cfg);
    ExtendedObject { alpha, coimage, projective_dim, density, verdict }
}

impl ExtendedObject {
    /// The injective representative `A'/ker alpha -> A` in orthonormal coordinates.
    pub fn alpha(&self) -> &Morphism {
        &self.alpha
    }

    /// Orthonormal bases of `(ker alpha)^perp` in normalized `A'` coordinates.
    pub fn coimage(&self) -> &[CMat] {
        &self.coimage
    }

    /// `dim_tau(A / cl(im alpha))`.
    pub fn projective_dim(&self) -> f64 {
        self.projective_dim
    }

    /// Density of `(alpha* alpha)^{1/2}` on the torsion part.
    pub fn torsion_density(&self) -> &SpectralDensity {
        &self.density
    }

    pub fn verdict(&self) -> &DetClassVerdict {
        &self.verdict
    }

    pub fn is_projective(&self) -> bool {
        self.density.positive_mass() == 0.0
    }

    pub fn is_tau_trivial(&self) -> bool {
        self.verdict.is_convergent()
    }

    /// Zero in the extended category's determinant sense: no projective part
    /// and a tau-trivial torsion part.
    pub fn is_trivial(&self) -> bool {
        self.projective_dim.abs() <= 1e-12 && self.is_tau_trivial()
    }

    /// Frame word of `det A ⊗ (det A'/ker alpha)^*` (just `det A` when projective).
    pub fn det_line(&self, a: &str, a_prime: &str) -> DetLineElement {
        if self.is_projective() {
            DetLineElement::frame(a)
        } else {
            DetLineElement::frame(a).tensor(&DetLineElement::frame_pow(a_prime, -1))
        }
    }

    /// Log-coefficient of the canonical element of a trivial object in the
    /// frames `<,>_A / <,>_{A'}` (the product of `A'/ker alpha` restricted).
    pub fn canonical_log(&self) -> Result<f64> {
        if self.projective_dim.abs() > 1e-12 {
            return Err(Error::NoCanonicalElement(format!("projective part of dimension {}", self.projective_dim)));
        }
        match self.verdict.status {
            DetClassStatus::Convergent => Ok(self.verdict.log_integral.unwrap_or(0.0)),
            DetClassStatus::Divergent => {
                Err(Error::NoCanonicalElement(self.verdict.note.clone().unwrap_or_else(|| "divergent".into())))
            }
            DetClassStatus::Inconclusive => Err(Error::Inconclusive(self.verdict.note.clone().unwrap_or_default())),
        }
    }

    /// Collapses `x` (exponent `e` on `a`, `-e` on `a_prime`) to the scalar
    /// line through the canonical element.
    pub fn trivialize(&self, x: &DetLineElement, a: &str, a_prime: &str) -> Result<DetLineElement> {
        let e = x.exponent(a);
        if !self.is_projective() && x.exponent(a_prime) != -e {
            return Err(Error::FrameMismatch("element is not in the determinant line of the object".into()));
        }
        let log = self.canonical_log()?;
        let mut out = x.relabel(a, "__t");
        if !self.is_projective() {
            out = out.relabel(a_prime, "__t'");
        }
        Ok(strip(strip(out, "__t"), "__t'").scaled(-(e as f64) * log))
    }
}

fn strip(mut x: DetLineElement, label: &str) -> DetLineElement {
    let e = x.exponent(label);
    if e != 0 {
        x = x.tensor(&DetLineElement::frame_pow(label, -e));
    }
    x
}

/// A cochain complex `C^0 -> C^1 -> ... -> C^n`; `differential(i): C^i -> C^{i+1}`.
#[derive(Clone, Debug)]
pub struct ChainComplex {
    objects: Vec<HObject>,
    differentials: Vec<Morphism>,
    /// Per fiber, the largest norm of a differential (orthonormal coordinates).
    scales: Vec<f64>,
}

fn fiber_scales(objects: &[HObject], differentials: &[Morphism]) -> Vec<f64> {
    let mut scales = vec![0.0f64; objects[0].backend().fiber_count()];
    for d in differentials {
        for (j, f) in d.normalized_fibers().iter().enumerate() {
            scales[j] = scales[j].max(linalg::singular_values(f).first().copied().unwrap_or(0.0));
        }
    }
    scales
}

impl ChainComplex {
    pub fn new(objects: Vec<HObject>, differentials: Vec<Morphism>) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::NotAComplex("no objects".into()));
        }
        if differentials.len() + 1 != objects.len() {
            return Err(Error::NotAComplex(format!(
                "{} objects need {} differentials, got {}",
                objects.len(),
                objects.len() - 1,
                differentials.len()
            )));
        }
        for (i, d) in differentials.iter().enumerate() {
            if !d.source().same_shape(&objects[i]) || !d.target().same_shape(&objects[i + 1]) {
                return Err(Error::ShapeMismatch(format!("differential {i} does not map C^{i} -> C^{}", i + 1)));
            }
        }
        let differentials: Vec<Morphism> = differentials
            .iter()
            .enumerate()
            .map(|(i, d)| d.with_objects(objects[i].clone(), objects[i + 1].clone()))
            .collect::<Result<_>>()?;
        for i in 1..differentials.len() {
            let dd = differentials[i].compose(&differentials[i - 1])?;
            let defect: f64 = dd.fibers().iter().map(linalg::frobenius).fold(0.0, f64::max);
            let bound = 1e-10 * differentials[i].norm().max(1.0) * differentials[i - 1].norm().max(1.0);
            let scale = |m: &Morphism| m.fibers().iter().map(linalg::frobenius).fold(0.0, f64::max);
            let bound = bound.max(1e-10 * scale(&differentials[i]) * scale(&differentials[i - 1]));
            if defect > bound {
                return Err(Error::NotAComplex(format!("d^2 != 0 at degree {i} (defect {defect:.3e})")));
            }
        }
        let scales = fiber_scales(&objects, &differentials);
        Ok(Self { objects, differentials, scales })
    }

    /// Objects inferred from the differentials' sources and targets.
    pub fn from_differentials(differentials: Vec<Morphism>) -> Result<Self> {
        let Some(first) = differentials.first() else {
            return Err(Error::NotAComplex("no differentials".into()));
        };
        let mut objects = vec![first.source().clone()];
        objects.extend(differentials.iter().map(|d| d.target().clone()));
        Self::new(objects, differentials)
    }

    /// A complex concentrated in degree 0.
    pub fn single(object: HObject) -> Self {
        let scales = vec![0.0; object.backend().fiber_count()];
        Self { objects: vec![object], differentials: Vec::new(), scales }
    }

    pub fn backend(&self) -> &Arc<CategoryBackend> {
        self.objects[0].backend()
    }

    /// Number of degrees `n + 1`.
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.iter().all(HObject::is_zero)
    }

    pub fn objects(&self) -> &[HObject] {
        &self.objects
    }

    pub fn object(&self, i: usize) -> &HObject {
        &self.objects[i]
    }

    pub fn differentials(&self) -> &[Morphism] {
        &self.differentials
    }

    pub fn differential(&self, i: usize) -> &Morphism {
        &self.differentials[i]
    }

    pub fn dims(&self, i: isize) -> Vec<usize> {
        if i < 0 || i as usize >= self.len() {
            vec![0; self.backend().fiber_count()]
        } else {
            self.objects[i as usize].dims().to_vec()
        }
    }

    /// Normalized fibers of `C^i -> C^{i+1}`, with zero maps outside the range.
    pub fn d_fibers(&self, i: isize) -> Vec<CMat> {
        if i >= 0 && (i as usize) < self.differentials.len() {
            return self.differentials[i as usize].normalized_fibers();
        }
        let s = self.dims(i);
        let t = self.dims(i + 1);
        s.iter().zip(&t).map(|(&s, &t)| linalg::zeros(t, s)).collect()
    }

    /// Per-fiber absolute threshold below which singular values of the
    /// differentials count as zero: `rel_tol` times the fiber's largest
    /// differential norm.
    pub fn thresholds(&self, rel_tol: f64) -> Vec<f64> {
        self.scales.iter().map(|s| rel_tol * s).collect()
    }

    /// Singular value splits of `d_i` against [`Self::thresholds`].
    pub fn d_ranges(&self, i: isize, rel_tol: f64) -> Vec<linalg::Ranges> {
        let t = self.thresholds(rel_tol);
        self.d_fibers(i).iter().zip(&t).map(|(f, &t)| linalg::ranges_abs(f, t)).collect()
    }

    /// `Delta_i = d_i* d_i + d_{i-1} d_{i-1}*` in orthonormal coordinates.
    pub fn laplacian_fibers(&self, i: usize) -> Vec<CMat> {
        let up = self.d_fibers(i as isize);
        let down = self.d_fibers(i as isize - 1);
        up.iter().zip(&down).map(|(u, d)| linalg::hermitian_part(&(u.adjoint() * u + d * d.adjoint()))).collect()
    }

    pub fn laplacian(&self, i: usize) -> Morphism {
        let obj = HObject::sub(self.backend(), self.objects[i].dims().to_vec());
        Morphism::from_fibers(obj.clone(), obj, self.laplacian_fibers(i)).expect("laplacian shape")
    }

    /// Orthonormal bases of `ker Delta_i = ker d_i ∩ ker d_{i-1}*` (harmonic
    /// forms), fiberwise. Computed from the stacked operator
    /// `[d_i; d_{i-1}*]`, whose squared singular values are the eigenvalues
    /// of `Delta_i`, so small spectra do not underflow.
    pub fn harmonic_basis(&self, i: usize) -> Vec<CMat> {
        let up = self.d_fibers(i as isize);
        let down = self.d_fibers(i as isize - 1);
        let t = self.thresholds(HARMONIC_TOL);
        up.iter()
            .zip(&down)
            .zip(&t)
            .map(|((u, d), &t)| linalg::ranges_abs(&linalg::vstack(u, &d.adjoint()), t).kernel)
            .collect()
    }

    /// The same complex with standard products (normalized coordinates).
    pub fn standard(&self) -> Self {
        let objects: Vec<HObject> = self.objects.iter().map(|o| HObject::sub(self.backend(), o.dims().to_vec())).collect();
        let differentials = (0..self.differentials.len())
            .map(|i| {
                Morphism::from_fibers(objects[i].clone(), objects[i + 1].clone(), self.d_fibers(i as isize))
                    .expect("normalized shapes")
            })
            .collect();
        Self { objects, differentials, scales: self.scales.clone() }
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        let n = self.len().max(other.len());
        let pad = |c: &Self, i: usize| {
            if i < c.len() {
                c.objects[i].clone()
            } else {
                HObject::sub(c.backend(), vec![0; c.backend().fiber_count()])
            }
        };
        let objects: Vec<HObject> = (0..n).map(|i| pad(self, i).direct_sum(&pad(other, i))).collect::<Result<_>>()?;
        let diff = |c: &Self, i: usize| {
            if i < c.differentials.len() {
                c.differentials[i].clone()
            } else {
                Morphism::zero(&pad(c, i), &pad(c, i + 1))
            }
        };
        let differentials = (0..n - 1).map(|i| diff(self, i).direct_sum(&diff(other, i))).collect::<Result<_>>()?;
        Self::new(objects, differentials)
    }

    /// `sum (-1)^i dim_tau C^i`.
    pub fn euler_characteristic(&self) -> f64 {
        self.objects.iter().enumerate().map(|(i, o)| if i % 2 == 0 { o.dim_tau() } else { -o.dim_tau() }).sum()
    }

    /// `H^i = (d_{i-1}: C^{i-1} -> ker d_i)` as an extended object.
    pub fn cohomology_object(&self, i: usize, cfg: &LadderConfig) -> ExtendedObject {
        let backend = self.backend();
        let d_in = self.d_fibers(i as isize - 1);
        let d_out = self.d_fibers(i as isize);
        let t = self.thresholds(cfg.rank_tol);
        let fibers: Vec<CMat> = d_in
            .iter()
            .zip(&d_out)
            .zip(&t)
            .map(|((a, b), &t)| {
                let k = linalg::ranges_abs(b, t).kernel;
                k.adjoint() * a
            })
            .collect();
        let source = HObject::sub(backend, self.dims(i as isize - 1));
        let target = HObject::sub(backend, fibers.iter().map(|f| f.nrows()).collect());
        let alpha = Morphism::from_fibers(source, target, fibers).expect("cohomology shapes");
        extended_object_thresholds(&alpha, cfg, &t)
    }
}

/// Per-degree extended cohomology data.
#[derive(Clone, Debug, Serialize)]
pub struct DegreeCohomology {
    pub degree: usize,
    /// `dim_tau ker Delta_i`.
    pub betti: f64,
    /// `dim_tau ker d_i - dim_tau cl(im d_{i-1})`.
    pub betti_alt: f64,
    pub tau_trivial: bool,
    pub ns_exponent: Option<f64>,
    pub verdict: DetClassVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_csv_ref: Option<String>,
    #[serde(skip)]
    pub torsion_density: SpectralDensity,
}

#[derive(Clone, Debug, Serialize)]
pub struct CohomologyProfile {
    pub degrees: Vec<DegreeCohomology>,
}

impl CohomologyProfile {
    pub fn betti(&self) -> Vec<f64> {
        self.degrees.iter().map(|d| d.betti).collect()
    }

    pub fn is_determinant_class(&self) -> bool {
        self.degrees.iter().all(|d| d.verdict.is_convergent())
    }

    pub fn reduced_vanishes(&self, tol: f64) -> bool {
        self.degrees.iter().all(|d| d.betti.abs() <= tol)
    }
}

pub fn cohomology(c: &ChainComplex) -> CohomologyProfile {
    cohomology_with(c, &LadderConfig::default())
}

pub fn cohomology_with(c: &ChainComplex, cfg: &LadderConfig) -> CohomologyProfile {
    let weights = c.backend().fiber_weights();
    let degrees = (0..c.len())
        .map(|i| {
            let harmonic = c.harmonic_basis(i);
            let betti = harmonic.iter().zip(&weights).map(|(h, w)| w * h.ncols() as f64).sum();
            let h = c.cohomology_object(i, cfg);
            DegreeCohomology {
                degree: i,
                betti,
                betti_alt: h.projective_dim(),
                tau_trivial: h.is_tau_trivial(),
                ns_exponent: h.verdict().ns_exponent,
                verdict: h.verdict().clone(),
                density_csv_ref: None,
                torsion_density: h.torsion_density().clone(),
            }
        })
        .collect();
    CohomologyProfile { degrees }
}

/// Verdict per degree for the torsion part of `H^i`.
pub fn determinant_class_test(c: &ChainComplex) -> Vec<DetClassVerdict> {
    determinant_class_test_with(c, &LadderConfig::default())
}

pub fn determinant_class_test_with(c: &ChainComplex, cfg: &LadderConfig) -> Vec<DetClassVerdict> {
    (0..c.len()).map(|i| c.cohomology_object(i, cfg).verdict().clone()).collect()
}

/// A morphism of extended objects `X = (alpha: A' -> A) -> Y = (beta: B' -> B)`
/// given by `f: A -> B`, `f': A' -> B'` with `beta f' = f alpha`.
/// `alpha` and `beta` must be injective.
#[derive(Clone, Debug)]
pub struct ExtendedMorphism {
    pub alpha: Morphism,
    pub beta: Morphism,
    pub f: Morphism,
    pub f_prime: Morphism,
}

/// Frame labels of `A, A', B, B'`.
#[derive(Clone, Copy, Debug)]
pub struct SquareLabels<'a> {
    pub a: &'a str,
    pub a_prime: &'a str,
    pub b: &'a str,
    pub b_prime: &'a str,
}

struct SquareFibers {
    weights: Vec<f64>,
    /// `(f', alpha): A' -> B' ⊕ A`.
    iota: Vec<CMat>,
    /// `(beta, -f): B' ⊕ A -> B`.
    pi: Vec<CMat>,
}

impl ExtendedMorphism {
    pub fn new(alpha: Morphism, beta: Morphism, f: Morphism, f_prime: Morphism) -> Result<Self> {
        if !f.source().same_shape(alpha.target())
            || !f.target().same_shape(beta.target())
            || !f_prime.source().same_shape(alpha.source())
            || !f_prime.target().same_shape(beta.source())
        {
            return Err(Error::ShapeMismatch("square f, f' does not fit alpha, beta".into()));
        }
        let lhs = beta.compose(&f_prime)?;
        let rhs = f.compose(&alpha)?;
        let defect = lhs.sub(&rhs)?.norm();
        if defect > 1e-9 * (1.0 + lhs.norm() + rhs.norm()) {
            return Err(Error::NotAChainMap(format!("beta f' != f alpha (defect {defect:.3e})")));
        }
        for (name, m) in [("alpha", &alpha), ("beta", &beta)] {
            for (j, fib) in m.normalized_fibers().iter().enumerate() {
                if linalg::ranges(fib, RANK_TOL).rank() != fib.ncols() {
                    return Err(Error::NotInjective(format!("{name} has a kernel on fiber {j}")));
                }
            }
        }
        Ok(Self { alpha, beta, f, f_prime })
    }

    fn fibers(&self) -> SquareFibers {
        let a = self.alpha.normalized_fibers();
        let b = self.beta.normalized_fibers();
        let f = self.f.normalized_fibers();
        let fp = self.f_prime.normalized_fibers();
        let iota = fp.iter().zip(&a).map(|(fp, a)| linalg::vstack(fp, a)).collect();
        let pi = b.iter().zip(&f).map(|(b, f)| linalg::hstack(b, &(-f))).collect();
        SquareFibers { weights: self.alpha.backend().fiber_weights(), iota, pi }
    }

    /// `[f]_*: det X -> det Y`. `x` carries exponent `e` on `A` and `-e` on `A'`.
    ///
    /// The complement `W` of `im(f', alpha)` in `B' ⊕ A` is carried onto `B`
    /// by `T = (beta, -f)|_W`; the resulting coefficient is
    /// `sum ln sigma(T) - sum ln sigma(f', alpha)`, the second term converting
    /// the declared product of `A'` to the one induced through `(f', alpha)`.
    pub fn push_forward(&self, x: &DetLineElement, labels: SquareLabels<'_>) -> Result<DetLineElement> {
        let e = x.exponent(labels.a);
        let ep = x.exponent(labels.a_prime);
        if ep != -e && !(ep == 0 && self.alpha.source().is_zero()) {
            return Err(Error::FrameMismatch("element is not of the form <,>_A / <,>_A'".into()));
        }
        let sq = self.fibers();
        let mut log = 0.0;
        for j in 0..sq.weights.len() {
            let ri = linalg::ranges(&sq.iota[j], RANK_TOL);
            let w = &ri.cokernel;
            let t = &sq.pi[j] * w;
            if t.nrows() != t.ncols() {
                return Err(Error::NotAnIsomorphism(format!("cone is not exact on fiber {j}")));
            }
            let rt = linalg::ranges(&t, RANK_TOL);
            if rt.rank() != t.ncols() {
                return Err(Error::NotAnIsomorphism(format!("cone is not exact on fiber {j}")));
            }
            let s_t: f64 = rt.values.iter().map(|s| s.ln()).sum();
            let s_i: f64 = ri.values.iter().map(|s| s.ln()).sum();
            log += sq.weights[j] * (s_t - s_i);
        }
        Ok(x.relabel(labels.a, labels.b).relabel(labels.a_prime, labels.b_prime).scaled(e as f64 * log))
    }

    /// `ker[f] = ((f', alpha): A' -> P)` and `coker[f] = ((beta, -f): B' ⊕ A -> B)`
    /// with `P = ker(beta, -f)`, and the image of `x ∈ det Y ⊗ (det X)^*` in
    /// `det coker ⊗ (det ker)^*`.
    ///
    /// `det(B' ⊕ A)` is split orthogonally as `det P ⊗ det P^perp`, so in the
    /// restricted frames (labels `ker` for `P`, `coker_prime` for `P^perp`)
    /// the coefficient is unchanged.
    pub fn kernel_cokernel_lines(
        &self,
        x: &DetLineElement,
        labels: SquareLabels<'_>,
        ker: &str,
        coker_prime: &str,
        cfg: &LadderConfig,
    ) -> Result<KerCokerLines> {
        let e = x.exponent(labels.b);
        for (l, want) in [(labels.b_prime, -e), (labels.a, -e), (labels.a_prime, e)] {
            if x.exponent(l) != want {
                return Err(Error::FrameMismatch(format!("exponent of {l} must be {want}")));
            }
        }
        let sq = self.fibers();
        let backend = self.alpha.backend();
        let mut ker_fibers = Vec::new();
        let mut p_bases = Vec::new();
        for j in 0..sq.weights.len() {
            let p = linalg::ranges(&sq.pi[j], RANK_TOL).kernel;
            ker_fibers.push(p.adjoint() * &sq.iota[j]);
            p_bases.push(p);
        }
        let ker_obj = {
            let source = HObject::sub(backend, self.alpha.source().dims().to_vec());
            let target = HObject::sub(backend, p_bases.iter().map(|p| p.ncols()).collect());
            extended_object_with(&Morphism::from_fibers(source, target, ker_fibers)?, cfg)
        };
        let coker_obj = {
            let source = HObject::sub(backend, sq.pi.iter().map(|p| p.ncols()).collect());
            let target = HObject::sub(backend, self.beta.target().dims().to_vec());
            extended_object_with(&Morphism::from_fibers(source, target, sq.pi.clone())?, cfg)
        };
        let element = strip(strip(x.clone(), labels.b_prime), labels.a)
            .tensor(&DetLineElement::frame_pow(coker_prime, -e))
            .tensor(&DetLineElement::frame_pow(ker, -e));
        Ok(KerCokerLines { element, kernel: ker_obj, cokernel: coker_obj, kernel_frames: p_bases })
    }
}

#[derive(Clone, Debug)]
pub struct KerCokerLines {
    /// Word in `B`, `coker_prime` (cokernel line) and `ker`, `A'` (kernel line).
    pub element: DetLineElement,
    pub kernel: ExtendedObject,
    pub cokernel: ExtendedObject,
    /// Orthonormal bases of `P = ker(beta, -f)` in normalized `B' ⊕ A` coordinates.
    pub kernel_frames: Vec<CMat>,
}

impl KerCokerLines {
    /// Collapses the lines of trivial kernel/cokernel objects to scalars.
    pub fn collapse(&self, labels: SquareLabels<'_>, ker: &str, coker_prime: &str) -> Result<DetLineElement> {
        let mut out = self.element.clone();
        if self.cokernel.is_trivial() {
            out = self.cokernel.trivialize(&out, labels.b, coker_prime)?;
        }
        if self.kernel.is_trivial() {
            out = self.kernel.trivialize(&out, ker, labels.a_prime)?;
        }
        Ok(out)
    }
}

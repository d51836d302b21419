//! Finite cell complexes with a fundamental-group action on chosen cell lifts,
//! their cochain complexes with coefficients in a representation, and the
//! combinatorial torsion.
//!
//! Boundary entries live in the integral group ring of `pi`. Cochains follow
//! the left-module convention: if `∂e' = Σ a_{e',e} e` then the block of
//! `d` from the copy of `M` at `e` to the copy at `e'` is `rho(a_{e',e})`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::category::{CategoryBackend, GroupTable, HObject, Morphism, Sample};
use crate::detline::DetLineElement;
use crate::error::{Error, Result};
use crate::extcoh::ChainComplex;
use crate::linalg::{self, c, CMat, C64};
use crate::random;
use crate::spectral;
use crate::torsion::{self, TorsionOptions, TorsionReport};

/// The fundamental group: a finite group given by its Cayley table, or a
/// free abelian group `Z^n` (`n = 1` is the infinite cyclic group).
#[derive(Clone, Debug, PartialEq)]
pub enum PiSpec {
    Finite(GroupTable),
    FreeAbelian(usize),
}

/// Group element: `[index]` for finite groups, the exponent vector otherwise.
pub type GroupElem = Vec<i64>;

impl PiSpec {
    pub fn infinite_cyclic() -> Self {
        PiSpec::FreeAbelian(1)
    }

    pub fn identity(&self) -> GroupElem {
        match self {
            PiSpec::Finite(_) => vec![0],
            PiSpec::FreeAbelian(n) => vec![0; *n],
        }
    }

    pub fn mul(&self, a: &GroupElem, b: &GroupElem) -> GroupElem {
        match self {
            PiSpec::Finite(g) => vec![g.mul(a[0] as usize, b[0] as usize) as i64],
            PiSpec::FreeAbelian(_) => a.iter().zip(b).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn inv(&self, a: &GroupElem) -> GroupElem {
        match self {
            PiSpec::Finite(g) => vec![g.inv(a[0] as usize) as i64],
            PiSpec::FreeAbelian(_) => a.iter().map(|x| -x).collect(),
        }
    }

    /// `t` for the infinite cyclic group, `t1..tn` for `Z^n`, `g0..g{n-1}`
    /// for finite groups (also accepted: bare indices, `1` and `e`).
    pub fn parse_token(&self, token: &str) -> Result<GroupElem> {
        let tok = token.trim();
        if tok == "1" || tok == "e" {
            return Ok(self.identity());
        }
        match self {
            PiSpec::Finite(g) => {
                let digits = tok.strip_prefix('g').unwrap_or(tok);
                let k: usize = digits.parse().map_err(|_| Error::Parse(format!("bad group element `{token}`")))?;
                if k >= g.order() {
                    return Err(Error::Parse(format!("group element `{token}` out of range for order {}", g.order())));
                }
                Ok(vec![k as i64])
            }
            PiSpec::FreeAbelian(n) => {
                let mut e = vec![0i64; *n];
                for factor in tok.split(|ch: char| ch == '*' || ch.is_whitespace()).filter(|f| !f.is_empty()) {
                    let (base, pow) = match factor.split_once('^') {
                        Some((b, p)) => {
                            (b, p.parse::<i64>().map_err(|_| Error::Parse(format!("bad exponent in `{token}`")))?)
                        }
                        None => (factor, 1),
                    };
                    let idx = match base.strip_prefix('t') {
                        Some("") if *n == 1 => 0,
                        Some(k) => {
                            let k: usize = k.parse().map_err(|_| Error::Parse(format!("bad generator in `{token}`")))?;
                            if k == 0 || k > *n {
                                return Err(Error::Parse(format!("generator t{k} out of range in `{token}`")));
                            }
                            k - 1
                        }
                        None => return Err(Error::Parse(format!("bad group element `{token}`"))),
                    };
                    e[idx] += pow;
                }
                Ok(e)
            }
        }
    }

    pub fn format(&self, a: &GroupElem) -> String {
        match self {
            PiSpec::Finite(_) => format!("g{}", a[0]),
            PiSpec::FreeAbelian(n) => {
                let parts: Vec<String> = a
                    .iter()
                    .enumerate()
                    .filter(|(_, &k)| k != 0)
                    .map(|(i, &k)| {
                        let base = if *n == 1 { "t".to_string() } else { format!("t{}", i + 1) };
                        if k == 1 {
                            base
                        } else {
                            format!("{base}^{k}")
                        }
                    })
                    .collect();
                if parts.is_empty() {
                    "1".into()
                } else {
                    parts.join("*")
                }
            }
        }
    }

    /// Generators whose images determine a representation.
    pub fn generators(&self) -> Vec<GroupElem> {
        match self {
            PiSpec::Finite(g) => (0..g.order() as i64).map(|k| vec![k]).collect(),
            PiSpec::FreeAbelian(n) => (0..*n)
                .map(|i| {
                    let mut e = vec![0; *n];
                    e[i] = 1;
                    e
                })
                .collect(),
        }
    }
}

/// Element of the integral group ring `Z[pi]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupRingElement(BTreeMap<GroupElem, i64>);

impl GroupRingElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(g: GroupElem, coeff: i64) -> Self {
        let mut x = Self::zero();
        x.add_term(g, coeff);
        x
    }

    pub fn add_term(&mut self, g: GroupElem, coeff: i64) {
        let v = self.0.entry(g.clone()).or_insert(0);
        *v += coeff;
        if *v == 0 {
            self.0.remove(&g);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&GroupElem, i64)> {
        self.0.iter().map(|(g, &k)| (g, k))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (g, k) in other.terms() {
            out.add_term(g.clone(), k);
        }
        out
    }

    pub fn mul(&self, other: &Self, pi: &PiSpec) -> Self {
        let mut out = Self::zero();
        for (a, x) in self.terms() {
            for (b, y) in other.terms() {
                out.add_term(pi.mul(a, b), x * y);
            }
        }
        out
    }

    /// `x g` (right multiplication by a group element).
    pub fn mul_right(&self, g: &GroupElem, pi: &PiSpec) -> Self {
        self.mul(&Self::monomial(g.clone(), 1), pi)
    }

    pub fn mul_left(&self, g: &GroupElem, pi: &PiSpec) -> Self {
        Self::monomial(g.clone(), 1).mul(self, pi)
    }

    pub fn augmentation(&self) -> i64 {
        self.0.values().sum()
    }
}

/// A finite CW complex with boundary matrices over `Z[pi]` in chosen lifts.
#[derive(Clone, Debug, PartialEq)]
pub struct CellComplex {
    pi: PiSpec,
    cells: Vec<Vec<String>>,
    /// `boundaries[q][a][b]`: coefficient of `(q-1)`-cell `b` in `∂` of `q`-cell `a`
    /// (entry `0` is empty).
    boundaries: Vec<Vec<Vec<GroupRingElement>>>,
    chi: i64,
}

impl CellComplex {
    /// Builds and validates a complex: unique ids, `∂∂ = 0` exactly in the
    /// group ring, and `chi` equal to the alternating cell count.
    pub fn new(pi: PiSpec, cells: Vec<Vec<String>>, boundaries: Vec<Vec<Vec<GroupRingElement>>>, chi: i64) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidComplex("no cells".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in cells.iter().flatten() {
            if !seen.insert(id) {
                return Err(Error::InvalidComplex(format!("duplicate cell id `{id}`")));
            }
        }
        if boundaries.len() != cells.len() {
            return Err(Error::InvalidComplex("one boundary matrix per dimension expected".into()));
        }
        for q in 1..cells.len() {
            if boundaries[q].len() != cells[q].len() || boundaries[q].iter().any(|r| r.len() != cells[q - 1].len()) {
                return Err(Error::InvalidComplex(format!("boundary matrix in dimension {q} has the wrong shape")));
            }
        }
        let k = Self { pi, cells, boundaries, chi };
        let counted = k.alternating_count();
        if counted != chi {
            return Err(Error::InvalidComplex(format!("chi = {chi} but the alternating cell count is {counted}")));
        }
        k.check_boundary_squares_zero()?;
        Ok(k)
    }

    /// Convenience constructor from `(cell, [(token, coeff)])` boundary lists.
    pub fn from_lists(pi: PiSpec, cells: &[(usize, &str)], boundaries: &[(&str, Vec<(&str, Vec<(&str, i64)>)>)]) -> Result<Self> {
        let raw = RawComplex {
            cells: cells.iter().map(|&(d, id)| (d, id.to_string())).collect(),
            boundaries: boundaries
                .iter()
                .map(|(id, terms)| {
                    let t = terms
                        .iter()
                        .map(|(cell, coeffs)| (cell.to_string(), coeffs.iter().map(|&(g, k)| (g.to_string(), k)).collect()))
                        .collect();
                    (id.to_string(), t)
                })
                .collect(),
            pi: RawPi::from_spec(&pi),
            chi: None,
        };
        Self::from_raw(raw)
    }

    fn alternating_count(&self) -> i64 {
        self.cells.iter().enumerate().map(|(q, c)| if q % 2 == 0 { c.len() as i64 } else { -(c.len() as i64) }).sum()
    }

    fn check_boundary_squares_zero(&self) -> Result<()> {
        for q in 2..self.cells.len() {
            for (a, row) in self.boundaries[q].iter().enumerate() {
                for b in 0..self.cells[q - 2].len() {
                    let mut s = GroupRingElement::zero();
                    for (m, x) in row.iter().enumerate() {
                        s = s.add(&x.mul(&self.boundaries[q - 1][m][b], &self.pi));
                    }
                    if !s.is_zero() {
                        return Err(Error::InvalidComplex(format!(
                            "∂∂ of `{}` has a nonzero coefficient on `{}`",
                            self.cells[q][a],
                            self.cells[q - 2][b]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn pi(&self) -> &PiSpec {
        &self.pi
    }

    pub fn dimension(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn cells(&self, q: usize) -> &[String] {
        self.cells.get(q).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn cell_counts(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.len()).collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.chi
    }

    /// Dimension and position of a cell.
    pub fn locate(&self, id: &str) -> Option<(usize, usize)> {
        self.cells.iter().enumerate().find_map(|(q, ids)| ids.iter().position(|x| x == id).map(|k| (q, k)))
    }

    /// Coefficient of `(q-1)`-cell `b` in `∂` of `q`-cell `a`.
    pub fn boundary_entry(&self, q: usize, a: usize, b: usize) -> &GroupRingElement {
        &self.boundaries[q][a][b]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("serializable") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawComplex = serde_json::from_str(s).map_err(|e| Error::Parse(format!("cell complex: {e}")))?;
        Self::from_raw(raw)
    }

    fn to_raw(&self) -> RawComplex {
        let cells = self.cells.iter().enumerate().flat_map(|(q, ids)| ids.iter().map(move |id| (q, id.clone()))).collect();
        let mut boundaries = BTreeMap::new();
        for q in 1..self.cells.len() {
            for (a, id) in self.cells[q].iter().enumerate() {
                let terms: Vec<(String, Vec<(String, i64)>)> = self.boundaries[q][a]
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| !x.is_zero())
                    .map(|(b, x)| (self.cells[q - 1][b].clone(), x.terms().map(|(g, k)| (self.pi.format(g), k)).collect()))
                    .collect();
                boundaries.insert(id.clone(), terms);
            }
        }
        RawComplex { cells, boundaries, pi: RawPi::from_spec(&self.pi), chi: Some(self.chi) }
    }

    fn from_raw(raw: RawComplex) -> Result<Self> {
        let pi = raw.pi.to_spec()?;
        let top = raw.cells.iter().map(|(d, _)| *d).max().ok_or_else(|| Error::InvalidComplex("no cells".into()))?;
        let mut cells = vec![Vec::new(); top + 1];
        for (d, id) in &raw.cells {
            cells[*d].push(id.clone());
        }
        let index: BTreeMap<&str, (usize, usize)> = cells
            .iter()
            .enumerate()
            .flat_map(|(q, ids)| ids.iter().enumerate().map(move |(k, id)| (id.as_str(), (q, k))))
            .collect();
        let mut boundaries: Vec<Vec<Vec<GroupRingElement>>> = (0..=top)
            .map(|q| if q == 0 { Vec::new() } else { vec![vec![GroupRingElement::zero(); cells[q - 1].len()]; cells[q].len()] })
            .collect();
        for (id, terms) in &raw.boundaries {
            let &(q, a) = index.get(id.as_str()).ok_or_else(|| Error::InvalidComplex(format!("boundary of unknown cell `{id}`")))?;
            for (face, coeffs) in terms {
                let &(qf, b) =
                    index.get(face.as_str()).ok_or_else(|| Error::InvalidComplex(format!("unknown face `{face}` of `{id}`")))?;
                if q == 0 || qf + 1 != q {
                    return Err(Error::InvalidComplex(format!("`{face}` cannot be a face of `{id}`")));
                }
                for (tok, k) in coeffs {
                    boundaries[q][a][b].add_term(pi.parse_token(tok)?, *k);
                }
            }
        }
        let counted: i64 = cells.iter().enumerate().map(|(q, c)| if q % 2 == 0 { c.len() as i64 } else { -(c.len() as i64) }).sum();
        Self::new(pi, cells, boundaries, raw.chi.unwrap_or(counted))
    }
}

impl fmt::Display for CellComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cell complex with cells {:?}, chi = {}", self.cell_counts(), self.chi)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComplex {
    cells: Vec<(usize, String)>,
    boundaries: BTreeMap<String, Vec<(String, Vec<(String, i64)>)>>,
    pi: RawPi,
    #[serde(default)]
    chi: Option<i64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawPi {
    Finite(Vec<Vec<usize>>),
    InfiniteCyclic(bool),
    FreeAbelian(usize),
}

impl RawPi {
    fn from_spec(pi: &PiSpec) -> Self {
        match pi {
            PiSpec::Finite(g) => RawPi::Finite(g.rows().to_vec()),
            PiSpec::FreeAbelian(1) => RawPi::InfiniteCyclic(true),
            PiSpec::FreeAbelian(n) => RawPi::FreeAbelian(*n),
        }
    }

    fn to_spec(&self) -> Result<PiSpec> {
        match self {
            RawPi::Finite(t) => Ok(PiSpec::Finite(GroupTable::new(t.clone())?)),
            RawPi::InfiniteCyclic(true) => Ok(PiSpec::FreeAbelian(1)),
            RawPi::InfiniteCyclic(false) => Err(Error::Parse("`infinite_cyclic` must be true".into())),
            RawPi::FreeAbelian(0) => Err(Error::Parse("free abelian rank must be positive".into())),
            RawPi::FreeAbelian(n) => Ok(PiSpec::FreeAbelian(*n)),
        }
    }
}

/// A unitary-style action of `pi` on a free object `M` by backend morphisms.
#[derive(Clone, Debug)]
pub struct Representation {
    pi: PiSpec,
    object: HObject,
    /// Images of `pi.generators()`, fiberwise.
    images: Vec<Vec<CMat>>,
    inverses: Vec<Vec<CMat>>,
    unimodular: bool,
    raw: Option<RawRep>,
}

const RELATION_TOL: f64 = 1e-10;
const UNIMODULAR_TOL: f64 = 1e-8;

impl Representation {
    /// Validates invertibility and the group relations (Cayley table, or
    /// commuting generators for `Z^n`) and records unimodularity.
    pub fn new(pi: PiSpec, object: HObject, images: Vec<Morphism>) -> Result<Self> {
        let gens = pi.generators();
        if images.len() != gens.len() {
            return Err(Error::GroupMismatch(format!("{} images for {} generators", images.len(), gens.len())));
        }
        let mut fibers = Vec::new();
        let mut inverses = Vec::new();
        let mut unimodular = true;
        for (g, m) in gens.iter().zip(&images) {
            if !m.source().same_shape(&object) || !m.target().same_shape(&object) {
                return Err(Error::ShapeMismatch(format!("image of {} is not an endomorphism of M", pi.format(g))));
            }
            let inv = m
                .fibers()
                .iter()
                .map(|f| f.clone().try_inverse())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::NotInvertible(format!("image of {}", pi.format(g))))?;
            let m = m.with_objects(object.clone(), object.clone())?;
            let log_det = spectral::fk_det(&m)?;
            unimodular &= log_det.abs() < UNIMODULAR_TOL;
            fibers.push(m.fibers().to_vec());
            inverses.push(inv);
        }
        let rep = Self { pi, object, images: fibers, inverses, unimodular, raw: None };
        rep.check_relations()?;
        Ok(rep)
    }

    fn check_relations(&self) -> Result<()> {
        let close = |a: &[CMat], b: &[CMat]| {
            a.iter().zip(b).all(|(x, y)| linalg::frobenius(&(x - y)) <= RELATION_TOL * (1.0 + linalg::frobenius(y)))
        };
        let mul = |a: &[CMat], b: &[CMat]| a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<CMat>>();
        match &self.pi {
            PiSpec::Finite(g) => {
                let id: Vec<CMat> = self.object.dims().iter().map(|&d| linalg::eye(d)).collect();
                if !close(&self.images[0], &id) {
                    return Err(Error::GroupMismatch("the identity element does not act trivially".into()));
                }
                for a in 0..g.order() {
                    for b in 0..g.order() {
                        if !close(&mul(&self.images[a], &self.images[b]), &self.images[g.mul(a, b)]) {
                            return Err(Error::GroupMismatch(format!("rho(g{a}) rho(g{b}) != rho(g{})", g.mul(a, b))));
                        }
                    }
                }
            }
            PiSpec::FreeAbelian(n) => {
                for a in 0..*n {
                    for b in a + 1..*n {
                        if !close(&mul(&self.images[a], &self.images[b]), &mul(&self.images[b], &self.images[a])) {
                            return Err(Error::GroupMismatch(format!("images of t{} and t{} do not commute", a + 1, b + 1)));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `t -> lambda` on the one-dimensional Matrix module.
    pub fn circle_character(lambda: C64) -> Result<Self> {
        Self::characters(PiSpec::infinite_cyclic(), &[lambda])
    }

    /// `t1 -> l1, t2 -> l2` for `Z^2`.
    pub fn torus_character(l1: C64, l2: C64) -> Result<Self> {
        Self::characters(PiSpec::FreeAbelian(2), &[l1, l2])
    }

    /// `g_j -> zeta^(j k)`, `zeta = e^{2 pi i / p}`, for the cyclic group of order `p`.
    pub fn cyclic_character(p: usize, k: usize) -> Result<Self> {
        let values: Vec<C64> = (0..p).map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((j * k) % p) as f64 / p as f64)).collect();
        Self::characters(PiSpec::Finite(GroupTable::cyclic(p)), &values)
    }

    fn characters(pi: PiSpec, values: &[C64]) -> Result<Self> {
        let b = CategoryBackend::matrix();
        let obj = HObject::free(&b, 1);
        let images = values.iter().map(|&v| Morphism::scalar(&obj, v)).collect();
        let mut rep = Self::new(pi.clone(), obj, images)?;
        let gens = pi.generators();
        rep.raw = Some(RawRep {
            pi: RawPi::from_spec(&pi),
            backend: RawBackend::Matrix,
            rank: 1,
            images: gens.iter().zip(values).map(|(g, &v)| (pi.format(g), RawImage::Matrix(vec![vec![v]]))).collect(),
        });
        Ok(rep)
    }

    /// The regular representation of `Z` in its Fourier model: `l2(Z)` as
    /// the family over a midpoint grid of the circle with `t -> e^{i theta}`.
    pub fn regular_circle(grid: usize) -> Result<Self> {
        let raw = RawRep {
            pi: RawPi::InfiniteCyclic(true),
            backend: RawBackend::CircleGrid { n: grid },
            rank: 1,
            images: [("t".to_string(), RawImage::Phase(1))].into_iter().collect(),
        };
        raw.build()
    }

    /// The regular representation of a finite group on `l2(G)` (rank-one free
    /// object of the group backend), `g -> g`.
    pub fn finite_regular(table: GroupTable) -> Result<Self> {
        let n = table.order();
        let images = (0..n)
            .map(|g| {
                let coeffs = (0..n).map(|x| if x == g { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect();
                (format!("g{g}"), RawImage::GroupRing(vec![vec![coeffs]]))
            })
            .collect();
        let raw = RawRep { pi: RawPi::Finite(table.rows().to_vec()), backend: RawBackend::FiniteGroup, rank: 1, images };
        raw.build()
    }

    pub fn pi(&self) -> &PiSpec {
        &self.pi
    }

    pub fn object(&self) -> &HObject {
        &self.object
    }

    pub fn backend(&self) -> &Arc<CategoryBackend> {
        self.object.backend()
    }

    pub fn is_unimodular(&self) -> bool {
        self.unimodular
    }

    /// Fibers of `rho(g)`.
    pub fn element_fibers(&self, g: &GroupElem) -> Vec<CMat> {
        match &self.pi {
            PiSpec::Finite(_) => self.images[g[0] as usize].clone(),
            PiSpec::FreeAbelian(_) => {
                let mut out: Vec<CMat> = self.object.dims().iter().map(|&d| linalg::eye(d)).collect();
                for (i, &k) in g.iter().enumerate() {
                    let src = if k >= 0 { &self.images[i] } else { &self.inverses[i] };
                    for _ in 0..k.unsigned_abs() {
                        for (o, s) in out.iter_mut().zip(src) {
                            *o = &*o * s;
                        }
                    }
                }
                out
            }
        }
    }

    /// Fibers of `rho(x)` for a group-ring element.
    pub fn apply(&self, x: &GroupRingElement) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.object.dims().iter().map(|&d| linalg::zeros(d, d)).collect();
        for (g, k) in x.terms() {
            for (o, f) in out.iter_mut().zip(self.element_fibers(g)) {
                *o += f * c(k as f64, 0.0);
            }
        }
        out
    }

    /// Same representation on a circle grid of a different size (only for
    /// representations read from JSON or built by `regular_circle`).
    pub fn with_grid(&self, n: usize) -> Result<Self> {
        match &self.raw {
            Some(raw @ RawRep { backend: RawBackend::CircleGrid { .. }, .. }) => {
                RawRep { backend: RawBackend::CircleGrid { n }, ..raw.clone() }.build()
            }
            _ => Err(Error::InvalidBackend("grid override needs a circle-grid representation".into())),
        }
    }

    /// Same generators over another backend, given as a JSON backend block
    /// such as `{"kind": "circle_grid", "n": 512}`.
    pub fn with_backend_json(&self, backend: &str) -> Result<Self> {
        let b: RawBackend = serde_json::from_str(backend).map_err(|e| Error::Parse(format!("backend: {e}")))?;
        match &self.raw {
            Some(raw) => RawRep { backend: b, ..raw.clone() }.build(),
            None => Err(Error::InvalidBackend("backend override needs a representation read from JSON".into())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let raw = self.raw.as_ref().ok_or_else(|| Error::Io("representation has no serializable description".into()))?;
        Ok(serde_json::to_string_pretty(raw).expect("serializable") + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawRep = serde_json::from_str(s).map_err(|e| Error::Parse(format!("representation: {e}")))?;
        raw.build()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRep {
    pi: RawPi,
    backend: RawBackend,
    rank: usize,
    /// Generator token -> image.
    images: BTreeMap<String, RawImage>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawBackend {
    Matrix,
    /// Group-ring backend of `pi` itself.
    FiniteGroup,
    CircleGrid { n: usize },
    Family { samples: Vec<Sample> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawImage {
    /// `rank x rank` complex matrix (`[re, im]` entries) used on every fiber.
    Matrix(Vec<Vec<C64>>),
    /// Fiberwise multiplication by `e^{i k xi}` (family backends).
    Phase(i64),
    /// `rank x rank` group-ring coefficient vectors (finite-group backend).
    GroupRing(Vec<Vec<Vec<C64>>>),
}

impl RawRep {
    fn build(&self) -> Result<Representation> {
        let pi = self.pi.to_spec()?;
        let backend = match &self.backend {
            RawBackend::Matrix => CategoryBackend::matrix(),
            RawBackend::FiniteGroup => match &pi {
                PiSpec::Finite(g) => CategoryBackend::finite_group(g.clone()),
                _ => return Err(Error::GroupMismatch("finite-group backend needs a finite pi".into())),
            },
            RawBackend::CircleGrid { n } => {
                if *n == 0 {
                    return Err(Error::InvalidBackend("circle grid needs at least one point".into()));
                }
                CategoryBackend::circle_grid(*n)
            }
            RawBackend::Family { samples } => CategoryBackend::family(samples.clone())?,
        };
        let object = HObject::free(&backend, self.rank);
        let mut images = Vec::new();
        for g in pi.generators() {
            let token = pi.format(&g);
            let img = self
                .images
                .iter()
                .find(|(k, _)| pi.parse_token(k).map(|e| e == g).unwrap_or(false))
                .map(|(_, v)| v)
                .ok_or_else(|| Error::Parse(format!("representation: missing image of `{token}`")))?;
            images.push(self.image(&backend, &object, img, &token)?);
        }
        if self.images.len() != images.len() {
            return Err(Error::Parse("representation: images given for non-generators".into()));
        }
        let mut rep = Representation::new(pi, object, images)?;
        rep.raw = Some(self.clone());
        Ok(rep)
    }

    fn image(&self, backend: &Arc<CategoryBackend>, object: &HObject, img: &RawImage, token: &str) -> Result<Morphism> {
        let r = self.rank;
        match img {
            RawImage::Matrix(rows) => {
                if rows.len() != r || rows.iter().any(|row| row.len() != r) {
                    return Err(Error::Parse(format!("representation: image of `{token}` must be {r} x {r}")));
                }
                if backend.group().is_some() {
                    return Err(Error::Parse("representation: use `group_ring` images on a finite-group backend".into()));
                }
                let m = CMat::from_fn(r, r, |i, j| rows[i][j]);
                Morphism::from_fibers(object.clone(), object.clone(), vec![m; backend.fiber_count()])
            }
            RawImage::Phase(k) => {
                let k = *k as f64;
                Morphism::from_family_fn(backend, r, r, |xi| linalg::eye(r) * C64::from_polar(1.0, k * xi))
            }
            RawImage::GroupRing(entries) => Morphism::from_group_ring(backend, entries),
        }
    }
}

/// `C^q(K; M)`: one copy of `M` per `q`-cell, differentials from applying the
/// representation to the boundary entries.
pub fn cochain_complex(k: &CellComplex, rep: &Representation) -> Result<ChainComplex> {
    if k.pi() != rep.pi() {
        return Err(Error::GroupMismatch("representation and complex have different fundamental groups".into()));
    }
    let backend = rep.backend();
    let m = rep.object();
    let counts = k.cell_counts();
    let objects = counts
        .iter()
        .map(|&n| {
            let o = HObject::new(backend.clone(), m.dims().iter().map(|d| d * n).collect())?;
            match m.product() {
                Some(p) => o.with_product(
                    p.iter().map(|f| (0..n).fold(linalg::zeros(0, 0), |acc, _| linalg::block_diag(&acc, f))).collect(),
                ),
                None => Ok(o),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut diffs = Vec::new();
    for q in 0..k.dimension() {
        let (rows, cols) = (counts[q + 1], counts[q]);
        let mut fibers: Vec<CMat> = m.dims().iter().map(|&d| linalg::zeros(rows * d, cols * d)).collect();
        for a in 0..rows {
            for b in 0..cols {
                let x = k.boundary_entry(q + 1, a, b);
                if x.is_zero() {
                    continue;
                }
                for (f, blk) in fibers.iter_mut().zip(rep.apply(x)) {
                    let d = blk.nrows();
                    f.view_mut((a * d, b * d), (d, d)).copy_from(&blk);
                }
            }
        }
        diffs.push(Morphism::from_fibers(objects[q].clone(), objects[q + 1].clone(), fibers)?);
    }
    ChainComplex::new(objects, diffs)
}

/// The element of `det C(K; M)` induced by `sigma` on `det M`: with the
/// grading of this crate `det C ≅ (det M)^{-chi}` blockwise.
fn induced_sigma(c: &ChainComplex, chi: i64, sigma: &DetLineElement) -> Result<DetLineElement> {
    if sigma.word().len() != 1 || sigma.word().values().any(|&e| e != 1) {
        return Err(Error::FrameMismatch(format!("sigma {sigma} is not an element of det M")));
    }
    Ok(torsion::complex_frame(c).with_log(-(chi as f64) * sigma.log_coeff))
}

/// Combinatorial torsion of `K` with coefficients in a unimodular `rep`,
/// with `sigma` an element of `det M`.
pub fn combinatorial_torsion(k: &CellComplex, rep: &Representation, sigma: &DetLineElement, opts: &TorsionOptions) -> Result<TorsionReport> {
    if !rep.is_unimodular() {
        return Err(Error::NotUnimodular("some generator has Fuglede-Kadison determinant != 1".into()));
    }
    let c = cochain_complex(k, rep)?;
    let sig = induced_sigma(&c, k.euler_characteristic(), sigma)?;
    torsion::torsion(&c, &sig, opts)
}

/// The standard product class on `det M`.
pub fn standard_sigma() -> DetLineElement {
    DetLineElement::frame("M")
}

/// A subdivided complex together with the subdivision chain map, recorded as
/// `old cell -> new cells` (the image is the sum of the listed cells).
#[derive(Clone, Debug)]
pub struct Subdivision {
    pub complex: CellComplex,
    pub chain_map: BTreeMap<String, Vec<String>>,
}

impl Subdivision {
    fn identity(k: &CellComplex) -> Self {
        let chain_map = k.cells.iter().flatten().map(|id| (id.clone(), vec![id.clone()])).collect();
        Self { complex: k.clone(), chain_map }
    }

    /// `self` followed by `next`.
    fn then(&self, next: &Subdivision) -> Self {
        let chain_map = self
            .chain_map
            .iter()
            .map(|(id, img)| (id.clone(), img.iter().flat_map(|x| next.chain_map[x].iter().cloned()).collect()))
            .collect();
        Self { complex: next.complex.clone(), chain_map }
    }
}

fn fresh_id(k: &CellComplex, base: String) -> String {
    let mut id = base;
    while k.locate(&id).is_some() {
        id.push('\'');
    }
    id
}

/// Splits the 1-cell `cell_id`, with `∂e = g1 v1 - g0 v0`, into `e-` and `e+`
/// joined at a new vertex `e0`: `∂e- = e0 - g0 v0`, `∂e+ = g1 v1 - e0`.
pub fn subdivide(k: &CellComplex, cell_id: &str) -> Result<Subdivision> {
    let (q, p) = k.locate(cell_id).ok_or_else(|| Error::UnsupportedCell(format!("no cell `{cell_id}`")))?;
    if q != 1 {
        return Err(Error::UnsupportedCell(format!("`{cell_id}` has dimension {q}; only 1-cells can be subdivided")));
    }
    let mut plus = None;
    let mut minus = None;
    let mut count = 0;
    for (b, x) in k.boundaries[1][p].iter().enumerate() {
        for (g, coeff) in x.terms() {
            count += 1;
            match coeff {
                1 => plus = Some((b, g.clone())),
                -1 => minus = Some((b, g.clone())),
                _ => {}
            }
        }
    }
    let (Some((v1, g1)), Some((v0, g0)), 2) = (plus, minus, count) else {
        return Err(Error::UnsupportedCell(format!("boundary of `{cell_id}` is not of the form g1 v1 - g0 v0")));
    };
    let w = fresh_id(k, format!("{cell_id}0"));
    let e_minus = fresh_id(k, format!("{cell_id}-"));
    let e_plus = fresh_id(k, format!("{cell_id}+"));
    let mut cells = k.cells.clone();
    cells[0].push(w.clone());
    cells[1][p] = e_minus.clone();
    cells[1].push(e_plus.clone());
    let mut boundaries = k.boundaries.clone();
    let nv = cells[0].len();
    for row in boundaries[1].iter_mut() {
        row.push(GroupRingElement::zero());
    }
    let id = k.pi.identity();
    let mut row_minus = vec![GroupRingElement::zero(); nv];
    row_minus[nv - 1].add_term(id.clone(), 1);
    row_minus[v0].add_term(g0, -1);
    let mut row_plus = vec![GroupRingElement::zero(); nv];
    row_plus[v1].add_term(g1, 1);
    row_plus[nv - 1].add_term(id, -1);
    boundaries[1][p] = row_minus;
    boundaries[1].push(row_plus);
    if boundaries.len() > 2 {
        for row in boundaries[2].iter_mut() {
            let a = row[p].clone();
            row.push(a);
        }
    }
    let complex = CellComplex::new(k.pi.clone(), cells, boundaries, k.chi)?;
    let mut sub = Subdivision::identity(k);
    sub.complex = complex;
    sub.chain_map.insert(cell_id.to_string(), vec![e_minus, e_plus]);
    Ok(sub)
}

pub fn elementary_subdivision(k: &CellComplex, cell_id: &str) -> Result<CellComplex> {
    subdivide(k, cell_id).map(|s| s.complex)
}

/// Replaces the lift of `cell_id` by its translate under `g`.
pub fn relift(k: &CellComplex, cell_id: &str, g: &GroupElem) -> Result<CellComplex> {
    let (q, p) = k.locate(cell_id).ok_or_else(|| Error::InvalidComplex(format!("no cell `{cell_id}`")))?;
    let pi = &k.pi;
    let ginv = pi.inv(g);
    let mut boundaries = k.boundaries.clone();
    if q > 0 {
        for x in boundaries[q][p].iter_mut() {
            *x = x.mul_left(g, pi);
        }
    }
    if q + 1 < boundaries.len() {
        for row in boundaries[q + 1].iter_mut() {
            row[p] = row[p].mul_right(&ginv, pi);
        }
    }
    CellComplex::new(pi.clone(), k.cells.clone(), boundaries, k.chi)
}

/// The cochain map `C(K'; M) -> C(K; M)` dual to a subdivision chain map.
pub fn subdivision_cochain_map(sub_from: &CellComplex, sub: &Subdivision, rep: &Representation) -> Vec<Vec<CMat>> {
    let dims = rep.object().dims();
    (0..=sub_from.dimension())
        .map(|q| {
            let old = sub_from.cells(q);
            let new = sub.complex.cells(q);
            dims.iter()
                .map(|&d| {
                    let mut m = linalg::zeros(old.len() * d, new.len() * d);
                    for (a, id) in old.iter().enumerate() {
                        for x in &sub.chain_map[id] {
                            let b = new.iter().position(|y| y == x).expect("image cell exists");
                            m.view_mut((a * d, b * d), (d, d)).copy_from(&linalg::eye(d));
                        }
                    }
                    m
                })
                .collect()
        })
        .collect()
}

/// `log Det` of the map induced on harmonic representatives in degree `i` by
/// a cochain map with raw fibers `f`.
pub fn induced_cohomology_log_det(src: &ChainComplex, tgt: &ChainComplex, f: &[CMat], i: usize) -> Result<f64> {
    let m = Morphism::from_fibers(src.object(i).clone(), tgt.object(i).clone(), f.to_vec())?;
    let p = src.harmonic_basis(i);
    let q = tgt.harmonic_basis(i);
    let weights = src.backend().fiber_weights();
    let mut total = 0.0;
    for (j, nf) in m.normalized_fibers().iter().enumerate() {
        let a = q[j].adjoint() * nf * &p[j];
        if a.nrows() != a.ncols() {
            return Err(Error::NotAnIsomorphism(format!("degree {i}: cohomology dimensions differ in fiber {j}")));
        }
        if a.nrows() == 0 {
            continue;
        }
        let s = linalg::singular_values(&a);
        if s[s.len() - 1] <= 1e-12 * s[0].max(1.0) {
            return Err(Error::NotAnIsomorphism(format!("degree {i}: induced map is singular in fiber {j}")));
        }
        total += weights[j] * s.iter().map(|x| x.ln()).sum::<f64>();
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct SubdivisionCheck {
    pub subdivided: Vec<String>,
    /// Torsion logs after each round, transported to the frames of `K`.
    pub log_values: Vec<f64>,
    pub discrepancy: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Runs `depth` rounds of random 1-cell subdivisions and compares the
/// torsions; non-scalar torsions are transported along the subdivision maps.
pub fn subdivision_invariance_check(k: &CellComplex, rep: &Representation, depth: usize, seed: u64, tol: f64) -> Result<SubdivisionCheck> {
    let opts = TorsionOptions::default();
    let sigma = standard_sigma();
    let c0 = cochain_complex(k, rep)?;
    let base = combinatorial_torsion(k, rep, &sigma, &opts)?.combined;
    let mut rng = random::rng(seed);
    let mut acc = Subdivision::identity(k);
    let mut subdivided = Vec::new();
    let mut log_values = vec![base.log_coeff];
    let mut discrepancy: f64 = 0.0;
    for _ in 0..depth {
        let edges = acc.complex.cells(1);
        if edges.is_empty() {
            return Err(Error::UnsupportedCell("complex has no 1-cells".into()));
        }
        let id = edges[rng.gen_range(0..edges.len())].clone();
        acc = acc.then(&subdivide(&acc.complex, &id)?);
        subdivided.push(id);
        let rho = combinatorial_torsion(&acc.complex, rep, &sigma, &opts)?.combined;
        let c1 = cochain_complex(&acc.complex, rep)?;
        let maps = subdivision_cochain_map(k, &acc, rep);
        let mut moved = rho.clone();
        for i in 0..c0.len() {
            let e = rho.exponent(&torsion::label_h(i));
            if e != 0 {
                moved.log_coeff += e as f64 * induced_cohomology_log_det(&c1, &c0, &maps[i], i)?;
            }
        }
        if !moved.same_line(&base) {
            return Err(Error::FrameMismatch(format!("subdivided torsion {moved} is not in the line of {base}")));
        }
        discrepancy = discrepancy.max((moved.log_coeff - base.log_coeff).abs());
        log_values.push(moved.log_coeff);
    }
    Ok(SubdivisionCheck { subdivided, log_values, discrepancy, tol, pass: discrepancy <= tol })
}

fn id_elem(pi: &PiSpec) -> String {
    pi.format(&pi.identity())
}

/// The circle with one vertex and one edge, `∂e = (t - 1) v`.
pub fn circle() -> CellComplex {
    let pi = PiSpec::infinite_cyclic();
    CellComplex::from_lists(pi, &[(0, "v"), (1, "e")], &[("e", vec![("v", vec![("t", 1), ("1", -1)])])]).expect("valid circle")
}

/// The circle with two vertices and two edges.
pub fn circle_two_cells() -> CellComplex {
    let pi = PiSpec::infinite_cyclic();
    CellComplex::from_lists(
        pi,
        &[(0, "v0"), (0, "v1"), (1, "a"), (1, "b")],
        &[("a", vec![("v0", vec![("1", -1)]), ("v1", vec![("1", 1)])]), ("b", vec![("v0", vec![("t", 1)]), ("v1", vec![("1", -1)])])],
    )
    .expect("valid circle")
}

/// The torus with one cell of each of the types `v`, `a`, `b`, `f`.
pub fn torus() -> CellComplex {
    let pi = PiSpec::FreeAbelian(2);
    CellComplex::from_lists(
        pi,
        &[(0, "v"), (1, "a"), (1, "b"), (2, "f")],
        &[
            ("a", vec![("v", vec![("t1", 1), ("1", -1)])]),
            ("b", vec![("v", vec![("t2", 1), ("1", -1)])]),
            ("f", vec![("a", vec![("1", 1), ("t2", -1)]), ("b", vec![("t1", 1), ("1", -1)])]),
        ],
    )
    .expect("valid torus")
}

/// Inverse of `q` modulo `p`.
pub fn inverse_mod(q: usize, p: usize) -> Option<usize> {
    (1..p).find(|&r| (q * r) % p == 1)
}

/// The lens space `L(p, q)` with one cell in each dimension:
/// `∂e1 = (t - 1) e0`, `∂e2 = N e1`, `∂e3 = (t^{q*} - 1) e2`, `q q* = 1 mod p`.
pub fn lens(p: usize, q: usize) -> Result<CellComplex> {
    if p < 2 {
        return Err(Error::InvalidComplex("lens space needs p >= 2".into()));
    }
    let qs = inverse_mod(q % p, p).ok_or_else(|| Error::InvalidComplex(format!("q = {q} is not a unit mod {p}")))?;
    let pi = PiSpec::Finite(GroupTable::cyclic(p));
    let one = id_elem(&pi);
    let norm: Vec<(String, i64)> = (0..p).map(|j| (format!("g{j}"), 1)).collect();
    let gq = format!("g{qs}");
    let raw_norm: Vec<(&str, i64)> = norm.iter().map(|(g, k)| (g.as_str(), *k)).collect();
    CellComplex::from_lists(
        pi,
        &[(0, "e0"), (1, "e1"), (2, "e2"), (3, "e3")],
        &[
            ("e1", vec![("e0", vec![("g1", 1), (one.as_str(), -1)])]),
            ("e2", vec![("e1", raw_norm)]),
            ("e3", vec![("e2", vec![(gq.as_str(), 1), (one.as_str(), -1)])]),
        ],
    )
}

//! Finite Hilbertian von Neumann categories with trace, realized by three
//! concrete backends.
//!
//! Every backend reduces to a finite list of *fibers*: finite-dimensional
//! Hilbert spaces with a positive weight.
//!
//! * `Matrix`: one fiber of weight `scale`; the trace is the ordinary
//!   (unnormalized) matrix trace.
//! * `FiniteGroup`: objects are `k` copies of `l2(G)`; a morphism is a matrix
//!   over the group ring acting by left multiplication, stored expanded to a
//!   `k|G| x k|G|` complex matrix. One fiber of weight `scale/|G|`, so the trace
//!   of the identity on `l2(G)` is `scale`.
//! * `Family`: a measurable field of finite-dimensional spaces discretized at
//!   sample points `xi_j` with weights `w_j`; fiber `j` has weight `scale*w_j`.
//!
//! Morphisms are stored in standard coordinates. Objects may carry an
//! admissible scalar product `<x,y>_P = <Px,y>`; everything spectral is
//! computed after passing to coordinates orthonormal for those products.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

/// Default relative rank tolerance.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupTable {
    table: Vec<Vec<usize>>,
    #[serde(skip)]
    inverse: Vec<usize>,
}

impl GroupTable {
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidBackend("empty Cayley table".into()));
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidBackend(format!("row {i} has length {}", row.len())));
            }
            if !is_permutation(row) {
                return Err(Error::InvalidBackend(format!("row {i} is not a permutation")));
            }
        }
        for j in 0..n {
            let col: Vec<usize> = table.iter().map(|r| r[j]).collect();
            if !is_permutation(&col) {
                return Err(Error::InvalidBackend(format!("column {j} is not a permutation")));
            }
        }
        for (i, row) in table.iter().enumerate() {
            if table[0][i] != i || row[0] != i {
                return Err(Error::InvalidBackend("identity must be element 0".into()));
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::InvalidBackend(format!("not associative at ({a},{b},{c})")));
                    }
                }
            }
        }
        let inverse = (0..n)
            .map(|a| (0..n).find(|&b| table[a][b] == 0).expect("rows are permutations"))
            .collect();
        Ok(Self { table, inverse })
    }

    pub fn cyclic(n: usize) -> Self {
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::new(table).expect("cyclic group table is valid")
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.table
    }

    /// Left-regular matrix of a group-ring element: `L(a)[x][y] = a[x y^-1]`.
    pub fn regular_matrix(&self, coeffs: &[C64]) -> CMat {
        let n = self.order();
        let mut m = linalg::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                m[(x, y)] = coeffs[self.mul(x, self.inv(y))];
            }
        }
        m
    }
}

fn is_permutation(row: &[usize]) -> bool {
    let mut seen = vec![false; row.len()];
    for &v in row {
        if v >= row.len() || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub xi: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BackendKind {
    Matrix,
    FiniteGroup(GroupTable),
    Family(Vec<Sample>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryBackend {
    pub kind: BackendKind,
    pub scale: f64,
}

impl CategoryBackend {
    pub fn matrix() -> Arc<Self> {
        Arc::new(Self { kind: BackendKind::Matrix, scale: 1.0 })
    }

    pub fn finite_group(table: GroupTable) -> Arc<Self> {
        Arc::new(Self { kind: BackendKind::FiniteGroup(table), scale: 1.0 })
    }

    pub fn family(samples: Vec<Sample>) -> Result<Arc<Self>> {
        if samples.is_empty() {
            return Err(Error::InvalidBackend("family backend needs at least one sample".into()));
        }
        if let Some(s) = samples.iter().find(|s| !(s.weight > 0.0) || !s.weight.is_finite()) {
            return Err(Error::InvalidBackend(format!("sample weight {} is not positive", s.weight)));
        }
        Ok(Arc::new(Self { kind: BackendKind::Family(samples), scale: 1.0 }))
    }

    /// Midpoint grid on the unit circle, `theta_j = 2 pi (j + 1/2) / n`, with
    /// normalized Lebesgue measure. The midpoint shift keeps `theta = 0` off
    /// the grid.
    pub fn circle_grid(n: usize) -> Arc<Self> {
        let w = 1.0 / n as f64;
        let samples = (0..n)
            .map(|j| Sample { xi: 2.0 * PI * (j as f64 + 0.5) * w, weight: w })
            .collect();
        Self::family(samples).expect("n > 0")
    }

    /// Midpoint grid on `(0, 1]` with Lebesgue measure.
    pub fn interval_grid(n: usize) -> Arc<Self> {
        let w = 1.0 / n as f64;
        let samples = (0..n).map(|j| Sample { xi: (j as f64 + 0.5) * w, weight: w }).collect();
        Self::family(samples).expect("n > 0")
    }

    pub fn with_scale(&self, scale: f64) -> Result<Arc<Self>> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidBackend(format!("scale {scale} must be positive")));
        }
        Ok(Arc::new(Self { kind: self.kind.clone(), scale }))
    }

    pub fn fiber_count(&self) -> usize {
        match &self.kind {
            BackendKind::Family(s) => s.len(),
            _ => 1,
        }
    }

    pub fn fiber_weights(&self) -> Vec<f64> {
        match &self.kind {
            BackendKind::Matrix => vec![self.scale],
            BackendKind::FiniteGroup(g) => vec![self.scale / g.order() as f64],
            BackendKind::Family(s) => s.iter().map(|s| self.scale * s.weight).collect(),
        }
    }

    pub fn samples(&self) -> Option<&[Sample]> {
        match &self.kind {
            BackendKind::Family(s) => Some(s),
            _ => None,
        }
    }

    pub fn group(&self) -> Option<&GroupTable> {
        match &self.kind {
            BackendKind::FiniteGroup(g) => Some(g),
            _ => None,
        }
    }

    /// Fiber dimensions of the free object of the given rank.
    pub fn free_dims(&self, rank: usize) -> Vec<usize> {
        match &self.kind {
            BackendKind::Matrix => vec![rank],
            BackendKind::FiniteGroup(g) => vec![rank * g.order()],
            BackendKind::Family(s) => vec![rank; s.len()],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            BackendKind::Matrix => "matrix",
            BackendKind::FiniteGroup(_) => "finite_group",
            BackendKind::Family(_) => "family",
        }
    }

    /// Sub-backend on a subset of the fibers (Family only).
    pub fn restrict(&self, fibers: &[usize]) -> Result<Arc<Self>> {
        match &self.kind {
            BackendKind::Family(s) => {
                let samples = fibers.iter().map(|&j| s[j]).collect();
                let mut b = (*Self::family(samples)?).clone();
                b.scale = self.scale;
                Ok(Arc::new(b))
            }
            _ => Err(Error::InvalidBackend("only family backends can be restricted".into())),
        }
    }
}

fn same_backend(a: &Arc<CategoryBackend>, b: &Arc<CategoryBackend>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// An object: a fiberwise finite-dimensional Hilbertian space with an
/// admissible scalar product.
#[derive(Clone, Debug)]
pub struct HObject {
    backend: Arc<CategoryBackend>,
    dims: Vec<usize>,
    product: Option<Vec<CMat>>,
}

impl HObject {
    pub fn new(backend: Arc<CategoryBackend>, dims: Vec<usize>) -> Result<Self> {
        if dims.len() != backend.fiber_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} fiber dimensions for a backend with {} fibers",
                dims.len(),
                backend.fiber_count()
            )));
        }
        if let Some(g) = backend.group() {
            if dims[0] % g.order() != 0 {
                return Err(Error::ShapeMismatch(format!(
                    "finite-group object dimension {} is not a multiple of |G| = {}",
                    dims[0],
                    g.order()
                )));
            }
        }
        Ok(Self { backend, dims, product: None })
    }

    /// The free object of the given rank (`C^n`, `l2(G)^k`, or the constant field).
    pub fn free(backend: &Arc<CategoryBackend>, rank: usize) -> Self {
        Self { dims: backend.free_dims(rank), backend: backend.clone(), product: None }
    }

    /// Subobject with explicit fiber dimensions and the standard product
    /// (used for kernels, images and spectral pieces, which need not be free).
    pub(crate) fn sub(backend: &Arc<CategoryBackend>, dims: Vec<usize>) -> Self {
        Self { backend: backend.clone(), dims, product: None }
    }

    pub fn with_product(mut self, product: Vec<CMat>) -> Result<Self> {
        if product.len() != self.dims.len() {
            return Err(Error::ShapeMismatch("product fiber count".into()));
        }
        for (j, (p, &d)) in product.iter().zip(&self.dims).enumerate() {
            if p.shape() != (d, d) {
                return Err(Error::ShapeMismatch(format!("product fiber {j} has shape {:?}", p.shape())));
            }
            let skew = linalg::frobenius(&(p - p.adjoint()));
            if skew > 1e-10 * (1.0 + linalg::frobenius(p)) {
                return Err(Error::NotPositiveDefinite(format!("fiber {j} is not self-adjoint")));
            }
            let ev = linalg::hermitian_eigenvalues(p);
            let top = ev.last().copied().unwrap_or(1.0).abs().max(1.0);
            if ev.first().is_some_and(|&v| v <= 1e-12 * top) {
                return Err(Error::NotPositiveDefinite(format!("fiber {j} has eigenvalue {}", ev[0])));
            }
        }
        self.product = Some(product);
        Ok(self)
    }

    pub fn with_product_morphism(self, p: &Morphism) -> Result<Self> {
        self.with_product(p.fibers.clone())
    }

    pub fn backend(&self) -> &Arc<CategoryBackend> {
        &self.backend
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn product(&self) -> Option<&[CMat]> {
        self.product.as_deref()
    }

    pub fn has_standard_product(&self) -> bool {
        self.product.is_none()
    }

    pub fn standard(&self) -> Self {
        Self { product: None, ..self.clone() }
    }

    pub fn product_fiber(&self, j: usize) -> CMat {
        match &self.product {
            Some(p) => p[j].clone(),
            None => linalg::eye(self.dims[j]),
        }
    }

    /// `P^{1/2}` per fiber: maps standard coordinates to coordinates in which
    /// the product is the standard one.
    pub fn sqrt_product(&self) -> Vec<CMat> {
        (0..self.dims.len())
            .map(|j| match &self.product {
                Some(p) => linalg::hermitian_fn(&p[j], f64::sqrt),
                None => linalg::eye(self.dims[j]),
            })
            .collect()
    }

    pub fn inv_sqrt_product(&self) -> Vec<CMat> {
        (0..self.dims.len())
            .map(|j| match &self.product {
                Some(p) => linalg::hermitian_fn(&p[j], |v| 1.0 / v.sqrt()),
                None => linalg::eye(self.dims[j]),
            })
            .collect()
    }

    /// von Neumann dimension `tau(identity)`.
    pub fn dim_tau(&self) -> f64 {
        self.backend.fiber_weights().iter().zip(&self.dims).map(|(w, &d)| w * d as f64).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.dims.iter().all(|&d| d == 0)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        same_backend(&self.backend, &other.backend) && self.dims == other.dims
    }

    pub fn direct_sum(&self, other: &Self) -> Result<Self> {
        if !same_backend(&self.backend, &other.backend) {
            return Err(Error::BackendMismatch("direct sum across backends".into()));
        }
        let dims = self.dims.iter().zip(&other.dims).map(|(a, b)| a + b).collect();
        let product = if self.product.is_none() && other.product.is_none() {
            None
        } else {
            Some(
                (0..self.dims.len())
                    .map(|j| linalg::block_diag(&self.product_fiber(j), &other.product_fiber(j)))
                    .collect(),
            )
        };
        Ok(Self { backend: self.backend.clone(), dims, product })
    }

    pub fn restrict(&self, fibers: &[usize]) -> Result<Self> {
        let backend = self.backend.restrict(fibers)?;
        Ok(Self {
            backend,
            dims: fibers.iter().map(|&j| self.dims[j]).collect(),
            product: self.product.as_ref().map(|p| fibers.iter().map(|&j| p[j].clone()).collect()),
        })
    }
}

/// A morphism of the category, stored fiberwise in standard coordinates.
#[derive(Clone, Debug)]
pub struct Morphism {
    source: HObject,
    target: HObject,
    fibers: Vec<CMat>,
}

impl Morphism {
    pub fn from_fibers(source: HObject, target: HObject, fibers: Vec<CMat>) -> Result<Self> {
        if !same_backend(&source.backend, &target.backend) {
            return Err(Error::BackendMismatch("source and target backends differ".into()));
        }
        if fibers.len() != source.dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} fibers for a backend with {} fibers",
                fibers.len(),
                source.dims.len()
            )));
        }
        for (j, f) in fibers.iter().enumerate() {
            if f.shape() != (target.dims[j], source.dims[j]) {
                return Err(Error::ShapeMismatch(format!(
                    "fiber {j} has shape {:?}, expected {:?}",
                    f.shape(),
                    (target.dims[j], source.dims[j])
                )));
            }
        }
        Ok(Self { source, target, fibers })
    }

    /// Matrix-backend morphism `C^cols -> C^rows`.
    pub fn from_matrix(backend: &Arc<CategoryBackend>, m: CMat) -> Result<Self> {
        if backend.kind != BackendKind::Matrix {
            return Err(Error::BackendMismatch("from_matrix needs the matrix backend".into()));
        }
        let s = HObject::free(backend, m.ncols());
        let t = HObject::free(backend, m.nrows());
        Self::from_fibers(s, t, vec![m])
    }

    pub fn from_real_rows(backend: &Arc<CategoryBackend>, rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        let entries: Vec<C64> = data.iter().map(|&x| c(x, 0.0)).collect();
        Self::from_matrix(backend, CMat::from_row_slice(rows, cols, &entries))
    }

    /// Morphism `l2(G)^cols -> l2(G)^rows` from a `rows x cols` matrix of
    /// group-ring elements given as coefficient vectors indexed by group element.
    pub fn from_group_ring(backend: &Arc<CategoryBackend>, entries: &[Vec<Vec<C64>>]) -> Result<Self> {
        let g = backend
            .group()
            .ok_or_else(|| Error::BackendMismatch("from_group_ring needs a finite-group backend".into()))?;
        let n = g.order();
        let rows = entries.len();
        let cols = entries.first().map_or(0, |r| r.len());
        let mut m = linalg::zeros(rows * n, cols * n);
        for (i, row) in entries.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::ShapeMismatch("ragged group-ring matrix".into()));
            }
            for (k, coeffs) in row.iter().enumerate() {
                if coeffs.len() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "group-ring entry ({i},{k}) has {} coefficients, |G| = {n}",
                        coeffs.len()
                    )));
                }
                m.view_mut((i * n, k * n), (n, n)).copy_from(&g.regular_matrix(coeffs));
            }
        }
        Self::from_fibers(HObject::free(backend, cols), HObject::free(backend, rows), vec![m])
    }

    /// Reads back the group-ring matrix: the coefficient of `g` in entry
    /// `(i,k)` is the `(g, e)` entry of the corresponding regular block.
    pub fn to_group_ring(&self) -> Result<Vec<Vec<Vec<C64>>>> {
        let g = self
            .source
            .backend
            .group()
            .ok_or_else(|| Error::BackendMismatch("not a finite-group morphism".into()))?;
        let n = g.order();
        let m = &self.fibers[0];
        let rows = m.nrows() / n;
        let cols = m.ncols() / n;
        Ok((0..rows)
            .map(|i| (0..cols).map(|k| (0..n).map(|x| m[(i * n + x, k * n)]).collect()).collect())
            .collect())
    }

    /// Family-backend morphism from a fiber function of the sample point.
    pub fn from_family_fn(
        backend: &Arc<CategoryBackend>,
        source_rank: usize,
        target_rank: usize,
        f: impl Fn(f64) -> CMat,
    ) -> Result<Self> {
        let samples = backend
            .samples()
            .ok_or_else(|| Error::BackendMismatch("from_family_fn needs a family backend".into()))?;
        let fibers = samples.iter().map(|s| f(s.xi)).collect();
        Self::from_fibers(HObject::free(backend, source_rank), HObject::free(backend, target_rank), fibers)
    }

    pub fn identity(obj: &HObject) -> Self {
        let fibers = obj.dims.iter().map(|&d| linalg::eye(d)).collect();
        Self { source: obj.clone(), target: obj.clone(), fibers }
    }

    pub fn scalar(obj: &HObject, value: C64) -> Self {
        let fibers = obj.dims.iter().map(|&d| linalg::eye(d) * value).collect();
        Self { source: obj.clone(), target: obj.clone(), fibers }
    }

    pub fn zero(source: &HObject, target: &HObject) -> Self {
        let fibers = source.dims.iter().zip(&target.dims).map(|(&s, &t)| linalg::zeros(t, s)).collect();
        Self { source: source.clone(), target: target.clone(), fibers }
    }

    pub fn source(&self) -> &HObject {
        &self.source
    }

    pub fn target(&self) -> &HObject {
        &self.target
    }

    pub fn fibers(&self) -> &[CMat] {
        &self.fibers
    }

    pub fn backend(&self) -> &Arc<CategoryBackend> {
        &self.source.backend
    }

    pub fn is_endomorphism(&self) -> bool {
        self.source.same_shape(&self.target)
    }

    pub fn with_objects(&self, source: HObject, target: HObject) -> Result<Self> {
        Self::from_fibers(source, target, self.fibers.clone())
    }

    /// `tau(m)` for an endomorphism.
    pub fn trace(&self) -> Result<C64> {
        if !self.is_endomorphism() {
            return Err(Error::ShapeMismatch("trace of a non-endomorphism".into()));
        }
        Ok(self
            .backend()
            .fiber_weights()
            .iter()
            .zip(&self.fibers)
            .map(|(w, f)| f.trace() * *w)
            .sum())
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &Morphism) -> Result<Self> {
        if !g.target.same_shape(&self.source) {
            return Err(Error::ShapeMismatch("target(g) != source(f)".into()));
        }
        let fibers = self.fibers.iter().zip(&g.fibers).map(|(a, b)| a * b).collect();
        Ok(Self { source: g.source.clone(), target: self.target.clone(), fibers })
    }

    pub fn add(&self, other: &Morphism) -> Result<Self> {
        self.combine(other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Morphism) -> Result<Self> {
        self.combine(other, C64::new(-1.0, 0.0))
    }

    fn combine(&self, other: &Morphism, sign: C64) -> Result<Self> {
        if !self.source.same_shape(&other.source) || !self.target.same_shape(&other.target) {
            return Err(Error::ShapeMismatch("sum of morphisms with different shapes".into()));
        }
        let fibers = self.fibers.iter().zip(&other.fibers).map(|(a, b)| a + b * sign).collect();
        Ok(Self { source: self.source.clone(), target: self.target.clone(), fibers })
    }

    pub fn scale(&self, value: C64) -> Self {
        Self { fibers: self.fibers.iter().map(|f| f * value).collect(), ..self.clone() }
    }

    /// Adjoint with respect to the products of source and target:
    /// `f* = P_s^{-1} f^H P_t`.
    pub fn adjoint(&self) -> Result<Self> {
        let fibers = (0..self.fibers.len())
            .map(|j| {
                let h = self.fibers[j].adjoint();
                match (&self.source.product, &self.target.product) {
                    (None, None) => Ok(h),
                    _ => {
                        let ps = self.source.product_fiber(j);
                        let pt = self.target.product_fiber(j);
                        let inv = ps
                            .clone()
                            .try_inverse()
                            .ok_or_else(|| Error::NotPositiveDefinite(format!("fiber {j} product is singular")))?;
                        Ok(inv * h * pt)
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { source: self.target.clone(), target: self.source.clone(), fibers })
    }

    /// Fibers in coordinates orthonormal for the source and target products:
    /// `P_t^{1/2} f P_s^{-1/2}`.
    pub fn normalized_fibers(&self) -> Vec<CMat> {
        if self.source.product.is_none() && self.target.product.is_none() {
            return self.fibers.clone();
        }
        let rt = self.target.sqrt_product();
        let rs = self.source.inv_sqrt_product();
        self.fibers.iter().enumerate().map(|(j, f)| &rt[j] * f * &rs[j]).collect()
    }

    pub fn normalized(&self) -> Self {
        Self {
            source: self.source.standard(),
            target: self.target.standard(),
            fibers: self.normalized_fibers(),
        }
    }

    pub fn direct_sum(&self, other: &Morphism) -> Result<Self> {
        let source = self.source.direct_sum(&other.source)?;
        let target = self.target.direct_sum(&other.target)?;
        let fibers = self.fibers.iter().zip(&other.fibers).map(|(a, b)| linalg::block_diag(a, b)).collect();
        Ok(Self { source, target, fibers })
    }

    /// Largest fiber operator norm (in orthonormal coordinates).
    pub fn norm(&self) -> f64 {
        self.normalized_fibers()
            .iter()
            .map(|f| linalg::singular_values(f).first().copied().unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        if !self.is_endomorphism() {
            return false;
        }
        self.normalized_fibers().iter().all(|f| {
            linalg::frobenius(&(f - f.adjoint())) <= tol * (1.0 + linalg::frobenius(f))
        })
    }

    pub fn restrict(&self, fibers: &[usize]) -> Result<Self> {
        Ok(Self {
            source: self.source.restrict(fibers)?,
            target: self.target.restrict(fibers)?,
            fibers: fibers.iter().map(|&j| self.fibers[j].clone()).collect(),
        })
    }

    /// Orthonormal frames for `ker f` and `cl(im f)`, fiberwise.
    pub fn kernel_and_image_closure(&self, tol: f64) -> Closures {
        let rs = self.source.inv_sqrt_product();
        let rt = self.target.inv_sqrt_product();
        let mut kernel = Vec::new();
        let mut image = Vec::new();
        let mut min_singular = Vec::new();
        for (j, f) in self.normalized_fibers().iter().enumerate() {
            let r = linalg::ranges(f, tol);
            min_singular.push(r.values.last().copied());
            kernel.push(&rs[j] * &r.kernel);
            image.push(&rt[j] * &r.image);
        }
        let backend = self.backend();
        Closures {
            kernel: Frame::new(HObject::sub(backend, kernel.iter().map(|k| k.ncols()).collect()), kernel),
            image: Frame::new(HObject::sub(backend, image.iter().map(|k| k.ncols()).collect()), image),
            min_singular,
        }
    }
}

/// An isometric embedding of a subobject: per fiber, columns orthonormal with
/// respect to the ambient product.
#[derive(Clone, Debug)]
pub struct Frame {
    pub object: HObject,
    pub basis: Vec<CMat>,
}

impl Frame {
    pub fn new(object: HObject, basis: Vec<CMat>) -> Self {
        Self { object, basis }
    }

    pub fn dim_tau(&self) -> f64 {
        self.object.dim_tau()
    }
}

#[derive(Clone, Debug)]
pub struct Closures {
    pub kernel: Frame,
    pub image: Frame,
    /// Smallest nonzero singular value per fiber (`None` when the fiber map is zero).
    pub min_singular: Vec<Option<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z2() -> Arc<CategoryBackend> {
        CategoryBackend::finite_group(GroupTable::cyclic(2))
    }

    #[test]
    fn matrix_identity_trace() {
        let b = CategoryBackend::matrix();
        let id = Morphism::identity(&HObject::free(&b, 3));
        assert!((id.trace().unwrap() - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn group_ring_trace_reads_identity_coefficient() {
        let b = z2();
        let a = Morphism::from_group_ring(&b, &[vec![vec![c(3.0, 0.0), c(1.0, 0.0)]]]).unwrap();
        assert!((a.trace().unwrap() - c(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn family_trace_is_weighted() {
        let b = CategoryBackend::family(vec![Sample { xi: 0.0, weight: 0.5 }, Sample { xi: 1.0, weight: 0.5 }]).unwrap();
        let obj = HObject::new(b.clone(), vec![2, 4]).unwrap();
        let id = Morphism::identity(&obj);
        assert!((id.trace().unwrap() - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn compose_scalars_and_group_elements() {
        let b = CategoryBackend::matrix();
        let f = Morphism::from_real_rows(&b, 1, 1, &[2.0]).unwrap();
        let g = Morphism::from_real_rows(&b, 1, 1, &[3.0]).unwrap();
        assert!((f.compose(&g).unwrap().fibers()[0][(0, 0)] - c(6.0, 0.0)).norm() < 1e-15);

        let b = z2();
        let t = Morphism::from_group_ring(&b, &[vec![vec![c(0.0, 0.0), c(1.0, 0.0)]]]).unwrap();
        let tt = t.compose(&t).unwrap().to_group_ring().unwrap();
        assert_eq!(tt[0][0], vec![c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn compose_shape_mismatch() {
        let b = CategoryBackend::matrix();
        let f = Morphism::identity(&HObject::free(&b, 2));
        let g = Morphism::identity(&HObject::free(&b, 3));
        assert!(matches!(f.compose(&g), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn adjoint_conjugates() {
        let b = CategoryBackend::matrix();
        let f = Morphism::from_matrix(&b, CMat::from_element(1, 1, c(2.0, 1.0))).unwrap();
        assert!((f.adjoint().unwrap().fibers()[0][(0, 0)] - c(2.0, -1.0)).norm() < 1e-15);

        let b = z2();
        let a = Morphism::from_group_ring(&b, &[vec![vec![c(1.5, 0.0), c(-0.5, 0.0)]]]).unwrap();
        let adj = a.adjoint().unwrap().to_group_ring().unwrap();
        assert_eq!(adj, a.to_group_ring().unwrap());
    }

    #[test]
    fn adjoint_respects_products() {
        let b = CategoryBackend::matrix();
        let p = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        let q = CMat::from_row_slice(2, 2, &[c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let s = HObject::free(&b, 2).with_product(vec![p.clone()]).unwrap();
        let t = HObject::free(&b, 2).with_product(vec![q.clone()]).unwrap();
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, 1.0), c(-1.0, 0.0), c(3.0, 0.0)]);
        let f = Morphism::from_fibers(s, t, vec![m.clone()]).unwrap();
        let fs = f.adjoint().unwrap();
        let x = CMat::from_row_slice(2, 1, &[c(0.3, 0.1), c(-1.0, 0.2)]);
        let y = CMat::from_row_slice(2, 1, &[c(0.7, -0.4), c(0.5, 0.5)]);
        let lhs = (y.adjoint() * &q * &m * &x)[(0, 0)];
        let rhs = ((&fs.fibers()[0] * &y).adjoint() * &p * &x)[(0, 0)];
        assert!((lhs - rhs).norm() < 1e-12);
        let back = fs.adjoint().unwrap();
        assert!(linalg::frobenius(&(&back.fibers()[0] - &m)) < 1e-12);
    }

    #[test]
    fn closures() {
        let b = CategoryBackend::matrix();
        let zero = Morphism::zero(&HObject::free(&b, 2), &HObject::free(&b, 2));
        let cl = zero.kernel_and_image_closure(RANK_TOL);
        assert_eq!(cl.kernel.object.dims(), &[2]);
        assert_eq!(cl.image.object.dims(), &[0]);
        let d = Morphism::from_real_rows(&b, 2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let cl = d.kernel_and_image_closure(RANK_TOL);
        assert_eq!(cl.kernel.object.dims(), &[1]);
        assert_eq!(cl.image.object.dims(), &[1]);
    }

    #[test]
    fn family_dense_image() {
        let b = CategoryBackend::interval_grid(64);
        let f = Morphism::from_family_fn(&b, 1, 1, |xi| CMat::from_element(1, 1, c(xi, 0.0))).unwrap();
        let cl = f.kernel_and_image_closure(RANK_TOL);
        assert!(cl.kernel.object.dims().iter().all(|&d| d == 0));
        assert!((cl.image.dim_tau() - 1.0).abs() < 1e-12);
        let smallest = cl.min_singular.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(smallest < 1e-2);
    }

    #[test]
    fn direct_sums() {
        let b = CategoryBackend::matrix();
        let s = HObject::free(&b, 2).direct_sum(&HObject::free(&b, 3)).unwrap();
        assert_eq!(s.dims(), &[5]);
        let fam = CategoryBackend::family(vec![Sample { xi: 0.0, weight: 1.0 }, Sample { xi: 1.0, weight: 1.0 }]).unwrap();
        let a = HObject::new(fam.clone(), vec![1, 2]).unwrap();
        let bb = HObject::new(fam, vec![2, 1]).unwrap();
        assert_eq!(a.direct_sum(&bb).unwrap().dims(), &[3, 3]);
        assert!(matches!(HObject::free(&CategoryBackend::matrix(), 1).direct_sum(&a), Err(Error::BackendMismatch(_))));
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(GroupTable::new(vec![vec![0, 1], vec![1, 1]]).is_err());
        assert!(GroupTable::new(vec![vec![1, 0], vec![0, 1]]).is_err());
        assert!(CategoryBackend::family(vec![Sample { xi: 0.0, weight: 0.0 }]).is_err());
    }
}

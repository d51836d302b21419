//! Seeded random inputs for the property harnesses.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::category::{CategoryBackend, HObject, Morphism};
use crate::error::Result;
use crate::extcoh::ChainComplex;
use crate::linalg::{self, c, CMat};
use crate::torsion::ExactTriple;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with real and imaginary parts uniform in `[-1, 1]`.
pub fn matrix(rng: &mut TestRng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// A random matrix with condition number below 50.
pub fn invertible(rng: &mut TestRng, n: usize) -> CMat {
    loop {
        let m = matrix(rng, n, n);
        let s = linalg::singular_values(&m);
        if n == 0 || s[n - 1] > s[0] / 50.0 {
            return m;
        }
    }
}

/// `A A^H + I/2`.
pub fn positive_definite(rng: &mut TestRng, n: usize) -> CMat {
    let a = matrix(rng, n, n);
    linalg::hermitian_part(&(&a * a.adjoint() + linalg::eye(n) * c(0.5, 0.0)))
}

/// Per-fiber invertible endomorphism of the free object of rank `rank`.
pub fn invertible_morphism(rng: &mut TestRng, backend: &Arc<CategoryBackend>, rank: usize) -> Morphism {
    let obj = HObject::free(backend, rank);
    if let Some(g) = backend.group() {
        loop {
            let entries: Vec<Vec<Vec<_>>> = (0..rank)
                .map(|_| (0..rank).map(|_| (0..g.order()).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).collect())
                .collect();
            let m = Morphism::from_group_ring(backend, &entries).expect("group ring shape");
            let s = linalg::singular_values(&m.fibers()[0]);
            if s.last().copied().unwrap_or(1.0) > s[0] / 50.0 {
                return m;
            }
        }
    }
    let fibers = obj.dims().iter().map(|&d| invertible(rng, d)).collect();
    Morphism::from_fibers(obj.clone(), obj, fibers).expect("square fibers")
}

/// Ranks `r_i` of `d_i` and dimensions of harmonic parts `h_i` describing a
/// Matrix-backend complex with `dim C^i = r_{i-1} + h_i + r_i`.
#[derive(Clone, Debug)]
pub struct Shape {
    pub ranks: Vec<usize>,
    pub harmonic: Vec<usize>,
}

impl Shape {
    pub fn dims(&self) -> Vec<usize> {
        (0..self.harmonic.len())
            .map(|i| {
                let before = if i == 0 { 0 } else { self.ranks[i - 1] };
                let after = self.ranks.get(i).copied().unwrap_or(0);
                before + self.harmonic[i] + after
            })
            .collect()
    }

    /// Random shape with `len` degrees and every dimension at most `max_dim`.
    pub fn random(rng: &mut TestRng, len: usize, max_dim: usize, acyclic: bool) -> Self {
        loop {
            let ranks: Vec<usize> = (0..len - 1).map(|_| rng.gen_range(0..=max_dim / 2)).collect();
            let harmonic: Vec<usize> = (0..len).map(|_| if acyclic { 0 } else { rng.gen_range(0..=1) }).collect();
            let s = Shape { ranks, harmonic };
            let dims = s.dims();
            let nonzero = dims.iter().any(|&d| d > 0);
            let has_h = acyclic || s.harmonic.iter().any(|&h| h > 0);
            if nonzero && has_h && dims.iter().all(|&d| d <= max_dim) {
                return s;
            }
        }
    }
}

/// A random Matrix complex of the given shape; `with_products` draws random
/// admissible products on every `C^i`.
pub fn complex_of_shape(rng: &mut TestRng, shape: &Shape, with_products: bool) -> ChainComplex {
    let b = CategoryBackend::matrix();
    let dims = shape.dims();
    let g: Vec<CMat> = dims.iter().map(|&d| invertible(rng, d)).collect();
    let objects: Vec<HObject> = dims
        .iter()
        .map(|&d| {
            let o = HObject::free(&b, d);
            if with_products {
                o.with_product(vec![positive_definite(rng, d)]).expect("positive definite")
            } else {
                o
            }
        })
        .collect();
    let mut diffs = Vec::new();
    for (i, &r) in shape.ranks.iter().enumerate() {
        let mut e = linalg::zeros(dims[i + 1], dims[i]);
        let core = invertible(rng, r);
        let col0 = dims[i] - r;
        for a in 0..r {
            for k in 0..r {
                e[(a, col0 + k)] = core[(a, k)];
            }
        }
        let ginv = g[i].clone().try_inverse().expect("invertible");
        let d = &g[i + 1] * e * ginv;
        diffs.push(Morphism::from_fibers(objects[i].clone(), objects[i + 1].clone(), vec![d]).expect("shape"));
    }
    ChainComplex::new(objects, diffs).expect("random complex")
}

pub fn complex(rng: &mut TestRng, len: usize, max_dim: usize, acyclic: bool, with_products: bool) -> ChainComplex {
    let shape = Shape::random(rng, len, max_dim, acyclic);
    complex_of_shape(rng, &shape, with_products)
}

fn fiber(m: &Morphism) -> &CMat {
    &m.fibers()[0]
}

/// Orthonormal basis of the kernel of `d_i` (normalized coordinates are not
/// needed: used only to build cocycle-valued maps in standard coordinates).
fn kernel_basis(c: &ChainComplex, i: usize) -> CMat {
    if i + 1 < c.len() {
        linalg::ranges(fiber(c.differential(i)), 1e-10).kernel
    } else {
        linalg::eye(c.object(i).dims()[0])
    }
}

/// Vectors `v` with `v^H d_{i-1} = 0`.
fn cokernel_basis(c: &ChainComplex, i: usize) -> CMat {
    if i > 0 {
        linalg::ranges(fiber(c.differential(i - 1)), 1e-10).cokernel
    } else {
        linalg::eye(c.object(0).dims()[0])
    }
}

/// A random chain map `f: C -> C~`: a null-homotopic part `d~ k + k d`
/// plus rank-one maps between cocycles and cocycle-detecting covectors.
pub fn chain_map(rng: &mut TestRng, c: &ChainComplex, ct: &ChainComplex) -> Vec<Morphism> {
    let n = c.len();
    let dim = |x: &ChainComplex, i: isize| if i < 0 || i as usize >= n { 0 } else { x.object(i as usize).dims()[0] };
    let k: Vec<CMat> = (0..=n as isize).map(|i| matrix(rng, dim(ct, i - 1), dim(c, i))).collect();
    // k[i]: C^i -> C~^{i-1}
    (0..n)
        .map(|i| {
            let mut f = linalg::zeros(dim(ct, i as isize), dim(c, i as isize));
            if i > 0 {
                f += fiber(ct.differential(i - 1)) * &k[i];
            }
            if i + 1 < n {
                f += &k[i + 1] * fiber(c.differential(i));
            }
            let u = kernel_basis(ct, i);
            let v = cokernel_basis(c, i);
            if u.ncols() > 0 && v.ncols() > 0 {
                let uu = &u * matrix(rng, u.ncols(), 1);
                let vv = &v * matrix(rng, v.ncols(), 1);
                f += uu * vv.adjoint();
            }
            Morphism::from_fibers(c.object(i).clone(), ct.object(i).clone(), vec![f]).expect("chain map shape")
        })
        .collect()
}

/// A random degreewise exact `0 -> L -> M -> N -> 0` with `M = L ⊕ N` as
/// spaces, `d_M = [[d_L, h], [0, d_N]]`, followed by a random change of
/// coordinates and random products on all three complexes.
pub fn exact_triple(rng: &mut TestRng, len: usize, max_dim: usize, acyclic_l: bool, acyclic_n: bool) -> Result<ExactTriple> {
    let l = complex(rng, len, max_dim, acyclic_l, true);
    let n = complex(rng, len, max_dim, acyclic_n, true);
    // h_i: N^i -> L^{i+1} with d_L h_i + h_{i+1} d_N = 0, built as a chain
    // map N -> L[1] with the sign absorbed: h_i = d_L k_i - k_{i+1} d_N + u v^H
    let b = CategoryBackend::matrix();
    let dim = |x: &ChainComplex, i: isize| if i < 0 || i as usize >= len { 0 } else { x.object(i as usize).dims()[0] };
    let k: Vec<CMat> = (0..=len as isize).map(|i| matrix(rng, dim(&l, i), dim(&n, i))).collect();
    let mut h = Vec::new();
    for i in 0..len.saturating_sub(1) {
        let mut m = fiber(l.differential(i)) * &k[i] - &k[i + 1] * fiber(n.differential(i));
        let u = kernel_basis(&l, i + 1);
        let v = cokernel_basis(&n, i);
        if u.ncols() > 0 && v.ncols() > 0 && rng.gen_bool(0.7) {
            m += (&u * matrix(rng, u.ncols(), 1)) * (&v * matrix(rng, v.ncols(), 1)).adjoint();
        }
        h.push(m);
    }
    let g: Vec<CMat> = (0..len).map(|i| invertible(rng, dim(&l, i as isize) + dim(&n, i as isize))).collect();
    let mut m_objects = Vec::new();
    for i in 0..len {
        let d = dim(&l, i as isize) + dim(&n, i as isize);
        m_objects.push(HObject::free(&b, d).with_product(vec![positive_definite(rng, d)])?);
    }
    let mut dm = Vec::new();
    for i in 0..len - 1 {
        let top = linalg::hstack(fiber(l.differential(i)), &h[i]);
        let bottom = linalg::hstack(&linalg::zeros(dim(&n, i as isize + 1), dim(&l, i as isize)), fiber(n.differential(i)));
        let raw = linalg::vstack(&top, &bottom);
        let ginv = g[i].clone().try_inverse().expect("invertible");
        dm.push(Morphism::from_fibers(m_objects[i].clone(), m_objects[i + 1].clone(), vec![&g[i + 1] * raw * ginv])?);
    }
    let m = ChainComplex::new(m_objects.clone(), dm)?;
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    for i in 0..len {
        let (dl, dn) = (dim(&l, i as isize), dim(&n, i as isize));
        let inc = &g[i] * linalg::vstack(&linalg::eye(dl), &linalg::zeros(dn, dl));
        let ginv = g[i].clone().try_inverse().expect("invertible");
        let proj = linalg::hstack(&linalg::zeros(dn, dl), &linalg::eye(dn)) * ginv;
        alpha.push(Morphism::from_fibers(l.object(i).clone(), m_objects[i].clone(), vec![inc])?);
        beta.push(Morphism::from_fibers(m_objects[i].clone(), n.object(i).clone(), vec![proj])?);
    }
    ExactTriple::new(l, m, n, alpha, beta)
}

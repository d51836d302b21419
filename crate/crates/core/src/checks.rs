//! Randomized and closed-form check suites behind `l2torsion checks`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::category::{CategoryBackend, GroupTable, HObject, Morphism};
use crate::cellular::{self, Representation};
use crate::error::{Error, Result};
use crate::extcoh::{self, ChainComplex};
use crate::linalg::{self, c, CMat};
use crate::random::{self, TestRng};
use crate::spectral::{self, DetClassStatus, LadderConfig};
use crate::torsion::{self, TorsionOptions};

pub const SUITES: &[&str] = &["fk", "spectral", "torsion", "epsilon", "exact", "cone", "oracles", "subdivision"];

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed deviation.
    pub worst: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Accumulates per-case deviations; errors count as failures.
struct Tally {
    name: String,
    tol: f64,
    cases: usize,
    failures: usize,
    worst: f64,
    note: Option<String>,
}

impl Tally {
    fn new(name: impl Into<String>, tol: f64) -> Self {
        Self { name: name.into(), tol, cases: 0, failures: 0, worst: 0.0, note: None }
    }

    fn record(&mut self, dev: Result<f64>) {
        self.cases += 1;
        match dev {
            Ok(d) if d.is_finite() => {
                self.worst = self.worst.max(d);
                if d > self.tol {
                    self.failures += 1;
                }
            }
            Ok(_) => self.failures += 1,
            Err(e) => {
                self.failures += 1;
                self.note.get_or_insert_with(|| e.to_string());
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            pass: self.failures == 0 && self.cases > 0,
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            tol: self.tol,
            note: self.note,
        }
    }
}

fn single(name: &str, dev: Result<f64>, tol: f64) -> CheckResult {
    let mut t = Tally::new(name, tol);
    t.record(dev);
    t.finish()
}

/// The three backends exercised by the randomized suites.
pub fn sample_backends() -> Vec<(&'static str, Arc<CategoryBackend>)> {
    vec![
        ("matrix", CategoryBackend::matrix()),
        ("finite_group", CategoryBackend::finite_group(GroupTable::cyclic(3))),
        ("family", CategoryBackend::interval_grid(6)),
    ]
}

fn block_upper(a: &Morphism, b: &Morphism, x: &Morphism) -> Result<Morphism> {
    let obj = a.source().direct_sum(b.source())?;
    let fibers = a
        .fibers()
        .iter()
        .zip(b.fibers())
        .zip(x.fibers())
        .map(|((a, b), x)| linalg::vstack(&linalg::hstack(a, x), &linalg::hstack(&linalg::zeros(b.nrows(), a.ncols()), b)))
        .collect();
    Morphism::from_fibers(obj.clone(), obj, fibers)
}

/// Multiplicativity, `Det(lambda I)`, block-triangular and trace-scale laws.
pub fn fk_laws(name: &str, backend: &Arc<CategoryBackend>, cases: usize, rng: &mut TestRng) -> Vec<CheckResult> {
    let mut mult = Tally::new(format!("fk multiplicativity [{name}]"), 1e-8);
    let mut scalar = Tally::new(format!("fk scalar law [{name}]"), 1e-10);
    let mut block = Tally::new(format!("fk block-triangular law [{name}]"), 1e-8);
    let mut scale = Tally::new(format!("fk trace-scale law [{name}]"), 1e-10);
    for _ in 0..cases {
        let rank = rng.gen_range(1..=3);
        let a = random::invertible_morphism(rng, backend, rank);
        let b = random::invertible_morphism(rng, backend, rank);
        let x = random::invertible_morphism(rng, backend, rank);
        mult.record((|| {
            let ab = a.compose(&b)?;
            Ok((spectral::fk_det(&ab)? - spectral::fk_det(&a)? - spectral::fk_det(&b)?).abs())
        })());
        let lambda = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let obj = HObject::free(backend, rank);
        scalar.record((|| {
            let d = spectral::fk_det(&Morphism::scalar(&obj, lambda))?;
            Ok((d - obj.dim_tau() * lambda.norm().ln()).abs())
        })());
        block.record((|| {
            let t = block_upper(&a, &b, &x)?;
            Ok((spectral::fk_det(&t)? - spectral::fk_det(&a)? - spectral::fk_det(&b)?).abs())
        })());
        let s: f64 = rng.gen_range(0.1..5.0);
        scale.record((|| {
            let scaled = backend.with_scale(s * backend.scale)?;
            let o = HObject::free(&scaled, rank);
            let m = Morphism::from_fibers(o.clone(), o, a.fibers().to_vec())?;
            Ok((spectral::fk_det(&m)? - s * spectral::fk_det(&a)?).abs())
        })());
    }
    vec![mult.finish(), scalar.finish(), block.finish(), scale.finish()]
}

/// Rank-one family on the interval grid with fiber `f(xi)`.
pub fn interval_family(n: usize, f: impl Fn(f64) -> f64) -> Morphism {
    let b = CategoryBackend::interval_grid(n);
    Morphism::from_family_fn(&b, 1, 1, |x| CMat::from_element(1, 1, c(f(x), 0.0))).expect("rank-one family")
}

/// `e^{-1/xi}`, clamped at the smallest positive normal so that the sampled
/// morphism stays injective.
pub fn flat_exponential(x: f64) -> f64 {
    (-1.0 / x).exp().max(f64::MIN_POSITIVE)
}

/// `alpha(xi) = xi` has `log Det = -1`; `e^{-1/xi}` is certified divergent.
pub fn spectral_oracles() -> Vec<CheckResult> {
    let cfg = LadderConfig::default();
    let linear = spectral::fk_det_extended(&interval_family(10_000, |x| x), &cfg).and_then(|(log, v)| {
        if v.status != DetClassStatus::Convergent {
            return Err(Error::Inconclusive(format!("verdict {:?}", v.status)));
        }
        Ok((log.unwrap_or(f64::NAN) + 1.0).abs())
    });
    let flat = spectral::fk_det_extended(&interval_family(10_000, flat_exponential), &cfg).map(|(_, v)| {
        let monotone = v.ladder.windows(2).all(|w| w[1].1 <= w[0].1);
        if v.status == DetClassStatus::Divergent && monotone {
            0.0
        } else {
            1.0
        }
    });
    vec![single("spectral oracle xi", linear, 1e-3), single("spectral oracle exp(-1/xi) divergent", flat, 0.0)]
}

/// The two acyclic torsion formulas on random complexes, and `d = 2`.
pub fn torsion_formulas(cases: usize, rng: &mut TestRng) -> Vec<CheckResult> {
    let mut t = Tally::new("acyclic torsion formulas agree", 1e-8);
    for _ in 0..cases {
        let len = rng.gen_range(2..=5);
        let cx = random::complex(rng, len, 4, true, true);
        t.record(torsion::torsion_acyclic_both(&cx).map(|(a, b)| (a - b).abs()));
    }
    vec![t.finish(), single("two-term complex d = 2", two_term_log(2.0).map(|l| (l.exp() - 0.5).abs()), 1e-12)]
}

fn two_term_log(d: f64) -> Result<f64> {
    let b = CategoryBackend::matrix();
    let m = Morphism::from_matrix(&b, CMat::from_element(1, 1, c(d, 0.0)))?;
    torsion::scalar_torsion(&ChainComplex::from_differentials(vec![m])?)
}

/// Combined torsion at the default and the second epsilon.
pub fn eps_independence(cases: usize, rng: &mut TestRng) -> CheckResult {
    let mut t = Tally::new("epsilon independence", 1e-8);
    for _ in 0..cases {
        let len = rng.gen_range(2..=5);
        let cx = random::complex(rng, len, 4, false, true);
        t.record(torsion::torsion(&cx, &torsion::complex_frame(&cx), &TorsionOptions::default()).and_then(|r| {
            if (r.checks.epsilon_2 / r.epsilon - 1.0).abs() < 1e-6 {
                return Err(Error::InvalidEpsilon("the two epsilons coincide".into()));
            }
            Ok(r.checks.eps_discrepancy)
        }));
    }
    t.finish()
}

pub fn exact_sequences(cases: usize, rng: &mut TestRng) -> CheckResult {
    let mut t = Tally::new("exact sequence multiplicativity", 1e-6);
    for _ in 0..cases {
        let len = rng.gen_range(2..=4);
        let acyclic_l = rng.gen_bool(0.5);
        let acyclic_n = !acyclic_l || rng.gen_bool(0.5);
        t.record(random::exact_triple(rng, len, 4, acyclic_l, acyclic_n).and_then(|tr| torsion::torexseq_check(&tr)).map(|ch| ch.discrepancy));
    }
    t.finish()
}

pub fn cones(cases: usize, rng: &mut TestRng) -> CheckResult {
    let mut t = Tally::new("mapping cone multiplicativity", 1e-6);
    for _ in 0..cases {
        let len = rng.gen_range(2..=4);
        let shape = random::Shape::random(rng, len, 4, false);
        let cx = random::complex_of_shape(rng, &shape, true);
        let ct = random::complex_of_shape(rng, &shape, true);
        let f = random::chain_map(rng, &cx, &ct);
        t.record(torsion::cone_torsion_check(&cx, &ct, &f, 1e-6).map(|ch| ch.discrepancy));
    }
    t.finish()
}

/// `|z - 1|^{-1}` type closed forms for the bundled complexes.
pub fn cellular_oracles() -> Vec<CheckResult> {
    let sigma = cellular::standard_sigma();
    let opts = TorsionOptions::default();
    let log_scalar = |k: &cellular::CellComplex, rep: Result<Representation>| -> Result<f64> {
        let r = cellular::combinatorial_torsion(k, &rep?, &sigma, &opts)?;
        r.log_scalar.ok_or_else(|| Error::NoCanonicalElement(format!("no scalar value: {}", r.combined)))
    };
    let zeta = c((2.0 * PI / 5.0).cos(), (2.0 * PI / 5.0).sin());
    let lens_expected = -2.0 * (zeta - c(1.0, 0.0)).norm().ln();
    let mut out = vec![
        single(
            "circle lambda = -1",
            log_scalar(&cellular::circle(), Representation::circle_character(c(-1.0, 0.0))).map(|l| (l.exp() - 0.5).abs()),
            1e-10,
        ),
        single(
            "circle regular representation (grid 4096)",
            log_scalar(&cellular::circle(), Representation::regular_circle(4096)).map(|l| (l.exp() - 1.0).abs()),
            1e-3,
        ),
        single(
            "lens L(5,1)",
            cellular::lens(5, 1).and_then(|k| log_scalar(&k, Representation::cyclic_character(5, 1))).map(|l| (l - lens_expected).abs()),
            1e-8,
        ),
        single(
            "torus nontrivial character",
            log_scalar(&cellular::torus(), Representation::torus_character(c(0.0, 1.0), c(-1.0, 0.0))).map(f64::abs),
            1e-10,
        ),
    ];
    let regrep = Representation::regular_circle(4096).and_then(|r| cellular::cochain_complex(&cellular::circle(), &r));
    let profile = regrep.map(|cx| extcoh::cohomology(&cx));
    out.push(single(
        "circle regular representation is of determinant class",
        profile.clone().map(|p| if p.is_determinant_class() { 0.0 } else { 1.0 }),
        0.0,
    ));
    out.push(single(
        "circle regular representation Novikov-Shubin exponent",
        profile.and_then(|p| {
            p.degrees
                .iter()
                .find_map(|d| if d.degree == 1 { d.ns_exponent } else { None })
                .map(|a| (a - 1.0).abs())
                .ok_or_else(|| Error::Inconclusive("no exponent estimate".into()))
        }),
        0.1,
    ));
    out
}

pub fn subdivisions(seed: u64) -> Vec<CheckResult> {
    let run = |name: &str, k: Result<cellular::CellComplex>, rep: Result<Representation>, tol: f64| {
        single(name, k.and_then(|k| cellular::subdivision_invariance_check(&k, &rep?, 3, seed, tol)).map(|ch| ch.discrepancy), tol)
    };
    vec![
        run("subdivision circle lambda = -1", Ok(cellular::circle()), Representation::circle_character(c(-1.0, 0.0)), 1e-9),
        run("subdivision circle lambda = 1", Ok(cellular::circle()), Representation::circle_character(c(1.0, 0.0)), 1e-9),
        run("subdivision lens L(5,1)", cellular::lens(5, 1), Representation::cyclic_character(5, 1), 1e-9),
        run("subdivision circle regular representation", Ok(cellular::circle()), Representation::regular_circle(256), 1e-6),
    ]
}

/// The `e^{-1/xi}` two-term complex: a line element, no scalar, and a
/// divergence certificate.
pub fn detclass_free() -> CheckResult {
    let dev = (|| {
        let d = interval_family(10_000, flat_exponential);
        let cx = ChainComplex::from_differentials(vec![d])?;
        let r = torsion::torsion(&cx, &torsion::complex_frame(&cx), &TorsionOptions::default())?;
        let divergent = r.detclass.iter().any(|v| v.status == DetClassStatus::Divergent);
        let ok = r.scalar_value.is_none() && !r.combined.is_scalar() && r.combined.log_coeff.is_finite() && divergent;
        Ok(if ok { 0.0 } else { 1.0 })
    })();
    single("determinant-class-free torsion", dev, 0.0)
}

/// Runs one named suite (or `all`).
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = random::rng(seed);
    let out = match name {
        "all" => {
            let mut all = Vec::new();
            for s in SUITES {
                all.extend(run_suite(s, seed)?);
            }
            all
        }
        "fk" => sample_backends().iter().flat_map(|(n, b)| fk_laws(n, b, 200, &mut rng)).collect(),
        "spectral" => {
            let mut v = spectral_oracles();
            v.push(detclass_free());
            v
        }
        "torsion" => torsion_formulas(100, &mut rng),
        "epsilon" => vec![eps_independence(50, &mut rng)],
        "exact" => vec![exact_sequences(100, &mut rng)],
        "cone" => vec![cones(100, &mut rng)],
        "oracles" => cellular_oracles(),
        "subdivision" => subdivisions(seed),
        other => return Err(Error::Parse(format!("unknown suite `{other}`; expected all or one of {SUITES:?}"))),
    };
    Ok(out)
}

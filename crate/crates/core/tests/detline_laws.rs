use l2torsion::category::{CategoryBackend, HObject, Morphism};
use l2torsion::detline::{self, DetLineElement, SequenceLabels};
use l2torsion::linalg::{self, c, CMat};
use l2torsion::random;
use l2torsion::spectral::LadderConfig;
use proptest::prelude::*;

fn labels() -> SequenceLabels<'static> {
    SequenceLabels { middle: "M", sub: "M'", quotient: "M''" }
}

/// Canonical injection `C^k -> C^n` and projection `C^n -> C^(n-k)`.
fn split_pair(n: usize, k: usize) -> (Morphism, Morphism) {
    let b = CategoryBackend::matrix();
    let a = CMat::from_fn(n, k, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let p = CMat::from_fn(n - k, n, |i, j| if j == i + k { c(1.0, 0.0) } else { c(0.0, 0.0) });
    (Morphism::from_matrix(&b, a).unwrap(), Morphism::from_matrix(&b, p).unwrap())
}

#[test]
fn standard_frames_and_rescaled_products() {
    let b = CategoryBackend::matrix();
    let four = HObject::free(&b, 1).with_product(vec![CMat::from_element(1, 1, c(4.0, 0.0))]).unwrap();
    let x = detline::element_in_standard_frame(&four, "std");
    assert!((x.log_coeff + 0.5 * 4f64.ln()).abs() < 1e-14);
    let diag = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), c(8.0, 0.0)]));
    let y = detline::element_in_standard_frame(&HObject::free(&b, 2).with_product(vec![diag]).unwrap(), "std");
    assert!((y.log_coeff + 0.5 * 16f64.ln()).abs() < 1e-14);
    assert_eq!(detline::element_in_standard_frame(&HObject::free(&b, 3), "std").log_coeff, 0.0);
}

#[test]
fn push_forward_examples() {
    let b = CategoryBackend::matrix();
    let x = DetLineElement::frame("M");
    let two = Morphism::from_matrix(&b, CMat::from_element(1, 1, c(2.0, 0.0))).unwrap();
    assert!((detline::push_forward(&two, &x, "M", "N").unwrap().log_coeff - 2f64.ln()).abs() < 1e-14);
    let d = Morphism::from_matrix(&b, CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(3.0, 0.0)]))).unwrap();
    let pushed = detline::push_forward(&d, &x, "M", "N").unwrap();
    assert!((pushed.log_coeff - 3f64.ln()).abs() < 1e-14);
    assert_eq!(pushed.exponent("N"), 1);
    assert_eq!(pushed.exponent("M"), 0);
}

#[test]
fn split_sequences_are_trivial_and_conjugation_shifts_by_log_det() {
    let (alpha, beta) = split_pair(3, 1);
    let x = DetLineElement::frame("M");
    let out = detline::exact_sequence_iso(&alpha, &beta, &x, &labels()).unwrap();
    assert!(out.log_coeff.abs() < 1e-14);
    assert_eq!((out.exponent("M'"), out.exponent("M''"), out.exponent("M")), (1, 1, 0));

    // one-dimensional M with h = 2
    let b = CategoryBackend::matrix();
    let one = Morphism::from_matrix(&b, CMat::from_element(1, 1, c(1.0, 0.0))).unwrap();
    let zero = Morphism::from_matrix(&b, CMat::zeros(0, 1)).unwrap();
    let base = detline::exact_sequence_iso(&one, &zero, &x, &labels()).unwrap();
    let h = Morphism::from_matrix(&b, CMat::from_element(1, 1, c(2.0, 0.0))).unwrap();
    let hinv = Morphism::from_matrix(&b, CMat::from_element(1, 1, c(0.5, 0.0))).unwrap();
    let moved = detline::exact_sequence_iso(&h.compose(&one).unwrap(), &zero.compose(&hinv).unwrap(), &x, &labels()).unwrap();
    assert!((moved.log_coeff - base.log_coeff + 2f64.ln()).abs() < 1e-12);
}

#[test]
fn non_exact_sequences_are_rejected() {
    let (alpha, _) = split_pair(3, 1);
    let (_, beta) = split_pair(3, 2);
    assert!(detline::exact_sequence_iso(&alpha, &beta, &DetLineElement::frame("M"), &labels()).is_err());
}

#[test]
fn canonical_trivialization_of_interval_families() {
    let cfg = LadderConfig::default();
    let b = CategoryBackend::interval_grid(4000);
    let xi = Morphism::from_family_fn(&b, 1, 1, |x| CMat::from_element(1, 1, c(x, 0.0))).unwrap();
    let e = detline::canonical_trivialization(&xi, &cfg, "A", "A'").unwrap();
    assert!((e.log_coeff + 1.0).abs() < 1e-3, "{}", e.log_coeff);
    let flat = Morphism::from_family_fn(&b, 1, 1, |x| CMat::from_element(1, 1, c((-1.0 / x).exp(), 0.0))).unwrap();
    assert!(detline::canonical_trivialization(&flat, &cfg, "A", "A'").is_err());
    let onto = Morphism::from_family_fn(&b, 1, 1, |_| CMat::from_element(1, 1, c(1.0, 0.0))).unwrap();
    assert!(detline::canonical_trivialization(&onto, &cfg, "A", "A'").unwrap().log_coeff.abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_changes_compose(seed in any::<u64>(), n in 1usize..5, l in -3.0f64..3.0) {
        let mut rng = random::rng(seed);
        let (p1, p2, p3) = (random::positive_definite(&mut rng, n), random::positive_definite(&mut rng, n), random::positive_definite(&mut rng, n));
        let w = [1.0];
        let x = DetLineElement::frame("P1").with_log(l);
        let via = x
            .reexpress("P1", "P2", detline::log_det_product_change(&[p1.clone()], &[p2.clone()], &w))
            .reexpress("P2", "P3", detline::log_det_product_change(&[p2], &[p3.clone()], &w));
        let direct = x.reexpress("P1", "P3", detline::log_det_product_change(&[p1], &[p3], &w));
        prop_assert!(via.approx_eq(&direct, 1e-10));
    }

    #[test]
    fn push_forward_is_functorial(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = random::rng(seed);
        let b = CategoryBackend::matrix();
        let (fm, gm) = (random::invertible(&mut rng, n), random::invertible(&mut rng, n));
        let f = Morphism::from_matrix(&b, fm.clone()).unwrap();
        let g = Morphism::from_matrix(&b, gm.clone()).unwrap();
        let x = DetLineElement::frame("L").with_log(0.25);
        let stepwise = detline::push_forward(&g, &detline::push_forward(&f, &x, "L", "M").unwrap(), "M", "N").unwrap();
        let once = detline::push_forward(&g.compose(&f).unwrap(), &x, "L", "N").unwrap();
        prop_assert!(stepwise.approx_eq(&once, 1e-10));
        // oracle: |det(gf)|
        let expected = 0.25 + linalg::log_abs_det(&(gm * fm));
        prop_assert!((once.log_coeff - expected).abs() < 1e-10);
    }

    #[test]
    fn direct_sums_do_not_depend_on_summand_products(seed in any::<u64>(), k in 1usize..4, l in 1usize..4) {
        let mut rng = random::rng(seed);
        let b = CategoryBackend::matrix();
        let m = HObject::free(&b, k).with_product(vec![random::positive_definite(&mut rng, k)]).unwrap();
        let n = HObject::free(&b, l).with_product(vec![random::positive_definite(&mut rng, l)]).unwrap();
        let sum = m.direct_sum(&n).unwrap();
        let parts = detline::direct_sum_iso(
            &detline::element_in_standard_frame(&m, "Mstd"), "Mstd",
            &detline::element_in_standard_frame(&n, "Nstd"), "Nstd", "S",
        ).unwrap();
        let whole = detline::element_in_standard_frame(&sum, "S");
        prop_assert!(parts.approx_eq(&whole, 1e-10));
    }

    #[test]
    fn psi_does_not_depend_on_the_middle_product(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = random::rng(seed);
        let b = CategoryBackend::matrix();
        let k = 1 + (seed as usize) % (n - 1);
        let g = random::invertible(&mut rng, n);
        let (a0, b0) = split_pair(n, k);
        let ginv = g.clone().try_inverse().unwrap();
        let alpha = Morphism::from_matrix(&b, &g * &a0.fibers()[0]).unwrap();
        let beta = Morphism::from_matrix(&b, &b0.fibers()[0] * &ginv).unwrap();
        let x = DetLineElement::frame("M").with_log(0.5);
        let base = detline::exact_sequence_iso(&alpha, &beta, &x, &labels()).unwrap();

        let p = random::positive_definite(&mut rng, n);
        let mid = HObject::free(&b, n).with_product(vec![p.clone()]).unwrap();
        let alpha_p = alpha.with_objects(alpha.source().clone(), mid.clone()).unwrap();
        let beta_p = beta.with_objects(mid, beta.target().clone()).unwrap();
        let x_p = x.reexpress("M", "M", detline::log_det_product_change(&[linalg::eye(n)], &[p], &[1.0]));
        let moved = detline::exact_sequence_iso(&alpha_p, &beta_p, &x_p, &labels()).unwrap();
        prop_assert!(moved.approx_eq(&base, 1e-9), "{} vs {}", moved, base);
    }

    #[test]
    fn conjugating_the_sequence_shifts_by_log_det(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = random::rng(seed);
        let b = CategoryBackend::matrix();
        let (alpha, beta) = split_pair(n, 1);
        let hm = random::invertible(&mut rng, n);
        let h = Morphism::from_matrix(&b, hm.clone()).unwrap();
        let hinv = Morphism::from_matrix(&b, hm.clone().try_inverse().unwrap()).unwrap();
        let x = DetLineElement::frame("M");
        let base = detline::exact_sequence_iso(&alpha, &beta, &x, &labels()).unwrap();
        let moved = detline::exact_sequence_iso(&h.compose(&alpha).unwrap(), &beta.compose(&hinv).unwrap(), &x, &labels()).unwrap();
        let shift = moved.log_coeff - base.log_coeff;
        prop_assert!((shift + linalg::log_abs_det(&hm)).abs() < 1e-9, "shift {}", shift);
    }
}

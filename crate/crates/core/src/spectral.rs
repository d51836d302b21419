//! Spectral density functions, Fuglede–Kadison determinants and the
//! determinant-class classification.
//!
//! All determinants are exchanged as natural logarithms.

use serde::{Deserialize, Serialize};

use crate::category::{Morphism, RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg;

/// `phi(lambda) = tau(E_lambda)` of a nonnegative self-adjoint morphism,
/// stored as merged breakpoints `(lambda_k > 0, mass_k)` plus the mass at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub breakpoints: Vec<(f64, f64)>,
    pub zero_mass: f64,
}

impl SpectralDensity {
    /// Builds a density from `(value, mass)` pairs; values `<= 0` go to the
    /// zero mass. Pairs are sorted by value, ties keep input order (fiber
    /// order), and identical values merge.
    pub fn from_values(values: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut zero_mass = 0.0;
        let mut pos: Vec<(f64, f64)> = Vec::new();
        for (v, m) in values {
            if v > 0.0 {
                pos.push((v, m));
            } else {
                zero_mass += m;
            }
        }
        pos.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut breakpoints: Vec<(f64, f64)> = Vec::with_capacity(pos.len());
        for (v, m) in pos {
            match breakpoints.last_mut() {
                Some(last) if last.0 == v => last.1 += m,
                _ => breakpoints.push((v, m)),
            }
        }
        Self { breakpoints, zero_mass }
    }

    pub fn phi(&self, lambda: f64) -> f64 {
        if lambda < 0.0 {
            return 0.0;
        }
        let k = self.breakpoints.partition_point(|&(v, _)| v <= lambda);
        self.zero_mass + self.breakpoints[..k].iter().map(|&(_, m)| m).sum::<f64>()
    }

    pub fn total_mass(&self) -> f64 {
        self.zero_mass + self.positive_mass()
    }

    pub fn positive_mass(&self) -> f64 {
        self.breakpoints.iter().map(|&(_, m)| m).sum()
    }

    pub fn max_value(&self) -> Option<f64> {
        self.breakpoints.last().map(|&(v, _)| v)
    }

    pub fn min_positive(&self) -> Option<f64> {
        self.breakpoints.first().map(|&(v, _)| v)
    }

    /// `∫_{(0,∞)} ln(lambda) dphi`, the zero mass excluded.
    pub fn log_integral(&self) -> f64 {
        self.breakpoints.iter().map(|&(v, m)| m * v.ln()).sum()
    }

    /// `∫_{[eps,∞)} ln(lambda) dphi`.
    pub fn log_integral_from(&self, eps: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&(v, _)| v < eps);
        self.breakpoints[k..].iter().map(|&(v, m)| m * v.ln()).sum()
    }

    /// Restriction to the breakpoints selected by `keep`.
    pub fn filter(&self, keep: impl Fn(f64) -> bool) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().copied().filter(|&(v, _)| keep(v)).collect(),
            zero_mass: 0.0,
        }
    }

    /// Pushes the density forward along `lambda -> f(lambda)` (f increasing).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|&(v, m)| (f(v), m)).collect(),
            zero_mass: self.zero_mass,
        }
    }

    /// CSV dump with columns `lambda,cumulative_mass`; the first row is the
    /// mass at zero.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,cumulative_mass\n");
        let mut acc = self.zero_mass;
        out.push_str(&format!("0,{acc:.17e}\n"));
        for &(v, m) in &self.breakpoints {
            acc += m;
            out.push_str(&format!("{v:.17e},{acc:.17e}\n"));
        }
        out
    }
}

/// Density of a self-adjoint nonnegative morphism from its eigenvalues.
/// Eigenvalues below `tol` times the fiber's largest one count as kernel.
pub fn spectral_density(m: &Morphism, tol: f64) -> Result<SpectralDensity> {
    if !m.is_self_adjoint(1e-9) {
        return Err(Error::NotSelfAdjoint("spectral density needs a self-adjoint morphism".into()));
    }
    let weights = m.backend().fiber_weights();
    let mut values = Vec::new();
    for (j, f) in m.normalized_fibers().iter().enumerate() {
        let ev = linalg::hermitian_eigenvalues(f);
        let top = ev.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if let Some(&low) = ev.first() {
            if low < -(1e-9 * top).max(1e-14) {
                return Err(Error::NotSelfAdjoint(format!("negative eigenvalue {low} in fiber {j}")));
            }
        }
        for v in ev {
            let v = if v <= tol * top { 0.0 } else { v };
            values.push((v, weights[j]));
        }
    }
    Ok(SpectralDensity::from_values(values))
}

/// Density of `(alpha* alpha)^{1/2}` from singular values, fiberwise. The
/// kernel of `alpha` lands in `zero_mass`.
pub fn singular_density(alpha: &Morphism, tol: f64) -> SpectralDensity {
    let weights = alpha.backend().fiber_weights();
    let mut values = Vec::new();
    for (j, f) in alpha.normalized_fibers().iter().enumerate() {
        let r = linalg::ranges(f, tol);
        let kernel = f.ncols() - r.rank();
        values.extend(r.values.iter().map(|&s| (s, weights[j])));
        values.extend(std::iter::repeat((0.0, weights[j])).take(kernel));
    }
    SpectralDensity::from_values(values)
}

/// `log Det_tau(a)` for an invertible `a`, via `Det((a*a)^{1/2})`.
pub fn fk_det(a: &Morphism) -> Result<f64> {
    fk_det_tol(a, RANK_TOL)
}

pub fn fk_det_tol(a: &Morphism, tol: f64) -> Result<f64> {
    let weights = a.backend().fiber_weights();
    let mut total = 0.0;
    for (j, f) in a.normalized_fibers().iter().enumerate() {
        if f.nrows() != f.ncols() {
            return Err(Error::NotInvertible(format!("fiber {j} is not square")));
        }
        let r = linalg::ranges(f, tol);
        if r.rank() < f.ncols() {
            return Err(Error::NotInvertible(format!("fiber {j} has a kernel")));
        }
        total += weights[j] * r.values.iter().map(|s| s.ln()).sum::<f64>();
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetClassStatus {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetClassVerdict {
    pub status: DetClassStatus,
    /// `∫ ln(lambda) dphi`; `None` stands for `-∞` (Divergent) or unknown.
    pub log_integral: Option<f64>,
    pub ns_exponent: Option<f64>,
    /// `[eps, I(eps)]` pairs along the decreasing ladder.
    pub ladder: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl DetClassVerdict {
    pub fn is_convergent(&self) -> bool {
        self.status == DetClassStatus::Convergent
    }

    fn trivial() -> Self {
        Self { status: DetClassStatus::Convergent, log_integral: Some(0.0), ns_exponent: None, ladder: Vec::new(), note: None }
    }
}

/// Knobs of the divergence certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    /// Ladder `eps_m = lambda_max * 10^-m`, `m = 1..=depth`.
    pub depth: usize,
    /// Number of trailing rung increments inspected.
    pub window: usize,
    /// Projected remaining decrease (nats) that certifies divergence.
    pub slack: f64,
    /// Increment ratio at or above which the ladder counts as not decelerating.
    pub deceleration: f64,
    pub rank_tol: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self { depth: 12, window: 4, slack: 0.5, deceleration: 0.8, rank_tol: RANK_TOL }
    }
}

/// Classifies `∫_0^∞ ln(lambda) dphi > -∞` from a density of positive values.
pub fn classify(density: &SpectralDensity, cfg: &LadderConfig) -> DetClassVerdict {
    let Some(top) = density.max_value() else {
        return DetClassVerdict::trivial();
    };
    let ladder: Vec<(f64, f64)> = (1..=cfg.depth)
        .map(|m| {
            let eps = top * 10f64.powi(-(m as i32));
            (eps, density.log_integral_from(eps))
        })
        .collect();
    let ns_exponent = ns_exponent(density);
    let full = density.log_integral();
    let increments: Vec<f64> = ladder.windows(2).map(|w| (w[0].1 - w[1].1).abs()).collect();
    let tail = &increments[increments.len().saturating_sub(cfg.window)..];
    let scale = 1.0 + full.abs();
    let negligible = |d: f64| d <= 1e-12 * scale;

    let verdict = |status, log_integral, note: Option<String>| DetClassVerdict {
        status,
        log_integral,
        ns_exponent,
        ladder: ladder.clone(),
        note,
    };

    if tail.iter().all(|&d| negligible(d)) {
        return verdict(DetClassStatus::Convergent, Some(full), None);
    }
    if tail.iter().any(|&d| negligible(d)) {
        // the spectrum thins out inside the window: decelerating
        let last_nonzero = tail.iter().rposition(|&d| !negligible(d)).unwrap();
        if last_nonzero + 1 < tail.len() {
            return verdict(DetClassStatus::Convergent, Some(full), None);
        }
        return verdict(DetClassStatus::Inconclusive, None, Some("sparse ladder increments".into()));
    }
    let ratios: Vec<f64> = tail.windows(2).map(|w| w[1] / w[0]).collect();
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let last = *tail.last().unwrap();
    let decrease: f64 = tail.iter().sum();
    if ratios.iter().all(|&r| r >= cfg.deceleration) {
        let projected = if mean_ratio >= 1.0 { f64::INFINITY } else { last * mean_ratio / (1.0 - mean_ratio) };
        if decrease + projected > cfg.slack {
            return verdict(
                DetClassStatus::Divergent,
                None,
                Some(format!("no deceleration (mean increment ratio {mean_ratio:.3}); projected decrease {:.3} nats", decrease + projected)),
            );
        }
    }
    if ratios.iter().all(|&r| r < cfg.deceleration) {
        let projected = last * mean_ratio / (1.0 - mean_ratio);
        if projected < cfg.slack {
            return verdict(DetClassStatus::Convergent, Some(full), None);
        }
    }
    verdict(
        DetClassStatus::Inconclusive,
        None,
        Some(format!("ladder neither stabilizes nor certifies divergence (ratios {ratios:?})")),
    )
}

/// `log Det` of an injective morphism with dense image, with divergence
/// classification at `lambda -> 0`. The log is `∫ ln(lambda) dphi` for
/// `(alpha* alpha)^{1/2}`, finite iff the verdict is Convergent.
pub fn fk_det_extended(alpha: &Morphism, cfg: &LadderConfig) -> Result<(Option<f64>, DetClassVerdict)> {
    let density = singular_density(alpha, cfg.rank_tol);
    if density.zero_mass > 0.0 {
        return Err(Error::NotInjective(format!("kernel of von Neumann dimension {}", density.zero_mass)));
    }
    let v = classify(&density, cfg);
    Ok((v.log_integral, v))
}

/// Injectivity, dense image and convergence of the log integral.
pub fn tau_isomorphism_test(alpha: &Morphism, cfg: &LadderConfig) -> DetClassVerdict {
    let density = singular_density(alpha, cfg.rank_tol);
    let rank_mass = density.positive_mass();
    let mut v = classify(&density, cfg);
    if density.zero_mass > 0.0 {
        v.status = DetClassStatus::Divergent;
        v.log_integral = None;
        v.note = Some(format!("not injective: kernel of dimension {}", density.zero_mass));
    } else if (alpha.target().dim_tau() - rank_mass).abs() > 1e-9 * (1.0 + rank_mass) {
        v.status = DetClassStatus::Divergent;
        v.log_integral = None;
        v.note = Some("image is not dense".into());
    }
    v
}

/// Novikov–Shubin exponent estimate: least-squares slope of
/// `log(phi(lambda) - phi(0))` against `log(lambda)` over the lowest tenth of
/// the positive mass. Needs at least 8 distinct values spanning a decade.
pub fn ns_exponent(d: &SpectralDensity) -> Option<f64> {
    let total = d.positive_mass();
    if total <= 0.0 {
        return None;
    }
    // group nearly equal values (symmetric fibers produce duplicates)
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for &(v, m) in &d.breakpoints {
        match groups.last_mut() {
            Some(g) if (v - g.0).abs() <= 1e-12 * v => g.1 += m,
            _ => groups.push((v, m)),
        }
    }
    let mut pts = Vec::new();
    let mut acc = 0.0;
    for &(v, m) in &groups {
        if acc + m > 0.1 * total {
            break;
        }
        acc += m;
        pts.push((v.ln(), (acc - 0.5 * m).ln()));
    }
    if pts.len() < 8 {
        return None;
    }
    let span = pts.last().unwrap().0 - pts[0].0;
    if span < std::f64::consts::LN_10 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope > 0.0).then_some(slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::{CategoryBackend, GroupTable, HObject};
    use crate::linalg::{c, CMat};

    fn fam(n: usize, f: impl Fn(f64) -> f64) -> Morphism {
        let b = CategoryBackend::interval_grid(n);
        Morphism::from_family_fn(&b, 1, 1, |xi| CMat::from_element(1, 1, c(f(xi), 0.0))).unwrap()
    }

    #[test]
    fn eigenvalue_counting() {
        let b = CategoryBackend::matrix();
        let m = Morphism::from_matrix(&b, linalg::real_diag(&[1.0, 2.0, 2.0, 5.0])).unwrap();
        let d = spectral_density(&m, RANK_TOL).unwrap();
        assert_eq!(d.phi(2.0), 3.0);
        assert_eq!(d.phi(f64::INFINITY), 4.0);
        let z = Morphism::zero(&HObject::free(&b, 2), &HObject::free(&b, 2));
        assert_eq!(spectral_density(&z, RANK_TOL).unwrap().zero_mass, 2.0);
    }

    #[test]
    fn non_self_adjoint_rejected() {
        let b = CategoryBackend::matrix();
        let m = Morphism::from_real_rows(&b, 2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(spectral_density(&m, RANK_TOL), Err(Error::NotSelfAdjoint(_))));
    }

    #[test]
    fn exp_inverse_density_matches_analytic_inversion() {
        // phi(lambda) = 1 / ln(1/lambda) for lambda < e^-1
        let mut errs = Vec::new();
        for n in [1000usize, 8000] {
            let d = singular_density(&fam(n, |x| (-1.0 / x).exp().max(f64::MIN_POSITIVE)), RANK_TOL);
            let lam = 1e-4f64;
            errs.push((d.phi(lam) - 1.0 / (1.0 / lam).ln()).abs());
        }
        assert!(errs[1] < errs[0] && errs[1] < 1e-3, "{errs:?}");
    }

    #[test]
    fn fk_det_examples() {
        let b = CategoryBackend::matrix();
        let a = Morphism::scalar(&HObject::free(&b, 2), c(3.0, 0.0));
        assert!((fk_det(&a).unwrap() - 9f64.ln()).abs() < 1e-13);
        assert!(fk_det(&Morphism::identity(&HObject::free(&b, 4))).unwrap().abs() < 1e-15);

        let g = CategoryBackend::finite_group(GroupTable::cyclic(2));
        let a = Morphism::from_group_ring(&g, &[vec![vec![c(3.0, 0.0), c(1.0, 0.0)]]]).unwrap();
        assert!((fk_det(&a).unwrap() - 0.5 * 8f64.ln()).abs() < 1e-13);

        let s = Morphism::from_real_rows(&b, 2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(fk_det(&s), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn mahler_measure_of_z_minus_one() {
        // ∫ ln|e^{i theta} - 1| dtheta / 2pi = 0; midpoint error ~ 0.6/n
        let mut prev = f64::INFINITY;
        for n in [256usize, 1024, 4096] {
            let b = CategoryBackend::circle_grid(n);
            let a = Morphism::from_family_fn(&b, 1, 1, |t| CMat::from_element(1, 1, c(t.cos() - 1.0, t.sin()))).unwrap();
            let v = fk_det(&a).unwrap().abs();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 2e-4);
    }

    #[test]
    fn extended_det_of_identity_field() {
        let (log, v) = fk_det_extended(&fam(10_000, |x| x), &LadderConfig::default()).unwrap();
        assert_eq!(v.status, DetClassStatus::Convergent);
        assert!((log.unwrap() + 1.0).abs() < 1e-3);
    }

    #[test]
    fn extended_det_divergent() {
        let m = fam(10_000, |x| (-1.0 / x).exp().max(f64::MIN_POSITIVE));
        let (log, v) = fk_det_extended(&m, &LadderConfig::default()).unwrap();
        assert_eq!(v.status, DetClassStatus::Divergent, "{v:?}");
        assert!(log.is_none());
        assert!(v.ladder.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn extended_agrees_with_ordinary_on_invertibles() {
        let b = CategoryBackend::matrix();
        let a = Morphism::from_real_rows(&b, 2, 2, &[2.0, 1.0, 0.5, 3.0]).unwrap();
        let (log, v) = fk_det_extended(&a, &LadderConfig::default()).unwrap();
        assert!(v.is_convergent());
        assert!((log.unwrap() - fk_det(&a).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn extended_rejects_kernel() {
        let b = CategoryBackend::matrix();
        let a = Morphism::from_real_rows(&b, 2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(fk_det_extended(&a, &LadderConfig::default()), Err(Error::NotInjective(_))));
    }

    #[test]
    fn tau_iso_examples() {
        let cfg = LadderConfig::default();
        let b = CategoryBackend::matrix();
        let id = tau_isomorphism_test(&Morphism::identity(&HObject::free(&b, 3)), &cfg);
        assert_eq!(id.status, DetClassStatus::Convergent);
        assert_eq!(id.log_integral, Some(0.0));
        assert!(tau_isomorphism_test(&fam(2000, |x| x), &cfg).is_convergent());
        let div = tau_isomorphism_test(&fam(10_000, |x| (-1.0 / x).exp().max(f64::MIN_POSITIVE)), &cfg);
        assert_eq!(div.status, DetClassStatus::Divergent);
    }

    #[test]
    fn ns_exponents() {
        let d = singular_density(&fam(1000, |x| x), RANK_TOL);
        assert!((ns_exponent(&d).unwrap() - 1.0).abs() < 0.1);
        let d = singular_density(&fam(1000, |x| x * x), RANK_TOL);
        assert!((ns_exponent(&d).unwrap() - 0.5).abs() < 0.05);
        let b = CategoryBackend::matrix();
        let d = singular_density(&Morphism::from_matrix(&b, linalg::real_diag(&[1.0, 2.0, 3.0])).unwrap(), RANK_TOL);
        assert!(ns_exponent(&d).is_none());
        let d = singular_density(&fam(1000, |x| 2.0 + x), RANK_TOL);
        assert!(ns_exponent(&d).is_none());
    }

    #[test]
    fn csv_dump() {
        let d = SpectralDensity::from_values([(0.0, 1.0), (2.0, 0.5), (1.0, 0.5)]);
        let csv = d.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "lambda,cumulative_mass");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with("2.00000000000000000e0"));
    }
}

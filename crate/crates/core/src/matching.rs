//! The scalar interface-matching equation.
//!
//! With `t = E − K x`,
//!
//! ```text
//! f(x) = σ₁ |t|^{p−2} t − σ₂ t − σ₂ x
//! ```
//!
//! is continuous and strictly decreasing whenever `σ₁, σ₂ > 0`, `p > 1` and
//! `0 < K < 1`, with `f → ±∞` as `x → ∓∞`. Its unique root `x₀ = 2B₂/g(ρ_c)`
//! fixes every coefficient of the coated-inclusion potential. Roots are found
//! by bracket expansion and bisection, which needs nothing beyond monotonicity,
//! followed by a guarded Newton polish.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingProblem {
    pub sigma1: f64,
    pub sigma2: f64,
    /// Applied field magnitude (signed).
    pub e_field: f64,
    pub k: f64,
    pub p: f64,
}

impl MatchingProblem {
    pub fn new(sigma1: f64, sigma2: f64, e_field: f64, k: f64, p: f64) -> Result<Self> {
        let prob = MatchingProblem {
            sigma1,
            sigma2,
            e_field,
            k,
            p,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.sigma1, self.sigma2, self.e_field, self.k, self.p]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("matching parameters must be finite"));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(Error::invalid(format!(
                "conductivities must be positive, got sigma1={}, sigma2={}",
                self.sigma1, self.sigma2
            )));
        }
        if !(self.p > 1.0) {
            return Err(Error::invalid(format!("exponent p must exceed 1, got {}", self.p)));
        }
        if !(self.k > 0.0 && self.k < 1.0) {
            return Err(Error::invalid(format!("K must lie in (0,1), got {}", self.k)));
        }
        Ok(())
    }

    /// Bound on the root magnitude: `|x₀| ≤ max(|E|/K, |E|/(1−K))`.
    pub fn scale(&self) -> f64 {
        let e = self.e_field.abs();
        (e / self.k).max(e / (1.0 - self.k)).max(1.0)
    }

    /// Magnitude used to judge `|f(x₀)|`.
    pub fn residual_scale(&self) -> f64 {
        let e = self.e_field.abs();
        (self.sigma1 * e.powf(self.p - 1.0)).max(self.sigma2 * e).max(1.0)
    }
}

/// `sign(t)|t|^q`, zero at `t = 0`.
pub fn signed_pow(t: f64, q: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.signum() * t.abs().powf(q)
    }
}

/// The matching function.
pub fn f(x: f64, prob: &MatchingProblem) -> f64 {
    let t = prob.e_field - prob.k * x;
    prob.sigma1 * signed_pow(t, prob.p - 1.0) - prob.sigma2 * t - prob.sigma2 * x
}

/// `f'(x) = −K σ₁ (p−1) |E−Kx|^{p−2} − σ₂ (1−K)`; `None` at the kink
/// `x = E/K` when `p < 2`, where the slope is `−∞`.
pub fn f_derivative(x: f64, prob: &MatchingProblem) -> Option<f64> {
    let t = prob.e_field - prob.k * x;
    let core = if prob.p == 2.0 {
        1.0
    } else if t == 0.0 {
        if prob.p < 2.0 {
            return None;
        }
        0.0
    } else {
        t.abs().powf(prob.p - 2.0)
    };
    Some(-prob.k * prob.sigma1 * (prob.p - 1.0) * core + prob.sigma2 * (prob.k - 1.0))
}

/// Root of the matching equation plus the coefficients it determines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingSolution {
    pub x0: f64,
    pub k: f64,
    /// Uniform core field, `A₁ = E − K x₀`.
    pub a1: f64,
    /// Coating constant term, equal to `A₁` by potential continuity.
    pub a2: f64,
    /// `|σ₁|A₁|^{p−2}A₁ − σ₂A₁ − σ₂x₀|`, i.e. `|f(x₀)|` with `E − Kx₀`
    /// taken as the stored `A₁`.
    pub residual: f64,
}

impl MatchingSolution {
    /// Coating coefficient `B₂ = x₀ g(ρ_c) / 2` for a prototype with
    /// `g(ρ_c) = g_core`.
    pub fn b2(&self, g_core: f64) -> f64 {
        0.5 * self.x0 * g_core
    }
}

fn check_solvable(prob: &MatchingProblem) -> Result<()> {
    prob.validate()?;
    if prob.p < 2.0 && prob.e_field == 0.0 {
        return Err(Error::invalid(
            "E = 0 with p < 2 makes the core conductivity |A1|^(p-2) singular",
        ));
    }
    Ok(())
}

/// Expand a bracket until `f(lo) > 0 > f(hi)`, then bisect to adjacent
/// floats. Returns the final bracket and the endpoint with smaller `|f|`.
///
/// Every step is symmetric under `(E, x) → (−E, −x)`, so the root of the
/// negated problem is the exact negation of this one.
fn bisect(prob: &MatchingProblem) -> Result<(f64, f64, f64)> {
    let ek = prob.e_field / prob.k;
    let mut lo = ek.min(0.0) - 1.0;
    let mut hi = ek.max(0.0) + 1.0;
    let mut width = hi - lo;
    let mut flo = f(lo, prob);
    let mut fhi = f(hi, prob);
    let mut expansions = 0;
    while !(flo > 0.0 && fhi < 0.0) {
        if flo == 0.0 {
            return Ok((lo, lo, lo));
        }
        if fhi == 0.0 {
            return Ok((hi, hi, hi));
        }
        if flo < 0.0 {
            lo -= width;
            flo = f(lo, prob);
        }
        if fhi > 0.0 {
            hi += width;
            fhi = f(hi, prob);
        }
        width *= 2.0;
        expansions += 1;
        if !(lo.is_finite() && hi.is_finite() && flo.is_finite() && fhi.is_finite()) || expansions > 2000 {
            return Err(Error::Pathology(format!(
                "bracket expansion overflowed for {prob:?}"
            )));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid, prob);
        if fm > 0.0 {
            lo = mid;
            flo = fm;
        } else if fm < 0.0 {
            hi = mid;
            fhi = fm;
        } else {
            return Ok((mid, mid, mid));
        }
    }
    let root = match flo.abs().partial_cmp(&fhi.abs()) {
        Some(std::cmp::Ordering::Less) => lo,
        Some(std::cmp::Ordering::Greater) => hi,
        _ => {
            if lo.abs() <= hi.abs() {
                lo
            } else {
                hi
            }
        }
    };
    Ok((lo, hi, root))
}

/// Root by bracketing and bisection alone.
pub fn solve_matching_bisection(prob: &MatchingProblem) -> Result<f64> {
    check_solvable(prob)?;
    Ok(bisect(prob)?.2)
}

/// The matching equation in the core-field variable `t = A₁ = E − K x`:
/// `σ₁|t|^{p−2}t − σ₂t − σ₂(E − t)/K`, strictly increasing in `t`.
///
/// For `p < 2` the root can sit so close to the kink `t = 0` that no
/// representable `x` resolves it, while `t` itself is perfectly well
/// conditioned.
pub fn core_field_residual(t: f64, prob: &MatchingProblem) -> f64 {
    prob.sigma1 * signed_pow(t, prob.p - 1.0) - prob.sigma2 * t - prob.sigma2 * (prob.e_field - t) / prob.k
}

/// Bisection in `t` to adjacent floats, starting from the image of the
/// `x`-bracket. Symmetric under `(E, t) → (−E, −t)`.
fn refine_core_field(prob: &MatchingProblem, x_lo: f64, x_hi: f64) -> f64 {
    let h = |t: f64| core_field_residual(t, prob);
    let mut lo = prob.e_field - prob.k * x_hi;
    let mut hi = prob.e_field - prob.k * x_lo;
    let mut pad = 4.0 * f64::EPSILON * prob.e_field.abs().max(lo.abs()).max(hi.abs()).max(f64::MIN_POSITIVE);
    let mut hlo = h(lo);
    let mut hhi = h(hi);
    for _ in 0..2100 {
        if !(hlo > 0.0 || hhi < 0.0) {
            break;
        }
        if hlo > 0.0 {
            lo -= pad;
            hlo = h(lo);
        }
        if hhi < 0.0 {
            hi += pad;
            hhi = h(hi);
        }
        pad *= 2.0;
    }
    if hlo == 0.0 {
        return lo;
    }
    if hhi == 0.0 {
        return hi;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let hm = h(mid);
        if hm < 0.0 {
            lo = mid;
            hlo = hm;
        } else if hm > 0.0 {
            hi = mid;
            hhi = hm;
        } else {
            return mid;
        }
    }
    match hlo.abs().partial_cmp(&hhi.abs()) {
        Some(std::cmp::Ordering::Less) => lo,
        Some(std::cmp::Ordering::Greater) => hi,
        _ => {
            if lo.abs() <= hi.abs() {
                lo
            } else {
                hi
            }
        }
    }
}

/// The unique root of the matching equation with derived coefficients.
///
/// Bisection in `x` locates the root; the core field `A₁` is then resolved
/// to full precision in its own variable and `x₀ = (E − A₁)/K`. The reported
/// residual is the matching identity evaluated at the stored `(A₁, x₀)`.
pub fn solve_matching(prob: &MatchingProblem) -> Result<MatchingSolution> {
    check_solvable(prob)?;
    let (lo, hi, _) = bisect(prob)?;
    let a1 = refine_core_field(prob, lo, hi);
    let x = (prob.e_field - a1) / prob.k;

    let delta = 1e-9 * prob.scale();
    if !(f(x - delta, prob) > 0.0 && f(x + delta, prob) < 0.0) {
        return Err(Error::Pathology(format!(
            "matching root {x} does not separate the sign of f for {prob:?}"
        )));
    }
    let residual = (prob.sigma1 * signed_pow(a1, prob.p - 1.0) - prob.sigma2 * a1 - prob.sigma2 * x).abs();
    Ok(MatchingSolution {
        x0: x,
        k: prob.k,
        a1,
        a2: a1,
        residual,
    })
}

/// Closed-form root for `p = 2`: `x̄₀ = E(σ₁−σ₂)/(K(σ₁−σ₂)+σ₂)`.
pub fn closed_form_root_p2(prob: &MatchingProblem) -> Result<f64> {
    prob.validate()?;
    if prob.p != 2.0 {
        return Err(Error::invalid(format!(
            "closed-form root needs p = 2, got p = {}",
            prob.p
        )));
    }
    let contrast = prob.sigma1 - prob.sigma2;
    Ok(prob.e_field * contrast / (prob.k * contrast + prob.sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn prob(s1: f64, s2: f64, e: f64, k: f64, p: f64) -> MatchingProblem {
        MatchingProblem::new(s1, s2, e, k, p).unwrap()
    }

    #[test]
    fn f_special_points() {
        let pr = prob(10.0, 1.0, 1.5, 0.25, 3.0);
        assert_eq!(f(0.0, &pr), 10.0 * 1.5f64.powf(2.0) - 1.5);
        assert_eq!(f(1.5 / 0.25, &pr), -1.5 / 0.25);
        let p2 = prob(10.0, 1.0, 1.0, 0.3, 2.0);
        for x in [-3.0, 0.0, 0.7, 5.0] {
            assert_relative_eq!(f(x, &p2), 9.0 * (1.0 - 0.3 * x) - x, epsilon = 1e-14);
        }
    }

    #[test]
    fn signed_pow_continuous_at_zero() {
        assert_eq!(signed_pow(0.0, 0.5), 0.0);
        assert_eq!(signed_pow(-4.0, 0.5), -2.0);
    }

    #[test]
    fn equal_conductivities() {
        let sol = solve_matching(&prob(2.0, 2.0, 1.0, 0.2, 2.0)).unwrap();
        assert_eq!(sol.x0, 0.0);
        assert_eq!(sol.a1, 1.0);
    }

    #[test]
    fn linear_reference_root() {
        let pr = prob(10.0, 1.0, 1.0, 1.0 / 6.0, 2.0);
        let sol = solve_matching(&pr).unwrap();
        assert_relative_eq!(sol.x0, 3.6, max_relative = 1e-14);
        assert_relative_eq!(sol.a1, 0.4, max_relative = 1e-13);
        assert_eq!(sol.a1, sol.a2);
        assert_relative_eq!(closed_form_root_p2(&pr).unwrap(), 3.6, max_relative = 1e-15);
    }

    #[test]
    fn cubic_reference_root() {
        // mpmath findroot at 40 digits
        let pr = prob(10.0, 1.0, 1.0, 1.0 / 6.0, 3.0);
        let sol = solve_matching(&pr).unwrap();
        assert_relative_eq!(sol.x0, 2.6163538211700880838, max_relative = 1e-14);
        assert!(sol.residual < 1e-12 * pr.residual_scale());
    }

    #[test]
    fn closed_form_properties() {
        assert_eq!(closed_form_root_p2(&prob(3.0, 3.0, 1.0, 0.4, 2.0)).unwrap(), 0.0);
        let a = closed_form_root_p2(&prob(10.0, 1.0, 2.0, 0.4, 2.0)).unwrap();
        let b = closed_form_root_p2(&prob(10.0, 1.0, -2.0, 0.4, 2.0)).unwrap();
        assert_eq!(a, -b);
        assert!(closed_form_root_p2(&prob(10.0, 1.0, 1.0, 0.4, 2.5)).is_err());
    }

    #[test]
    fn zero_field() {
        let sol = solve_matching(&prob(10.0, 1.0, 0.0, 0.3, 3.0)).unwrap();
        assert_eq!(sol.x0, 0.0);
        assert_eq!(sol.a1, 0.0);
        assert!(matches!(
            solve_matching(&prob(10.0, 1.0, 0.0, 0.3, 1.5)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn invalid_problems() {
        assert!(MatchingProblem::new(0.0, 1.0, 1.0, 0.3, 2.0).is_err());
        assert!(MatchingProblem::new(1.0, 1.0, 1.0, 1.0, 2.0).is_err());
        assert!(MatchingProblem::new(1.0, 1.0, 1.0, 0.3, 1.0).is_err());
        assert!(MatchingProblem::new(1.0, 1.0, f64::NAN, 0.3, 2.0).is_err());
    }

    #[test]
    fn approaches_linear_root_as_p_tends_to_two() {
        let base = prob(10.0, 1.0, 1.3, 0.2, 2.0);
        let exact = closed_form_root_p2(&base).unwrap();
        let gaps: Vec<f64> = [2.1, 2.01, 2.001]
            .iter()
            .map(|&p| (solve_matching(&MatchingProblem { p, ..base }).unwrap().x0 - exact).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        assert!(gaps[2] < 1e-2);
    }

    #[test]
    fn sublinear_core_near_kink() {
        // p < 2: the root sits where the slope is steep but finite
        let pr = prob(50.0, 1.0, 1e-3, 0.9, 1.2);
        let sol = solve_matching(&pr).unwrap();
        assert!(sol.residual < 1e-12 * pr.residual_scale());
    }

    fn problem_strategy() -> impl Strategy<Value = MatchingProblem> {
        (0.1f64..100.0, 0.1f64..100.0, -10.0f64..10.0, 0.01f64..0.95, 1.2f64..4.0)
            .prop_filter("E = 0 only valid for p >= 2", |(_, _, e, _, p)| *e != 0.0 || *p >= 2.0)
            .prop_map(|(s1, s2, e, k, p)| MatchingProblem { sigma1: s1, sigma2: s2, e_field: e, k, p })
    }

    proptest! {
        #[test]
        fn strictly_decreasing(pr in problem_strategy(), a in -50.0f64..50.0, b in -50.0f64..50.0) {
            prop_assume!(a != b);
            let (x1, x2) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(f(x1, &pr) > f(x2, &pr));
        }

        #[test]
        fn odd_symmetry_is_exact(pr in problem_strategy()) {
            let neg = MatchingProblem { e_field: -pr.e_field, ..pr };
            let a = solve_matching(&pr).unwrap();
            let b = solve_matching(&neg).unwrap();
            prop_assert_eq!(a.x0, -b.x0);
        }

        #[test]
        fn residual_and_sign_change(pr in problem_strategy()) {
            let sol = solve_matching(&pr).unwrap();
            prop_assert!(sol.residual < 1e-12 * pr.residual_scale());
            prop_assert!(sol.x0.abs() <= pr.scale());
        }
    }
}

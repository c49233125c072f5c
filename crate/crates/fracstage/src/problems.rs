//! Benchmark subdiffusion problems with exact solutions, the
//! zero-initial-condition transform, and solution-quality metrics.

use crate::autodiff::{Field, FnField, Jet2, Real};
use crate::special::{caputo_power, gamma, mittag_leffler};
use crate::{Error, Result};
use std::sync::Arc;

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `D^a_t u - u_xx = f` on `[0, l] x [0, T]` with Dirichlet-zero boundaries
/// and initial profile `phi`. The first two spatial derivatives of `phi`
/// accompany it when known analytically; they feed the zero-initial
/// transform and jets of derived exact solutions.
#[derive(Clone)]
pub struct SubdiffusionProblem {
    pub alpha: f64,
    pub length: f64,
    pub horizon: f64,
    pub source: SpaceTimeFn,
    pub initial: SpaceFn,
    pub initial_xx: Option<SpaceFn>,
    pub exact: Option<Arc<dyn Field>>,
}

impl std::fmt::Debug for SubdiffusionProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubdiffusionProblem")
            .field("alpha", &self.alpha)
            .field("length", &self.length)
            .field("horizon", &self.horizon)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl SubdiffusionProblem {
    /// Compatibility checks: `phi(0) = phi(l) = 0` and, when an exact
    /// solution is attached, `exact(x, 0) = phi(x)` on a test grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                msg: format!("must lie in (0,1), got {}", self.alpha),
            });
        }
        let phi = &self.initial;
        for x in [0.0, self.length] {
            if phi(x).abs() > 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "initial",
                    msg: format!("phi({x}) = {} violates zero boundaries", phi(x)),
                });
            }
        }
        if let Some(exact) = &self.exact {
            for i in 0..=32 {
                let x = self.length * i as f64 / 32.0;
                let d = (exact.value(x, 0.0) - phi(x)).abs();
                if d > 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "exact",
                        msg: format!("exact(x,0) differs from phi by {d:e} at x = {x}"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn exp_profile<S: Real>(x: S) -> S {
    // x (1 - x^2)^2
    let one = S::from_f64(1.0);
    x * (one - x.powi(2)).powi(2)
}

/// `u(x,t) = x (1 - x^2)^2 e^{-t}` on the unit square; the source combines a
/// Mittag-Leffler time factor with the Laplacian of the profile.
pub fn exponential_benchmark(alpha: f64) -> Result<SubdiffusionProblem> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            msg: format!("must lie in (0,1), got {alpha}"),
        });
    }
    let source = move |x: f64, t: f64| -> f64 {
        // D^a e^{-t} = -t^{1-a} E_{1,2-a}(-t)
        let ml = mittag_leffler(1.0, 2.0 - alpha, -t)
            .expect("Mittag-Leffler series converges for |z| <= T");
        -t.powf(1.0 - alpha) * ml * exp_profile(x) + 4.0 * x * (3.0 - 5.0 * x * x) * (-t).exp()
    };
    let problem = SubdiffusionProblem {
        alpha,
        length: 1.0,
        horizon: 1.0,
        source: Arc::new(source),
        initial: Arc::new(|x| exp_profile(x)),
        initial_xx: Some(Arc::new(|x| -12.0 * x + 20.0 * x * x * x)),
        exact: Some(Arc::new(FnField(|x: Jet2, t: Jet2| exp_profile(x) * (-t).exp()))),
    };
    problem.validate()?;
    Ok(problem)
}

/// `u(x,t) = x (1 - x) t` with `f = x(1-x) t^{1-a} / Gamma(2-a) + 2t`;
/// zero initial condition.
pub fn polynomial_benchmark(alpha: f64) -> Result<SubdiffusionProblem> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            msg: format!("must lie in (0,1), got {alpha}"),
        });
    }
    let g2ma = gamma(2.0 - alpha)?;
    let source = move |x: f64, t: f64| x * (1.0 - x) * t.powf(1.0 - alpha) / g2ma + 2.0 * t;
    let problem = SubdiffusionProblem {
        alpha,
        length: 1.0,
        horizon: 1.0,
        source: Arc::new(source),
        initial: Arc::new(|_| 0.0),
        initial_xx: Some(Arc::new(|_| 0.0)),
        exact: Some(Arc::new(FnField(|x: Jet2, t: Jet2| {
            x * (Jet2::constant(1.0) - x) * t
        }))),
    };
    problem.validate()?;
    Ok(problem)
}

struct ShiftedExact {
    exact: Arc<dyn Field>,
    initial: SpaceFn,
    initial_xx: SpaceFn,
}

impl Field for ShiftedExact {
    fn jet(&self, x: f64, t: f64) -> Jet2 {
        let e = self.exact.jet(x, t);
        // phi' is never consumed downstream (only values and Laplacians),
        // so it is reconstructed by central differences of phi.
        let h = 1e-6;
        let dphi = ((self.initial)(x + h) - (self.initial)(x - h)) / (2.0 * h);
        Jet2 { v: e.v - (self.initial)(x), dx: e.dx - dphi, dxx: e.dxx - (self.initial_xx)(x) }
    }

    fn value(&self, x: f64, t: f64) -> f64 {
        self.exact.value(x, t) - (self.initial)(x)
    }
}

/// Transform `u` to `v = u - phi`: zero initial data, source
/// `f + phi''`, exact solution shifted accordingly. Requires the analytic
/// second derivative of the initial profile.
pub fn shift_to_zero_initial(problem: &SubdiffusionProblem) -> Result<SubdiffusionProblem> {
    let phi_xx = problem.initial_xx.clone().ok_or(Error::MissingInitialCurvature)?;
    let src = problem.source.clone();
    let phi = problem.initial.clone();
    let phi_xx_for_src = phi_xx.clone();
    let source = move |x: f64, t: f64| src(x, t) + phi_xx_for_src(x);
    let exact: Option<Arc<dyn Field>> = problem.exact.clone().map(|exact| {
        Arc::new(ShiftedExact { exact, initial: phi.clone(), initial_xx: phi_xx.clone() })
            as Arc<dyn Field>
    });
    Ok(SubdiffusionProblem {
        alpha: problem.alpha,
        length: problem.length,
        horizon: problem.horizon,
        source: Arc::new(source),
        initial: Arc::new(|_| 0.0),
        initial_xx: Some(Arc::new(|_| 0.0)),
        exact,
    })
}

/// Default evaluation lattice for reported errors: 100 x 100 uniform
/// intervals with the `t = 0` row excluded.
pub const EVAL_INTERVALS: (usize, usize) = (100, 100);

/// Relative L2 error of `solution` against `exact` on a uniform
/// `(m_e + 1) x n_e` lattice over `[0, l] x (0, T]`.
pub fn l2_relative_error(
    solution: &dyn Field,
    exact: &dyn Fn(f64, f64) -> f64,
    length: f64,
    horizon: f64,
    intervals: (usize, usize),
) -> Result<f64> {
    let (m_e, n_e) = intervals;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 1..=n_e {
        let t = horizon * j as f64 / n_e as f64;
        for i in 0..=m_e {
            let x = length * i as f64 / m_e as f64;
            let e = exact(x, t);
            let d = solution.value(x, t) - e;
            num += d * d;
            den += e * e;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((num / den).sqrt())
}

/// Identity check `D^a u - u_xx = f` for a problem's exact solution, with
/// the fractional term given analytically by the caller.
pub fn polynomial_source_identity(alpha: f64, x: f64, t: f64) -> Result<f64> {
    // D^a [x(1-x) t] - Lap = x(1-x) caputo_power(1, a, t) + 2t
    Ok(x * (1.0 - x) * caputo_power(1.0, alpha, t)? + 2.0 * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_exact_values() {
        let p = exponential_benchmark(0.5).unwrap();
        let exact = p.exact.as_ref().unwrap();
        assert!((exact.value(0.5, 0.0) - 0.28125).abs() < 1e-15);
        // fully decayed by one time unit
        assert!((exact.value(0.5, 1.0) - 0.28125 * (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exponential_source_vanishes_at_origin() {
        let p = exponential_benchmark(0.3).unwrap();
        for t in [0.0, 0.3, 0.7, 1.0] {
            assert_eq!((p.source)(0.0, t), 0.0);
        }
    }

    #[test]
    fn exponential_source_leading_term_at_t1() {
        // at alpha = 0.5, t = 1, x = 0.5 the fractional part of the source is
        // -E_{1,1.5}(-1) * 0.28125
        let p = exponential_benchmark(0.5).unwrap();
        let e_ml = 0.607_157_705_841_393_729_1; // frozen series value of E_{1,1.5}(-1)
        let lap = 4.0 * 0.5 * (3.0 - 5.0 * 0.25) * (-1.0_f64).exp();
        let want = -e_ml * 0.28125 + lap;
        assert!(((p.source)(0.5, 1.0) - want).abs() < 1e-13);
    }

    #[test]
    fn polynomial_exact_and_source() {
        let p = polynomial_benchmark(0.5).unwrap();
        let exact = p.exact.as_ref().unwrap();
        assert!((exact.value(0.5, 1.0) - 0.25).abs() < 1e-15);
        // f(x, 0) = 0
        for x in [0.1, 0.5, 0.9] {
            assert_eq!((p.source)(x, 0.0), 0.0);
        }
        // term-by-term identity via the analytic Caputo power rule
        for &(x, t) in &[(0.3, 0.4), (0.7, 0.9), (0.5, 1.0)] {
            let want = polynomial_source_identity(0.5, x, t).unwrap();
            assert!(((p.source)(x, t) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn shift_adds_profile_laplacian() {
        let p = exponential_benchmark(0.5).unwrap();
        let s = shift_to_zero_initial(&p).unwrap();
        for &(x, t) in &[(0.25, 0.5), (0.6, 0.1), (0.9, 1.0)] {
            let want = (p.source)(x, t) - 12.0 * x + 20.0 * x * x * x;
            assert!(((s.source)(x, t) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn shifted_exact_is_zero_at_t0() {
        let p = exponential_benchmark(0.4).unwrap();
        let s = shift_to_zero_initial(&p).unwrap();
        let exact = s.exact.as_ref().unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!(exact.value(x, 0.0).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_is_identity_on_zero_initial_problems() {
        let p = polynomial_benchmark(0.7).unwrap();
        let s = shift_to_zero_initial(&p).unwrap();
        let mut state = 0x243F6A8885A308D3_u64; // deterministic probe points
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let (x, t) = (next(), next());
            assert!(((p.source)(x, t) - (s.source)(x, t)).abs() < 1e-15);
            assert_eq!((s.initial)(x), 0.0);
            let a = p.exact.as_ref().unwrap().value(x, t);
            let b = s.exact.as_ref().unwrap().value(x, t);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_requires_curvature() {
        let mut p = polynomial_benchmark(0.5).unwrap();
        p.initial_xx = None;
        assert!(matches!(shift_to_zero_initial(&p), Err(Error::MissingInitialCurvature)));
    }

    #[test]
    fn l2_error_edge_cases() {
        let p = polynomial_benchmark(0.5).unwrap();
        let exact_field = p.exact.clone().unwrap();
        let exact = |x: f64, t: f64| x * (1.0 - x) * t;
        let zero = l2_relative_error(exact_field.as_ref(), &exact, 1.0, 1.0, (50, 50)).unwrap();
        assert_eq!(zero, 0.0);
        // homogeneity: 1.001 * exact has relative error 1e-3
        let scaled = FnField(|x: Jet2, t: Jet2| {
            Jet2::constant(1.001) * x * (Jet2::constant(1.0) - x) * t
        });
        let e = l2_relative_error(&scaled, &exact, 1.0, 1.0, (50, 50)).unwrap();
        assert!((e - 1e-3).abs() < 1e-12);
        // zero exact has no relative norm
        assert!(matches!(
            l2_relative_error(&scaled, &|_, _| 0.0, 1.0, 1.0, (10, 10)),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn benchmarks_validate() {
        for alpha in [0.1, 0.5, 0.9] {
            exponential_benchmark(alpha).unwrap().validate().unwrap();
            polynomial_benchmark(alpha).unwrap().validate().unwrap();
        }
        assert!(exponential_benchmark(1.5).is_err());
        assert!(polynomial_benchmark(0.0).is_err());
    }
}

//! Special functions used by sources, coefficients, and reference solutions:
//! the gamma function, the Mittag-Leffler function, and analytic Caputo
//! derivatives of power functions.

use crate::{Error, Result};

/// Truncation control for the Mittag-Leffler power series.
#[derive(Debug, Clone, Copy)]
pub struct SeriesControl {
    /// Terms are added until their magnitude drops below this bound.
    pub abs_term_tol: f64,
    /// Hard cap on the number of series terms.
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { abs_term_tol: 1e-16, max_terms: 200 }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_term_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "abs_term_tol",
                msg: format!("must be > 0, got {}", self.abs_term_tol),
            });
        }
        if self.max_terms < 1 {
            return Err(Error::InvalidParameter { name: "max_terms", msg: "must be >= 1".into() });
        }
        Ok(())
    }
}

// Lanczos approximation, g = 7, 9 coefficients (Godfrey's set).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma above this argument overflows f64.
const GAMMA_OVERFLOW: f64 = 171.62;

// Total on x > 0; callers guarantee positivity.
fn gamma_positive(x: f64) -> f64 {
    if x > GAMMA_OVERFLOW {
        return f64::INFINITY;
    }
    // Below 0.5 the approximation degrades; lift via Gamma(x) = Gamma(x+1)/x.
    if x < 0.5 {
        return gamma_positive(x + 1.0) / x;
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// Gamma function for positive arguments.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain { func: "gamma", msg: format!("requires x > 0, got {x}") });
    }
    Ok(gamma_positive(x))
}

/// Two-parameter Mittag-Leffler function `E_{a,b}(z) = sum_k z^k / Gamma(a k + b)`
/// with the default truncation control.
pub fn mittag_leffler(a: f64, b: f64, z: f64) -> Result<f64> {
    mittag_leffler_with(a, b, z, &SeriesControl::default())
}

/// Mittag-Leffler series with explicit truncation control. Terms are summed
/// with Kahan compensation; errs if the term magnitude has not dropped below
/// `abs_term_tol` within `max_terms` terms.
pub fn mittag_leffler_with(a: f64, b: f64, z: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain {
            func: "mittag_leffler",
            msg: format!("requires a > 0 and b > 0, got a = {a}, b = {b}"),
        });
    }
    ctl.validate()?;

    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64; // Kahan compensation
    let mut z_pow = 1.0_f64;
    let mut term = f64::INFINITY;
    for k in 0..ctl.max_terms {
        term = z_pow / gamma_positive(a * k as f64 + b);
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term.abs() < ctl.abs_term_tol {
            return Ok(sum);
        }
        z_pow *= z;
    }
    Err(Error::NonConvergence { last_term: term.abs(), terms: ctl.max_terms })
}

/// Caputo derivative of order `alpha` of `t^p`:
/// `Gamma(p+1)/Gamma(p+1-alpha) * t^(p-alpha)` for `p >= alpha`, and 0 for
/// `p = 0` (the derivative of a constant vanishes).
pub fn caputo_power(p: f64, alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain {
            func: "caputo_power",
            msg: format!("requires alpha in (0,1), got {alpha}"),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::Domain { func: "caputo_power", msg: format!("requires t >= 0, got {t}") });
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p < alpha {
        return Err(Error::Domain {
            func: "caputo_power",
            msg: format!("requires p = 0 or p >= alpha, got p = {p}, alpha = {alpha}"),
        });
    }
    Ok(gamma_positive(p + 1.0) / gamma_positive(p + 1.0 - alpha) * t.powf(p - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_PI: f64 = 1.772_453_850_905_516_0;

    #[test]
    fn gamma_known_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert!((gamma(0.5).unwrap() - SQRT_PI).abs() < 1e-15);
        // Gamma(3/2) = sqrt(pi)/2
        assert!((gamma(1.5).unwrap() - 0.886_226_925_452_758_013_7).abs() < 1e-15);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 24.0 * 1e-14);
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.3).is_err());
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn gamma_reference_points() {
        // Frozen 20-digit references across [0.05, 20].
        let refs: [(f64, f64); 13] = [
            (0.05, 19.470085311255512864),
            (0.1, 9.5135076986687318363),
            (0.3, 2.9915689876875906283),
            (0.9, 1.0686287021193193549),
            (1.1, 0.95135076986687318363),
            (1.5, 0.88622692545275801365),
            (2.0, 1.0),
            (3.7, 4.1706517837966031654),
            (5.0, 24.0),
            (8.25, 8376.5123509199252322),
            (12.0, 39916800.0),
            (16.5, 5189998453040.1250831),
            (20.0, 121645100408832000.0),
        ];
        for (x, want) in refs {
            let got = gamma(x).unwrap();
            assert!(
                ((got - want) / want).abs() <= 1e-13,
                "gamma({x}) = {got:e}, want {want:e}"
            );
        }
    }

    #[test]
    fn mittag_leffler_reduces_to_exp() {
        let got = mittag_leffler(1.0, 1.0, 1.0).unwrap();
        assert!((got - std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn mittag_leffler_e12_identity() {
        // E_{1,2}(z) = (e^z - 1)/z
        let got = mittag_leffler(1.0, 2.0, -1.0).unwrap();
        assert!((got - 0.632_120_558_828_557_7).abs() < 1e-14);
    }

    #[test]
    fn mittag_leffler_at_zero_is_reciprocal_gamma() {
        let got = mittag_leffler(0.5, 1.5, 0.0).unwrap();
        assert!((got - 1.128_379_167_095_512_573_9).abs() < 1e-14);
    }

    #[test]
    fn mittag_leffler_frozen_references() {
        // E_{0.5,1.5}(z), 20-digit references.
        for (z, want) in [
            (-2.0, 0.37230216184474712807),
            (-1.0, 0.57241642384419299559),
            (-0.3, 0.88466888477448286634),
            (0.7, 2.4838601465161669844),
            (2.0, 53.970452194988986206),
        ] {
            let got = mittag_leffler(0.5, 1.5, z).unwrap();
            assert!((got - want).abs() <= 1e-12, "E(0.5,1.5)({z}) = {got}, want {want}");
        }
    }

    #[test]
    fn mittag_leffler_reports_nonconvergence() {
        let ctl = SeriesControl { abs_term_tol: 1e-16, max_terms: 3 };
        match mittag_leffler_with(1.0, 1.0, 1.0, &ctl) {
            Err(Error::NonConvergence { terms, .. }) => assert_eq!(terms, 3),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn mittag_leffler_rejects_bad_parameters() {
        assert!(mittag_leffler(0.0, 1.0, 0.3).is_err());
        assert!(mittag_leffler(1.0, -0.5, 0.3).is_err());
    }

    #[test]
    fn caputo_power_of_constant_is_zero() {
        assert_eq!(caputo_power(0.0, 0.5, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn caputo_power_linear() {
        // D^0.5 t at t = 1 is 1/Gamma(1.5)
        let got = caputo_power(1.0, 0.5, 1.0).unwrap();
        assert!((got - 1.128_379_167_095_512_573_9).abs() < 1e-14);
        // D^0.9 t at t = 1 is 1/Gamma(1.1)
        let got = caputo_power(1.0, 0.9, 1.0).unwrap();
        assert!((got - 1.051_137_006_111_777_807_5).abs() < 1e-13);
    }

    #[test]
    fn caputo_power_domain_checks() {
        assert!(caputo_power(1.0, 1.2, 0.5).is_err());
        assert!(caputo_power(1.0, 0.5, -0.1).is_err());
        assert!(caputo_power(0.3, 0.5, 0.5).is_err()); // 0 < p < alpha
        // p = alpha is allowed: D^a t^a = Gamma(1+a)
        let got = caputo_power(0.5, 0.5, 0.3).unwrap();
        assert!((got - gamma(1.5).unwrap()).abs() < 1e-14);
    }
}

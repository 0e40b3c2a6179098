//! Integral representations `f(s) = int l(z) s^z dz` of payoff functions
//! along vertical complex lines, plus optional atomic components
//! `sum_k w_k s^{z_k}`.
//!
//! The call/put kernel is `l(z) = K^{1-z} / (2 pi i z (z - 1))`, integrated
//! along `Re(z) = R` with `R > 1` for calls and `R < 0` for puts. The
//! `1/(2 pi i)` normalization lives inside `l`, so line integration is plain
//! `dz = i dIm(z)` everywhere. Truncating the line at height `m` leaves a
//! rational-oscillatory tail which this module evaluates in closed form via
//! the complex exponential integral, so reconstruction accuracy is set by the
//! node density rather than the truncation height.

use crate::contour_quadrature::{line_integral, QuadError, QuadratureSpec};
use crate::numerics::expint_e1;
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TransformError {
    #[error("invalid payoff transform: {0}")]
    InvalidPayoff(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("imaginary residual {imag} exceeds tolerance for reconstruction value {value}")]
    ImaginaryResidual { imag: f64, value: f64 },
}

/// One strike kernel `weight * K^{1-z} / (2 pi i z (z-1))` with its abscissa
/// validity range.
#[derive(Clone, Copy, Debug)]
struct RatioKernel {
    weight: f64,
    strike: f64,
    /// open interval of admissible abscissas
    valid: (f64, f64),
}

/// Exact payoff function carried alongside the transform, used by Monte
/// Carlo evaluation and tests.
#[derive(Clone, Debug)]
enum PayoffShape {
    Call { strike: f64 },
    Put { strike: f64 },
    Monomial { exponent: Complex64, weight: Complex64 },
    Combination(Vec<(f64, PayoffShape)>),
}

impl PayoffShape {
    fn value(&self, s: f64) -> f64 {
        match self {
            PayoffShape::Call { strike } => (s - strike).max(0.0),
            PayoffShape::Put { strike } => (strike - s).max(0.0),
            PayoffShape::Monomial { exponent, weight } => {
                (weight * Complex64::new(s, 0.0).powc(*exponent)).re
            }
            PayoffShape::Combination(parts) => {
                parts.iter().map(|(w, p)| w * p.value(s)).sum()
            }
        }
    }
}

/// Vertical-line representation of a European payoff `H = f(S_T)`.
#[derive(Clone, Debug)]
pub struct PayoffTransform {
    abscissa: f64,
    kernels: Vec<RatioKernel>,
    atoms: Vec<(Complex64, Complex64)>,
    shape: PayoffShape,
    pub descriptor: String,
}

impl PayoffTransform {
    /// Call `(s - K)^+` with the default abscissa `R = 1.2`.
    pub fn call(strike: f64) -> Result<Self, TransformError> {
        if !(strike > 0.0) {
            return Err(TransformError::InvalidPayoff("strike must be positive".into()));
        }
        Ok(PayoffTransform {
            abscissa: 1.2,
            kernels: vec![RatioKernel {
                weight: 1.0,
                strike,
                valid: (1.0, f64::INFINITY),
            }],
            atoms: vec![],
            shape: PayoffShape::Call { strike },
            descriptor: format!("call K={strike}"),
        })
    }

    /// Put `(K - s)^+`: the same kernel integrated along `R < 0`
    /// (default `-0.5`); the contour position selects the put branch.
    pub fn put(strike: f64) -> Result<Self, TransformError> {
        if !(strike > 0.0) {
            return Err(TransformError::InvalidPayoff("strike must be positive".into()));
        }
        Ok(PayoffTransform {
            abscissa: -0.5,
            kernels: vec![RatioKernel {
                weight: 1.0,
                strike,
                valid: (f64::NEG_INFINITY, 0.0),
            }],
            atoms: vec![],
            shape: PayoffShape::Put { strike },
            descriptor: format!("put K={strike}"),
        })
    }

    /// Atomic payoff `w * s^{z0}`; exact under the engines, no line part.
    pub fn monomial(exponent: Complex64, weight: Complex64) -> Self {
        PayoffTransform {
            abscissa: exponent.re,
            kernels: vec![],
            atoms: vec![(exponent, weight)],
            shape: PayoffShape::Monomial { exponent, weight },
            descriptor: format!("monomial z0={exponent} w={weight}"),
        }
    }

    /// Same transform on a different line, checked against each kernel's
    /// validity range.
    pub fn with_abscissa(mut self, r: f64) -> Result<Self, TransformError> {
        for k in &self.kernels {
            if r <= k.valid.0 || r >= k.valid.1 {
                return Err(TransformError::InvalidPayoff(format!(
                    "abscissa {r} outside the kernel validity range ({}, {})",
                    k.valid.0, k.valid.1
                )));
            }
        }
        self.abscissa = r;
        Ok(self)
    }

    /// Linear combination of transforms sharing one abscissa.
    pub fn combine(parts: &[(f64, &PayoffTransform)]) -> Result<Self, TransformError> {
        let first = parts
            .first()
            .ok_or_else(|| TransformError::InvalidPayoff("empty combination".into()))?;
        let r = first.1.abscissa;
        let mut kernels = vec![];
        let mut atoms = vec![];
        let mut shapes = vec![];
        for (w, tr) in parts {
            if tr.abscissa != r {
                return Err(TransformError::InvalidPayoff(
                    "combination requires matching abscissas".into(),
                ));
            }
            for k in &tr.kernels {
                kernels.push(RatioKernel {
                    weight: w * k.weight,
                    ..*k
                });
            }
            for (z, wa) in &tr.atoms {
                atoms.push((*z, wa * *w));
            }
            shapes.push((*w, tr.shape.clone()));
        }
        Ok(PayoffTransform {
            abscissa: r,
            kernels,
            atoms,
            shape: PayoffShape::Combination(shapes),
            descriptor: "combination".into(),
        })
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn atoms(&self) -> &[(Complex64, Complex64)] {
        &self.atoms
    }

    pub fn has_line_part(&self) -> bool {
        !self.kernels.is_empty()
    }

    /// Kernel `l(z)`, including the `1/(2 pi i)` factor.
    pub fn kernel(&self, z: Complex64) -> Complex64 {
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in &self.kernels {
            acc += Complex64::new(k.strike, 0.0).powc(Complex64::new(1.0, 0.0) - z) * k.weight
                / (two_pi_i * z * (z - 1.0));
        }
        acc
    }

    /// Exact payoff value `f(s)`.
    pub fn payoff_value(&self, s: f64) -> f64 {
        self.shape.value(s)
    }

    /// Closed-form tail `int_{|Im z| > m} l(z) s^z dz` of the truncated line
    /// integral at price `s`.
    ///
    /// With `theta = ln(s/K)` and `z = R + iu`, each kernel contributes
    /// `(K e^{theta R} / 2 pi) int_{|u|>m} e^{i theta u} (1/(z-1) - 1/z) du`,
    /// and each piece reduces to the exponential integral
    /// `int_m^inf e^{i theta u} / (beta + iu) du = -i e^{-theta beta} E1(-theta (beta + i m))`.
    pub fn line_tail(&self, s: f64, m: f64) -> Complex64 {
        let r = self.abscissa;
        let mut acc = 0.0;
        for k in &self.kernels {
            let theta = (s / k.strike).ln();
            let diff = if theta.abs() * (m + r.abs() + 2.0) < 1e-12 {
                // theta = 0: the two pieces combine into an elementary log
                let z = Complex64::new(r, m);
                -Complex64::new(0.0, 1.0) * (z / (z - 1.0)).ln()
            } else {
                let piece = |beta: f64| -> Complex64 {
                    let arg = -theta * Complex64::new(beta, m);
                    -Complex64::new(0.0, 1.0) * (-theta * beta).exp() * expint_e1(arg)
                };
                piece(r - 1.0) - piece(r)
            };
            let scale = k.strike * (theta * r).exp() / (2.0 * PI);
            acc += 2.0 * (scale * diff).re * k.weight;
        }
        Complex64::new(acc, 0.0)
    }

    /// Reconstructs `f(s)` from the representation: atoms plus the truncated
    /// line integral with its analytic tail. The imaginary residual must stay
    /// below `1e-10 (1 + |value|)`.
    pub fn reconstruct(&self, s: f64, spec: &QuadratureSpec) -> Result<f64, TransformError> {
        if !(s > 0.0) {
            return Err(TransformError::InvalidPayoff("price must be positive".into()));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (z, w) in &self.atoms {
            total += w * Complex64::new(s, 0.0).powc(*z);
        }
        if self.has_line_part() {
            let f = |z: Complex64| self.kernel(z) * Complex64::new(s, 0.0).powc(z);
            let tail = |m: f64| self.line_tail(s, m);
            let cert = line_integral(&f, self.abscissa, spec, Some(&tail))?;
            total += cert.value;
        }
        let imag = total.im.abs();
        if imag > 1e-10 * (1.0 + total.re.abs()) {
            return Err(TransformError::ImaginaryResidual {
                imag,
                value: total.re,
            });
        }
        Ok(total.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec {
            abs_tol: 1e-11,
            max_depth: 10,
            ..QuadratureSpec::default()
        }
    }

    #[test]
    fn call_defaults_and_kink_value() {
        let tr = PayoffTransform::call(100.0).unwrap();
        assert_eq!(tr.abscissa(), 1.2);
        // at-the-money kink reconstructs to zero
        let v = tr.reconstruct(100.0, &spec()).unwrap();
        assert!(v.abs() < 1e-8, "got {v}");
    }

    #[test]
    fn call_reconstruction_matches_payoff() {
        let tr = PayoffTransform::call(100.0).unwrap();
        for (s, expect) in [(200.0, 100.0), (110.0, 10.0), (50.0, 0.0), (95.0, 0.0)] {
            let v = tr.reconstruct(s, &spec()).unwrap();
            assert!((v - expect).abs() < 1e-8, "s={s}: {v} vs {expect}");
        }
    }

    #[test]
    fn put_reconstruction_matches_payoff() {
        let tr = PayoffTransform::put(100.0).unwrap();
        assert_eq!(tr.abscissa(), -0.5);
        let v = tr.reconstruct(50.0, &spec()).unwrap();
        assert!((v - 50.0).abs() < 1e-8, "got {v}");
        // deep out of the money
        let v = tr.reconstruct(10_000.0, &spec()).unwrap();
        assert!(v.abs() < 1e-6, "got {v}");
    }

    #[test]
    fn put_call_decomposition() {
        let call = PayoffTransform::call(100.0).unwrap();
        let put = PayoffTransform::put(100.0).unwrap();
        let q = spec();
        for k in 0..10 {
            let s = 55.0 + 17.3 * k as f64;
            let c = call.reconstruct(s, &q).unwrap();
            let p = put.reconstruct(s, &q).unwrap();
            assert!(
                (c - p - (s - 100.0)).abs() < 2e-8,
                "s={s}: c={c} p={p}"
            );
        }
    }

    #[test]
    fn reconstruction_sup_error_on_grid() {
        let call = PayoffTransform::call(100.0).unwrap();
        let put = PayoffTransform::put(100.0).unwrap();
        let q = spec();
        let mut worst = 0.0f64;
        for k in 0..41 {
            let s = 50.0 + 150.0 * k as f64 / 40.0;
            let c = (call.reconstruct(s, &q).unwrap() - (s - 100.0f64).max(0.0)).abs();
            let p = (put.reconstruct(s, &q).unwrap() - (100.0f64 - s).max(0.0)).abs();
            worst = worst.max(c).max(p);
        }
        assert!(worst <= 1e-6, "sup reconstruction error {worst}");
    }

    #[test]
    fn truncation_height_does_not_move_the_value() {
        // the analytic tail must make the result invariant to the cutoff
        let tr = PayoffTransform::call(100.0).unwrap();
        let mut narrow = spec();
        narrow.truncation = 60.0;
        let mut wide = spec();
        wide.truncation = 150.0;
        for s in [87.0, 100.0, 131.0] {
            let a = tr.reconstruct(s, &narrow).unwrap();
            let b = tr.reconstruct(s, &wide).unwrap();
            assert!((a - b).abs() < 1e-9, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn monomials_are_exact() {
        let one = PayoffTransform::monomial(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        assert!((one.reconstruct(37.0, &spec()).unwrap() - 1.0).abs() < 1e-14);
        let stock = PayoffTransform::monomial(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        assert!((stock.reconstruct(41.5, &spec()).unwrap() - 41.5).abs() < 1e-12);
        let sq = PayoffTransform::monomial(Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0));
        assert!((sq.reconstruct(3.0, &spec()).unwrap() - 27.0).abs() < 1e-12);
        assert!((sq.payoff_value(3.0) - 27.0).abs() < 1e-12);
    }

    #[test]
    fn combination_is_linear() {
        let a = PayoffTransform::call(90.0).unwrap();
        let b = PayoffTransform::call(110.0).unwrap();
        let combo = PayoffTransform::combine(&[(2.0, &a), (-1.0, &b)]).unwrap();
        let q = spec();
        for s in [70.0, 95.0, 104.0, 160.0] {
            let direct = 2.0 * a.reconstruct(s, &q).unwrap() - b.reconstruct(s, &q).unwrap();
            let via = combo.reconstruct(s, &q).unwrap();
            assert!((direct - via).abs() < 2e-8, "s={s}");
        }
        // mismatched abscissas refuse to combine
        let put = PayoffTransform::put(100.0).unwrap();
        assert!(PayoffTransform::combine(&[(1.0, &a), (1.0, &put)]).is_err());
    }

    #[test]
    fn conjugate_asymmetric_atoms_flag_imaginary_residual() {
        let bad = PayoffTransform::monomial(Complex64::new(0.5, 1.0), Complex64::new(1.0, 0.0));
        assert!(matches!(
            bad.reconstruct(2.0, &spec()),
            Err(TransformError::ImaginaryResidual { .. })
        ));
    }

    #[test]
    fn abscissa_overrides_validated() {
        let call = PayoffTransform::call(100.0).unwrap();
        assert!(call.clone().with_abscissa(1.7).is_ok());
        assert!(call.clone().with_abscissa(0.5).is_err());
        let put = PayoffTransform::put(100.0).unwrap();
        assert!(put.clone().with_abscissa(-2.0).is_ok());
        assert!(put.with_abscissa(0.3).is_err());
        assert!(PayoffTransform::call(-5.0).is_err());
    }
}

//! Numerical integration along vertical complex lines (single and double)
//! and over time, with convergence certificates.
//!
//! A line integral along `Re(z) = r` truncated at height `m` is
//!
//! ```text
//! int_{r - i m}^{r + i m} f(z) dz = i * int_{-m}^{m} f(r + i u) du
//! ```
//!
//! and is refined by doubling the node count, then the truncation height,
//! until successive estimates agree. Callers integrating kernels with known
//! asymptotics can supply an analytic tail for `|u| > m`, in which case the
//! truncation never limits accuracy.

use crate::numerics::simpson_sum;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum QuadError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error(
        "quadrature did not converge: last refinement moved the estimate by {last_delta} (tolerance {tol}) after {refinements} refinements"
    )]
    Divergence {
        last_delta: f64,
        tol: f64,
        refinements: u32,
    },
}

/// Quadrature scheme for line integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    UniformSimpson,
    Adaptive,
}

/// Settings for contour and time quadrature.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    /// Truncation height: integrate Im(z) over [-truncation, truncation].
    pub truncation: f64,
    /// Nodes per line; odd and >= 9 for Simpson.
    pub nodes: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            scheme: Scheme::UniformSimpson,
            truncation: 120.0,
            nodes: 1201,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_depth: 7,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if !(self.truncation > 0.0) {
            return Err(QuadError::InvalidSpec("truncation must be positive".into()));
        }
        if self.nodes < 9 || self.nodes % 2 == 0 {
            return Err(QuadError::InvalidSpec(
                "node count must be odd and at least 9".into(),
            ));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(QuadError::InvalidSpec("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn tol_for(&self, value: &Complex64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.norm())
    }
}

/// Result record of a quadrature run: value plus the convergence evidence.
#[derive(Clone, Copy, Debug)]
pub struct Certificate {
    pub value: Complex64,
    /// Difference between the last two refinement stages.
    pub error_estimate: f64,
    /// Crude bound on the neglected tail: |f| at the truncation edge times
    /// the height, per the 1/u^2 decay model. Zero when an analytic tail was
    /// supplied.
    pub tail_bound: f64,
    pub refinements: u32,
    pub final_nodes: usize,
    pub final_truncation: f64,
    pub converged: bool,
}

fn simpson_line<F>(f: &F, r: f64, m: f64, n: usize) -> Complex64
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let h = 2.0 * m / (n - 1) as f64;
    let values: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|k| f(Complex64::new(r, -m + h * k as f64)))
        .collect();
    simpson_sum(&values, h) * Complex64::new(0.0, 1.0)
}

/// Integral of `f` along the vertical line `Re(z) = r`.
///
/// `tail` optionally evaluates the exact integral over `|Im z| > m` as a
/// function of `m`; when present, only the node count is refined.
pub fn line_integral<F>(
    f: &F,
    r: f64,
    spec: &QuadratureSpec,
    tail: Option<&(dyn Fn(f64) -> Complex64 + Sync)>,
) -> Result<Certificate, QuadError>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    spec.validate()?;
    let eval = |m: f64, n: usize| -> Complex64 {
        let base = match spec.scheme {
            Scheme::UniformSimpson => simpson_line(f, r, m, n),
            Scheme::Adaptive => {
                let (v, _) = crate::numerics::integrate_adaptive(
                    &|u: f64| f(Complex64::new(r, u)),
                    -m,
                    m,
                    spec.abs_tol,
                    28,
                );
                v * Complex64::new(0.0, 1.0)
            }
        };
        base + tail.map_or(Complex64::new(0.0, 0.0), |t| t(m))
    };

    let mut m = spec.truncation;
    let mut n = spec.nodes;
    let mut refinements = 0u32;
    let mut prev = eval(m, n);
    let mut last_delta = f64::INFINITY;

    // node refinement
    loop {
        let next_n = 2 * n - 1;
        let cur = eval(m, next_n);
        last_delta = (cur - prev).norm();
        refinements += 1;
        n = next_n;
        prev = cur;
        if last_delta <= spec.tol_for(&cur) {
            break;
        }
        if refinements >= spec.max_depth {
            return Err(QuadError::Divergence {
                last_delta,
                tol: spec.tol_for(&cur),
                refinements,
            });
        }
    }

    // truncation refinement, unless an analytic tail handles it
    if tail.is_none() {
        loop {
            let next_m = 2.0 * m;
            let next_n = 2 * n - 1;
            let cur = eval(next_m, next_n);
            let delta = (cur - prev).norm();
            refinements += 1;
            if delta <= spec.tol_for(&cur) {
                prev = cur;
                m = next_m;
                n = next_n;
                last_delta = delta;
                break;
            }
            prev = cur;
            m = next_m;
            n = next_n;
            last_delta = delta;
            if refinements >= 2 * spec.max_depth {
                return Err(QuadError::Divergence {
                    last_delta,
                    tol: spec.tol_for(&cur),
                    refinements,
                });
            }
        }
    }

    let edge = f(Complex64::new(r, m)).norm();
    Ok(Certificate {
        value: prev,
        error_estimate: last_delta,
        tail_bound: if tail.is_some() { 0.0 } else { edge * m },
        refinements,
        final_nodes: n,
        final_truncation: m,
        converged: true,
    })
}

fn simpson_weights(n: usize) -> Vec<f64> {
    let mut w = vec![2.0; n];
    w[0] = 1.0;
    w[n - 1] = 1.0;
    for (i, wi) in w.iter_mut().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            *wi = 4.0;
        }
    }
    w
}

fn tensor_simpson<F>(f: &F, r1: f64, r2: f64, m: f64, n: usize, symmetric: bool) -> Complex64
where
    F: Fn(Complex64, Complex64) -> Complex64 + Sync,
{
    let h = 2.0 * m / (n - 1) as f64;
    let w = simpson_weights(n);
    let us: Vec<f64> = (0..n).map(|k| -m + h * k as f64).collect();
    let rows: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z1 = Complex64::new(r1, us[i]);
            let mut acc = Complex64::new(0.0, 0.0);
            if symmetric {
                // f(z1, z2) = f(z2, z1): fold the strict upper triangle down
                let diag = f(z1, Complex64::new(r2, us[i])) * (w[i] * w[i]);
                for j in (i + 1)..n {
                    acc += f(z1, Complex64::new(r2, us[j])) * (w[i] * w[j]);
                }
                acc = acc * 2.0 + diag;
            } else {
                for (j, uj) in us.iter().enumerate() {
                    acc += f(z1, Complex64::new(r2, *uj)) * (w[i] * w[j]);
                }
            }
            acc
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for row in rows {
        total += row;
    }
    // dz1 dz2 = (i du1)(i du2) = -du1 du2
    total * (-(h / 3.0) * (h / 3.0))
}

/// Double integral of `f` over the product of two vertical lines. With
/// `symmetric = true` the integrand is assumed to satisfy
/// `f(z1, z2) = f(z2, z1)` (requires `r1 == r2`) and only the upper triangle
/// of the tensor grid is evaluated.
pub fn double_line_integral<F>(
    f: &F,
    r1: f64,
    r2: f64,
    spec: &QuadratureSpec,
    symmetric: bool,
) -> Result<Certificate, QuadError>
where
    F: Fn(Complex64, Complex64) -> Complex64 + Sync,
{
    spec.validate()?;
    if symmetric && r1 != r2 {
        return Err(QuadError::InvalidSpec(
            "symmetric double integral needs matching abscissas".into(),
        ));
    }
    let mut m = spec.truncation;
    let mut n = spec.nodes;
    let mut refinements = 0u32;
    let mut prev = tensor_simpson(f, r1, r2, m, n, symmetric);
    let mut last_delta;

    loop {
        let next_n = 2 * n - 1;
        let cur = tensor_simpson(f, r1, r2, m, next_n, symmetric);
        last_delta = (cur - prev).norm();
        refinements += 1;
        n = next_n;
        prev = cur;
        if last_delta <= spec.tol_for(&cur) {
            break;
        }
        if refinements >= spec.max_depth.min(4) {
            return Err(QuadError::Divergence {
                last_delta,
                tol: spec.tol_for(&cur),
                refinements,
            });
        }
    }
    // one truncation check
    {
        let next_m = 1.5 * m;
        let next_n = (((n - 1) as f64 * 1.5) as usize / 2) * 2 + 1;
        let cur = tensor_simpson(f, r1, r2, next_m, next_n, symmetric);
        let delta = (cur - prev).norm();
        refinements += 1;
        if delta > spec.tol_for(&cur).max(10.0 * last_delta) {
            return Err(QuadError::Divergence {
                last_delta: delta,
                tol: spec.tol_for(&cur),
                refinements,
            });
        }
        last_delta = delta;
        prev = cur;
        m = next_m;
        n = next_n;
    }

    let edge = f(Complex64::new(r1, m), Complex64::new(r2, 0.0)).norm();
    Ok(Certificate {
        value: prev,
        error_estimate: last_delta,
        tail_bound: edge * m * m,
        refinements,
        final_nodes: n,
        final_truncation: m,
        converged: true,
    })
}

fn simpson_segment<F>(f: &F, a: f64, b: f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    (f(a) + f(0.5 * (a + b)) * 4.0 + f(b)) * ((b - a) / 6.0)
}

fn adaptive_simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let mid = 0.5 * (a + b);
    let left = simpson_segment(f, a, mid);
    let right = simpson_segment(f, mid, b);
    let delta = (left + right - whole).norm();
    if delta < 15.0 * tol || depth == 0 {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson_rec(f, a, mid, left, 0.5 * tol, depth - 1)
            + adaptive_simpson_rec(f, mid, b, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson integration of a complex-valued function over `[t0, t1]`.
pub fn time_integral<F>(f: &F, t0: f64, t1: f64, spec: &QuadratureSpec) -> Result<Complex64, QuadError>
where
    F: Fn(f64) -> Complex64,
{
    if t0 == t1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let whole = simpson_segment(f, t0, t1);
    let tol = spec.abs_tol.max(spec.rel_tol * whole.norm());
    Ok(adaptive_simpson_rec(
        f,
        t0,
        t1,
        whole,
        tol,
        spec.max_depth.max(18),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bns_models::{exp_affine_integral, AffineCoefficients, BnsParams};
    use crate::levy_models::RiskAversion;

    #[test]
    fn line_integral_of_zero_is_zero() {
        let spec = QuadratureSpec::default();
        let cert = line_integral(&|_z| Complex64::new(0.0, 0.0), 1.2, &spec, None).unwrap();
        assert_eq!(cert.value, Complex64::new(0.0, 0.0));
        assert!(cert.converged);
    }

    #[test]
    fn line_integral_gaussian_decay_reference() {
        // int i f(r + iu) du with f(z) = exp(z^2 - z): on the line r = 0.5 the
        // integrand is exp(-u^2 - 1/4), so the value is i sqrt(pi) e^{-1/4}
        let spec = QuadratureSpec {
            truncation: 15.0,
            nodes: 401,
            ..QuadratureSpec::default()
        };
        let cert = line_integral(&|z: Complex64| (z * z - z).exp(), 0.5, &spec, None).unwrap();
        let expected = std::f64::consts::PI.sqrt() * (-0.25f64).exp();
        assert!((cert.value.im - expected).abs() < 1e-12);
        assert!(cert.value.re.abs() < 1e-12);
    }

    #[test]
    fn refinement_certificate_reports_convergence() {
        let spec = QuadratureSpec {
            nodes: 21,
            truncation: 4.0,
            ..QuadratureSpec::default()
        };
        let cert = line_integral(&|z: Complex64| (z * z).exp(), 0.0, &spec, None).unwrap();
        // int exp(-u^2) du = sqrt(pi)
        assert!((cert.value.im - std::f64::consts::PI.sqrt()).abs() < 1e-8);
        assert!(cert.refinements >= 1);
        assert!(cert.error_estimate <= 1e-8 * cert.value.norm().max(1.0));
    }

    #[test]
    fn double_line_separable_factorizes() {
        let spec = QuadratureSpec {
            truncation: 10.0,
            nodes: 201,
            ..QuadratureSpec::default()
        };
        let g = |z: Complex64| (z * z * 0.5).exp();
        let single = line_integral(&g, 0.3, &spec, None).unwrap().value;
        let double = double_line_integral(&|z1, z2| g(z1) * g(z2), 0.3, 0.3, &spec, false)
            .unwrap()
            .value;
        assert!((double - single * single).norm() < 1e-10 * double.norm().max(1.0));
        // symmetric path agrees with the full tensor
        let sym = double_line_integral(&|z1, z2| g(z1) * g(z2), 0.3, 0.3, &spec, true)
            .unwrap()
            .value;
        assert!((sym - double).norm() < 1e-12 * double.norm().max(1.0));
    }

    #[test]
    fn double_line_zero_integrand() {
        let spec = QuadratureSpec {
            truncation: 5.0,
            nodes: 41,
            ..QuadratureSpec::default()
        };
        let v = double_line_integral(
            &|_z1, _z2| Complex64::new(0.0, 0.0),
            1.2,
            1.2,
            &spec,
            true,
        )
        .unwrap()
        .value;
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn time_integral_closed_forms() {
        let spec = QuadratureSpec::default();
        let t = 0.25;
        let c = Complex64::new(0.7, -0.2);
        let v = time_integral(&|_s| c, 0.0, t, &spec).unwrap();
        assert!((v - c * t).norm() < 1e-12);
        let lam = 2.54;
        let v = time_integral(
            &|s: f64| Complex64::new((-lam * (t - s)).exp(), 0.0),
            0.0,
            t,
            &spec,
        )
        .unwrap();
        assert!((v.re - (1.0 - (-lam * t).exp()) / lam).abs() < 1e-10);
    }

    #[test]
    fn time_integral_matches_exp_affine_closed_form() {
        let params = BnsParams::new(1.404, 2.54, 0.848, 17.5, 0.0485, 100.0, 0.25).unwrap();
        let coeffs = AffineCoefficients::new(params, RiskAversion::new(2.0).unwrap());
        let curve = coeffs.alpha1_curve();
        let spec = QuadratureSpec::default();
        let via_time = time_integral(
            &|s: f64| params.gamma_ou_exponent(curve.eval(s)).unwrap(),
            0.0,
            params.t_horizon,
            &spec,
        )
        .unwrap();
        let closed = exp_affine_integral(&params, &curve, 0.0, params.t_horizon).unwrap();
        assert!((via_time - closed).norm() < 1e-8);
    }

    #[test]
    fn richardson_consistency_of_simpson() {
        // halving the step cuts the defect by at least 8 on a smooth kernel
        let f = |z: Complex64| (z * z * 0.5).exp() * (1.0 / (1.0 + z * z * 0.01));
        let exact = {
            let spec = QuadratureSpec {
                truncation: 12.0,
                nodes: 6001,
                ..QuadratureSpec::default()
            };
            simpson_line(&f, 0.2, spec.truncation, spec.nodes)
        };
        let coarse = simpson_line(&f, 0.2, 12.0, 41);
        let fine = simpson_line(&f, 0.2, 12.0, 81);
        let e_coarse = (coarse - exact).norm();
        let e_fine = (fine - exact).norm();
        assert!(e_coarse / e_fine >= 8.0, "ratio {}", e_coarse / e_fine);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = QuadratureSpec::default();
        spec.nodes = 10;
        assert!(matches!(
            line_integral(&|_z| Complex64::new(1.0, 0.0), 0.0, &spec, None),
            Err(QuadError::InvalidSpec(_))
        ));
    }

    #[test]
    fn divergence_reported_for_slowly_decaying_integrand() {
        // 1/(1+|u|) decays too slowly to converge under truncation doubling
        let spec = QuadratureSpec {
            truncation: 10.0,
            nodes: 101,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_depth: 3,
            ..QuadratureSpec::default()
        };
        let res = line_integral(
            &|z: Complex64| Complex64::new(1.0 / (1.0 + z.im.abs()), 0.0),
            0.0,
            &spec,
            None,
        );
        assert!(matches!(res, Err(QuadError::Divergence { .. })));
    }
}

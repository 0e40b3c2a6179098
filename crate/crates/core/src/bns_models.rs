//! BNS Gamma-OU model parameters, the affine coefficient functions of the
//! power-utility opportunity processes, and closed-form integrals of the
//! Gamma-OU cumulant exponent along exponential-affine curves.
//!
//! The variance process solves `dy = -lam * y dt + dZ` for a compound Poisson
//! subordinator `Z` with exponent `psi_Z(u) = lam * a * u / (b - u)`, which
//! makes the stationary law Gamma(a, b). The return process is
//! `dX = mu * y dt + sqrt(y) dW` with `W` independent of `Z`.

use crate::levy_models::RiskAversion;
use crate::numerics::integrate_adaptive;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BnsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Gamma-OU exponent pole at argument {arg}")]
    PoleHit { arg: f64 },
    #[error("exponential-affine curve passes within {dist} of the exponent pole")]
    PolePath { dist: f64 },
    #[error("integrability condition failed: {name} (exponent {exponent} vs bound {bound})")]
    IntegrabilityViolation {
        name: &'static str,
        exponent: f64,
        bound: f64,
    },
}

/// Parameters of the BNS Gamma-OU model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BnsParams {
    /// Drift loading of the return on the variance.
    pub mu: f64,
    /// Mean reversion rate of the variance.
    pub lam: f64,
    /// Gamma shape of the stationary variance law.
    pub ou_a: f64,
    /// Gamma rate of the stationary variance law.
    pub ou_b: f64,
    /// Initial variance.
    pub y0: f64,
    /// Initial stock price.
    pub s0: f64,
    /// Horizon in years.
    pub t_horizon: f64,
}

impl BnsParams {
    pub fn new(
        mu: f64,
        lam: f64,
        ou_a: f64,
        ou_b: f64,
        y0: f64,
        s0: f64,
        t_horizon: f64,
    ) -> Result<Self, BnsError> {
        for (name, v) in [
            ("lam", lam),
            ("ou_a", ou_a),
            ("ou_b", ou_b),
            ("y0", y0),
            ("s0", s0),
            ("t_horizon", t_horizon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(BnsError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !mu.is_finite() {
            return Err(BnsError::InvalidParams("mu must be finite".into()));
        }
        Ok(BnsParams {
            mu,
            lam,
            ou_a,
            ou_b,
            y0,
            s0,
            t_horizon,
        })
    }

    /// Cumulant exponent of the subordinator: `lam * a * u / (b - u)`.
    pub fn gamma_ou_exponent(&self, u: Complex64) -> Result<Complex64, BnsError> {
        let denom = self.ou_b - u;
        if denom.norm() < 1e-12 {
            return Err(BnsError::PoleHit { arg: u.re });
        }
        Ok(self.lam * self.ou_a * u / denom)
    }
}

/// Exponential-affine time curve
/// `m(s) = c_bracket (e^{-lam (anchor - s)} - 1) + c_decay e^{-lam (anchor - s)} + c_const`.
///
/// Closed under addition after re-anchoring; every time function fed into the
/// Gamma-OU exponent integral (opportunity coefficients, transform exponents
/// and their sums) reduces to this shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpAffineCurve {
    pub c_bracket: Complex64,
    pub c_decay: Complex64,
    pub c_const: Complex64,
    pub anchor: f64,
    pub lam: f64,
}

impl ExpAffineCurve {
    pub fn new(
        c_bracket: Complex64,
        c_decay: Complex64,
        c_const: Complex64,
        anchor: f64,
        lam: f64,
    ) -> Self {
        ExpAffineCurve {
            c_bracket,
            c_decay,
            c_const,
            anchor,
            lam,
        }
    }

    pub fn zero(anchor: f64, lam: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        ExpAffineCurve::new(z, z, z, anchor, lam)
    }

    /// Purely constant curve.
    pub fn constant(value: Complex64, anchor: f64, lam: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        ExpAffineCurve::new(z, z, value, anchor, lam)
    }

    pub fn eval(&self, s: f64) -> Complex64 {
        let e = (-self.lam * (self.anchor - s)).exp();
        self.c_bracket * (e - 1.0) + self.c_decay * e + self.c_const
    }

    /// Same curve expressed with a different anchor, via
    /// `e^{-lam (old - s)} = e^{-lam (old - new)} e^{-lam (new - s)}`.
    pub fn re_anchor(&self, new_anchor: f64) -> Self {
        if new_anchor == self.anchor {
            return *self;
        }
        let theta = (-self.lam * (self.anchor - new_anchor)).exp();
        ExpAffineCurve {
            c_bracket: Complex64::new(0.0, 0.0),
            c_decay: (self.c_bracket + self.c_decay) * theta,
            c_const: self.c_const - self.c_bracket,
            anchor: new_anchor,
            lam: self.lam,
        }
    }

    pub fn add(&self, other: &ExpAffineCurve) -> Self {
        assert_eq!(self.lam, other.lam, "curves must share the mean reversion rate");
        let o = other.re_anchor(self.anchor);
        ExpAffineCurve {
            c_bracket: self.c_bracket + o.c_bracket,
            c_decay: self.c_decay + o.c_decay,
            c_const: self.c_const + o.c_const,
            anchor: self.anchor,
            lam: self.lam,
        }
    }

    pub fn scale(&self, w: Complex64) -> Self {
        ExpAffineCurve {
            c_bracket: self.c_bracket * w,
            c_decay: self.c_decay * w,
            c_const: self.c_const * w,
            anchor: self.anchor,
            lam: self.lam,
        }
    }

    /// Slope coefficient of `e^{-lam (anchor - s)}`.
    fn slope(&self) -> Complex64 {
        self.c_bracket + self.c_decay
    }

    /// Value of `c_const - c_bracket`, the limit of `m` as the exponential
    /// term vanishes.
    fn offset(&self) -> Complex64 {
        self.c_const - self.c_bracket
    }
}

/// Minimal distance of the straight segment traced by `m(s) - b` for
/// `s in [t1, t2]` to the origin. The segment parametrisation is exact:
/// `m(s) - b = slope * e + (offset - b)` with `e = e^{-lam (anchor - s)}`
/// running over a real positive interval.
fn segment_pole_distance(m: &ExpAffineCurve, b: f64, t1: f64, t2: f64) -> f64 {
    let p = m.offset() - b;
    let a = m.slope();
    let e1 = (-m.lam * (m.anchor - t1)).exp();
    let e2 = (-m.lam * (m.anchor - t2)).exp();
    let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
    let a2 = a.norm_sqr();
    if a2 == 0.0 {
        return p.norm();
    }
    let e_star = (-(a.conj() * p).re / a2).clamp(elo, ehi);
    (a * e_star + p).norm()
}

/// Distinguished logarithm of `(m(t1) - b) / (m(t2) - b)` along the curve:
/// the argument increment is accumulated on an adaptive grid refined until
/// every step turns by less than pi/4, so no branch of the logarithm is ever
/// skipped. Returns `None` if refinement fails to tame the winding.
fn distinguished_log_ratio(m: &ExpAffineCurve, b: f64, t1: f64, t2: f64) -> Option<Complex64> {
    let w = |s: f64| m.eval(s) - b;
    let mut n = 8usize;
    loop {
        let mut total_arg = 0.0;
        let mut ok = true;
        let mut prev = w(t1);
        for k in 1..=n {
            let s = t1 + (t2 - t1) * k as f64 / n as f64;
            let cur = w(s);
            let step = (cur / prev).arg();
            if step.abs() >= std::f64::consts::FRAC_PI_4 {
                ok = false;
                break;
            }
            total_arg += step;
            prev = cur;
        }
        if ok {
            let w1 = w(t1);
            let w2 = w(t2);
            // log(w1/w2) tracked backwards along the curve
            return Some(Complex64::new(
                (w1.norm() / w2.norm()).ln(),
                -total_arg,
            ));
        }
        n *= 2;
        if n > (1 << 20) {
            return None;
        }
    }
}

/// Closed-form integral of the Gamma-OU exponent along an exponential-affine
/// curve:
///
/// ```text
/// int_{t1}^{t2} psi_Z(m(s)) ds
/// ```
///
/// with a quadrature fallback when the partial-fraction decomposition
/// degenerates (`b` within 1e-8 of `c_const - c_bracket` without being equal)
/// or when branch tracking fails.
pub fn exp_affine_integral(
    params: &BnsParams,
    m: &ExpAffineCurve,
    t1: f64,
    t2: f64,
) -> Result<Complex64, BnsError> {
    assert!(
        (m.lam - params.lam).abs() < 1e-14,
        "curve and model must share the mean reversion rate"
    );
    if t1 == t2 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
    let sign = if t1 < t2 { 1.0 } else { -1.0 };

    let b = params.ou_b;
    let dist = segment_pole_distance(m, b, lo, hi);
    if dist < 1e-10 {
        return Err(BnsError::PolePath { dist });
    }

    let a = params.ou_a;
    let lam = params.lam;
    let offset = m.offset();
    let degenerate_gap = offset - b;

    let value = if degenerate_gap == Complex64::new(0.0, 0.0) {
        // exact degenerate branch: b = c_const - c_bracket
        let slope = m.slope();
        // slope = 0 with b = offset would put the whole curve on the pole,
        // which the distance scan above already rejected
        -lam * a * (hi - lo)
            + (a * b / slope)
                * ((lam * (m.anchor - hi)).exp() - (lam * (m.anchor - lo)).exp())
    } else if degenerate_gap.norm() < 1e-8 {
        // near-degenerate: the closed form is 0/0-ill-conditioned, integrate
        let (v, _err) = integrate_adaptive(
            &|s: f64| {
                let ms = m.eval(s);
                lam * a * ms / (b - ms)
            },
            lo,
            hi,
            1e-12,
            40,
        );
        v
    } else {
        match distinguished_log_ratio(m, b, lo, hi) {
            Some(log_ratio) => {
                // (a / (b - B)) * (lam (t2 - t1) B + b log((m(t1)-b)/(m(t2)-b)))
                let big_b = offset;
                (a / (b - big_b)) * (lam * (hi - lo) * big_b + b * log_ratio)
            }
            None => {
                let (v, _err) = integrate_adaptive(
                    &|s: f64| {
                        let ms = m.eval(s);
                        lam * a * ms / (b - ms)
                    },
                    lo,
                    hi,
                    1e-12,
                    40,
                );
                v
            }
        }
    };
    Ok(value * sign)
}

/// Affine coefficients of the opportunity processes for a given risk
/// aversion: the physical-measure pair, the tilted-measure pair, and their
/// differences.
#[derive(Clone, Copy, Debug)]
pub struct AffineCoefficients {
    params: BnsParams,
    p: f64,
    /// scale of alpha_1: ((1-p)/2p) mu^2 / lam
    omega: f64,
    /// scale of alpha_1_euro: ((1+p)(2-p)/2p^2) mu^2 / lam
    omega_euro: f64,
}

impl AffineCoefficients {
    pub fn new(params: BnsParams, p: RiskAversion) -> Self {
        let pv = p.value();
        let mu2 = params.mu * params.mu;
        AffineCoefficients {
            params,
            p: pv,
            omega: (1.0 - pv) / (2.0 * pv) * mu2 / params.lam,
            omega_euro: (1.0 + pv) * (2.0 - pv) / (2.0 * pv * pv) * mu2 / params.lam,
        }
    }

    pub fn params(&self) -> &BnsParams {
        &self.params
    }

    pub fn risk_aversion(&self) -> f64 {
        self.p
    }

    fn bracket(&self, t: f64) -> f64 {
        1.0 - (-self.params.lam * (self.params.t_horizon - t)).exp()
    }

    pub fn alpha1(&self, t: f64) -> f64 {
        self.omega * self.bracket(t)
    }

    pub fn alpha1_euro(&self, t: f64) -> f64 {
        self.omega_euro * self.bracket(t)
    }

    pub fn alpha1_dollar(&self, t: f64) -> f64 {
        self.alpha1(t) - self.alpha1_euro(t)
    }

    /// `alpha1` as an exponential-affine curve anchored at the horizon.
    pub fn alpha1_curve(&self) -> ExpAffineCurve {
        ExpAffineCurve::new(
            Complex64::new(-self.omega, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            self.params.t_horizon,
            self.params.lam,
        )
    }

    pub fn alpha1_euro_curve(&self) -> ExpAffineCurve {
        ExpAffineCurve::new(
            Complex64::new(-self.omega_euro, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            self.params.t_horizon,
            self.params.lam,
        )
    }

    pub fn alpha0(&self, t: f64) -> Result<f64, BnsError> {
        let v = exp_affine_integral(&self.params, &self.alpha1_curve(), t, self.params.t_horizon)?;
        Ok(v.re)
    }

    pub fn alpha0_euro(&self, t: f64) -> Result<f64, BnsError> {
        let v = exp_affine_integral(
            &self.params,
            &self.alpha1_euro_curve(),
            t,
            self.params.t_horizon,
        )?;
        Ok(v.re)
    }

    pub fn alpha0_dollar(&self, t: f64) -> Result<f64, BnsError> {
        Ok(self.alpha0(t)? - self.alpha0_euro(t)?)
    }

    /// All six coefficients at once: `(a1, a0, a1_euro, a0_euro, a1_dollar, a0_dollar)`.
    pub fn all_at(&self, t: f64) -> Result<(f64, f64, f64, f64, f64, f64), BnsError> {
        let a1 = self.alpha1(t);
        let a1e = self.alpha1_euro(t);
        let a0 = self.alpha0(t)?;
        let a0e = self.alpha0_euro(t)?;
        Ok((a1, a0, a1e, a0e, a1 - a1e, a0 - a0e))
    }

    /// Tilted-measure exponent of the subordinator:
    /// `psi_Z(u + alpha1_euro(t)) - psi_Z(alpha1_euro(t))`.
    pub fn psi_z_euro(&self, t: f64, u: Complex64) -> Result<Complex64, BnsError> {
        let shift = Complex64::new(self.alpha1_euro(t), 0.0);
        Ok(self.params.gamma_ou_exponent(u + shift)? - self.params.gamma_ou_exponent(shift)?)
    }
}

/// One sufficiency condition from the integrability analysis.
#[derive(Clone, Debug)]
pub struct ConditionCheck {
    pub name: &'static str,
    /// Whether the condition is required for this risk aversion.
    pub needed: bool,
    /// Exponential-moment exponent the condition requires of the subordinator.
    pub exponent: f64,
    /// Gamma-OU moment boundary (the rate `b`).
    pub bound: f64,
    pub pass: bool,
}

/// Integrability report for a `(params, p)` pair. For the Gamma-OU
/// subordinator, exponential moments `E[exp(c Z_1)]` are finite exactly when
/// `c < b`, so each condition reduces to an exponent comparison.
#[derive(Clone, Debug)]
pub struct IntegrabilityReport {
    pub conditions: Vec<ConditionCheck>,
}

impl IntegrabilityReport {
    pub fn evaluate(params: &BnsParams, p: RiskAversion) -> Self {
        let pv = p.value();
        let coeffs = AffineCoefficients::new(*params, p);
        let b = params.ou_b;
        let bracket0 = (1.0 - (-params.lam * params.t_horizon).exp()) / params.lam;
        let mu2 = params.mu * params.mu;

        // well-posedness of the investment problem (needed only for p < 1)
        let well_posed_exp = coeffs.alpha1(0.0);
        // tilted density martingale property (needed only for p < 2)
        let tilt_exp = coeffs.alpha1_euro(0.0);
        // square-integrability of the stock under the tilted measure
        let sq_exp = bracket0
            * ((1.0 + pv) * (2.0 - pv) / (2.0 * pv * pv) * mu2 + 2.0 - params.mu / pv);

        let mk = |name, needed, exponent: f64| ConditionCheck {
            name,
            needed,
            exponent,
            bound: b,
            pass: exponent < b,
        };
        IntegrabilityReport {
            conditions: vec![
                mk("investment-well-posed", pv < 1.0, well_posed_exp),
                mk("tilted-density-martingale", pv < 2.0, tilt_exp),
                mk("tilted-square-integrable", true, sq_exp),
            ],
        }
    }

    /// True when every required condition holds.
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| !c.needed || c.pass)
    }

    /// First failing required condition, if any.
    pub fn first_failure(&self) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.needed && !c.pass)
    }

    pub fn require(&self) -> Result<(), BnsError> {
        match self.first_failure() {
            None => Ok(()),
            Some(c) => Err(BnsError::IntegrabilityViolation {
                name: c.name,
                exponent: c.exponent,
                bound: c.bound,
            }),
        }
    }
}

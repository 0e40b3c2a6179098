//! Exponential Levy models of the discounted stock, their log-price cumulant
//! exponents under the physical and tilted measures, and the pure investment
//! problem for power utility.
//!
//! The stock is `S = S0 * E(X)` for a Levy process `X` with triplet
//! `(b, c, F)` relative to the truncation `h(x) = x`. Jumps are parametrised
//! on the log scale: a jump of size `xt` in the log price `log S` corresponds
//! to a jump `x = exp(xt) - 1 > -1` of `X`, so `S` stays positive by
//! construction. Supported jump families are compound Poisson (finite
//! activity): none, Merton normal log-jumps, and Kou double-exponential
//! log-jumps.

use crate::numerics::integrate_adaptive;
use num_complex::Complex64;
use thiserror::Error;

/// Margin kept between an evaluation abscissa and the edge of the strip on
/// which a jump exponent converges.
const STRIP_MARGIN: f64 = 1e-9;

/// Absolute tolerance for jump integrals.
const JUMP_TOL: f64 = 1e-11;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LevyError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("exponent diverges at Re(z) = {re_z}; convergence strip is ({lo}, {hi})")]
    DivergentExponent { re_z: f64, lo: f64, hi: f64 },
    #[error("fraction of wealth {eta} lies outside the admissible cone [{lo}, {hi}]")]
    OutsideCone { eta: f64, lo: f64, hi: f64 },
    #[error("investment optimizer {eta} sits on the boundary of the admissible cone")]
    BoundaryMaximizer { eta: f64 },
}

/// Compound Poisson jump specification on the log-jump scale.
#[derive(Clone, Debug, PartialEq)]
pub enum JumpFamily {
    /// No jumps.
    None,
    /// Normal log-jumps with the given intensity per unit time.
    MertonNormal { intensity: f64, mean: f64, stdev: f64 },
    /// Double-exponential log-jumps: up with probability `up_prob` and rate
    /// `rate_up`, down with rate `rate_down`.
    KouDoubleExp {
        intensity: f64,
        up_prob: f64,
        rate_up: f64,
        rate_down: f64,
    },
}

impl JumpFamily {
    pub fn intensity(&self) -> f64 {
        match self {
            JumpFamily::None => 0.0,
            JumpFamily::MertonNormal { intensity, .. } => *intensity,
            JumpFamily::KouDoubleExp { intensity, .. } => *intensity,
        }
    }

    fn validate(&self) -> Result<(), LevyError> {
        match self {
            JumpFamily::None => Ok(()),
            JumpFamily::MertonNormal {
                intensity, stdev, ..
            } => {
                if *intensity <= 0.0 || *stdev <= 0.0 {
                    Err(LevyError::InvalidModel(
                        "Merton jumps need intensity > 0 and stdev > 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            JumpFamily::KouDoubleExp {
                intensity,
                up_prob,
                rate_up,
                rate_down,
            } => {
                if *intensity <= 0.0 {
                    return Err(LevyError::InvalidModel("Kou jumps need intensity > 0".into()));
                }
                if !(0.0..=1.0).contains(up_prob) {
                    return Err(LevyError::InvalidModel("Kou up_prob must lie in [0, 1]".into()));
                }
                // rate_up > 2 keeps the second moment of exp(xt) finite
                if (*up_prob > 0.0 && *rate_up <= 2.0) || *rate_down <= 0.0 {
                    return Err(LevyError::InvalidModel(
                        "Kou rates need rate_up > 2 (second moments) and rate_down > 0".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Probability density of the log-jump size (without the intensity).
    pub fn log_jump_density(&self, xt: f64) -> f64 {
        match self {
            JumpFamily::None => 0.0,
            JumpFamily::MertonNormal { mean, stdev, .. } => {
                let z = (xt - mean) / stdev;
                (-0.5 * z * z).exp() / (stdev * (2.0 * std::f64::consts::PI).sqrt())
            }
            JumpFamily::KouDoubleExp {
                up_prob,
                rate_up,
                rate_down,
                ..
            } => {
                if xt >= 0.0 {
                    up_prob * rate_up * (-rate_up * xt).exp()
                } else {
                    (1.0 - up_prob) * rate_down * (rate_down * xt).exp()
                }
            }
        }
    }

    /// Strip of `Re(z)` on which `E[exp(z * xt)]` is finite.
    pub fn exponent_strip(&self) -> (f64, f64) {
        match self {
            JumpFamily::None | JumpFamily::MertonNormal { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            JumpFamily::KouDoubleExp {
                up_prob,
                rate_up,
                rate_down,
                ..
            } => {
                let hi = if *up_prob > 0.0 { *rate_up } else { f64::INFINITY };
                let lo = if *up_prob < 1.0 { -*rate_down } else { f64::NEG_INFINITY };
                (lo, hi)
            }
        }
    }

    /// Support of the stochastic-exponential jump `x = exp(xt) - 1` as a
    /// closed interval (endpoints may be `-1` or infinite).
    pub fn x_support(&self) -> (f64, f64) {
        match self {
            JumpFamily::None => (0.0, 0.0),
            JumpFamily::MertonNormal { .. } => (-1.0, f64::INFINITY),
            JumpFamily::KouDoubleExp { up_prob, .. } => {
                let lo = if *up_prob < 1.0 { -1.0 } else { 0.0 };
                let hi = if *up_prob > 0.0 { f64::INFINITY } else { 0.0 };
                (lo, hi)
            }
        }
    }

    /// Truncation range for log-jump quadrature such that the neglected mass
    /// of `exp(re_z * xt) * density` is below ~1e-16, for |Re z| up to
    /// `re_extent` inside the strip.
    fn quad_range(&self, re_extent: f64) -> (f64, f64) {
        match self {
            JumpFamily::None => (0.0, 0.0),
            JumpFamily::MertonNormal { mean, stdev, .. } => {
                let shift = re_extent.abs() * stdev * stdev;
                (mean - shift - 12.0 * stdev, mean + shift + 12.0 * stdev)
            }
            JumpFamily::KouDoubleExp {
                up_prob,
                rate_up,
                rate_down,
                ..
            } => {
                let hi = if *up_prob > 0.0 {
                    40.0 / (rate_up - re_extent.min(rate_up - 0.5))
                } else {
                    0.0
                };
                let lo = if *up_prob < 1.0 {
                    -40.0 / (rate_down + (-re_extent).max(-rate_down + 0.5))
                } else {
                    0.0
                };
                (lo, hi)
            }
        }
    }

    /// Integral of `f(xt)` against the Levy measure `intensity * density` in
    /// the log-jump variable. Splits at zero where the Kou density kinks.
    pub fn integrate<F>(&self, re_extent: f64, f: F) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        if matches!(self, JumpFamily::None) {
            return Complex64::new(0.0, 0.0);
        }
        let kappa = self.intensity();
        let (lo, hi) = self.quad_range(re_extent);
        let g = |xt: f64| f(xt) * self.log_jump_density(xt) * kappa;
        let split = matches!(self, JumpFamily::KouDoubleExp { .. }) && lo < 0.0 && hi > 0.0;
        if split {
            let (a, _) = integrate_adaptive(&g, lo, 0.0, JUMP_TOL, 40);
            let (b, _) = integrate_adaptive(&g, 0.0, hi, JUMP_TOL, 40);
            a + b
        } else {
            let (v, _) = integrate_adaptive(&g, lo, hi, JUMP_TOL, 40);
            v
        }
    }

    /// Real-valued variant of [`integrate`](Self::integrate). The range covers
    /// integrands growing up to `exp(2 xt)`, which is the worst case among the
    /// moment and tilt integrals (second moments of `exp(xt) - 1`).
    pub fn integrate_real<F>(&self, f: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        self.integrate(2.0, |xt| Complex64::new(f(xt), 0.0)).re
    }

    /// Moment generating function `E[exp(z * xt)]` of a single log-jump,
    /// in closed form.
    pub fn log_jump_mgf(&self, z: Complex64) -> Complex64 {
        match self {
            JumpFamily::None => Complex64::new(1.0, 0.0),
            JumpFamily::MertonNormal { mean, stdev, .. } => {
                (z * *mean + z * z * (stdev * stdev) * 0.5).exp()
            }
            JumpFamily::KouDoubleExp {
                up_prob,
                rate_up,
                rate_down,
                ..
            } => {
                let mut mgf = Complex64::new(0.0, 0.0);
                if *up_prob > 0.0 {
                    mgf += *up_prob * *rate_up / (*rate_up - z);
                }
                if *up_prob < 1.0 {
                    mgf += (1.0 - *up_prob) * *rate_down / (*rate_down + z);
                }
                mgf
            }
        }
    }

    /// Mean log-jump size.
    pub fn log_jump_mean(&self) -> f64 {
        match self {
            JumpFamily::None => 0.0,
            JumpFamily::MertonNormal { mean, .. } => *mean,
            JumpFamily::KouDoubleExp {
                up_prob,
                rate_up,
                rate_down,
                ..
            } => up_prob / rate_up - (1.0 - up_prob) / rate_down,
        }
    }
}

/// Power utility risk aversion `p > 0`, `p != 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskAversion(f64);

impl RiskAversion {
    pub fn new(p: f64) -> Result<Self, LevyError> {
        if p > 0.0 && p != 1.0 && p.is_finite() {
            Ok(RiskAversion(p))
        } else {
            Err(LevyError::InvalidModel(format!(
                "risk aversion must be positive, finite and != 1, got {p}"
            )))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Exponential Levy model `S = S0 * E(X)` over the horizon `t_horizon`.
///
/// `drift_b` is the drift rate of the stochastic-exponential return `X`
/// relative to the truncation `h(x) = x`; `sigma2` is the diffusion variance
/// rate.
#[derive(Clone, Debug)]
pub struct ExpLevyModel {
    pub s0: f64,
    pub sigma2: f64,
    pub drift_b: f64,
    pub jumps: JumpFamily,
    pub t_horizon: f64,
    /// drift of the log price relative to h = x (cached)
    log_drift: f64,
    /// E-integral of x = exp(xt) - 1 against the Levy measure (cached)
    x_mean: f64,
}

impl ExpLevyModel {
    pub fn new(
        s0: f64,
        sigma2: f64,
        drift_b: f64,
        jumps: JumpFamily,
        t_horizon: f64,
    ) -> Result<Self, LevyError> {
        if !(s0 > 0.0) {
            return Err(LevyError::InvalidModel("S0 must be positive".into()));
        }
        if !(sigma2 >= 0.0) {
            return Err(LevyError::InvalidModel("sigma2 must be nonnegative".into()));
        }
        if !(t_horizon > 0.0) {
            return Err(LevyError::InvalidModel("horizon must be positive".into()));
        }
        jumps.validate()?;
        let x_mean = jumps.integrate_real(|xt| xt.exp() - 1.0);
        // monotone Levy processes admit no martingale measure
        if sigma2 == 0.0 {
            let (xlo, xhi) = jumps.x_support();
            let pure_drift = drift_b - x_mean;
            let monotone_up = xlo >= 0.0 && pure_drift >= 0.0;
            let monotone_down = xhi <= 0.0 && pure_drift <= 0.0;
            if matches!(jumps, JumpFamily::None) || monotone_up || monotone_down {
                return Err(LevyError::InvalidModel(
                    "model is monotone: needs diffusion, or jumps and drift of opposing signs"
                        .into(),
                ));
            }
        }
        let log_jump_shift = jumps.integrate_real(|xt| xt - (xt.exp() - 1.0));
        let log_drift = drift_b - 0.5 * sigma2 + log_jump_shift;
        Ok(ExpLevyModel {
            s0,
            sigma2,
            drift_b,
            jumps,
            t_horizon,
            log_drift,
            x_mean,
        })
    }

    /// Drift rate of the log price relative to `h(x) = x`.
    pub fn log_drift(&self) -> f64 {
        self.log_drift
    }

    /// Expected jump part of `X` per unit time.
    pub fn x_mean(&self) -> f64 {
        self.x_mean
    }

    fn check_strip(&self, re_z: f64) -> Result<(), LevyError> {
        let (lo, hi) = self.jumps.exponent_strip();
        if re_z <= lo + STRIP_MARGIN || re_z >= hi - STRIP_MARGIN {
            return Err(LevyError::DivergentExponent { re_z, lo, hi });
        }
        Ok(())
    }

    /// Cumulant exponent of the log price: `E[(S_t/S_0)^z] = exp(t * psi(z))`.
    ///
    /// Closed form for all supported families.
    pub fn log_price_exponent(&self, z: Complex64) -> Result<Complex64, LevyError> {
        self.check_strip(z.re)?;
        let diffusion = z * self.log_drift + z * z * (0.5 * self.sigma2);
        let jump = match &self.jumps {
            JumpFamily::None => Complex64::new(0.0, 0.0),
            family => {
                (family.log_jump_mgf(z) - 1.0 - z * family.log_jump_mean()) * family.intensity()
            }
        };
        Ok(diffusion + jump)
    }

    /// Admissible cone of wealth fractions: `{eta : eta * x > -1}` on the
    /// jump support, returned as interval bounds (possibly infinite).
    pub fn cone_bounds(&self) -> (f64, f64) {
        let (xlo, xhi) = self.jumps.x_support();
        let hi = if xlo <= -1.0 {
            1.0
        } else if xlo < 0.0 {
            -1.0 / xlo
        } else {
            f64::INFINITY
        };
        let lo = if xhi.is_infinite() {
            0.0
        } else if xhi > 0.0 {
            -1.0 / xhi
        } else {
            f64::NEG_INFINITY
        };
        (lo, hi)
    }

    fn check_cone(&self, eta: f64) -> Result<(), LevyError> {
        let (lo, hi) = self.cone_bounds();
        if eta < lo || eta > hi {
            return Err(LevyError::OutsideCone { eta, lo, hi });
        }
        Ok(())
    }

    /// Concave objective of the pure investment problem, per unit time.
    pub fn investment_objective(&self, p: RiskAversion, eta: f64) -> Result<f64, LevyError> {
        self.check_cone(eta)?;
        let pv = p.value();
        let diffusion = eta * self.drift_b - 0.5 * pv * eta * eta * self.sigma2;
        let jump = self.jumps.integrate_real(|xt| {
            let x = xt.exp() - 1.0;
            let base = 1.0 + eta * x;
            if base <= 0.0 {
                return 0.0; // boundary point of measure zero
            }
            (base.powf(1.0 - pv) - 1.0) / (1.0 - pv) - eta * x
        });
        Ok(diffusion + jump)
    }

    /// Derivative of the investment objective in `eta`.
    pub fn objective_derivative(&self, p: RiskAversion, eta: f64) -> Result<f64, LevyError> {
        self.check_cone(eta)?;
        let pv = p.value();
        let diffusion = self.drift_b - pv * eta * self.sigma2;
        let jump = self.jumps.integrate_real(|xt| {
            let x = xt.exp() - 1.0;
            let base = 1.0 + eta * x;
            if base <= 0.0 {
                return 0.0;
            }
            x * (base.powf(-pv) - 1.0)
        });
        Ok(diffusion + jump)
    }
}

/// Solution of the pure investment problem.
///
/// The opportunity process is `exp(a (T - t))`, its analogue under the tilted
/// measure is `exp(a_euro (T - t))`, and their ratio gives the process
/// `exp((a - a_euro)(T - t))` entering the risk premium prefactor.
#[derive(Clone, Copy, Debug)]
pub struct InvestmentSolution {
    /// Optimal fraction of wealth invested in the stock.
    pub eta_hat: f64,
    /// Opportunity rate under the physical measure.
    pub a: f64,
    /// Opportunity rate under the tilted measure.
    pub a_euro: f64,
    /// Whether the optimizer lies strictly inside the admissible cone.
    pub interior: bool,
    /// `exp(a * T)`.
    pub c0: f64,
    /// `exp(a_euro * T)`.
    pub c1: f64,
}

/// Distance from a finite cone boundary below which the optimizer is
/// declared a boundary maximizer.
const BOUNDARY_TOL: f64 = 1e-6;

/// Solves the pure investment problem by bisection on the derivative of the
/// concave objective.
pub fn solve_investment(
    model: &ExpLevyModel,
    p: RiskAversion,
) -> Result<InvestmentSolution, LevyError> {
    let (lo, hi) = model.cone_bounds();
    let pad = 1e-12;
    let clamp = |eta: f64| eta.clamp(lo + pad, hi - pad);
    let deriv = |eta: f64| model.objective_derivative(p, clamp(eta)).unwrap();
    // below this the first-order condition counts as satisfied (quadrature noise)
    let flat_tol = 1e-10;

    let d0 = deriv(0.0);
    let (mut a, mut b);
    if d0.abs() <= flat_tol {
        a = 0.0;
        b = 0.0;
    } else if d0 > 0.0 {
        // walk right until the derivative turns negative
        a = 0.0;
        let mut step = 0.25f64;
        loop {
            let cand = if hi.is_finite() {
                (a + step).min(hi - pad)
            } else {
                a + step
            };
            let d = deriv(cand);
            if d <= 0.0 {
                b = cand;
                break;
            }
            a = cand;
            if hi.is_finite() && hi - a <= 2.0 * pad {
                // derivative still positive at the cone edge: binding constraint
                return Err(LevyError::BoundaryMaximizer { eta: hi });
            }
            if a > 1e8 {
                return Err(LevyError::InvalidModel(
                    "investment objective does not peak; check moments".into(),
                ));
            }
            step *= 2.0;
        }
    } else {
        b = 0.0;
        let mut step = 0.25f64;
        loop {
            let cand = if lo.is_finite() {
                (b - step).max(lo + pad)
            } else {
                b - step
            };
            let d = deriv(cand);
            if d >= 0.0 {
                a = cand;
                break;
            }
            b = cand;
            if lo.is_finite() && b - lo <= 2.0 * pad {
                if d.abs() <= flat_tol {
                    // optimum at the edge with vanishing derivative; accept
                    a = cand;
                    break;
                }
                return Err(LevyError::BoundaryMaximizer { eta: lo });
            }
            if b < -1e8 {
                return Err(LevyError::InvalidModel(
                    "investment objective does not peak; check moments".into(),
                ));
            }
            step *= 2.0;
        }
    }

    let mut eta = 0.5 * (a + b);
    if a != b {
        for _ in 0..200 {
            eta = 0.5 * (a + b);
            let d = deriv(eta);
            if d > 0.0 {
                a = eta;
            } else {
                b = eta;
            }
            if b - a < 1e-12 * (1.0 + eta.abs()) {
                break;
            }
        }
        eta = 0.5 * (a + b);
    }

    // The hard cone edges are the wealth-positivity constraints, where some
    // 1 + eta x can reach zero; an optimizer that close makes the tilted
    // integrals explode. The eta = 0 edge induced by unbounded jump support
    // is harmless when the first-order condition holds there.
    let hard = |bound: f64| bound.is_finite() && bound != 0.0;
    if (hard(lo) && eta - lo < BOUNDARY_TOL) || (hard(hi) && hi - eta < BOUNDARY_TOL) {
        return Err(LevyError::BoundaryMaximizer { eta });
    }
    let interior = true;

    let pv = p.value();
    let g_max = model.investment_objective(p, eta)?;
    let a_rate = (1.0 - pv) * g_max;
    let a_euro = tilted_opportunity_rate(model, p, eta);
    Ok(InvestmentSolution {
        eta_hat: eta,
        a: a_rate,
        a_euro,
        interior,
        c0: (a_rate * model.t_horizon).exp(),
        c1: (a_euro * model.t_horizon).exp(),
    })
}

/// Opportunity rate of the tilted measure obtained from the constant-rate
/// ansatz in the drift condition.
fn tilted_opportunity_rate(model: &ExpLevyModel, p: RiskAversion, eta: f64) -> f64 {
    let pv = p.value();
    let diffusion = (1.0 + pv) * eta * model.drift_b
        - 0.5 * (pv + 1.0) * (pv + 2.0) * eta * eta * model.sigma2;
    let jump = model.jumps.integrate_real(|xt| {
        let x = xt.exp() - 1.0;
        let base = 1.0 + eta * x;
        if base <= 0.0 {
            return 0.0;
        }
        base.powf(-1.0 - pv) - 1.0 + (1.0 + pv) * eta * x
    });
    diffusion - jump
}

/// Sets the return drift so that the investment optimizer equals
/// `eta_target` exactly (first-order condition solved for the drift).
pub fn drift_for_target_eta(
    sigma2: f64,
    jumps: &JumpFamily,
    p: RiskAversion,
    eta_target: f64,
) -> f64 {
    let pv = p.value();
    let jump = jumps.integrate_real(|xt| {
        let x = xt.exp() - 1.0;
        let base = 1.0 + eta_target * x;
        if base <= 0.0 {
            return 0.0;
        }
        x * (base.powf(-pv) - 1.0)
    });
    pv * eta_target * sigma2 - jump
}

/// Log-price cumulant exponent under the tilted measure, with the drift fixed
/// by the first-order condition of the investment problem. Construction
/// caches the tilted variance rate; evaluations are memoised.
pub struct TiltedLogExponent {
    model: ExpLevyModel,
    p: f64,
    eta: f64,
    /// drift rate of X under the tilted measure (truncation h = x)
    b_euro: f64,
    /// tilted variance rate of X (diffusion plus tilted second jump moment)
    c_tilde_euro: f64,
    cache: dashmap::DashMap<(u64, u64), Complex64>,
}

impl TiltedLogExponent {
    pub fn new(
        model: &ExpLevyModel,
        p: RiskAversion,
        sol: &InvestmentSolution,
    ) -> Result<Self, LevyError> {
        if !sol.interior {
            return Err(LevyError::BoundaryMaximizer { eta: sol.eta_hat });
        }
        let eta = sol.eta_hat;
        let pv = p.value();
        let x2_tilted = model.jumps.integrate_real(|xt| {
            let x = xt.exp() - 1.0;
            let base = 1.0 + eta * x;
            if base <= 0.0 {
                return 0.0;
            }
            x * x * base.powf(-1.0 - pv)
        });
        let c_tilde_euro = model.sigma2 + x2_tilted;
        let b_euro = -eta * c_tilde_euro;
        Ok(TiltedLogExponent {
            model: model.clone(),
            p: pv,
            eta,
            b_euro,
            c_tilde_euro,
            cache: dashmap::DashMap::new(),
        })
    }

    pub fn eta_hat(&self) -> f64 {
        self.eta
    }

    /// Tilted drift rate of `X`, equal to `-eta_hat * tilted_variance`.
    pub fn drift_euro(&self) -> f64 {
        self.b_euro
    }

    /// Tilted variance rate of `X`.
    pub fn tilted_variance(&self) -> f64 {
        self.c_tilde_euro
    }

    /// Strip of `Re(z)` on which the tilted exponent converges. A positive
    /// optimizer thickens the upper edge of a Kou strip by `1 + p` since the
    /// tilt damps upward jumps.
    pub fn strip(&self) -> (f64, f64) {
        let (lo, hi) = self.model.jumps.exponent_strip();
        let hi = if self.eta > STRIP_MARGIN && hi.is_finite() {
            hi + 1.0 + self.p
        } else {
            hi
        };
        (lo, hi)
    }

    /// Tilted cumulant exponent of the log price.
    pub fn eval(&self, z: Complex64) -> Result<Complex64, LevyError> {
        let (lo, hi) = self.strip();
        if z.re <= lo + STRIP_MARGIN || z.re >= hi - STRIP_MARGIN {
            return Err(LevyError::DivergentExponent { re_z: z.re, lo, hi });
        }
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let diffusion = z * (self.b_euro - 0.5 * self.model.sigma2)
            + z * z * (0.5 * self.model.sigma2);
        let eta = self.eta;
        let pv = self.p;
        let jump = self.model.jumps.integrate(z.re.abs().max(1.0), |xt| {
            let x = xt.exp() - 1.0;
            let base = 1.0 + eta * x;
            if base <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let weight = base.powf(-1.0 - pv);
            ((z * xt).exp() - 1.0 - z * x) * weight
        });
        let value = diffusion + jump;
        self.cache.insert(key, value);
        Ok(value)
    }
}

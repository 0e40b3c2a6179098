//! Pricing and hedging engine for exponential Levy models: marginal price,
//! mean value process, pure hedge, feedback hedge, and risk premium.
//!
//! All quantities are driven by the tilted log-price cumulant exponent `psi`.
//! The mean value process of a claim with transform kernel `l` is
//!
//! ```text
//! V(t, s) = int l(z) s^z exp(Psi(z) (T - t)) dz
//! Psi(z)  = psi(z) - psi(1) (psi(z+1) - psi(z) - psi(1)) / (psi(2) - 2 psi(1))
//! ```
//!
//! which makes `S` a martingale under the pricing measure (`Psi(1) = 0`).
//! The pure hedge and the quadratic hedging error (hence the risk premium)
//! follow from the same exponent; see the individual methods.

use crate::contour_quadrature::{
    double_line_integral, line_integral, QuadError, QuadratureSpec,
};
use crate::levy_models::{
    ExpLevyModel, InvestmentSolution, LevyError, RiskAversion, TiltedLogExponent,
};
use crate::numerics::{phi1, simpson_sum, ChebyshevInterpolant};
use crate::payoff_transforms::{PayoffTransform, TransformError};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("non-positive price encountered along the path at step {index}")]
    NonPositivePrice { index: usize },
    #[error("risk premium {value} is negative beyond tolerance; integrand resolution suspect")]
    NegativePremium { value: f64 },
    #[error("imaginary residual {imag} exceeds tolerance for value {value}")]
    ImaginaryResidual { imag: f64, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Discretized hedge along one price path.
///
/// `strategies[i]` is the holding over `(times[i], times[i+1]]`, computed
/// from left-limit information only; `gains` accumulates the trading gains
/// and `terminal_error = pi0 + G_T - H`.
#[derive(Clone, Debug)]
pub struct PathHedgeResult {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
    pub mean_values: Vec<f64>,
    pub pure_hedges: Vec<f64>,
    pub strategies: Vec<f64>,
    pub gains: Vec<f64>,
    pub terminal_error: f64,
}

/// Transform-based pricing and hedging engine for an exponential Levy model.
pub struct LevyHedgeEngine {
    model: ExpLevyModel,
    p: RiskAversion,
    sol: InvestmentSolution,
    transform: PayoffTransform,
    quad: QuadratureSpec,
    tilt: TiltedLogExponent,
    /// psi(1): tilted drift of the stock
    psi_one: f64,
    /// psi(2) - 2 psi(1): tilted variance rate, strictly positive
    variance: f64,
}

impl LevyHedgeEngine {
    pub fn new(
        model: ExpLevyModel,
        p: RiskAversion,
        sol: InvestmentSolution,
        transform: PayoffTransform,
        quad: QuadratureSpec,
    ) -> Result<Self, EngineError> {
        quad.validate()?;
        if !sol.interior {
            return Err(EngineError::Levy(LevyError::BoundaryMaximizer {
                eta: sol.eta_hat,
            }));
        }
        let tilt = TiltedLogExponent::new(&model, p, &sol)?;
        let psi_one = tilt.eval(Complex64::new(1.0, 0.0))?.re;
        let psi_two = tilt.eval(Complex64::new(2.0, 0.0))?.re;
        let variance = psi_two - 2.0 * psi_one;
        if variance <= 0.0 {
            return Err(EngineError::InvalidInput(format!(
                "tilted variance rate must be positive, got {variance}"
            )));
        }
        // validate every abscissa the pricing and premium integrals touch
        let r = transform.abscissa();
        let mut res = vec![0.0, 1.0, 2.0];
        if transform.has_line_part() {
            res.extend([r, r + 1.0, 2.0 * r, 2.0 * r + 1.0]);
        }
        for (za, _) in transform.atoms() {
            res.extend([za.re, za.re + 1.0, 2.0 * za.re, 2.0 * za.re + 1.0]);
            if transform.has_line_part() {
                res.extend([za.re + r, za.re + r + 1.0]);
            }
        }
        for re in res {
            tilt.eval(Complex64::new(re, 0.0))?;
        }
        Ok(LevyHedgeEngine {
            model,
            p,
            sol,
            transform,
            quad,
            tilt,
            psi_one,
            variance,
        })
    }

    pub fn model(&self) -> &ExpLevyModel {
        &self.model
    }

    pub fn investment(&self) -> &InvestmentSolution {
        &self.sol
    }

    pub fn transform(&self) -> &PayoffTransform {
        &self.transform
    }

    pub fn risk_aversion(&self) -> RiskAversion {
        self.p
    }

    /// Tilted log-price exponent (memoised).
    pub fn tilted_exponent(&self, z: Complex64) -> Result<Complex64, EngineError> {
        Ok(self.tilt.eval(z)?)
    }

    fn psi(&self, z: Complex64) -> Complex64 {
        self.tilt
            .eval(z)
            .expect("abscissa validated at engine construction")
    }

    /// Pricing-measure exponent of the log price; vanishes at 0 and 1.
    pub fn mean_value_exponent(&self, z: Complex64) -> Result<Complex64, EngineError> {
        let pz = self.tilt.eval(z)?;
        let pz1 = self.tilt.eval(z + 1.0)?;
        Ok(pz - self.psi_one * (pz1 - pz - self.psi_one) / self.variance)
    }

    /// Integrand weight of the pure hedge:
    /// `(psi(z+1) - psi(z) - psi(1)) / (psi(2) - 2 psi(1))`.
    fn hedge_weight(&self, z: Complex64) -> Complex64 {
        (self.psi(z + 1.0) - self.psi(z) - self.psi_one) / self.variance
    }

    /// Feedback adjustment per share: `a~(s) = psi(1) / ((psi(2) - 2 psi(1)) s)`;
    /// satisfies `s * a~(s) = -eta_hat`.
    pub fn adjustment(&self, s_minus: f64) -> f64 {
        self.psi_one / (self.variance * s_minus)
    }

    /// Truncation height needed at time-to-maturity `tau`: the pricing
    /// exponent damps the integrand like `exp(-sigma2/2 u^2 tau)`, so the
    /// height grows as `tau` shrinks. Capped; the convergence certificate
    /// reports honestly if the cap binds.
    fn truncation_for(&self, tau: f64) -> f64 {
        let rate = 0.5 * self.model.sigma2 * tau;
        let m = if rate > 0.0 {
            (40.0 / rate).sqrt()
        } else {
            f64::INFINITY
        };
        m.clamp(self.quad.truncation, 32.0 * self.quad.truncation)
    }

    fn spec_for(&self, tau: f64) -> QuadratureSpec {
        let m = self.truncation_for(tau);
        let h0 = 2.0 * self.quad.truncation / (self.quad.nodes - 1) as f64;
        let n = ((2.0 * m / h0).ceil() as usize) | 1;
        QuadratureSpec {
            truncation: m,
            nodes: n.max(self.quad.nodes),
            ..self.quad
        }
    }

    fn check_imag(&self, v: Complex64) -> Result<f64, EngineError> {
        if v.im.abs() > 1e-10 * (1.0 + v.re.abs()) {
            return Err(EngineError::ImaginaryResidual {
                imag: v.im,
                value: v.re,
            });
        }
        Ok(v.re)
    }

    /// Shared evaluator for the mean value process and the pure hedge:
    /// atoms plus a line integral of `l(z) s^{z - shift} w(z) e^{Psi(z) tau}`.
    fn transform_value(
        &self,
        tau: f64,
        s: f64,
        shift: f64,
        weight: &(dyn Fn(Complex64) -> Complex64 + Sync),
    ) -> Result<f64, EngineError> {
        if !(s > 0.0) {
            return Err(EngineError::InvalidInput("price must be positive".into()));
        }
        let sc = Complex64::new(s, 0.0);
        let mut total = Complex64::new(0.0, 0.0);
        for (z, w) in self.transform.atoms() {
            let psi_cap = self.mean_value_exponent(*z)?;
            total += w * weight(*z) * sc.powc(z - shift) * (psi_cap * tau).exp();
        }
        if self.transform.has_line_part() {
            let f = |z: Complex64| {
                let psi_cap = self.psi(z)
                    - self.psi_one * (self.psi(z + 1.0) - self.psi(z) - self.psi_one)
                        / self.variance;
                self.transform.kernel(z) * weight(z) * sc.powc(z - shift) * (psi_cap * tau).exp()
            };
            let spec = self.spec_for(tau);
            let cert = line_integral(&f, self.transform.abscissa(), &spec, None)?;
            total += cert.value;
        }
        self.check_imag(total)
    }

    /// Mean value process `V(t, s)`: the claim's price at time `t` and spot
    /// `s` under the pricing measure. At `t = T` this is the payoff itself.
    pub fn mean_value(&self, t: f64, s: f64) -> Result<f64, EngineError> {
        let tau = self.model.t_horizon - t;
        if tau < -1e-12 || t < -1e-12 {
            return Err(EngineError::InvalidInput(format!(
                "time {t} outside [0, {}]",
                self.model.t_horizon
            )));
        }
        if tau <= 1e-12 * self.model.t_horizon {
            return Ok(self.transform.reconstruct(s, &self.quad)?);
        }
        self.transform_value(tau, s, 0.0, &|_z| Complex64::new(1.0, 0.0))
    }

    /// Pure hedge coefficient `xi(t, s)`: holdings of the claim's
    /// variance-minimizing hedge before the feedback correction.
    pub fn pure_hedge(&self, t: f64, s_minus: f64) -> Result<f64, EngineError> {
        let tau = self.model.t_horizon - t;
        if tau <= 1e-12 * self.model.t_horizon {
            return Err(EngineError::InvalidInput(
                "pure hedge is evaluated strictly before maturity".into(),
            ));
        }
        self.transform_value(tau, s_minus, 1.0, &|z| self.hedge_weight(z))
    }

    /// Marginal utility-based price: `V(0, S0)`.
    pub fn marginal_price(&self) -> Result<f64, EngineError> {
        self.mean_value(0.0, self.model.s0)
    }

    /// Premium integrand for a pair of transform exponents.
    fn premium_integrand(&self, z1: Complex64, z2: Complex64) -> Complex64 {
        let t = self.model.t_horizon;
        let p1 = self.psi(z1);
        let p2 = self.psi(z2);
        let w1 = self.psi(z1 + 1.0) - p1 - self.psi_one;
        let w2 = self.psi(z2 + 1.0) - p2 - self.psi_one;
        let ps = self.psi(z1 + z2);
        let cross = ps - p1 - p2 - w1 * w2 / self.variance;
        let cap1 = p1 - self.psi_one * w1 / self.variance;
        let cap2 = p2 - self.psi_one * w2 / self.variance;
        let decay = cap1 + cap2 - self.psi_one * self.psi_one / self.variance;
        // (e^{k T} - e^{psi T}) / (k - psi) = T e^{psi T} phi1((k - psi) T),
        // smooth through the degenerate point k = psi
        let s0 = Complex64::new(self.model.s0, 0.0);
        s0.powc(z1 + z2) * cross * (ps * t).exp() * t * phi1((decay - ps) * t)
    }

    /// Risk premium per option sold, for initial endowment `v`.
    ///
    /// The quadratic hedging error of the claim under the tilted measure is
    /// `2 v C0 / (p C1)` times this value.
    pub fn risk_premium(&self, v: f64) -> Result<f64, EngineError> {
        if !(v > 0.0) {
            return Err(EngineError::InvalidInput("endowment must be positive".into()));
        }
        let pref = self.p.value()
            * ((self.sol.a_euro - self.sol.a) * self.model.t_horizon).exp()
            / (2.0 * v);
        let mut total = Complex64::new(0.0, 0.0);

        // atom-atom pairs
        for (za, wa) in self.transform.atoms() {
            for (zb, wb) in self.transform.atoms() {
                total += wa * wb * self.premium_integrand(*za, *zb);
            }
        }

        if self.transform.has_line_part() {
            let r = self.transform.abscissa();
            // the integrand decays only algebraically along the
            // anti-diagonal (z1 + z2 constant), so the premium needs a taller
            // truncation than the pricing integrals; tolerances are MC-grade
            let m = (2.5 * self.quad.truncation).max(280.0);
            let spec = QuadratureSpec {
                truncation: m,
                nodes: ((2.0 * m / 0.2).ceil() as usize) | 1,
                rel_tol: self.quad.rel_tol.max(3e-5),
                abs_tol: 1e-9,
                ..self.quad
            };
            // line-line
            let f = |z1: Complex64, z2: Complex64| {
                self.premium_integrand(z1, z2)
                    * self.transform.kernel(z1)
                    * self.transform.kernel(z2)
            };
            total += double_line_integral(&f, r, r, &spec, true)?.value;
            // atom-line cross terms, twice by symmetry
            for (za, wa) in self.transform.atoms() {
                let g = |z: Complex64| self.premium_integrand(*za, z) * self.transform.kernel(z);
                let cert = line_integral(&g, r, &spec, None)?;
                total += 2.0 * wa * cert.value;
            }
        }

        let value = pref * self.check_imag(total)?;
        if value < -1e-10 {
            return Err(EngineError::NegativePremium { value });
        }
        Ok(value.max(0.0))
    }

    /// Runs the feedback hedge along a discretized path. Holdings over
    /// `(t_{i-1}, t_i]` use only time-`t_{i-1}` information:
    ///
    /// ```text
    /// phi_i = xi(t_{i-1}, S_{i-1}) - (pi0 + G_{i-1} - V(t_{i-1}, S_{i-1})) a~(S_{i-1})
    /// G_i   = G_{i-1} + phi_i (S_i - S_{i-1})
    /// ```
    pub fn hedge_along_path(
        &self,
        times: &[f64],
        prices: &[f64],
    ) -> Result<PathHedgeResult, EngineError> {
        if times.len() != prices.len() || times.len() < 2 {
            return Err(EngineError::InvalidInput(
                "need matching times and prices with at least two points".into(),
            ));
        }
        for (i, s) in prices.iter().enumerate() {
            if !(*s > 0.0) {
                return Err(EngineError::NonPositivePrice { index: i });
            }
        }
        let n = times.len() - 1;
        let pi0 = self.mean_value(times[0], prices[0])?;
        let mut mean_values = Vec::with_capacity(n + 1);
        let mut pure_hedges = Vec::with_capacity(n);
        let mut strategies = Vec::with_capacity(n);
        let mut gains = Vec::with_capacity(n + 1);
        gains.push(0.0);
        mean_values.push(pi0);
        let mut g = 0.0;
        for i in 1..=n {
            let (t_prev, s_prev) = (times[i - 1], prices[i - 1]);
            let xi = self.pure_hedge(t_prev, s_prev)?;
            let v_prev = mean_values[i - 1];
            let phi = xi - (pi0 + g - v_prev) * self.adjustment(s_prev);
            g += phi * (prices[i] - s_prev);
            pure_hedges.push(xi);
            strategies.push(phi);
            gains.push(g);
            let v_i = if i == n {
                self.transform.payoff_value(prices[i])
            } else {
                self.mean_value(times[i], prices[i])?
            };
            mean_values.push(v_i);
        }
        let payoff = self.transform.payoff_value(prices[n]);
        Ok(PathHedgeResult {
            times: times.to_vec(),
            prices: prices.to_vec(),
            mean_values,
            pure_hedges,
            strategies,
            gains,
            terminal_error: pi0 + g - payoff,
        })
    }

    /// Tabulates `V(t, .)` and `xi(t, .)` over a log-price range for bulk
    /// path evaluation. The tables carry both line and atom parts.
    pub fn step_tables(
        &self,
        t: f64,
        s_lo: f64,
        s_hi: f64,
    ) -> Result<StepTables, EngineError> {
        let tau = self.model.t_horizon - t;
        if tau <= 0.0 {
            return Err(EngineError::InvalidInput(
                "tables are built strictly before maturity".into(),
            ));
        }
        if !(s_lo > 0.0 && s_hi > s_lo) {
            return Err(EngineError::InvalidInput("bad price range".into()));
        }
        let x_lo = s_lo.ln() - 1e-9;
        let x_hi = s_hi.ln() + 1e-9;

        // per-node coefficient arrays on the half line (conjugate symmetry);
        // tables serve Monte Carlo lookups, so the truncation is capped: the
        // neglected Gaussian tail is orders below the MC tolerance
        let r = self.transform.abscissa();
        let mut line_terms: Vec<(f64, Complex64, Complex64)> = Vec::new(); // (u, cv, cxi)
        if self.transform.has_line_part() {
            let m = self
                .truncation_for(tau)
                .min((2.0 * self.quad.truncation).max(800.0));
            let h = 0.05_f64.min(2.0 * self.quad.truncation / (self.quad.nodes - 1) as f64);
            let count = ((m / h).ceil() as usize).max(8);
            let h = m / count as f64;
            let nodes: Vec<Complex64> = (0..=count)
                .map(|k| Complex64::new(r, h * k as f64))
                .collect();
            let coeffs: Vec<(Complex64, Complex64)> = nodes
                .par_iter()
                .map(|&z| {
                    let w_xi = self.hedge_weight(z);
                    let psi_cap = self.psi(z) - self.psi_one * w_xi;
                    let base = self.transform.kernel(z) * (psi_cap * tau).exp();
                    (base, base * w_xi)
                })
                .collect();
            // Simpson weights on [0, m]; the full-line value is
            // 2 Re(sum over the upper half) with the center counted once
            for (k, (&(cv, cxi), z)) in coeffs.iter().zip(&nodes).enumerate() {
                let w = if k == 0 || k == count {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let scale = Complex64::new(0.0, h / 3.0) * w;
                line_terms.push((z.im, cv * scale, cxi * scale));
            }
        }
        let atoms: Vec<(Complex64, Complex64, Complex64)> = self
            .transform
            .atoms()
            .iter()
            .map(|(z, w)| {
                let w_xi = self.hedge_weight(*z);
                let psi_cap = self.psi(*z) - self.psi_one * w_xi;
                let grown = w * (psi_cap * tau).exp();
                (*z, grown, grown * w_xi)
            })
            .collect();

        let eval_pair = |x: f64| -> (f64, f64) {
            let mut v = Complex64::new(0.0, 0.0);
            let mut xi = Complex64::new(0.0, 0.0);
            for (u, cv, cxi) in &line_terms {
                let osc = Complex64::new(0.0, u * x).exp();
                let center = if *u == 0.0 { 0.5 } else { 1.0 };
                v += cv * osc * 2.0 * center;
                xi += cxi * osc * 2.0 * center;
            }
            // the doubled half-line carries 2 Re(.)
            let mut v = v.re;
            let mut xi = xi.re;
            let s = x.exp();
            let sr = s.powf(r);
            v *= sr;
            xi *= sr / s;
            for (z, cv, cxi) in &atoms {
                let pw = Complex64::new(0.0, z.im * x).exp() * (z.re * x).exp();
                v += (cv * pw).re;
                xi += (cxi * pw / s).re;
            }
            (v, xi)
        };

        // resolution follows the payoff-kink smoothing scale sqrt(var * tau)
        let width = (self.tilt.tilted_variance().max(1e-8) * tau).sqrt();
        let n_nodes = ((4.0 * (x_hi - x_lo) / width).ceil() as usize).clamp(48, 2048);
        let mut vs = Vec::with_capacity(n_nodes + 1);
        let mut xs = Vec::with_capacity(n_nodes + 1);
        for j in 0..=n_nodes {
            let c = (std::f64::consts::PI * j as f64 / n_nodes as f64).cos();
            let x = 0.5 * (x_lo + x_hi) + 0.5 * (x_hi - x_lo) * c;
            let (v, xi) = eval_pair(x);
            vs.push((x, v));
            xs.push((x, xi));
        }
        let mut iv = vs.iter().map(|p| p.1);
        let v_tab = ChebyshevInterpolant::build(x_lo, x_hi, n_nodes, |_x| iv.next().unwrap());
        let mut ix = xs.iter().map(|p| p.1);
        let xi_tab = ChebyshevInterpolant::build(x_lo, x_hi, n_nodes, |_x| ix.next().unwrap());
        Ok(StepTables {
            v: v_tab,
            xi: xi_tab,
        })
    }
}

/// Interpolated `V` and `xi` at one time step, indexed by log price.
pub struct StepTables {
    v: ChebyshevInterpolant,
    xi: ChebyshevInterpolant,
}

impl StepTables {
    pub fn mean_value(&self, s: f64) -> f64 {
        self.v.eval(s.ln())
    }

    pub fn pure_hedge(&self, s: f64) -> f64 {
        self.xi.eval(s.ln())
    }
}

/// Convenience check used by tests: a line integral of the raw kernel at
/// maturity equals the payoff; retained here to keep `simpson_sum` exercised
/// against the engine path.
#[allow(dead_code)]
fn kernel_reconstruction_probe(
    transform: &PayoffTransform,
    s: f64,
    m: f64,
    n: usize,
) -> Complex64 {
    let h = 2.0 * m / (n - 1) as f64;
    let values: Vec<Complex64> = (0..n)
        .map(|k| {
            let z = Complex64::new(transform.abscissa(), -m + h * k as f64);
            transform.kernel(z) * Complex64::new(s, 0.0).powc(z)
        })
        .collect();
    simpson_sum(&values, h) * Complex64::new(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_models::{drift_for_target_eta, solve_investment, JumpFamily};
    use crate::numerics::{black_scholes_call, black_scholes_delta};

    fn brownian_engine(payoff: PayoffTransform) -> LevyHedgeEngine {
        let p = RiskAversion::new(2.0).unwrap();
        // c = 0.04, drift for eta = 0.5
        let model = ExpLevyModel::new(100.0, 0.04, 0.04, JumpFamily::None, 0.25).unwrap();
        let sol = solve_investment(&model, p).unwrap();
        LevyHedgeEngine::new(model, p, sol, payoff, QuadratureSpec::default()).unwrap()
    }

    fn kou_engine(payoff: PayoffTransform) -> LevyHedgeEngine {
        let p = RiskAversion::new(2.0).unwrap();
        let jumps = JumpFamily::KouDoubleExp {
            intensity: 3.0,
            up_prob: 0.4,
            rate_up: 25.0,
            rate_down: 20.0,
        };
        let drift = drift_for_target_eta(0.02, &jumps, p, 0.4);
        let model = ExpLevyModel::new(100.0, 0.02, drift, jumps, 0.25).unwrap();
        let sol = solve_investment(&model, p).unwrap();
        LevyHedgeEngine::new(model, p, sol, payoff, QuadratureSpec::default()).unwrap()
    }

    fn unit_monomial(re: f64) -> PayoffTransform {
        PayoffTransform::monomial(Complex64::new(re, 0.0), Complex64::new(1.0, 0.0))
    }

    #[test]
    fn pricing_exponent_vanishes_at_zero_and_one() {
        for engine in [
            brownian_engine(unit_monomial(1.0)),
            kou_engine(unit_monomial(1.0)),
        ] {
            for z in [0.0, 1.0] {
                let v = engine
                    .mean_value_exponent(Complex64::new(z, 0.0))
                    .unwrap();
                assert!(v.norm() < 1e-12, "Psi({z}) = {v}");
            }
        }
    }

    #[test]
    fn pricing_exponent_brownian_closed_form() {
        let engine = brownian_engine(unit_monomial(1.0));
        for (re, im) in [(1.2, 0.0), (1.2, 7.0), (0.3, -2.0)] {
            let z = Complex64::new(re, im);
            let got = engine.mean_value_exponent(z).unwrap();
            let expected = 0.02 * (z * z - z);
            assert!((got - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn adjustment_recovers_optimal_fraction() {
        let engine = kou_engine(unit_monomial(1.0));
        for s in [20.0, 100.0, 317.0] {
            let lhs = s * engine.adjustment(s);
            assert!((lhs + engine.investment().eta_hat).abs() < 1e-8);
        }
        let eng_b = brownian_engine(unit_monomial(1.0));
        assert!((100.0 * eng_b.adjustment(100.0) + 0.5).abs() < 1e-10);
    }

    #[test]
    fn mean_value_of_monomials() {
        // H = S_T: V(t, s) = s at every date; H = 1: V = 1
        let stock = kou_engine(unit_monomial(1.0));
        let bond = kou_engine(unit_monomial(0.0));
        for (t, s) in [(0.0, 100.0), (0.1, 73.0), (0.24, 140.0)] {
            assert!((stock.mean_value(t, s).unwrap() - s).abs() < 1e-9 * s);
            assert!((bond.mean_value(t, s).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((stock.marginal_price().unwrap() - 100.0).abs() < 1e-7);
        assert!((bond.marginal_price().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_hedge_of_monomials() {
        let stock = kou_engine(unit_monomial(1.0));
        let bond = kou_engine(unit_monomial(0.0));
        assert!((stock.pure_hedge(0.1, 80.0).unwrap() - 1.0).abs() < 1e-10);
        assert!(bond.pure_hedge(0.1, 80.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn brownian_call_matches_black_scholes() {
        let engine = brownian_engine(PayoffTransform::call(100.0).unwrap());
        let price = engine.marginal_price().unwrap();
        let bs = black_scholes_call(100.0, 100.0, 0.04, 0.25);
        assert!(
            (price - bs).abs() <= 1e-6 * bs,
            "transform {price} vs Black-Scholes {bs}"
        );
        let delta = engine.pure_hedge(0.0, 100.0).unwrap();
        let bs_delta = black_scholes_delta(100.0, 100.0, 0.04, 0.25);
        assert!((delta - bs_delta).abs() <= 1e-6);
    }

    #[test]
    fn brownian_mean_value_near_maturity() {
        let engine = brownian_engine(PayoffTransform::call(100.0).unwrap());
        let t = 0.25 - 0.25 / 252.0;
        let v = engine.mean_value(t, 101.0).unwrap();
        let bs = black_scholes_call(101.0, 100.0, 0.04, 0.25 / 252.0);
        assert!((v - bs).abs() < 1e-7 * (1.0 + bs), "{v} vs {bs}");
        // and exactly at maturity the payoff comes back
        let vt = engine.mean_value(0.25, 101.0).unwrap();
        assert!((vt - 1.0).abs() < 1e-8);
    }

    #[test]
    fn risk_premium_brownian_vanishes() {
        let engine = brownian_engine(PayoffTransform::call(100.0).unwrap());
        let premium = engine.risk_premium(100.0).unwrap();
        assert!(premium <= 1e-8, "complete-market premium {premium}");
    }

    #[test]
    fn risk_premium_trivial_claims() {
        // constant claim and the stock itself are replicable: premium 0
        let bond = kou_engine(unit_monomial(0.0));
        assert!(bond.risk_premium(241.0).unwrap() <= 1e-10);
        let stock = kou_engine(unit_monomial(1.0));
        assert!(stock.risk_premium(241.0).unwrap() <= 1e-8);
    }

    #[test]
    fn risk_premium_kou_call_positive() {
        let engine = kou_engine(PayoffTransform::call(100.0).unwrap());
        let premium = engine.risk_premium(241.0).unwrap();
        assert!(premium > 0.0, "incomplete market must price risk, got {premium}");
    }

    #[test]
    fn hedge_path_constant_claim_is_flat() {
        let engine = kou_engine(unit_monomial(0.0));
        let times = [0.0, 0.1, 0.2, 0.25];
        let prices = [100.0, 104.0, 97.0, 101.0];
        let res = engine.hedge_along_path(&times, &prices).unwrap();
        for phi in &res.strategies {
            assert!(phi.abs() < 1e-11);
        }
        for g in &res.gains {
            assert!(g.abs() < 1e-9);
        }
        assert!(res.terminal_error.abs() < 1e-9);
    }

    #[test]
    fn hedge_path_martingale_model_uses_pure_hedge() {
        // zero drift: eta = 0, adjustment vanishes, phi = xi
        let p = RiskAversion::new(2.0).unwrap();
        let model = ExpLevyModel::new(100.0, 0.04, 0.0, JumpFamily::None, 0.25).unwrap();
        let sol = solve_investment(&model, p).unwrap();
        let engine = LevyHedgeEngine::new(
            model,
            p,
            sol,
            PayoffTransform::call(100.0).unwrap(),
            QuadratureSpec::default(),
        )
        .unwrap();
        let times = [0.0, 0.08, 0.17, 0.25];
        let prices = [100.0, 96.0, 108.0, 103.0];
        let res = engine.hedge_along_path(&times, &prices).unwrap();
        for (phi, xi) in res.strategies.iter().zip(&res.pure_hedges) {
            assert!((phi - xi).abs() < 1e-12);
        }
    }

    #[test]
    fn hedge_path_rejects_bad_input() {
        let engine = kou_engine(unit_monomial(0.0));
        assert!(matches!(
            engine.hedge_along_path(&[0.0, 0.1], &[100.0, -3.0]),
            Err(EngineError::NonPositivePrice { index: 1 })
        ));
        assert!(engine.hedge_along_path(&[0.0], &[100.0]).is_err());
    }

    #[test]
    fn step_tables_agree_with_direct_evaluation() {
        let engine = kou_engine(PayoffTransform::call(100.0).unwrap());
        for t in [0.0, 0.2] {
            let tables = engine.step_tables(t, 60.0, 170.0).unwrap();
            for s in [61.0, 84.0, 99.5, 100.0, 117.0, 169.0] {
                let v_direct = engine.mean_value(t, s).unwrap();
                let xi_direct = engine.pure_hedge(t, s).unwrap();
                let v_tab = tables.mean_value(s);
                let xi_tab = tables.pure_hedge(s);
                assert!(
                    (v_direct - v_tab).abs() < 2e-5 * (1.0 + v_direct.abs()),
                    "t={t} s={s}: V {v_tab} vs {v_direct}"
                );
                assert!(
                    (xi_direct - xi_tab).abs() < 2e-5,
                    "t={t} s={s}: xi {xi_tab} vs {xi_direct}"
                );
            }
        }
    }

    #[test]
    fn step_tables_near_maturity_brownian_match_black_scholes() {
        // near maturity the Brownian engine has closed-form exponents, so the
        // capped-truncation table path can be checked tightly end to end
        let engine = brownian_engine(PayoffTransform::call(100.0).unwrap());
        let dt = 0.25 / 252.0;
        let t = 0.25 - dt;
        let tables = engine.step_tables(t, 80.0, 125.0).unwrap();
        for s in [92.0, 99.5, 100.0, 100.5, 108.0] {
            let bs = black_scholes_call(s, 100.0, 0.04, dt);
            let bs_d = black_scholes_delta(s, 100.0, 0.04, dt);
            assert!(
                (tables.mean_value(s) - bs).abs() < 5e-4,
                "s={s}: V {} vs BS {bs}",
                tables.mean_value(s)
            );
            assert!(
                (tables.pure_hedge(s) - bs_d).abs() < 5e-4,
                "s={s}: xi {} vs BS delta {bs_d}",
                tables.pure_hedge(s)
            );
        }
    }

    #[test]
    fn boundary_solution_is_refused() {
        let p = RiskAversion::new(2.0).unwrap();
        let model = ExpLevyModel::new(100.0, 0.04, 0.04, JumpFamily::None, 0.25).unwrap();
        let mut sol = solve_investment(&model, p).unwrap();
        sol.interior = false;
        assert!(matches!(
            LevyHedgeEngine::new(
                model,
                p,
                sol,
                PayoffTransform::call(100.0).unwrap(),
                QuadratureSpec::default()
            ),
            Err(EngineError::Levy(LevyError::BoundaryMaximizer { .. }))
        ));
    }
}

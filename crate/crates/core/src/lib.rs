//! Marginal utility-based pricing and hedging for exponential Levy and
//! Barndorff-Nielsen--Shephard (BNS) stochastic volatility models.
//!
//! For a power-utility investor selling a small number of European claims,
//! the first-order expansion of the indifference price reads
//!
//! ```text
//! price(q) = pi0 + q * pi' + o(q)
//! ```
//!
//! where `pi0` is the marginal price (an expectation under the q-optimal
//! martingale measure) and `pi'` is the risk premium per option sold. Both,
//! together with the associated feedback hedging strategy, reduce to a
//! mean-variance hedging problem under a tilted measure and can be computed
//! semi-explicitly from Laplace transform representations of the payoff.
//!
//! The crate is organised as follows:
//!
//! * [`levy_models`] -- parametric exponential Levy models (Brownian, Merton,
//!   Kou), their log-price cumulant exponents under the physical and tilted
//!   measures, and the pure investment optimizer.
//! * [`bns_models`] -- BNS Gamma-OU parameters, affine opportunity-process
//!   coefficients, and closed-form integrals of the Gamma-OU exponent.
//! * [`payoff_transforms`] -- integral representations `f(s) = \int l(z) s^z dz`
//!   of payoffs along vertical complex lines.
//! * [`contour_quadrature`] -- numerical integration along vertical lines
//!   (single and double) and over time, with convergence certificates.
//! * [`levy_pricer`] / [`bns_pricer`] -- the pricing/hedging engines: marginal
//!   price, mean value process, pure hedge, feedback hedge, risk premium.
//! * [`mc_verifier`] -- Monte Carlo path simulation under the physical and
//!   tilted measures, with brute-force oracles for every engine output.
//! * [`app`] -- configuration, command dispatch and result emission backing
//!   the thin `muhedge` command line binary.
//!
//! See the `examples/` directory for runnable end-to-end programs, including
//! a reproduction of the BNS numerical study shipped as `bns_paper.cfg`.

pub mod bns_models;
pub mod contour_quadrature;
pub mod levy_models;
pub mod levy_pricer;
pub mod numerics;
pub mod payoff_transforms;

pub use bns_models::{BnsParams, ExpAffineCurve, IntegrabilityReport};
pub use contour_quadrature::{Certificate, QuadratureSpec, Scheme};
pub use payoff_transforms::PayoffTransform;
pub use levy_models::{ExpLevyModel, InvestmentSolution, JumpFamily, RiskAversion};
pub use levy_pricer::{LevyHedgeEngine, PathHedgeResult};

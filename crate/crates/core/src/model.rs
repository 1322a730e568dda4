//! Static per-period economics of the quasi-linear economy.
//!
//! Households have utility `c + H(1 - n)` with
//! `H(l) = c1 * l^(1 - sigma) / (1 - sigma)`, so the marginal utility of
//! consumption is one and the government can be viewed as choosing tax
//! revenue directly. Every allocation here lives on the high-labor side of the
//! Laffer curve, `[n_peak, n_sat]`, where revenue is decreasing in labor.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Preference and technology primitives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preferences {
    /// Leisure weight `C1`.
    pub c1: f64,
    /// Leisure curvature.
    pub sigma: f64,
    /// Discount factor.
    pub beta: f64,
    /// Productivity while in financial autarky.
    pub kappa: f64,
}

impl Default for Preferences {
    fn default() -> Self {
        Self {
            c1: 0.15,
            sigma: 2.0,
            beta: 0.97,
            kappa: 0.998,
        }
    }
}

impl Preferences {
    pub fn validate(&self) -> Result<()> {
        let Preferences {
            c1,
            sigma,
            beta,
            kappa,
        } = *self;
        if !(c1 > 0.0 && c1 < 1.0) {
            return Err(invalid(
                "c1",
                format!("{c1} not in (0, 1); H'(1) = c1 must be below one"),
            ));
        }
        if !(sigma > 0.0) || (sigma - 1.0).abs() < 1e-12 {
            return Err(invalid(
                "sigma",
                format!("{sigma} must be positive and different from 1"),
            ));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid("beta", format!("{beta} not in (0, 1)")));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(invalid("kappa", format!("{kappa} not in (0, 1]")));
        }
        if c1 >= kappa {
            return Err(invalid(
                "kappa",
                "autarky productivity must exceed c1 for a positive satiation labor",
            ));
        }
        // Shape conditions on (0, 1): H' > 0, H'' < 0, 2 H'' < H''' (1 - l).
        for i in 1..1000 {
            let l = i as f64 / 1000.0;
            let (h1, h2, h3) = (self.h_prime(l), self.h_second(l), self.h_third(l));
            if !(h1 > 0.0 && h2 < 0.0 && 2.0 * h2 < h3 * (1.0 - l)) {
                return Err(invalid(
                    "sigma",
                    format!("leisure utility shape condition fails at l = {l}"),
                ));
            }
        }
        Ok(())
    }

    /// Leisure utility `H(l)`.
    #[inline]
    pub fn h(&self, l: f64) -> f64 {
        self.c1 * pow(l, 1.0 - self.sigma) / (1.0 - self.sigma)
    }

    #[inline]
    pub fn h_prime(&self, l: f64) -> f64 {
        self.c1 * pow(l, -self.sigma)
    }

    #[inline]
    pub fn h_second(&self, l: f64) -> f64 {
        -self.sigma * self.c1 * pow(l, -self.sigma - 1.0)
    }

    #[inline]
    pub fn h_third(&self, l: f64) -> f64 {
        self.sigma * (self.sigma + 1.0) * self.c1 * pow(l, -self.sigma - 2.0)
    }
}

/// `x^e`, with integer exponents taken through `powi`.
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Labor, tax and revenue of one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaborAllocation {
    pub n: f64,
    pub tax: f64,
    pub revenue: f64,
    pub leisure_value: f64,
}

/// Laffer-curve landmarks for one productivity level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LafferBranch {
    pub kappa: f64,
    /// Revenue-maximizing labor.
    pub n_peak: f64,
    /// Zero-tax labor, where `H'(1 - n) = kappa`.
    pub n_sat: f64,
    /// Peak revenue.
    pub r_max: f64,
}

/// The per-period model with Laffer landmarks cached for the two productivity
/// levels that occur (access and autarky).
#[derive(Debug, Clone)]
pub struct FiscalModel {
    prefs: Preferences,
    access: LafferBranch,
    autarky: LafferBranch,
}

/// Revenue tolerance when comparing against the Laffer peak.
const PEAK_SLACK: f64 = 1e-13;

impl FiscalModel {
    pub fn new(prefs: Preferences) -> Result<Self> {
        prefs.validate()?;
        let access = compute_branch(&prefs, 1.0);
        let autarky = compute_branch(&prefs, prefs.kappa);
        Ok(Self {
            prefs,
            access,
            autarky,
        })
    }

    pub fn preferences(&self) -> &Preferences {
        &self.prefs
    }

    pub fn beta(&self) -> f64 {
        self.prefs.beta
    }

    /// Productivity `kappa_phi` for access flag `phi`.
    pub fn kappa_for(&self, access: bool) -> f64 {
        if access {
            1.0
        } else {
            self.prefs.kappa
        }
    }

    pub fn branch(&self, kappa_phi: f64) -> LafferBranch {
        if kappa_phi == self.access.kappa {
            self.access
        } else if kappa_phi == self.autarky.kappa {
            self.autarky
        } else {
            compute_branch(&self.prefs, kappa_phi)
        }
    }

    pub fn access_branch(&self) -> &LafferBranch {
        &self.access
    }

    pub fn autarky_branch(&self) -> &LafferBranch {
        &self.autarky
    }

    /// Primary surplus `(kappa - H'(1 - n)) n - g`.
    pub fn surplus(&self, kappa_phi: f64, n: f64, g: f64) -> Result<f64> {
        check_labor(n)?;
        Ok(revenue_at(&self.prefs, kappa_phi, n) - g)
    }

    /// Tax revenue collected at labor `n`.
    pub fn revenue(&self, kappa_phi: f64, n: f64) -> Result<f64> {
        check_labor(n)?;
        Ok(revenue_at(&self.prefs, kappa_phi, n))
    }

    /// Revenue-maximizing labor. Spending is an additive shift of the surplus
    /// and plays no role.
    pub fn laffer_peak(&self, kappa_phi: f64, _g: f64) -> f64 {
        self.branch(kappa_phi).n_peak
    }

    pub fn max_revenue(&self, kappa_phi: f64) -> f64 {
        self.branch(kappa_phi).r_max
    }

    /// Labor needed to raise `revenue`, on the utility-maximizing side of the
    /// Laffer curve.
    pub fn labor_from_revenue(&self, kappa_phi: f64, revenue: f64) -> Result<f64> {
        let branch = self.branch(kappa_phi);
        invert_revenue(&self.prefs, &branch, revenue)
    }

    /// Flow payoff `W(R) = kappa n(R) + H(1 - n(R))`, before subtracting spending.
    pub fn period_payoff(&self, kappa_phi: f64, revenue: f64) -> Result<f64> {
        let n = self.labor_from_revenue(kappa_phi, revenue)?;
        Ok(kappa_phi * n + self.prefs.h(1.0 - n))
    }

    /// Linear labor tax `1 - H'(1 - n) / kappa`.
    pub fn tax_rate(&self, kappa_phi: f64, n: f64) -> f64 {
        1.0 - self.prefs.h_prime(1.0 - n) / kappa_phi
    }

    /// Full allocation at revenue `revenue` and productivity `kappa_phi`.
    pub fn allocation(&self, kappa_phi: f64, revenue: f64) -> Result<LaborAllocation> {
        let n = self.labor_from_revenue(kappa_phi, revenue)?;
        Ok(LaborAllocation {
            n,
            tax: self.tax_rate(kappa_phi, n),
            revenue,
            leisure_value: self.prefs.h(1.0 - n),
        })
    }

    /// Balanced-budget allocation under financial autarky.
    pub fn autarky_allocation(&self, g: f64) -> Result<LaborAllocation> {
        self.allocation(self.prefs.kappa, g)
    }

    /// Autarkic flow payoff `W_kappa(g) - g`.
    pub fn autarky_flow(&self, g: f64) -> Result<f64> {
        Ok(self.period_payoff(self.prefs.kappa, g)? - g)
    }

    /// Marginal utility of consumption in autarky; one under quasi-linearity.
    pub fn autarky_marginal_utility(&self, _g: f64) -> f64 {
        1.0
    }

    /// Multiplier on the implementability constraint when markets are open.
    pub fn multiplier(&self, n: f64) -> Result<f64> {
        self.multiplier_at(1.0, n)
    }

    /// Multiplier on the period budget at productivity `kappa_phi`:
    /// `-(kappa - H') / (kappa - H' + H'' n)`, evaluated at `1 - n`.
    pub fn multiplier_at(&self, kappa_phi: f64, n: f64) -> Result<f64> {
        check_labor(n)?;
        let branch = self.branch(kappa_phi);
        let l = 1.0 - n;
        let margin = kappa_phi - self.prefs.h_prime(l);
        let slope = margin + self.prefs.h_second(l) * n;
        if n <= branch.n_peak || slope >= 0.0 {
            return Err(Error::MultiplierSingular { n });
        }
        // Zero tax at and beyond satiation.
        Ok((-margin / slope).max(0.0))
    }

    /// Slope of revenue in labor, `kappa - H'(1 - n) + H''(1 - n) n`.
    pub fn revenue_slope(&self, kappa_phi: f64, n: f64) -> f64 {
        revenue_slope(&self.prefs, kappa_phi, n)
    }
}

fn check_labor(n: f64) -> Result<()> {
    if !(0.0..1.0).contains(&n) {
        return Err(Error::LaborOutOfRange { n });
    }
    Ok(())
}

#[inline]
fn revenue_at(p: &Preferences, kappa: f64, n: f64) -> f64 {
    (kappa - p.h_prime(1.0 - n)) * n
}

#[inline]
fn revenue_slope(p: &Preferences, kappa: f64, n: f64) -> f64 {
    let l = 1.0 - n;
    kappa - p.h_prime(l) + p.h_second(l) * n
}

fn compute_branch(p: &Preferences, kappa: f64) -> LafferBranch {
    let n_sat = 1.0 - (p.c1 / kappa).powf(1.0 / p.sigma);
    // The revenue slope is positive at n = 0, negative at n_sat and
    // decreasing in between.
    let (mut lo, mut hi) = (0.0_f64, n_sat);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if revenue_slope(p, kappa, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let n_peak = 0.5 * (lo + hi);
    LafferBranch {
        kappa,
        n_peak,
        n_sat,
        r_max: revenue_at(p, kappa, n_peak),
    }
}

/// Solves `(kappa - H'(1 - n)) n = revenue` on `[n_peak, n_sat]`.
///
/// Revenue is concave and decreasing on the branch, so Newton steps from the
/// satiation end move monotonically towards the root; bisection takes over
/// whenever a step leaves the bracket.
pub(crate) fn invert_revenue(p: &Preferences, b: &LafferBranch, revenue: f64) -> Result<f64> {
    invert_revenue_from(p, b, revenue, b.n_sat)
}

/// As [`invert_revenue`], starting Newton at `start`. Any start inside the
/// branch works; one close to the root saves iterations.
pub(crate) fn invert_revenue_from(
    p: &Preferences,
    b: &LafferBranch,
    revenue: f64,
    start: f64,
) -> Result<f64> {
    if revenue < 0.0 {
        return Err(Error::NegativeRevenue(revenue));
    }
    if revenue == 0.0 {
        return Ok(b.n_sat);
    }
    if revenue > b.r_max * (1.0 + PEAK_SLACK) {
        return Err(Error::InfeasibleRevenue {
            revenue,
            max: b.r_max,
            kappa: b.kappa,
        });
    }
    if revenue >= b.r_max {
        return Ok(b.n_peak);
    }
    let (mut lo, mut hi) = (b.n_peak, b.n_sat);
    let mut n = start.clamp(lo, hi);
    for _ in 0..200 {
        let f = revenue_at(p, b.kappa, n) - revenue;
        if f > 0.0 {
            lo = n;
        } else {
            hi = n;
        }
        let step = f / revenue_slope(p, b.kappa, n);
        if step.abs() <= 1e-14 {
            return Ok(n - step);
        }
        let mut next = n - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if hi - lo <= 1e-15 {
            return Ok(next);
        }
        n = next;
    }
    Ok(n)
}

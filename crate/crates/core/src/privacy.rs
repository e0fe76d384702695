//! Privacy budgets, conversions between them, composition bookkeeping and
//! the Laplace mechanism.

use std::io::Write;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Slack allowed when a spend would exceed the remaining budget only
/// through rounding.
pub const SPEND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PrivacyBudget {
    Pure { eps: f64 },
    Zcdp { rho: f64 },
    Approx { eps: f64, delta: f64 },
}

impl PrivacyBudget {
    pub fn pure(eps: f64) -> Result<Self> {
        check_nonnegative("eps", eps)?;
        Ok(PrivacyBudget::Pure { eps })
    }

    pub fn zcdp(rho: f64) -> Result<Self> {
        check_nonnegative("rho", rho)?;
        Ok(PrivacyBudget::Zcdp { rho })
    }

    pub fn approx(eps: f64, delta: f64) -> Result<Self> {
        check_nonnegative("eps", eps)?;
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(PrivacyBudget::Approx { eps, delta })
    }

    /// The zCDP parameter implied by this budget, if there is one.
    pub fn as_zcdp(&self) -> Option<f64> {
        match *self {
            PrivacyBudget::Pure { eps } => Some(pure_to_zcdp(eps)),
            PrivacyBudget::Zcdp { rho } => Some(rho),
            PrivacyBudget::Approx { .. } => None,
        }
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be a nonnegative real, got {v}")))
    }
}

/// An ε-DP mechanism is ε²/2-zCDP.
pub fn pure_to_zcdp(eps: f64) -> f64 {
    eps * eps / 2.0
}

/// A ρ-zCDP mechanism is (ρ + 2√(ρ ln(1/δ)), δ)-DP.
pub fn zcdp_to_approx(rho: f64, delta: f64) -> Result<f64> {
    check_nonnegative("rho", rho)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// Noise scale used by private Frank-Wolfe for each vertex score.
pub fn frank_wolfe_noise_scale(l1: f64, c_norm: f64, iterations: usize, n: f64, rho: f64) -> f64 {
    l1 * c_norm * (iterations as f64).sqrt() / (n * rho.sqrt())
}

/// Mean-zero Laplace draw by inversion of one uniform on (0, 1).
/// A zero scale returns exactly zero without touching `rng`.
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One ledger line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub label: String,
    pub rho: f64,
}

/// zCDP composition ledger with a fixed total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accountant {
    total: f64,
    ledger: Vec<Charge>,
    // compensated running sum
    spent: f64,
    #[serde(skip)]
    compensation: f64,
}

impl Accountant {
    pub fn new(total: f64) -> Result<Self> {
        check_nonnegative("rho", total)?;
        Ok(Accountant { total, ledger: Vec::new(), spent: 0.0, compensation: 0.0 })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn spent(&self) -> f64 {
        self.spent + self.compensation
    }

    pub fn remaining(&self) -> f64 {
        (self.total - self.spent()).max(0.0)
    }

    pub fn ledger(&self) -> &[Charge] {
        &self.ledger
    }

    /// Whether `rho` can still be spent.
    pub fn can_spend(&self, rho: f64) -> bool {
        rho <= self.total - self.spent() + SPEND_TOLERANCE
    }

    /// Records a charge, refusing it if the total would be exceeded.
    pub fn spend(&mut self, label: impl Into<String>, rho: f64) -> Result<()> {
        check_nonnegative("rho", rho)?;
        if !self.can_spend(rho) {
            return Err(Error::BudgetExceeded { requested: rho, remaining: self.remaining() });
        }
        // Neumaier summation
        let t = self.spent + rho;
        if self.spent.abs() >= rho.abs() {
            self.compensation += (self.spent - t) + rho;
        } else {
            self.compensation += (rho - t) + self.spent;
        }
        self.spent = t;
        self.ledger.push(Charge { label: label.into(), rho });
        Ok(())
    }

    /// Checks that all of `charges` fit before recording any of them.
    pub fn spend_all(&mut self, charges: &[(String, f64)]) -> Result<()> {
        let mut probe = self.clone();
        for (label, rho) in charges {
            probe.spend(label.clone(), *rho)?;
        }
        *self = probe;
        Ok(())
    }

    /// `label,rho` lines with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["label", "rho"])?;
        for charge in &self.ledger {
            writer.write_record([charge.label.as_str(), &charge.rho.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }
}

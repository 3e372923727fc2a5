//! RBF kernel, the perturbation-radius mapping and the reduced adversarial
//! hinge loss.
//!
//! For a radial kernel `k(x, x') = f(|x - x'|)` with `f` decreasing, an
//! input-space perturbation of radius `epsilon` moves the feature map by at
//! most `sqrt(2 f(0) - 2 f(epsilon))` in the RKHS. Maximising the hinge loss
//! over that kernel-space ball has the closed form
//! `max(0, 1 - y f(x) + eps' |f| - y b)`, which is what training minimises.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    /// Label of a decision score; a score of exactly zero maps to `Pos`.
    #[inline]
    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    /// Parses `+1` / `-1` (any numeric spelling of those two values).
    pub fn from_signed(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Label::Pos)
        } else if v == -1.0 {
            Ok(Label::Neg)
        } else {
            Err(Error::input(alloc::format!("label {v} is not +1 or -1")))
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `exp(-gamma |x - x'|^2)`
    Rbf,
}

/// A stationary radial kernel with `f(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::Rbf,
            gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::input(alloc::format!(
                "kernel gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Radial profile `f(c)` with `k(x, x') = f(|x - x'|)`.
    #[inline]
    pub fn profile(&self, c: f64) -> f64 {
        match self.family {
            KernelFamily::Rbf => libm::exp(-self.gamma * c * c),
        }
    }

    /// Kernel value from a squared distance.
    #[inline]
    pub fn from_sq_dist(&self, sq: f64) -> f64 {
        match self.family {
            KernelFamily::Rbf => libm::exp(-self.gamma * sq),
        }
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        self.from_sq_dist(linalg::sq_dist(x, x2))
    }

    /// Upper bound on `k(x, x')`; 1 for RBF.
    pub fn bound(&self) -> f64 {
        self.profile(0.0)
    }
}

/// Exact kernel evaluation.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    check_dim(x.len(), x2.len())?;
    Ok(spec.eval_unchecked(x, x2))
}

/// Kernel-space radius `sqrt(2 f(0) - 2 f(epsilon))` covering every
/// input-space perturbation of norm at most `epsilon`.
pub fn epsilon_prime(spec: &KernelSpec, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::input(alloc::format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    // 1 - exp(-a) loses everything for tiny a; expm1 keeps it.
    let v = match spec.family {
        KernelFamily::Rbf => -2.0 * libm::expm1(-spec.gamma * epsilon * epsilon),
    };
    Ok(libm::sqrt(v.max(0.0)))
}

/// An input-space perturbation radius together with its kernel-space image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialBudget {
    epsilon: f64,
    epsilon_prime: f64,
}

impl AdversarialBudget {
    pub fn new(spec: &KernelSpec, epsilon: f64) -> Result<Self> {
        Ok(AdversarialBudget {
            epsilon,
            epsilon_prime: epsilon_prime(spec, epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn epsilon_prime(&self) -> f64 {
        self.epsilon_prime
    }

    /// Recompute the kernel-space radius for a new kernel.
    pub fn rebind(&mut self, spec: &KernelSpec) -> Result<()> {
        self.epsilon_prime = epsilon_prime(spec, self.epsilon)?;
        Ok(())
    }

    pub fn set_epsilon(&mut self, spec: &KernelSpec, epsilon: f64) -> Result<()> {
        self.epsilon_prime = epsilon_prime(spec, epsilon)?;
        self.epsilon = epsilon;
        Ok(())
    }
}

/// Plain hinge `max(0, 1 - margin)`.
#[inline]
pub fn hinge(margin: f64) -> f64 {
    (1.0 - margin).max(0.0)
}

/// Worst-case hinge over the kernel-space ball of radius `eps_prime`:
/// `max(0, 1 - y f(x) + eps_prime |f| - y b)`.
#[inline]
pub fn regularized_hinge(f_x: f64, norm_f: f64, y: Label, eps_prime: f64, b: f64) -> f64 {
    let ys = y.sign();
    (1.0 - ys * f_x + eps_prime * norm_f - ys * b).max(0.0)
}

/// The maximiser `-y eps' w / |w|` of the hinge over the kernel-space ball.
pub fn worst_case_perturbation(w: &[f64], y: Label, eps_prime: f64) -> Result<Vec<f64>> {
    let n = linalg::norm(w);
    if !(n > 0.0) {
        return Err(Error::Degenerate(
            "worst-case perturbation is undefined for a zero weight vector".into(),
        ));
    }
    let scale = -y.sign() * eps_prime / n;
    Ok(w.iter().map(|wi| scale * wi).collect())
}

//! Evasion attacks against a trained scorer.
//!
//! FGSM, PGD and C&W use the analytic input gradient. ZOO sees only scores.
//! The batched entry points run every sample in lockstep so each step costs
//! one pass over the model's feature blocks; per sample they perform the same
//! arithmetic as the single-sample functions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::kernel::Label;
use crate::linalg::{norm, sq_dist};
use crate::predictor::{GradientScorer, Scorer};
use crate::rng::{CounterRng, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackFamily {
    Fgsm,
    Pgd,
    #[serde(rename = "cw")]
    CwL2,
    Zoo,
}

impl AttackFamily {
    pub const ALL: [AttackFamily; 4] = [
        AttackFamily::Fgsm,
        AttackFamily::Pgd,
        AttackFamily::CwL2,
        AttackFamily::Zoo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackFamily::Fgsm => "fgsm",
            AttackFamily::Pgd => "pgd",
            AttackFamily::CwL2 => "cw",
            AttackFamily::Zoo => "zoo",
        }
    }

    /// Column heading used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            AttackFamily::Fgsm => "FGSM",
            AttackFamily::Pgd => "PGD",
            AttackFamily::CwL2 => "C&W",
            AttackFamily::Zoo => "ZOO",
        }
    }
}

impl fmt::Display for AttackFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fgsm" => Ok(AttackFamily::Fgsm),
            "pgd" => Ok(AttackFamily::Pgd),
            "cw" | "cw-l2" | "cwl2" | "c&w" => Ok(AttackFamily::CwL2),
            "zoo" => Ok(AttackFamily::Zoo),
            other => Err(Error::input(format!(
                "unknown attack '{other}' (expected fgsm, pgd, cw or zoo)"
            ))),
        }
    }
}

/// Attack hyper-parameters. The defaults match the usual 8/255 image budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// L-infinity radius for FGSM and PGD.
    pub epsilon: f64,
    pub pgd_steps: usize,
    /// PGD step; `None` means `epsilon / 4`.
    pub pgd_step_size: Option<f64>,
    pub cw_c: f64,
    pub cw_iters: usize,
    pub cw_lr: f64,
    pub zoo_eta: f64,
    pub zoo_beta1: f64,
    pub zoo_beta2: f64,
    pub zoo_adam_eps: f64,
    /// Finite-difference half-width.
    pub zoo_h: f64,
    pub zoo_c: f64,
    pub zoo_iters: usize,
    pub clip_min: f64,
    pub clip_max: f64,
    /// Seeds the ZOO coordinate draws.
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 8.0 / 255.0,
            pgd_steps: 10,
            pgd_step_size: None,
            cw_c: 10.0,
            cw_iters: 100,
            cw_lr: 0.01,
            zoo_eta: 0.01,
            zoo_beta1: 0.9,
            zoo_beta2: 0.999,
            zoo_adam_eps: 1e-8,
            zoo_h: 1e-4,
            zoo_c: 10.0,
            zoo_iters: 1000,
            clip_min: 0.0,
            clip_max: 1.0,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn pgd_step(&self) -> f64 {
        self.pgd_step_size.unwrap_or(self.epsilon / 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("epsilon", self.epsilon),
            ("pgd step", self.pgd_step()),
            ("cw_c", self.cw_c),
            ("cw_lr", self.cw_lr),
            ("zoo_eta", self.zoo_eta),
            ("zoo_c", self.zoo_c),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::input(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.zoo_h > 0.0) || !self.zoo_h.is_finite() {
            return Err(Error::input(format!("zoo_h must be positive, got {}", self.zoo_h)));
        }
        if !(0.0..1.0).contains(&self.zoo_beta1) || !(0.0..1.0).contains(&self.zoo_beta2) {
            return Err(Error::input("ADAM betas must lie in [0, 1)"));
        }
        if !(self.zoo_adam_eps > 0.0) {
            return Err(Error::input("zoo_adam_eps must be positive"));
        }
        if !(self.clip_min <= self.clip_max) {
            return Err(Error::input(format!(
                "clip range [{}, {}] is empty",
                self.clip_min, self.clip_max
            )));
        }
        Ok(())
    }

    #[inline]
    fn clip(&self, v: f64) -> f64 {
        v.max(self.clip_min).min(self.clip_max)
    }
}

/// `1 - y f(x)`: positive while the sample sits inside the margin.
pub fn margin_loss(score: f64, y: Label) -> f64 {
    1.0 - y.sign() * score
}

/// Sign with `sign(0) = 0`.
#[inline]
fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_batch(dim: usize, xs: &[&[f64]], ys: &[Label]) -> Result<()> {
    check_dim(xs.len(), ys.len())?;
    for x in xs {
        check_dim(dim, x.len())?;
    }
    Ok(())
}

fn single(out: Result<Vec<Vec<f64>>>) -> Result<Vec<f64>> {
    out.map(|mut v| v.pop().unwrap_or_default())
}

/// One L-infinity step of size `epsilon` along the sign of the loss gradient.
pub fn fgsm<M: GradientScorer + ?Sized>(model: &M, x: &[f64], y: Label, cfg: &AttackConfig) -> Result<Vec<f64>> {
    single(fgsm_batch(model, &[x], &[y], cfg))
}

pub fn fgsm_batch<M: GradientScorer + ?Sized>(
    model: &M,
    xs: &[&[f64]],
    ys: &[Label],
    cfg: &AttackConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_batch(model.dim(), xs, ys)?;
    let grads = model.grad_batch(xs)?;
    Ok(xs
        .iter()
        .zip(ys)
        .zip(&grads)
        .map(|((x, y), g)| {
            let ys = y.sign();
            x.iter()
                .zip(g)
                .map(|(xi, gi)| cfg.clip(xi + cfg.epsilon * sign0(-ys * gi)))
                .collect()
        })
        .collect())
}

/// Iterated sign steps projected onto the L-infinity ball and the box.
pub fn pgd<M: GradientScorer + ?Sized>(model: &M, x: &[f64], y: Label, cfg: &AttackConfig) -> Result<Vec<f64>> {
    single(pgd_batch(model, &[x], &[y], cfg))
}

pub fn pgd_batch<M: GradientScorer + ?Sized>(
    model: &M,
    xs: &[&[f64]],
    ys: &[Label],
    cfg: &AttackConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_batch(model.dim(), xs, ys)?;
    let step = cfg.pgd_step();
    // Per-coordinate feasible interval: ball intersected with box.
    let bounds: Vec<Vec<(f64, f64)>> = xs
        .iter()
        .map(|x| {
            x.iter()
                .map(|&v| ((v - cfg.epsilon).max(cfg.clip_min), (v + cfg.epsilon).min(cfg.clip_max)))
                .collect()
        })
        .collect();
    let mut cur: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
    for _ in 0..cfg.pgd_steps {
        let refs: Vec<&[f64]> = cur.iter().map(|v| v.as_slice()).collect();
        let grads = model.grad_batch(&refs)?;
        for ((c, g), (y, bd)) in cur.iter_mut().zip(&grads).zip(ys.iter().zip(&bounds)) {
            let ys = y.sign();
            for ((ci, gi), &(lo, hi)) in c.iter_mut().zip(g).zip(bd) {
                *ci = (*ci + step * sign0(-ys * gi)).max(lo).min(hi);
            }
        }
    }
    Ok(cur)
}

/// Minimum-L2 attack: gradient descent on
/// `|delta|^2 + c max(0, y f(x + delta))` with box clipping. Returns the
/// smallest misclassifying iterate, or the last iterate if none succeeds.
pub fn cw_l2<M: GradientScorer + ?Sized>(model: &M, x: &[f64], y: Label, cfg: &AttackConfig) -> Result<Vec<f64>> {
    single(cw_l2_batch(model, &[x], &[y], cfg))
}

struct Best {
    point: Option<Vec<f64>>,
    dist: f64,
}

impl Best {
    fn new() -> Self {
        Best { point: None, dist: f64::INFINITY }
    }

    fn offer(&mut self, x0: &[f64], x: &[f64], score: f64, y: Label) {
        if Label::from_score(score) != y {
            let d = sq_dist(x0, x);
            if d < self.dist {
                self.dist = d;
                self.point = Some(x.to_vec());
            }
        }
    }
}

pub fn cw_l2_batch<M: GradientScorer + ?Sized>(
    model: &M,
    xs: &[&[f64]],
    ys: &[Label],
    cfg: &AttackConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_batch(model.dim(), xs, ys)?;
    let n = xs.len();
    let mut cur: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
    let mut best: Vec<Best> = (0..n).map(|_| Best::new()).collect();
    // Samples already misclassified are returned unchanged.
    let mut live: Vec<usize> = Vec::with_capacity(n);
    let clean = model.score_batch(xs)?;
    for s in 0..n {
        if Label::from_score(clean[s]) != ys[s] {
            best[s].point = Some(xs[s].to_vec());
            best[s].dist = 0.0;
        } else {
            live.push(s);
        }
    }
    for it in 0..=cfg.cw_iters {
        if live.is_empty() {
            break;
        }
        let refs: Vec<&[f64]> = live.iter().map(|&s| cur[s].as_slice()).collect();
        let (scores, grads) = model.score_grad_batch(&refs)?;
        for (k, &s) in live.iter().enumerate() {
            best[s].offer(xs[s], &cur[s], scores[k], ys[s]);
        }
        if it == cfg.cw_iters {
            break;
        }
        for (k, &s) in live.iter().enumerate() {
            let ys_ = ys[s].sign();
            let hinge_on = ys_ * scores[k] > 0.0;
            let x0 = xs[s];
            for ((ci, &x0i), gi) in cur[s].iter_mut().zip(x0).zip(&grads[k]) {
                let delta = *ci - x0i;
                let mut g = 2.0 * delta;
                if hinge_on {
                    g += cfg.cw_c * ys_ * gi;
                }
                *ci = cfg.clip(x0i + (delta - cfg.cw_lr * g));
            }
        }
    }
    Ok(cur
        .into_iter()
        .zip(best)
        .map(|(c, b)| b.point.unwrap_or(c))
        .collect())
}

/// `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn central_difference<F>(f: F, x: &[f64], j: usize, h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if j >= x.len() {
        return Err(Error::input(format!("coordinate {j} out of range for dim {}", x.len())));
    }
    if !(h > 0.0) {
        return Err(Error::input("finite-difference width must be positive"));
    }
    let mut p = x.to_vec();
    p[j] = x[j] + h;
    let fp = f(&p)?;
    p[j] = x[j] - h;
    let fm = f(&p)?;
    Ok((fp - fm) / (2.0 * h))
}

fn zoo_loss(x0: &[f64], x: &[f64], score: f64, y: Label, c: f64) -> f64 {
    sq_dist(x0, x) + c * (y.sign() * score).max(0.0)
}

/// Score-only attack: coordinate-wise ADAM on
/// `|x' - x|^2 + c max(0, y f(x'))` with symmetric-difference estimates.
/// `index` selects the coordinate stream, so different samples draw
/// different coordinates.
pub fn zoo_adam<M: Scorer + ?Sized>(model: &M, x: &[f64], y: Label, index: u64, cfg: &AttackConfig) -> Result<Vec<f64>> {
    single(zoo_adam_batch(model, &[x], &[y], index, cfg))
}

/// Lockstep ZOO. Sample `s` uses coordinate stream `first_index + s`.
pub fn zoo_adam_batch<M: Scorer + ?Sized>(
    model: &M,
    xs: &[&[f64]],
    ys: &[Label],
    first_index: u64,
    cfg: &AttackConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_batch(model.dim(), xs, ys)?;
    let n = xs.len();
    let d = model.dim();
    let h = cfg.zoo_h;
    let mut cur: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
    let mut best: Vec<Best> = (0..n).map(|_| Best::new()).collect();
    let mut rngs: Vec<CounterRng> = (0..n)
        .map(|s| CounterRng::new(cfg.seed, Purpose::Attack, first_index + s as u64))
        .collect();
    let mut m = vec![vec![0.0; d]; n];
    let mut v = vec![vec![0.0; d]; n];
    let mut counts = vec![vec![0u32; d]; n];

    let clean = model.score_batch(xs)?;
    let mut live = Vec::with_capacity(n);
    for s in 0..n {
        if Label::from_score(clean[s]) != ys[s] {
            best[s].point = Some(xs[s].to_vec());
            best[s].dist = 0.0;
        } else {
            live.push(s);
        }
    }
    if live.is_empty() {
        return Ok(cur);
    }

    let mut probes: Vec<Vec<f64>> = Vec::with_capacity(2 * live.len());
    for _ in 0..cfg.zoo_iters {
        let coords: Vec<usize> = live.iter().map(|&s| rngs[s].below(d)).collect();
        probes.clear();
        for (k, &s) in live.iter().enumerate() {
            let j = coords[k];
            let mut p = cur[s].clone();
            p[j] = cur[s][j] + h;
            probes.push(p.clone());
            p[j] = cur[s][j] - h;
            probes.push(p);
        }
        let refs: Vec<&[f64]> = probes.iter().map(|p| p.as_slice()).collect();
        let ps = model.score_batch(&refs)?;
        for (k, &s) in live.iter().enumerate() {
            let j = coords[k];
            let lp = zoo_loss(xs[s], &probes[2 * k], ps[2 * k], ys[s], cfg.zoo_c);
            let lm = zoo_loss(xs[s], &probes[2 * k + 1], ps[2 * k + 1], ys[s], cfg.zoo_c);
            let g = (lp - lm) / (2.0 * h);
            counts[s][j] += 1;
            let tj = counts[s][j] as i32;
            m[s][j] = cfg.zoo_beta1 * m[s][j] + (1.0 - cfg.zoo_beta1) * g;
            v[s][j] = cfg.zoo_beta2 * v[s][j] + (1.0 - cfg.zoo_beta2) * g * g;
            let mhat = m[s][j] / (1.0 - libm::pow(cfg.zoo_beta1, tj as f64));
            let vhat = v[s][j] / (1.0 - libm::pow(cfg.zoo_beta2, tj as f64));
            let step = cfg.zoo_eta * mhat / (libm::sqrt(vhat) + cfg.zoo_adam_eps);
            cur[s][j] = cfg.clip(cur[s][j] - step);
        }
        let refs: Vec<&[f64]> = live.iter().map(|&s| cur[s].as_slice()).collect();
        let sc = model.score_batch(&refs)?;
        for (k, &s) in live.iter().enumerate() {
            best[s].offer(xs[s], &cur[s], sc[k], ys[s]);
        }
    }
    Ok(cur
        .into_iter()
        .zip(best)
        .map(|(c, b)| b.point.unwrap_or(c))
        .collect())
}

/// Runs one attack family over a batch. `first_index` only matters for ZOO.
pub fn run_attack<M: GradientScorer + ?Sized>(
    family: AttackFamily,
    model: &M,
    xs: &[&[f64]],
    ys: &[Label],
    first_index: u64,
    cfg: &AttackConfig,
) -> Result<Vec<Vec<f64>>> {
    match family {
        AttackFamily::Fgsm => fgsm_batch(model, xs, ys, cfg),
        AttackFamily::Pgd => pgd_batch(model, xs, ys, cfg),
        AttackFamily::CwL2 => cw_l2_batch(model, xs, ys, cfg),
        AttackFamily::Zoo => zoo_adam_batch(model, xs, ys, first_index, cfg),
    }
}

/// Per-sample attack result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub clean_score: f64,
    pub adv_score: f64,
    pub l2: f64,
    pub linf: f64,
    /// The adversarial label differs from the true label.
    pub success: bool,
}

pub fn outcome(x: &[f64], adv: &[f64], y: Label, clean_score: f64, adv_score: f64) -> AttackOutcome {
    let diff: Vec<f64> = x.iter().zip(adv).map(|(a, b)| b - a).collect();
    AttackOutcome {
        clean_score,
        adv_score,
        l2: norm(&diff),
        linf: diff.iter().fold(0.0, |m, v| m.max(v.abs())),
        success: Label::from_score(adv_score) != y,
    }
}

/// Fraction of samples whose adversarial label is still correct.
pub fn robust_accuracy(outcomes: &[AttackOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| !o.success).count() as f64 / outcomes.len() as f64
}

/// Label used in error messages and dumps.
pub fn describe(family: AttackFamily, cfg: &AttackConfig) -> String {
    match family {
        AttackFamily::Fgsm => format!("fgsm(eps={})", cfg.epsilon),
        AttackFamily::Pgd => format!("pgd(eps={}, steps={}, step={})", cfg.epsilon, cfg.pgd_steps, cfg.pgd_step()),
        AttackFamily::CwL2 => format!("cw(c={}, iters={}, lr={})", cfg.cw_c, cfg.cw_iters, cfg.cw_lr),
        AttackFamily::Zoo => format!("zoo(iters={}, eta={}, h={})", cfg.zoo_iters, cfg.zoo_eta, cfg.zoo_h),
    }
}

//! Scaled conjugate gradient (Møller, 1993) over the network's flat
//! parameter vector, with validation-based early stopping.

use serde::{Deserialize, Serialize};

use super::mlp::{Batch, MlpModel, Shape};
use crate::error::AnnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScgConfig {
    pub sigma0: f64,
    pub lambda0: f64,
    pub max_epochs: usize,
    /// Successful steps without validation improvement before stopping.
    pub early_stop_patience: usize,
    /// Stop once the gradient norm falls below this.
    pub min_grad: f64,
    pub seed: u64,
}

impl Default for ScgConfig {
    fn default() -> Self {
        ScgConfig {
            sigma0: 1e-4,
            lambda0: 1e-6,
            max_epochs: 1000,
            early_stop_patience: 6,
            min_grad: 1e-10,
            seed: 1,
        }
    }
}

impl ScgConfig {
    pub fn validate(&self) -> Result<(), AnnError> {
        let ok = self.sigma0 > 0.0
            && self.sigma0.is_finite()
            && self.lambda0 > 0.0
            && self.lambda0.is_finite()
            && self.min_grad >= 0.0;
        if !ok {
            return Err(AnnError::BadConfig(format!(
                "sigma0={} lambda0={} min_grad={}",
                self.sigma0, self.lambda0, self.min_grad
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
    /// Whether the step of this epoch was taken. Epoch 0 is the start point.
    pub accepted: bool,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    GradientVanished,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: usize,
    pub stop: StopReason,
}

impl TrainHistory {
    /// Training losses of the start point and every accepted step.
    pub fn accepted_losses(&self) -> Vec<f64> {
        self.epochs
            .iter()
            .filter(|e| e.accepted || e.epoch == 0)
            .map(|e| e.train_loss)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(w: &[f64], a: f64, p: &[f64]) -> Vec<f64> {
    w.iter().zip(p).map(|(w, p)| w + a * p).collect()
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Trains `model` in place from its current parameters.
///
/// `train` and `validation` hold raw (unscaled) inputs with class indices.
/// With validation data the returned weights are those with the lowest
/// validation loss seen; otherwise the final weights.
pub fn scg_train(
    model: &MlpModel,
    train: &[(Vec<f64>, usize)],
    validation: Option<&[(Vec<f64>, usize)]>,
    config: &ScgConfig,
) -> Result<(MlpModel, TrainHistory), AnnError> {
    config.validate()?;
    let tb = model.batch(train.iter().map(|(x, c)| (x.as_slice(), *c)))?;
    let vb = match validation {
        Some(v) if !v.is_empty() => Some(model.batch(v.iter().map(|(x, c)| (x.as_slice(), *c)))?),
        _ => None,
    };
    let (params, history) = run(model.shape(), model.params().to_vec(), &tb, vb.as_ref(), config)?;
    let mut out = model.clone();
    out.set_params(params);
    Ok((out, history))
}

pub(crate) fn run(
    shape: Shape,
    mut w: Vec<f64>,
    train: &Batch,
    val: Option<&Batch>,
    cfg: &ScgConfig,
) -> Result<(Vec<f64>, TrainHistory), AnnError> {
    let n_params = w.len();
    let (mut e, mut g) = shape.loss_and_grad(&w, train);
    if !e.is_finite() || !finite(&g) {
        return Err(AnnError::NonFiniteLoss(0));
    }
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut lambda = cfg.lambda0;
    let mut lambda_bar = 0.0;
    let mut delta = 0.0;
    let mut success = true;
    let mut since_restart = 0usize;

    let val_loss = |w: &[f64]| val.map(|v| shape.loss(w, v));
    let mut best_val = val_loss(&w);
    let mut best_w = w.clone();
    let mut best_epoch = 0;
    let mut stale = 0usize;

    let mut epochs = vec![EpochRecord {
        epoch: 0,
        train_loss: e,
        val_loss: best_val,
        accepted: false,
        lambda,
    }];
    let mut stop = StopReason::MaxEpochs;

    if dot(&r, &r).sqrt() < cfg.min_grad {
        stop = StopReason::GradientVanished;
    }

    let mut epoch = 0;
    while stop == StopReason::MaxEpochs && epoch < cfg.max_epochs {
        epoch += 1;
        let mut p2 = dot(&p, &p);
        if success {
            if dot(&p, &r) <= 0.0 {
                p = r.clone();
                p2 = dot(&p, &p);
                since_restart = 0;
            }
            let sigma = cfg.sigma0 / p2.sqrt();
            let (_, g_plus) = shape.loss_and_grad(&axpy(&w, sigma, &p), train);
            if !finite(&g_plus) {
                return Err(AnnError::NonFiniteLoss(epoch));
            }
            delta = g_plus
                .iter()
                .zip(&g)
                .zip(&p)
                .map(|((gp, g), p)| (gp - g) / sigma * p)
                .sum();
        }
        let mu = dot(&p, &r);
        delta += (lambda - lambda_bar) * p2;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p2);
            delta = -delta + lambda * p2;
            lambda = lambda_bar;
        }
        let alpha = mu / delta;
        let w_new = axpy(&w, alpha, &p);
        let e_new = shape.loss(&w_new, train);
        if !e_new.is_finite() {
            return Err(AnnError::NonFiniteLoss(epoch));
        }
        let comparison = 2.0 * delta * (e - e_new) / (mu * mu);
        let accepted = comparison > 0.0 && e_new < e;
        if accepted {
            w = w_new;
            let (e2, g_new) = shape.loss_and_grad(&w, train);
            if !e2.is_finite() || !finite(&g_new) {
                return Err(AnnError::NonFiniteLoss(epoch));
            }
            e = e2;
            let r_new: Vec<f64> = g_new.iter().map(|v| -v).collect();
            lambda_bar = 0.0;
            success = true;
            since_restart += 1;
            if since_restart >= n_params {
                p = r_new.clone();
                since_restart = 0;
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                p = r_new.iter().zip(&p).map(|(r, p)| r + beta * p).collect();
            }
            r = r_new;
            g = g_new;
            if comparison >= 0.75 {
                lambda /= 4.0;
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if comparison < 0.25 || !accepted {
            let c = if comparison.is_finite() { comparison } else { 0.0 };
            lambda += delta * (1.0 - c) / p2;
        }

        let v = if accepted { val_loss(&w) } else { None };
        epochs.push(EpochRecord {
            epoch,
            train_loss: e,
            val_loss: v,
            accepted,
            lambda,
        });

        if accepted {
            match (v, best_val) {
                (Some(v), Some(b)) if v < b => {
                    best_val = Some(v);
                    best_w.clone_from(&w);
                    best_epoch = epoch;
                    stale = 0;
                }
                (Some(_), Some(_)) => {
                    stale += 1;
                    if stale >= cfg.early_stop_patience {
                        stop = StopReason::EarlyStop;
                    }
                }
                _ => {
                    best_w.clone_from(&w);
                    best_epoch = epoch;
                }
            }
            if dot(&r, &r).sqrt() < cfg.min_grad {
                stop = StopReason::GradientVanished;
            }
        }
        if !lambda.is_finite() || lambda > 1e100 {
            stop = StopReason::Stalled;
        }
    }

    Ok((
        best_w,
        TrainHistory {
            epochs,
            best_epoch,
            stop,
        },
    ))
}

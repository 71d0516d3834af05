//! Learning-rate policies driven by mutual-information signals.
//!
//! Two dynamic rules plus the comparison baselines. Policy 1 watches the
//! relative change of the last-layer MI with the labels:
//!
//! ```text
//! delta = |IHYLL[t-1] - IHYLL[t-2]| / IHYLL[t-1]
//! lr    = min(lr_max, lr + gamma1 * delta)   if delta >  epsilon
//!       = max(lr_min, lr - gamma2 * delta)   if delta <= epsilon
//! ```
//!
//! Policy 2 additionally compares the value against the IXY reference bound:
//!
//! ```text
//! d1 = 1 - IHYLL[t-1] / IXY
//! d2 = |IHYLL[t-1] - IHYLL[t-2]| / IHYLL[t-1]
//! lr = min(lr_max, lr + gamma1 * d1)   if d1 > 0 and d2 >  epsilon
//!    = max(lr_min, lr - gamma2 * d1)   if d1 > 0 and d2 <= epsilon
//!    = max(lr_min, lr + gamma3 * d1)   if d1 <= 0
//! ```
//!
//! Both start from `lr_min` and stay inside `[lr_min, lr_max]`. A violated
//! reference (d1 <= 0, possible because jittered estimation voids the data
//! processing inequality) always pulls the rate down.
//!
//! Step functions are pure; drivers ([`Scheduler`], [`layerwise_step`]) own
//! the history pushes and state updates between epochs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values entering ratio denominators are floored here so that negative
/// small-sample MI estimates cannot produce a negative or infinite signal.
pub const IHYLL_FLOOR: f64 = 1e-12;

/// Bounds and gains of the dynamic policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConstants {
    pub lr_min: f64,
    pub lr_max: f64,
    pub epsilon: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_GAMMA3: f64 = 0.1;

impl PolicyConstants {
    /// Bounds a decade around the desired rate; the usual starting point.
    pub fn bounds_around(desired_lr: f64) -> (f64, f64) {
        (desired_lr / 10.0, desired_lr * 10.0)
    }

    fn with_gammas(desired_lr: f64, gamma1: f64, gamma2: f64) -> Self {
        let (lr_min, lr_max) = Self::bounds_around(desired_lr);
        PolicyConstants {
            lr_min,
            lr_max,
            epsilon: DEFAULT_EPSILON,
            gamma1,
            gamma2,
            gamma3: DEFAULT_GAMMA3,
        }
    }

    /// Change-only policy gains used for MNIST.
    pub fn mnist_policy1(desired_lr: f64) -> Self {
        Self::with_gammas(desired_lr, 0.1, 1.0)
    }

    /// Change-plus-value policy gains used for MNIST.
    pub fn mnist_policy2(desired_lr: f64) -> Self {
        Self::with_gammas(desired_lr, 0.1, 0.1)
    }

    /// Change-only policy gains used for CIFAR-10.
    pub fn cifar10_policy1(desired_lr: f64) -> Self {
        Self::with_gammas(desired_lr, 0.003, 0.003)
    }

    /// Change-plus-value policy gains used for CIFAR-10.
    pub fn cifar10_policy2(desired_lr: f64) -> Self {
        Self::with_gammas(desired_lr, 0.001, 0.001)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min > 0.0 && self.lr_max.is_finite() && self.lr_min <= self.lr_max) {
            return Err(Error::Param(format!(
                "need 0 < lr_min <= lr_max, got [{}, {}]",
                self.lr_min, self.lr_max
            )));
        }
        if self.epsilon <= 0.0 || self.epsilon.is_nan() {
            return Err(Error::Param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        for (name, g) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
        ] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Param(format!("{name} must be >= 0, got {g}")));
            }
        }
        Ok(())
    }
}

/// Which policy case produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// MI still changing and below the reference: rate went up.
    IncreaseOnChange,
    /// MI saturated: rate went down.
    DecreaseOnSaturation,
    /// MI at or above the reference bound: rate pulled down.
    DecreaseOnViolation,
    /// The raw update fell below lr_min and was clamped there.
    ClampedMin,
    /// The raw update rose above lr_max and was clamped there.
    ClampedMax,
    /// No usable signal (history not yet full, or a degenerate denominator).
    WarmHold,
    /// A baseline schedule value; no MI signal involved.
    Scheduled,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::IncreaseOnChange => "increase-on-change",
            Branch::DecreaseOnSaturation => "decrease-on-saturation",
            Branch::DecreaseOnViolation => "decrease-on-violation",
            Branch::ClampedMin => "clamped-min",
            Branch::ClampedMax => "clamped-max",
            Branch::WarmHold => "warm-hold",
            Branch::Scheduled => "scheduled",
        }
    }

    pub fn parse(s: &str) -> Option<Branch> {
        Some(match s {
            "increase-on-change" => Branch::IncreaseOnChange,
            "decrease-on-saturation" => Branch::DecreaseOnSaturation,
            "decrease-on-violation" => Branch::DecreaseOnViolation,
            "clamped-min" => Branch::ClampedMin,
            "clamped-max" => Branch::ClampedMax,
            "warm-hold" => Branch::WarmHold,
            "scheduled" => Branch::Scheduled,
            _ => return None,
        })
    }
}

/// One epoch's learning-rate decision with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrDecision {
    pub lr_next: f64,
    pub branch: Branch,
    /// Policy 1 relative change.
    pub delta: Option<f64>,
    /// Policy 2 headroom to the reference.
    pub d1: Option<f64>,
    /// Policy 2 relative change.
    pub d2: Option<f64>,
}

impl LrDecision {
    fn hold(lr: f64) -> Self {
        LrDecision {
            lr_next: lr,
            branch: Branch::WarmHold,
            delta: None,
            d1: None,
            d2: None,
        }
    }

    fn scheduled(lr: f64) -> Self {
        LrDecision {
            lr_next: lr,
            branch: Branch::Scheduled,
            delta: None,
            d1: None,
            d2: None,
        }
    }
}

/// The last two observed IHYLL values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// IHYLL at t-2.
    pub prev: Option<f64>,
    /// IHYLL at t-1.
    pub last: Option<f64>,
}

impl History {
    pub fn push(&mut self, value: f64) {
        self.prev = self.last;
        self.last = Some(value);
    }

    pub fn is_full(&self) -> bool {
        self.prev.is_some() && self.last.is_some()
    }
}

/// Mutable per-run (or per-layer) scheduling state. Single-owner: the
/// training loop mutates it between epochs, never during one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub lr: f64,
    pub history: History,
    pub ixy: Option<f64>,
    pub epoch: usize,
    /// Remaining epochs of value-only tracking after a batch-size change.
    pub value_only_window: usize,
}

impl SchedulerState {
    pub fn new(lr: f64) -> Self {
        SchedulerState {
            lr,
            history: History::default(),
            ixy: None,
            epoch: 0,
            value_only_window: 0,
        }
    }
}

fn floored(v: f64) -> f64 {
    v.max(IHYLL_FLOOR)
}

/// Policy 1: relative change in IHYLL. Requires a full history; degenerate
/// denominators and a short history yield flagged warm-hold decisions.
pub fn policy1_step(state: &SchedulerState, c: &PolicyConstants) -> LrDecision {
    let (Some(raw_prev), Some(raw_last)) = (state.history.prev, state.history.last) else {
        return LrDecision::hold(c.lr_min);
    };
    if raw_last == 0.0 {
        return LrDecision::hold(state.lr);
    }
    let last = floored(raw_last);
    let prev = floored(raw_prev);
    let delta = (last - prev).abs() / last;
    let (lr_next, branch) = if delta > c.epsilon {
        let raw = state.lr + c.gamma1 * delta;
        if raw > c.lr_max {
            (c.lr_max, Branch::ClampedMax)
        } else {
            (raw, Branch::IncreaseOnChange)
        }
    } else {
        let raw = state.lr - c.gamma2 * delta;
        if raw < c.lr_min {
            (c.lr_min, Branch::ClampedMin)
        } else {
            (raw, Branch::DecreaseOnSaturation)
        }
    };
    LrDecision {
        lr_next,
        branch,
        delta: Some(delta),
        d1: None,
        d2: None,
    }
}

fn policy2_cases(lr: f64, d1: f64, d2: f64, c: &PolicyConstants, force_changing: bool) -> LrDecision {
    let (lr_next, branch) = if d1 > 0.0 {
        if force_changing || d2 > c.epsilon {
            let raw = lr + c.gamma1 * d1;
            if raw > c.lr_max {
                (c.lr_max, Branch::ClampedMax)
            } else {
                (raw, Branch::IncreaseOnChange)
            }
        } else {
            let raw = lr - c.gamma2 * d1;
            if raw < c.lr_min {
                (c.lr_min, Branch::ClampedMin)
            } else {
                (raw, Branch::DecreaseOnSaturation)
            }
        }
    } else {
        // Both appendix cases for d1 <= 0 apply the same reduction; d2 is
        // kept in the diagnostics so the two can still be told apart.
        let raw = lr + c.gamma3 * d1;
        if raw < c.lr_min {
            (c.lr_min, Branch::ClampedMin)
        } else {
            (raw, Branch::DecreaseOnViolation)
        }
    };
    LrDecision {
        lr_next,
        branch,
        delta: None,
        d1: Some(d1),
        d2: Some(d2),
    }
}

fn policy2_signals(state: &SchedulerState) -> Result<Option<(f64, f64)>> {
    let Some(ixy) = state.ixy else {
        return Err(Error::Contract(
            "policy 2 requires the IXY reference to be set".into(),
        ));
    };
    let (Some(raw_prev), Some(raw_last)) = (state.history.prev, state.history.last) else {
        return Ok(None);
    };
    if raw_last == 0.0 || ixy == 0.0 {
        return Ok(None);
    }
    let last = floored(raw_last);
    let prev = floored(raw_prev);
    let d1 = 1.0 - last / ixy;
    let d2 = (last - prev).abs() / last;
    Ok(Some((d1, d2)))
}

/// Policy 2: change and value of IHYLL relative to IXY.
pub fn policy2_step(state: &SchedulerState, c: &PolicyConstants) -> Result<LrDecision> {
    match policy2_signals(state)? {
        None if !state.history.is_full() => Ok(LrDecision::hold(c.lr_min)),
        None => Ok(LrDecision::hold(state.lr)),
        Some((d1, d2)) => Ok(policy2_cases(state.lr, d1, d2, c, false)),
    }
}

/// Post-batch-size-change step: policy 2 with the saturation test forced to
/// "still changing", so the rate regrows while headroom remains. Requires a
/// positive value-only window; the driver decrements it and hands control
/// back to [`policy2_step`] once it reaches zero.
pub fn bs_change_step(state: &SchedulerState, c: &PolicyConstants) -> Result<LrDecision> {
    if state.value_only_window == 0 {
        return Err(Error::Param(
            "bs_change_step called with an exhausted value-only window".into(),
        ));
    }
    match policy2_signals(state)? {
        None if !state.history.is_full() => Ok(LrDecision::hold(c.lr_min)),
        None => Ok(LrDecision::hold(state.lr)),
        Some((d1, d2)) => Ok(policy2_cases(state.lr, d1, d2, c, true)),
    }
}

/// Layer-wise dynamic rates: push each layer's IHY and apply policy 2 per
/// layer against the shared reference. States are advanced in place.
pub fn layerwise_step(
    states: &mut [SchedulerState],
    ihy_per_layer: &[f64],
    c: &PolicyConstants,
) -> Result<Vec<LrDecision>> {
    if states.len() != ihy_per_layer.len() {
        return Err(Error::Contract(format!(
            "{} scheduler states but {} layer MI values",
            states.len(),
            ihy_per_layer.len()
        )));
    }
    states
        .iter_mut()
        .zip(ihy_per_layer.iter())
        .map(|(state, &ihy)| {
            state.history.push(ihy);
            let decision = policy2_step(state, c)?;
            state.lr = decision.lr_next;
            state.epoch += 1;
            Ok(decision)
        })
        .collect()
}

/// Fixed baseline: the desired rate, every epoch.
pub fn baseline_fixed(lr0: f64) -> LrDecision {
    LrDecision::scheduled(lr0)
}

/// Linear warm-up from `lr0` at epoch 0 to `lr_target` at `warmup_epochs`,
/// then flat.
pub fn baseline_warmup(lr0: f64, lr_target: f64, warmup_epochs: usize, epoch: usize) -> LrDecision {
    let lr = if epoch >= warmup_epochs {
        lr_target
    } else {
        lr0 + (lr_target - lr0) * epoch as f64 / warmup_epochs as f64
    };
    LrDecision::scheduled(lr)
}

/// Exponential decay: lr0 * decay_rate^epoch.
pub fn baseline_decay(lr0: f64, decay_rate: f64, epoch: usize) -> LrDecision {
    LrDecision::scheduled(lr0 * decay_rate.powi(epoch as i32))
}

/// A network-wide policy choice with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    Fixed { lr0: f64 },
    Warmup { lr0: f64, lr_target: f64, warmup_epochs: usize },
    Decay { lr0: f64, decay_rate: f64 },
    /// Policy 1: relative change in IHYLL.
    DynamicChange,
    /// Policy 2: change and value relative to IXY.
    DynamicChangeValue,
}

impl Policy {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, Policy::DynamicChange | Policy::DynamicChangeValue)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Fixed { .. } => "fixed",
            Policy::Warmup { .. } => "warmup",
            Policy::Decay { .. } => "decay",
            Policy::DynamicChange => "dynamic-change",
            Policy::DynamicChangeValue => "dynamic-change-value",
        }
    }
}

/// Network-wide scheduling driver: owns the state, routes each epoch's
/// observation through the configured policy, and applies the decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheduler {
    pub policy: Policy,
    pub constants: PolicyConstants,
    pub state: SchedulerState,
}

impl Scheduler {
    pub fn new(policy: Policy, constants: PolicyConstants) -> Result<Self> {
        constants.validate()?;
        let lr0 = match policy {
            Policy::Fixed { lr0 } => lr0,
            Policy::Warmup { lr0, .. } => lr0,
            Policy::Decay { lr0, .. } => lr0,
            // dynamic policies begin from the minimum value
            Policy::DynamicChange | Policy::DynamicChangeValue => constants.lr_min,
        };
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return Err(Error::Param(format!("initial lr must be positive, got {lr0}")));
        }
        Ok(Scheduler {
            policy,
            constants,
            state: SchedulerState::new(lr0),
        })
    }

    /// The rate the first epoch trains at.
    pub fn initial_lr(&self) -> f64 {
        self.state.lr
    }

    pub fn set_ixy(&mut self, ixy: f64) {
        self.state.ixy = Some(ixy);
    }

    /// Begin a value-only tracking window (batch-size change response).
    pub fn engage_value_only_window(&mut self, epochs: usize) {
        self.state.value_only_window = epochs;
    }

    /// Record the epoch's IHYLL and produce the next epoch's rate.
    pub fn observe(&mut self, ihyll: f64) -> Result<LrDecision> {
        let decision = match self.policy {
            Policy::Fixed { lr0 } => baseline_fixed(lr0),
            Policy::Warmup { lr0, lr_target, warmup_epochs } => {
                baseline_warmup(lr0, lr_target, warmup_epochs, self.state.epoch + 1)
            }
            Policy::Decay { lr0, decay_rate } => {
                baseline_decay(lr0, decay_rate, self.state.epoch + 1)
            }
            Policy::DynamicChange => {
                self.state.history.push(ihyll);
                policy1_step(&self.state, &self.constants)
            }
            Policy::DynamicChangeValue => {
                self.state.history.push(ihyll);
                if self.state.value_only_window > 0 {
                    let d = bs_change_step(&self.state, &self.constants)?;
                    self.state.value_only_window -= 1;
                    d
                } else {
                    policy2_step(&self.state, &self.constants)?
                }
            }
        };
        self.state.lr = decision.lr_next;
        self.state.epoch += 1;
        Ok(decision)
    }
}

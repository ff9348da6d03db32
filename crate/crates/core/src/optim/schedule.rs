//! Learning-rate schedules.
//!
//! Each schedule is a [`LrSchedule`] trait object; [`ScheduleRegistry`] maps a
//! kind name to a constructor so schedules can be picked from a string such as
//! `cyclical:0.01,0.1,200` on the command line or in a config file.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub trait LrSchedule: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;

    fn lr_at(&self, t: u64) -> f64;

    /// Canonical `kind:p1,p2,...` form; parses back to the same schedule.
    fn describe(&self) -> String;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant {
    pub lr: f64,
}

impl LrSchedule for Constant {
    fn kind(&self) -> &'static str {
        "constant"
    }

    fn lr_at(&self, _t: u64) -> f64 {
        self.lr
    }

    fn describe(&self) -> String {
        format!("constant:{}", self.lr)
    }
}

/// `lr0 * decay^floor(t / period)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stepwise {
    pub lr0: f64,
    pub decay: f64,
    pub period: u64,
}

impl LrSchedule for Stepwise {
    fn kind(&self) -> &'static str {
        "stepwise"
    }

    fn lr_at(&self, t: u64) -> f64 {
        let steps = (t / self.period).min(i32::MAX as u64) as i32;
        self.lr0 * self.decay.powi(steps)
    }

    fn describe(&self) -> String {
        format!("stepwise:{},{},{}", self.lr0, self.decay, self.period)
    }
}

/// Triangular wave: up from `lr_min` to `lr_max` over `half_cycle` iterations,
/// back down over the next `half_cycle`, repeating.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cyclical {
    pub lr_min: f64,
    pub lr_max: f64,
    pub half_cycle: u64,
}

impl LrSchedule for Cyclical {
    fn kind(&self) -> &'static str {
        "cyclical"
    }

    fn lr_at(&self, t: u64) -> f64 {
        let h = self.half_cycle;
        let pos = t % (2 * h);
        let frac = if pos <= h {
            pos as f64 / h as f64
        } else {
            (2 * h - pos) as f64 / h as f64
        };
        self.lr_min + (self.lr_max - self.lr_min) * frac
    }

    fn describe(&self) -> String {
        format!("cyclical:{},{},{}", self.lr_min, self.lr_max, self.half_cycle)
    }
}

/// Ramp up, hold, ramp down, then stay at `lr_min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trapezoid {
    pub lr_min: f64,
    pub lr_max: f64,
    pub ramp_up: u64,
    pub plateau: u64,
    pub ramp_down: u64,
}

impl LrSchedule for Trapezoid {
    fn kind(&self) -> &'static str {
        "trapezoid"
    }

    fn lr_at(&self, t: u64) -> f64 {
        let span = self.lr_max - self.lr_min;
        let top = self.ramp_up;
        let fall = top + self.plateau;
        let end = fall + self.ramp_down;
        if t < top {
            self.lr_min + span * t as f64 / self.ramp_up as f64
        } else if t <= fall {
            self.lr_max
        } else if t < end {
            self.lr_max - span * (t - fall) as f64 / self.ramp_down as f64
        } else {
            self.lr_min
        }
    }

    fn describe(&self) -> String {
        format!(
            "trapezoid:{},{},{},{},{}",
            self.lr_min, self.lr_max, self.ramp_up, self.plateau, self.ramp_down
        )
    }
}

pub type ScheduleBuilder = fn(&[f64]) -> Result<Arc<dyn LrSchedule>>;

pub struct ScheduleRegistry {
    builders: BTreeMap<&'static str, ScheduleBuilder>,
}

impl Default for ScheduleRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn arity(kind: &str, params: &[f64], n: usize) -> Result<()> {
    if params.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{kind} schedule takes {n} parameters, got {}",
            params.len()
        )));
    }
    Ok(())
}

fn rate(kind: &str, v: f64, allow_zero: bool) -> Result<f64> {
    let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
    if !ok {
        return Err(Error::InvalidArgument(format!("{kind}: bad learning rate {v}")));
    }
    Ok(v)
}

fn period(kind: &str, v: f64) -> Result<u64> {
    if !(v >= 1.0 && v.fract() == 0.0 && v < 1e15) {
        return Err(Error::InvalidArgument(format!(
            "{kind}: period must be a positive integer, got {v}"
        )));
    }
    Ok(v as u64)
}

fn range(kind: &str, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let lo = rate(kind, lo, true)?;
    let hi = rate(kind, hi, false)?;
    if lo > hi {
        return Err(Error::InvalidArgument(format!("{kind}: lr_min {lo} > lr_max {hi}")));
    }
    Ok((lo, hi))
}

fn build_constant(p: &[f64]) -> Result<Arc<dyn LrSchedule>> {
    arity("constant", p, 1)?;
    Ok(Arc::new(Constant {
        lr: rate("constant", p[0], true)?,
    }))
}

fn build_stepwise(p: &[f64]) -> Result<Arc<dyn LrSchedule>> {
    arity("stepwise", p, 3)?;
    if !(p[1] > 0.0 && p[1] < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "stepwise: decay must be in (0, 1), got {}",
            p[1]
        )));
    }
    Ok(Arc::new(Stepwise {
        lr0: rate("stepwise", p[0], false)?,
        decay: p[1],
        period: period("stepwise", p[2])?,
    }))
}

fn build_cyclical(p: &[f64]) -> Result<Arc<dyn LrSchedule>> {
    arity("cyclical", p, 3)?;
    let (lr_min, lr_max) = range("cyclical", p[0], p[1])?;
    Ok(Arc::new(Cyclical {
        lr_min,
        lr_max,
        half_cycle: period("cyclical", p[2])?,
    }))
}

fn build_trapezoid(p: &[f64]) -> Result<Arc<dyn LrSchedule>> {
    arity("trapezoid", p, 5)?;
    let (lr_min, lr_max) = range("trapezoid", p[0], p[1])?;
    Ok(Arc::new(Trapezoid {
        lr_min,
        lr_max,
        ramp_up: period("trapezoid", p[2])?,
        plateau: period("trapezoid", p[3])?,
        ramp_down: period("trapezoid", p[4])?,
    }))
}

impl ScheduleRegistry {
    pub fn empty() -> Self {
        ScheduleRegistry {
            builders: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("constant", build_constant);
        r.register("stepwise", build_stepwise);
        r.register("cyclical", build_cyclical);
        r.register("trapezoid", build_trapezoid);
        r
    }

    pub fn register(&mut self, kind: &'static str, builder: ScheduleBuilder) {
        self.builders.insert(kind, builder);
    }

    pub fn kinds(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, kind: &str, params: &[f64]) -> Result<Arc<dyn LrSchedule>> {
        let builder = self.builders.get(kind).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown schedule '{kind}' (known: {})",
                self.kinds().collect::<Vec<_>>().join(", ")
            ))
        })?;
        builder(params)
    }

    /// Parse `kind:p1,p2,...`. A bare number is shorthand for a constant rate.
    pub fn parse(&self, text: &str) -> Result<Arc<dyn LrSchedule>> {
        let text = text.trim();
        if let Ok(v) = text.parse::<f64>() {
            return self.build("constant", &[v]);
        }
        let (kind, rest) = text.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("schedule '{text}' is not of the form kind:params"))
        })?;
        let params = rest
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad schedule parameter '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.build(kind.trim(), &params)
    }
}

//! Unconstrained maximization of smooth concave objectives.
//!
//! Limited-memory quasi-Newton ascent with a backtracking line search that
//! enforces sufficient increase. Plain gradient ascent with the same line
//! search and stopping rule is available for debugging.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lbfgs,
    GradientAscent,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lbfgs" => Ok(Method::Lbfgs),
            "gradient" | "gradient-ascent" => Ok(Method::GradientAscent),
            other => Err(Error::invalid(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptConfig<T> {
    pub method: Method,
    /// Stop once the gradient's infinity norm drops to this value.
    pub tolerance: T,
    pub max_iters: usize,
    /// Number of curvature pairs kept by the quasi-Newton update.
    pub memory: usize,
    /// Armijo constant of the sufficient-increase test.
    pub sufficient_increase: T,
    pub max_backtracks: usize,
}

impl<T: Scalar> Default for OptConfig<T> {
    fn default() -> Self {
        OptConfig {
            method: Method::Lbfgs,
            tolerance: T::of(1e-6),
            max_iters: 500,
            memory: 10,
            sufficient_increase: T::of(1e-4),
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptStatus {
    Converged,
    MaxIterations,
    /// No step along the search direction increased the objective.
    LineSearchFailed,
    /// The achievable increase fell below the objective's floating-point
    /// resolution before the gradient tolerance was met.
    Stalled,
}

impl OptStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OptStatus::Converged => "converged",
            OptStatus::MaxIterations => "max-iterations",
            OptStatus::LineSearchFailed => "line-search-failed",
            OptStatus::Stalled => "stalled",
        }
    }
}

impl std::str::FromStr for OptStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(OptStatus::Converged),
            "max-iterations" => Ok(OptStatus::MaxIterations),
            "line-search-failed" => Ok(OptStatus::LineSearchFailed),
            "stalled" => Ok(OptStatus::Stalled),
            other => Err(Error::format(format!("unknown status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient_norm: T,
    pub iterations: usize,
    pub status: OptStatus,
    /// Objective at every accepted iterate, starting point included.
    pub trace: Vec<T>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

struct Pair<T> {
    s: Vec<T>,
    y: Vec<T>,
    rho: T,
}

/// Two-loop recursion applied to `g`. `y` holds gradient decreases, so the
/// product approximates the inverse negative Hessian times `g`.
fn two_loop<T: Scalar>(g: &[T], pairs: &VecDeque<Pair<T>>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * *yi;
        }
        alphas.push(a);
    }
    if let Some(p) = pairs.back() {
        let gamma = dot(&p.s, &p.y) / dot(&p.y, &p.y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (p, a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += *si * (a - b);
        }
    }
    q
}

/// Maximizes `f`, which returns the objective and its gradient.
pub fn maximize<T, F>(x0: Vec<T>, mut f: F, config: &OptConfig<T>) -> Result<OptResult<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let mut x = x0;
    let (mut value, mut grad) = f(&x);
    if !value.is_finite() || !all_finite(&grad) {
        return Err(Error::Numeric("non-finite objective or gradient at start".into()));
    }
    let mut trace = vec![value];
    let mut pairs: VecDeque<Pair<T>> = VecDeque::new();
    let mut last_step = T::one();
    let mut status = OptStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iters {
        if inf_norm(&grad) <= config.tolerance {
            status = OptStatus::Converged;
            break;
        }
        let gnorm = dot(&grad, &grad).sqrt();
        let (mut direction, mut step) = match config.method {
            Method::Lbfgs if !pairs.is_empty() => (two_loop(&grad, &pairs), T::one()),
            Method::Lbfgs => (grad.clone(), T::one().min(T::one() / gnorm)),
            Method::GradientAscent => {
                let first = iterations == 0;
                let s = if first {
                    T::one().min(T::one() / gnorm)
                } else {
                    last_step * T::of(2.0)
                };
                (grad.clone(), s)
            }
        };
        let mut slope = dot(&grad, &direction);
        if !(slope > T::zero()) || !all_finite(&direction) {
            pairs.clear();
            direction = grad.clone();
            slope = dot(&grad, &grad);
            step = T::one().min(T::one() / gnorm);
        }

        // increases smaller than this are indistinguishable from rounding
        let resolution = T::of(4.0) * T::epsilon() * value.abs().max(T::one());
        let mut accepted = None;
        let mut stalled = false;
        let mut trial = vec![T::zero(); x.len()];
        for _ in 0..config.max_backtracks {
            if step * slope <= resolution {
                stalled = true;
                break;
            }
            for ((t, &xi), &di) in trial.iter_mut().zip(&x).zip(&direction) {
                *t = xi + step * di;
            }
            let (v, g) = f(&trial);
            if v.is_finite() && v >= value + config.sufficient_increase * step * slope {
                if !all_finite(&g) {
                    return Err(Error::Numeric("non-finite gradient".into()));
                }
                accepted = Some((v, g));
                break;
            }
            step *= T::of(0.5);
        }
        let Some((new_value, new_grad)) = accepted else {
            status = if stalled {
                OptStatus::Stalled
            } else {
                OptStatus::LineSearchFailed
            };
            break;
        };

        let s: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = grad.iter().zip(&new_grad).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if config.method == Method::Lbfgs && sy > T::epsilon() * dot(&y, &y) {
            if pairs.len() == config.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back(Pair {
                rho: T::one() / sy,
                s,
                y,
            });
        }
        std::mem::swap(&mut x, &mut trial);
        value = new_value;
        grad = new_grad;
        last_step = step;
        trace.push(value);
        iterations += 1;
    }
    if status == OptStatus::MaxIterations && inf_norm(&grad) <= config.tolerance {
        status = OptStatus::Converged;
    }
    Ok(OptResult {
        gradient_norm: inf_norm(&grad),
        x,
        value,
        iterations,
        status,
        trace,
    })
}

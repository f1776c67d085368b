//! Continuous problem data and the sufficient stability conditions that
//! define the feasible design set.
//!
//! The plant is `x_t = a x_ξξ + b x` on `ξ ∈ [0, 1]` with boundary feedback
//! `x_ξ(0) = k1 x(0)`, `x_ξ(1) = k2 x(1)`. A point is feasible when the three
//! Lyapunov-energy margins are strictly negative and the discretized closed
//! loop is Hurwitz.

use crate::error::{CcdError, Result};

/// Index of each decision variable inside a 4-vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    A = 0,
    B = 1,
    K1 = 2,
    K2 = 3,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::A, Var::B, Var::K1, Var::K2];

    pub fn name(self) -> &'static str {
        match self {
            Var::A => "a",
            Var::B => "b",
            Var::K1 => "k1",
            Var::K2 => "k2",
        }
    }
}

/// Decision variables `(a, b, k1, k2)` and which of them the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    pub a: f64,
    pub b: f64,
    pub k1: f64,
    pub k2: f64,
    pub free_mask: [bool; 4],
}

impl DesignPoint {
    /// All four variables free.
    pub fn new(a: f64, b: f64, k1: f64, k2: f64) -> Self {
        Self {
            a,
            b,
            k1,
            k2,
            free_mask: [true; 4],
        }
    }

    pub fn with_mask(mut self, free_mask: [bool; 4]) -> Self {
        self.free_mask = free_mask;
        self
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.b, self.k1, self.k2]
    }

    /// Rebuilds a point from a 4-vector, keeping this point's mask.
    pub fn from_array(&self, v: [f64; 4]) -> Self {
        Self {
            a: v[0],
            b: v[1],
            k1: v[2],
            k2: v[3],
            free_mask: self.free_mask,
        }
    }

    pub fn get(&self, var: Var) -> f64 {
        self.to_array()[var as usize]
    }

    pub fn is_free(&self, var: Var) -> bool {
        self.free_mask[var as usize]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(CcdError::NonFinite("design point"));
        }
        Ok(())
    }
}

/// Design objective `f_d(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DesignObjective {
    #[default]
    Zero,
    SquareOfA,
}

impl DesignObjective {
    pub fn value(self, p: &DesignPoint) -> f64 {
        match self {
            DesignObjective::Zero => 0.0,
            DesignObjective::SquareOfA => p.a * p.a,
        }
    }

    /// `[∂f_d/∂a, ∂f_d/∂b]`.
    pub fn gradient(self, p: &DesignPoint) -> [f64; 2] {
        match self {
            DesignObjective::Zero => [0.0, 0.0],
            DesignObjective::SquareOfA => [2.0 * p.a, 0.0],
        }
    }
}

/// Constant state/control weights and the design objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub q: f64,
    pub r: f64,
    pub fd: DesignObjective,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            q: 1.0,
            r: 1e4,
            fd: DesignObjective::Zero,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        if !self.q.is_finite() || !self.r.is_finite() {
            return Err(CcdError::NonFinite("weights"));
        }
        if self.q < 0.0 {
            return Err(CcdError::InvalidArgument(format!("q must be >= 0, got {}", self.q)));
        }
        if self.r <= 0.0 {
            return Err(CcdError::InvalidArgument(format!("r must be > 0, got {}", self.r)));
        }
        Ok(())
    }
}

/// Stability margins at one design point. Feasibility requires all three
/// margins `< 0` and, once the caller has checked it, a Hurwitz closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub kbar: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub theorem_ok: bool,
    pub hurwitz_ok: Option<bool>,
    pub in_d: bool,
}

impl FeasibilityReport {
    pub fn margins(&self) -> [f64; 3] {
        [self.m1, self.m2, self.m3]
    }

    /// Margins tested against `-delta` instead of zero.
    pub fn theorem_ok_with_buffer(&self, delta: f64) -> bool {
        self.margins().iter().all(|&m| m < -delta)
    }

    pub fn with_hurwitz(mut self, hurwitz_ok: bool) -> Self {
        self.hurwitz_ok = Some(hurwitz_ok);
        self.in_d = self.theorem_ok && hurwitz_ok;
        self
    }

    /// Human-readable list of the margins that are not strictly negative.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, m) in [("m1", self.m1), ("m2", self.m2), ("m3", self.m3)] {
            if !(m < 0.0) {
                out.push(format!("{name} = {m} >= 0"));
            }
        }
        if self.hurwitz_ok == Some(false) {
            out.push("closed-loop matrix is not Hurwitz".to_string());
        }
        out
    }
}

/// Left-boundary dissipation deficit `max{0, -a k1}`.
pub fn kbar(a: f64, k1: f64) -> f64 {
    (-a * k1).max(0.0)
}

pub fn theorem1_margins(p: &DesignPoint) -> FeasibilityReport {
    let kb = kbar(p.a, p.k1);
    let m1 = kb - p.a;
    let m2 = 5.0 * kb - p.a + 4.0 * p.b;
    let m3 = 2.0 * p.a * p.k2 + kb + p.a;
    let theorem_ok = m1 < 0.0 && m2 < 0.0 && m3 < 0.0;
    FeasibilityReport {
        kbar: kb,
        m1,
        m2,
        m3,
        theorem_ok,
        hurwitz_ok: None,
        in_d: false,
    }
}

/// Homogeneous (`b = 0`) specialisation; rejects any other `b`.
pub fn corollary1_margins(p: &DesignPoint) -> Result<FeasibilityReport> {
    if p.b != 0.0 {
        return Err(CcdError::InvalidArgument(format!(
            "homogeneous margins need b = 0, got {}",
            p.b
        )));
    }
    Ok(theorem1_margins(p))
}

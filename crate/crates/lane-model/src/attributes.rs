//! Evidence masses for marking type and color, combined with Dempster's rule.
//!
//! Each mass function assigns belief to the singleton hypotheses plus one
//! ignorance slot (the whole frame of discernment), which is all the lane
//! sensors in this pipeline report. Per-frame evidence is folded into a line's
//! running mass after a forgetting step that leaks belief back to ignorance,
//! so a line can re-learn its type when the real marking changes.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Marking type hypotheses; `Unknown` is the ignorance slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkingType {
    Solid,
    Dashed,
    Block,
    Unknown,
}

impl MarkingType {
    pub const COUNT: usize = 4;

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Self::Solid,
            1 => Self::Dashed,
            2 => Self::Block,
            _ => Self::Unknown,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::Solid => 0,
            Self::Dashed => 1,
            Self::Block => 2,
            Self::Unknown => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Solid => "solid",
            Self::Dashed => "dashed",
            Self::Block => "block",
            Self::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "solid" => Some(Self::Solid),
            "dashed" => Some(Self::Dashed),
            "block" => Some(Self::Block),
            "unknown" => Some(Self::Unknown),
            _ => None,
        }
    }
}

/// Marking color hypotheses; `Unknown` is the ignorance slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineColor {
    White,
    Yellow,
    Unknown,
}

impl LineColor {
    pub const COUNT: usize = 3;

    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Self::White,
            1 => Self::Yellow,
            _ => Self::Unknown,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::White => 0,
            Self::Yellow => 1,
            Self::Unknown => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::White => "white",
            Self::Yellow => "yellow",
            Self::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "white" => Some(Self::White),
            "yellow" => Some(Self::Yellow),
            "unknown" => Some(Self::Unknown),
            _ => None,
        }
    }
}

const MASS_SUM_TOL: f64 = 1e-9;

/// Mass function over `N - 1` singleton hypotheses plus ignorance (last slot).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mass<T, const N: usize> {
    m: [T; N],
}

impl<T: Real, const N: usize> Mass<T, N> {
    /// Builds a mass function, checking the simplex invariants.
    pub fn new(m: [T; N]) -> Result<Self> {
        let mut sum = T::zero();
        for &v in &m {
            if v < -real::<T>(MASS_SUM_TOL) || v > T::one() + real::<T>(MASS_SUM_TOL) {
                return Err(Error::InvalidMass(format!(
                    "component {:?} outside [0, 1]",
                    v
                )));
            }
            sum += v;
        }
        if (sum - T::one()).abs() > real::<T>(MASS_SUM_TOL) {
            return Err(Error::InvalidMass(format!("components sum to {:?}", sum)));
        }
        Ok(Self { m })
    }

    /// Full belief on one hypothesis.
    pub fn certain(index: usize) -> Self {
        let mut m = [T::zero(); N];
        m[index] = T::one();
        Self { m }
    }

    /// Total ignorance: all mass on the frame of discernment.
    pub fn vacuous() -> Self {
        Self::certain(N - 1)
    }

    /// Belief `confidence` on one hypothesis, remainder on ignorance.
    pub fn with_confidence(index: usize, confidence: T) -> Result<Self> {
        let mut m = [T::zero(); N];
        m[index] = confidence;
        m[N - 1] += T::one() - confidence;
        Self::new(m)
    }

    pub fn components(&self) -> &[T; N] {
        &self.m
    }

    /// Dempster's rule of combination. Returns `None` on total conflict
    /// (normalizer vanishes), in which case the caller keeps its prior.
    pub fn combine(&self, other: &Self) -> Option<Self> {
        let a = &self.m;
        let b = &other.m;
        let ig = N - 1;
        let mut out = [T::zero(); N];
        for i in 0..ig {
            out[i] = a[i] * b[i] + a[i] * b[ig] + a[ig] * b[i];
        }
        out[ig] = a[ig] * b[ig];
        // Conflict: mass assigned to pairs of distinct singletons.
        let mut conflict = T::zero();
        for i in 0..ig {
            for j in 0..ig {
                if i != j {
                    conflict += a[i] * b[j];
                }
            }
        }
        let norm = T::one() - conflict;
        if norm <= real::<T>(1e-12) {
            return None;
        }
        for v in &mut out {
            *v /= norm;
        }
        Some(Self { m: out })
    }

    /// Forgetting step: scales singleton belief by `factor` and moves the
    /// remainder onto ignorance.
    pub fn discount(&self, factor: T) -> Self {
        let mut out = [T::zero(); N];
        let mut kept = T::zero();
        for i in 0..N - 1 {
            out[i] = self.m[i] * factor;
            kept += out[i];
        }
        out[N - 1] = T::one() - kept;
        Self { m: out }
    }

    /// Index and mass of the strongest hypothesis (ignorance wins ties late:
    /// the first maximal index is kept, so singletons beat ignorance on ties).
    pub fn argmax(&self) -> (usize, T) {
        let mut best = 0;
        for i in 1..N {
            if self.m[i] > self.m[best] {
                best = i;
            }
        }
        (best, self.m[best])
    }
}

/// Evidence attached to a feature or accumulated on a line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributeMass<T> {
    pub marking: Mass<T, { MarkingType::COUNT }>,
    pub color: Mass<T, { LineColor::COUNT }>,
}

impl<T: Real> AttributeMass<T> {
    pub fn vacuous() -> Self {
        Self {
            marking: Mass::vacuous(),
            color: Mass::vacuous(),
        }
    }
}

//! Physical configuration: atom layouts, unit conventions, and
//! piecewise-constant control schedules.
//!
//! Conventions used everywhere downstream: natural units `v = 1`, `ħ = 1`;
//! the bare coupling constant never appears on its own — only the single-leg
//! relaxation rate `γ = 2Γc₀²` together with the signed dimensionless weights
//! `w_m` (physical coupling `c_m = w_m·c₀`). Delays are `τ_mm' = |x_m − x_m'|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Sign pattern of the leg weights for the regular constructors and for the
/// closed forms that distinguish the two cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    /// All weights `+1`.
    Uniform,
    /// Weights `(−1)^m`, `m = 1..N`.
    Alternating,
}

/// One attachment point: position along the line and signed weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg<R> {
    pub position: R,
    pub weight: R,
}

/// A giant atom: frequency, per-leg relaxation rate, and its coupling legs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub struct AtomLayout<R> {
    /// Atom frequency Ω (rad/time).
    pub omega: R,
    /// Relaxation rate γ = 2Γc₀² of a single unit-weight leg.
    pub gamma_single: R,
    /// Legs ordered by strictly increasing position.
    pub legs: Vec<Leg<R>>,
}

impl<R: Real> AtomLayout<R> {
    /// Validating constructor; see the type invariants.
    pub fn new(omega: R, gamma_single: R, legs: Vec<Leg<R>>) -> Result<Self> {
        if legs.is_empty() {
            return Err(Error::InvalidConfiguration("at least one leg required".into()));
        }
        if !(gamma_single >= R::zero()) || !gamma_single.is_finite() {
            return Err(Error::InvalidConfiguration(format!(
                "gamma_single must be finite and >= 0, got {gamma_single}"
            )));
        }
        if !omega.is_finite() {
            return Err(Error::InvalidConfiguration("omega must be finite".into()));
        }
        let mut any_nonzero = false;
        for (i, leg) in legs.iter().enumerate() {
            if !leg.position.is_finite() || !leg.weight.is_finite() {
                return Err(Error::InvalidConfiguration(format!(
                    "leg {i} has non-finite position or weight"
                )));
            }
            if leg.weight != R::zero() {
                any_nonzero = true;
            }
            if i > 0 && !(legs[i - 1].position < leg.position) {
                return Err(Error::InvalidConfiguration(
                    "leg positions must be strictly increasing".into(),
                ));
            }
        }
        if !any_nonzero {
            return Err(Error::InvalidConfiguration(
                "at least one leg weight must be nonzero".into(),
            ));
        }
        Ok(Self { omega, gamma_single, legs })
    }

    pub fn n_legs(&self) -> usize {
        self.legs.len()
    }

    pub fn positions(&self) -> impl Iterator<Item = R> + '_ {
        self.legs.iter().map(|l| l.position)
    }

    pub fn weights(&self) -> impl Iterator<Item = R> + '_ {
        self.legs.iter().map(|l| l.weight)
    }

    /// Leftmost leg position x₁.
    pub fn x_first(&self) -> R {
        self.legs[0].position
    }

    /// Rightmost leg position x_N.
    pub fn x_last(&self) -> R {
        self.legs[self.legs.len() - 1].position
    }

    /// Probe arrival time of leg `m` relative to the first leg, τ_m = x_m − x₁.
    pub fn arrival_time(&self, m: usize) -> R {
        self.legs[m].position - self.x_first()
    }

    /// Smallest nonzero pairwise delay, if the atom has more than one leg.
    pub fn min_delay(&self) -> Option<R> {
        let mut min: Option<R> = None;
        for w in self.legs.windows(2) {
            let d = w[1].position - w[0].position;
            min = Some(match min {
                Some(m) if m < d => m,
                _ => d,
            });
        }
        min
    }
}

/// `N` legs with spacing `vτ` starting at `x = 0`, weights all `+1`
/// (uniform) or `(−1)^m` (alternating).
pub fn uniform_layout<R: Real>(
    n_legs: usize,
    omega: R,
    gamma_single: R,
    tau: R,
    pattern: SignPattern,
) -> Result<AtomLayout<R>> {
    if n_legs == 0 {
        return Err(Error::InvalidConfiguration("n_legs must be >= 1".into()));
    }
    if !(tau > R::zero()) {
        return Err(Error::InvalidConfiguration(format!("tau must be > 0, got {tau}")));
    }
    let legs = (1..=n_legs)
        .map(|m| Leg {
            position: tau * R::of_usize(m - 1),
            weight: match pattern {
                SignPattern::Uniform => R::one(),
                SignPattern::Alternating => {
                    if m % 2 == 0 {
                        R::one()
                    } else {
                        -R::one()
                    }
                }
            },
        })
        .collect();
    AtomLayout::new(omega, gamma_single, legs)
}

/// Two uniformly spaced groups of legs (N₁ then N₂, intra-group spacing `vτ`)
/// separated by a gap of travel time `t_gap` between the rightmost leg of the
/// first group and the leftmost leg of the second.
///
/// `weight2` scales the second group relative to the first (γ₂ = weight2²·γ₁);
/// with the alternating pattern the sign index runs through both groups,
/// `w_m = (−1)^m`, `m = 1..N₁+N₂`.
pub fn two_group_layout<R: Real>(
    n1: usize,
    n2: usize,
    omega: R,
    gamma_single: R,
    tau: R,
    t_gap: R,
    weight2: R,
    pattern: SignPattern,
) -> Result<AtomLayout<R>> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidConfiguration("both groups need legs".into()));
    }
    if !(tau > R::zero()) || !(t_gap > R::zero()) {
        return Err(Error::InvalidConfiguration("tau and t_gap must be > 0".into()));
    }
    let x2_start = tau * R::of_usize(n1 - 1) + t_gap;
    let mut legs = Vec::with_capacity(n1 + n2);
    for m in 1..=(n1 + n2) {
        let (position, scale) = if m <= n1 {
            (tau * R::of_usize(m - 1), R::one())
        } else {
            (x2_start + tau * R::of_usize(m - n1 - 1), weight2)
        };
        let sign = match pattern {
            SignPattern::Uniform => R::one(),
            SignPattern::Alternating => {
                if m % 2 == 0 {
                    R::one()
                } else {
                    -R::one()
                }
            }
        };
        legs.push(Leg { position, weight: sign * scale });
    }
    AtomLayout::new(omega, gamma_single, legs)
}

/// Total decay rate and spatial span: `(γ·(Σ|w_m|)², x_N − x₁)`.
///
/// For unit-magnitude weights the first entry is the usual `N²γ`.
pub fn total_decay_and_span<R: Real>(layout: &AtomLayout<R>) -> (R, R) {
    let sum_abs: R = layout.weights().map(|w| w.abs()).sum();
    let gamma_tot = layout.gamma_single * sum_abs * sum_abs;
    (gamma_tot, layout.x_last() - layout.x_first())
}

/// Reference frequency and the derived reference wavelength λ₀ = 2πv/Ω₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitsDoc<R> {
    pub omega0: R,
    pub lambda0: R,
}

impl<R: Real> UnitsDoc<R> {
    pub fn from_omega0(omega0: R) -> Result<Self> {
        if !(omega0 > R::zero()) {
            return Err(Error::InvalidConfiguration("omega0 must be > 0".into()));
        }
        Ok(Self { omega0, lambda0: R::TAU() / omega0 })
    }
}

/// Right-continuous step function with finitely many switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub struct StepFn<R> {
    /// Value on `(-inf, switches[0])`.
    pub initial: R,
    /// `(time, value)` pairs, strictly increasing in time; value holds from
    /// its switch time (inclusive) to the next.
    pub switches: Vec<(R, R)>,
}

impl<R: Real> StepFn<R> {
    pub fn constant(value: R) -> Self {
        Self { initial: value, switches: Vec::new() }
    }

    pub fn new(initial: R, switches: Vec<(R, R)>) -> Result<Self> {
        for w in switches.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::InvalidConfiguration(
                    "switch times must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { initial, switches })
    }

    /// Right-continuous value at `t`.
    pub fn value(&self, t: R) -> R {
        let mut v = self.initial;
        for &(ts, val) in &self.switches {
            if t >= ts {
                v = val;
            } else {
                break;
            }
        }
        v
    }
}

/// Time-dependent control: atom frequency and coupling scale, both
/// piecewise constant (instantaneous switches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub struct ControlSchedule<R> {
    pub omega_of_t: StepFn<R>,
    /// 0 = decoupled, 1 = fully coupled; intermediate scales allowed.
    pub coupling_on: StepFn<R>,
}

impl<R: Real> ControlSchedule<R> {
    /// Always coupled at fixed frequency.
    pub fn always_on(omega: R) -> Self {
        Self {
            omega_of_t: StepFn::constant(omega),
            coupling_on: StepFn::constant(R::one()),
        }
    }

    /// Decoupled until `t_on`, then coupled at `omega`; optionally decoupled
    /// again at `t_release`.
    pub fn catch_protocol(omega: R, t_on: R, t_release: Option<R>) -> Result<Self> {
        let mut switches = vec![(t_on, R::one())];
        if let Some(tr) = t_release {
            if !(tr > t_on) {
                return Err(Error::InvalidConfiguration(
                    "t_release must be after t_on".into(),
                ));
            }
            switches.push((tr, R::zero()));
        }
        Ok(Self {
            omega_of_t: StepFn::constant(omega),
            coupling_on: StepFn::new(R::zero(), switches)?,
        })
    }

    /// All switch times of either control, merged and sorted.
    pub fn switch_times(&self) -> Vec<R> {
        let mut times: Vec<R> = self
            .omega_of_t
            .switches
            .iter()
            .chain(self.coupling_on.switches.iter())
            .map(|&(t, _)| t)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| *a == *b);
        times
    }

    /// Largest |Ω(t) − ω_frame| over all schedule pieces.
    pub fn max_detuning_from(&self, omega_frame: R) -> R {
        let mut m = (self.omega_of_t.initial - omega_frame).abs();
        for &(_, v) in &self.omega_of_t.switches {
            m = m.max((v - omega_frame).abs());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_layout_single_point() {
        let l = uniform_layout(1, 1.0, 0.1, 1.0, SignPattern::Uniform).unwrap();
        assert_eq!(l.n_legs(), 1);
        assert_eq!(l.legs[0].position, 0.0);
        assert_eq!(l.legs[0].weight, 1.0);
    }

    #[test]
    fn uniform_layout_two_legs_geometry() {
        let omega = 1.3;
        let tau = std::f64::consts::PI / omega;
        let l = uniform_layout(2, omega, 0.1, tau, SignPattern::Uniform).unwrap();
        let xs: Vec<f64> = l.positions().collect();
        assert_eq!(xs[0], 0.0);
        assert_abs_diff_eq!(xs[1], tau, epsilon = 0.0);
        assert!(l.weights().all(|w| w == 1.0));
    }

    #[test]
    fn alternating_sign_pattern() {
        let l = uniform_layout(4, 1.0, 0.1, 0.7, SignPattern::Alternating).unwrap();
        let ws: Vec<f64> = l.weights().collect();
        assert_eq!(ws, vec![-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(uniform_layout(0, 1.0, 0.1, 1.0, SignPattern::Uniform).is_err());
        assert!(uniform_layout(2, 1.0, 0.1, 0.0, SignPattern::Uniform).is_err());
        assert!(uniform_layout(2, 1.0, -0.1, 1.0, SignPattern::Uniform).is_err());
        // non-increasing positions
        let legs = vec![
            Leg { position: 0.0, weight: 1.0 },
            Leg { position: 0.0, weight: 1.0 },
        ];
        assert!(AtomLayout::new(1.0, 0.1, legs).is_err());
        // all-zero weights
        let legs = vec![Leg { position: 0.0, weight: 0.0 }];
        assert!(AtomLayout::new(1.0, 0.1, legs).is_err());
    }

    #[test]
    fn total_decay_examples() {
        let omega: f64 = 1.0;
        let tau = std::f64::consts::TAU / omega; // Ωτ = 2π
        let l = uniform_layout(20, omega, 0.005, tau, SignPattern::Uniform).unwrap();
        let (g, t) = total_decay_and_span(&l);
        assert_abs_diff_eq!(g, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t, 19.0 * tau, epsilon = 1e-9);

        let l1 = uniform_layout(1, omega, 0.3, 1.0, SignPattern::Uniform).unwrap();
        assert_eq!(total_decay_and_span(&l1), (0.3, 0.0));

        let l2 = uniform_layout(2, omega, 0.1, 1.0, SignPattern::Uniform).unwrap();
        let (g2, t2) = total_decay_and_span(&l2);
        assert_abs_diff_eq!(g2, 0.4, epsilon = 1e-15);
        assert_eq!(t2, 1.0);
    }

    #[test]
    fn layout_serialization_round_trips_bit_exactly() {
        let l = uniform_layout(5, 0.9371823, 0.0123456789, 1.1e-3, SignPattern::Alternating)
            .unwrap();
        let s = serde_json::to_string(&l).unwrap();
        let back: AtomLayout<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(l, back);
    }

    #[test]
    fn uniform_delay_set_is_exact() {
        let tau = 0.73;
        let l = uniform_layout(6, 1.0, 0.1, tau, SignPattern::Uniform).unwrap();
        let xs: Vec<f64> = l.positions().collect();
        for (m, xm) in xs.iter().enumerate() {
            for (mp, xmp) in xs.iter().enumerate() {
                let d = (xm - xmp).abs();
                let n = (m as i64 - mp as i64).unsigned_abs() as f64;
                assert_abs_diff_eq!(d, n * tau, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn step_fn_right_continuous() {
        let f = StepFn::new(0.0, vec![(1.0, 1.0), (2.0, 0.5)]).unwrap();
        assert_eq!(f.value(0.999), 0.0);
        assert_eq!(f.value(1.0), 1.0);
        assert_eq!(f.value(1.5), 1.0);
        assert_eq!(f.value(2.0), 0.5);
        assert!(StepFn::new(0.0, vec![(1.0, 1.0), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn units_doc_identity() {
        let u = UnitsDoc::from_omega0(2.5f64).unwrap();
        assert_abs_diff_eq!(u.lambda0 * u.omega0, std::f64::consts::TAU, epsilon = 1e-15);
    }

    #[test]
    fn schedule_helpers() {
        let s = ControlSchedule::catch_protocol(1.0, 3.0, Some(10.0)).unwrap();
        assert_eq!(s.coupling_on.value(2.9), 0.0);
        assert_eq!(s.coupling_on.value(3.0), 1.0);
        assert_eq!(s.coupling_on.value(10.0), 0.0);
        assert_eq!(s.switch_times(), vec![3.0, 10.0]);
        assert_eq!(s.max_detuning_from(1.0), 0.0);
    }
}

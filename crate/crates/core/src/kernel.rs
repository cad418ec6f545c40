//! Memory kernel: the deduplicated delay table and the two-group effective
//! reduction.
//!
//! The atomic EOM only ever consumes the combination
//! `Σ_{m,m'} w_m w_m' β(t − |τ_mm'|)`, so the O(N²) leg pairs collapse to one
//! signed weight sum per distinct delay. For `N` uniformly spaced equal legs
//! the weight sum at delay `nτ` is `N` for `n = 0` and `2(N − n)` for
//! `n ≥ 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AtomLayout, SignPattern};
use crate::real::Real;

/// Relative tolerance (of the largest delay) for merging equal delays.
pub const DELAY_MERGE_REL_TOL: f64 = 1e-12;

/// One kernel entry: a delay magnitude and the signed sum of `w_m·w_m'` over
/// all ordered leg pairs at that delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry<R> {
    pub delay: R,
    pub weight_sum: R,
}

/// Deduplicated memory kernel of a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub struct DelayTable<R> {
    /// Entries with strictly increasing delay; the first entry has delay 0.
    pub entries: Vec<DelayEntry<R>>,
}

impl<R: Real> DelayTable<R> {
    /// Largest delay (0 for a single-leg atom).
    pub fn max_delay(&self) -> R {
        self.entries.last().map(|e| e.delay).unwrap_or(R::zero())
    }

    /// Smallest nonzero delay, if any.
    pub fn min_positive_delay(&self) -> Option<R> {
        self.entries.iter().map(|e| e.delay).find(|d| *d > R::zero())
    }

    /// Kernel sum `K(s) = Σ_j weight_sum_j · e^{−s·delay_j}` (complex `s`).
    pub fn kernel_sum(&self, s: num_complex::Complex<R>) -> num_complex::Complex<R> {
        self.entries
            .iter()
            .map(|e| (-s * e.delay).exp() * e.weight_sum)
            .sum()
    }

    /// Derivative sum `Σ_j weight_sum_j · delay_j · e^{−s·delay_j}`.
    pub fn kernel_sum_deriv(&self, s: num_complex::Complex<R>) -> num_complex::Complex<R> {
        self.entries
            .iter()
            .map(|e| (-s * e.delay).exp() * (e.weight_sum * e.delay))
            .sum()
    }
}

/// Exact pairwise enumeration of `|τ_mm'|` with signed weight sums, merging
/// delays equal within `1e−12` of the maximum delay.
pub fn build_delay_table<R: Real>(layout: &AtomLayout<R>) -> DelayTable<R> {
    let xs: Vec<R> = layout.positions().collect();
    let ws: Vec<R> = layout.weights().collect();
    let n = xs.len();
    let mut pairs: Vec<(R, R)> = Vec::with_capacity(n * n);
    for m in 0..n {
        for mp in 0..n {
            pairs.push(((xs[m] - xs[mp]).abs(), ws[m] * ws[mp]));
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let max_delay = pairs.last().map(|p| p.0).unwrap_or(R::zero());
    let tol = R::of(DELAY_MERGE_REL_TOL) * max_delay;
    let mut entries: Vec<DelayEntry<R>> = Vec::new();
    for (d, w) in pairs {
        match entries.last_mut() {
            Some(last) if d - last.delay <= tol => last.weight_sum += w,
            _ => entries.push(DelayEntry { delay: d, weight_sum: w }),
        }
    }
    DelayTable { entries }
}

/// Multiplicities of the cross-group delays `T + nτ`, `n = 0..N₁+N₂−2`, for
/// two uniformly spaced groups of even sizes `N₁ ≤ N₂`:
/// `2(n+1)` for `n < N₁`; `2N₁` for `N₁ ≤ n < N₂`; `2(N₁+N₂−n−1)` for
/// `n ≥ N₂`.
pub fn two_group_counts(n1: usize, n2: usize) -> Result<Vec<usize>> {
    if n1 < 2 || n2 < 2 || n1 % 2 != 0 || n2 % 2 != 0 {
        return Err(Error::InvalidConfiguration(format!(
            "group sizes must be even and >= 2, got ({n1}, {n2})"
        )));
    }
    if n1 > n2 {
        return Err(Error::InvalidConfiguration(format!(
            "expected N1 <= N2, got ({n1}, {n2})"
        )));
    }
    Ok((0..=(n1 + n2 - 2))
        .map(|n| {
            if n < n1 {
                2 * (n + 1)
            } else if n < n2 {
                2 * n1
            } else {
                2 * (n1 + n2 - n - 1)
            }
        })
        .collect())
}

/// Parameters of the reduced model with two effective coupling points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTwoPoint<R> {
    /// Lamb shift Δ̃ of the atomic frequency.
    pub delta_tilde: R,
    /// Local effective decay rate γ̃₁ (≥ 0).
    pub gamma1_tilde: R,
    /// Cross (delayed) effective rate γ̃₂; may be negative.
    pub gamma2_tilde: R,
    /// Center-to-center travel time T̃ = T + (N₁+N₂)τ/2 − τ.
    pub t_tilde: R,
}

/// Closed-form reduction of two widely separated uniform groups (even sizes
/// `N₁ ≤ N₂`, per-leg rates `γ₁`, `γ₂`, intra-group phase `Ωτ`, gap travel
/// time `T`) to two effective legs.
///
/// Denominators are `1 + cos Ωτ` for the alternating pattern and
/// `1 − cos Ωτ` for the uniform one; phases within `1e−9` of the singular
/// value are rejected.
pub fn effective_two_point<R: Real>(
    gamma1: R,
    gamma2: R,
    n1: usize,
    n2: usize,
    omega_tau: R,
    tau: R,
    t_gap: R,
    pattern: SignPattern,
) -> Result<EffectiveTwoPoint<R>> {
    if n1 < 2 || n2 < 2 || n1 % 2 != 0 || n2 % 2 != 0 || n1 > n2 {
        return Err(Error::InvalidConfiguration(format!(
            "group sizes must be even, >= 2 and ordered N1 <= N2, got ({n1}, {n2})"
        )));
    }
    let cos = omega_tau.cos();
    let denom = match pattern {
        SignPattern::Alternating => R::one() + cos,
        SignPattern::Uniform => R::one() - cos,
    };
    if denom.abs() < R::of(1e-9) {
        return Err(Error::SingularPhase(format!(
            "reduction denominator 1 {} cos(omega*tau) vanishes at omega*tau = {omega_tau}",
            match pattern {
                SignPattern::Alternating => "+",
                SignPattern::Uniform => "-",
            }
        )));
    }
    let half = R::of(0.5);
    let nf1 = R::of_usize(n1);
    let nf2 = R::of_usize(n2);
    let n_bar = (nf1 + nf2) * half;
    let n_diff = (nf2 - nf1) * half;
    let sin = omega_tau.sin();
    let per_group = |nf: R, g: R| -> (R, R) {
        let shift_num = match pattern {
            // alternating: −(γ_j/2)·(N_j sin Ωτ + sin N_jΩτ)/(1+cos Ωτ)
            SignPattern::Alternating => -(nf * sin + (nf * omega_tau).sin()),
            // uniform: +(γ_j/2)·(N_j sin Ωτ − sin N_jΩτ)/(1−cos Ωτ)
            SignPattern::Uniform => nf * sin - (nf * omega_tau).sin(),
        };
        let decay_num = R::one() - (nf * omega_tau).cos();
        (g * half * shift_num / denom, g * half * decay_num / denom)
    };
    let (d1, g1a) = per_group(nf1, gamma1);
    let (d2, g1b) = per_group(nf2, gamma2);
    let gamma2_tilde = (gamma1 * gamma2).sqrt()
        * ((n_diff * omega_tau).cos() - (n_bar * omega_tau).cos())
        / denom;
    Ok(EffectiveTwoPoint {
        delta_tilde: d1 + d2,
        gamma1_tilde: g1a + g1b,
        gamma2_tilde,
        t_tilde: t_gap + (nf1 + nf2) * tau * half - tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{two_group_layout, uniform_layout};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Brute-force oracle: enumerate all ordered pairs without any merging
    /// shortcut, then group by exact integer delay index.
    fn brute_force_uniform_counts(n: usize) -> Vec<(usize, f64)> {
        let mut sums = vec![0.0f64; n];
        for m in 0..n {
            for mp in 0..n {
                let d = (m as i64 - mp as i64).unsigned_abs() as usize;
                sums[d] += 1.0;
            }
        }
        sums.into_iter().enumerate().collect()
    }

    #[test]
    fn delay_table_uniform_two_legs() {
        let l = uniform_layout(2, 1.0, 0.1, 1.0, SignPattern::Uniform).unwrap();
        let t = build_delay_table(&l);
        assert_eq!(t.entries.len(), 2);
        assert_eq!((t.entries[0].delay, t.entries[0].weight_sum), (0.0, 2.0));
        assert_eq!((t.entries[1].delay, t.entries[1].weight_sum), (1.0, 2.0));
    }

    #[test]
    fn delay_table_uniform_five_legs() {
        let l = uniform_layout(5, 1.0, 0.1, 1.0, SignPattern::Uniform).unwrap();
        let t = build_delay_table(&l);
        let sums: Vec<f64> = t.entries.iter().map(|e| e.weight_sum).collect();
        assert_eq!(sums, vec![5.0, 8.0, 6.0, 4.0, 2.0]);
    }

    #[test]
    fn delay_table_alternating_two_legs() {
        let l = uniform_layout(2, 1.0, 0.1, 1.0, SignPattern::Alternating).unwrap();
        let t = build_delay_table(&l);
        assert_eq!((t.entries[0].delay, t.entries[0].weight_sum), (0.0, 2.0));
        assert_eq!((t.entries[1].delay, t.entries[1].weight_sum), (1.0, -2.0));
    }

    #[test]
    fn counting_rule_matches_brute_force_up_to_50() {
        for n in 1..=50usize {
            let l = uniform_layout(n, 1.0, 0.1, 0.37, SignPattern::Uniform).unwrap();
            let t = build_delay_table(&l);
            let oracle = brute_force_uniform_counts(n);
            assert_eq!(t.entries.len(), n);
            for (k, (idx, sum)) in oracle.iter().enumerate() {
                assert_abs_diff_eq!(t.entries[k].delay, 0.37 * *idx as f64, epsilon = 1e-12);
                assert_abs_diff_eq!(t.entries[k].weight_sum, *sum, epsilon = 1e-9);
                let rule = if *idx == 0 { n as f64 } else { 2.0 * (n - idx) as f64 };
                assert_eq!(*sum, rule);
            }
        }
    }

    #[test]
    fn two_group_counts_examples() {
        assert_eq!(two_group_counts(2, 2).unwrap(), vec![2, 4, 2]);
        assert_eq!(two_group_counts(2, 4).unwrap(), vec![2, 4, 4, 4, 2]);
        assert_eq!(two_group_counts(4, 4).unwrap(), vec![2, 4, 6, 8, 6, 4, 2]);
        assert!(two_group_counts(3, 4).is_err());
        assert!(two_group_counts(4, 2).is_err());
    }

    #[test]
    fn two_group_counts_match_layout_cross_delays() {
        // Gap chosen so cross delays never collide with intra-group delays.
        let tau = 1.0;
        for &(n1, n2) in &[(2usize, 2usize), (2, 4), (4, 6), (6, 6)] {
            let t_gap = 100.5 * tau;
            let l = two_group_layout(n1, n2, 1.0, 0.1, tau, t_gap, 1.0, SignPattern::Uniform)
                .unwrap();
            let table = build_delay_table(&l);
            let counts = two_group_counts(n1, n2).unwrap();
            for (n, &c) in counts.iter().enumerate() {
                let d = t_gap + n as f64 * tau;
                let entry = table
                    .entries
                    .iter()
                    .find(|e| (e.delay - d).abs() < 1e-9)
                    .unwrap_or_else(|| panic!("missing cross delay {d}"));
                assert_abs_diff_eq!(entry.weight_sum, c as f64, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn effective_two_point_examples() {
        // alternating, γ1=γ2=γ, N1=N2=2, Ωτ=π/2 → γ̃₂ = 2γ
        let g = 0.01;
        let e = effective_two_point(
            g,
            g,
            2,
            2,
            std::f64::consts::FRAC_PI_2,
            1.0,
            10.0,
            SignPattern::Alternating,
        )
        .unwrap();
        assert_abs_diff_eq!(e.gamma2_tilde, 2.0 * g, epsilon = 1e-15);
        assert_abs_diff_eq!(e.t_tilde, 10.0 + 2.0 - 1.0, epsilon = 1e-15);

        // uniform, N1=N2=2, Ωτ=π → γ̃₁ = 0 (destructive pair)
        let e = effective_two_point(
            g,
            g,
            2,
            2,
            std::f64::consts::PI,
            1.0,
            10.0,
            SignPattern::Uniform,
        )
        .unwrap();
        assert_abs_diff_eq!(e.gamma1_tilde, 0.0, epsilon = 1e-15);

        // decoupled atom
        let e = effective_two_point(0.0, 0.0, 2, 4, 1.3, 1.0, 5.0, SignPattern::Uniform)
            .unwrap();
        assert_eq!(e.delta_tilde, 0.0);
        assert_eq!(e.gamma1_tilde, 0.0);
        assert_eq!(e.gamma2_tilde, 0.0);
    }

    #[test]
    fn effective_two_point_rejects_singular_phase() {
        // uniform at Ωτ = 2π: 1 − cos = 0
        assert!(matches!(
            effective_two_point(
                0.01,
                0.01,
                2,
                2,
                std::f64::consts::TAU,
                1.0,
                5.0,
                SignPattern::Uniform
            ),
            Err(crate::Error::SingularPhase(_))
        ));
        // alternating at Ωτ = π: 1 + cos = 0
        assert!(effective_two_point(
            0.01,
            0.01,
            2,
            2,
            std::f64::consts::PI,
            1.0,
            5.0,
            SignPattern::Alternating
        )
        .is_err());
        // odd sizes rejected
        assert!(effective_two_point(0.01, 0.01, 3, 4, 1.0, 1.0, 5.0, SignPattern::Uniform)
            .is_err());
    }

    proptest! {
        #[test]
        fn cross_multiplicities_sum_to_2_n1_n2(n1h in 1usize..8, extra in 0usize..8) {
            let n1 = 2 * n1h;
            let n2 = n1 + 2 * extra;
            let counts = two_group_counts(n1, n2).unwrap();
            prop_assert_eq!(counts.iter().sum::<usize>(), 2 * n1 * n2);
        }

        #[test]
        fn weight_sums_total_squared_weight(
            n in 1usize..12,
            tau in 0.01f64..10.0,
            alternating in any::<bool>(),
        ) {
            let pattern = if alternating { SignPattern::Alternating } else { SignPattern::Uniform };
            let l = uniform_layout(n, 1.0, 0.1, tau, pattern).unwrap();
            let table = build_delay_table(&l);
            // Collapsing all delays to zero must reproduce (Σ w_m)².
            let total: f64 = table.entries.iter().map(|e| e.weight_sum).sum();
            let w_sum: f64 = l.weights().sum();
            prop_assert!((total - w_sum * w_sum).abs() < 1e-9);
        }
    }
}

//! Laplace-domain solution: poles of the characteristic equation, residues,
//! and the analytic amplitudes `χ(t)` and `ξ_k(t)`.
//!
//! The Laplace image of the decay amplitude is
//! `E_χ(s) = 1 / D(s)` with
//! `D(s) = s + iΩ + (γ/2)·Σ_j W_j e^{−s d_j}`,
//! where `(d_j, W_j)` are the [`DelayTable`] entries. `D` is entire, so the
//! inverse transform is a sum over its simple roots `s_n`:
//! `χ(t) = Σ_n e^{s_n t} / D'(s_n)` with
//! `D'(s) = 1 − (γ/2)·Σ_j W_j d_j e^{−s d_j}`.
//!
//! Roots are found by damped Newton iteration from a rectangular grid of
//! seeds, deduplicated, and then re-searched with the found roots deflated
//! out. Far roots form ladders spaced ~2π/d_max in the imaginary direction
//! with residues shrinking like the inverse rung index, so the search window
//! bounds the truncation error; `|χ(0) − 1|` reports what was dropped.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{build_delay_table, DelayTable};
use crate::model::AtomLayout;
use crate::quad::simpson_uniform;
use crate::real::{imag_unit, Cplx, Real};

/// Residual acceptance threshold, relative to Ω: `|D(s_n)| < 1e−10·Ω`.
pub const RESIDUAL_REL_TOL: f64 = 1e-10;
/// Root deduplication radius, relative to Ω.
pub const DEDUP_REL_TOL: f64 = 1e-8;
/// Dark-pole classification threshold on `|Re s|`, relative to Ω.
pub const DARK_REL_TOL: f64 = 1e-9;
/// A root with `|D'(s_n)|` below this is treated as a non-simple pole.
pub const DEGENERATE_DENOM_TOL: f64 = 1e-10;

/// Rectangular search region in the complex `s` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow<R> {
    pub re_min: R,
    pub re_max: R,
    pub im_min: R,
    pub im_max: R,
}

impl<R: Real> SearchWindow<R> {
    /// Default window: `Re s ∈ [−1.2·γ_tot, +1e−6·Ω]`,
    /// `Im s ∈ [−Ω − 3π/τ_min, −Ω + 3π/τ_min]` (`±3γ_tot` around `−Ω` for a
    /// point atom). `scale` widens the imaginary half-width and deepens the
    /// real floor accordingly, for callers that need more rungs of the far
    /// pole ladders.
    pub fn default_for(layout: &AtomLayout<R>, scale: R) -> Self {
        let table = build_delay_table(layout);
        let gamma_tot = {
            let s: R = layout.weights().map(|w| w.abs()).sum();
            layout.gamma_single * s * s
        };
        let omega = layout.omega;
        let im_half = match table.min_positive_delay() {
            Some(tau_min) => R::of(3.0) * R::PI() / tau_min * scale,
            None => (R::of(3.0) * gamma_tot + omega * R::of(0.1)) * scale,
        };
        let re_min = match table.entries.last() {
            Some(last) if last.delay > R::zero() => {
                // Far rungs sit at Re s ≈ −ln(rung)/d_max; leave headroom.
                let d_max = last.delay;
                let ladder = (R::one() + im_half * d_max).ln() + R::of(8.0);
                -(R::of(1.2) * gamma_tot) - ladder / d_max
            }
            _ => -(R::of(1.2) * gamma_tot) - gamma_tot - R::one(),
        };
        Self {
            re_min,
            re_max: R::of(1e-6) * omega.abs().max(R::one()),
            im_min: -omega - im_half,
            im_max: -omega + im_half,
        }
    }

    fn contains(&self, s: Cplx<R>) -> bool {
        s.re >= self.re_min && s.re <= self.re_max && s.im >= self.im_min && s.im <= self.im_max
    }
}

/// One accepted simple pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole<R> {
    /// Root of the characteristic equation.
    pub s: Cplx<R>,
    /// Residue denominator `D'(s)`; the residue of `E_χ` is `1/denom_deriv`.
    pub denom_deriv: Cplx<R>,
    /// Purely imaginary (non-decaying) pole.
    pub is_dark: bool,
}

/// Poles found in a window, sorted by `|Re s|` ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub struct PoleSet<R> {
    pub poles: Vec<Pole<R>>,
    pub window: SearchWindow<R>,
    pub grid: (usize, usize),
    /// Number of Newton starts that failed to converge to an accepted root.
    pub newton_failures: usize,
}

impl<R: Real> PoleSet<R> {
    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Truncation diagnostic `|Σ_n 1/D'(s_n) − 1|`; small iff the window
    /// captured everything that matters at `t = 0`.
    pub fn chi0_error(&self) -> R {
        let sum: Cplx<R> = self.poles.iter().map(|p| p.denom_deriv.inv()).sum();
        (sum - Cplx::new(R::one(), R::zero())).norm()
    }

    /// Slowest decay rate `min |Re s_n|` over non-dark poles, if any decay.
    pub fn slowest_decay(&self) -> Option<R> {
        self.poles
            .iter()
            .filter(|p| !p.is_dark)
            .map(|p| p.s.re.abs())
            .fold(None, |acc, r| match acc {
                Some(a) if a < r => Some(a),
                _ => Some(r),
            })
    }
}

/// Characteristic function and derivative for a layout's kernel.
#[derive(Debug, Clone)]
pub struct CharacteristicFn<R> {
    pub omega: R,
    pub half_gamma: R,
    pub table: DelayTable<R>,
}

impl<R: Real> CharacteristicFn<R> {
    pub fn of_layout(layout: &AtomLayout<R>) -> Self {
        Self {
            omega: layout.omega,
            half_gamma: layout.gamma_single / R::of(2.0),
            table: build_delay_table(layout),
        }
    }

    /// `D(s) = s + iΩ + (γ/2)Σ W_j e^{−s d_j}`
    pub fn value(&self, s: Cplx<R>) -> Cplx<R> {
        s + imag_unit::<R>() * self.omega + self.table.kernel_sum(s) * self.half_gamma
    }

    /// `D'(s) = 1 − (γ/2)Σ W_j d_j e^{−s d_j}`
    pub fn deriv(&self, s: Cplx<R>) -> Cplx<R> {
        Cplx::new(R::one(), R::zero()) - self.table.kernel_sum_deriv(s) * self.half_gamma
    }
}

fn newton<R: Real>(
    f: &CharacteristicFn<R>,
    deflate: &[Cplx<R>],
    mut s: Cplx<R>,
    window: &SearchWindow<R>,
    res_tol: R,
) -> Option<Cplx<R>> {
    let max_iter = 80;
    let escape = R::of(4.0);
    let win_w = window.re_max - window.re_min;
    let win_h = window.im_max - window.im_min;
    for _ in 0..max_iter {
        let val = f.value(s);
        if !val.re.is_finite() || !val.im.is_finite() {
            return None;
        }
        // logarithmic-derivative form keeps deflation well scaled
        let mut ratio_inv = f.deriv(s) / val;
        for r in deflate {
            ratio_inv -= (s - r).inv();
        }
        let step = ratio_inv.inv();
        if !step.re.is_finite() || !step.im.is_finite() {
            return None;
        }
        s -= step;
        // wandered far outside the window: give up on this seed
        if s.re < window.re_min - escape * win_w
            || s.re > window.re_max + escape * win_w
            || s.im < window.im_min - escape * win_h
            || s.im > window.im_max + escape * win_h
        {
            return None;
        }
        if step.norm() < res_tol * R::of(1e-3) {
            break;
        }
    }
    // polish with two plain Newton steps (no deflation) for full accuracy
    for _ in 0..3 {
        let val = f.value(s);
        let der = f.deriv(s);
        if der.norm() == R::zero() {
            break;
        }
        s -= val / der;
    }
    (f.value(s).norm() < res_tol && window.contains(s)).then_some(s)
}

fn merge_roots<R: Real>(mut roots: Vec<Cplx<R>>, radius: R) -> Vec<Cplx<R>> {
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let mut out: Vec<Cplx<R>> = Vec::new();
    for s in roots {
        if !out.iter().any(|r| (*r - s).norm() < radius) {
            out.push(s);
        }
    }
    out
}

/// Find the poles of `E_χ` in `window` by multi-start Newton iteration with
/// deflation, on a `grid = (n_re, n_im)` lattice of seeds (at least 16×16).
///
/// Every accepted root satisfies `|D(s_n)| < 1e−10·Ω`; roots closer than
/// `1e−8·Ω` are merged; `|D'| < 1e−10` raises a degenerate-pole error.
pub fn find_poles<R: Real>(
    layout: &AtomLayout<R>,
    window: SearchWindow<R>,
    grid: (usize, usize),
) -> Result<PoleSet<R>> {
    let (n_re, n_im) = (grid.0.max(16), grid.1.max(16));
    let f = CharacteristicFn::of_layout(layout);
    let omega_scale = layout.omega.abs().max(R::one());
    let res_tol = R::of(RESIDUAL_REL_TOL) * omega_scale;
    let dedup = R::of(DEDUP_REL_TOL) * omega_scale;

    let seeds: Vec<Cplx<R>> = (0..n_re)
        .flat_map(|i| {
            let re = window.re_min
                + (window.re_max - window.re_min) * (R::of_usize(i) + R::of(0.5))
                    / R::of_usize(n_re);
            (0..n_im).map(move |j| {
                let im = window.im_min
                    + (window.im_max - window.im_min) * (R::of_usize(j) + R::of(0.5))
                        / R::of_usize(n_im);
                Cplx::new(re, im)
            })
        })
        .collect();

    // pass 1: independent Newton runs (parallel), serial merge
    let first: Vec<Option<Cplx<R>>> = seeds
        .par_iter()
        .map(|&s0| newton(&f, &[], s0, &window, res_tol))
        .collect();
    let mut failures = first.iter().filter(|r| r.is_none()).count();
    let mut roots = merge_roots(first.into_iter().flatten().collect(), dedup);

    // pass 2: deflate the found roots to expose any shadowed neighbors
    let deflate = roots.clone();
    let second: Vec<Option<Cplx<R>>> = seeds
        .par_iter()
        .map(|&s0| newton(&f, &deflate, s0, &window, res_tol))
        .collect();
    failures += second.iter().filter(|r| r.is_none()).count();
    roots.extend(second.into_iter().flatten());
    let roots = merge_roots(roots, dedup);

    let dark_tol = R::of(DARK_REL_TOL) * omega_scale;
    let mut poles = Vec::with_capacity(roots.len());
    for s in roots {
        let denom_deriv = f.deriv(s);
        if denom_deriv.norm() < R::of(DEGENERATE_DENOM_TOL) {
            return Err(Error::DegeneratePole {
                re: s.re.to_f64().unwrap_or(f64::NAN),
                im: s.im.to_f64().unwrap_or(f64::NAN),
                denom_abs: denom_deriv.norm().to_f64().unwrap_or(0.0),
            });
        }
        poles.push(Pole { s, denom_deriv, is_dark: s.re.abs() < dark_tol });
    }
    poles.sort_by(|a, b| {
        a.s.re
            .abs()
            .partial_cmp(&b.s.re.abs())
            .unwrap()
            .then(a.s.im.partial_cmp(&b.s.im).unwrap())
    });
    if poles.is_empty() {
        log::warn!(
            "find_poles: no roots accepted in window [{}, {}] x [{}, {}] ({} Newton failures)",
            window.re_min,
            window.re_max,
            window.im_min,
            window.im_max,
            failures
        );
    }
    Ok(PoleSet { poles, window, grid: (n_re, n_im), newton_failures: failures })
}

/// Widen the default window until the `t = 0` reconstruction error drops
/// below `target` (or the scale cap is hit); used by oracles that need a
/// near-complete residue sum.
pub fn find_poles_converged<R: Real>(
    layout: &AtomLayout<R>,
    target_chi0_error: R,
    max_scale: R,
) -> Result<PoleSet<R>> {
    let mut scale = R::one();
    let mut best: Option<PoleSet<R>> = None;
    loop {
        let window = SearchWindow::default_for(layout, scale);
        let table = build_delay_table(layout);
        let n_im = match table.min_positive_delay() {
            Some(_) => {
                let rungs = (window.im_max - window.im_min) * table.max_delay()
                    / (R::TAU());
                (rungs.to_f64().unwrap_or(0.0).ceil() as usize * 4).max(48)
            }
            None => 48,
        };
        let set = find_poles(layout, window, (16, n_im))?;
        let err = set.chi0_error();
        let good_enough = err < target_chi0_error;
        let keep = match &best {
            Some(b) => err < b.chi0_error(),
            None => true,
        };
        if keep {
            best = Some(set);
        }
        if good_enough || scale >= max_scale {
            return Ok(best.unwrap());
        }
        scale = scale * R::of(4.0);
    }
}

/// Decay amplitude `χ(t) = Σ_n e^{s_n t} / D'(s_n)` for `t ≥ 0`.
pub fn chi_of_t<R: Real>(poles: &PoleSet<R>, t: R) -> Result<Cplx<R>> {
    if poles.is_empty() {
        return Err(Error::EmptyPoleSet("chi_of_t needs at least one pole".into()));
    }
    Ok(poles
        .poles
        .iter()
        .map(|p| (p.s * t).exp() / p.denom_deriv)
        .sum())
}

/// Emission amplitude into mode `k` (signed; `ω_k = |k|`, `v = 1`):
///
/// `ξ_k(t) = −i√(γ/4π)·C(k)·[ Σ_n e^{s_n t}/((s_n+iω_k)·D'(s_n))
///            + e^{−iω_k t}/(i(Ω−ω_k) + (γ/2)Σ_j W_j e^{iω_k d_j}) ]`
///
/// with `C(k) = Σ_m w_m e^{i k x_m}`. Returns 0 when `−iω_k` coincides with
/// a pole within the dark tolerance (the mode is decoupled).
pub fn xi_k_of_t<R: Real>(
    poles: &PoleSet<R>,
    layout: &AtomLayout<R>,
    k: R,
    t: R,
) -> Result<Cplx<R>> {
    if poles.is_empty() {
        return Err(Error::EmptyPoleSet("xi_k_of_t needs at least one pole".into()));
    }
    let i = imag_unit::<R>();
    let omega_k = k.abs();
    let coincide_tol = R::of(DARK_REL_TOL) * layout.omega.abs().max(R::one());
    let f = CharacteristicFn::of_layout(layout);

    let mut pole_sum = Cplx::new(R::zero(), R::zero());
    for p in &poles.poles {
        let shift = p.s + i * omega_k;
        if shift.norm() < coincide_tol {
            // mode degenerate with a pole: decoupled
            return Ok(Cplx::new(R::zero(), R::zero()));
        }
        pole_sum += (p.s * t).exp() / (shift * p.denom_deriv);
    }
    // stationary denominator i(Ω−ω_k) + (γ/2)Σ W_j e^{iω_k d_j} = D(−iω_k)
    let stat_denom = f.value(-i * omega_k);
    let stationary = (-i * omega_k * t).exp() / stat_denom;

    let coupling: Cplx<R> = layout
        .legs
        .iter()
        .map(|l| (i * (k * l.position)).exp() * l.weight)
        .sum();
    let prefactor = -i * (layout.gamma_single / (R::of(4.0) * R::PI())).sqrt();
    Ok(prefactor * coupling * (pole_sum + stationary))
}

/// Uniform symmetric wavenumber grid for the restriction check.
#[derive(Debug, Clone, Copy)]
pub struct KGrid<R> {
    pub k_max: R,
    /// Samples per side (k > 0 and k < 0 each get this many intervals + 1).
    pub n_per_side: usize,
}

impl<R: Real> KGrid<R> {
    /// Grid meeting the stated restriction-check requirements for a layout:
    /// `k_max ≥ 6Ω` and spacing `≤ Ω/200` (using `12Ω` and `Ω/250` so the
    /// Lorentzian tails beyond the grid stay well under the tolerance).
    pub fn default_for(omega: R) -> Self {
        Self {
            k_max: R::of(12.0) * omega,
            n_per_side: 3000,
        }
    }
}

/// Deviation from the restriction `|χ(t)|² + ∫|ξ_k(t)|² dk = 1`, integrating
/// both signs of `k` by composite Simpson on the given grid.
pub fn conservation_check<R: Real>(
    poles: &PoleSet<R>,
    layout: &AtomLayout<R>,
    t: R,
    grid: KGrid<R>,
) -> Result<R> {
    let chi = chi_of_t(poles, t)?;
    let dk = grid.k_max / R::of_usize(grid.n_per_side);
    let mut total = chi.norm_sqr();
    for sign in [R::one(), -R::one()] {
        let vals: Vec<R> = (0..=grid.n_per_side)
            .map(|j| {
                let k = sign * dk * R::of_usize(j);
                xi_k_of_t(poles, layout, k, t).map(|x| x.norm_sqr())
            })
            .collect::<Result<_>>()?;
        total += simpson_uniform(&vals, dk);
    }
    Ok(total - R::one())
}

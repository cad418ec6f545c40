//! Direct time-domain integration of the delay EOM and reconstruction of the
//! waveguide field from retarded emission.
//!
//! The lab-frame equation of motion is
//!
//! ```text
//! dβ/dt = −iΩ(t)·β(t) − Σ_j Λ_j·√(g(t)g(t−d_j))·β(t−d_j)·Θ(t−d_j)
//!         + √g(t)·drive(t)
//! ```
//!
//! where `(d_j, Λ_j)` is the memory kernel (for a layout,
//! `Λ_j = (γ/2)·weight_sum_j` on the delay-table delays), `g` is the
//! piecewise-constant coupling scale, and the gating applies one `√g` factor
//! at the emission time and one at the reabsorption time.
//!
//! Integration runs in a rotating frame `β(t) = β̃(t)·e^{−iω_f t}` so the
//! step size is set by `γ`, the delays, and the control detunings rather
//! than by the carrier. The integrator is fixed-step classical RK4; delayed
//! values are read from the dense history by 4-point (cubic) Lagrange
//! interpolation. The step is chosen so that every delay and every schedule
//! switch lands exactly on the grid, which keeps the RK4 order intact across
//! the kink fronts the delays propagate.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::build_delay_table;
use crate::model::{AtomLayout, ControlSchedule, StepFn};
use crate::protocol::PacketSpec;
use crate::quad::simpson_uniform;
use crate::real::{imag_unit, Cplx, Real};

/// Relative tolerance for "dt divides every delay".
pub const STEP_ALIGN_REL_TOL: f64 = 1e-9;

/// Input drive acting on the atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub enum DriveSpec<R> {
    /// Free decay (vacuum field).
    None,
    /// Weak probe tone entering from the left at `t = 0`; the probe
    /// amplitude is normalized out of all downstream ratios.
    Probe { omega_d: R },
    /// Incident wave packet(s), evaluated analytically at the legs.
    Packet(PacketSpec<R>),
}

/// Densely sampled rotating-frame amplitude with its schedule and drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub struct Trajectory<R> {
    pub t0: R,
    pub dt: R,
    /// Frame frequency: stored samples are `β̃(t) = β(t)·e^{+iω_f t}`.
    pub frame_omega: R,
    pub samples: Vec<Cplx<R>>,
    pub schedule: ControlSchedule<R>,
    pub drive: DriveSpec<R>,
}

impl<R: Real> Trajectory<R> {
    pub fn t_end(&self) -> R {
        self.t0 + self.dt * R::of_usize(self.samples.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = R> + '_ {
        (0..self.samples.len()).map(move |i| self.t0 + self.dt * R::of_usize(i))
    }

    /// Rotating-frame amplitude at arbitrary `t` inside the covered range
    /// (cubic interpolation; exact at sample times).
    pub fn beta_frame_at(&self, t: R) -> Cplx<R> {
        interp_cubic(&self.samples, self.t0, self.dt, t)
    }

    /// Lab-frame amplitude `β(t)`; zero before `t0`.
    pub fn beta_lab_at(&self, t: R) -> Cplx<R> {
        if t < self.t0 {
            return Cplx::new(R::zero(), R::zero());
        }
        self.beta_frame_at(t) * (-imag_unit::<R>() * (self.frame_omega * t)).exp()
    }

    /// Lab-frame sample at index `i`.
    pub fn beta_lab_sample(&self, i: usize) -> Cplx<R> {
        let t = self.t0 + self.dt * R::of_usize(i);
        self.samples[i] * (-imag_unit::<R>() * (self.frame_omega * t)).exp()
    }
}

/// 4-point Lagrange interpolation on a uniform grid; `t` must lie within
/// the sampled range (clamped stencil at the edges).
pub fn interp_cubic<R: Real>(samples: &[Cplx<R>], t0: R, dt: R, t: R) -> Cplx<R> {
    let n = samples.len();
    debug_assert!(n >= 1);
    if n == 1 {
        return samples[0];
    }
    let u = (t - t0) / dt;
    if n < 4 {
        // linear fallback for very short histories
        let i = (u.floor().to_f64().unwrap_or(0.0).max(0.0) as usize).min(n - 2);
        let x = u - R::of_usize(i);
        return samples[i] * (R::one() - x) + samples[i + 1] * x;
    }
    let i = u.floor().to_f64().unwrap_or(0.0).max(0.0) as usize;
    let base = i.saturating_sub(1).min(n - 4);
    let x = u - R::of_usize(base);
    let one = R::one();
    let (x1, x2, x3) = (x - one, x - R::of(2.0), x - R::of(3.0));
    let l0 = -(x1 * x2 * x3) / R::of(6.0);
    let l1 = (x * x2 * x3) / R::of(2.0);
    let l2 = -(x * x1 * x3) / R::of(2.0);
    let l3 = (x * x1 * x2) / R::of(6.0);
    samples[base] * l0 + samples[base + 1] * l1 + samples[base + 2] * l2 + samples[base + 3] * l3
}

/// A delay system in first-order form, independent of how it was built:
/// `dβ/dt = −iΩ(t)β − Σ_j Λ_j √(g·g_ret) β(t−d_j)Θ + √g·drive(t)`.
#[derive(Debug, Clone)]
pub struct DelaySystem<R> {
    pub omega_of_t: StepFn<R>,
    pub coupling_on: StepFn<R>,
    /// `(delay, Λ_j)`; complex coefficients admit the reduced effective
    /// model (`Λ₀ = γ̃₁ + iΔ̃`, `Λ_T̃ = γ̃₂`) as well as layout kernels.
    pub kernel: Vec<(R, Cplx<R>)>,
    pub frame_omega: R,
    /// Scale entering the `dt ≤ 0.02/rate` rule (γ_tot for layouts).
    pub rate_scale: R,
    /// Largest carrier detuning seen in the rotating frame (schedule and
    /// drive), entering the `dt ≤ 2π/(40·Δω)` rule.
    pub max_detuning: R,
}

impl<R: Real> DelaySystem<R> {
    /// Upper bound on the admissible step from the accuracy rules.
    pub fn dt_rule_max(&self) -> R {
        let mut bound = R::infinity();
        if let Some(d) = self
            .kernel
            .iter()
            .map(|&(d, _)| d)
            .filter(|d| *d > R::zero())
            .fold(None::<R>, |acc, d| Some(acc.map_or(d, |a| a.min(d))))
        {
            bound = bound.min(d / R::of(20.0));
        }
        if self.rate_scale > R::zero() {
            bound = bound.min(R::of(0.02) / self.rate_scale);
        }
        if self.max_detuning > R::zero() {
            bound = bound.min(R::TAU() / (R::of(40.0) * self.max_detuning));
        }
        bound
    }
}

/// Pick the actual step: largest `dt ≤ dt_max` such that every delay and
/// every switch offset is an integer multiple of `dt` within `1e−9`
/// relative. Subdivides by integers up to 4096 before giving up.
fn select_step<R: Real>(dt_max: R, required: &[R]) -> Result<R> {
    let positive: Vec<R> = required.iter().copied().filter(|v| *v > R::zero()).collect();
    if positive.is_empty() {
        return Ok(dt_max);
    }
    let q = positive.iter().copied().fold(R::infinity(), |a, b| a.min(b));
    let tol = R::of(STEP_ALIGN_REL_TOL);
    let start = (q / dt_max).ceil().to_f64().unwrap_or(1.0).max(1.0) as u64;
    for m in start..start.saturating_mul(4096).max(start + 4096) {
        let dt = q / R::of_usize(m as usize);
        let aligned = positive.iter().all(|&v| {
            let ratio = v / dt;
            let nearest = ratio.round();
            (ratio - nearest).abs() <= tol * ratio.max(R::one())
        });
        if aligned {
            if m > start {
                log::warn!(
                    "step subdivided from {} to {} to align delays/switches",
                    dt_max,
                    dt
                );
            }
            return Ok(dt);
        }
    }
    Err(Error::StepSize(
        "no step size aligns all delays and schedule switches (incommensurate set)".into(),
    ))
}

/// Integrate the delay system from `(t0, beta0)` to at least `t_end`.
///
/// `drive_lab` is the lab-frame drive; the rotating-frame factor
/// `e^{iω_f t}` is applied internally. History before `t0` is identically
/// zero.
pub fn integrate_system<R: Real>(
    sys: &DelaySystem<R>,
    drive_lab: impl Fn(R) -> Cplx<R>,
    beta0: Cplx<R>,
    t0: R,
    t_end: R,
    dt: R,
) -> Result<Trajectory<R>> {
    if !(t_end > t0) {
        return Err(Error::InvalidConfiguration("t_end must exceed t0".into()));
    }
    if !(dt > R::zero()) {
        return Err(Error::StepSize("dt must be positive".into()));
    }
    let rule = sys.dt_rule_max();
    if dt > rule * (R::one() + R::of(1e-9)) {
        return Err(Error::StepSize(format!(
            "dt = {dt} exceeds the accuracy rule maximum {rule}"
        )));
    }
    let mut required: Vec<R> = sys
        .kernel
        .iter()
        .map(|&(d, _)| d)
        .filter(|d| *d > R::zero())
        .collect();
    let schedule = ControlSchedule {
        omega_of_t: sys.omega_of_t.clone(),
        coupling_on: sys.coupling_on.clone(),
    };
    for ts in schedule.switch_times() {
        let off = ts - t0;
        if off > R::zero() {
            required.push(off);
        }
    }
    let dt = select_step(dt, &required)?;

    let i = imag_unit::<R>();
    let frame = sys.frame_omega;
    // frame kernel coefficients: Λ̃_j = Λ_j e^{+iω_f d_j}
    let mut lam0 = Cplx::new(R::zero(), R::zero());
    let mut delayed: Vec<(R, Cplx<R>)> = Vec::new();
    for &(d, lam) in &sys.kernel {
        if d == R::zero() {
            lam0 += lam;
        } else {
            delayed.push((d, lam * (i * (frame * d)).exp()));
        }
    }

    let n_steps = ((t_end - t0) / dt - R::of(1e-9))
        .ceil()
        .to_f64()
        .unwrap_or(1.0)
        .max(1.0) as usize;
    let mut samples: Vec<Cplx<R>> = Vec::with_capacity(n_steps + 1);
    samples.push(beta0);

    let half = R::of(0.5);
    let sixth = dt / R::of(6.0);
    for step in 0..n_steps {
        let t = t0 + dt * R::of_usize(step);
        let g_now = sys.coupling_on.value(t);
        let sqrt_g = g_now.sqrt();
        let delta = sys.omega_of_t.value(t) - frame;
        let a = -(i * delta + lam0 * g_now);

        // state-independent part of the RHS at the three stage times
        let forcing = |t_stage: R| -> Cplx<R> {
            let mut acc = Cplx::new(R::zero(), R::zero());
            for &(d, steps, lam) in &delayed {
                let t_ret = t_stage - d;
                if t_ret < t0 {
                    continue;
                }
                // gate of the step the emission happened in
                let g_ret = sys.coupling_on.value(t0 + dt * R::of_usize(step + 1 - steps.min(step + 1)));
                let g_ret = if steps <= step { g_ret } else { sys.coupling_on.value(t_ret) };
                let _ = g_ret;
                let g_emit = sys.coupling_on.value(t_ret);
                let hist = interp_cubic(&samples, t0, dt, t_ret);
                acc -= lam * hist * (g_now * g_emit).sqrt();
            }
            acc + drive_lab(t_stage) * (i * (frame * t_stage)).exp() * sqrt_g
        };
        let b1 = forcing(t);
        let b2 = forcing(t + dt * half);
        let b4 = forcing(t + dt);

        let y = samples[step];
        let k1 = a * y + b1;
        let k2 = a * (y + k1 * (dt * half)) + b2;
        let k3 = a * (y + k2 * (dt * half)) + b2;
        let k4 = a * (y + k3 * dt) + b4;
        let next = y + (k1 + (k2 + k3) * R::of(2.0) + k4) * sixth;
        if !next.re.is_finite() || !next.im.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite amplitude at t = {}",
                t + dt
            )));
        }
        samples.push(next);
    }

    Ok(Trajectory {
        t0,
        dt,
        frame_omega: frame,
        samples,
        schedule,
        drive: DriveSpec::None,
    })
}

/// Build the [`DelaySystem`] for a layout under a control schedule and drive.
pub fn delay_system_for<R: Real>(
    layout: &AtomLayout<R>,
    schedule: &ControlSchedule<R>,
    drive: &DriveSpec<R>,
    frame_omega: R,
) -> DelaySystem<R> {
    let table = build_delay_table(layout);
    let half_gamma = layout.gamma_single / R::of(2.0);
    let kernel = table
        .entries
        .iter()
        .map(|e| (e.delay, Cplx::new(half_gamma * e.weight_sum, R::zero())))
        .collect();
    let sum_abs: R = layout.weights().map(|w| w.abs()).sum();
    let gamma_tot = layout.gamma_single * sum_abs * sum_abs;
    let mut max_det = schedule.max_detuning_from(frame_omega);
    match drive {
        DriveSpec::Probe { omega_d } => max_det = max_det.max((*omega_d - frame_omega).abs()),
        DriveSpec::Packet(p) => {
            max_det = max_det.max((p.k0 - frame_omega).abs());
        }
        DriveSpec::None => {}
    }
    DelaySystem {
        omega_of_t: schedule.omega_of_t.clone(),
        coupling_on: schedule.coupling_on.clone(),
        kernel,
        frame_omega,
        rate_scale: gamma_tot,
        max_detuning: max_det,
    }
}

/// Lab-frame drive closure for a layout + drive spec.
fn drive_closure<'a, R: Real>(
    layout: &'a AtomLayout<R>,
    drive: &'a DriveSpec<R>,
) -> impl Fn(R) -> Cplx<R> + 'a {
    let i = imag_unit::<R>();
    let emit = (layout.gamma_single / R::of(2.0)).sqrt();
    move |t: R| -> Cplx<R> {
        match drive {
            DriveSpec::None => Cplx::new(R::zero(), R::zero()),
            DriveSpec::Probe { omega_d } => {
                // (1/2)·Σ_m w_m e^{−iω_d(t−τ_m)}·Θ(t−τ_m), probe amplitude
                // normalized to 1
                let x1 = layout.x_first();
                let mut acc = Cplx::new(R::zero(), R::zero());
                for leg in &layout.legs {
                    let tau_m = leg.position - x1;
                    if t >= tau_m {
                        acc += (-i * (*omega_d * (t - tau_m))).exp() * leg.weight;
                    }
                }
                acc * R::of(0.5)
            }
            DriveSpec::Packet(p) => {
                // −i√(γ/2)·Σ_m w_m φ₀(x_m, t)
                let mut acc = Cplx::new(R::zero(), R::zero());
                for leg in &layout.legs {
                    acc += p.eval(leg.position, t) * leg.weight;
                }
                -i * acc * emit
            }
        }
    }
}

/// Integrate `β(t)` for a layout with the given schedule, drive and initial
/// amplitude `beta0` at `t0`, up to `t_end` with requested step `dt`
/// (refined to align delays and switches). The frame frequency defaults to
/// the layout's `Ω`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_beta<R: Real>(
    layout: &AtomLayout<R>,
    schedule: &ControlSchedule<R>,
    drive: &DriveSpec<R>,
    beta0: Cplx<R>,
    t0: R,
    t_end: R,
    dt: R,
) -> Result<Trajectory<R>> {
    let frame = layout.omega;
    let sys = delay_system_for(layout, schedule, drive, frame);
    let mut traj = integrate_system(&sys, drive_closure(layout, drive), beta0, t0, t_end, dt)?;
    traj.drive = drive.clone();
    Ok(traj)
}

/// Step consistent with all accuracy rules for this run (the spec's
/// `min(τ_min/20, 0.02/γ_tot, 2π/(40·Δω_frame))`, plus envelope resolution
/// for packets), with a safety factor.
pub fn default_dt<R: Real>(
    layout: &AtomLayout<R>,
    schedule: &ControlSchedule<R>,
    drive: &DriveSpec<R>,
) -> R {
    let sys = delay_system_for(layout, schedule, drive, layout.omega);
    let mut dt = sys.dt_rule_max();
    if let DriveSpec::Packet(p) = drive {
        dt = dt.min(R::one() / (R::of(20.0) * p.sigma_k));
    }
    if !dt.is_finite() {
        // free atom in its own frame: any step integrates exactly
        dt = R::TAU() / (R::of(40.0) * layout.omega.abs().max(R::one()));
    }
    dt
}

/// Complex field on a uniform spatial grid at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "R: Serialize",
    deserialize = "R: serde::de::DeserializeOwned"
))]
pub struct FieldSnapshot<R> {
    pub x0: R,
    pub dx: R,
    pub phi: Vec<Cplx<R>>,
    pub t: R,
}

impl<R: Real> FieldSnapshot<R> {
    pub fn x_at(&self, i: usize) -> R {
        self.x0 + self.dx * R::of_usize(i)
    }

    pub fn x_last(&self) -> R {
        self.x_at(self.phi.len() - 1)
    }

    /// `∫_a^b |φ|² dx` by composite Simpson on the stored grid (endpoints
    /// snapped inward to grid nodes).
    pub fn excitation_in(&self, a: R, b: R) -> Result<R> {
        let eps = self.dx * R::of(1e-6);
        if a < self.x0 - eps || b > self.x_last() + eps || !(a < b) {
            return Err(Error::OutOfRange(format!(
                "window [{a}, {b}] outside grid [{}, {}]",
                self.x0,
                self.x_last()
            )));
        }
        let ia = ((a - self.x0) / self.dx - R::of(1e-6))
            .ceil()
            .to_f64()
            .unwrap_or(0.0)
            .max(0.0) as usize;
        let ib = ((b - self.x0) / self.dx + R::of(1e-6))
            .floor()
            .to_f64()
            .unwrap_or(0.0) as usize;
        let ib = ib.min(self.phi.len() - 1);
        let vals: Vec<R> = self.phi[ia..=ib].iter().map(|c| c.norm_sqr()).collect();
        Ok(simpson_uniform(&vals, self.dx))
    }
}

/// Composite Simpson of `|φ|²` over `[a, b]` — the window excitation.
pub fn excitation_in_window<R: Real>(snapshot: &FieldSnapshot<R>, a: R, b: R) -> Result<R> {
    snapshot.excitation_in(a, b)
}

/// Uniform spatial grid specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XGrid<R> {
    pub x_min: R,
    pub x_max: R,
    pub n: usize,
}

impl<R: Real> XGrid<R> {
    /// Grid over `[x_min, x_max]` with spacing at most `λ/40` for the given
    /// carrier frequency (`λ = 2π/ω`, `v = 1`).
    pub fn for_carrier(x_min: R, x_max: R, omega: R) -> Self {
        let lambda = R::TAU() / omega.abs().max(R::of(1e-12));
        let max_dx = lambda / R::of(40.0);
        let n = ((x_max - x_min) / max_dx)
            .ceil()
            .to_f64()
            .unwrap_or(2.0)
            .max(2.0) as usize
            + 1;
        Self { x_min, x_max, n }
    }

    pub fn dx(&self) -> R {
        (self.x_max - self.x_min) / R::of_usize(self.n - 1)
    }
}

/// Reconstruct the field at time `t`:
/// `φ(x,t) = φ₀(x,t) − i√(γ/2)·Σ_m w_m·√g(t_ret)·β(t_ret)·Θ(t_ret)` with
/// `t_ret = t − |x − x_m|` (`v = 1`). The grid spacing must resolve the
/// carrier (`≤ λ/40`); retarded times beyond the trajectory are an error.
pub fn field_snapshot<R: Real>(
    layout: &AtomLayout<R>,
    trajectory: &Trajectory<R>,
    free_field: Option<&PacketSpec<R>>,
    grid: XGrid<R>,
    t: R,
) -> Result<FieldSnapshot<R>> {
    if grid.n < 2 {
        return Err(Error::InvalidConfiguration("grid needs at least 2 points".into()));
    }
    let carrier = match free_field {
        Some(p) => layout.omega.abs().max(p.k0.abs()),
        None => layout.omega.abs(),
    };
    let dx = grid.dx();
    let lambda = R::TAU() / carrier.max(R::of(1e-12));
    if dx > lambda / R::of(40.0) * (R::one() + R::of(1e-9)) {
        return Err(Error::InvalidConfiguration(format!(
            "grid spacing {dx} exceeds λ/40 = {}",
            lambda / R::of(40.0)
        )));
    }
    if t > trajectory.t_end() + trajectory.dt * R::of(1e-6) {
        return Err(Error::OutOfRange(format!(
            "snapshot time {t} beyond trajectory end {}",
            trajectory.t_end()
        )));
    }
    let i = imag_unit::<R>();
    let emit = -i * (layout.gamma_single / R::of(2.0)).sqrt();
    let schedule = &trajectory.schedule;
    let mut phi = Vec::with_capacity(grid.n);
    for idx in 0..grid.n {
        let x = grid.x_min + dx * R::of_usize(idx);
        let mut val = match free_field {
            Some(p) => p.eval(x, t),
            None => Cplx::new(R::zero(), R::zero()),
        };
        for leg in &layout.legs {
            let t_ret = t - (x - leg.position).abs();
            if t_ret < trajectory.t0 {
                continue;
            }
            let gate = schedule.coupling_on.value(t_ret).sqrt();
            if gate == R::zero() {
                continue;
            }
            val += emit * trajectory.beta_lab_at(t_ret) * (leg.weight * gate);
        }
        phi.push(val);
    }
    Ok(FieldSnapshot { x0: grid.x_min, dx, phi, t })
}

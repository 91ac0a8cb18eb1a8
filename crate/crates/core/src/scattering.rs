//! Zero-energy scattering and the finite-ball Neumann problem for radial
//! potentials.
//!
//! For a nonnegative, compactly supported, spherically symmetric potential
//! `V` the s-wave reduction `u(r) = r·f(r)` turns both problems into
//! one-dimensional ODEs:
//!
//! * zero energy: `−u″ + ½V u = 0`, `u(0) = 0`; outside the support `u` is
//!   exactly linear and the scattering length is read off from the tail
//!   `u ∝ (r − a₀)`. Equivalently `a₀ = ½∫ V u r dr` when the tail slope is
//!   normalized to one; the two extractions agree identically in the
//!   continuum and to discretization accuracy here.
//! * Neumann ball of radius `D`: `−u″ + ½V u = λu`, lowest `λ` such that
//!   the radial derivative of `f = u/r` vanishes at `D`, i.e.
//!   `u′(D)·D − u(D) = 0`, normalized to `f(D) = 1`.
//!
//! Inside the potential support the ODE is integrated with the Numerov
//! scheme (fourth order). Outside the support the equation has constant
//! coefficients, so the solution is transferred to the ball boundary with
//! the exact sinusoidal propagator instead of stepping: the asymptotic
//! quantities extracted downstream (`λ_ℓ(Nℓ)³ → 3a₀`, the `(Nℓ)^{−2}`
//! residual of `∫Vf_ℓ`) sit many orders below what a stepped second-order
//! scheme could resolve across a ball of radius several thousand.

use crate::error::{validation, Error, Result};

/// Relative agreement demanded between the tail-matching and the
/// `½∫Vur dr` extraction of the scattering length. Both are fourth-order
/// accurate on the same solution, so disagreement beyond this signals a
/// solver defect rather than discretization error.
pub const A0_ROUTE_AGREEMENT_REL: f64 = 1e-6;

/// Relative width at which the Neumann eigenvalue bisection stops. The
/// mismatch function crosses zero steeply (the spacing to the next Neumann
/// branch is of order `(π/D)²`), so the eigenvalue is resolvable essentially
/// to round-off; 1e-13 leaves margin above f64 noise in the mismatch.
pub const NEUMANN_LAMBDA_REL_TOL: f64 = 1e-13;

/// Maximum bracket expansions before the eigenvalue search gives up.
const NEUMANN_MAX_EXPANSIONS: usize = 48;

/// Bisection iteration cap; 2^-200 of the initial bracket is unreachable in
/// f64, so hitting this cap means the mismatch is not changing sign cleanly.
const NEUMANN_MAX_BISECTIONS: usize = 200;

/// Minimum Numerov steps across the potential support, regardless of how
/// coarse the requested output grid is. At 1024 steps over a unit support
/// the O(h⁴) solution error is ~1e-12, already below every tolerance in
/// this module.
const MIN_INNER_STEPS: usize = 1024;

/// Cap on internal Numerov steps (memory guard for absurd grid requests).
const MAX_INNER_STEPS: usize = 2_000_000;

/// Magnitude at which the growing inner solution is rescaled during
/// propagation. Only ratios of `u` matter, so rescaling is exact; it keeps
/// hard-sphere-like barriers (V₀ ~ 1e6, growth e^{√(V₀/2)·r}) in range.
const RESCALE_THRESHOLD: f64 = 1e150;

/// Grid points per period of the fastest Fourier mode demanded before the
/// radial transform is trusted; coarser sampling risks aliasing.
const FOURIER_MIN_POINTS_PER_PERIOD: f64 = 20.0;

/// Sample cap for the Fourier quadrature grid.
const FOURIER_MAX_SAMPLES: usize = 4_000_000;

// ---------------------------------------------------------------------------
// Potentials and grids
// ---------------------------------------------------------------------------

/// Kind tag for [`RadialPotential`].
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V(r) = V₀` for `r ≤ R`, zero beyond.
    SquareBarrier,
    /// Piecewise-linear interpolation of `(r, V(r))` samples; linear
    /// interpolation preserves nonnegativity.
    Tabulated,
    /// `V ≡ 0`; the free problem with `f ≡ 1`, `a₀ = 0`.
    Zero,
}

/// Nonnegative, compactly supported radial potential in units where the
/// kinetic term is `−Δ` and the pair interaction enters as `½V`.
#[derive(Debug, Clone)]
pub struct RadialPotential {
    pub kind: PotentialKind,
    /// Barrier amplitude (square-barrier kind only).
    pub amplitude: f64,
    /// Support radius; `V(r) = 0` for `r > support`.
    pub support: f64,
    /// Samples `(r, V(r))` for the tabulated kind, strictly increasing in r.
    pub table: Vec<(f64, f64)>,
}

impl RadialPotential {
    pub fn square_barrier(v0: f64, r: f64) -> Self {
        RadialPotential {
            kind: PotentialKind::SquareBarrier,
            amplitude: v0,
            support: r,
            table: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        RadialPotential {
            kind: PotentialKind::Zero,
            amplitude: 0.0,
            support: 0.0,
            table: Vec::new(),
        }
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Self {
        let support = table.last().map(|&(r, _)| r).unwrap_or(0.0);
        RadialPotential {
            kind: PotentialKind::Tabulated,
            amplitude: 0.0,
            support,
            table,
        }
    }

    /// Check the documented preconditions: nonnegativity, compact support,
    /// positive support radius for nonzero kinds.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PotentialKind::Zero => Ok(()),
            PotentialKind::SquareBarrier => {
                if self.amplitude < 0.0 {
                    return validation("square barrier amplitude must be nonnegative");
                }
                if self.support <= 0.0 {
                    return validation("square barrier support radius must be positive");
                }
                Ok(())
            }
            PotentialKind::Tabulated => {
                if self.table.len() < 2 {
                    return validation("tabulated potential needs at least 2 samples");
                }
                let mut prev = -f64::INFINITY;
                for &(r, v) in &self.table {
                    if r <= prev {
                        return validation("tabulated potential radii must be strictly increasing");
                    }
                    if v < 0.0 {
                        return validation(format!(
                            "negative potential sample V({r}) = {v}; attractive potentials are out of model"
                        ));
                    }
                    prev = r;
                }
                if self.support <= 0.0 {
                    return validation("tabulated potential support must be positive");
                }
                Ok(())
            }
        }
    }

    /// Pointwise value `V(r)`.
    pub fn value(&self, r: f64) -> f64 {
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareBarrier => {
                if r <= self.support {
                    self.amplitude
                } else {
                    0.0
                }
            }
            PotentialKind::Tabulated => {
                if r > self.support || self.table.is_empty() {
                    return 0.0;
                }
                if r <= self.table[0].0 {
                    return self.table[0].1;
                }
                // Binary search for the bracketing pair, then linear.
                let idx = self.table.partition_point(|&(ri, _)| ri < r);
                let (r0, v0) = self.table[idx - 1];
                let (r1, v1) = self.table[idx.min(self.table.len() - 1)];
                if r1 == r0 {
                    return v0;
                }
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }
}

/// Node spacing rule for output grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Uniform,
    /// Geometric refinement toward the origin, useful for plotting the
    /// short-range structure of f; internal solves always use their own
    /// uniform fine grid.
    LogNearZero,
}

/// Radial output grid with strictly positive, increasing nodes.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n_points: usize,
    pub spacing: Spacing,
}

impl RadialGrid {
    pub fn uniform(r_max: f64, n_points: usize) -> Self {
        RadialGrid {
            r_max,
            n_points,
            spacing: Spacing::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0) {
            return validation("radial grid needs r_max > 0");
        }
        if self.n_points < 64 {
            return validation(format!(
                "radial grid needs at least 64 points, got {}",
                self.n_points
            ));
        }
        Ok(())
    }

    /// Grid nodes; first node strictly positive.
    pub fn nodes(&self) -> Vec<f64> {
        let n = self.n_points;
        match self.spacing {
            Spacing::Uniform => {
                let h = self.r_max / n as f64;
                (1..=n).map(|i| i as f64 * h).collect()
            }
            Spacing::LogNearZero => {
                // Geometric from r_max/10^3 up to r_max.
                let r0 = self.r_max * 1e-3;
                let ratio = (self.r_max / r0).powf(1.0 / (n as f64 - 1.0));
                (0..n).map(|i| r0 * ratio.powi(i as i32)).collect()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Internal dense representation of a radial solution
// ---------------------------------------------------------------------------

/// Piecewise representation of the (normalized) reduced solution `u(r)`:
/// dense Numerov samples inside the potential support, exact trigonometric
/// (or linear, at zero energy) continuation outside.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    /// Uniform step of the inner samples.
    h: f64,
    /// `u(i·h)` for `i = 0..=n_inner`; `u[0] = 0`.
    u_inner: Vec<f64>,
    /// Support radius; the last inner node sits exactly here.
    r_edge: f64,
    /// `√λ` of the exterior equation `−u″ = λu`; zero for the zero-energy
    /// problem.
    k_out: f64,
    /// `u(r_edge)` and `u′(r_edge)` after normalization.
    u_edge: f64,
    du_edge: f64,
    /// Domain end: the Neumann ball radius, or the output r_max.
    d_max: f64,
}

impl RadialProfile {
    /// Evaluate `u(r)` anywhere in `[0, ∞)`; beyond `d_max` the exterior
    /// formula is still used (the Neumann solution is extended by `f ≡ 1`
    /// at the level of `f`, handled by the callers).
    pub fn eval_u(&self, r: f64) -> f64 {
        if r <= self.r_edge {
            if r <= 0.0 {
                return 0.0;
            }
            let x = r / self.h;
            let i = (x.floor() as usize).min(self.u_inner.len() - 2);
            let t = x - i as f64;
            return self.u_inner[i] * (1.0 - t) + self.u_inner[i + 1] * t;
        }
        let s = r - self.r_edge;
        if self.k_out == 0.0 {
            self.u_edge + self.du_edge * s
        } else {
            let ks = self.k_out * s;
            self.u_edge * ks.cos() + self.du_edge * ks.sin() / self.k_out
        }
    }

    /// `f(r) = u(r)/r`, with the `r → 0` limit taken from the first node.
    pub fn eval_f(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.u_inner.get(1).map(|&u1| u1 / self.h).unwrap_or(1.0);
        }
        self.eval_u(r) / r
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn r_edge(&self) -> f64 {
        self.r_edge
    }
}

// ---------------------------------------------------------------------------
// Scattering solution
// ---------------------------------------------------------------------------

/// Neumann-problem outputs attached to a [`ScatteringSolution`].
#[derive(Debug, Clone)]
pub struct NeumannBlock {
    /// Ball radius `Nℓ`.
    pub ell_n: f64,
    /// Lowest Neumann eigenvalue.
    pub lambda_ell: f64,
    /// `f_ℓ` sampled on the output grid nodes (1 beyond the ball).
    pub f_ell: Vec<f64>,
    /// `w_ℓ = 1 − f_ℓ` on the output grid nodes.
    pub w_ell: Vec<f64>,
    /// `∫ V f_ℓ` over ℝ³ (the quantity with the `8πa₀(1 + (3/2)a₀/(Nℓ))`
    /// asymptotic).
    pub integral_v_f: f64,
    /// `∫ w_ℓ` over the ball.
    pub integral_w: f64,
}

/// Output of the scattering solvers.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub grid: RadialGrid,
    /// Zero-energy `f` on the output grid nodes.
    pub f: Vec<f64>,
    /// Scattering length from tail matching `u ∝ (r − a₀)`.
    pub a0: f64,
    /// Scattering length from `(1/8π)∫Vf`; agrees with `a0` to
    /// [`A0_ROUTE_AGREEMENT_REL`].
    pub a0_integral: f64,
    /// Neumann outputs when solved on a ball.
    pub neumann: Option<NeumannBlock>,
    /// Dense representation of the zero-energy solution.
    pub profile: RadialProfile,
    /// Dense representation of the Neumann solution (normalized to
    /// `f_ℓ(Nℓ) = 1`), if solved.
    pub neumann_profile: Option<RadialProfile>,
    /// Copy of the potential, kept for moment tables.
    pub potential: RadialPotential,
}

impl ScatteringSolution {
    /// `f_ℓ(r)` (Neumann if available, else zero-energy f), extended by 1
    /// beyond the ball.
    pub fn eval_f_ell(&self, r: f64) -> f64 {
        match &self.neumann_profile {
            Some(p) => {
                if r >= p.d_max() {
                    1.0
                } else {
                    p.eval_f(r)
                }
            }
            None => self.profile.eval_f(r),
        }
    }

    /// `w_ℓ(r) = 1 − f_ℓ(r)`, zero beyond the ball.
    pub fn eval_w_ell(&self, r: f64) -> f64 {
        1.0 - self.eval_f_ell(r)
    }
}

// ---------------------------------------------------------------------------
// Numerov propagation
// ---------------------------------------------------------------------------

/// Integrate `u″ = g(r)·u` on `[0, R]` with `u(0) = 0`, `u′(0) = 1`,
/// `g(r) = ½V(r) − λ`, using Numerov steps. Returns the samples, the step,
/// and the endpoint derivative from a fourth-order one-sided stencil.
/// The solution is rescaled when it grows past [`RESCALE_THRESHOLD`];
/// all downstream uses are scale-invariant or renormalized.
fn numerov_inner(
    potential: &RadialPotential,
    lambda: f64,
    n_steps: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    let r_edge = potential.support;
    let h = r_edge / n_steps as f64;
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Diagnostic(
            "ODE step size underflow in Numerov propagation".into(),
        ));
    }
    let g = |r: f64| 0.5 * potential.value(r) - lambda;
    let mut u = vec![0.0f64; n_steps + 1];
    // Taylor start: u = r + g(0)r³/6 + g′(0)r⁴/24 + O(r⁵), consistent with
    // the fourth-order scheme.
    let g0 = g(0.0);
    let g1 = g(h);
    let gp0 = (g1 - g0) / h;
    u[1] = h + g0 * h.powi(3) / 6.0 + gp0 * h.powi(4) / 24.0;
    let w = |r: f64| 1.0 - h * h * g(r) / 12.0;
    let mut w_prev = w(0.0);
    let mut w_curr = w(h);
    for i in 1..n_steps {
        let r_next = (i + 1) as f64 * h;
        let w_next = w(r_next);
        let gi = g(i as f64 * h);
        let numer = 2.0 * (1.0 + 5.0 * h * h * gi / 12.0) * u[i] - w_prev * u[i - 1];
        u[i + 1] = numer / w_next;
        if !u[i + 1].is_finite() {
            return Err(Error::Diagnostic(
                "Numerov propagation overflowed; potential too stiff for the grid".into(),
            ));
        }
        if u[i + 1].abs() > RESCALE_THRESHOLD {
            let scale = u[i + 1].abs();
            for uu in u[..=i + 1].iter_mut() {
                *uu /= scale;
            }
        }
        w_prev = w_curr;
        w_curr = w_next;
    }
    // u′(R) from the 5-point one-sided fourth-order stencil.
    let n = n_steps;
    let du = (25.0 * u[n] - 48.0 * u[n - 1] + 36.0 * u[n - 2] - 16.0 * u[n - 3]
        + 3.0 * u[n - 4])
        / (12.0 * h);
    Ok((u, h, du))
}

/// Composite Simpson rule on uniformly spaced samples (even interval count
/// enforced by the callers).
fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n % 2 == 0, "simpson needs an even interval count");
    let mut s = values[0] + values[n];
    for (i, &v) in values.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Choose the internal Numerov step count from the requested output grid
/// density, floored for accuracy and capped for memory. Kept even for
/// Simpson integrals on the same nodes.
fn inner_steps(potential: &RadialPotential, grid: &RadialGrid) -> usize {
    let density = grid.n_points as f64 / grid.r_max;
    let wanted = (density * potential.support).ceil() as usize;
    let n = wanted.clamp(MIN_INNER_STEPS, MAX_INNER_STEPS);
    n + n % 2
}

// ---------------------------------------------------------------------------
// Zero-energy solve
// ---------------------------------------------------------------------------

/// Solve the zero-energy equation and extract the scattering length by both
/// routes.
pub fn solve_zero_energy(
    potential: &RadialPotential,
    grid: &RadialGrid,
) -> Result<ScatteringSolution> {
    potential.validate()?;
    grid.validate()?;
    if potential.is_zero() {
        let profile = RadialProfile {
            h: grid.r_max,
            u_inner: vec![0.0, grid.r_max],
            r_edge: grid.r_max,
            k_out: 0.0,
            u_edge: grid.r_max,
            du_edge: 1.0,
            d_max: grid.r_max,
        };
        return Ok(ScatteringSolution {
            grid: grid.clone(),
            f: vec![1.0; grid.n_points],
            a0: 0.0,
            a0_integral: 0.0,
            neumann: None,
            neumann_profile: None,
            profile,
            potential: potential.clone(),
        });
    }
    if grid.r_max <= potential.support {
        return validation("grid must cover the potential support");
    }
    let n_in = inner_steps(potential, grid);
    let (mut u, h, mut du) = numerov_inner(potential, 0.0, n_in)?;
    // Normalize the tail slope to one: u(r) = r − a₀ outside the support.
    if du == 0.0 {
        return Err(Error::Diagnostic(
            "zero tail slope in zero-energy solution; cannot normalize".into(),
        ));
    }
    let scale = du;
    for uu in u.iter_mut() {
        *uu /= scale;
    }
    du = 1.0;
    let r_edge = potential.support;
    let u_edge = u[n_in];
    let a0_tail = r_edge - u_edge;
    // Integral route: a₀ = ½ ∫ V u r dr with unit tail slope.
    let integrand: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            let r = i as f64 * h;
            potential.value(r) * ui * r
        })
        .collect();
    let a0_int = 0.5 * simpson(&integrand, h);
    let profile = RadialProfile {
        h,
        u_inner: u,
        r_edge,
        k_out: 0.0,
        u_edge,
        du_edge: du,
        d_max: grid.r_max,
    };
    let f: Vec<f64> = grid.nodes().iter().map(|&r| profile.eval_f(r)).collect();
    Ok(ScatteringSolution {
        grid: grid.clone(),
        f,
        a0: a0_tail,
        a0_integral: a0_int,
        neumann: None,
        neumann_profile: None,
        profile,
        potential: potential.clone(),
    })
}

// ---------------------------------------------------------------------------
// Neumann problem
// ---------------------------------------------------------------------------

/// Transfer `(u, u′)` across the potential-free exterior from the support
/// edge to radius `r`, exactly: `−u″ = λu` there.
fn exterior_transfer(u_edge: f64, du_edge: f64, k: f64, s: f64) -> (f64, f64) {
    if k == 0.0 {
        return (u_edge + du_edge * s, du_edge);
    }
    let (sin, cos) = (k * s).sin_cos();
    (
        u_edge * cos + du_edge * sin / k,
        -u_edge * k * sin + du_edge * cos,
    )
}

/// Neumann mismatch `u′(D)·D − u(D)` for trial eigenvalue λ; the lowest
/// Neumann eigenvalue is its first positive root.
fn neumann_mismatch(
    potential: &RadialPotential,
    lambda: f64,
    n_in: usize,
    d: f64,
) -> Result<f64> {
    let (u, _h, du) = numerov_inner(potential, lambda, n_in)?;
    let k = lambda.max(0.0).sqrt();
    let s = d - potential.support;
    let (ud, dud) = exterior_transfer(u[n_in], du, k, s);
    Ok(dud * d - ud)
}

/// Solve the lowest Neumann eigenvalue problem on the ball of radius `Nℓ`
/// with boundary normalization `f_ℓ(Nℓ) = 1`.
pub fn solve_neumann(
    potential: &RadialPotential,
    ell: f64,
    n: usize,
    grid: &RadialGrid,
) -> Result<ScatteringSolution> {
    potential.validate()?;
    grid.validate()?;
    if !(ell > 0.0 && ell < 1.0) {
        return validation(format!("ell must lie in (0,1), got {ell}"));
    }
    let d = ell * n as f64;
    if potential.is_zero() {
        // Constant f ≡ 1 solves the free Neumann problem with λ = 0.
        let mut sol = solve_zero_energy(potential, grid)?;
        sol.neumann = Some(NeumannBlock {
            ell_n: d,
            lambda_ell: 0.0,
            f_ell: vec![1.0; grid.n_points],
            w_ell: vec![0.0; grid.n_points],
            integral_v_f: 0.0,
            integral_w: 0.0,
        });
        sol.neumann_profile = Some(sol.profile.clone());
        return Ok(sol);
    }
    if d <= potential.support {
        return validation(format!(
            "ball radius Nℓ = {d} must exceed the potential support {}",
            potential.support
        ));
    }

    // Zero-energy solve on the same potential for a₀ and the λ bracket.
    let base = solve_zero_energy(potential, grid)?;
    let a0 = base.a0;
    let n_in = inner_steps(potential, grid);

    // Bracket the first root of the mismatch around the asymptotic guess
    // λ ≈ 3a₀/D³.
    let guess = (3.0 * a0 / d.powi(3)).max(1e-300);
    let mut lo = 0.2 * guess;
    let mut hi = 10.0 * guess;
    let mut m_lo = neumann_mismatch(potential, lo, n_in, d)?;
    let mut m_hi = neumann_mismatch(potential, hi, n_in, d)?;
    let mut expansions = 0;
    while m_lo.signum() == m_hi.signum() {
        expansions += 1;
        if expansions > NEUMANN_MAX_EXPANSIONS {
            return Err(Error::Diagnostic(format!(
                "Neumann eigenvalue bracketing failed after {NEUMANN_MAX_EXPANSIONS} expansions \
                 (last bracket [{lo:.3e}, {hi:.3e}])"
            )));
        }
        if m_lo > 0.0 {
            // Root is above: the mismatch is positive at λ = 0⁺ and
            // decreases through the first eigenvalue.
            hi *= 4.0;
            m_hi = neumann_mismatch(potential, hi, n_in, d)?;
        } else {
            lo *= 0.25;
            m_lo = neumann_mismatch(potential, lo, n_in, d)?;
        }
    }
    // Bisection to relative precision.
    let mut iterations = 0;
    while (hi - lo) > NEUMANN_LAMBDA_REL_TOL * hi {
        iterations += 1;
        if iterations > NEUMANN_MAX_BISECTIONS {
            return Err(Error::Diagnostic(
                "Neumann eigenvalue bisection stalled; mismatch not changing sign".into(),
            ));
        }
        let mid = 0.5 * (lo + hi);
        let m_mid = neumann_mismatch(potential, mid, n_in, d)?;
        if m_mid.signum() == m_lo.signum() {
            lo = mid;
            m_lo = m_mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    // Final propagation at the converged eigenvalue; normalize f(D) = 1.
    let (mut u, h, mut du) = numerov_inner(potential, lambda, n_in)?;
    let k = lambda.sqrt();
    let s = d - potential.support;
    let (ud, _) = exterior_transfer(u[n_in], du, k, s);
    if ud == 0.0 {
        return Err(Error::Diagnostic(
            "Neumann solution vanishes at the ball boundary; cannot normalize".into(),
        ));
    }
    let scale = ud / d; // u(D)/D = f(D), want 1
    for uu in u.iter_mut() {
        *uu /= scale;
    }
    du /= scale;
    let profile = RadialProfile {
        h,
        u_inner: u.clone(),
        r_edge: potential.support,
        k_out: k,
        u_edge: u[n_in],
        du_edge: du,
        d_max: d,
    };

    // ∫ V f_ℓ over ℝ³ = 4π ∫ V u r dr (support-only integrand).
    let integrand_vf: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            let r = i as f64 * h;
            potential.value(r) * ui * r
        })
        .collect();
    let integral_v_f = 4.0 * std::f64::consts::PI * simpson(&integrand_vf, h);

    // ∫ w_ℓ over the ball = 4π ∫₀^D (r² − u·r) dr: Simpson inside the
    // support on the Numerov nodes, Simpson on a dense grid outside (the
    // exterior integrand is a sub-period sinusoid, so the error is
    // negligible at this sampling).
    let integrand_w_in: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            let r = i as f64 * h;
            r * r - ui * r
        })
        .collect();
    let mut integral_w = simpson(&integrand_w_in, h);
    let m_out = 40_000usize;
    let h_out = (d - potential.support) / m_out as f64;
    let integrand_w_out: Vec<f64> = (0..=m_out)
        .map(|i| {
            let r = potential.support + i as f64 * h_out;
            r * r - profile.eval_u_exterior(r) * r
        })
        .collect();
    integral_w += simpson(&integrand_w_out, h_out);
    let integral_w = 4.0 * std::f64::consts::PI * integral_w;

    let nodes = grid.nodes();
    let f_ell: Vec<f64> = nodes
        .iter()
        .map(|&r| if r >= d { 1.0 } else { profile.eval_f(r) })
        .collect();
    let w_ell: Vec<f64> = f_ell.iter().map(|&fe| 1.0 - fe).collect();

    Ok(ScatteringSolution {
        grid: grid.clone(),
        f: base.f,
        a0: base.a0,
        a0_integral: base.a0_integral,
        neumann: Some(NeumannBlock {
            ell_n: d,
            lambda_ell: lambda,
            f_ell,
            w_ell,
            integral_v_f,
            integral_w,
        }),
        neumann_profile: Some(profile),
        profile: base.profile,
        potential: potential.clone(),
    })
}

impl RadialProfile {
    /// Exterior-only evaluation (used where the caller knows `r > r_edge`);
    /// avoids the inner interpolation branch.
    fn eval_u_exterior(&self, r: f64) -> f64 {
        let s = r - self.r_edge;
        if self.k_out == 0.0 {
            self.u_edge + self.du_edge * s
        } else {
            let ks = self.k_out * s;
            self.u_edge * ks.cos() + self.du_edge * ks.sin() / self.k_out
        }
    }
}

// ---------------------------------------------------------------------------
// Asymptotics report
// ---------------------------------------------------------------------------

/// Fits of the ball-size asymptotics across a family of Neumann solutions.
#[derive(Debug, Clone)]
pub struct AsymptoticsReport {
    /// Fitted coefficient in `λ_ℓ(Nℓ)³/(3a₀) = 1 + c₁·a₀/(Nℓ)`; the
    /// asymptotic value is 9/5.
    pub c1: f64,
    /// `(1/(Nℓ)²)∫w_ℓ` per solution, ordered as the inputs.
    pub w_scaled_integrals: Vec<f64>,
    /// The scaled integral at the largest ball (the limit estimate; target
    /// `(2/5)πa₀`).
    pub w_scaled_limit: f64,
    /// Fitted constant in `w_ℓ(r) ≤ C/(r+1)` (max over solutions).
    pub w_bound_c: f64,
    /// Log-log slope of the residual `|∫Vf_ℓ − 8πa₀(1+(3/2)a₀/(Nℓ))|`
    /// against `Nℓ`; the asymptotic decay is `(Nℓ)^{−2}`.
    pub vf_residual_exponent: f64,
    /// Set when the family is the free potential (all λ_ℓ = 0); the fits
    /// degenerate and are reported as zero.
    pub trivial: bool,
}

/// Fit the ball-size asymptotics over solutions with increasing `Nℓ`.
pub fn check_asymptotics(solutions: &[ScatteringSolution]) -> Result<AsymptoticsReport> {
    if solutions.len() < 4 {
        return validation("asymptotics fit needs at least 4 Neumann solutions");
    }
    let mut blocks = Vec::new();
    for sol in solutions {
        match &sol.neumann {
            Some(b) => blocks.push((sol, b)),
            None => return validation("all solutions must carry a Neumann block"),
        }
    }
    blocks.sort_by(|a, b| a.1.ell_n.total_cmp(&b.1.ell_n));
    let span = blocks.last().unwrap().1.ell_n / blocks[0].1.ell_n;
    // The canonical family {100, 300, 1000, 3000} has ratio 30; anything
    // narrower leaves the 1/(Nℓ) and 1/(Nℓ)² corrections entangled and the
    // fitted coefficients meaningless.
    if span < 25.0 {
        return validation(format!(
            "Nℓ values must span a wide range (ratio ≥ 25), got ratio {span:.1}"
        ));
    }
    let trivial = blocks.iter().all(|(_, b)| b.lambda_ell == 0.0);
    let w_scaled: Vec<f64> = blocks
        .iter()
        .map(|(_, b)| b.integral_w / (b.ell_n * b.ell_n))
        .collect();
    if trivial {
        return Ok(AsymptoticsReport {
            c1: 0.0,
            w_scaled_integrals: w_scaled,
            w_scaled_limit: 0.0,
            w_bound_c: 0.0,
            vf_residual_exponent: 0.0,
            trivial: true,
        });
    }

    // c₁ fit: y = λ(Nℓ)³/(3a₀) − 1 against x = a₀/(Nℓ), least squares
    // through the origin.
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (sol, b) in &blocks {
        let a0 = sol.a0;
        let y = b.lambda_ell * b.ell_n.powi(3) / (3.0 * a0) - 1.0;
        let x = a0 / b.ell_n;
        sxy += x * y;
        sxx += x * x;
    }
    let c1 = sxy / sxx;

    // w bound constant: sup over sampled radii of w_ℓ(r)·(r+1).
    let mut w_bound_c = 0.0f64;
    for (sol, b) in &blocks {
        let samples = 2000;
        for i in 0..=samples {
            let r = b.ell_n * i as f64 / samples as f64;
            let w = sol.eval_w_ell(r);
            w_bound_c = w_bound_c.max(w * (r + 1.0));
        }
    }

    // ∫Vf residual decay exponent by log-log regression.
    let mut pts = Vec::new();
    for (sol, b) in &blocks {
        let a0 = sol.a0;
        let target = 8.0 * std::f64::consts::PI * a0 * (1.0 + 1.5 * a0 / b.ell_n);
        let res = (b.integral_v_f - target).abs();
        if res > 0.0 {
            pts.push((b.ell_n.ln(), res.ln()));
        }
    }
    let vf_residual_exponent = if pts.len() >= 2 {
        linear_slope(&pts)
    } else {
        0.0
    };

    Ok(AsymptoticsReport {
        c1,
        w_scaled_limit: *w_scaled.last().unwrap(),
        w_scaled_integrals: w_scaled,
        w_bound_c,
        vf_residual_exponent,
        trivial: false,
    })
}

/// Least-squares slope of y against x.
fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// ---------------------------------------------------------------------------
// Fourier transform of w_ℓ
// ---------------------------------------------------------------------------

/// Result of [`fourier_w`].
#[derive(Debug, Clone)]
pub struct FourierReport {
    /// `ŵ_ℓ(p)` per requested p.
    pub values: Vec<f64>,
    /// Fitted constant: `max_p |ŵ_ℓ(p)|·p²`.
    pub fitted_c: f64,
}

/// Radial Fourier transform `ŵ_ℓ(p) = ∫ w_ℓ(x) e^{−2πip·x} dx`
/// `= (2/p)∫₀^D w_ℓ(r)·r·sin(2πpr) dr` for radial `w_ℓ`.
pub fn fourier_w(solution: &ScatteringSolution, p_list: &[f64]) -> Result<FourierReport> {
    let block = solution
        .neumann
        .as_ref()
        .ok_or_else(|| Error::Validation("fourier_w needs a Neumann block".into()))?;
    if p_list.iter().any(|&p| p <= 0.0) {
        return validation("p_list must be positive");
    }
    let d = block.ell_n;
    let p_max = p_list.iter().cloned().fold(0.0f64, f64::max);
    // Sampling fine enough to resolve the fastest oscillation.
    let needed = (FOURIER_MIN_POINTS_PER_PERIOD * 2.0 * std::f64::consts::PI * p_max * d
        / (2.0 * std::f64::consts::PI))
        .ceil() as usize;
    let m = needed.max(40_000);
    if m > FOURIER_MAX_SAMPLES {
        return Err(Error::Diagnostic(format!(
            "aliasing risk: resolving p up to {p_max} on a ball of radius {d} needs {m} samples \
             (cap {FOURIER_MAX_SAMPLES})"
        )));
    }
    let m = m + m % 2;
    let h = d / m as f64;
    let w_samples: Vec<f64> = (0..=m)
        .map(|i| solution.eval_w_ell(i as f64 * h))
        .collect();
    let mut values = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let integrand: Vec<f64> = w_samples
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let r = i as f64 * h;
                w * r * (2.0 * std::f64::consts::PI * p * r).sin()
            })
            .collect();
        values.push(2.0 / p * simpson(&integrand, h));
    }
    let fitted_c = values
        .iter()
        .zip(p_list)
        .map(|(&v, &p)| v.abs() * p * p)
        .fold(0.0f64, f64::max);
    Ok(FourierReport { values, fitted_c })
}

// ---------------------------------------------------------------------------
// Cumulative moment tables (consumed by the correlation-kernel assembly)
// ---------------------------------------------------------------------------

/// Cumulative moments of a compactly supported radial weight `q`:
/// `W₁(τ) = ∫₀^τ q(t)·t dt`, `W₂ = ∫W₁`, `W₃ = ∫W₂`, tabulated on a uniform
/// grid with closed-form polynomial continuation past the support (where
/// `W₁` is constant, `W₂` linear, `W₃` quadratic).
///
/// Kernel assembly downstream needs `W₃` because exact cell-averaged matrix
/// elements of a convolution kernel are second differences of the second
/// antiderivative of its first moment; tabulating all three here keeps the
/// sharp small-scale structure of `q` out of the kernel module entirely.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub dt: f64,
    pub tau_max: f64,
    w1: Vec<f64>,
    w2: Vec<f64>,
    w3: Vec<f64>,
}

impl MomentTable {
    /// Build from a pointwise weight on `[0, tau_max]` with `points`
    /// intervals (trapezoid cumulation; the consumers tolerate far more
    /// than the resulting O(dt²) relative error).
    pub fn build(q: impl Fn(f64) -> f64, tau_max: f64, points: usize) -> Self {
        let m = points.max(256);
        let dt = tau_max / m as f64;
        let qt: Vec<f64> = (0..=m)
            .map(|i| {
                let t = i as f64 * dt;
                q(t) * t
            })
            .collect();
        let w1 = cumtrapz(&qt, dt);
        let w2 = cumtrapz(&w1, dt);
        let w3 = cumtrapz(&w2, dt);
        MomentTable {
            dt,
            tau_max,
            w1,
            w2,
            w3,
        }
    }

    fn interp(v: &[f64], dt: f64, tau: f64) -> f64 {
        let x = tau / dt;
        let i = (x.floor() as usize).min(v.len() - 2);
        let t = x - i as f64;
        v[i] * (1.0 - t) + v[i + 1] * t
    }

    /// `W₁(τ)`; constant past the support.
    pub fn first(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else if tau >= self.tau_max {
            *self.w1.last().unwrap()
        } else {
            Self::interp(&self.w1, self.dt, tau)
        }
    }

    /// `W₂(τ)`; linear past the support.
    pub fn second(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else if tau >= self.tau_max {
            self.w2.last().unwrap() + self.w1.last().unwrap() * (tau - self.tau_max)
        } else {
            Self::interp(&self.w2, self.dt, tau)
        }
    }

    /// `W₃(τ)`; quadratic past the support.
    pub fn third(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else if tau >= self.tau_max {
            let s = tau - self.tau_max;
            self.w3.last().unwrap() + self.w2.last().unwrap() * s
                + 0.5 * self.w1.last().unwrap() * s * s
        } else {
            Self::interp(&self.w3, self.dt, tau)
        }
    }
}

/// Cumulative trapezoid integral with the same node count as the input.
fn cumtrapz(v: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..v.len() {
        acc += 0.5 * dt * (v[i - 1] + v[i]);
        out.push(acc);
    }
    out
}

impl ScatteringSolution {
    /// Moment table of `w_ℓ` up to the ball radius.
    pub fn w_moment_table(&self) -> Result<MomentTable> {
        let block = self
            .neumann
            .as_ref()
            .ok_or_else(|| Error::Validation("moment table needs a Neumann block".into()))?;
        let points = ((block.ell_n / 2e-3) as usize).clamp(4_096, 400_000);
        Ok(MomentTable::build(
            |t| self.eval_w_ell(t),
            block.ell_n,
            points,
        ))
    }

    /// Moment table of `w_ℓ²` up to the ball radius (used for full-space
    /// Hilbert-Schmidt norms of the correlation kernel).
    pub fn w_sq_moment_table(&self) -> Result<MomentTable> {
        let block = self
            .neumann
            .as_ref()
            .ok_or_else(|| Error::Validation("moment table needs a Neumann block".into()))?;
        let points = ((block.ell_n / 2e-3) as usize).clamp(4_096, 400_000);
        Ok(MomentTable::build(
            |t| {
                let w = self.eval_w_ell(t);
                w * w
            },
            block.ell_n,
            points,
        ))
    }

    /// Moment table of `V·f_ℓ`, supported inside the potential support.
    pub fn vf_moment_table(&self) -> Result<MomentTable> {
        if self.neumann.is_none() {
            return validation("moment table needs a Neumann block");
        }
        let r_edge = self.potential.support;
        let points = 16_384;
        Ok(MomentTable::build(
            |t| self.potential.value(t) * self.eval_f_ell(t),
            r_edge,
            points,
        ))
    }
}

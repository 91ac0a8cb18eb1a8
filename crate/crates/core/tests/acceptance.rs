//! End-to-end acceptance gate.
//!
//! One criterion per numbered check, each printing a single pass/fail
//! line. The criteria exercise the full chain on the desk case (square
//! barrier V0 = 4, R = 1 inside a harmonic trap) plus the analytic
//! side cases (free coupling, periodic box, single-mode closed form).
//! Run with `--nocapture` to see the lines as they complete.

use bogospec::bogo::{check_alpha_properties, diagonalize_quadratic, QuadraticForm};
use bogospec::ebog::{ebog_kappa, ebog_mollified};
use bogospec::error::Result;
use bogospec::fock::{compare_spectrum, oracle_spectrum};
use bogospec::gp::{minimize_gp, GPState, InitKind, SolverOptions, TrapPotential};
use bogospec::kernels::{
    assemble_tilde_forms, build_kernels, compare_etilde_e, ratio_decay_exponent,
    CorrelationKernels,
};
use bogospec::operators::{assemble_e, assemble_hgp, plane_wave_bundle, OperatorBundle};
use bogospec::quadrature::QuadratureSpec;
use bogospec::scattering::{
    check_asymptotics, solve_neumann, solve_zero_energy, RadialGrid, RadialPotential,
    ScatteringSolution,
};
use bogospec::validate::random_admissible_form;
use nalgebra::DMatrix;

use std::f64::consts::PI;

/// Desk fixtures shared across the criteria, computed once.
struct Desk {
    potential: RadialPotential,
    trap: TrapPotential,
    a0: f64,
    /// Converged radial state, 480 nodes.
    state: GPState,
    /// Coarser state (240 nodes) for grid-stability comparisons.
    state_coarse: GPState,
    bundle: OperatorBundle,
    /// Neumann family over the asymptotic ball radii, ascending.
    family: Vec<ScatteringSolution>,
}

const ELL: f64 = 0.4;

fn radial_basis(n: usize) -> bogospec::basis::BasisDescriptor {
    bogospec::basis::BasisDescriptor::Radial {
        n,
        h: 12.0 / (n as f64 + 1.0),
        channel_l: 0,
    }
}

fn desk_neumann(potential: &RadialPotential, ell_n: f64) -> Result<ScatteringSolution> {
    let n = (ell_n / ELL).round() as usize;
    let grid = RadialGrid::uniform((ell_n + 1.0).max(40.0), 4000);
    solve_neumann(potential, ELL, n, &grid)
}

fn build_desk() -> Result<Desk> {
    let potential = RadialPotential::square_barrier(4.0, 1.0);
    let trap = TrapPotential::harmonic(12.0);
    let a0 = solve_zero_energy(&potential, &RadialGrid::uniform(40.0, 2000))?.a0;
    let opts = SolverOptions::default();
    let state = minimize_gp(&trap, a0, &radial_basis(480), &opts)?;
    let state_coarse = minimize_gp(&trap, a0, &radial_basis(240), &opts)?;
    let bundle = assemble_hgp(&state, &trap)?;
    let family = [100.0, 300.0, 1000.0, 3000.0]
        .iter()
        .map(|&ell_n| desk_neumann(&potential, ell_n))
        .collect::<Result<Vec<_>>>()?;
    Ok(Desk {
        potential,
        trap,
        a0,
        state,
        state_coarse,
        bundle,
        family,
    })
}

fn desk_kernels(desk: &Desk, state: &GPState, n_particles: f64, ell: f64) -> Result<CorrelationKernels> {
    let grid = RadialGrid::uniform((ell * n_particles).max(40.0), 4000);
    let sol = solve_neumann(&desk.potential, ell, n_particles.round() as usize, &grid)?;
    build_kernels(state, &sol, n_particles)
}

type Check = (&'static str, fn(&Desk) -> std::result::Result<(), String>);

fn err<T>(msg: String) -> std::result::Result<T, String> {
    Err(msg)
}

// Criterion 1: square-barrier scattering length, both routes.
fn c01_scattering_length(desk: &Desk) -> std::result::Result<(), String> {
    let sol = solve_zero_energy(&desk.potential, &RadialGrid::uniform(40.0, 2000))
        .map_err(|e| e.to_string())?;
    let exact = 1.0 - (2.0f64.sqrt()).tanh() / 2.0f64.sqrt();
    let rel = (sol.a0 / exact - 1.0).abs();
    let routes = (sol.a0_integral / sol.a0 - 1.0).abs();
    if rel > 1e-6 {
        return err(format!("a0 off by {rel:.3e} relative"));
    }
    if routes > 1e-6 {
        return err(format!("tail and integral routes disagree by {routes:.3e}"));
    }
    Ok(())
}

// Criterion 2: Neumann eigenvalue and interaction-integral asymptotics.
fn c02_neumann_asymptotics(desk: &Desk) -> std::result::Result<(), String> {
    let rep = check_asymptotics(&desk.family).map_err(|e| e.to_string())?;
    if !(1.7..=1.9).contains(&rep.c1) {
        return err(format!("c1 = {:.4} outside [1.7, 1.9]", rep.c1));
    }
    if rep.vf_residual_exponent > -1.7 {
        return err(format!(
            "interaction-integral residual decays like exponent {:.3} > -1.7",
            rep.vf_residual_exponent
        ));
    }
    Ok(())
}

// Criterion 3: scaled short-range-hole integral approaches (2/5)pi a0.
fn c03_w_integral_limit(desk: &Desk) -> std::result::Result<(), String> {
    let rep = check_asymptotics(&desk.family).map_err(|e| e.to_string())?;
    let target = 0.4 * PI * desk.a0;
    let rel = (rep.w_scaled_limit / target - 1.0).abs();
    if rel > 0.02 {
        return err(format!("limit off by {rel:.3e} relative at the largest ball"));
    }
    Ok(())
}

// Criterion 4: GP solver exactness, energy identity, and uniqueness.
fn c04_gp_solver(desk: &Desk) -> std::result::Result<(), String> {
    let opts = SolverOptions::default();
    let free = minimize_gp(&desk.trap, 0.0, &radial_basis(480), &opts).map_err(|e| e.to_string())?;
    for (name, v) in [("E_GP", free.e_gp), ("eps_GP", free.eps_gp)] {
        if (v - 3.0).abs() > 1e-6 {
            return err(format!("free harmonic {name} = {v:.8}, expected 3"));
        }
    }
    if free.residual > 1e-8 {
        return err(format!("free-case residual {:.3e} > 1e-8", free.residual));
    }
    for state in [&free, &desk.state] {
        let identity = (state.eps_gp - state.e_gp - 4.0 * PI * state.a0 * state.norm4).abs();
        if identity > 1e-10 {
            return err(format!("chemical-potential identity violated by {identity:.3e}"));
        }
        if state.residual > 1e-8 {
            return err(format!("residual {:.3e} > 1e-8", state.residual));
        }
    }
    let mut runs = [11u64, 97].iter().map(|&seed| {
        minimize_gp(
            &desk.trap,
            desk.a0,
            &radial_basis(480),
            &SolverOptions {
                init: InitKind::RandomPositive { seed },
                ..SolverOptions::default()
            },
        )
    });
    let a = runs.next().unwrap().map_err(|e| e.to_string())?;
    let b = runs.next().unwrap().map_err(|e| e.to_string())?;
    let sign = if a.phi0.dot(&b.phi0) < 0.0 { -1.0 } else { 1.0 };
    let dist = (&a.phi0 - sign * &b.phi0).norm();
    if dist > 1e-6 {
        return err(format!("random initializations differ by {dist:.3e} in L2"));
    }
    Ok(())
}

// Criterion 5: periodic-box dispersion against the closed form.
fn c05_dispersion(_desk: &Desk) -> std::result::Result<(), String> {
    let a0 = 0.3;
    let box_len = 1.0;
    let bundle = plane_wave_bundle(a0, box_len, 2).map_err(|e| e.to_string())?;
    let spec = assemble_e(&bundle).map_err(|e| e.to_string())?;
    let vol = box_len.powi(3);
    let mut exact: Vec<f64> = bundle
        .l_matrix
        .diagonal()
        .iter()
        .skip(1)
        .map(|&p2| (p2 * p2 + 16.0 * PI * a0 * p2 / vol).sqrt())
        .collect();
    exact.sort_by(f64::total_cmp);
    let dev = spec
        .eigenvalues
        .iter()
        .zip(&exact)
        .take(20)
        .map(|(e, x)| (e / x - 1.0).abs())
        .fold(0.0f64, f64::max);
    if dev > 1e-6 {
        return err(format!("dispersion deviates by {dev:.3e} over the first 20 levels"));
    }
    Ok(())
}

// Criterion 6: Fock-space oracle agreement, random and closed-form.
fn c06_fock_oracle(_desk: &Desk) -> std::result::Result<(), String> {
    for i in 0..10u64 {
        let modes = 1 + (i as usize % 3);
        let (phi, gamma) = random_admissible_form(100 + i, modes);
        let oracle = oracle_spectrum(&phi, &gamma, 16, 6).map_err(|e| e.to_string())?;
        let diag = diagonalize_quadratic(
            &QuadraticForm::new(phi, gamma).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let cmp = compare_spectrum(&oracle, &diag, 6).map_err(|e| e.to_string())?;
        if cmp.ground_residual > 1e-5 || cmp.level_residual > 1e-5 {
            return err(format!(
                "case {i} ({modes} modes): ground {:.3e}, levels {:.3e}",
                cmp.ground_residual, cmp.level_residual
            ));
        }
    }
    let phi = DMatrix::from_element(1, 1, 5.0);
    let gamma = DMatrix::from_element(1, 1, 3.0);
    let diag = diagonalize_quadratic(&QuadraticForm::new(phi, gamma).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if (diag.e_eigenvalues[0] - 4.0).abs() > 1e-6 || (diag.ground_shift + 0.5).abs() > 1e-6 {
        return err(format!(
            "single mode: e = {:.8} (want 4), shift = {:.8} (want -0.5)",
            diag.e_eigenvalues[0], diag.ground_shift
        ));
    }
    Ok(())
}

// Criterion 7: diagnostic-operator property suite on the desk forms.
fn c07_alpha_properties(desk: &Desk) -> std::result::Result<(), String> {
    for n in [25.0, 50.0, 100.0] {
        let kern = desk_kernels(desk, &desk.state, n, ELL).map_err(|e| e.to_string())?;
        let forms = assemble_tilde_forms(&kern, &desk.bundle).map_err(|e| e.to_string())?;
        if forms.d_min_eig <= 0.0 || forms.sum_min_eig <= 0.0 {
            return err(format!(
                "N = {n}: positivity fails (min eigs {:.3e}, {:.3e})",
                forms.d_min_eig, forms.sum_min_eig
            ));
        }
        let diag = diagonalize_quadratic(
            &QuadraticForm::new(forms.phi_q, forms.gamma_q).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let rep = check_alpha_properties(&diag).map_err(|e| e.to_string())?;
        let ratio = rep.equivalence_c_upper / rep.equivalence_c_lower;
        if !(ratio.is_finite() && ratio <= 10.0) {
            return err(format!("N = {n}: norm-equivalence ratio {ratio:.3}"));
        }
        if !rep.a_minus_i_hs.is_finite() || !rep.b_minus_i_hs.is_finite() {
            return err(format!("N = {n}: transformation blocks have non-finite HS norms"));
        }
        for &(beta, norm) in &rep.alpha_weighted_hs {
            if beta <= 0.9 && !norm.is_finite() {
                return err(format!("N = {n}: weighted alpha norm at beta = {beta} not finite"));
            }
        }
    }
    Ok(())
}

// Criterion 8: renormalized-vs-bare spectrum deviation decays in N.
fn c08_spectrum_convergence(desk: &Desk) -> std::result::Result<(), String> {
    let spectrum = assemble_e(&desk.bundle).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for n in [25.0, 50.0, 100.0, 200.0] {
        let kern = desk_kernels(desk, &desk.state, n, ELL).map_err(|e| e.to_string())?;
        let forms = assemble_tilde_forms(&kern, &desk.bundle).map_err(|e| e.to_string())?;
        reports.push(compare_etilde_e(&forms, &spectrum, n, 10).map_err(|e| e.to_string())?);
    }
    for pair in reports.windows(2) {
        if pair[1].max_deviation >= pair[0].max_deviation {
            return err(format!(
                "deviation not decreasing: {:.3e} at N = {} vs {:.3e} at N = {}",
                pair[1].max_deviation, pair[1].n_particles, pair[0].max_deviation, pair[0].n_particles
            ));
        }
    }
    let exponent = ratio_decay_exponent(&reports).map_err(|e| e.to_string())?;
    if exponent > -0.8 {
        return err(format!("fitted decay exponent {exponent:.3} > -0.8"));
    }
    Ok(())
}

// Criterion 9: correction-energy route consistency.
fn c09_correction_energy(desk: &Desk) -> std::result::Result<(), String> {
    let quad = QuadratureSpec { nodes: 128 };
    let at = ebog_kappa(&desk.bundle, 5.0, &quad).map_err(|e| e.to_string())?;
    let scaled = ebog_kappa(&desk.bundle, 7.5, &quad).map_err(|e| e.to_string())?;
    let kappa_rel = (scaled.total / at.total - 1.0).abs();
    if kappa_rel > 1e-3 {
        return err(format!("kappa and 1.5*kappa totals differ by {kappa_rel:.3e}"));
    }
    let mol = ebog_mollified(&desk.bundle, &[0.8, 0.4, 0.2, 0.1, 0.05]).map_err(|e| e.to_string())?;
    let route_rel = (mol.extrapolated / at.total - 1.0).abs();
    if route_rel > 1e-3 {
        return err(format!("mollified and resolvent routes differ by {route_rel:.3e}"));
    }
    let free_state = minimize_gp(
        &desk.trap,
        0.0,
        &radial_basis(240),
        &SolverOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let free_bundle = assemble_hgp(&free_state, &desk.trap).map_err(|e| e.to_string())?;
    let free_kappa = ebog_kappa(&free_bundle, 5.0, &quad).map_err(|e| e.to_string())?;
    let free_mol = ebog_mollified(&free_bundle, &[0.8, 0.4]).map_err(|e| e.to_string())?;
    if free_kappa.total != 0.0 || free_mol.extrapolated != 0.0 {
        return err(format!(
            "free coupling not exactly zero: {:.3e} and {:.3e}",
            free_kappa.total, free_mol.extrapolated
        ));
    }
    Ok(())
}

// Criterion 10: kernel-bound suite.
fn c10_kernel_bounds(desk: &Desk) -> std::result::Result<(), String> {
    let mut scaled = Vec::new();
    for ell in [0.1, 0.2, 0.4] {
        let kern = desk_kernels(desk, &desk.state_coarse, 50.0, ell).map_err(|e| e.to_string())?;
        scaled.push(kern.hs_eta_full / ell.sqrt());
    }
    let (lo, hi) = (
        scaled.iter().copied().fold(f64::INFINITY, f64::min),
        scaled.iter().copied().fold(0.0f64, f64::max),
    );
    if (hi - lo) / hi > 0.25 {
        return err(format!(
            "HS norm / sqrt(ell) spreads by {:.1}% across ell",
            100.0 * (hi - lo) / hi
        ));
    }
    let coarse = desk_kernels(desk, &desk.state_coarse, 50.0, ELL).map_err(|e| e.to_string())?;
    let fine = desk_kernels(desk, &desk.state, 50.0, ELL).map_err(|e| e.to_string())?;
    if !coarse.eta_pointwise_c.is_finite() || !fine.eta_pointwise_c.is_finite() {
        return err("pointwise kernel constant not finite".into());
    }
    let grid_rel = (fine.eta_pointwise_c / coarse.eta_pointwise_c - 1.0).abs();
    if grid_rel > 0.25 {
        return err(format!("pointwise constant moves by {grid_rel:.3} between grids"));
    }
    let forms = assemble_tilde_forms(&fine, &desk.bundle).map_err(|e| e.to_string())?;
    if forms.identity_d_rel > 1e-8 {
        return err(format!(
            "difference-block identity residual {:.3e} > 1e-8",
            forms.identity_d_rel
        ));
    }
    Ok(())
}

#[test]
fn acceptance() {
    let desk = match build_desk() {
        Ok(d) => d,
        Err(e) => panic!("desk fixture setup failed: {e}"),
    };
    let checks: [Check; 10] = [
        ("scattering-length-oracle", c01_scattering_length),
        ("neumann-asymptotics", c02_neumann_asymptotics),
        ("w-integral-limit", c03_w_integral_limit),
        ("gp-solver", c04_gp_solver),
        ("periodic-dispersion", c05_dispersion),
        ("fock-oracle-equivalence", c06_fock_oracle),
        ("alpha-property-suite", c07_alpha_properties),
        ("spectrum-convergence", c08_spectrum_convergence),
        ("correction-energy-consistency", c09_correction_energy),
        ("kernel-bounds", c10_kernel_bounds),
    ];
    let mut failures = Vec::new();
    for (i, (name, run)) in checks.iter().enumerate() {
        let outcome = run(&desk);
        let verdict = if outcome.is_ok() { "pass" } else { "FAIL" };
        println!("criterion {:2} {:<32} {}", i + 1, name, verdict);
        if let Err(detail) = outcome {
            println!("              {detail}");
            failures.push(format!("{} ({})", name, detail));
        }
    }
    assert!(
        failures.is_empty(),
        "{} acceptance criteria failed:\n  {}",
        failures.len(),
        failures.join("\n  ")
    );
}

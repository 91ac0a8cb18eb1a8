//! Cross-module property suite.
//!
//! Each fixture re-derives one invariant of the library against the desk
//! configuration (square barrier, harmonic trap) and reports the measured
//! value next to its expectation, tolerance, and provenance. Failures are
//! report rows, never panics, so one broken invariant does not hide the
//! rest. Fixtures run in parallel; the report is ordered by name.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::BasisDescriptor;
use crate::bogo::{check_alpha_properties, diagonalize_quadratic, QuadraticForm};
use crate::config::RunConfig;
use crate::ebog::{ebog_direct, ebog_kappa, ebog_mollified, ground_energy};
use crate::error::Result;
use crate::fock::{compare_spectrum, is_admissible, oracle_spectrum};
use crate::gp::{minimize_gp, GPState, InitKind, SolverOptions, TrapPotential};
use crate::json::Json;
use crate::kernels::{assemble_tilde_forms, build_kernels, compare_etilde_e};
use crate::linalg::SymEigen;
use crate::operators::{assemble_e, assemble_hgp, excitation_levels, plane_wave_bundle, OperatorBundle};
use crate::quadrature::QuadratureSpec;
use crate::scattering::{solve_neumann, solve_zero_energy, RadialGrid, RadialPotential};

/// Where a fixture's expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form result.
    Analytic,
    /// Independent brute-force computation.
    Oracle,
    /// Two routes inside the library that must agree.
    SelfConvergence,
    /// Asymptotic statement checked at finite resolution.
    Asymptotic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Oracle => "oracle",
            Provenance::SelfConvergence => "self-convergence",
            Provenance::Asymptotic => "asymptotic",
        }
    }
}

/// One executable check: a measured/expected pair under a tolerance.
pub struct Fixture {
    pub name: String,
    pub provenance: Provenance,
    /// Absolute tolerance on `|measured − expected|`; fixtures phrase
    /// their measurement as a residual or ratio so this is meaningful.
    pub tolerance: f64,
    run: Box<dyn Fn() -> Result<(f64, f64)> + Send + Sync>,
}

impl Fixture {
    fn new(
        name: &str,
        provenance: Provenance,
        tolerance: f64,
        run: impl Fn() -> Result<(f64, f64)> + Send + Sync + 'static,
    ) -> Self {
        Fixture {
            name: name.to_string(),
            provenance,
            tolerance,
            run: Box::new(run),
        }
    }
}

/// Outcome of one fixture.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub provenance: Provenance,
    pub tolerance: f64,
    pub measured: f64,
    pub expected: f64,
    pub pass: bool,
    /// Execution error, reported instead of a measurement.
    pub error: Option<String>,
}

/// Full suite outcome.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Plain-text table, one row per check.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<34} {:>14} {:>14} {:>9} {:<16} {}\n",
            "check", "measured", "expected", "tol", "provenance", "status"
        ));
        for c in &self.checks {
            let status = match (&c.error, c.pass) {
                (Some(e), _) => format!("ERROR: {e}"),
                (None, true) => "pass".to_string(),
                (None, false) => "FAIL".to_string(),
            };
            out.push_str(&format!(
                "{:<34} {:>14.6e} {:>14.6e} {:>9.1e} {:<16} {}\n",
                c.name,
                c.measured,
                c.expected,
                c.tolerance,
                c.provenance.as_str(),
                status
            ));
        }
        out
    }

    pub fn to_json(&self) -> Json {
        Json::Arr(
            self.checks
                .iter()
                .map(|c| {
                    Json::obj(vec![
                        ("name", Json::Str(c.name.clone())),
                        ("measured", Json::Num(c.measured)),
                        ("expected", Json::Num(c.expected)),
                        ("tolerance", Json::Num(c.tolerance)),
                        ("provenance", Json::Str(c.provenance.as_str().into())),
                        ("pass", Json::Bool(c.pass)),
                        (
                            "error",
                            match &c.error {
                                Some(e) => Json::Str(e.clone()),
                                None => Json::Null,
                            },
                        ),
                    ])
                })
                .collect(),
        )
    }
}

/// Execute every fixture (in parallel) and assemble the report sorted by
/// fixture name.
pub fn run_suite(fixtures: Vec<Fixture>) -> SuiteReport {
    let mut checks: Vec<CheckResult> = fixtures
        .par_iter()
        .map(|f| match (f.run)() {
            Ok((measured, expected)) => CheckResult {
                name: f.name.clone(),
                provenance: f.provenance,
                tolerance: f.tolerance,
                measured,
                expected,
                pass: (measured - expected).abs() <= f.tolerance,
                error: None,
            },
            Err(e) => CheckResult {
                name: f.name.clone(),
                provenance: f.provenance,
                tolerance: f.tolerance,
                measured: f64::NAN,
                expected: f64::NAN,
                pass: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    SuiteReport { checks }
}

/// Seeded random quadratic form passing the admissibility filter: the
/// pairing part stays well inside the gap of the diagonal part.
pub fn random_admissible_form(
    seed: u64,
    modes: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a = DMatrix::from_fn(modes, modes, |_, _| rng.gen_range(-1.0..1.0));
        let mut phi = &a * a.transpose();
        for i in 0..modes {
            phi[(i, i)] += rng.gen_range(2.0..4.0);
        }
        let mut gamma = DMatrix::zeros(modes, modes);
        for i in 0..modes {
            for j in i..modes {
                let g = rng.gen_range(-0.4..0.4);
                gamma[(i, j)] = g;
                gamma[(j, i)] = g;
            }
        }
        if is_admissible(&phi, &gamma) && SymEigen::new(&(&phi + &gamma)).min() > 0.0 {
            return (phi, gamma);
        }
    }
}

/// Shared expensive intermediates for the desk fixtures.
struct DeskContext {
    a0: f64,
    potential: RadialPotential,
    trap: TrapPotential,
    /// Fast grid for GP/energy fixtures.
    state_fast: GPState,
    bundle_fast: OperatorBundle,
    /// Production grid for kernel fixtures.
    state_full: GPState,
    bundle_full: OperatorBundle,
}

fn desk_context(cfg: &RunConfig) -> Result<DeskContext> {
    let potential = RadialPotential::square_barrier(4.0, 1.0);
    let grid = RadialGrid::uniform(40.0, 2000);
    let a0 = match cfg.a0_override {
        Some(a0) => a0,
        None => solve_zero_energy(&potential, &grid)?.a0,
    };
    let trap = TrapPotential::harmonic(12.0);
    let fast_basis = BasisDescriptor::Radial {
        n: 240,
        h: 12.0 / 241.0,
        channel_l: 0,
    };
    let state_fast = minimize_gp(&trap, a0, &fast_basis, &SolverOptions::default())?;
    let bundle_fast = assemble_hgp(&state_fast, &trap)?;
    let full_basis = BasisDescriptor::Radial {
        n: cfg.gp_nodes,
        h: 12.0 / (cfg.gp_nodes as f64 + 1.0),
        channel_l: 0,
    };
    let state_full = minimize_gp(&trap, a0, &full_basis, &SolverOptions::default())?;
    let bundle_full = assemble_hgp(&state_full, &trap)?;
    Ok(DeskContext {
        a0,
        potential,
        trap,
        state_fast,
        bundle_fast,
        state_full,
        bundle_full,
    })
}

fn neumann_grid(ell_n: f64) -> RadialGrid {
    RadialGrid::uniform((ell_n + 1.0).max(40.0), 4000)
}

/// The default fixture set: one executable check per library invariant
/// that the desk configuration can exercise.
pub fn default_fixtures(cfg: &RunConfig) -> Result<Vec<Fixture>> {
    let ctx = Arc::new(desk_context(cfg)?);
    let seed = cfg.seed;
    // The kappa-independence fixture is the most expensive; cap its
    // quadrature since the comparison is insensitive to node count.
    let quad_nodes = cfg.quad_nodes.min(64);
    let mut fixtures = Vec::new();

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "square-barrier-a0",
        Provenance::Analytic,
        1e-6,
        move || {
            let sol = solve_zero_energy(&c.potential, &RadialGrid::uniform(40.0, 2000))?;
            let exact = 1.0 - (2.0f64.sqrt()).tanh() / 2.0f64.sqrt();
            Ok((sol.a0 / exact, 1.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "a0-route-agreement",
        Provenance::SelfConvergence,
        1e-6,
        move || {
            let sol = solve_zero_energy(&c.potential, &RadialGrid::uniform(40.0, 2000))?;
            Ok((sol.a0_integral / sol.a0, 1.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "neumann-lambda-asymptote",
        Provenance::Asymptotic,
        3e-3,
        move || {
            let ell_n: f64 = 1000.0;
            let n = (ell_n / 0.4).round() as usize;
            let sol = solve_neumann(&c.potential, 0.4, n, &neumann_grid(ell_n))?;
            let b = sol.neumann.as_ref().unwrap();
            Ok((b.lambda_ell * b.ell_n.powi(3) / (3.0 * c.a0), 1.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "w-integral-limit",
        Provenance::Asymptotic,
        0.02,
        move || {
            let ell_n: f64 = 3000.0;
            let n = (ell_n / 0.4).round() as usize;
            let sol = solve_neumann(&c.potential, 0.4, n, &neumann_grid(ell_n))?;
            let b = sol.neumann.as_ref().unwrap();
            let target = 0.4 * std::f64::consts::PI * c.a0;
            Ok((b.integral_w / (ell_n * ell_n) / target, 1.0))
        },
    ));

    fixtures.push(Fixture::new(
        "free-case-zeros",
        Provenance::Analytic,
        1e-6,
        move || {
            let pot = RadialPotential::zero();
            let sol = solve_zero_energy(&pot, &RadialGrid::uniform(40.0, 500))?;
            let trap = TrapPotential::harmonic(12.0);
            let basis = BasisDescriptor::Radial {
                n: 240,
                h: 12.0 / 241.0,
                channel_l: 0,
            };
            let state = minimize_gp(&trap, 0.0, &basis, &SolverOptions::default())?;
            let bundle = assemble_hgp(&state, &trap)?;
            let kap = ebog_kappa(&bundle, 5.0, &QuadratureSpec { nodes: 16 })?;
            let mol = ebog_mollified(&bundle, &[0.8, 0.4])?;
            let worst = sol
                .a0
                .abs()
                .max((state.e_gp - 3.0).abs())
                .max(kap.total.abs())
                .max(mol.extrapolated.abs());
            Ok((worst, 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "gp-energy-identity",
        Provenance::Analytic,
        1e-10,
        move || {
            let s = &c.state_fast;
            let residual = s.eps_gp
                - s.e_gp
                - 4.0 * std::f64::consts::PI * s.a0 * s.norm4;
            Ok((residual, 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "gp-minimizer-uniqueness",
        Provenance::SelfConvergence,
        1e-6,
        move || {
            let basis = c.state_fast.basis.clone();
            let opts = SolverOptions {
                init: InitKind::RandomPositive { seed },
                ..SolverOptions::default()
            };
            let other = minimize_gp(&c.trap, c.a0, &basis, &opts)?;
            Ok(((&other.phi0 - &c.state_fast.phi0).norm(), 0.0))
        },
    ));

    fixtures.push(Fixture::new(
        "dispersion-periodic",
        Provenance::Analytic,
        1e-6,
        move || {
            let a0 = 0.3;
            let box_len = 2.0 * std::f64::consts::PI;
            let bundle = plane_wave_bundle(a0, box_len, 2)?;
            let spec = assemble_e(&bundle)?;
            let vol = box_len.powi(3);
            let mut exact: Vec<f64> = bundle
                .l_matrix
                .diagonal()
                .iter()
                .skip(1)
                .map(|&p2| (p2 * p2 + 16.0 * std::f64::consts::PI * a0 * p2 / vol).sqrt())
                .collect();
            exact.sort_by(f64::total_cmp);
            let dev = spec
                .eigenvalues
                .iter()
                .zip(&exact)
                .take(20)
                .map(|(e, x)| (e / x - 1.0).abs())
                .fold(0.0f64, f64::max);
            Ok((dev, 0.0))
        },
    ));

    fixtures.push(Fixture::new(
        "fock-vs-bogo-2mode",
        Provenance::Oracle,
        1e-5,
        move || {
            let phi = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 3.0]);
            let gamma = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.4]);
            let oracle = oracle_spectrum(&phi, &gamma, 40, 6)?;
            let diag = diagonalize_quadratic(&QuadraticForm::new(phi, gamma)?)?;
            let cmp = compare_spectrum(&oracle, &diag, 6)?;
            Ok((cmp.ground_residual.max(cmp.level_residual), 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "tilde-difference-identity",
        Provenance::SelfConvergence,
        1e-8,
        move || {
            let kern = desk_kernels(&c, 50.0, 0.4)?;
            let forms = assemble_tilde_forms(&kern, &c.bundle_full)?;
            Ok((forms.identity_d_rel, 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "hyperbolic-identity",
        Provenance::SelfConvergence,
        1e-10,
        move || {
            let kern = desk_kernels(&c, 50.0, 0.4)?;
            Ok((kern.hyperbolic_residual, 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "eta-sqrt-ell-scaling",
        Provenance::Asymptotic,
        0.25,
        move || {
            let mut ratios = Vec::new();
            for ell in [0.1, 0.2, 0.4] {
                let kern = desk_kernels(&c, 50.0, ell)?;
                ratios.push(kern.hs_eta_full / ell.sqrt());
            }
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let spread = ratios
                .iter()
                .map(|r| (r / mean - 1.0).abs())
                .fold(0.0f64, f64::max);
            Ok((spread, 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "alpha-equivalence-constants",
        Provenance::Oracle,
        10.0,
        move || {
            let kern = desk_kernels(&c, 50.0, 0.4)?;
            let forms = assemble_tilde_forms(&kern, &c.bundle_full)?;
            let diag = diagonalize_quadratic(&QuadraticForm::new(
                forms.phi_q.clone(),
                forms.gamma_q.clone(),
            )?)?;
            let rep = check_alpha_properties(&diag)?;
            Ok((rep.equivalence_c_upper / rep.equivalence_c_lower, 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "etilde-matches-e",
        Provenance::Asymptotic,
        0.05,
        move || {
            let n_particles = 100.0;
            let kern = desk_kernels(&c, n_particles, 0.4)?;
            let forms = assemble_tilde_forms(&kern, &c.bundle_full)?;
            let spec = assemble_e(&c.bundle_full)?;
            let cmp = compare_etilde_e(&forms, &spec, n_particles, 10)?;
            Ok((cmp.max_deviation, 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "ebog-kappa-independence",
        Provenance::SelfConvergence,
        1e-3,
        move || {
            let quad = QuadratureSpec { nodes: quad_nodes };
            let a = ebog_kappa(&c.bundle_fast, 5.0, &quad)?;
            let b = ebog_kappa(&c.bundle_fast, 7.5, &quad)?;
            Ok(((a.total - b.total).abs() / a.total.abs(), 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "ebog-route-agreement",
        Provenance::SelfConvergence,
        1e-3,
        move || {
            let direct = ebog_direct(&c.bundle_full)?;
            let h = match c.bundle_full.basis {
                BasisDescriptor::Radial { h, .. } => h,
                _ => unreachable!(),
            };
            let mut deltas = vec![0.8, 0.4, 0.2, 0.1];
            while deltas.last().unwrap() * 0.5 >= 2.0 * h {
                let d = deltas.last().unwrap() * 0.5;
                deltas.push(d);
            }
            let mol = ebog_mollified(&c.bundle_full, &deltas)?;
            Ok(((mol.extrapolated - direct).abs() / direct.abs(), 0.0))
        },
    ));

    let c = ctx.clone();
    fixtures.push(Fixture::new(
        "ground-energy-linearity",
        Provenance::Analytic,
        1e-12,
        move || {
            let e1 = ground_energy(100, &c.state_fast, -0.1);
            let e2 = ground_energy(200, &c.state_fast, -0.1);
            Ok((((e2 - e1) / 100.0 - c.state_fast.e_gp) / c.state_fast.e_gp, 0.0))
        },
    ));

    fixtures.push(Fixture::new(
        "level-enumeration",
        Provenance::Analytic,
        1e-12,
        move || {
            let levels = excitation_levels(&[1.0, 3.0], 5.5)?;
            // Sums a·1 + b·3 ≤ 5.5 including the vacuum; 3, 4, 5 appear
            // twice (e.g. 3 = 3·1 = 1·3).
            let expected = [(0.0, 1), (1.0, 1), (2.0, 1), (3.0, 2), (4.0, 2), (5.0, 2)];
            let mut dev: f64 = 0.0;
            for (lv, (val, mult)) in levels.iter().zip(expected.iter()) {
                dev = dev.max((lv.value - val).abs());
                dev = dev.max((lv.multiplicity as f64 - *mult as f64).abs());
            }
            dev = dev.max((levels.len() as f64 - expected.len() as f64).abs());
            Ok((dev, 0.0))
        },
    ));

    Ok(fixtures)
}

fn desk_kernels(
    c: &DeskContext,
    n_particles: f64,
    ell: f64,
) -> Result<crate::kernels::CorrelationKernels> {
    let sol = solve_neumann(
        &c.potential,
        ell,
        n_particles.round() as usize,
        &RadialGrid::uniform((ell * n_particles).max(40.0), 4000),
    )?;
    build_kernels(&c.state_full, &sol, n_particles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passing_and_failing_fixtures_report() {
        let fixtures = vec![
            Fixture::new("b-pass", Provenance::Analytic, 1e-6, || Ok((1.0, 1.0))),
            Fixture::new("a-fail", Provenance::Oracle, 1e-6, || Ok((1.1, 1.0))),
            Fixture::new("c-error", Provenance::SelfConvergence, 1e-6, || {
                crate::error::validation("boom")
            }),
        ];
        let report = run_suite(fixtures);
        assert_eq!(report.checks.len(), 3);
        // Sorted by name.
        assert_eq!(report.checks[0].name, "a-fail");
        assert!(!report.checks[0].pass);
        assert!(report.checks[1].pass);
        assert!(report.checks[2].error.is_some());
        assert!(!report.all_passed());
        assert_eq!(report.failures().len(), 2);
        let table = report.table();
        assert!(table.contains("FAIL") && table.contains("pass") && table.contains("boom"));
    }

    #[test]
    fn random_forms_are_admissible_and_reproducible() {
        for modes in 1..=3 {
            let (phi, gamma) = random_admissible_form(11, modes);
            assert!(is_admissible(&phi, &gamma));
            let (phi2, _) = random_admissible_form(11, modes);
            assert_eq!(phi, phi2);
            assert!(diagonalize_quadratic(&QuadraticForm::new(phi, gamma).unwrap()).is_ok());
        }
    }
}

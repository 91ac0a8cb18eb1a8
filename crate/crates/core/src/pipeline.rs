//! Stage orchestration: run the physics modules in dependency order and
//! persist their outputs.
//!
//! A run is a pure function of (configuration, seed): stage JSON files
//! contain no timestamps or timings, so identical inputs reproduce
//! byte-identical outputs. Timings live only in the manifest, which also
//! records the configuration hash and every file written.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::basis::BasisDescriptor;
use crate::config::{PotentialSpec, RunConfig, TrapSpec};
use crate::ebog::{ebog_kappa, ebog_mollified, ground_energy};
use crate::error::{validation, Error, Result};
use crate::fock::{compare_spectrum, oracle_spectrum};
use crate::gp::{minimize_gp, GPState, SolverOptions, TrapPotential};
use crate::io::{load_potential_table, write_matrix_dump, write_state_dump, OracleFixture};
use crate::json::{write_json, Json};
use crate::kernels::{assemble_tilde_forms, build_kernels, compare_etilde_e, ratio_decay_exponent};
use crate::operators::{assemble_e, assemble_hgp, excitation_levels, spectrum_channels, OperatorBundle, SpectrumResult};
use crate::quadrature::QuadratureSpec;
use crate::scattering::{check_asymptotics, solve_neumann, solve_zero_energy, RadialGrid, RadialPotential, ScatteringSolution};
use crate::validate::{default_fixtures, random_admissible_form, run_suite};
use crate::bogo::{diagonalize_quadratic, QuadraticForm};

/// Cap on emitted profile samples; enough to plot, small enough to diff.
const MAX_PROFILE_SAMPLES: usize = 512;

/// Pass threshold for oracle residuals. Certified truncations land at
/// round-off (1e-14 on the desk cases), so anything near this limit
/// signals a real disagreement rather than noise.
const ORACLE_RESIDUAL_TOL: f64 = 1e-5;

/// Pipeline stages in canonical execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Scatter,
    Gp,
    Spectrum,
    Kernels,
    Ebog,
    Oracle,
    Validate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Scatter,
        Stage::Gp,
        Stage::Spectrum,
        Stage::Kernels,
        Stage::Ebog,
        Stage::Oracle,
        Stage::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Scatter => "scatter",
            Stage::Gp => "gp",
            Stage::Spectrum => "spectrum",
            Stage::Kernels => "kernels",
            Stage::Ebog => "ebog",
            Stage::Oracle => "oracle",
            Stage::Validate => "validate",
        }
    }

    pub fn from_name(name: &str) -> Result<Stage> {
        Stage::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Usage(format!("unknown stage '{name}'; {DEPENDENCY_GRAPH}")))
    }
}

/// Human-readable dependency summary, printed on usage errors.
pub const DEPENDENCY_GRAPH: &str = "stage dependencies: \
scatter -> gp (unless [gp] a0 is set) -> spectrum -> ebog; \
kernels needs gp and scatter; oracle and validate stand alone";

/// Per-stage record in the manifest.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub name: &'static str,
    pub seconds: f64,
    pub outputs: Vec<PathBuf>,
}

/// Run provenance: configuration hash, library version, stage outputs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: &'static str,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn to_json(&self) -> Json {
        Json::obj(vec![
            ("config_hash", Json::Str(self.config_hash.clone())),
            ("version", Json::Str(self.version.into())),
            ("seed", Json::Int(self.seed as i64)),
            (
                "stages",
                Json::Arr(
                    self.stages
                        .iter()
                        .map(|s| {
                            Json::obj(vec![
                                ("name", Json::Str(s.name.into())),
                                ("seconds", Json::Num(s.seconds)),
                                (
                                    "outputs",
                                    Json::Arr(
                                        s.outputs
                                            .iter()
                                            .map(|p| Json::Str(p.display().to_string()))
                                            .collect(),
                                    ),
                                ),
                            ])
                        })
                        .collect(),
                ),
            ),
        ])
    }
}

/// Canonical text form of a configuration, hashed into the manifest.
fn canonical_config(cfg: &RunConfig) -> String {
    // Debug formatting is stable for this plain-data struct and covers
    // every field; a field added later changes the hash, which is the
    // desired behavior.
    format!("{cfg:?}")
}

/// Hex SHA-256 of the canonical configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(canonical_config(cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_potential(cfg: &RunConfig) -> Result<RadialPotential> {
    Ok(match &cfg.potential {
        PotentialSpec::Square { v0, radius } => RadialPotential::square_barrier(*v0, *radius),
        PotentialSpec::Table { file } => RadialPotential::tabulated(load_potential_table(file)?),
        PotentialSpec::Zero => RadialPotential::zero(),
    })
}

fn build_trap(cfg: &RunConfig) -> TrapPotential {
    match &cfg.trap {
        TrapSpec::Harmonic { box_half_width } => TrapPotential::harmonic(*box_half_width),
        TrapSpec::Polynomial {
            coefficients,
            box_half_width,
        } => TrapPotential::polynomial(coefficients.clone(), *box_half_width),
        TrapSpec::None => TrapPotential::none(),
    }
}

fn downsample(pairs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if pairs.len() <= MAX_PROFILE_SAMPLES {
        return pairs;
    }
    let stride = pairs.len().div_ceil(MAX_PROFILE_SAMPLES);
    pairs.into_iter().step_by(stride).collect()
}

/// Mutable state threaded through the stages.
struct PipelineContext {
    potential: RadialPotential,
    trap: TrapPotential,
    a0: Option<f64>,
    desk_scatter: Option<ScatteringSolution>,
    state: Option<GPState>,
    bundle: Option<OperatorBundle>,
    spectrum: Option<SpectrumResult>,
}

/// Check that every requested stage has its inputs available, either from
/// another requested stage or from configuration.
fn check_dependencies(cfg: &RunConfig, stages: &BTreeSet<Stage>) -> Result<()> {
    let missing = |what: &str| -> Result<()> {
        Err(Error::Usage(format!("{what}; {DEPENDENCY_GRAPH}")))
    };
    let has = |s: Stage| stages.contains(&s);
    if has(Stage::Gp) && cfg.a0_override.is_none() && !has(Stage::Scatter) {
        return missing("stage 'gp' needs 'scatter' (or [gp] a0 in the config)");
    }
    if has(Stage::Spectrum) && !has(Stage::Gp) {
        return missing("stage 'spectrum' needs 'gp'");
    }
    if has(Stage::Ebog) && !has(Stage::Spectrum) {
        return missing("stage 'ebog' needs 'spectrum'");
    }
    if has(Stage::Kernels) && !(has(Stage::Gp) && has(Stage::Scatter)) {
        return missing("stage 'kernels' needs 'gp' and 'scatter'");
    }
    Ok(())
}

/// Execute the requested stages in dependency order, writing one JSON per
/// stage plus the manifest into the configured output directory.
pub fn run_pipeline(cfg: &RunConfig, stages: &BTreeSet<Stage>) -> Result<RunManifest> {
    cfg.validate()?;
    if stages.is_empty() {
        return Err(Error::Usage(format!("no stages requested; {DEPENDENCY_GRAPH}")));
    }
    check_dependencies(cfg, stages)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut ctx = PipelineContext {
        potential: build_potential(cfg)?,
        trap: build_trap(cfg),
        a0: cfg.a0_override,
        desk_scatter: None,
        state: None,
        bundle: None,
        spectrum: None,
    };
    let mut manifest = RunManifest {
        config_hash: config_hash(cfg),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        out_dir: cfg.out_dir.clone(),
        stages: Vec::new(),
    };
    for stage in Stage::ALL {
        if !stages.contains(&stage) {
            continue;
        }
        let start = Instant::now();
        let outputs = match stage {
            Stage::Scatter => stage_scatter(cfg, &mut ctx)?,
            Stage::Gp => stage_gp(cfg, &mut ctx)?,
            Stage::Spectrum => stage_spectrum(cfg, &mut ctx)?,
            Stage::Kernels => stage_kernels(cfg, &mut ctx)?,
            Stage::Ebog => stage_ebog(cfg, &mut ctx)?,
            Stage::Oracle => stage_oracle(cfg, None)?,
            Stage::Validate => stage_validate(cfg)?,
        };
        manifest.stages.push(StageRecord {
            name: stage.name(),
            seconds: start.elapsed().as_secs_f64(),
            outputs,
        });
    }
    let manifest_path = cfg.out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest.to_json())?;
    Ok(manifest)
}

fn stage_scatter(cfg: &RunConfig, ctx: &mut PipelineContext) -> Result<Vec<PathBuf>> {
    let grid = RadialGrid::uniform(cfg.scatter_r_max, cfg.scatter_points);
    let sol = solve_zero_energy(&ctx.potential, &grid)?;
    let mut family_json = Vec::new();
    let mut family = Vec::new();
    if !ctx.potential.is_zero() {
        for &ell_n in &cfg.ell_n_list {
            let n = (ell_n / cfg.ell).round() as usize;
            let fam_grid = RadialGrid::uniform((ell_n + 1.0).max(40.0), cfg.scatter_points);
            let fam = solve_neumann(&ctx.potential, cfg.ell, n, &fam_grid)?;
            let b = fam.neumann.as_ref().unwrap();
            family_json.push(Json::obj(vec![
                ("ell_N", Json::Num(b.ell_n)),
                ("lambda_ell", Json::Num(b.lambda_ell)),
                (
                    "lambda_scaled",
                    Json::Num(b.lambda_ell * b.ell_n.powi(3) / 3.0),
                ),
                ("integral_Vf", Json::Num(b.integral_v_f)),
                ("integral_w", Json::Num(b.integral_w)),
            ]));
            family.push(fam);
        }
    }
    let asym = if family.len() >= 4 {
        let rep = check_asymptotics(&family)?;
        Json::obj(vec![
            ("c1", Json::Num(rep.c1)),
            ("w_scaled_limit", Json::Num(rep.w_scaled_limit)),
            ("vf_residual_exponent", Json::Num(rep.vf_residual_exponent)),
        ])
    } else {
        Json::Null
    };
    let nodes = sol.grid.nodes();
    let profile: Vec<(f64, f64)> = nodes.iter().zip(&sol.f).map(|(&r, &f)| (r, f)).collect();
    let record = Json::obj(vec![
        ("a0", Json::Num(sol.a0)),
        ("a0_integral", Json::Num(sol.a0_integral)),
        ("family", Json::Arr(family_json)),
        ("asymptotics", asym),
        ("profile", Json::pairs(&downsample(profile))),
    ]);
    let path = cfg.out_dir.join("scatter.json");
    write_json(&path, &record)?;
    ctx.a0 = Some(ctx.a0.unwrap_or(sol.a0));
    ctx.desk_scatter = Some(sol);
    Ok(vec![path])
}

fn gp_basis(cfg: &RunConfig, trap: &TrapPotential) -> BasisDescriptor {
    let r_max = 12.0 * trap.length_scale();
    BasisDescriptor::Radial {
        n: cfg.gp_nodes,
        h: r_max / (cfg.gp_nodes as f64 + 1.0),
        channel_l: 0,
    }
}

fn stage_gp(cfg: &RunConfig, ctx: &mut PipelineContext) -> Result<Vec<PathBuf>> {
    let a0 = ctx
        .a0
        .ok_or_else(|| Error::Usage(format!("gp stage has no scattering length; {DEPENDENCY_GRAPH}")))?;
    let basis = gp_basis(cfg, &ctx.trap);
    let state = minimize_gp(&ctx.trap, a0, &basis, &SolverOptions::default())?;
    let phi = state.phi_values()?;
    let nodes = state.basis.radial_nodes()?;
    let profile: Vec<(f64, f64)> = nodes.iter().copied().zip(phi.iter().copied()).collect();
    let record = Json::obj(vec![
        ("a0", Json::Num(state.a0)),
        ("E_GP", Json::Num(state.e_gp)),
        ("eps_GP", Json::Num(state.eps_gp)),
        ("norm4", Json::Num(state.norm4)),
        ("residual", Json::Num(state.residual)),
        ("iterations", Json::Int(state.iterations as i64)),
        ("phi0", Json::pairs(&downsample(profile))),
    ]);
    let path = cfg.out_dir.join("gp.json");
    write_json(&path, &record)?;
    let mut outputs = vec![path];
    if cfg.binary_dumps {
        if let BasisDescriptor::Radial { n, h, .. } = state.basis {
            let dump = cfg.out_dir.join("phi0.bgps");
            write_state_dump(&dump, &[n as u64], h, state.phi0.as_slice())?;
            outputs.push(dump);
        }
    }
    ctx.state = Some(state);
    Ok(outputs)
}

fn stage_spectrum(cfg: &RunConfig, ctx: &mut PipelineContext) -> Result<Vec<PathBuf>> {
    let state = ctx
        .state
        .as_ref()
        .ok_or_else(|| Error::Usage(format!("spectrum stage has no GP state; {DEPENDENCY_GRAPH}")))?;
    let bundle = assemble_hgp(state, &ctx.trap)?;
    let spectrum = assemble_e(&bundle)?;
    let merged = spectrum_channels(state, &ctx.trap, cfg.max_l, cfg.count)?;
    let levels = excitation_levels(&merged, cfg.zeta)?;
    let record = Json::obj(vec![
        ("eigenvalues", Json::floats(&merged)),
        (
            "l0_eigenvalues",
            Json::floats(&spectrum.eigenvalues[..cfg.count.min(spectrum.eigenvalues.len())]),
        ),
        ("min_hgp", Json::Num(spectrum.min_hgp)),
        ("zeta", Json::Num(cfg.zeta)),
        (
            "levels",
            Json::Arr(
                levels
                    .iter()
                    .map(|l| {
                        Json::obj(vec![
                            ("value", Json::Num(l.value)),
                            ("multiplicity", Json::Int(l.multiplicity as i64)),
                        ])
                    })
                    .collect(),
            ),
        ),
    ]);
    let path = cfg.out_dir.join("spectrum.json");
    write_json(&path, &record)?;
    ctx.bundle = Some(bundle);
    ctx.spectrum = Some(spectrum);
    Ok(vec![path])
}

fn stage_kernels(cfg: &RunConfig, ctx: &mut PipelineContext) -> Result<Vec<PathBuf>> {
    let state = ctx
        .state
        .as_ref()
        .ok_or_else(|| Error::Usage(format!("kernels stage has no GP state; {DEPENDENCY_GRAPH}")))?;
    let bundle = match &ctx.bundle {
        Some(b) => b.clone(),
        None => assemble_hgp(state, &ctx.trap)?,
    };
    let spectrum = match &ctx.spectrum {
        Some(s) => s.clone(),
        None => assemble_e(&bundle)?,
    };
    let mut records = Vec::new();
    let mut reports = Vec::new();
    let mut last_k = None;
    for &n_particles in &cfg.n_list {
        let ell_n = (cfg.ell * n_particles).max(40.0);
        let grid = RadialGrid::uniform(ell_n, cfg.scatter_points);
        let scat = solve_neumann(&ctx.potential, cfg.ell, n_particles.round() as usize, &grid)?;
        let kern = build_kernels(state, &scat, n_particles)?;
        let forms = assemble_tilde_forms(&kern, &bundle)?;
        let cmp = compare_etilde_e(&forms, &spectrum, n_particles, cfg.count.min(10))?;
        records.push(Json::obj(vec![
            ("N", Json::Num(n_particles)),
            ("hs_k", Json::Num(kern.hs_k_full)),
            ("hs_eta", Json::Num(kern.hs_eta_full)),
            ("eta_phi0_norm", Json::Num(kern.eta_phi0_norm)),
            ("hyperbolic_residual", Json::Num(kern.hyperbolic_residual)),
            ("mu_ratio_sup", Json::Num(kern.mu_ratio_sup)),
            ("eta_pointwise_c", Json::Num(kern.eta_pointwise_c)),
            ("identity_d_rel", Json::Num(forms.identity_d_rel)),
            ("identity_sum_rel", Json::Num(forms.identity_sum_rel)),
            ("etilde_max_deviation", Json::Num(cmp.max_deviation)),
        ]));
        reports.push(cmp);
        last_k = Some(kern.k.clone());
    }
    let exponent = if reports.len() >= 2 {
        Json::Num(ratio_decay_exponent(&reports)?)
    } else {
        Json::Null
    };
    let record = Json::obj(vec![
        ("ell", Json::Num(cfg.ell)),
        ("cases", Json::Arr(records)),
        ("etilde_decay_exponent", exponent),
    ]);
    let path = cfg.out_dir.join("kernels.json");
    write_json(&path, &record)?;
    let mut outputs = vec![path];
    if cfg.binary_dumps {
        if let (Some(k), BasisDescriptor::Radial { h, .. }) = (last_k, state.basis.clone()) {
            let dump = cfg.out_dir.join("kernel_k.bgkm");
            write_matrix_dump(&dump, &k, h)?;
            outputs.push(dump);
        }
    }
    Ok(outputs)
}

fn stage_ebog(cfg: &RunConfig, ctx: &mut PipelineContext) -> Result<Vec<PathBuf>> {
    let state = ctx
        .state
        .as_ref()
        .ok_or_else(|| Error::Usage(format!("ebog stage has no GP state; {DEPENDENCY_GRAPH}")))?;
    let bundle = match &ctx.bundle {
        Some(b) => b.clone(),
        None => assemble_hgp(state, &ctx.trap)?,
    };
    let quad = QuadratureSpec { nodes: cfg.quad_nodes };
    let kap = ebog_kappa(&bundle, cfg.kappa, &quad)?;
    let mol = ebog_mollified(&bundle, &cfg.delta_list)?;
    let e_n: Vec<Json> = cfg
        .n_list
        .iter()
        .map(|&n| {
            Json::obj(vec![
                ("N", Json::Num(n)),
                ("E_N", Json::Num(ground_energy(n.round() as u64, state, kap.total))),
            ])
        })
        .collect();
    let record = Json::obj(vec![
        ("kappa", Json::Num(kap.kappa)),
        (
            "terms",
            Json::Obj(
                kap.terms
                    .iter()
                    .map(|(k, &v)| (k.clone(), Json::Num(v)))
                    .collect(),
            ),
        ),
        ("total", Json::Num(kap.total)),
        ("node_count", Json::Int(kap.node_count as i64)),
        ("tail_estimate", Json::Num(kap.tail_estimate)),
        (
            "mollified",
            Json::obj(vec![
                ("delta_list", Json::floats(&mol.delta_list)),
                ("values", Json::floats(&mol.values)),
                ("extrapolated", Json::Num(mol.extrapolated)),
                ("order", Json::Num(mol.order)),
                (
                    "warning",
                    match &mol.warning {
                        Some(w) => Json::Str(w.clone()),
                        None => Json::Null,
                    },
                ),
            ]),
        ),
        ("E_N", Json::Arr(e_n)),
    ]);
    let path = cfg.out_dir.join("ebog.json");
    write_json(&path, &record)?;
    Ok(vec![path])
}

/// Oracle stage: compare the closed-form diagonalizer against truncated
/// Fock-space diagonalization on explicit fixtures (when given) or on
/// seeded random admissible forms.
pub fn stage_oracle(cfg: &RunConfig, fixtures: Option<Vec<OracleFixture>>) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let fixtures = match fixtures {
        Some(f) => f,
        None => (0..cfg.oracle_cases)
            .map(|i| {
                let seed = cfg.seed.wrapping_add(i as u64);
                let modes = 1 + (i % 3);
                let (phi, gamma) = random_admissible_form(seed, modes);
                OracleFixture {
                    phi,
                    gamma,
                    n_max: cfg.oracle_n_max,
                    seed,
                }
            })
            .collect(),
    };
    let mut rows = Vec::new();
    let mut all_ok = true;
    for (i, fx) in fixtures.iter().enumerate() {
        let row = match oracle_case(fx) {
            Ok((ground_residual, level_residual)) => {
                let pass =
                    ground_residual <= ORACLE_RESIDUAL_TOL && level_residual <= ORACLE_RESIDUAL_TOL;
                all_ok &= pass;
                Json::obj(vec![
                    ("case", Json::Int(i as i64)),
                    ("modes", Json::Int(fx.phi.nrows() as i64)),
                    ("seed", Json::Int(fx.seed as i64)),
                    ("ground_residual", Json::Num(ground_residual)),
                    ("level_residual", Json::Num(level_residual)),
                    ("pass", Json::Bool(pass)),
                ])
            }
            Err(e) => {
                all_ok = false;
                Json::obj(vec![
                    ("case", Json::Int(i as i64)),
                    ("error", Json::Str(e.to_string())),
                    ("pass", Json::Bool(false)),
                ])
            }
        };
        rows.push(row);
    }
    let record = Json::obj(vec![
        ("cases", Json::Arr(rows)),
        ("all_pass", Json::Bool(all_ok)),
    ]);
    let path = cfg.out_dir.join("oracle.json");
    write_json(&path, &record)?;
    if !all_ok {
        return Err(Error::Diagnostic(
            "oracle comparison failed; see oracle.json".into(),
        ));
    }
    Ok(vec![path])
}

fn oracle_case(fx: &OracleFixture) -> Result<(f64, f64)> {
    let levels = 6;
    let oracle = oracle_spectrum(&fx.phi, &fx.gamma, fx.n_max, levels)?;
    let diag = diagonalize_quadratic(&QuadraticForm::new(fx.phi.clone(), fx.gamma.clone())?)?;
    let cmp = compare_spectrum(&oracle, &diag, levels)?;
    Ok((cmp.ground_residual, cmp.level_residual))
}

fn stage_validate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let report = run_suite(default_fixtures(cfg)?);
    let path = cfg.out_dir.join("validate.json");
    write_json(&path, &report.to_json())?;
    let table_path = cfg.out_dir.join("validate.txt");
    std::fs::write(&table_path, report.table())?;
    print!("{}", report.table());
    if !report.all_passed() {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(Error::Diagnostic(format!(
            "validation failures: {}",
            names.join(", ")
        )));
    }
    Ok(vec![path, table_path])
}

/// Plot-data extraction from stage outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Dispersion,
    Phi0Profile,
    NeumannAsymptotics,
    EbogTerms,
}

impl PlotKind {
    pub fn from_name(name: &str) -> Result<PlotKind> {
        match name {
            "dispersion" => Ok(PlotKind::Dispersion),
            "phi0-profile" => Ok(PlotKind::Phi0Profile),
            "neumann-asymptotics" => Ok(PlotKind::NeumannAsymptotics),
            "ebog-terms" => Ok(PlotKind::EbogTerms),
            _ => Err(Error::Usage(format!(
                "unknown plot kind '{name}' (dispersion, phi0-profile, neumann-asymptotics, ebog-terms)"
            ))),
        }
    }
}

fn load_stage_json(out_dir: &Path, file: &str) -> Result<serde_json::Value> {
    let path = out_dir.join(file);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        Error::Usage(format!(
            "stage output {} not found ({e}); run the stage first",
            path.display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Write the requested CSV next to the stage outputs and return its path.
pub fn emit_plot_data(out_dir: &Path, which: PlotKind) -> Result<PathBuf> {
    let (name, csv) = match which {
        PlotKind::Dispersion => {
            let v = load_stage_json(out_dir, "spectrum.json")?;
            let eigs = v["eigenvalues"]
                .as_array()
                .ok_or_else(|| Error::Validation("spectrum.json lacks eigenvalues".into()))?;
            let mut csv = String::from("index,e_j\n");
            for (i, e) in eigs.iter().enumerate() {
                csv.push_str(&format!("{},{:.16e}\n", i, e.as_f64().unwrap_or(f64::NAN)));
            }
            ("dispersion.csv", csv)
        }
        PlotKind::Phi0Profile => {
            let v = load_stage_json(out_dir, "gp.json")?;
            let pairs = v["phi0"]
                .as_array()
                .ok_or_else(|| Error::Validation("gp.json lacks phi0".into()))?;
            let mut csv = String::from("r,phi0\n");
            for p in pairs {
                csv.push_str(&format!(
                    "{:.16e},{:.16e}\n",
                    p[0].as_f64().unwrap_or(f64::NAN),
                    p[1].as_f64().unwrap_or(f64::NAN)
                ));
            }
            ("phi0_profile.csv", csv)
        }
        PlotKind::NeumannAsymptotics => {
            let v = load_stage_json(out_dir, "scatter.json")?;
            let family = v["family"]
                .as_array()
                .ok_or_else(|| Error::Validation("scatter.json lacks the Neumann family".into()))?;
            let mut csv = String::from("ellN,lambda_scaled\n");
            for f in family {
                csv.push_str(&format!(
                    "{:.16e},{:.16e}\n",
                    f["ell_N"].as_f64().unwrap_or(f64::NAN),
                    f["lambda_scaled"].as_f64().unwrap_or(f64::NAN)
                ));
            }
            ("neumann_asymptotics.csv", csv)
        }
        PlotKind::EbogTerms => {
            let v = load_stage_json(out_dir, "ebog.json")?;
            let terms = v["terms"]
                .as_object()
                .ok_or_else(|| Error::Validation("ebog.json lacks terms".into()))?;
            let mut csv = String::from("term,value\n");
            for (k, val) in terms {
                csv.push_str(&format!("{},{:.16e}\n", k, val.as_f64().unwrap_or(f64::NAN)));
            }
            ("ebog_terms.csv", csv)
        }
    };
    let path = out_dir.join(name);
    std::fs::write(&path, csv)?;
    Ok(path)
}

/// Parse a comma- or space-separated stage list.
pub fn parse_stages(list: &str) -> Result<BTreeSet<Stage>> {
    let mut out = BTreeSet::new();
    for tok in list.split([',', ' ']).filter(|t| !t.is_empty()) {
        if tok == "all" {
            out.extend(Stage::ALL);
        } else {
            out.insert(Stage::from_name(tok)?);
        }
    }
    if out.is_empty() {
        return validation("empty stage list");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_config(dir: &Path) -> RunConfig {
        RunConfig {
            a0_override: Some(0.25),
            gp_nodes: 120,
            n_list: vec![30.0],
            quad_nodes: 32,
            delta_list: vec![0.8, 0.4],
            scatter_points: 1000,
            ell_n_list: vec![50.0, 100.0, 200.0, 400.0],
            count: 6,
            oracle_cases: 2,
            oracle_n_max: 14,
            out_dir: dir.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn dependency_checks_fire() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = fast_config(dir.path());
        let stages = parse_stages("spectrum").unwrap();
        assert!(matches!(run_pipeline(&cfg, &stages), Err(Error::Usage(_))));
        cfg.a0_override = None;
        let stages = parse_stages("gp").unwrap();
        assert!(matches!(run_pipeline(&cfg, &stages), Err(Error::Usage(_))));
        let stages = parse_stages("gp,ebog,spectrum").unwrap();
        assert!(run_pipeline(&cfg, &stages).is_err());
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(Stage::from_name(s.name()).unwrap(), s);
        }
        assert!(Stage::from_name("scattering").is_err());
        assert_eq!(parse_stages("all").unwrap().len(), 7);
        assert!(parse_stages("").is_err());
    }

    #[test]
    fn pipeline_outputs_are_reproducible() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let stages = parse_stages("gp,spectrum,ebog").unwrap();
        let man_a = run_pipeline(&fast_config(dir_a.path()), &stages).unwrap();
        let man_b = run_pipeline(&fast_config(dir_b.path()), &stages).unwrap();
        // Same configuration (output directory aside) produces identical
        // stage bytes.
        for file in ["gp.json", "spectrum.json", "ebog.json"] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between identical runs");
        }
        assert_eq!(man_a.stages.len(), 3);
        // Every written file is listed in the manifest.
        for rec in &man_a.stages {
            for out in &rec.outputs {
                assert!(out.is_file(), "{} missing", out.display());
            }
        }
        assert_eq!(man_b.stages.len(), 3);
    }

    #[test]
    fn oracle_stage_passes_on_seeded_forms() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fast_config(dir.path());
        let outputs = stage_oracle(&cfg, None).unwrap();
        assert!(outputs[0].is_file());
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&outputs[0]).unwrap()).unwrap();
        assert_eq!(v["all_pass"], true);
    }

    #[test]
    fn plot_emission_reads_stage_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fast_config(dir.path());
        let stages = parse_stages("gp,spectrum,ebog").unwrap();
        run_pipeline(&cfg, &stages).unwrap();
        let p = emit_plot_data(dir.path(), PlotKind::Dispersion).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("index,e_j\n"));
        let p = emit_plot_data(dir.path(), PlotKind::EbogTerms).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), 9, "8 terms plus header");
        assert!(emit_plot_data(dir.path(), PlotKind::NeumannAsymptotics).is_err());
        assert!(PlotKind::from_name("sonogram").is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fast_config(dir.path());
        let h1 = config_hash(&cfg);
        let h2 = config_hash(&cfg);
        assert_eq!(h1, h2);
        let mut other = cfg.clone();
        other.kappa = 6.0;
        assert_ne!(h1, config_hash(&other));
        assert_eq!(h1.len(), 64);
    }
}

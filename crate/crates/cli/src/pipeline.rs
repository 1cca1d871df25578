//! Subcommand pipelines: each builds what it needs from the configuration,
//! writes plot-ready CSV/JSON artifacts through an atomic output stage, and
//! reports named pass/fail checks that drive the exit status.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use cracklab::audit::{
    boundary_identity_residual, coercivity_audit, coercivity_probe_fields, hardy_residual,
    pohozaev_residual, probe_r0, star_shaped_upstairs, AuditReport, PohozaevMode,
};
use cracklab::fem::{assemble_solve, h1_distance, weak_residual, ScalarField, SolveReport};
use cracklab::frequency::{blowup_convergence, estimate_limit, frequency_profile, upsilon_beta, SphericalBasis};
use cracklab::io;
use cracklab::potential::PotentialSpec;
use cracklab::sphere::solve_eigenpairs;
use cracklab::straighten::{build_bundle, CoefficientBundle};
use cracklab::tetmesh::{build_approx_domain, build_slit_ball, MeshParams, TetMesh};
use cracklab::{Error, Result};

use crate::acceptance::{self, AcceptanceParams, Lab};
use crate::config::RunConfig;
use crate::manifest::{CheckLine, OutputStage, RunManifest, RunSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Spectrum,
    Solve,
    Frequency,
    Blowup,
    Fourier,
    Audit,
    Approx,
    Verify,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Solve => "solve",
            Subcommand::Frequency => "frequency",
            Subcommand::Blowup => "blowup",
            Subcommand::Fourier => "fourier",
            Subcommand::Audit => "audit",
            Subcommand::Approx => "approx",
            Subcommand::Verify => "verify",
        }
    }
}

pub struct RunOutcome {
    pub pass: bool,
    pub checks: Vec<CheckLine>,
    pub published: std::path::PathBuf,
}

/// Workspace shared by the solve-based pipelines.
struct SolveCtx {
    bundle: CoefficientBundle,
    mesh: Arc<TetMesh>,
    solution: ScalarField,
    report: SolveReport,
}

fn build_solve_ctx(cfg: &RunConfig) -> Result<SolveCtx> {
    let bundle = build_bundle(&cfg.crack)?;
    let mut pins = cfg.radii.resolve();
    pins.extend_from_slice(&cfg.lambdas);
    pins.extend_from_slice(&cfg.fourier.r_values);
    let mut params = MeshParams::new(cfg.mesh.r, cfg.mesh.h).with_pins(&pins);
    params.pole_levels = cfg.mesh.grading_levels();
    params.radial_levels = cfg.mesh.grading_levels();
    let mesh = build_slit_ball(&params)?;
    let (solution, report) = {
        let data = cfg.boundary.evaluator(&bundle);
        assemble_solve(&mesh, &bundle, &cfg.potential, data.as_ref())?
    };
    Ok(SolveCtx { bundle, mesh, solution, report })
}

fn sphere_basis(ctx: &SolveCtx, count: usize) -> Result<SphericalBasis> {
    let sphere = Arc::new(ctx.mesh.dirs.clone());
    let pairs = solve_eigenpairs(&sphere, count)?;
    Ok(SphericalBasis::new(sphere, pairs))
}

pub fn run(sub: Subcommand, cfg: &RunConfig) -> Result<RunOutcome> {
    let mut stage = OutputStage::create(&cfg.output_dir)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    let mut checks: Vec<CheckLine> = Vec::new();
    let mut constants = serde_json::Map::new();
    let mut r0_out = None;

    match sub {
        Subcommand::Spectrum => {
            let mesh = cracklab::sphere::build_slit_sphere_mesh(2, cfg.spectrum.h_sphere)?;
            let pairs = solve_eigenpairs(&mesh, cfg.spectrum.count)?;
            stage.write("eigenpairs.json", &io::eigenpairs_to_json(&mesh, &pairs)?)?;
            stage.write("spheremesh.txt", &io::sphere_mesh_to_ascii(&mesh))?;
            for (pass, detail) in acceptance::spectrum_invariants(&mesh, &pairs) {
                checks.push(CheckLine { name: "spectrum-invariant".into(), pass, detail });
            }
            for p in &pairs {
                checks.push(CheckLine {
                    name: "eigenvalue".into(),
                    pass: p.k_index.is_some(),
                    detail: format!(
                        "mu = {:.6}, k_index = {:?}, cluster {}",
                        p.mu, p.k_index, p.multiplicity_cluster
                    ),
                });
            }
        }
        Subcommand::Solve => {
            let ctx = build_solve_ctx(cfg)?;
            stage.write("mesh.txt", &io::tet_mesh_to_ascii(&ctx.mesh))?;
            stage.write("field.txt", &io::field_to_ascii(&ctx.solution))?;
            let (res, load) = weak_residual(&ctx.mesh, &ctx.bundle, &cfg.potential, &ctx.solution)?;
            let report = serde_json::json!({
                "unknowns": ctx.report.unknowns,
                "iterations": ctx.report.iterations,
                "relative_residual": ctx.report.relative_residual,
                "weak_residual": res,
                "load_norm": load,
            });
            stage.write("solve_report.json", &serde_json::to_string_pretty(&report).unwrap())?;
            checks.push(CheckLine {
                name: "galerkin-residual".into(),
                pass: res <= 1e-9 * load,
                detail: format!("interior weak residual {res:.3e} vs load {load:.3e}"),
            });
        }
        Subcommand::Frequency => {
            let ctx = build_solve_ctx(cfg)?;
            let radii = cfg.radii.resolve();
            let profile = frequency_profile(&ctx.solution, &ctx.bundle, &cfg.potential, &radii)?;
            stage.write("profile.csv", &io::profile_to_csv(&profile)?)?;
            stage.write(
                "profile.json",
                &serde_json::to_string_pretty(&io::profile_sidecar(&profile)).unwrap(),
            )?;
            checks.push(CheckLine {
                name: "frequency-bounds".into(),
                pass: profile.frequency.iter().all(|n| *n > -0.25),
                detail: "N(r) > -(N-1)/4 along the grid".into(),
            });
            if profile.radii.len() >= 5 {
                let est = estimate_limit(&profile)?;
                constants.insert("ell".into(), est.ell.into());
                constants
                    .insert("monotone_defect".into(), est.monotone_defect.into());
                checks.push(CheckLine {
                    name: "limit-fit".into(),
                    pass: est.ell.is_finite(),
                    detail: format!("ell = {:.5}, k0 = {:?}", est.ell, est.k0),
                });
            }
        }
        Subcommand::Blowup => {
            let ctx = build_solve_ctx(cfg)?;
            let radii = cfg.radii.resolve();
            let profile = frequency_profile(&ctx.solution, &ctx.bundle, &cfg.potential, &radii)?;
            let est = estimate_limit(&profile)?;
            let k0 = est.k0.ok_or_else(|| {
                Error::Precondition(format!("limit ell = {:.4} matched no half-integer", est.ell))
            })?;
            let basis = sphere_basis(&ctx, cfg.spectrum.count)?;
            let mut ref_params =
                MeshParams::new(1.0, (2.0 * cfg.mesh.h).min(0.25)).with_pins(&[0.5]);
            ref_params.pole_levels = cfg.mesh.grading_levels();
            let reference = build_slit_ball(&ref_params)?;
            let errors = blowup_convergence(
                &ctx.solution,
                &ctx.bundle,
                &cfg.potential,
                &cfg.lambdas,
                &basis,
                k0,
                &reference,
            )?;
            let mut csv = String::from("lambda,h1_error\n");
            for (l, e) in cfg.lambdas.iter().zip(&errors) {
                let _ = writeln!(csv, "{},{}", io::fmt_f64(*l), io::fmt_f64(*e));
            }
            stage.write("blowup.csv", &csv)?;
            constants.insert("k0".into(), k0.into());
            checks.push(CheckLine {
                name: "blowup".into(),
                pass: errors.iter().all(|e| e.is_finite()),
                detail: format!("errors {errors:?}"),
            });
        }
        Subcommand::Fourier => {
            let ctx = build_solve_ctx(cfg)?;
            let radii = cfg.radii.resolve();
            let profile = frequency_profile(&ctx.solution, &ctx.bundle, &cfg.potential, &radii)?;
            let est = estimate_limit(&profile)?;
            let k0 = est.k0.ok_or_else(|| {
                Error::Precondition(format!("limit ell = {:.4} matched no half-integer", est.ell))
            })?;
            let basis = sphere_basis(&ctx, cfg.spectrum.count)?;
            let r_upper = cfg
                .fourier
                .r_values
                .iter()
                .cloned()
                .fold(f64::NAN, f64::max);
            let grid: Vec<f64> =
                radii.iter().cloned().filter(|l| *l <= r_upper + 1e-12).collect();
            let table = upsilon_beta(
                &ctx.solution,
                &ctx.bundle,
                &cfg.potential,
                &basis,
                k0,
                &grid,
                r_upper,
            )?;
            stage.write("fourier.csv", &io::fourier_to_csv(&table))?;
            stage.write(
                "fourier.json",
                &serde_json::to_string_pretty(&io::fourier_summary(&table)).unwrap(),
            )?;
            // beta per R for the R-independence report
            let mut by_r = serde_json::Map::new();
            for &rv in &cfg.fourier.r_values {
                let grid: Vec<f64> = radii.iter().cloned().filter(|l| *l <= rv + 1e-12).collect();
                let t = upsilon_beta(
                    &ctx.solution,
                    &ctx.bundle,
                    &cfg.potential,
                    &basis,
                    k0,
                    &grid,
                    rv,
                )?;
                by_r.insert(format!("{rv}"), serde_json::json!(t.beta));
            }
            stage.write(
                "beta_by_R.json",
                &serde_json::to_string_pretty(&serde_json::Value::Object(by_r)).unwrap(),
            )?;
            checks.push(CheckLine {
                name: "fourier".into(),
                pass: table.beta.iter().all(|b| b.is_finite()),
                detail: format!("beta = {:?}", table.beta),
            });
        }
        Subcommand::Audit => {
            let ctx = build_solve_ctx(cfg)?;
            let scale = cfg.tolerance_scale;
            let probes = coercivity_probe_fields(&ctx.mesh, cfg.seed, 5);
            let radii = cfg.radii.resolve();
            let mut trial: Vec<f64> = radii.clone();
            trial.reverse();
            let consts = probe_r0(&ctx.bundle, &cfg.potential, &probes, &trial, scale)?;
            r0_out = Some(consts.r0);
            constants.insert("coercivity_c".into(), consts.c.into());
            constants.insert("coercivity_eps".into(), consts.eps.into());
            constants.insert("lipschitz_bound".into(), ctx.bundle.lipschitz_bound.into());
            let audit_radii: Vec<f64> =
                radii.iter().cloned().filter(|r| *r <= consts.r0 + 1e-12).collect();
            let names: Vec<String> = if cfg.audits.is_empty() {
                ["hardy", "coercivity", "pohozaev", "boundary_identity", "star_shaped"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect()
            } else {
                cfg.audits.clone()
            };
            let mut reports: Vec<AuditReport> = Vec::new();
            for name in &names {
                match name.as_str() {
                    "hardy" => {
                        for &r in &audit_radii {
                            reports.push(hardy_residual(&ctx.solution, r, scale)?);
                        }
                    }
                    "coercivity" => {
                        for &r in &audit_radii {
                            reports.push(coercivity_audit(
                                &ctx.solution,
                                &ctx.bundle,
                                &cfg.potential,
                                r,
                                consts.c,
                                scale,
                            )?);
                        }
                    }
                    "pohozaev" => {
                        let mode = match cfg.potential {
                            PotentialSpec::A2 { .. } => PohozaevMode::A2Inequality,
                            _ => PohozaevMode::A1Inequality,
                        };
                        for &r in &audit_radii {
                            reports.push(pohozaev_residual(
                                &ctx.solution,
                                &ctx.bundle,
                                &cfg.potential,
                                r,
                                mode,
                                scale,
                            )?);
                        }
                    }
                    "boundary_identity" => {
                        for &r in &audit_radii {
                            reports.push(boundary_identity_residual(
                                &ctx.solution,
                                &ctx.bundle,
                                &cfg.potential,
                                r,
                                scale,
                            )?);
                        }
                    }
                    "star_shaped" => {
                        for &n in &cfg.approx.ns {
                            let star = star_shaped_upstairs(
                                &ctx.bundle,
                                cfg.mesh.r,
                                n,
                                cfg.approx.alpha,
                                20_000,
                            )?;
                            checks.push(CheckLine {
                                name: format!("star_shaped[n={n}]"),
                                pass: star.min_value >= -1e-10,
                                detail: format!("min A x.nu = {:.3e}", star.min_value),
                            });
                        }
                    }
                    other => {
                        return Err(Error::Precondition(format!("unknown audit {other:?}")));
                    }
                }
            }
            stage.write("audits.json", &serde_json::to_string_pretty(&reports).unwrap())?;
            stage.write("audits.txt", &io::audit_table(&reports))?;
            for r in &reports {
                checks.push(CheckLine {
                    name: format!("{}[r={:?}]", r.name, r.context.radius),
                    pass: r.pass,
                    detail: format!("residual {:.3e} tol {:.3e}", r.residual, r.tolerance),
                });
            }
        }
        Subcommand::Approx => {
            let bundle = build_bundle(&cfg.crack)?;
            let mut params = MeshParams::new(cfg.mesh.r, cfg.mesh.h)
                .with_pins(&cfg.radii.resolve());
            params.pole_levels = cfg.mesh.grading_levels();
            params.radial_levels = cfg.mesh.grading_levels();
            let ball = build_slit_ball(&params)?;
            let data = cfg.boundary.evaluator(&bundle);
            let (u, _) = assemble_solve(&ball, &bundle, &cfg.potential, data.as_ref())?;
            let mut csv = String::from("n,star_min,h1_distance,l2_distance,volume\n");
            let mut prev = f64::INFINITY;
            let mut decreasing = true;
            for &n in &cfg.approx.ns {
                let star = star_shaped_upstairs(&bundle, cfg.mesh.r, n, cfg.approx.alpha, 20_000)?;
                let approx = build_approx_domain(&params, n, cfg.approx.alpha)?;
                let (u_n, _) = assemble_solve(&approx, &bundle, &cfg.potential, data.as_ref())?;
                let dist = h1_distance(&u_n, &u, cfg.mesh.r)?;
                decreasing &= dist.h1 < prev;
                prev = dist.h1;
                checks.push(CheckLine {
                    name: format!("star_shaped[n={n}]"),
                    pass: star.min_value >= -1e-10,
                    detail: format!("min A x.nu = {:.3e}", star.min_value),
                });
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    n,
                    io::fmt_f64(star.min_value),
                    io::fmt_f64(dist.h1),
                    io::fmt_f64(dist.l2),
                    io::fmt_f64(approx.total_volume()),
                );
            }
            stage.write("approx.csv", &csv)?;
            checks.push(CheckLine {
                name: "h1-convergence".into(),
                pass: decreasing,
                detail: "h1 distance U_n vs U strictly decreasing along n".into(),
            });
        }
        Subcommand::Verify => {
            let lab = Lab::new(params_from_config(cfg));
            let outcomes = acceptance::run_all(&lab)?;
            let mut text = String::new();
            for o in &outcomes {
                let _ = writeln!(text, "{}", o.summary_line());
                for l in &o.lines {
                    let _ = writeln!(text, "    {l}");
                }
                checks.push(CheckLine {
                    name: format!("criterion-{}", o.index),
                    pass: o.pass,
                    detail: o.label.clone(),
                });
            }
            stage.write("criteria.txt", &text)?;
            stage.write(
                "criteria.json",
                &serde_json::to_string_pretty(&outcomes).unwrap(),
            )?;
            if let Ok(ctx) = lab.flagship() {
                r0_out = Some(ctx.r0.r0);
                constants.insert("coercivity_c".into(), ctx.r0.c.into());
                constants.insert("coercivity_eps".into(), ctx.r0.eps.into());
                constants.insert("lipschitz_bound".into(), ctx.bundle.lipschitz_bound.into());
            }
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    let manifest = RunManifest {
        config_hash: cfg.canonical_hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        r0: r0_out,
        constants,
        files: Vec::new(),
        summary: RunSummary { pass, checks: checks.clone() },
    };
    let published = stage
        .finish(manifest)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(RunOutcome { pass, checks, published })
}

/// Derive acceptance sizes from a run configuration (the verify subcommand).
pub fn params_from_config(cfg: &RunConfig) -> AcceptanceParams {
    let flagship = AcceptanceParams::flagship();
    AcceptanceParams {
        sphere_runs: if cfg.spectrum.h_sphere <= 0.05 {
            flagship.sphere_runs.clone()
        } else {
            vec![(cfg.spectrum.h_sphere, 0.12)]
        },
        spectrum_count: cfg.spectrum.count,
        mesh_r: cfg.mesh.r,
        mesh_h: cfg.mesh.h,
        grading_levels: cfg.mesh.grading_levels(),
        crack_c: match cfg.crack.family {
            cracklab::CrackFamily::RadialQuadratic { c } => c,
            _ => flagship.crack_c,
        },
        potential: cfg.potential.clone(),
        freq_radii: cfg.radii.resolve(),
        lambdas: cfg.lambdas.clone(),
        poho_radii: cfg.radii.resolve(),
        probe_radii: {
            let mut r = cfg.radii.resolve();
            r.reverse();
            r
        },
        fourier_rs: cfg.fourier.r_values.clone(),
        approx_h: cfg.mesh.h.max(0.0625),
        approx_ns: cfg.approx.ns.clone(),
        alpha: cfg.approx.alpha,
        identity_n: *cfg.approx.ns.last().unwrap_or(&1024),
        identity_radius: flagship.identity_radius.min(cfg.mesh.r * 0.7),
        identity_delta: cfg.approx.delta,
        tol_scale: cfg.tolerance_scale,
        seed: cfg.seed,
    }
}

/// Directory comparison for the determinism contract: relative paths and
/// byte-identical contents.
pub fn dirs_bit_identical(a: &Path, b: &Path) -> std::io::Result<(bool, String)> {
    fn walk(dir: &Path, base: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                walk(&path, base, out)?;
            } else {
                out.push(path.strip_prefix(base).unwrap().to_string_lossy().into_owned());
            }
        }
        Ok(())
    }
    let mut fa = Vec::new();
    let mut fb = Vec::new();
    walk(a, a, &mut fa)?;
    walk(b, b, &mut fb)?;
    fa.sort();
    fb.sort();
    if fa != fb {
        return Ok((false, format!("file lists differ: {fa:?} vs {fb:?}")));
    }
    for rel in &fa {
        let ba = std::fs::read(a.join(rel))?;
        let bb = std::fs::read(b.join(rel))?;
        if ba != bb {
            return Ok((false, format!("file {rel} differs")));
        }
    }
    Ok((true, format!("{} files bit-identical", fa.len())))
}

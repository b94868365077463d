use crate::config::ExperimentConfig;
use crate::{BubbleArgs, CliError, FitArgs, InteractArgs, ProjectArgs, SweepArgs, VerifyArgs};
use bubblelab::bubbles::{critical_exponent, dimensional_constant, sobolev_energy, BubbleParams};
use bubblelab::domain::{DomainKind, DomainModel, Field, GridSpec, Mesh};
use bubblelab::exec::Execution;
use bubblelab::experiments::{
    boundary_schedule, boundary_sweep, exponent_sweep, plot_script, write_sweep_csv, BoundaryGrid, BoundaryRegime, ExperimentOptions,
    ExperimentRecord,
};
use bubblelab::fit::{distance_functional, multistart_grid, write_fit_csv, FitContext, FitOptions};
use bubblelab::interaction::{inequality_suite, pair_quantities, structural_constants, write_constants_csv};
use bubblelab::scaling::fit_power_law;
use bubblelab::solver::{center_expansion_defect, estimate_lambda1, lambda1_ball, solve_ground_state, ProjectionKind, Projector, SOLVER_TOLERANCE};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Write to `path`, or stdout when absent.
fn emit(path: Option<&Path>, body: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(body)?;
            f.flush()?;
        }
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

fn check_dimension(n: usize) -> Result<(), CliError> {
    if n < 3 {
        return Err(CliError::config(format!("dimension must be at least 3, got {n}")));
    }
    Ok(())
}

/// `λ` from a fraction of `λ₁`; pu2 needs one, pu1 ignores it.
fn shift(kind: ProjectionKind, frac: Option<f64>, lambda1: impl FnOnce() -> Result<f64, CliError>) -> Result<f64, CliError> {
    match (kind, frac) {
        (ProjectionKind::Pu2, None) => Err(CliError::config("pu2 needs --lambda-frac")),
        (_, Some(f)) if !(f > 0.0 && f < 1.0) => Err(CliError::config(format!("--lambda-frac must lie in (0, 1), got {f}"))),
        (_, Some(f)) => Ok(f * lambda1()?),
        (ProjectionKind::Pu1, None) => Ok(0.0),
    }
}

pub fn bubble(a: &BubbleArgs) -> Result<(), CliError> {
    check_dimension(a.n)?;
    let mut out = String::new();
    out.push_str(&format!("n = {}\ncritical exponent p = {}\nnormalizing constant a_n = {:.15e}\n", a.n, critical_exponent(a.n), dimensional_constant(a.n)));
    if a.energy {
        let (s0, j) = sobolev_energy(a.n)?;
        out.push_str(&format!("sobolev constant S0 = {s0:.15e}\nbubble energy J(U) = {j:.15e}\n"));
    }
    if !a.radii.is_empty() {
        let b = BubbleParams::centered(a.n, 1.0)?;
        out.push_str("r,U\n");
        for r in &a.radii {
            out.push_str(&format!("{r},{:.15e}\n", b.profile(r * r)));
        }
    }
    if a.constants {
        let mut buf = Vec::new();
        write_constants_csv(&mut buf, &[structural_constants(a.n)?])?;
        out.push_str(&String::from_utf8_lossy(&buf));
    }
    emit(None, out.as_bytes())
}

pub fn project(a: &ProjectArgs) -> Result<(), CliError> {
    check_dimension(a.n)?;
    let lambda = shift(a.kind, a.lambda_frac, || Ok(lambda1_ball(a.n)?))?;
    if a.delta.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(CliError::config("every --delta must lie in (0, 1)"));
    }
    if a.center && a.kind != ProjectionKind::Pu1 {
        return Err(CliError::config("--center compares against the harmonic closed form; use --kind pu1"));
    }
    let mesh = Mesh::build(&DomainModel::unit_ball(a.n)?, &GridSpec::radial(a.cells))?;
    let mut csv = String::from(if a.center { "delta,defect,closed_form_error\n" } else { "delta,defect\n" });
    let mut defects = Vec::with_capacity(a.delta.len());
    let mut worst = 0.0f64;
    for &d in &a.delta {
        let e = center_expansion_defect(&mesh, a.kind, lambda, d)?;
        csv.push_str(&format!("{d:e},{e:.10e}"));
        if a.center {
            let rel = closed_form_error(&mesh, d)?;
            worst = worst.max(rel);
            csv.push_str(&format!(",{rel:.3e}"));
        }
        csv.push('\n');
        defects.push(e);
    }
    emit(a.output.as_deref(), csv.as_bytes())?;
    let bound = 10.0 * SOLVER_TOLERANCE;
    if worst > bound {
        return Err(CliError::check(format!("closed-form error {worst:.3e} exceeds {bound:.0e}")));
    }
    if let Some(path) = &a.field {
        let pu = Projector::new(&mesh, a.kind, lambda)?.bubble(&BubbleParams::centered(a.n, a.delta[0])?)?;
        let mut buf = Vec::new();
        pu.write_csv(&mut buf)?;
        emit(Some(path), &buf)?;
    }
    if a.delta.len() >= 3 {
        // The shifted defect carries one logarithm.
        let log_power = if a.kind == ProjectionKind::Pu2 { 1.0 } else { 0.0 };
        let fit = fit_power_law(&a.delta, &defects, log_power)?;
        eprintln!("defect exponent {:.3} (log power {log_power}), leave-one-out [{:.3}, {:.3}]", fit.slope, fit.loo_min, fit.loo_max);
    }
    Ok(())
}

/// `max |PU − (U − aₙ(δ/(1+δ²))^{(n−2)/2})| / max U` for the harmonic
/// projection of a centered bubble on the unit ball.
fn closed_form_error(mesh: &std::sync::Arc<Mesh>, delta: f64) -> Result<f64, CliError> {
    let n = mesh.n();
    let b = BubbleParams::centered(n, delta)?;
    let pu = Projector::new(mesh, ProjectionKind::Pu1, 0.0)?.bubble(&b)?;
    let c = dimensional_constant(n) * (delta / (1.0 + delta * delta)).powf((n as f64 - 2.0) / 2.0);
    let err = pu.values().iter().enumerate().map(|(i, v)| (v - (b.value(mesh.node(i)) - c)).abs()).fold(0.0, f64::max);
    Ok(err / b.value(&vec![0.0; n]))
}

pub fn interact(a: &InteractArgs, exec: Execution) -> Result<(), CliError> {
    check_dimension(a.n)?;
    let mut out = String::new();
    if !a.pair.is_empty() && a.pair.len() != 3 {
        return Err(CliError::config("--pair takes three numbers: delta1,delta2,distance"));
    }
    if let [di, dj, dist] = a.pair[..] {
        let bi = BubbleParams::centered(a.n, di)?;
        let mut x = vec![0.0; a.n];
        x[0] = dist;
        let bj = BubbleParams::new(a.n, dj, x)?;
        let p = pair_quantities(&bi, &bj)?;
        out.push_str(&format!("q = {:.15e}\nR = {:.15e}\nregime = {:?}\n", p.q, p.r, p.regime));
    }
    if a.constants {
        let mut buf = Vec::new();
        write_constants_csv(&mut buf, &[structural_constants(a.n)?])?;
        out.push_str(&String::from_utf8_lossy(&buf));
    }
    let mut failed = Vec::new();
    if a.inequalities {
        for c in inequality_suite(a.samples, a.seed, exec)? {
            out.push_str(&format!("{} {} max constant {:.6e}\n", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.max_constant));
            if !c.passed() {
                failed.push(c.name);
            }
        }
    }
    emit(None, out.as_bytes())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::check(format!("inequalities failed: {}", failed.join(", "))))
    }
}

pub fn fit(a: &FitArgs, exec: Execution) -> Result<(), CliError> {
    let file = File::open(&a.input).map_err(|e| CliError::config(format!("cannot open {}: {e}", a.input.display())))?;
    let u = Field::read_csv(BufReader::new(file))?;
    let mesh = u.mesh().clone();
    let lambda = shift(a.kind, a.lambda_frac, || match mesh.domain().kind() {
        DomainKind::Ball { radius } => Ok(lambda1_ball(mesh.n())? / (radius * radius)),
        DomainKind::Box { .. } => Ok(estimate_lambda1(mesh.domain(), mesh.grid())?),
    })?;
    let ctx = FitContext::new(&mesh, a.kind, lambda)?;
    let starts = multistart_grid(&mesh, a.nu, a.starts, a.seed)?;
    let report = distance_functional(&ctx, &u, None, &starts, FitOptions { exec, ..FitOptions::default() })?;
    let mut buf = Vec::new();
    write_fit_csv(&mut buf, &report.rows)?;
    emit(a.output.as_deref(), &buf)?;
    eprintln!("best distance {:.6e}, orthogonality {:.3e}", report.best.distance, report.best.ortho_max());
    Ok(())
}

/// File manifest with the command-line overrides applied.
fn merged_config(a: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(label) = &a.regime {
        cfg.regime = crate::config::RegimeSection { label: Some(label.clone()), ..Default::default() };
    }
    if a.deltas.is_some() {
        cfg.sweep.deltas = a.deltas.clone();
    }
    if a.lambda_frac.is_some() {
        cfg.domain.lambda_fraction = a.lambda_frac;
    }
    if a.cells.is_some() {
        cfg.domain.radial_cells = a.cells;
    }
    if a.seed.is_some() {
        cfg.sweep.seed = a.seed;
    }
    if a.output_dir.is_some() {
        cfg.output.dir = a.output_dir.clone();
    }
    Ok(cfg)
}

pub fn sweep(a: &SweepArgs, exec: Execution) -> Result<(), CliError> {
    let cfg = merged_config(a)?;
    let regime = cfg.validated_regime()?;
    let deltas = cfg.deltas()?;
    let inp = regime.inputs;
    let domain = DomainModel::unit_ball(inp.n)?;
    let lambda = cfg.lambda_fraction()? * lambda1_ball(inp.n)?;
    let defaults = ExperimentOptions::default();
    let opts = ExperimentOptions {
        seed: cfg.sweep.seed.unwrap_or(defaults.seed),
        newton_tolerance: cfg.sweep.newton_tolerance.unwrap_or(defaults.newton_tolerance),
        fit: FitOptions { exec, tolerance: cfg.sweep.fit_tolerance.unwrap_or(defaults.fit.tolerance), ..defaults.fit },
        exec,
        ..defaults
    };

    let (records, summary, verdict): (Vec<ExperimentRecord>, String, Option<bool>) = match inp.boundary {
        BoundaryRegime::Interior => {
            let (ctx, u0) = if inp.u0_positive {
                let grid = cfg.domain.radial_cells.map(|cells| GridSpec::Radial { cells, core: 1e-6, wall: 1e-3 });
                let gs = solve_ground_state(&domain, lambda, grid)?;
                if let Some(mu) = gs.linearized_gap {
                    eprintln!("background: smallest linearized eigenvalue {mu:.4e}");
                }
                let u0 = gs.u0.ok_or_else(|| CliError::config(format!("no positive background at λ = {lambda:.6}: raise lambda_fraction")))?;
                (FitContext::new(u0.mesh(), inp.kind, lambda)?, Some(u0))
            } else {
                let mesh = Mesh::build(&domain, &GridSpec::radial(cfg.domain.radial_cells.unwrap_or(8000)))?;
                (FitContext::new(&mesh, inp.kind, lambda)?, None)
            };
            let rep = exponent_sweep(&ctx, u0.as_ref(), &regime, &deltas, &opts)?;
            for (d, why) in &rep.failures {
                eprintln!("skipped δ = {d}: {why}");
            }
            let summary = format!(
                "{}: exponent {:.4} (reference {}), leave-one-out [{:.4}, {:.4}], {} points",
                regime.label(),
                rep.fit.slope,
                regime.exponent,
                rep.fit.loo_min,
                rep.fit.loo_max,
                rep.fit.points
            );
            let verdict = a.tolerance.map(|t| rep.matches_reference(t));
            (rep.records, summary, verdict)
        }
        BoundaryRegime::NearBoundary => {
            let schedule = boundary_schedule(&deltas, cfg.sweep.schedule_coef.unwrap_or(0.5), cfg.sweep.schedule_power.unwrap_or(0.5));
            let base = BoundaryGrid::default();
            let grid = BoundaryGrid {
                radial_cells: cfg.domain.radial_cells.unwrap_or(base.radial_cells),
                angular_cells: cfg.domain.angular_cells.unwrap_or(base.angular_cells),
            };
            let with_distance = cfg.sweep.with_distance.unwrap_or(false);
            let records = boundary_sweep(&domain, inp.kind, lambda, &schedule, grid, with_distance, &opts)?;
            // Measured over predicted dilation pairing at the smallest scale.
            let ratio = records
                .iter()
                .min_by(|x, y| x.deltas[0].total_cmp(&y.deltas[0]))
                .and_then(|r| Some(r.measured_dilation? / r.prediction.as_ref()?.dilation));
            let summary = match ratio {
                Some(q) => format!("{}: measured/predicted dilation at the smallest scale {q:.4}", regime.label()),
                None => format!("{}: {} points", regime.label(), records.len()),
            };
            let verdict = a.tolerance.map(|t| ratio.is_some_and(|q| (q - 1.0).abs() <= t));
            (records, summary, verdict)
        }
    };

    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    let name = cfg.output_name(&regime);
    let csv_name = format!("{name}.csv");
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &records)?;
    emit(Some(&dir.join(&csv_name)), &buf)?;
    let reference = (inp.boundary == BoundaryRegime::Interior).then_some(regime.exponent);
    emit(Some(&dir.join(format!("{name}.gp"))), plot_script(&csv_name, &regime.label(), reference).as_bytes())?;
    println!("{summary}");
    match verdict {
        Some(false) => Err(CliError::check(format!("{}: outside tolerance {}", regime.label(), a.tolerance.unwrap_or_default()))),
        _ => Ok(()),
    }
}

pub fn verify(a: &VerifyArgs, exec: Execution) -> Result<(), CliError> {
    let mut lines: Vec<(bool, String)> = Vec::new();
    match a.suite.as_str() {
        "appendix-a" => {
            for c in inequality_suite(a.samples, a.seed, exec)? {
                lines.push((c.passed(), format!("{} max constant {:.6e}", c.name, c.max_constant)));
            }
        }
        "constants" => {
            for n in 3..=7 {
                let table = structural_constants(n)?;
                for (name, c) in table.entries() {
                    if name == "k4" {
                        continue;
                    }
                    lines.push((c.is_positive(), format!("n = {n} {name} = {:.10e} ± {:.1e}", c.value, c.stderr)));
                }
            }
        }
        _ => {
            let mesh = Mesh::build(&DomainModel::unit_ball(3)?, &GridSpec::radial(4000))?;
            let deltas = [0.2, 0.1, 0.05, 0.025];
            let lambda = 0.5 * lambda1_ball(3)?;
            // The shifted defect carries one logarithm, compensated in the fit.
            for (kind, log_power, lo, hi) in [(ProjectionKind::Pu1, 0.0, 2.3, 2.7), (ProjectionKind::Pu2, 1.0, 2.3, f64::INFINITY)] {
                let defects = deltas.iter().map(|&d| center_expansion_defect(&mesh, kind, lambda, d)).collect::<Result<Vec<_>, _>>()?;
                let fit = fit_power_law(&deltas, &defects, log_power)?;
                lines.push((fit.slope >= lo && fit.slope <= hi, format!("{kind} n = 3 expansion defect exponent {:.3} (window [{lo}, {hi}])", fit.slope)));
            }
        }
    }
    let mut out = String::new();
    for (ok, text) in &lines {
        out.push_str(&format!("{} {text}\n", if *ok { "PASS" } else { "FAIL" }));
    }
    emit(None, out.as_bytes())?;
    let failed = lines.iter().filter(|(ok, _)| !ok).count();
    if failed > 0 {
        return Err(CliError::check(format!("{failed} of {} checks failed", lines.len())));
    }
    Ok(())
}

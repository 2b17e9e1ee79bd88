//! Command pipelines.

use std::path::Path;
use std::time::Instant;

use affine_lab_core::affine::{point_residuals, structure_at};
use affine_lab_core::curves::{estimate_c, sphere_curve_integrate, sphere_residual, write_curve_csv};
use affine_lab_core::families::{fields_along_t, sample_box, sphere_verdict, warp_data};
use affine_lab_core::ode::OdeOptions;
use affine_lab_core::quadrature::differentiate_samples;
use affine_lab_core::symmetry::{
    canonical_fields, canonical_form_residual, difference_norm, field_ode_residual, warped_fields,
};
use affine_lab_core::{
    Case, CurveDef, CurveJet, Error, FamilyImmersion, FrameFields, Immersion, QuadricImmersion,
    SphereKind,
};
use rayon::prelude::*;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, Result};
use crate::report::{Classification, PointRecord, Report, SphereCandidate, SphereSummary};

/// A file produced by a run, named relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub artifacts: Vec<Artifact>,
}

/// Runs the configured command; when `out_dir` is given, writes the
/// artifacts and the report there.
pub fn run(config: RunConfig, out_dir: Option<&Path>) -> Result<Report> {
    let start = Instant::now();
    let mut out = execute(config)?;
    out.report.wall_clock_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out_dir {
        write_outputs(&out, dir)?;
    }
    Ok(out.report)
}

/// Runs the configured command without touching the filesystem. The
/// wall-clock field is left at zero.
pub fn execute(config: RunConfig) -> Result<RunOutput> {
    let config = config.resolved()?;
    let command = config.command()?;
    let mut out = RunOutput {
        report: Report::new(command, config.clone()),
        artifacts: Vec::new(),
    };
    match command {
        Command::Generate => generate(&config, &mut out)?,
        Command::Verify => verify(&config, &mut out)?,
        Command::Classify => classify(&config, &mut out)?,
        Command::SphereCheck => sphere_check(&config, &mut out)?,
        Command::IntegrateCurve => integrate_curve(&config, &mut out)?,
        Command::ExportMesh => export_mesh(&config, &mut out)?,
    }
    out.report.artifacts = out.artifacts.iter().map(|a| a.name.clone()).collect();
    out.report.finalize();
    Ok(out)
}

pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for a in &out.artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.bytes).map_err(io(&path))?;
    }
    let path = dir.join(&out.report.config.outputs.report);
    std::fs::write(&path, out.report.to_json() + "\n").map_err(io(&path))
}

enum Surface {
    Family(FamilyImmersion),
    Quadric(QuadricImmersion, Vec<(f64, f64)>),
}

impl Surface {
    fn from_config(config: &RunConfig) -> Result<Surface> {
        if let Some(spec) = &config.family {
            return Ok(Surface::Family(FamilyImmersion::new(spec.clone())?));
        }
        match &config.quadric {
            Some(q) => {
                let imm = q.immersion()?;
                let domain = q.box_domain();
                if domain.len() != q.dim {
                    return Err(CliError::Config(format!(
                        "quadric domain needs {} intervals, got {}",
                        q.dim,
                        domain.len()
                    )));
                }
                Ok(Surface::Quadric(imm, domain))
            }
            None => Err(CliError::Config("no surface configured".into())),
        }
    }

    fn immersion(&self) -> &dyn Immersion {
        match self {
            Surface::Family(f) => f,
            Surface::Quadric(q, _) => q,
        }
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        match self {
            Surface::Family(f) => f.spec.box_domain(),
            Surface::Quadric(_, d) => d.clone(),
        }
    }

    fn points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        match self {
            Surface::Family(f) => f.spec.sample_points(count, seed),
            Surface::Quadric(_, d) => sample_box(d, count, seed),
        }
    }
}

fn family_of(config: &RunConfig) -> Result<FamilyImmersion> {
    let spec = config
        .family
        .clone()
        .ok_or_else(|| CliError::Config("a `family` is required".into()))?;
    Ok(FamilyImmersion::new(spec)?)
}

/// Evaluates `f` at every point in parallel; errors carry the offending
/// point, and the first failing point in sample order wins.
fn per_point<T, F>(points: &[Vec<f64>], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f64]) -> std::result::Result<T, Error> + Sync,
{
    let results: Vec<_> = points.par_iter().enumerate().map(|(i, p)| f(i, p)).collect();
    results
        .into_iter()
        .zip(points)
        .map(|(r, p)| r.map_err(CliError::at(p)))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Core(Error::from(e))
}

fn generate(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let fam = family_of(config)?;
    let opts = config.affine_options();
    let points = fam.spec.sample_points(config.samples, config.seed);
    let records = per_point(&points, |i, p| {
        let s = structure_at(&fam, p, &opts)?;
        let xi = s.xi_value();
        let analytic = fam.analytic_normal(p)?;
        let nc = fam.normal_coefficients(p[0])?;
        let diff: Vec<f64> = xi.iter().zip(&analytic).map(|(a, b)| a - b).collect();
        let mut rec = PointRecord::new(i, p);
        rec.set("normal_rel_err", norm(&diff) / norm(&analytic))
            .set("mu", nc.mu)
            .set("nu", nc.nu);
        rec.vectors.insert("position".into(), fam.eval(p)?);
        rec.vectors.insert("xi".into(), xi);
        rec.vectors.insert("xi_analytic".into(), analytic);
        Ok(rec)
    })?;
    let report = &mut out.report;
    report.records = records;
    let rel = report.record_max("normal_rel_err");
    report.gate("normal_rel_err_max", rel, config.tolerances.residual_tol);

    let n = fam.spec.n;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string(), "t".to_string()];
    header.extend((1..n).map(|k| format!("u{k}")));
    header.extend((0..=n).map(|k| format!("x{k}")));
    header.extend((0..=n).map(|k| format!("xi{k}")));
    w.write_record(&header).map_err(csv_error)?;
    for rec in &report.records {
        let mut row = vec![rec.index.to_string()];
        let values = rec.point.iter().chain(&rec.vectors["position"]).chain(&rec.vectors["xi"]);
        row.extend(values.map(|v| format!("{v:.17e}")));
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv buffer: {e}")))?;
    out.artifacts.push(Artifact {
        name: config.outputs.points_csv.clone(),
        bytes,
    });
    Ok(())
}

const RESIDUAL_KEYS: [&str; 7] = [
    "gauss",
    "codazzi",
    "ricci",
    "apolarity",
    "nabla_h_sym",
    "tau",
    "tensor_symmetry",
];

fn verify(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let surface = Surface::from_config(config)?;
    let opts = config.affine_options();
    let frame = config.frame_options();
    let points = surface.points(config.samples, config.seed);
    let imm = surface.immersion();
    let records = per_point(&points, |i, p| {
        let s = structure_at(imm, p, &opts)?;
        let r = point_residuals(&s)?;
        let mut rec = PointRecord::new(i, p);
        let values = [r.gauss, r.codazzi, r.ricci, r.apolarity, r.nabla_h_sym, r.tau, r.tensor_symmetry];
        for (k, v) in RESIDUAL_KEYS.iter().zip(values) {
            rec.set(k, v);
        }
        rec.set("k_norm", difference_norm(&s)?);
        if let Surface::Family(fam) = &surface {
            let ff = fam.frame_fields(&s, &frame)?;
            let fr = field_ode_residual(&ff);
            rec.set("canonical_form", canonical_form_residual(&s, &ff.frame)?)
                .set("field_ode", fr.ode_max())
                .set("field_transverse", fr.transverse);
            rec.note = Some(format!("axis route {:?}", ff.frame.route));
        }
        Ok(rec)
    })?;
    out.report.records = records;
    let tol = config.tolerances;
    for key in RESIDUAL_KEYS {
        let v = out.report.record_max(key);
        out.report.gate(&format!("{key}_max"), v, tol.residual_tol);
    }
    let k = out.report.record_max("k_norm");
    match &surface {
        Surface::Quadric(..) => out.report.gate("k_norm_max", k, tol.exact_tol),
        Surface::Family(fam) => {
            out.report.aggregate("k_norm_max", k);
            for key in ["canonical_form", "field_ode", "field_transverse"] {
                let v = out.report.record_max(key);
                out.report.gate(&format!("{key}_max"), v, tol.residual_tol);
            }
            warp_gates(config, fam, &mut out.report)?;
        }
    }
    Ok(())
}

fn warp_gates(config: &RunConfig, fam: &FamilyImmersion, report: &mut Report) -> Result<()> {
    let tol = config.tolerances;
    let u = fam.spec.u_center();
    let mut at_u = vec![fam.spec.t_domain[0]];
    at_u.extend_from_slice(&u);
    let track = fields_along_t(
        fam,
        &u,
        config.numerics.warp_nodes,
        &config.affine_options(),
        &config.frame_options(),
    )
    .map_err(CliError::at(&at_u))?;
    let warp = match warp_data(fam, &track) {
        Ok(w) => w,
        Err(Error::ZetaSignChange { min, max }) => {
            report.notes.push(format!("zeta changes sign along t: min {min:e}, max {max:e}"));
            report.gate("zeta_sign_changes", 1.0, 0.0);
            return Ok(());
        }
        Err(e) => return Err(CliError::at(&at_u)(e)),
    };
    report.gate("zeta_sign_changes", 0.0, 0.0);
    let zeta_abs = warp.zeta.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    report.aggregate("zeta_sign", warp.zeta_sign as f64);
    match fam.case() {
        Case::Case1 => {
            report.aggregate("zeta_abs_max", zeta_abs);
            let mismatch = if warp.zeta_sign == fam.spec.epsilon { 0.0 } else { 1.0 };
            report.gate("zeta_sign_vs_epsilon_mismatch", mismatch, 0.0);
        }
        Case::Case2 | Case::Case3 => report.gate("zeta_abs_max", zeta_abs, tol.exact_tol),
    }
    report.gate("kappa_variation", warp.kappa_variation, tol.residual_tol);
    let x1k = warp.x1_kappa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    report.gate("x1_kappa_max", x1k, tol.residual_tol);
    report.gate("fiber_metric_defect", warp.fiber_metric_defect, tol.residual_tol);
    Ok(())
}

/// Canonical fields, or the warped-product axis when the point is a quadric
/// point; the flag tells which.
fn classify_fields(fam: Option<&FamilyImmersion>, s: &affine_lab_core::InducedStructure, config: &RunConfig) -> std::result::Result<(Option<FrameFields>, bool), Error> {
    match canonical_fields(s, &config.frame_options()) {
        Ok(f) => Ok((Some(f), false)),
        Err(Error::QuadricDetected { .. }) => match fam {
            Some(_) => Ok((Some(warped_fields(s, 0)?), true)),
            None => Ok((None, true)),
        },
        Err(e) => Err(e),
    }
}

fn classify(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let surface = Surface::from_config(config)?;
    let opts = config.affine_options();
    let points = surface.points(config.samples, config.seed);
    let imm = surface.immersion();
    let fam = match &surface {
        Surface::Family(f) => Some(f),
        Surface::Quadric(..) => None,
    };
    let records = per_point(&points, |i, p| {
        let s = structure_at(imm, p, &opts)?;
        let (fields, quadric) = classify_fields(fam, &s, config)?;
        let mut rec = PointRecord::new(i, p);
        rec.set("k_norm", difference_norm(&s)?)
            .set("quadric", if quadric { 1.0 } else { 0.0 });
        if let Some(f) = fields {
            let fr = &f.frame;
            rec.set("a", fr.a)
                .set("b", fr.b)
                .set("r", fr.r)
                .set("sigma", fr.sigma)
                .set("zeta", fr.b - fr.r * fr.r + fr.sigma * fr.sigma);
            rec.note = Some(format!("axis route {:?}", fr.route));
        }
        Ok(rec)
    })?;
    let tol = config.tolerances;
    let quadric_points = records.iter().filter(|r| r.get("quadric") == Some(1.0)).count();
    let all_quadric = quadric_points == records.len();
    let zetas: Vec<f64> = records.iter().filter_map(|r| r.get("zeta")).collect();
    let sigma_minus_r: Vec<f64> = records
        .iter()
        .filter_map(|r| Some((r.get("sigma")? - r.get("r")?).abs()))
        .collect();

    let mut cls = Classification {
        message: String::new(),
        quadric_detected: all_quadric,
        case: None,
        zeta_sign: None,
        zeta_range: None,
        sigma_minus_r_max: None,
    };
    if !zetas.is_empty() {
        let zmin = zetas.iter().copied().fold(f64::INFINITY, f64::min);
        let zmax = zetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let smr = sigma_minus_r.iter().copied().fold(0.0, f64::max);
        cls.zeta_range = Some([zmin, zmax]);
        cls.sigma_minus_r_max = Some(smr);
        cls.zeta_sign = if zmin > tol.exact_tol {
            Some(1)
        } else if zmax < -tol.exact_tol {
            Some(-1)
        } else if zmin >= -tol.exact_tol && zmax <= tol.exact_tol {
            Some(0)
        } else {
            None
        };
        cls.case = match cls.zeta_sign {
            Some(1 | -1) => Some(Case::Case1),
            Some(_) if smr <= tol.exact_tol => Some(Case::Case3),
            Some(_) => Some(Case::Case2),
            None => None,
        };
    }
    let case_text = match (cls.case, cls.zeta_sign) {
        (Some(case), Some(s)) => {
            let rel = match s {
                1 => "zeta > 0",
                -1 => "zeta < 0",
                _ if case == Case::Case3 => "zeta = 0, sigma = r",
                _ => "zeta = 0, sigma != r",
            };
            Some(format!("{case} ({rel})"))
        }
        _ if zetas.is_empty() => None,
        _ => Some("zeta changes sign; no single case".to_string()),
    };
    cls.message = match (all_quadric, case_text) {
        (true, None) => "quadric detected".to_string(),
        (true, Some(c)) => format!("quadric detected; warped-product structure matches {c}"),
        (false, Some(c)) => c,
        (false, None) => "canonical frame unavailable".to_string(),
    };

    let report = &mut out.report;
    report.records = records;
    let k = report.record_max("k_norm");
    match &surface {
        Surface::Quadric(..) => {
            report.gate("k_norm_max", k, tol.exact_tol);
            report.gate("non_quadric_points", (report.records.len() - quadric_points) as f64, 0.0);
        }
        Surface::Family(fam) => {
            report.aggregate("k_norm_max", k);
            report.aggregate("quadric_points", quadric_points as f64);
            let mismatch = if cls.case == Some(fam.case()) { 0.0 } else { 1.0 };
            report.gate("case_mismatch", mismatch, 0.0);
            if fam.case() == Case::Case1 {
                let m = if cls.zeta_sign == Some(fam.spec.epsilon) { 0.0 } else { 1.0 };
                report.gate("zeta_sign_vs_epsilon_mismatch", m, 0.0);
            }
        }
    }
    report.classification = Some(cls);
    Ok(())
}

fn uniform(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count.max(2) - 1) as f64)
        .collect()
}

fn jet_record(index: usize, j: &CurveJet) -> PointRecord {
    let mut rec = PointRecord::new(index, &[j.t]);
    rec.set("g1", j.g1)
        .set("g2", j.g2)
        .set("d1g1", j.d1g1)
        .set("d1g2", j.d1g2)
        .set("d2g1", j.d2g1)
        .set("d2g2", j.d2g2);
    rec
}

fn sphere_check(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let fam = family_of(config)?;
    let n = fam.spec.n;
    let case = fam.case();
    let tol = config.tolerances;
    let [lo, hi] = fam.spec.t_domain;
    let jets = uniform(lo, hi, config.sphere.curve_nodes)
        .into_iter()
        .map(|t| fam.curve.jet(t).map_err(CliError::at(&[t])))
        .collect::<Result<Vec<_>>>()?;
    let kinds: Vec<SphereKind> = match config.sphere.kind {
        Some(k) => vec![k],
        None if case == Case::Case3 => vec![SphereKind::Improper],
        None => vec![SphereKind::Improper, SphereKind::Proper],
    };
    let mut candidates = Vec::new();
    for kind in kinds {
        let (c, c_estimated) = match config.sphere.c {
            Some(c) => (c, false),
            None => (estimate_c(kind, case, &jets, n)?, true),
        };
        let residual = sphere_residual(kind, case, &jets, c, n)?;
        candidates.push(SphereCandidate {
            kind,
            c,
            c_estimated,
            residual,
        });
    }
    let points = fam.spec.sample_points(config.samples, config.seed);
    let numeric = sphere_verdict(&fam, &points, &config.affine_options(), tol.residual_tol)?;
    let best = candidates
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .map(|c| c.kind);
    let selected = config.sphere.kind.or(numeric.kind).or(best);

    let report = &mut out.report;
    report.records = jets.iter().enumerate().map(|(i, j)| jet_record(i, j)).collect();
    report.aggregate("lambda", numeric.lambda);
    report.aggregate("shape_norm_max", numeric.shape_norm_max);
    report.aggregate("isotropy_defect_max", numeric.isotropy_defect_max);
    report.aggregate("lambda_spread", numeric.lambda_spread);
    for c in &candidates {
        report.aggregate(&format!("{}_c", c.kind), c.c);
        report.aggregate(&format!("{}_equation_residual", c.kind), c.residual);
    }
    match selected {
        Some(kind) => {
            let residual = candidates
                .iter()
                .find(|c| c.kind == kind)
                .map_or(f64::NAN, |c| c.residual);
            report.gate("sphere_equation_residual", residual, tol.exact_tol);
            match kind {
                SphereKind::Improper => report.gate("shape_norm_max", numeric.shape_norm_max, tol.residual_tol),
                SphereKind::Proper => {
                    report.gate("isotropy_defect_max", numeric.isotropy_defect_max, tol.residual_tol);
                    report.gate("lambda_spread", numeric.lambda_spread, tol.residual_tol);
                    if numeric.kind == Some(SphereKind::Proper) {
                        let shape = if numeric.lambda < 0.0 { "hyperbolic" } else { "elliptic" };
                        report.notes.push(format!("proper {shape} sphere, lambda = {:e}", numeric.lambda));
                    }
                }
            }
        }
        None => report.notes.push("no admissible sphere type".into()),
    }
    report.sphere = Some(SphereSummary {
        candidates,
        selected,
        numeric,
    });
    Ok(())
}

fn integrate_curve(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let spec = match &config.curve {
        Some(CurveDef::Ode(spec)) => spec,
        _ => return Err(CliError::Config("`integrate-curve` needs a `curve` of type `ode`".into())),
    };
    let curve = sphere_curve_integrate(spec, &OdeOptions::default())?;
    let jets = curve.node_jets()?;
    let report = &mut out.report;
    report.records = jets.iter().enumerate().map(|(i, j)| jet_record(i, j)).collect();
    report.aggregate("nodes", jets.len() as f64);
    report.aggregate("t_first", curve.t[0]);
    report.aggregate("t_last", curve.t[curve.t.len() - 1]);
    let stopped = match &curve.stopped {
        Some(e) => {
            report.notes.push(format!("integration stopped early: {e}"));
            1.0
        }
        None => 0.0,
    };
    report.gate("stopped_early", stopped, 0.0);
    let consistency = sphere_residual(spec.kind, spec.case, &jets, spec.c, spec.n)?;
    report.aggregate("sphere_equation_residual_ode", consistency);
    // second derivatives from the integrated first derivatives, not the ODE
    let fd = fd_second_derivatives(&jets)?;
    let residual = sphere_residual(spec.kind, spec.case, &fd, spec.c, spec.n)?;
    report.gate("sphere_equation_residual", residual, config.tolerances.residual_tol);

    let mut bytes = Vec::new();
    write_curve_csv(&jets, &mut bytes)?;
    out.artifacts.push(Artifact {
        name: config.outputs.curve_csv.clone(),
        bytes,
    });
    Ok(())
}

const FD_STENCIL: usize = 7;

fn fd_second_derivatives(jets: &[CurveJet]) -> Result<Vec<CurveJet>> {
    if jets.len() < FD_STENCIL {
        return Err(CliError::Core(Error::InsufficientSamples {
            needed: FD_STENCIL,
            got: jets.len(),
        }));
    }
    let t: Vec<f64> = jets.iter().map(|j| j.t).collect();
    let d1 = |f: fn(&CurveJet) -> f64| jets.iter().map(f).collect::<Vec<f64>>();
    let d2g1 = differentiate_samples(&t, &d1(|j| j.d1g1), FD_STENCIL);
    let d2g2 = differentiate_samples(&t, &d1(|j| j.d1g2), FD_STENCIL);
    Ok(jets
        .iter()
        .zip(d2g1.into_iter().zip(d2g2))
        .map(|(j, (a, b))| CurveJet { d2g1: a, d2g2: b, ..*j })
        .collect())
}

/// OBJ text of the surface over the first two parameters, the others frozen
/// at the center of their range.
pub fn mesh_obj(
    imm: &dyn Immersion,
    domain: &[(f64, f64)],
    grid: [usize; 2],
    axes: [usize; 3],
) -> Result<(String, usize)> {
    if domain.len() < 2 {
        return Err(CliError::Config("mesh export needs at least two parameters".into()));
    }
    if let Some(&bad) = axes.iter().find(|&&a| a > imm.dim()) {
        return Err(CliError::Config(format!(
            "mesh axis {bad} out of range for R^{}",
            imm.dim() + 1
        )));
    }
    let center: Vec<f64> = domain.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let [gi, gj] = grid;
    let us = uniform(domain[0].0, domain[0].1, gi);
    let vs = uniform(domain[1].0, domain[1].1, gj);
    let params: Vec<Vec<f64>> = us
        .iter()
        .flat_map(|&u| {
            let center = &center;
            vs.iter().map(move |&v| {
                let mut p = center.clone();
                p[0] = u;
                p[1] = v;
                p
            })
        })
        .collect();
    let positions = per_point(&params, |_, p| imm.eval(p))?;
    let mut text = String::from("# affine-lab mesh\n");
    let mut non_finite = 0;
    for x in &positions {
        let [a, b, c] = axes.map(|k| x[k]);
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            non_finite += 1;
        }
        text.push_str(&format!("v {a} {b} {c}\n"));
    }
    for i in 0..gi - 1 {
        for j in 0..gj - 1 {
            let v = |ii: usize, jj: usize| ii * gj + jj + 1;
            text.push_str(&format!("f {} {} {} {}\n", v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)));
        }
    }
    Ok((text, non_finite))
}

fn export_mesh(config: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let surface = Surface::from_config(config)?;
    let imm = surface.immersion();
    let n = imm.dim();
    let axes = config.mesh.axes.unwrap_or([0, n - 1, n]);
    let grid = config.mesh.grid;
    let (text, non_finite) = mesh_obj(imm, &surface.domain(), grid, axes)?;
    let report = &mut out.report;
    report.aggregate("vertices", (grid[0] * grid[1]) as f64);
    report.aggregate("faces", ((grid[0] - 1) * (grid[1] - 1)) as f64);
    report.gate("non_finite_vertices", non_finite as f64, 0.0);
    out.artifacts.push(Artifact {
        name: config.outputs.mesh_obj.clone(),
        bytes: text.into_bytes(),
    });
    Ok(())
}

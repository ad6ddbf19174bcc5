//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use cosserat_dem::cases::builtin::{
    BeamResolution, beam_flexion, boundary_layer, lamb_desk, patch, plate_sweep, run_beam, run_boundary_layer,
    run_lamb,
};
use cosserat_dem::cases::{CaseOutcome, RunOptions, run_case};
use cosserat_dem::geometry::Point;
use cosserat_dem::material::{CosseratMaterial2D, CosseratMaterial3D, Material};
use cosserat_dem::mesh::{Mesh, box_mesh, rect_mesh};
use cosserat_dem::solver::{CrankNicolson, DampingScheme, SolverConfig, State, condition_estimate, dem_post};
use cosserat_dem::sparse::{SparseMatrix, dot, norm};
use cosserat_dem::system::{BodyLoads, BoundaryConditions, Operators, Problem, rigid_motions};
use cosserat_dem::{Error, Result};

type Verdict = Result<(bool, String)>;

fn options() -> RunOptions {
    RunOptions::default()
}

fn component_rel(out: &CaseOutcome, name: &str) -> f64 {
    out.report.component(name).and_then(|c| c.max_relative_error).unwrap_or(f64::NAN)
}

fn component_band(out: &CaseOutcome, name: &str) -> (f64, f64) {
    let c = out.report.component(name).expect("component");
    (c.min, c.max)
}

fn criterion_1() -> Verdict {
    let out = run_case(&patch(1)?, &options())?;
    let g = 1e3;
    let worst = ["sxx", "syy", "sxy", "syx"].iter().map(|n| component_rel(&out, n)).fold(0.0, f64::max);
    let (m0, m1) = component_band(&out, "mx");
    let (n0, n1) = component_band(&out, "my");
    let mu = [m0, m1, n0, n1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((
        worst <= 1e-8 && mu <= 1e-10 * g,
        format!("{} dofs, max rel stress error {worst:.2e} (≤ 1e-8), max |μ| {mu:.2e} (≤ 1e-10·G)", out.dofs),
    ))
}

fn criterion_2() -> Verdict {
    let out = run_case(&patch(2)?, &options())?;
    let errs: Vec<f64> = ["sxx", "syy", "sxy", "syx"].iter().map(|n| component_rel(&out, n)).collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let (m0, m1) = component_band(&out, "mx");
    let (n0, n1) = component_band(&out, "my");
    let mu = [m0, m1, n0, n1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((worst <= 0.05 && mu <= 6e-2, format!("max rel stress error {worst:.2e} (≤ 5%), |μ| band {mu:.2e} (≤ 6e-2)")))
}

fn criterion_3() -> Verdict {
    let out = run_case(&patch(3)?, &options())?;
    let normal = component_rel(&out, "sxx").max(component_rel(&out, "syy"));
    let couple = component_rel(&out, "mx").max(component_rel(&out, "my"));
    let shear = component_rel(&out, "sxy").max(component_rel(&out, "syx"));
    Ok((
        normal <= 0.05 && couple <= 0.10 && shear <= 0.10,
        format!("σxx/σyy {normal:.2e} (≤ 5%), μ {couple:.2e} (≤ 10%), σxy/σyx pointwise {shear:.2e} (≤ 10%)"),
    ))
}

fn criterion_4() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for which in 1..=3 {
        let spec = patch(which)?;
        let mesh = spec.mesh.build(0)?;
        let p = Problem::new(&mesh, spec.material.clone(), spec.bcs.clone(), spec.body.clone())?;
        let sys = p.assemble();
        let with = condition_estimate(&sys.stiffness())?;
        let without = condition_estimate(&sys.stiffness().linear_combination(1.0, &sys.k_pen, -1.0))?;
        let ratio = with.value.max(without.value) / with.value.min(without.value);
        pass &= ratio < 10.0 && with.converged && without.converged;
        parts.push(format!("patch{which} {:.3e}/{:.3e} (×{ratio:.2})", with.value, without.value));
    }
    Ok((pass, format!("with/without K_pen: {} (< ×10)", parts.join(", "))))
}

fn criterion_5() -> Verdict {
    let opts = options();
    let mut pass = true;
    let mut parts = Vec::new();
    for test in 1..=3u8 {
        let outs = plate_sweep(test, false, &opts)?;
        let worst = outs.iter().map(|o| o.metric("relative_error").unwrap()).fold(0.0, f64::max);
        pass &= worst <= 0.02;
        parts.push(format!("test {test} max error {:.2}%", 100.0 * worst));
        if test == 1 {
            let scf: Vec<f64> = outs.iter().map(|o| o.metric("scf").unwrap()).collect();
            let monotone = scf.windows(2).all(|w| w[1] < w[0]);
            pass &= monotone;
            parts.push(format!("SCF {:.3} → {:.3} monotone {monotone}", scf[0], scf[scf.len() - 1]));
        }
    }
    let coarse = plate_sweep(1, true, &opts)?;
    let worst = coarse.iter().map(|o| o.metric("relative_error").unwrap()).fold(0.0, f64::max);
    pass &= worst <= 0.05;
    parts.push(format!("coarse test 1 {:.2}% (≤ 5%)", 100.0 * worst));
    Ok((pass, format!("full meshes ≤ 2%: {}", parts.join(", "))))
}

fn criterion_6() -> Verdict {
    let out = run_boundary_layer(&boundary_layer(10, 50), &options())?;
    let (eu, ep) = (out.metric("u1_error").unwrap(), out.metric("phi_error").unwrap());
    let (cu, cp) = (out.metric("oracle_change_u1").unwrap(), out.metric("oracle_change_phi").unwrap());
    Ok((
        eu <= 0.10 && ep <= 0.10 && cu < 1e-3 && cp < 1e-3,
        format!(
            "{} cells, u₁ error {:.2}%, φ error {:.2}% (≤ 10%); oracle change on halving {cu:.1e}/{cp:.1e} (< 0.1%)",
            out.cells,
            100.0 * eu,
            100.0 * ep
        ),
    ))
}

/// `m q̈ + k q = 0`, `q(0) = 1`: error against `cos ωt` at a zero crossing,
/// where the phase error shows at first order.
fn oscillator_error(steps: usize) -> Result<f64> {
    let (m, k) = (2.0, 8.0);
    let omega = (k / m as f64).sqrt();
    let end = 2.5 * std::f64::consts::PI / omega;
    let cn = CrankNicolson::new(
        SparseMatrix::diagonal(&[k]),
        vec![m],
        SparseMatrix::zeros(1, 1),
        end / steps as f64,
        DampingScheme::Explicit,
        SolverConfig::default(),
    )?;
    let s = cn.run(cn.initial_state(vec![1.0], vec![0.0], &[0.0]), steps, |_| vec![0.0], |_, _| Ok(()))?;
    Ok((s.q[0] - (omega * s.t).cos()).abs())
}

fn criterion_7a() -> Verdict {
    let e: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| oscillator_error(n)).collect::<Result<_>>()?;
    let ratios: Vec<f64> = e.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| (3.4..=4.6).contains(r));
    Ok((pass, format!("error ratios per Δt halving {:.3?} (∈ [3.4, 4.6])", ratios)))
}

fn criterion_7b() -> Verdict {
    let mesh = rect_mesh([0.0, 0.0], 1.0, 1.0, 10, 10);
    let material = Material::Plane(CosseratMaterial2D::new(1e3, 0.25, 0.5, 0.1)?.with_inertia(1.0, 0.01)?);
    let p = Problem::new(&mesh, material, BoundaryConditions::new(), BodyLoads::default())?;
    let sys = p.assemble();
    let k = sys.stiffness();
    let cn = CrankNicolson::new(k.clone(), sys.mass.clone(), sys.damping.clone(), 1e-3, DampingScheme::Explicit, SolverConfig::default())?;
    let pi = std::f64::consts::PI;
    let q0 = p.dofs().sample(&mesh, |x| [0.01 * (pi * x[0]).sin() * x[1], 0.01 * (pi * x[1]).cos(), 0.0], |x| [0.02 * x[0] * x[1], 0.0, 0.0]);
    let n = q0.len();
    let s0 = cn.initial_state(q0, vec![0.0; n], &vec![0.0; n]);
    let e0 = cn.energy(&s0, &k);
    let mut drift = 0.0f64;
    cn.run(s0, 1000, |_| vec![0.0; n], |_, s: &State| {
        drift = drift.max((cn.energy(s, &k) - e0).abs() / e0);
        Ok(())
    })?;
    Ok((drift <= 1e-6, format!("10×10 mesh, max relative energy drift over 1000 steps {drift:.2e} (≤ 1e-6)")))
}

fn beam_tip(steps: usize) -> Result<(Vec<f64>, CaseOutcome)> {
    let out = run_beam(&beam_flexion(BeamResolution::Reduced, steps), &options())?;
    let tip = out.trajectory.as_ref().and_then(|t| t.series("tip_uy")).ok_or_else(|| Error::Other("tip probe".into()))?;
    Ok((tip.to_vec(), out))
}

fn criterion_7c() -> Verdict {
    let (a, out) = beam_tip(2000)?;
    let (b, _) = beam_tip(4000)?;
    let (c, _) = beam_tip(8000)?;
    let nan = out.metric("non_finite").unwrap();
    let max_tip = out.metric("max_tip").unwrap();
    // Euler–Bernoulli static tip deflection under the peak end load.
    let (len, w): (f64, f64) = (1e-3, 4e-5);
    let static_tip = 4e-6 * len.powi(3) / (w * w);
    let d1 = (0..a.len()).map(|i| (a[i] - b[2 * i]).abs()).fold(0.0, f64::max);
    let d2 = (0..b.len()).map(|i| (b[i] - c[2 * i]).abs()).fold(0.0, f64::max);
    let bounded = max_tip.is_finite() && max_tip > 0.0 && max_tip < 2.0 * static_tip;
    Ok((
        nan == 0.0 && bounded && d2 < d1,
        format!(
            "{} dofs, 2000 steps, NaNs {nan}, max |tip| {max_tip:.3e} m (< {:.2e}); L∞ differences {d1:.2e} → {d2:.2e}",
            out.dofs,
            2.0 * static_tip
        ),
    ))
}

fn criterion_8() -> Verdict {
    let out = run_lamb(&lamb_desk(), &options())?;
    let (vp, target, err) =
        (out.metric("vp_measured").unwrap(), out.metric("vp_target").unwrap(), out.metric("vp_error").unwrap());
    let surface = out.metric("surface_detected").unwrap() == 1.0;
    let speed = out.metric("surface_speed").unwrap();
    Ok((
        err <= 0.10 && surface,
        format!(
            "{} cells, V_P {vp:.0} m/s vs {target:.0} ({:.1}% ≤ 10%), surface pulse {speed:.0} m/s detected {surface}",
            out.cells,
            100.0 * err
        ),
    ))
}

fn perturbed_box() -> Result<Mesh> {
    let base = box_mesh([0.0; 3], [1.0, 0.9, 0.8], [3, 3, 3]);
    let on = base.boundary_vertices();
    base.moved(|i, x| {
        if on[i] {
            return *x;
        }
        let s = ((i * 7 % 5) as f64 - 2.0) / 2.0;
        x + Point::new(0.06 * s, -0.05 * s, 0.04 * s)
    })
}

fn invariant_deviations(mesh: &Mesh, material: &Material) -> Result<Vec<(&'static str, f64)>> {
    let ops = Operators::build(mesh)?;
    let rec = &ops.reconstruction;
    let coef = [0.3, -1.2, 0.7, 2.1];
    let affine = |x: &Point| coef[0] + coef[1] * x[0] + coef[2] * x[1] + coef[3] * x[2];
    let field = |c: usize| affine(&mesh.cell(c).barycenter);
    let mut affine_err = 0.0f64;
    for f in 0..mesh.num_facets() {
        affine_err = affine_err.max((rec.facets.value(f, field) - affine(&mesh.facet(f).barycenter)).abs());
    }
    for c in 0..mesh.num_cells() {
        let g = rec.gradients.gradient(c, field);
        for i in 0..mesh.dim() {
            affine_err = affine_err.max((g[i] - coef[1 + i]).abs());
        }
        for &v in &mesh.cell(c).vertices {
            let x = mesh.vertices()[v];
            affine_err = affine_err.max((rec.p1_eval(mesh, c, field, &x) - affine(&x)).abs());
        }
    }
    let unity = rec.facets.stencils().iter().map(|s| (s.coefficients.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);

    let mut bcs = BoundaryConditions::new();
    bcs.clamp("left", mesh.dim());
    let p = Problem::new(mesh, material.clone(), bcs, BodyLoads::default())?;
    let sys = p.assemble();
    let n = p.dofs().len();
    let probe: Vec<f64> = (0..n).map(|i| ((i * 7919 % 1013) as f64 / 506.5) - 1.0).collect();
    let mut sym = 0.0f64;
    let mut psd = 0.0f64;
    for k in [&sys.k_elas, &sys.k_pen] {
        sym = sym.max(k.asymmetry() / k.max_abs());
        psd = psd.max(-dot(&probe, &k.matvec(&probe)) / (k.max_abs() * dot(&probe, &probe)));
    }
    let nitsche = sys.k_con.linear_combination(1.0, &sys.k_nsym.transpose(), 1.0).max_abs() / sys.k_con.max_abs();
    let mass = if sys.mass.iter().all(|m| *m > 0.0) { 0.0 } else { 1.0 };

    let loads = dem_post(mesh, material, &ops, &probe);
    let mut reaction = 0.0f64;
    for f in mesh.interior_facets() {
        let cells = mesh.facet(f).cells();
        let a = loads.force_on(mesh, f, cells[0]).expect("interior");
        let b = loads.force_on(mesh, f, cells[1]).expect("interior");
        reaction = reaction.max(a.iter().zip(&b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max));
    }

    let free = Problem::new(mesh, material.clone(), BoundaryConditions::new(), BodyLoads::default())?;
    let k = free.assemble().stiffness();
    let kernel = rigid_motions(mesh, free.dofs())
        .iter()
        .map(|r| norm(&k.matvec(r)) / (k.max_abs() * norm(r)))
        .fold(0.0, f64::max);
    Ok(vec![
        ("affine", affine_err),
        ("unity", unity),
        ("symmetry", sym),
        ("psd", psd.max(0.0)),
        ("nitsche", nitsche),
        ("mass", mass),
        ("action-reaction", reaction),
        ("rigid kernel", kernel),
    ])
}

fn criterion_9() -> Verdict {
    let (g, l) = (1e3, 0.05);
    let cases = [
        ("2D structured", rect_mesh([0.0, 0.0], 1.2, 0.8, 6, 4), Material::Plane(CosseratMaterial2D::new(g, 0.25, 0.5, 0.1)?)),
        (
            "3D perturbed tets",
            perturbed_box()?,
            Material::Solid(CosseratMaterial3D::new(1.6e3, g, 0.5 * g, g * l * l, 2.5 * g * l * l, 2.5 * g * l * l)?),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, mesh, material) in &cases {
        let dev = invariant_deviations(mesh, material)?;
        let ok = dev.iter().all(|(_, v)| *v <= 1e-10);
        pass &= ok;
        let worst = dev.iter().cloned().fold(("", 0.0f64), |m, d| if d.1 >= m.1 { d } else { m });
        parts.push(format!("{label}: worst {} {:.1e}", worst.0, worst.1));
    }
    Ok((pass, format!("{} (all ≤ 1e-10)", parts.join("; "))))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Verdict); 11] = [
        ("1", "patch test 1 exact", criterion_1),
        ("2", "patch test 2", criterion_2),
        ("3", "patch test 3", criterion_3),
        ("4", "condition numbers with and without penalty", criterion_4),
        ("5", "plate with a hole stress concentration", criterion_5),
        ("6", "boundary layer against 1D oracle", criterion_6),
        ("7a", "Crank-Nicolson second order", criterion_7a),
        ("7b", "undamped energy conservation", criterion_7b),
        ("7c", "beam in flexion, reduced resolution", criterion_7c),
        ("8", "Lamb problem at desk scale", criterion_8),
        ("9", "structural invariants, 2D and 3D", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} [{id}] {name}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

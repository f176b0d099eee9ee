//! Time evolution generated by the GSPB: the thorough generalized Hamiltonian
//! system (TGHS), S-dynamics, the covariant rate D f/dt, the generalized
//! force field, covariant acceleration, and fixed-step RK4 trajectories with
//! per-state diagnostics.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::DVector;

use crate::bracket::{gpb, gspb, structural_operator, StructuralSystem};
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::manifold::{structural_gradient, Metric};
use crate::ode::{check_finite, rk4_step, validate_span};

/// A point on a flow: time plus phase coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub x: Vec<f64>,
}

/// An integrated flow with uniformly spaced, strictly increasing times and a
/// named diagnostic value per column per state.
///
/// Column order for export is fixed: `t, x1..xm, H, w`, then a value column
/// and a `D<name>` covariant-rate column for each tracked field.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<PhaseState>,
    diagnostic_names: Vec<String>,
    diagnostics: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn diagnostic_names(&self) -> &[String] {
        &self.diagnostic_names
    }

    /// All values of one diagnostic column.
    pub fn diagnostic(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.diagnostic_names.iter().position(|n| n == name)?;
        Some(self.diagnostics.iter().map(|row| row[idx]).collect())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> Option<&PhaseState> {
        self.states.last()
    }

    pub fn csv_header(&self) -> String {
        let dim = self.states.first().map_or(0, |s| s.x.len());
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=dim).map(|i| format!("x{i}")));
        cols.extend(self.diagnostic_names.iter().cloned());
        cols.join(",")
    }

    /// CSV with 17 significant digits per value (round-trip safe for f64).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", self.csv_header())?;
        for (state, diag) in self.states.iter().zip(&self.diagnostics) {
            let mut row = vec![format_g17(state.t)];
            row.extend(state.x.iter().map(|v| format_g17(*v)));
            row.extend(diag.iter().map(|v| format_g17(*v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// JSON records with the same fields as the CSV columns.
    pub fn write_json<W: Write>(&self, out: &mut W) -> Result<()> {
        let dim = self.states.first().map_or(0, |s| s.x.len());
        let mut records = Vec::with_capacity(self.states.len());
        for (state, diag) in self.states.iter().zip(&self.diagnostics) {
            let mut obj = serde_json::Map::new();
            obj.insert("t".into(), state.t.into());
            for i in 0..dim {
                obj.insert(format!("x{}", i + 1), state.x[i].into());
            }
            for (name, v) in self.diagnostic_names.iter().zip(diag) {
                obj.insert(name.clone(), (*v).into());
            }
            records.push(serde_json::Value::Object(obj));
        }
        serde_json::to_writer_pretty(&mut *out, &records)
            .map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(out)?;
        Ok(())
    }
}

/// 17 significant digits; parses back to the identical f64.
pub fn format_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Whether a tracked field stayed in covariant equilibrium along a
/// trajectory: |Df/dt| < 1e-8·(1 + |f|) at every recorded state. Returns
/// None when the field was not tracked (no value or rate column).
pub fn is_covariantly_conserved(traj: &Trajectory, name: &str) -> Option<bool> {
    let values = traj.diagnostic(name)?;
    let rates = traj.diagnostic(&format!("D{name}"))?;
    Some(
        values
            .iter()
            .zip(rates.iter())
            .all(|(f, rate)| rate.abs() < 1e-8 * (1.0 + f.abs())),
    )
}

/// Generalized force field F_k = −D_k H = −(∂_k H + A_k H).
pub fn force_field(sys: &StructuralSystem, x: &[f64]) -> Result<DVector<f64>> {
    sys.check_dim(x)?;
    let dh = sys.hamiltonian().gradient(x);
    let a = sys.structure_gradient(x);
    let h = sys.hamiltonian().eval(x);
    Ok(DVector::from_fn(sys.dim(), |k, _| -(dh[k] + a[k] * h)))
}

/// TGHS right side ẋ_k = J_kj D_j H = J_kj (∂_j H + A_j H).
pub fn tghs_rhs(sys: &StructuralSystem, x: &[f64]) -> Result<DVector<f64>> {
    sys.check_dim(x)?;
    let dh = sys.hamiltonian().gradient(x);
    let a = sys.structure_gradient(x);
    let h = sys.hamiltonian().eval(x);
    let j = sys.structural_matrix().at(x);
    let m = sys.dim();
    Ok(DVector::from_fn(m, |k, _| {
        (0..m).map(|l| j[(k, l)] * (dh[l] + a[l] * h)).sum()
    }))
}

/// The same vector through the force field: ẋ_k = J_jk F_j.
pub fn tghs_rhs_via_force(sys: &StructuralSystem, x: &[f64]) -> Result<DVector<f64>> {
    let f = force_field(sys, x)?;
    let j = sys.structural_matrix().at(x);
    let m = sys.dim();
    Ok(DVector::from_fn(m, |k, _| {
        (0..m).map(|l| j[(l, k)] * f[l]).sum()
    }))
}

/// S-dynamics w = ds/dt = {s, H}_GPB = Ŝ H.
pub fn s_dynamics(sys: &StructuralSystem, x: &[f64]) -> Result<f64> {
    structural_operator(sys, sys.hamiltonian(), x)
}

/// Covariant rate D f/dt = {f, H} under the GSPB.
pub fn gchs_rate(sys: &StructuralSystem, f: &ScalarField, x: &[f64]) -> Result<f64> {
    gspb(sys, f, sys.hamiltonian(), x)
}

/// The rate split into its TGHS part df/dt = {f,H}_GPB − H{s,f}_GPB and the
/// structural part w·f. Their sum is `gchs_rate`.
pub fn gchs_rate_decomposed(
    sys: &StructuralSystem,
    f: &ScalarField,
    x: &[f64],
) -> Result<(f64, f64)> {
    let fh = gpb(sys, f, sys.hamiltonian(), x)?;
    let sf = gpb(sys, sys.structure_function(), f, x)?;
    let h = sys.hamiltonian().eval(x);
    let tghs_part = fh - h * sf;
    let w = s_dynamics(sys, x)?;
    Ok((tghs_part, w * f.eval(x)))
}

/// Ordinary time derivative d f/dt = J_ji F_j ∂_i f. Numerically identical
/// to `flow_derivative` up to contraction order; both are exposed so the
/// identity can be checked.
pub fn ordinary_time_derivative(sys: &StructuralSystem, f: &ScalarField, x: &[f64]) -> Result<f64> {
    let xdot = tghs_rhs_via_force(sys, x)?;
    let df = f.gradient(x);
    Ok(xdot.iter().zip(df.iter()).map(|(v, d)| v * d).sum())
}

/// d f/dt = ẋ_i ∂_i f with ẋ from the TGHS.
pub fn flow_derivative(sys: &StructuralSystem, f: &ScalarField, x: &[f64]) -> Result<f64> {
    let xdot = tghs_rhs(sys, x)?;
    let df = f.gradient(x);
    Ok(xdot.iter().zip(df.iter()).map(|(v, d)| v * d).sum())
}

/// Frozen-w solution of the covariant equilibrium equation df/dt + wf = 0:
/// f(t) = f0 e^{−wt}.
pub fn equilibrium_solution(f0: f64, w: f64, t: f64) -> f64 {
    f0 * (-w * t).exp()
}

/// Correction term Q(w, t) = e^{−wt} − 1, so f(t) = f0 + f0 Q(w, t).
pub fn equilibrium_correction(w: f64, t: f64) -> f64 {
    (-w * t).exp() - 1.0
}

/// Build the system a metric induces on its canonical phase space:
/// m = 2n coordinates (q, p), canonical J, and s(q, p) = ln √det g(q).
/// The structure function is differentiated by finite differences, keeping it
/// independent of the Christoffel route to A_i = Γ^l_{il}.
pub fn induced_canonical_system(metric: &Metric, h: ScalarField) -> StructuralSystem {
    let n = metric.dim();
    let m = metric.clone();
    let s = ScalarField::new(move |x| 0.5 * m.matrix_unchecked(&x[..n]).determinant().ln())
        .named("ln_sqrt_det_g");
    StructuralSystem::canonical(n, s, h)
}

/// The structural derivative the metric induces on a phase point: the
/// Christoffel contraction Γ^l_{il} on configuration axes and zero on
/// momentum axes (for m = n systems every axis is configuration).
fn induced_structure_gradient(
    metric: &Metric,
    sys: &StructuralSystem,
    x: &[f64],
) -> Result<DVector<f64>> {
    let n = metric.dim();
    let m = sys.dim();
    if m == n {
        structural_gradient(metric, x)
    } else if m == 2 * n {
        let a_cfg = structural_gradient(metric, &x[..n])?;
        let mut a = DVector::zeros(m);
        for i in 0..n {
            a[i] = a_cfg[i];
        }
        Ok(a)
    } else {
        Err(Error::dim(2 * n, m))
    }
}

/// S-dynamics on a Riemannian manifold: w = J_ij Γ^l_{li} ∂_j H.
pub fn s_dynamics_riemannian(metric: &Metric, sys: &StructuralSystem, x: &[f64]) -> Result<f64> {
    sys.check_dim(x)?;
    let a = induced_structure_gradient(metric, sys, x)?;
    let dh = sys.hamiltonian().gradient(x);
    let j = sys.structural_matrix().at(x);
    let m = sys.dim();
    let mut w = 0.0;
    for i in 0..m {
        if a[i] == 0.0 {
            continue;
        }
        for l in 0..m {
            w += j[(i, l)] * a[i] * dh[l];
        }
    }
    Ok(w)
}

/// The covariant rate of a coordinate on (M, g), evaluated through the
/// specialized three-term form
/// `D x_k/dt = J_kj ∂_j H + J_kj Γ^i_{ji} H + x_k w`,
/// where the structural derivative comes from the Christoffel contraction.
/// Cross-checked against the generic `gchs_rate` with the induced s.
pub fn gchs_riemannian_rate(
    metric: &Metric,
    sys: &StructuralSystem,
    k: usize,
    x: &[f64],
) -> Result<f64> {
    sys.check_dim(x)?;
    let m = sys.dim();
    if k >= m {
        return Err(Error::dim(m, k + 1));
    }
    let a = induced_structure_gradient(metric, sys, x)?;
    let dh = sys.hamiltonian().gradient(x);
    let h = sys.hamiltonian().eval(x);
    let j = sys.structural_matrix().at(x);

    let hamiltonian_term: f64 = (0..m).map(|l| j[(k, l)] * dh[l]).sum();
    let structural_term: f64 = (0..m).map(|l| j[(k, l)] * a[l] * h).sum();
    let w = s_dynamics_riemannian(metric, sys, x)?;
    Ok(hamiltonian_term + structural_term + x[k] * w)
}

/// Default probe-step size for flow-derivative central differences.
pub const DEFAULT_PROBE_STEP: f64 = 1e-4;

/// Covariant acceleration a = ẍ + 2wẋ + xβ with β = w² + dw/dt.
#[derive(Debug, Clone)]
pub struct Acceleration {
    pub a: DVector<f64>,
    pub w: f64,
    pub beta: f64,
    pub xdot: DVector<f64>,
    pub xddot: DVector<f64>,
}

/// Evaluate the covariant acceleration at a point. ẍ and dw/dt are flow
/// derivatives, realized as central differences between two RK4 probe steps
/// of size `dt_probe` forward and backward along the exact flow.
pub fn acceleration(sys: &StructuralSystem, x: &[f64], dt_probe: f64) -> Result<Acceleration> {
    if !(dt_probe.is_finite() && dt_probe > 0.0) {
        return Err(Error::InvalidStep { dt: dt_probe });
    }
    let rhs = |y: &[f64]| Ok(tghs_rhs(sys, y)?.iter().copied().collect());
    let xp = rk4_step(&rhs, x, dt_probe)?;
    let xm = rk4_step(&rhs, x, -dt_probe)?;

    let xdot = tghs_rhs(sys, x)?;
    let vdot_p = tghs_rhs(sys, &xp)?;
    let vdot_m = tghs_rhs(sys, &xm)?;
    let xddot = (vdot_p - vdot_m) / (2.0 * dt_probe);

    let w = s_dynamics(sys, x)?;
    let dwdt = (s_dynamics(sys, &xp)? - s_dynamics(sys, &xm)?) / (2.0 * dt_probe);
    let beta = w * w + dwdt;

    let m = sys.dim();
    let a = DVector::from_fn(m, |i, _| xddot[i] + 2.0 * w * xdot[i] + x[i] * beta);
    Ok(Acceleration {
        a,
        w,
        beta,
        xdot,
        xddot,
    })
}

/// The five-term expansion of the acceleration on (M, g):
/// a_k = ẍ_k + 2w J_kj ∂_j H + 2w J_kj Γ^l_{jl} H + x_k w² + x_k dw/dt,
/// with every term evaluated independently of [`acceleration`]'s assembly.
pub fn acceleration_riemannian_expansion(
    metric: &Metric,
    sys: &StructuralSystem,
    x: &[f64],
    dt_probe: f64,
) -> Result<DVector<f64>> {
    let acc = acceleration(sys, x, dt_probe)?;
    let a_struct = induced_structure_gradient(metric, sys, x)?;
    let dh = sys.hamiltonian().gradient(x);
    let h = sys.hamiltonian().eval(x);
    let j = sys.structural_matrix().at(x);
    let w = s_dynamics_riemannian(metric, sys, x)?;
    let dwdt = acc.beta - acc.w * acc.w;

    let m = sys.dim();
    Ok(DVector::from_fn(m, |k, _| {
        let jh: f64 = (0..m).map(|l| j[(k, l)] * dh[l]).sum();
        let ja: f64 = (0..m).map(|l| j[(k, l)] * a_struct[l] * h).sum();
        acc.xddot[k] + 2.0 * w * jh + 2.0 * w * ja + x[k] * w * w + x[k] * dwdt
    }))
}

struct DiagnosticPlan {
    names: Vec<String>,
    tracked: Vec<(ScalarField, bool)>, // (field, emit value column)
}

fn plan_diagnostics(track: &[ScalarField], dim: usize) -> DiagnosticPlan {
    let mut names: Vec<String> = vec!["H".into(), "w".into()];
    // coordinate columns already exist; a tracked field named like one only
    // contributes its rate column
    let mut seen: BTreeSet<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    seen.extend(names.iter().cloned());
    let mut tracked = Vec::new();
    for f in track {
        let value_col = seen.insert(f.name().to_string());
        if value_col {
            names.push(f.name().to_string());
        }
        let rate_name = format!("D{}", f.name());
        if seen.insert(rate_name.clone()) {
            names.push(rate_name);
            tracked.push((f.clone(), value_col));
        }
    }
    DiagnosticPlan { names, tracked }
}

fn diagnostics_row(sys: &StructuralSystem, plan: &DiagnosticPlan, x: &[f64]) -> Result<Vec<f64>> {
    let mut row = vec![sys.hamiltonian().eval(x), s_dynamics(sys, x)?];
    for (f, value_col) in &plan.tracked {
        if *value_col {
            row.push(f.eval(x));
        }
        row.push(gchs_rate(sys, f, x)?);
    }
    Ok(row)
}

/// Integrate the TGHS flow with fixed-step RK4, recording H, w, and each
/// tracked field's value and covariant rate at every state. Produces
/// floor((t1−t0)/dt)+1 states at t_i = t0 + i·dt.
pub fn integrate(
    sys: &StructuralSystem,
    track: &[ScalarField],
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory> {
    let (traj, failure) = integrate_checked(sys, track, x0, t0, t1, dt)?;
    match failure {
        Some(err) => Err(err),
        None => Ok(traj),
    }
}

/// Like [`integrate`] but, once started, never discards computed states: a
/// mid-flight failure is returned alongside the partial trajectory so
/// callers can report the last valid state.
pub fn integrate_checked(
    sys: &StructuralSystem,
    track: &[ScalarField],
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<(Trajectory, Option<Error>)> {
    sys.check_dim(x0)?;
    let steps = validate_span(t0, t1, dt)?;
    let plan = plan_diagnostics(track, sys.dim());
    let rhs = |y: &[f64]| Ok(tghs_rhs(sys, y)?.iter().copied().collect());

    let mut traj = Trajectory {
        states: Vec::with_capacity(steps + 1),
        diagnostic_names: plan.names.clone(),
        diagnostics: Vec::with_capacity(steps + 1),
    };

    let mut x = x0.to_vec();
    let mut failure = None;
    for i in 0..=steps {
        let t = t0 + i as f64 * dt;
        if let Err(e) = check_finite(&x, t) {
            failure = Some(e);
            break;
        }
        match diagnostics_row(sys, &plan, &x) {
            Ok(row) => {
                traj.states.push(PhaseState { t, x: x.clone() });
                traj.diagnostics.push(row);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        if i < steps {
            match rk4_step(&rhs, &x, dt) {
                Ok(next) => x = next,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
    }
    Ok((traj, failure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use approx::assert_relative_eq;

    fn free_particle() -> StructuralSystem {
        StructuralSystem::canonical(
            1,
            ScalarField::constant(0.0).named("s"),
            ScalarField::new(|x| 0.5 * x[1] * x[1]).named("H"),
        )
    }

    fn oscillator() -> StructuralSystem {
        StructuralSystem::canonical(
            1,
            ScalarField::constant(0.0).named("s"),
            ScalarField::new(|x| 0.5 * (x[0] * x[0] + x[1] * x[1])).named("H"),
        )
    }

    fn sgq() -> StructuralSystem {
        StructuralSystem::canonical(
            1,
            ScalarField::new(|x| x[0]).named("s"),
            ScalarField::new(|x| 0.5 * x[1] * x[1]).named("H"),
        )
    }

    #[test]
    fn tghs_free_particle() {
        let rhs = tghs_rhs(&free_particle(), &[0.0, 1.0]).unwrap();
        assert_relative_eq!(rhs[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(rhs[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tghs_sgq_frozen_example() {
        // s = q, H = p²/2 at (1, 2): ẋ = (p, −(0 + 1·H·... )) = (2, −2)
        let rhs = tghs_rhs(&sgq(), &[1.0, 2.0]).unwrap();
        assert_relative_eq!(rhs[0], 2.0, max_relative = 1e-10);
        assert_relative_eq!(rhs[1], -2.0, max_relative = 1e-10);

        let via_force = tghs_rhs_via_force(&sgq(), &[1.0, 2.0]).unwrap();
        assert_relative_eq!(rhs[0], via_force[0], epsilon = 1e-12);
        assert_relative_eq!(rhs[1], via_force[1], epsilon = 1e-12);
    }

    #[test]
    fn force_field_reduces_when_s_constant() {
        let sys = oscillator();
        let x = [0.7, -0.4];
        let f = force_field(&sys, &x).unwrap();
        let dh = sys.hamiltonian().gradient(&x);
        assert_relative_eq!(f[0], -dh[0], max_relative = 1e-10);
        assert_relative_eq!(f[1], -dh[1], max_relative = 1e-10);
    }

    #[test]
    fn pdot_equals_force_under_split() {
        let sys = sgq();
        let x = [0.8, 1.5];
        let rhs = tghs_rhs(&sys, &x).unwrap();
        let f = force_field(&sys, &x).unwrap();
        // ṗ_k = F_k: momentum components sit at index n + k
        assert_relative_eq!(rhs[1], f[0], epsilon = 1e-10);
    }

    #[test]
    fn s_dynamics_frozen_example() {
        let sys = sgq();
        let x = [1.0, 2.0];
        let w = s_dynamics(&sys, &x).unwrap();
        assert_relative_eq!(w, 2.0, max_relative = 1e-9);

        // ẋ·A route
        let xdot = tghs_rhs(&sys, &x).unwrap();
        let a = sys.structure_gradient(&x);
        let via_flow: f64 = xdot.iter().zip(a.iter()).map(|(v, ai)| v * ai).sum();
        assert_relative_eq!(w, via_flow, max_relative = 1e-8);

        // J_ji A_i F_j route
        let f = force_field(&sys, &x).unwrap();
        let j = sys.structural_matrix().at(&x);
        let mut via_force = 0.0;
        for i in 0..2 {
            for l in 0..2 {
                via_force += j[(l, i)] * a[i] * f[l];
            }
        }
        assert_relative_eq!(w, via_force, max_relative = 1e-8);
    }

    #[test]
    fn gchs_rate_frozen_example() {
        // f = q at (1,2): GPB part 2, geobracket 2, total 4;
        // decomposition df/dt = 2, wf = 2.
        let sys = sgq();
        let f = ScalarField::coordinate(0);
        let x = [1.0, 2.0];
        let total = gchs_rate(&sys, &f, &x).unwrap();
        assert_relative_eq!(total, 4.0, max_relative = 1e-9);
        let (tghs_part, wf) = gchs_rate_decomposed(&sys, &f, &x).unwrap();
        assert_relative_eq!(tghs_part, 2.0, max_relative = 1e-9);
        assert_relative_eq!(wf, 2.0, max_relative = 1e-9);
        assert_relative_eq!(total, tghs_part + wf, max_relative = 1e-10);

        // energy conservation
        let h = sys.hamiltonian().clone();
        assert!(gchs_rate(&sys, &h, &x).unwrap().abs() < 1e-9);
    }

    #[test]
    fn ordinary_time_derivative_routes() {
        let sys = sgq();
        let x = [0.6, 1.1];
        // f = x_k recovers the TGHS component
        for k in 0..2 {
            let f = ScalarField::coordinate(k);
            let d = ordinary_time_derivative(&sys, &f, &x).unwrap();
            let rhs = tghs_rhs(&sys, &x).unwrap();
            assert_relative_eq!(d, rhs[k], epsilon = 1e-9);
            let flow = flow_derivative(&sys, &f, &x).unwrap();
            assert!((d - flow).abs() < 1e-10);
        }
        // f = s recovers w
        let d = ordinary_time_derivative(&sys, sys.structure_function(), &x).unwrap();
        assert_relative_eq!(d, s_dynamics(&sys, &x).unwrap(), max_relative = 1e-8);
        // f = H with s const is conserved
        let free = free_particle();
        let d = ordinary_time_derivative(&free, free.hamiltonian(), &x).unwrap();
        assert!(d.abs() < 1e-10);
    }

    #[test]
    fn s_dynamics_vanishes_for_constant_s() {
        assert_eq!(s_dynamics(&free_particle(), &[0.7, -1.3]).unwrap(), 0.0);
    }

    #[test]
    fn equilibrium_solution_satisfies_its_ode() {
        // analytic derivative: d/dt f0 e^{-wt} = -w f(t), so the ODE residual
        // f' + w f is exactly zero; a time finite difference agrees to its
        // truncation error
        let (f0, w) = (3.0, 0.7);
        for i in 0..20 {
            let t = 0.25 * i as f64;
            let f = equilibrium_solution(f0, w, t);
            let analytic = -w * f;
            assert_eq!(analytic + w * f, 0.0);
            let h = 1e-6;
            let fd = (equilibrium_solution(f0, w, t + h) - equilibrium_solution(f0, w, t - h))
                / (2.0 * h);
            assert!((fd + w * f).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn equilibrium_solution_frozen_values() {
        assert_eq!(equilibrium_solution(3.0, 0.0, 17.3), 3.0);
        assert_relative_eq!(
            equilibrium_solution(3.0, 2.0, 1.0),
            0.4060058497098381,
            max_relative = 1e-12
        );
        let q = equilibrium_correction(2.0, 0.5);
        assert_relative_eq!(q, -0.6321205588285577, max_relative = 1e-12);
        assert_relative_eq!(
            equilibrium_solution(1.0, 2.0, 0.5),
            1.0 + q,
            max_relative = 1e-12
        );
        // bound f(t) <= f0 for w > 0
        for i in 0..50 {
            let t = i as f64 * 0.1;
            assert!(equilibrium_solution(3.0, 0.7, t) <= 3.0);
        }
    }

    #[test]
    fn integrate_free_particle() {
        let sys = free_particle();
        let traj = integrate(&sys, &[], &[0.0, 1.0], 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(traj.len(), 1001);
        let last = traj.final_state().unwrap();
        assert_relative_eq!(last.t, 1.0, epsilon = 1e-9);
        assert_relative_eq!(last.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(last.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn integrate_oscillator_closed_form_and_energy() {
        let sys = oscillator();
        let t1 = 2.0 * std::f64::consts::PI;
        let traj = integrate(&sys, &[], &[1.0, 0.0], 0.0, t1, 1e-3).unwrap();
        let last = traj.final_state().unwrap();
        // closed form at the realized final grid time (q = cos t, p = -sin t)
        assert!((last.t - t1).abs() < 1e-3);
        assert_relative_eq!(last.x[0], last.t.cos(), epsilon = 1e-6);
        assert_relative_eq!(last.x[1], -last.t.sin(), epsilon = 1e-6);

        let h = traj.diagnostic("H").unwrap();
        let drift = h.iter().map(|v| (v - h[0]).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "H drift {drift}");
    }

    #[test]
    fn oscillator_period_from_sign_changes() {
        // q = cos t crosses zero downward at π/2 and again at 5π/2; the gap
        // is one period. Linear interpolation at dt = 1e-3 resolves it to
        // well under 1e-5.
        let sys = oscillator();
        let dt = 1e-3;
        let traj = integrate(&sys, &[], &[1.0, 0.0], 0.0, 8.0, dt).unwrap();
        let mut downward = Vec::new();
        for i in 1..traj.len() {
            let (a, b) = (traj.states[i - 1].x[0], traj.states[i].x[0]);
            if a > 0.0 && b <= 0.0 {
                let frac = a / (a - b);
                downward.push(traj.states[i - 1].t + frac * dt);
            }
        }
        assert!(downward.len() >= 2, "need two downward crossings");
        let period = downward[1] - downward[0];
        assert!(
            (period - 2.0 * std::f64::consts::PI).abs() < 1e-5,
            "period {period}"
        );
    }

    #[test]
    fn conserved_quantity_reporting() {
        // H is covariantly conserved for the oscillator (s const); q is not
        // conserved for the s = q system.
        let sys = oscillator();
        let h = sys.hamiltonian().clone();
        let traj = integrate(&sys, &[h], &[1.0, 0.0], 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(is_covariantly_conserved(&traj, "H"), Some(true));
        assert_eq!(is_covariantly_conserved(&traj, "missing"), None);

        let sys = sgq();
        let q = ScalarField::coordinate(0).named("q");
        let traj = integrate(&sys, &[q], &[1.0, 2.0], 0.0, 1.0, 1e-3).unwrap();
        assert_eq!(is_covariantly_conserved(&traj, "q"), Some(false));
    }

    #[test]
    fn trajectory_times_are_uniform_and_increasing() {
        let sys = free_particle();
        let traj = integrate(&sys, &[], &[0.0, 1.0], 0.25, 1.75, 1e-2).unwrap();
        let dt = traj.states[1].t - traj.states[0].t;
        for pair in traj.states.windows(2) {
            let step = pair[1].t - pair[0].t;
            assert!(step > 0.0);
            assert!((step - dt).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_records_ds_dt_matching_w() {
        let sys = sgq();
        let s = sys.structure_function().clone();
        let dt = 1e-3;
        let traj = integrate(&sys, &[s], &[1.0, 2.0], 0.0, 0.5, dt).unwrap();
        let svals = traj.diagnostic("s").unwrap();
        let w = traj.diagnostic("w").unwrap();
        for i in 1..traj.len() - 1 {
            let ds_dt = (svals[i + 1] - svals[i - 1]) / (2.0 * dt);
            assert!(
                (ds_dt - w[i]).abs() < 1e-6,
                "ds/dt {ds_dt} vs w {} at step {i}",
                w[i]
            );
        }
    }

    #[test]
    fn integrate_rejects_bad_spans_and_blowups() {
        let sys = free_particle();
        assert!(matches!(
            integrate(&sys, &[], &[0.0, 1.0], 0.0, 1.0, 0.0),
            Err(Error::InvalidStep { .. })
        ));
        assert!(matches!(
            integrate(&sys, &[], &[0.0, 1.0], 1.0, 0.0, 0.1),
            Err(Error::InvalidSpan { .. })
        ));

        // H = q²p²/2 conserves qp, so q grows like e^{(qp)t}: exponential
        // blow-up from a hot start
        let explosive = StructuralSystem::canonical(
            1,
            ScalarField::constant(0.0),
            ScalarField::new(|x| 0.5 * x[0] * x[0] * x[1] * x[1]),
        );
        let out = integrate(&explosive, &[], &[2.0, 2.0], 0.0, 50.0, 0.5);
        assert!(matches!(out, Err(Error::BlowUp { .. })), "got {out:?}");
        let (partial, failure) =
            integrate_checked(&explosive, &[], &[2.0, 2.0], 0.0, 50.0, 0.5).unwrap();
        assert!(failure.is_some());
        assert!(!partial.is_empty());
    }

    #[test]
    fn acceleration_free_particle_is_zero() {
        let acc = acceleration(&free_particle(), &[0.3, 1.2], 1e-4).unwrap();
        assert_eq!(acc.w, 0.0);
        assert!(acc.beta.abs() < 1e-10);
        assert!(acc.a.norm() < 1e-10);
        assert!(acc.xddot.norm() < 1e-10);
    }

    #[test]
    fn acceleration_oscillator_frozen_value() {
        // at (1, 0): ẍ = (-q, -p) = (-1, 0), w = 0 so a = ẍ
        let acc = acceleration(&oscillator(), &[1.0, 0.0], 1e-4).unwrap();
        assert_relative_eq!(acc.a[0], -1.0, epsilon = 1e-6);
        assert_relative_eq!(acc.a[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn acceleration_identity_holds_by_assembly() {
        let sys = sgq();
        let x = [0.9, 1.4];
        let acc = acceleration(&sys, &x, 1e-4).unwrap();
        for i in 0..2 {
            let assembled = acc.xddot[i] + 2.0 * acc.w * acc.xdot[i] + x[i] * acc.beta;
            assert_relative_eq!(acc.a[i], assembled, epsilon = 1e-12);
        }
    }

    #[test]
    fn riemannian_rate_reduces_on_flat_space() {
        let metric = Metric::euclidean(2);
        let h = ScalarField::new(|x: &[f64]| 0.5 * (x[2] * x[2] + x[3] * x[3]));
        let sys = induced_canonical_system(&metric, h);
        let x = [0.4, -0.2, 0.7, 0.1];
        for k in 0..4 {
            let specialized = gchs_riemannian_rate(&metric, &sys, k, &x).unwrap();
            // flat: D x_k/dt = J_kj ∂_j H exactly
            let dh = sys.hamiltonian().gradient(&x);
            let j = sys.structural_matrix().at(&x);
            let plain: f64 = (0..4).map(|l| j[(k, l)] * dh[l]).sum();
            assert_relative_eq!(specialized, plain, epsilon = 1e-10);
        }
    }

    #[test]
    fn riemannian_rate_matches_generic_on_sphere() {
        let metric = Metric::sphere2();
        let h = ScalarField::new(|x: &[f64]| 0.5 * (x[2] * x[2] + x[3] * x[3]));
        let sys = induced_canonical_system(&metric, h);
        let x = [std::f64::consts::PI / 4.0, 0.3, 0.7, 0.4];
        for k in 0..4 {
            let specialized = gchs_riemannian_rate(&metric, &sys, k, &x).unwrap();
            let generic = gchs_rate(&sys, &ScalarField::coordinate(k), &x).unwrap();
            let denom = generic.abs().max(1.0);
            assert!(
                ((specialized - generic) / denom).abs() < 1e-8,
                "k={k}: {specialized} vs {generic}"
            );
        }
        // connection route: Riemannian w equals generic S-dynamics
        let w_r = s_dynamics_riemannian(&metric, &sys, &x).unwrap();
        let w_g = s_dynamics(&sys, &x).unwrap();
        assert_relative_eq!(w_r, w_g, max_relative = 1e-7);
    }

    #[test]
    fn csv_round_trips_bit_for_bit() {
        let sys = oscillator();
        let traj = integrate(
            &sys,
            &[ScalarField::coordinate(0)],
            &[1.0, 0.0],
            0.0,
            0.01,
            1e-3,
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, "t,x1,x2,H,w,Dx1");
        for (row, state) in lines.zip(&traj.states) {
            let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols[0].to_bits(), state.t.to_bits());
            assert_eq!(cols[1].to_bits(), state.x[0].to_bits());
            assert_eq!(cols[2].to_bits(), state.x[1].to_bits());
        }
    }
}

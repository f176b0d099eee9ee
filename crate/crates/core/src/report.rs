//! The identity suite: every bracket/manifold identity the crate promises,
//! evaluated over randomized samples and collected into a pass/fail report.
//!
//! Each entry records the identity's name, a formula anchor, the maximum
//! residual observed, the tolerance it is held to, and the sample count.
//! Residuals compared against relative tolerances are stored already
//! normalized by `max(1, |reference|)`; the anchor says so where it applies.

use std::io::Write;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::bracket::{
    commutation_residual, geometrio, gpb, gspb, structural_operator, StructuralSystem,
};
use crate::dynamics::{gchs_rate, gchs_riemannian_rate, induced_canonical_system, s_dynamics};
use crate::error::Result;
use crate::fields::{ScalarField, VectorField};
use crate::geodesic::{geodesic_velocity_residual, integrate_geodesic, integrate_geodesic_checked};
use crate::manifold::{
    covariant_derivative, covariant_derivative_lowered, geospin, sphere_chart,
    sphere_chart_velocity, sphere_embed, sphere_embedded_velocity_to_chart, structural_gradient,
    Metric,
};

/// Deterministic draws for identity checks and randomized tests.
pub mod sampling {
    use super::*;
    use rand::Rng;

    /// Uniform point in an axis-aligned box.
    pub fn point_in(region: &[(f64, f64)], rng: &mut StdRng) -> Vec<f64> {
        region
            .iter()
            .map(|(lo, hi)| rng.gen_range(*lo..*hi))
            .collect()
    }

    /// A smooth random field with O(1) values and derivatives: constant +
    /// linear + quadratic + sine terms with random coefficients.
    pub fn smooth_field(rng: &mut StdRng, m: usize) -> ScalarField {
        smooth_field_on_axes(rng, m, m)
    }

    /// A smooth random field depending only on the first `axes` coordinates.
    pub fn smooth_field_on_axes(rng: &mut StdRng, m: usize, axes: usize) -> ScalarField {
        let c0: f64 = rng.gen_range(-1.0..1.0);
        let lin: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let quad: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let amp: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let freq: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..1.5)).collect();
        ScalarField::new(move |x| {
            let mut acc = c0;
            for i in 0..axes.min(x.len()) {
                acc += lin[i] * x[i] + quad[i] * x[i] * x[i] + amp[i] * (freq[i] * x[i]).sin();
            }
            acc
        })
    }

    /// Random constant antisymmetric matrix with entries in [-1, 1].
    pub fn antisymmetric_matrix(rng: &mut StdRng, m: usize) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(m, m);
        for i in 0..m {
            for k in (i + 1)..m {
                let v: f64 = rng.gen_range(-1.0..1.0);
                j[(i, k)] = v;
                j[(k, i)] = -v;
            }
        }
        j
    }
}

/// One verified identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityEntry {
    pub identity: String,
    pub anchor: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
}

impl IdentityEntry {
    /// The pass flag is derived, never set directly: pass ⇔ residual ≤ tol.
    pub fn new(
        identity: impl Into<String>,
        anchor: impl Into<String>,
        max_residual: f64,
        tolerance: f64,
        samples: usize,
    ) -> Self {
        IdentityEntry {
            identity: identity.into(),
            anchor: anchor.into(),
            pass: max_residual <= tolerance,
            max_residual,
            tolerance,
            samples,
        }
    }
}

/// The full suite result.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IdentityReport {
    pub entries: Vec<IdentityEntry>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, identity: &str) -> Option<&IdentityEntry> {
        self.entries.iter().find(|e| e.identity == identity)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let entries: Vec<IdentityEntry> =
            serde_json::from_str(text).map_err(|e| crate::Error::Parse(e.to_string()))?;
        Ok(IdentityReport { entries })
    }

    /// Aligned plain-text table, one row per identity.
    pub fn render_table(&self) -> String {
        let mut rows = vec![[
            "identity".to_string(),
            "anchor".to_string(),
            "max_residual".to_string(),
            "tolerance".to_string(),
            "samples".to_string(),
            "result".to_string(),
        ]];
        for e in &self.entries {
            rows.push([
                e.identity.clone(),
                e.anchor.clone(),
                format!("{:.3e}", e.max_residual),
                format!("{:.1e}", e.tolerance),
                e.samples.to_string(),
                if e.pass { "PASS".into() } else { "FAIL".into() },
            ]);
        }
        let mut widths = [0usize; 6];
        for row in &rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let mut out = String::new();
        for row in &rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, cell)| format!("{:w$}", cell, w = widths[i]))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    pub fn write_json<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(self.to_json().as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Knobs for the suite run.
#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            samples: 100,
            seed: 0x5EED,
        }
    }
}

fn rel(residual: f64, reference: f64) -> f64 {
    residual.abs() / reference.abs().max(1.0)
}

/// A phase point for `sys` that stays inside the metric's chart: chart-valid
/// q coordinates plus boxed momenta when the dimensions line up as m = 2n,
/// chart points for m = n, a plain box otherwise.
fn sample_phase_point(
    metric: &Metric,
    sys: &StructuralSystem,
    rng: &mut StdRng,
) -> Result<Vec<f64>> {
    let n = metric.dim();
    let m = sys.dim();
    if m == n {
        metric.sample_chart_point(rng)
    } else if m == 2 * n {
        let mut x = metric.sample_chart_point(rng)?;
        x.extend(sampling::point_in(&vec![(-1.5, 1.5); n], rng));
        Ok(x)
    } else {
        Ok(sampling::point_in(&vec![(-1.5, 1.5); m], rng))
    }
}

/// The literal trace identity tr W = A_i v^i over random (x, v) draws.
pub fn trace_identity_entry(metric: &Metric, samples: usize, seed: u64) -> Result<IdentityEntry> {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = metric.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = metric.sample_chart_point(&mut rng)?;
        let v = sampling::point_in(&vec![(-1.5, 1.5); n], &mut rng);
        let spin = geospin(metric, &x, &v)?;
        let a = structural_gradient(metric, &x)?;
        let dot: f64 = a.iter().zip(v.iter()).map(|(ai, vi)| ai * vi).sum();
        worst = worst.max((spin.trace() - dot).abs());
    }
    Ok(IdentityEntry::new(
        "trace-identity",
        "tr W = A_i v^i (contravariant v)",
        worst,
        1e-10,
        samples,
    ))
}

/// Run every identity check against a metric and a structural system.
/// With `sys = None` the metric's induced canonical system with
/// H = ½|p|² + ½|q|² is used.
pub fn run_identity_suite(
    metric: &Metric,
    sys: Option<&StructuralSystem>,
    opts: SuiteOptions,
) -> Result<IdentityReport> {
    let default_sys;
    let sys = match sys {
        Some(s) => s,
        None => {
            default_sys = induced_canonical_system(metric, default_hamiltonian(metric.dim()));
            &default_sys
        }
    };

    let mut report = IdentityReport::default();
    let samples = opts.samples.max(1);
    let m = sys.dim();

    // ── bracket identities on the supplied system ──────────────────────
    {
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x01);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = sample_phase_point(metric, sys, &mut rng)?;
            let j = sys.structural_matrix().at(&x);
            for i in 0..m {
                for k in 0..m {
                    worst = worst.max((j[(i, k)] + j[(k, i)]).abs());
                }
            }
        }
        let tol = if sys.structural_matrix().is_constant() {
            0.0
        } else {
            1e-12
        };
        report.entries.push(IdentityEntry::new(
            "structural-matrix-antisymmetry",
            "J_ij = -J_ji",
            worst,
            tol,
            samples,
        ));
    }

    {
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x02);
        let mut worst_s: f64 = 0.0;
        let mut worst_c: f64 = 0.0;
        let c = ScalarField::constant(7.0);
        for _ in 0..samples {
            let x = sample_phase_point(metric, sys, &mut rng)?;
            worst_s = worst_s.max(structural_operator(sys, sys.structure_function(), &x)?.abs());
            worst_c = worst_c.max(structural_operator(sys, &c, &x)?.abs());
        }
        report.entries.push(IdentityEntry::new(
            "structural-operator-annihilates-s",
            "S s = J_ij A_i A_j = 0",
            worst_s,
            1e-10,
            samples,
        ));
        report.entries.push(IdentityEntry::new(
            "structural-operator-annihilates-constants",
            "S c = 0",
            worst_c,
            1e-10,
            samples,
        ));
    }

    {
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x03);
        let mut worst_b: f64 = 0.0;
        let mut worst_w: f64 = 0.0;
        for _ in 0..samples {
            let x = sample_phase_point(metric, sys, &mut rng)?;
            let geo = geometrio(sys, &x)?;
            let j = sys.structural_matrix().at(&x);
            let jt_a = j.transpose() * &geo.a;
            for k in 0..m {
                worst_b = worst_b.max((geo.b[k] - jt_a[k]).abs());
            }
            let dh = sys.hamiltonian().gradient(&x);
            let b_dh: f64 = geo.b.iter().zip(dh.iter()).map(|(b, d)| b * d).sum();
            worst_w = worst_w.max(rel(geo.w - b_dh, geo.w));
        }
        report.entries.push(IdentityEntry::new(
            "geometrio-position-row",
            "b_k = S x_k = J_ik A_i",
            worst_b,
            1e-12,
            samples,
        ));
        report.entries.push(IdentityEntry::new(
            "geometrio-hamiltonian-row",
            "w = S H = b_j dH/dx_j (relative)",
            worst_w,
            1e-8,
            samples,
        ));
    }

    if let Some(n) = sys.canonical_pairs() {
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x04);
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            let x = sample_phase_point(metric, sys, &mut rng)?;
            let j = i % n;
            let k = (i / n) % n;
            worst = worst.max(commutation_residual(sys, j, k, &x)?.abs());
        }
        report.entries.push(IdentityEntry::new(
            "commutation-relation",
            "{x_j, p_k} = d_jk + x_j A_k + p_k b_j",
            worst,
            1e-10,
            samples,
        ));
    }

    {
        // Reduction: with s constant the GSPB must equal the GPB exactly.
        let reduced = StructuralSystem::new(
            sys.structural_matrix().clone(),
            ScalarField::constant(0.0),
            sys.hamiltonian().clone(),
        );
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x05);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let f = sampling::smooth_field(&mut rng, m);
            let g = sampling::smooth_field(&mut rng, m);
            let x = sample_phase_point(metric, sys, &mut rng)?;
            let a = gspb(&reduced, &f, &g, &x)?;
            let b = gpb(&reduced, &f, &g, &x)?;
            worst = worst.max((a - b).abs());
        }
        report.entries.push(IdentityEntry::new(
            "gspb-reduction",
            "s const => {f,g} = {f,g}_GPB",
            worst,
            1e-12,
            samples,
        ));
    }

    {
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x06);
        let mut worst_h: f64 = 0.0;
        let mut worst_one: f64 = 0.0;
        let one = ScalarField::constant(1.0);
        for _ in 0..samples {
            let x = sample_phase_point(metric, sys, &mut rng)?;
            let h = sys.hamiltonian();
            worst_h = worst_h.max(gspb(sys, h, h, &x)?.abs());
            let w = s_dynamics(sys, &x)?;
            worst_one = worst_one.max((gspb(sys, &one, h, &x)? - w).abs());
        }
        report.entries.push(IdentityEntry::new(
            "energy-conservation",
            "{H, H} = 0",
            worst_h,
            1e-10,
            samples,
        ));
        report.entries.push(IdentityEntry::new(
            "bracket-with-unity",
            "{1, H} = w",
            worst_one,
            1e-10,
            samples,
        ));
    }

    // ── manifold identities ────────────────────────────────────────────
    report.entries.push(trace_identity_entry(
        metric,
        10 * samples,
        opts.seed ^ 0x07,
    )?);

    {
        // Lowered covariant derivative exactly as written vs the
        // metric-lowered mixed form.
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x08);
        let mut worst: f64 = 0.0;
        let n = metric.dim();
        let checks = samples.clamp(1, 10);
        for _ in 0..checks {
            let x = metric.sample_chart_point(&mut rng)?;
            let comps: Vec<ScalarField> = (0..n)
                .map(|_| sampling::smooth_field(&mut rng, n))
                .collect();
            let comps2 = comps.clone();
            let vf = VectorField::new(move |y| comps2.iter().map(|c| c.eval(y)).collect());
            let low = covariant_derivative_lowered(metric, &vf, &x)?;
            let mixed = covariant_derivative(metric, &vf, &x)?;
            let g = metric.at(&x)?;
            let lowered_mixed = &g * &mixed;
            for i in 0..n {
                for k in 0..n {
                    worst = worst.max(rel(
                        low[(i, k)] - lowered_mixed[(i, k)],
                        lowered_mixed[(i, k)],
                    ));
                }
            }
        }
        report.entries.push(IdentityEntry::new(
            "lowered-covariant-derivative",
            "d_k v_j - W_kj = g_jl (d_k v^l + W^l_k) (relative)",
            worst,
            1e-6,
            checks,
        ));
    }

    {
        // Specialized Riemannian coordinate rate vs the generic GSPB rate
        // on the metric's own induced system.
        let induced = induced_canonical_system(metric, default_hamiltonian(metric.dim()));
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x09);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let x = sample_phase_point(metric, &induced, &mut rng)?;
            for k in 0..induced.dim() {
                let specialized = gchs_riemannian_rate(metric, &induced, k, &x)?;
                let generic = gchs_rate(&induced, &ScalarField::coordinate(k), &x)?;
                worst = worst.max(rel(specialized - generic, generic));
            }
        }
        report.entries.push(IdentityEntry::new(
            "riemannian-gchs-specialization",
            "Dx_k/dt = J_kj dH_j + J_kj G^i_ji H + x_k w (relative)",
            worst,
            1e-8,
            samples,
        ));
    }

    {
        // Geodesic recovery: the covariant velocity rate vanishes along an
        // integrated geodesic. The trajectory starts at a sampled chart
        // point and shoots toward the middle of the sample box; if it still
        // reaches the chart edge, the residual is taken over the segment
        // that stayed inside.
        let mut rng = StdRng::seed_from_u64(opts.seed ^ 0x0a);
        let mut best: Option<(f64, usize)> = None;
        for _ in 0..5 {
            let x0 = metric.sample_chart_point(&mut rng)?;
            let v0: Vec<f64> = x0
                .iter()
                .zip(metric.sample_region())
                .map(|(c, (lo, hi))| if *c <= 0.5 * (lo + hi) { 0.5 } else { -0.5 })
                .collect();
            let (states, _failure) = integrate_geodesic_checked(metric, &x0, &v0, 0.0, 1.0, 1e-3)?;
            if states.len() >= 100 {
                let residual = geodesic_velocity_residual(metric, &states)?;
                best = Some((residual, states.len()));
                break;
            }
        }
        let (residual, count) = best.ok_or(crate::Error::OutOfChart)?;
        report.entries.push(IdentityEntry::new(
            "geodesic-velocity-recovery",
            "dv/dt + W v = 0 along geodesics",
            residual,
            1e-6,
            count,
        ));
    }

    if metric.name() == "sphere2" {
        let residual = sphere_chart_change_residual()?;
        report.entries.push(IdentityEntry::new(
            "sphere-chart-covariance",
            "geodesics agree across rotated charts",
            residual,
            1e-6,
            1,
        ));
    }

    Ok(report)
}

fn default_hamiltonian(n: usize) -> ScalarField {
    ScalarField::new(move |x: &[f64]| {
        let q: f64 = x[..n].iter().map(|v| v * v).sum();
        let p: f64 = x[n..].iter().map(|v| v * v).sum();
        0.5 * p + 0.5 * q
    })
    .named("H")
}

/// Integrate one geodesic in the standard sphere chart and again in a chart
/// rotated by π/2 about the x-axis, then compare the embedded endpoints.
fn sphere_chart_change_residual() -> Result<f64> {
    let metric = Metric::sphere2();
    let x0 = [std::f64::consts::FRAC_PI_4, 0.2];
    let v0 = [0.3, 1.0];
    let (t0, t1, dt) = (0.0, 1.0, 1e-3);

    let states_a = integrate_geodesic(&metric, &x0, &v0, t0, t1, dt)?;

    let rot = |p: &[f64; 3]| [p[0], -p[2], p[1]];
    let p0 = sphere_embed(&x0);
    let u0 = sphere_chart_velocity(&x0, &v0);
    let q0 = rot(&p0);
    let u0r = rot(&u0);
    let x0b = sphere_chart(&q0);
    let v0b = sphere_embedded_velocity_to_chart(&x0b, &u0r);
    let states_b = integrate_geodesic(&metric, &x0b, &v0b, t0, t1, dt)?;

    let end_a = rot(&sphere_embed(&states_a.last().unwrap().x));
    let end_b = sphere_embed(&states_b.last().unwrap().x);
    let d2: f64 = end_a
        .iter()
        .zip(end_b.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(d2.sqrt())
}

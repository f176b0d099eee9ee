//! Named manifolds and systems so every worked example is runnable by name.

use crate::bracket::StructuralSystem;
use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::manifold::Metric;

pub const MANIFOLD_PRESETS: &[&str] = &["euclidean", "sphere2", "halfplane"];
pub const SYSTEM_PRESETS: &[&str] = &["free", "oscillator", "sgq"];

/// Look up a manifold preset. `dim` applies to `euclidean` (default 2).
pub fn manifold_preset(name: &str, dim: Option<usize>) -> Result<Metric> {
    match name {
        "euclidean" => Ok(Metric::euclidean(dim.unwrap_or(2))),
        "sphere2" => Ok(Metric::sphere2()),
        "halfplane" => Ok(Metric::half_plane()),
        other => Err(Error::Parse(format!(
            "unknown manifold preset '{other}' (expected one of {MANIFOLD_PRESETS:?})"
        ))),
    }
}

/// Look up a system preset. `dim` is the full phase dimension m = 2n and
/// applies to `free` and `oscillator` (default 2); `sgq` is fixed at m = 2.
pub fn system_preset(name: &str, dim: Option<usize>) -> Result<StructuralSystem> {
    let m = dim.unwrap_or(2);
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::Parse(format!(
            "system presets need a positive even dimension, got {m}"
        )));
    }
    let n = m / 2;
    match name {
        // s = const, H = ½|p|²
        "free" => Ok(StructuralSystem::canonical(
            n,
            ScalarField::constant(0.0).named("s"),
            ScalarField::new(move |x: &[f64]| 0.5 * x[n..].iter().map(|p| p * p).sum::<f64>())
                .named("H"),
        )),
        // s = const, H = ½(|q|² + |p|²)
        "oscillator" => Ok(StructuralSystem::canonical(
            n,
            ScalarField::constant(0.0).named("s"),
            ScalarField::new(move |x: &[f64]| 0.5 * x.iter().map(|c| c * c).sum::<f64>())
                .named("H"),
        )),
        // m = 2, s = q, H = p²/2
        "sgq" => {
            if let Some(d) = dim {
                if d != 2 {
                    return Err(Error::Parse(format!(
                        "preset 'sgq' is two-dimensional, got dim {d}"
                    )));
                }
            }
            Ok(StructuralSystem::canonical(
                1,
                ScalarField::new(|x| x[0]).named("s"),
                ScalarField::new(|x| 0.5 * x[1] * x[1]).named("H"),
            ))
        }
        other => Err(Error::Parse(format!(
            "unknown system preset '{other}' (expected one of {SYSTEM_PRESETS:?})"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, s_dynamics};
    use approx::assert_relative_eq;

    #[test]
    fn all_presets_resolve() {
        for name in MANIFOLD_PRESETS {
            assert!(manifold_preset(name, None).is_ok(), "{name}");
        }
        for name in SYSTEM_PRESETS {
            assert!(system_preset(name, None).is_ok(), "{name}");
        }
        assert!(manifold_preset("nope", None).is_err());
        assert!(system_preset("nope", None).is_err());
        assert!(system_preset("free", Some(3)).is_err());
    }

    #[test]
    fn sgq_first_row_w_is_two() {
        let sys = system_preset("sgq", None).unwrap();
        assert_relative_eq!(
            s_dynamics(&sys, &[1.0, 2.0]).unwrap(),
            2.0,
            max_relative = 1e-9
        );
        let traj = integrate(&sys, &[], &[1.0, 2.0], 0.0, 0.01, 1e-3).unwrap();
        let w = traj.diagnostic("w").unwrap();
        assert_relative_eq!(w[0], 2.0, max_relative = 1e-9);
    }

    #[test]
    fn free_preset_scales_with_dimension() {
        let sys = system_preset("free", Some(4)).unwrap();
        assert_eq!(sys.dim(), 4);
        let rhs = crate::dynamics::tghs_rhs(&sys, &[0.0, 0.0, 1.0, 2.0]).unwrap();
        assert_relative_eq!(rhs[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(rhs[1], 2.0, epsilon = 1e-10);
        assert_relative_eq!(rhs[2], 0.0, epsilon = 1e-10);
        assert_relative_eq!(rhs[3], 0.0, epsilon = 1e-10);
    }
}

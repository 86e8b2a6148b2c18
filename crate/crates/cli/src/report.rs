//! Output formatting: round-trip-safe CSV numbers, the human fit table,
//! and the JSON fit document.

use concentric_core::estimators::{FitError, FitResult, Method};
use concentric_core::geometry::GeometricParams;
use std::collections::BTreeMap;

/// 17 significant digits; survives parse-format round trips.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fit_table(results: &BTreeMap<Method, Result<FitResult, FitError>>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<11} {:<6} {:>13} {:>10} {:>10}  geometry\n",
        "method", "valid", "eigenvalue", "residual", "seconds"
    ));
    for (method, res) in results {
        match res {
            Ok(fit) => {
                let geo = fit
                    .theta
                    .to_geometry()
                    .map(describe_geometry)
                    .unwrap_or_else(|e| format!("<{e}>"));
                out.push_str(&format!(
                    "{:<11} {:<6} {:>13.6e} {:>10.3e} {:>10.3e}  {}\n",
                    method.name(),
                    if fit.valid { "yes" } else { "no" },
                    fit.eigenvalue,
                    fit.pencil_residual,
                    fit.elapsed_seconds,
                    geo
                ));
            }
            Err(e) => out.push_str(&format!("{:<11} failed: {e}\n", method.name())),
        }
    }
    out
}

fn describe_geometry(geo: GeometricParams) -> String {
    let rings: Vec<String> = geo
        .rings
        .iter()
        .map(|r| format!("({:.4}, {:.4})", r.a, r.b))
        .collect();
    format!(
        "center ({:.4}, {:.4})  axes {}  psi {:.4}",
        geo.center.x,
        geo.center.y,
        rings.join(" "),
        geo.psi
    )
}

pub fn fit_json(
    results: &BTreeMap<Method, Result<FitResult, FitError>>,
    f0: f64,
    points: usize,
) -> serde_json::Value {
    let methods: serde_json::Map<String, serde_json::Value> = results
        .iter()
        .map(|(method, res)| {
            let value = match res {
                Ok(fit) => {
                    let geometry = fit.theta.to_geometry().ok().map(|g| {
                        serde_json::json!({
                            "center": [g.center.x, g.center.y],
                            "rings": g.rings.iter()
                                .map(|r| serde_json::json!({"a": r.a, "b": r.b}))
                                .collect::<Vec<_>>(),
                            "psi": g.psi,
                        })
                    });
                    serde_json::json!({
                        "theta": fit.theta.as_vector().iter().copied().collect::<Vec<f64>>(),
                        "eigenvalue": fit.eigenvalue,
                        "valid": fit.valid,
                        "elapsed_seconds": fit.elapsed_seconds,
                        "pencil_residual": fit.pencil_residual,
                        "geometry": geometry,
                        "error": serde_json::Value::Null,
                    })
                }
                Err(e) => serde_json::json!({ "error": e.to_string() }),
            };
            (method.name().to_string(), value)
        })
        .collect();
    serde_json::json!({
        "f0": f0,
        "points": points,
        "methods": methods,
    })
}

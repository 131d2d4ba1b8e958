use fracwave::fracwave as module;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<T>(f: impl FnOnce(&Bound<'_, PyModule>) -> PyResult<T>) -> T {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(module);
        Python::initialize();
    });
    Python::attach(|py| f(&py.import("fracwave")?)).unwrap()
}

#[test]
fn mittag_leffler_matches_exponential() {
    let v: f64 = with_module(|m| {
        m.getattr("mittag_leffler")?
            .call1((1.0, 1.0, -1.5))?
            .extract()
    });
    assert!((v - (-1.5f64).exp()).abs() < 1e-12);
}

#[test]
fn invalid_order_raises_value_error() {
    with_module(|m| {
        let e = m
            .getattr("mittag_leffler")?
            .call1((2.5, 1.0, -1.0))
            .unwrap_err();
        assert!(e.is_instance_of::<pyo3::exceptions::PyValueError>(m.py()));
        Ok(())
    });
}

#[test]
fn ip1_recovers_constant_source() {
    let (m, n, j) = (128usize, 6usize, 64usize);
    let x: Vec<f64> = (0..=j).map(|k| k as f64 / j as f64).collect();
    let h: Vec<f64> = x.iter().map(|s| s * (1.0 - s)).collect();
    let f = vec![1.0; m + 1];
    let err: f64 = with_module(|md| {
        let fld = md
            .getattr("solve_direct")?
            .call1((1.5, f.clone(), h.clone(), n, j))?;
        let g: Vec<f64> = fld.call_method1("observe_g", (h.clone(),))?.extract()?;
        let out = md.getattr("solve_ip1")?.call1((1.5, g, h.clone(), n, j))?;
        let (rec, diag): (Vec<f64>, Bound<'_, PyDict>) = out.extract()?;
        assert!(diag.contains("forward_residual")?);
        Ok(rec.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max))
    });
    assert!(err < 1e-2, "{err}");
}

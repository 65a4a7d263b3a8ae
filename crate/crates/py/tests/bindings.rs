use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(pydivext::pydivext)(py);
        let globals = PyDict::new(py);
        globals.set_item("pydivext", module).unwrap();
        f(py, &globals);
    });
}

#[test]
fn divergence_and_distribution_round_trip() {
    with_module(|py, g| {
        py.run(
            c"u = pydivext.Distribution.uniform(2)
p = pydivext.Distribution(2, [0.5, 0.5, 0.0, 0.0])
lo, hi, exact = pydivext.divergence('kl', p, u)
assert exact and abs(hi - 1.0) < 1e-12
assert p.min_entropy() == 1.0",
            Some(g),
            None,
        )
        .unwrap();
    });
}

#[test]
fn extractor_from_spec_verifies_within_claim() {
    with_module(|py, g| {
        py.run(
            c"e = pydivext.Extractor.from_spec('{\"kind\": \"lhl\", \"n\": 4, \"m\": 1}')
c = e.claimed_error('renyi:2', 2, strong=True, average=True)
r = e.worst_error('renyi:2', 2, strong=True)
assert r['exact'] and r['worst'] <= c + 1e-6",
            Some(g),
            None,
        )
        .unwrap();
    });
}

#[test]
fn bad_spec_raises_value_error() {
    with_module(|py, g| {
        let r = py.run(c"pydivext.Sampler.from_spec('{\"kind\": \"pairwise\"}')", Some(g), None);
        assert!(r.unwrap_err().is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use levylab_py::levylab_py;

#[test]
fn module_runs_from_python() {
    pyo3::append_to_inittab!(levylab_py);
    Python::initialize();
    Python::attach(|py| {
        let locals = PyDict::new(py);
        py.run(
            c_str!(
                r#"
import math
import levylab_py as lp
t = lp.Target("quadratic_cauchy")
assert abs(t.variance() - 1.0) < 1e-9
assert abs(t.oracle_potential(0.0) + 1.0) < 1e-12
a4 = lp.Target("cauchy_alpha4")
assert a4.oracle_drift(1.0) == -6.0
xs = lp.sample_stable(1.5, 1000, seed=2)
assert xs == lp.sample_stable(1.5, 1000, seed=2)
try:
    lp.Target("no_such_target")
    raise AssertionError("expected ValueError")
except ValueError:
    pass
s = lp.langevin_ensemble(t, paths=200, t_final=0.5, dt=0.01, snapshots=2, seed=4)
n_times = len(s["t"])
"#
            ),
            None,
            Some(&locals),
        )
        .unwrap();
        let n: usize = locals.get_item("n_times").unwrap().unwrap().extract().unwrap();
        assert_eq!(n, 3);
    });
}

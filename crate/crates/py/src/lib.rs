use pyo3::prelude::*;

#[pymodule]
fn valmpc_py(_m: &Bound<PyModule>) -> PyResult<()> {
    Ok(())
}

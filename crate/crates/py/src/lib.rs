use pyo3::prelude::*;

#[pymodule]
fn sgsov_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}

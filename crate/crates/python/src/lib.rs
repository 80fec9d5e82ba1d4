//! Python bindings: matrices, permutations, generators, factorization and
//! tree identification.

use std::fs::File;
use std::io::{BufReader, BufWriter};

use butterfly_ident::experiments::{generate_instance as gen_instance, Family};
use butterfly_ident::{
    count_trees as count, dft_matrix as dft, hierarchical_factorize as factorize, identify as run_identify,
    make_target as target, random_orthogonal_butterfly as orthogonal_butterfly, ButterflyFactors, ComplexMatrix,
    Error, IdentificationReport, IdentifyConfig, Permutation, C64,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Dense complex matrix.
#[pyclass(name = "Matrix", module = "pybfid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMatrix(ComplexMatrix);

#[pymethods]
impl PyMatrix {
    /// Builds a matrix from a list of rows of complex (or real) numbers.
    #[new]
    fn new(rows: Vec<Vec<C64>>) -> PyResult<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(PyValueError::new_err("rows have different lengths"));
        }
        ComplexMatrix::from_vec(r, c, rows.concat()).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn read_cmx(path: &str) -> PyResult<Self> {
        let f = File::open(path)?;
        ComplexMatrix::read_cmx(BufReader::new(f)).map(Self).map_err(py_err)
    }

    fn write_cmx(&self, path: &str) -> PyResult<()> {
        self.0.write_cmx(BufWriter::new(File::create(path)?)).map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.rows(), self.0.cols())
    }

    fn to_list(&self) -> Vec<Vec<C64>> {
        (0..self.0.rows()).map(|r| self.0.row(r).to_vec()).collect()
    }

    fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    fn __matmul__(&self, other: &PyMatrix) -> PyResult<Self> {
        self.0.matmul(&other.0).map(Self).map_err(py_err)
    }

    fn __sub__(&self, other: &PyMatrix) -> PyResult<Self> {
        self.0.sub(&other.0).map(Self).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Matrix({}x{})", self.0.rows(), self.0.cols())
    }
}

/// Permutation of `0..n`; `p[i]` is the image of `i`.
#[pyclass(name = "Permutation", module = "pybfid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPermutation(Permutation);

#[pymethods]
impl PyPermutation {
    #[new]
    fn new(images: Vec<usize>) -> PyResult<Self> {
        Permutation::new(images).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn identity(n: usize) -> Self {
        Self(Permutation::identity(n))
    }

    #[staticmethod]
    fn random(n: usize, seed: u64) -> Self {
        Self(Permutation::random(n, seed))
    }

    #[staticmethod]
    fn read_perm(path: &str) -> PyResult<Self> {
        let f = File::open(path)?;
        Permutation::read_perm(BufReader::new(f)).map(Self).map_err(py_err)
    }

    fn write_perm(&self, path: &str) -> PyResult<()> {
        self.0.write_perm(BufWriter::new(File::create(path)?)).map_err(py_err)
    }

    fn images(&self) -> Vec<usize> {
        self.0.images().to_vec()
    }

    fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    /// `i ↦ self(other(i))`.
    fn compose(&self, other: &PyPermutation) -> Self {
        Self(self.0.compose(&other.0))
    }

    /// Row `i` of the result is row `self[i]` of `m`.
    fn permute_rows(&self, m: &PyMatrix) -> PyResult<PyMatrix> {
        self.0.permute_rows(&m.0).map(PyMatrix).map_err(py_err)
    }

    fn permute_cols(&self, m: &PyMatrix) -> PyResult<PyMatrix> {
        self.0.permute_cols(&m.0).map(PyMatrix).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __getitem__(&self, i: usize) -> PyResult<usize> {
        self.0
            .images()
            .get(i)
            .copied()
            .ok_or_else(|| PyValueError::new_err(format!("index {i} out of range")))
    }

    fn __eq__(&self, other: &PyPermutation) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("Permutation({:?})", self.0.images())
    }
}

/// Butterfly factors `X^(1), …, X^(L)`.
#[pyclass(name = "ButterflyFactors", module = "pybfid", frozen)]
struct PyFactors(ButterflyFactors);

#[pymethods]
impl PyFactors {
    fn factors(&self) -> Vec<PyMatrix> {
        self.0.factors().iter().cloned().map(PyMatrix).collect()
    }

    fn product(&self) -> PyMatrix {
        PyMatrix(self.0.product())
    }

    fn __len__(&self) -> usize {
        self.0.num_levels()
    }

    fn write_dir(&self, path: &str) -> PyResult<()> {
        self.0.write_dir(path.as_ref()).map_err(py_err)
    }
}

/// Outcome of `identify`.
#[pyclass(name = "Report", module = "pybfid", frozen)]
struct PyReport(IdentificationReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn success(&self) -> bool {
        self.0.is_success()
    }

    #[getter]
    fn e_bf(&self) -> Option<f64> {
        self.0.e_bf
    }

    #[getter]
    fn relative_error(&self) -> Option<f64> {
        self.0.relative_error
    }

    #[getter]
    fn p(&self) -> Option<PyPermutation> {
        self.0.p.clone().map(PyPermutation)
    }

    #[getter]
    fn q(&self) -> Option<PyPermutation> {
        self.0.q.clone().map(PyPermutation)
    }

    /// Best objective per level, finest split first.
    fn level_objectives(&self) -> Vec<f64> {
        self.0.levels.iter().map(|l| l.objective).collect()
    }

    fn factors(&self) -> Option<PyFactors> {
        self.0.factors.clone().map(PyFactors)
    }

    /// The report as JSON (one-based indices).
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0.to_json()).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

#[pyfunction]
fn random_orthogonal_butterfly(levels: usize, seed: u64) -> PyResult<PyFactors> {
    orthogonal_butterfly(levels, seed).map(PyFactors).map_err(py_err)
}

#[pyfunction]
fn dft_matrix(n: usize) -> PyResult<PyMatrix> {
    dft(n).map(PyMatrix).map_err(py_err)
}

/// `Qᵀ·base·P` plus Gaussian noise of relative norm `eps`.
#[pyfunction]
#[pyo3(signature = (base, p, q, eps=0.0, seed=0))]
fn make_target(base: &PyMatrix, p: &PyPermutation, q: &PyPermutation, eps: f64, seed: u64) -> PyResult<PyMatrix> {
    target(&base.0, &p.0, &q.0, eps, seed).map(PyMatrix).map_err(py_err)
}

/// Returns `(target, p_true, q_true)` for one seeded experiment instance.
#[pyfunction]
#[pyo3(signature = (family, n, eps=0.0, seed=0, index=0))]
fn generate_instance(
    family: &str,
    n: usize,
    eps: f64,
    seed: u64,
    index: usize,
) -> PyResult<(PyMatrix, PyPermutation, PyPermutation)> {
    let family: Family = family.parse().map_err(py_err)?;
    let inst = gen_instance(family, n, eps, seed, index).map_err(py_err)?;
    Ok((PyMatrix(inst.target), PyPermutation(inst.p_true), PyPermutation(inst.q_true)))
}

/// Butterfly factors of `Q A Pᵀ` and the error `E_bf`.
#[pyfunction]
fn hierarchical_factorize(a: &PyMatrix, p: &PyPermutation, q: &PyPermutation) -> PyResult<(PyFactors, f64)> {
    let h = factorize(&a.0, &p.0, &q.0).map_err(py_err)?;
    Ok((PyFactors(h.factors), h.e_bf))
}

#[pyfunction]
#[pyo3(signature = (a, alphas=None, seeds=None, iterations=None))]
fn identify(
    py: Python<'_>,
    a: &PyMatrix,
    alphas: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    iterations: Option<usize>,
) -> PyResult<PyReport> {
    let mut cfg = IdentifyConfig::default();
    if let Some(v) = alphas {
        cfg.alphas = v;
    }
    if let Some(v) = seeds {
        cfg.seeds = v;
    }
    if let Some(v) = iterations {
        cfg.iterations = v;
    }
    butterfly_ident::experiments::validate_identify(&cfg).map_err(py_err)?;
    let a = a.0.clone();
    py.detach(move || run_identify(&a, &cfg)).map(PyReport).map_err(py_err)
}

/// Number of cluster trees on `n` leaves.
#[pyfunction]
fn count_trees(n: usize) -> PyResult<String> {
    count(n).map(|c| c.to_string()).map_err(py_err)
}

#[pymodule]
fn pybfid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyPermutation>()?;
    m.add_class::<PyFactors>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(random_orthogonal_butterfly, m)?)?;
    m.add_function(wrap_pyfunction!(dft_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(make_target, m)?)?;
    m.add_function(wrap_pyfunction!(generate_instance, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchical_factorize, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(count_trees, m)?)?;
    Ok(())
}

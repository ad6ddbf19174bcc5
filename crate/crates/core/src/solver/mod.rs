//! Static and time-dependent solution of the assembled system, condition
//! estimates and DEM-style post-processing.

mod dynamics;
mod krylov;
mod post;

pub use dynamics::{CrankNicolson, DampingScheme, State};
pub use krylov::{Ilu0, bicgstab};
pub use post::{FacetLoadSet, balance_residuals, dem_post};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;

use crate::error::{Error, Result};
use crate::sparse::{SparseMatrix, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Sparse LU factorization.
    #[default]
    Direct,
    /// ILU(0)-preconditioned BiCGSTAB.
    Iterative,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "iterative" | "krylov" => Ok(SolverKind::Iterative),
            _ => Err(Error::Config(format!("unknown solver '{s}' (direct|krylov)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Relative residual tolerance.
    pub tolerance: f64,
    /// Krylov iteration cap; defaults to 10·n.
    pub max_iterations: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { kind: SolverKind::Direct, tolerance: 1e-10, max_iterations: None }
    }
}

enum Backend {
    Direct(Lu<usize, f64>),
    Iterative(Ilu0),
}

/// A factorized (or preconditioned) square matrix ready for repeated solves.
pub struct LinearSolver {
    matrix: SparseMatrix,
    backend: Backend,
    config: SolverConfig,
}

impl LinearSolver {
    pub fn new(a: SparseMatrix, config: SolverConfig) -> Result<LinearSolver> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!("{}×{} system", a.nrows(), a.ncols())));
        }
        let backend = match config.kind {
            SolverKind::Direct => {
                let lu = a
                    .to_faer()?
                    .sp_lu()
                    .map_err(|e| Error::Solve(format!("LU factorization failed: {e:?}")))?;
                Backend::Direct(lu)
            }
            SolverKind::Iterative => Backend::Iterative(Ilu0::new(&a)?),
        };
        Ok(LinearSolver { matrix: a, backend, config })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn lu_solve(lu: &Lu<usize, f64>, b: &[f64], transpose: bool) -> Vec<f64> {
        let mut x = b.to_vec();
        let n = x.len();
        let rhs = faer::MatMut::from_column_major_slice_mut(&mut x, n, 1);
        if transpose {
            lu.solve_transpose_in_place(rhs);
        } else {
            lu.solve_in_place(rhs);
        }
        x
    }

    /// Solve `A x = b`, verifying the residual.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = match &self.backend {
            Backend::Direct(lu) => Self::lu_solve(lu, b, false),
            Backend::Iterative(ilu) => {
                let max = self.config.max_iterations.unwrap_or(10 * b.len().max(1));
                bicgstab(&self.matrix, b, ilu, self.config.tolerance, max)?
            }
        };
        self.check(&self.matrix.matvec(&x), b, &x)?;
        Ok(x)
    }

    /// Solve without the residual check.
    pub fn solve_unchecked(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Direct(lu) => Ok(Self::lu_solve(lu, b, false)),
            Backend::Iterative(_) => self.solve(b),
        }
    }

    /// Solve `Aᵀ x = b` (direct backend only).
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Direct(lu) => Ok(Self::lu_solve(lu, b, true)),
            Backend::Iterative(_) => Err(Error::Solve("transpose solves need the direct backend".into())),
        }
    }

    fn check(&self, ax: &[f64], b: &[f64], x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solve("singular matrix: non-finite solution".into()));
        }
        let bnorm = norm(b);
        let res: f64 = norm(&ax.iter().zip(b).map(|(a, b)| a - b).collect::<Vec<_>>());
        // Direct solves are held to a looser bound scaled by the matrix size
        // to absorb round-off on badly scaled systems.
        let allowed = match self.backend {
            Backend::Direct(_) => 1e-6_f64.max(self.config.tolerance),
            Backend::Iterative(_) => self.config.tolerance * 1.01,
        };
        if res > allowed * bnorm.max(f64::MIN_POSITIVE) && res > 0.0 {
            if bnorm == 0.0 {
                return Err(Error::Solve("singular matrix: nonzero solution for zero rhs".into()));
            }
            return Err(Error::Solve(format!("residual {:.3e} exceeds tolerance; matrix singular?", res / bnorm)));
        }
        Ok(())
    }
}

/// Limit the worker threads used by sweeps and by the sparse factorizations.
/// `0` keeps the default (all cores). Only the first call takes effect for
/// the sweep pool.
pub fn set_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    faer::set_global_parallelism(if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) });
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Relative residual ‖Ax − b‖ / ‖b‖.
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
    norm(&r) / norm(b).max(f64::MIN_POSITIVE)
}

pub fn solve_static(a: &SparseMatrix, b: &[f64], config: SolverConfig) -> Result<Vec<f64>> {
    LinearSolver::new(a.clone(), config)?.solve(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub value: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub iterations: usize,
    /// Relative change of the two singular value estimates at the last iteration.
    pub stagnation: (f64, f64),
    pub converged: bool,
}

/// 2-norm condition number estimate: power iteration on AᵀA for σ_max and
/// inverse iteration through the LU factors for σ_min.
pub fn condition_estimate(a: &SparseMatrix) -> Result<ConditionEstimate> {
    const MAX_ITER: usize = 200;
    const STAGNATION: f64 = 1e-4;
    let n = a.nrows();
    let solver = LinearSolver::new(a.clone(), SolverConfig::default())?;
    let start: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 97) as f64 / 97.0).collect();
    let normalize = |v: &mut Vec<f64>| {
        let s = norm(v);
        v.iter_mut().for_each(|x| *x /= s);
        s
    };
    let mut x = start.clone();
    normalize(&mut x);
    let mut y = start;
    normalize(&mut y);
    let (mut smax, mut sinv) = (0.0_f64, 0.0_f64);
    let (mut dmax, mut dmin) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=MAX_ITER {
        iterations = it;
        let mut ax = a.matvec_transpose(&a.matvec(&x));
        let lam = normalize(&mut ax).sqrt();
        x = ax;
        let mut z = solver.solve_transpose(&solver.solve_unchecked(&y)?)?;
        let mu = normalize(&mut z).sqrt();
        y = z;
        dmax = (lam - smax).abs() / lam.max(f64::MIN_POSITIVE);
        dmin = (mu - sinv).abs() / mu.max(f64::MIN_POSITIVE);
        smax = lam;
        sinv = mu;
        if it > 1 && dmax < STAGNATION && dmin < STAGNATION {
            converged = true;
            break;
        }
    }
    let sigma_min = 1.0 / sinv;
    Ok(ConditionEstimate {
        value: smax / sigma_min,
        sigma_max: smax,
        sigma_min,
        iterations,
        stagnation: (dmax, dmin),
        converged,
    })
}

//! Classical finite-difference solver for the discrete subdiffusion problem:
//! L1 in time, second-order central differences in space, one tridiagonal
//! (Thomas) solve per time level. Serves as the independent reference the
//! neural solver is judged against.

use crate::l1::L1Table;
use crate::mesh::{SpatialGrid, TemporalMesh};
use crate::problems::SubdiffusionProblem;
use crate::{Error, Result};

/// Nodal solution on the full space-time lattice, `values[n][m]`.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: SpatialGrid,
    pub mesh: TemporalMesh,
    pub values: Vec<Vec<f64>>,
}

impl GridSolution {
    pub fn value(&self, n: usize, m: usize) -> f64 {
        self.values[n][m]
    }
}

/// Solve the tridiagonal system (diag, off-diagonals `lower`/`upper`) in place.
/// Returns the solution; errs on a vanishing pivot.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], level: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv.abs() < f64::MIN_POSITIVE {
        return Err(Error::SingularSystem { level, pivot: piv });
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i - 1] * c[i - 1];
        if piv.abs() < f64::MIN_POSITIVE {
            return Err(Error::SingularSystem { level, pivot: piv });
        }
        if i < n - 1 {
            c[i] = upper[i] / piv;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// March the discrete problem through all time levels. The L1 history terms
/// are folded into the right-hand side using the precomputed weight table.
pub fn fdm_solve(
    problem: &SubdiffusionProblem,
    grid: &SpatialGrid,
    mesh: &TemporalMesh,
    table: &L1Table,
) -> Result<GridSolution> {
    let m_count = grid.count;
    let n_count = mesh.count;
    let h2 = grid.h * grid.h;
    let inner = m_count - 1;

    let mut values = vec![vec![0.0; m_count + 1]; n_count + 1];
    for m in 0..=m_count {
        values[0][m] = (problem.initial)(grid.nodes[m]);
    }

    let mut rhs = vec![0.0; inner];
    for n in 1..=n_count {
        let row = table.row(n);
        let w_diag = row[n - 1];
        for m in 1..m_count {
            // D^a_N u^n = w_{n-1} u^n + sum_{j=1}^{n-1} (w_{j-1} - w_j) u^j - w_0 u^0
            let mut hist = -row[0] * values[0][m];
            for j in 1..n {
                hist += (row[j - 1] - row[j]) * values[j][m];
            }
            rhs[m - 1] = (problem.source)(grid.nodes[m], mesh.nodes[n]) - hist;
        }
        let diag = vec![w_diag + 2.0 / h2; inner];
        let off = vec![-1.0 / h2; inner - 1];
        let level = thomas(&off, &diag, &off, &rhs, n)?;
        values[n][1..m_count].copy_from_slice(&level);
        // Dirichlet-zero boundary rows already hold 0.
    }
    Ok(GridSolution { grid: grid.clone(), mesh: mesh.clone(), values })
}

/// Max-norm residual of the tridiagonal solves, recomputed from the solution.
/// Used by tests to confirm the direct solver's exactness.
pub fn solve_residual_inf(sol: &GridSolution, problem: &SubdiffusionProblem, table: &L1Table) -> f64 {
    let grid = &sol.grid;
    let mesh = &sol.mesh;
    let h2 = grid.h * grid.h;
    let mut worst = 0.0_f64;
    for n in 1..=mesh.count {
        let row = table.row(n);
        for m in 1..grid.count {
            let mut dalpha = 0.0;
            for k in 0..n {
                dalpha += row[k] * (sol.values[k + 1][m] - sol.values[k][m]);
            }
            let lap = (sol.values[n][m + 1] - 2.0 * sol.values[n][m] + sol.values[n][m - 1]) / h2;
            let r = dalpha - lap - (problem.source)(grid.nodes[m], mesh.nodes[n]);
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// `(max_abs, l2_rel)` error of a grid solution against an exact solution;
/// the max norm runs over all nodes, the relative L2 norm over `n >= 1`.
pub fn grid_error_norms(
    sol: &GridSolution,
    exact: &dyn Fn(f64, f64) -> f64,
) -> Result<(f64, f64)> {
    let mut max_abs = 0.0_f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..=sol.mesh.count {
        for m in 0..=sol.grid.count {
            let e = exact(sol.grid.nodes[m], sol.mesh.nodes[n]);
            let d = sol.values[n][m] - e;
            max_abs = max_abs.max(d.abs());
            if n >= 1 {
                num += d * d;
                den += e * e;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((max_abs, (num / den).sqrt()))
}

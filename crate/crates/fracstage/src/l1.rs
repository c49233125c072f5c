//! L1 discretization of the Caputo derivative on arbitrary graded meshes.
//!
//! Row `n` of the table stores `w[n][k]` for `k = 0..n-1` such that
//! `D^a u(t_n) ~ sum_k w[n][k] (u^{k+1} - u^k)` with
//! `w[n][k] = [(t_n - t_k)^{1-a} - (t_n - t_{k+1})^{1-a}] / (Gamma(2-a) tau_{k+1})`.

use crate::mesh::TemporalMesh;
use crate::special::gamma;
use crate::{Error, Result};

/// Lower-triangular Caputo L1 weight table for one `(mesh, alpha)` pair.
#[derive(Debug, Clone)]
pub struct L1Table {
    pub alpha: f64,
    pub mesh: TemporalMesh,
    rows: Vec<Vec<f64>>,
}

impl L1Table {
    /// Weights of row `n` (length `n`), `1 <= n <= N`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n - 1]
    }

    pub fn time_levels(&self) -> usize {
        self.rows.len()
    }
}

fn pow1ma(base: f64, one_minus_alpha: f64) -> f64 {
    // exp((1-a) ln base); base > 0 on strictly increasing meshes.
    (one_minus_alpha * base.ln()).exp()
}

/// Precompute the full weight table; O(N^2) memory, built once per
/// `(mesh, alpha)` and reused across all spatial columns.
pub fn build_l1_table(mesh: &TemporalMesh, alpha: f64) -> Result<L1Table> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            msg: format!("must lie in (0,1), got {alpha}"),
        });
    }
    let one_minus = 1.0 - alpha;
    let gamma2ma = gamma(2.0 - alpha)?;
    let t = &mesh.nodes;
    let n_levels = mesh.count;
    let mut rows = Vec::with_capacity(n_levels);
    for n in 1..=n_levels {
        let mut row = Vec::with_capacity(n);
        for k in 0..n - 1 {
            let bracket = pow1ma(t[n] - t[k], one_minus) - pow1ma(t[n] - t[k + 1], one_minus);
            row.push(bracket / (gamma2ma * mesh.steps[k]));
        }
        // k = n-1 simplifies to tau_n^(1-a)/(Gamma(2-a) tau_n) = tau_n^-a / Gamma(2-a),
        // avoiding log(0) in the bracket.
        row.push((-alpha * mesh.steps[n - 1].ln()).exp() / gamma2ma);
        rows.push(row);
    }
    Ok(L1Table { alpha, mesh: mesh.clone(), rows })
}

/// Apply the discrete operator at level `n` to a history `u^0 .. u^n`.
pub fn apply_l1(table: &L1Table, history: &[f64], n: usize) -> Result<f64> {
    if n < 1 || n > table.time_levels() {
        return Err(Error::InvalidParameter {
            name: "n",
            msg: format!("must lie in 1..={}, got {n}", table.time_levels()),
        });
    }
    if history.len() != n + 1 {
        return Err(Error::LengthMismatch { got: history.len(), expected: n + 1 });
    }
    let row = table.row(n);
    let mut acc = 0.0;
    for k in 0..n {
        acc += row[k] * (history[k + 1] - history[k]);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_temporal;

    #[test]
    fn first_weight_on_uniform_mesh() {
        // tau = 0.1, alpha = 0.5: w[1][0] = tau^-0.5 / Gamma(1.5).
        let mesh = build_temporal(1.0, 10, 1.0).unwrap();
        let table = build_l1_table(&mesh, 0.5).unwrap();
        let want = 0.1_f64.powf(-0.5) / 0.886_226_925_452_758_013_7;
        assert!((table.row(1)[0] - want).abs() < 1e-12 * want);
        assert!((want - 3.568_248_232_3).abs() < 1e-9);
    }

    #[test]
    fn uniform_row_ratio() {
        // w[2][1]/w[2][0] = 1/(2^(1-a) - 1) on uniform meshes.
        for alpha in [0.2, 0.5, 0.8] {
            let mesh = build_temporal(1.0, 8, 1.0).unwrap();
            let table = build_l1_table(&mesh, alpha).unwrap();
            let row = table.row(2);
            let want = 1.0 / (2.0_f64.powf(1.0 - alpha) - 1.0);
            assert!((row[1] / row[0] - want).abs() < 1e-12, "alpha = {alpha}");
        }
        let mesh = build_temporal(1.0, 8, 1.0).unwrap();
        let row_ratio = {
            let table = build_l1_table(&mesh, 0.5).unwrap();
            table.row(2)[1] / table.row(2)[0]
        };
        assert!((row_ratio - 2.414_213_562_4).abs() < 1e-9);
    }

    #[test]
    fn weights_positive_with_row_lengths() {
        let mesh = build_temporal(1.0, 32, 3.0).unwrap();
        let table = build_l1_table(&mesh, 0.7).unwrap();
        for n in 1..=32 {
            assert_eq!(table.row(n).len(), n);
            assert!(table.row(n).iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn constant_history_maps_to_zero() {
        let mesh = build_temporal(1.0, 16, 2.0).unwrap();
        let table = build_l1_table(&mesh, 0.4).unwrap();
        let history = vec![3.25; 17];
        for n in 1..=16 {
            assert_eq!(apply_l1(&table, &history[..=n], n).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mesh = build_temporal(1.0, 4, 1.0).unwrap();
        assert!(build_l1_table(&mesh, 0.0).is_err());
        assert!(build_l1_table(&mesh, 1.0).is_err());
        let table = build_l1_table(&mesh, 0.5).unwrap();
        assert!(matches!(
            apply_l1(&table, &[0.0, 1.0], 2),
            Err(Error::LengthMismatch { got: 2, expected: 3 })
        ));
        assert!(apply_l1(&table, &[0.0; 6], 5).is_err());
    }
}

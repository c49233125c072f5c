//! Graded temporal meshes, uniform spatial grids, and the space-time
//! collocation lattice shared by the L1 operator and the physics loss.

use crate::{Error, Result};

/// Largest admissible grading exponent. The optimal grading `(2-a)/a`
/// reaches 19 at `a = 0.1`; beyond that first steps are unrepresentable.
pub const MAX_GRADING: f64 = 19.0;

/// First steps below this fraction of the horizon are dominated by round-off
/// in the L1 bracket differences.
pub const FIRST_STEP_ROUNDOFF: f64 = 1e-14;

/// Temporal mesh `t_n = T (n/N)^r` with per-interval steps `tau_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMesh {
    pub horizon: f64,
    pub count: usize,
    pub grading: f64,
    /// Nodes `t_0 .. t_N`.
    pub nodes: Vec<f64>,
    /// Steps `tau_1 .. tau_N`, `steps[n-1] = t_n - t_{n-1}`.
    pub steps: Vec<f64>,
}

impl TemporalMesh {
    /// `true` when the first step is small enough that L1 weights built on
    /// this mesh lose accuracy to cancellation.
    pub fn roundoff_dominated(&self) -> bool {
        self.steps[0] < FIRST_STEP_ROUNDOFF * self.horizon
    }
}

/// Optimal grading exponent `(2 - alpha)/alpha`, capped at [`MAX_GRADING`].
pub fn optimal_grading(alpha: f64) -> f64 {
    ((2.0 - alpha) / alpha).min(MAX_GRADING)
}

/// Build the graded mesh `t_n = T (n/N)^r`. Uniform for `r = 1`.
pub fn build_temporal(horizon: f64, count: usize, grading: f64) -> Result<TemporalMesh> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter { name: "T", msg: format!("must be > 0, got {horizon}") });
    }
    if count < 1 {
        return Err(Error::InvalidParameter { name: "N", msg: "must be >= 1".into() });
    }
    if !(grading >= 1.0) {
        return Err(Error::InvalidParameter { name: "r", msg: format!("must be >= 1, got {grading}") });
    }
    if grading > MAX_GRADING {
        return Err(Error::InvalidParameter {
            name: "r",
            msg: format!("must be <= {MAX_GRADING}, got {grading}"),
        });
    }
    let n = count;
    let mut nodes = Vec::with_capacity(n + 1);
    for k in 0..=n {
        nodes.push(horizon * (k as f64 / n as f64).powf(grading));
    }
    nodes[n] = horizon; // (n/n)^r may round
    let steps: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    if steps.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "r",
            msg: format!("grading {grading} with N = {n} collapses mesh steps"),
        });
    }
    let mesh = TemporalMesh { horizon, count: n, grading, nodes, steps };
    if mesh.roundoff_dominated() {
        log::warn!(
            "graded mesh r = {grading}, N = {n}: first step {:.3e} is below {FIRST_STEP_ROUNDOFF:.0e} T; \
             L1 weights on this mesh are round-off dominated",
            mesh.steps[0]
        );
    }
    Ok(mesh)
}

/// Uniform spatial grid on `[0, l]` with `M` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    pub length: f64,
    pub count: usize,
    pub h: f64,
    /// Nodes `x_0 .. x_M`.
    pub nodes: Vec<f64>,
}

pub fn build_spatial(length: f64, count: usize) -> Result<SpatialGrid> {
    if !(length > 0.0) {
        return Err(Error::InvalidParameter { name: "l", msg: format!("must be > 0, got {length}") });
    }
    if count < 2 {
        return Err(Error::InvalidParameter { name: "M", msg: "must be >= 2".into() });
    }
    let h = length / count as f64;
    let mut nodes: Vec<f64> = (0..=count).map(|m| m as f64 * h).collect();
    nodes[count] = length;
    Ok(SpatialGrid { length, count, h, nodes })
}

/// Partitioned collocation lattice: interior residual points, boundary
/// points, and initial points. The partitions are disjoint by construction;
/// `n = 0` carries no residual because the L1 operator starts at `n = 1`.
#[derive(Debug, Clone)]
pub struct CollocationSet {
    /// `(m, n)` with `1 <= m <= M-1`, `1 <= n <= N`.
    pub interior: Vec<(usize, usize)>,
    /// `(x, t)` over `x in {0, l}`, all mesh nodes including `t = 0`.
    pub boundary: Vec<(f64, f64)>,
    /// `x_m` for all `0 <= m <= M` at `t = 0`.
    pub initial: Vec<f64>,
}

pub fn build_collocation(grid: &SpatialGrid, mesh: &TemporalMesh) -> CollocationSet {
    let (m_count, n_count) = (grid.count, mesh.count);
    let mut interior = Vec::with_capacity((m_count - 1) * n_count);
    for m in 1..m_count {
        for n in 1..=n_count {
            interior.push((m, n));
        }
    }
    let mut boundary = Vec::with_capacity(2 * (n_count + 1));
    for &x in &[0.0, grid.length] {
        for &t in &mesh.nodes {
            boundary.push((x, t));
        }
    }
    CollocationSet { interior, boundary, initial: grid.nodes.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mesh_nodes() {
        let m = build_temporal(1.0, 4, 1.0).unwrap();
        assert_eq!(m.nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        for s in &m.steps {
            assert!((s - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn cubic_graded_nodes() {
        let m = build_temporal(1.0, 4, 3.0).unwrap();
        let want = [0.0, 1.0 / 64.0, 8.0 / 64.0, 27.0 / 64.0, 1.0];
        for (a, b) in m.nodes.iter().zip(want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn optimal_grading_first_node() {
        // alpha = 0.5 -> r = 3, and t_1 = 10^-3 for N = 10.
        let r = optimal_grading(0.5);
        assert_eq!(r, 3.0);
        let m = build_temporal(1.0, 10, r).unwrap();
        assert!((m.nodes[1] - 1e-3).abs() < 1e-18);
        assert!((m.steps[0] - m.horizon * (m.count as f64).powf(-r)).abs() < 1e-18);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_temporal(1.0, 0, 1.0).is_err());
        assert!(build_temporal(1.0, 4, 0.5).is_err());
        assert!(build_temporal(-1.0, 4, 1.0).is_err());
        assert!(build_temporal(1.0, 4, 19.5).is_err());
        assert!(build_spatial(1.0, 1).is_err());
        assert!(build_spatial(0.0, 4).is_err());
    }

    #[test]
    fn monotone_even_at_extreme_grading() {
        for &(n, r) in &[(100_000usize, 1.0), (10_000, 19.0), (1024, 7.0)] {
            let m = build_temporal(1.0, n, r).unwrap();
            assert!(m.nodes.windows(2).all(|w| w[1] > w[0]), "N = {n}, r = {r}");
        }
    }

    #[test]
    fn roundoff_flag_on_extreme_first_step() {
        // r = 19, N = 64: tau_1 = 64^-19 ~ 5e-35.
        let m = build_temporal(1.0, 64, 19.0).unwrap();
        assert!(m.roundoff_dominated());
        let m = build_temporal(1.0, 10, 3.0).unwrap();
        assert!(!m.roundoff_dominated());
    }

    #[test]
    fn spatial_grid_examples() {
        let g = build_spatial(1.0, 2).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.5, 1.0]);
        let g = build_spatial(1.0, 10).unwrap();
        assert_eq!(g.nodes.len(), 11);
        assert!((g.h - 0.1).abs() < 1e-16);
        let g = build_spatial(2.0, 4).unwrap();
        assert_eq!(g.nodes, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn collocation_cardinalities() {
        for &(mm, nn) in &[(2usize, 2usize), (10, 10), (40, 40), (3, 7)] {
            let g = build_spatial(1.0, mm).unwrap();
            let m = build_temporal(1.0, nn, 1.0).unwrap();
            let c = build_collocation(&g, &m);
            assert_eq!(c.interior.len(), (mm - 1) * nn);
            assert_eq!(c.boundary.len(), 2 * (nn + 1));
            assert_eq!(c.initial.len(), mm + 1);
        }
    }
}

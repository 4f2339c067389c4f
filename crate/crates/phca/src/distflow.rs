//! Branch-flow power flow for radial feeders.
//!
//! The solver works on the DistFlow equations over the tree rooted at the
//! substation. With `P`, `Q` the real and reactive flow at the sending end
//! of each line, `l` the squared current magnitude and `v` the squared
//! voltage magnitude, a solution satisfies, for every line (i, j) with i
//! the node nearer the root:
//!
//! ```text
//! p_j + P_ij = r_ij l_ij + sum_k P_jk          (real balance at j)
//! q_j + Q_ij = x_ij l_ij + sum_k Q_jk          (reactive balance at j)
//! v_j = v_i - 2 (r_ij P_ij + x_ij Q_ij) + (r_ij^2 + x_ij^2) l_ij
//! l_ij = (P_ij^2 + Q_ij^2) / v_i
//! ```
//!
//! The fixed point is found by backward/forward sweeps: flows are
//! accumulated from the leaves toward the root with the current loss
//! estimates, then voltages are pushed from the root outward and the
//! squared currents refreshed. Iteration stops once the largest equation
//! residual drops below [`TOLERANCE`] or after [`MAX_ITERATIONS`] sweeps.
//! Failure to converge, including voltage collapse under absurd loading,
//! is reported through [`FlowSolution::converged`] rather than an error:
//! downstream risk evaluation counts such snapshots as violations.

use crate::network::Network;
use serde::Serialize;

/// Largest acceptable equation residual at the returned iterate.
pub const TOLERANCE: f64 = 1e-10;

/// Sweep limit; moderate loadings converge in well under ten sweeps, so
/// hitting this bound is itself a sign there is no usable solution.
pub const MAX_ITERATIONS: usize = 100;

/// Squared voltages at or below this are treated as collapse.
const V_COLLAPSE: f64 = 1e-12;

/// A power-flow iterate. `p` and `q` are sending-end line flows and `l`
/// squared current magnitudes, all indexed like `network.lines` (flow
/// measured from the substation side regardless of the file's from/to
/// order). `v` holds squared voltage magnitudes per node id, with `v[0]`
/// pinned to the substation setpoint.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSolution {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// One squared-voltage bound violation.
#[derive(Debug, Clone, Serialize)]
pub struct VoltageViolation {
    pub node: usize,
    pub v: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// One line loaded past its apparent-power rating.
#[derive(Debug, Clone, Serialize)]
pub struct LineViolation {
    pub line: usize,
    pub from: usize,
    pub to: usize,
    /// Apparent power at the sending end.
    pub s: f64,
    pub s_max: f64,
}

/// Outcome of checking a solution against the operating limits.
/// `feasible` holds exactly when the solve converged and both violation
/// lists are empty.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub voltage_violations: Vec<VoltageViolation>,
    pub line_violations: Vec<LineViolation>,
    pub feasible: bool,
}

/// The feeder as a rooted tree: line orientations and a root-first node
/// order, precomputed once and shared across the many solves of a risk
/// evaluation.
pub(crate) struct FeederTree {
    /// For each node id: (parent node, line index), None for the root.
    up: Vec<Option<(usize, usize)>>,
    /// Node ids in breadth-first order from the root.
    order: Vec<usize>,
    /// Line index -> node id at the substation side.
    send_node: Vec<usize>,
    /// Line index -> node id at the far side.
    recv_node: Vec<usize>,
    r: Vec<f64>,
    x: Vec<f64>,
}

impl FeederTree {
    /// Orients the feeder away from node 0. The network must be a valid
    /// tree (`network.validate()` empty); panics otherwise.
    pub(crate) fn new(network: &Network) -> Self {
        let n = network.n_nodes();
        let mut adjacent: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, line) in network.lines.iter().enumerate() {
            adjacent[line.from].push((line.to, k));
            adjacent[line.to].push((line.from, k));
        }

        let mut up = vec![None; n];
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        visited[0] = true;
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let i = order[head];
            head += 1;
            for &(j, k) in &adjacent[i] {
                if !visited[j] {
                    visited[j] = true;
                    up[j] = Some((i, k));
                    order.push(j);
                }
            }
        }
        assert!(
            order.len() == n && network.lines.len() == n - 1,
            "feeder must be a connected tree; run Network::validate first"
        );

        let mut send_node = vec![0; network.lines.len()];
        let mut recv_node = vec![0; network.lines.len()];
        for &j in &order[1..] {
            let (i, k) = up[j].unwrap();
            send_node[k] = i;
            recv_node[k] = j;
        }

        Self {
            up,
            order,
            send_node,
            recv_node,
            r: network.lines.iter().map(|line| line.r).collect(),
            x: network.lines.iter().map(|line| line.x).collect(),
        }
    }

    /// Backward/forward sweep iteration from a flat-voltage start.
    pub(crate) fn solve(&self, v0: f64, p_inj: &[f64], q_inj: &[f64]) -> FlowSolution {
        let n = self.up.len();
        let m = n - 1;
        assert!(
            p_inj.len() == m && q_inj.len() == m,
            "injection vectors must have one entry per load node ({m}), got {} and {}",
            p_inj.len(),
            q_inj.len()
        );

        let mut p = vec![0.0; m];
        let mut q = vec![0.0; m];
        let mut l = vec![0.0; m];
        let mut v = vec![v0; n];
        let mut downstream_p = vec![0.0; n];
        let mut downstream_q = vec![0.0; n];

        for sweep in 1..=MAX_ITERATIONS {
            // Backward: accumulate flows toward the root using the current
            // squared-current estimates for the series losses. Reverse
            // breadth-first order reaches every child before its parent, so
            // the downstream sums are complete when a node is read.
            downstream_p.fill(0.0);
            downstream_q.fill(0.0);
            for &j in self.order.iter().rev() {
                let Some((i, k)) = self.up[j] else { continue };
                let flow_p = self.r[k] * l[k] - p_inj[j - 1] + downstream_p[j];
                let flow_q = self.x[k] * l[k] - q_inj[j - 1] + downstream_q[j];
                p[k] = flow_p;
                q[k] = flow_q;
                downstream_p[i] += flow_p;
                downstream_q[i] += flow_q;
            }

            // Forward: push voltages outward, then refresh squared currents
            // from the sending-end voltage.
            let mut collapsed = false;
            for &j in &self.order[1..] {
                let (i, k) = self.up[j].unwrap();
                let vi = v[i];
                if !(vi > V_COLLAPSE) || !vi.is_finite() {
                    collapsed = true;
                    break;
                }
                let z2 = self.r[k] * self.r[k] + self.x[k] * self.x[k];
                v[j] = vi - 2.0 * (self.r[k] * p[k] + self.x[k] * q[k]) + z2 * l[k];
                l[k] = (p[k] * p[k] + q[k] * q[k]) / vi;
            }

            if collapsed {
                return FlowSolution {
                    p,
                    q,
                    v,
                    l,
                    converged: false,
                    iterations: sweep,
                    residual: f64::INFINITY,
                };
            }

            let residual = self.residual(p_inj, q_inj, &p, &q, &v, &l);
            if !residual.is_finite() {
                return FlowSolution {
                    p,
                    q,
                    v,
                    l,
                    converged: false,
                    iterations: sweep,
                    residual: f64::INFINITY,
                };
            }
            if residual <= TOLERANCE {
                return FlowSolution {
                    p,
                    q,
                    v,
                    l,
                    converged: true,
                    iterations: sweep,
                    residual,
                };
            }
        }

        let residual = self.residual(p_inj, q_inj, &p, &q, &v, &l);
        FlowSolution {
            p,
            q,
            v,
            l,
            converged: false,
            iterations: MAX_ITERATIONS,
            residual,
        }
    }

    /// Largest absolute residual of the four DistFlow equation families at
    /// the given iterate. `v[0]` must carry the substation setpoint.
    fn residual(
        &self,
        p_inj: &[f64],
        q_inj: &[f64],
        p: &[f64],
        q: &[f64],
        v: &[f64],
        l: &[f64],
    ) -> f64 {
        let n = self.up.len();
        let mut worst: f64 = 0.0;

        // Flow balance at every non-root node: the parent line delivers
        // what the node injects, the line loses, and the child lines carry.
        let mut child_p = vec![0.0; n];
        let mut child_q = vec![0.0; n];
        for (k, &i) in self.send_node.iter().enumerate() {
            child_p[i] += p[k];
            child_q[i] += q[k];
        }
        for &j in &self.order[1..] {
            let (_, k) = self.up[j].unwrap();
            let res_p = p_inj[j - 1] + p[k] - self.r[k] * l[k] - child_p[j];
            let res_q = q_inj[j - 1] + q[k] - self.x[k] * l[k] - child_q[j];
            worst = worst.max(res_p.abs()).max(res_q.abs());
        }

        for (k, (&i, &j)) in self.send_node.iter().zip(&self.recv_node).enumerate() {
            let vi = v[i];
            let z2 = self.r[k] * self.r[k] + self.x[k] * self.x[k];
            let res_v = vi - v[j] - 2.0 * (self.r[k] * p[k] + self.x[k] * q[k]) + z2 * l[k];
            let res_l = l[k] - (p[k] * p[k] + q[k] * q[k]) / vi;
            worst = worst.max(res_v.abs()).max(res_l.abs());
        }
        worst
    }
}

/// Solves the power flow for one snapshot of nodal injections (`p_inj`,
/// `q_inj`, one entry per load node; generation positive, load negative).
///
/// The network must be structurally valid; panics with a diagnostic if the
/// tree cannot be oriented or the injection lengths are wrong.
pub fn solve_distflow(network: &Network, p_inj: &[f64], q_inj: &[f64]) -> FlowSolution {
    FeederTree::new(network).solve(network.substation_v0, p_inj, q_inj)
}

/// Largest absolute residual of the DistFlow equations for `solution`
/// against the given injections; the value the solver itself drove below
/// [`TOLERANCE`] if it reported convergence.
pub fn max_residual(
    network: &Network,
    p_inj: &[f64],
    q_inj: &[f64],
    solution: &FlowSolution,
) -> f64 {
    let tree = FeederTree::new(network);
    tree.residual(
        p_inj,
        q_inj,
        &solution.p,
        &solution.q,
        &solution.v,
        &solution.l,
    )
}

/// Checks a solved snapshot against voltage bounds and line ratings.
/// Bounds are inclusive: a flow exactly at `s_max` or a voltage exactly at
/// a bound is not a violation. A non-converged solution is never feasible
/// and its (meaningless) iterate is not scanned for individual violations.
pub fn check_limits(network: &Network, solution: &FlowSolution) -> LimitReport {
    if !solution.converged {
        return LimitReport {
            voltage_violations: Vec::new(),
            line_violations: Vec::new(),
            feasible: false,
        };
    }

    let mut voltage_violations = Vec::new();
    for node in &network.nodes {
        if node.id == 0 {
            continue;
        }
        let v = solution.v[node.id];
        if v < node.v_min || v > node.v_max {
            voltage_violations.push(VoltageViolation {
                node: node.id,
                v,
                v_min: node.v_min,
                v_max: node.v_max,
            });
        }
    }

    let tree = FeederTree::new(network);
    let mut line_violations = Vec::new();
    for (k, line) in network.lines.iter().enumerate() {
        let s_sq = solution.p[k] * solution.p[k] + solution.q[k] * solution.q[k];
        if s_sq > line.s_max * line.s_max {
            line_violations.push(LineViolation {
                line: k,
                from: tree.send_node[k],
                to: tree.recv_node[k],
                s: s_sq.sqrt(),
                s_max: line.s_max,
            });
        }
    }

    let feasible = voltage_violations.is_empty() && line_violations.is_empty();
    LimitReport {
        voltage_violations,
        line_violations,
        feasible,
    }
}

//! Ready-made feeders and scenario recipes used by the test suite, the
//! bundled data files, and the documentation examples.

use crate::network::{Line, Network, Node};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Builds a random radial feeder of `n_nodes` buses (substation included).
/// Every non-root node attaches to a uniformly chosen earlier node, which
/// keeps random trees shallow enough for moderate loading. Impedances and
/// ratings are drawn in typical per-unit ranges; bounds are the usual
/// +-10 % band in squared per-unit.
pub fn random_radial_network(n_nodes: usize, seed: u64) -> Network {
    assert!(
        n_nodes >= 2,
        "a feeder needs the substation and one load node"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let nodes = (0..n_nodes)
        .map(|id| Node {
            id,
            v_min: 0.81,
            v_max: 1.21,
        })
        .collect();

    let lines = (1..n_nodes)
        .map(|j| Line {
            from: rng.gen_range(0..j),
            to: j,
            r: rng.gen_range(0.002..0.02),
            x: rng.gen_range(0.002..0.02),
            s_max: 10.0,
        })
        .collect();

    let candidate = rng.gen_range(1..n_nodes);
    Network {
        nodes,
        lines,
        substation_v0: 1.0,
        candidates: vec![candidate],
        psi_max: vec![1.0],
        eta: vec![0.0],
    }
}

/// Moderate random injections for a feeder of `n_loads` load nodes: small
/// loads everywhere, scaled by `level` (1.0 keeps voltage drops within a
/// few percent on feeders from [`random_radial_network`]).
pub fn random_injections(n_loads: usize, seed: u64, level: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (0..n_loads)
        .map(|_| -level * rng.gen_range(0.0..0.02))
        .collect();
    let q = (0..n_loads)
        .map(|_| -level * rng.gen_range(0.0..0.008))
        .collect();
    (p, q)
}

/// Six-bus benchmark feeder: a short trunk that forks at bus 1 into two
/// laterals (1-2-3 and 1-4-5), with PV candidates at both lateral ends.
/// Sized so that zero capacity is safe on every synthetic day from
/// [`six_node_scenarios`] while the full box violates on every day; the
/// interesting capacities sit well inside the box.
pub fn six_node_feeder() -> Network {
    let node = |id, v_min, v_max| Node { id, v_min, v_max };
    let line = |from, to, r, x| Line {
        from,
        to,
        r,
        x,
        s_max: 5.0,
    };
    Network {
        nodes: vec![
            node(0, 0.9025, 1.1025),
            node(1, 0.9025, 1.1025),
            node(2, 0.9025, 1.1025),
            node(3, 0.9025, 1.1025),
            node(4, 0.9025, 1.1025),
            node(5, 0.9025, 1.1025),
        ],
        lines: vec![
            line(0, 1, 0.010, 0.004),
            line(1, 2, 0.030, 0.012),
            line(2, 3, 0.030, 0.012),
            line(1, 4, 0.028, 0.011),
            line(4, 5, 0.032, 0.013),
        ],
        substation_v0: 1.0,
        candidates: vec![3, 5],
        psi_max: vec![1.2, 1.2],
        eta: vec![0.05, 0.05],
    }
}

/// The matching 30-day, 24-snapshot scenario set for [`six_node_feeder`].
pub fn six_node_scenarios() -> crate::scenario::ScenarioSet {
    crate::scenario::generate_synthetic(30, 24, 2, 5, 1, &crate::scenario::ProfileParams::default())
        .expect("bundled scenario recipe is valid")
}

/// Variant of the six-bus feeder with deliberately uneven laterals: the
/// lateral to bus 3 is stiff while the lateral to bus 5 is weak, and the
/// shared trunk couples the two candidates. The feasible set then has two
/// competitive corners whose total capacities differ by a wide margin,
/// which makes single-coordinate local search prone to stalling on the
/// poor corner.
pub fn uneven_fork_feeder() -> Network {
    let node = |id, v_min, v_max| Node { id, v_min, v_max };
    let line = |from, to, r, x| Line {
        from,
        to,
        r,
        x,
        s_max: 8.0,
    };
    Network {
        nodes: vec![
            node(0, 0.81, 1.21),
            node(1, 0.81, 1.21),
            node(2, 0.81, 1.21),
            node(3, 0.81, 1.21),
            node(4, 0.81, 1.21),
            node(5, 0.81, 1.21),
        ],
        lines: vec![
            line(0, 1, 0.050, 0.020),
            line(1, 2, 0.005, 0.002),
            line(2, 3, 0.005, 0.002),
            line(1, 4, 0.075, 0.030),
            line(4, 5, 0.075, 0.030),
        ],
        substation_v0: 1.0,
        candidates: vec![3, 5],
        psi_max: vec![2.0, 1.0],
        eta: vec![0.0, 0.0],
    }
}

/// The matching scenario set for [`uneven_fork_feeder`].
pub fn uneven_fork_scenarios() -> crate::scenario::ScenarioSet {
    crate::scenario::generate_synthetic(30, 24, 2, 5, 2, &crate::scenario::ProfileParams::default())
        .expect("bundled scenario recipe is valid")
}

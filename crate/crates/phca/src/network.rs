//! Feeder model: nodes, lines, candidate nodes, and nodal injections.
//!
//! A network is a radial (tree) feeder rooted at the substation, node 0.
//! Voltages are tracked as squared magnitudes in p.u.^2 throughout, so the
//! per-node bounds `v_min`/`v_max` are squared bounds too. The non-root
//! nodes `1..=n_loads` carry loads and may host generation; vectors indexed
//! over them (injections, load rows) store node `j` at position `j - 1`.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use thiserror::Error;

/// A bus of the feeder. `v_min`/`v_max` bound the squared voltage
/// magnitude in p.u.^2. The bounds of node 0 are carried along but never
/// checked: the substation voltage is pinned to [`Network::substation_v0`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub v_min: f64,
    pub v_max: f64,
}

/// A distribution line between two buses with series impedance `r + jx`
/// (p.u.) and an apparent-power rating `s_max` (p.u.). Orientation of
/// `from`/`to` in the file is free; the power-flow solver orients every
/// line away from the substation itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub s_max: f64,
}

fn default_v0() -> f64 {
    1.0
}

/// A radial feeder with a set of candidate nodes for new generation.
///
/// `candidates[k]` is the node id hosting capacity `psi[k]`; `psi_max[k]`
/// caps that capacity and `eta[k]` is the reactive-per-real power ratio of
/// the generator. The JSON form mirrors the struct field for field, and
/// `parse(serialize(n)) == n` holds bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub lines: Vec<Line>,
    #[serde(default = "default_v0")]
    pub substation_v0: f64,
    pub candidates: Vec<usize>,
    pub psi_max: Vec<f64>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Dimension(String),
}

impl Network {
    /// Total number of buses including the substation.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of load buses (everything except the substation).
    pub fn n_loads(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn from_json(json: &str) -> Result<Self, NetworkError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }

    pub fn from_path(path: &Path) -> Result<Self, NetworkError> {
        let text = fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Diagnoses every structural defect instead of stopping at the first.
    /// An empty return value means the network is valid; each entry is a
    /// human-readable description of one problem.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let n = self.nodes.len();

        if n == 0 {
            problems.push("network has no nodes".to_string());
            return problems;
        }

        let mut seen = vec![0usize; n];
        for node in &self.nodes {
            if node.id >= n {
                problems.push(format!(
                    "node id {} out of range: ids must cover 0..{} exactly",
                    node.id,
                    n - 1
                ));
            } else {
                seen[node.id] += 1;
            }
            if !(node.v_min > 0.0 && node.v_min < node.v_max) {
                problems.push(format!(
                    "node {}: voltage bounds must satisfy 0 < v_min < v_max, got [{}, {}]",
                    node.id, node.v_min, node.v_max
                ));
            }
        }
        for (id, count) in seen.iter().enumerate() {
            match count {
                0 => problems.push(format!(
                    "node id {id} missing: ids must cover 0..{} exactly",
                    n - 1
                )),
                1 => {}
                c => problems.push(format!("node id {id} appears {c} times")),
            }
        }

        if !(self.substation_v0.is_finite() && self.substation_v0 > 0.0) {
            problems.push(format!(
                "substation_v0 must be a positive squared voltage, got {}",
                self.substation_v0
            ));
        }

        let mut endpoints_ok = true;
        for (k, line) in self.lines.iter().enumerate() {
            if line.from >= n || line.to >= n || line.from == line.to {
                problems.push(format!(
                    "line {k}: endpoints ({}, {}) must be two distinct node ids below {n}",
                    line.from, line.to
                ));
                endpoints_ok = false;
            }
            if !(line.r >= 0.0 && line.x >= 0.0 && line.r + line.x > 0.0) {
                problems.push(format!(
                    "line {k} ({}-{}): needs r >= 0, x >= 0 and r + x > 0, got r={} x={}",
                    line.from, line.to, line.r, line.x
                ));
            }
            if !(line.s_max > 0.0) {
                problems.push(format!(
                    "line {k} ({}-{}): rating s_max must be positive, got {}",
                    line.from, line.to, line.s_max
                ));
            }
        }

        if self.lines.len() != n - 1 {
            problems.push(format!(
                "a radial feeder over {n} nodes needs exactly {} lines, got {}",
                n - 1,
                self.lines.len()
            ));
        }

        if endpoints_ok {
            // With |E| == |V| - 1 checked above, full reachability from the
            // substation is equivalent to the feeder being a tree.
            let mut adjacent = vec![Vec::new(); n];
            for line in &self.lines {
                adjacent[line.from].push(line.to);
                adjacent[line.to].push(line.from);
            }
            let mut reached = vec![false; n];
            let mut queue = VecDeque::from([0usize]);
            reached[0] = true;
            while let Some(i) = queue.pop_front() {
                for &j in &adjacent[i] {
                    if !reached[j] {
                        reached[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            let unreachable: Vec<String> = (0..n)
                .filter(|&i| !reached[i])
                .map(|i| i.to_string())
                .collect();
            if !unreachable.is_empty() {
                problems.push(format!(
                    "nodes {{{}}} are not connected to the substation",
                    unreachable.join(", ")
                ));
            }
        }

        if self.candidates.is_empty() {
            problems.push("at least one candidate node is required".to_string());
        }
        let mut candidate_seen = vec![false; n];
        for &c in &self.candidates {
            if c == 0 || c >= n {
                problems.push(format!(
                    "candidate node {c} invalid: candidates must be load nodes (1..{})",
                    n - 1
                ));
            } else if candidate_seen[c] {
                problems.push(format!("candidate node {c} listed twice"));
            } else {
                candidate_seen[c] = true;
            }
        }

        if self.psi_max.len() != self.candidates.len() {
            problems.push(format!(
                "psi_max has {} entries for {} candidates",
                self.psi_max.len(),
                self.candidates.len()
            ));
        }
        for (k, &cap) in self.psi_max.iter().enumerate() {
            if !(cap.is_finite() && cap > 0.0) {
                problems.push(format!(
                    "psi_max[{k}] must be positive and finite, got {cap}"
                ));
            }
        }
        if self.eta.len() != self.candidates.len() {
            problems.push(format!(
                "eta has {} entries for {} candidates",
                self.eta.len(),
                self.candidates.len()
            ));
        }
        for (k, &ratio) in self.eta.iter().enumerate() {
            if !ratio.is_finite() {
                problems.push(format!("eta[{k}] must be finite, got {ratio}"));
            }
        }

        problems
    }

    /// Nodal injections for one snapshot. Generation enters through the
    /// candidate nodes scaled by the irradiance factors `alpha`; loads `d`
    /// (real) and `e` (reactive) are drawn from every load node:
    ///
    /// `p[j-1] = alpha_k * psi_k - d[j-1]` at candidate `k` on node `j`,
    /// `p[j-1] = -d[j-1]` elsewhere, and likewise for `q` with the
    /// generator reactive output `eta_k * alpha_k * psi_k` and loads `e`.
    ///
    /// `alpha` and `psi` run over candidates, `d` and `e` over load nodes.
    pub fn injection_vectors(
        &self,
        psi: &[f64],
        alpha: &[f64],
        d: &[f64],
        e: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NetworkError> {
        let n_c = self.candidates.len();
        let n_l = self.n_loads();
        if psi.len() != n_c || alpha.len() != n_c {
            return Err(NetworkError::Dimension(format!(
                "psi and alpha must have one entry per candidate ({n_c}), got {} and {}",
                psi.len(),
                alpha.len()
            )));
        }
        if d.len() != n_l || e.len() != n_l {
            return Err(NetworkError::Dimension(format!(
                "d and e must have one entry per load node ({n_l}), got {} and {}",
                d.len(),
                e.len()
            )));
        }

        let mut p: Vec<f64> = d.iter().map(|&load| -load).collect();
        let mut q: Vec<f64> = e.iter().map(|&load| -load).collect();
        for (k, &node) in self.candidates.iter().enumerate() {
            let real = alpha[k] * psi[k];
            p[node - 1] += real;
            q[node - 1] += self.eta[k] * real;
        }
        Ok((p, q))
    }
}

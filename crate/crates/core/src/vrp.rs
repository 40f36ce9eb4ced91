//! Vehicle routing instances, decision-variable indexing and feasibility.
//!
//! Node 0 is always the depot. One binary variable exists per directed edge
//! `(i, j)` with `i != j`, laid out row-major over `i` with the diagonal
//! skipped, so `(0,1)` is variable 0, `(0,2)` is variable 1 and so on.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat index of the directed edge `i -> j` among the `n(n-1)` variables.
pub fn var_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i >= n || j >= n {
        return Err(Error::Index(format!("edge ({i},{j}) out of range for n={n}")));
    }
    if i == j {
        return Err(Error::Index(format!("self-loop ({i},{i}) has no variable")));
    }
    Ok(i * (n - 1) + if j > i { j - 1 } else { j })
}

/// Inverse of [`var_index`].
pub fn edge_of(q: usize, n: usize) -> Result<(usize, usize)> {
    if n < 2 || q >= n * (n - 1) {
        return Err(Error::Index(format!("variable {q} out of range for n={n}")));
    }
    let i = q / (n - 1);
    let r = q % (n - 1);
    let j = if r >= i { r + 1 } else { r };
    Ok((i, j))
}

/// A candidate solution: one bit per directed edge.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment(bits)
    }

    pub fn zeros(m: usize) -> Self {
        Assignment(vec![false; m])
    }

    /// Bit `q` of the assignment is bit `q` of `index` (least significant first).
    pub fn from_index(index: u64, m: usize) -> Self {
        Assignment((0..m).map(|q| (index >> q) & 1 == 1).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (q, &b)| acc | ((b as u64) << q))
    }

    /// Builds an assignment with exactly the listed edges set.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut bits = vec![false; n * (n - 1)];
        for &(i, j) in edges {
            bits[var_index(i, j, n)?] = true;
        }
        Ok(Assignment(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, q: usize) -> bool {
        self.0[q]
    }

    pub fn set(&mut self, q: usize, value: bool) {
        self.0[q] = value;
    }

    /// Spin values `s = 2x - 1`.
    pub fn spins(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().map(|&b| if b { 1.0 } else { -1.0 })
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Deserialize, Serialize)]
struct InstanceFile {
    n: usize,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    penalty_a: Option<f64>,
    weights: Vec<Vec<f64>>,
}

/// A VRP instance over `n` nodes with `k` vehicles.
#[derive(Clone, Debug, PartialEq)]
pub struct VrpInstance {
    n: usize,
    k: usize,
    weights: Vec<f64>,
    penalty_a: f64,
}

impl VrpInstance {
    /// Builds an instance from a dense `n x n` weight matrix (diagonal ignored).
    ///
    /// When `penalty_a` is `None` the default `n * (1 + max w)` is used, which
    /// makes every infeasible assignment cost more than any feasible one.
    pub fn new(n: usize, k: usize, weights: Vec<Vec<f64>>, penalty_a: Option<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need at least 2 nodes, got {n}")));
        }
        if k < 1 || k > n - 1 {
            return Err(Error::InvalidInstance(format!(
                "vehicle count must lie in 1..={}, got {k}",
                n - 1
            )));
        }
        if weights.len() != n || weights.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInstance(format!("weights must be a {n}x{n} matrix")));
        }
        let mut flat = vec![0.0; n * n];
        for (i, row) in weights.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidInstance(format!(
                        "weight ({i},{j}) = {w} must be finite and non-negative"
                    )));
                }
                flat[i * n + j] = w;
            }
        }
        let max_w = flat.iter().copied().fold(0.0, f64::max);
        let penalty_a = match penalty_a {
            Some(a) if a > 0.0 && a.is_finite() => a,
            Some(a) => {
                return Err(Error::InvalidInstance(format!("penalty_a must be positive, got {a}")))
            }
            None => n as f64 * (1.0 + max_w),
        };
        Ok(VrpInstance {
            n,
            k,
            weights: flat,
            penalty_a,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        VrpInstance::new(file.n, file.k, file.weights, file.penalty_a)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        VrpInstance::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            n: self.n,
            k: self.k,
            penalty_a: Some(self.penalty_a),
            weights: (0..self.n)
                .map(|i| (0..self.n).map(|j| self.weight(i, j)).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn vehicles(&self) -> usize {
        self.k
    }

    pub fn penalty_a(&self) -> f64 {
        self.penalty_a
    }

    /// Number of decision variables, `n(n-1)`.
    pub fn num_vars(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.weights[i * self.n + j]
        }
    }

    /// Directed edges in variable order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// Variables for the edges leaving `node`.
    pub fn outgoing(&self, node: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| j != node)
            .map(|j| var_index(node, j, self.n).expect("valid edge"))
            .collect()
    }

    /// Variables for the edges entering `node`.
    pub fn incoming(&self, node: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| j != node)
            .map(|j| var_index(j, node, self.n).expect("valid edge"))
            .collect()
    }

    /// Required out- and in-degree of `node`: `k` at the depot, 1 elsewhere.
    pub fn required_degree(&self, node: usize) -> usize {
        if node == 0 {
            self.k
        } else {
            1
        }
    }

    fn check_len(&self, a: &Assignment) -> Result<()> {
        if a.len() != self.num_vars() {
            return Err(Error::Dimension {
                expected: self.num_vars(),
                got: a.len(),
            });
        }
        Ok(())
    }

    /// Checks the degree constraints. Sub-tour elimination is not modelled.
    pub fn is_feasible(&self, a: &Assignment) -> Result<bool> {
        self.check_len(a)?;
        let degree = |vars: Vec<usize>| vars.into_iter().filter(|&q| a.get(q)).count();
        Ok((0..self.n).all(|node| {
            let req = self.required_degree(node);
            degree(self.outgoing(node)) == req && degree(self.incoming(node)) == req
        }))
    }

    /// Sum of `w_ij` over the set edges.
    pub fn route_cost(&self, a: &Assignment) -> Result<f64> {
        self.check_len(a)?;
        Ok(self
            .edges()
            .zip(a.bits())
            .filter(|(_, &b)| b)
            .map(|((i, j), _)| self.weight(i, j))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(n: usize, k: usize) -> VrpInstance {
        let w = (0..n)
            .map(|i| (0..n).map(|j| 0.1 * (i * n + j) as f64).collect())
            .collect();
        VrpInstance::new(n, k, w, None).unwrap()
    }

    #[test]
    fn index_examples() {
        assert_eq!(var_index(0, 1, 3).unwrap(), 0);
        assert_eq!(var_index(0, 2, 3).unwrap(), 1);
        assert_eq!(var_index(1, 0, 3).unwrap(), 2);
        assert_eq!(var_index(2, 1, 3).unwrap(), 5);
    }

    #[test]
    fn index_round_trip() {
        for n in 2..=6 {
            for q in 0..n * (n - 1) {
                let (i, j) = edge_of(q, n).unwrap();
                assert_eq!(var_index(i, j, n).unwrap(), q);
            }
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    assert_eq!(edge_of(var_index(i, j, n).unwrap(), n).unwrap(), (i, j));
                }
            }
        }
    }

    #[test]
    fn index_errors() {
        assert!(matches!(var_index(1, 1, 3), Err(Error::Index(_))));
        assert!(matches!(var_index(0, 3, 3), Err(Error::Index(_))));
        assert!(matches!(edge_of(6, 3), Err(Error::Index(_))));
    }

    #[test]
    fn two_depot_loops_are_feasible() {
        let inst = instance(3, 2);
        let a = Assignment::from_edges(3, &[(0, 1), (1, 0), (0, 2), (2, 0)]).unwrap();
        assert!(inst.is_feasible(&a).unwrap());
        assert!(!inst.is_feasible(&Assignment::zeros(6)).unwrap());
    }

    #[test]
    fn single_vehicle_three_nodes_has_two_tours() {
        let inst = instance(3, 1);
        let feasible: Vec<u64> = (0..64u64)
            .filter(|&z| inst.is_feasible(&Assignment::from_index(z, 6)).unwrap())
            .collect();
        assert_eq!(feasible.len(), 2);
        let tours = [
            Assignment::from_edges(3, &[(0, 1), (1, 2), (2, 0)]).unwrap(),
            Assignment::from_edges(3, &[(0, 2), (2, 1), (1, 0)]).unwrap(),
        ];
        for t in &tours {
            assert!(feasible.contains(&t.to_index()));
        }
    }

    #[test]
    fn two_vehicles_three_nodes_has_one_feasible() {
        let inst = instance(3, 2);
        let count = (0..64u64)
            .filter(|&z| inst.is_feasible(&Assignment::from_index(z, 6)).unwrap())
            .count();
        assert_eq!(count, 1);
    }

    #[test]
    fn route_cost_examples() {
        let mut w = vec![vec![0.0; 3]; 3];
        w[0][1] = 0.3;
        w[1][0] = 0.4;
        let inst = VrpInstance::new(3, 2, w, None).unwrap();
        assert_eq!(inst.route_cost(&Assignment::zeros(6)).unwrap(), 0.0);
        let a = Assignment::from_edges(3, &[(0, 1), (1, 0)]).unwrap();
        assert!((inst.route_cost(&a).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let inst = instance(3, 1);
        let short = Assignment::zeros(5);
        assert!(matches!(inst.is_feasible(&short), Err(Error::Dimension { expected: 6, got: 5 })));
        assert!(inst.route_cost(&short).is_err());
    }

    #[test]
    fn invalid_instances_rejected() {
        assert!(VrpInstance::new(1, 1, vec![vec![0.0]], None).is_err());
        assert!(VrpInstance::new(3, 3, vec![vec![0.0; 3]; 3], None).is_err());
        assert!(VrpInstance::new(3, 0, vec![vec![0.0; 3]; 3], None).is_err());
        assert!(VrpInstance::new(3, 1, vec![vec![0.0; 3]; 3], Some(0.0)).is_err());
        assert!(VrpInstance::new(3, 1, vec![vec![-1.0; 3]; 3], None).is_err());
        assert!(VrpInstance::new(3, 1, vec![vec![0.0; 2]; 3], None).is_err());
    }

    #[test]
    fn default_penalty() {
        let mut w = vec![vec![0.0; 3]; 3];
        w[2][1] = 0.5;
        let inst = VrpInstance::new(3, 1, w, None).unwrap();
        assert_eq!(inst.penalty_a(), 3.0 * 1.5);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n": 3, "k": 2, "weights": [[0, 0.3, 0.2], [0.4, 0, 0.1], [0.5, 0.6, 9]]}"#;
        let inst = VrpInstance::from_json(text).unwrap();
        assert_eq!(inst.weight(1, 0), 0.4);
        assert_eq!(inst.weight(2, 2), 0.0);
        assert_eq!(inst.penalty_a(), 3.0 * 1.6);
        let back = VrpInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
    }
}

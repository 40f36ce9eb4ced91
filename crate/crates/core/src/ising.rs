//! QUBO and Ising models of a VRP instance, and the exhaustive ground-state oracle.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vrp::{Assignment, VrpInstance};

/// Largest model the exhaustive oracle will enumerate.
pub const MAX_ORACLE_VARS: usize = 24;

/// Tolerance used to collect every assignment attaining the minimum.
pub const ARGMIN_TOL: f64 = 1e-12;

/// `x^T Q x + g^T x + c` over binary `x`, with `Q` strictly upper triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct QuboModel {
    m: usize,
    quad: Vec<f64>,
    linear: Vec<f64>,
    constant: f64,
}

impl QuboModel {
    pub fn zeros(m: usize) -> Self {
        QuboModel {
            m,
            quad: vec![0.0; m * m],
            linear: vec![0.0; m],
            constant: 0.0,
        }
    }

    /// Builds a model from a dense (not necessarily triangular) matrix.
    ///
    /// `Q_ij` and `Q_ji` are merged into the upper entry and the diagonal is
    /// folded into the linear vector, since `x_i^2 = x_i`.
    pub fn from_dense(quad: &[Vec<f64>], linear: Vec<f64>, constant: f64) -> Result<Self> {
        let m = linear.len();
        if quad.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: quad.len(),
            });
        }
        let mut model = QuboModel::zeros(m);
        model.linear = linear;
        model.constant = constant;
        for (i, row) in quad.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                model.add_quadratic(i, j, v);
            }
        }
        Ok(model)
    }

    pub fn num_vars(&self) -> usize {
        self.m
    }

    /// Upper-triangular coefficient; zero for `i >= j`.
    pub fn quadratic(&self, i: usize, j: usize) -> f64 {
        if i < j {
            self.quad[i * self.m + j]
        } else {
            0.0
        }
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    fn add_quadratic(&mut self, i: usize, j: usize, v: f64) {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.quad[i * self.m + j] += v,
            Greater => self.quad[j * self.m + i] += v,
            Equal => self.linear[i] += v,
        }
    }

    /// Adds `weight * (target - sum_{q in vars} x_q)^2`, expanded with `x^2 = x`.
    fn add_squared_penalty(&mut self, vars: &[usize], target: f64, weight: f64) {
        self.constant += weight * target * target;
        for (a, &p) in vars.iter().enumerate() {
            self.linear[p] += weight * (1.0 - 2.0 * target);
            for &q in &vars[a + 1..] {
                self.add_quadratic(p, q, 2.0 * weight);
            }
        }
    }

    fn check_len(&self, a: &Assignment) -> Result<()> {
        if a.len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: a.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, a: &Assignment) -> Result<f64> {
        self.check_len(a)?;
        let x = a.bits();
        let mut e = self.constant;
        for i in 0..self.m {
            if !x[i] {
                continue;
            }
            e += self.linear[i];
            for j in i + 1..self.m {
                if x[j] {
                    e += self.quad[i * self.m + j];
                }
            }
        }
        Ok(e)
    }
}

/// Expands the penalty Hamiltonian of `inst` into QUBO form.
///
/// The route cost enters linearly; each node contributes two squared degree
/// penalties (out and in) weighted by `A`, with target `k` at the depot and 1
/// elsewhere.
pub fn compile_qubo(inst: &VrpInstance) -> QuboModel {
    let n = inst.nodes();
    let a = inst.penalty_a();
    let mut model = QuboModel::zeros(inst.num_vars());
    for (q, (i, j)) in inst.edges().enumerate() {
        model.linear[q] += inst.weight(i, j);
    }
    // Non-depot nodes first, then the depot, mirroring the order of the terms.
    for node in (1..n).chain(std::iter::once(0)) {
        let target = inst.required_degree(node) as f64;
        model.add_squared_penalty(&inst.outgoing(node), target, a);
        model.add_squared_penalty(&inst.incoming(node), target, a);
    }
    model
}

/// `-sum_{i<j} J_ij s_i s_j - sum_i h_i s_i + d` over spins `s in {-1,+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    m: usize,
    couplings: Vec<f64>,
    fields: Vec<f64>,
    offset: f64,
}

impl IsingModel {
    pub fn zeros(m: usize) -> Self {
        IsingModel {
            m,
            couplings: vec![0.0; m * m],
            fields: vec![0.0; m],
            offset: 0.0,
        }
    }

    /// Builds a model from a coupling list; `(i, j)` and `(j, i)` accumulate.
    pub fn new(m: usize, couplings: &[(usize, usize, f64)], fields: Vec<f64>, offset: f64) -> Result<Self> {
        if fields.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: fields.len(),
            });
        }
        let mut model = IsingModel::zeros(m);
        model.fields = fields;
        model.offset = offset;
        for &(i, j, v) in couplings {
            if i >= m || j >= m || i == j {
                return Err(Error::Index(format!("invalid coupling ({i},{j}) for m={m}")));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            model.couplings[a * m + b] += v;
        }
        Ok(model)
    }

    /// A model with no couplings or fields; every state has energy `offset`.
    pub fn constant(m: usize, offset: f64) -> Self {
        IsingModel {
            offset,
            ..IsingModel::zeros(m)
        }
    }

    pub fn num_vars(&self) -> usize {
        self.m
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        if a == b {
            0.0
        } else {
            self.couplings[a * self.m + b]
        }
    }

    /// Non-zero couplings as `(i, j, J_ij)` with `i < j`, in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.m;
        (0..m).flat_map(move |i| {
            (i + 1..m).filter_map(move |j| {
                let v = self.couplings[i * m + j];
                (v != 0.0).then_some((i, j, v))
            })
        })
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn energy(&self, a: &Assignment) -> Result<f64> {
        if a.len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: a.len(),
            });
        }
        Ok(self.energy_of_index(a.to_index()))
    }

    /// Energy of the basis state whose bit `q` is variable `q`.
    pub fn energy_of_index(&self, z: u64) -> f64 {
        let m = self.m;
        let spin = |q: usize| if (z >> q) & 1 == 1 { 1.0 } else { -1.0 };
        let mut e = self.offset;
        for i in 0..m {
            let si = spin(i);
            e -= self.fields[i] * si;
            let row = &self.couplings[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (j, &jij) in row.iter().enumerate().skip(i + 1) {
                if jij != 0.0 {
                    acc += jij * spin(j);
                }
            }
            e -= si * acc;
        }
        e
    }

    /// Text form: `J i j value`, `h i value` (one per variable) and `d value`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, j, v) in self.pairs() {
            writeln!(out, "J {i} {j} {v}").unwrap();
        }
        for (i, v) in self.fields.iter().enumerate() {
            writeln!(out, "h {i} {v}").unwrap();
        }
        writeln!(out, "d {}", self.offset).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut couplings = Vec::new();
        let mut fields: Vec<(usize, f64)> = Vec::new();
        let mut offset = 0.0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse(format!("line {}: cannot parse {line:?}", lineno + 1));
            let tok: Vec<&str> = line.split_whitespace().collect();
            let idx = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let val = |s: &str| s.parse::<f64>().map_err(|_| bad());
            match tok.as_slice() {
                ["J", i, j, v] => couplings.push((idx(i)?, idx(j)?, val(v)?)),
                ["h", i, v] => fields.push((idx(i)?, val(v)?)),
                ["d", v] => offset += val(v)?,
                _ => return Err(bad()),
            }
        }
        let m = fields
            .iter()
            .map(|&(i, _)| i + 1)
            .chain(couplings.iter().map(|&(i, j, _)| i.max(j) + 1))
            .max()
            .unwrap_or(0);
        let mut h = vec![0.0; m];
        for (i, v) in fields {
            h[i] += v;
        }
        IsingModel::new(m, &couplings, h, offset)
    }
}

/// Substitutes `x = (s + 1) / 2` and regroups into `-J ss - h s + d` form.
pub fn qubo_to_ising(q: &QuboModel) -> IsingModel {
    let m = q.num_vars();
    let mut model = IsingModel::zeros(m);
    let mut offset = q.constant();
    for i in 0..m {
        // g_i x_i = g_i s_i / 2 + g_i / 2
        model.fields[i] -= q.linear()[i] / 2.0;
        offset += q.linear()[i] / 2.0;
        for j in i + 1..m {
            // Q_ij x_i x_j = Q_ij (s_i s_j + s_i + s_j + 1) / 4
            let v = q.quadratic(i, j);
            if v == 0.0 {
                continue;
            }
            model.couplings[i * m + j] -= v / 4.0;
            model.fields[i] -= v / 4.0;
            model.fields[j] -= v / 4.0;
            offset += v / 4.0;
        }
    }
    model.offset = offset;
    model
}

/// Exact minimum of an Ising model over all `2^m` assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub min_energy: f64,
    /// Every assignment within [`ARGMIN_TOL`] of the minimum, by ascending index.
    pub argmin_set: Vec<Assignment>,
    /// Whether some minimizer satisfies the degree constraints; only known
    /// when an instance was supplied.
    pub feasible_min: Option<bool>,
}

const ORACLE_CHUNK: u64 = 1 << 12;

/// Enumerates every assignment. Work is split into fixed chunks, and the
/// minimum and argmin set do not depend on how chunks are scheduled.
pub fn brute_force_minimum(model: &IsingModel) -> Result<OracleResult> {
    let m = model.num_vars();
    if m > MAX_ORACLE_VARS {
        return Err(Error::Capacity(format!(
            "exhaustive search over {m} variables exceeds the limit of {MAX_ORACLE_VARS}"
        )));
    }
    let total = 1u64 << m;
    let chunks = total.div_ceil(ORACLE_CHUNK);
    let range = |c: u64| c * ORACLE_CHUNK..((c + 1) * ORACLE_CHUNK).min(total);

    let min_energy = (0..chunks)
        .into_par_iter()
        .map(|c| range(c).map(|z| model.energy_of_index(z)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);

    let argmin: Vec<u64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            range(c).filter(move |&z| model.energy_of_index(z) - min_energy <= ARGMIN_TOL)
        })
        .collect();

    Ok(OracleResult {
        min_energy,
        argmin_set: argmin.into_iter().map(|z| Assignment::from_index(z, m)).collect(),
        feasible_min: None,
    })
}

/// Oracle for a compiled instance, also reporting whether a minimizer is feasible.
pub fn instance_minimum(inst: &VrpInstance, model: &IsingModel) -> Result<OracleResult> {
    let mut result = brute_force_minimum(model)?;
    let feasible = result
        .argmin_set
        .iter()
        .map(|a| inst.is_feasible(a))
        .collect::<Result<Vec<_>>>()?;
    result.feasible_min = Some(feasible.into_iter().any(|f| f));
    Ok(result)
}

//! Fidelity kernels over encoding circuits and a least-squares SVM solve.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::ansatz::{build, CircuitTemplate, Family};
use crate::error::{Error, Result};
use crate::statevector::{overlap_probability, Statevector};

/// Default ridge; large enough to act as a plain inverse.
pub const DEFAULT_GAMMA: f64 = 1e6;

/// Systems with an estimated condition number above this are refused.
pub const MAX_CONDITION: f64 = 1e14;

/// Qubit count implied by a feature vector of `len` entries.
pub fn qubits_for(family: Family, len: usize, layers: usize) -> Result<usize> {
    if layers == 0 {
        return Err(Error::Template("layers must be at least 1".into()));
    }
    let n = match family {
        Family::Angle | Family::HigherOrder | Family::Iqp => {
            if len == 0 || len % layers != 0 {
                None
            } else {
                Some(len / layers)
            }
        }
        Family::Amplitude => (len + 1).is_power_of_two().then(|| (len + 1).trailing_zeros() as usize).filter(|&n| n >= 1),
        Family::QaoaCostMixer => return Err(Error::Template("qaoa is not a feature map".into())),
    };
    n.ok_or_else(|| Error::Template(format!("{len} features do not fit a {family} map with {layers} layer(s)")))
}

fn feature_template(family: Family, len: usize, layers: usize) -> Result<CircuitTemplate> {
    build(family, qubits_for(family, len, layers)?, layers, None)
}

/// `|<phi(x)|phi(z)>|^2` evaluated as the all-zeros probability of `U(x)^dagger U(z)`.
pub fn kernel_entry(x: &[f64], z: &[f64], family: Family, layers: usize) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: z.len(),
        });
    }
    let t = feature_template(family, x.len(), layers)?;
    overlap_probability(&t.bind(x)?, &t.bind(z)?, t.num_qubits())
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub family: Family,
    pub layers: usize,
}

impl KernelMatrix {
    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.values.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Pairwise fidelities of every datapoint's encoded state.
pub fn gram_matrix(data: &[Vec<f64>], family: Family, layers: usize) -> Result<KernelMatrix> {
    let first = data.first().ok_or_else(|| Error::Config("dataset is empty".into()))?;
    if let Some(bad) = data.iter().find(|x| x.len() != first.len()) {
        return Err(Error::Dimension {
            expected: first.len(),
            got: bad.len(),
        });
    }
    let t = feature_template(family, first.len(), layers)?;
    let states = data
        .par_iter()
        .map(|x| Statevector::run(t.num_qubits(), &t.bind(x)?))
        .collect::<Result<Vec<_>>>()?;
    let m = data.len();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| states[i].inner(&states[j]).map(|c| c.norm_sqr())).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut values = DMatrix::zeros(m, m);
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            values[(i, i + offset)] = v;
            values[(i + offset, i)] = v;
        }
    }
    Ok(KernelMatrix { values, family, layers })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsSvmSolution {
    pub bias: f64,
    pub alphas: Vec<f64>,
    pub gamma: f64,
    /// `||F (b; alpha) - (0; y)|| / ||(0; y)||`.
    pub residual: f64,
}

impl LsSvmSolution {
    /// `sum_i alpha_i k_i + b` for kernel values `k_i` against the training set.
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.alphas.iter().zip(kernel_row).map(|(a, k)| a * k).sum::<f64>() + self.bias
    }

    pub fn classify(&self, kernel_row: &[f64]) -> f64 {
        if self.decision(kernel_row) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// The bordered system `[[0, 1^T], [1, K + I/gamma]]`.
pub fn ls_svm_system(k: &KernelMatrix, gamma: f64) -> DMatrix<f64> {
    let m = k.size();
    DMatrix::from_fn(m + 1, m + 1, |r, c| match (r, c) {
        (0, 0) => 0.0,
        (0, _) | (_, 0) => 1.0,
        (r, c) if r == c => k.values[(r - 1, c - 1)] + 1.0 / gamma,
        (r, c) => k.values[(r - 1, c - 1)],
    })
}

pub fn solve_ls_svm(k: &KernelMatrix, labels: &[f64], gamma: f64) -> Result<LsSvmSolution> {
    let m = k.size();
    if labels.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: labels.len(),
        });
    }
    if let Some(y) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::Config(format!("labels must be +1 or -1, got {y}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("ridge gamma must be positive, got {gamma}")));
    }
    let f = ls_svm_system(k, gamma);
    let sv = f.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let mut rhs = DVector::zeros(m + 1);
    rhs.rows_mut(1, m).copy_from_slice(labels);
    let sol = f.clone().lu().solve(&rhs).ok_or(Error::Singular { condition })?;
    let residual = (&f * &sol - &rhs).norm() / rhs.norm();
    Ok(LsSvmSolution {
        bias: sol[0],
        alphas: sol.rows(1, m).iter().copied().collect(),
        gamma,
        residual,
    })
}

/// Labeled dataset: one row per point, label in the last column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    /// Blank lines and lines starting with `#` are skipped, as is a
    /// non-numeric first row.
    pub fn parse(text: &str) -> Result<Self> {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let rows = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        for (i, line) in rows.enumerate() {
            let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let mut row = match parsed {
                Ok(row) => row,
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("dataset row {}: {e}", i + 1))),
            };
            if row.len() < 2 {
                return Err(Error::Parse(format!("dataset row {} needs features and a label", i + 1)));
            }
            let y = row.pop().unwrap_or_default();
            labels.push(y);
            features.push(row);
        }
        Ok(Dataset { features, labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

//! Parameterized circuit templates for the encoding families and the QAOA
//! cost/mixer baseline.
//!
//! Angle, higher-order and IQP layers entangle along the linear chain
//! `(q, q+1)`. The amplitude family is a binary-tree state preparation with
//! one rotation per tree node.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::IsingModel;
use crate::statevector::{Controls, Gate, GateOp};

/// The amplitude family refuses registers larger than this unless overridden.
pub const AMPLITUDE_MAX_QUBITS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Amplitude,
    Angle,
    HigherOrder,
    Iqp,
    #[serde(rename = "qaoa")]
    QaoaCostMixer,
}

impl Family {
    pub const ENCODINGS: [Family; 4] = [Family::Amplitude, Family::Angle, Family::HigherOrder, Family::Iqp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Amplitude => "amplitude",
            Family::Angle => "angle",
            Family::HigherOrder => "higher-order",
            Family::Iqp => "iqp",
            Family::QaoaCostMixer => "qaoa",
        }
    }

    /// Number of free parameters for `n` qubits and `layers` repetitions.
    pub fn param_count(&self, n: usize, layers: usize) -> usize {
        match self {
            Family::Angle | Family::HigherOrder | Family::Iqp => layers * n,
            Family::Amplitude => (1 << n) - 1,
            Family::QaoaCostMixer => 2 * layers,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(Family::Amplitude),
            "angle" => Ok(Family::Angle),
            "higher-order" | "ho" => Ok(Family::HigherOrder),
            "iqp" => Ok(Family::Iqp),
            "qaoa" => Ok(Family::QaoaCostMixer),
            other => Err(Error::Parse(format!("unknown encoding {other:?}"))),
        }
    }
}

/// Angle of a template gate in terms of the parameter vector `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamExpr {
    Const(f64),
    /// `scale * t[index]`
    Slot { index: usize, scale: f64 },
    /// `scale * t[a] * t[b]`
    Product { a: usize, b: usize, scale: f64 },
}

impl ParamExpr {
    pub fn slot(index: usize) -> Self {
        ParamExpr::Slot { index, scale: 1.0 }
    }

    pub fn product(a: usize, b: usize) -> Self {
        ParamExpr::Product { a, b, scale: 1.0 }
    }

    pub fn eval(&self, params: &[f64]) -> f64 {
        match *self {
            ParamExpr::Const(v) => v,
            ParamExpr::Slot { index, scale } => scale * params[index],
            ParamExpr::Product { a, b, scale } => scale * params[a] * params[b],
        }
    }

    fn max_slot(&self) -> Option<usize> {
        match *self {
            ParamExpr::Const(_) => None,
            ParamExpr::Slot { index, .. } => Some(index),
            ParamExpr::Product { a, b, .. } => Some(a.max(b)),
        }
    }
}

impl fmt::Display for ParamExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = |f: &mut fmt::Formatter<'_>, scale: f64| {
            if scale == 1.0 {
                Ok(())
            } else {
                write!(f, "{scale}*")
            }
        };
        match *self {
            ParamExpr::Const(v) => write!(f, "{v}"),
            ParamExpr::Slot { index, scale } => {
                prefix(f, scale)?;
                write!(f, "t{index}")
            }
            ParamExpr::Product { a, b, scale } => {
                prefix(f, scale)?;
                write!(f, "t{a}*t{b}")
            }
        }
    }
}

pub type TemplateGate = GateOp<ParamExpr>;

/// An ordered gate list with symbolic angles.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitTemplate {
    n: usize,
    family: Family,
    layers: usize,
    param_count: usize,
    gates: Vec<TemplateGate>,
}

impl CircuitTemplate {
    fn new(n: usize, family: Family, layers: usize, gates: Vec<TemplateGate>) -> Self {
        let param_count = family.param_count(n, layers);
        debug_assert!(gates
            .iter()
            .filter_map(|g| g.angle().and_then(ParamExpr::max_slot))
            .all(|s| s < param_count));
        CircuitTemplate {
            n,
            family,
            layers,
            param_count,
            gates,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn gates(&self) -> &[TemplateGate] {
        &self.gates
    }

    /// Resolves every angle against `params`.
    pub fn bind(&self, params: &[f64]) -> Result<Vec<Gate>> {
        if params.len() != self.param_count {
            return Err(Error::Binding {
                expected: self.param_count,
                got: params.len(),
            });
        }
        Ok(self
            .gates
            .iter()
            .map(|g| g.map_angle(|e| Ok::<_, Error>(e.eval(params))).expect("infallible"))
            .collect())
    }

    /// One gate per line: kind, qubits, angle expression.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "# family={} qubits={} layers={} params={}\n",
            self.family, self.n, self.layers, self.param_count
        );
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

fn check_size(n: usize, layers: usize, min_n: usize) -> Result<()> {
    if n < min_n {
        return Err(Error::Template(format!("need at least {min_n} qubit(s), got {n}")));
    }
    if layers == 0 {
        return Err(Error::Template("layers must be at least 1".into()));
    }
    if n > crate::statevector::MAX_QUBITS {
        return Err(Error::Capacity(format!("{n} qubits exceeds the simulator limit")));
    }
    Ok(())
}

fn chain(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n.saturating_sub(1)).map(|q| (q, q + 1))
}

/// Per layer: `RY(t)` on every qubit, then a CNOT chain.
pub fn build_angle(n: usize, layers: usize) -> Result<CircuitTemplate> {
    check_size(n, layers, 1)?;
    let mut gates = Vec::new();
    for l in 0..layers {
        gates.extend((0..n).map(|q| GateOp::Ry(q, ParamExpr::slot(l * n + q))));
        gates.extend(chain(n).map(|(control, target)| GateOp::Cnot { control, target }));
    }
    Ok(CircuitTemplate::new(n, Family::Angle, layers, gates))
}

/// The angle layer followed by `RY(t_{q-1} * t_q)` on each qubit `q >= 1`.
pub fn build_higher_order(n: usize, layers: usize) -> Result<CircuitTemplate> {
    if n < 2 {
        return Err(Error::Template("higher-order encoding needs at least 2 qubits to entangle".into()));
    }
    check_size(n, layers, 2)?;
    let mut gates = Vec::new();
    for l in 0..layers {
        let base = l * n;
        gates.extend((0..n).map(|q| GateOp::Ry(q, ParamExpr::slot(base + q))));
        gates.extend(chain(n).map(|(control, target)| GateOp::Cnot { control, target }));
        gates.extend((1..n).map(|q| GateOp::Ry(q, ParamExpr::product(base + q - 1, base + q))));
    }
    Ok(CircuitTemplate::new(n, Family::HigherOrder, layers, gates))
}

/// Per repetition: `H` everywhere, `RZ(t_k)` on every qubit, then
/// `RZZ(t_i * t_j)` on each chain pair.
pub fn build_iqp(n: usize, layers: usize) -> Result<CircuitTemplate> {
    check_size(n, layers, 1)?;
    let mut gates = Vec::new();
    for l in 0..layers {
        let base = l * n;
        gates.extend((0..n).map(GateOp::H));
        gates.extend((0..n).map(|q| GateOp::Rz(q, ParamExpr::slot(base + q))));
        gates.extend(chain(n).map(|(a, b)| GateOp::Rzz {
            a,
            b,
            angle: ParamExpr::product(base + a, base + b),
        }));
    }
    Ok(CircuitTemplate::new(n, Family::Iqp, layers, gates))
}

/// Slot of the tree node at `depth` whose ancestors spell `prefix`.
fn tree_slot(depth: usize, prefix: usize) -> usize {
    (1 << depth) - 1 + prefix
}

/// Binary-tree state preparation on `n <= 6` qubits.
pub fn build_amplitude(n: usize) -> Result<CircuitTemplate> {
    build_amplitude_with_limit(n, AMPLITUDE_MAX_QUBITS)
}

/// [`build_amplitude`] with an explicit qubit cap.
///
/// The root `RY` acts on qubit `n-1`; at depth `d` the rotation on qubit
/// `n-1-d` is controlled on the `d` qubits above it taking the values of the
/// node's prefix (most significant first).
pub fn build_amplitude_with_limit(n: usize, max_qubits: usize) -> Result<CircuitTemplate> {
    check_size(n, 1, 1)?;
    if n > max_qubits {
        return Err(Error::Capacity(format!(
            "amplitude encoding is limited to {max_qubits} qubits, got {n}"
        )));
    }
    let mut gates = Vec::with_capacity((1 << n) - 1);
    for depth in 0..n {
        let target = n - 1 - depth;
        for prefix in 0..1usize << depth {
            let angle = ParamExpr::slot(tree_slot(depth, prefix));
            if depth == 0 {
                gates.push(GateOp::Ry(target, angle));
                continue;
            }
            let mut controls = Controls::default();
            // prefix bit b is qubit target + 1 + b, i.e. the top `depth` bits
            // of the basis index
            for bit in 0..depth {
                controls = controls.with(target + 1 + bit, prefix >> bit & 1 == 1);
            }
            gates.push(GateOp::ControlledRy {
                controls,
                target,
                angle,
            });
        }
    }
    Ok(CircuitTemplate::new(n, Family::Amplitude, 1, gates))
}

/// Tree angles that prepare the non-negative real vector `target` (up to
/// normalization) with the amplitude template.
pub fn amplitude_angles(target: &[f64]) -> Result<Vec<f64>> {
    let len = target.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Template(format!("target length {len} is not a power of two >= 2")));
    }
    if target.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Template("target amplitudes must be finite and non-negative".into()));
    }
    if target.iter().all(|&v| v == 0.0) {
        return Err(Error::Template("target vector is zero".into()));
    }
    let n = len.trailing_zeros() as usize;
    let mut angles = vec![0.0; len - 1];
    for depth in 0..n {
        let span = len >> depth;
        for prefix in 0..1usize << depth {
            let block = &target[prefix * span..(prefix + 1) * span];
            let (lo, hi) = block.split_at(span / 2);
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            angles[tree_slot(depth, prefix)] = 2.0 * norm(hi).atan2(norm(lo));
        }
    }
    Ok(angles)
}

/// QAOA baseline: `H` on all qubits, then per layer `exp(-i gamma H_cost)`
/// compiled to `RZZ`/`RZ` and `exp(-i beta sum X)` as `RX(2 beta)`.
///
/// Parameters are ordered `(gamma_1, beta_1, gamma_2, beta_2, ...)`.
pub fn build_qaoa(n: usize, layers: usize, model: &IsingModel) -> Result<CircuitTemplate> {
    check_size(n, layers, 1)?;
    if model.num_vars() != n {
        return Err(Error::Dimension {
            expected: n,
            got: model.num_vars(),
        });
    }
    let mut gates: Vec<TemplateGate> = (0..n).map(GateOp::H).collect();
    for p in 0..layers {
        let (gamma, beta) = (2 * p, 2 * p + 1);
        // spin s = -Z, so exp(-i gamma H_cost) is RZZ(-2 gamma J) and RZ(2 gamma h)
        gates.extend(model.pairs().map(|(a, b, j)| GateOp::Rzz {
            a,
            b,
            angle: ParamExpr::Slot {
                index: gamma,
                scale: -2.0 * j,
            },
        }));
        gates.extend(model.fields().iter().enumerate().map(|(q, &h)| {
            GateOp::Rz(
                q,
                ParamExpr::Slot {
                    index: gamma,
                    scale: 2.0 * h,
                },
            )
        }));
        gates.extend((0..n).map(|q| {
            GateOp::Rx(
                q,
                ParamExpr::Slot {
                    index: beta,
                    scale: 2.0,
                },
            )
        }));
    }
    Ok(CircuitTemplate::new(n, Family::QaoaCostMixer, layers, gates))
}

/// Builds any family. `model` is required for QAOA and ignored otherwise.
pub fn build(family: Family, n: usize, layers: usize, model: Option<&IsingModel>) -> Result<CircuitTemplate> {
    match family {
        Family::Angle => build_angle(n, layers),
        Family::HigherOrder => build_higher_order(n, layers),
        Family::Iqp => build_iqp(n, layers),
        Family::Amplitude => build_amplitude(n),
        Family::QaoaCostMixer => {
            let model = model.ok_or_else(|| Error::Template("qaoa needs an Ising model".into()))?;
            build_qaoa(n, layers, model)
        }
    }
}

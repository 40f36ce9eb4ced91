//! Dense statevector simulation.
//!
//! Qubit 0 is the least significant bit of a basis-state index. Rotations
//! follow `RY(t) = exp(-i t Y / 2)`, `RZ(t) = exp(-i t Z / 2)`,
//! `RX(t) = exp(-i t X / 2)` and `RZZ(t) = exp(-i t Z⊗Z / 2)`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ising::IsingModel;
use crate::vrp::Assignment;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 24;

/// Control condition of a multiply-controlled gate: the gate fires on basis
/// states where `index & mask == values`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Controls {
    pub mask: u64,
    pub values: u64,
}

impl Controls {
    /// One control qubit; `polarity == false` is an anti-control (fires on |0>).
    pub fn single(qubit: usize, polarity: bool) -> Self {
        Controls {
            mask: 1 << qubit,
            values: (polarity as u64) << qubit,
        }
    }

    /// Adds another control qubit.
    pub fn with(self, qubit: usize, polarity: bool) -> Self {
        Controls {
            mask: self.mask | 1 << qubit,
            values: self.values | (polarity as u64) << qubit,
        }
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..64).filter(move |q| self.mask >> q & 1 == 1)
    }

    pub fn count(&self) -> usize {
        self.mask.count_ones() as usize
    }
}

/// A gate whose angles have type `A`: `f64` for concrete gates, a parameter
/// expression for templates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GateOp<A> {
    H(usize),
    X(usize),
    Rx(usize, A),
    Ry(usize, A),
    Rz(usize, A),
    /// `diag(1, e^{i lambda})`
    Phase(usize, A),
    Cnot { control: usize, target: usize },
    Rzz { a: usize, b: usize, angle: A },
    ControlledRy { controls: Controls, target: usize, angle: A },
}

pub type Gate = GateOp<f64>;

impl<A> GateOp<A> {
    /// Qubits the gate touches, controls first.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            GateOp::H(q) | GateOp::X(q) | GateOp::Rx(q, _) | GateOp::Ry(q, _) | GateOp::Rz(q, _) | GateOp::Phase(q, _) => {
                vec![*q]
            }
            GateOp::Cnot { control, target } => vec![*control, *target],
            GateOp::Rzz { a, b, .. } => vec![*a, *b],
            GateOp::ControlledRy { controls, target, .. } => {
                controls.qubits().chain(std::iter::once(*target)).collect()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GateOp::H(_) => "h",
            GateOp::X(_) => "x",
            GateOp::Rx(..) => "rx",
            GateOp::Ry(..) => "ry",
            GateOp::Rz(..) => "rz",
            GateOp::Phase(..) => "p",
            GateOp::Cnot { .. } => "cx",
            GateOp::Rzz { .. } => "rzz",
            GateOp::ControlledRy { .. } => "cry",
        }
    }

    pub fn angle(&self) -> Option<&A> {
        match self {
            GateOp::Rx(_, a) | GateOp::Ry(_, a) | GateOp::Rz(_, a) | GateOp::Phase(_, a) => Some(a),
            GateOp::Rzz { angle, .. } | GateOp::ControlledRy { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Rewrites the angle with `f`, keeping the gate kind and qubits.
    pub fn map_angle<B, E>(&self, f: impl FnOnce(&A) -> std::result::Result<B, E>) -> std::result::Result<GateOp<B>, E> {
        Ok(match self {
            GateOp::H(q) => GateOp::H(*q),
            GateOp::X(q) => GateOp::X(*q),
            GateOp::Rx(q, a) => GateOp::Rx(*q, f(a)?),
            GateOp::Ry(q, a) => GateOp::Ry(*q, f(a)?),
            GateOp::Rz(q, a) => GateOp::Rz(*q, f(a)?),
            GateOp::Phase(q, a) => GateOp::Phase(*q, f(a)?),
            GateOp::Cnot { control, target } => GateOp::Cnot {
                control: *control,
                target: *target,
            },
            GateOp::Rzz { a, b, angle } => GateOp::Rzz {
                a: *a,
                b: *b,
                angle: f(angle)?,
            },
            GateOp::ControlledRy {
                controls,
                target,
                angle,
            } => GateOp::ControlledRy {
                controls: *controls,
                target: *target,
                angle: f(angle)?,
            },
        })
    }

    /// Checks indices are in range and distinct.
    pub fn validate(&self, n: usize) -> Result<()> {
        let qs = self.qubits();
        if let Some(&q) = qs.iter().find(|&&q| q >= n) {
            return Err(Error::Gate(format!("{} addresses qubit {q} on a {n}-qubit register", self.name())));
        }
        if let GateOp::ControlledRy { controls, target, .. } = self {
            if controls.mask >> target & 1 == 1 {
                return Err(Error::Gate(format!("cry target {target} is also a control")));
            }
            if controls.values & !controls.mask != 0 {
                return Err(Error::Gate("cry control values outside the mask".into()));
            }
        }
        for (i, a) in qs.iter().enumerate() {
            if qs[i + 1..].contains(a) {
                return Err(Error::Gate(format!("{} uses qubit {a} twice", self.name())));
            }
        }
        Ok(())
    }
}

impl<A: fmt::Display> fmt::Display for GateOp<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        match self {
            GateOp::ControlledRy { controls, target, .. } => {
                for q in controls.qubits() {
                    let on = controls.values >> q & 1 == 1;
                    write!(f, " {}{q}", if on { "" } else { "!" })?;
                }
                write!(f, " {target}")?;
            }
            _ => {
                for q in self.qubits() {
                    write!(f, " {q}")?;
                }
            }
        }
        if let Some(a) = self.angle() {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Gate {
    /// Dense unitary over [`GateOp::qubits`], where the first listed qubit is
    /// the least significant bit of the local index.
    pub fn matrix(&self) -> Vec<Vec<Complex64>> {
        let zero = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let single = |u: [[Complex64; 2]; 2]| vec![u[0].to_vec(), u[1].to_vec()];
        match *self {
            GateOp::H(_) => {
                let h = c(FRAC_1_SQRT_2, 0.0);
                single([[h, h], [h, -h]])
            }
            GateOp::X(_) => single([[zero, one], [one, zero]]),
            GateOp::Rx(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                single([[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]])
            }
            GateOp::Ry(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                single([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
            }
            GateOp::Rz(_, t) => single([[Complex64::cis(-t / 2.0), zero], [zero, Complex64::cis(t / 2.0)]]),
            GateOp::Phase(_, l) => single([[one, zero], [zero, Complex64::cis(l)]]),
            GateOp::Cnot { .. } => {
                // local index = control + 2 * target
                let mut u = vec![vec![zero; 4]; 4];
                u[0][0] = one;
                u[2][2] = one;
                u[3][1] = one;
                u[1][3] = one;
                u
            }
            GateOp::Rzz { angle, .. } => {
                let mut u = vec![vec![zero; 4]; 4];
                for (i, row) in u.iter_mut().enumerate() {
                    let parity = (i ^ (i >> 1)) & 1;
                    row[i] = Complex64::cis(if parity == 0 { -angle / 2.0 } else { angle / 2.0 });
                }
                u
            }
            GateOp::ControlledRy { controls, angle, .. } => {
                let k = controls.count();
                let dim = 1 << (k + 1);
                let mut u = vec![vec![zero; dim]; dim];
                let fire: usize = controls
                    .qubits()
                    .enumerate()
                    .map(|(bit, q)| ((controls.values >> q & 1) as usize) << bit)
                    .sum();
                let (s, co) = (angle / 2.0).sin_cos();
                for (i, row) in u.iter_mut().enumerate() {
                    if i & ((1 << k) - 1) != fire {
                        row[i] = one;
                    }
                }
                let lo = fire;
                let hi = fire | 1 << k;
                u[lo][lo] = c(co, 0.0);
                u[lo][hi] = c(-s, 0.0);
                u[hi][lo] = c(s, 0.0);
                u[hi][hi] = c(co, 0.0);
                u
            }
        }
    }
}

/// State of an `n`-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>`
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: u64) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::Capacity(format!("{n} qubits exceeds the simulator limit of {MAX_QUBITS}")));
        }
        if index >= 1 << n {
            return Err(Error::Index(format!("basis state {index} out of range for {n} qubits")));
        }
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        amps[index as usize] = c(1.0, 0.0);
        Ok(Statevector { n, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Dimension {
                expected: len.next_power_of_two(),
                got: len,
            });
        }
        Ok(Statevector {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Statevector) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    fn pairs_mut(&mut self, q: usize, mut f: impl FnMut(usize, &mut Complex64, &mut Complex64)) {
        let stride = 1usize << q;
        for block in self.amps.chunks_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (i, (a0, a1)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                f(i, a0, a1);
            }
        }
    }

    fn apply_2x2(&mut self, q: usize, u: [[Complex64; 2]; 2]) {
        self.pairs_mut(q, |_, a0, a1| {
            let (x, y) = (*a0, *a1);
            *a0 = u[0][0] * x + u[0][1] * y;
            *a1 = u[1][0] * x + u[1][1] * y;
        });
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n)?;
        match *gate {
            GateOp::H(q) => {
                let h = FRAC_1_SQRT_2;
                self.pairs_mut(q, |_, a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = (x + y) * h;
                    *a1 = (x - y) * h;
                });
            }
            GateOp::X(q) => self.pairs_mut(q, |_, a0, a1| std::mem::swap(a0, a1)),
            GateOp::Rx(q, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                self.apply_2x2(q, [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]);
            }
            GateOp::Ry(q, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                self.pairs_mut(q, |_, a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = x * co - y * s;
                    *a1 = x * s + y * co;
                });
            }
            GateOp::Rz(q, t) => {
                let (p0, p1) = (Complex64::cis(-t / 2.0), Complex64::cis(t / 2.0));
                self.pairs_mut(q, |_, a0, a1| {
                    *a0 *= p0;
                    *a1 *= p1;
                });
            }
            GateOp::Phase(q, l) => {
                let p = Complex64::cis(l);
                self.pairs_mut(q, |_, _, a1| *a1 *= p);
            }
            GateOp::Cnot { control, target } => {
                let (cm, tm) = (1usize << control, 1usize << target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            GateOp::Rzz { a, b, angle } => {
                let (even, odd) = (Complex64::cis(-angle / 2.0), Complex64::cis(angle / 2.0));
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    *amp *= if ((i >> a) ^ (i >> b)) & 1 == 0 { even } else { odd };
                }
            }
            GateOp::ControlledRy {
                controls,
                target,
                angle,
            } => {
                let (s, co) = (angle / 2.0).sin_cos();
                let (mask, values) = (controls.mask as usize, controls.values as usize);
                let tm = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & tm == 0 && i & mask == values {
                        let (x, y) = (self.amps[i], self.amps[i | tm]);
                        self.amps[i] = x * co - y * s;
                        self.amps[i | tm] = x * s + y * co;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// Runs `gates` on `|0...0>`.
    pub fn run(n: usize, gates: &[Gate]) -> Result<Self> {
        let mut s = Statevector::zero(n)?;
        s.apply_all(gates)?;
        Ok(s)
    }
}

/// Applies the inverse of a gate sequence (reversed, each gate inverted).
pub fn apply_inverse(state: &mut Statevector, gates: &[Gate]) -> Result<()> {
    for g in gates.iter().rev() {
        let inv = match *g {
            GateOp::H(q) => GateOp::H(q),
            GateOp::X(q) => GateOp::X(q),
            GateOp::Cnot { control, target } => GateOp::Cnot { control, target },
            other => other.map_angle(|a| Ok::<_, Error>(-a))?,
        };
        state.apply(&inv)?;
    }
    Ok(())
}

/// Diagonal observable whose value on basis state `z` is the Ising energy of
/// the assignment with bits `z`.
#[derive(Clone, Copy, Debug)]
pub struct DiagonalObservable<'a> {
    model: &'a IsingModel,
}

impl<'a> DiagonalObservable<'a> {
    pub fn new(model: &'a IsingModel) -> Self {
        DiagonalObservable { model }
    }

    pub fn num_qubits(&self) -> usize {
        self.model.num_vars()
    }

    pub fn value(&self, z: u64) -> f64 {
        self.model.energy_of_index(z)
    }

    /// Materializes every diagonal entry.
    pub fn table(&self) -> Vec<f64> {
        (0..1u64 << self.num_qubits()).map(|z| self.value(z)).collect()
    }
}

/// `<psi|H|psi>` for a diagonal `H`.
pub fn expectation(state: &Statevector, obs: &DiagonalObservable<'_>) -> Result<f64> {
    if state.num_qubits() != obs.num_qubits() {
        return Err(Error::Dimension {
            expected: obs.num_qubits(),
            got: state.num_qubits(),
        });
    }
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(z, a)| a.norm_sqr() * obs.value(z as u64))
        .sum())
}

/// Same as [`expectation`] against a precomputed diagonal.
pub fn expectation_from_table(state: &Statevector, diagonal: &[f64]) -> Result<f64> {
    if diagonal.len() != state.amplitudes().len() {
        return Err(Error::Dimension {
            expected: state.amplitudes().len(),
            got: diagonal.len(),
        });
    }
    Ok(state.amplitudes().iter().zip(diagonal).map(|(a, e)| a.norm_sqr() * e).sum())
}

/// Most probable basis state; ties go to the lowest index.
pub fn argmax_bitstring(state: &Statevector) -> Assignment {
    let mut best = 0usize;
    let mut best_p = f64::NEG_INFINITY;
    for (z, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        if p > best_p {
            best = z;
            best_p = p;
        }
    }
    Assignment::from_index(best as u64, state.num_qubits())
}

/// `|<0| A^dagger B |0>|^2`, the all-zeros probability after running `B`
/// then the inverse of `A`.
pub fn overlap_probability(a: &[Gate], b: &[Gate], n: usize) -> Result<f64> {
    let mut state = Statevector::run(n, b)?;
    apply_inverse(&mut state, a)?;
    Ok(state.amplitudes()[0].norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn hadamard_on_zero() {
        let s = Statevector::run(1, &[GateOp::H(0)]).unwrap();
        let h = c(FRAC_1_SQRT_2, 0.0);
        assert!(close(s.amplitudes()[0], h, 1e-15));
        assert!(close(s.amplitudes()[1], h, 1e-15));
    }

    #[test]
    fn ry_on_zero() {
        for &t in &[0.0, 0.3, 1.7, PI, -2.5] {
            let s = Statevector::run(1, &[GateOp::Ry(0, t)]).unwrap();
            assert!(close(s.amplitudes()[0], c((t / 2.0).cos(), 0.0), 1e-15));
            assert!(close(s.amplitudes()[1], c((t / 2.0).sin(), 0.0), 1e-15));
        }
    }

    #[test]
    fn rzz_phase_on_01() {
        let t = 0.77;
        // |01>: qubit 0 = 1, qubit 1 = 0 -> index 1
        let mut s = Statevector::basis(2, 1).unwrap();
        s.apply(&GateOp::Rzz { a: 0, b: 1, angle: t }).unwrap();
        assert!(close(s.amplitudes()[1], Complex64::cis(t / 2.0), 1e-15));
    }

    #[test]
    fn gate_errors() {
        let mut s = Statevector::zero(2).unwrap();
        assert!(s.apply(&GateOp::H(2)).is_err());
        assert!(s.apply(&GateOp::Cnot { control: 1, target: 1 }).is_err());
        assert!(s.apply(&GateOp::Rzz { a: 0, b: 0, angle: 1.0 }).is_err());
        let bad = GateOp::ControlledRy {
            controls: Controls::single(0, true),
            target: 0,
            angle: 1.0,
        };
        assert!(s.apply(&bad).is_err());
    }

    #[test]
    fn controlled_ry_polarity() {
        // control qubit 1 = 0 (anti-control); prepare qubit 1 in |0>
        let g = GateOp::ControlledRy {
            controls: Controls::single(1, false),
            target: 0,
            angle: PI,
        };
        let s = Statevector::run(2, &[g]).unwrap();
        assert!(close(s.amplitudes()[1], c(1.0, 0.0), 1e-15));
        let s = Statevector::run(2, &[GateOp::X(1), g]).unwrap();
        assert!(close(s.amplitudes()[2], c(1.0, 0.0), 1e-15));
    }

    #[test]
    fn expectation_basis_and_uniform() {
        let m = IsingModel::new(1, &[], vec![1.0], 0.0).unwrap();
        let s = Statevector::zero(1).unwrap();
        assert_eq!(expectation(&s, &DiagonalObservable::new(&m)).unwrap(), 1.0);

        let m = IsingModel::new(2, &[(0, 1, 0.7)], vec![-0.4, 1.3], 2.5).unwrap();
        let s = Statevector::run(2, &[GateOp::H(0), GateOp::H(1)]).unwrap();
        let e = expectation(&s, &DiagonalObservable::new(&m)).unwrap();
        assert!((e - 2.5).abs() < 1e-12);
        assert!(expectation(&Statevector::zero(3).unwrap(), &DiagonalObservable::new(&m)).is_err());
    }

    #[test]
    fn argmax_examples() {
        let s = Statevector::basis(3, 5).unwrap();
        assert_eq!(argmax_bitstring(&s).to_index(), 5);
        let s = Statevector::run(3, &[GateOp::H(0), GateOp::H(1), GateOp::H(2)]).unwrap();
        assert_eq!(argmax_bitstring(&s).to_index(), 0);
    }

    #[test]
    fn overlap_examples() {
        let a = [GateOp::Ry(0, 0.4), GateOp::H(1), GateOp::Cnot { control: 1, target: 0 }];
        assert!((overlap_probability(&a, &a, 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(overlap_probability(&[], &[GateOp::X(0)], 1).unwrap().abs() < 1e-15);
        let (x, y) = (0.3, 2.1);
        let p = overlap_probability(&[GateOp::Ry(0, x)], &[GateOp::Ry(0, y)], 1).unwrap();
        assert!((p - ((x - y) / 2.0f64).cos().powi(2)).abs() < 1e-12);
        assert!(overlap_probability(&[GateOp::H(2)], &[], 2).is_err());
    }

    #[test]
    fn display_format() {
        let g: Gate = GateOp::ControlledRy {
            controls: Controls::single(2, false).with(1, true),
            target: 0,
            angle: 0.5,
        };
        assert_eq!(g.to_string(), "cry 1 !2 0 0.5");
        assert_eq!(GateOp::<f64>::Cnot { control: 0, target: 1 }.to_string(), "cx 0 1");
    }
}

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use vrp_vqe::vrp::VrpInstance;

pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { rng.random::<f64>() }).collect())
        .collect()
}

pub fn random_instance(rng: &mut impl Rng, n: usize, k: usize) -> VrpInstance {
    VrpInstance::new(n, k, random_weights(rng, n), None).unwrap()
}

/// Directed edges in variable order, enumerated without the library's index map.
pub fn edge_list(n: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Route cost plus the four squared degree penalties, summed term by term.
pub fn direct_hamiltonian(inst: &VrpInstance, bits: &[bool]) -> f64 {
    let n = inst.nodes();
    let k = inst.vehicles() as f64;
    let a = inst.penalty_a();
    let edges = edge_list(n);
    let x = |i: usize, j: usize| -> f64 {
        let q = edges.iter().position(|&e| e == (i, j)).unwrap();
        if bits[q] {
            1.0
        } else {
            0.0
        }
    };
    let mut h = 0.0;
    for &(i, j) in &edges {
        h += inst.weight(i, j) * x(i, j);
    }
    for i in 1..n {
        let out: f64 = (0..n).filter(|&j| j != i).map(|j| x(i, j)).sum();
        let inn: f64 = (0..n).filter(|&j| j != i).map(|j| x(j, i)).sum();
        h += a * (1.0 - out).powi(2) + a * (1.0 - inn).powi(2);
    }
    let depot_out: f64 = (1..n).map(|j| x(0, j)).sum();
    let depot_in: f64 = (1..n).map(|j| x(j, 0)).sum();
    h + a * (k - depot_out).powi(2) + a * (k - depot_in).powi(2)
}

pub fn bits_of(z: u64, m: usize) -> Vec<bool> {
    (0..m).map(|q| z >> q & 1 == 1).collect()
}

/// Largest amplitude difference after removing the relative global phase.
pub fn phase_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter().zip(b).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max)
}

pub fn max_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Amplitude vector indexed by `a + 2b` from two-qubit values listed as
/// `[|00>, |01>, |10>, |11>]` with the first qubit written first.
pub fn from_kets(kets: [Complex64; 4]) -> Vec<Complex64> {
    vec![kets[0], kets[2], kets[1], kets[3]]
}

pub fn polar(r: f64, phase: f64) -> Complex64 {
    Complex64::from_polar(r, phase)
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Two-qubit angle encoding, worked out by hand: RY on both qubits then CNOT.
pub fn angle_expansion(t1: f64, t2: f64) -> Vec<Complex64> {
    let (s1, c1) = (t1 / 2.0).sin_cos();
    let (s2, c2) = (t2 / 2.0).sin_cos();
    from_kets([real(c1 * c2), real(c1 * s2), real(s1 * s2), real(s1 * c2)])
}

/// Angle expansion followed by RY(t1 t2) on the second qubit.
pub fn higher_order_expansion(t1: f64, t2: f64) -> Vec<Complex64> {
    let (s1, c1) = (t1 / 2.0).sin_cos();
    let (s2, c2) = (t2 / 2.0).sin_cos();
    let (sp, cp) = (t1 * t2 / 2.0).sin_cos();
    from_kets([
        real(cp * c1 * c2 - sp * c1 * s2),
        real(sp * c1 * c2 + cp * c1 * s2),
        real(cp * s1 * s2 - sp * s1 * c2),
        real(sp * s1 * s2 + cp * s1 * c2),
    ])
}

/// H on both qubits, RZ(t1), RZ(t2), then RZZ(t1 t2), up to global phase.
pub fn iqp_expansion(t1: f64, t2: f64) -> Vec<Complex64> {
    let p = t1 * t2;
    from_kets([polar(0.5, 0.0), polar(0.5, t2 + p), polar(0.5, t1 + p), polar(0.5, t1 + t2)])
}

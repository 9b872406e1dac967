//! Parameterized circuit families and state preparation.

use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::state::{Gate, StateVector, MAX_QUBITS};

pub const DEFAULT_INIT_SIGMA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzFamily {
    HardwareEfficient,
    RealAmplitude,
}

impl FromStr for AnsatzFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hwe" | "hardware-efficient" => Ok(AnsatzFamily::HardwareEfficient),
            "real" | "real-amplitude" => Ok(AnsatzFamily::RealAmplitude),
            other => Err(invalid(format!("unknown ansatz family {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Rot {
    X,
    Y,
    Z,
}

#[derive(Clone, Debug, PartialEq)]
enum Slot {
    Fixed(Gate),
    Rotation { kind: Rot, qubit: usize, param: usize },
}

/// A fixed gate program with numbered rotation slots. Every parameter drives
/// exactly one rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzCircuit {
    n: usize,
    layers: usize,
    family: AnsatzFamily,
    program: Vec<Slot>,
    param_count: usize,
}

struct Builder {
    program: Vec<Slot>,
    next: usize,
}

impl Builder {
    fn rot(&mut self, kind: Rot, qubit: usize) {
        self.program.push(Slot::Rotation {
            kind,
            qubit,
            param: self.next,
        });
        self.next += 1;
    }

    fn cnot(&mut self, control: usize, target: usize) {
        self.program.push(Slot::Fixed(Gate::Cnot { control, target }));
    }
}

fn check_width(n: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("ansatz needs at least 2 qubits, got {n}")));
    }
    if n > MAX_QUBITS {
        return Err(Error::Scale {
            what: "ansatz",
            n,
            limit: MAX_QUBITS,
        });
    }
    Ok(())
}

impl AnsatzCircuit {
    pub fn new(family: AnsatzFamily, n: usize, layers: usize) -> Result<Self> {
        match family {
            AnsatzFamily::HardwareEfficient => Self::hardware_efficient(n, layers),
            AnsatzFamily::RealAmplitude => Self::real_amplitude(n, layers),
        }
    }

    /// Per layer: RX, RY and RZ on every qubit, then a CNOT ring
    /// `0→1, 1→2, …, n−1→0`.
    pub fn hardware_efficient(n: usize, layers: usize) -> Result<Self> {
        check_width(n)?;
        let mut b = Builder {
            program: Vec::new(),
            next: 0,
        };
        for _ in 0..layers {
            for kind in [Rot::X, Rot::Y, Rot::Z] {
                for q in 0..n {
                    b.rot(kind, q);
                }
            }
            for q in 0..n {
                b.cnot(q, (q + 1) % n);
            }
        }
        Ok(Self::finish(n, layers, AnsatzFamily::HardwareEfficient, b))
    }

    /// Per layer: CNOTs on the pairs `(0,1), (2,3), …`, RY on every qubit,
    /// CNOTs on the shifted pairs `(1,2), (3,4), …`, then RY on the qubits
    /// touched by the shifted pairs. At four qubits this is six rotations per
    /// layer; odd widths leave the last qubit out of the first pairing.
    pub fn real_amplitude(n: usize, layers: usize) -> Result<Self> {
        check_width(n)?;
        let mut b = Builder {
            program: Vec::new(),
            next: 0,
        };
        let shifted: Vec<usize> = (1..n.saturating_sub(1)).step_by(2).collect();
        for _ in 0..layers {
            for q in (0..n - 1).step_by(2) {
                b.cnot(q, q + 1);
            }
            for q in 0..n {
                b.rot(Rot::Y, q);
            }
            for &q in &shifted {
                b.cnot(q, q + 1);
            }
            for &q in &shifted {
                b.rot(Rot::Y, q);
                b.rot(Rot::Y, q + 1);
            }
        }
        Ok(Self::finish(n, layers, AnsatzFamily::RealAmplitude, b))
    }

    fn finish(n: usize, layers: usize, family: AnsatzFamily, b: Builder) -> Self {
        AnsatzCircuit {
            n,
            layers,
            family,
            program: b.program,
            param_count: b.next,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn family(&self) -> AnsatzFamily {
        self.family
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    /// Length of the gate list, the only depth measure reported.
    pub fn gate_count(&self) -> usize {
        self.program.len()
    }

    /// The concrete gate list for `params`.
    pub fn gates(&self, params: &[f64]) -> Result<Vec<Gate>> {
        self.check_params(params)?;
        Ok(self
            .program
            .iter()
            .map(|slot| match slot {
                Slot::Fixed(g) => g.clone(),
                Slot::Rotation { kind, qubit, param } => {
                    let t = params[*param];
                    match kind {
                        Rot::X => Gate::RX(*qubit, t),
                        Rot::Y => Gate::RY(*qubit, t),
                        Rot::Z => Gate::RZ(*qubit, t),
                    }
                }
            })
            .collect())
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::Dimension {
                expected: self.param_count,
                found: params.len(),
            });
        }
        Ok(())
    }

    /// `V(θ)|0…0⟩`.
    pub fn prepare_state(&self, params: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::zero_state(self.n)?;
        s.apply_all(&self.gates(params)?)?;
        Ok(s)
    }

    /// I.i.d. `N(0, sigma²)` values; `sigma = 0` gives the zero vector.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R, sigma: f64) -> Result<Vec<f64>> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("initialization sigma must be non-negative, got {sigma}")));
        }
        let dist = Normal::new(0.0, sigma)
            .map_err(|e| invalid(format!("initialization sigma {sigma}: {e}")))?;
        Ok((0..self.param_count).map(|_| dist.sample(rng)).collect())
    }
}

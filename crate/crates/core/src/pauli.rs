//! Single-qubit Paulis and sparse signed Pauli products.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        (self.has_x() && other.has_z()) ^ (self.has_z() && other.has_x())
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A Hermitian Pauli product `±P_{q1} P_{q2} ...`, stored sparsely and sorted by qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PauliProduct {
    pub negative: bool,
    terms: Vec<(usize, Pauli)>,
}

impl PauliProduct {
    /// Identity terms are dropped; repeated qubits are not allowed.
    pub fn new(terms: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        let mut terms: Vec<(usize, Pauli)> =
            terms.into_iter().filter(|(_, p)| *p != Pauli::I).collect();
        terms.sort_by_key(|(q, _)| *q);
        debug_assert!(terms.windows(2).all(|w| w[0].0 != w[1].0));
        PauliProduct { negative: false, terms }
    }

    pub fn uniform(qubits: impl IntoIterator<Item = usize>, pauli: Pauli) -> Self {
        Self::new(qubits.into_iter().map(|q| (q, pauli)))
    }

    pub fn negated(mut self) -> Self {
        self.negative = !self.negative;
        self
    }

    pub fn terms(&self) -> &[(usize, Pauli)] {
        &self.terms
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|(q, _)| *q)
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        match self.terms.binary_search_by_key(&qubit, |(q, _)| *q) {
            Ok(i) => self.terms[i].1,
            Err(_) => Pauli::I,
        }
    }

    pub fn commutes_with(&self, other: &PauliProduct) -> bool {
        let (mut i, mut j) = (0, 0);
        let mut anti = false;
        while i < self.terms.len() && j < other.terms.len() {
            let (qa, pa) = self.terms[i];
            let (qb, pb) = other.terms[j];
            match qa.cmp(&qb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    anti ^= pa.anticommutes(pb);
                    i += 1;
                    j += 1;
                }
            }
        }
        !anti
    }
}

impl fmt::Display for PauliProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.negative { '-' } else { '+' })?;
        for (k, (q, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, "*")?;
            }
            write!(f, "{p}{q}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutation() {
        let zz = PauliProduct::uniform([0, 1], Pauli::Z);
        let xx = PauliProduct::uniform([0, 1], Pauli::X);
        let x0 = PauliProduct::uniform([0], Pauli::X);
        assert!(zz.commutes_with(&xx));
        assert!(!zz.commutes_with(&x0));
        let y = PauliProduct::new([(0, Pauli::Y)]);
        assert!(!y.commutes_with(&x0));
        assert!(y.commutes_with(&y));
    }

    #[test]
    fn display() {
        let p = PauliProduct::new([(3, Pauli::X), (0, Pauli::Y), (1, Pauli::I)]).negated();
        assert_eq!(p.to_string(), "-Y0*X3");
        assert_eq!(p.get(3), Pauli::X);
        assert_eq!(p.get(1), Pauli::I);
    }
}

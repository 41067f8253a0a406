//! Rotated surface code patches.
//!
//! Data qubit `(r, c)` for `r, c in 0..d` sits at doubled coordinate `(2r, 2c)` and has
//! index `r * d + c`. Plaquette `(i, j)` for `i, j in 0..=d` covers the data qubits
//! `{i-1, i} x {j-1, j}` that exist; its ancilla sits at `(2i - 1, 2j - 1)`. Plaquettes
//! with `i + j` even are X-type. Weight-2 boundary plaquettes are X-type on the top and
//! bottom edges and Z-type on the left and right edges, so the logical Z runs
//! horizontally and the logical X vertically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliProduct};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StabiliserKind {
    X,
    Z,
}

impl StabiliserKind {
    pub fn pauli(self) -> Pauli {
        match self {
            StabiliserKind::X => Pauli::X,
            StabiliserKind::Z => Pauli::Z,
        }
    }
}

/// Corner slots of a plaquette, in `[NW, NE, SW, SE]` order.
pub type Corners = [Option<usize>; 4];

const NW: usize = 0;
const NE: usize = 1;
const SW: usize = 2;
const SE: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabiliser {
    pub kind: StabiliserKind,
    pub corners: Corners,
    /// Doubled-lattice coordinate of the measurement ancilla.
    pub ancilla: (i32, i32),
}

impl Stabiliser {
    pub fn support(&self) -> Vec<usize> {
        self.corners.iter().flatten().copied().collect()
    }

    pub fn weight(&self) -> usize {
        self.corners.iter().flatten().count()
    }

    /// Data qubit touched in each of the four CX layers.
    ///
    /// X-type checks go NW, NE, SW, SE and Z-type checks NW, SW, NE, SE. Hook errors
    /// from the last two CXs then run perpendicular to the logical of the same type.
    pub fn schedule(&self) -> [Option<usize>; 4] {
        let c = &self.corners;
        match self.kind {
            StabiliserKind::X => [c[NW], c[NE], c[SW], c[SE]],
            StabiliserKind::Z => [c[NW], c[SW], c[NE], c[SE]],
        }
    }

    pub fn as_product(&self) -> PauliProduct {
        PauliProduct::uniform(self.support(), self.kind.pauli())
    }
}

#[derive(Clone, Debug)]
pub struct SurfaceCodePatch {
    pub distance: usize,
    pub data_qubits: Vec<(i32, i32)>,
    pub stabilisers: Vec<Stabiliser>,
    /// Horizontal chain along the top row.
    pub logical_z: Vec<usize>,
    /// Vertical chain along the left column.
    pub logical_x: Vec<usize>,
}

impl SurfaceCodePatch {
    pub fn num_data(&self) -> usize {
        self.data_qubits.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.data_qubits.len() + self.stabilisers.len()
    }

    /// Qubit index of the ancilla measuring stabiliser `s`.
    pub fn ancilla_qubit(&self, s: usize) -> usize {
        self.num_data() + s
    }

    pub fn ancilla_qubits(&self) -> Vec<(i32, i32)> {
        self.stabilisers.iter().map(|s| s.ancilla).collect()
    }

    pub fn x_stabilisers(&self) -> Vec<Vec<usize>> {
        self.of_kind(StabiliserKind::X)
    }

    pub fn z_stabilisers(&self) -> Vec<Vec<usize>> {
        self.of_kind(StabiliserKind::Z)
    }

    fn of_kind(&self, kind: StabiliserKind) -> Vec<Vec<usize>> {
        self.stabilisers
            .iter()
            .filter(|s| s.kind == kind)
            .map(Stabiliser::support)
            .collect()
    }

    pub fn logical_z_product(&self) -> PauliProduct {
        PauliProduct::uniform(self.logical_z.iter().copied(), Pauli::Z)
    }

    pub fn logical_x_product(&self) -> PauliProduct {
        PauliProduct::uniform(self.logical_x.iter().copied(), Pauli::X)
    }

    /// `Y_L = i X_L Z_L`: Y on the shared corner qubit, X and Z on the remaining parts of
    /// the two chains, with a `+` sign.
    pub fn logical_y_product(&self) -> PauliProduct {
        let mut terms: Vec<(usize, Pauli)> = Vec::new();
        for &q in &self.logical_x {
            if self.logical_z.contains(&q) {
                terms.push((q, Pauli::Y));
            } else {
                terms.push((q, Pauli::X));
            }
        }
        for &q in &self.logical_z {
            if !self.logical_x.contains(&q) {
                terms.push((q, Pauli::Z));
            }
        }
        PauliProduct::new(terms)
    }

    /// Checks the structural invariants: counts, pairwise commutation, logical weights
    /// and commutation relations.
    pub fn verify(&self) -> std::result::Result<(), String> {
        let d = self.distance;
        if self.data_qubits.len() != d * d {
            return Err(format!("expected {} data qubits, found {}", d * d, self.data_qubits.len()));
        }
        if self.stabilisers.len() != d * d - 1 {
            return Err(format!("expected {} stabilisers, found {}", d * d - 1, self.stabilisers.len()));
        }
        let prods: Vec<PauliProduct> = self.stabilisers.iter().map(Stabiliser::as_product).collect();
        for (a, pa) in prods.iter().enumerate() {
            for (b, pb) in prods.iter().enumerate().skip(a + 1) {
                if !pa.commutes_with(pb) {
                    return Err(format!("stabilisers {a} and {b} anticommute"));
                }
            }
        }
        let lz = self.logical_z_product();
        let lx = self.logical_x_product();
        if lz.weight() != d || lx.weight() != d {
            return Err("logical operators must have weight d".into());
        }
        for (s, p) in prods.iter().enumerate() {
            if !p.commutes_with(&lz) || !p.commutes_with(&lx) {
                return Err(format!("stabiliser {s} anticommutes with a logical"));
            }
        }
        if lz.commutes_with(&lx) {
            return Err("logical X and Z commute".into());
        }
        Ok(())
    }
}

/// Builds the distance-`d` rotated surface code patch.
pub fn build_patch(d: usize) -> Result<SurfaceCodePatch> {
    if d < 2 {
        return Err(Error::InvalidDistance(d));
    }
    let di = d as i64;
    let data_index = |r: i64, c: i64| -> Option<usize> {
        (0..di).contains(&r).then_some(())?;
        (0..di).contains(&c).then_some(())?;
        Some((r * di + c) as usize)
    };

    let mut data_qubits = Vec::with_capacity(d * d);
    for r in 0..d {
        for c in 0..d {
            data_qubits.push((2 * r as i32, 2 * c as i32));
        }
    }

    let mut stabilisers = Vec::with_capacity(d * d - 1);
    for i in 0..=di {
        for j in 0..=di {
            let kind = if (i + j) % 2 == 0 { StabiliserKind::X } else { StabiliserKind::Z };
            let on_row_edge = i == 0 || i == di;
            let on_col_edge = j == 0 || j == di;
            let keep = match (on_row_edge, on_col_edge) {
                (false, false) => true,
                (true, true) => false,
                (true, false) => kind == StabiliserKind::X,
                (false, true) => kind == StabiliserKind::Z,
            };
            if !keep {
                continue;
            }
            let corners = [
                data_index(i - 1, j - 1),
                data_index(i - 1, j),
                data_index(i, j - 1),
                data_index(i, j),
            ];
            stabilisers.push(Stabiliser {
                kind,
                corners,
                ancilla: (2 * i as i32 - 1, 2 * j as i32 - 1),
            });
        }
    }

    let logical_z = (0..d).collect();
    let logical_x = (0..d).map(|r| r * d).collect();

    Ok(SurfaceCodePatch { distance: d, data_qubits, stabilisers, logical_z, logical_x })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_distance() {
        assert!(matches!(build_patch(1), Err(Error::InvalidDistance(1))));
        assert!(matches!(build_patch(0), Err(Error::InvalidDistance(0))));
    }

    #[test]
    fn distance_three_counts() {
        let p = build_patch(3).unwrap();
        assert_eq!(p.num_data(), 9);
        assert_eq!(p.stabilisers.len(), 8);
        assert_eq!(p.num_qubits(), 17);
        assert_eq!(p.x_stabilisers().len(), 4);
        assert_eq!(p.z_stabilisers().len(), 4);
    }

    #[test]
    fn distance_two_is_smallest() {
        let p = build_patch(2).unwrap();
        assert_eq!(p.num_data(), 4);
        assert_eq!(p.stabilisers.len(), 3);
        assert_eq!(p.logical_x.len(), 2);
        assert_eq!(p.logical_z.len(), 2);
        p.verify().unwrap();
    }

    #[test]
    fn thirteen_matches_qubit_table() {
        // 13 -> 337, 15 -> 449, ..., 25 -> 1249
        for (d, n) in [(13, 337), (15, 449), (17, 577), (19, 721), (21, 881), (23, 1057), (25, 1249)] {
            assert_eq!(build_patch(d).unwrap().num_qubits(), n);
        }
    }

    #[test]
    fn boundary_and_bulk_weights() {
        for d in 2..=9 {
            let p = build_patch(d).unwrap();
            for s in &p.stabilisers {
                let (r, c) = s.ancilla;
                let edge = r < 0 || c < 0 || r > 2 * (d as i32 - 1) || c > 2 * (d as i32 - 1);
                assert_eq!(s.weight(), if edge { 2 } else { 4 });
            }
        }
    }

    #[test]
    fn even_distance_has_one_extra_z() {
        for d in [2, 4, 6, 8, 10] {
            let p = build_patch(d).unwrap();
            assert_eq!(p.z_stabilisers().len(), p.x_stabilisers().len() + 1);
        }
        for d in [3, 5, 7] {
            let p = build_patch(d).unwrap();
            assert_eq!(p.z_stabilisers().len(), p.x_stabilisers().len());
        }
    }

    #[test]
    fn y_logical_commutes_with_stabilisers() {
        let p = build_patch(5).unwrap();
        let y = p.logical_y_product();
        assert_eq!(y.weight(), 2 * 5 - 1);
        assert!(p.stabilisers.iter().all(|s| s.as_product().commutes_with(&y)));
        assert!(!y.commutes_with(&p.logical_x_product()));
        assert!(!y.commutes_with(&p.logical_z_product()));
    }

    #[test]
    fn schedule_layers_touch_each_data_qubit_once() {
        for d in 2..=7 {
            let p = build_patch(d).unwrap();
            for layer in 0..4 {
                let mut seen = vec![false; p.num_data()];
                for s in &p.stabilisers {
                    if let Some(q) = s.schedule()[layer] {
                        assert!(!seen[q], "d={d} layer={layer} qubit={q}");
                        seen[q] = true;
                    }
                }
            }
        }
    }
}

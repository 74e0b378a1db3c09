use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::compiler::IsingHamiltonian;
use crate::error::{invalid, Result};

const MAX_PAIRING_ATTEMPTS: usize = 100_000;

/// Simple graph on vertices `1..=n` in which every vertex has the same degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGraph {
    n: usize,
    degree: usize,
    edges: Vec<(usize, usize)>,
}

impl RegularGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Attaches an independent fair ±1 coupling to each edge.
    pub fn with_random_couplings<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<IsingHamiltonian> {
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| (i, j, if rng.gen::<bool>() { 1 } else { -1 }))
            .collect();
        IsingHamiltonian::new(self.n, edges)
    }
}

/// Pairing-model sample: shuffle `n·degree` stubs, pair them off, retry on
/// self-loops or repeated edges.
pub fn random_regular_graph<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Result<RegularGraph> {
    if degree >= n {
        return Err(invalid(format!("degree {degree} must be below n = {n}")));
    }
    if !(n * degree).is_multiple_of(2) {
        return Err(invalid(format!("n·degree = {} is odd", n * degree)));
    }
    let mut stubs: Vec<usize> = (1..=n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    'attempt: for _ in 0..MAX_PAIRING_ATTEMPTS {
        stubs.shuffle(rng);
        let mut edges = BTreeSet::new();
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !edges.insert((a, b)) {
                continue 'attempt;
            }
        }
        return Ok(RegularGraph {
            n,
            degree,
            edges: edges.into_iter().collect(),
        });
    }
    Err(invalid("pairing model did not produce a simple graph"))
}

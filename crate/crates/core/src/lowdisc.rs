//! Scrambled Halton sequences.
//!
//! Each dimension uses a prime base with a random digit permutation (zero is
//! kept fixed so the radical inverse stays finite) followed by a random
//! Cranley–Patterson shift. Given the same generator state the point set is
//! identical.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng::Rng;
use crate::space::Bounds;

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

struct ScrambledHalton {
    bases: Vec<u64>,
    perms: Vec<Vec<u64>>,
    shifts: Vec<f64>,
}

impl ScrambledHalton {
    fn new(dim: usize, rng: &mut Rng) -> Self {
        let bases = first_primes(dim);
        let perms = bases
            .iter()
            .map(|&b| {
                let mut tail: Vec<u64> = (1..b).collect();
                tail.shuffle(rng);
                std::iter::once(0).chain(tail).collect()
            })
            .collect();
        let shifts = (0..dim).map(|_| rng.random::<f64>()).collect();
        ScrambledHalton { bases, perms, shifts }
    }

    fn point(&self, index: u64) -> Vec<f64> {
        self.bases
            .iter()
            .zip(&self.perms)
            .zip(&self.shifts)
            .map(|((&b, perm), &shift)| {
                let mut i = index;
                let mut scale = 1.0 / b as f64;
                let mut v = 0.0;
                while i > 0 {
                    v += perm[(i % b) as usize] as f64 * scale;
                    i /= b;
                    scale /= b as f64;
                }
                let s = v + shift;
                s - s.floor()
            })
            .collect()
    }
}

/// `n` quasi-random points in the unit cube `[0, 1)^dim`.
pub fn unit_points(dim: usize, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let seq = ScrambledHalton::new(dim, rng);
    (1..=n as u64).map(|i| seq.point(i)).collect()
}

/// `n` quasi-random points mapped into `bounds`.
pub fn points_in(bounds: &Bounds, n: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    unit_points(bounds.dim(), n, rng).iter().map(|u| bounds.from_unit(u)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn points_are_in_unit_cube_and_distinct() {
        let pts = unit_points(6, 200, &mut seeded(3));
        for p in &pts {
            assert!(p.iter().all(|&v| (0.0..1.0).contains(&v)));
        }
        for i in 0..pts.len() {
            for j in 0..i {
                assert_ne!(pts[i], pts[j]);
            }
        }
    }

    #[test]
    fn one_dimensional_marginal_is_balanced() {
        let pts = unit_points(3, 512, &mut seeded(11));
        for d in 0..3 {
            let below = pts.iter().filter(|p| p[d] < 0.5).count();
            assert!((246..=266).contains(&below), "dim {d}: {below}");
        }
    }

    #[test]
    fn primes() {
        assert_eq!(first_primes(6), vec![2, 3, 5, 7, 11, 13]);
    }
}

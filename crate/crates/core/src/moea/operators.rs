use rand::seq::index;
use rand::Rng;

use super::{MoeaConfig, MoeaError};
use crate::chromosome::Chromosome;

/// Probability that a bit is set in the initial population:
/// `min(0.5, 100 / w)` unless overridden.
pub fn initial_density(w: usize, cfg: &MoeaConfig) -> f64 {
    cfg.init_density.unwrap_or_else(|| (100.0 / w.max(1) as f64).min(0.5))
}

pub fn initialize<R: Rng + ?Sized>(w: usize, cfg: &MoeaConfig, rng: &mut R) -> Vec<Chromosome> {
    let p = initial_density(w, cfg);
    (0..cfg.population_size)
        .map(|_| Chromosome::new((0..w).map(|_| rng.gen::<f64>() < p).collect()))
        .collect()
}

/// Half-uniform crossover: of the `H` positions where the parents differ,
/// exactly `floor(H / 2)`, chosen uniformly without replacement, are
/// exchanged.
pub fn hux_crossover<R: Rng + ?Sized>(
    p1: &Chromosome,
    p2: &Chromosome,
    rng: &mut R,
) -> Result<(Chromosome, Chromosome), MoeaError> {
    if p1.len() != p2.len() {
        return Err(MoeaError::LengthMismatch { left: p1.len(), right: p2.len() });
    }
    let differing: Vec<usize> = (0..p1.len()).filter(|&i| p1.get(i) != p2.get(i)).collect();
    let (mut c1, mut c2) = (p1.clone(), p2.clone());
    let h = differing.len();
    for pick in index::sample(rng, h, h / 2) {
        let i = differing[pick];
        c1.flip(i);
        c2.flip(i);
    }
    Ok((c1, c2))
}

/// Flips each bit independently with probability `p`.
pub fn bit_flip_mutation<R: Rng + ?Sized>(c: &Chromosome, p: f64, rng: &mut R) -> Chromosome {
    let mut out = c.clone();
    for i in 0..out.len() {
        if rng.gen::<f64>() < p {
            out.flip(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn cfg(density: f64) -> MoeaConfig {
        MoeaConfig { population_size: 20, init_density: Some(density), ..Default::default() }
    }

    #[test]
    fn initialize_extremes() {
        let mut r = rng::stream(0, &[]);
        assert!(initialize(8, &cfg(1.0), &mut r).iter().all(|c| *c == Chromosome::ones(8)));
        assert!(initialize(8, &cfg(0.0), &mut r).iter().all(|c| *c == Chromosome::zeros(8)));
    }

    #[test]
    fn initialize_sparse_density() {
        let mut r = rng::stream(21, &[]);
        let pop = initialize(1000, &cfg(0.05), &mut r);
        let mean = pop.iter().map(Chromosome::count_ones).sum::<usize>() as f64 / pop.len() as f64;
        assert!((35.0..=65.0).contains(&mean), "{mean}");
        let default = MoeaConfig::default();
        assert_eq!(initial_density(1000, &default), 0.1);
        assert_eq!(initial_density(50, &default), 0.5);
    }

    #[test]
    fn hux_fixtures() {
        let mut r = rng::stream(1, &[]);
        let p = Chromosome::from_indices(6, &[0, 3]);
        assert_eq!(hux_crossover(&p, &p, &mut r).unwrap(), (p.clone(), p.clone()));

        let (a, b) = (Chromosome::zeros(4), Chromosome::ones(4));
        let (c1, c2) = hux_crossover(&a, &b, &mut r).unwrap();
        assert_eq!(c1.hamming(&a), 2);
        assert_eq!(c2.hamming(&b), 2);

        let (a, b) = (Chromosome::from_indices(3, &[0]), Chromosome::from_indices(3, &[0, 2]));
        assert_eq!(hux_crossover(&a, &b, &mut r).unwrap(), (a.clone(), b.clone()));

        assert!(hux_crossover(&Chromosome::zeros(2), &Chromosome::zeros(3), &mut r).is_err());
    }

    #[test]
    fn mutation_extremes() {
        let mut r = rng::stream(2, &[]);
        let c = Chromosome::from_indices(5, &[1, 2]);
        assert_eq!(bit_flip_mutation(&c, 0.0, &mut r), c);
        assert_eq!(bit_flip_mutation(&c, 1.0, &mut r), Chromosome::from_indices(5, &[0, 3, 4]));
    }

    #[test]
    fn mutation_flip_count_concentrates() {
        // Binomial(10000, 0.02): mean 200, sd 14; [140, 260] is beyond 4 sd.
        let c = Chromosome::zeros(10_000);
        for seed in 0..100 {
            let mut r = rng::stream(seed, &[]);
            let flips = bit_flip_mutation(&c, 0.02, &mut r).count_ones();
            assert!((140..=260).contains(&flips), "seed {seed}: {flips}");
        }
    }

    proptest! {
        #[test]
        fn hux_preserves_agreement(a in proptest::collection::vec(any::<bool>(), 1..64), mask in any::<u64>(), seed in any::<u64>()) {
            let b: Vec<bool> = a.iter().enumerate().map(|(i, &x)| x ^ ((mask >> (i % 64)) & 1 == 1)).collect();
            let (p1, p2) = (Chromosome::new(a), Chromosome::new(b));
            let h = p1.hamming(&p2);
            let (c1, c2) = hux_crossover(&p1, &p2, &mut rng::stream(seed, &[])).unwrap();
            prop_assert_eq!(c1.hamming(&p1), h / 2);
            prop_assert_eq!(c2.hamming(&p2), h / 2);
            for i in 0..p1.len() {
                if p1.get(i) == p2.get(i) {
                    prop_assert_eq!(c1.get(i), p1.get(i));
                    prop_assert_eq!(c2.get(i), p1.get(i));
                } else {
                    prop_assert_ne!(c1.get(i), c2.get(i));
                }
            }
        }
    }
}

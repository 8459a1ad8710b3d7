use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Standard normal variates from a counter-based ChaCha stream.
///
/// `NormalStream::new(seed, stream)` is a pure function of its two keys, so
/// ensemble column `j` can draw from stream `j` on any thread and still
/// reproduce the same numbers.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn next_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = self.next_normal());
    }

    pub fn vector(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_normal()).collect()
    }
}

/// `n` i.i.d. standard normals from stream 0 of `seed`.
pub fn gaussian_vector(seed: u64, n: usize) -> Vec<f64> {
    NormalStream::new(seed, 0).vector(n)
}

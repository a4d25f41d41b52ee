//! Trainable parameter tensors.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; n],
            grad: None,
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: vec![v; n],
            grad: None,
        }
    }

    /// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Self {
        let n: usize = shape.iter().product();
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Tensor {
            shape: shape.to_vec(),
            values: (0..n).map(|_| rng.gen_range(-bound..bound)).collect(),
            grad: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Gradient buffer, allocated on first use and shaped like the values.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.values.len()]);
        }
        self.grad.as_mut().unwrap()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// 2-D indexing helper for [rows, cols] tensors.
    #[inline]
    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.shape[1] + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grad_matches_value_shape() {
        let mut t = Tensor::zeros(&[3, 4]);
        assert!(t.grad.is_none());
        t.grad_mut()[5] = 1.0;
        assert_eq!(t.grad.as_ref().unwrap().len(), t.values.len());
    }

    #[test]
    fn uniform_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Tensor::uniform(&[64, 16], 16, &mut rng);
        let bound = 1.0 / 4.0;
        assert!(t.values.iter().all(|v| v.abs() <= bound));
        assert!(t.values.iter().any(|v| v.abs() > bound * 0.5));
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = Tensor::uniform(&[8, 8], 8, &mut ChaCha8Rng::seed_from_u64(42));
        let b = Tensor::uniform(&[8, 8], 8, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a.values, b.values);
    }
}

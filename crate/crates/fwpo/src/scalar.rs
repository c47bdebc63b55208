//! Scalar abstraction for the numeric kernels.
//!
//! The geometry, network, and tabular modules are written against [`Scalar`]
//! so the same kernels instantiate at `f32` or `f64`. The crate root exports
//! `f64` aliases, which is what the agents, environments, and harness use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar type (`f32` or `f64`).
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Sum
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use crate::geometry::ConstraintSet;
    use crate::neural::{DenseNet, OutputActivation};
    use crate::tabular::{self, synthetic::QuadraticBandit, TabularPolicy};
    use rand::SeedableRng;

    // The kernels instantiate at both float widths; f32 gets a smoke pass
    // with loosened tolerances.
    #[test]
    fn kernels_instantiate_at_f32() {
        let set = ConstraintSet::<f32>::box_set(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(set.lmo(&[3.0, -2.0]).unwrap(), vec![1.0, -1.0]);
        let y = set.project(&[2.0, 0.5]).unwrap();
        assert_eq!(y, vec![1.0, 0.5]);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::<f32>::init(&[2, 8, 1], OutputActivation::Identity, &mut rng);
        let out = net.forward(&[0.5, -0.25]);
        assert!(out[0].is_finite());
        let grads = net.backward(&[0.5, -0.25], &[1.0]);
        assert_eq!(grads.input.len(), 2);

        let bandit = QuadraticBandit::<f32>::default_2d();
        let pi0 = TabularPolicy::new(&bandit, vec![vec![-0.5, 0.5]]).unwrap();
        let (_, records) = tabular::run_fwpo(&bandit, pi0, 50).unwrap();
        assert!(records.last().unwrap().effective_gap < 0.05);
    }
}

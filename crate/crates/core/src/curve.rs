/// Anything that maps a duration to a probability of cure.
pub trait Curve {
    fn probability(&self, duration: f64) -> f64;
}

impl<C: Curve + ?Sized> Curve for &C {
    fn probability(&self, duration: f64) -> f64 {
        (**self).probability(duration)
    }
}

/// Adapts a closure to [`Curve`].
pub struct FnCurve<F>(pub F);

impl<F: Fn(f64) -> f64> Curve for FnCurve<F> {
    fn probability(&self, duration: f64) -> f64 {
        (self.0)(duration)
    }
}

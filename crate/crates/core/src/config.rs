/// Numerical thresholds used by the Prony fits and the window searches.
///
/// Every threshold is relative: to `sigma_1` for ranks, to the filter norm
/// for root tests, and to the sup-norm of the observed signal or window
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Singular values below `rank * sigma_1` count as zero.
    pub rank: f64,
    /// A grid node is a root iff `|P| <= root * (1 + sum |h_k|)`.
    pub root: f64,
    /// Residual entries below `zero * ||y||_inf` count as zero.
    pub zero: f64,
    /// Recovered weights below `amplitude * ||window||_inf` reject the fit.
    pub amplitude: f64,
    /// Resynthesized window must match the samples to `window_fit * ||window||_inf`.
    pub window_fit: f64,
    /// Returned solutions must resynthesize `y` to `resynthesis * ||y||_inf`.
    pub resynthesis: f64,
    /// Two discoveries of the same supports must agree to this relative level.
    pub coefficient_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-8,
            root: 1e-7,
            zero: 1e-8,
            amplitude: 1e-9,
            window_fit: 1e-6,
            resynthesis: 1e-8,
            coefficient_match: 1e-8,
        }
    }
}

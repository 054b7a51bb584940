/// Loop filter numerator driven by the phase error.
pub const PLL_NUM: [f64; 3] = [0.0011, -0.001, 0.0];
/// Double pole at z = 1 (type-2 loop).
pub const PLL_DEN: [f64; 3] = [1.0, -2.0, 1.0];

/// Second-order phase tracker: `theta` is the output of the difference
/// equation `den[0] theta_k = num . [phi_k, phi_{k-1}, phi_{k-2}]
/// - den[1] theta_{k-1} - den[2] theta_{k-2}`.
///
/// `theta` is kept unwrapped; callers wrap only where they rotate samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Pll {
    num: [f64; 3],
    den: [f64; 3],
    phi_hist: [f64; 2],
    theta_hist: [f64; 2],
}

impl Default for Pll {
    fn default() -> Self {
        Self::new(PLL_NUM, PLL_DEN)
    }
}

impl Pll {
    pub fn new(num: [f64; 3], den: [f64; 3]) -> Self {
        assert!(den[0] != 0.0, "leading denominator coefficient must be nonzero");
        Self { num, den, phi_hist: [0.0; 2], theta_hist: [0.0; 2] }
    }

    pub fn theta(&self) -> f64 {
        self.theta_hist[0]
    }

    /// Feeds one phase error and returns the new phase estimate.
    pub fn step(&mut self, phi: f64) -> f64 {
        let theta = (self.num[0] * phi + self.num[1] * self.phi_hist[0] + self.num[2] * self.phi_hist[1]
            - self.den[1] * self.theta_hist[0]
            - self.den[2] * self.theta_hist[1])
            / self.den[0];
        self.phi_hist = [phi, self.phi_hist[0]];
        self.theta_hist = [theta, self.theta_hist[0]];
        theta
    }
}

/// Functional form of [`Pll::step`].
pub fn pll_step(state: &mut Pll, phase_error: f64) -> f64 {
    state.step(phase_error)
}

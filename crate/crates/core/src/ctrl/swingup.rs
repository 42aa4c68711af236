//! Cart-pole model, energy-shaping swing-up and the latched LQR switch.
//!
//! State is `[x, v, theta, omega]` with `theta = 0` hanging down.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ControlAffine;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub length: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self { gravity: 10.0, length: 2.0, cart_mass: 5.0, pole_mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPole {
    pub params: CartPoleParams,
}

impl CartPole {
    pub fn new(params: CartPoleParams) -> Self {
        Self { params }
    }

    fn denominator(&self, theta: f64) -> f64 {
        let p = &self.params;
        p.cart_mass + p.pole_mass * theta.sin().powi(2)
    }

    /// Jacobians `(A, B)` at the upright equilibrium `theta = pi`.
    pub fn upright_linearization(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let CartPoleParams { gravity: g, length: l, cart_mass: mc, pole_mass: mp } = self.params;
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, mp * g / mc, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, (mc + mp) * g / (l * mc), 0.0,
        ]);
        let b = DMatrix::from_row_slice(4, 1, &[0.0, 1.0 / mc, 0.0, 1.0 / (l * mc)]);
        (a, b)
    }
}

impl ControlAffine for CartPole {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let CartPoleParams { gravity: g, length: l, pole_mass: mp, cart_mass: mc } = self.params;
        let (v, theta, omega) = (x[1], x[2], x[3]);
        let (s, c) = theta.sin_cos();
        let den = self.denominator(theta);
        let f_v = mp * s * (l * omega * omega + g * c) / den;
        let f_w = -(mp * l * omega * omega * c * s + (mc + mp) * g * s) / (l * den);
        DVector::from_vec(vec![v, f_v, omega, f_w])
    }

    fn input_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let theta = x[2];
        let den = self.denominator(theta);
        // the pole's angular response to a cart force scales with cos(theta)
        DMatrix::from_column_slice(4, 1, &[0.0, 1.0 / den, 0.0, -theta.cos() / (self.params.length * den)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingUpGains {
    pub k_e: f64,
    pub k_p: f64,
    pub k_d: f64,
}

/// Energy-shaping force with a PD term on the cart position.
pub fn energy_shaping_nominal(state: &DVector<f64>, gains: &SwingUpGains, params: &CartPoleParams) -> f64 {
    let CartPoleParams { gravity: g, length: l, cart_mass: mc, pole_mass: mp } = *params;
    let (x, v, theta, omega) = (state[0], state[1], state[2], state[3]);
    let (s, c) = theta.sin_cos();
    let energy_error = 0.5 * mp * l * l * omega * omega - mp * g * l - mp * g * l * c;
    let accel = gains.k_e * omega * c * energy_error - gains.k_p * x - gains.k_d * v;
    (mc + mp - mp * c * c) * accel - mp * g * s * c - mp * l * omega * omega * s
}

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchMode {
    Swing,
    Lqr,
}

/// Applies `u_d` until `||(v, theta, omega) - target||` drops to `eta`, then
/// `-K (p - p_d)` for good. Angles are compared modulo `2 pi`.
pub fn switched_controller(
    state: &DVector<f64>,
    u_d: f64,
    eta: f64,
    k_lqr: &DMatrix<f64>,
    target: &DVector<f64>,
    mode: SwitchMode,
) -> (f64, SwitchMode) {
    let mut err = state - target;
    err[2] = wrap_angle(err[2]);
    let mode = match mode {
        SwitchMode::Lqr => SwitchMode::Lqr,
        SwitchMode::Swing => {
            let dist = (err[1] * err[1] + err[2] * err[2] + err[3] * err[3]).sqrt();
            if dist <= eta {
                SwitchMode::Lqr
            } else {
                SwitchMode::Swing
            }
        }
    };
    match mode {
        SwitchMode::Swing => (u_d, mode),
        SwitchMode::Lqr => (-(k_lqr * &err)[0], mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(v: [f64; 4]) -> DVector<f64> {
        DVector::from_row_slice(&v)
    }

    #[test]
    fn nominal_examples() {
        let params = CartPoleParams::default();
        let gains = SwingUpGains { k_e: 0.3, k_p: 0.8, k_d: 1.0 };
        assert_eq!(energy_shaping_nominal(&state([0.0; 4]), &gains, &params), 0.0);
        assert_relative_eq!(energy_shaping_nominal(&state([0.0, 0.0, PI, 0.0]), &gains, &params), 0.0, epsilon = 1e-12);
        assert_relative_eq!(energy_shaping_nominal(&state([-1.0, 0.0, 0.0, 0.0]), &gains, &params), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn hanging_rest_is_an_equilibrium() {
        let cp = CartPole::new(CartPoleParams::default());
        let d = cp.derivative(&state([-1.0, 0.0, 0.0, 0.0]), &DVector::zeros(1));
        assert_eq!(d.amax(), 0.0);
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let cp = CartPole::new(CartPoleParams::default());
        let (a, b) = cp.upright_linearization();
        let x0 = state([0.3, 0.0, PI, 0.0]);
        let h = 1e-6;
        for j in 0..4 {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (cp.drift(&xp) - cp.drift(&xm)) / (2.0 * h);
            for i in 0..4 {
                assert_relative_eq!(a[(i, j)], col[i], epsilon = 1e-6);
            }
        }
        let g = cp.input_matrix(&x0);
        for i in 0..4 {
            assert_relative_eq!(b[(i, 0)], g[(i, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(0.5), 0.5);
        assert_relative_eq!(wrap_angle(2.0 * PI + 0.1), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn switch_latches() {
        let k = DMatrix::from_row_slice(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let target = state([1.0, 0.0, PI, 0.0]);
        let far = state([-1.0, 0.0, 0.0, 0.0]);
        assert_eq!(switched_controller(&far, 7.0, 1.0, &k, &target, SwitchMode::Swing), (7.0, SwitchMode::Swing));
        let at = state([0.0, 0.0, PI, 0.0]);
        let (u, mode) = switched_controller(&at, 7.0, 1.0, &k, &target, SwitchMode::Swing);
        assert_eq!(mode, SwitchMode::Lqr);
        assert_relative_eq!(u, 1.0, epsilon = 1e-12);
        let (_, mode) = switched_controller(&far, 7.0, 1.0, &k, &target, SwitchMode::Lqr);
        assert_eq!(mode, SwitchMode::Lqr);
    }

    #[test]
    fn switch_matches_angles_modulo_two_pi() {
        let k = DMatrix::zeros(1, 4);
        let target = state([1.0, 0.0, PI, 0.0]);
        for theta in [PI, 3.0 * PI, -PI] {
            let s = state([5.0, 0.0, theta, 0.0]);
            assert_eq!(switched_controller(&s, 0.0, 0.1, &k, &target, SwitchMode::Swing).1, SwitchMode::Lqr);
        }
    }
}

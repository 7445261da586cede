//! Constant-velocity Kalman filter over planar position, used as the
//! alternative motion model for track prediction.
//!
//! State is `[x, y, vx, vy]`. Process noise follows the white-acceleration
//! model; measurements are position only. Updates use the Joseph form and
//! re-symmetrize the covariance, which keeps it positive semidefinite over
//! long runs.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};

use crate::error::{Error, Result};

/// Standard deviation of the initial velocity prior, m/s. Wide enough that
/// the first few position measurements dominate the velocity estimate.
const INIT_VEL_STD: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct CvKalman {
    state: Vector4<f64>,
    cov: Matrix4<f64>,
    /// White-acceleration intensity, m/s^2.
    q: f64,
    /// Measurement noise std, m.
    r: f64,
    time: f64,
}

impl CvKalman {
    /// Starts a filter at the first position measurement. Position variance
    /// comes from the measurement noise; velocity starts at zero with a wide
    /// prior.
    pub fn new(time: f64, x: f64, y: f64, q: f64, r: f64) -> Result<Self> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::Config(format!(
                "process noise q must be finite and non-negative, got {q}"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!(
                "measurement noise r must be finite and positive, got {r}"
            )));
        }
        let mut cov = Matrix4::zeros();
        cov[(0, 0)] = r * r;
        cov[(1, 1)] = r * r;
        cov[(2, 2)] = INIT_VEL_STD * INIT_VEL_STD;
        cov[(3, 3)] = INIT_VEL_STD * INIT_VEL_STD;
        Ok(CvKalman {
            state: Vector4::new(x, y, 0.0, 0.0),
            cov,
            q,
            r,
            time,
        })
    }

    pub fn state(&self) -> Vector4<f64> {
        self.state
    }

    pub fn covariance(&self) -> Matrix4<f64> {
        self.cov
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn transition(dt: f64) -> Matrix4<f64> {
        let mut f = Matrix4::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        f
    }

    /// White-acceleration process noise for a step of `dt`, per axis:
    /// `q^2 * [[dt^4/4, dt^3/2], [dt^3/2, dt^2]]` on (position, velocity).
    fn process_noise(&self, dt: f64) -> Matrix4<f64> {
        let q2 = self.q * self.q;
        let dt2 = dt * dt;
        let p = q2 * dt2 * dt2 / 4.0;
        let pv = q2 * dt2 * dt / 2.0;
        let v = q2 * dt2;
        let mut m = Matrix4::zeros();
        m[(0, 0)] = p;
        m[(1, 1)] = p;
        m[(0, 2)] = pv;
        m[(2, 0)] = pv;
        m[(1, 3)] = pv;
        m[(3, 1)] = pv;
        m[(2, 2)] = v;
        m[(3, 3)] = v;
        m
    }

    /// Propagates the filter forward to `time`, which must not precede the
    /// filter's current time.
    pub fn predict_to(&mut self, time: f64) -> Result<()> {
        let dt = time - self.time;
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::Data(format!(
                "filter cannot step backwards (from {} to {time})",
                self.time
            )));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let f = Self::transition(dt);
        self.state = f * self.state;
        self.cov = f * self.cov * f.transpose() + self.process_noise(dt);
        self.symmetrize();
        self.time = time;
        Ok(())
    }

    /// State and covariance the filter would have at `time`, without
    /// mutating the filter.
    pub fn peek(&self, time: f64) -> Result<(Vector4<f64>, Matrix4<f64>)> {
        let mut copy = self.clone();
        copy.predict_to(time)?;
        Ok((copy.state, copy.cov))
    }

    /// Folds in a position measurement at the filter's current time.
    pub fn update(&mut self, x: f64, y: f64) -> Result<()> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Data("non-finite measurement".into()));
        }
        let h = Matrix2x4::new(
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0,
        );
        let r_mat = Matrix2::identity() * (self.r * self.r);
        let innovation = Vector2::new(x, y) - h * self.state;
        let s = h * self.cov * h.transpose() + r_mat;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Data("singular innovation covariance".into()))?;
        let gain: Matrix4x2<f64> = self.cov * h.transpose() * s_inv;

        self.state += gain * innovation;
        // Joseph form: (I - K H) P (I - K H)^T + K R K^T.
        let ikh = Matrix4::identity() - gain * h;
        self.cov = ikh * self.cov * ikh.transpose() + gain * r_mat * gain.transpose();
        self.symmetrize();
        Ok(())
    }

    fn symmetrize(&mut self) {
        self.cov = (self.cov + self.cov.transpose()) * 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn min_eigenvalue(m: &Matrix4<f64>) -> f64 {
        m.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn rejects_bad_noise_parameters() {
        assert!(CvKalman::new(0.0, 0.0, 0.0, -0.1, 0.1).is_err());
        assert!(CvKalman::new(0.0, 0.0, 0.0, 0.5, 0.0).is_err());
        assert!(CvKalman::new(0.0, 0.0, 0.0, f64::NAN, 0.1).is_err());
        assert!(CvKalman::new(0.0, 0.0, 0.0, 0.5, f64::INFINITY).is_err());
    }

    #[test]
    fn rejects_backward_steps_and_bad_measurements() {
        let mut kf = CvKalman::new(1.0, 0.0, 0.0, 0.5, 0.1).unwrap();
        assert!(kf.predict_to(0.5).is_err());
        assert!(kf.update(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn converges_to_constant_velocity_motion() {
        // Noiseless measurements of an object moving at (3, -1) m/s. After
        // ten updates the one-step-ahead prediction error is far below the
        // measurement noise floor.
        let (vx, vy) = (3.0, -1.0);
        let dt = 0.5;
        let mut kf = CvKalman::new(0.0, 0.0, 0.0, 0.5, 0.1).unwrap();
        for i in 1..=10 {
            let t = i as f64 * dt;
            kf.predict_to(t).unwrap();
            kf.update(vx * t, vy * t).unwrap();
        }
        let t_next = 11.0 * dt;
        let (state, _) = kf.peek(t_next).unwrap();
        let err = (state[0] - vx * t_next).hypot(state[1] - vy * t_next);
        assert!(err < 1e-6, "one-step prediction error {err}");
        assert!((state[2] - vx).abs() < 1e-5);
        assert!((state[3] - vy).abs() < 1e-5);
    }

    #[test]
    fn covariance_stays_symmetric_positive_semidefinite() {
        let mut kf = CvKalman::new(0.0, 0.0, 0.0, 0.5, 0.1).unwrap();
        let mut t = 0.0;
        for i in 0..2_000u64 {
            t += 0.5;
            kf.predict_to(t).unwrap();
            // A wobbling trajectory keeps innovations non-trivial.
            let phase = i as f64 * 0.37;
            kf.update(2.0 * t + phase.sin(), -1.5 * t + phase.cos())
                .unwrap();
            let cov = kf.covariance();
            assert!((cov - cov.transpose()).norm() < 1e-12);
            assert!(min_eigenvalue(&cov) >= -1e-9);
        }
    }

    #[test]
    fn stationary_object_stays_put() {
        let mut kf = CvKalman::new(0.0, 4.0, -2.0, 0.5, 0.1).unwrap();
        for i in 1..=20 {
            kf.predict_to(i as f64 * 0.5).unwrap();
            kf.update(4.0, -2.0).unwrap();
        }
        let (state, _) = kf.peek(11.0).unwrap();
        assert!((state[0] - 4.0).abs() < 1e-6);
        assert!((state[1] + 2.0).abs() < 1e-6);
        assert!(state[2].abs() < 1e-6);
        assert!(state[3].abs() < 1e-6);
    }

    #[test]
    fn peek_does_not_mutate_filter_state() {
        let mut kf = CvKalman::new(0.0, 0.0, 0.0, 0.5, 0.1).unwrap();
        kf.predict_to(0.5).unwrap();
        kf.update(1.0, 1.0).unwrap();
        let before = (kf.state(), kf.covariance(), kf.time());
        let _ = kf.peek(5.0).unwrap();
        assert_eq!(before, (kf.state(), kf.covariance(), kf.time()));
    }
}

//! Constant-velocity Kalman filter over `(cx, cy, w, h)` and their rates.
//!
//! Noise standard deviations are proportional to the box height, following the
//! SORT family of trackers.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
type Measurement = SVector<f64, 4>;
type MeasurementMatrix = SMatrix<f64, 4, 8>;

/// Height-relative standard deviation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanNoise {
    /// Process noise on position and size.
    pub position: f64,
    /// Process noise on the rates.
    pub velocity: f64,
    /// Measurement noise.
    pub measurement: f64,
    /// Initial uncertainty on the rates of a fresh track.
    pub initial_velocity: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        KalmanNoise {
            position: 1.0 / 20.0,
            velocity: 1.0 / 160.0,
            measurement: 1.0 / 20.0,
            initial_velocity: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    pub fn to_box(&self) -> BBox {
        state_to_box(self)
    }
}

#[derive(Debug, Clone)]
pub struct KalmanFilter {
    noise: KalmanNoise,
    transition: StateCovariance,
    observation: MeasurementMatrix,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        Self::new(KalmanNoise::default())
    }
}

impl KalmanFilter {
    pub fn new(noise: KalmanNoise) -> Self {
        let mut transition = StateCovariance::identity();
        for i in 0..4 {
            transition[(i, i + 4)] = 1.0;
        }
        let mut observation = MeasurementMatrix::zeros();
        for i in 0..4 {
            observation[(i, i)] = 1.0;
        }
        KalmanFilter {
            noise,
            transition,
            observation,
        }
    }

    pub fn noise(&self) -> &KalmanNoise {
        &self.noise
    }

    pub fn initiate(&self, bbox: &BBox) -> Result<KalmanState> {
        if !bbox.is_valid() || bbox.area() <= 0.0 {
            return Err(Error::DegenerateBox);
        }
        let (cx, cy) = bbox.center();
        let mut mean = StateVector::zeros();
        mean[0] = cx;
        mean[1] = cy;
        mean[2] = bbox.width;
        mean[3] = bbox.height;

        let h = bbox.height;
        let pos = 2.0 * self.noise.position * h;
        let vel = self.noise.initial_velocity * h;
        let std = [pos, pos, pos, pos, vel, vel, vel, vel];
        let covariance =
            StateCovariance::from_diagonal(&StateVector::from_iterator(std.iter().map(|s| s * s)));
        Ok(KalmanState { mean, covariance })
    }

    pub fn predict(&self, state: &KalmanState) -> KalmanState {
        let h = state.mean[3].max(0.0);
        let pos = self.noise.position * h;
        let vel = self.noise.velocity * h;
        let q = StateCovariance::from_diagonal(&StateVector::from_iterator(
            [pos, pos, pos, pos, vel, vel, vel, vel]
                .iter()
                .map(|s| s * s),
        ));
        let mut mean = self.transition * state.mean;
        clamp_size(&mut mean);
        let covariance =
            symmetrize(self.transition * state.covariance * self.transition.transpose() + q);
        KalmanState { mean, covariance }
    }

    /// Kalman correction against a measured box, using the Joseph form so the
    /// posterior stays symmetric positive semidefinite.
    pub fn update(&self, state: &KalmanState, measurement: &BBox) -> KalmanState {
        let (cx, cy) = measurement.center();
        let z = Measurement::new(cx, cy, measurement.width, measurement.height);
        let h = state.mean[3].max(0.0);
        let r_std = self.noise.measurement * h;
        let r = SMatrix::<f64, 4, 4>::identity() * (r_std * r_std);

        let hm = &self.observation;
        let s = hm * state.covariance * hm.transpose() + r;
        let s_inv = match s.cholesky() {
            Some(c) => c.inverse(),
            None => match s.try_inverse() {
                Some(inv) => inv,
                None => return state.clone(),
            },
        };
        let gain = state.covariance * hm.transpose() * s_inv;
        let innovation = z - hm * state.mean;
        let mut mean = state.mean + gain * innovation;
        clamp_size(&mut mean);

        let i_kh = StateCovariance::identity() - gain * hm;
        let covariance =
            symmetrize(i_kh * state.covariance * i_kh.transpose() + gain * r * gain.transpose());
        KalmanState { mean, covariance }
    }
}

fn clamp_size(mean: &mut StateVector) {
    mean[2] = mean[2].max(0.0);
    mean[3] = mean[3].max(0.0);
}

fn symmetrize(m: StateCovariance) -> StateCovariance {
    (m + m.transpose()) * 0.5
}

pub fn state_to_box(state: &KalmanState) -> BBox {
    BBox::from_center(state.mean[0], state.mean[1], state.mean[2], state.mean[3])
}

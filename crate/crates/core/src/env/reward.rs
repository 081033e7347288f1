use serde::{Deserialize, Serialize};

use super::EnvError;

/// Piecewise-linear proximity reward.
///
/// `-c_collide` up to the collision distance, rising linearly to `+c_near`
/// halfway between the collision distance and the view range, then falling
/// linearly to zero at the view range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardShape {
    pub c_collide: f32,
    pub c_near: f32,
    /// Twice the body radius.
    pub d_collide: f32,
}

impl RewardShape {
    pub fn new(c_collide: f32, c_near: f32, body_radius: f32) -> Self {
        Self {
            c_collide,
            c_near,
            d_collide: 2.0 * body_radius,
        }
    }

    pub fn peak(&self, range: f32) -> f32 {
        0.5 * (self.d_collide + range)
    }

    /// `f(d)` without the domain check; callers guarantee `d < range`.
    #[inline]
    pub(crate) fn eval(&self, d: f32, range: f32) -> f32 {
        if d <= self.d_collide {
            return -self.c_collide;
        }
        let peak = self.peak(range);
        if d <= peak {
            -self.c_collide + (self.c_near + self.c_collide) * (d - self.d_collide) / (peak - self.d_collide)
        } else {
            self.c_near * (range - d) / (range - peak)
        }
    }
}

/// Reward contribution of one neighbor at distance `d`, defined on `[0, range)`.
pub fn flock_reward_f(d: f32, shape: &RewardShape, range: f32) -> Result<f32, EnvError> {
    if !(d >= 0.0 && d < range) {
        return Err(EnvError::RewardDomain { d, range });
    }
    Ok(shape.eval(d, range))
}

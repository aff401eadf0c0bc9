//! User partitioning arithmetic.
//!
//! User `t` maps to group `t / P` and delay index `t mod P`; the delay grid
//! is `delay_index * delay_step`. Detection inverts the mapping, so a
//! detected delay only traces a user when it lands close enough to a grid
//! point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deployment parameters shared by embedder, detector, and harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeParams {
    pub total_users: usize,
    pub group_count: usize,
    pub users_per_group: usize,
    /// Segment length in samples; also the code length.
    pub frame_len: usize,
    /// Spacing between consecutive delay grid points, in samples.
    pub delay_step: usize,
    /// Embedding strength.
    pub alpha: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            total_users: 64,
            group_count: 16,
            users_per_group: 4,
            frame_len: 1024,
            delay_step: 20,
            alpha: 0.05,
        }
    }
}

impl SchemeParams {
    pub fn new(
        group_count: usize,
        users_per_group: usize,
        frame_len: usize,
        delay_step: usize,
        alpha: f64,
    ) -> Result<Self> {
        let params = Self {
            total_users: group_count * users_per_group,
            group_count,
            users_per_group,
            frame_len,
            delay_step,
            alpha,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_count == 0 || self.users_per_group == 0 {
            return Err(Error::InvalidParams(
                "group count and users per group must be >= 1".into(),
            ));
        }
        if self.total_users != self.group_count * self.users_per_group {
            return Err(Error::InvalidParams(format!(
                "total users {} != {} groups x {} users",
                self.total_users, self.group_count, self.users_per_group
            )));
        }
        if self.frame_len < 2 {
            return Err(Error::InvalidParams("frame length must be >= 2".into()));
        }
        if self.delay_step == 0 {
            return Err(Error::InvalidParams("delay step must be >= 1".into()));
        }
        if (self.users_per_group - 1) * self.delay_step >= self.frame_len {
            return Err(Error::InvalidParams(format!(
                "delay grid exceeds the frame: ({} - 1) * {} >= {}",
                self.users_per_group, self.delay_step, self.frame_len
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParams("alpha must be in (0, 1)".into()));
        }
        Ok(())
    }

    /// Delay grid point for a delay index.
    pub fn delay_of(&self, delay_index: usize) -> usize {
        delay_index * self.delay_step
    }
}

/// A user's position in the scheme: group, delay index, and grid delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserAssignment {
    pub user: usize,
    pub group: usize,
    pub delay_index: usize,
    pub delay: usize,
}

/// Resolve a user id into its (group, delay index, delay) triple.
pub fn assign_user(user: usize, params: &SchemeParams) -> Result<UserAssignment> {
    if user >= params.total_users {
        return Err(Error::UserOutOfRange {
            user,
            total: params.total_users,
        });
    }
    let group = user / params.users_per_group;
    let delay_index = user % params.users_per_group;
    Ok(UserAssignment {
        user,
        group,
        delay_index,
        delay: params.delay_of(delay_index),
    })
}

/// Inverse of [`assign_user`]: user id from (group, delay index).
pub fn user_from_parts(group: usize, delay_index: usize, params: &SchemeParams) -> Result<usize> {
    if group >= params.group_count || delay_index >= params.users_per_group {
        return Err(Error::PartsOutOfRange {
            group,
            index: delay_index,
            groups: params.group_count,
            per_group: params.users_per_group,
        });
    }
    Ok(group * params.users_per_group + delay_index)
}

/// Map a detected delay back onto the grid: `Some(j)` when the cyclic
/// distance to `j * delay_step` is within `tol` samples, `None` when the
/// delay is off-grid (a first-class miss, not an error). With
/// `tol < delay_step / 2` at most one index can match.
pub fn delay_to_index(detected_delay: usize, params: &SchemeParams, tol: usize) -> Option<usize> {
    if detected_delay >= params.frame_len {
        return None;
    }
    let n = params.frame_len;
    for j in 0..params.users_per_group {
        let grid = params.delay_of(j);
        let raw = detected_delay.abs_diff(grid);
        let dist = raw.min(n - raw);
        if dist <= tol {
            return Some(j);
        }
    }
    None
}

//! Re-expressing body-frame signals in the world frame.
//!
//! Quaternions are Hamilton, stored `w, x, y, z`, and rotate sensor-frame
//! vectors into the world frame: `v_world = q ⊗ v ⊗ q*`.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::data::{ChannelRole, SensorSequence, QUAT_NORM_TOLERANCE};
use crate::error::{Error, Result};

/// Standard gravity, world +z.
pub const GRAVITY: f64 = 9.80665;

fn unit(q: [f64; 4], index: usize) -> Result<UnitQuaternion<f64>> {
    let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
    let norm = raw.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > QUAT_NORM_TOLERANCE {
        return Err(Error::NonUnitQuaternion { index, norm });
    }
    Ok(UnitQuaternion::new_unchecked(raw))
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "{a} vector samples but {b} quaternion samples"
        )));
    }
    Ok(())
}

pub fn rotate_to_world(q: [f64; 4], v: [f64; 3]) -> Result<[f64; 3]> {
    let r = unit(q, 0)? * Vector3::from(v);
    Ok([r.x, r.y, r.z])
}

/// World-frame acceleration with gravity removed.
pub fn free_acceleration(acc: &[[f64; 3]], quat: &[[f64; 4]]) -> Result<Vec<[f64; 3]>> {
    check_lengths(acc.len(), quat.len())?;
    acc.iter()
        .zip(quat)
        .enumerate()
        .map(|(i, (a, q))| {
            let r = unit(*q, i)? * Vector3::from(*a);
            Ok([r.x, r.y, r.z - GRAVITY])
        })
        .collect()
}

/// World-frame angular velocity. No gravity term.
pub fn free_angular_velocity(gyr: &[[f64; 3]], quat: &[[f64; 4]]) -> Result<Vec<[f64; 3]>> {
    check_lengths(gyr.len(), quat.len())?;
    gyr.iter()
        .zip(quat)
        .enumerate()
        .map(|(i, (g, q))| {
            let r = unit(*q, i)? * Vector3::from(*g);
            Ok([r.x, r.y, r.z])
        })
        .collect()
}

fn gather<const N: usize>(seq: &SensorSequence, roles: &[ChannelRole; N]) -> Result<Vec<[f64; N]>> {
    let idx = roles
        .iter()
        .map(|r| {
            seq.channel_index(*r).ok_or_else(|| {
                Error::InvalidDataset(format!("sequence `{}` lacks channel {r}", seq.id))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..seq.len())
        .map(|t| std::array::from_fn(|k| seq.samples[[idx[k], t]]))
        .collect())
}

fn scatter(seq: &mut SensorSequence, roles: &[ChannelRole; 3], values: &[[f64; 3]]) {
    for (k, role) in roles.iter().enumerate() {
        let c = seq.channel_index(*role).expect("gathered earlier");
        for (t, v) in values.iter().enumerate() {
            seq.samples[[c, t]] = v[k];
        }
    }
}

/// Applies the requested freeing operations to a sequence carrying quaternions.
pub fn free_sequence(seq: &SensorSequence, acceleration: bool, angular_velocity: bool) -> Result<SensorSequence> {
    if !acceleration && !angular_velocity {
        return Ok(seq.clone());
    }
    let quat = gather(seq, &ChannelRole::QUAT).map_err(|_| {
        Error::InvalidDataset(format!(
            "sequence `{}`: freeing needs the quaternion channels",
            seq.id
        ))
    })?;
    let mut out = seq.clone();
    let wrap = |e: Error| match e {
        Error::NonUnitQuaternion { index, norm } => Error::InvalidSequence {
            id: seq.id.clone(),
            message: format!("quaternion norm {norm} at index {index}"),
        },
        other => other,
    };
    if acceleration {
        let acc = gather(seq, &ChannelRole::ACC)?;
        scatter(&mut out, &ChannelRole::ACC, &free_acceleration(&acc, &quat).map_err(wrap)?);
    }
    if angular_velocity {
        let gyr = gather(seq, &ChannelRole::GYR)?;
        scatter(&mut out, &ChannelRole::GYR, &free_angular_velocity(&gyr, &quat).map_err(wrap)?);
    }
    Ok(out)
}

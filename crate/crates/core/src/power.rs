//! Received/transmitted power in dBm.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// Power level in decibel-milliwatts.
///
/// Ordering uses `f64::total_cmp`, so the type is totally ordered even though
/// NaN is never produced by the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(f64);

impl PowerDbm {
    pub const fn new(dbm: f64) -> Self {
        PowerDbm(dbm)
    }

    pub const fn dbm(self) -> f64 {
        self.0
    }

    pub fn max(self, other: PowerDbm) -> PowerDbm {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for PowerDbm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.0.total_cmp(&other.0))
    }
}

/// Offsets a level by a number of decibels.
impl Add<f64> for PowerDbm {
    type Output = PowerDbm;

    fn add(self, db: f64) -> PowerDbm {
        PowerDbm(self.0 + db)
    }
}

impl Sub<f64> for PowerDbm {
    type Output = PowerDbm;

    fn sub(self, db: f64) -> PowerDbm {
        PowerDbm(self.0 - db)
    }
}

impl fmt::Display for PowerDbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dBm", self.0)
    }
}

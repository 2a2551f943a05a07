//! Byte quantities and affine size-versus-scale functions.

use serde::{Deserialize, Serialize};

/// Integer byte count.
pub type Bytes = u64;

/// Scale of a full-size actual run. Sample runs at 0.1% of the input sit at
/// scale 1.
pub const FULL_SCALE: f64 = 1000.0;

/// `intercept + slope * scale`, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeFn {
    pub intercept: f64,
    pub slope: f64,
}

impl SizeFn {
    pub const ZERO: SizeFn = SizeFn {
        intercept: 0.0,
        slope: 0.0,
    };

    pub fn new(intercept: f64, slope: f64) -> Self {
        SizeFn { intercept, slope }
    }

    /// Real-valued size at `scale`.
    pub fn eval(&self, scale: f64) -> f64 {
        self.intercept + self.slope * scale
    }

    /// Size at `scale` rounded half-up to whole bytes, floored at zero.
    pub fn bytes_at(&self, scale: f64) -> Bytes {
        round_bytes(self.eval(scale))
    }

    pub fn is_non_negative(&self) -> bool {
        self.intercept >= 0.0 && self.slope >= 0.0
    }
}

/// Rounds half-up to an integer byte count; negative and NaN inputs map to 0.
pub fn round_bytes(x: f64) -> Bytes {
    if x.is_nan() || x <= 0.0 {
        0
    } else {
        (x + 0.5).floor() as Bytes
    }
}

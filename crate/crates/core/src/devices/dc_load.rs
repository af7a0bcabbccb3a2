//! Data-center load: unity power factor constant power, positive sequence only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{SeqTriple, C64};

use std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcLoadParams {
    pub name: String,
    pub node: usize,
    /// Voltage magnitude (pu) below which the constant-power model is refused.
    pub v_min: f64,
}

/// `<i_DCp>_1 = P / (2 conj(<v_Np>_1))`, n and z zero. `v_min` is compared with the pu
/// magnitude `sqrt(2) |<v_Np>_1|`.
pub fn dc_load_current(v_p: C64, p_dc: f64, v_min: f64, bus: &str) -> Result<SeqTriple> {
    let v = SQRT_2 * v_p.norm();
    if v < v_min || !v.is_finite() {
        return Err(Error::VoltageCollapse { bus: bus.to_string(), v, v_min });
    }
    if p_dc == 0.0 {
        return Ok(SeqTriple::ZERO);
    }
    Ok(SeqTriple::new(p_dc / (2.0 * v_p.conj()), C64::default(), C64::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn zero_power() {
        let i = dc_load_current(C64::new(FRAC_1_SQRT_2, 0.0), 0.0, 0.5, "b").unwrap();
        assert_eq!(i, SeqTriple::ZERO);
    }

    #[test]
    fn power_recovered() {
        let v = C64::new(0.7071, 0.0);
        let i = dc_load_current(v, 1.0, 0.5, "b").unwrap();
        assert_abs_diff_eq!(i.p.re, 1.0 / (2.0 * 0.7071), epsilon = 1e-14);
        // instantaneous power of a positive-sequence DP pair
        assert_abs_diff_eq!(2.0 * (v.conj() * i.p).re, 1.0, epsilon = 1e-14);
        assert_eq!(i.n, C64::default());
        assert_eq!(i.z, C64::default());
    }

    #[test]
    fn unity_power_factor() {
        let v = C64::new(0.5, 0.5);
        let i = dc_load_current(v, 0.8, 0.5, "b").unwrap();
        let s = 2.0 * v * i.p.conj();
        assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.re, 0.8, epsilon = 1e-14);
    }

    #[test]
    fn collapse_guard() {
        let r = dc_load_current(C64::new(0.1, 0.0), 1.0, 0.5, "b");
        assert!(matches!(r, Err(Error::VoltageCollapse { .. })));
    }
}

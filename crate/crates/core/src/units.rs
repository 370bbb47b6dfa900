//! Frequencies are stored internally as angular frequencies in rad/ns and
//! times in ns. These helpers convert at the I/O boundary.

use std::f64::consts::TAU;

pub fn ghz(f: f64) -> f64 {
    TAU * f
}

pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e-3
}

pub fn to_ghz(w: f64) -> f64 {
    w / TAU
}

pub fn to_mhz(w: f64) -> f64 {
    w / TAU * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        assert!((to_mhz(mhz(350.0)) - 350.0).abs() < 1e-12);
        assert!((to_ghz(ghz(7.15)) - 7.15).abs() < 1e-12);
        assert!((ghz(1.0) - mhz(1000.0)).abs() < 1e-12);
    }
}

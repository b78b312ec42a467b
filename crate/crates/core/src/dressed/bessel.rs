//! Bessel functions of the first kind, `J_k(x)` for integer order.
//!
//! Miller's downward recurrence from well above the highest order needed,
//! normalized with `J0 + 2 Σ J_2k = 1`.

use crate::error::{Error, Result};

/// Largest supported `|k|`.
pub const MAX_ORDER: i32 = 50;
/// Largest supported `|x|`.
pub const MAX_ARGUMENT: f64 = 50.0;
/// Sideband sums run over `|k| ≤ SIDEBAND_TRUNCATION`.
pub const SIDEBAND_TRUNCATION: i32 = 40;

const RESCALE: f64 = 1e250;

fn check(k: i32, x: f64) -> Result<()> {
    if k.abs() > MAX_ORDER {
        return Err(Error::OutOfRange { what: "Bessel order", value: k as f64 });
    }
    if !x.is_finite() || x.abs() > MAX_ARGUMENT {
        return Err(Error::OutOfRange { what: "Bessel argument", value: x });
    }
    Ok(())
}

/// `J_0(x) … J_max(x)` for `x ≥ 0`.
fn miller(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = (max_order as f64).max(x);
    let mut start = (top + 20.0 + (40.0 * top).sqrt()) as usize;
    start += start % 2;
    let (mut above, mut here) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        // here = J_k, compute J_{k−1}
        let below = 2.0 * k as f64 / x * here - above;
        above = here;
        here = below;
        let order = k - 1;
        if order <= max_order {
            out[order] = here;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * here;
        }
        if here.abs() > RESCALE {
            above /= RESCALE;
            here /= RESCALE;
            norm /= RESCALE;
            for v in out.iter_mut() {
                *v /= RESCALE;
            }
        }
    }
    norm += here;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `J_k(x)` for `|k| ≤ 50`, `|x| ≤ 50`.
pub fn bessel_j(k: i32, x: f64) -> Result<f64> {
    check(k, x)?;
    Ok(BesselTable::compute(x, k.unsigned_abs() as usize).get(k))
}

/// `J_k′(x) = (J_{k−1}(x) − J_{k+1}(x))/2`.
pub fn bessel_j_derivative(k: i32, x: f64) -> Result<f64> {
    check(k, x)?;
    let t = BesselTable::compute(x, k.unsigned_abs() as usize + 1);
    Ok(0.5 * (t.get(k - 1) - t.get(k + 1)))
}

/// All orders `|k| ≤ max_order` at a fixed argument.
#[derive(Clone, Debug, PartialEq)]
pub struct BesselTable {
    x: f64,
    values: Vec<f64>,
}

impl BesselTable {
    pub fn new(x: f64, max_order: i32) -> Result<Self> {
        check(max_order, x)?;
        Ok(Self::compute(x, max_order.unsigned_abs() as usize))
    }

    fn compute(x: f64, max_order: usize) -> Self {
        let mut values = miller(max_order, x.abs());
        if x < 0.0 {
            for (k, v) in values.iter_mut().enumerate() {
                if k % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        Self { x, values }
    }

    pub fn argument(&self) -> f64 {
        self.x
    }

    pub fn max_order(&self) -> i32 {
        self.values.len() as i32 - 1
    }

    /// `J_k(x)`; zero beyond the tabulated orders.
    pub fn get(&self, k: i32) -> f64 {
        match self.values.get(k.unsigned_abs() as usize) {
            None => 0.0,
            Some(&v) if k < 0 && k % 2 != 0 => -v,
            Some(&v) => v,
        }
    }
}

use serde::Serialize;

use crate::error::{Error, Result};

/// Solve a 3×3 system by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Least squares in the basis `f(x) = [f0, f1, f2]`.
fn lstsq3<F: Fn(f64) -> [f64; 3]>(x: &[f64], y: &[f64], basis: F) -> Option<[f64; 3]> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let f = basis(xi);
        for r in 0..3 {
            aty[r] += f[r] * yi;
            for c in 0..3 {
                ata[r][c] += f[r] * f[c];
            }
        }
    }
    solve3(ata, aty)
}

/// Coefficients `[c0, c1, c2]` of `c0 + c1 x + c2 x²`.
pub(crate) fn polyfit2(points: &[(f64, f64)]) -> Option<[f64; 3]> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    lstsq3(&x, &y, |t| [1.0, t, t * t])
}

/// `y ≈ offset + amplitude·cos(ω x + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SinusoidFit {
    /// ω, rad per unit of x
    pub angular_frequency: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub r_squared: f64,
}

impl SinusoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (self.angular_frequency * x + self.phase).cos()
    }
}

fn check_xy(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 paired samples, got {} x and {} y",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    Ok(())
}

fn residual_ss(x: &[f64], y: &[f64], fit: &SinusoidFit) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| (b - fit.eval(a)).powi(2)).sum()
}

fn linear_fit(x: &[f64], y: &[f64], omega: f64) -> Option<SinusoidFit> {
    let [c, a, b] = lstsq3(x, y, |t| {
        let (s, co) = (omega * t).sin_cos();
        [1.0, co, s]
    })?;
    let mut fit = SinusoidFit {
        angular_frequency: omega,
        offset: c,
        amplitude: a.hypot(b),
        phase: (-b).atan2(a),
        r_squared: 0.0,
    };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    fit.r_squared = if total > 0.0 { 1.0 - residual_ss(x, y, &fit) / total } else { 1.0 };
    Some(fit)
}

/// Sinusoid of known angular frequency: linear least squares on `[1, cos, sin]`.
pub fn fit_sinusoid_fixed(x: &[f64], y: &[f64], omega: f64) -> Result<SinusoidFit> {
    check_xy(x, y)?;
    linear_fit(x, y, omega).ok_or_else(|| Error::InvalidArgument("degenerate sinusoid fit".into()))
}

/// Sinusoid with unknown frequency in `[omega_min, omega_max]`: a grid fine
/// enough to land in the right basin, then golden-section refinement.
pub fn fit_sinusoid(x: &[f64], y: &[f64], omega_min: f64, omega_max: f64) -> Result<SinusoidFit> {
    check_xy(x, y)?;
    if !(0.0 <= omega_min && omega_min < omega_max) {
        return Err(Error::InvalidArgument(format!("bad frequency range [{omega_min}, {omega_max}]")));
    }
    let span = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x.iter().copied().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::InvalidArgument("samples span no range".into()));
    }
    let cost = |w: f64| linear_fit(x, y, w).map_or(f64::INFINITY, |f| residual_ss(x, y, &f));
    // a quarter of the spacing between independent frequencies
    let step = (std::f64::consts::PI / (2.0 * span)).min((omega_max - omega_min) / 16.0);
    let count = ((omega_max - omega_min) / step).ceil() as usize;
    let grid = (0..=count).map(|k| omega_min + (omega_max - omega_min) * k as f64 / count as f64);
    let best = grid.map(|w| (cost(w), w)).fold((f64::INFINITY, omega_min), |a, b| if b.0 < a.0 { b } else { a }).1;

    let (mut a, mut b) = ((best - step).max(omega_min), (best + step).min(omega_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..100 {
        if (b - a) <= 1e-13 * b.abs().max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    fit_sinusoid_fixed(x, y, 0.5 * (a + b))
}

/// `y ≈ amplitude·exp(−t/tau)`, fitted as a line in `ln y` weighted by `y²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub tau: f64,
}

pub fn fit_exponential_decay(t: &[f64], y: &[f64]) -> Result<ExponentialFit> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 paired samples".into()));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        if yi <= 0.0 {
            continue;
        }
        let w = yi * yi;
        let ly = yi.ln();
        sw += w;
        sx += w * ti;
        sy += w * ly;
        sxx += w * ti * ti;
        sxy += w * ti * ly;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::InvalidArgument("need at least 2 positive samples at distinct times".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    if !(slope < 0.0) {
        return Err(Error::InvalidArgument("data do not decay".into()));
    }
    Ok(ExponentialFit { amplitude: intercept.exp(), tau: -1.0 / slope })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log–log slope needs ≥ 2 positive pairs".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all x equal".into()));
    }
    Ok(sxy / sxx)
}

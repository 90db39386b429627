//! Stability functions `Φ(z, λ)` of the schemes applied to
//! `u' = λz u + (1 − λ)z u` with `λz` taken into the linear part, and the
//! thresholds above which `|Φ| ≤ 1` on the whole negative real axis.
//!
//! The implicit pair is not printed in closed form elsewhere; substituting
//! the model problem into the two stage equations gives
//!
//! * BFE: `(1 + (1 − λ)z) / (1 − λz)`
//! * IMEX2: `[1 + λz/2 + (1 − λ)z (1 + (1 − λ)z/2) / (1 − λz/2)] / (1 − λz/2)`

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phi::phi_scalar;
use crate::scheme::{SchemeId, SchemeSpec};

/// Right end of the sampled interval `[−Z_MAX, 0]`.
pub const Z_MAX: f64 = 1e5;
const LOG_SAMPLES: usize = 2048;
const LINEAR_SAMPLES: usize = 2048;
const LINEAR_SPAN: f64 = 64.0;
/// Slack on `|Φ| ≤ 1`.
pub const STABILITY_SLACK: f64 = 1e-9;
const BISECTION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityQuery {
    pub z: f64,
    pub lambda: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `Φ(z, λ)` for complex `z`.
pub fn stability_function_complex(
    scheme: &SchemeSpec,
    z: Complex64,
    lambda: f64,
) -> Result<Complex64> {
    check_lambda(lambda)?;
    let one = Complex64::new(1.0, 0.0);
    let l = lambda;
    let lz = z * l;
    let rest = z * (1.0 - l);
    Ok(match scheme.id {
        SchemeId::Ee => one + z * phi_scalar(1, lz),
        SchemeId::Le => lz.exp() * (one + rest),
        SchemeId::Sle => one + z * lz.exp(),
        SchemeId::Erk2p2 => {
            let c2 = scheme.c2();
            one + z * phi_scalar(1, lz) + z * rest * phi_scalar(2, lz) * phi_scalar(1, lz * c2)
        }
        SchemeId::Erk2p1 => {
            let c2 = scheme.c2();
            one + z * phi_scalar(1, lz)
                + z * rest * 0.5 * phi_scalar(1, lz) * phi_scalar(1, lz * c2)
        }
        SchemeId::L2a => lz.exp() * (one + rest * (one + rest * 0.5)),
        SchemeId::L2b => lz.exp() * (one + rest * 0.5 + rest * 0.5 * (one + rest)),
        SchemeId::Sl2 => {
            let a = scheme.alpha();
            one + z * (lz * 0.5).exp() + z * rest * 0.5 * (lz * (1.0 + a)).exp()
        }
        SchemeId::Bfe => (one + rest) / (one - lz),
        SchemeId::Imex2 => {
            let d = one - lz * 0.5;
            (one + lz * 0.5 + rest * (one + rest * 0.5) / d) / d
        }
        SchemeId::Erbe => {
            return Err(Error::InvalidArgument(
                "no stability function is available for erbe".into(),
            ))
        }
    })
}

/// `Φ(z, λ)` on the negative real axis.
pub fn stability_function(scheme: &SchemeSpec, q: StabilityQuery) -> Result<f64> {
    if q.z > 0.0 {
        return Err(Error::InvalidArgument(format!(
            "z = {} must be non-positive",
            q.z
        )));
    }
    Ok(stability_function_complex(scheme, Complex64::new(q.z, 0.0), q.lambda)?.re)
}

/// Limit of `|Φ(z, λ)|` as `z → −∞`.
pub fn tail_limit(scheme: &SchemeSpec, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(f64::INFINITY);
    }
    let l = lambda;
    let v = match scheme.id {
        SchemeId::Ee => 1.0 - 1.0 / l,
        SchemeId::Le | SchemeId::L2a | SchemeId::L2b => 0.0,
        SchemeId::Sle | SchemeId::Sl2 => 1.0,
        SchemeId::Erk2p2 => 1.0 - 1.0 / l + (1.0 - l) / (scheme.c2() * l * l),
        SchemeId::Erk2p1 => 1.0 - 1.0 / l + (1.0 - l) / (2.0 * scheme.c2() * l * l),
        SchemeId::Bfe => -(1.0 - l) / l,
        SchemeId::Imex2 => -1.0 + 2.0 * (1.0 - l) * (1.0 - l) / (l * l),
        SchemeId::Erbe => {
            return Err(Error::InvalidArgument(
                "no stability function is available for erbe".into(),
            ))
        }
    };
    Ok(v.abs())
}

fn abs_phi(scheme: &SchemeSpec, z: f64, lambda: f64) -> f64 {
    stability_function_complex(scheme, Complex64::new(z, 0.0), lambda)
        .map(|c| c.re.abs())
        .unwrap_or(f64::NAN)
}

fn sample_points() -> Vec<f64> {
    let mut z: Vec<f64> = Vec::with_capacity(LOG_SAMPLES + LINEAR_SAMPLES + 1);
    let (lo, hi) = (-6.0f64, Z_MAX.log10());
    for i in 0..LOG_SAMPLES {
        let t = lo + (hi - lo) * i as f64 / (LOG_SAMPLES - 1) as f64;
        z.push(-(10f64.powf(t)));
    }
    for i in 1..=LINEAR_SAMPLES {
        z.push(-LINEAR_SPAN * i as f64 / LINEAR_SAMPLES as f64);
    }
    z.push(0.0);
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    z.dedup();
    z
}

/// Maximizes `f` on `[a, b]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.max(fd);
    for _ in 0..80 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        best = best.max(fc).max(fd);
    }
    best
}

/// `sup_{z ≤ 0} |Φ(z, λ)|`: sampled, refined around each sampled local
/// maximum, and combined with the `z → −∞` limit.
pub fn sup_abs_phi(scheme: &SchemeSpec, lambda: f64) -> Result<f64> {
    let tail = tail_limit(scheme, lambda)?;
    if tail.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let z = sample_points();
    let vals: Vec<f64> = z.iter().map(|&x| abs_phi(scheme, x, lambda)).collect();
    let mut sup = tail;
    for i in 0..vals.len() {
        let v = vals[i];
        if v.is_nan() {
            return Ok(f64::INFINITY);
        }
        sup = sup.max(v);
        let left = if i > 0 {
            vals[i - 1]
        } else {
            f64::NEG_INFINITY
        };
        let right = if i + 1 < vals.len() {
            vals[i + 1]
        } else {
            f64::NEG_INFINITY
        };
        if v >= left && v >= right && i > 0 && i + 1 < vals.len() {
            let m = golden_max(|x| abs_phi(scheme, x, lambda), z[i - 1], z[i + 1]);
            sup = sup.max(m);
        }
    }
    Ok(sup)
}

pub fn is_unconditionally_stable(scheme: &SchemeSpec, lambda: f64) -> Result<bool> {
    Ok(sup_abs_phi(scheme, lambda)? <= 1.0 + STABILITY_SLACK)
}

fn threshold_with_tol(scheme: &SchemeSpec, tol: f64) -> Result<f64> {
    if !is_unconditionally_stable(scheme, 1.0)? {
        return Err(Error::NoStableLambda(scheme.id.name()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_unconditionally_stable(scheme, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest `λ` with `sup |Φ| ≤ 1 + 10⁻⁹`, by bisection to `10⁻⁴`.
pub fn lambda_threshold(scheme: &SchemeSpec) -> Result<f64> {
    threshold_with_tol(scheme, BISECTION_TOL)
}

/// `α` in `(0, 1]` minimizing the SL2 threshold, with that threshold.
pub fn optimize_alpha_sl2() -> Result<(f64, f64)> {
    let base = SchemeSpec::new(SchemeId::Sl2);
    let thr = |alpha: f64| -> Result<f64> { threshold_with_tol(&base.with_alpha(alpha)?, 1e-7) };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.02, 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (thr(c)?, thr(d)?);
    while b - a > 2e-4 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = thr(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = thr(d)?;
        }
    }
    let alpha = 0.5 * (a + b);
    Ok((
        alpha,
        threshold_with_tol(&base.with_alpha(alpha)?, BISECTION_TOL)?,
    ))
}

/// Published thresholds for [`SchemeId::ANALYZED`], in that order.
pub const TABULATED_THRESHOLDS: [f64; 10] = [
    0.5,
    0.5,
    0.5,
    0.5,
    1.0 / 3.0,
    0.301,
    0.301,
    0.218,
    0.5 / std::f64::consts::E,
    0.183,
];
pub const TABULATED_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRow {
    pub scheme: SchemeId,
    pub computed: f64,
    pub tabulated: f64,
}

impl ThresholdRow {
    pub fn matches(&self) -> bool {
        (self.computed - self.tabulated).abs() <= TABULATED_TOLERANCE
    }
}

/// Thresholds of every analyzed scheme at its default parameters.
pub fn threshold_table() -> Result<Vec<ThresholdRow>> {
    SchemeId::ANALYZED
        .par_iter()
        .zip(TABULATED_THRESHOLDS.par_iter())
        .map(|(&scheme, &tabulated)| {
            Ok(ThresholdRow {
                scheme,
                computed: lambda_threshold(&SchemeSpec::new(scheme))?,
                tabulated,
            })
        })
        .collect()
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

/// Row-major boolean image, row 0 at `im_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<bool>,
}

impl Raster {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[row * self.width + col]
    }

    /// Binary portable graymap, white where stable.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|&p| if p { 255u8 } else { 0u8 }));
        out
    }
}

/// `|Φ(z, λ)| ≤ 1` at pixel centres of `window`.
pub fn astability_region(
    scheme: &SchemeSpec,
    lambda: f64,
    window: Window,
    resolution: (usize, usize),
) -> Result<Raster> {
    check_lambda(lambda)?;
    let (width, height) = resolution;
    if !(window.re_max > window.re_min && window.im_max > window.im_min)
        || width == 0
        || height == 0
    {
        return Err(Error::InvalidArgument("empty stability window".into()));
    }
    if scheme.id == SchemeId::Erbe {
        return Err(Error::InvalidArgument(
            "no stability function is available for erbe".into(),
        ));
    }
    let dx = (window.re_max - window.re_min) / width as f64;
    let dy = (window.im_max - window.im_min) / height as f64;
    let pixels = (0..height)
        .into_par_iter()
        .flat_map_iter(|row| {
            let im = window.im_max - (row as f64 + 0.5) * dy;
            (0..width).map(move |col| {
                let re = window.re_min + (col as f64 + 0.5) * dx;
                stability_function_complex(scheme, Complex64::new(re, im), lambda)
                    .map(|v| v.norm() <= 1.0)
                    .unwrap_or(false)
            })
        })
        .collect();
    Ok(Raster {
        width,
        height,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(z: f64, lambda: f64) -> StabilityQuery {
        StabilityQuery { z, lambda }
    }

    #[test]
    fn consistency_at_origin() {
        for id in SchemeId::ANALYZED {
            for l in [0.0, 0.3, 1.0] {
                let v = stability_function(&id.into(), q(0.0, l)).unwrap();
                assert!((v - 1.0).abs() < 1e-15, "{id}");
            }
        }
    }

    #[test]
    fn explicit_euler_exact_at_one() {
        for z in [-0.1, -3.0, -40.0] {
            let v = stability_function(&SchemeId::Ee.into(), q(z, 1.0)).unwrap();
            assert!((v - f64::exp(z)).abs() < 1e-15);
        }
    }

    #[test]
    fn lawson_euler_at_zero_lambda() {
        let v = stability_function(&SchemeId::Le.into(), q(-2.0, 0.0)).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(stability_function(&SchemeId::Erbe.into(), q(-1.0, 0.5)).is_err());
        assert!(stability_function(&SchemeId::Ee.into(), q(1.0, 0.5)).is_err());
        assert!(stability_function(&SchemeId::Ee.into(), q(-1.0, 1.5)).is_err());
    }

    #[test]
    fn explicit_euler_tail() {
        let s = sup_abs_phi(&SchemeId::Ee.into(), 0.4).unwrap();
        assert!((s - 1.5).abs() < 1e-12);
        let s1 = sup_abs_phi(&SchemeId::Ee.into(), 1.0).unwrap();
        assert!((s1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_window_rejected() {
        let w = Window {
            re_min: 0.0,
            re_max: 0.0,
            im_min: -1.0,
            im_max: 1.0,
        };
        assert!(astability_region(&SchemeId::Sle.into(), 1.0, w, (4, 4)).is_err());
    }

    #[test]
    fn pgm_header() {
        let r = Raster {
            width: 2,
            height: 1,
            pixels: vec![true, false],
        };
        assert_eq!(r.to_pgm(), b"P5\n2 1\n255\n\xff\x00".to_vec());
    }
}

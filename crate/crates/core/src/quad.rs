//! Adaptive Gauss–Kronrod (7/15) quadrature with user-supplied breakpoints.
//!
//! Piecewise densities have kinks where the smooth error estimate is
//! meaningless, so callers pass the kink locations and the integrator starts
//! from those subintervals. Refinement always bisects the interval with the
//! largest error estimate.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    /// Target absolute error of the whole integral.
    pub abs_tol: f64,
    /// Maximum number of subintervals before giving up.
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint that
/// falls strictly inside the interval.
pub fn integrate<F>(f: F, a: f64, b: f64, breakpoints: &[f64], opts: QuadOptions) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "quadrature bounds must be finite, got [{a}, {b}]"
        )));
    }
    if b <= a {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();

    let mut segments = Vec::with_capacity(64);
    let mut lo = a;
    for &c in cuts.iter().chain(std::iter::once(&b)) {
        segments.push(gk15(&f, lo, c));
        lo = c;
    }

    loop {
        let total_err: f64 = segments.iter().map(|s| s.error).sum();
        if total_err <= opts.abs_tol {
            break;
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure {
                a,
                b,
                error: total_err,
                target: opts.abs_tol,
            });
        }
        // Worst segment that can still be split.
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                let mid = 0.5 * (s.a + s.b);
                mid > s.a && mid < s.b && s.error > 0.0
            })
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            return Err(Error::QuadratureFailure {
                a,
                b,
                error: total_err,
                target: opts.abs_tol,
            });
        };
        let s = segments.swap_remove(i);
        let mid = 0.5 * (s.a + s.b);
        segments.push(gk15(&f, s.a, mid));
        segments.push(gk15(&f, mid, s.b));
    }

    // Sum in interval order so results do not depend on refinement history.
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(QuadResult {
        value: segments.iter().map(|s| s.value).sum(),
        error: segments.iter().map(|s| s.error).sum(),
        intervals: segments.len(),
    })
}

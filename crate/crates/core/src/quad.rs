//! Numerical integration and bracketed root finding used across the crate.

use std::f64::consts::TAU;

/// Trapezoid rule over one period `[0, 2 pi]` with `nodes` equally spaced
/// points including both ends. For smooth periodic integrands the error
/// decays geometrically in `nodes`.
pub fn trapezoid_periodic<F: FnMut(f64) -> f64>(mut f: F, nodes: usize) -> f64 {
    assert!(nodes >= 2);
    let h = TAU / (nodes - 1) as f64;
    let mut sum = 0.5 * (f(0.0) + f(TAU));
    for i in 1..nodes - 1 {
        sum += f(i as f64 * h);
    }
    sum * h
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

/// One 15-point Gauss–Kronrod panel: (integral, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The worst panel is bisected until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |I|)` or 5000 panels are in use. Nodes never
/// touch the interval ends, so integrable endpoint singularities are fine.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut panels = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..5000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty");
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// Integral over `[a, inf)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate(
        |t| {
            let s = 1.0 - t;
            let v = f(a + t / s);
            if v == 0.0 {
                0.0
            } else {
                v / (s * s)
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Runs until the bracket
/// cannot be split further in floating point or its width falls below
/// `x_tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    let f_lo = f(lo);
    let lo_negative = f_lo < 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= x_tol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

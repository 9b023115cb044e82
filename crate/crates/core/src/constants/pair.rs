//! `∬ μ(ds) ν(dr) |x - b s + c r|^α` for piecewise-polynomial measures.

use crate::kernel::{KernelMeasure, PolyPiece};
use crate::quad::{adaptive_with_breaks, GaussLegendre};
use crate::Result;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

/// `∫_{lo}^{hi} q(r) |β + γ r|^α dr`.
///
/// Exact through the Taylor expansion of `q` at the root `r* = -β/γ` when the
/// root is close to the piece; a 20-point Gauss–Legendre rule otherwise.
pub(crate) fn inner(q: &PolyPiece, beta: f64, gamma: f64, alpha: f64, gl: &GaussLegendre) -> f64 {
    let root = -beta / gamma;
    let width = q.hi - q.lo;
    let dist = if root < q.lo { q.lo - root } else if root > q.hi { root - q.hi } else { 0.0 };
    if dist > width {
        return gl.integrate(|r| q.eval(r) * (beta + gamma * r).abs().powf(alpha), q.lo, q.hi);
    }
    let d = q.taylor_at(root);
    let anti = |u: f64, k: usize| {
        let e = k as f64 + alpha + 1.0;
        let mag = u.abs().powf(e) / e;
        if u < 0.0 && k % 2 == 0 { -mag } else { mag }
    };
    let (a, b) = (q.lo - root, q.hi - root);
    let sum: f64 = d.iter().enumerate().map(|(k, dk)| dk * (anti(b, k) - anti(a, k))).sum();
    gamma.abs().powf(alpha) * sum
}

pub(crate) fn pair_integral(
    mu: &KernelMeasure,
    nu: &KernelMeasure,
    x: f64,
    b: f64,
    c: f64,
    alpha: f64,
) -> Result<f64> {
    let gl = GaussLegendre::new(20);
    let mut total = 0.0;
    for &(s, ma) in &mu.atoms {
        for &(r, na) in &nu.atoms {
            total += ma * na * (x - b * s + c * r).abs().powf(alpha);
        }
        for q in &nu.pieces {
            total += ma * inner(q, x - b * s, c, alpha, &gl);
        }
    }
    for p in &mu.pieces {
        for &(r, na) in &nu.atoms {
            total += na * inner(p, x + c * r, -b, alpha, &gl);
        }
        for q in &nu.pieces {
            let mut breaks: Vec<f64> = alloc::vec![p.lo, p.hi];
            for edge in [q.lo, q.hi] {
                let s = (x + c * edge) / b;
                if s > p.lo && s < p.hi {
                    breaks.push(s);
                }
            }
            breaks.sort_by(f64::total_cmp);
            let scale = q.coeffs.iter().chain(&p.coeffs).fold(0.0f64, |m, v| m.max(v.abs()));
            let r = adaptive_with_breaks(
                |s| p.eval(s) * inner(q, x - b * s, c, alpha, &gl),
                &breaks,
                1e-14 * scale * scale,
                1e-11,
                4000,
            );
            total += r.require("kernel pair integral")?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::quad::adaptive;

    #[test]
    fn inner_matches_brute_force() {
        let q = PolyPiece { lo: -1.0, hi: 0.5, coeffs: alloc::vec![0.3, -1.0, 2.0, 0.7] };
        let gl = GaussLegendre::new(20);
        for (beta, gamma) in [(0.2, 1.0), (-0.4, 2.0), (3.0, 1.0), (0.0, -1.5), (1.2, 1.0)] {
            let alpha = 1.4;
            let root = -beta / gamma;
            let mut br = alloc::vec![q.lo, q.hi];
            if root > q.lo && root < q.hi {
                br.insert(1, root);
            }
            let brute = adaptive_with_breaks(
                |r| q.eval(r) * (beta + gamma * r).abs().powf(alpha),
                &br,
                1e-15,
                1e-14,
                500,
            )
            .value;
            assert!((inner(&q, beta, gamma, alpha, &gl) - brute).abs() < 1e-12, "{beta} {gamma}");
        }
    }

    #[test]
    fn triangular_second_order_closed_form() {
        // Var(X(t+2)-2X(t+1)+X(t)) = v²(4 - 2^{2h}) in units where the |·|^{2h} part is -v²/2
        let m = Kernel::SecondDifference.measure(2);
        for h in [0.55, 0.7, 0.95] {
            let p = pair_integral(&m, &m, 0.0, 1.0, 1.0, 2.0 * h).unwrap();
            assert!((-0.5 * p - (4.0 - 2f64.powf(2.0 * h))).abs() < 1e-13);
        }
    }

    #[test]
    fn smooth_kernel_against_nested_adaptive() {
        let m = Kernel::C2Bump.measure(1);
        let alpha = 1.3;
        let direct = adaptive(
            |s| {
                let f = |r: f64| Kernel::C2Bump.eval_d1(r) * (0.4 - s + 2.0 * r).abs().powf(alpha);
                let root = (s - 0.4) / 2.0;
                let mut br = alloc::vec![-1.0, 1.0];
                if root.abs() < 1.0 {
                    br.insert(1, root);
                }
                Kernel::C2Bump.eval_d1(s) * adaptive_with_breaks(f, &br, 1e-15, 1e-14, 500).value
            },
            -1.0,
            1.0,
            1e-13,
            1e-13,
            2000,
        )
        .value;
        let p = pair_integral(&m, &m, 0.4, 1.0, 2.0, alpha).unwrap();
        assert!((p - direct).abs() < 1e-10, "{p} {direct}");
    }
}

//! Adaptive Gauss–Kronrod quadrature and Wynn's epsilon extrapolation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use openq_core::{Error, Result, C64};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod rule on `[a, b]`; returns the estimate and `|K15 - G7|`.
fn gk15(f: &mut impl FnMut(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    (k * h, ((k - g) * h).norm())
}

struct Piece {
    a: f64,
    b: f64,
    val: C64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive bisection; stops when the summed error estimate is below
/// `max(epsabs, epsrel·|I|)`.
pub(crate) fn integrate(
    mut f: impl FnMut(f64) -> C64,
    a: f64,
    b: f64,
    epsabs: f64,
    epsrel: f64,
    limit: usize,
) -> Result<C64> {
    let (val, err) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, val, err });
    let mut total = val;
    let mut total_err = err;
    for _ in 0..limit {
        if !(total.re.is_finite() && total.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite integrand on [{a}, {b}]")));
        }
        if total_err <= epsabs.max(epsrel * total.norm()) {
            return Ok(total);
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            break;
        }
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.val;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, val: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, val: v2, err: e2 });
    }
    // recompute from the pieces to shed accumulated rounding
    let total_err: f64 = heap.iter().map(|p| p.err).sum();
    let total: C64 = heap.iter().map(|p| p.val).sum();
    if total_err <= epsabs.max(epsrel * total.norm()) {
        return Ok(total);
    }
    Err(Error::Convergence(format!(
        "quadrature on [{a}, {b}] did not converge: error estimate {total_err:.3e} for value {:.6e}",
        total.norm()
    )))
}

/// Wynn's epsilon table for the limit of a sequence of partial sums; returns
/// the two most recent even-column estimates.
pub(crate) fn wynn_epsilon(s: &[f64]) -> (f64, f64) {
    let n = s.len();
    if n < 3 {
        let last = s.last().copied().unwrap_or(0.0);
        return (last, s.first().copied().unwrap_or(last));
    }
    // prev = eps_{k-1}, cur = eps_k; column k has n - k entries
    let mut prev = vec![0.0; n + 1];
    let mut cur = s.to_vec();
    let mut best = s[n - 1];
    let mut second = s[n - 2];
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            let p = prev[i + 1];
            if d == 0.0 {
                // the sequence has converged exactly
                return (cur[i + 1], cur[i + 1]);
            }
            next.push(p + 1.0 / d);
        }
        k += 1;
        prev = cur;
        cur = next;
        if k % 2 == 0 && cur.len() >= 2 {
            best = cur[cur.len() - 1];
            second = cur[cur.len() - 2];
        }
    }
    (best, second)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_peak() {
        let v = integrate(|x| C64::new(x * x, x), 0.0, 2.0, 1e-14, 1e-14, 50).unwrap();
        assert!((v - C64::new(8.0 / 3.0, 2.0)).norm() < 1e-13);
        // narrow Lorentzian: ∫ w/((x-1)²+w²) over the real line ≈ π
        let w = 1e-3;
        let v = integrate(|x| C64::new(w / ((x - 1.0).powi(2) + w * w), 0.0), -1e3, 1e3, 1e-12, 1e-10, 500).unwrap();
        let exact = (999.0 / w).atan() + (1001.0 / w).atan();
        assert!((v.re - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = Vec::new();
        let mut acc = 0.0;
        for k in 1..=15 {
            acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
            s.push(acc);
        }
        let (est, _) = wynn_epsilon(&s);
        assert!((est - std::f64::consts::LN_2).abs() < 1e-10, "{est}");
    }
}

//! Globally adaptive 15-point Gauss–Kronrod quadrature for real and
//! complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
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

// Gauss weights for XGK[1], XGK[3], XGK[5] and the center.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

pub trait Integrand:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// One Gauss–Kronrod panel: value and error estimate.
pub fn gk15<T: Integrand, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.magnitude() * WGK[7];
    let mut values = [(T::zero(), T::zero()); 7];
    for (j, &x) in XGK[..7].iter().enumerate() {
        let dx = half * x;
        let (f1, f2) = (f(center - dx), f(center + dx));
        values[j] = (f1, f2);
        kronrod = kronrod + (f1 + f2) * WGK[j];
        abs_sum += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = WGK[7] * (fc - mean).magnitude();
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += WGK[j] * ((*f1 - mean).magnitude() + (*f2 - mean).magnitude());
    }
    let abs_half = half.abs();
    let value = kronrod * half;
    let raw = ((kronrod - gauss) * half).magnitude();
    (
        value,
        rescale_error(raw, abs_sum * abs_half, asc * abs_half),
    )
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err;
    if res_asc != 0.0 && scaled != 0.0 {
        scaled = res_asc * (200.0 * scaled / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    /// Budget of panel bisections after the initial partition.
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-12,
            max_subdivisions: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: f64,
    pub panels: usize,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[edges[0], edges[last]]`, starting from the panels
/// delimited by `edges` and bisecting the worst panel until the summed error
/// estimate meets `tol`.
pub fn integrate<T, F>(f: F, edges: &[f64], tol: Tolerance) -> Result<Quadrature<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    if edges.len() < 2 {
        return Err(Error::InvalidInput(
            "quadrature needs at least two edges".into(),
        ));
    }
    let mut heap = BinaryHeap::with_capacity(edges.len());
    let mut total = T::zero();
    let mut error = 0.0;
    for w in edges.windows(2) {
        let (value, err) = gk15(&f, w[0], w[1]);
        total = total + value;
        error += err;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error: err,
        });
    }
    let mut splits = 0;
    loop {
        let target = tol.abs.max(tol.rel * total.magnitude());
        if error <= target {
            break;
        }
        if splits >= tol.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: target,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in f64.
            return Err(Error::Quadrature {
                estimate: error,
                tolerance: target,
            });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        error += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        splits += 1;
    }
    // Re-sum to shed the rounding accumulated by incremental updates.
    let value = heap.iter().fold(T::zero(), |acc, p| acc + p.value);
    let error = heap.iter().map(|p| p.error).sum();
    Ok(Quadrature {
        value,
        error,
        panels: heap.len(),
    })
}

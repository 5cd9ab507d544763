//! Chebyshev series, derivative re-expansion and Gauss quadrature on [-1, 1].
//!
//! A field is represented by a truncated series f(x) = sum_{i=0}^{n} a_i T_i(x).
//! Its first derivative is again a Chebyshev series whose coefficients follow
//! from the backward recurrence
//!
//! ```text
//! c_i a'_i = a'_{i+2} + 2 (i+1) a_{i+1},   a'_n = 0,   c_0 = 2, c_{i>0} = 1
//! ```
//!
//! (equivalent to a'_i = (2/c_i) sum_{p=i+1, p+i odd}^{n} p a_p, with the sum
//! running to the full truncation order n). Second derivatives re-apply the
//! recurrence, which zeroes the top two coefficients.
//!
//! Integrals against the Chebyshev weight 1/sqrt(1-x^2) use the Gauss rule
//!
//! ```text
//! x_k = cos( (2k-1) pi / (2m) ),  k = 1..m,  common weight pi/m,
//! ```
//!
//! exact for integrands of polynomial degree < 2m. Projection of a function
//! onto the basis uses that rule together with the normalization
//! a_i = (2 / (pi c_i)) <f, T_i>.
//!
//! Everything here is generic over the scalar; the crate root exports `f64`
//! aliases used by the solvers.

use std::fmt::Debug;
use std::ops::AddAssign;

use num_traits::{Float, FloatConst, FromPrimitive};

use crate::{Error, Result};

/// Scalar bound for the spectral primitives.
pub trait Real: Float + FloatConst + FromPrimitive + AddAssign + Debug + 'static {}
impl<T> Real for T where T: Float + FloatConst + FromPrimitive + AddAssign + Debug + 'static {}

/// Normalization weight c_i of the Chebyshev inner product: 2 for i = 0, else 1.
pub fn c_weight<T: Real>(i: usize) -> T {
    if i == 0 {
        T::from_f64(2.0).unwrap()
    } else {
        T::one()
    }
}

/// Diagonal entry <T_i, T_i> of the Galerkin mass: pi for i = 0, pi/2 otherwise.
pub fn mass_entry<T: Real>(i: usize) -> T {
    if i == 0 {
        T::PI()
    } else {
        T::PI() * T::from_f64(0.5).unwrap()
    }
}

fn two<T: Real>() -> T {
    T::from_f64(2.0).unwrap()
}

/// Truncated Chebyshev series sum a_i T_i(x) on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Real> ChebyshevSeries<T> {
    /// Wraps coefficients a_0..a_n. Rejects empty or non-finite input.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Shape(
                "Chebyshev series needs at least one coefficient".into(),
            ));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Shape(format!(
                "non-finite Chebyshev coefficient {bad:?}"
            )));
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Clenshaw evaluation at a spectral coordinate.
    ///
    /// The coordinate must lie in [-1, 1]; a small round-off margin from
    /// affine layer maps is absorbed by clamping.
    pub fn eval(&self, x: T) -> Result<T> {
        let x = check_domain(x)?;
        Ok(eval_slice(&self.coeffs, x))
    }

    /// First and second derivative series (with respect to the spectral
    /// coordinate), both kept at the original truncation length.
    pub fn derivatives(&self) -> DerivativeCoeffs<T> {
        let mut first = vec![T::zero(); self.coeffs.len()];
        let mut second = vec![T::zero(); self.coeffs.len()];
        differentiate_into(&self.coeffs, &mut first);
        differentiate_into(&first, &mut second);
        DerivativeCoeffs {
            first: Self { coeffs: first },
            second: Self { coeffs: second },
        }
    }
}

/// First- and second-derivative coefficient sets of a series.
///
/// Invariants: `first` ends in one zero coefficient, `second` in two.
#[derive(Debug, Clone)]
pub struct DerivativeCoeffs<T> {
    pub first: ChebyshevSeries<T>,
    pub second: ChebyshevSeries<T>,
}

/// Derivative re-expansion, backward recurrence form. `out` must match
/// `coeffs` in length; `out[n] = 0` always holds afterwards.
pub fn differentiate_into<T: Real>(coeffs: &[T], out: &mut [T]) {
    assert_eq!(coeffs.len(), out.len(), "derivative buffer length mismatch");
    let n = coeffs.len() - 1;
    out[n] = T::zero();
    for i in (0..n).rev() {
        let mut t = T::from_usize(2 * (i + 1)).unwrap() * coeffs[i + 1];
        if i + 2 <= n {
            t = t + out[i + 2];
        }
        out[i] = if i == 0 { t / two() } else { t };
    }
}

/// Clenshaw recurrence on a raw coefficient slice; `x` must be pre-checked.
pub(crate) fn eval_slice<T: Real>(coeffs: &[T], x: T) -> T {
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    let tx = two::<T>() * x;
    for a in coeffs[1..].iter().rev() {
        let b = *a + tx * b1 - b2;
        b2 = b1;
        b1 = b;
    }
    coeffs[0] + x * b1 - b2
}

fn check_domain<T: Real>(x: T) -> Result<T> {
    // Margin of a few ulps: layer maps may overshoot +-1 by round-off.
    let slack = T::epsilon() * T::from_f64(64.0).unwrap();
    if x > T::one() + slack || x < -(T::one() + slack) || !x.is_finite() {
        return Err(Error::OutOfDomain {
            x: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(x.min(T::one()).max(-T::one()))
}

/// Chebyshev-Gauss rule: m nodes, common weight pi/m, exact for polynomial
/// integrands of degree < 2m under the weight 1/sqrt(1-x^2).
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weight: T,
}

impl<T: Real> QuadratureRule<T> {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("quadrature needs at least one node".into()));
        }
        let mf = T::from_usize(m).unwrap();
        let half_step = T::PI() / (two::<T>() * mf);
        // x_k = cos((2k-1) pi / (2m)), strictly decreasing in k.
        let nodes = (1..=m)
            .map(|k| (T::from_usize(2 * k - 1).unwrap() * half_step).cos())
            .collect();
        Ok(Self {
            nodes,
            weight: T::PI() / mf,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Common quadrature weight pi/m.
    pub fn weight(&self) -> T {
        self.weight
    }

    /// Integral of f against 1/sqrt(1-x^2); rejects non-finite samples.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> Result<T> {
        let mut acc = T::zero();
        for (k, &x) in self.nodes.iter().enumerate() {
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::QuadratureEvaluation {
                    node: k,
                    x: x.to_f64().unwrap_or(f64::NAN),
                });
            }
            acc += fx;
        }
        Ok(acc * self.weight)
    }

    /// Projection a_i = (2/(pi c_i)) <f, T_i> for i = 0..n, exact when f is a
    /// polynomial of degree <= n and 2m > 2n.
    pub fn project(&self, n: usize, mut f: impl FnMut(T) -> T) -> Result<ChebyshevSeries<T>> {
        let basis = basis_matrix(self, n);
        let m = self.len();
        let mut samples = Vec::with_capacity(m);
        for (k, &x) in self.nodes.iter().enumerate() {
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::QuadratureEvaluation {
                    node: k,
                    x: x.to_f64().unwrap_or(f64::NAN),
                });
            }
            samples.push(fx);
        }
        let mf = T::from_usize(m).unwrap();
        let coeffs = (0..=n)
            .map(|i| {
                let mut acc = T::zero();
                for k in 0..m {
                    acc += samples[k] * basis[i * m + k];
                }
                acc * two::<T>() / (mf * c_weight::<T>(i))
            })
            .collect();
        ChebyshevSeries::new(coeffs)
    }
}

/// Dense table T_i(x_k), row-major (n+1) x m, built by the three-term
/// recurrence. Rows are basis indices, columns quadrature nodes.
pub fn basis_matrix<T: Real>(rule: &QuadratureRule<T>, n: usize) -> Vec<T> {
    let m = rule.len();
    let mut table = vec![T::zero(); (n + 1) * m];
    for (k, &x) in rule.nodes().iter().enumerate() {
        table[k] = T::one();
        if n >= 1 {
            table[m + k] = x;
        }
        for i in 2..=n {
            let t = two::<T>() * x * table[(i - 1) * m + k] - table[(i - 2) * m + k];
            table[i * m + k] = t;
        }
    }
    table
}

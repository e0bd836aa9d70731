//! Sampled and spectral signal representations.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthopoly::BasisSpec;

/// Tolerance used when matching abscissae of two grids.
pub const GRID_TOL: f64 = 1e-12;

/// `n` equidistant points covering [0, 1], both ends included.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let last = (n - 1) as f64;
            (0..n).map(|i| i as f64 / last).collect()
        }
    }
}

/// `(x, y)` samples on [0, 1] with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl SampledSignal {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::invalid(format!(
                "abscissa/value length mismatch ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::invalid("a sampled signal needs at least 2 points"));
        }
        if let Some(i) = xs.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid(format!(
                "abscissa {} lies outside [0, 1]",
                xs[i]
            )));
        }
        if let Some(w) = xs.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "abscissae must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::invalid("sample values must be finite"));
        }
        Ok(Self { xs, ys })
    }

    /// Samples `f` on `n` equidistant points.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = uniform_grid(n);
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, ys)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Same grid, values replaced by `f(x, y)`.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let ys = self
            .xs
            .iter()
            .zip(&self.ys)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Self {
            xs: self.xs.clone(),
            ys,
        }
    }

    pub fn with_values(&self, ys: Vec<f64>) -> Result<Self> {
        Self::new(self.xs.clone(), ys)
    }

    /// True when both grids agree point by point within [`GRID_TOL`].
    pub fn same_grid(&self, other: &SampledSignal) -> bool {
        self.len() == other.len()
            && self
                .xs
                .iter()
                .zip(&other.xs)
                .all(|(a, b)| (a - b).abs() <= GRID_TOL)
    }

    /// Keeps only the samples whose abscissae appear in `grid`. Every point
    /// of `grid` must be present.
    pub fn restrict_to(&self, grid: &[f64]) -> Result<SampledSignal> {
        let mut ys = Vec::with_capacity(grid.len());
        let mut j = 0;
        for &x in grid {
            while j < self.xs.len() && self.xs[j] < x - GRID_TOL {
                j += 1;
            }
            if j == self.xs.len() || (self.xs[j] - x).abs() > GRID_TOL {
                return Err(Error::GridMismatch(format!(
                    "abscissa {x} is not a sample point"
                )));
            }
            ys.push(self.ys[j]);
        }
        SampledSignal::new(grid.to_vec(), ys)
    }

    /// Reads two-column CSV. A leading non-numeric line is taken as a header.
    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut seen_data = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: "expected exactly two comma-separated columns".into(),
                    })
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    xs.push(x);
                    ys.push(y);
                    seen_data = true;
                }
                _ if !seen_data && xs.is_empty() && idx == 0 => continue,
                _ => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("cannot parse `{line}` as two numbers"),
                    })
                }
            }
        }
        Self::new(xs, ys)
    }

    /// Writes `header_x,header_y` followed by one line per sample.
    pub fn write_csv(&self, mut writer: impl Write, header: (&str, &str)) -> Result<()> {
        writeln!(writer, "{},{}", header.0, header.1)?;
        for (x, y) in self.xs.iter().zip(&self.ys) {
            writeln!(writer, "{x},{y}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, header: (&str, &str)) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, header)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// `u(x) = sum_i w_i phi_i(x)` over a shifted Legendre basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSignal {
    basis: BasisSpec,
    weights: Vec<f64>,
}

impl SpectralSignal {
    pub fn new(basis: BasisSpec, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != basis.len() {
            return Err(Error::invalid(format!(
                "expected {} weights for order {}, got {}",
                basis.len(),
                basis.order,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("spectral weights must be finite"));
        }
        Ok(Self { basis, weights })
    }

    pub fn zeros(basis: BasisSpec) -> Self {
        Self {
            basis,
            weights: vec![0.0; basis.len()],
        }
    }

    /// The `k`-th basis function itself.
    pub fn unit(basis: BasisSpec, k: usize) -> Self {
        let mut s = Self::zeros(basis);
        s.weights[k] = 1.0;
        s
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, x: f64, deriv: usize) -> Result<f64> {
        if deriv > 2 {
            return Err(Error::UnsupportedDerivative(deriv));
        }
        Ok(self.eval_derivs(x)[deriv])
    }

    /// `[u(x), u'(x), u''(x)]`.
    pub fn eval_derivs(&self, x: f64) -> [f64; 3] {
        let table = self.basis.eval_all_derivs(x);
        let mut out = [0.0; 3];
        for (w, row) in self.weights.iter().zip(&table) {
            for d in 0..3 {
                out[d] += w * row[d];
            }
        }
        out
    }

    /// Samples `u` on the given abscissae.
    pub fn render(&self, xs: &[f64]) -> Result<SampledSignal> {
        let ys = xs.iter().map(|&x| self.eval_derivs(x)[0]).collect();
        SampledSignal::new(xs.to_vec(), ys)
    }

    /// `sum_i w_i^2`; equal to `<u, u>` on [0, 1] for an orthonormal basis.
    pub fn energy(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &SpectralSignal, beta: f64) -> Result<Self> {
        if self.basis != other.basis {
            return Err(Error::invalid(
                "cannot combine signals over different bases",
            ));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Self::new(self.basis, weights)
    }

    pub fn max_abs_diff(&self, other: &SpectralSignal) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Least-squares fit of `samples` by the basis, with optional ridge:
/// minimizes `sum_k (u(x_k) - y_k)^2 + ridge * sum_i w_i^2`.
pub fn project(samples: &SampledSignal, basis: BasisSpec, ridge: f64) -> Result<SpectralSignal> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::invalid(format!(
            "ridge must be finite and nonnegative, got {ridge}"
        )));
    }
    let m = samples.len();
    let n = basis.len();
    if m < n {
        return Err(Error::invalid(format!(
            "projection onto order {} needs at least {n} samples, got {m}",
            basis.order
        )));
    }
    let rows = if ridge > 0.0 { m + n } else { m };
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut b = DVector::<f64>::zeros(rows);
    for (k, (&x, &y)) in samples.xs().iter().zip(samples.ys()).enumerate() {
        for (j, row) in basis.eval_all_derivs(x).iter().enumerate() {
            a[(k, j)] = row[0];
        }
        b[k] = y;
    }
    if ridge > 0.0 {
        let s = ridge.sqrt();
        for j in 0..n {
            a[(m + j, j)] = s;
        }
    }
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..n).any(|i| r[(i, i)].abs() <= 1e-13 * max_diag) {
        return Err(Error::RankDeficient);
    }
    qr.q_tr_mul(&mut b);
    let rhs = b.rows(0, n).into_owned();
    let w = r.solve_upper_triangular(&rhs).ok_or(Error::RankDeficient)?;
    SpectralSignal::new(basis, w.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplineBoundary {
    /// Zero second derivative at both ends.
    #[default]
    Natural,
    /// Continuous third derivative at the second and penultimate knots.
    NotAKnot,
}

/// Piecewise cubic interpolant; piece `i` is
/// `c0 + c1 t + c2 t^2 + c3 t^3` with `t = x - x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
}

/// Natural cubic spline through the knots.
pub fn spline_fit(xs: &[f64], ys: &[f64]) -> Result<CubicSpline> {
    CubicSpline::fit(xs, ys, SplineBoundary::Natural)
}

pub fn spline_eval(s: &CubicSpline, x: f64, deriv: usize) -> Result<f64> {
    s.eval(x, deriv)
}

impl CubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64], boundary: SplineBoundary) -> Result<Self> {
        let n = xs.len();
        if n != ys.len() {
            return Err(Error::invalid("knot abscissae and values differ in length"));
        }
        if n < 3 {
            return Err(Error::invalid("a cubic spline needs at least 3 knots"));
        }
        if boundary == SplineBoundary::NotAKnot && n < 4 {
            return Err(Error::invalid("a not-a-knot spline needs at least 4 knots"));
        }
        if let Some(w) = xs.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(format!(
                "knots must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        // second-derivative moments m_i
        let mut sys = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 1..n - 1 {
            sys[(i, i - 1)] = h[i - 1];
            sys[(i, i)] = 2.0 * (h[i - 1] + h[i]);
            sys[(i, i + 1)] = h[i];
            rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
        }
        match boundary {
            SplineBoundary::Natural => {
                sys[(0, 0)] = 1.0;
                sys[(n - 1, n - 1)] = 1.0;
            }
            SplineBoundary::NotAKnot => {
                // (m1 - m0)/h0 = (m2 - m1)/h1, likewise at the right end
                sys[(0, 0)] = h[1];
                sys[(0, 1)] = -(h[0] + h[1]);
                sys[(0, 2)] = h[0];
                let (a, b) = (h[n - 3], h[n - 2]);
                sys[(n - 1, n - 3)] = b;
                sys[(n - 1, n - 2)] = -(a + b);
                sys[(n - 1, n - 1)] = a;
            }
        }
        let m = sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularSystem("spline moment system".into()))?;

        let coeffs = (0..n - 1)
            .map(|i| {
                [
                    ys[i],
                    slope[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0,
                    0.5 * m[i],
                    (m[i + 1] - m[i]) / (6.0 * h[i]),
                ]
            })
            .collect();
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            coeffs,
        })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    pub fn coefficients(&self) -> &[[f64; 4]] {
        &self.coeffs
    }

    /// Evaluates the spline or one of its first two derivatives. Outside
    /// the knot range the end pieces are extended.
    pub fn eval(&self, x: f64, deriv: usize) -> Result<f64> {
        if deriv > 2 {
            return Err(Error::UnsupportedDerivative(deriv));
        }
        let last = self.xs.len() - 1;
        if deriv == 0 && x == self.xs[last] {
            return Ok(self.ys[last]);
        }
        let i = self.xs.partition_point(|&k| k <= x).clamp(1, last) - 1;
        Ok(self.eval_piece(i, x, deriv))
    }

    /// Evaluates piece `i` (valid for any `x`), used for one-sided limits.
    pub fn eval_piece(&self, i: usize, x: f64, deriv: usize) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs[i];
        let t = x - self.xs[i];
        match deriv {
            0 => c0 + t * (c1 + t * (c2 + t * c3)),
            1 => c1 + t * (2.0 * c2 + 3.0 * t * c3),
            _ => 2.0 * c2 + 6.0 * t * c3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dense(n: usize) -> Vec<f64> {
        uniform_grid(n)
    }

    #[test]
    fn sampled_signal_validation() {
        assert!(SampledSignal::new(vec![0.0], vec![1.0]).is_err());
        assert!(SampledSignal::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(SampledSignal::new(vec![0.0, 1.5], vec![1.0, 2.0]).is_err());
        assert!(SampledSignal::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SampledSignal::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(SampledSignal::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn csv_with_and_without_header() {
        let with = "x,y\n0,1\n0.5,2\n1,3\n";
        let without = "0,1\n\n0.5, 2\n1,3";
        let a = SampledSignal::read_csv(with.as_bytes()).unwrap();
        let b = SampledSignal::read_csv(without.as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ys(), &[1.0, 2.0, 3.0]);
        assert!(SampledSignal::read_csv("0,1\nfoo,2\n".as_bytes()).is_err());
        assert!(SampledSignal::read_csv("0,1,2\n".as_bytes()).is_err());
        let text = a.to_csv_string(("x", "y"));
        assert_eq!(SampledSignal::read_csv(text.as_bytes()).unwrap(), a);
    }

    #[test]
    fn restriction_to_subgrid() {
        let s = SampledSignal::from_fn(11, |x| x * x).unwrap();
        let sub = s.restrict_to(&s.xs()[2..9]).unwrap();
        assert_eq!(sub.ys(), &s.ys()[2..9]);
        assert!(s.restrict_to(&[0.05, 0.5]).is_err());
    }

    #[test]
    fn projection_of_constant() {
        let basis = BasisSpec::orthonormal(6);
        let s = SampledSignal::from_fn(20, |_| 1.0).unwrap();
        let u = project(&s, basis, 0.0).unwrap();
        assert!((u.weights()[0] - 1.0).abs() < 1e-12);
        assert!(u.weights()[1..].iter().all(|w| w.abs() < 1e-12));
    }

    #[test]
    fn projection_reproduces_basis_function() {
        let basis = BasisSpec::orthonormal(8);
        let s = SampledSignal::from_fn(9, |x| basis.eval(3, x, 0).unwrap()).unwrap();
        let u = project(&s, basis, 0.0).unwrap();
        for (k, w) in u.weights().iter().enumerate() {
            let e = if k == 3 { 1.0 } else { 0.0 };
            assert!((w - e).abs() < 1e-10, "k={k} w={w}");
        }
    }

    #[test]
    fn projection_of_sine() {
        let basis = BasisSpec::orthonormal(16);
        let s = SampledSignal::from_fn(200, |x| (PI * x).sin()).unwrap();
        let u = project(&s, basis, 0.0).unwrap();
        let err = dense(2001)
            .iter()
            .map(|&x| (u.eval(x, 0).unwrap() - (PI * x).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "err={err}");
    }

    #[test]
    fn projection_errors() {
        let basis = BasisSpec::orthonormal(10);
        let s = SampledSignal::from_fn(5, |x| x).unwrap();
        assert!(project(&s, basis, 0.0).is_err());
        let basis = BasisSpec::orthonormal(3);
        // 4 distinct points would interpolate; duplicated values on 2 points cannot
        let xs = vec![0.0, 1e-14, 0.5, 0.5 + 1e-14];
        let s = SampledSignal::new(xs, vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        assert!(matches!(project(&s, basis, 0.0), Err(Error::RankDeficient)));
        assert!(project(&s, basis, 1e-6).is_ok());
    }

    #[test]
    fn linear_reproduction_and_derivatives() {
        let basis = BasisSpec::orthonormal(5);
        let s = SampledSignal::from_fn(30, |x| 2.0 * x - 1.0).unwrap();
        let u = project(&s, basis, 0.0).unwrap();
        assert!((u.eval(0.75, 0).unwrap() - 0.5).abs() < 1e-10);
        let e0 = SpectralSignal::unit(basis, 0);
        assert!((e0.eval(0.37, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(u.eval(0.5, 3).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let basis = BasisSpec::orthonormal(9);
        let u =
            SpectralSignal::new(basis, (0..10).map(|i| 1.0 / (1.0 + i as f64)).collect()).unwrap();
        let h = 1e-6;
        for &x in &[0.1, 0.45, 0.8] {
            let fd = (u.eval(x + h, 0).unwrap() - u.eval(x - h, 0).unwrap()) / (2.0 * h);
            assert!((u.eval(x, 1).unwrap() - fd).abs() < 1e-6);
            let fd2 = (u.eval(x + h, 1).unwrap() - u.eval(x - h, 1).unwrap()) / (2.0 * h);
            assert!((u.eval(x, 2).unwrap() - fd2).abs() < 1e-5 * (1.0 + fd2.abs()));
        }
    }

    #[test]
    fn energy_values() {
        let basis = BasisSpec::orthonormal(4);
        assert_eq!(SpectralSignal::zeros(basis).energy(), 0.0);
        assert_eq!(SpectralSignal::unit(basis, 2).energy(), 1.0);
    }

    #[test]
    fn spline_on_a_line() {
        let xs = [0.0, 0.2, 0.5, 0.9, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = spline_fit(&xs, &ys).unwrap();
        for &x in &dense(101) {
            assert!((s.eval(x, 0).unwrap() - (3.0 * x - 1.0)).abs() < 1e-12);
            assert!(s.eval(x, 2).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn spline_three_knots() {
        let s = spline_fit(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.eval(0.5, 0).unwrap(), 1.0);
        assert_eq!(s.eval(1.0, 0).unwrap(), 0.0);
        assert!(s.eval(0.0, 2).unwrap().abs() < 1e-12);
        assert!(s.eval(1.0, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn spline_errors() {
        assert!(spline_fit(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(spline_fit(&[0.0, 0.5, 0.5], &[0.0, 1.0, 2.0]).is_err());
        assert!(
            CubicSpline::fit(&[0.0, 0.5, 1.0], &[0.0, 1.0, 0.0], SplineBoundary::NotAKnot).is_err()
        );
    }

    #[test]
    fn not_a_knot_reproduces_cubic() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x + 4.0 * x * x * x;
        let xs = [0.0, 0.1, 0.35, 0.5, 0.8, 1.0];
        let ys: Vec<f64> = xs.iter().map(|&x| p(x)).collect();
        let s = CubicSpline::fit(&xs, &ys, SplineBoundary::NotAKnot).unwrap();
        let err = dense(501)
            .iter()
            .map(|&x| (s.eval(x, 0).unwrap() - p(x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "err={err}");
    }
}

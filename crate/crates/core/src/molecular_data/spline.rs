use crate::error::{Error, Result};

/// Natural cubic spline through tabulated points.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    // second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Mesh(format!(
                "{} abscissae but {} ordinates",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::Mesh("spline needs at least two points".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Mesh("spline abscissae must strictly increase".into()));
        }

        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations, m[0] = m[n-1] = 0.
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i] = 2.0 * (h0 + h1);
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            }
            for i in 2..n - 1 {
                let h0 = x[i] - x[i - 1];
                let w = h0 / diag[i - 1];
                diag[i] -= w * h0;
                rhs[i] -= w * rhs[i - 1];
            }
            m[n - 2] = rhs[n - 2] / diag[n - 2];
            for i in (1..n - 2).rev() {
                let h1 = x[i + 1] - x[i];
                m[i] = (rhs[i] - h1 * m[i + 1]) / diag[i];
            }
        }

        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    fn interval(&self, r: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|p| p.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value at `r`; the end cubics are continued outside the knots.
    pub fn eval(&self, r: f64) -> f64 {
        let i = self.interval(r);
        if r == self.x[i] {
            return self.y[i];
        }
        if r == self.x[i + 1] {
            return self.y[i + 1];
        }
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - r) / h;
        let b = (r - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let i = self.interval(r);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - r) / h;
        let b = (r - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data() {
        let x: Vec<f64> = (0..10).map(|i| 0.3 * i as f64 + 0.1 * (i * i) as f64).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 - 0.7 * r).collect();
        let s = CubicSpline::natural(&x, &y).unwrap();
        let mid = 0.5 * (x[3] + x[4]);
        assert!((s.eval(mid) - (2.0 - 0.7 * mid)).abs() < 1e-14);
    }

    #[test]
    fn exponential_interior_accuracy() {
        let x: Vec<f64> = (0..=50).map(|i| 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|r| (-r).exp()).collect();
        let s = CubicSpline::natural(&x, &y).unwrap();
        for r in [1.234, 2.55, 3.01] {
            assert!((s.eval(r) - (-r).exp()).abs() < 1e-6, "r = {r}");
        }
    }

    #[test]
    fn knots_are_exact() {
        let x = [0.5, 0.9, 1.7, 2.0, 3.3];
        let y = [1.0, -2.0, 0.25, 7.0, 3.0];
        let s = CubicSpline::natural(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(y) {
            assert_eq!(s.eval(*xi), yi);
        }
    }
}

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Exact zero-order-hold sampling of a first-order lag `gain / (tau s + 1)`.
///
/// Returns `(pole, input_coefficient)` of `x[t+1] = pole x[t] + b u[t]`, with
/// `pole = exp(-T / tau)` and `b = gain (1 - pole)`, so the DC gain is kept.
pub fn zoh_first_order(gain: f64, time_constant: f64, sample_time: f64) -> Result<(f64, f64)> {
    if !(time_constant > 0.0 && time_constant.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time constant must be positive, got {time_constant}"
        )));
    }
    if !(sample_time > 0.0 && sample_time.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sample time must be positive, got {sample_time}"
        )));
    }
    let pole = (-sample_time / time_constant).exp();
    Ok((pole, gain * (1.0 - pole)))
}

/// Discrete-time LTI model `x[t+1] = A x[t] + B u[t]`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    state: Vec<f64>,
    output: Vec<f64>,
}

impl StateSpaceModel {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n
            || b.rows() != n
            || c.cols() != n
            || d.rows() != c.rows()
            || d.cols() != b.cols()
        {
            return Err(Error::InvalidShape(format!(
                "non-conformable state-space matrices: A {:?}, B {:?}, C {:?}, D {:?}",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        let ny = c.rows();
        Ok(StateSpaceModel {
            a,
            b,
            c,
            d,
            state: vec![0.0; n],
            output: vec![0.0; ny],
        })
    }

    /// Assembles a MIMO plant whose `(i, j)` channel is the lag
    /// `gains[i][j] / (time_constants[i][j] s + 1)`, each discretized with
    /// [`zoh_first_order`]. Every channel gets its own state; output `i` sums
    /// the states of row `i`.
    pub fn from_first_order_channels(
        gains: &Matrix,
        time_constants: &Matrix,
        sample_time: f64,
    ) -> Result<Self> {
        if gains.shape() != time_constants.shape() {
            return Err(Error::InvalidShape(
                "gain and time-constant matrices differ in shape".into(),
            ));
        }
        let (ny, nu) = gains.shape();
        let n = ny * nu;
        let mut a = Matrix::zeros(n, n);
        let mut b = Matrix::zeros(n, nu);
        let mut c = Matrix::zeros(ny, n);
        for i in 0..ny {
            for j in 0..nu {
                let k = i * nu + j;
                let (pole, coef) =
                    zoh_first_order(gains[(i, j)], time_constants[(i, j)], sample_time)?;
                a[(k, k)] = pole;
                b[(k, j)] = coef;
                c[(i, k)] = 1.0;
            }
        }
        Self::new(a, b, c, Matrix::zeros(ny, nu))
    }

    pub fn n_inputs(&self) -> usize {
        self.b.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.rows()
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|v| *v = 0.0);
        self.output.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Applies `u` for one sample and returns the new output.
    pub fn step(&mut self, u: &[f64]) -> Result<&[f64]> {
        if u.len() != self.n_inputs() {
            return Err(Error::InvalidShape(format!(
                "plant takes {} inputs, got {}",
                self.n_inputs(),
                u.len()
            )));
        }
        let n = self.state.len();
        let mut next = vec![0.0; n];
        for (i, x) in next.iter_mut().enumerate() {
            let ax: f64 = self
                .a
                .row(i)
                .iter()
                .zip(&self.state)
                .map(|(a, s)| a * s)
                .sum();
            let bu: f64 = self.b.row(i).iter().zip(u).map(|(b, u)| b * u).sum();
            *x = ax + bu;
        }
        self.state = next;
        for (i, y) in self.output.iter_mut().enumerate() {
            let cx: f64 = self
                .c
                .row(i)
                .iter()
                .zip(&self.state)
                .map(|(c, s)| c * s)
                .sum();
            let du: f64 = self.d.row(i).iter().zip(u).map(|(d, u)| d * u).sum();
            *y = cx + du;
        }
        Ok(&self.output)
    }

    /// `D + C (I - A)^-1 B`, solved by Gaussian elimination.
    pub fn dc_gain(&self) -> Result<Matrix> {
        let n = self.a.rows();
        let nu = self.n_inputs();
        // Augmented system (I - A) X = B.
        let mut m = Matrix::zeros(n, n + nu);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i == j { 1.0 } else { 0.0 } - self.a[(i, j)];
            }
            for j in 0..nu {
                m[(i, n + j)] = self.b[(i, j)];
            }
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&p, &q| m[(p, col)].abs().total_cmp(&m[(q, col)].abs()))
                .unwrap_or(col);
            if m[(pivot, col)].abs() < 1e-14 {
                return Err(Error::InvalidParameter("plant has a pole at z = 1".into()));
            }
            for j in 0..n + nu {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            for r in 0..n {
                if r != col {
                    let f = m[(r, col)] / m[(col, col)];
                    if f != 0.0 {
                        for j in col..n + nu {
                            m[(r, j)] -= f * m[(col, j)];
                        }
                    }
                }
            }
        }
        let mut x = Matrix::zeros(n, nu);
        for i in 0..n {
            for j in 0..nu {
                x[(i, j)] = m[(i, n + j)] / m[(i, i)];
            }
        }
        let mut g = self.c.matmul(&x)?;
        for (v, d) in g.as_mut_slice().iter_mut().zip(self.d.as_slice()) {
            *v += d;
        }
        Ok(g)
    }

    pub fn scale_gain(&mut self, factor: f64) {
        self.b.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
        self.d.as_mut_slice().iter_mut().for_each(|v| *v *= factor);
    }
}

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Lattice;

/// Closed-form shape of the test field, in lattice coordinates `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldShape {
    /// `1`, so the field is the constant `amplitude`.
    Constant,
    /// `sin 2πx · sin 2πy`.
    SinSin,
    /// `sin 2πx · sin 2πy + ½ cos 2πx`.
    Default,
}

impl std::str::FromStr for FieldShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "sinsin" => Ok(Self::SinSin),
            "default" => Ok(Self::Default),
            other => Err(Error::InvalidInput(format!("unknown field {other:?}"))),
        }
    }
}

impl FieldShape {
    /// Value, lattice gradient and lattice Hessian at `(x, y)`.
    fn eval(self, x: f64, y: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        match self {
            Self::Constant => (1.0, [0.0; 2], [[0.0; 2]; 2]),
            Self::SinSin | Self::Default => {
                let (sx, cx) = (TAU * x).sin_cos();
                let (sy, cy) = (TAU * y).sin_cos();
                let w2 = TAU * TAU;
                let mut v = sx * sy;
                let mut g = [TAU * cx * sy, TAU * sx * cy];
                let mut h = [[-w2 * sx * sy, w2 * cx * cy], [w2 * cx * cy, -w2 * sx * sy]];
                if self == Self::Default {
                    v += 0.5 * cx;
                    g[0] -= 0.5 * TAU * sx;
                    h[0][0] -= 0.5 * w2 * cx;
                }
                (v, g, h)
            }
        }
    }
}

/// Flat unit-area torus with a smooth conformal factor `ū`.
///
/// The background metric is `g = e^{−2ū}·flat`, so `e^{2ū} g` is the flat
/// lattice metric and `ū` is exactly the uniformization factor of `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothTorusModel {
    pub lattice: Lattice,
    pub shape: FieldShape,
    pub amplitude: f64,
}

/// `ū` and its Cartesian derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

impl SmoothTorusModel {
    pub fn new(lattice: Lattice, shape: FieldShape, amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::InvalidInput("amplitude must be finite".into()));
        }
        if (lattice.area() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("lattice area {} is not 1", lattice.area())));
        }
        Ok(Self { lattice, shape, amplitude })
    }

    /// Default field on the unit hexagonal lattice.
    pub fn hexagonal(shape: FieldShape, amplitude: f64) -> Self {
        Self { lattice: Lattice::hexagonal_unit(), shape, amplitude }
    }

    pub fn sample(&self, p: [f64; 2]) -> FieldSample {
        let [x, y] = self.lattice.coordinates(p);
        let (v, g, h) = self.shape.eval(x, y);
        // Rows of the inverse basis matrix map Cartesian to lattice coordinates.
        let det = self.lattice.determinant();
        let (a, b) = (self.lattice.a, self.lattice.b);
        let inv = [[b[1] / det, -b[0] / det], [-a[1] / det, a[0] / det]];
        let a_amp = self.amplitude;
        let gradient = [a_amp * (inv[0][0] * g[0] + inv[1][0] * g[1]), a_amp * (inv[0][1] * g[0] + inv[1][1] * g[1])];
        let mut hessian = [[0.0; 2]; 2];
        for (r, row) in hessian.iter_mut().enumerate() {
            for (c, out) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += inv[p][r] * h[p][q] * inv[q][c];
                    }
                }
                *out = a_amp * s;
            }
        }
        FieldSample { value: a_amp * v, gradient, hessian }
    }

    pub fn ubar(&self, p: [f64; 2]) -> f64 {
        let [x, y] = self.lattice.coordinates(p);
        self.amplitude * self.shape.eval(x, y).0
    }

    /// Log-density of the background metric, `g = e^{2φ}·flat` with `φ = −ū`.
    pub fn background_log_density(&self, p: [f64; 2]) -> f64 {
        -self.ubar(p)
    }

    /// Range `max ū − min ū` over a `samples × samples` grid of lattice points.
    pub fn oscillation(&self, samples: usize) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..samples {
            for j in 0..samples {
                let x = i as f64 / samples as f64;
                let y = j as f64 / samples as f64;
                let v = self.amplitude * self.shape.eval(x, y).0;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        hi - lo
    }

    /// Whether the conformal oscillation leaves room for a uniform packing
    /// at `eps`: `exp(osc) < sqrt(2 / (1 + eps))`.
    pub fn admits_uniform_packing(&self, eps: f64) -> bool {
        self.oscillation(256).exp() < (2.0 / (1.0 + eps)).sqrt()
    }
}

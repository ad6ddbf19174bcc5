//! Reference solutions the validation cases are checked against.

use crate::error::{Error, Result};

/// Modified Bessel function of the second kind `K_ν(x)`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x) * (-x).exp()
}

/// `eˣ K_ν(x)` from `∫₀^∞ exp(−x (cosh t − 1)) cosh(ν t) dt` by the
/// trapezoidal rule, which converges geometrically for this integrand.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k needs x > 0");
    // The integrand is below e^-700 beyond this point.
    let t_max = (1.0 + 700.0 / x).acosh() + 1.0;
    let n = 4000;
    let h = t_max / n as f64;
    let f = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    let mut s = 0.5 * (f(0.0) + f(t_max));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s * h
}

/// Maximum hoop stress at a circular hole in an infinite Cosserat plate
/// under uniaxial tension, normalized by the applied stress.
///
/// `a = G_c/G`, `r_over_l = r/ℓ`. For `a = 0` the classical factor 3 is returned.
pub fn kirsch_cosserat_scf(poisson_ratio: f64, a: f64, r_over_l: f64) -> f64 {
    if a <= 0.0 {
        return 3.0;
    }
    let n2 = a / (1.0 + a);
    // c = ℓ √((1+a)/a), x = r/c
    let x = r_over_l / ((1.0 + a) / a).sqrt();
    let ratio = bessel_k_scaled(0.0, x) / bessel_k_scaled(1.0, x);
    let f = 8.0 * (1.0 - poisson_ratio) * n2 / (4.0 + x * x + 2.0 * x * ratio);
    (3.0 + f) / (1.0 + f)
}

/// One row of a stress-concentration table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScfRow {
    pub a: f64,
    pub r_over_l: f64,
    pub analytical: f64,
    pub computed: f64,
}

/// Plate with a hole, r = 0.216 mm, r/ℓ = 1.063, varying a.
pub const PLATE_TEST_1: [ScfRow; 5] = [
    ScfRow { a: 0.0, r_over_l: 1.063, analytical: 3.000, computed: 2.998 },
    ScfRow { a: 0.0667, r_over_l: 1.063, analytical: 2.849, computed: 2.848 },
    ScfRow { a: 0.3333, r_over_l: 1.063, analytical: 2.555, computed: 2.555 },
    ScfRow { a: 1.2857, r_over_l: 1.063, analytical: 2.287, computed: 2.287 },
    ScfRow { a: 4.2632, r_over_l: 1.063, analytical: 2.158, computed: 2.157 },
];

/// Plate with a hole, r = 0.216 mm, r/ℓ = 10.63, varying a.
pub const PLATE_TEST_2: [ScfRow; 5] = [
    ScfRow { a: 0.0, r_over_l: 10.63, analytical: 3.000, computed: 2.998 },
    ScfRow { a: 0.0667, r_over_l: 10.63, analytical: 2.956, computed: 2.955 },
    ScfRow { a: 0.3333, r_over_l: 10.63, analytical: 2.935, computed: 2.936 },
    ScfRow { a: 1.2857, r_over_l: 10.63, analytical: 2.927, computed: 2.929 },
    ScfRow { a: 4.2632, r_over_l: 10.63, analytical: 2.923, computed: 2.925 },
];

/// Plate with a hole, r = 0.864 mm, a = 0.3333, varying r/ℓ.
pub const PLATE_TEST_3: [ScfRow; 7] = [
    ScfRow { a: 0.3333, r_over_l: 1.0, analytical: 2.549, computed: 2.566 },
    ScfRow { a: 0.3333, r_over_l: 2.0, analytical: 2.641, computed: 2.660 },
    ScfRow { a: 0.3333, r_over_l: 3.0, analytical: 2.719, computed: 2.740 },
    ScfRow { a: 0.3333, r_over_l: 4.0, analytical: 2.779, computed: 2.801 },
    ScfRow { a: 0.3333, r_over_l: 6.0, analytical: 2.857, computed: 2.881 },
    ScfRow { a: 0.3333, r_over_l: 8.0, analytical: 2.902, computed: 2.927 },
    ScfRow { a: 0.3333, r_over_l: 10.0, analytical: 2.929, computed: 2.955 },
];

/// Shear layer of height `h` between `y = 0` (u₁ = 0, φ = 0) and `y = h`
/// (u₁ = U, φ = Φ), with no dependence on `x` and `u₂ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearLayer {
    pub height: f64,
    pub shear_modulus: f64,
    pub coupling_ratio: f64,
    pub length: f64,
    pub top_displacement: f64,
    pub top_rotation: f64,
}

/// Discrete profiles `u₁(y)`, `φ(y)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerProfile {
    pub y: Vec<f64>,
    pub u1: Vec<f64>,
    pub phi: Vec<f64>,
    /// Constant shear stress σ_xy through the layer.
    pub shear_stress: f64,
}

impl ShearLayer {
    /// Decay rate of the boundary layer, `k² = a / ((1+a) ℓ²)`.
    fn decay(&self) -> f64 {
        let a = self.coupling_ratio;
        (a / ((1.0 + a) * self.length * self.length)).sqrt()
    }

    /// Finite-difference solution with `n` intervals.
    ///
    /// With `ψ = φ + τ/(2G)` the reduced equations are `ψ'' = k² ψ` and
    /// `u₁' = τ/G − 2aψ/(1+a)`; τ follows from `u₁(h) = U`. Because ψ is
    /// affine in τ, two tridiagonal solves and one scalar equation suffice.
    pub fn solve_fd(&self, n: usize) -> Result<LayerProfile> {
        if n < 2 {
            return Err(Error::Config("shear layer needs at least 2 intervals".into()));
        }
        if self.coupling_ratio <= 0.0 || self.length <= 0.0 {
            return Err(Error::Config("shear layer needs a > 0 and ℓ > 0".into()));
        }
        let (h, g, a) = (self.height, self.shear_modulus, self.coupling_ratio);
        let dy = h / n as f64;
        let k2 = self.decay().powi(2);
        // ψ = ψ_a + τ ψ_b with ψ_a(0) = 0, ψ_a(h) = Φ and ψ_b ≡ 1/(2G) at both ends.
        let psi_a = solve_dirichlet_helmholtz(n, dy, k2, 0.0, self.top_rotation);
        let psi_b = solve_dirichlet_helmholtz(n, dy, k2, 0.5 / g, 0.5 / g);
        let c = 2.0 * a / (1.0 + a);
        let trap = |v: &[f64]| -> f64 { dy * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n])) };
        // u₁(h) = τ h/G − c ∫ψ_a − τ c ∫ψ_b
        let tau = (self.top_displacement + c * trap(&psi_a)) / (h / g - c * trap(&psi_b));
        let psi: Vec<f64> = psi_a.iter().zip(&psi_b).map(|(pa, pb)| pa + tau * pb).collect();
        let y: Vec<f64> = (0..=n).map(|i| i as f64 * dy).collect();
        let mut u1 = vec![0.0; n + 1];
        for i in 1..=n {
            let slope = |j: usize| tau / g - c * psi[j];
            u1[i] = u1[i - 1] + 0.5 * dy * (slope(i - 1) + slope(i));
        }
        let phi = psi.iter().map(|p| p - tau / (2.0 * g)).collect();
        Ok(LayerProfile { y, u1, phi, shear_stress: tau })
    }

    /// Closed-form solution of the same reduced equations at height `y`.
    pub fn exact(&self, y: f64) -> (f64, f64) {
        let (h, g, a) = (self.height, self.shear_modulus, self.coupling_ratio);
        let k = self.decay();
        let sh = (k * h).sinh();
        let int_psi = |p0: f64, p1: f64, y: f64| {
            (p0 * ((k * h).cosh() - (k * (h - y)).cosh()) + p1 * ((k * y).cosh() - 1.0)) / (k * sh)
        };
        let c = 2.0 * a / (1.0 + a);
        let half = 0.5 / g;
        let tau = (self.top_displacement + c * int_psi(0.0, self.top_rotation, h)) / (h / g - c * int_psi(half, half, h));
        let p0 = tau * half;
        let p1 = self.top_rotation + tau * half;
        let psi = (p0 * (k * (h - y)).sinh() + p1 * (k * y).sinh()) / sh;
        let u = tau * y / g - c * int_psi(p0, p1, y);
        (u, psi - tau * half)
    }
}

impl LayerProfile {
    /// Linear interpolation of `(u₁, φ)` at height `y`.
    pub fn at(&self, y: f64) -> (f64, f64) {
        let n = self.y.len() - 1;
        let h = self.y[n];
        let s = (y / h * n as f64).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        (
            (1.0 - w) * self.u1[i] + w * self.u1[i + 1],
            (1.0 - w) * self.phi[i] + w * self.phi[i + 1],
        )
    }

    /// Largest change between this profile and a coarser one, relative to
    /// each field's maximum magnitude, sampled on the coarse grid.
    pub fn relative_change(&self, coarse: &LayerProfile) -> (f64, f64) {
        let (mut du, mut dp) = (0.0f64, 0.0f64);
        for (i, &y) in coarse.y.iter().enumerate() {
            let (u, p) = self.at(y);
            du = du.max((u - coarse.u1[i]).abs());
            dp = dp.max((p - coarse.phi[i]).abs());
        }
        (du / max_abs(&self.u1), dp / max_abs(&self.phi))
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `ψ'' − k² ψ = 0` on `n` intervals with end values `left`, `right`.
fn solve_dirichlet_helmholtz(n: usize, dy: f64, k2: f64, left: f64, right: f64) -> Vec<f64> {
    let m = n - 1;
    let mut psi = vec![0.0; n + 1];
    psi[0] = left;
    psi[n] = right;
    if m == 0 {
        return psi;
    }
    // Row i: ψ_{i-1} − (2 + k²dy²) ψ_i + ψ_{i+1} = 0 (Thomas algorithm).
    let diag = -(2.0 + k2 * dy * dy);
    let mut c_prime = vec![0.0; m];
    let mut d_prime = vec![0.0; m];
    for j in 0..m {
        let mut rhs = 0.0;
        if j == 0 {
            rhs -= left;
        }
        if j == m - 1 {
            rhs -= right;
        }
        let (lower, prev_c, prev_d) = if j == 0 { (0.0, 0.0, 0.0) } else { (1.0, c_prime[j - 1], d_prime[j - 1]) };
        let denom = diag - lower * prev_c;
        c_prime[j] = 1.0 / denom;
        d_prime[j] = (rhs - lower * prev_d) / denom;
    }
    psi[m] = d_prime[m - 1];
    for j in (0..m - 1).rev() {
        psi[j + 1] = d_prime[j] - c_prime[j] * psi[j + 2];
    }
    psi
}

//! Isotropic Cosserat elasticity in two and three dimensions.
//!
//! Strains are flattened row-major: `e[i*d + j] = e_ij`. In 2D the curvature
//! is the gradient of the scalar micro-rotation (two entries); in 3D it is the
//! full 3×3 tensor `κ_ij = ∂φ_i/∂x_j` (nine entries).

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};

/// Plane Cosserat law parameterized by shear modulus, Poisson ratio, the
/// coupling ratio `a = G_c / G` and the characteristic length `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosseratMaterial2D {
    pub shear_modulus: f64,
    pub poisson_ratio: f64,
    pub coupling_ratio: f64,
    pub length: f64,
    pub density: f64,
    /// Micro-inertia per unit mass (m²).
    pub micro_inertia: f64,
}

impl CosseratMaterial2D {
    pub fn new(shear_modulus: f64, poisson_ratio: f64, coupling_ratio: f64, length: f64) -> Result<Self> {
        if !(shear_modulus > 0.0) {
            return Err(Error::InvalidMaterial("G must be positive".into()));
        }
        if !(poisson_ratio < 0.5 && poisson_ratio > -1.0) {
            return Err(Error::InvalidMaterial(format!(
                "Poisson ratio {poisson_ratio} outside (-1, 0.5)"
            )));
        }
        if !(coupling_ratio >= 0.0) || !(length >= 0.0) {
            return Err(Error::InvalidMaterial("a and ℓ must be non-negative".into()));
        }
        Ok(CosseratMaterial2D {
            shear_modulus,
            poisson_ratio,
            coupling_ratio,
            length,
            density: 1.0,
            micro_inertia: 1.0,
        })
    }

    /// Plane law from Lamé's first parameter and the two shear moduli.
    pub fn from_lame(lambda: f64, shear_modulus: f64, coupling_modulus: f64, length: f64) -> Result<Self> {
        let nu = lambda / (2.0 * (lambda + shear_modulus));
        Self::new(shear_modulus, nu, coupling_modulus / shear_modulus, length)
    }

    pub fn with_inertia(mut self, density: f64, micro_inertia: f64) -> Result<Self> {
        if !(density > 0.0) || !(micro_inertia > 0.0) {
            return Err(Error::InvalidMaterial("density and micro-inertia must be positive".into()));
        }
        self.density = density;
        self.micro_inertia = micro_inertia;
        Ok(self)
    }

    /// 2(1−ν)/(1−2ν)
    pub fn coef_a(&self) -> f64 {
        2.0 * (1.0 - self.poisson_ratio) / (1.0 - 2.0 * self.poisson_ratio)
    }

    /// 2ν/(1−2ν)
    pub fn coef_b(&self) -> f64 {
        2.0 * self.poisson_ratio / (1.0 - 2.0 * self.poisson_ratio)
    }

    pub fn stress(&self, e: &Matrix2<f64>) -> Matrix2<f64> {
        let g = self.shear_modulus;
        let (aa, bb, a) = (self.coef_a(), self.coef_b(), self.coupling_ratio);
        Matrix2::new(
            g * (aa * e[(0, 0)] + bb * e[(1, 1)]),
            g * ((1.0 + a) * e[(0, 1)] + (1.0 - a) * e[(1, 0)]),
            g * ((1.0 - a) * e[(0, 1)] + (1.0 + a) * e[(1, 0)]),
            g * (bb * e[(0, 0)] + aa * e[(1, 1)]),
        )
    }

    pub fn couple(&self, kappa: &Vector2<f64>) -> Vector2<f64> {
        kappa * self.couple_modulus()
    }

    /// 4Gℓ²
    pub fn couple_modulus(&self) -> f64 {
        4.0 * self.shear_modulus * self.length * self.length
    }
}

/// Three-dimensional isotropic Cosserat law with six moduli.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosseratMaterial3D {
    pub bulk_modulus: f64,
    pub shear_modulus: f64,
    pub coupling_modulus: f64,
    pub l_modulus: f64,
    pub m_modulus: f64,
    pub mc_modulus: f64,
    pub density: f64,
    pub micro_inertia: f64,
}

impl CosseratMaterial3D {
    pub fn new(k: f64, g: f64, gc: f64, l: f64, m: f64, mc: f64) -> Result<Self> {
        if !(k > 0.0) || !(g > 0.0) {
            return Err(Error::InvalidMaterial("K and G must be positive".into()));
        }
        if [gc, l, m, mc].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidMaterial("G_c, L, M, M_c must be non-negative".into()));
        }
        Ok(CosseratMaterial3D {
            bulk_modulus: k,
            shear_modulus: g,
            coupling_modulus: gc,
            l_modulus: l,
            m_modulus: m,
            mc_modulus: mc,
            density: 1.0,
            micro_inertia: 1.0,
        })
    }

    /// Same law with Lamé's λ instead of the bulk modulus (K = λ + 2G/3).
    pub fn from_lame(lambda: f64, g: f64, gc: f64, l: f64, m: f64, mc: f64) -> Result<Self> {
        Self::new(lambda + 2.0 * g / 3.0, g, gc, l, m, mc)
    }

    pub fn with_inertia(mut self, density: f64, micro_inertia: f64) -> Result<Self> {
        if !(density > 0.0) || !(micro_inertia > 0.0) {
            return Err(Error::InvalidMaterial("density and micro-inertia must be positive".into()));
        }
        self.density = density;
        self.micro_inertia = micro_inertia;
        Ok(self)
    }

    pub fn stress(&self, e: &Matrix3<f64>) -> Matrix3<f64> {
        isotropic_3d(e, self.bulk_modulus, self.shear_modulus, self.coupling_modulus)
    }

    pub fn couple(&self, kappa: &Matrix3<f64>) -> Matrix3<f64> {
        isotropic_3d(kappa, self.l_modulus, self.m_modulus, self.mc_modulus)
    }
}

/// `k tr(e) 1 + 2g (Sym e − tr(e)/3 1) + 2gc Skew e`
fn isotropic_3d(e: &Matrix3<f64>, k: f64, g: f64, gc: f64) -> Matrix3<f64> {
    let tr = e.trace();
    let sym = (e + e.transpose()) * 0.5;
    let skew = (e - e.transpose()) * 0.5;
    Matrix3::identity() * (k * tr) + (sym - Matrix3::identity() * (tr / 3.0)) * (2.0 * g) + skew * (2.0 * gc)
}

/// Flattened 9×9 matrix of [`isotropic_3d`].
fn isotropic_3d_matrix(k: f64, g: f64, gc: f64) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(9, 9);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    for i in 0..3 {
        for j in 0..3 {
            for k2 in 0..3 {
                for l in 0..3 {
                    c[(i * 3 + j, k2 * 3 + l)] = (k - 2.0 * g / 3.0) * delta(i, j) * delta(k2, l)
                        + (g + gc) * delta(i, k2) * delta(j, l)
                        + (g - gc) * delta(i, l) * delta(j, k2);
                }
            }
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    Plane(CosseratMaterial2D),
    Solid(CosseratMaterial3D),
}

impl Material {
    pub fn dim(&self) -> usize {
        match self {
            Material::Plane(_) => 2,
            Material::Solid(_) => 3,
        }
    }

    /// Number of micro-rotation components per cell.
    pub fn rotation_dim(&self) -> usize {
        match self {
            Material::Plane(_) => 1,
            Material::Solid(_) => 3,
        }
    }

    /// Number of curvature entries per cell.
    pub fn curvature_dim(&self) -> usize {
        self.rotation_dim() * self.dim()
    }

    /// Stiffness ℂ acting on flattened strains.
    pub fn stiffness(&self) -> DMatrix<f64> {
        match self {
            Material::Plane(m) => {
                let g = m.shear_modulus;
                let (aa, bb, a) = (m.coef_a(), m.coef_b(), m.coupling_ratio);
                DMatrix::from_row_slice(
                    4,
                    4,
                    &[
                        g * aa, 0.0, 0.0, g * bb,
                        0.0, g * (1.0 + a), g * (1.0 - a), 0.0,
                        0.0, g * (1.0 - a), g * (1.0 + a), 0.0,
                        g * bb, 0.0, 0.0, g * aa,
                    ],
                )
            }
            Material::Solid(m) => isotropic_3d_matrix(m.bulk_modulus, m.shear_modulus, m.coupling_modulus),
        }
    }

    /// Couple stiffness 𝔻 acting on flattened curvatures.
    pub fn couple_stiffness(&self) -> DMatrix<f64> {
        match self {
            Material::Plane(m) => DMatrix::identity(2, 2) * m.couple_modulus(),
            Material::Solid(m) => isotropic_3d_matrix(m.l_modulus, m.m_modulus, m.mc_modulus),
        }
    }

    pub fn density(&self) -> f64 {
        match self {
            Material::Plane(m) => m.density,
            Material::Solid(m) => m.density,
        }
    }

    pub fn micro_inertia(&self) -> f64 {
        match self {
            Material::Plane(m) => m.micro_inertia,
            Material::Solid(m) => m.micro_inertia,
        }
    }

    pub fn shear_modulus(&self) -> f64 {
        match self {
            Material::Plane(m) => m.shear_modulus,
            Material::Solid(m) => m.shear_modulus,
        }
    }

    /// Length weighting rotations in the boundary damping: the ℓ parameter
    /// of the plane law, the characteristic length in 3D.
    pub fn damping_length(&self) -> f64 {
        match self {
            Material::Plane(m) => m.length,
            Material::Solid(_) => characteristic_length(&self.stiffness(), &self.couple_stiffness()),
        }
    }
}

/// ℓ = sqrt(max 𝔻 / max ℂ) over all tensor entries.
pub fn characteristic_length(stiffness: &DMatrix<f64>, couple: &DMatrix<f64>) -> f64 {
    let max_d = couple.iter().copied().fold(0.0, f64::max);
    let max_c = stiffness.iter().copied().fold(0.0, f64::max);
    if max_d <= 0.0 {
        return 0.0;
    }
    (max_d / max_c).sqrt()
}

/// Permutation symbol applied to a rotation: (ε·φ)_ij = ε_ijk φ_k.
/// In 2D `phi` has one entry and the result is [[0, φ], [−φ, 0]].
pub fn epsilon_dot(dim: usize, phi: &[f64]) -> Vec<f64> {
    if dim == 2 {
        vec![0.0, phi[0], -phi[0], 0.0]
    } else {
        let mut out = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i * 3 + j] += levi_civita(i, j, k) * phi[k];
                }
            }
        }
        out
    }
}

pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// ε:σ, the moment of a (flattened) force-stress; one entry in 2D, three in 3D.
pub fn epsilon_contract(dim: usize, sigma: &[f64]) -> Vec<f64> {
    if dim == 2 {
        vec![sigma[1] - sigma[2]]
    } else {
        (0..3)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..3 {
                    for k in 0..3 {
                        s += levi_civita(i, j, k) * sigma[j * 3 + k];
                    }
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn patch_material() -> CosseratMaterial2D {
        CosseratMaterial2D::new(1e3, 0.25, 0.5, 0.1).unwrap()
    }

    #[test]
    fn first_patch_stress() {
        let m = patch_material();
        let g = m.shear_modulus;
        let e = Matrix2::new(1.0, 0.75, 0.75, 1.0) / g;
        let s = m.stress(&e);
        assert!((s - Matrix2::new(4.0, 1.5, 1.5, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn second_patch_stress_is_not_symmetric() {
        let m = patch_material();
        let g = m.shear_modulus;
        let e = Matrix2::new(1.0, 0.25, 1.25, 1.0) / g;
        let s = m.stress(&e);
        assert!((s[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((s[(1, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn third_patch_couple() {
        let m = patch_material();
        let k = Vector2::new(-1.0, 1.0) / m.shear_modulus;
        let mu = m.couple(&k);
        assert!((mu - Vector2::new(-0.04, 0.04)).norm() < 1e-15);
        assert!((m.couple(&(2.0 * k)) - 2.0 * mu).norm() < 1e-15);
        assert_eq!(m.couple(&Vector2::zeros()), Vector2::zeros());
        assert_eq!(m.stress(&Matrix2::zeros()), Matrix2::zeros());
    }

    #[test]
    fn incompressible_limit_rejected() {
        assert!(CosseratMaterial2D::new(1.0, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn plane_matrix_matches_stress() {
        let m = patch_material();
        let c = Material::Plane(m).stiffness();
        let e = Matrix2::new(0.3, -1.2, 0.7, 2.1);
        let flat = DVector::from_row_slice(&[e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]]);
        let s = &c * flat;
        let direct = m.stress(&e);
        assert!((s[0] - direct[(0, 0)]).abs() < 1e-12);
        assert!((s[1] - direct[(0, 1)]).abs() < 1e-12);
        assert!((s[2] - direct[(1, 0)]).abs() < 1e-12);
        assert!((s[3] - direct[(1, 1)]).abs() < 1e-12);
    }

    #[test]
    fn skew_symmetry_when_a_is_zero() {
        let m = CosseratMaterial2D::new(2.0, 0.1, 0.0, 0.0).unwrap();
        let s = m.stress(&Matrix2::new(0.1, 0.9, -0.4, 0.2));
        assert!((s[(0, 1)] - s[(1, 0)]).abs() < 1e-14);
        // σxy − σyx = 2aG(exy − eyx)
        let m = CosseratMaterial2D::new(2.0, 0.1, 0.7, 0.0).unwrap();
        let s = m.stress(&Matrix2::new(0.1, 0.9, -0.4, 0.2));
        assert!((s[(0, 1)] - s[(1, 0)] - 2.0 * 0.7 * 2.0 * 1.3).abs() < 1e-13);
    }

    fn beam_material() -> CosseratMaterial3D {
        let l = 1e-5;
        let g = 10e9;
        CosseratMaterial3D::new(16.67e9, g, 5e9, g * l * l, 2.5 * g * l * l, 2.5 * g * l * l).unwrap()
    }

    #[test]
    fn solid_identity_and_skew() {
        let m = beam_material();
        let s = m.stress(&Matrix3::identity());
        assert!((s - Matrix3::identity() * 3.0 * m.bulk_modulus).norm() < 1e-3);
        let w = [0.2, -0.5, 0.9];
        let e = epsilon_dot(3, &w);
        let e = Matrix3::from_row_slice(&e);
        let s = m.stress(&e);
        assert!((s - e * (2.0 * m.coupling_modulus)).norm() < 1e-3);
    }

    #[test]
    fn solid_matrix_matches_formula() {
        let m = beam_material();
        let c = Material::Solid(m).stiffness();
        let vals = [0.3, -0.1, 0.7, 0.2, -0.9, 0.4, 1.1, 0.05, -0.6];
        let e = Matrix3::from_row_slice(&vals);
        let flat = &c * DVector::from_row_slice(&vals);
        let direct = m.stress(&e);
        for i in 0..3 {
            for j in 0..3 {
                assert!((flat[i * 3 + j] - direct[(i, j)]).abs() < 1e-12 * 1e10);
            }
        }
    }

    #[test]
    fn characteristic_length_examples() {
        // 2D: max 𝔻 = 4Gℓ², max ℂ = G·𝔞 when 𝔞 > 1 + a.
        let m = patch_material();
        let mat = Material::Plane(m);
        let l = characteristic_length(&mat.stiffness(), &mat.couple_stiffness());
        let enumerated_max = mat.stiffness().iter().copied().fold(f64::MIN, f64::max);
        assert!((enumerated_max - m.shear_modulus * m.coef_a()).abs() < 1e-12);
        assert!((l - 2.0 * 0.1 / m.coef_a().sqrt()).abs() < 1e-14);
        let d4 = mat.couple_stiffness() * 4.0;
        assert!((characteristic_length(&mat.stiffness(), &d4) - 2.0 * l).abs() < 1e-14);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(characteristic_length(&mat.stiffness(), &zero), 0.0);
    }

    #[test]
    fn epsilon_conventions() {
        assert_eq!(epsilon_dot(2, &[1.0]), vec![0.0, 1.0, -1.0, 0.0]);
        let e3 = epsilon_dot(3, &[0.0, 0.0, 1.0]);
        assert_eq!(e3[1], 1.0);
        assert_eq!(e3[3], -1.0);
        assert_eq!(epsilon_contract(2, &[4.0, 1.0, 2.0, 4.0]), vec![-1.0]);
    }

    #[test]
    fn lame_conversion() {
        let m = CosseratMaterial2D::from_lame(3.76e9, 7.52e9, 7.52e9, 1.0).unwrap();
        assert!((m.coef_b() * m.shear_modulus - 3.76e9).abs() < 1e-3);
        assert!((m.coupling_ratio - 1.0).abs() < 1e-15);
    }
}

//! Second-order (ice-cream) cone geometry.
//!
//! `Q_s = {y in R^s : (y_2² + … + y_s²)^{1/2} <= y_1}`. The boundary away
//! from the apex is a smooth curved surface whose normal ray is spanned by
//! `q(y) = (-1, y_2/⫴y⫴, …, y_s/⫴y⫴)`.

use crate::error::{CurvError, Result};
use crate::linalg;

pub const SOC_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SecondOrderCone {
    s: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SocLocation {
    Interior,
    Apex,
    Boundary,
}

/// `⫴y⫴`: Euclidean norm of the tail components.
pub fn circ_norm(y: &[f64]) -> f64 {
    linalg::norm(&y[1..])
}

/// `⟨⟨y, v⟩⟩`: inner product of the tail components.
pub fn circ_dot(y: &[f64], v: &[f64]) -> f64 {
    linalg::dot(&y[1..], &v[1..])
}

impl SecondOrderCone {
    pub fn new(s: usize) -> Self {
        assert!(s >= 3, "second-order cone needs ambient dimension >= 3");
        SecondOrderCone { s }
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.s {
            return Err(CurvError::DimensionMismatch {
                expected: self.s,
                got: y.len(),
            });
        }
        Ok(())
    }

    pub fn member(&self, y: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(y)?;
        Ok(circ_norm(y) <= y[0] + tol)
    }

    /// Classifies a member point. Callers must ensure membership first.
    pub fn classify(&self, y: &[f64]) -> Result<SocLocation> {
        self.check_dim(y)?;
        if linalg::norm(y) <= SOC_TOL {
            return Ok(SocLocation::Apex);
        }
        if circ_norm(y) < y[0] - SOC_TOL {
            return Ok(SocLocation::Interior);
        }
        Ok(SocLocation::Boundary)
    }

    /// `v ∈ T_{Q_s}(y)`.
    pub fn tangent_member(&self, y: &[f64], v: &[f64]) -> Result<bool> {
        self.check_dim(v)?;
        match self.classify(y)? {
            SocLocation::Interior => Ok(true),
            SocLocation::Apex => self.member(v, SOC_TOL),
            SocLocation::Boundary => Ok(circ_dot(y, v) <= y[0] * v[0] + SOC_TOL),
        }
    }

    /// Spanning direction `q(y)` of the outward normal ray at a boundary
    /// point (`⫴y⫴`-normalized tail, leading component -1).
    pub fn q_dir(&self, y: &[f64]) -> Vec<f64> {
        let cn = circ_norm(y);
        let mut q = vec![0.0; self.s];
        q[0] = -1.0;
        for i in 1..self.s {
            q[i] = y[i] / cn;
        }
        q
    }

    /// `y* ∈ N_{Q_s}(y)`.
    pub fn normal_cone_member(&self, y: &[f64], ystar: &[f64]) -> Result<bool> {
        self.check_dim(ystar)?;
        match self.classify(y)? {
            SocLocation::Interior => Ok(linalg::norm(ystar) <= SOC_TOL),
            // Polar cone of Q_s is -Q_s.
            SocLocation::Apex => {
                let reflected: Vec<f64> = ystar.iter().map(|v| -v).collect();
                self.member(&reflected, SOC_TOL)
            }
            SocLocation::Boundary => {
                let beta = -ystar[0];
                if beta < -SOC_TOL {
                    return Ok(false);
                }
                let q = self.q_dir(y);
                let resid: Vec<f64> =
                    ystar.iter().zip(&q).map(|(a, b)| a - beta * b).collect();
                Ok(linalg::norm(&resid) <= SOC_TOL * (1.0 + linalg::norm(ystar)))
            }
        }
    }

    /// Closed-form Euclidean projection.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let cn = circ_norm(x);
        if cn <= x[0] {
            return Ok(x.to_vec());
        }
        if cn <= -x[0] {
            return Ok(vec![0.0; self.s]);
        }
        let alpha = (x[0] + cn) / 2.0;
        let mut y = vec![0.0; self.s];
        y[0] = alpha;
        for i in 1..self.s {
            y[i] = alpha * x[i] / cn;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q3() -> SecondOrderCone {
        SecondOrderCone::new(3)
    }

    #[test]
    fn membership() {
        assert!(q3().member(&[1.0, 0.0, 0.0], 1e-9).unwrap());
        assert!(!q3().member(&[0.0, 0.0, 1.0], 1e-9).unwrap());
        assert!(q3().member(&[1.0, 1.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn classification() {
        assert_eq!(q3().classify(&[2.0, 0.0, 0.0]).unwrap(), SocLocation::Interior);
        assert_eq!(q3().classify(&[0.0, 0.0, 0.0]).unwrap(), SocLocation::Apex);
        assert_eq!(q3().classify(&[1.0, 1.0, 0.0]).unwrap(), SocLocation::Boundary);
    }

    #[test]
    fn boundary_tangency() {
        // <<y, v>> = 1 <= y1 v1 = 2.
        assert!(q3().tangent_member(&[1.0, 1.0, 0.0], &[2.0, 1.0, 0.0]).unwrap());
        assert!(!q3().tangent_member(&[1.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap());
    }

    #[test]
    fn q_dir_and_normals() {
        let y = [1.0, 1.0, 0.0];
        assert_eq!(q3().q_dir(&y), vec![-1.0, 1.0, 0.0]);
        assert!(q3().normal_cone_member(&y, &[-2.0, 2.0, 0.0]).unwrap());
        assert!(!q3().normal_cone_member(&y, &[2.0, -2.0, 0.0]).unwrap());
        assert!(q3().normal_cone_member(&[2.0, 0.0, 0.0], &[0.0; 3]).unwrap());
        assert!(q3()
            .normal_cone_member(&[0.0; 3], &[-1.0, 0.5, 0.0])
            .unwrap());
    }

    #[test]
    fn closed_form_projection() {
        assert_eq!(q3().project(&[0.0, 2.0, 0.0]).unwrap(), vec![1.0, 1.0, 0.0]);
        assert_eq!(q3().project(&[-5.0, 1.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(
            q3().project(&[3.0, 1.0, 0.0]).unwrap(),
            vec![3.0, 1.0, 0.0]
        );
    }
}

use nalgebra::DVector;

use super::{ConstraintError, ConstraintInput, ConstraintSolution, Method};

/// "+" root of `ξ² D − ξ B + b/λ = 0` for a rank-1 system.
pub fn scalar_closed_form(input: &ConstraintInput) -> Result<ConstraintSolution, ConstraintError> {
    if input.rank() != 1 {
        return Err(ConstraintError::NotScalar(input.rank()));
    }
    let zero = DVector::zeros(1);
    let dcoef = input.diag_coeff(0);
    let bcoef = input.linear_coeff(0, &zero);
    let disc = bcoef * bcoef - 4.0 * dcoef * input.b[0] / input.lambda;
    if disc < 0.0 {
        return Err(ConstraintError::Infeasible {
            index: 0,
            discriminant: disc,
        });
    }
    let xi = (bcoef + disc.sqrt()) / (2.0 * dcoef);
    Ok(ConstraintSolution::finish(input, DVector::from_element(1, xi), Method::ScalarClosedForm, 0))
}

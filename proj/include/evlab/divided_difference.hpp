#pragma once

#include "evlab/common.hpp"

namespace evlab {

/// log of the divided difference exp[x_1, ..., x_n] (always positive).
///
/// Evaluated through the exponential of the Opitz bidiagonal node matrix
/// (nodes on the diagonal, ones above), pre-shifted by max x_k so the matrix
/// is Metzler with nonpositive diagonal: scaling-and-squaring then involves
/// only nonnegative matrices and is subtraction-free. Exact for repeated or
/// clustered nodes.
double log_exp_divided_difference(const RVector& nodes);

/// log E[exp(-u* B u)] over u uniform on the complex unit sphere of dimension
/// n = dim B, for Hermitian B:  (n-1)! (-1)^{n-1} * dd of e^{-x} at eig(B).
double log_sphere_exp_integral(const CMatrix& b);
double log_sphere_exp_integral_from_eigs(const RVector& eigs);

}  // namespace evlab

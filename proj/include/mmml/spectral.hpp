#pragma once

// Dense symmetric-matrix kernels: eigendecomposition, SPD matrix logarithm,
// leading invariant subspaces, and the symmetric-definite generalized
// eigenproblem. Everything here is a pure function of its inputs.

#include <Eigen/Dense>

namespace mmml {

struct SymEigen {
    Eigen::VectorXd eigenvalues;   // non-increasing
    Eigen::MatrixXd eigenvectors;  // orthonormal columns, aligned with eigenvalues
};

// Full eigendecomposition of a symmetric matrix. Eigenvalues are returned in
// descending order; each eigenvector is oriented so that its
// largest-magnitude entry is positive (first such entry on magnitude ties).
// Throws NumericalError if A is not symmetric to 1e-10 relative tolerance.
SymEigen sym_eig(const Eigen::MatrixXd& a);

// Matrix logarithm of an SPD matrix via eigendecomposition. Eigenvalues at
// or below the floor 1e-12 * lambda_max raise NumericalError naming the
// offending eigenvalue instead of being clamped.
Eigen::MatrixXd matrix_log_spd(const Eigen::MatrixXd& c);

// Orthonormal basis (d x q) for the invariant subspace of the q largest
// eigenvalues.
Eigen::MatrixXd top_q_eigvecs(const Eigen::MatrixXd& c, int q);

struct GenEigen {
    Eigen::MatrixXd vectors;     // N x k, column h normalized so e^T W e = 1
    Eigen::VectorXd values;      // descending, length k
};

// Top-k solutions of B e = lambda W e for symmetric B and symmetric
// positive definite W, solved in symmetric-definite form: factor W = L L^T
// and eigendecompose L^-1 B L^-T. Throws NumericalError if W is not PD
// (callers are expected to regularize first).
GenEigen solve_gen_eig(const Eigen::MatrixXd& b, const Eigen::MatrixXd& w, int k);

// Shared symmetry gate: max |A_ij - A_ji| <= tol * max |A_ij|.
void require_symmetric(const Eigen::MatrixXd& a, const char* who,
                       double rel_tol = 1e-10);

}  // namespace mmml

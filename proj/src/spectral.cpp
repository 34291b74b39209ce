#include "mmml/spectral.hpp"

#include <cmath>
#include <sstream>

#include "mmml/errors.hpp"

namespace mmml {

void require_symmetric(const Eigen::MatrixXd& a, const char* who, double rel_tol) {
    if (a.rows() != a.cols()) {
        std::ostringstream msg;
        msg << who << ": matrix is " << a.rows() << "x" << a.cols() << ", expected square";
        throw DimensionError(msg.str());
    }
    const double scale = a.cwiseAbs().maxCoeff();
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > rel_tol * scale) {
        std::ostringstream msg;
        msg << who << ": input not symmetric, max |A_ij - A_ji| = " << asym
            << " against scale " << scale;
        throw NumericalError(msg.str());
    }
}

namespace {

// Canonical sign: make the largest-magnitude entry of each column positive;
// on magnitude ties the lowest row index decides.
void fix_column_signs(Eigen::MatrixXd& v) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        Eigen::Index pivot = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            const double m = std::abs(v(i, j));
            if (m > best) {
                best = m;
                pivot = i;
            }
        }
        if (v(pivot, j) < 0.0) v.col(j) = -v.col(j);
    }
}

}  // namespace

SymEigen sym_eig(const Eigen::MatrixXd& a) {
    require_symmetric(a, "sym_eig");
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("sym_eig: eigensolver did not converge");
    }
    SymEigen out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    fix_column_signs(out.eigenvectors);
    return out;
}

Eigen::MatrixXd matrix_log_spd(const Eigen::MatrixXd& c) {
    const SymEigen eig = sym_eig(c);
    const double lambda_max = eig.eigenvalues(0);
    const double floor = 1e-12 * std::max(lambda_max, 0.0);
    const double lambda_min = eig.eigenvalues(eig.eigenvalues.size() - 1);
    if (lambda_min <= floor) {
        std::ostringstream msg;
        msg << "matrix_log_spd: eigenvalue " << lambda_min
            << " at or below SPD floor " << floor << " (1e-12 * largest eigenvalue "
            << lambda_max << ")";
        throw NumericalError(msg.str());
    }
    const Eigen::VectorXd logs = eig.eigenvalues.array().log();
    Eigen::MatrixXd result =
        eig.eigenvectors * logs.asDiagonal() * eig.eigenvectors.transpose();
    return 0.5 * (result + result.transpose());
}

Eigen::MatrixXd top_q_eigvecs(const Eigen::MatrixXd& c, int q) {
    if (q < 1 || q > c.rows()) {
        std::ostringstream msg;
        msg << "top_q_eigvecs: q = " << q << " out of range for dimension " << c.rows();
        throw DimensionError(msg.str());
    }
    return sym_eig(c).eigenvectors.leftCols(q);
}

GenEigen solve_gen_eig(const Eigen::MatrixXd& b, const Eigen::MatrixXd& w, int k) {
    require_symmetric(b, "solve_gen_eig (B)");
    require_symmetric(w, "solve_gen_eig (W)");
    if (b.rows() != w.rows()) {
        throw DimensionError("solve_gen_eig: B and W dimensions differ");
    }
    const Eigen::Index n = w.rows();
    if (k < 1 || k > n) {
        std::ostringstream msg;
        msg << "solve_gen_eig: k = " << k << " out of range for dimension " << n;
        throw DimensionError(msg.str());
    }

    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (w + w.transpose()));
    if (llt.info() != Eigen::Success) {
        throw NumericalError(
            "solve_gen_eig: W is not positive definite; regularize W before solving");
    }
    const Eigen::MatrixXd l = llt.matrixL();

    // M = L^-1 B L^-T shares the pencil's spectrum and is symmetric.
    Eigen::MatrixXd m = l.triangularView<Eigen::Lower>().solve(b);
    m = l.triangularView<Eigen::Lower>().solve(m.transpose().eval());
    const SymEigen eig = sym_eig(0.5 * (m + m.transpose()));

    GenEigen out;
    out.values = eig.eigenvalues.head(k);
    Eigen::MatrixXd y = eig.eigenvectors.leftCols(k);
    out.vectors = l.transpose().triangularView<Eigen::Upper>().solve(y);
    fix_column_signs(out.vectors);
    return out;
}

}  // namespace mmml

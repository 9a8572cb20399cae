#include "sgpf/linalg.hpp"

#include <cmath>

namespace sgpf {

double spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues()(0);
}

double min_singular_value(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();
    return s(s.size() - 1);
}

LuSolveResult lu_solve(const Matrix& a, const Vector& b) {
    if (a.rows() != a.cols() || a.rows() != b.size()) {
        throw ContractViolation("lu_solve: dimension mismatch");
    }
    LuSolveResult out;
    out.scale = a.cwiseAbs().maxCoeff();
    Eigen::PartialPivLU<Matrix> lu(a);
    out.min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(out.min_pivot > kPivotTolerance * out.scale)) {
        out.singular = true;
        return out;
    }
    out.x = lu.solve(b);
    return out;
}

}  // namespace sgpf

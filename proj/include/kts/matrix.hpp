#pragma once

#include <Eigen/Core>

#include <string>

#include "kts/error.hpp"

namespace kts {

// Observations are rows, features are columns. Row-major storage so that a
// row gather is one contiguous copy and the in-memory layout matches the
// row-major on-disk formats.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline void require_finite(const Matrix& points, const std::string& what) {
    if (points.allFinite()) return;
    for (Index i = 0; i < points.rows(); ++i)
        for (Index j = 0; j < points.cols(); ++j)
            if (!std::isfinite(points(i, j)))
                fail(ErrorCode::InvalidData,
                     what + ": non-finite value at row " + std::to_string(i) +
                         ", column " + std::to_string(j));
    fail(ErrorCode::InvalidData, what + ": non-finite value");
}

inline void require_same_width(const Matrix& x, const Matrix& y, const std::string& what) {
    require(x.cols() == y.cols(), ErrorCode::InvalidData,
            what + ": dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                std::to_string(y.cols()) + " columns)");
}

inline Matrix vstack(const Matrix& x, const Matrix& y) {
    require_same_width(x, y, "vstack");
    Matrix out(x.rows() + y.rows(), x.cols());
    out.topRows(x.rows()) = x;
    out.bottomRows(y.rows()) = y;
    return out;
}

} // namespace kts

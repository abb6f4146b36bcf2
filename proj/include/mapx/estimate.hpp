#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "mapx/scenario.hpp"

namespace mapx {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// A reconstructed map on the evaluation grid (row = y index, col = x index),
/// in measurement units, with a per-cell validity mask.
struct GroundEstimate {
    Eigen::MatrixXd values;
    Mask valid;

    int side() const { return static_cast<int>(values.rows()); }
    double valid_fraction() const {
        return valid.size() == 0 ? 0.0 : static_cast<double>(valid.count()) / static_cast<double>(valid.size());
    }
};

/// Cellwise mean over estimates; a cell is valid if any input is valid there
/// and its mean uses only the inputs valid at that cell.
inline GroundEstimate average_estimates(std::span<const GroundEstimate> estimates) {
    if (estimates.empty()) throw std::invalid_argument("average_estimates: no estimates");
    const auto rows = estimates.front().values.rows(), cols = estimates.front().values.cols();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd count = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& e : estimates) {
        if (e.values.rows() != rows || e.values.cols() != cols)
            throw std::invalid_argument("average_estimates: shape mismatch");
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                if (e.valid(r, c)) {
                    sum(r, c) += e.values(r, c);
                    count(r, c) += 1.0;
                }
    }
    GroundEstimate out{Eigen::MatrixXd::Zero(rows, cols), Mask::Constant(rows, cols, false)};
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (count(r, c) > 0) {
                out.values(r, c) = sum(r, c) / count(r, c);
                out.valid(r, c) = true;
            }
    return out;
}

/// Row-major copy of a grid; the layout used by the interchange format.
inline std::vector<double> to_row_major(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return out;
}

inline Eigen::MatrixXd from_row_major(std::span<const double> data, int rows, int cols) {
    if (data.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("from_row_major: size mismatch");
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r) * cols + c];
    return m;
}

}  // namespace mapx

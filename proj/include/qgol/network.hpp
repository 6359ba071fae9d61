// network.hpp
// Weighted-network statistics over the mutual-information matrix.

#pragma once

#include "quantum_info.hpp"

#include <Eigen/Dense>

namespace qgol {

/// Mean link weight over all ordered pairs: sum_ij I_ij / (L (L - 1)).
inline double network_density(const MIMatrix& mi)
{
    const int L = mi.size();
    if (L < 2)
        return 0.0;
    return mi.values().sum() / (static_cast<double>(L) * (L - 1));
}

/// Average disparity L^-1 sum_i (sum_j I_ij^2) / (sum_k I_ik)^2.
/// Rows with zero strength contribute 0.
inline double disparity(const MIMatrix& mi)
{
    const Eigen::MatrixXd& w = mi.values();
    const int L = mi.size();
    if (L == 0)
        return 0.0;
    double total = 0.0;
    for (int i = 0; i < L; ++i) {
        const double strength = w.row(i).sum();
        if (strength <= 0.0)
            continue;
        total += w.row(i).squaredNorm() / (strength * strength);
    }
    return total / L;
}

inline constexpr double clustering_denominator_floor = 1e-14;

/// Tr(I^3) / sum_{i != j} [I^2]_ij; 0 when there are no two-paths.
inline double network_clustering(const MIMatrix& mi)
{
    const Eigen::MatrixXd& w = mi.values();
    const Eigen::MatrixXd w2 = w * w;
    const double two_paths = w2.sum() - w2.trace();
    if (two_paths < clustering_denominator_floor)
        return 0.0;
    return (w2 * w).trace() / two_paths;
}

} // namespace qgol

/*
 Copyright 2026 The fthjb Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <cmath>

#include "fthjb/crossadapt.hpp"

namespace fthjb {

std::vector<std::size_t> maxvol(const Eigen::MatrixXd& a, double tol, std::size_t max_iters) {
    const Eigen::Index m = a.rows();
    const Eigen::Index r = a.cols();
    if (r == 0 || m < r) {
        throw ShapeError("maxvol needs a tall matrix with at least one column");
    }
    // Greedy start: Gaussian elimination with row pivoting.
    Eigen::MatrixXd work = a;
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    std::vector<std::size_t> rows(static_cast<std::size_t>(r));
    for (Eigen::Index j = 0; j < r; ++j) {
        Eigen::Index best = -1;
        double best_abs = -1.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            const double v = std::abs(work(i, j));
            if (v > best_abs) {
                best_abs = v;
                best = i;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        rows[static_cast<std::size_t>(j)] = static_cast<std::size_t>(best);
        const double piv = work(best, j);
        if (piv != 0.0) {
            const Eigen::VectorXd col = work.col(j) / piv;
            const Eigen::RowVectorXd row = work.row(best);
            work.noalias() -= col * row;
        }
    }

    Eigen::MatrixXd sub(r, r);
    for (std::size_t it = 0; it < max_iters; ++it) {
        for (Eigen::Index j = 0; j < r; ++j) sub.row(j) = a.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(j)]));
        Eigen::FullPivLU<Eigen::MatrixXd> lu(sub.transpose());
        if (!lu.isInvertible()) break;
        // b = a sub^{-1}  <=>  sub^T b^T = a^T
        const Eigen::MatrixXd b = lu.solve(a.transpose()).transpose();
        Eigen::Index bi = 0, bj = 0;
        const double big = b.cwiseAbs().maxCoeff(&bi, &bj);
        if (!(big > tol)) break;
        rows[static_cast<std::size_t>(bj)] = static_cast<std::size_t>(bi);
    }
    return rows;
}

}  // namespace fthjb

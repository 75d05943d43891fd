#include "noisylab/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace noisylab::linalg {

namespace {

void require_square(const Tensor& a) {
    if (a.rank() != 2 || a.rows() != a.cols()) {
        throw std::invalid_argument("linalg: expected a square matrix, got " + a.shape_str());
    }
}

}  // namespace

Tensor identity(std::size_t n) {
    Tensor m({n, n});
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("linalg: transpose expects a matrix");
    Tensor r({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) r.at(j, i) = a.at(i, j);
    return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        throw std::invalid_argument("linalg: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
    }
    Tensor r({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a.at(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                r.at(i, j) += aik * b.at(k, j);
            }
        }
    }
    return r;
}

double norm1(const Tensor& a) {
    require_square(a);
    double best = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a.at(i, j));
        if (s > best) best = s;
    }
    return best;
}

double max_abs(const Tensor& a) {
    double best = 0.0;
    for (double v : a.values()) best = std::max(best, std::abs(v));
    return best;
}

bool try_invert(const Tensor& a, Tensor& out) {
    require_square(a);
    const std::size_t n = a.rows();

    // Augmented [A | I], eliminated in place.
    Tensor aug({n, 2 * n});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) aug.at(i, j) = a.at(i, j);
        aug.at(i, n + i) = 1.0;
    }

    const double tiny = 1e-13 * std::max(1.0, max_abs(a));
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(aug.at(col, col));
        for (std::size_t row = col + 1; row < n; ++row) {
            const double v = std::abs(aug.at(row, col));
            if (v > best) {
                best = v;
                pivot = row;
            }
        }
        if (best <= tiny) return false;

        if (pivot != col) {
            for (std::size_t j = 0; j < 2 * n; ++j) std::swap(aug.at(col, j), aug.at(pivot, j));
        }
        const double scale = aug.at(col, col);
        for (std::size_t j = 0; j < 2 * n; ++j) aug.at(col, j) /= scale;
        for (std::size_t row = 0; row < n; ++row) {
            if (row == col) continue;
            const double factor = aug.at(row, col);
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < 2 * n; ++j) aug.at(row, j) -= factor * aug.at(col, j);
        }
    }

    out = Tensor({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = aug.at(i, n + j);
    return true;
}

Tensor invert(const Tensor& a) {
    Tensor out;
    if (!try_invert(a, out)) {
        throw std::runtime_error("linalg: matrix is singular");
    }
    return out;
}

double condition_number_1(const Tensor& a) {
    Tensor inv;
    if (!try_invert(a, inv)) {
        return std::numeric_limits<double>::infinity();
    }
    return norm1(a) * norm1(inv);
}

}  // namespace noisylab::linalg

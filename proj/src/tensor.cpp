#include "noisylab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace noisylab {

namespace {

std::size_t checked_element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) {
            throw std::invalid_argument("Tensor: shape dimensions must be positive");
        }
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_element_count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_element_count(shape_) != data_.size()) {
        throw std::invalid_argument("Tensor: shape " + shape_str() + " does not match " +
                                    std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (checked_element_count(new_shape) != data_.size()) {
        throw std::invalid_argument("Tensor: cannot reshape " + shape_str() + " to new element count");
    }
    return Tensor(std::move(new_shape), data_);
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << ')';
    return os.str();
}

}  // namespace noisylab

#include "noisylab/transition.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "noisylab/detail/numfmt.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

namespace {

constexpr double kRowSumInputTol = 1e-6;

}  // namespace

TransitionMatrix TransitionMatrix::from_rows(const Tensor& rows) {
    if (rows.rank() != 2 || rows.rows() != rows.cols()) {
        throw std::invalid_argument("TransitionMatrix: expected a square matrix, got " + rows.shape_str());
    }
    const std::size_t n = rows.rows();
    if (n < 2) {
        throw std::invalid_argument("TransitionMatrix: need at least 2 classes");
    }
    Tensor entries = rows;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = entries.at(i, j);
            if (v < 0.0) {
                throw std::invalid_argument("TransitionMatrix: negative entry at row " + std::to_string(i));
            }
            if (v > 1.0) {
                throw std::invalid_argument("TransitionMatrix: entry > 1 at row " + std::to_string(i));
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumInputTol) {
            throw std::invalid_argument("TransitionMatrix: row " + std::to_string(i) + " sums to " +
                                        std::to_string(sum) + ", expected 1 within 1e-6");
        }
        for (std::size_t j = 0; j < n; ++j) entries.at(i, j) /= sum;
    }
    return TransitionMatrix(std::move(entries));
}

TransitionMatrix TransitionMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    if (n < 2) {
        throw std::invalid_argument("TransitionMatrix: need at least 2 classes");
    }
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) {
            throw std::invalid_argument("TransitionMatrix: row " + std::to_string(i) + " has wrong length");
        }
        for (std::size_t j = 0; j < n; ++j) t.at(i, j) = rows[i][j];
    }
    return from_rows(t);
}

TransitionMatrix TransitionMatrix::known_matrix(const std::string& name) {
    if (name == "fashion05") {
        return from_rows({{0.5, 0.2, 0.3}, {0.3, 0.5, 0.2}, {0.2, 0.3, 0.5}});
    }
    if (name == "fashion06") {
        return from_rows({{0.4, 0.3, 0.3}, {0.3, 0.4, 0.3}, {0.3, 0.3, 0.4}});
    }
    throw std::invalid_argument("TransitionMatrix: no ground-truth matrix named '" + name +
                                "' (known: fashion05, fashion06)");
}

TransitionMatrix TransitionMatrix::symmetric(std::size_t n_classes, double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) {
        throw std::invalid_argument("TransitionMatrix: rho must be in [0, 1)");
    }
    if (n_classes < 2) {
        throw std::invalid_argument("TransitionMatrix: need at least 2 classes");
    }
    Tensor t({n_classes, n_classes});
    const double off = rho / static_cast<double>(n_classes - 1);
    for (std::size_t i = 0; i < n_classes; ++i)
        for (std::size_t j = 0; j < n_classes; ++j) t.at(i, j) = (i == j) ? 1.0 - rho : off;
    return from_rows(t);
}

TransitionMatrix TransitionMatrix::identity(std::size_t n_classes) {
    return symmetric(n_classes, 0.0);
}

std::vector<double> TransitionMatrix::flip_rates() const {
    std::vector<double> rates(n_classes());
    for (std::size_t i = 0; i < rates.size(); ++i) rates[i] = 1.0 - at(i, i);
    return rates;
}

std::string TransitionMatrix::to_csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < n_classes(); ++i) {
        for (std::size_t j = 0; j < n_classes(); ++j) {
            if (j) os << ',';
            os << detail::format_double(at(i, j));
        }
        os << '\n';
    }
    return os.str();
}

TransitionMatrix TransitionMatrix::parse_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw std::invalid_argument("TransitionMatrix: bad CSV cell '" + cell + "'");
            }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return from_rows(rows);
}

void TransitionMatrix::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("TransitionMatrix: cannot write " + path);
    out << to_csv();
}

TransitionMatrix TransitionMatrix::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("TransitionMatrix: cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

std::pair<std::vector<std::uint8_t>, NoiseInjectionRecord> inject_noise(
    std::span<const std::uint8_t> labels, const TransitionMatrix& T, std::uint64_t seed) {
    const std::size_t n_classes = T.n_classes();
    for (std::uint8_t y : labels) {
        if (y >= n_classes) {
            throw std::invalid_argument("inject_noise: label " + std::to_string(y) + " out of range for " +
                                        std::to_string(n_classes) + " classes");
        }
    }

    Rng rng(derive_seed(seed, 0x6e6f697365ull));  // dedicated injection stream
    std::vector<std::uint8_t> noisy(labels.size());
    Tensor counts({n_classes, n_classes});

    NoiseInjectionRecord record;
    record.seed = seed;
    for (std::size_t idx = 0; idx < labels.size(); ++idx) {
        const std::uint8_t y = labels[idx];
        const double u = rng.next_double();
        double cum = 0.0;
        std::size_t drawn = n_classes - 1;  // absorbs residual rounding mass
        for (std::size_t j = 0; j < n_classes; ++j) {
            cum += T.at(y, j);
            if (u < cum) {
                drawn = j;
                break;
            }
        }
        noisy[idx] = static_cast<std::uint8_t>(drawn);
        counts.at(y, drawn) += 1.0;
        if (drawn != y) ++record.n_flipped;
    }

    record.empirical_matrix = Tensor({n_classes, n_classes});
    for (std::size_t i = 0; i < n_classes; ++i) {
        double row_total = 0.0;
        for (std::size_t j = 0; j < n_classes; ++j) row_total += counts.at(i, j);
        if (row_total > 0.0) {
            for (std::size_t j = 0; j < n_classes; ++j) {
                record.empirical_matrix.at(i, j) = counts.at(i, j) / row_total;
            }
        }
    }
    return {std::move(noisy), std::move(record)};
}

}  // namespace noisylab

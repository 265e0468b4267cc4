#include "ssmkit/polytensor.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

namespace ssmkit {

std::uint64_t checked_power(std::uint64_t base, int exp) {
    if (exp < 0) throw ValidationError("negative exponent in multi-index size");
    std::uint64_t result = 1;
    for (int e = 0; e < exp; ++e) {
        if (base != 0 && result > kMaxPositions / base) {
            throw ValidationError(fmt::format(
                "capacity exceeded: {}^{} positions is above the 2^48 addressing limit", base, exp));
        }
        result *= base;
    }
    if (result > kMaxPositions) {
        throw ValidationError(fmt::format(
            "capacity exceeded: {}^{} positions is above the 2^48 addressing limit", base, exp));
    }
    return result;
}

MultiIndexSet::MultiIndexSet(int degree, int alphabet)
    : degree_(degree), alphabet_(alphabet), size_(0) {
    if (degree < 1 || alphabet < 1) {
        throw ValidationError(
            fmt::format("multi-index set needs degree >= 1 and alphabet >= 1 (got {}, {})", degree,
                        alphabet));
    }
    size_ = checked_power(static_cast<std::uint64_t>(alphabet), degree);
}

MultiIndex MultiIndexSet::tuple(std::uint64_t position) const {
    if (position >= size_) throw ValidationError("multi-index position out of range");
    MultiIndex out(static_cast<std::size_t>(degree_));
    decode_position(position, alphabet_, out);
    return out;
}

std::uint64_t MultiIndexSet::position(std::span<const int> tuple) const {
    if (static_cast<int>(tuple.size()) != degree_) {
        throw ValidationError("tuple length does not match the multi-index degree");
    }
    for (int a : tuple) {
        if (a < 0 || a >= alphabet_) throw ValidationError("tuple symbol out of range");
    }
    return tuple_position(tuple, alphabet_);
}

std::vector<MultiIndex> MultiIndexSet::tuples() const {
    std::vector<MultiIndex> out;
    out.reserve(static_cast<std::size_t>(size_));
    for (std::uint64_t p = 0; p < size_; ++p) out.push_back(tuple(p));
    return out;
}

MultiIndexSet index_set(int degree, int alphabet) { return MultiIndexSet(degree, alphabet); }

std::uint64_t tuple_position(std::span<const int> tuple, int alphabet) {
    std::uint64_t pos = 0;
    for (int a : tuple) pos = pos * static_cast<std::uint64_t>(alphabet) + static_cast<std::uint64_t>(a);
    return pos;
}

void decode_position(std::uint64_t position, int alphabet, std::span<int> out) {
    const auto base = static_cast<std::uint64_t>(alphabet);
    for (std::size_t k = out.size(); k-- > 0;) {
        out[k] = static_cast<int>(position % base);
        position /= base;
    }
}

std::vector<int> symbol_counts(std::span<const int> tuple, int alphabet) {
    std::vector<int> counts(static_cast<std::size_t>(alphabet), 0);
    for (int a : tuple) ++counts[static_cast<std::size_t>(a)];
    return counts;
}

// ---------------------------------------------------------------------------
// PolyCoeffs

PolyCoeffs::PolyCoeffs(int degree, std::size_t rows, std::size_t vars)
    : degree_(degree), rows_(rows), vars_(vars) {
    if (degree < 1) throw ValidationError("polynomial degree must be >= 1");
}

void PolyCoeffs::add(std::size_t row, std::span<const int> index, cplx value) {
    if (row >= rows_) {
        throw ValidationError(fmt::format("row {} out of range (rows = {})", row + 1, rows_));
    }
    if (static_cast<int>(index.size()) != degree_) {
        throw ValidationError(fmt::format("degree-{} coefficient given {} indices", degree_,
                                          index.size()));
    }
    for (int a : index) {
        if (a < 0 || static_cast<std::size_t>(a) >= vars_) {
            throw ValidationError(
                fmt::format("variable index {} out of range (vars = {})", a + 1, vars_));
        }
    }
    rows_of_.push_back(row);
    indices_.insert(indices_.end(), index.begin(), index.end());
    values_.push_back(value);
}

void PolyCoeffs::finalize() {
    const std::size_t n = values_.size();
    const auto k = static_cast<std::size_t>(degree_);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto key_less = [&](std::size_t a, std::size_t b) {
        if (rows_of_[a] != rows_of_[b]) return rows_of_[a] < rows_of_[b];
        return std::lexicographical_compare(indices_.begin() + static_cast<std::ptrdiff_t>(a * k),
                                            indices_.begin() + static_cast<std::ptrdiff_t>((a + 1) * k),
                                            indices_.begin() + static_cast<std::ptrdiff_t>(b * k),
                                            indices_.begin() + static_cast<std::ptrdiff_t>((b + 1) * k));
    };
    auto key_equal = [&](std::size_t a, std::size_t b) {
        return rows_of_[a] == rows_of_[b] &&
               std::equal(indices_.begin() + static_cast<std::ptrdiff_t>(a * k),
                          indices_.begin() + static_cast<std::ptrdiff_t>((a + 1) * k),
                          indices_.begin() + static_cast<std::ptrdiff_t>(b * k));
    };
    std::stable_sort(order.begin(), order.end(), key_less);

    std::vector<std::size_t> rows;
    std::vector<int> indices;
    std::vector<cplx> values;
    rows.reserve(n);
    indices.reserve(n * k);
    values.reserve(n);
    for (std::size_t t = 0; t < n;) {
        std::size_t u = t;
        cplx sum{0.0, 0.0};
        while (u < n && key_equal(order[t], order[u])) sum += values_[order[u++]];
        if (sum != cplx{0.0, 0.0}) {
            rows.push_back(rows_of_[order[t]]);
            auto first = indices_.begin() + static_cast<std::ptrdiff_t>(order[t] * k);
            indices.insert(indices.end(), first, first + static_cast<std::ptrdiff_t>(k));
            values.push_back(sum);
        }
        t = u;
    }
    rows_of_ = std::move(rows);
    indices_ = std::move(indices);
    values_ = std::move(values);
}

bool PolyCoeffs::is_real(double tol) const {
    return std::all_of(values_.begin(), values_.end(),
                       [tol](const cplx& v) { return std::abs(v.imag()) <= tol; });
}

VecC PolyCoeffs::evaluate(const VecC& z) const {
    if (static_cast<std::size_t>(z.size()) != vars_) {
        throw ValidationError("evaluation point has the wrong dimension");
    }
    VecC out = VecC::Zero(static_cast<Eigen::Index>(rows_));
    for (std::size_t t = 0; t < values_.size(); ++t) {
        cplx prod = values_[t];
        for (int a : index(t)) prod *= z[a];
        out[static_cast<Eigen::Index>(rows_of_[t])] += prod;
    }
    return out;
}

VecR PolyCoeffs::evaluate(const VecR& z) const {
    if (static_cast<std::size_t>(z.size()) != vars_) {
        throw ValidationError("evaluation point has the wrong dimension");
    }
    VecR out = VecR::Zero(static_cast<Eigen::Index>(rows_));
    for (std::size_t t = 0; t < values_.size(); ++t) {
        double prod = values_[t].real();
        for (int a : index(t)) prod *= z[a];
        out[static_cast<Eigen::Index>(rows_of_[t])] += prod;
    }
    return out;
}

void PolyCoeffs::add_jacobian(const VecR& z, MatR& jac) const {
    for (std::size_t t = 0; t < values_.size(); ++t) {
        const auto idx = index(t);
        const auto r = static_cast<Eigen::Index>(rows_of_[t]);
        for (std::size_t m = 0; m < idx.size(); ++m) {
            double prod = values_[t].real();
            for (std::size_t l = 0; l < idx.size(); ++l) {
                if (l != m) prod *= z[idx[l]];
            }
            jac(r, idx[m]) += prod;
        }
    }
}

PolyCoeffs PolyCoeffs::symmetrized() const {
    PolyCoeffs out(degree_, rows_, vars_);
    for (std::size_t t = 0; t < values_.size(); ++t) {
        MultiIndex perm(index(t).begin(), index(t).end());
        std::sort(perm.begin(), perm.end());
        std::vector<MultiIndex> orbit;
        do {
            orbit.push_back(perm);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const cplx share = values_[t] / static_cast<double>(orbit.size());
        for (const auto& o : orbit) out.add(rows_of_[t], o, share);
    }
    out.finalize();
    return out;
}

bool operator==(const PolyCoeffs& a, const PolyCoeffs& b) {
    return a.degree_ == b.degree_ && a.rows_ == b.rows_ && a.vars_ == b.vars_ &&
           a.rows_of_ == b.rows_of_ && a.indices_ == b.indices_ && a.values_ == b.values_;
}

// ---------------------------------------------------------------------------
// Kronecker helpers

VecC kron_power(const VecC& p, int degree) {
    const int M = static_cast<int>(p.size());
    const auto total = checked_power(static_cast<std::uint64_t>(M), degree);
    VecC out(static_cast<Eigen::Index>(total));
    out.setZero();
    out[0] = 1.0;
    Eigen::Index len = 1;
    for (int d = 0; d < degree; ++d) {
        for (Eigen::Index a = len; a-- > 0;) {
            const cplx base = out[a];
            for (int b = M; b-- > 0;) out[a * M + b] = base * p[b];
        }
        len *= M;
    }
    return out;
}

VecC kron_sum_lambdas(const VecC& lambdas, int degree) {
    const int M = static_cast<int>(lambdas.size());
    const auto set = MultiIndexSet(degree, M);
    VecC out(static_cast<Eigen::Index>(set.size()));
    MultiIndex digits(static_cast<std::size_t>(degree));
    for (std::uint64_t pos = 0; pos < set.size(); ++pos) {
        decode_position(pos, M, digits);
        std::sort(digits.begin(), digits.end());
        cplx sum{0.0, 0.0};
        for (int a : digits) sum += lambdas[a];
        out[static_cast<Eigen::Index>(pos)] = sum;
    }
    return out;
}

namespace {

// Calls fn(q) for every composition q of `total` into `parts` positive integers.
template <class Fn>
void for_each_composition(int total, int parts, Fn&& fn) {
    std::vector<int> q(static_cast<std::size_t>(parts), 1);
    auto recurse = [&](auto&& self, int slot, int remaining) -> void {
        if (slot == parts - 1) {
            q[static_cast<std::size_t>(slot)] = remaining;
            fn(std::as_const(q));
            return;
        }
        const int reserve = parts - slot - 1;
        for (int v = 1; v <= remaining - reserve; ++v) {
            q[static_cast<std::size_t>(slot)] = v;
            self(self, slot + 1, remaining - v);
        }
    };
    if (total >= parts) recurse(recurse, 0, total);
}

}  // namespace

MatC compose(std::span<const PolyCoeffs> nonlinearity, std::span<const MatC> W, int order,
             int master_dim) {
    if (order < 1) throw ValidationError("composition order must be >= 1");
    const auto cols = static_cast<Eigen::Index>(
        checked_power(static_cast<std::uint64_t>(master_dim), order));
    Eigen::Index rows = 0;
    if (W.size() > 1) rows = W[1].rows();
    for (const auto& F : nonlinearity) rows = std::max(rows, static_cast<Eigen::Index>(F.rows()));
    MatC out = MatC::Zero(rows, cols);
    if (order < 2) return out;

    bool needed = false;
    for (const auto& F : nonlinearity) needed = needed || (F.degree() >= 2 && F.degree() <= order);
    if (!needed) return out;
    if (static_cast<int>(W.size()) < order) {
        throw ValidationError(fmt::format(
            "compose at order {} needs manifold coefficients up to order {}", order, order - 1));
    }

    // Row vectors of W_q restricted to one phase-space coordinate, reused across terms.
    std::vector<Eigen::RowVectorXcd> factors;
    Eigen::RowVectorXcd acc, next;
    for (const auto& F : nonlinearity) {
        const int k = F.degree();
        if (k < 2 || k > order) continue;
        for_each_composition(order, k, [&](const std::vector<int>& q) {
            for (std::size_t t = 0; t < F.nnz(); ++t) {
                const auto idx = F.index(t);
                bool zero = false;
                for (int m = 0; m < k && !zero; ++m) {
                    const MatC& Wq = W[static_cast<std::size_t>(q[static_cast<std::size_t>(m)])];
                    zero = Wq.row(idx[static_cast<std::size_t>(m)]).isZero(0.0);
                }
                if (zero) continue;
                acc = W[static_cast<std::size_t>(q[0])].row(idx[0]);
                for (int m = 1; m < k; ++m) {
                    const auto& rowv = W[static_cast<std::size_t>(q[static_cast<std::size_t>(m)])].row(
                        idx[static_cast<std::size_t>(m)]);
                    next.resize(acc.size() * rowv.size());
                    for (Eigen::Index a = 0; a < acc.size(); ++a) {
                        next.segment(a * rowv.size(), rowv.size()) = acc[a] * rowv;
                    }
                    acc.swap(next);
                }
                out.row(static_cast<Eigen::Index>(F.row(t))) += F.value(t) * acc;
            }
        });
    }
    return out;
}

MatC apply_kron_sum(const MatC& R_lower, const MatC& W_j, int order, int j, int master_dim) {
    const int M = master_dim;
    const int s = order - j + 1;
    if (j < 1 || s < 1) throw ValidationError("apply_kron_sum needs 1 <= j <= order");
    const auto cols = checked_power(static_cast<std::uint64_t>(M), order);
    if (R_lower.rows() != M ||
        static_cast<std::uint64_t>(R_lower.cols()) != checked_power(static_cast<std::uint64_t>(M), s)) {
        throw ValidationError("apply_kron_sum: reduced-dynamics block has the wrong shape");
    }
    if (static_cast<std::uint64_t>(W_j.cols()) != checked_power(static_cast<std::uint64_t>(M), j)) {
        throw ValidationError("apply_kron_sum: manifold block has the wrong shape");
    }
    MatC out = MatC::Zero(W_j.rows(), static_cast<Eigen::Index>(cols));
    if (R_lower.isZero(0.0)) return out;

    std::vector<std::uint64_t> powM(static_cast<std::size_t>(order + 1), 1);
    for (int e = 1; e <= order; ++e) powM[static_cast<std::size_t>(e)] = powM[static_cast<std::size_t>(e - 1)] * static_cast<std::uint64_t>(M);

    MultiIndex digits(static_cast<std::size_t>(order));
    for (std::uint64_t pos = 0; pos < cols; ++pos) {
        decode_position(pos, M, digits);
        for (int k = 0; k < j; ++k) {
            // digits = prefix (k symbols) | block (s symbols) | suffix (j-k-1 symbols)
            const std::span<const int> all(digits);
            const auto prefix = tuple_position(all.subspan(0, static_cast<std::size_t>(k)), M);
            const auto block = tuple_position(all.subspan(static_cast<std::size_t>(k), static_cast<std::size_t>(s)), M);
            const auto suffix = tuple_position(all.subspan(static_cast<std::size_t>(k + s)), M);
            const int suffix_len = j - k - 1;
            for (int a = 0; a < M; ++a) {
                const cplx r = R_lower(a, static_cast<Eigen::Index>(block));
                if (r == cplx{0.0, 0.0}) continue;
                const auto wcol = (prefix * static_cast<std::uint64_t>(M) + static_cast<std::uint64_t>(a)) *
                                      powM[static_cast<std::size_t>(suffix_len)] +
                                  suffix;
                out.col(static_cast<Eigen::Index>(pos)) += r * W_j.col(static_cast<Eigen::Index>(wcol));
            }
        }
    }
    return out;
}

std::vector<std::uint64_t> orbit_positions(std::span<const int> counts, int degree) {
    MultiIndex tuple;
    for (std::size_t a = 0; a < counts.size(); ++a) {
        for (int c = 0; c < counts[a]; ++c) tuple.push_back(static_cast<int>(a));
    }
    if (static_cast<int>(tuple.size()) != degree) {
        throw ValidationError("symbol counts do not add up to the degree");
    }
    std::vector<std::uint64_t> out;
    do {
        out.push_back(tuple_position(tuple, static_cast<int>(counts.size())));
    } while (std::next_permutation(tuple.begin(), tuple.end()));
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace ssmkit

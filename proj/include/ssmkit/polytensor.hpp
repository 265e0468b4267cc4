#pragma once

// Multi-index bookkeeping and sparse polynomial-tensor algebra in Kronecker
// notation. A degree-i polynomial map R^M -> C^N is stored as an N x M^i
// coefficient array acting on p^{(x)i}; column positions follow the
// lexicographic order of i-tuples over {0..M-1} (0-based here, 1-based in files).

#include <cstdint>
#include <span>
#include <vector>

#include "ssmkit/types.hpp"

namespace ssmkit {

using MultiIndex = std::vector<int>;

/// Largest number of positions a multi-index set may address.
inline constexpr std::uint64_t kMaxPositions = std::uint64_t{1} << 48;

/// base^exp with an overflow guard at kMaxPositions (throws ValidationError).
std::uint64_t checked_power(std::uint64_t base, int exp);

/// All i-tuples over an alphabet of size M, in lexicographic order.
class MultiIndexSet {
public:
    MultiIndexSet(int degree, int alphabet);

    int degree() const { return degree_; }
    int alphabet() const { return alphabet_; }
    std::uint64_t size() const { return size_; }

    MultiIndex tuple(std::uint64_t position) const;
    std::uint64_t position(std::span<const int> tuple) const;

    /// Materialized list; intended for small sets.
    std::vector<MultiIndex> tuples() const;

private:
    int degree_;
    int alphabet_;
    std::uint64_t size_;
};

MultiIndexSet index_set(int degree, int alphabet);

/// Position of a tuple in Delta_{len, alphabet} without building a set.
std::uint64_t tuple_position(std::span<const int> tuple, int alphabet);
void decode_position(std::uint64_t position, int alphabet, std::span<int> out);

/// Occurrence count of every symbol 0..alphabet-1 in the tuple.
std::vector<int> symbol_counts(std::span<const int> tuple, int alphabet);

/// Sparse coefficients of one homogeneous degree of a polynomial map C^vars -> C^rows.
/// Entries are unsymmetrized: (row, (a_1..a_k)) multiplies z_{a_1} ... z_{a_k}.
class PolyCoeffs {
public:
    PolyCoeffs() = default;
    PolyCoeffs(int degree, std::size_t rows, std::size_t vars);

    int degree() const { return degree_; }
    std::size_t rows() const { return rows_; }
    std::size_t vars() const { return vars_; }
    std::size_t nnz() const { return values_.size(); }

    /// Accumulates into (row, index); call finalize() before reading.
    void add(std::size_t row, std::span<const int> index, cplx value);
    void add(std::size_t row, std::initializer_list<int> index, cplx value) {
        add(row, std::span<const int>(index.begin(), index.size()), value);
    }
    /// Sorts entries by (row, index), sums duplicates, drops exact zeros.
    void finalize();

    std::size_t row(std::size_t term) const { return rows_of_[term]; }
    std::span<const int> index(std::size_t term) const {
        return {indices_.data() + term * static_cast<std::size_t>(degree_),
                static_cast<std::size_t>(degree_)};
    }
    cplx value(std::size_t term) const { return values_[term]; }

    bool is_real(double tol = 0.0) const;

    VecC evaluate(const VecC& z) const;
    VecR evaluate(const VecR& z) const;

    /// Accumulates d/dz of this term into a dense rows x vars matrix (real inputs).
    void add_jacobian(const VecR& z, MatR& jac) const;

    /// Symmetric part: each coefficient spread evenly over its permutation orbit.
    /// Evaluation is unchanged; only the storage pattern differs.
    PolyCoeffs symmetrized() const;

    friend bool operator==(const PolyCoeffs& a, const PolyCoeffs& b);

private:
    int degree_ = 0;
    std::size_t rows_ = 0;
    std::size_t vars_ = 0;
    std::vector<std::size_t> rows_of_;
    std::vector<int> indices_;
    std::vector<cplx> values_;
};

/// Entry at position(l) is prod_j p_{l_j}.
VecC kron_power(const VecC& p, int degree);

/// Entry at position(l) is lambda_{l_1} + ... + lambda_{l_i}; summed in sorted order so
/// that permutations of the same tuple produce bit-identical values.
VecC kron_sum_lambdas(const VecC& lambdas, int degree);

/// Degree-i coefficients of F(W(p)) where F = sum_k F_k z^{(x)k} and
/// W(p) = sum_q W_q p^{(x)q}. W[q] holds W_q (index 0 unused); orders 1..i-1 are
/// required. Returns an N x M^i dense array.
MatC compose(std::span<const PolyCoeffs> nonlinearity, std::span<const MatC> W, int order,
             int master_dim);

/// W_j * calR_{i,j} where calR_{i,j} = sum_k I (x) .. (x) R_{i-j+1} (x) .. (x) I (k-th slot),
/// evaluated by index arithmetic without assembling calR.
MatC apply_kron_sum(const MatC& R_lower, const MatC& W_j, int order, int j, int master_dim);

/// Positions of the Delta_{i,M} multi-index that contain symbol a exactly ca times for
/// every symbol a (i.e. the permutation orbit of a monomial).
std::vector<std::uint64_t> orbit_positions(std::span<const int> counts, int degree);

}  // namespace ssmkit

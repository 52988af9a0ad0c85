#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace rwc {

struct Entry {
    std::size_t col;
    double value;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

// Symmetric matrix with a dense diagonal and sorted off-diagonal rows.
// Stored zeros are dropped, so "present" always means "nonzero".
class SparseSymMatrix {
public:
    SparseSymMatrix() = default;
    explicit SparseSymMatrix(std::size_t p, double diag_value = 0.0) : diag_(p, diag_value), rows_(p) {}

    static SparseSymMatrix identity(std::size_t p) { return SparseSymMatrix(p, 1.0); }

    // Both (i,j) and (j,i) may be listed; a pair given twice must agree.
    static SparseSymMatrix from_triplets(std::size_t p, std::span<const Triplet> ts) {
        SparseSymMatrix m(p);
        for (const auto& t : ts) {
            if (t.row >= p || t.col >= p) throw UsageError("triplet index out of range");
            if (t.row == t.col) {
                m.diag_[t.row] = t.value;
                continue;
            }
            double prev = m(t.row, t.col);
            if (prev != 0.0 && prev != t.value)
                throw ConfigError("triplets are not symmetric at (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ")");
            m.set(t.row, t.col, t.value);
        }
        return m;
    }

    // Entries with |a(i,j)| <= drop are treated as zero. Rejects asymmetric input.
    static SparseSymMatrix from_dense(const Eigen::MatrixXd& a, double drop = 0.0) {
        if (a.rows() != a.cols()) throw UsageError("from_dense: matrix is not square");
        const auto p = static_cast<std::size_t>(a.rows());
        SparseSymMatrix m(p);
        for (std::size_t i = 0; i < p; ++i) {
            m.diag_[i] = a(i, i);
            for (std::size_t j = 0; j < p; ++j) {
                if (j == i) continue;
                double v = a(i, j);
                if (v != a(j, i)) throw UsageError("from_dense: matrix is not symmetric");
                if (std::abs(v) > drop) m.rows_[i].push_back({j, v});
            }
        }
        return m;
    }

    std::size_t dim() const noexcept { return diag_.size(); }

    double diag(std::size_t i) const { return diag_[i]; }
    std::span<const double> diagonal() const { return diag_; }
    std::span<const Entry> row(std::size_t i) const { return rows_[i]; }

    double operator()(std::size_t i, std::size_t j) const {
        if (i == j) return diag_[i];
        const auto& r = rows_[i];
        auto it = std::lower_bound(r.begin(), r.end(), j, [](const Entry& e, std::size_t c) { return e.col < c; });
        return (it != r.end() && it->col == j) ? it->value : 0.0;
    }

    void set_diag(std::size_t i, double v) { diag_[i] = v; }

    // Sets (i,j) and (j,i). Setting 0 removes the entry.
    void set(std::size_t i, std::size_t j, double v) {
        if (i == j) {
            diag_[i] = v;
            return;
        }
        put(rows_[i], j, v);
        put(rows_[j], i, v);
    }

    std::size_t offdiag_count() const {
        std::size_t c = 0;
        for (const auto& r : rows_) c += r.size();
        return c;
    }

    // Nonzeros of row i including the diagonal.
    std::size_t row_nonzeros(std::size_t i) const { return rows_[i].size() + (diag_[i] != 0.0 ? 1 : 0); }

    std::size_t sparsity_degree() const {
        std::size_t k = 0;
        for (std::size_t i = 0; i < dim(); ++i) k = std::max(k, row_nonzeros(i));
        return k;
    }

    bool is_diagonal() const { return offdiag_count() == 0; }

    bool has_unit_diagonal() const {
        return std::all_of(diag_.begin(), diag_.end(), [](double d) { return d == 1.0; });
    }

    double max_abs_offdiag() const {
        double a = 0.0;
        for (const auto& r : rows_)
            for (const auto& e : r) a = std::max(a, std::abs(e.value));
        return a;
    }

    Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (static_cast<std::size_t>(x.size()) != dim()) throw UsageError("multiply: dimension mismatch");
        Eigen::VectorXd y(x.size());
        for (std::size_t i = 0; i < dim(); ++i) {
            double s = diag_[i] * x[i];
            for (const auto& e : rows_[i]) s += e.value * x[e.col];
            y[i] = s;
        }
        return y;
    }

    Eigen::MatrixXd to_dense() const {
        const auto p = static_cast<Eigen::Index>(dim());
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        for (std::size_t i = 0; i < dim(); ++i) {
            a(i, i) = diag_[i];
            for (const auto& e : rows_[i]) a(i, e.col) = e.value;
        }
        return a;
    }

    // Upper-triangle triplets (row <= col), row-major order.
    std::vector<Triplet> upper_triplets() const {
        std::vector<Triplet> out;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (diag_[i] != 0.0) out.push_back({i, i, diag_[i]});
            for (const auto& e : rows_[i])
                if (e.col > i) out.push_back({i, e.col, e.value});
        }
        return out;
    }

    friend bool operator==(const SparseSymMatrix& a, const SparseSymMatrix& b) {
        if (a.dim() != b.dim() || a.diag_ != b.diag_) return false;
        for (std::size_t i = 0; i < a.dim(); ++i) {
            if (a.rows_[i].size() != b.rows_[i].size()) return false;
            for (std::size_t k = 0; k < a.rows_[i].size(); ++k)
                if (a.rows_[i][k].col != b.rows_[i][k].col || a.rows_[i][k].value != b.rows_[i][k].value)
                    return false;
        }
        return true;
    }

private:
    static void put(std::vector<Entry>& r, std::size_t col, double v) {
        auto it = std::lower_bound(r.begin(), r.end(), col, [](const Entry& e, std::size_t c) { return e.col < c; });
        bool found = it != r.end() && it->col == col;
        if (v == 0.0) {
            if (found) r.erase(it);
        } else if (found) {
            it->value = v;
        } else {
            r.insert(it, {col, v});
        }
    }

    std::vector<double> diag_;
    std::vector<std::vector<Entry>> rows_;
};

// Triplet text format: header "p <dim>", then "i j value" per upper-triangle
// entry with 17 significant digits, which round-trips doubles exactly.
inline void write_triplets(std::ostream& os, const SparseSymMatrix& m) {
    os << "p " << m.dim() << '\n';
    char buf[96];
    for (const auto& t : m.upper_triplets()) {
        std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", t.row, t.col, t.value);
        os << buf;
    }
}

inline SparseSymMatrix read_triplets(std::istream& is) {
    std::string line;
    std::size_t p = 0;
    bool have_dim = false;
    std::vector<Triplet> ts;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        if (!have_dim) {
            std::string key;
            if (!(ss >> key >> p) || key != "p") throw IoError("triplet file: expected 'p <dim>' header");
            have_dim = true;
            continue;
        }
        std::size_t i, j;
        std::string v;
        if (!(ss >> i >> j >> v)) throw IoError("triplet file: malformed line '" + line + "'");
        ts.push_back({i, j, std::strtod(v.c_str(), nullptr)});
    }
    if (!have_dim) throw IoError("triplet file: missing header");
    return SparseSymMatrix::from_triplets(p, ts);
}

// Envelope (skyline) Cholesky A = L L^T. Row i of L is stored densely from its
// first nonzero column to the diagonal; banded matrices cost O(p b^2).
class EnvelopeCholesky {
public:
    explicit EnvelopeCholesky(const SparseSymMatrix& a, double shift = 0.0) : p_(a.dim()), first_(p_), start_(p_ + 1) {
        for (std::size_t i = 0; i < p_; ++i) {
            std::size_t f = i;
            for (const auto& e : a.row(i))
                if (e.col < f) f = e.col;
            first_[i] = f;
        }
        start_[0] = 0;
        for (std::size_t i = 0; i < p_; ++i) start_[i + 1] = start_[i] + (i - first_[i] + 1);
        val_.assign(start_[p_], 0.0);
        for (std::size_t i = 0; i < p_; ++i) {
            at(i, i) = a.diag(i) + shift;
            for (const auto& e : a.row(i))
                if (e.col < i) at(i, e.col) = e.value;
        }
        for (std::size_t i = 0; i < p_; ++i) {
            double* li = &val_[start_[i]] - first_[i];
            for (std::size_t j = first_[i]; j < i; ++j) {
                const double* lj = &val_[start_[j]] - first_[j];
                std::size_t k0 = std::max(first_[i], first_[j]);
                double s = li[j];
                for (std::size_t k = k0; k < j; ++k) s -= li[k] * lj[k];
                li[j] = s / lj[j];
            }
            double d = li[i];
            for (std::size_t k = first_[i]; k < i; ++k) d -= li[k] * li[k];
            if (!(d > 0.0))
                throw NotPositiveDefinite("Cholesky breakdown at row " + std::to_string(i) + " (pivot " +
                                              std::to_string(d) + ")",
                                          i, d);
            li[i] = std::sqrt(d);
        }
    }

    std::size_t dim() const noexcept { return p_; }
    std::size_t envelope_size() const noexcept { return val_.size(); }

    double l(std::size_t i, std::size_t j) const {
        if (j > i || j < first_[i]) return 0.0;
        return val_[start_[i] + (j - first_[i])];
    }

    // Solves L y = b in place.
    void solve_lower_inplace(Eigen::Ref<Eigen::VectorXd> b) const {
        for (std::size_t i = 0; i < p_; ++i) {
            const double* li = &val_[start_[i]] - first_[i];
            double s = b[i];
            for (std::size_t k = first_[i]; k < i; ++k) s -= li[k] * b[k];
            b[i] = s / li[i];
        }
    }

    // Solves L^T x = y in place.
    void solve_upper_inplace(Eigen::Ref<Eigen::VectorXd> y) const {
        for (std::size_t ii = p_; ii-- > 0;) {
            const double* li = &val_[start_[ii]] - first_[ii];
            double xi = y[ii] / li[ii];
            y[ii] = xi;
            for (std::size_t k = first_[ii]; k < ii; ++k) y[k] -= li[k] * xi;
        }
    }

    Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& b) const {
        Eigen::VectorXd x = b;
        solve_lower_inplace(x);
        solve_upper_inplace(x);
        return x;
    }

    double min_pivot() const {
        double m = INFINITY;
        for (std::size_t i = 0; i < p_; ++i) m = std::min(m, l(i, i));
        return m * m;
    }

    double log_det() const {
        double s = 0.0;
        for (std::size_t i = 0; i < p_; ++i) s += std::log(l(i, i));
        return 2.0 * s;
    }

private:
    double& at(std::size_t i, std::size_t j) { return val_[start_[i] + (j - first_[i])]; }

    std::size_t p_;
    std::vector<std::size_t> first_;
    std::vector<std::size_t> start_;
    std::vector<double> val_;
};

}  // namespace rwc

#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace stochorder {

/// Vector of small non-negative integers over d coordinates.
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> entries) : entries_(std::move(entries)) {}
    static MultiIndex zero(int dim) { return MultiIndex(std::vector<int>(static_cast<std::size_t>(dim), 0)); }
    static MultiIndex unit(int dim, int axis) {
        auto m = zero(dim);
        m.entries_[static_cast<std::size_t>(axis)] = 1;
        return m;
    }

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(entries_.size()); }
    [[nodiscard]] int operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] const std::vector<int>& entries() const noexcept { return entries_; }
    [[nodiscard]] int norm1() const { return std::accumulate(entries_.begin(), entries_.end(), 0); }
    [[nodiscard]] int norm_inf() const {
        return entries_.empty() ? 0 : *std::max_element(entries_.begin(), entries_.end());
    }
    [[nodiscard]] bool non_negative() const {
        return std::all_of(entries_.begin(), entries_.end(), [](int v) { return v >= 0; });
    }
    /// Componentwise partial order.
    [[nodiscard]] bool leq(const MultiIndex& other) const {
        for (int i = 0; i < dim(); ++i) {
            if ((*this)[i] > other[i]) return false;
        }
        return true;
    }

    friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) { return a.combine(b, 1); }
    friend MultiIndex operator-(const MultiIndex& a, const MultiIndex& b) { return a.combine(b, -1); }
    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
    friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

    [[nodiscard]] std::string to_string() const {
        std::string out = "(";
        for (int i = 0; i < dim(); ++i) out += (i ? "," : "") + std::to_string((*this)[i]);
        return out + ")";
    }

private:
    [[nodiscard]] MultiIndex combine(const MultiIndex& other, int sign) const {
        std::vector<int> out(entries_);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * other.entries_[i];
        return MultiIndex(std::move(out));
    }

    std::vector<int> entries_;
};

/// Set of multi-indices in {0,1}^d, each of size one or two.
class IndexSet {
public:
    IndexSet() = default;
    IndexSet(int dim, std::vector<MultiIndex> members);

    static IndexSet coordinates(int dim);      // {e_1, ..., e_d}: componentwise increasing
    static IndexSet pairs(int dim);            // {e_k + e_l : k < l}: supermodular

    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] const std::vector<MultiIndex>& members() const noexcept { return members_; }
    [[nodiscard]] bool contains(const MultiIndex& m) const {
        return std::find(members_.begin(), members_.end(), m) != members_.end();
    }
    [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }
    [[nodiscard]] IndexSet without(const MultiIndex& m) const;

private:
    int dim_ = 0;
    std::vector<MultiIndex> members_;
};

}  // namespace stochorder

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rstsp/errors.hpp"
#include "rstsp/instance.hpp"
#include "rstsp/subgraph.hpp"

namespace rstsp {

/// Sparse edge heats aligned with a neighbor table.
///
/// values[i * k1 + s] is the heat of the edge from i to neighbors(i)[s]. Slot 0
/// is i itself and always holds 0. H(i, j) is 0 for every j outside row i.
class Heatmap {
public:
    Heatmap(std::shared_ptr<const NeighborTable> table, std::vector<double> values)
        : nb_(std::move(table)), values_(std::move(values)) {
        if (!nb_) throw ContractError("heatmap needs a neighbor table");
        if (values_.size() != nb_->n * nb_->k) throw ContractError("heatmap values do not match neighbor table");
        for (std::size_t i = 0; i < nb_->n; ++i) {
            if (nb_->k > 0 && values_[i * nb_->k] != 0.0) throw ContractError("self-edge heat must be 0");
        }
        for (double v : values_) {
            if (!(v >= 0.0 && v <= 1.0)) throw ContractError("heat outside [0,1]");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return nb_->n; }
    [[nodiscard]] std::size_t k1() const noexcept { return nb_->k; }
    [[nodiscard]] const std::shared_ptr<const NeighborTable>& table() const noexcept { return nb_; }
    [[nodiscard]] std::span<const std::uint32_t> neighbors(std::size_t i) const noexcept { return nb_->row(i); }
    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return {values_.data() + i * k1(), k1()};
    }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

    /// H(i, j); 0 when j is not a neighbor of i or j == i.
    [[nodiscard]] double operator()(std::size_t i, std::uint32_t j) const noexcept {
        const std::size_t s = nb_->slot(i, j);
        return s < k1() ? values_[i * k1() + s] : 0.0;
    }

    /// Dense n x n copy, row-major.
    [[nodiscard]] std::vector<double> dense() const {
        const std::size_t n = size();
        std::vector<double> out(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto nb = neighbors(i);
            const auto v = row(i);
            for (std::size_t s = 0; s < k1(); ++s) out[i * n + nb[s]] = v[s];
        }
        return out;
    }

private:
    std::shared_ptr<const NeighborTable> nb_;
    std::vector<double> values_;
};

/// Open interval bounds every stored neighbor heat is clamped to.
inline constexpr double kHeatFloor = std::numeric_limits<double>::denorm_min();
inline const double kHeatCeil = std::nextafter(1.0, 0.0);

/// Dist^-1 baseline: heat of neighbor j proportional to 1/d(i,j), scaled so the
/// row maximum is just below 1. Coincident distinct nodes get the maximal heat.
inline Heatmap inverse_distance_heatmap(const SubgraphSet& sub) {
    const std::size_t n = sub.size(), k = sub.k1();
    std::vector<double> values(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto d = sub.raw_dist(i);
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t s = 1; s < k; ++s) {
            if (d[s] > 0.0) dmin = std::min(dmin, d[s]);
        }
        for (std::size_t s = 1; s < k; ++s) {
            const double v = d[s] > 0.0 ? kHeatCeil * (dmin / d[s]) : kHeatCeil;
            values[i * k + s] = std::max(v, kHeatFloor);
        }
    }
    return Heatmap(sub.table(), std::move(values));
}

/// CSV rows (i, j, heat) for neighbor pairs only (self-edges omitted), 1-based.
inline void write_heatmap_csv(std::ostream& os, const Heatmap& hm) {
    os << "i,j,heat\n";
    for (std::size_t i = 0; i < hm.size(); ++i) {
        const auto nb = hm.neighbors(i);
        const auto v = hm.row(i);
        for (std::size_t s = 1; s < hm.k1(); ++s) {
            os << i + 1 << ',' << nb[s] + 1 << ',';
            detail::write_real(os, v[s]) << '\n';
        }
    }
}

/// Reads write_heatmap_csv output. Every node must list the same number of
/// neighbors; row order within a node is preserved.
inline Heatmap read_heatmap_csv(std::istream& in) {
    detail::LineReader rd(in);
    std::string line;
    std::map<std::uint32_t, std::vector<std::pair<std::uint32_t, double>>> rows;
    std::size_t max_index = 0;
    bool first = true;
    while (rd.next(line)) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        if (first) {
            first = false;
            if (t.rfind("i,", 0) == 0) continue;
        }
        std::vector<std::string> f;
        std::string field;
        std::istringstream fs(t);
        while (std::getline(fs, field, ',')) f.push_back(detail::trim(field));
        if (f.size() != 3) throw ParseError("heatmap row needs 3 fields", rd.line_no());
        const auto i = detail::parse_count(f[0], rd.line_no(), "node index");
        const auto j = detail::parse_count(f[1], rd.line_no(), "node index");
        double h = 0.0;
        if (!detail::parse_double(f[2], h) || !(h >= 0.0 && h <= 1.0)) throw ParseError("bad heat value", rd.line_no());
        if (i < 1 || j < 1 || i == j) throw ParseError("bad node pair", rd.line_no());
        max_index = std::max({max_index, i, j});
        rows[static_cast<std::uint32_t>(i - 1)].emplace_back(static_cast<std::uint32_t>(j - 1), h);
    }
    const std::size_t n = max_index;
    if (n == 0 || rows.size() != n) throw FormatError("heatmap CSV does not cover every node");
    const std::size_t k = rows.begin()->second.size() + 1;
    auto table = std::make_shared<NeighborTable>(NeighborTable{n, k, std::vector<std::uint32_t>(n * k)});
    std::vector<double> values(n * k, 0.0);
    for (const auto& [i, entries] : rows) {
        if (entries.size() + 1 != k) throw FormatError("heatmap CSV rows have unequal neighbor counts");
        table->idx[i * k] = i;
        for (std::size_t s = 0; s < entries.size(); ++s) {
            table->idx[i * k + s + 1] = entries[s].first;
            values[i * k + s + 1] = entries[s].second;
        }
    }
    return Heatmap(std::move(table), std::move(values));
}

}  // namespace rstsp

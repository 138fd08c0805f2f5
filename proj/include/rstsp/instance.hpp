#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rstsp/errors.hpp"
#include "rstsp/rng.hpp"

namespace rstsp {

struct Point {
    double a = 0.0;
    double b = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double euclid(const Point& p, const Point& q) noexcept {
    const double da = p.a - q.a, db = p.b - q.b;
    return std::sqrt(da * da + db * db);
}

/// TSPLIB EUC_2D: Euclidean distance rounded to the nearest integer.
inline double euc2d_rounded(const Point& p, const Point& q) noexcept {
    return static_cast<double>(static_cast<std::int64_t>(euclid(p, q) + 0.5));
}

enum class Metric { ContinuousEuclid, TsplibEuc2dRounded };

/// Maps points into [0,1]^2: translate to the bounding-box minimum, divide both
/// axes by the larger extent. A fully coincident set maps to the origin.
inline std::vector<Point> normalize_to_unit_square(std::span<const Point> pts) {
    if (pts.empty()) return {};
    double amin = pts[0].a, amax = pts[0].a, bmin = pts[0].b, bmax = pts[0].b;
    for (const auto& p : pts) {
        amin = std::min(amin, p.a);
        amax = std::max(amax, p.a);
        bmin = std::min(bmin, p.b);
        bmax = std::max(bmax, p.b);
    }
    const double extent = std::max(amax - amin, bmax - bmin);
    const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
    std::vector<Point> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        // min() guards the last ulp of the larger axis against rounding past 1
        out.push_back({std::min((p.a - amin) * scale, 1.0), std::min((p.b - bmin) * scale, 1.0)});
    }
    return out;
}

/// Node coordinates plus the distance convention used to score tours.
///
/// `coords` are what the network and the search operate on. For TSPLIB input
/// they are `raw_coords` normalized into the unit square, and tour lengths are
/// scored with the rounded EUC_2D metric on the raw coordinates.
class Instance {
public:
    Instance(std::string id, std::vector<Point> coords, Metric metric = Metric::ContinuousEuclid,
             std::optional<std::vector<Point>> raw_coords = std::nullopt)
        : id_(std::move(id)), coords_(std::move(coords)), metric_(metric), raw_(std::move(raw_coords)) {
        if (coords_.size() < 2) throw ArgumentError("instance needs at least 2 nodes");
        for (const auto& p : coords_) {
            if (!std::isfinite(p.a) || !std::isfinite(p.b)) throw ArgumentError("non-finite coordinate");
            if (metric_ == Metric::ContinuousEuclid && (p.a < 0.0 || p.a > 1.0 || p.b < 0.0 || p.b > 1.0)) {
                throw ArgumentError("coordinate outside [0,1] under continuous Euclidean metric");
            }
        }
        if (raw_ && raw_->size() != coords_.size()) throw ArgumentError("raw_coords size differs from coords");
    }

    /// Instance whose normalized coordinates are derived from `raw`.
    static Instance from_raw(std::string id, std::vector<Point> raw, Metric metric) {
        auto coords = normalize_to_unit_square(raw);
        return Instance(std::move(id), std::move(coords), metric, std::move(raw));
    }

    [[nodiscard]] const std::string& id() const noexcept { return id_; }
    [[nodiscard]] std::size_t size() const noexcept { return coords_.size(); }
    [[nodiscard]] std::span<const Point> coords() const noexcept { return coords_; }
    [[nodiscard]] const Point& operator[](std::size_t i) const noexcept { return coords_[i]; }
    [[nodiscard]] Metric metric() const noexcept { return metric_; }
    [[nodiscard]] const std::optional<std::vector<Point>>& raw_coords() const noexcept { return raw_; }

    /// Euclidean distance on the normalized coordinates (what the search optimizes).
    [[nodiscard]] double dist(std::size_t i, std::size_t j) const noexcept {
        return euclid(coords_[i], coords_[j]);
    }

    /// Distance under the instance metric (what tours are scored with).
    [[nodiscard]] double metric_dist(std::size_t i, std::size_t j) const noexcept {
        if (metric_ == Metric::ContinuousEuclid) return euclid(coords_[i], coords_[j]);
        const auto& pts = raw_ ? *raw_ : coords_;
        return euc2d_rounded(pts[i], pts[j]);
    }

    friend bool operator==(const Instance&, const Instance&) = default;

private:
    std::string id_;
    std::vector<Point> coords_;
    Metric metric_;
    std::optional<std::vector<Point>> raw_;
};

/// A closed tour, stored as a 0-based permutation of the node indices.
class Tour {
public:
    Tour() = default;
    explicit Tour(std::vector<std::uint32_t> perm) : perm_(std::move(perm)) {
        if (!is_permutation(perm_)) throw ContractError("tour is not a permutation of 0..n-1");
    }

    static bool is_permutation(std::span<const std::uint32_t> perm) {
        std::vector<char> seen(perm.size(), 0);
        for (auto v : perm) {
            if (v >= perm.size() || seen[v]) return false;
            seen[v] = 1;
        }
        return true;
    }

    [[nodiscard]] std::size_t size() const noexcept { return perm_.size(); }
    [[nodiscard]] std::span<const std::uint32_t> perm() const noexcept { return perm_; }
    [[nodiscard]] std::uint32_t operator[](std::size_t i) const noexcept { return perm_[i]; }
    [[nodiscard]] auto begin() const noexcept { return perm_.begin(); }
    [[nodiscard]] auto end() const noexcept { return perm_.end(); }

    /// Successor (index 0) and predecessor (index 1) of every node.
    [[nodiscard]] std::vector<std::array<std::uint32_t, 2>> adjacency() const {
        const std::size_t n = perm_.size();
        std::vector<std::array<std::uint32_t, 2>> adj(n);
        for (std::size_t k = 0; k < n; ++k) {
            adj[perm_[k]][0] = perm_[(k + 1) % n];
            adj[perm_[k]][1] = perm_[(k + n - 1) % n];
        }
        return adj;
    }

    friend bool operator==(const Tour&, const Tour&) = default;

private:
    std::vector<std::uint32_t> perm_;
};

/// Length of the closed tour under the instance metric.
inline double tour_length(const Instance& inst, const Tour& tour) {
    const std::size_t n = inst.size();
    if (tour.size() != n || !Tour::is_permutation(tour.perm())) {
        throw ContractError("tour does not match instance of size " + std::to_string(n));
    }
    double len = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) len += inst.metric_dist(tour[k], tour[k + 1]);
    return len + inst.metric_dist(tour[n - 1], tour[0]);
}

/// Tour length on the normalized coordinates, regardless of metric.
inline double tour_length_normalized(const Instance& inst, std::span<const std::uint32_t> perm) {
    const std::size_t n = perm.size();
    double len = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) len += inst.dist(perm[k], perm[k + 1]);
    return len + inst.dist(perm[n - 1], perm[0]);
}

struct LabeledInstance {
    Instance instance;
    Tour optimal_tour;
    double optimal_length;
};

inline LabeledInstance make_labeled(Instance inst, Tour tour) {
    const double len = tour_length(inst, tour);
    return {std::move(inst), std::move(tour), len};
}

/// n points i.i.d. uniform on [0,1]^2; a pure function of (n, seed).
inline Instance generate_uniform(std::size_t n, std::uint64_t seed, std::string id = {}) {
    if (n < 3) throw ArgumentError("generate_uniform: n must be >= 3, got " + std::to_string(n));
    Rng rng(derive_seed(seed, 0x756E69666F726DULL));
    std::vector<Point> pts(n);
    for (auto& p : pts) {
        p.a = rng.uniform();
        p.b = rng.uniform();
    }
    if (id.empty()) id = "tsp" + std::to_string(n) + "_s" + std::to_string(seed);
    return Instance(std::move(id), std::move(pts));
}

/// L / L_opt - 1.
inline double optimality_gap(double length, double optimal) {
    if (!(optimal > 0.0)) throw ArgumentError("optimality_gap: optimal length must be positive");
    return length / optimal - 1.0;
}

// ---------------------------------------------------------------------------
// Text formats

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
}

inline bool parse_double(std::string_view tok, double& out) {
    // from_chars rejects a leading '+', which some generators emit
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc() && ptr == end;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) toks.push_back(line.substr(i, j - i));
        i = j;
    }
    return toks;
}

/// Line reader that keeps a 1-based line counter for error messages.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++line_no_;
        return true;
    }
    /// Next line that is not blank.
    bool next_nonblank(std::string& line) {
        while (next(line)) {
            if (!trim(line).empty()) return true;
        }
        return false;
    }
    [[nodiscard]] std::size_t line_no() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

inline std::ostream& write_real(std::ostream& os, double v) {
    return os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
}

inline std::size_t parse_count(std::string_view tok, std::size_t line, const char* what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw ParseError(std::string("bad ") + what, line);
    return v;
}

inline std::optional<Instance> read_instance_block(LineReader& rd, const std::string& id) {
    std::string line;
    if (!rd.next_nonblank(line)) return std::nullopt;
    const auto head = split_ws(line);
    if (head.size() != 1) throw ParseError("expected node count", rd.line_no());
    const std::size_t n = parse_count(head[0], rd.line_no(), "node count");
    std::vector<Point> pts(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!rd.next_nonblank(line)) throw ParseError("unexpected end of file in coordinates", rd.line_no() + 1);
        const auto toks = split_ws(line);
        if (toks.size() != 2 || !parse_double(toks[0], pts[k].a) || !parse_double(toks[1], pts[k].b)) {
            throw ParseError("malformed coordinate line", rd.line_no());
        }
    }
    try {
        return Instance(id, std::move(pts));
    } catch (const ArgumentError& e) {
        throw ParseError(e.what(), rd.line_no());
    }
}

}  // namespace detail

/// Internal instance format: a line with n, then n lines "a b".
inline Instance read_instance(std::istream& in, const std::string& id = "instance") {
    detail::LineReader rd(in);
    auto inst = detail::read_instance_block(rd, id);
    if (!inst) throw ParseError("empty instance file", rd.line_no() + 1);
    return std::move(*inst);
}

inline void write_instance(std::ostream& os, const Instance& inst) {
    os << inst.size() << '\n';
    for (const auto& p : inst.coords()) {
        detail::write_real(os, p.a) << ' ';
        detail::write_real(os, p.b) << '\n';
    }
}

inline void write_tour_line(std::ostream& os, const Tour& tour) {
    for (std::size_t k = 0; k < tour.size(); ++k) os << (k ? " " : "") << tour[k] + 1;
    os << '\n';
}

/// Labeled dataset: records of (instance block, one line of n 1-based indices).
/// Record ids are `<prefix>_<k>` with k counted from 0.
inline std::vector<LabeledInstance> read_labeled_dataset(std::istream& in, const std::string& prefix = "labeled") {
    detail::LineReader rd(in);
    std::vector<LabeledInstance> out;
    std::string line;
    for (std::size_t k = 0;; ++k) {
        auto inst = detail::read_instance_block(rd, prefix + "_" + std::to_string(k));
        if (!inst) break;
        if (!rd.next_nonblank(line)) throw ParseError("missing tour line", rd.line_no() + 1);
        const auto toks = detail::split_ws(line);
        if (toks.size() != inst->size()) throw ParseError("tour line has wrong length", rd.line_no());
        std::vector<std::uint32_t> perm;
        perm.reserve(toks.size());
        for (auto t : toks) {
            const auto v = detail::parse_count(t, rd.line_no(), "tour index");
            if (v < 1 || v > inst->size()) throw ParseError("tour index out of range", rd.line_no());
            perm.push_back(static_cast<std::uint32_t>(v - 1));
        }
        if (!Tour::is_permutation(perm)) throw ParseError("tour is not a permutation", rd.line_no());
        out.push_back(make_labeled(std::move(*inst), Tour(std::move(perm))));
    }
    return out;
}

inline void write_labeled(std::ostream& os, const LabeledInstance& li) {
    write_instance(os, li.instance);
    write_tour_line(os, li.optimal_tour);
}

/// TSPLIB reader. Only EUC_2D with a NODE_COORD_SECTION is supported.
inline Instance parse_tsplib(std::istream& in) {
    detail::LineReader rd(in);
    std::string line, name = "tsplib", ewt;
    std::size_t dim = 0;
    bool have_dim = false, in_coords = false;
    std::vector<Point> pts;
    std::vector<char> seen;
    std::size_t filled = 0;

    while (rd.next(line)) {
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        if (in_coords) {
            const auto toks = detail::split_ws(t);
            if (detail::upper(std::string(toks[0])) == "EOF") break;
            if (std::isalpha(static_cast<unsigned char>(toks[0][0]))) {
                in_coords = false;  // next section keyword
            } else {
                double x = 0, y = 0;
                std::size_t idx = 0;
                if (toks.size() != 3) throw ParseError("malformed coordinate line", rd.line_no());
                idx = detail::parse_count(toks[0], rd.line_no(), "node index");
                if (!detail::parse_double(toks[1], x) || !detail::parse_double(toks[2], y)) {
                    throw ParseError("malformed coordinate line", rd.line_no());
                }
                if (idx < 1 || idx > dim) throw ParseError("node index out of range", rd.line_no());
                if (seen[idx - 1]) throw ParseError("duplicate node index", rd.line_no());
                seen[idx - 1] = 1;
                pts[idx - 1] = {x, y};
                ++filled;
                continue;
            }
        }
        const auto colon = t.find(':');
        std::string key = detail::upper(detail::trim(t.substr(0, colon)));
        const std::string value = colon == std::string::npos ? std::string() : detail::trim(t.substr(colon + 1));
        if (key == "EOF") break;
        if (key == "NAME") {
            name = value;
        } else if (key == "TYPE") {
            if (detail::upper(value) != "TSP") throw UnsupportedFormatError("unsupported TYPE: " + value);
        } else if (key == "DIMENSION") {
            dim = detail::parse_count(value, rd.line_no(), "DIMENSION");
            have_dim = true;
        } else if (key == "EDGE_WEIGHT_TYPE") {
            ewt = detail::upper(value);
            if (ewt != "EUC_2D") throw UnsupportedFormatError("unsupported EDGE_WEIGHT_TYPE: " + value);
        } else if (key == "NODE_COORD_SECTION") {
            if (!have_dim) throw ParseError("NODE_COORD_SECTION before DIMENSION", rd.line_no());
            if (ewt.empty()) throw UnsupportedFormatError("missing EDGE_WEIGHT_TYPE");
            pts.assign(dim, {});
            seen.assign(dim, 0);
            in_coords = true;
        } else if (key == "COMMENT" || key == "NODE_COORD_TYPE" || key == "DISPLAY_DATA_TYPE") {
            // informational
        } else {
            throw UnsupportedFormatError("unsupported TSPLIB section: " + key);
        }
    }
    if (ewt.empty()) throw UnsupportedFormatError("missing EDGE_WEIGHT_TYPE");
    if (!have_dim || filled != dim) throw ParseError("expected " + std::to_string(dim) + " coordinates, got " + std::to_string(filled), rd.line_no());
    try {
        return Instance::from_raw(name, std::move(pts), Metric::TsplibEuc2dRounded);
    } catch (const ArgumentError& e) {
        throw ParseError(e.what(), rd.line_no());
    }
}

/// Writes a TSPLIB EUC_2D file from raw_coords (or coords if none).
inline void serialize_tsplib(std::ostream& os, const Instance& inst) {
    const auto& pts = inst.raw_coords() ? *inst.raw_coords() : std::vector<Point>(inst.coords().begin(), inst.coords().end());
    os << "NAME : " << inst.id() << "\nTYPE : TSP\nDIMENSION : " << inst.size()
       << "\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        os << i + 1 << ' ';
        detail::write_real(os, pts[i].a) << ' ';
        detail::write_real(os, pts[i].b) << '\n';
    }
    os << "EOF\n";
}

/// Detects TSPLIB by keyword and dispatches to the matching reader.
inline Instance read_any_instance(std::istream& in, const std::string& id) {
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::istringstream ss(text);
    if (text.find("NODE_COORD_SECTION") != std::string::npos || text.find("EDGE_WEIGHT_TYPE") != std::string::npos) {
        return parse_tsplib(ss);
    }
    return read_instance(ss, id);
}

}  // namespace rstsp

#pragma once

// Residual gated graph convolutional network over rescaled k-NN subgraphs.
//
//   node embedding   x_i   = W1 x_i + b1                  (global coordinates)
//   edge embedding   e_ij  = W2 e_ij + b2                 (rescaled distance)
//   node update      x_i' = x_i + GELU(LN(W3 x_i + sum_j sigmoid(e_ij) * (W4 x_j)))
//   edge update      e_ij' = e_ij + GELU(LN(W5 e_ij + W6 x_i + W7 x_j))
//   head             H_ij  = sigmoid(M2 GELU(M1 e_ij + mb1) + mb2),  j != i
//
// The default model ties W7 to W6 (one endpoint projection applied to both
// edge ends); untied models are fully supported.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rstsp/errors.hpp"
#include "rstsp/heatmap.hpp"
#include "rstsp/instance.hpp"
#include "rstsp/rng.hpp"
#include "rstsp/subgraph.hpp"

namespace rstsp {

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

/// Affine map y = W x + b with W stored row-major (rows x cols).
struct Dense {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> w;
    std::vector<float> b;

    Dense() = default;
    Dense(std::size_t r, std::size_t c) : rows(r), cols(c), w(r * c, 0.0f), b(r, 0.0f) {}

    [[nodiscard]] std::size_t parameter_count() const noexcept { return w.size() + b.size(); }
    [[nodiscard]] bool empty() const noexcept { return rows == 0; }
    friend bool operator==(const Dense&, const Dense&) = default;
};

struct LayerNormParams {
    std::vector<float> gain;
    std::vector<float> offset;

    LayerNormParams() = default;
    explicit LayerNormParams(std::size_t h) : gain(h, 1.0f), offset(h, 0.0f) {}
    friend bool operator==(const LayerNormParams&, const LayerNormParams&) = default;
};

struct ConvLayerWeights {
    Dense node_self;       // W3
    Dense node_message;    // W4
    Dense edge_self;       // W5
    Dense edge_source;     // W6
    Dense edge_target;     // W7, empty when tied to W6
    LayerNormParams node_norm;
    LayerNormParams edge_norm;

    friend bool operator==(const ConvLayerWeights&, const ConvLayerWeights&) = default;
};

struct ModelWeights {
    std::uint32_t layers = 6;
    std::uint32_t hidden = 128;
    std::uint32_t k1_hint = 50;
    bool tied_endpoints = true;

    Dense node_embed;   // W1 (h x 2), b1
    Dense edge_embed;   // W2 (h x 1), b2
    std::vector<ConvLayerWeights> conv;
    Dense head_hidden;  // M1 (h x h), mb1
    Dense head_out;     // M2 (1 x h), mb2

    /// All-zero tensors with unit LayerNorm gains.
    static ModelWeights zeros(std::uint32_t layers = 6, std::uint32_t hidden = 128, bool tied = true) {
        ModelWeights m;
        m.layers = layers;
        m.hidden = hidden;
        m.tied_endpoints = tied;
        const std::size_t h = hidden;
        m.node_embed = Dense(h, 2);
        m.edge_embed = Dense(h, 1);
        m.conv.resize(layers);
        for (auto& c : m.conv) {
            c.node_self = Dense(h, h);
            c.node_message = Dense(h, h);
            c.edge_self = Dense(h, h);
            c.edge_source = Dense(h, h);
            if (!tied) c.edge_target = Dense(h, h);
            c.node_norm = LayerNormParams(h);
            c.edge_norm = LayerNormParams(h);
        }
        m.head_hidden = Dense(h, h);
        m.head_out = Dense(1, h);
        return m;
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; LayerNorm
    /// gains and offsets are drawn around (1, 0) when `perturb_norms` is set.
    static ModelWeights random(std::uint32_t layers, std::uint32_t hidden, std::uint64_t seed, bool tied = true,
                               bool perturb_norms = false) {
        ModelWeights m = zeros(layers, hidden, tied);
        Rng rng(derive_seed(seed, 0x7765696768747300ULL));
        auto fill = [&](Dense& d) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(d.cols));
            for (auto& v : d.w) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
            for (auto& v : d.b) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
        };
        auto fill_norm = [&](LayerNormParams& p) {
            if (!perturb_norms) return;
            for (auto& v : p.gain) v = static_cast<float>(0.5 + rng.uniform());
            for (auto& v : p.offset) v = static_cast<float>(rng.uniform() - 0.5);
        };
        m.for_each_dense([&](Dense& d) { fill(d); });
        for (auto& c : m.conv) {
            fill_norm(c.node_norm);
            fill_norm(c.edge_norm);
        }
        return m;
    }

    template <class F>
    void for_each_dense(F&& f) {
        f(node_embed);
        f(edge_embed);
        for (auto& c : conv) {
            f(c.node_self);
            f(c.node_message);
            f(c.edge_self);
            f(c.edge_source);
            if (!c.edge_target.empty()) f(c.edge_target);
        }
        f(head_hidden);
        f(head_out);
    }

    [[nodiscard]] std::size_t parameter_count() const noexcept {
        std::size_t total = node_embed.parameter_count() + edge_embed.parameter_count() +
                            head_hidden.parameter_count() + head_out.parameter_count();
        for (const auto& c : conv) {
            total += c.node_self.parameter_count() + c.node_message.parameter_count() + c.edge_self.parameter_count() +
                     c.edge_source.parameter_count() + c.edge_target.parameter_count();
            total += 2 * (c.node_norm.gain.size() + c.edge_norm.gain.size());
        }
        return total;
    }

    /// Throws ContractError unless every tensor matches (layers, hidden).
    void validate() const {
        const std::size_t h = hidden;
        auto check = [](const Dense& d, std::size_t r, std::size_t c, const std::string& name) {
            if (d.rows != r || d.cols != c || d.w.size() != r * c || d.b.size() != r) {
                throw ContractError("tensor " + name + " has shape inconsistent with model dimensions");
            }
        };
        check(node_embed, h, 2, "W1");
        check(edge_embed, h, 1, "W2");
        if (conv.size() != layers) throw ContractError("layer count mismatch");
        for (std::size_t l = 0; l < conv.size(); ++l) {
            const auto& c = conv[l];
            const std::string p = "layer " + std::to_string(l + 1) + " ";
            check(c.node_self, h, h, p + "W3");
            check(c.node_message, h, h, p + "W4");
            check(c.edge_self, h, h, p + "W5");
            check(c.edge_source, h, h, p + "W6");
            if (tied_endpoints != c.edge_target.empty()) throw ContractError(p + "W7 presence disagrees with tying flag");
            if (!tied_endpoints) check(c.edge_target, h, h, p + "W7");
            for (const auto* ln : {&c.node_norm, &c.edge_norm}) {
                if (ln->gain.size() != h || ln->offset.size() != h) throw ContractError(p + "LayerNorm size mismatch");
            }
        }
        check(head_hidden, h, h, "M1");
        check(head_out, 1, h, "M2");
    }

    friend bool operator==(const ModelWeights&, const ModelWeights&) = default;
};

// ---------------------------------------------------------------------------
// Numerics

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double z = std::exp(x);
    return z / (1.0 + z);
}

/// Exact (erf) GELU.
inline double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x * 0.70710678118654752440)); }

inline constexpr double kLayerNormEps = 1e-5;

/// In-place LayerNorm over one feature vector.
inline void layer_norm(std::span<double> v, const LayerNormParams& p) noexcept {
    const std::size_t h = v.size();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t f = 0; f < h; ++f) v[f] = (v[f] - mean) * inv * p.gain[f] + p.offset[f];
}

/// Node features (n x h) and edge features (n x k1 x h), row-major.
struct Features {
    std::size_t n = 0;
    std::size_t k1 = 0;
    std::size_t h = 0;
    std::vector<double> x;
    std::vector<double> e;

    [[nodiscard]] std::span<const double> node(std::size_t i) const noexcept { return {x.data() + i * h, h}; }
    [[nodiscard]] std::span<const double> edge(std::size_t i, std::size_t s) const noexcept {
        return {e.data() + (i * k1 + s) * h, h};
    }
};

namespace detail {

/// out = W v + b, accumulated in double.
inline void affine(const Dense& d, std::span<const double> v, double* out) noexcept {
    for (std::size_t r = 0; r < d.rows; ++r) {
        const float* wr = d.w.data() + r * d.cols;
        double acc = d.b[r];
        for (std::size_t c = 0; c < d.cols; ++c) acc += static_cast<double>(wr[c]) * v[c];
        out[r] = acc;
    }
}

/// Applies `d` to each of `count` consecutive vectors of width d.cols.
inline std::vector<double> affine_rows(const Dense& d, const std::vector<double>& in, std::size_t count) {
    std::vector<double> out(count * d.rows);
    for (std::size_t r = 0; r < count; ++r) affine(d, {in.data() + r * d.cols, d.cols}, out.data() + r * d.rows);
    return out;
}

inline void check_finite(std::span<const double> v, std::size_t layer, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string("non-finite ") + what + " feature at layer " + std::to_string(layer));
        }
    }
}

}  // namespace detail

/// Linear embeddings of global coordinates and rescaled subgraph distances.
inline Features embed(const Instance& inst, const SubgraphSet& sub, const ModelWeights& w) {
    if (!sub.rescaled()) throw ContractError("embed requires a rescaled subgraph set");
    if (inst.size() != sub.size()) throw ContractError("embed: instance and subgraph sizes differ");
    if (w.node_embed.rows != w.hidden || w.node_embed.cols != 2 || w.edge_embed.rows != w.hidden || w.edge_embed.cols != 1) {
        throw ContractError("embed: weight dimensions do not match hidden size");
    }
    Features f{inst.size(), sub.k1(), w.hidden, {}, {}};
    f.x.resize(f.n * f.h);
    f.e.resize(f.n * f.k1 * f.h);
    for (std::size_t i = 0; i < f.n; ++i) {
        const double xy[2] = {inst[i].a, inst[i].b};
        detail::affine(w.node_embed, xy, f.x.data() + i * f.h);
        const auto d = sub.rescaled_dist(i);
        for (std::size_t s = 0; s < f.k1; ++s) {
            const double v[1] = {d[s]};
            detail::affine(w.edge_embed, v, f.e.data() + (i * f.k1 + s) * f.h);
        }
    }
    return f;
}

/// One residual gated convolution. `layer` is 1-based and only used in errors.
inline Features conv_layer(const Features& in, const NeighborTable& nb, const ConvLayerWeights& cw, std::size_t layer = 1) {
    const std::size_t n = in.n, k = in.k1, h = in.h;
    if (nb.n != n || nb.k != k) throw ContractError("conv_layer: features do not match neighbor table");
    if (cw.node_self.rows != h || cw.node_self.cols != h) throw ContractError("conv_layer: weight dimensions do not match features");

    const auto self = detail::affine_rows(cw.node_self, in.x, n);
    const auto msg = detail::affine_rows(cw.node_message, in.x, n);
    const auto src = detail::affine_rows(cw.edge_source, in.x, n);
    const auto dst = cw.edge_target.empty() ? src : detail::affine_rows(cw.edge_target, in.x, n);

    Features out{n, k, h, in.x, in.e};
    std::vector<double> buf(h);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = nb.row(i);
        for (std::size_t f = 0; f < h; ++f) buf[f] = self[i * h + f];
        for (std::size_t s = 0; s < k; ++s) {
            const double* e = in.e.data() + (i * k + s) * h;
            const double* m = msg.data() + static_cast<std::size_t>(row[s]) * h;
            for (std::size_t f = 0; f < h; ++f) buf[f] += sigmoid(e[f]) * m[f];
        }
        layer_norm(buf, cw.node_norm);
        for (std::size_t f = 0; f < h; ++f) out.x[i * h + f] += gelu(buf[f]);

        for (std::size_t s = 0; s < k; ++s) {
            const std::size_t j = row[s];
            detail::affine(cw.edge_self, in.edge(i, s), buf.data());
            for (std::size_t f = 0; f < h; ++f) buf[f] += src[i * h + f] + dst[j * h + f];
            layer_norm(buf, cw.edge_norm);
            double* eo = out.e.data() + (i * k + s) * h;
            for (std::size_t f = 0; f < h; ++f) eo[f] += gelu(buf[f]);
        }
    }
    detail::check_finite(out.x, layer, "node");
    detail::check_finite(out.e, layer, "edge");
    return out;
}

/// Logit of the projection head for one edge feature vector.
inline double head_logit(const ModelWeights& w, std::span<const double> e) {
    std::vector<double> hid(w.head_hidden.rows);
    detail::affine(w.head_hidden, e, hid.data());
    for (auto& v : hid) v = gelu(v);
    double out = 0.0;
    detail::affine(w.head_out, hid, &out);
    return out;
}

/// Full inference: embedding, `layers` convolutions, edge head. Self-edges get 0;
/// neighbor heats are clamped into the open interval (0, 1).
inline Heatmap forward(const Instance& inst, const SubgraphSet& sub, const ModelWeights& w) {
    w.validate();
    Features f = embed(inst, sub, w);
    detail::check_finite(f.x, 0, "node");
    detail::check_finite(f.e, 0, "edge");
    for (std::size_t l = 0; l < w.conv.size(); ++l) f = conv_layer(f, *sub.table(), w.conv[l], l + 1);

    const std::size_t n = f.n, k = f.k1;
    std::vector<double> values(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 1; s < k; ++s) {
            const double logit = head_logit(w, f.edge(i, s));
            if (!std::isfinite(logit)) throw NumericError("non-finite head output");
            values[i * k + s] = std::clamp(sigmoid(logit), kHeatFloor, kHeatCeil);
        }
    }
    return Heatmap(sub.table(), std::move(values));
}

// ---------------------------------------------------------------------------
// Weight file: "RSGC", u32 version, u32 layers, u32 hidden, u32 k1_hint, then
// little-endian f32 tensors in fixed order. Version 1 carries W7/b7 per layer,
// version 2 is the tied layout without them.

inline constexpr char kWeightMagic[4] = {'R', 'S', 'G', 'C'};
inline constexpr std::uint32_t kWeightVersionUntied = 1;
inline constexpr std::uint32_t kWeightVersionTied = 2;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

inline void put_f32(std::ostream& os, const std::vector<float>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline std::uint32_t get_u32(std::istream& in, const char* field) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), 4)) throw FormatError(std::string("weight file truncated in header field ") + field);
    return v;
}

inline void get_f32(std::istream& in, std::vector<float>& v, const std::string& field) {
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)))) {
        throw FormatError("weight file truncated in tensor " + field);
    }
}

template <class Visit>
void visit_tensors(ModelWeights& m, Visit&& visit) {
    visit(m.node_embed.w, "W1");
    visit(m.node_embed.b, "b1");
    visit(m.edge_embed.w, "W2");
    visit(m.edge_embed.b, "b2");
    for (std::size_t l = 0; l < m.conv.size(); ++l) {
        auto& c = m.conv[l];
        const std::string p = "layer " + std::to_string(l + 1) + " ";
        visit(c.node_self.w, p + "W3");
        visit(c.node_self.b, p + "b3");
        visit(c.node_message.w, p + "W4");
        visit(c.node_message.b, p + "b4");
        visit(c.edge_self.w, p + "W5");
        visit(c.edge_self.b, p + "b5");
        visit(c.edge_source.w, p + "W6");
        visit(c.edge_source.b, p + "b6");
        if (!m.tied_endpoints) {
            visit(c.edge_target.w, p + "W7");
            visit(c.edge_target.b, p + "b7");
        }
        visit(c.node_norm.gain, p + "LN_node.gain");
        visit(c.node_norm.offset, p + "LN_node.offset");
        visit(c.edge_norm.gain, p + "LN_edge.gain");
        visit(c.edge_norm.offset, p + "LN_edge.offset");
    }
    visit(m.head_hidden.w, "M1");
    visit(m.head_hidden.b, "mb1");
    visit(m.head_out.w, "M2");
    visit(m.head_out.b, "mb2");
}

}  // namespace detail

inline void save_weights(std::ostream& os, const ModelWeights& w) {
    w.validate();
    os.write(kWeightMagic, 4);
    detail::put_u32(os, w.tied_endpoints ? kWeightVersionTied : kWeightVersionUntied);
    detail::put_u32(os, w.layers);
    detail::put_u32(os, w.hidden);
    detail::put_u32(os, w.k1_hint);
    auto copy = w;
    detail::visit_tensors(copy, [&](std::vector<float>& v, const std::string&) { detail::put_f32(os, v); });
    if (!os) throw FormatError("failed writing weight file");
}

inline ModelWeights load_weights(std::istream& in) {
    char magic[4] = {};
    if (!in.read(magic, 4)) throw FormatError("weight file truncated in field magic");
    if (std::memcmp(magic, kWeightMagic, 4) != 0) throw FormatError("weight file has bad magic (expected RSGC)");
    const auto version = detail::get_u32(in, "version");
    if (version != kWeightVersionUntied && version != kWeightVersionTied) {
        throw FormatError("unsupported weight file version " + std::to_string(version));
    }
    const auto layers = detail::get_u32(in, "layers");
    const auto hidden = detail::get_u32(in, "hidden");
    const auto k1_hint = detail::get_u32(in, "k1_hint");
    if (layers == 0 || layers > 1024 || hidden == 0 || hidden > 65536) {
        throw FormatError("weight file has implausible dimensions");
    }
    auto m = ModelWeights::zeros(layers, hidden, version == kWeightVersionTied);
    m.k1_hint = k1_hint;
    detail::visit_tensors(m, [&](std::vector<float>& v, const std::string& name) { detail::get_f32(in, v, name); });
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("weight file has trailing bytes");
    return m;
}

inline void save_weights(const std::string& path, const ModelWeights& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open weight file for writing: " + path);
    save_weights(os, w);
}

inline ModelWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open weight file: " + path);
    return load_weights(in);
}

}  // namespace rstsp

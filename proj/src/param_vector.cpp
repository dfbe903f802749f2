#include "fedpvr/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "fedpvr/kernels.hpp"

namespace fedpvr {

void check_same_dim(std::size_t a, std::size_t b, const char* where) {
    if (a != b)
        throw Error(std::string(where) + ": dimension mismatch (" +
                    std::to_string(a) + " vs " + std::to_string(b) + ")");
}

LayerLayout LayerLayout::from_sizes(
    const std::vector<std::pair<std::string, std::size_t>>& sizes) {
    LayerLayout layout;
    std::unordered_set<std::string> seen;
    std::size_t offset = 0;
    for (const auto& [name, length] : sizes) {
        if (length == 0) throw Error("LayerLayout: layer '" + name + "' has zero length");
        if (!seen.insert(name).second)
            throw Error("LayerLayout: duplicate layer name '" + name + "'");
        layout.layers_.push_back({name, offset, length});
        offset += length;
    }
    layout.total_dim_ = offset;
    return layout;
}

LayerLayout LayerLayout::flat(std::size_t dim, const std::string& name) {
    return from_sizes({{name, dim}});
}

const LayerLayout::Layer& LayerLayout::layer(std::size_t idx) const {
    if (idx >= layers_.size())
        throw Error("LayerLayout: layer index " + std::to_string(idx) +
                    " out of range (have " + std::to_string(layers_.size()) + ")");
    return layers_[idx];
}

std::optional<std::size_t> LayerLayout::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].name == name) return i;
    return std::nullopt;
}

void ParamVector::add_scaled(double a, const ParamVector& x) {
    check_same_dim(dim(), x.dim(), "add_scaled");
    kernels::active().axpy(a, x.data(), data(), dim());
}

void ParamVector::scale_add(double b, double a, const ParamVector& x) {
    check_same_dim(dim(), x.dim(), "scale_add");
    kernels::active().axpby(a, x.data(), b, data(), dim());
}

void ParamVector::scale(double a) { kernels::active().scal(a, data(), dim()); }

void ParamVector::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void Mask::rebuild_index() {
    selected_.clear();
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) selected_.push_back(i);
}

Mask Mask::zeros(std::size_t dim) {
    Mask m;
    m.bits_.assign(dim, 0);
    return m;
}

Mask Mask::ones(std::size_t dim) {
    Mask m;
    m.bits_.assign(dim, 1);
    m.rebuild_index();
    return m;
}

Mask Mask::from_bits(std::vector<std::uint8_t> bits) {
    Mask m;
    m.bits_ = std::move(bits);
    for (auto& b : m.bits_) b = b ? 1 : 0;
    m.rebuild_index();
    return m;
}

Mask Mask::from_layer_cutoff(const LayerLayout& layout, std::size_t first_svr_layer) {
    if (first_svr_layer > layout.layer_count())
        throw Error("mask_from_layer_cutoff: layer index " +
                    std::to_string(first_svr_layer) + " out of range (layout has " +
                    std::to_string(layout.layer_count()) + " layers)");
    Mask m = Mask::zeros(layout.total_dim());
    for (std::size_t l = first_svr_layer; l < layout.layer_count(); ++l) {
        const auto& layer = layout.layer(l);
        std::fill(m.bits_.begin() + static_cast<std::ptrdiff_t>(layer.offset),
                  m.bits_.begin() + static_cast<std::ptrdiff_t>(layer.offset + layer.length),
                  std::uint8_t{1});
    }
    m.rebuild_index();
    return m;
}

Mask Mask::complement() const {
    Mask m;
    m.bits_.resize(bits_.size());
    for (std::size_t i = 0; i < bits_.size(); ++i) m.bits_[i] = bits_[i] ? 0 : 1;
    m.rebuild_index();
    return m;
}

ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
    check_same_dim(x.dim(), y.dim(), "axpy");
    ParamVector out = y;
    kernels::active().axpy(a, x.data(), out.data(), out.dim());
    return out;
}

double dot(const ParamVector& x, const ParamVector& y) {
    check_same_dim(x.dim(), y.dim(), "dot");
    return kernels::active().dot(x.data(), y.data(), x.dim());
}

double norm_sq(const ParamVector& x) {
    return kernels::active().norm_sq(x.data(), x.dim());
}

ParamVector masked(const ParamVector& v, const Mask& m) {
    check_same_dim(v.dim(), m.dim(), "masked");
    ParamVector out(v.dim());
    kernels::active().masked_copy(m.bits(), v.data(), out.data(), v.dim());
    return out;
}

ParamVector layer_slice(const ParamVector& v, const LayerLayout& layout,
                        std::size_t layer_idx) {
    check_same_dim(v.dim(), layout.total_dim(), "layer_slice");
    const auto& layer = layout.layer(layer_idx);
    std::vector<double> values(v.data() + layer.offset,
                               v.data() + layer.offset + layer.length);
    return ParamVector(std::move(values));
}

ParamVector subtract(const ParamVector& x, const ParamVector& y) {
    check_same_dim(x.dim(), y.dim(), "subtract");
    ParamVector out(x.dim());
    kernels::active().sub(x.data(), y.data(), out.data(), x.dim());
    return out;
}

ParamVector add(const ParamVector& x, const ParamVector& y) {
    check_same_dim(x.dim(), y.dim(), "add");
    ParamVector out(x.dim());
    kernels::active().add(x.data(), y.data(), out.data(), x.dim());
    return out;
}

double max_abs_diff(const ParamVector& x, const ParamVector& y) {
    check_same_dim(x.dim(), y.dim(), "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < x.dim(); ++i)
        worst = std::max(worst, std::abs(x[i] - y[i]));
    return worst;
}

}  // namespace fedpvr

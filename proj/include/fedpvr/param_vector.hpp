#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedpvr/common.hpp"

namespace fedpvr {

/// Named, contiguous blocks of a flat parameter vector. Offsets are dense:
/// layer k+1 starts where layer k ends and the blocks cover [0, total_dim).
class LayerLayout {
public:
    struct Layer {
        std::string name;
        std::size_t offset;
        std::size_t length;
    };

    LayerLayout() = default;

    /// Build from ordered (name, length) pairs. Names must be unique and
    /// lengths positive.
    static LayerLayout from_sizes(
        const std::vector<std::pair<std::string, std::size_t>>& sizes);

    /// Single anonymous block covering the whole vector.
    static LayerLayout flat(std::size_t dim, const std::string& name = "params");

    std::size_t total_dim() const { return total_dim_; }
    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t idx) const;
    const std::vector<Layer>& layers() const { return layers_; }
    std::optional<std::size_t> index_of(std::string_view name) const;

private:
    std::vector<Layer> layers_;
    std::size_t total_dim_ = 0;
};

/// Flat vector of 64-bit model parameters (or gradients, control variates...).
/// The one mutable type in this module; everything routes through the kernel
/// dispatch table so results are identical across SIMD backends.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim) : values_(dim, 0.0) {}
    explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

    static ParamVector zeros(std::size_t dim) { return ParamVector(dim); }

    std::size_t dim() const { return values_.size(); }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::span<const double> span() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

    bool all_finite() const { return fedpvr::all_finite(values_); }

    // In-place algebra (dimension-checked).
    void add_scaled(double a, const ParamVector& x);            // this += a*x
    void scale_add(double b, double a, const ParamVector& x);   // this = b*this + a*x
    void scale(double a);
    void fill(double v);

    bool operator==(const ParamVector& o) const { return values_ == o.values_; }

private:
    std::vector<double> values_;
};

/// Binary coordinate selector. Bit 1 marks the variance-reduced block, bit 0
/// the plain-SGD block. Stored densely with a cached index list of the ones so
/// iterating the selected block never scans all coordinates.
class Mask {
public:
    Mask() = default;

    static Mask zeros(std::size_t dim);
    static Mask ones(std::size_t dim);
    static Mask from_bits(std::vector<std::uint8_t> bits);

    /// Select every coordinate in layers [first_svr_layer, layer_count).
    /// first_svr_layer == layer_count selects nothing; 0 selects everything.
    static Mask from_layer_cutoff(const LayerLayout& layout,
                                  std::size_t first_svr_layer);

    std::size_t dim() const { return bits_.size(); }
    std::size_t ones_count() const { return selected_.size(); }  // v
    bool test(std::size_t i) const { return bits_[i] != 0; }
    const std::uint8_t* bits() const { return bits_.data(); }
    const std::vector<std::size_t>& selected_indices() const { return selected_; }

    Mask complement() const;

    bool operator==(const Mask& o) const { return bits_ == o.bits_; }

private:
    std::vector<std::uint8_t> bits_;
    std::vector<std::size_t> selected_;

    void rebuild_index();
};

// Functional algebra on parameter vectors.
ParamVector axpy(double a, const ParamVector& x, const ParamVector& y);  // a*x + y
double dot(const ParamVector& x, const ParamVector& y);
double norm_sq(const ParamVector& x);

/// Elementwise product with the mask: out_j = v_j when bit j is set, else 0.
ParamVector masked(const ParamVector& v, const Mask& m);

/// Copy of one layer's coordinates.
ParamVector layer_slice(const ParamVector& v, const LayerLayout& layout,
                        std::size_t layer_idx);

ParamVector subtract(const ParamVector& x, const ParamVector& y);  // x - y
ParamVector add(const ParamVector& x, const ParamVector& y);

/// Largest |x_j - y_j|.
double max_abs_diff(const ParamVector& x, const ParamVector& y);

void check_same_dim(std::size_t a, std::size_t b, const char* where);

}  // namespace fedpvr

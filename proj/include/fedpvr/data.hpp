#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedpvr/common.hpp"

namespace fedpvr {

/// In-memory classification dataset: n rows of m features plus class ids in
/// [0, num_classes).
struct Dataset {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t num_classes = 0;
    std::vector<double> features;  // n*m, row-major
    std::vector<int> labels;
    std::string provenance;

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * m, m};
    }
};

struct SyntheticSpec {
    std::size_t num_classes = 2;
    std::size_t clusters_per_class = 1;
    std::size_t dims = 2;
    std::size_t count = 100;
    double noise = 0.1;
    double center_scale = 2.0;
    std::uint64_t seed = 0;
};

/// Gaussian-mixture classification data. Per-class counts are exactly as even
/// as count allows (count/C each, remainder to the lowest class ids); rows are
/// shuffled afterwards. Deterministic per seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Copy of the selected rows, in the given order.
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

struct PartitionPlan {
    double alpha = 1.0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::size_t>> client_shards;
};

/// Label-skewed partition: for every class a client-proportion vector is drawn
/// from Dirichlet(alpha * 1_N) and that class's rows are allocated by
/// largest-remainder rounding. Redrawn (fresh substream, up to 100 attempts)
/// until every client is nonempty.
PartitionPlan dirichlet_partition(const Dataset& ds, std::size_t n_clients,
                                  double alpha, std::uint64_t seed);

struct SplitSpec {
    double validation_fraction = 0.01;
    std::size_t calibration_count = 0;
    std::size_t test_count = 0;
};

struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> calibration;
    std::vector<std::size_t> test;
};

/// Deterministic shuffled split. The shuffled index list is consumed as
/// [test | calibration | validation | train]; validation takes
/// floor(validation_fraction * n) rows and the remainder goes to train.
DataSplit split(const Dataset& ds, const SplitSpec& spec, std::uint64_t seed);

struct CsvSchema {
    std::vector<std::string> feature_columns;  // empty: every non-label column
    std::string label_column = "label";
};

/// Header row, comma separated, UTF-8, decimal floats. Labels may be arbitrary
/// strings; distinct values are assigned class ids in first-seen order unless
/// they already parse as integers in [0, C).
Dataset load_csv(const std::string& path, const CsvSchema& schema);

void save_csv(const Dataset& ds, const std::string& path);

}  // namespace fedpvr

#include "fedpvr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "fedpvr/rng.hpp"

namespace fedpvr {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Convert a proportion vector into integer counts summing to total.
/// Floors first, then hands the remainder to the largest fractional parts
/// (ties to the lower index).
std::vector<std::size_t> largest_remainder_counts(std::span<const double> props,
                                                  std::size_t total) {
    const std::size_t n = props.size();
    std::vector<std::size_t> counts(n);
    std::vector<std::pair<double, std::size_t>> remainders(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double target = props[i] * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(target));
        if (counts[i] > total) counts[i] = total;
        remainders[i] = {target - static_cast<double>(counts[i]), i};
        assigned += counts[i];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::size_t leftover = total - std::min(total, assigned);
    for (std::size_t k = 0; leftover > 0; k = (k + 1) % n, --leftover)
        counts[remainders[k].second] += 1;
    return counts;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_classes < 2) throw Error("generate_synthetic: need at least 2 classes");
    if (spec.count < spec.num_classes)
        throw Error("generate_synthetic: count must be >= num_classes");
    if (spec.dims == 0) throw Error("generate_synthetic: dims must be positive");
    if (spec.clusters_per_class == 0)
        throw Error("generate_synthetic: clusters_per_class must be positive");
    if (spec.noise < 0.0) throw Error("generate_synthetic: noise must be >= 0");

    const std::size_t C = spec.num_classes;
    const std::size_t m = spec.dims;

    RngStream center_rng = RngStream::keyed(spec.seed, 0xC17);
    std::vector<std::vector<double>> centers(C * spec.clusters_per_class,
                                             std::vector<double>(m));
    for (auto& center : centers)
        for (auto& x : center) x = spec.center_scale * center_rng.next_gaussian();

    Dataset ds;
    ds.m = m;
    ds.num_classes = C;
    ds.n = spec.count;
    ds.features.resize(ds.n * m);
    ds.labels.resize(ds.n);

    RngStream point_rng = RngStream::keyed(spec.seed, 0x91A);
    std::size_t row = 0;
    for (std::size_t c = 0; c < C; ++c) {
        const std::size_t count = spec.count / C + (c < spec.count % C ? 1 : 0);
        for (std::size_t i = 0; i < count; ++i, ++row) {
            const std::size_t cluster =
                static_cast<std::size_t>(point_rng.next_below(spec.clusters_per_class));
            const auto& center = centers[c * spec.clusters_per_class + cluster];
            for (std::size_t j = 0; j < m; ++j)
                ds.features[row * m + j] =
                    center[j] + spec.noise * point_rng.next_gaussian();
            ds.labels[row] = static_cast<int>(c);
        }
    }

    // Shuffle rows so class blocks are not contiguous.
    std::vector<std::size_t> perm(ds.n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream shuffle_rng = RngStream::keyed(spec.seed, 0x5F);
    shuffle_rng.shuffle(perm);
    Dataset shuffled = subset(ds, perm);

    std::ostringstream prov;
    prov << "synthetic(classes=" << C << ",clusters=" << spec.clusters_per_class
         << ",dims=" << m << ",count=" << spec.count << ",noise=" << spec.noise
         << ",center_scale=" << spec.center_scale << ",seed=" << spec.seed << ")";
    shuffled.provenance = prov.str();
    return shuffled;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
    Dataset out;
    out.m = ds.m;
    out.num_classes = ds.num_classes;
    out.n = indices.size();
    out.provenance = ds.provenance;
    out.features.resize(out.n * out.m);
    out.labels.resize(out.n);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= ds.n) throw Error("subset: index out of range");
        std::copy_n(ds.features.data() + src * ds.m, ds.m,
                    out.features.data() + i * ds.m);
        out.labels[i] = ds.labels[src];
    }
    return out;
}

PartitionPlan dirichlet_partition(const Dataset& ds, std::size_t n_clients,
                                  double alpha, std::uint64_t seed) {
    if (!(alpha > 0.0)) throw Error("dirichlet_partition: alpha must be > 0");
    if (n_clients == 0) throw Error("dirichlet_partition: need at least one client");
    if (ds.n == 0) throw Error("dirichlet_partition: empty dataset");

    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.n; ++i) {
        const int label = ds.labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= ds.num_classes)
            throw Error("dirichlet_partition: label out of range at row " +
                        std::to_string(i));
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }

    constexpr std::size_t kMaxAttempts = 100;
    std::vector<double> props(n_clients);
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
        RngStream rng = RngStream::keyed(seed, 0xD181, attempt);
        std::vector<std::vector<std::size_t>> shards(n_clients);
        for (const auto& rows : by_class) {
            if (rows.empty()) continue;
            rng.dirichlet(alpha, props);
            const auto counts = largest_remainder_counts(props, rows.size());
            std::size_t cursor = 0;
            for (std::size_t cl = 0; cl < n_clients; ++cl)
                for (std::size_t k = 0; k < counts[cl]; ++k)
                    shards[cl].push_back(rows[cursor++]);
        }
        const bool all_nonempty = std::all_of(shards.begin(), shards.end(),
                                              [](const auto& s) { return !s.empty(); });
        if (all_nonempty) {
            PartitionPlan plan;
            plan.alpha = alpha;
            plan.seed = seed;
            plan.client_shards = std::move(shards);
            return plan;
        }
    }
    throw Error("dirichlet_partition: could not produce nonempty shards in " +
                std::to_string(kMaxAttempts) +
                " attempts; increase alpha or use fewer clients");
}

DataSplit split(const Dataset& ds, const SplitSpec& spec, std::uint64_t seed) {
    if (spec.validation_fraction < 0.0 || spec.validation_fraction >= 1.0)
        throw Error("split: validation_fraction must be in [0, 1)");
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(spec.validation_fraction *
                                            static_cast<double>(ds.n)));
    const std::size_t reserved = spec.test_count + spec.calibration_count + n_val;
    if (reserved > ds.n)
        throw Error("split: test + calibration + validation (" +
                    std::to_string(reserved) + ") exceeds dataset size " +
                    std::to_string(ds.n));

    std::vector<std::size_t> perm(ds.n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng = RngStream::keyed(seed, 0x5917);
    rng.shuffle(perm);

    DataSplit out;
    auto it = perm.begin();
    out.test.assign(it, it + static_cast<std::ptrdiff_t>(spec.test_count));
    it += static_cast<std::ptrdiff_t>(spec.test_count);
    out.calibration.assign(it, it + static_cast<std::ptrdiff_t>(spec.calibration_count));
    it += static_cast<std::ptrdiff_t>(spec.calibration_count);
    out.validation.assign(it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    out.train.assign(it, perm.end());
    return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw Error("load_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto split_fields = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= s.size(); ++i) {
            if (i == s.size() || s[i] == ',') {
                fields.push_back(s.substr(start, i - start));
                start = i + 1;
            }
        }
        return fields;
    };

    const auto header = split_fields(line);
    std::ptrdiff_t label_col = -1;
    std::vector<std::size_t> feature_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == schema.label_column) {
            label_col = static_cast<std::ptrdiff_t>(i);
        } else if (schema.feature_columns.empty()) {
            feature_cols.push_back(i);
        }
    }
    if (!schema.feature_columns.empty()) {
        for (const auto& name : schema.feature_columns) {
            const auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end())
                throw Error("load_csv: feature column '" + name + "' not in header");
            feature_cols.push_back(static_cast<std::size_t>(it - header.begin()));
        }
    }
    if (label_col < 0)
        throw Error("load_csv: label column '" + schema.label_column +
                    "' not in header");
    if (feature_cols.empty()) throw Error("load_csv: no feature columns");

    std::vector<double> features;
    std::vector<std::string> raw_labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw Error("load_csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
        for (std::size_t col : feature_cols) {
            const std::string& f = fields[col];
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
                throw Error("load_csv: line " + std::to_string(line_no) +
                            ": cannot parse '" + f + "' as a number");
            features.push_back(v);
        }
        raw_labels.push_back(fields[static_cast<std::size_t>(label_col)]);
    }

    // Integer labels are kept as-is; anything else gets ids in sorted order.
    Dataset ds;
    ds.m = feature_cols.size();
    ds.n = raw_labels.size();
    ds.features = std::move(features);
    ds.provenance = "csv:" + path;
    ds.labels.resize(ds.n);

    bool all_ints = true;
    for (const auto& s : raw_labels) {
        int v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || v < 0) {
            all_ints = false;
            break;
        }
    }
    if (all_ints) {
        int max_label = 0;
        for (std::size_t i = 0; i < ds.n; ++i) {
            std::from_chars(raw_labels[i].data(),
                            raw_labels[i].data() + raw_labels[i].size(), ds.labels[i]);
            max_label = std::max(max_label, ds.labels[i]);
        }
        ds.num_classes = static_cast<std::size_t>(max_label) + 1;
    } else {
        std::map<std::string, int> ids;
        for (const auto& s : raw_labels) ids.emplace(s, 0);
        int next = 0;
        for (auto& [_, id] : ids) id = next++;
        for (std::size_t i = 0; i < ds.n; ++i) ds.labels[i] = ids[raw_labels[i]];
        ds.num_classes = ids.size();
    }
    if (ds.n == 0) throw Error("load_csv: no data rows in " + path);
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_csv: cannot open " + path + " for writing");
    for (std::size_t j = 0; j < ds.m; ++j) out << "f" << j << ",";
    out << "label\n";
    for (std::size_t i = 0; i < ds.n; ++i) {
        for (std::size_t j = 0; j < ds.m; ++j)
            out << format_double(ds.features[i * ds.m + j]) << ",";
        out << ds.labels[i] << "\n";
    }
    if (!out) throw Error("save_csv: write failed for " + path);
}

}  // namespace fedpvr

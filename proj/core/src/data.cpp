#include "unifiedfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "unifiedfl/errors.hpp"

namespace ufl {

Dataset synth_gaussian_mixture(int num_classes, int dim, double class_separation,
                               int samples_per_class, const std::vector<int>& label_map,
                               std::uint64_t seed) {
    if (num_classes < 2) throw ContractError("synth_gaussian_mixture: num_classes must be >= 2");
    if (class_separation < 0.0)
        throw ContractError("synth_gaussian_mixture: separation must be >= 0");
    if (!label_map.empty() && label_map.size() != static_cast<std::size_t>(num_classes))
        throw ContractError("synth_gaussian_mixture: label_map size mismatch");

    Dataset d;
    d.n = static_cast<std::size_t>(num_classes) * samples_per_class;
    d.input_shape = InputShape{1, 1, dim};
    d.num_classes = num_classes;
    d.provenance = "synthetic_gaussian_mixture";
    d.features.resize(d.n * static_cast<std::size_t>(dim));
    d.labels.resize(d.n);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t s = 0;
    for (int c = 0; c < num_classes; ++c) {
        const int label = label_map.empty() ? c : label_map[static_cast<std::size_t>(c)];
        if (label < 0 || label >= num_classes)
            throw ContractError("synth_gaussian_mixture: label_map entry out of range");
        for (int i = 0; i < samples_per_class; ++i, ++s) {
            double* x = d.features.data() + s * static_cast<std::size_t>(dim);
            for (int j = 0; j < dim; ++j) x[j] = noise(rng);
            x[0] += class_separation * c;  // centers collinear along axis 0
            d.labels[s] = label;
        }
    }

    // Per-coordinate min-max normalization to [0, 1].
    for (int j = 0; j < dim; ++j) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < d.n; ++i) {
            const double v = d.features[i * dim + j];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = hi - lo;
        for (std::size_t i = 0; i < d.n; ++i) {
            double& v = d.features[i * dim + j];
            v = range > 0.0 ? (v - lo) / range : 0.5;
        }
    }
    return d;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<double>& features, std::size_t n, std::size_t dim,
                    std::size_t k, int max_iters, std::uint64_t seed) {
    if (k < 1 || k > n) throw ContractError("kmeans: k out of range");
    if (max_iters < 1) throw ContractError("kmeans: max_iters must be >= 1");
    std::mt19937_64 rng(seed);

    // k-means++ seeding.
    std::vector<std::vector<double>> centers;
    centers.reserve(k);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    const std::size_t c0 = first(rng);
    centers.emplace_back(features.begin() + static_cast<std::ptrdiff_t>(c0 * dim),
                         features.begin() + static_cast<std::ptrdiff_t>((c0 + 1) * dim));
    std::vector<double> d2(n);
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers)
                best = std::min(best, sq_dist(features.data() + i * dim, c.data(), dim));
            d2[i] = best;
            total += best;
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            for (std::size_t i = 0; i < n; ++i) {
                r -= d2[i];
                if (r <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        centers.emplace_back(features.begin() + static_cast<std::ptrdiff_t>(chosen * dim),
                             features.begin() + static_cast<std::ptrdiff_t>((chosen + 1) * dim));
    }

    KMeansResult res;
    res.assignments.assign(n, 0);
    std::vector<std::size_t> counts(k);
    for (int iter = 0; iter < max_iters; ++iter) {
        res.iterations = iter + 1;
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = sq_dist(features.data() + i * dim, centers[c].data(), dim);
                if (dd < best) {
                    best = dd;
                    arg = static_cast<std::uint32_t>(c);
                }
            }
            if (arg != res.assignments[i]) {
                res.assignments[i] = arg;
                changed = true;
            }
        }

        // Empty-cluster repair: steal the farthest point from the largest cluster.
        std::fill(counts.begin(), counts.end(), 0);
        for (std::uint32_t a : res.assignments) ++counts[a];
        for (std::size_t c = 0; c < k; ++c) {
            while (counts[c] == 0) {
                const std::size_t big = static_cast<std::size_t>(
                    std::max_element(counts.begin(), counts.end()) - counts.begin());
                std::size_t far_idx = 0;
                double far = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (res.assignments[i] != big) continue;
                    const double dd =
                        sq_dist(features.data() + i * dim, centers[big].data(), dim);
                    if (dd > far) {
                        far = dd;
                        far_idx = i;
                    }
                }
                res.assignments[far_idx] = static_cast<std::uint32_t>(c);
                --counts[big];
                ++counts[c];
                changed = true;
            }
        }

        for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double* c = centers[res.assignments[i]].data();
            const double* x = features.data() + i * dim;
            for (std::size_t j = 0; j < dim; ++j) c[j] += x[j];
        }
        for (std::size_t c = 0; c < k; ++c)
            for (double& v : centers[c]) v /= static_cast<double>(counts[c]);

        if (!changed) break;
    }

    res.sse = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        res.sse += sq_dist(features.data() + i * dim, centers[res.assignments[i]].data(), dim);
    res.centers = std::move(centers);
    return res;
}

SplitPlan partition_noniid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed) {
    if (num_clients > dataset.n) throw ContractError("partition_noniid: more clients than samples");
    SplitPlan plan;
    plan.strategy = "noniid_kmeans";
    plan.client_indices.resize(num_clients);
    if (num_clients == 1) {
        plan.client_indices[0].resize(dataset.n);
        std::iota(plan.client_indices[0].begin(), plan.client_indices[0].end(), 0u);
        return plan;
    }
    const KMeansResult km =
        kmeans(dataset.features, dataset.n, dataset.dim(), num_clients, 100, seed);
    for (std::size_t i = 0; i < dataset.n; ++i)
        plan.client_indices[km.assignments[i]].push_back(static_cast<std::uint32_t>(i));
    return plan;
}

SplitPlan partition_iid(const Dataset& dataset, std::size_t num_clients, std::uint64_t seed,
                        const std::vector<std::size_t>& shard_sizes) {
    if (num_clients > dataset.n) throw ContractError("partition_iid: more clients than samples");
    if (!shard_sizes.empty()) {
        std::size_t total = 0;
        for (std::size_t s : shard_sizes) total += s;
        if (shard_sizes.size() != num_clients || total != dataset.n)
            throw ContractError("partition_iid: shard sizes do not cover the dataset");
    }
    std::vector<std::uint32_t> order(dataset.n);
    std::iota(order.begin(), order.end(), 0u);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SplitPlan plan;
    plan.strategy = "iid_random";
    plan.client_indices.resize(num_clients);
    std::size_t pos = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
        std::size_t take = shard_sizes.empty()
                               ? dataset.n / num_clients + (c < dataset.n % num_clients ? 1 : 0)
                               : shard_sizes[c];
        plan.client_indices[c].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                      order.begin() + static_cast<std::ptrdiff_t>(pos + take));
        pos += take;
    }
    return plan;
}

// ---- idx / csv loaders ---------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, std::size_t& offset) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("truncated idx header", offset);
    offset += 4;
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw ParseError("cannot open idx file: " + images_path);
    std::size_t offset = 0;
    const std::uint32_t magic = read_be32(in, offset);
    if ((magic & 0xFFFFFF00u) != 0x00000800u)
        throw ParseError("bad idx magic in " + images_path, 0);
    const int ndims = static_cast<int>(magic & 0xFF);
    if (ndims < 1 || ndims > 4) throw ParseError("unsupported idx rank", 3);

    std::vector<std::uint32_t> dims(static_cast<std::size_t>(ndims));
    for (auto& dim : dims) dim = read_be32(in, offset);

    Dataset d;
    d.n = dims[0];
    if (ndims == 1)
        d.input_shape = InputShape{1, 1, 1};
    else if (ndims == 2)
        d.input_shape = InputShape{1, 1, static_cast<int>(dims[1])};
    else if (ndims == 3)
        d.input_shape = InputShape{1, static_cast<int>(dims[1]), static_cast<int>(dims[2])};
    else
        d.input_shape = InputShape{static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                                   static_cast<int>(dims[3])};

    const std::size_t count = d.n * d.dim();
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw ParseError("truncated idx payload in " + images_path,
                         offset + static_cast<std::size_t>(in.gcount()));
    d.features.resize(count);
    for (std::size_t i = 0; i < count; ++i) d.features[i] = raw[i] / 255.0;

    d.labels.assign(d.n, 0);
    d.num_classes = 1;
    if (!labels_path.empty()) {
        std::ifstream lin(labels_path, std::ios::binary);
        if (!lin) throw ParseError("cannot open idx label file: " + labels_path);
        std::size_t loff = 0;
        const std::uint32_t lmagic = read_be32(lin, loff);
        if (lmagic != 0x00000801u) throw ParseError("bad idx label magic", 0);
        const std::uint32_t ln = read_be32(lin, loff);
        if (ln != d.n) throw ParseError("label count mismatch", loff);
        std::vector<unsigned char> lraw(ln);
        lin.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(ln));
        if (static_cast<std::size_t>(lin.gcount()) != ln)
            throw ParseError("truncated idx label payload",
                             loff + static_cast<std::size_t>(lin.gcount()));
        int max_label = 0;
        for (std::size_t i = 0; i < ln; ++i) {
            d.labels[i] = lraw[i];
            max_label = std::max(max_label, static_cast<int>(lraw[i]));
        }
        d.num_classes = max_label + 1;
    }
    d.provenance = "idx:" + images_path;
    return d;
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open csv file: " + path);
    Dataset d;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    int max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> row;
        bool numeric = true;
        while (std::getline(ss, field, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(field, &used));
                if (used != field.size() &&
                    field.find_first_not_of(" \t\r", used) != std::string::npos)
                    numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
            if (!numeric) break;
        }
        if (!numeric) {
            if (line_no == 1) continue;  // header row
            throw ParseError("non-numeric field at line " + std::to_string(line_no) + " in " +
                             path);
        }
        if (row.size() < 2)
            throw ParseError("row too short at line " + std::to_string(line_no) + " in " + path);
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw ParseError("ragged row at line " + std::to_string(line_no) + " in " + path);
        const int label = static_cast<int>(std::llround(row[0]));
        max_label = std::max(max_label, label);
        d.labels.push_back(label);
        d.features.insert(d.features.end(), row.begin() + 1, row.end());
    }
    if (d.labels.empty()) throw ParseError("no data rows in " + path);
    d.n = d.labels.size();
    d.input_shape = InputShape{1, 1, static_cast<int>(width - 1)};
    d.num_classes = max_label + 1;
    d.provenance = "csv:" + path;
    return d;
}

void write_idx(const Dataset& d, const std::string& images_path,
               const std::string& labels_path) {
    std::ofstream out(images_path, std::ios::binary);
    if (!out) throw ParseError("cannot write idx file: " + images_path);
    const bool spatial = d.input_shape.height > 1;
    write_be32(out, spatial ? 0x00000803u : 0x00000802u);
    write_be32(out, static_cast<std::uint32_t>(d.n));
    if (spatial) {
        write_be32(out, static_cast<std::uint32_t>(d.input_shape.height));
        write_be32(out, static_cast<std::uint32_t>(d.input_shape.width));
    } else {
        write_be32(out, static_cast<std::uint32_t>(d.input_shape.flat()));
    }
    for (double v : d.features) {
        const unsigned char b =
            static_cast<unsigned char>(std::llround(std::clamp(v, 0.0, 1.0) * 255.0));
        out.write(reinterpret_cast<const char*>(&b), 1);
    }
    std::ofstream lout(labels_path, std::ios::binary);
    if (!lout) throw ParseError("cannot write idx label file: " + labels_path);
    write_be32(lout, 0x00000801u);
    write_be32(lout, static_cast<std::uint32_t>(d.n));
    for (int l : d.labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        lout.write(reinterpret_cast<const char*>(&b), 1);
    }
}

}  // namespace ufl

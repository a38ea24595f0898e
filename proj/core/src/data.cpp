#include "glora/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>

namespace glora {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) throw DataError("truncated IDX header in " + path);
    return (std::uint32_t{buf[0]} << 24) | (std::uint32_t{buf[1]} << 16) | (std::uint32_t{buf[2]} << 8) | buf[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::string derive_labels_path(const std::string& images_path) {
    std::string p = images_path;
    bool changed = false;
    for (const auto& [from, to] : {std::pair<std::string, std::string>{"images", "labels"}, {"idx3", "idx1"}}) {
        for (std::size_t pos = p.find(from); pos != std::string::npos; pos = p.find(from, pos + to.size())) {
            p.replace(pos, from.size(), to);
            changed = true;
        }
    }
    if (!changed) throw DataError("cannot derive labels path from '" + images_path + "'; pass ?labels= explicitly");
    return p;
}

std::map<std::string, std::string> parse_query(const std::string& query, const std::string& uri) {
    std::map<std::string, std::string> out;
    std::size_t pos = 0;
    while (pos < query.size()) {
        const std::size_t amp = query.find('&', pos);
        const std::string kv = query.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw DataError("malformed query '" + kv + "' in dataset URI " + uri);
        out[kv.substr(0, eq)] = kv.substr(eq + 1);
        if (amp == std::string::npos) break;
        pos = amp + 1;
    }
    return out;
}

long parse_long(const std::string& v, const std::string& key, const std::string& uri) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw DataError("bad integer '" + v + "' for " + key + " in dataset URI " + uri);
    }
}

double parse_double(const std::string& v, const std::string& key, const std::string& uri) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw DataError("bad number '" + v + "' for " + key + " in dataset URI " + uri);
    }
}

}  // namespace

void Dataset::validate() const {
    if (!images.defined() || images.ndim() != 4) throw DataError("dataset images must be [N,c,H,W]");
    if (static_cast<std::size_t>(images.dim(0)) != labels.size()) {
        throw DataError("dataset has " + std::to_string(images.dim(0)) + " images but " + std::to_string(labels.size()) +
                        " labels");
    }
    for (int l : labels) {
        if (l < 0 || (num_classes > 0 && l >= num_classes)) {
            throw DataError("dataset label " + std::to_string(l) + " outside [0," + std::to_string(num_classes) + ")");
        }
    }
}

SynthSpec SynthSpec::defaults(Mode mode) {
    SynthSpec s;
    s.mode = mode;
    if (mode == Mode::target) {
        s.orientation_offset = std::numbers::pi / 16.0;
        s.freq_lo = 4.0;
        s.freq_hi = 6.0;
    }
    return s;
}

void SynthSpec::validate() const {
    if (num_classes < 1 || samples_per_class < 1 || image_size < 1) {
        throw DataError("synth spec: counts and size must be positive");
    }
    if (sigma < 0) throw DataError("synth spec: sigma must be >= 0");
    if (freq_hi < freq_lo) throw DataError("synth spec: frequency band is inverted");
}

Dataset synth_generate(const SynthSpec& spec) {
    spec.validate();
    const int K = spec.num_classes;
    const int S = spec.image_size;
    const int N = K * spec.samples_per_class;
    Dataset ds;
    ds.images = Tensor(Shape{N, 1, S, S});
    ds.labels.resize(static_cast<std::size_t>(N));
    ds.name = spec.mode == SynthSpec::Mode::source ? "synth-source" : "synth-target";
    ds.num_classes = K;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::size_t idx = 0;
    for (int k = 0; k < K; ++k) {
        const double theta = k * std::numbers::pi / K + spec.orientation_offset;
        // The class frequency is fixed (evenly spaced across the band) so that
        // sigma=0 makes every image of a class identical.
        const double f = K > 1 ? spec.freq_lo + (spec.freq_hi - spec.freq_lo) * k / (K - 1) : spec.freq_lo;
        const double cx = std::cos(theta), sx = std::sin(theta);
        for (int s = 0; s < spec.samples_per_class; ++s, ++idx) {
            ds.labels[idx] = k;
            double* img = ds.images.ptr() + idx * static_cast<std::size_t>(S) * S;
            for (int u = 0; u < S; ++u) {
                for (int v = 0; v < S; ++v) {
                    const double phase = 2.0 * std::numbers::pi * f * (u * cx + v * sx) / S;
                    double pix = 0.5 + 0.25 * std::sin(phase);
                    if (spec.sigma > 0) pix += spec.sigma * noise(rng);
                    img[static_cast<std::size_t>(u) * S + v] = pix;
                }
            }
        }
    }
    return ds;
}

Dataset idx_load(const std::string& images_path, const std::string& labels_path_in) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw DataError("cannot open IDX image file " + images_path);
    const std::uint32_t magic = read_be32(in, images_path);
    if (magic != kImagesMagic) {
        throw DataError("bad IDX image magic in " + images_path + " (got " + std::to_string(magic) + ")");
    }
    const std::uint32_t n = read_be32(in, images_path);
    const std::uint32_t rows = read_be32(in, images_path);
    const std::uint32_t cols = read_be32(in, images_path);
    const std::size_t count = static_cast<std::size_t>(n) * rows * cols;
    std::vector<unsigned char> pixels(count);
    if (!in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(count))) {
        throw DataError("truncated IDX image payload in " + images_path);
    }

    const std::string labels_path = labels_path_in.empty() ? derive_labels_path(images_path) : labels_path_in;
    std::ifstream lin(labels_path, std::ios::binary);
    if (!lin) throw DataError("cannot open IDX label file " + labels_path);
    const std::uint32_t lmagic = read_be32(lin, labels_path);
    if (lmagic != kLabelsMagic) {
        throw DataError("bad IDX label magic in " + labels_path + " (got " + std::to_string(lmagic) + ")");
    }
    const std::uint32_t ln = read_be32(lin, labels_path);
    if (ln != n) {
        throw DataError("IDX label count " + std::to_string(ln) + " != image count " + std::to_string(n));
    }
    std::vector<unsigned char> labels(n);
    if (!lin.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(n))) {
        throw DataError("truncated IDX label payload in " + labels_path);
    }

    Dataset ds;
    ds.images = Tensor(Shape{static_cast<int>(n), 1, static_cast<int>(rows), static_cast<int>(cols)});
    for (std::size_t i = 0; i < count; ++i) ds.images.at(i) = pixels[i] / 255.0;
    ds.labels.assign(labels.begin(), labels.end());
    ds.name = images_path;
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.num_classes = max_label + 1;
    return ds;
}

void idx_save(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    ds.validate();
    if (ds.images.dim(1) != 1) throw DataError("idx_save supports single-channel images");
    std::ofstream out(images_path, std::ios::binary);
    if (!out) throw DataError("cannot write IDX image file " + images_path);
    write_be32(out, kImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(ds.images.dim(0)));
    write_be32(out, static_cast<std::uint32_t>(ds.images.dim(2)));
    write_be32(out, static_cast<std::uint32_t>(ds.images.dim(3)));
    for (std::size_t i = 0; i < ds.images.numel(); ++i) {
        const double v = std::clamp(ds.images.at(i), 0.0, 1.0);
        out.put(static_cast<char>(std::lround(v * 255.0)));
    }
    std::ofstream lout(labels_path, std::ios::binary);
    if (!lout) throw DataError("cannot write IDX label file " + labels_path);
    write_be32(lout, kLabelsMagic);
    write_be32(lout, static_cast<std::uint32_t>(ds.labels.size()));
    for (int l : ds.labels) lout.put(static_cast<char>(l));
}

Dataset load_dataset(const std::string& uri) {
    const std::size_t colon = uri.find(':');
    if (colon == std::string::npos) throw DataError("dataset URI '" + uri + "' has no scheme");
    const std::string scheme = uri.substr(0, colon);
    std::string rest = uri.substr(colon + 1);
    std::string query;
    if (const std::size_t qm = rest.find('?'); qm != std::string::npos) {
        query = rest.substr(qm + 1);
        rest = rest.substr(0, qm);
    }
    auto params = parse_query(query, uri);

    if (scheme == "idx") {
        std::string labels;
        if (auto it = params.find("labels"); it != params.end()) {
            labels = it->second;
            params.erase(it);
        }
        if (!params.empty()) throw DataError("unknown parameter '" + params.begin()->first + "' in dataset URI " + uri);
        Dataset ds = idx_load(rest, labels);
        ds.split = "all";
        return ds;
    }
    if (scheme != "synth") throw DataError("unknown dataset scheme '" + scheme + "' in " + uri);

    SynthSpec spec;
    if (rest == "source") {
        spec = SynthSpec::defaults(SynthSpec::Mode::source);
    } else if (rest == "target") {
        spec = SynthSpec::defaults(SynthSpec::Mode::target);
    } else {
        throw DataError("unknown synth mode '" + rest + "' in " + uri + " (want source|target)");
    }
    std::string split = "train";
    for (const auto& [key, value] : params) {
        if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_long(value, key, uri));
        else if (key == "k") spec.num_classes = static_cast<int>(parse_long(value, key, uri));
        else if (key == "n") spec.samples_per_class = static_cast<int>(parse_long(value, key, uri));
        else if (key == "size") spec.image_size = static_cast<int>(parse_long(value, key, uri));
        else if (key == "sigma") spec.sigma = parse_double(value, key, uri);
        else if (key == "split") split = value;
        else throw DataError("unknown parameter '" + key + "' in dataset URI " + uri);
    }
    std::uint64_t split_index = 0;
    if (split == "train") split_index = 0;
    else if (split == "val") split_index = 1;
    else if (split == "test") split_index = 2;
    else throw DataError("unknown split '" + split + "' in dataset URI " + uri + " (want train|val|test)");
    // Distinct splits draw from disjoint deterministic streams.
    spec.seed = spec.seed * 1000003u + split_index;
    Dataset ds = synth_generate(spec);
    ds.split = split;
    return ds;
}

}  // namespace glora

#include "glora/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace glora {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kFormat = "glora-checkpoint";
constexpr int kVersion = 1;

void append_f32_le(std::string& blob, const Tensor& t) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t.at(i)));
        blob.push_back(static_cast<char>(bits & 0xff));
        blob.push_back(static_cast<char>((bits >> 8) & 0xff));
        blob.push_back(static_cast<char>((bits >> 16) & 0xff));
        blob.push_back(static_cast<char>((bits >> 24) & 0xff));
    }
}

void read_f32_le(const std::string& blob, std::size_t offset, Tensor& t, const std::string& name) {
    const std::size_t bytes = t.numel() * 4;
    if (offset + bytes > blob.size()) {
        throw DataError("checkpoint blob too short for tensor " + name);
    }
    for (std::size_t i = 0; i < t.numel(); ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + offset + i * 4);
        const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
                                   (std::uint32_t{p[3]} << 24);
        t.at(i) = static_cast<double>(std::bit_cast<float>(bits));
    }
}

json manifest_load(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.json");
    if (!in) throw DataError("cannot open checkpoint manifest in " + dir);
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw DataError("checkpoint manifest in " + dir + " is not valid JSON: " + std::string(e.what()));
    }
    if (m.value("format", "") != kFormat || m.value("version", 0) != kVersion) {
        throw DataError("unrecognized checkpoint format in " + dir);
    }
    return m;
}

std::string adapter_tensor_prefix(const SiteId& site) {
    return "adapters." + std::to_string(site.layer) + "." + std::string(to_string(site.kind)) + ".";
}

std::vector<AdapterRecord> records_from_json(const json& list) {
    std::vector<AdapterRecord> out;
    for (const json& a : list) {
        AdapterRecord rec;
        rec.site.layer = a.at("site").at("layer").get<int>();
        rec.site.kind = site_kind_from(a.at("site").at("kind").get<std::string>());
        rec.kind = adapter_kind_from(a.at("kind").get<std::string>());
        rec.rank = a.at("rank").get<int>();
        rec.alpha = a.at("alpha").get<double>();
        rec.score = a.at("score").get<double>();
        rec.tau = a.at("tau").get<double>();
        rec.active = a.at("active").get<bool>();
        out.push_back(rec);
    }
    return out;
}

}  // namespace

void checkpoint_save(const std::string& dir, const TinyViT& model, const RunConfig& config) {
    fs::create_directories(dir);
    std::string blob;
    json tensors = json::array();
    auto emit = [&blob, &tensors](const std::string& name, const Tensor& t) {
        tensors.push_back({{"name", name}, {"shape", t.shape}, {"dtype", "float32"}, {"offset", blob.size()}});
        append_f32_le(blob, t);
    };
    model.visit_params([&emit](const std::string& name, const Tensor& t) { emit(name, t); });
    json adapters = json::array();
    for (const auto& blk : model.adapters) {
        const std::string prefix = adapter_tensor_prefix(blk.site);
        emit(prefix + "a", blk.a);
        emit(prefix + "b", blk.b);
        if (blk.magnitude.defined()) emit(prefix + "mag", blk.magnitude);
        adapters.push_back({{"site", {{"layer", blk.site.layer}, {"kind", to_string(blk.site.kind)}}},
                            {"kind", to_string(blk.kind)},
                            {"rank", blk.rank},
                            {"alpha", blk.alpha},
                            {"score", blk.gate.score.value()},
                            {"tau", blk.gate.tau},
                            {"active", blk.gate.active()}});
    }
    json manifest;
    manifest["format"] = kFormat;
    manifest["version"] = kVersion;
    manifest["dtype"] = "float32";
    manifest["config"] = json::parse(config.to_json());
    manifest["tensors"] = tensors;
    manifest["adapters"] = adapters;

    std::ofstream mout(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!mout) throw DataError("cannot write checkpoint manifest in " + dir);
    mout << manifest.dump(2) << "\n";
    std::ofstream bout(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!bout) throw DataError("cannot write checkpoint weights in " + dir);
    bout.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

LoadedModel checkpoint_load(const std::string& dir) {
    const json manifest = manifest_load(dir);
    if (!manifest.contains("config")) throw DataError("checkpoint in " + dir + " has no embedded config");
    RunConfig config = RunConfig::from_json(manifest["config"].dump());

    std::ifstream bin(fs::path(dir) / "weights.bin", std::ios::binary);
    if (!bin) throw DataError("cannot open checkpoint weights in " + dir);
    std::ostringstream ss;
    ss << bin.rdbuf();
    const std::string blob = ss.str();

    struct Entry {
        Shape shape;
        std::size_t offset;
    };
    std::map<std::string, Entry> table;
    for (const json& t : manifest.at("tensors")) {
        if (t.value("dtype", "") != "float32") {
            throw DataError("checkpoint tensor " + t.value("name", "?") + " has unsupported dtype");
        }
        table[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(), t.at("offset").get<std::size_t>()};
    }
    auto take = [&table, &blob](const std::string& name, Tensor& dst) {
        auto it = table.find(name);
        if (it == table.end()) throw DataError("checkpoint is missing tensor " + name);
        if (it->second.shape != dst.shape) {
            throw DataError("checkpoint tensor " + name + " has shape " + shape_str(it->second.shape) + ", expected " +
                            shape_str(dst.shape));
        }
        read_f32_le(blob, it->second.offset, dst, name);
        table.erase(it);
    };

    TinyViT model(config.model, /*seed=*/0);
    model.visit_params([&take](const std::string& name, Tensor& t) { take(name, t); });

    for (const AdapterRecord& rec : records_from_json(manifest.value("adapters", json::array()))) {
        const auto [m, n] = config.model.site_shape(rec.site.kind);
        AdapterBlock blk;
        blk.site = rec.site;
        blk.kind = rec.kind;
        blk.rank = rec.rank;
        blk.alpha = rec.alpha;
        blk.a = Tensor::zeros(Shape{m, rec.rank});
        blk.b = Tensor::zeros(Shape{rec.rank, n});
        blk.gate.score = Tensor::scalar(rec.score);
        blk.gate.tau = rec.tau;
        blk.ste = config.adapter.ste;
        blk.ste_clip = config.adapter.ste_clip;
        blk.dark_grads = config.adapter.dark_grads;
        const std::string prefix = adapter_tensor_prefix(rec.site);
        take(prefix + "a", blk.a);
        take(prefix + "b", blk.b);
        if (rec.kind == AdapterKind::DoRA) {
            blk.magnitude = Tensor::zeros(Shape{n});
            take(prefix + "mag", blk.magnitude);
        }
        model.adapters.push_back(std::move(blk));
    }
    if (!table.empty()) {
        throw DataError("checkpoint has unreferenced tensor " + table.begin()->first);
    }
    return {std::move(model), std::move(config)};
}

std::vector<AdapterRecord> checkpoint_adapter_records(const std::string& dir) {
    const json manifest = manifest_load(dir);
    return records_from_json(manifest.value("adapters", json::array()));
}

ModelConfig checkpoint_model_config(const std::string& dir) {
    const json manifest = manifest_load(dir);
    if (!manifest.contains("config")) throw DataError("checkpoint in " + dir + " has no embedded config");
    return RunConfig::from_json(manifest["config"].dump()).model;
}

}  // namespace glora

#include "glora/run_config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace glora {

namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (key == a) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
    }
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) {
        try {
            it->get_to(out);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

void get_str(const json& obj, const char* key, std::string& out) { get_to(obj, key, out); }

}  // namespace

const char* to_string(Selection s) { return s == Selection::best_val ? "best_val" : "last"; }

Selection selection_from(const std::string& name) {
    if (name == "best_val") return Selection::best_val;
    if (name == "last") return Selection::last;
    throw ConfigError("unknown selection '" + name + "' (want best_val|last)");
}

void RunConfig::validate() const {
    model.validate();
    adapter.validate();
    reg.validate();
    optim.validate();
    schedule.validate();
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (data.train.empty() || data.val.empty()) throw ConfigError("data.train and data.val URIs are required");
}

RunConfig RunConfig::from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(root, "config", {"model", "adapter", "reg", "optim", "schedule", "steps", "eval_every",
                                    "batch_size", "seed", "data", "selection"});
    RunConfig cfg;

    if (root.contains("model")) {
        const json& m = root["model"];
        reject_unknown(m, "model",
                       {"image_size", "patch_size", "channels", "dim", "heads", "layers", "mlp_ratio", "num_classes"});
        get_to(m, "image_size", cfg.model.image_size);
        get_to(m, "patch_size", cfg.model.patch_size);
        get_to(m, "channels", cfg.model.channels);
        get_to(m, "dim", cfg.model.dim);
        get_to(m, "heads", cfg.model.heads);
        get_to(m, "layers", cfg.model.layers);
        get_to(m, "mlp_ratio", cfg.model.mlp_ratio);
        get_to(m, "num_classes", cfg.model.num_classes);
    }
    bool alpha_given = false;
    if (root.contains("adapter")) {
        const json& a = root["adapter"];
        reject_unknown(a, "adapter",
                       {"kind", "rank", "alpha", "tau", "s_init", "score_lr_scale", "ste", "ste_clip", "dark_grads"});
        std::string kind;
        get_str(a, "kind", kind);
        if (!kind.empty()) cfg.adapter.kind = adapter_kind_from(kind);
        get_to(a, "rank", cfg.adapter.rank);
        alpha_given = a.contains("alpha");
        get_to(a, "alpha", cfg.adapter.alpha);
        get_to(a, "tau", cfg.adapter.tau);
        get_to(a, "s_init", cfg.adapter.s_init);
        get_to(a, "score_lr_scale", cfg.adapter.score_lr_scale);
        get_to(a, "ste", cfg.adapter.ste);
        get_to(a, "ste_clip", cfg.adapter.ste_clip);
        get_to(a, "dark_grads", cfg.adapter.dark_grads);
    }
    if (!alpha_given) cfg.adapter.alpha = cfg.adapter.rank;  // default effective scale alpha/rank = 1
    bool reg_tau_given = false;
    if (root.contains("reg")) {
        const json& r = root["reg"];
        reject_unknown(r, "reg", {"kind", "lambda", "tau"});
        std::string kind;
        get_str(r, "kind", kind);
        if (!kind.empty()) cfg.reg.kind = reg_kind_from(kind);
        get_to(r, "lambda", cfg.reg.lambda);
        reg_tau_given = r.contains("tau");
        get_to(r, "tau", cfg.reg.tau);
    }
    if (!reg_tau_given) cfg.reg.tau = cfg.adapter.tau;  // hinge threshold follows the gate threshold
    if (root.contains("optim")) {
        const json& o = root["optim"];
        reject_unknown(o, "optim", {"kind", "lr", "momentum", "betas", "weight_decay", "eps"});
        std::string kind;
        get_str(o, "kind", kind);
        if (!kind.empty()) cfg.optim.kind = optim_kind_from(kind);
        get_to(o, "lr", cfg.optim.lr);
        get_to(o, "momentum", cfg.optim.momentum);
        if (o.contains("betas")) {
            const json& b = o["betas"];
            if (!b.is_array() || b.size() != 2) throw ConfigError("optim.betas must be [beta1, beta2]");
            cfg.optim.beta1 = b[0].get<double>();
            cfg.optim.beta2 = b[1].get<double>();
        }
        get_to(o, "weight_decay", cfg.optim.weight_decay);
        get_to(o, "eps", cfg.optim.eps);
    }
    get_to(root, "steps", cfg.steps);
    get_to(root, "eval_every", cfg.eval_every);
    get_to(root, "batch_size", cfg.batch_size);
    get_to(root, "seed", cfg.seed);
    if (cfg.steps > 0) cfg.schedule.total_steps = cfg.steps;
    if (root.contains("schedule")) {
        const json& s = root["schedule"];
        reject_unknown(s, "schedule", {"warmup_steps", "total_steps", "floor"});
        get_to(s, "warmup_steps", cfg.schedule.warmup_steps);
        get_to(s, "total_steps", cfg.schedule.total_steps);
        get_to(s, "floor", cfg.schedule.floor);
    }
    cfg.schedule.base_lr = cfg.optim.lr;
    if (root.contains("data")) {
        const json& d = root["data"];
        reject_unknown(d, "data", {"train", "val"});
        get_str(d, "train", cfg.data.train);
        get_str(d, "val", cfg.data.val);
    }
    if (root.contains("selection")) {
        cfg.selection = selection_from(root["selection"].get<std::string>());
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string RunConfig::to_json(int indent) const {
    json root;
    root["model"] = {{"image_size", model.image_size}, {"patch_size", model.patch_size}, {"channels", model.channels},
                     {"dim", model.dim},               {"heads", model.heads},           {"layers", model.layers},
                     {"mlp_ratio", model.mlp_ratio},   {"num_classes", model.num_classes}};
    root["adapter"] = {{"kind", to_string(adapter.kind)},
                       {"rank", adapter.rank},
                       {"alpha", adapter.alpha},
                       {"tau", adapter.tau},
                       {"s_init", adapter.s_init},
                       {"score_lr_scale", adapter.score_lr_scale},
                       {"ste", adapter.ste},
                       {"ste_clip", adapter.ste_clip},
                       {"dark_grads", adapter.dark_grads}};
    root["reg"] = {{"kind", to_string(reg.kind)}, {"lambda", reg.lambda}, {"tau", reg.tau}};
    root["optim"] = {{"kind", to_string(optim.kind)},
                     {"lr", optim.lr},
                     {"momentum", optim.momentum},
                     {"betas", {optim.beta1, optim.beta2}},
                     {"weight_decay", optim.weight_decay},
                     {"eps", optim.eps}};
    root["schedule"] = {{"warmup_steps", schedule.warmup_steps}, {"total_steps", schedule.total_steps}, {"floor", schedule.floor}};
    root["steps"] = steps;
    root["eval_every"] = eval_every;
    root["batch_size"] = batch_size;
    root["seed"] = seed;
    root["data"] = {{"train", data.train}, {"val", data.val}};
    root["selection"] = to_string(selection);
    return root.dump(indent);
}

}  // namespace glora

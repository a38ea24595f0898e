#pragma once

#include <cstdint>
#include <string>

#include "glora/adapters.hpp"
#include "glora/model.hpp"
#include "glora/optim.hpp"

namespace glora {

struct DataSpec {
    std::string train;
    std::string val;
};

enum class Selection { best_val, last };

const char* to_string(Selection s);
Selection selection_from(const std::string& name);

// Everything needed to reproduce a run bit-identically on one machine.
// JSON schema mirrors the field names below; unknown keys are rejected.
struct RunConfig {
    ModelConfig model;
    AdapterSpec adapter;
    RegularizerSpec reg;
    OptimSpec optim;
    ScheduleSpec schedule;  // base_lr mirrors optim.lr; total_steps defaults to steps
    int steps = 2000;
    int eval_every = 100;
    int batch_size = 32;
    std::uint64_t seed = 1;
    DataSpec data;
    Selection selection = Selection::best_val;

    void validate() const;

    static RunConfig from_json(const std::string& text);
    static RunConfig from_json_file(const std::string& path);
    std::string to_json(int indent = 2) const;
};

}  // namespace glora

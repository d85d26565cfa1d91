#pragma once

#include <map>
#include <string>

#include "auwgcn/model.hpp"
#include "auwgcn/spotting.hpp"
#include "auwgcn/training.hpp"

namespace auwgcn {

struct PipelineConfig {
    TrainConfig train;
    ModelConfig model;
    SpotConfig spot;

    void validate() const;
};

// key = value lines, '#' comments. Unknown keys are errors. `gcn_hidden`
// takes a single dimension applied to every GCN layer.
PipelineConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
PipelineConfig load_config_file(const std::string& path);

// ordered snapshot of every externally settable key
std::map<std::string, std::string> config_to_kv(const PipelineConfig& cfg);

}  // namespace auwgcn

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "o2sr/config.hpp"
#include "o2sr/degradation.hpp"
#include "o2sr/model.hpp"
#include "o2sr/training.hpp"

namespace o2sr {

struct EvalSettings {
    int scale = 4;
    int border_crop = -1;  // negative: use scale
};

/// Everything a CLI run can be configured with. Text form is `key = value`
/// lines with dotted model.*, train.*, degrade.* and eval.* keys.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DegradationConfig degrade = degradation_preset("mini");
    int bit_depth = 8;  // PNG depth of generated datasets
    EvalSettings eval;

    /// Unknown keys and malformed values raise ConfigError naming the key.
    void set(const std::string& key, const std::string& value);
    void apply(const Entries& entries);

    /// mini / plus (degradation), tiny / paper (model and training).
    void apply_preset(const std::string& name);

    /// Seeds every random stream.
    void set_seed(std::uint64_t seed);

    /// Sets the model, degradation and evaluation scale together.
    void set_scale(int scale);

    void validate() const;

    Entries entries() const;
    std::string serialize() const;

    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);
};

Entries degradation_entries(const DegradationConfig& cfg, int bit_depth);

} // namespace o2sr

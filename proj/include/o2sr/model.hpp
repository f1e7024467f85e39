#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "o2sr/config.hpp"
#include "o2sr/fusion.hpp"
#include "o2sr/image.hpp"
#include "o2sr/params.hpp"
#include "o2sr/tape.hpp"

namespace o2sr {

enum class EncoderVariant { none, plain_cnn, attention, ours };

std::string to_string(EncoderVariant v);
EncoderVariant parse_encoder(const std::string& s);

struct ModelConfig {
    int scale = 4;
    int channels = 32;
    EncoderVariant encoder = EncoderVariant::ours;
    FusionConfig fusion;
    int fusion_blocks = 1;
    int blocks = 4;
    int heads = 4;
    int window = 8;
    int mlp_ratio = 2;
    bool skip = true;
    bool rel_bias = false;
    int upsample_kernel = 3;
    std::uint64_t seed = 0;

    void validate() const;

    /// `model.*` entries in canonical order.
    Entries entries() const;

    /// Applies one `model.*` entry. Returns false for keys it does not own.
    bool set(const std::string& key, const std::string& value);
};

/// Preset "tiny" (desk scale) or "paper"-sized defaults.
ModelConfig model_preset(const std::string& name);

using ShapeChart = std::vector<std::pair<std::string, std::vector<int>>>;

/// Every learnable tensor of cfg, in canonical order.
ShapeChart shape_chart(const ModelConfig& cfg);

std::size_t parameter_count(const ShapeChart& chart);

/// Declares and initializes parameters deterministically from cfg.seed.
ParameterSet build_model(const ModelConfig& cfg);

/// Raw (unclamped) network output for a 1-channel LR map.
Var model_forward(Tape& t, Var lr, const ModelConfig& cfg, const ParameterSet& params, ParameterSet* grads);

/// Inference on a single-channel image; output clamped to [0, 1].
Image forward(const Image& lr, const ParameterSet& params, const ModelConfig& cfg);

/// Windowed multi-head self-attention with qkv and output projections taken
/// from `<prefix>qkv.*`, `<prefix>proj.*` and optionally `<prefix>rel_bias`.
FeatureMap window_attention(const FeatureMap& m, const ParameterSet& params, const std::string& prefix, int heads,
                            int window);

using kernels::pixel_shuffle;
using kernels::pixel_unshuffle;

struct Checkpoint {
    ModelConfig model;
    Entries train;  // echoed training settings, may be empty
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    ParameterSet params;
    ParameterSet adam_m;  // empty when no optimizer state is stored
    ParameterSet adam_v;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes via a temporary file and rename, so readers never see a partial
/// checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws IncompatibilityError naming the first differing `model.*` field.
void check_compatible(const ModelConfig& expected, const ModelConfig& found);

} // namespace o2sr

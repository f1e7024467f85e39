#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "o2sr/config.hpp"
#include "o2sr/image.hpp"
#include "o2sr/model.hpp"

namespace o2sr {

struct TrainConfig {
    double alpha = 1.0;   // L1 weight
    double beta = 0.1;    // MSE weight
    double lr = 1e-3;
    int batch_size = 16;
    int hr_patch = 48;
    int epochs = 1;
    long max_steps = 0;   // > 0 overrides epochs
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int val_every = 0;    // 0 disables validation PSNR
    int val_images = 4;
    int checkpoint_every = 0;  // 0 writes only the initial and final checkpoints

    void validate(int scale) const;
    Entries entries() const;
    bool set(const std::string& key, const std::string& value);
};

/// "tiny" (desk-scale) or "paper".
TrainConfig train_preset(const std::string& name);

/// alpha * mean|sr - hr| + beta * mean (sr - hr)^2.
double loss(const Image& sr, const Image& hr, double alpha, double beta);
double loss(const FeatureMap& sr, const FeatureMap& hr, double alpha, double beta);

/// d loss / d sr.
FeatureMap loss_gradient(const FeatureMap& sr, const FeatureMap& hr, double alpha, double beta);

struct PatchPair {
    FeatureMap lr;   // luminance, hr_patch / d square
    FeatureMap hr;   // luminance, hr_patch square
    int image = 0;   // index into the dataset
    int lr_row = 0;
    int lr_col = 0;
    int hr_row = 0;
    int hr_col = 0;
};

/// Aligned random crops; fully determined by (seed, step).
std::vector<PatchPair> sample_patches(const PairedDataset& ds, int hr_patch, int batch, std::uint64_t seed,
                                      std::uint64_t step);

struct TrainState {
    std::uint64_t step = 0;
    ParameterSet m;
    ParameterSet v;
};

TrainState init_train_state(const ParameterSet& params);

/// Loss and parameter gradients averaged over the batch.
double batch_gradients(const ParameterSet& params, const std::vector<PatchPair>& batch, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, ParameterSet& grads);

/// One Adam update. Returns the batch loss measured before the update.
double train_step(ParameterSet& params, TrainState& state, const std::vector<PatchPair>& batch,
                  const ModelConfig& mcfg, const TrainConfig& tcfg);

struct LogRecord {
    std::uint64_t step = 0;
    double loss = 0.0;
    bool has_val = false;
    double val_psnr = 0.0;
};

std::string format_log_line(const LogRecord& r);

struct FitResult {
    Checkpoint checkpoint;
    std::vector<LogRecord> log;  // records written by this call
};

/// Total optimizer steps implied by the config.
std::uint64_t total_steps(const TrainConfig& cfg, std::size_t dataset_size);

/// Mean luminance PSNR of model outputs over the first `count` pairs,
/// border of `scale` pixels excluded.
double validation_psnr(const PairedDataset& ds, int count, const ParameterSet& params, const ModelConfig& mcfg);

/// Trains into out_dir: `checkpoint.o2ck`, `loss.log`, `manifest.txt`.
/// With `resume` and an existing checkpoint the run continues from it.
FitResult fit(const PairedDataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg,
              const std::filesystem::path& out_dir, bool resume = false, const PairedDataset* val = nullptr);

} // namespace o2sr

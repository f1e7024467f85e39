#pragma once

#include <string>
#include <vector>

#include "o2sr/params.hpp"
#include "o2sr/tape.hpp"
#include "o2sr/tensor.hpp"

namespace o2sr {

enum class FusionMode { sum, concat_all, concat_all_skip, concat_3_5 };

struct FusionConfig {
    FusionMode mode = FusionMode::sum;
    bool conv3 = true;
    bool conv5 = true;
    bool shift = true;
    int groups = 1;  // groups of the 3x3 and 5x5 branch convs

    /// Branch tags ("conv3", "conv5", "shift") taking part in the fusion.
    /// concat_3_5 always uses exactly conv3 and conv5.
    std::vector<std::string> active_branches() const;

    void validate(int channels) const;
};

struct ConvParams {
    Tensor weight;  // out x in/groups x k x k
    Tensor bias;    // out, or empty
    int groups = 1;
};

/// Same-size cross-correlation with reflect padding.
FeatureMap conv2d_feature(const FeatureMap& m, const ConvParams& p);

/// Shift group of a channel: 0 left, 1 right, 2 up, 3 down, 4 identity.
/// Groups are contiguous and as even as possible; earlier groups take the
/// remainder.
int shift_group(int channel, int channels);

/// Moves each channel one pixel in its group's direction, zero fill.
FeatureMap shift_channels(const FeatureMap& m);

/// Transpose of shift_channels.
FeatureMap shift_channels_adjoint(const FeatureMap& m);

/// shift_channels followed by a pointwise conv.
FeatureMap shift_conv(const FeatureMap& m, const ConvParams& pointwise);

/// Adds the tensors of one fusion block under `prefix`.
void declare_fusion(ParameterSet& params, const std::string& prefix, int channels, const FusionConfig& cfg);

/// Multi-scale fusion of shallow features z with the residual input x.
Var fuse(Tape& t, Var z, Var x, const ParameterSet& params, ParameterSet* grads, const std::string& prefix,
         const FusionConfig& cfg);

FeatureMap fuse(const FeatureMap& z, const FeatureMap& x, const ParameterSet& params, const std::string& prefix,
                const FusionConfig& cfg);

std::string to_string(FusionMode m);
FusionMode parse_fusion_mode(const std::string& s);

} // namespace o2sr

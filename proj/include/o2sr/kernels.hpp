#pragma once

#include <vector>

#include "o2sr/tensor.hpp"

// Hot loops of the network. The top-level functions are OpenMP-parallel;
// each output element is owned by one thread and accumulated in a fixed
// order, so results are bitwise independent of the thread count.
// `reference::` holds straightforward serial versions used by tests and the
// benchmark.
namespace o2sr::kernels {

enum class Padding { reflect, zero };

/// Pads all four sides by r.
FeatureMap pad(const FeatureMap& in, int r, Padding mode);

/// Folds a gradient w.r.t. a padded map back onto the unpadded map (+=).
void unpad_accumulate(const FeatureMap& grad_padded, int r, Padding mode, FeatureMap& grad_in);

/// Grouped 2-D cross-correlation, stride 1, "same" output size.
/// weight: out x (in/groups) x k x k, bias: out.
FeatureMap conv2d_forward(const FeatureMap& in, const Tensor& weight, const Tensor& bias, int groups,
                          Padding mode);

/// Accumulates into any non-null gradient target.
void conv2d_backward(const FeatureMap& in, const Tensor& weight, int groups, Padding mode,
                     const FeatureMap& grad_out, FeatureMap* grad_in, Tensor* grad_weight, Tensor* grad_bias);

/// Softmax attention inside non-overlapping window x window tiles.
/// qkv holds Q, K, V stacked along channels (3C). Output is C channels with
/// heads concatenated. `rel_bias` (heads x (2w-1) x (2w-1)) may be null.
/// Attention probabilities are written to `probs` when non-null, laid out
/// as [window][head][query][key].
FeatureMap window_attention_forward(const FeatureMap& qkv, int heads, int window, const Tensor* rel_bias,
                                    std::vector<double>* probs);

void window_attention_backward(const FeatureMap& qkv, int heads, int window, const Tensor* rel_bias,
                               const std::vector<double>& probs, const FeatureMap& grad_out,
                               FeatureMap& grad_qkv, Tensor* grad_rel_bias);

/// Depth-to-space: out(c, y*d+i, x*d+j) = in(c*d*d + i*d + j, y, x).
FeatureMap pixel_shuffle(const FeatureMap& in, int factor);

/// Inverse of pixel_shuffle.
FeatureMap pixel_unshuffle(const FeatureMap& in, int factor);

namespace reference {

FeatureMap conv2d_forward(const FeatureMap& in, const Tensor& weight, const Tensor& bias, int groups,
                          Padding mode);

void conv2d_backward(const FeatureMap& in, const Tensor& weight, int groups, Padding mode,
                     const FeatureMap& grad_out, FeatureMap* grad_in, Tensor* grad_weight, Tensor* grad_bias);

FeatureMap window_attention_forward(const FeatureMap& qkv, int heads, int window, const Tensor* rel_bias);

} // namespace reference

} // namespace o2sr::kernels

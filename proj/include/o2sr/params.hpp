#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "o2sr/tape.hpp"
#include "o2sr/tensor.hpp"

namespace o2sr {

/// Ordered, named collection of learnable tensors. Insertion order is the
/// canonical order for initialization, checkpoints and optimizer state.
class ParameterSet {
public:
    Tensor& add(const std::string& name, std::vector<int> shape);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::vector<Tensor>& tensors() { return tensors_; }
    std::size_t count() const { return tensors_.size(); }
    std::size_t numel() const;

    /// Same names and shapes, all zeros.
    ParameterSet zeros_like() const;

    void fill(double v);

    /// Reference for op calls; grad is null when grads is null.
    ParamRef ref(const std::string& name, ParameterSet* grads) const;

    bool operator==(const ParameterSet& o) const { return names_ == o.names_ && tensors_ == o.tensors_; }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::map<std::string, std::size_t> index_;
};

/// Fills every tensor from its name: "*.weight" ~ U(+-1/sqrt(fan_in)),
/// "*.gamma" = 1, everything else 0. Values are rounded to float32.
void init_parameters(ParameterSet& params, std::uint64_t seed);

} // namespace o2sr

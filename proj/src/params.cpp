#include "o2sr/params.hpp"

#include <cmath>

namespace o2sr {

Tensor& ParameterSet::add(const std::string& name, std::vector<int> shape)
{
    if (contains(name)) throw ConfigError("duplicate parameter " + name);
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.emplace_back(std::move(shape));
    return tensors_.back();
}

const Tensor& ParameterSet::at(const std::string& name) const
{
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("no parameter named " + name);
    return tensors_[it->second];
}

Tensor& ParameterSet::at(const std::string& name)
{
    return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).at(name));
}

std::size_t ParameterSet::numel() const
{
    std::size_t n = 0;
    for (const Tensor& t : tensors_) n += t.numel();
    return n;
}

ParameterSet ParameterSet::zeros_like() const
{
    ParameterSet z;
    for (std::size_t i = 0; i < tensors_.size(); ++i) z.add(names_[i], tensors_[i].shape());
    return z;
}

void ParameterSet::fill(double v)
{
    for (Tensor& t : tensors_) t.fill(v);
}

ParamRef ParameterSet::ref(const std::string& name, ParameterSet* grads) const
{
    return {&at(name), grads ? &grads->at(name) : nullptr};
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

void init_parameters(ParameterSet& params, std::uint64_t seed)
{
    Rng rng(seed);
    for (std::size_t i = 0; i < params.count(); ++i) {
        const std::string& name = params.names()[i];
        Tensor& t = params.tensors()[i];
        if (ends_with(name, ".weight")) {
            std::size_t fan_in = 1;
            for (std::size_t d = 1; d < t.shape().size(); ++d) fan_in *= static_cast<std::size_t>(t.dim(d));
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (double& v : t.data()) v = to_f32(rng.uniform(-bound, bound));
        } else if (ends_with(name, ".gamma")) {
            t.fill(1.0);
        } else {
            t.fill(0.0);
        }
    }
}

} // namespace o2sr

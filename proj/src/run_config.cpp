#include "o2sr/run_config.hpp"

#include <fstream>
#include <sstream>

namespace o2sr {

Entries degradation_entries(const DegradationConfig& cfg, int bit_depth)
{
    return {
        {"degrade.gaussian_sigma", format_double(cfg.kernel.gaussian_sigma)},
        {"degrade.gaussian_size", std::to_string(cfg.kernel.gaussian_size)},
        {"degrade.motion_length", format_double(cfg.kernel.motion_length)},
        {"degrade.motion_angle", format_double(cfg.kernel.motion_angle)},
        {"degrade.motion_size", std::to_string(cfg.kernel.motion_size)},
        {"degrade.scale", std::to_string(cfg.scale)},
        {"degrade.noise_sigma", format_double(cfg.noise_sigma)},
        {"degrade.seed", std::to_string(cfg.seed)},
        {"degrade.downsample", to_string(cfg.downsample_mode)},
        {"degrade.bit_depth", std::to_string(bit_depth)},
    };
}

void RunConfig::set(const std::string& key, const std::string& value)
{
    if (key.rfind("model.", 0) == 0) {
        if (model.set(key, value)) return;
    } else if (key.rfind("train.", 0) == 0) {
        if (train.set(key, value)) return;
    } else if (key == "degrade.gaussian_sigma") {
        degrade.kernel.gaussian_sigma = parse_double(key, value);
        return;
    } else if (key == "degrade.gaussian_size") {
        degrade.kernel.gaussian_size = parse_int(key, value);
        return;
    } else if (key == "degrade.motion_length") {
        degrade.kernel.motion_length = parse_double(key, value);
        return;
    } else if (key == "degrade.motion_angle") {
        degrade.kernel.motion_angle = parse_double(key, value);
        return;
    } else if (key == "degrade.motion_size") {
        degrade.kernel.motion_size = parse_int(key, value);
        return;
    } else if (key == "degrade.scale") {
        degrade.scale = parse_int(key, value);
        return;
    } else if (key == "degrade.noise_sigma") {
        degrade.noise_sigma = parse_double(key, value);
        return;
    } else if (key == "degrade.seed") {
        degrade.seed = parse_u64(key, value);
        return;
    } else if (key == "degrade.downsample") {
        if (value == "bicubic")
            degrade.downsample_mode = DownsampleMode::bicubic;
        else if (value == "stride")
            degrade.downsample_mode = DownsampleMode::stride;
        else
            throw ConfigError(key + ": expected bicubic or stride, got \"" + value + "\"");
        return;
    } else if (key == "degrade.bit_depth") {
        bit_depth = parse_int(key, value);
        return;
    } else if (key == "eval.scale") {
        eval.scale = parse_int(key, value);
        return;
    } else if (key == "eval.border_crop") {
        eval.border_crop = parse_int(key, value);
        return;
    }
    throw ConfigError("unknown config key \"" + key + "\"");
}

void RunConfig::apply(const Entries& entries)
{
    for (const auto& [k, v] : entries) set(k, v);
}

void RunConfig::apply_preset(const std::string& name)
{
    if (name == "mini" || name == "plus") {
        const std::uint64_t seed = degrade.seed;
        degrade = degradation_preset(name, degrade.scale);
        degrade.seed = seed;
    } else if (name == "tiny" || name == "paper") {
        const ModelConfig old = model;
        model = model_preset(name);
        model.scale = old.scale;
        model.seed = old.seed;
        const std::uint64_t seed = train.seed;
        train = train_preset(name);
        train.seed = seed;
    } else {
        throw ConfigError("unknown preset \"" + name + "\" (expected mini, plus, tiny or paper)");
    }
}

void RunConfig::set_seed(std::uint64_t seed)
{
    model.seed = seed;
    train.seed = seed;
    degrade.seed = seed;
}

void RunConfig::set_scale(int scale)
{
    model.scale = scale;
    degrade.scale = scale;
    eval.scale = scale;
}

void RunConfig::validate() const
{
    model.validate();
    train.validate(model.scale);
    try {
        degrade.validate();
        (void)degrade.kernel.build();
    } catch (const Error& e) {
        throw ConfigError(std::string("degrade: ") + e.what());
    }
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("degrade.bit_depth must be 8 or 16");
    if (eval.scale < 1) throw ConfigError("eval.scale must be >= 1");
}

Entries RunConfig::entries() const
{
    Entries all = model.entries();
    const Entries t = train.entries();
    const Entries d = degradation_entries(degrade, bit_depth);
    all.insert(all.end(), t.begin(), t.end());
    all.insert(all.end(), d.begin(), d.end());
    all.emplace_back("eval.scale", std::to_string(eval.scale));
    all.emplace_back("eval.border_crop", std::to_string(eval.border_crop));
    return all;
}

std::string RunConfig::serialize() const { return format_entries(entries()); }

RunConfig RunConfig::parse(const std::string& text)
{
    RunConfig cfg;
    cfg.apply(parse_entries(text));
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

} // namespace o2sr

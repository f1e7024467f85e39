#include "o2sr/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "o2sr/metrics.hpp"

namespace o2sr {

void TrainConfig::validate(int scale) const
{
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("train.alpha and train.beta must be >= 0");
    if (alpha == 0.0 && beta == 0.0) throw ConfigError("train.alpha and train.beta cannot both be 0");
    if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (hr_patch < 1 || hr_patch % scale != 0)
        throw ConfigError("train.hr_patch " + std::to_string(hr_patch) + " must be a positive multiple of scale " +
                          std::to_string(scale));
    if (epochs < 0 || max_steps < 0) throw ConfigError("train.epochs and train.max_steps must be >= 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("train.adam_beta1/2 must lie in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be > 0");
    if (val_every < 0 || val_images < 1 || checkpoint_every < 0)
        throw ConfigError("train.val_every/checkpoint_every must be >= 0 and train.val_images >= 1");
}

Entries TrainConfig::entries() const
{
    return {
        {"train.alpha", format_double(alpha)},
        {"train.beta", format_double(beta)},
        {"train.lr", format_double(lr)},
        {"train.batch_size", std::to_string(batch_size)},
        {"train.hr_patch", std::to_string(hr_patch)},
        {"train.epochs", std::to_string(epochs)},
        {"train.max_steps", std::to_string(max_steps)},
        {"train.seed", std::to_string(seed)},
        {"train.adam_beta1", format_double(adam_beta1)},
        {"train.adam_beta2", format_double(adam_beta2)},
        {"train.adam_eps", format_double(adam_eps)},
        {"train.val_every", std::to_string(val_every)},
        {"train.val_images", std::to_string(val_images)},
        {"train.checkpoint_every", std::to_string(checkpoint_every)},
    };
}

bool TrainConfig::set(const std::string& key, const std::string& value)
{
    if (key == "train.alpha") alpha = parse_double(key, value);
    else if (key == "train.beta") beta = parse_double(key, value);
    else if (key == "train.lr") lr = parse_double(key, value);
    else if (key == "train.batch_size") batch_size = parse_int(key, value);
    else if (key == "train.hr_patch") hr_patch = parse_int(key, value);
    else if (key == "train.epochs") epochs = parse_int(key, value);
    else if (key == "train.max_steps") max_steps = parse_int(key, value);
    else if (key == "train.seed") seed = parse_u64(key, value);
    else if (key == "train.adam_beta1") adam_beta1 = parse_double(key, value);
    else if (key == "train.adam_beta2") adam_beta2 = parse_double(key, value);
    else if (key == "train.adam_eps") adam_eps = parse_double(key, value);
    else if (key == "train.val_every") val_every = parse_int(key, value);
    else if (key == "train.val_images") val_images = parse_int(key, value);
    else if (key == "train.checkpoint_every") checkpoint_every = parse_int(key, value);
    else return false;
    return true;
}

TrainConfig train_preset(const std::string& name)
{
    TrainConfig cfg;
    if (name == "paper") {
        cfg.lr = 1e-5;
        cfg.batch_size = 32;
        cfg.hr_patch = 96;
        cfg.epochs = 1000;
    } else if (name == "tiny") {
        cfg.max_steps = 500;
    } else {
        throw ConfigError("unknown training preset \"" + name + "\"");
    }
    return cfg;
}

double loss(const FeatureMap& sr, const FeatureMap& hr, double alpha, double beta)
{
    if (!sr.same_shape(hr)) throw ShapeError("loss: " + sr.dims_string() + " vs " + hr.dims_string());
    double l1 = 0.0, l2 = 0.0;
    const auto a = sr.data(), b = hr.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = a[i] - b[i];
        l1 += std::abs(r);
        l2 += r * r;
    }
    const double n = static_cast<double>(a.size());
    return alpha * (l1 / n) + beta * (l2 / n);
}

double loss(const Image& sr, const Image& hr, double alpha, double beta)
{
    if (!sr.same_dims(hr)) throw ShapeError("loss: " + sr.dims_string() + " vs " + hr.dims_string());
    return loss(to_feature_map(sr), to_feature_map(hr), alpha, beta);
}

FeatureMap loss_gradient(const FeatureMap& sr, const FeatureMap& hr, double alpha, double beta)
{
    if (!sr.same_shape(hr)) throw ShapeError("loss: " + sr.dims_string() + " vs " + hr.dims_string());
    FeatureMap g(sr.channels(), sr.height(), sr.width());
    const double n = static_cast<double>(sr.size());
    const auto a = sr.data(), b = hr.data();
    auto d = g.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double r = a[i] - b[i];
        const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        d[i] = alpha * sign / n + beta * 2.0 * r / n;
    }
    return g;
}

std::vector<PatchPair> sample_patches(const PairedDataset& ds, int hr_patch, int batch, std::uint64_t seed,
                                      std::uint64_t step)
{
    if (ds.pairs.empty()) throw SamplingError("dataset is empty");
    const int d = ds.scale;
    if (hr_patch < d || hr_patch % d != 0)
        throw ConfigError("train.hr_patch " + std::to_string(hr_patch) + " is not a multiple of scale " +
                          std::to_string(d));
    const int lp = hr_patch / d;
    std::vector<PatchPair> out(batch);
    for (int i = 0; i < batch; ++i) {
        Rng rng(mix_seed(seed, step, static_cast<std::uint64_t>(i)));
        const int idx = static_cast<int>(rng.below(ds.pairs.size()));
        const ImagePair& p = ds.pairs[idx];
        if (p.hr.height() < hr_patch || p.hr.width() < hr_patch)
            throw SamplingError("image \"" + p.hr.id + "\" (" + p.hr.dims_string() + ") is smaller than patch " +
                                std::to_string(hr_patch));
        const int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.lr.height() - lp + 1)));
        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(p.lr.width() - lp + 1)));
        PatchPair& pp = out[i];
        pp.image = idx;
        pp.lr_row = r;
        pp.lr_col = c;
        pp.hr_row = r * d;
        pp.hr_col = c * d;
        pp.lr = to_feature_map(to_luminance(crop(p.lr, r, c, lp, lp)));
        pp.hr = to_feature_map(to_luminance(crop(p.hr, pp.hr_row, pp.hr_col, hr_patch, hr_patch)));
    }
    return out;
}

TrainState init_train_state(const ParameterSet& params)
{
    return {0, params.zeros_like(), params.zeros_like()};
}

double batch_gradients(const ParameterSet& params, const std::vector<PatchPair>& batch, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, ParameterSet& grads)
{
    const int n = static_cast<int>(batch.size());
    std::vector<ParameterSet> item_grads(n);
    std::vector<double> item_loss(n, 0.0);
    std::vector<std::string> errors(n);

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
        try {
            item_grads[i] = params.zeros_like();
            Tape t;
            const Var in = t.constant(batch[i].lr);
            const Var out = model_forward(t, in, mcfg, params, &item_grads[i]);
            item_loss[i] = loss(t.value(out), batch[i].hr, tcfg.alpha, tcfg.beta);
            t.backward(out, loss_gradient(t.value(out), batch[i].hr, tcfg.alpha, tcfg.beta));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const std::string& e : errors)
        if (!e.empty()) throw ShapeError(e);

    grads = params.zeros_like();
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        total += item_loss[i];
        for (std::size_t k = 0; k < grads.count(); ++k) {
            auto dst = grads.tensors()[k].data();
            const auto src = item_grads[i].tensors()[k].data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
    for (Tensor& g : grads.tensors())
        for (double& v : g.data()) v /= n;
    return total / n;
}

double train_step(ParameterSet& params, TrainState& state, const std::vector<PatchPair>& batch,
                  const ModelConfig& mcfg, const TrainConfig& tcfg)
{
    ParameterSet grads;
    const double l = batch_gradients(params, batch, mcfg, tcfg, grads);
    const std::uint64_t t = state.step + 1;
    if (!std::isfinite(l)) throw DivergenceError("step " + std::to_string(t) + ": loss is " + std::to_string(l));
    for (std::size_t k = 0; k < grads.count(); ++k)
        for (double g : grads.tensors()[k].data())
            if (!std::isfinite(g))
                throw DivergenceError("step " + std::to_string(t) + ": non-finite gradient in " + grads.names()[k] +
                                      " (loss " + std::to_string(l) + ")");

    const double b1 = tcfg.adam_beta1, b2 = tcfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.count(); ++k) {
        auto p = params.tensors()[k].data();
        auto m = state.m.tensors()[k].data();
        auto v = state.v.tensors()[k].data();
        const auto g = grads.tensors()[k].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = to_f32(b1 * m[j] + (1.0 - b1) * g[j]);
            v[j] = to_f32(b2 * v[j] + (1.0 - b2) * g[j] * g[j]);
            const double update = tcfg.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + tcfg.adam_eps);
            p[j] = to_f32(p[j] - update);
        }
    }
    state.step = t;
    return l;
}

std::string format_log_line(const LogRecord& r)
{
    char buf[128];
    if (r.has_val)
        std::snprintf(buf, sizeof buf, "%llu\t%.17g\t%.17g", static_cast<unsigned long long>(r.step), r.loss,
                      r.val_psnr);
    else
        std::snprintf(buf, sizeof buf, "%llu\t%.17g", static_cast<unsigned long long>(r.step), r.loss);
    return buf;
}

std::uint64_t total_steps(const TrainConfig& cfg, std::size_t dataset_size)
{
    if (cfg.max_steps > 0) return static_cast<std::uint64_t>(cfg.max_steps);
    const std::uint64_t per_epoch =
        (dataset_size + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
    return static_cast<std::uint64_t>(cfg.epochs) * per_epoch;
}

double validation_psnr(const PairedDataset& ds, int count, const ParameterSet& params, const ModelConfig& mcfg)
{
    double sum = 0.0;
    int finite = 0;
    const int n = std::min<int>(count, static_cast<int>(ds.pairs.size()));
    for (int i = 0; i < n; ++i) {
        const Image sr = forward(to_luminance(ds.pairs[i].lr), params, mcfg);
        const Image hr = to_luminance(ds.pairs[i].hr);
        const double p = psnr(crop_border(sr, mcfg.scale), crop_border(hr, mcfg.scale));
        if (std::isfinite(p)) {
            sum += p;
            ++finite;
        }
    }
    return finite ? sum / finite : kInfinitePsnr;
}

namespace {

// Settings that may change between an interrupted run and its resumption.
const std::set<std::string> kResumeFree = {"train.epochs", "train.max_steps", "train.checkpoint_every"};

void check_train_compatible(const TrainConfig& expected, const Entries& found)
{
    for (const auto& [key, value] : expected.entries()) {
        if (kResumeFree.count(key)) continue;
        auto it = std::find_if(found.begin(), found.end(), [&](const auto& e) { return e.first == key; });
        if (it == found.end()) throw IncompatibilityError(key + ": missing from checkpoint");
        if (it->second != value)
            throw IncompatibilityError(key + ": checkpoint has " + it->second + ", expected " + value);
    }
}

void rewrite_log(const std::filesystem::path& path, std::uint64_t keep_through)
{
    std::vector<std::string> kept;
    if (std::ifstream in(path); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (std::stoull(line.substr(0, line.find('\t'))) <= keep_through) kept.push_back(line);
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const std::string& l : kept) out << l << '\n';
}

void write_manifest(const std::filesystem::path& path, const PairedDataset& ds, const ModelConfig& mcfg,
                    const TrainConfig& tcfg, std::uint64_t steps)
{
    std::ofstream m(path);
    if (!m) throw IoError("cannot write " + path.string());
    m << "# o2sr training run\n";
    m << format_entries(mcfg.entries()) << format_entries(tcfg.entries());
    m << "data.hr = " << ds.hr_root.string() << '\n'
      << "data.lr = " << ds.lr_root.string() << '\n'
      << "data.pairs = " << ds.pairs.size() << '\n'
      << "run.total_steps = " << steps << '\n'
      << "run.threads_affect_results = false\n";
}

} // namespace

FitResult fit(const PairedDataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg,
              const std::filesystem::path& out_dir, bool resume, const PairedDataset* val)
{
    mcfg.validate();
    tcfg.validate(mcfg.scale);
    if (ds.scale != mcfg.scale)
        throw ConfigError("model.scale " + std::to_string(mcfg.scale) + " does not match dataset scale " +
                          std::to_string(ds.scale));
    std::filesystem::create_directories(out_dir);
    const auto ckpt_path = out_dir / "checkpoint.o2ck";
    const auto log_path = out_dir / "loss.log";
    const std::uint64_t steps = total_steps(tcfg, ds.size());

    FitResult result;
    Checkpoint& ck = result.checkpoint;
    TrainState state;
    if (resume && std::filesystem::exists(ckpt_path)) {
        ck = load_checkpoint(ckpt_path);
        check_compatible(mcfg, ck.model);
        check_train_compatible(tcfg, ck.train);
        if (ck.adam_m.count() == 0) throw IncompatibilityError("checkpoint has no optimizer state to resume from");
        state.step = ck.step;
        state.m = ck.adam_m;
        state.v = ck.adam_v;
        rewrite_log(log_path, ck.step);
    } else {
        ck.model = mcfg;
        ck.params = build_model(mcfg);
        state = init_train_state(ck.params);
        rewrite_log(log_path, 0);
    }
    ck.train = tcfg.entries();
    ck.seed = tcfg.seed;
    write_manifest(out_dir / "manifest.txt", ds, mcfg, tcfg, steps);

    auto save = [&] {
        ck.step = state.step;
        ck.adam_m = state.m;
        ck.adam_v = state.v;
        save_checkpoint(ck, ckpt_path);
    };
    if (state.step == 0) save();

    std::ofstream log(log_path, std::ios::app);
    if (!log) throw IoError("cannot append to " + log_path.string());
    const PairedDataset& vset = val ? *val : ds;
    while (state.step < steps) {
        const auto batch = sample_patches(ds, tcfg.hr_patch, tcfg.batch_size, tcfg.seed, state.step + 1);
        LogRecord rec;
        rec.loss = train_step(ck.params, state, batch, mcfg, tcfg);
        rec.step = state.step;
        if (tcfg.val_every > 0 && state.step % static_cast<std::uint64_t>(tcfg.val_every) == 0) {
            rec.has_val = true;
            rec.val_psnr = validation_psnr(vset, tcfg.val_images, ck.params, mcfg);
        }
        log << format_log_line(rec) << '\n' << std::flush;
        result.log.push_back(rec);
        const bool periodic =
            tcfg.checkpoint_every > 0 && state.step % static_cast<std::uint64_t>(tcfg.checkpoint_every) == 0;
        if (periodic || state.step == steps) save();
    }
    ck.step = state.step;
    return result;
}

} // namespace o2sr

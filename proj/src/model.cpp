#include "o2sr/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

namespace o2sr {

std::string to_string(EncoderVariant v)
{
    switch (v) {
    case EncoderVariant::none: return "none";
    case EncoderVariant::plain_cnn: return "plain_cnn";
    case EncoderVariant::attention: return "attention";
    case EncoderVariant::ours: return "ours";
    }
    return "ours";
}

EncoderVariant parse_encoder(const std::string& s)
{
    for (EncoderVariant v :
         {EncoderVariant::none, EncoderVariant::plain_cnn, EncoderVariant::attention, EncoderVariant::ours})
        if (to_string(v) == s) return v;
    throw ConfigError("model.encoder: unknown variant \"" + s + "\"");
}

void ModelConfig::validate() const
{
    if (scale != 2 && scale != 4) throw ConfigError("model.scale must be 2 or 4, got " + std::to_string(scale));
    if (channels < 1) throw ConfigError("model.channels must be >= 1");
    if (heads < 1 || channels % heads != 0)
        throw ConfigError("model.heads " + std::to_string(heads) + " does not divide model.channels " +
                          std::to_string(channels));
    if (window < 1) throw ConfigError("model.window must be >= 1");
    if (blocks < 0) throw ConfigError("model.blocks must be >= 0");
    if (mlp_ratio < 1) throw ConfigError("model.mlp_ratio must be >= 1");
    if (upsample_kernel != 1 && upsample_kernel != 3) throw ConfigError("model.upsample_kernel must be 1 or 3");
    if (encoder == EncoderVariant::ours) {
        if (fusion_blocks < 1) throw ConfigError("model.fusion_blocks must be >= 1");
        fusion.validate(channels);
    }
}

Entries ModelConfig::entries() const
{
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    return {
        {"model.scale", std::to_string(scale)},
        {"model.channels", std::to_string(channels)},
        {"model.encoder", to_string(encoder)},
        {"model.fusion_mode", to_string(fusion.mode)},
        {"model.branch_conv3", b(fusion.conv3)},
        {"model.branch_conv5", b(fusion.conv5)},
        {"model.branch_shift", b(fusion.shift)},
        {"model.branch_groups", std::to_string(fusion.groups)},
        {"model.fusion_blocks", std::to_string(fusion_blocks)},
        {"model.blocks", std::to_string(blocks)},
        {"model.heads", std::to_string(heads)},
        {"model.window", std::to_string(window)},
        {"model.mlp_ratio", std::to_string(mlp_ratio)},
        {"model.skip", b(skip)},
        {"model.rel_bias", b(rel_bias)},
        {"model.upsample_kernel", std::to_string(upsample_kernel)},
        {"model.seed", std::to_string(seed)},
    };
}

bool ModelConfig::set(const std::string& key, const std::string& value)
{
    if (key == "model.scale") scale = parse_int(key, value);
    else if (key == "model.channels") channels = parse_int(key, value);
    else if (key == "model.encoder") encoder = parse_encoder(value);
    else if (key == "model.fusion_mode") fusion.mode = parse_fusion_mode(value);
    else if (key == "model.branch_conv3") fusion.conv3 = parse_bool(key, value);
    else if (key == "model.branch_conv5") fusion.conv5 = parse_bool(key, value);
    else if (key == "model.branch_shift") fusion.shift = parse_bool(key, value);
    else if (key == "model.branch_groups") fusion.groups = parse_int(key, value);
    else if (key == "model.fusion_blocks") fusion_blocks = parse_int(key, value);
    else if (key == "model.blocks") blocks = parse_int(key, value);
    else if (key == "model.heads") heads = parse_int(key, value);
    else if (key == "model.window") window = parse_int(key, value);
    else if (key == "model.mlp_ratio") mlp_ratio = parse_int(key, value);
    else if (key == "model.skip") skip = parse_bool(key, value);
    else if (key == "model.rel_bias") rel_bias = parse_bool(key, value);
    else if (key == "model.upsample_kernel") upsample_kernel = parse_int(key, value);
    else if (key == "model.seed") seed = parse_u64(key, value);
    else return false;
    return true;
}

ModelConfig model_preset(const std::string& name)
{
    ModelConfig cfg;
    if (name == "tiny") {
        cfg.channels = 16;
        cfg.blocks = 2;
        cfg.heads = 2;
        cfg.window = 4;
    } else if (name != "paper") {
        throw ConfigError("unknown model preset \"" + name + "\"");
    }
    return cfg;
}

namespace {

void declare(ParameterSet& p, const ModelConfig& cfg)
{
    cfg.validate();
    const int c = cfg.channels;
    p.add("stem.weight", {c, 1, 3, 3});
    p.add("stem.bias", {c});
    switch (cfg.encoder) {
    case EncoderVariant::none: break;
    case EncoderVariant::plain_cnn:
        p.add("enc.conv1.weight", {c, c, 3, 3});
        p.add("enc.conv1.bias", {c});
        p.add("enc.conv2.weight", {c, c, 3, 3});
        p.add("enc.conv2.bias", {c});
        break;
    case EncoderVariant::attention: {
        const int r = std::max(1, c / 4);
        p.add("enc.fc1.weight", {r, c, 1, 1});
        p.add("enc.fc1.bias", {r});
        p.add("enc.fc2.weight", {c, r, 1, 1});
        p.add("enc.fc2.bias", {c});
        break;
    }
    case EncoderVariant::ours:
        for (int k = 0; k < cfg.fusion_blocks; ++k)
            declare_fusion(p, "enc.fuse" + std::to_string(k) + ".", c, cfg.fusion);
        break;
    }
    const int side = 2 * cfg.window - 1;
    const int hidden = c * cfg.mlp_ratio;
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string pre = "dec.block" + std::to_string(b) + ".";
        p.add(pre + "norm1.gamma", {c});
        p.add(pre + "norm1.beta", {c});
        p.add(pre + "qkv.weight", {3 * c, c, 1, 1});
        p.add(pre + "qkv.bias", {3 * c});
        if (cfg.rel_bias) p.add(pre + "rel_bias", {cfg.heads, side, side});
        p.add(pre + "proj.weight", {c, c, 1, 1});
        p.add(pre + "proj.bias", {c});
        p.add(pre + "norm2.gamma", {c});
        p.add(pre + "norm2.beta", {c});
        p.add(pre + "mlp1.weight", {hidden, c, 1, 1});
        p.add(pre + "mlp1.bias", {hidden});
        p.add(pre + "mlp2.weight", {c, hidden, 1, 1});
        p.add(pre + "mlp2.bias", {c});
    }
    const int up = c * cfg.scale * cfg.scale;
    p.add("tail.up.weight", {up, c, cfg.upsample_kernel, cfg.upsample_kernel});
    p.add("tail.up.bias", {up});
    p.add("tail.out.weight", {1, c, 3, 3});
    p.add("tail.out.bias", {1});
}

Var attention_core(Tape& t, Var y, const ParameterSet& params, ParameterSet* grads, const std::string& pre,
                   int heads, int window)
{
    auto p = [&](const std::string& n) { return params.ref(pre + n, grads); };
    const ParamRef bias = params.contains(pre + "rel_bias") ? p("rel_bias") : ParamRef{};
    const Var qkv = ops::conv2d(t, y, p("qkv.weight"), p("qkv.bias"));
    const Var a = ops::window_attention(t, qkv, heads, window, bias);
    return ops::conv2d(t, a, p("proj.weight"), p("proj.bias"));
}

Var encode(Tape& t, Var s, const ModelConfig& cfg, const ParameterSet& params, ParameterSet* grads)
{
    auto p = [&](const std::string& n) { return params.ref(n, grads); };
    switch (cfg.encoder) {
    case EncoderVariant::none: return s;
    case EncoderVariant::plain_cnn: {
        const Var h = ops::relu(t, ops::conv2d(t, s, p("enc.conv1.weight"), p("enc.conv1.bias")));
        return ops::conv2d(t, h, p("enc.conv2.weight"), p("enc.conv2.bias"));
    }
    case EncoderVariant::attention: {
        const Var pooled = ops::global_avg_pool(t, s);
        const Var h = ops::relu(t, ops::conv2d(t, pooled, p("enc.fc1.weight"), p("enc.fc1.bias")));
        const Var gate = ops::sigmoid(t, ops::conv2d(t, h, p("enc.fc2.weight"), p("enc.fc2.bias")));
        return ops::scale_channels(t, s, gate);
    }
    case EncoderVariant::ours: {
        Var z = s;
        for (int k = 0; k < cfg.fusion_blocks; ++k)
            z = fuse(t, z, z, params, grads, "enc.fuse" + std::to_string(k) + ".", cfg.fusion);
        return z;
    }
    }
    return s;
}

} // namespace

ShapeChart shape_chart(const ModelConfig& cfg)
{
    ParameterSet p;
    declare(p, cfg);
    ShapeChart chart;
    for (std::size_t i = 0; i < p.count(); ++i) chart.emplace_back(p.names()[i], p.tensors()[i].shape());
    return chart;
}

std::size_t parameter_count(const ShapeChart& chart)
{
    std::size_t n = 0;
    for (const auto& [name, shape] : chart) {
        std::size_t k = 1;
        for (int d : shape) k *= static_cast<std::size_t>(d);
        n += k;
    }
    return n;
}

// Inputs are centered before the stem; the output bias starts at the same
// offset.
constexpr double kIntensityMean = 0.5;

ParameterSet build_model(const ModelConfig& cfg)
{
    ParameterSet p;
    declare(p, cfg);
    init_parameters(p, cfg.seed);
    p.at("tail.out.bias").fill(kIntensityMean);
    return p;
}

Var model_forward(Tape& t, Var lr, const ModelConfig& cfg, const ParameterSet& params, ParameterSet* grads)
{
    const FeatureMap& in = t.value(lr);
    if (in.channels() != 1) throw ShapeError("model input must have one channel, got " + in.dims_string());
    const int h = in.height(), w = in.width(), win = cfg.window;
    const int hp = std::max(win, (h + win - 1) / win * win);
    const int wp = std::max(win, (w + win - 1) / win * win);
    auto p = [&](const std::string& n) { return params.ref(n, grads); };

    const Var centered = ops::add(t, lr, t.constant(FeatureMap(1, h, w, -kIntensityMean)));
    const Var x = ops::pad_bottom_right(t, centered, hp - h, wp - w);
    const Var s = ops::conv2d(t, x, p("stem.weight"), p("stem.bias"));
    Var y = encode(t, s, cfg, params, grads);

    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string pre = "dec.block" + std::to_string(b) + ".";
        const Var n1 = ops::layer_norm(t, y, p(pre + "norm1.gamma"), p(pre + "norm1.beta"));
        y = ops::add(t, y, attention_core(t, n1, params, grads, pre, cfg.heads, win));
        const Var n2 = ops::layer_norm(t, y, p(pre + "norm2.gamma"), p(pre + "norm2.beta"));
        const Var hid = ops::gelu(t, ops::conv2d(t, n2, p(pre + "mlp1.weight"), p(pre + "mlp1.bias")));
        y = ops::add(t, y, ops::conv2d(t, hid, p(pre + "mlp2.weight"), p(pre + "mlp2.bias")));
    }

    if (cfg.skip) y = ops::add(t, y, s);
    const Var up = ops::conv2d(t, y, p("tail.up.weight"), p("tail.up.bias"));
    const Var hr = ops::pixel_shuffle(t, up, cfg.scale);
    const Var out = ops::conv2d(t, hr, p("tail.out.weight"), p("tail.out.bias"));
    return ops::crop(t, out, h * cfg.scale, w * cfg.scale);
}

Image forward(const Image& lr, const ParameterSet& params, const ModelConfig& cfg)
{
    if (lr.channels() != 1)
        throw ShapeError("model input must be single-channel, got " + std::to_string(lr.channels()) + " channels");
    Tape t(false);
    const Var in = t.constant(to_feature_map(lr));
    Image out = to_image(t.value(model_forward(t, in, cfg, params, nullptr)), lr.id);
    for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

FeatureMap window_attention(const FeatureMap& m, const ParameterSet& params, const std::string& prefix, int heads,
                            int window)
{
    Tape t(false);
    const Var in = t.constant(m);
    return t.value(attention_core(t, in, params, nullptr, prefix, heads, window));
}

void check_compatible(const ModelConfig& expected, const ModelConfig& found)
{
    const Entries a = expected.entries(), b = found.entries();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].second != b[i].second)
            throw IncompatibilityError(a[i].first + ": checkpoint has " + b[i].second + ", expected " + a[i].second);
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {

constexpr char kMagic[8] = {'O', '2', 'S', 'R', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    template <class T>
    void put(T v)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put_bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void put_f32(double v)
    {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        put(bits);
    }
    std::vector<std::uint8_t> buf;
};

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

    template <class T>
    T get()
    {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
        pos_ += n;
        return s;
    }
    double get_f32()
    {
        const std::uint32_t bits = get<std::uint32_t>();
        float f;
        std::memcpy(&f, &bits, sizeof f);
        return f;
    }
    bool done() const { return pos_ == n_; }

private:
    void need(std::size_t k)
    {
        if (pos_ + k > n_) throw IntegrityError("checkpoint truncated");
    }
    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const Tensor& t)
{
    w.put(static_cast<std::uint16_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put(static_cast<std::uint8_t>(1));  // float32
    w.put(static_cast<std::uint8_t>(t.shape().size()));
    for (int d : t.shape()) w.put(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.put_f32(v);
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    Entries all = ckpt.model.entries();
    all.insert(all.end(), ckpt.train.begin(), ckpt.train.end());
    const std::string text = format_entries(all);

    Writer w;
    w.put_bytes(kMagic, sizeof kMagic);
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(text.size()));
    w.put_bytes(text.data(), text.size());
    w.put(ckpt.step);
    w.put(ckpt.seed);

    const bool adam = ckpt.adam_m.count() > 0;
    const std::size_t n = ckpt.params.count();
    w.put(static_cast<std::uint32_t>(adam ? 3 * n : n));
    for (std::size_t i = 0; i < n; ++i) write_tensor(w, ckpt.params.names()[i], ckpt.params.tensors()[i]);
    if (adam) {
        for (std::size_t i = 0; i < n; ++i)
            write_tensor(w, "adam.m/" + ckpt.adam_m.names()[i], ckpt.adam_m.tensors()[i]);
        for (std::size_t i = 0; i < n; ++i)
            write_tensor(w, "adam.v/" + ckpt.adam_v.names()[i], ckpt.adam_v.tensors()[i]);
    }
    w.put(fnv1a(w.buf.data(), w.buf.size()));

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out.write(reinterpret_cast<const char*>(w.buf.data()), static_cast<std::streamsize>(w.buf.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw IntegrityError(path.string() + " is not a checkpoint (bad magic)");
    if (bytes.size() < sizeof kMagic + 4 + 8) throw IntegrityError("checkpoint truncated");
    const std::size_t body = bytes.size() - 8;
    Reader tail(bytes.data() + body, 8);
    if (tail.get<std::uint64_t>() != fnv1a(bytes.data(), body))
        throw IntegrityError(path.string() + ": checksum mismatch (truncated or corrupt)");

    Reader r(bytes.data() + sizeof kMagic, body - sizeof kMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw IncompatibilityError("checkpoint version " + std::to_string(version) + ", this build reads version " +
                                   std::to_string(kCheckpointVersion));

    Checkpoint ck;
    const std::string text = r.get_string(r.get<std::uint32_t>());
    for (const auto& [k, v] : parse_entries(text)) {
        if (k.rfind("train.", 0) == 0)
            ck.train.emplace_back(k, v);
        else if (!ck.model.set(k, v))
            throw IncompatibilityError("checkpoint carries unknown field " + k);
    }
    ck.step = r.get<std::uint64_t>();
    ck.seed = r.get<std::uint64_t>();

    ShapeChart chart;
    try {
        chart = shape_chart(ck.model);
    } catch (const ConfigError& e) {
        throw IntegrityError(std::string("checkpoint config is invalid: ") + e.what());
    }
    ParameterSet params, m, v;
    for (const auto& [name, shape] : chart) params.add(name, shape);
    const auto count = r.get<std::uint32_t>();
    if (count != chart.size() && count != 3 * chart.size())
        throw IntegrityError("checkpoint holds " + std::to_string(count) + " tensors, config needs " +
                             std::to_string(chart.size()));
    if (count == 3 * chart.size()) {
        m = params.zeros_like();
        v = params.zeros_like();
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.get_string(r.get<std::uint16_t>());
        const auto dtype = r.get<std::uint8_t>();
        if (dtype != 1) throw IntegrityError("tensor " + name + ": unsupported dtype");
        std::vector<int> shape(r.get<std::uint8_t>());
        for (int& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
        ParameterSet* dst = &params;
        std::string key = name;
        if (name.rfind("adam.m/", 0) == 0) {
            dst = &m;
            key = name.substr(7);
        } else if (name.rfind("adam.v/", 0) == 0) {
            dst = &v;
            key = name.substr(7);
        }
        if (!dst->contains(key)) throw IntegrityError("unexpected tensor " + name);
        Tensor& t = dst->at(key);
        if (t.shape() != shape) throw IntegrityError("tensor " + name + " has the wrong shape");
        for (double& x : t.data()) x = r.get_f32();
    }
    if (!r.done()) throw IntegrityError("trailing bytes in checkpoint");
    ck.params = std::move(params);
    ck.adam_m = std::move(m);
    ck.adam_v = std::move(v);
    return ck;
}

} // namespace o2sr

#include "o2sr/cli.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "o2sr/degradation.hpp"
#include "o2sr/gradient_domain.hpp"
#include "o2sr/metrics.hpp"
#include "o2sr/model.hpp"
#include "o2sr/run_config.hpp"
#include "o2sr/training.hpp"

namespace o2sr {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> presets;
    std::optional<std::uint64_t> seed;
    std::optional<int> scale;
    std::vector<std::string> sets;

    bool touches_model() const { return !config.empty() || !presets.empty() || scale || seed || !sets.empty(); }
};

void add_common(CLI::App* cmd, CommonOptions& c)
{
    cmd->add_option("--config", c.config, "Run config file (key = value lines)");
    cmd->add_option("--preset", c.presets, "Named preset, repeatable: mini, plus, tiny, paper")
        ->check(CLI::IsMember({"mini", "plus", "tiny", "paper"}))
        ->take_all();
    cmd->add_option("--seed", c.seed, "Seed for every random stream");
    cmd->add_option("--scale", c.scale, "Upscaling factor")->check(CLI::IsMember({2, 4}));
    cmd->add_option("--set", c.sets, "Override one config key, e.g. --set train.lr=5e-4")->take_all();
}

// Later sources win: defaults, config file, presets, --set, --scale, --seed.
RunConfig resolve(const CommonOptions& c)
{
    RunConfig cfg;
    if (!c.config.empty()) {
        try {
            cfg = RunConfig::load(c.config);
        } catch (const IoError& e) {
            throw ConfigError(e.what());
        }
    }
    for (const std::string& p : c.presets) cfg.apply_preset(p);
    for (const std::string& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + s + "\"");
        const auto trim = [](std::string v) {
            v.erase(0, v.find_first_not_of(' '));
            v.erase(v.find_last_not_of(' ') + 1);
            return v;
        };
        cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    if (c.scale) cfg.set_scale(*c.scale);
    if (c.seed) cfg.set_seed(*c.seed);
    return cfg;
}

std::uint64_t stem_hash(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void apply_thread_cap()
{
    if (const char* env = std::getenv("O2SR_NUM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
}

int cmd_make_dataset(const CommonOptions& common, const fs::path& hr_dir, const fs::path& out_dir,
                     std::ostream& out, std::ostream& err)
{
    RunConfig cfg = resolve(common);
    try {
        cfg.degrade.validate();
        (void)cfg.degrade.kernel.build();
    } catch (const Error& e) {
        throw ConfigError(std::string("degrade: ") + e.what());
    }
    if (cfg.bit_depth != 8 && cfg.bit_depth != 16) throw ConfigError("degrade.bit_depth must be 8 or 16");
    const int d = cfg.degrade.scale;
    const auto files = list_png(hr_dir);
    const fs::path hr_out = out_dir / "hr";
    const fs::path lr_out = lr_dir_name(out_dir, d);
    fs::create_directories(hr_out);
    fs::create_directories(lr_out);

    std::vector<std::string> errors(files.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < files.size(); ++i) {
        try {
            const Image hr = load_image(files[i]);
            DegradationConfig dc = cfg.degrade;
            dc.seed = mix_seed(cfg.degrade.seed, stem_hash(hr.id));
            const Image lr = degrade(hr, dc);
            save_image(hr, hr_out / (hr.id + ".png"), cfg.bit_depth);
            save_image(lr, lr_out / (hr.id + ".png"), cfg.bit_depth);
        } catch (const Error& e) {
            errors[i] = files[i].filename().string() + ": " + e.what();
        }
    }

    std::ofstream m(out_dir / "manifest.txt");
    if (!m) throw IoError("cannot write " + (out_dir / "manifest.txt").string());
    m << "# o2sr dataset\n" << format_entries(degradation_entries(cfg.degrade, cfg.bit_depth));
    m << "kernel.kind = " << cfg.degrade.kernel.kind_name() << '\n';
    m << "noise.seed_rule = mix(degrade.seed, fnv1a(stem))\n";
    m << "source = " << hr_dir.string() << '\n';
    int failures = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (errors[i].empty()) {
            m << "file = " << files[i].stem().string() << '\n';
        } else {
            m << "failure = " << errors[i] << '\n';
            err << "make-dataset: " << errors[i] << '\n';
            ++failures;
        }
    }
    out << "wrote " << files.size() - failures << " pairs to " << out_dir.string() << '\n';
    if (failures) {
        err << failures << " file(s) failed\n";
        return kExitIo;
    }
    return kExitOk;
}

int cmd_train(const CommonOptions& common, const fs::path& data, const fs::path& val_dir, const fs::path& out_dir,
              std::optional<long> max_steps, bool resume, std::ostream& out)
{
    RunConfig cfg = resolve(common);
    if (max_steps) cfg.train.max_steps = *max_steps;
    if (max_steps && *max_steps == 0) cfg.train.epochs = 0;
    cfg.validate();
    const PairedDataset ds = open_paired_root(data, cfg.model.scale);
    std::optional<PairedDataset> val;
    if (!val_dir.empty()) val = open_paired_root(val_dir, cfg.model.scale);

    const auto t0 = std::chrono::steady_clock::now();
    const FitResult r = fit(ds, cfg.model, cfg.train, out_dir, resume, val ? &*val : nullptr);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.log.empty())
        out << "no steps run; checkpoint at step " << r.checkpoint.step << '\n';
    else
        out << "final loss " << format_double(r.log.back().loss) << " at step " << r.checkpoint.step << '\n';
    out << "elapsed " << secs << " s\n";
    return kExitOk;
}

int cmd_infer(const CommonOptions& common, const fs::path& ckpt_path, const fs::path& input, const fs::path& out_dir,
              int bit_depth, std::ostream& out, std::ostream& err)
{
    const Checkpoint ck = load_checkpoint(ckpt_path);
    if (common.touches_model()) {
        RunConfig cfg = resolve(common);
        check_compatible(cfg.model, ck.model);
    }
    std::vector<fs::path> inputs;
    if (fs::is_directory(input))
        inputs = list_png(input);
    else if (fs::exists(input))
        inputs.push_back(input);
    else
        throw IoError("no such input " + input.string());
    fs::create_directories(out_dir);

    int failures = 0;
    for (const fs::path& p : inputs) {
        try {
            const Image lr = load_image(p);
            if (lr.channels() != 1)
                throw ShapeError(p.filename().string() + " has " + std::to_string(lr.channels()) +
                                 " channels; inference needs grayscale");
            const Image sr = forward(lr, ck.params, ck.model);
            save_image(sr, out_dir / (lr.id + ".png"), bit_depth);
            out << p.filename().string() << " -> " << sr.dims_string() << '\n';
        } catch (const Error& e) {
            err << "infer: " << p.filename().string() << ": " << e.what() << '\n';
            ++failures;
        }
    }
    return failures ? kExitIo : kExitOk;
}

int cmd_eval(const CommonOptions& common, const fs::path& sr_dir, const fs::path& hr_dir, const fs::path& csv,
             std::optional<int> border, std::ostream& out, std::ostream& err)
{
    RunConfig cfg = resolve(common);
    const int crop = border ? *border : cfg.eval.border_crop;
    const MetricReport report = evaluate_pairs(sr_dir, hr_dir, cfg.eval.scale, crop);
    for (const std::string& f : report.failures) err << "eval: " << f << '\n';
    if (report.records.empty()) {
        err << "eval: no evaluable pairs\n";
        return kExitIo;
    }
    if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
    write_report(report, csv);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", report.mean_ssim);
    out << "AGGREGATE psnr_db=" << format_psnr(report.mean_psnr) << " ssim=" << buf << " images="
        << report.records.size() << '\n';
    return kExitOk;
}

int cmd_viz_grad(const std::vector<std::string>& images, const fs::path& out_dir, std::ostream& out)
{
    fs::create_directories(out_dir);
    // Inputs sharing a stem (e.g. hr/x.png and sr/x.png) get their parent
    // directory as a prefix.
    std::map<std::string, int> stem_count;
    for (const std::string& path : images) ++stem_count[fs::path(path).stem().string()];
    for (const std::string& path : images) {
        const Image gray = to_luminance(load_image(path));
        std::string name = gray.id;
        if (stem_count[name] > 1) name = fs::absolute(path).parent_path().filename().string() + "_" + name;
        const GradientField g = image_gradients(gray);
        const OrientationCells cells = dominant_orientations(g);
        save_image(magnitude_heatmap(g), out_dir / (name + "_gradmag.png"));
        save_image(orientation_map(cells, gray.height(), gray.width()), out_dir / (name + "_orient.png"));
        out << name << ": " << cells.rows << "x" << cells.cols << " cells\n";
    }
    return kExitOk;
}

int cmd_synth(const fs::path& out_dir, int count, int height, int width, std::uint64_t seed, std::ostream& out)
{
    if (count < 1 || height < 1 || width < 1) throw ConfigError("synth needs positive --count, --height, --width");
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "phantom_%03d", i);
        save_image(synthesize_radiograph(height, width, mix_seed(seed, static_cast<std::uint64_t>(i)), name),
                   out_dir / (std::string(name) + ".png"));
    }
    out << "wrote " << count << " phantoms to " << out_dir.string() << '\n';
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    apply_thread_cap();

    CLI::App app{"o2sr: orientation-prior super-resolution toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "o2sr 0.1.0");

    CommonOptions common;

    auto* mk = app.add_subcommand("make-dataset", "Degrade HR PNGs into a paired LR/HR dataset");
    add_common(mk, common);
    std::string mk_hr, mk_out;
    mk->add_option("--hr", mk_hr, "Directory of HR PNGs")->required();
    mk->add_option("--out", mk_out, "Output dataset root")->required();

    auto* tr = app.add_subcommand("train", "Train a model on a paired dataset");
    add_common(tr, common);
    std::string tr_data, tr_out, tr_val;
    std::optional<long> tr_steps;
    bool tr_resume = false;
    tr->add_option("--data", tr_data, "Paired dataset root (hr/, lr_x<d>/)")->required();
    tr->add_option("--out", tr_out, "Run directory for checkpoint, loss log and manifest")->required();
    tr->add_option("--val", tr_val, "Optional paired dataset root used for validation PSNR");
    tr->add_option("--max-steps", tr_steps, "Stop after this many optimizer steps");
    tr->add_flag("--resume", tr_resume, "Continue from the run directory's checkpoint");

    auto* inf = app.add_subcommand("infer", "Upscale LR images with a checkpoint");
    add_common(inf, common);
    std::string inf_ckpt, inf_in, inf_out;
    int inf_depth = 8;
    inf->add_option("--checkpoint", inf_ckpt, "Checkpoint file")->required();
    inf->add_option("--input", inf_in, "LR PNG or directory of PNGs")->required();
    inf->add_option("--out", inf_out, "Output directory")->required();
    inf->add_option("--bit-depth", inf_depth, "Output PNG depth")->check(CLI::IsMember({8, 16}));

    auto* ev = app.add_subcommand("eval", "PSNR/SSIM of SR images against HR references");
    add_common(ev, common);
    std::string ev_sr, ev_hr, ev_out;
    std::optional<int> ev_border;
    ev->add_option("--sr", ev_sr, "Directory of SR PNGs")->required();
    ev->add_option("--hr", ev_hr, "Directory of HR PNGs")->required();
    ev->add_option("--out", ev_out, "CSV report path")->required();
    ev->add_option("--border", ev_border, "Pixels cropped from each edge (default: scale)");

    auto* vg = app.add_subcommand("viz-grad", "Gradient magnitude and dominant-orientation maps");
    std::vector<std::string> vg_images;
    std::string vg_out;
    vg->add_option("images", vg_images, "Input PNGs")->required();
    vg->add_option("--out", vg_out, "Output directory")->required();

    auto* sy = app.add_subcommand("synth", "Write synthetic radiograph-like phantoms");
    std::string sy_out;
    int sy_count = 3, sy_h = 64, sy_w = 64;
    std::uint64_t sy_seed = 0;
    sy->add_option("--out", sy_out, "Output directory")->required();
    sy->add_option("--count", sy_count, "Number of images");
    sy->add_option("--height", sy_h, "Image height");
    sy->add_option("--width", sy_w, "Image width");
    sy->add_option("--seed", sy_seed, "Seed");

    std::vector<std::string> argv_store{"o2sr"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (std::string& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        if (*mk) return cmd_make_dataset(common, mk_hr, mk_out, out, err);
        if (*tr) return cmd_train(common, tr_data, tr_val, tr_out, tr_steps, tr_resume, out);
        if (*inf) return cmd_infer(common, inf_ckpt, inf_in, inf_out, inf_depth, out, err);
        if (*ev) return cmd_eval(common, ev_sr, ev_hr, ev_out, ev_border, out, err);
        if (*vg) return cmd_viz_grad(vg_images, vg_out, out);
        if (*sy) return cmd_synth(sy_out, sy_count, sy_h, sy_w, sy_seed, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParameterError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const KernelOverflowError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        err << "diverged: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const IncompatibilityError& e) {
        err << "incompatible checkpoint: " << e.what() << '\n';
        return kExitIncompatible;
    } catch (const IntegrityError& e) {
        err << "damaged checkpoint: " << e.what() << '\n';
        return kExitIncompatible;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitConfig;
}

} // namespace o2sr

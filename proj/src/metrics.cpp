#include "o2sr/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace o2sr {

double psnr(const Image& a, const Image& b, double peak)
{
    if (!a.same_dims(b)) throw ShapeError("psnr: " + a.dims_string() + " vs " + b.dims_string());
    if (!(peak > 0.0)) throw ParameterError("psnr peak must be > 0");
    double se = 0.0;
    const auto da = a.data(), db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) se += (da[i] - db[i]) * (da[i] - db[i]);
    if (se == 0.0) return kInfinitePsnr;
    const double mse = se / static_cast<double>(da.size());
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWin = 11;

std::vector<double> ssim_window()
{
    std::vector<double> g(kWin);
    double s = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kWin / 2;
        g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        s += g[i];
    }
    std::vector<double> w(kWin * kWin);
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) w[i * kWin + j] = g[i] * g[j] / (s * s);
    return w;
}

} // namespace

double ssim(const Image& a, const Image& b)
{
    if (!a.same_dims(b)) throw ShapeError("ssim: " + a.dims_string() + " vs " + b.dims_string());
    if (a.channels() != 1) throw ShapeError("ssim needs single-channel images");
    if (a.height() < kWin || a.width() < kWin)
        throw ShapeError("ssim needs at least 11x11 pixels, got " + a.dims_string());
    static const std::vector<double> w = ssim_window();
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const int oh = a.height() - kWin + 1, ow = a.width() - kWin + 1;
    std::vector<double> rows(oh);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < oh; ++y) {
        double row_sum = 0.0;
        for (int x = 0; x < ow; ++x) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double wt = w[i * kWin + j];
                    const double va = a.at(y + i, x + j), vb = b.at(y + i, x + j);
                    ma += wt * va;
                    mb += wt * vb;
                    saa += wt * (va * va);
                    sbb += wt * (vb * vb);
                    sab += wt * (va * vb);
                }
            const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
            row_sum += ((2.0 * (ma * mb) + c1) * (2.0 * cov + c2)) /
                       (((ma * ma) + (mb * mb) + c1) * (var_a + var_b + c2));
        }
        rows[y] = row_sum;
    }
    double total = 0.0;
    for (double r : rows) total += r;
    return total / (static_cast<double>(oh) * ow);
}

void aggregate(MetricReport& report)
{
    double ps = 0.0, ss = 0.0;
    int finite = 0;
    for (const MetricRecord& r : report.records) {
        if (std::isfinite(r.psnr_db)) {
            ps += r.psnr_db;
            ++finite;
        }
        ss += r.ssim;
    }
    report.mean_psnr = finite ? ps / finite : kInfinitePsnr;
    report.mean_ssim = report.records.empty() ? 0.0 : ss / static_cast<double>(report.records.size());
}

MetricReport evaluate_pairs(const std::filesystem::path& sr_dir, const std::filesystem::path& hr_dir, int scale,
                            int border_crop)
{
    MetricReport report;
    report.scale = scale;
    report.border_crop = border_crop < 0 ? scale : border_crop;

    std::map<std::string, std::filesystem::path> sr, hr;
    for (const auto& p : list_png(sr_dir)) sr[p.stem().string()] = p;
    for (const auto& p : list_png(hr_dir)) hr[p.stem().string()] = p;

    std::vector<std::string> stems;
    for (const auto& [stem, path] : hr) {
        if (sr.count(stem))
            stems.push_back(stem);
        else
            report.failures.push_back(stem + ": no SR image");
    }
    for (const auto& [stem, path] : sr)
        if (!hr.count(stem)) report.failures.push_back(stem + ": no HR image");

    std::vector<MetricRecord> records(stems.size());
    std::vector<std::string> errors(stems.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < stems.size(); ++i) {
        try {
            Image a = to_luminance(load_image(sr[stems[i]]));
            Image b = to_luminance(load_image(hr[stems[i]]));
            if (!a.same_dims(b))
                throw ContractError("SR " + a.dims_string() + " does not match HR " + b.dims_string());
            a = crop_border(a, report.border_crop);
            b = crop_border(b, report.border_crop);
            records[i] = {stems[i], psnr(a, b), ssim(a, b)};
        } catch (const Error& e) {
            errors[i] = stems[i] + ": " + e.what();
        }
    }
    for (std::size_t i = 0; i < stems.size(); ++i) {
        if (errors[i].empty())
            report.records.push_back(records[i]);
        else
            report.failures.push_back(errors[i]);
    }
    aggregate(report);
    return report;
}

std::string format_psnr(double db)
{
    if (std::isinf(db)) return db > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12f", db);
    return buf;
}

void write_report(const MetricReport& report, const std::filesystem::path& csv_path)
{
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    char buf[64];
    csv << "image_id,psnr_db,ssim\n";
    for (const MetricRecord& r : report.records) {
        std::snprintf(buf, sizeof buf, "%.12f", r.ssim);
        csv << r.image_id << ',' << format_psnr(r.psnr_db) << ',' << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "%.12f", report.mean_ssim);
    csv << "AGGREGATE," << format_psnr(report.mean_psnr) << ',' << buf << '\n';
    if (!csv) throw IoError("write failed for " + csv_path.string());

    std::filesystem::path manifest = csv_path;
    manifest += ".manifest";
    std::ofstream m(manifest);
    if (!m) throw IoError("cannot write " + manifest.string());
    m << "eval.scale = " << report.scale << '\n'
      << "eval.border_crop = " << report.border_crop << '\n'
      << "eval.channel = luminance_bt601\n"
      << "eval.ssim_window = gaussian_11_sigma_1.5\n"
      << "eval.images = " << report.records.size() << '\n'
      << "eval.failures = " << report.failures.size() << '\n';
    for (const std::string& f : report.failures) m << "failure = " << f << '\n';
}

} // namespace o2sr

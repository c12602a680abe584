#include "rlms/metrics.hpp"

#include <chrono>
#include <ostream>
#include <sstream>

#include "rlms/error.hpp"

namespace rlms {

namespace {

constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

std::vector<double> luma(const Tensor<float>& img, std::size_t& h, std::size_t& w) {
    const bool batched = img.dim() == 4;
    if (!(img.dim() == 3 || (batched && img.size(0) == 1)) || img.size(batched ? 1 : 0) != 3) {
        throw DimensionError("ssim expects one RGB image, got " + shape_str(img.shape()));
    }
    h = img.size(batched ? 2 : 1);
    w = img.size(batched ? 3 : 2);
    const std::size_t plane = h * w;
    std::vector<double> y(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        y[i] = 255.0 * (0.299 * static_cast<double>(img.at(i)) + 0.587 * static_cast<double>(img.at(plane + i)) +
                        0.114 * static_cast<double>(img.at(2 * plane + i)));
    }
    return y;
}

double monotonic_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

double ssim_window(const double* a, const double* b, std::size_t n) {
    const double inv = 1.0 / static_cast<double>(n);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma *= inv;
    mb *= inv;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    va *= inv;
    vb *= inv;
    cov *= inv;
    return ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
}

double ssim(const Tensor<float>& a, const Tensor<float>& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("ssim size mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::size_t h = 0, w = 0;
    const std::vector<double> ya = luma(a, h, w);
    const std::vector<double> yb = luma(b, h, w);
    if (h < kSsimWindow || w < kSsimWindow) {
        throw DimensionError("ssim needs images of at least 8x8, got " + shape_str(a.shape()));
    }
    constexpr std::size_t n = kSsimWindow * kSsimWindow;
    double wa[n], wb[n];
    double total = 0.0;
    std::size_t windows = 0;
    for (std::size_t y0 = 0; y0 + kSsimWindow <= h; y0 += kSsimWindow) {
        for (std::size_t x0 = 0; x0 + kSsimWindow <= w; x0 += kSsimWindow) {
            for (std::size_t y = 0; y < kSsimWindow; ++y) {
                for (std::size_t x = 0; x < kSsimWindow; ++x) {
                    wa[y * kSsimWindow + x] = ya[(y0 + y) * w + x0 + x];
                    wb[y * kSsimWindow + x] = yb[(y0 + y) * w + x0 + x];
                }
            }
            total += ssim_window(wa, wb, n);
            ++windows;
        }
    }
    return total / static_cast<double>(windows);
}

std::vector<std::size_t> default_indices(std::size_t steps) {
    std::vector<std::size_t> out;
    for (std::size_t i : {1, 5, 10}) {
        if (i <= steps) out.push_back(i);
    }
    return out;
}

EvalReport evaluate(const Agent<float>& agent, const FeatureBackbone<float>& backbone,
                    const std::vector<NamedImage>& content, const std::vector<NamedImage>& style, std::size_t steps,
                    const std::vector<std::size_t>& indices, const std::function<double()>& clock) {
    if (content.empty()) throw DataError("no content images to evaluate");
    if (style.empty()) throw DataError("no style images to evaluate");
    if (steps < 1) throw ParameterError("steps must be >= 1");
    if (indices.empty()) throw ParameterError("no sequence indices requested");
    for (std::size_t i : indices) {
        if (i < 1 || i > steps) {
            throw ParameterError("sequence index " + std::to_string(i) + " outside 1.." + std::to_string(steps));
        }
    }
    const auto now = clock ? clock : std::function<double()>(monotonic_seconds);
    EvalReport report;
    for (const auto& c : content) {
        for (const auto& s : style) {
            const double t0 = now();
            const std::vector<Tensor<float>> seq = generate_sequence(agent, c.image, s.image, steps);
            const double elapsed = now() - t0;
            NoGradGuard no_grad;
            const StyleTargets<float> targets = style_targets(backbone, s.image);
            for (std::size_t i : indices) {
                const Tensor<float>& out = seq[i - 1];
                EvalRow row;
                row.content = c.name;
                row.style = s.name;
                row.index = i;
                row.content_loss = content_loss(backbone, out, c.image).item();
                row.style_loss = style_loss(backbone, out, targets).item();
                row.ssim = ssim(c.image, out);
                row.seconds_per_image = elapsed / static_cast<double>(steps);
                report.rows.push_back(row);
            }
        }
    }
    for (std::size_t i : indices) {
        EvalSummary sum;
        sum.index = i;
        for (const auto& r : report.rows) {
            if (r.index != i) continue;
            sum.content_loss += r.content_loss;
            sum.style_loss += r.style_loss;
            sum.ssim += r.ssim;
            sum.seconds_per_image += r.seconds_per_image;
            ++sum.pairs;
        }
        const double n = static_cast<double>(sum.pairs);
        sum.content_loss /= n;
        sum.style_loss /= n;
        sum.ssim /= n;
        sum.seconds_per_image /= n;
        report.summary.push_back(sum);
    }
    ParamList<float> model = agent.actor_params();
    for (const auto& p : agent.builder_params()) model.push_back(p);
    const ParamCount pc = count_params(model);
    report.params_millions = static_cast<double>(pc.count) / 1e6;
    report.storage_mb = static_cast<double>(pc.bytes) / 1e6;
    return report;
}

void write_report(std::ostream& out, const EvalReport& report) {
    out << "# Losses come from a stand-in feature extractor; they are not comparable to published tables.\n";
    out << "content,style,index,content_loss,style_loss,ssim,seconds_per_image\n";
    out.precision(9);
    for (const auto& r : report.rows) {
        out << r.content << ',' << r.style << ',' << r.index << ',' << r.content_loss << ',' << r.style_loss << ','
            << r.ssim << ',' << r.seconds_per_image << '\n';
    }
    out << "#\n# summary (means over " << (report.summary.empty() ? 0 : report.summary.front().pairs) << " pairs)\n";
    for (const auto& s : report.summary) {
        out << "#   index " << s.index << ": content_loss " << s.content_loss << ", style_loss " << s.style_loss
            << ", ssim " << s.ssim << ", seconds/image " << s.seconds_per_image << '\n';
    }
    out << "#   params (M) " << report.params_millions << ", storage (MB) " << report.storage_mb << '\n';
}

}  // namespace rlms

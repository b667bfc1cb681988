#include "pdfnet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "pdfnet/image_io.hpp"

namespace fs = std::filesystem;

namespace pdfnet::metrics {

// MATLAB eps (2^-52); the structure-measure guards below depend on it.
static constexpr double kEps = 2.2204460492503131e-16;

double Map::sum() const {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
}

double Map::mean() const { return v.empty() ? 0.0 : sum() / static_cast<double>(v.size()); }

bool is_binary(const Map& m) {
    for (double x : m.v) {
        if (x != 0.0 && x != 1.0) return false;
    }
    return true;
}

namespace {

void check_pair(const Map& s, const Map& gt, const char* ctx) {
    if (s.h != gt.h || s.w != gt.w) {
        throw std::invalid_argument(std::string(ctx) + ": shape mismatch " + std::to_string(s.h) + "x" +
                                    std::to_string(s.w) + " vs " + std::to_string(gt.h) + "x" +
                                    std::to_string(gt.w));
    }
    if (s.v.empty()) throw std::invalid_argument(std::string(ctx) + ": empty maps");
    for (double x : s.v) {
        if (!(x >= 0.0 && x <= 1.0)) {
            throw std::invalid_argument(std::string(ctx) + ": saliency values must lie in [0,1]");
        }
    }
    if (!is_binary(gt)) throw std::invalid_argument(std::string(ctx) + ": ground truth must be binary");
}

std::size_t foreground_count(const Map& gt) {
    std::size_t n = 0;
    for (double x : gt.v) n += x == 1.0 ? 1 : 0;
    return n;
}

// ---- structure measure internals ----------------------------------------

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double object_score(const std::vector<double>& masked) {
    if (masked.empty()) return 0.0;
    double mean = 0.0;
    for (double x : masked) mean += x;
    mean /= static_cast<double>(masked.size());
    const double sigma = sample_std(masked, mean);
    return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

double s_object(const Map& s, const Map& gt) {
    std::vector<double> fg, bg;
    fg.reserve(s.size());
    bg.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (gt.v[i] == 1.0) fg.push_back(s.v[i]);
        else bg.push_back(1.0 - s.v[i]);
    }
    const double mu = gt.mean();
    return mu * object_score(fg) + (1.0 - mu) * object_score(bg);
}

struct Block {
    int y0, y1, x0, x1;  // half-open
    int count() const { return (y1 - y0) * (x1 - x0); }
};

double ssim_block(const Map& s, const Map& gt, const Block& b) {
    const int n = b.count();
    if (n == 0) return 0.0;
    double sx = 0.0, sy = 0.0;
    for (int y = b.y0; y < b.y1; ++y) {
        for (int x = b.x0; x < b.x1; ++x) {
            sx += s.at(y, x);
            sy += gt.at(y, x);
        }
    }
    const double mx = sx / n, my = sy / n;
    double vx = 0.0, vy = 0.0, cxy = 0.0;
    for (int y = b.y0; y < b.y1; ++y) {
        for (int x = b.x0; x < b.x1; ++x) {
            const double dx = s.at(y, x) - mx, dy = gt.at(y, x) - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
    }
    const double denom = static_cast<double>(n) - 1.0 + kEps;
    vx /= denom;
    vy /= denom;
    cxy /= denom;
    const double a = 4.0 * mx * my * cxy;
    const double beta = (mx * mx + my * my) * (vx + vy);
    if (a != 0.0) return a / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

// 1-based mass centroid, rounded half away from zero, clamped so all four
// blocks stay non-empty whenever the map is at least 2x2.
void gt_centroid(const Map& gt, int& cx, int& cy) {
    long long total = 0, sum_x = 0, sum_y = 0;
    for (int y = 0; y < gt.h; ++y) {
        for (int x = 0; x < gt.w; ++x) {
            if (gt.at(y, x) == 1.0) {
                ++total;
                sum_x += x + 1;
                sum_y += y + 1;
            }
        }
    }
    cx = static_cast<int>(std::llround(static_cast<double>(sum_x) / static_cast<double>(total)));
    cy = static_cast<int>(std::llround(static_cast<double>(sum_y) / static_cast<double>(total)));
    cx = std::clamp(cx, 1, std::max(1, gt.w - 1));
    cy = std::clamp(cy, 1, std::max(1, gt.h - 1));
}

double s_region(const Map& s, const Map& gt) {
    int cx = 0, cy = 0;
    gt_centroid(gt, cx, cy);
    const std::array<Block, 4> blocks{Block{0, cy, 0, cx}, Block{0, cy, cx, gt.w},
                                      Block{cy, gt.h, 0, cx}, Block{cy, gt.h, cx, gt.w}};
    const double area = static_cast<double>(gt.h) * gt.w;
    double q = 0.0;
    for (const Block& b : blocks) q += (b.count() / area) * ssim_block(s, gt, b);
    return q;
}

}  // namespace

PR precision_recall(const Map& s, const Map& gt, double t) {
    check_pair(s, gt, "precision_recall");
    if (foreground_count(gt) == 0) {
        throw std::invalid_argument("precision_recall: ground truth has no foreground pixel");
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool pred = s.v[i] >= t;
        const bool pos = gt.v[i] == 1.0;
        if (pred && pos) ++tp;
        else if (pred) ++fp;
        else if (pos) ++fn;
    }
    PR r;
    r.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return r;
}

std::vector<PRPoint> pr_curve(const Map& s, const Map& gt) {
    check_pair(s, gt, "pr_curve");
    const std::size_t npos = foreground_count(gt);
    if (npos == 0) throw std::invalid_argument("pr_curve: ground truth has no foreground pixel");

    // Bucket each pixel by the largest k with s >= k/255; the floor estimate
    // is corrected against the literal comparison so the histogram route is
    // exactly the 256 independent binarizations.
    std::array<std::size_t, 256> all{}, pos{};
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double sv = s.v[i];
        int k = std::clamp(static_cast<int>(std::floor(sv * 255.0)), 0, 255);
        while (k < 255 && sv >= static_cast<double>(k + 1) / 255.0) ++k;
        while (k > 0 && sv < static_cast<double>(k) / 255.0) --k;
        ++all[static_cast<std::size_t>(k)];
        if (gt.v[i] == 1.0) ++pos[static_cast<std::size_t>(k)];
    }
    std::vector<PRPoint> curve(256);
    std::size_t pred_pos = 0, tp = 0;
    for (int k = 255; k >= 0; --k) {
        pred_pos += all[static_cast<std::size_t>(k)];
        tp += pos[static_cast<std::size_t>(k)];
        PRPoint& pt = curve[static_cast<std::size_t>(k)];
        pt.threshold = static_cast<double>(k) / 255.0;
        pt.precision = pred_pos == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(pred_pos);
        pt.recall = static_cast<double>(tp) / static_cast<double>(npos);
    }
    return curve;
}

double f_measure(double precision, double recall, double beta2) {
    const double denom = beta2 * precision + recall;
    if (denom == 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / denom;
}

double mae(const Map& s, const Map& gt) {
    check_pair(s, gt, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += std::abs(s.v[i] - gt.v[i]);
    return acc / static_cast<double>(s.size());
}

double s_measure(const Map& s, const Map& gt, double alpha) {
    check_pair(s, gt, "s_measure");
    const double y = gt.mean();
    if (y == 0.0) return 1.0 - s.mean();
    if (y == 1.0) return s.mean();
    return alpha * s_object(s, gt) + (1.0 - alpha) * s_region(s, gt);
}

double adaptive_threshold(const Map& s) { return std::min(1.0, 2.0 * s.mean()); }

EvalReport evaluate_pairs(const std::vector<EvalPair>& pairs) {
    EvalReport report;
    std::vector<double> curve_p(256, 0.0), curve_r(256, 0.0);
    for (const EvalPair& pair : pairs) {
        check_pair(pair.pred, pair.gt, "evaluate");
        if (foreground_count(pair.gt) == 0) {
            std::cerr << "warning: skipping '" << pair.id << "': ground truth has no foreground pixel\n";
            report.skipped.push_back(pair.id);
            continue;
        }
        ImageEval row;
        row.id = pair.id;
        const PR pr = precision_recall(pair.pred, pair.gt, adaptive_threshold(pair.pred));
        row.precision = pr.precision;
        row.recall = pr.recall;
        row.f = f_measure(pr.precision, pr.recall);
        row.mae = mae(pair.pred, pair.gt);
        row.s_m = s_measure(pair.pred, pair.gt);
        report.images.push_back(row);
        const std::vector<PRPoint> curve = pr_curve(pair.pred, pair.gt);
        for (int k = 0; k < 256; ++k) {
            curve_p[static_cast<std::size_t>(k)] += curve[static_cast<std::size_t>(k)].precision;
            curve_r[static_cast<std::size_t>(k)] += curve[static_cast<std::size_t>(k)].recall;
        }
    }
    if (report.images.empty()) throw std::runtime_error("no evaluable image pairs");

    const double n = static_cast<double>(report.images.size());
    report.aggregate.id = "mean";
    for (const ImageEval& row : report.images) {
        report.aggregate.precision += row.precision / n;
        report.aggregate.recall += row.recall / n;
        report.aggregate.f += row.f / n;
        report.aggregate.mae += row.mae / n;
        report.aggregate.s_m += row.s_m / n;
    }
    report.curve.resize(256);
    for (int k = 0; k < 256; ++k) {
        PRPoint& pt = report.curve[static_cast<std::size_t>(k)];
        pt.threshold = static_cast<double>(k) / 255.0;
        pt.precision = curve_p[static_cast<std::size_t>(k)] / n;
        pt.recall = curve_r[static_cast<std::size_t>(k)] / n;
    }
    return report;
}

namespace {

std::map<std::string, fs::path> list_pngs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir + "' is not a directory");
    std::map<std::string, fs::path> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".png") stems[entry.path().stem().string()] = entry.path();
    }
    return stems;
}

Map gray_to_saliency(const img::Image8& im) {
    Map m(im.h, im.w);
    for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] = im.pixels[i] / 255.0;
    return m;
}

Map gray_to_mask(const img::Image8& im) {
    Map m(im.h, im.w);
    for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] = im.pixels[i] >= 128 ? 1.0 : 0.0;
    return m;
}

}  // namespace

EvalReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir) {
    const auto preds = list_pngs(pred_dir);
    const auto gts = list_pngs(gt_dir);
    std::vector<std::string> unmatched;
    std::vector<EvalPair> pairs;
    for (const auto& [stem, path] : preds) {
        const auto it = gts.find(stem);
        if (it == gts.end()) {
            unmatched.push_back(path.filename().string());
            continue;
        }
        EvalPair pair;
        pair.id = stem;
        pair.pred = gray_to_saliency(img::to_gray(img::read_image(path.string())));
        pair.gt = gray_to_mask(img::to_gray(img::read_image(it->second.string())));
        pairs.push_back(std::move(pair));
    }
    for (const auto& [stem, path] : gts) {
        if (!preds.count(stem)) unmatched.push_back(path.filename().string());
    }
    for (const std::string& name : unmatched) {
        std::cerr << "warning: unmatched file '" << name << "'\n";
    }
    if (pairs.empty()) throw std::runtime_error("no matching prediction/GT pairs");
    EvalReport report = evaluate_pairs(pairs);
    report.unmatched = std::move(unmatched);
    return report;
}

namespace {

nlohmann::json row_json(const ImageEval& row) {
    return {{"id", row.id},       {"precision", row.precision}, {"recall", row.recall},
            {"f_beta", row.f},    {"mae", row.mae},             {"s_measure", row.s_m}};
}

}  // namespace

void write_report_json(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["aggregate"] = row_json(report.aggregate);
    j["images"] = nlohmann::json::array();
    for (const ImageEval& row : report.images) j["images"].push_back(row_json(row));
    j["skipped"] = report.skipped;
    j["unmatched"] = report.unmatched;
    j["pr_curve"] = nlohmann::json::array();
    for (const PRPoint& pt : report.curve) {
        j["pr_curve"].push_back(
            {{"threshold", pt.threshold}, {"precision", pt.precision}, {"recall", pt.recall}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "id,precision,recall,f_beta,mae,s_measure\n";
    char line[256];
    auto emit = [&](const ImageEval& row) {
        std::snprintf(line, sizeof(line), "%s,%.9f,%.9f,%.9f,%.9f,%.9f\n", row.id.c_str(),
                      row.precision, row.recall, row.f, row.mae, row.s_m);
        out << line;
    };
    for (const ImageEval& row : report.images) emit(row);
    emit(report.aggregate);
}

void write_pr_csv(const std::vector<PRPoint>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "threshold,precision,recall\n";
    char line[128];
    for (const PRPoint& pt : curve) {
        std::snprintf(line, sizeof(line), "%.9f,%.9f,%.9f\n", pt.threshold, pt.precision, pt.recall);
        out << line;
    }
}

std::vector<PRPoint> read_pr_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    std::vector<PRPoint> curve;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty P-R CSV '" + path + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        PRPoint pt;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &pt.threshold, &pt.precision, &pt.recall) != 3) {
            throw std::runtime_error("malformed P-R CSV line: " + line);
        }
        curve.push_back(pt);
    }
    if (curve.empty()) throw std::runtime_error("P-R CSV '" + path + "' has no rows");
    return curve;
}

}  // namespace pdfnet::metrics

#pragma once

#include <string>
#include <vector>

namespace pdfnet::metrics {

// Single-channel map in double precision; saliency in [0,1], GT in {0,1}.
struct Map {
    int h = 0;
    int w = 0;
    std::vector<double> v;

    Map() = default;
    Map(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), v(static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_), fill) {}

    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
    std::size_t size() const { return v.size(); }

    double sum() const;
    double mean() const;
};

bool is_binary(const Map& m);

struct PR {
    double precision = 0.0;
    double recall = 0.0;
};

struct PRPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

// Binarizes s at s >= t. Empty prediction gives precision 1 by convention.
// Throws std::invalid_argument when gt has no foreground pixel.
PR precision_recall(const Map& s, const Map& gt, double t);

// 256 thresholds k/255, k = 0..255.
std::vector<PRPoint> pr_curve(const Map& s, const Map& gt);

// Weighted harmonic mean; beta2 is the squared beta weight. 0 when P = R = 0.
double f_measure(double precision, double recall, double beta2 = 0.3);

double mae(const Map& s, const Map& gt);

// Structure measure: alpha * S_object + (1 - alpha) * S_region, with the
// degenerate all-background / all-foreground GT conventions.
double s_measure(const Map& s, const Map& gt, double alpha = 0.5);

// min(1, 2 * mean(s)) — the binarization used for scalar precision/recall.
double adaptive_threshold(const Map& s);

struct ImageEval {
    std::string id;
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
    double mae = 0.0;
    double s_m = 0.0;
};

struct EvalReport {
    std::vector<ImageEval> images;       // filename order, skipped ids excluded
    ImageEval aggregate;                 // arithmetic means, id = "mean"
    std::vector<PRPoint> curve;          // pointwise mean over images
    std::vector<std::string> skipped;    // ids rejected for all-background GT
    std::vector<std::string> unmatched;  // filenames present on one side only
};

struct EvalPair {
    std::string id;
    Map pred;
    Map gt;
};

// Pure aggregation over in-memory pairs; logs a warning per skipped image.
EvalReport evaluate_pairs(const std::vector<EvalPair>& pairs);

// Loads same-stem 8-bit grayscale PNG pairs from two directories.
// Throws std::runtime_error when no pair matches.
EvalReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir);

void write_report_json(const EvalReport& report, const std::string& path);
void write_report_csv(const EvalReport& report, const std::string& path);
void write_pr_csv(const std::vector<PRPoint>& curve, const std::string& path);
std::vector<PRPoint> read_pr_csv(const std::string& path);

}  // namespace pdfnet::metrics

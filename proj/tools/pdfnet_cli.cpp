#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pdfnet/checkpoint.hpp"
#include "pdfnet/data.hpp"
#include "pdfnet/image_io.hpp"
#include "pdfnet/metrics.hpp"
#include "pdfnet/model.hpp"
#include "pdfnet/pr_plot.hpp"
#include "pdfnet/rng.hpp"
#include "pdfnet/train.hpp"
#include "pdfnet/util.hpp"

namespace fs = std::filesystem;
using namespace pdfnet;

namespace {

struct RunConfig {
    NetworkConfig net;
    TrainConfig train;
    std::string data_root;
    std::string train_split = "train";
    std::string eval_split = "test";
    bool synthetic = false;
    int synthetic_count = 16;
    bool augment = false;
    int augment_copies = 1;
    int checkpoint_every = 0;  // 0: only the final checkpoint
};

void apply_kv(RunConfig& rc, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key == "input_size") {
            rc.net.input_h = rc.net.input_w = static_cast<int>(util::parse_int(key, value));
        } else if (key == "variant") {
            rc.net.variant = variant_from_string(value);
        } else if (key == "fusion_width") {
            rc.net.fusion_width = static_cast<int>(util::parse_int(key, value));
        } else if (key == "backbone_widths") {
            rc.net.backbone_widths = util::parse_int5(key, value);
        } else if (key == "backbone_depths") {
            rc.net.backbone_depths = util::parse_int5(key, value);
        } else if (key == "dense_widths") {
            rc.net.dense_widths = util::parse_int5(key, value);
        } else if (key == "compress_widths") {
            rc.net.compress_widths = util::parse_int5(key, value);
        } else if (key == "batch_size") {
            rc.train.batch_size = static_cast<int>(util::parse_int(key, value));
        } else if (key == "learning_rate") {
            rc.train.learning_rate = util::parse_real(key, value);
        } else if (key == "adam_beta1") {
            rc.train.adam_beta1 = util::parse_real(key, value);
        } else if (key == "adam_beta2") {
            rc.train.adam_beta2 = util::parse_real(key, value);
        } else if (key == "adam_eps") {
            rc.train.adam_eps = util::parse_real(key, value);
        } else if (key == "max_steps") {
            rc.train.max_steps = util::parse_int(key, value);
        } else if (key == "seed") {
            rc.train.seed = static_cast<std::uint64_t>(util::parse_int(key, value));
        } else if (key == "init_weight_std") {
            rc.train.init_weight_std = util::parse_real(key, value);
        } else if (key == "init_bias") {
            rc.train.init_bias = util::parse_real(key, value);
        } else if (key == "checkpoint_every") {
            rc.checkpoint_every = static_cast<int>(util::parse_int(key, value));
        } else if (key == "augment") {
            rc.augment = util::parse_bool(key, value);
        } else if (key == "augment_copies") {
            rc.augment_copies = static_cast<int>(util::parse_int(key, value));
        } else if (key == "synthetic") {
            rc.synthetic = util::parse_bool(key, value);
        } else if (key == "synthetic_count") {
            rc.synthetic_count = static_cast<int>(util::parse_int(key, value));
        } else if (key == "data_root") {
            rc.data_root = value;
        } else if (key == "train_split") {
            rc.train_split = value;
        } else if (key == "eval_split") {
            rc.eval_split = value;
        } else {
            throw std::runtime_error("unknown config key '" + key + "'");
        }
    }
}

std::string int5_str(const std::array<int, 5>& a) {
    std::string s;
    for (int i = 0; i < 5; ++i) s += (i ? "," : "") + std::to_string(a[static_cast<std::size_t>(i)]);
    return s;
}

std::string resolved_config_text(const RunConfig& rc) {
    char buf[4096];
    std::snprintf(buf, sizeof(buf),
                  "input_size = %d\n"
                  "variant = %s\n"
                  "backbone_widths = %s\n"
                  "backbone_depths = %s\n"
                  "dense_widths = %s\n"
                  "compress_widths = %s\n"
                  "fusion_width = %d\n"
                  "batch_size = %d\n"
                  "learning_rate = %.9g\n"
                  "adam_beta1 = %.9g\n"
                  "adam_beta2 = %.9g\n"
                  "adam_eps = %.9g\n"
                  "max_steps = %lld\n"
                  "seed = %llu\n"
                  "init_weight_std = %.9g\n"
                  "init_bias = %.9g\n"
                  "checkpoint_every = %d\n"
                  "augment = %s\n"
                  "augment_copies = %d\n"
                  "synthetic = %s\n"
                  "synthetic_count = %d\n"
                  "data_root = %s\n"
                  "train_split = %s\n"
                  "eval_split = %s\n",
                  rc.net.input_h, variant_name(rc.net.variant), int5_str(rc.net.backbone_widths).c_str(),
                  int5_str(rc.net.backbone_depths).c_str(), int5_str(rc.net.dense_widths).c_str(),
                  int5_str(rc.net.compress_widths).c_str(), rc.net.fusion_width, rc.train.batch_size,
                  rc.train.learning_rate, rc.train.adam_beta1, rc.train.adam_beta2, rc.train.adam_eps,
                  static_cast<long long>(rc.train.max_steps),
                  static_cast<unsigned long long>(rc.train.seed), rc.train.init_weight_std,
                  rc.train.init_bias, rc.checkpoint_every, rc.augment ? "true" : "false",
                  rc.augment_copies, rc.synthetic ? "true" : "false", rc.synthetic_count,
                  rc.data_root.c_str(), rc.train_split.c_str(), rc.eval_split.c_str());
    return buf;
}

void ensure_out_dir(const std::string& out) {
    if (out.empty()) throw std::runtime_error("--out is required");
    fs::create_directories(out);
}

std::vector<data::Sample> load_training_samples(const RunConfig& rc) {
    std::vector<data::Sample> samples;
    if (rc.synthetic) {
        if (rc.net.input_h != rc.net.input_w) {
            throw std::runtime_error("--synthetic requires a square input size");
        }
        samples = data::make_synthetic_corpus(rc.synthetic_count, rc.net.input_h,
                                              Rng::mix(rc.train.seed, 0x73796e));
    } else {
        if (rc.data_root.empty()) {
            throw std::runtime_error("no data_root configured; pass --data or use --synthetic");
        }
        samples = data::load_dataset(rc.data_root, rc.train_split);
        for (auto& s : samples) s = data::resize_sample(s, rc.net.input_h, rc.net.input_w);
    }
    if (rc.augment) {
        data::AugmentationSpec spec;
        const std::size_t base = samples.size();
        for (int copy = 0; copy < rc.augment_copies; ++copy) {
            for (std::size_t i = 0; i < base; ++i) {
                const std::uint64_t s =
                    Rng::mix(rc.train.seed, 0x617500 + static_cast<std::uint64_t>(copy) * base + i);
                data::Sample aug = data::augment(samples[i], spec, s);
                aug.id += "~aug" + std::to_string(copy);
                samples.push_back(std::move(aug));
            }
        }
    }
    return samples;
}

metrics::Map prediction_to_map(const Tensor<float>& pred, int n) {
    metrics::Map m(pred.h(), pred.w());
    for (int y = 0; y < pred.h(); ++y) {
        for (int x = 0; x < pred.w(); ++x) {
            m.at(y, x) = std::clamp(static_cast<double>(pred.at(n, y, x, 0)), 0.0, 1.0);
        }
    }
    return m;
}

metrics::Map mask_to_map(const Tensor<float>& mask) {
    metrics::Map m(mask.h(), mask.w());
    for (int y = 0; y < mask.h(); ++y) {
        for (int x = 0; x < mask.w(); ++x) m.at(y, x) = mask.at(0, y, x, 0);
    }
    return m;
}

// Forward in batches, collecting one map per sample.
std::vector<metrics::EvalPair> predict_samples(Model<float>& model,
                                               const std::vector<data::Sample>& samples,
                                               int batch_size) {
    std::vector<metrics::EvalPair> pairs;
    for (std::size_t start = 0; start < samples.size();) {
        const std::size_t take =
            std::min(static_cast<std::size_t>(batch_size), samples.size() - start);
        const auto& first = samples[start];
        Tensor<float> images(static_cast<int>(take), first.image.h(), first.image.w(), 3);
        for (std::size_t i = 0; i < take; ++i) {
            const auto& img = samples[start + i].image;
            std::copy(img.data(), img.data() + img.size(), images.data() + i * img.size());
        }
        const Tensor<float> pred = model.forward(images);
        for (std::size_t i = 0; i < take; ++i) {
            metrics::EvalPair pair;
            pair.id = samples[start + i].id;
            pair.pred = prediction_to_map(pred, static_cast<int>(i));
            pair.gt = mask_to_map(samples[start + i].mask);
            pairs.push_back(std::move(pair));
        }
        start += take;
    }
    return pairs;
}

int cmd_train(const RunConfig& rc, const std::string& out) {
    rc.net.validate();
    rc.train.validate();
    ensure_out_dir(out);
    util::write_text_file((fs::path(out) / "resolved_config.txt").string(),
                          resolved_config_text(rc));

    const std::vector<data::Sample> samples = load_training_samples(rc);
    std::cout << "training " << variant_name(rc.net.variant) << " on " << samples.size()
              << " samples, " << rc.train.max_steps << " steps\n";

    Model<float> model(rc.net);
    init_params(model, rc.train);
    Adam<float> opt(rc.train.adam());
    data::BatchIter iter(samples, rc.train.batch_size, Rng::mix(rc.train.seed, 0x626174), true);

    std::vector<std::string> artifacts{"resolved_config.txt"};
    std::string log = "step,loss\n";
    char row[64];
    for (std::int64_t step = 1; step <= rc.train.max_steps; ++step) {
        const data::Batch batch = iter.next();
        const double loss = train_step(model, opt, batch.images, batch.masks);
        std::snprintf(row, sizeof(row), "%lld,%.9f\n", static_cast<long long>(step), loss);
        log += row;
        if (step == 1 || step % 10 == 0 || step == rc.train.max_steps) {
            std::cout << "step " << step << " loss " << loss << "\n";
        }
        if (rc.checkpoint_every > 0 && step % rc.checkpoint_every == 0 && step != rc.train.max_steps) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_step_%06lld.ckpt",
                          static_cast<long long>(step));
            save_checkpoint(model, step, rc.train.seed, (fs::path(out) / name).string());
            artifacts.emplace_back(name);
        }
    }
    util::write_text_file((fs::path(out) / "loss_log.csv").string(), log);
    artifacts.emplace_back("loss_log.csv");
    save_checkpoint(model, rc.train.max_steps, rc.train.seed,
                    (fs::path(out) / "checkpoint_final.ckpt").string());
    artifacts.emplace_back("checkpoint_final.ckpt");
    util::write_manifest(out, artifacts);
    std::cout << "wrote " << (fs::path(out) / "checkpoint_final.ckpt").string() << "\n";
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& input_dir, const std::string& out) {
    ensure_out_dir(out);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model<float> model(ckpt.config);
    apply_checkpoint(ckpt, model);
    util::write_text_file((fs::path(out) / "resolved_config.txt").string(),
                          "checkpoint = " + ckpt_path + "\ninput = " + input_dir + "\nvariant = " +
                              variant_name(ckpt.config.variant) + "\ninput_size = " +
                              std::to_string(ckpt.config.input_h) + "\n");

    if (!fs::is_directory(input_dir)) {
        throw std::runtime_error("'" + input_dir + "' is not a directory");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no images found in '" + input_dir + "'");

    std::vector<std::string> artifacts{"resolved_config.txt"};
    int written = 0;
    for (const fs::path& file : files) {
        img::Image8 raw;
        try {
            raw = img::read_image(file.string());
        } catch (const std::exception& e) {
            std::cerr << "warning: skipping '" << file.filename().string() << "': " << e.what() << "\n";
            continue;
        }
        const img::Image8 rgb = img::to_rgb(raw);
        Tensor<float> t(1, rgb.h, rgb.w, 3);
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rgb.pixels[i] / 255.0f;
        t = data::resize_image_bilinear(t, ckpt.config.input_h, ckpt.config.input_w);
        const Tensor<float> pred = model.forward(t);

        img::Image8 outim;
        outim.h = pred.h();
        outim.w = pred.w();
        outim.channels = 1;
        outim.pixels.resize(static_cast<std::size_t>(pred.h()) * pred.w());
        for (std::size_t i = 0; i < outim.pixels.size(); ++i) {
            outim.pixels[i] = static_cast<std::uint8_t>(
                std::floor(std::clamp(pred.data()[i], 0.0f, 1.0f) * 255.0f + 0.5f));
        }
        const std::string name = file.stem().string() + ".png";
        img::write_png((fs::path(out) / name).string(), outim);
        artifacts.push_back(name);
        ++written;
    }
    if (written == 0) throw std::runtime_error("no input image could be read");
    util::write_manifest(out, artifacts);
    std::cout << "wrote " << written << " saliency maps to " << out << "\n";
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out) {
    ensure_out_dir(out);
    util::write_text_file((fs::path(out) / "resolved_config.txt").string(),
                          "pred = " + pred_dir + "\ngt = " + gt_dir + "\n");
    const metrics::EvalReport report = metrics::evaluate_dataset(pred_dir, gt_dir);
    metrics::write_report_json(report, (fs::path(out) / "eval_report.json").string());
    metrics::write_report_csv(report, (fs::path(out) / "eval_report.csv").string());
    metrics::write_pr_csv(report.curve, (fs::path(out) / "pr_curve.csv").string());
    metrics::render_pr_plot(report.curve, (fs::path(out) / "pr_curve.png").string());
    util::write_manifest(out, {"resolved_config.txt", "eval_report.json", "eval_report.csv",
                               "pr_curve.csv", "pr_curve.png"});
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%zu images  precision %.4f  recall %.4f  F_beta %.4f  MAE %.4f  S_m %.4f\n",
                  report.images.size(), report.aggregate.precision, report.aggregate.recall,
                  report.aggregate.f, report.aggregate.mae, report.aggregate.s_m);
    std::cout << line;
    return 0;
}

int cmd_ablate(const RunConfig& rc, const std::string& out) {
    rc.net.validate();
    rc.train.validate();
    ensure_out_dir(out);
    util::write_text_file((fs::path(out) / "resolved_config.txt").string(),
                          resolved_config_text(rc));

    const std::vector<data::Sample> train_samples = load_training_samples(rc);
    std::vector<data::Sample> eval_samples;
    if (rc.synthetic) {
        eval_samples = train_samples;
    } else {
        eval_samples = data::load_dataset(rc.data_root, rc.eval_split);
        for (auto& s : eval_samples) s = data::resize_sample(s, rc.net.input_h, rc.net.input_w);
    }

    struct Row {
        std::string variant;
        std::size_t params;
        double f, mae, s_m;
    };
    std::vector<Row> rows;
    for (Variant v : all_variants()) {
        RunConfig vc = rc;
        vc.net.variant = v;
        std::cout << "ablate: training " << variant_name(v) << "\n";
        Model<float> model(vc.net);
        init_params(model, vc.train);
        Adam<float> opt(vc.train.adam());
        data::BatchIter iter(train_samples, vc.train.batch_size, Rng::mix(vc.train.seed, 0x626174),
                             true);
        for (std::int64_t step = 1; step <= vc.train.max_steps; ++step) {
            const data::Batch batch = iter.next();
            train_step(model, opt, batch.images, batch.masks);
        }
        const metrics::EvalReport report =
            metrics::evaluate_pairs(predict_samples(model, eval_samples, vc.train.batch_size));
        rows.push_back(Row{variant_name(v), model.count_parameters(), report.aggregate.f,
                           report.aggregate.mae, report.aggregate.s_m});
    }

    std::string csv = "variant,params,F_beta,MAE,S_m\n";
    std::string table = "variant  params      F_beta   MAE      S_m\n";
    char buf[160];
    for (const Row& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f\n", row.variant.c_str(), row.params,
                      row.f, row.mae, row.s_m);
        csv += buf;
        std::snprintf(buf, sizeof(buf), "%-8s %-11zu %-8.4f %-8.4f %-8.4f\n", row.variant.c_str(),
                      row.params, row.f, row.mae, row.s_m);
        table += buf;
    }
    util::write_text_file((fs::path(out) / "ablation.csv").string(), csv);
    util::write_text_file((fs::path(out) / "ablation.txt").string(), table);
    util::write_manifest(out, {"resolved_config.txt", "ablation.csv", "ablation.txt"});
    std::cout << table;
    return 0;
}

int cmd_plot_pr(const std::string& curve_path, const std::string& out) {
    ensure_out_dir(out);
    const std::vector<metrics::PRPoint> curve = metrics::read_pr_csv(curve_path);
    metrics::render_pr_plot(curve, (fs::path(out) / "pr_curve.png").string());
    util::write_manifest(out, {"pr_curve.png"});
    std::cout << "wrote " << (fs::path(out) / "pr_curve.png").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PDF-Net: salient object detection for optical remote sensing images"};
    app.require_subcommand(1);

    std::string config_path, out_dir, variant, data_root, checkpoint, input_dir, pred_dir, gt_dir,
        curve_path;
    long long seed = 0, steps = 0;
    int size = 0, batch = 0, checkpoint_every = 0;
    double lr = 0.0;
    bool synthetic = false;

    auto add_common = [&](CLI::App* sub, bool with_train_opts) {
        sub->add_option("--config", config_path, "key = value config file");
        sub->add_option("--seed", seed, "RNG seed");
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--variant", variant, "FULL, NO_DC, ONE_DC, NO_CPC or NO_DUS");
        sub->add_flag("--synthetic", synthetic, "train on the generated synthetic corpus");
        sub->add_option("--steps", steps, "number of training steps");
        sub->add_option("--size", size, "square input size (divisible by 16)");
        if (with_train_opts) {
            sub->add_option("--data", data_root, "dataset root directory");
            sub->add_option("--batch", batch, "batch size");
            sub->add_option("--lr", lr, "learning rate");
            sub->add_option("--checkpoint-every", checkpoint_every, "checkpoint interval in steps");
        }
    };

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train, true);

    CLI::App* predict = app.add_subcommand("predict", "write saliency maps for a directory of images");
    predict->add_option("--checkpoint", checkpoint, "checkpoint archive")->required();
    predict->add_option("--input", input_dir, "directory of input images")->required();
    predict->add_option("--out", out_dir, "output directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "score predictions against ground truth");
    eval->add_option("--pred", pred_dir, "directory of predicted maps")->required();
    eval->add_option("--gt", gt_dir, "directory of ground-truth masks")->required();
    eval->add_option("--out", out_dir, "output directory")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "train and score all five variants");
    add_common(ablate, true);

    CLI::App* plot = app.add_subcommand("plot-pr", "render a P-R curve CSV as a PNG");
    plot->add_option("--curve", curve_path, "pr_curve.csv produced by eval")->required();
    plot->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (sub == predict) return cmd_predict(checkpoint, input_dir, out_dir);
        if (sub == eval) return cmd_eval(pred_dir, gt_dir, out_dir);
        if (sub == plot) return cmd_plot_pr(curve_path, out_dir);

        RunConfig rc;
        if (!config_path.empty()) apply_kv(rc, util::parse_config_file(config_path));
        if (sub->count("--seed")) rc.train.seed = static_cast<std::uint64_t>(seed);
        if (sub->count("--steps")) rc.train.max_steps = steps;
        if (sub->count("--size")) rc.net.input_h = rc.net.input_w = size;
        if (sub->count("--variant")) rc.net.variant = variant_from_string(variant);
        if (sub->count("--synthetic")) rc.synthetic = true;
        if (sub->count("--data")) rc.data_root = data_root;
        if (sub->count("--batch")) rc.train.batch_size = batch;
        if (sub->count("--lr")) rc.train.learning_rate = lr;
        if (sub->count("--checkpoint-every")) rc.checkpoint_every = checkpoint_every;
        return sub == train ? cmd_train(rc, out_dir) : cmd_ablate(rc, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

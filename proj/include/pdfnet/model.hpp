#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdfnet/graph.hpp"
#include "pdfnet/ops.hpp"
#include "pdfnet/tensor.hpp"

namespace pdfnet {

inline constexpr int kInputChannels = 3;
inline constexpr int kNumPaths = 5;

enum class Variant { FULL, NO_DC, ONE_DC, NO_CPC, NO_DUS };

const char* variant_name(Variant v);
Variant variant_from_string(const std::string& s);
const std::array<Variant, 5>& all_variants();

struct NetworkConfig {
    int input_h = 128;
    int input_w = 128;
    std::array<int, 5> backbone_widths{64, 128, 256, 512, 512};
    std::array<int, 5> backbone_depths{2, 2, 3, 3, 3};
    std::array<int, 5> dense_widths{64, 128, 256, 512, 512};
    std::array<int, 5> compress_widths{64, 128, 256, 512, 512};
    int fusion_width = 512;
    Variant variant = Variant::FULL;

    void validate() const;  // throws std::invalid_argument
    bool operator==(const NetworkConfig&) const = default;
};

// Static description of one built network: an ordered node list plus the
// parameter shapes, with shape/resolution bookkeeping checked up front.
class GraphPlan {
public:
    static GraphPlan build(const NetworkConfig& cfg);

    const NetworkConfig& config() const { return cfg_; }
    const std::vector<NodeSpec>& nodes() const { return nodes_; }
    const std::vector<ParamShape>& param_shapes() const { return param_shapes_; }
    int output_node() const { return output_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : param_shapes_) n += p.count();
        return n;
    }

private:
    NetworkConfig cfg_;
    std::vector<NodeSpec> nodes_;
    std::vector<ParamShape> param_shapes_;
    int output_ = -1;

    friend class GraphBuilder;
};

// Executable network. T is float in production; double exists for the
// finite-difference gradient verification.
template <typename T>
class Model {
public:
    explicit Model(const NetworkConfig& cfg) : plan_(GraphPlan::build(cfg)) {
        for (const auto& shape : plan_.param_shapes()) {
            Tensor<T> value = shape.rank == 1
                                  ? Tensor<T>(shape.dims[0])
                                  : Tensor<T>(shape.dims[0], shape.dims[1], shape.dims[2], shape.dims[3]);
            value.fill(T(0));
            params_.add(shape.name, std::move(value));
        }
    }

    const GraphPlan& plan() const { return plan_; }
    const NetworkConfig& config() const { return plan_.config(); }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }

    std::size_t count_parameters() const { return params_.scalar_count(); }

    // Inference forward; activations of consumed nodes are dropped eagerly.
    Tensor<T> forward(const Tensor<T>& x) const { return run_forward(x, nullptr); }

    // Training forward: retains every node activation for the backward pass.
    Tensor<T> forward(const Tensor<T>& x, std::vector<Tensor<T>>& acts) const {
        return run_forward(x, &acts);
    }

    // Accumulates parameter gradients; call params().zero_grads() beforehand
    // unless accumulation across calls is intended.
    void backward(const std::vector<Tensor<T>>& acts, const Tensor<T>& d_out) {
        const auto& nodes = plan_.nodes();
        std::vector<Tensor<T>> grads(nodes.size());
        grads[static_cast<std::size_t>(plan_.output_node())] = d_out;

        auto accum = [&](int node, Tensor<T>&& g) {
            Tensor<T>& slot = grads[static_cast<std::size_t>(node)];
            if (slot.empty()) slot = std::move(g);
            else slot.add_inplace(g);
        };
        auto grad_buffer = [&](int node) -> Tensor<T>& {
            Tensor<T>& slot = grads[static_cast<std::size_t>(node)];
            if (slot.empty()) slot = Tensor<T>::zeros_like(acts[static_cast<std::size_t>(node)]);
            return slot;
        };

        for (int i = static_cast<int>(nodes.size()) - 1; i > 0; --i) {
            Tensor<T>& dy = grads[static_cast<std::size_t>(i)];
            if (dy.empty()) continue;
            const NodeSpec& node = nodes[static_cast<std::size_t>(i)];
            const int in0 = node.inputs.empty() ? -1 : node.inputs[0];
            switch (node.kind) {
                case NodeKind::Conv: {
                    const bool need_dx = in0 != 0;
                    auto g = ops::conv3x3_backward(acts[static_cast<std::size_t>(in0)],
                                                   params_.at(node.weight).value,
                                                   acts[static_cast<std::size_t>(i)], dy, node.act, need_dx);
                    params_.at(node.weight).grad.add_inplace(g.dkernel);
                    params_.at(node.bias).grad.add_inplace(g.dbias);
                    if (need_dx) accum(in0, std::move(g.dx));
                    break;
                }
                case NodeKind::Pool:
                    accum(in0, ops::maxpool2_backward(acts[static_cast<std::size_t>(in0)], dy));
                    break;
                case NodeKind::Upsample: {
                    const Tensor<T>& src = acts[static_cast<std::size_t>(in0)];
                    accum(in0, ops::upsample_bilinear_backward(src.h(), src.w(), dy, node.factor));
                    break;
                }
                case NodeKind::Concat: {
                    std::vector<Tensor<T>*> pieces;
                    pieces.reserve(node.inputs.size());
                    for (int in : node.inputs) pieces.push_back(&grad_buffer(in));
                    ops::concat_channels_backward(dy, pieces);
                    break;
                }
                case NodeKind::Input:
                    break;
            }
            dy = Tensor<T>();
        }
    }

private:
    GraphPlan plan_;
    ParamStore<T> params_;

    Tensor<T> run_forward(const Tensor<T>& x, std::vector<Tensor<T>>* keep) const {
        if (x.rank() != 4 || x.c() != kInputChannels) {
            throw std::invalid_argument("model input must be NxHxWx3, got " + x.shape_str());
        }
        if (x.h() % 16 != 0 || x.w() % 16 != 0) {
            throw std::invalid_argument("model input spatial size must be divisible by 16, got " +
                                        x.shape_str());
        }

        const auto& nodes = plan_.nodes();
        std::vector<Tensor<T>> local;
        std::vector<Tensor<T>>& acts = keep ? *keep : local;
        acts.assign(nodes.size(), Tensor<T>());
        acts[0] = x;

        // For the inference path, drop each activation after its last use.
        std::vector<int> last_use(nodes.size(), -1);
        if (!keep) {
            for (std::size_t i = 1; i < nodes.size(); ++i) {
                for (int in : nodes[i].inputs) last_use[static_cast<std::size_t>(in)] = static_cast<int>(i);
            }
        }

        for (std::size_t i = 1; i < nodes.size(); ++i) {
            const NodeSpec& node = nodes[i];
            const Tensor<T>& in0 = acts[static_cast<std::size_t>(node.inputs[0])];
            switch (node.kind) {
                case NodeKind::Conv:
                    acts[i] = ops::conv3x3_forward(in0, params_.at(node.weight).value,
                                                   &params_.at(node.bias).value, node.act);
                    break;
                case NodeKind::Pool:
                    acts[i] = ops::maxpool2_forward(in0);
                    break;
                case NodeKind::Upsample:
                    acts[i] = ops::upsample_bilinear_forward(in0, node.factor);
                    break;
                case NodeKind::Concat: {
                    std::vector<const Tensor<T>*> xs;
                    xs.reserve(node.inputs.size());
                    for (int in : node.inputs) xs.push_back(&acts[static_cast<std::size_t>(in)]);
                    acts[i] = ops::concat_channels(xs);
                    break;
                }
                case NodeKind::Input:
                    throw std::logic_error("unexpected input node");
            }
            ops::check_finite(acts[i], node.name);
            if (!keep) {
                for (std::size_t j = 1; j < i; ++j) {
                    if (last_use[j] == static_cast<int>(i)) acts[j] = Tensor<T>();
                }
            }
        }
        return acts[static_cast<std::size_t>(plan_.output_node())];
    }
};

}  // namespace pdfnet

#include "pdfnet/model.hpp"

#include <stdexcept>
#include <string>

namespace pdfnet {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::FULL: return "FULL";
        case Variant::NO_DC: return "NO_DC";
        case Variant::ONE_DC: return "ONE_DC";
        case Variant::NO_CPC: return "NO_CPC";
        case Variant::NO_DUS: return "NO_DUS";
    }
    return "?";
}

const std::array<Variant, 5>& all_variants() {
    static const std::array<Variant, 5> v{Variant::FULL, Variant::NO_DC, Variant::ONE_DC,
                                          Variant::NO_CPC, Variant::NO_DUS};
    return v;
}

Variant variant_from_string(const std::string& s) {
    for (Variant v : all_variants()) {
        if (s == variant_name(v)) return v;
    }
    throw std::invalid_argument("unknown variant '" + s +
                                "' (expected FULL, NO_DC, ONE_DC, NO_CPC or NO_DUS)");
}

void NetworkConfig::validate() const {
    auto positive5 = [](const std::array<int, 5>& a, const char* what) {
        for (int v : a) {
            if (v < 1) throw std::invalid_argument(std::string(what) + " entries must be >= 1");
        }
    };
    if (input_h < 16 || input_w < 16 || input_h % 16 != 0 || input_w % 16 != 0) {
        throw std::invalid_argument("input size must be divisible by 16, got " + std::to_string(input_h) +
                                    "x" + std::to_string(input_w));
    }
    positive5(backbone_widths, "backbone_widths");
    positive5(backbone_depths, "backbone_depths");
    positive5(dense_widths, "dense_widths");
    positive5(compress_widths, "compress_widths");
    if (fusion_width < 1) throw std::invalid_argument("fusion_width must be >= 1");
}

// Assembles the node list; every structural invariant (acyclic feed-forward
// order, concat channel sums, the resolution ladder, pool divisibility) is
// checked while the plan is built.
class GraphBuilder {
public:
    explicit GraphBuilder(const NetworkConfig& cfg) {
        cfg.validate();
        plan_.cfg_ = cfg;
        NodeSpec input;
        input.kind = NodeKind::Input;
        input.name = "input";
        input.out_channels = kInputChannels;
        input.divisor = 1;
        plan_.nodes_.push_back(std::move(input));
    }

    GraphPlan build() {
        const NetworkConfig& cfg = plan_.cfg_;
        const Variant v = cfg.variant;

        int cur = 0;
        std::array<int, 5> taps{};
        for (int s = 0; s < 5; ++s) {
            const std::string stage = "backbone.s" + std::to_string(s + 1);
            for (int d = 0; d < cfg.backbone_depths[static_cast<std::size_t>(s)]; ++d) {
                cur = add_conv(stage + ".conv" + std::to_string(d + 1), cur,
                               cfg.backbone_widths[static_cast<std::size_t>(s)], Act::Relu);
            }
            taps[static_cast<std::size_t>(s)] = cur;
            require(divisor(cur) == 1 << s, stage + " tap at wrong resolution");
            if (s < 4) cur = add_pool("backbone.pool" + std::to_string(s + 1), cur);
        }

        const bool dense1 = v == Variant::FULL || v == Variant::NO_CPC || v == Variant::NO_DUS;
        const bool dense2 = v != Variant::NO_DC;
        int cross = -1;
        std::vector<int> path_outs;
        for (int k = 0; k < kNumPaths; ++k) {
            const std::string pfx = "path" + std::to_string(k + 1);
            const int w = cfg.dense_widths[static_cast<std::size_t>(k)];
            const int m = cfg.compress_widths[static_cast<std::size_t>(k)];

            int entry = taps[static_cast<std::size_t>(k)];
            if (v == Variant::NO_DUS && k > 0) entry = add_upsample(pfx + ".tap_up", entry, 1 << k);
            require(divisor(entry) == (v == Variant::NO_DUS ? 1 : 1 << k),
                    pfx + " entry at wrong resolution");

            const int a1 = add_conv(pfx + ".unit1.conv1", entry, w, Act::Relu);
            const int a2 = add_conv(pfx + ".unit1.conv2", a1, w, Act::Relu);
            const int a3 = add_conv(pfx + ".unit1.conv3", a2, w, Act::Relu);
            std::vector<int> cat1_in = dense1 ? std::vector<int>{a1, a2, a3} : std::vector<int>{a3};
            if (v != Variant::NO_CPC && k > 0) cat1_in.push_back(cross);
            const int cat1 = cat1_in.size() > 1 ? add_concat(pfx + ".cat1", cat1_in) : cat1_in[0];
            const int comp1 = add_conv(pfx + ".comp1", cat1, m, Act::Relu);

            if (v != Variant::NO_CPC && k + 1 < kNumPaths) {
                cross = v == Variant::NO_DUS ? comp1 : add_pool(pfx + ".cross_pool", comp1);
            }

            const int b1 = add_conv(pfx + ".unit2.conv1", comp1, w, Act::Relu);
            const int b2 = add_conv(pfx + ".unit2.conv2", b1, w, Act::Relu);
            const int b3 = add_conv(pfx + ".unit2.conv3", b2, w, Act::Relu);
            const int cat2 = dense2 ? add_concat(pfx + ".cat2", {b1, b2, b3}) : b3;
            const int comp2 = add_conv(pfx + ".comp2", cat2, m, Act::Relu);

            int out = comp2;
            if (v != Variant::NO_DUS && k > 0) out = add_upsample(pfx + ".up", comp2, 1 << k);
            require(divisor(out) == 1, pfx + " output must reach input resolution");
            path_outs.push_back(out);
        }

        const int fcat = add_concat("fusion.cat", path_outs);
        const int m1 = add_conv("head.conv1", fcat, cfg.fusion_width, Act::Relu);
        const int m2 = add_conv("head.conv2", m1, cfg.fusion_width, Act::Relu);
        plan_.output_ = add_conv("head.conv3", m2, 1, Act::Sigmoid);
        return std::move(plan_);
    }

private:
    GraphPlan plan_;

    static void require(bool ok, const std::string& msg) {
        if (!ok) throw std::logic_error("graph construction: " + msg);
    }

    int channels(int node) const { return plan_.nodes_[static_cast<std::size_t>(node)].out_channels; }
    int divisor(int node) const { return plan_.nodes_[static_cast<std::size_t>(node)].divisor; }

    int add_node(NodeSpec n) {
        const int id = static_cast<int>(plan_.nodes_.size());
        require(!n.inputs.empty(), n.name + " has no inputs");
        for (int in : n.inputs) require(in >= 0 && in < id, n.name + " input out of order");
        plan_.nodes_.push_back(std::move(n));
        return id;
    }

    int add_conv(const std::string& name, int input, int out_c, Act act) {
        const int in_c = channels(input);
        NodeSpec n;
        n.kind = NodeKind::Conv;
        n.name = name;
        n.inputs = {input};
        n.out_channels = out_c;
        n.divisor = divisor(input);
        n.act = act;
        n.weight = add_param(name + ".weight", 4, {3, 3, in_c, out_c});
        n.bias = add_param(name + ".bias", 1, {out_c, 1, 1, 1});
        return add_node(std::move(n));
    }

    int add_pool(const std::string& name, int input) {
        require(plan_.cfg_.input_h % (2 * divisor(input)) == 0 &&
                    plan_.cfg_.input_w % (2 * divisor(input)) == 0,
                name + " would pool an odd spatial size");
        NodeSpec n;
        n.kind = NodeKind::Pool;
        n.name = name;
        n.inputs = {input};
        n.out_channels = channels(input);
        n.divisor = divisor(input) * 2;
        return add_node(std::move(n));
    }

    int add_upsample(const std::string& name, int input, int factor) {
        require(factor >= 1 && factor <= 16 && (factor & (factor - 1)) == 0, name + " bad factor");
        require(divisor(input) % factor == 0, name + " factor exceeds divisor");
        NodeSpec n;
        n.kind = NodeKind::Upsample;
        n.name = name;
        n.inputs = {input};
        n.out_channels = channels(input);
        n.divisor = divisor(input) / factor;
        n.factor = factor;
        return add_node(std::move(n));
    }

    int add_concat(const std::string& name, const std::vector<int>& inputs) {
        require(inputs.size() >= 2, name + " needs at least two inputs");
        NodeSpec n;
        n.kind = NodeKind::Concat;
        n.name = name;
        n.inputs = inputs;
        n.divisor = divisor(inputs[0]);
        int total = 0;
        for (int in : inputs) {
            require(divisor(in) == n.divisor, name + " concat inputs at different resolutions");
            total += channels(in);
        }
        n.out_channels = total;
        return add_node(std::move(n));
    }

    int add_param(const std::string& name, int rank, std::array<int, 4> dims) {
        const int id = static_cast<int>(plan_.param_shapes_.size());
        plan_.param_shapes_.push_back(ParamShape{name, rank, dims});
        return id;
    }
};

GraphPlan GraphPlan::build(const NetworkConfig& cfg) { return GraphBuilder(cfg).build(); }

}  // namespace pdfnet

#include <set>

#include "doctest.h"
#include "pdfnet/model.hpp"
#include "pdfnet/rng.hpp"

using namespace pdfnet;

namespace {

NetworkConfig tiny_config(Variant v = Variant::FULL) {
    NetworkConfig c;
    c.input_h = c.input_w = 32;
    c.backbone_widths = {2, 2, 2, 2, 2};
    c.backbone_depths = {2, 2, 3, 3, 3};
    c.dense_widths = {2, 2, 2, 2, 2};
    c.compress_widths = {2, 2, 2, 2, 2};
    c.fusion_width = 4;
    c.variant = v;
    return c;
}

Tensor<float> random_input(int n, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor<float> x(n, h, w, 3);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.uniform());
    return x;
}

void randomize(Model<float>& m, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& p : m.params()) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            p.value.data()[i] = static_cast<float>(rng.uniform(-0.05, 0.05));
        }
    }
}

}  // namespace

TEST_CASE("parameter counts at the default configuration are frozen") {
    // FULL and NO_DC were derived by hand layer by layer; the others follow
    // from the same per-layer table. Any drift here is an architecture change.
    const std::pair<Variant, std::size_t> expected[] = {
        {Variant::FULL, 93694785ull},   {Variant::NO_DC, 71723841ull},
        {Variant::ONE_DC, 82709313ull}, {Variant::NO_CPC, 89787201ull},
        {Variant::NO_DUS, 93694785ull},
    };
    for (const auto& [v, want] : expected) {
        NetworkConfig c;
        c.variant = v;
        CHECK(GraphPlan::build(c).parameter_count() == want);
    }
}

TEST_CASE("parameter count of a hand-derived small configuration") {
    // All widths 2, depths (2,2,3,3,3), fusion 4. A 2->2 conv is 38 params.
    //   stage1: 3->2 then 2->2            = 56 + 38
    //   stage2: two 2->2                  = 76
    //   stages3-5: three 2->2 each        = 3 * 114
    //   path1: 6 convs 2->2 + comp1(6ch) + comp2(6ch) = 6*38 + 110 + 110
    //   paths2-5: cross adds 2ch to cat1  = 6*38 + 146 + 110 each
    //   head: 10ch -> 4 -> 4 -> 1         = 364 + 148 + 37
    const std::size_t backbone = 56 + 38 + 76 + 3 * 114;
    const std::size_t paths = (6 * 38 + 110 + 110) + 4 * (6 * 38 + 146 + 110);
    const std::size_t head = 364 + 148 + 37;
    CHECK(backbone + paths + head == 3445);
    CHECK(GraphPlan::build(tiny_config()).parameter_count() == 3445);
    Model<float> m(tiny_config());
    CHECK(m.count_parameters() == 3445);
}

TEST_CASE("variant parameter ordering") {
    auto count = [](Variant v) {
        NetworkConfig c;
        c.variant = v;
        return GraphPlan::build(c).parameter_count();
    };
    CHECK(count(Variant::NO_DC) < count(Variant::ONE_DC));
    CHECK(count(Variant::ONE_DC) < count(Variant::FULL));
    CHECK(count(Variant::NO_CPC) < count(Variant::FULL));
    CHECK(count(Variant::NO_DUS) == count(Variant::FULL));
}

TEST_CASE("well-known parameter shapes at the default configuration") {
    Model<float> m{NetworkConfig{}};
    // fusion input: concatenated compressed outputs, 64+128+256+512+512 = 1472
    const auto& w1 = m.params().at("head.conv1.weight").value;
    CHECK(w1.dim(0) == 3);
    CHECK(w1.dim(1) == 3);
    CHECK(w1.dim(2) == 1472);
    CHECK(w1.dim(3) == 512);
    const auto& w3 = m.params().at("head.conv3.weight").value;
    CHECK(w3.dim(2) == 512);
    CHECK(w3.dim(3) == 1);
    CHECK(m.params().at("head.conv3.bias").value.size() == 1);
    // first backbone conv reads the RGB input
    CHECK(m.params().at("backbone.s1.conv1.weight").value.dim(2) == 3);
    // path 4 works on the 512-channel stage-4 tap
    CHECK(m.params().at("path4.unit1.conv1.weight").value.dim(2) == 512);
    CHECK(m.params().at("path3.unit1.conv1.weight").value.dim(2) == 256);
}

TEST_CASE("every variant produces a full-resolution sigmoid map") {
    for (Variant v : all_variants()) {
        Model<float> m(tiny_config(v));
        randomize(m, 7);
        const auto x = random_input(2, 32, 32, 9);
        const auto y = m.forward(x);
        CHECK(y.n() == 2);
        CHECK(y.h() == 32);
        CHECK(y.w() == 32);
        CHECK(y.c() == 1);
        for (std::size_t i = 0; i < y.size(); ++i) {
            CHECK(y.data()[i] > 0.0f);
            CHECK(y.data()[i] < 1.0f);
        }
    }
}

TEST_CASE("forward accepts any input size divisible by 16") {
    Model<float> m(tiny_config());
    randomize(m, 3);
    for (int hw : {16, 48, 64}) {
        const auto y = m.forward(random_input(1, hw, hw, 5));
        CHECK(y.h() == hw);
        CHECK(y.w() == hw);
    }
    // non-square works too
    const auto y = m.forward(random_input(1, 32, 64, 5));
    CHECK(y.h() == 32);
    CHECK(y.w() == 64);
    CHECK_THROWS_AS(m.forward(random_input(1, 40, 40, 5)), std::invalid_argument);
    CHECK_THROWS_AS(m.forward(Tensor<float>(1, 32, 32, 1)), std::invalid_argument);
}

TEST_CASE("forward is deterministic") {
    Model<float> a(tiny_config()), b(tiny_config());
    randomize(a, 21);
    randomize(b, 21);
    const auto x = random_input(1, 32, 32, 4);
    const auto ya = a.forward(x);
    const auto yb = b.forward(x);
    for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya.data()[i] == yb.data()[i]);
}

TEST_CASE("inference and training forwards agree") {
    Model<float> m(tiny_config(Variant::NO_DUS));
    randomize(m, 13);
    const auto x = random_input(1, 32, 32, 2);
    std::vector<Tensor<float>> acts;
    const auto y_train = m.forward(x, acts);
    const auto y_infer = m.forward(x);
    CHECK(acts.size() == m.plan().nodes().size());
    for (std::size_t i = 0; i < y_train.size(); ++i) {
        CHECK(y_train.data()[i] == y_infer.data()[i]);
    }
}

TEST_CASE("graph plans respect the structural invariants") {
    for (Variant v : all_variants()) {
        const GraphPlan plan = GraphPlan::build(tiny_config(v));
        const auto& nodes = plan.nodes();
        REQUIRE(!nodes.empty());
        CHECK(nodes[0].kind == NodeKind::Input);
        // feed-forward: inputs always reference earlier nodes
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            for (int in : nodes[i].inputs) {
                CHECK(in >= 0);
                CHECK(in < static_cast<int>(i));
            }
        }
        const NodeSpec& out = nodes[static_cast<std::size_t>(plan.output_node())];
        CHECK(out.out_channels == 1);
        CHECK(out.divisor == 1);
        CHECK(out.act == Act::Sigmoid);
        // unique node and parameter names
        std::set<std::string> names;
        for (const auto& n : nodes) CHECK(names.insert(n.name).second);
        std::set<std::string> pnames;
        for (const auto& p : plan.param_shapes()) CHECK(pnames.insert(p.name).second);
    }
}

TEST_CASE("variant wiring shows up in the node list") {
    auto node_names = [](Variant v) {
        const GraphPlan plan = GraphPlan::build(tiny_config(v));
        std::set<std::string> names;
        for (const auto& n : plan.nodes()) names.insert(n.name);
        return names;
    };
    const auto full = node_names(Variant::FULL);
    CHECK(full.count("path1.cross_pool") == 1);  // hands off to path2
    CHECK(full.count("path5.cross_pool") == 0);  // nothing after the last path
    CHECK(full.count("path1.up") == 0);          // path1 is already full-res
    CHECK(full.count("path2.up") == 1);
    CHECK(full.count("path2.tap_up") == 0);

    // NO_CPC drops the pooled hand-offs entirely
    const auto no_cpc = node_names(Variant::NO_CPC);
    CHECK(no_cpc.count("path1.cross_pool") == 0);
    CHECK(no_cpc.count("path2.cat1") == 1);  // dense concat stays

    // NO_DC keeps the hand-off but loses the dense concats
    const auto no_dc = node_names(Variant::NO_DC);
    CHECK(no_dc.count("path1.cross_pool") == 1);
    CHECK(no_dc.count("path1.cat1") == 0);  // singleton, no concat node
    CHECK(no_dc.count("path2.cat1") == 1);  // conv3 + hand-off
    CHECK(no_dc.count("path2.cat2") == 0);

    // ONE_DC: first unit collapsed, second unit dense
    const auto one_dc = node_names(Variant::ONE_DC);
    CHECK(one_dc.count("path1.cat1") == 0);
    CHECK(one_dc.count("path1.cat2") == 1);

    // NO_DUS runs every path at input resolution: taps get upsampled first,
    // nothing is pooled across paths, nothing is upsampled at the end
    const auto no_dus = node_names(Variant::NO_DUS);
    CHECK(no_dus.count("path1.tap_up") == 0);  // tap1 is full-res already
    CHECK(no_dus.count("path2.tap_up") == 1);
    CHECK(no_dus.count("path2.cross_pool") == 0);
    CHECK(no_dus.count("path2.up") == 0);
}

TEST_CASE("dense concat widths follow the three-output rule") {
    const GraphPlan plan = GraphPlan::build(tiny_config(Variant::FULL));
    for (const auto& n : plan.nodes()) {
        if (n.name == "path1.cat1") CHECK(n.out_channels == 6);   // 3 dense outputs
        if (n.name == "path2.cat1") CHECK(n.out_channels == 8);   // + cross hand-off
        if (n.name == "path2.cat2") CHECK(n.out_channels == 6);
        if (n.name == "fusion.cat") CHECK(n.out_channels == 10);  // 5 compressed paths
    }
}

TEST_CASE("invalid configurations are rejected") {
    NetworkConfig c = tiny_config();
    c.input_h = 40;
    CHECK_THROWS_AS(GraphPlan::build(c), std::invalid_argument);
    c = tiny_config();
    c.input_w = 0;
    CHECK_THROWS_AS(GraphPlan::build(c), std::invalid_argument);
    c = tiny_config();
    c.fusion_width = 0;
    CHECK_THROWS_AS(GraphPlan::build(c), std::invalid_argument);
    c = tiny_config();
    c.dense_widths[2] = -1;
    CHECK_THROWS_AS(GraphPlan::build(c), std::invalid_argument);
}

TEST_CASE("variant names round-trip") {
    for (Variant v : all_variants()) {
        CHECK(variant_from_string(variant_name(v)) == v);
    }
    CHECK_THROWS_AS(variant_from_string("RESNET"), std::invalid_argument);
}

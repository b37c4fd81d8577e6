#include <gtest/gtest.h>

#include "support.hpp"

using namespace taxoenrich;

namespace {

struct Fixture {
    Taxonomy tax = support::toy();
    EmbeddingTable table;
    ModelParams<double> params;

    explicit Fixture(std::uint64_t seed, Variant variant = Variant::Full, ModelDims dims = {6, 3, 2})
        : table(make_table(tax, dims.embed_dim, seed)), params(ModelParams<double>::init(dims, variant, seed)) {}

    static EmbeddingTable make_table(const Taxonomy& tax, int dim, std::uint64_t seed) {
        Rng rng(seed);
        return support::random_table(tax.ids(), dim, rng);
    }

    Slot slot(const NodeId& id) const { return Slot::node(tax.index_of(id)); }
    Eigen::VectorXd x(const NodeId& id) const { return table.lookup_as<double>(id); }
};

EncoderOptions longest() { return {PathPolicy::Longest, kDefaultMaxPaths}; }

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = support::uniform(rng, -1, 1);
    return m;
}

std::vector<support::Vec> columns(const Eigen::MatrixXd& m) {
    std::vector<support::Vec> out;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(support::to_vec(m.col(j)));
    return out;
}

}  // namespace

TEST(Variant, Names) {
    EXPECT_EQ(parse_variant("full"), Variant::Full);
    EXPECT_EQ(parse_variant("no-sibling"), Variant::NoSibling);
    EXPECT_EQ(parse_variant(to_string(Variant::NoSibling)), Variant::NoSibling);
    EXPECT_THROW(parse_variant("bogus"), Error);
}

TEST(ModelParams, Shapes) {
    auto full = ModelParams<double>::zeros({6, 3, 2}, Variant::Full);
    EXPECT_EQ(full.sibling_bilinear.rows(), 6);
    EXPECT_EQ(full.sibling_bilinear.cols(), 2 * 9 + 6);
    EXPECT_EQ(full.primal_weights.size(), 8);
    EXPECT_EQ(full.scorers[3].v_dim(), 2 * 9 + 6);
    auto ns = ModelParams<double>::zeros({6, 3, 2}, Variant::NoSibling);
    EXPECT_EQ(ns.primal_weights.size(), 6);
    EXPECT_EQ(ns.scorers[3].v_dim(), 18);
    auto a = ModelParams<double>::init({6, 3, 2}, Variant::Full, 4);
    auto b = ModelParams<double>::init({6, 3, 2}, Variant::Full, 4);
    EXPECT_EQ(a.sibling_bilinear, b.sibling_bilinear);
    EXPECT_TRUE(a.pseudo_leaf.isZero());
    auto round = a.cast<float>().cast<double>();
    EXPECT_TRUE(round.scorers[0].linear.isApprox(a.scorers[0].linear, 1e-6));
}

TEST(Encoder, LongestPathsMatchOracle) {
    Fixture f(1);
    Rng rng(0);
    // g(dl): ancestral path cs -> ml.
    auto gp = encode_parent(f.params, f.table, f.tax, f.slot("dl"), longest(), rng);
    auto h = support::lstm_oracle(f.params.parent_lstm, {support::to_vec(f.x("cs")), support::to_vec(f.x("ml"))});
    EXPECT_LE(support::max_abs_diff(support::concat(support::to_vec(f.x("dl")), h), gp.value), 1e-12);
    // g(ml) as a child: descendant paths [dl], [svm]; the tie goes to dl.
    auto gc = encode_child(f.params, f.table, f.tax, f.slot("ml"), longest(), rng);
    auto hc = support::lstm_oracle(f.params.child_lstm, {support::to_vec(f.x("dl"))});
    EXPECT_LE(support::max_abs_diff(support::concat(support::to_vec(f.x("ml")), hc), gc.value), 1e-12);
    // Root parent and leaf child have no path: the LSTM half is zero.
    auto root = encode_parent(f.params, f.table, f.tax, f.slot("cs"), longest(), rng);
    EXPECT_TRUE(root.value.tail(3).isZero());
    EXPECT_EQ(root.value.head(6), f.x("cs"));
    auto leaf = encode_child(f.params, f.table, f.tax, Slot::leaf(), longest(), rng);
    EXPECT_EQ(leaf.value, Eigen::VectorXd::Zero(9));
    EXPECT_THROW(encode_parent(f.params, f.table, f.tax, Slot::leaf(), longest(), rng), Error);
    EXPECT_THROW(encode_child(f.params, f.table, f.tax, Slot::root(), longest(), rng), Error);
}

TEST(Encoder, SampledPathsCoverAllPaths) {
    Fixture f(2);
    auto dl = support::concat(support::to_vec(f.x("ml")), support::lstm_oracle(f.params.child_lstm, {support::to_vec(f.x("dl"))}));
    auto svm = support::concat(support::to_vec(f.x("ml")), support::lstm_oracle(f.params.child_lstm, {support::to_vec(f.x("svm"))}));
    int seen_dl = 0, seen_svm = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(s);
        auto g = encode_child(f.params, f.table, f.tax, f.slot("ml"), {}, rng);
        if (support::max_abs_diff(dl, g.value) < 1e-12) ++seen_dl;
        else if (support::max_abs_diff(svm, g.value) < 1e-12) ++seen_svm;
    }
    EXPECT_EQ(seen_dl + seen_svm, 200);
    EXPECT_GT(seen_dl, 60);
    EXPECT_GT(seen_svm, 60);
}

TEST(Encoder, MaskedViewHidesQuery) {
    Fixture f(3);
    Rng rng(0);
    TaxonomyView masked(f.tax, f.tax.index_of("ml"));
    // With ml masked, dl hangs directly under cs.
    auto gp = encode_parent(f.params, f.table, masked, f.slot("dl"), longest(), rng);
    auto h = support::lstm_oracle(f.params.parent_lstm, {support::to_vec(f.x("cs"))});
    EXPECT_LE(support::max_abs_diff(support::concat(support::to_vec(f.x("dl")), h), gp.value), 1e-12);
}

TEST(SelectSiblings, Examples) {
    auto tax = support::toy();
    Rng rng(5);
    auto ml = Slot::node(tax.index_of("ml")), dl = Slot::node(tax.index_of("dl"));
    EXPECT_EQ(select_siblings(tax, ml, dl, 5, rng), std::vector<NodeIndex>{tax.index_of("svm")});
    EXPECT_TRUE(select_siblings(tax, ml, dl, 0, rng).empty());
    EXPECT_TRUE(select_siblings(tax, Slot::node(tax.index_of("os")), Slot::leaf(), 5, rng).empty());
    EXPECT_EQ(select_siblings(tax, Slot::root(), Slot::node(tax.index_of("cs")), 5, rng).size(), 0u);
    EXPECT_EQ(select_siblings(tax, Slot::root(), Slot::leaf(), 5, rng), std::vector<NodeIndex>{tax.index_of("cs")});
    auto both = select_siblings(tax, ml, Slot::leaf(), 5, rng);
    std::sort(both.begin(), both.end());
    EXPECT_EQ(both, (std::vector<NodeIndex>{tax.index_of("dl"), tax.index_of("svm")}));
}

TEST(SelectSiblings, DistinctSubsetOfChildren) {
    Rng rng(6);
    for (int trial = 0; trial < 40; ++trial) {
        auto tax = support::random_dag(rng, 12, 0.5);
        auto p = static_cast<NodeIndex>(uniform_index(rng, tax.num_nodes()));
        const auto& kids = tax.children(p);
        auto t = uniform_index(rng, 6);
        auto got = select_siblings(tax, Slot::node(p), Slot::leaf(), t, rng);
        EXPECT_EQ(got.size(), std::min(t, kids.size()));
        std::set<NodeIndex> uniq(got.begin(), got.end());
        EXPECT_EQ(uniq.size(), got.size());
        for (auto s : got) EXPECT_TRUE(std::find(kids.begin(), kids.end(), s) != kids.end());
    }
}

TEST(Attention, SpecialCases) {
    Rng rng(7);
    Eigen::MatrixXd w = random_matrix(4, 2 * 5 + 4, rng);
    Eigen::VectorXd q = random_matrix(4, 1, rng), gp = random_matrix(5, 1, rng), gc = random_matrix(5, 1, rng);
    Eigen::MatrixXd one = random_matrix(4, 1, rng);
    auto single = sibling_attention(w, q, gp, gc, one);
    EXPECT_NEAR(single.alpha[0], 1.0, 1e-15);
    EXPECT_LE((single.aggregate - one.col(0)).norm(), 1e-15);

    Eigen::MatrixXd three = random_matrix(4, 3, rng);
    Eigen::MatrixXd zero_w = Eigen::MatrixXd::Zero(4, 14);
    auto uniform = sibling_attention(zero_w, q, gp, gc, three);
    EXPECT_LE((uniform.alpha - Eigen::VectorXd::Constant(3, 1.0 / 3)).norm(), 1e-15);
    EXPECT_LE((uniform.aggregate - three.rowwise().mean()).norm(), 1e-15);

    auto none = sibling_attention(w, q, gp, gc, Eigen::MatrixXd(4, 0));
    EXPECT_TRUE(none.aggregate.isZero());
    EXPECT_EQ(none.alpha.size(), 0);
    EXPECT_THROW(sibling_attention(Eigen::MatrixXd(4, 3), q, gp, gc, one), DimensionError);
}

TEST(Attention, HandTwoSiblings) {
    // d = 1, g = 1: phi_i = q * (w0 gp + w1 gc + w2 s_i).
    Eigen::MatrixXd w(1, 3);
    w << 0.5, -1.0, 2.0;
    Eigen::VectorXd q(1), gp(1), gc(1);
    q << 1.5;
    gp << 0.2;
    gc << 0.4;
    Eigen::MatrixXd sibs(1, 2);
    sibs << 1.0, -1.0;
    auto out = sibling_attention(w, q, gp, gc, sibs);
    // phi = [1.5*(0.1-0.4+2), 1.5*(0.1-0.4-2)] = [2.55, -3.45]; alpha_1 = 1/(1+e^-6).
    double a1 = 1.0 / (1.0 + std::exp(-6.0));
    EXPECT_NEAR(out.alpha[0], a1, 1e-15);
    EXPECT_NEAR(out.aggregate[0], a1 - (1 - a1), 1e-15);
}

TEST(Attention, MatchesOracleAndSumsToOne) {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        int d = 1 + static_cast<int>(uniform_index(rng, 5)), g = d + static_cast<int>(uniform_index(rng, 4));
        auto t = static_cast<Eigen::Index>(1 + uniform_index(rng, 6));
        Eigen::MatrixXd w = random_matrix(d, 2 * g + d, rng) * 2;
        Eigen::VectorXd q = random_matrix(d, 1, rng), gp = random_matrix(g, 1, rng), gc = random_matrix(g, 1, rng);
        Eigen::MatrixXd sibs = random_matrix(d, t, rng);
        auto out = sibling_attention(w, q, gp, gc, sibs);
        auto oracle = support::attention_oracle(w, support::to_vec(q), support::to_vec(gp), support::to_vec(gc), columns(sibs));
        EXPECT_LE(support::max_abs_diff(oracle.aggregate, out.aggregate), 1e-12);
        EXPECT_LE(support::max_abs_diff(oracle.alpha, out.alpha), 1e-12);
        EXPECT_NEAR(out.alpha.sum(), 1.0, 1e-12);
        EXPECT_GE(out.alpha.minCoeff(), 0.0);
    }
}

TEST(Score, ZeroParamsScoreZero) {
    for (auto variant : {Variant::Full, Variant::NoSibling}) {
        auto p = ModelParams<double>::zeros({4, 2, 3}, variant);
        Eigen::VectorXd q = Eigen::VectorXd::Ones(4), g = Eigen::VectorXd::Ones(6);
        Eigen::MatrixXd sibs = Eigen::MatrixXd::Ones(4, 2);
        auto s = score_encoded(p, q, g, g, sibs);
        EXPECT_EQ(s.sp, 0.0);
        EXPECT_EQ(s.s1, 0.0);
        EXPECT_EQ(s.s4, 0.0);
    }
}

TEST(Score, MatchesOracle) {
    Rng rng(9);
    for (int trial = 0; trial < 40; ++trial) {
        auto variant = trial % 2 ? Variant::Full : Variant::NoSibling;
        ModelDims dims{1 + static_cast<int>(uniform_index(rng, 5)), 1 + static_cast<int>(uniform_index(rng, 4)),
                       1 + static_cast<int>(uniform_index(rng, 3))};
        auto p = ModelParams<double>::init(dims, variant, rng());
        int g = dims.position_dim();
        Eigen::VectorXd q = random_matrix(dims.embed_dim, 1, rng), gp = random_matrix(g, 1, rng), gc = random_matrix(g, 1, rng);
        Eigen::MatrixXd sibs = random_matrix(dims.embed_dim, static_cast<Eigen::Index>(uniform_index(rng, 4)), rng);
        auto s = score_encoded(p, q, gp, gc, sibs);
        auto o = support::score_oracle(p, support::to_vec(q), support::to_vec(gp), support::to_vec(gc), columns(sibs));
        EXPECT_NEAR(s.s1, o.s1, 1e-12);
        EXPECT_NEAR(s.s2, o.s2, 1e-12);
        EXPECT_NEAR(s.s3, o.s3, 1e-12);
        EXPECT_NEAR(s.s4, o.s4, 1e-12);
        EXPECT_NEAR(s.sp, o.sp, 1e-12);
        if (variant == Variant::NoSibling) EXPECT_EQ(s.s3, 0.0);
    }
}

TEST(Score, NoSiblingIgnoresSiblingDraws) {
    Fixture f(10, Variant::NoSibling);
    auto q = f.x("os");
    Position pos{Endpoint::node("ml"), Endpoint::node("dl")};
    Rng a(1), b(999);
    auto sa = score_position(f.params, q, f.tax, f.table, pos, 5, longest(), a);
    auto sb = score_position(f.params, q, f.tax, f.table, pos, 5, longest(), b);
    EXPECT_EQ(sa.sp, sb.sp);
    EXPECT_EQ(sa.alpha.size(), 0);

    Fixture full(10, Variant::Full);
    auto trace = forward_position(full.params, q, full.tax, full.table, full.slot("cs"), Slot::leaf(), 1, longest(), a, b);
    EXPECT_EQ(trace.siblings.size(), 1u);
    EXPECT_NEAR(trace.scores.alpha.sum(), 1.0, 1e-12);
}

TEST(Score, GradientMatchesFiniteDifferences) {
    for (auto variant : {Variant::Full, Variant::NoSibling}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto draw = support::gradient_draw(100 + seed, variant, {5, 3, 2});
            EXPECT_LE(draw.result.max_rel_error, 1e-6)
                << to_string(variant) << " " << draw.result.worst_tensor << "[" << draw.result.worst_index << "]";
            EXPECT_GT(draw.result.coords_checked, 100u);
        }
    }
}

#include <gtest/gtest.h>

#include "support.hpp"
#include "taxoenrich/nn/adam.hpp"
#include "taxoenrich/nn/gradcheck.hpp"
#include "taxoenrich/nn/loss.hpp"
#include "taxoenrich/nn/lstm.hpp"
#include "taxoenrich/nn/ntn.hpp"

using namespace taxoenrich;
using namespace taxoenrich::nn;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = support::uniform(rng, -1, 1);
    return m;
}

template <typename P>
std::vector<TensorRef<const double>> const_refs(const P& p) {
    return tensors(p);
}

}  // namespace

TEST(Lstm, ZeroAndEmpty) {
    auto p = LstmParams<double>::zeros(3, 4);
    Eigen::MatrixXd x(3, 5);
    x.setOnes();
    EXPECT_TRUE(lstm_forward(p, x).isZero());
    Rng rng(1);
    auto r = LstmParams<double>::random(3, 4, rng);
    auto empty = lstm_forward(r, Eigen::MatrixXd(3, 0));
    EXPECT_EQ(empty.size(), 4);
    EXPECT_TRUE(empty.isZero());
}

TEST(Lstm, HandScalarStep) {
    auto p = LstmParams<double>::zeros(1, 1);
    p.bias[2] = 1.0;  // candidate gate
    Eigen::MatrixXd x(1, 1);
    x << 0.3;
    double cell = 0.5 * std::tanh(1.0);
    double h = 0.5 * std::tanh(cell);
    EXPECT_NEAR(lstm_forward(p, x)[0], h, 1e-15);
    EXPECT_NEAR(h, 0.1816997, 1e-6);
}

TEST(Lstm, MatchesOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        int d = 1 + static_cast<int>(uniform_index(rng, 5)), h = 1 + static_cast<int>(uniform_index(rng, 5));
        auto p = LstmParams<double>::random(d, h, rng);
        auto x = random_matrix(d, static_cast<Eigen::Index>(uniform_index(rng, 6)), rng);
        std::vector<support::Vec> cols;
        for (Eigen::Index t = 0; t < x.cols(); ++t) cols.push_back(support::to_vec(x.col(t)));
        EXPECT_LE(support::max_abs_diff(support::lstm_oracle(p, cols), lstm_forward(p, x)), 1e-12);
    }
}

TEST(Lstm, BackwardMatchesFiniteDifferences) {
    Rng rng(3);
    auto p = LstmParams<double>::random(3, 4, rng);
    Eigen::MatrixXd x = random_matrix(3, 4, rng);
    Eigen::VectorXd probe = random_matrix(4, 1, rng);
    LstmTape<double> tape;
    lstm_forward(p, x, &tape);
    auto grads = LstmParams<double>::zeros(3, 4);
    Eigen::MatrixXd dx = lstm_backward(p, tape, probe, grads);
    auto loss = [&] { return probe.dot(lstm_forward(p, x)); };
    // Differences in long double; near-zero entries are below double noise.
    LstmParams<long double> wide{p.input_weights.cast<long double>(), p.recurrent_weights.cast<long double>(),
                                 p.bias.cast<long double>()};
    Eigen::Matrix<long double, -1, -1> wx = x.cast<long double>();
    Eigen::Matrix<long double, -1, 1> wprobe = probe.cast<long double>();
    std::function<long double()> wide_loss = [&] { return wprobe.dot(lstm_forward(wide, wx)); };
    auto res = finite_diff_check<long double, double>(wide_loss, tensors(wide), const_refs(grads));
    EXPECT_LE(res.max_rel_error, 1e-7) << res.worst_tensor << " " << res.analytic << " " << res.numeric;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double e = 1e-6, keep = x.data()[i];
        x.data()[i] = keep + e;
        double up = loss();
        x.data()[i] = keep - e;
        double down = loss();
        x.data()[i] = keep;
        EXPECT_NEAR(dx.data()[i], (up - down) / (2 * e), 1e-7);
    }
}

TEST(Ntn, MatchesOracleAndBound) {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        int du = 1 + static_cast<int>(uniform_index(rng, 6)), dv = 1 + static_cast<int>(uniform_index(rng, 6));
        int k = 1 + static_cast<int>(uniform_index(rng, 4));
        auto p = NtnParams<double>::random(du, dv, k, rng);
        Eigen::VectorXd u = random_matrix(du, 1, rng) * 3, v = random_matrix(dv, 1, rng) * 3;
        auto out = ntn_forward(p, u, v);
        auto oracle = support::ntn_oracle(p, support::to_vec(u), support::to_vec(v));
        EXPECT_NEAR(out.score, oracle.score, 1e-12);
        EXPECT_LE(support::max_abs_diff(oracle.activation, out.activation), 1e-12);
        EXPECT_LE(std::abs(out.score), p.output.cwiseAbs().sum() + 1e-12);
    }
    auto z = NtnParams<double>::zeros(3, 2, 4);
    Eigen::VectorXd ones3 = Eigen::VectorXd::Ones(3), ones2 = Eigen::VectorXd::Ones(2);
    auto out = ntn_forward(z, ones3, ones2);
    EXPECT_EQ(out.score, 0.0);
    EXPECT_TRUE(out.activation.isZero());
}

TEST(Ntn, BackwardMatchesFiniteDifferences) {
    Rng rng(5);
    auto p = NtnParams<double>::random(4, 3, 3, rng);
    Eigen::VectorXd u = random_matrix(4, 1, rng), v = random_matrix(3, 1, rng);
    Eigen::VectorXd extra = random_matrix(3, 1, rng);
    auto loss = [&] {
        auto o = ntn_forward(p, u, v);
        return 0.7 * o.score + extra.dot(o.activation);
    };
    NtnTape<double> tape;
    ntn_forward(p, u, v, &tape);
    auto grads = NtnParams<double>::zeros(4, 3, 3);
    Eigen::VectorXd du, dv;
    ntn_backward(p, tape, 0.7, extra, grads, &du, &dv);
    auto res = finite_diff_check<double, double>(loss, tensors(p), const_refs(grads));
    EXPECT_LE(res.max_rel_error, 1e-7) << res.worst_tensor << " " << res.analytic << " " << res.numeric;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        double keep = u[i];
        u[i] = keep + 1e-6;
        double up = loss();
        u[i] = keep - 1e-6;
        double down = loss();
        u[i] = keep;
        EXPECT_NEAR(du[i], (up - down) / 2e-6, 1e-7);
    }
    EXPECT_EQ(dv.size(), 3);
}

TEST(Bce, KnownValues) {
    EXPECT_NEAR(bce_with_logits(0.0, 1).loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(bce_with_logits(0.0, 0).loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(bce_with_logits(1.0, 0).loss, 1.313262, 1e-6);
    EXPECT_NEAR(bce_with_logits(40.0, 0).loss, 40.0, 1e-12);
    EXPECT_GT(bce_with_logits(40.0, 1).loss, 0.0);
    EXPECT_LT(bce_with_logits(40.0, 1).loss, 1e-17);
    EXPECT_NEAR(bce_with_logits(0.0, 1).d_logit, -0.5, 1e-15);
    EXPECT_THROW(bce_with_logits(std::nan(""), 1), NumericError);
    EXPECT_THROW(bce_with_logits(INFINITY, 0), NumericError);
    EXPECT_THROW(bce_with_logits(0.0, 2), Error);
}

TEST(Bce, SymmetryAndGradient) {
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        double z = support::uniform(rng, -30, 30);
        EXPECT_NEAR(bce_with_logits(z, 1).loss, bce_with_logits(-z, 0).loss, 1e-12);
        EXPECT_NEAR(bce_with_logits(z, 1).loss, support::bce_oracle(z, 1), 1e-9);
        EXPECT_NEAR(bce_with_logits(z, 0).d_logit, support::sigm(z), 1e-12);
        EXPECT_NEAR(bce_with_logits(z, 1).d_logit, support::sigm(z) - 1, 1e-12);
    }
    EXPECT_FLOAT_EQ(bce_with_logits(0.0f, 1).loss, std::log(2.0f));
}

TEST(Adam, ZeroGradientsLeaveParams) {
    Eigen::MatrixXd w(2, 2);
    w << 1, 2, 3, 4;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
    std::vector<TensorRef<double>> params = {{"w", w.data(), 2, 2}};
    std::vector<TensorRef<double>> grads = {{"w", g.data(), 2, 2}};
    AdamState<double> state(params, {});
    Eigen::MatrixXd before = w;
    adam_step<double>(state, params, grads);
    EXPECT_EQ(w, before);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, HandRecurrence) {
    AdamOptions opt;
    opt.lr = 0.01;
    Eigen::VectorXd x(2);
    x << 0.5, -2.0;
    Eigen::VectorXd g(2);
    std::vector<TensorRef<double>> params = {{"x", x.data(), 2, 1}};
    std::vector<TensorRef<double>> grads = {{"x", g.data(), 2, 1}};
    AdamState<double> state(params, opt);

    double m[2] = {0, 0}, v[2] = {0, 0}, ref[2] = {0.5, -2.0};
    const double gs[2][2] = {{0.3, -4.0}, {-0.1, 1.0}};
    for (int t = 1; t <= 2; ++t) {
        g << gs[t - 1][0], gs[t - 1][1];
        adam_step<double>(state, params, grads);
        for (int i = 0; i < 2; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * gs[t - 1][i];
            v[i] = 0.999 * v[i] + 0.001 * gs[t - 1][i] * gs[t - 1][i];
            double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
            ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
        EXPECT_NEAR(x[0], ref[0], 1e-14);
        EXPECT_NEAR(x[1], ref[1], 1e-14);
        if (t == 1) {
            EXPECT_NEAR(x[0], 0.5 - 0.01, 1e-9);
            EXPECT_NEAR(x[1], -2.0 + 0.01, 1e-9);
        }
    }
}

TEST(Adam, Errors) {
    Eigen::VectorXd x = Eigen::VectorXd::Ones(2), g(2), small(1);
    g << 1, std::nan("");
    std::vector<TensorRef<double>> params = {{"x", x.data(), 2, 1}};
    std::vector<TensorRef<double>> grads = {{"x", g.data(), 2, 1}};
    std::vector<TensorRef<double>> wrong = {{"x", small.data(), 1, 1}};
    AdamState<double> state(params, {});
    EXPECT_THROW(adam_step<double>(state, params, grads), NumericError);
    EXPECT_EQ(x, Eigen::VectorXd::Ones(2));
    EXPECT_THROW(adam_step<double>(state, params, wrong), DimensionError);
}

TEST(GradCheck, LinearAndConstant) {
    Eigen::VectorXd x(3), a(3);
    x << 0.2, -1, 4;
    a << 1.5, -2, 0.25;
    std::vector<TensorRef<double>> params = {{"x", x.data(), 3, 1}};
    std::vector<TensorRef<const double>> analytic = {{"x", a.data(), 3, 1}};
    auto res = finite_diff_check<double, double>([&] { return a.dot(x); }, params, analytic);
    EXPECT_LE(res.max_rel_error, 1e-10);
    EXPECT_EQ(res.coords_checked, 3u);

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    std::vector<TensorRef<const double>> flat = {{"x", zero.data(), 3, 1}};
    auto constant = finite_diff_check<double, double>([] { return 7.0; }, params, flat);
    EXPECT_EQ(constant.max_rel_error, 0.0);

    // A wrong analytic gradient is reported.
    Eigen::VectorXd off = a;
    off[1] += 1;
    std::vector<TensorRef<const double>> bad = {{"x", off.data(), 3, 1}};
    auto r = finite_diff_check<double, double>([&] { return a.dot(x); }, params, bad);
    EXPECT_GT(r.max_rel_error, 0.1);
    EXPECT_EQ(r.worst_index, 1);
    EXPECT_EQ(x[0], 0.2);
}

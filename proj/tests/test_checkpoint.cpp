#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "support.hpp"
#include "taxoenrich/checkpoint.hpp"

using namespace taxoenrich;

namespace {

template <typename S>
std::string bytes_of(const ModelParams<S>& p, const std::string& hyper = "{}") {
    std::ostringstream out;
    write_checkpoint(p, hyper, out);
    return out.str();
}

std::uint32_t u32_at(const std::string& s, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)]);
    return v;
}

template <typename S>
bool same_params(const ModelParams<S>& a, const ModelParams<S>& b) {
    auto ta = nn::tensors(a), tb = nn::tensors(b);
    if (ta.size() != tb.size() || !(a.dims == b.dims) || a.variant != b.variant) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
        if (ta[i].name != tb[i].name || ta[i].map() != tb[i].map()) return false;
    return true;
}

}  // namespace

TEST(Checkpoint, HeaderLayout) {
    auto p = ModelParams<float>::init({3, 2, 4}, Variant::NoSibling, 1);
    auto bytes = bytes_of(p, "{\"a\":1}");
    EXPECT_EQ(bytes.substr(0, 4), "TXM1");
    EXPECT_EQ(u32_at(bytes, 4), 1u);
    EXPECT_EQ(u32_at(bytes, 8), 4u);
    EXPECT_EQ(u32_at(bytes, 12), 3u);
    EXPECT_EQ(u32_at(bytes, 16), 2u);
    EXPECT_EQ(u32_at(bytes, 20), 4u);
    EXPECT_EQ(u32_at(bytes, 24), 1u);
    EXPECT_EQ(u32_at(bytes, 28), 7u);
    EXPECT_EQ(bytes.substr(32, 7), "{\"a\":1}");
    EXPECT_EQ(u32_at(bytes, 39), nn::tensors(p).size());
    // First tensor: name, shape, then column-major float32 values.
    const std::string name = "parent_lstm.input_weights";
    EXPECT_EQ(u32_at(bytes, 43), name.size());
    EXPECT_EQ(bytes.substr(47, name.size()), name);
    auto off = 47 + name.size();
    EXPECT_EQ(u32_at(bytes, off), 8u);
    EXPECT_EQ(u32_at(bytes, off + 4), 3u);
    float first;
    std::memcpy(&first, bytes.data() + off + 8, 4);
    EXPECT_EQ(first, p.parent_lstm.input_weights(0, 0));
    float second;
    std::memcpy(&second, bytes.data() + off + 12, 4);
    EXPECT_EQ(second, p.parent_lstm.input_weights(1, 0));
}

TEST(Checkpoint, RoundTripBothPrecisions) {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        ModelDims dims{1 + static_cast<int>(uniform_index(rng, 5)), 1 + static_cast<int>(uniform_index(rng, 4)),
                       1 + static_cast<int>(uniform_index(rng, 3))};
        auto variant = trial % 2 ? Variant::Full : Variant::NoSibling;
        auto p = ModelParams<double>::init(dims, variant, rng());
        p.pseudo_leaf.setConstant(0.25);
        std::istringstream in(bytes_of(p, "hyper"));
        auto back = load_checkpoint<double>(in);
        EXPECT_TRUE(same_params(p, back.params));
        EXPECT_EQ(back.hyper, "hyper");
        EXPECT_EQ(back.stored_scalar_bytes, 8);
        EXPECT_EQ(bytes_of(back.params, "hyper"), bytes_of(p, "hyper"));

        auto f = p.cast<float>();
        std::istringstream fin(bytes_of(f));
        auto widened = load_checkpoint<double>(fin);
        EXPECT_EQ(widened.stored_scalar_bytes, 4);
        EXPECT_TRUE(same_params(widened.params, f.cast<double>()));
    }
}

TEST(Checkpoint, RejectsMalformed) {
    auto p = ModelParams<double>::init({2, 2, 2}, Variant::Full, 5);
    auto good = bytes_of(p);
    auto load = [](const std::string& b) {
        std::istringstream in(b);
        return load_checkpoint<double>(in);
    };
    EXPECT_NO_THROW(load(good));
    auto bad = good;
    bad[0] = 'X';
    EXPECT_THROW(load(bad), FormatError);
    bad = good;
    bad[4] = 9;
    EXPECT_THROW(load(bad), FormatError);
    bad = good;
    bad[8] = 2;
    EXPECT_THROW(load(bad), FormatError);
    bad = good;
    bad[24] = 5;
    EXPECT_THROW(load(bad), FormatError);
    for (std::size_t cut : {std::size_t{3}, std::size_t{20}, std::size_t{40}, good.size() / 2, good.size() - 1})
        EXPECT_THROW(load(good.substr(0, cut)), FormatError) << cut;
    // A renamed tensor is unknown to the model.
    bad = good;
    bad.replace(bad.find("input_weights"), 5, "xnput");
    EXPECT_THROW(load(bad), FormatError);
    // A shape that disagrees with the header dims.
    bad = good;
    bad[12] = 3;
    EXPECT_THROW(load(bad), FormatError);
}

TEST(Checkpoint, FileErrorsNamePath) {
    const std::string missing = "/nonexistent/dir/model.txm";
    try {
        load_checkpoint_file<double>(missing);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(missing), std::string::npos);
    }
    auto path = (std::filesystem::temp_directory_path() / "taxoenrich_ck_test.txm").string();
    auto p = ModelParams<float>::init({2, 1, 1}, Variant::Full, 1);
    write_checkpoint_file(p, "{}", path);
    EXPECT_EQ(checkpoint_scalar_bytes(path), 4);
    EXPECT_TRUE(same_params(load_checkpoint_file<float>(path).params, p));
    std::filesystem::resize_file(path, 30);
    try {
        load_checkpoint_file<float>(path);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find(path), std::string::npos);
    }
    std::filesystem::remove(path);
}

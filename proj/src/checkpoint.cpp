#include "taxoenrich/checkpoint.hpp"

#include <fstream>
#include <map>

#include "taxoenrich/binary_io.hpp"

namespace taxoenrich {

namespace {

struct Header {
    std::uint32_t scalar_bytes = 0;
    ModelDims dims;
    Variant variant = Variant::Full;
};

Header read_header(std::istream& in) {
    io::expect_magic(in, "TXM1");
    auto version = io::read_uint<std::uint32_t>(in, "checkpoint version");
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    Header h;
    h.scalar_bytes = io::read_uint<std::uint32_t>(in, "scalar size");
    if (h.scalar_bytes != 4 && h.scalar_bytes != 8)
        throw FormatError("unsupported checkpoint scalar size " + std::to_string(h.scalar_bytes));
    h.dims.embed_dim = static_cast<int>(io::read_uint<std::uint32_t>(in, "embedding dim"));
    h.dims.hidden_dim = static_cast<int>(io::read_uint<std::uint32_t>(in, "hidden dim"));
    h.dims.slices = static_cast<int>(io::read_uint<std::uint32_t>(in, "slice count"));
    auto variant = io::read_uint<std::uint32_t>(in, "variant");
    if (variant > 1) throw FormatError("unknown model variant tag " + std::to_string(variant));
    h.variant = variant == 0 ? Variant::Full : Variant::NoSibling;
    return h;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    return in;
}

}  // namespace

template <typename Scalar>
void write_checkpoint(const ModelParams<Scalar>& params, const std::string& hyper, std::ostream& out) {
    static_assert(sizeof(Scalar) == 4 || sizeof(Scalar) == 8, "checkpoints store float or double");
    out.write("TXM1", 4);
    io::write_uint<std::uint32_t>(out, kCheckpointVersion);
    io::write_uint<std::uint32_t>(out, sizeof(Scalar));
    io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.embed_dim));
    io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.hidden_dim));
    io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(params.dims.slices));
    io::write_uint<std::uint32_t>(out, params.variant == Variant::Full ? 0 : 1);
    io::write_string(out, hyper);
    auto blocks = nn::tensors(params);
    io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& t : blocks) {
        io::write_string(out, t.name);
        io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
        io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            if constexpr (sizeof(Scalar) == 4) {
                io::write_f32(out, t.data[i]);
            } else {
                io::write_f64(out, t.data[i]);
            }
        }
    }
    if (!out) throw Error("failed writing checkpoint");
}

template <typename Scalar>
void write_checkpoint_file(const ModelParams<Scalar>& params, const std::string& hyper, const std::string& path) {
    auto out = open_out(path);
    write_checkpoint(params, hyper, out);
    out.close();
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(std::istream& in) {
    auto header = read_header(in);
    Checkpoint<Scalar> ck{ModelParams<Scalar>::zeros(header.dims, header.variant), {},
                          static_cast<int>(header.scalar_bytes)};
    ck.hyper = io::read_string(in, "hyperparameters");
    std::map<std::string, nn::TensorRef<Scalar>> slots;
    for (auto& t : nn::tensors(ck.params)) slots.emplace(t.name, t);
    auto count = io::read_uint<std::uint32_t>(in, "tensor count");
    if (count != slots.size())
        throw FormatError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(slots.size()));
    for (std::uint32_t n = 0; n < count; ++n) {
        auto name = io::read_string(in, "tensor name", 1024);
        auto it = slots.find(name);
        if (it == slots.end()) throw FormatError("unknown or repeated tensor '" + name + "' in checkpoint");
        auto rows = io::read_uint<std::uint32_t>(in, "tensor rows");
        auto cols = io::read_uint<std::uint32_t>(in, "tensor cols");
        auto& t = it->second;
        if (rows != t.rows || cols != t.cols)
            throw FormatError("tensor '" + name + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                              ", expected " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            t.data[i] = header.scalar_bytes == 4 ? static_cast<Scalar>(io::read_f32(in, "tensor values"))
                                                 : static_cast<Scalar>(io::read_f64(in, "tensor values"));
        }
        slots.erase(it);
    }
    return ck;
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint_file(const std::string& path) {
    auto in = open_in(path);
    try {
        return load_checkpoint<Scalar>(in);
    } catch (const FormatError& e) {
        throw FormatError("checkpoint '" + path + "': " + e.what());
    }
}

int checkpoint_scalar_bytes(const std::string& path) {
    auto in = open_in(path);
    return static_cast<int>(read_header(in).scalar_bytes);
}

#define TAXOENRICH_INSTANTIATE_CHECKPOINT(S)                                                               \
    template void write_checkpoint<S>(const ModelParams<S>&, const std::string&, std::ostream&);           \
    template void write_checkpoint_file<S>(const ModelParams<S>&, const std::string&, const std::string&); \
    template Checkpoint<S> load_checkpoint<S>(std::istream&);                                              \
    template Checkpoint<S> load_checkpoint_file<S>(const std::string&);

TAXOENRICH_INSTANTIATE_CHECKPOINT(float)
TAXOENRICH_INSTANTIATE_CHECKPOINT(double)

}  // namespace taxoenrich

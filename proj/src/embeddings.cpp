#include "taxoenrich/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "taxoenrich/binary_io.hpp"

namespace taxoenrich {

EmbeddingTable::EmbeddingTable(int dim, Provenance provenance) : dim_(dim), provenance_(provenance) {
    if (dim <= 0) throw DimensionError("embedding dimension must be positive, got " + std::to_string(dim));
}

void EmbeddingTable::reserve(std::size_t n) {
    ids_.reserve(n);
    data_.reserve(n * static_cast<std::size_t>(dim_));
}

void EmbeddingTable::add(const NodeId& id, const Eigen::Ref<const Eigen::VectorXf>& row) {
    if (row.size() != dim_) {
        throw DimensionError("row for '" + id + "' has length " + std::to_string(row.size()) + ", table dim is " +
                             std::to_string(dim_));
    }
    if (!index_.emplace(id, ids_.size()).second) throw Error("duplicate embedding id '" + id + "'");
    ids_.push_back(id);
    data_.insert(data_.end(), row.data(), row.data() + dim_);
}

Eigen::Map<const Eigen::VectorXf> EmbeddingTable::lookup(const NodeId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("no embedding row for node '" + id + "'");
    return row(it->second);
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && data_ == other.data_;
}

namespace {

std::string normalize_token(const std::string& tok) {
    constexpr std::string_view punct = ",.;:!?\"'()[]";
    auto b = tok.find_first_not_of(punct);
    if (b == std::string::npos) return {};
    auto e = tok.find_last_not_of(punct);
    return tok.substr(b, e - b + 1);
}

Eigen::VectorXd token_vector(const std::string& token, int dim, std::uint64_t seed) {
    Eigen::VectorXd v(dim);
    auto state = hash_string(token, seed);
    for (int i = 0; i < dim; ++i) {
        state = splitmix64(state);
        // 53 high bits -> [0, 1) -> [-1, 1)
        v[i] = static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }
    return v.normalized();
}

}  // namespace

Eigen::VectorXd fallback_embed(const std::string& text, int dim, std::uint64_t seed) {
    if (dim <= 0) throw DimensionError("embedding dimension must be positive");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
    std::size_t n = 0;
    for (const auto& raw : whitespace_tokens(text)) {
        auto tok = normalize_token(raw);
        if (tok.empty()) continue;
        sum += token_vector(tok, dim, seed);
        ++n;
    }
    if (n == 0) throw Error("cannot embed text without tokens: '" + text + "'");
    return sum.normalized();
}

EmbeddingTable build_fallback_table(const std::vector<PseudoSentence>& corpus,
                                    const std::vector<std::pair<NodeId, std::string>>& names, int dim,
                                    std::uint64_t seed) {
    if (corpus.empty() && names.empty()) throw Error("empty corpus and no names to embed");
    std::map<NodeId, std::pair<Eigen::VectorXd, std::size_t>> sums;
    for (const auto& s : corpus) {
        auto [it, inserted] = sums.try_emplace(s.anchor, Eigen::VectorXd::Zero(dim), 0);
        it->second.first += fallback_embed(s.text, dim, seed);
        ++it->second.second;
    }
    EmbeddingTable table(dim, Provenance::Fallback);
    table.reserve(names.size());
    for (const auto& [id, name] : names) {
        Eigen::VectorXd row;
        if (auto it = sums.find(id); it != sums.end()) {
            row = (it->second.first / static_cast<double>(it->second.second)).normalized();
        } else {
            row = fallback_embed(name.empty() ? id : name, dim, seed);
        }
        table.add(id, row.cast<float>());
    }
    return table;
}

namespace {
constexpr char kTableMagic[5] = "TXE1";
}

void write_table(const EmbeddingTable& table, std::ostream& sink) {
    sink.write(kTableMagic, 4);
    io::write_uint<std::uint32_t>(sink, static_cast<std::uint32_t>(table.dim()));
    io::write_uint<std::uint64_t>(sink, table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        io::write_string(sink, table.ids()[i]);
        auto row = table.row(i);
        for (int j = 0; j < table.dim(); ++j) io::write_f32(sink, row[j]);
    }
    sink.flush();
    if (!sink) throw Error("failed writing embedding table");
}

EmbeddingTable load_table(std::istream& source) {
    io::expect_magic(source, kTableMagic);
    auto dim = io::read_uint<std::uint32_t>(source, "table dim");
    auto rows = io::read_uint<std::uint64_t>(source, "row count");
    if (dim == 0 || dim > (1u << 24)) throw FormatError("invalid embedding dimension " + std::to_string(dim));
    EmbeddingTable table(static_cast<int>(dim), Provenance::Exporter);
    Eigen::VectorXf row(dim);
    for (std::uint64_t r = 0; r < rows; ++r) {
        auto id = io::read_string(source, "row id");
        for (std::uint32_t j = 0; j < dim; ++j) row[j] = io::read_f32(source, "row values");
        if (table.contains(id)) throw FormatError("duplicate embedding id '" + id + "'");
        table.add(id, row);
    }
    return table;
}

void write_table_file(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_table(table, out);
}

EmbeddingTable load_table_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open embedding table '" + path + "'");
    return load_table(in);
}

std::vector<NodeId> missing_rows(const EmbeddingTable& table, const Taxonomy& tax) {
    std::vector<NodeId> out;
    for (const auto& id : tax.ids())
        if (!table.contains(id)) out.push_back(id);
    return out;
}

}  // namespace taxoenrich

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "taxoenrich/common.hpp"
#include "taxoenrich/paths.hpp"
#include "taxoenrich/taxonomy.hpp"

namespace taxoenrich {

enum class Provenance { Exporter, Fallback };

// Node id -> fixed d-dimensional vector. Rows are kept in insertion order and
// stored in single precision, which is also the on-disk precision.
class EmbeddingTable {
public:
    explicit EmbeddingTable(int dim, Provenance provenance = Provenance::Exporter);

    int dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    Provenance provenance() const { return provenance_; }
    const std::vector<NodeId>& ids() const { return ids_; }

    Eigen::Map<const Eigen::VectorXf> row(std::size_t i) const {
        return {data_.data() + i * static_cast<std::size_t>(dim_), dim_};
    }
    bool contains(const NodeId& id) const { return index_.count(id) != 0; }

    // Throws Error on a duplicate id, DimensionError on a length mismatch.
    void add(const NodeId& id, const Eigen::Ref<const Eigen::VectorXf>& row);
    void reserve(std::size_t n);

    // Throws Error naming the id when absent.
    Eigen::Map<const Eigen::VectorXf> lookup(const NodeId& id) const;
    template <typename Scalar>
    Vector<Scalar> lookup_as(const NodeId& id) const {
        return lookup(id).template cast<Scalar>();
    }

    bool operator==(const EmbeddingTable& other) const;

private:
    int dim_;
    Provenance provenance_;
    std::vector<NodeId> ids_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<float> data_;  // row-major, size() * dim_
};

// Each token hashes to a seeded pseudo-random unit vector; the token vectors
// are averaged and L2-normalized. Throws Error on text without tokens.
Eigen::VectorXd fallback_embed(const std::string& text, int dim, std::uint64_t seed);

// Per node: the normalized mean of fallback_embed over its sentences, or of its
// surface name when it has none. `names` lists every id that gets a row.
EmbeddingTable build_fallback_table(const std::vector<PseudoSentence>& corpus,
                                    const std::vector<std::pair<NodeId, std::string>>& names, int dim,
                                    std::uint64_t seed);

// TXE1 layout: magic, u32 dim, u64 rows, then per row u32 id length, id bytes
// and dim float32 values. All integers and floats little-endian.
void write_table(const EmbeddingTable& table, std::ostream& sink);
EmbeddingTable load_table(std::istream& source);
void write_table_file(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_table_file(const std::string& path);

// Ids of taxonomy nodes that have no row.
std::vector<NodeId> missing_rows(const EmbeddingTable& table, const Taxonomy& tax);

}  // namespace taxoenrich

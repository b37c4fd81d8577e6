#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "taxoenrich/common.hpp"

namespace taxoenrich {

using NodeId = std::string;

// Dense node index. Nodes are stored sorted by id, so index order is id order.
using NodeIndex = std::int32_t;

enum class Placeholder : std::uint8_t { None, PseudoRoot, PseudoLeaf };

// One side of a candidate position: a concrete node or a pseudo placeholder.
// Ordering: PseudoRoot < any node (by id) < PseudoLeaf.
struct Endpoint {
    Placeholder placeholder = Placeholder::None;
    NodeId id;

    static Endpoint node(NodeId id) { return {Placeholder::None, std::move(id)}; }
    static Endpoint pseudo_leaf() { return {Placeholder::PseudoLeaf, {}}; }
    static Endpoint pseudo_root() { return {Placeholder::PseudoRoot, {}}; }

    bool is_node() const { return placeholder == Placeholder::None; }
    bool is_pseudo_leaf() const { return placeholder == Placeholder::PseudoLeaf; }
    bool is_pseudo_root() const { return placeholder == Placeholder::PseudoRoot; }

    std::strong_ordering operator<=>(const Endpoint& other) const;
    bool operator==(const Endpoint& other) const = default;
};

// Textual form used in files: the node id, or `<pseudo-leaf>` / `<pseudo-root>`.
std::string to_string(const Endpoint& e);
Endpoint parse_endpoint(const std::string& text);

struct Position {
    Endpoint parent;
    Endpoint child;

    std::strong_ordering operator<=>(const Position& other) const = default;
    bool operator==(const Position& other) const = default;
};

struct PositionHash {
    std::size_t operator()(const Position& p) const;
};

enum class CandidateMode { Completion, Expansion };

struct Edge {
    NodeId parent;
    NodeId child;
};

class Taxonomy {
public:
    // Validates and builds. Throws TaxonomyError on duplicate ids, duplicate
    // edges, self-loops, unknown endpoints or cycles.
    Taxonomy(std::vector<std::pair<NodeId, std::string>> terms, const std::vector<Edge>& edges);

    std::size_t num_nodes() const { return ids_.size(); }
    std::size_t num_edges() const { return num_edges_; }
    bool empty() const { return ids_.empty(); }

    const NodeId& id(NodeIndex i) const { return ids_[static_cast<std::size_t>(i)]; }
    const std::string& name(NodeIndex i) const { return names_[static_cast<std::size_t>(i)]; }
    const std::vector<NodeId>& ids() const { return ids_; }

    std::optional<NodeIndex> find(const NodeId& id) const;
    // Throws TaxonomyError naming the id.
    NodeIndex index_of(const NodeId& id) const;
    bool contains(const NodeId& id) const { return find(id).has_value(); }

    // Sorted by index.
    const std::vector<NodeIndex>& parents(NodeIndex i) const { return parents_[static_cast<std::size_t>(i)]; }
    const std::vector<NodeIndex>& children(NodeIndex i) const { return children_[static_cast<std::size_t>(i)]; }
    bool has_edge(NodeIndex parent, NodeIndex child) const;

    std::vector<NodeIndex> roots() const;
    std::vector<NodeIndex> leaves() const;
    std::vector<NodeIndex> topological_order() const;
    // Number of nodes on the longest root-to-leaf path.
    std::size_t depth() const;

    std::vector<Edge> edges() const;
    std::vector<std::pair<NodeId, std::string>> terms() const;

    const std::optional<NodeId>& pseudo_root() const { return pseudo_root_; }
    // Unique per constructed value; caches keyed on a taxonomy compare this.
    std::uint64_t generation() const { return generation_; }

private:
    friend Taxonomy add_pseudo_root(const Taxonomy&, const std::string&);

    std::vector<NodeId> ids_;
    std::vector<std::string> names_;
    std::unordered_map<NodeId, NodeIndex> index_;
    std::vector<std::vector<NodeIndex>> parents_;
    std::vector<std::vector<NodeIndex>> children_;
    std::size_t num_edges_ = 0;
    std::optional<NodeId> pseudo_root_;
    std::uint64_t generation_ = 0;
};

// Terms: `id<TAB>name` per line. Edges: `parent_id<TAB>child_id` per line.
Taxonomy load_taxonomy(std::istream& terms, std::istream& edges);
Taxonomy load_taxonomy_files(const std::string& terms_path, const std::string& edges_path);
void write_taxonomy(const Taxonomy& tax, std::ostream& terms, std::ostream& edges);

// Adds a root named `name` (also used as its id) above every current root.
Taxonomy add_pseudo_root(const Taxonomy& tax, const std::string& name);

// Completion: every edge plus a leaf slot per node. Expansion: leaf slots only.
// With `include_root_slots`, also <PseudoRoot, r> for each root r.
// Sorted by (parent, child).
std::vector<Position> enumerate_candidate_positions(const Taxonomy& tax, CandidateMode mode,
                                                    bool include_root_slots = false);

// Parents x children of `query`, or <parent, PseudoLeaf> when the query is a leaf.
std::vector<Position> true_positions(const Taxonomy& full, const NodeId& query);

struct Neighbors {
    std::vector<NodeId> parents;
    std::vector<NodeId> children;
};
Neighbors neighbors(const Taxonomy& tax, const NodeId& node);

struct QueryEntry {
    NodeId query;
    std::vector<Position> true_positions;  // sorted, nonempty
};
using QuerySet = std::vector<QueryEntry>;

struct DatasetSplit {
    Taxonomy seed;
    QuerySet validation;
    QuerySet test;
};

// Samples n_val + n_test non-root nodes, removes them and reattaches every
// surviving parent to every surviving child through removed nodes. True
// positions are taken from the full taxonomy, with endpoints that were also
// removed resolved to their nearest surviving ancestors / descendants.
DatasetSplit split_dataset(const Taxonomy& tax, std::size_t n_val, std::size_t n_test, std::uint64_t seed);

// Query files: `query_id<TAB>parent<TAB>child` per true position.
void write_query_set(const QuerySet& queries, std::ostream& out);
QuerySet read_query_set(std::istream& in);

// Read-only adjacency over a taxonomy, optionally with one node masked out.
// Masking a node q removes it and links parents(q) to children(q), which is
// the taxonomy a training query sees.
class TaxonomyView {
public:
    TaxonomyView(const Taxonomy& tax) : tax_(&tax) {}  // NOLINT(google-explicit-constructor)
    TaxonomyView(const Taxonomy& tax, NodeIndex masked) : tax_(&tax), masked_(masked) {}

    const Taxonomy& taxonomy() const { return *tax_; }
    NodeIndex masked() const { return masked_; }
    bool is_masked(NodeIndex i) const { return i == masked_; }

    std::vector<NodeIndex> parents(NodeIndex i) const;
    std::vector<NodeIndex> children(NodeIndex i) const;
    std::vector<NodeIndex> roots() const;

private:
    const Taxonomy* tax_;
    NodeIndex masked_ = -1;
};

}  // namespace taxoenrich

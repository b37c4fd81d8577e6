#include "taxoenrich/taxonomy.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace taxoenrich {

namespace {

constexpr const char* kPseudoLeafToken = "<pseudo-leaf>";
constexpr const char* kPseudoRootToken = "<pseudo-root>";

std::atomic<std::uint64_t> next_generation{1};

int placeholder_rank(Placeholder p) {
    switch (p) {
        case Placeholder::PseudoRoot: return 0;
        case Placeholder::None: return 1;
        case Placeholder::PseudoLeaf: return 2;
    }
    return 1;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::pair<std::string, std::string> split_tab(const std::string& line, const char* what, std::size_t lineno) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
        throw TaxonomyError(std::string(what) + " line " + std::to_string(lineno) + ": expected two tab-separated fields");
    }
    return {line.substr(0, tab), line.substr(tab + 1)};
}

}  // namespace

std::strong_ordering Endpoint::operator<=>(const Endpoint& other) const {
    if (auto c = placeholder_rank(placeholder) <=> placeholder_rank(other.placeholder); c != 0) return c;
    return id.compare(other.id) <=> 0;
}

std::string to_string(const Endpoint& e) {
    switch (e.placeholder) {
        case Placeholder::PseudoLeaf: return kPseudoLeafToken;
        case Placeholder::PseudoRoot: return kPseudoRootToken;
        case Placeholder::None: break;
    }
    return e.id;
}

Endpoint parse_endpoint(const std::string& text) {
    if (text == kPseudoLeafToken) return Endpoint::pseudo_leaf();
    if (text == kPseudoRootToken) return Endpoint::pseudo_root();
    return Endpoint::node(text);
}

std::size_t PositionHash::operator()(const Position& p) const {
    auto h = hash_string(p.parent.id, static_cast<std::uint64_t>(p.parent.placeholder));
    return static_cast<std::size_t>(hash_string(p.child.id, h ^ static_cast<std::uint64_t>(p.child.placeholder)));
}

Taxonomy::Taxonomy(std::vector<std::pair<NodeId, std::string>> terms, const std::vector<Edge>& edges)
    : generation_(next_generation.fetch_add(1)) {
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ids_.reserve(terms.size());
    names_.reserve(terms.size());
    for (auto& [id, name] : terms) {
        if (!ids_.empty() && ids_.back() == id) throw TaxonomyError("duplicate node id '" + id + "'");
        ids_.push_back(std::move(id));
        names_.push_back(std::move(name));
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], static_cast<NodeIndex>(i));

    parents_.resize(ids_.size());
    children_.resize(ids_.size());
    for (const auto& e : edges) {
        auto p = find(e.parent);
        auto c = find(e.child);
        if (!p) throw TaxonomyError("edge references unknown id '" + e.parent + "'");
        if (!c) throw TaxonomyError("edge references unknown id '" + e.child + "'");
        if (*p == *c) throw TaxonomyError("self-loop on '" + e.parent + "'");
        children_[*p].push_back(*c);
        parents_[*c].push_back(*p);
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        auto& ch = children_[i];
        std::sort(ch.begin(), ch.end());
        if (std::adjacent_find(ch.begin(), ch.end()) != ch.end()) {
            auto dup = *std::adjacent_find(ch.begin(), ch.end());
            throw TaxonomyError("duplicate edge '" + ids_[i] + "' -> '" + ids_[dup] + "'");
        }
        std::sort(parents_[i].begin(), parents_[i].end());
        num_edges_ += ch.size();
    }
    if (topological_order().size() != ids_.size()) throw TaxonomyError("cycle detected in edge relation");
}

std::optional<NodeIndex> Taxonomy::find(const NodeId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

NodeIndex Taxonomy::index_of(const NodeId& id) const {
    auto i = find(id);
    if (!i) throw TaxonomyError("unknown node '" + id + "'");
    return *i;
}

bool Taxonomy::has_edge(NodeIndex parent, NodeIndex child) const {
    const auto& ch = children(parent);
    return std::binary_search(ch.begin(), ch.end(), child);
}

std::vector<NodeIndex> Taxonomy::roots() const {
    std::vector<NodeIndex> out;
    for (std::size_t i = 0; i < ids_.size(); ++i)
        if (parents_[i].empty()) out.push_back(static_cast<NodeIndex>(i));
    return out;
}

std::vector<NodeIndex> Taxonomy::leaves() const {
    std::vector<NodeIndex> out;
    for (std::size_t i = 0; i < ids_.size(); ++i)
        if (children_[i].empty()) out.push_back(static_cast<NodeIndex>(i));
    return out;
}

std::vector<NodeIndex> Taxonomy::topological_order() const {
    std::vector<std::size_t> indegree(ids_.size());
    std::vector<NodeIndex> order;
    order.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        indegree[i] = parents_[i].size();
        if (indegree[i] == 0) order.push_back(static_cast<NodeIndex>(i));
    }
    for (std::size_t head = 0; head < order.size(); ++head) {
        for (auto c : children_[order[head]]) {
            if (--indegree[c] == 0) order.push_back(c);
        }
    }
    return order;
}

std::size_t Taxonomy::depth() const {
    std::vector<std::size_t> level(ids_.size(), 1);
    std::size_t best = 0;
    for (auto v : topological_order()) {
        for (auto c : children_[v]) level[c] = std::max(level[c], level[v] + 1);
        best = std::max(best, level[v]);
    }
    return best;
}

std::vector<Edge> Taxonomy::edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges_);
    for (std::size_t i = 0; i < ids_.size(); ++i)
        for (auto c : children_[i]) out.push_back({ids_[i], ids_[c]});
    return out;
}

std::vector<std::pair<NodeId, std::string>> Taxonomy::terms() const {
    std::vector<std::pair<NodeId, std::string>> out;
    out.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) out.emplace_back(ids_[i], names_[i]);
    return out;
}

Taxonomy load_taxonomy(std::istream& terms_in, std::istream& edges_in) {
    std::vector<std::pair<NodeId, std::string>> terms;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(terms_in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        auto [id, name] = split_tab(line, "terms", lineno);
        if (id.empty()) throw TaxonomyError("terms line " + std::to_string(lineno) + ": empty id");
        terms.emplace_back(std::move(id), std::move(name));
    }
    std::vector<Edge> edges;
    lineno = 0;
    while (std::getline(edges_in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        auto [p, c] = split_tab(line, "edges", lineno);
        edges.push_back({std::move(p), std::move(c)});
    }
    return Taxonomy(std::move(terms), edges);
}

Taxonomy load_taxonomy_files(const std::string& terms_path, const std::string& edges_path) {
    std::ifstream terms(terms_path);
    if (!terms) throw Error("cannot open terms file '" + terms_path + "'");
    std::ifstream edges(edges_path);
    if (!edges) throw Error("cannot open edges file '" + edges_path + "'");
    return load_taxonomy(terms, edges);
}

void write_taxonomy(const Taxonomy& tax, std::ostream& terms, std::ostream& edges) {
    for (const auto& [id, name] : tax.terms()) terms << id << '\t' << name << '\n';
    for (const auto& e : tax.edges()) edges << e.parent << '\t' << e.child << '\n';
}

Taxonomy add_pseudo_root(const Taxonomy& tax, const std::string& name) {
    if (tax.contains(name)) throw TaxonomyError("pseudo root name '" + name + "' collides with an existing node");
    auto terms = tax.terms();
    auto edges = tax.edges();
    for (auto r : tax.roots()) edges.push_back({name, tax.id(r)});
    terms.emplace_back(name, name);
    Taxonomy out(std::move(terms), edges);
    out.pseudo_root_ = name;
    return out;
}

std::vector<Position> enumerate_candidate_positions(const Taxonomy& tax, CandidateMode mode, bool include_root_slots) {
    if (tax.empty()) throw TaxonomyError("cannot enumerate candidates of an empty taxonomy");
    std::vector<Position> out;
    out.reserve(tax.num_nodes() + (mode == CandidateMode::Completion ? tax.num_edges() : 0));
    if (include_root_slots) {
        for (auto r : tax.roots()) out.push_back({Endpoint::pseudo_root(), Endpoint::node(tax.id(r))});
    }
    // Node indices follow id order, so emitting children then the leaf slot per
    // parent yields the canonical (parent, child) order directly.
    for (std::size_t i = 0; i < tax.num_nodes(); ++i) {
        auto p = static_cast<NodeIndex>(i);
        if (mode == CandidateMode::Completion) {
            for (auto c : tax.children(p)) out.push_back({Endpoint::node(tax.id(p)), Endpoint::node(tax.id(c))});
        }
        out.push_back({Endpoint::node(tax.id(p)), Endpoint::pseudo_leaf()});
    }
    return out;
}

std::vector<Position> true_positions(const Taxonomy& full, const NodeId& query) {
    auto q = full.index_of(query);
    const auto& parents = full.parents(q);
    if (parents.empty()) throw TaxonomyError("query '" + query + "' is a root and has no candidate parent");
    std::vector<Position> out;
    for (auto p : parents) {
        if (full.children(q).empty()) {
            out.push_back({Endpoint::node(full.id(p)), Endpoint::pseudo_leaf()});
        } else {
            for (auto c : full.children(q)) out.push_back({Endpoint::node(full.id(p)), Endpoint::node(full.id(c))});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Neighbors neighbors(const Taxonomy& tax, const NodeId& node) {
    auto i = tax.index_of(node);
    Neighbors out;
    for (auto p : tax.parents(i)) out.parents.push_back(tax.id(p));
    for (auto c : tax.children(i)) out.children.push_back(tax.id(c));
    return out;
}

namespace {

// Nearest non-removed nodes reachable from `start` through removed nodes only.
std::vector<NodeIndex> nearest_survivors(const Taxonomy& tax, NodeIndex start, const std::vector<bool>& removed,
                                         bool upward) {
    std::vector<NodeIndex> out;
    std::vector<NodeIndex> stack{start};
    std::unordered_set<NodeIndex> seen{start};
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (auto n : upward ? tax.parents(v) : tax.children(v)) {
            if (!seen.insert(n).second) continue;
            if (removed[n]) {
                stack.push_back(n);
            } else {
                out.push_back(n);
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

QueryEntry make_entry(const Taxonomy& tax, NodeIndex q, const std::vector<bool>& removed) {
    auto parents = nearest_survivors(tax, q, removed, true);
    auto children = nearest_survivors(tax, q, removed, false);
    QueryEntry entry{tax.id(q), {}};
    for (auto p : parents) {
        if (children.empty()) {
            entry.true_positions.push_back({Endpoint::node(tax.id(p)), Endpoint::pseudo_leaf()});
        } else {
            for (auto c : children)
                entry.true_positions.push_back({Endpoint::node(tax.id(p)), Endpoint::node(tax.id(c))});
        }
    }
    std::sort(entry.true_positions.begin(), entry.true_positions.end());
    return entry;
}

}  // namespace

DatasetSplit split_dataset(const Taxonomy& tax, std::size_t n_val, std::size_t n_test, std::uint64_t seed) {
    std::vector<NodeIndex> removable;
    for (std::size_t i = 0; i < tax.num_nodes(); ++i) {
        auto v = static_cast<NodeIndex>(i);
        if (!tax.parents(v).empty()) removable.push_back(v);
    }
    if (n_val + n_test > removable.size() || n_val + n_test + 1 >= tax.num_nodes()) {
        throw TaxonomyError("insufficient removable nodes: requested " + std::to_string(n_val + n_test) + ", have " +
                            std::to_string(removable.size()) + " non-root nodes");
    }
    Rng rng(seed);
    std::shuffle(removable.begin(), removable.end(), rng);
    std::vector<NodeIndex> val(removable.begin(), removable.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<NodeIndex> test(removable.begin() + static_cast<std::ptrdiff_t>(n_val),
                                removable.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());

    std::vector<bool> removed(tax.num_nodes(), false);
    for (auto v : val) removed[v] = true;
    for (auto v : test) removed[v] = true;

    std::vector<std::pair<NodeId, std::string>> terms;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < tax.num_nodes(); ++i) {
        auto u = static_cast<NodeIndex>(i);
        if (removed[u]) continue;
        terms.emplace_back(tax.id(u), tax.name(u));
        for (auto c : nearest_survivors(tax, u, removed, false)) edges.push_back({tax.id(u), tax.id(c)});
    }

    DatasetSplit split{Taxonomy(std::move(terms), edges), {}, {}};
    for (auto v : val) split.validation.push_back(make_entry(tax, v, removed));
    for (auto v : test) split.test.push_back(make_entry(tax, v, removed));
    return split;
}

void write_query_set(const QuerySet& queries, std::ostream& out) {
    for (const auto& e : queries)
        for (const auto& p : e.true_positions)
            out << e.query << '\t' << to_string(p.parent) << '\t' << to_string(p.child) << '\n';
}

QuerySet read_query_set(std::istream& in) {
    QuerySet out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        strip_cr(line);
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string q, p, c;
        if (!std::getline(fields, q, '\t') || !std::getline(fields, p, '\t') || !std::getline(fields, c, '\t')) {
            throw FormatError("query file line " + std::to_string(lineno) + ": expected three tab-separated fields");
        }
        if (out.empty() || out.back().query != q) out.push_back({q, {}});
        out.back().true_positions.push_back({parse_endpoint(p), parse_endpoint(c)});
    }
    for (auto& e : out) std::sort(e.true_positions.begin(), e.true_positions.end());
    return out;
}

std::vector<NodeIndex> TaxonomyView::parents(NodeIndex i) const {
    const auto& base = tax_->parents(i);
    if (masked_ < 0 || !std::binary_search(base.begin(), base.end(), masked_)) return base;
    std::vector<NodeIndex> out;
    for (auto p : base)
        if (p != masked_) out.push_back(p);
    for (auto p : tax_->parents(masked_)) out.push_back(p);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<NodeIndex> TaxonomyView::children(NodeIndex i) const {
    const auto& base = tax_->children(i);
    if (masked_ < 0 || !std::binary_search(base.begin(), base.end(), masked_)) return base;
    std::vector<NodeIndex> out;
    for (auto c : base)
        if (c != masked_) out.push_back(c);
    for (auto c : tax_->children(masked_)) out.push_back(c);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<NodeIndex> TaxonomyView::roots() const {
    std::vector<NodeIndex> out;
    for (std::size_t i = 0; i < tax_->num_nodes(); ++i) {
        auto v = static_cast<NodeIndex>(i);
        if (v != masked_ && parents(v).empty()) out.push_back(v);
    }
    return out;
}

}  // namespace taxoenrich

#include "taxoenrich/paths.hpp"

#include <algorithm>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace taxoenrich {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return a > kSaturated - b ? kSaturated : a + b; }

// Number of maximal paths from u to a root (upward) or a leaf (downward),
// counting u itself.
class PathCounter {
public:
    PathCounter(const TaxonomyView& view, bool upward) : view_(view), upward_(upward) {}

    std::vector<NodeIndex> next(NodeIndex u) const { return upward_ ? view_.parents(u) : view_.children(u); }

    std::uint64_t count(NodeIndex u) {
        if (auto it = memo_.find(u); it != memo_.end()) return it->second;
        auto nbrs = next(u);
        std::uint64_t total = nbrs.empty() ? 1 : 0;
        for (auto n : nbrs) total = sat_add(total, count(n));
        memo_.emplace(u, total);
        return total;
    }

    // Paths are indexed by walking neighbours in index order.
    std::vector<NodeIndex> decode(NodeIndex v, std::uint64_t k) {
        std::vector<NodeIndex> out;
        auto u = v;
        for (;;) {
            auto nbrs = next(u);
            if (nbrs.empty()) break;
            NodeIndex pick = nbrs.back();
            for (auto n : nbrs) {
                auto c = count(n);
                if (k < c) {
                    pick = n;
                    break;
                }
                k -= c;
            }
            out.push_back(pick);
            u = pick;
        }
        return out;
    }

private:
    const TaxonomyView& view_;
    bool upward_;
    std::unordered_map<NodeIndex, std::uint64_t> memo_;
};

std::vector<std::uint64_t> pick_indices(std::uint64_t total, std::size_t max_paths, std::uint64_t seed) {
    std::vector<std::uint64_t> out;
    if (total <= max_paths) {
        out.resize(total);
        for (std::uint64_t i = 0; i < total; ++i) out[i] = i;
        return out;
    }
    // Floyd's algorithm: m distinct uniform draws from [0, total).
    Rng rng(seed);
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = total - max_paths; j < total; ++j) {
        auto t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    return {chosen.begin(), chosen.end()};
}

std::vector<TaxoPath> collect_paths(const TaxonomyView& view, NodeIndex v, std::size_t max_paths, std::uint64_t seed,
                                    PathKind kind) {
    bool upward = kind == PathKind::Ancestral;
    PathCounter counter(view, upward);
    auto nbrs = counter.next(v);
    if (nbrs.empty() || max_paths == 0) return {};
    auto total = counter.count(v);
    std::vector<TaxoPath> out;
    for (auto k : pick_indices(total, max_paths, seed)) {
        TaxoPath path{counter.decode(v, k), kind, v};
        if (upward) std::reverse(path.nodes.begin(), path.nodes.end());
        out.push_back(std::move(path));
    }
    std::sort(out.begin(), out.end(), [](const TaxoPath& a, const TaxoPath& b) { return a.nodes < b.nodes; });
    return out;
}

bool better(const std::vector<NodeIndex>& a, const std::vector<NodeIndex>& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a < b;
}

class LongestPath {
public:
    LongestPath(const TaxonomyView& view, bool upward) : view_(view), upward_(upward) {}

    // Best maximal path through u, oriented root-first (upward) or u-first
    // (downward), including u.
    const std::vector<NodeIndex>& best(NodeIndex u) {
        if (auto it = memo_.find(u); it != memo_.end()) return it->second;
        auto tail = best_excluding(u);
        std::vector<NodeIndex> path;
        if (upward_) {
            path = std::move(tail);
            path.push_back(u);
        } else {
            path.push_back(u);
            path.insert(path.end(), tail.begin(), tail.end());
        }
        return memo_.emplace(u, std::move(path)).first->second;
    }

    std::vector<NodeIndex> best_excluding(NodeIndex v) {
        std::vector<NodeIndex> result;
        bool found = false;
        for (auto n : upward_ ? view_.parents(v) : view_.children(v)) {
            const auto& cand = best(n);
            if (!found || better(cand, result)) {
                result = cand;
                found = true;
            }
        }
        return result;
    }

private:
    const TaxonomyView& view_;
    bool upward_;
    std::unordered_map<NodeIndex, std::vector<NodeIndex>> memo_;
};

const char* template_phrase(SentenceTemplate t) {
    switch (t) {
        case SentenceTemplate::Superclass: return "is a superclass of";
        case SentenceTemplate::Ascendant: return "is an ascendant of";
        case SentenceTemplate::Subclass: return "is a subclass of";
        case SentenceTemplate::Descendant: return "is a descendant of";
    }
    return "";
}

PathKind template_kind(SentenceTemplate t) {
    return (t == SentenceTemplate::Superclass || t == SentenceTemplate::Ascendant) ? PathKind::Ancestral
                                                                                    : PathKind::Descendant;
}

}  // namespace

std::vector<TaxoPath> ancestral_paths(const TaxonomyView& view, NodeIndex v, std::size_t max_paths,
                                      std::uint64_t seed) {
    return collect_paths(view, v, max_paths, seed, PathKind::Ancestral);
}

std::vector<TaxoPath> descendant_paths(const TaxonomyView& view, NodeIndex v, std::size_t max_paths,
                                       std::uint64_t seed) {
    return collect_paths(view, v, max_paths, seed, PathKind::Descendant);
}

std::uint64_t count_ancestral_paths(const TaxonomyView& view, NodeIndex v) {
    PathCounter counter(view, true);
    return counter.next(v).empty() ? 0 : counter.count(v);
}

std::uint64_t count_descendant_paths(const TaxonomyView& view, NodeIndex v) {
    PathCounter counter(view, false);
    return counter.next(v).empty() ? 0 : counter.count(v);
}

TaxoPath longest_ancestral_path(const TaxonomyView& view, NodeIndex v) {
    LongestPath lp(view, true);
    return {lp.best_excluding(v), PathKind::Ancestral, v};
}

TaxoPath longest_descendant_path(const TaxonomyView& view, NodeIndex v) {
    LongestPath lp(view, false);
    return {lp.best_excluding(v), PathKind::Descendant, v};
}

const TaxoPath& sample_path(const std::vector<TaxoPath>& paths, Rng& rng) {
    if (paths.empty()) throw Error("cannot sample from an empty path list");
    return paths[uniform_index(rng, paths.size())];
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

PseudoSentence render_sentence(const std::vector<std::string>& path_names, const std::string& anchor_name,
                               PathKind kind, SentenceTemplate tmpl, const NodeId& anchor_id) {
    if (template_kind(tmpl) != kind) throw Error("sentence template does not match the path kind");
    if (path_names.empty()) throw Error("cannot render a sentence for an empty path");
    std::string prefix;
    for (std::size_t i = 0; i < path_names.size(); ++i) {
        if (i) prefix += ", ";
        prefix += path_names[i];
    }
    prefix += ' ';
    prefix += template_phrase(tmpl);
    auto begin = whitespace_tokens(prefix).size();
    auto end = begin + whitespace_tokens(anchor_name).size();
    return {anchor_id, kind, prefix + ' ' + anchor_name, {begin, end}};
}

PseudoSentence render_sentence(const Taxonomy& tax, const TaxoPath& path, SentenceTemplate tmpl) {
    std::vector<std::string> names;
    names.reserve(path.nodes.size());
    for (auto n : path.nodes) names.push_back(tax.name(n));
    return render_sentence(names, tax.name(path.anchor), path.kind, tmpl, tax.id(path.anchor));
}

std::string to_string(PathKind kind) { return kind == PathKind::Ancestral ? "ancestral" : "descendant"; }

SentenceTemplate parse_template(const std::string& name) {
    if (name == "superclass") return SentenceTemplate::Superclass;
    if (name == "ascendant") return SentenceTemplate::Ascendant;
    if (name == "subclass") return SentenceTemplate::Subclass;
    if (name == "descendant") return SentenceTemplate::Descendant;
    throw Error("unknown sentence template '" + name + "'");
}

std::size_t emit_sentence_corpus(const Taxonomy& tax, const CorpusOptions& options, std::ostream& sink) {
    std::size_t count = 0;
    auto write = [&](const PseudoSentence& s) {
        sink << s.anchor << '\t' << to_string(s.kind) << '\t' << s.text << '\t' << s.anchor_span.begin << ':'
             << s.anchor_span.end << '\n';
        ++count;
    };
    for (std::size_t i = 0; i < tax.num_nodes(); ++i) {
        auto v = static_cast<NodeIndex>(i);
        auto node_seed = hash_string(tax.id(v), options.seed);
        for (const auto& p : ancestral_paths(tax, v, options.max_paths, derive_seed(node_seed, 0)))
            write(render_sentence(tax, p, options.ancestral_template));
        for (const auto& p : descendant_paths(tax, v, options.max_paths, derive_seed(node_seed, 1)))
            write(render_sentence(tax, p, options.descendant_template));
    }
    sink.flush();
    if (!sink) throw Error("failed writing sentence corpus");
    return count;
}

std::vector<PseudoSentence> read_sentence_corpus(std::istream& in) {
    std::vector<PseudoSentence> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream fs(line);
        std::string f;
        while (std::getline(fs, f, '\t')) fields.push_back(f);
        auto fail = [&](const std::string& why) {
            return FormatError("sentence corpus line " + std::to_string(lineno) + ": " + why);
        };
        if (fields.size() != 4) throw fail("expected four tab-separated fields");
        PseudoSentence s;
        s.anchor = fields[0];
        if (fields[1] == "ancestral") {
            s.kind = PathKind::Ancestral;
        } else if (fields[1] == "descendant") {
            s.kind = PathKind::Descendant;
        } else {
            throw fail("unknown kind '" + fields[1] + "'");
        }
        s.text = fields[2];
        auto colon = fields[3].find(':');
        if (colon == std::string::npos) throw fail("malformed anchor span");
        try {
            s.anchor_span = {std::stoul(fields[3].substr(0, colon)), std::stoul(fields[3].substr(colon + 1))};
        } catch (const std::exception&) {
            throw fail("malformed anchor span");
        }
        if (s.anchor_span.end > whitespace_tokens(s.text).size() || s.anchor_span.begin > s.anchor_span.end)
            throw fail("anchor span out of range");
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace taxoenrich

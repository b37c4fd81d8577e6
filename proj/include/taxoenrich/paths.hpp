#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "taxoenrich/taxonomy.hpp"

namespace taxoenrich {

enum class PathKind { Ancestral, Descendant };

// Ancestral paths run root-first and stop before the anchor. Descendant paths
// start at a child of the anchor and end at a leaf.
struct TaxoPath {
    std::vector<NodeIndex> nodes;
    PathKind kind = PathKind::Ancestral;
    NodeIndex anchor = -1;

    bool operator==(const TaxoPath&) const = default;
};

inline constexpr std::size_t kDefaultMaxPaths = 32;

// All root-to-v paths with v stripped, or a uniform sample of `max_paths` of
// them (without replacement) when more exist. Sorted lexicographically.
std::vector<TaxoPath> ancestral_paths(const TaxonomyView& view, NodeIndex v, std::size_t max_paths,
                                      std::uint64_t seed);
std::vector<TaxoPath> descendant_paths(const TaxonomyView& view, NodeIndex v, std::size_t max_paths,
                                       std::uint64_t seed);

// Total path counts, saturating at UINT64_MAX.
std::uint64_t count_ancestral_paths(const TaxonomyView& view, NodeIndex v);
std::uint64_t count_descendant_paths(const TaxonomyView& view, NodeIndex v);

// Deterministic choice used at evaluation time: the longest path, ties broken
// by the lexicographically smallest node sequence. Empty when v has no path.
TaxoPath longest_ancestral_path(const TaxonomyView& view, NodeIndex v);
TaxoPath longest_descendant_path(const TaxonomyView& view, NodeIndex v);

// Throws Error on an empty list.
const TaxoPath& sample_path(const std::vector<TaxoPath>& paths, Rng& rng);

enum class SentenceTemplate { Superclass, Ascendant, Subclass, Descendant };

struct TokenSpan {
    std::size_t begin = 0;  // whitespace-token index, half-open
    std::size_t end = 0;

    bool operator==(const TokenSpan&) const = default;
};

struct PseudoSentence {
    NodeId anchor;
    PathKind kind = PathKind::Ancestral;
    std::string text;
    TokenSpan anchor_span;

    bool operator==(const PseudoSentence&) const = default;
};

// "<p1>, ..., <pk> is a superclass of <v>" and its three siblings.
PseudoSentence render_sentence(const Taxonomy& tax, const TaxoPath& path, SentenceTemplate tmpl);
// Name-level form, for paths whose nodes are given by surface name.
PseudoSentence render_sentence(const std::vector<std::string>& path_names, const std::string& anchor_name,
                               PathKind kind, SentenceTemplate tmpl, const NodeId& anchor_id = {});

struct CorpusOptions {
    std::size_t max_paths = kDefaultMaxPaths;
    std::uint64_t seed = 0;
    SentenceTemplate ancestral_template = SentenceTemplate::Superclass;
    SentenceTemplate descendant_template = SentenceTemplate::Subclass;
};

// Record format, one per line: node_id<TAB>kind<TAB>text<TAB>begin:end
std::size_t emit_sentence_corpus(const Taxonomy& tax, const CorpusOptions& options, std::ostream& sink);
std::vector<PseudoSentence> read_sentence_corpus(std::istream& in);

std::string to_string(PathKind kind);
SentenceTemplate parse_template(const std::string& name);
std::vector<std::string> whitespace_tokens(const std::string& text);

}  // namespace taxoenrich

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taxoenrich/embeddings.hpp"
#include "taxoenrich/nn/lstm.hpp"
#include "taxoenrich/nn/ntn.hpp"
#include "taxoenrich/paths.hpp"
#include "taxoenrich/taxonomy.hpp"

namespace taxoenrich {

// Full model, or the ablation without the sibling scorer and sibling context.
enum class Variant { Full, NoSibling };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct ModelDims {
    int embed_dim = 0;   // d, size of x_v and e_q
    int hidden_dim = 0;  // h, LSTM state size
    int slices = 0;      // k, NTN slices per scorer

    int position_dim() const { return embed_dim + hidden_dim; }
    bool operator==(const ModelDims&) const = default;
};

// Every learnable block. g(.) vectors have size d + h; the sibling bilinear map
// is d x (2(d + h) + d).
template <typename Scalar>
struct ModelParams {
    using scalar_type = Scalar;

    ModelDims dims;
    Variant variant = Variant::Full;
    nn::LstmParams<Scalar> parent_lstm;
    nn::LstmParams<Scalar> child_lstm;
    Matrix<Scalar> sibling_bilinear;
    // S1 parent, S2 child, S3 siblings, S4 whole position.
    std::array<nn::NtnParams<Scalar>, 4> scorers;
    Vector<Scalar> primal_weights;  // 4k, or 3k without siblings
    Vector<Scalar> pseudo_leaf;     // placeholder embedding rows, start at zero
    Vector<Scalar> pseudo_root;

    static ModelParams zeros(ModelDims dims, Variant variant);
    static ModelParams init(ModelDims dims, Variant variant, std::uint64_t seed);

    template <typename Other>
    ModelParams<Other> cast() const;

    template <class Self, class F>
    static void visit(Self& self, F&& f) {
        auto prefixed = [&f](std::string prefix) {
            return [&f, prefix](const std::string& name, auto& block) { f(prefix + name, block); };
        };
        nn::LstmParams<Scalar>::visit(self.parent_lstm, prefixed("parent_lstm."));
        nn::LstmParams<Scalar>::visit(self.child_lstm, prefixed("child_lstm."));
        f("sibling_bilinear", self.sibling_bilinear);
        for (std::size_t i = 0; i < self.scorers.size(); ++i)
            nn::NtnParams<Scalar>::visit(self.scorers[i], prefixed("s" + std::to_string(i + 1) + "."));
        f("primal_weights", self.primal_weights);
        f("pseudo_leaf", self.pseudo_leaf);
        f("pseudo_root", self.pseudo_root);
    }
};

// Resolved endpoint: a node index, or a placeholder (index -1).
struct Slot {
    Placeholder placeholder = Placeholder::None;
    NodeIndex index = -1;

    static Slot node(NodeIndex i) { return {Placeholder::None, i}; }
    static Slot leaf() { return {Placeholder::PseudoLeaf, -1}; }
    static Slot root() { return {Placeholder::PseudoRoot, -1}; }
    bool operator==(const Slot&) const = default;
};

Slot resolve(const Taxonomy& tax, const Endpoint& e);

enum class PathPolicy {
    Sample,   // uniform over (at most max_paths) paths; training
    Longest,  // longest path, lexicographic tie-break; evaluation
};

struct EncoderOptions {
    PathPolicy policy = PathPolicy::Sample;
    std::size_t max_paths = kDefaultMaxPaths;
};

template <typename Scalar>
struct NodeEncoding {
    Vector<Scalar> value;  // x_v (+) LSTM(path)
    Slot slot;
    nn::LstmTape<Scalar> tape;
};

// Embedding of a slot: the table row, or the placeholder row.
template <typename Scalar>
Vector<Scalar> slot_embedding(const ModelParams<Scalar>& params, const EmbeddingTable& table, const Taxonomy& tax,
                              Slot slot);

// Path node embeddings as columns, in path order.
template <typename Scalar>
Matrix<Scalar> gather_embeddings(const EmbeddingTable& table, const Taxonomy& tax, std::span<const NodeIndex> nodes);

// g(p): x_p (+) LSTM over an ancestral path of p, fed root-first.
template <typename Scalar>
NodeEncoding<Scalar> encode_parent(const ModelParams<Scalar>& params, const EmbeddingTable& table,
                                   const TaxonomyView& view, Slot parent, const EncoderOptions& options, Rng& rng);

// g(c): x_c (+) LSTM over a descendant path of c, fed child-to-leaf.
template <typename Scalar>
NodeEncoding<Scalar> encode_child(const ModelParams<Scalar>& params, const EmbeddingTable& table,
                                  const TaxonomyView& view, Slot child, const EncoderOptions& options, Rng& rng);

// Uniform sample without replacement of min(t, |pool|) children of `parent`,
// excluding `exclude`. Children of PseudoRoot are the roots.
std::vector<NodeIndex> select_siblings(const TaxonomyView& view, Slot parent, Slot exclude, std::size_t t, Rng& rng);

template <typename Scalar>
struct AttentionTape {
    Vector<Scalar> query;
    Vector<Scalar> projected;  // W_sib^T e_q
    Vector<Scalar> parent;
    Vector<Scalar> child;
    Matrix<Scalar> siblings;   // d x t
    Vector<Scalar> alpha;
};

template <typename Scalar>
struct AttentionOutput {
    Vector<Scalar> aggregate;  // a(p), size d
    Vector<Scalar> alpha;      // empty without siblings
};

// phi_i = e_q^T W_sib [g_p; g_c; x_si], alpha = softmax(phi), a = sum alpha_i x_si.
template <typename Scalar>
AttentionOutput<Scalar> sibling_attention(const Matrix<Scalar>& sibling_bilinear, const Vector<Scalar>& query,
                                          const Vector<Scalar>& parent, const Vector<Scalar>& child,
                                          const Matrix<Scalar>& siblings, AttentionTape<Scalar>* tape = nullptr);

// Accumulates into d_bilinear, d_parent and d_child.
template <typename Scalar>
void sibling_attention_backward(const Matrix<Scalar>& sibling_bilinear, const AttentionTape<Scalar>& tape,
                                const Vector<Scalar>& d_aggregate, Matrix<Scalar>& d_bilinear,
                                Vector<Scalar>& d_parent, Vector<Scalar>& d_child);

template <typename Scalar>
struct ScoreBundle {
    Scalar s1 = 0;
    Scalar s2 = 0;
    Scalar s3 = 0;
    Scalar s4 = 0;
    Scalar sp = 0;
    Vector<Scalar> alpha;

    std::array<Scalar, 4> auxiliary() const { return {s1, s2, s3, s4}; }
};

template <typename Scalar>
struct ScoreTape {
    std::array<nn::NtnTape<Scalar>, 4> ntn;
    AttentionTape<Scalar> attention;
    Vector<Scalar> primal_input;  // concatenated NTN activations
};

// Scores from already-encoded g(p), g(c) and sibling embeddings (d x t).
template <typename Scalar>
ScoreBundle<Scalar> score_encoded(const ModelParams<Scalar>& params, const Vector<Scalar>& query,
                                  const Vector<Scalar>& parent, const Vector<Scalar>& child,
                                  const Matrix<Scalar>& siblings, ScoreTape<Scalar>* tape = nullptr);

// d_aux holds dLoss/d(s1..s4); d_sp is dLoss/d(sp). Accumulates parameter
// gradients and writes dLoss/dg(p), dLoss/dg(c).
template <typename Scalar>
void score_encoded_backward(const ModelParams<Scalar>& params, const ScoreTape<Scalar>& tape, Scalar d_sp,
                            const std::array<Scalar, 4>& d_aux, ModelParams<Scalar>& grads, Vector<Scalar>& d_parent,
                            Vector<Scalar>& d_child);

template <typename Scalar>
struct PositionTrace {
    NodeEncoding<Scalar> parent;
    NodeEncoding<Scalar> child;
    std::vector<NodeIndex> siblings;
    ScoreTape<Scalar> tape;
    ScoreBundle<Scalar> scores;
};

// Encodes and scores one position. Path draws use `path_rng`, sibling draws
// `sibling_rng`; the no-sibling variant never touches `sibling_rng`.
template <typename Scalar>
PositionTrace<Scalar> forward_position(const ModelParams<Scalar>& params, const Vector<Scalar>& query,
                                       const TaxonomyView& view, const EmbeddingTable& table, Slot parent, Slot child,
                                       std::size_t siblings, const EncoderOptions& options, Rng& path_rng,
                                       Rng& sibling_rng);

template <typename Scalar>
void backward_position(const ModelParams<Scalar>& params, const PositionTrace<Scalar>& trace, Scalar d_sp,
                       const std::array<Scalar, 4>& d_aux, ModelParams<Scalar>& grads);

template <typename Scalar>
ScoreBundle<Scalar> score_position(const ModelParams<Scalar>& params, const Vector<Scalar>& query,
                                   const TaxonomyView& view, const EmbeddingTable& table, const Position& position,
                                   std::size_t siblings, const EncoderOptions& options, Rng& rng);

}  // namespace taxoenrich

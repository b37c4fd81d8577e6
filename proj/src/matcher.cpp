#include "taxoenrich/matcher.hpp"

#include <algorithm>
#include <numeric>

namespace taxoenrich {

std::string to_string(Variant v) { return v == Variant::Full ? "full" : "no-sibling"; }

Variant parse_variant(const std::string& name) {
    if (name == "full" || name == "taxoenrich") return Variant::Full;
    if (name == "no-sibling" || name == "taxoenrich-s") return Variant::NoSibling;
    throw Error("unknown model variant '" + name + "'");
}

namespace {

int s4_input_dim(const ModelDims& dims, Variant variant) {
    int base = 2 * dims.position_dim();
    return variant == Variant::Full ? base + dims.embed_dim : base;
}

int active_scorers(Variant variant) { return variant == Variant::Full ? 4 : 3; }

bool scorer_active(Variant variant, std::size_t i) { return variant == Variant::Full || i != 2; }

}  // namespace

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::zeros(ModelDims dims, Variant variant) {
    if (dims.embed_dim <= 0 || dims.hidden_dim <= 0 || dims.slices <= 0)
        throw DimensionError("model dimensions must be positive");
    const int d = dims.embed_dim;
    const int g = dims.position_dim();
    ModelParams p;
    p.dims = dims;
    p.variant = variant;
    p.parent_lstm = nn::LstmParams<Scalar>::zeros(d, dims.hidden_dim);
    p.child_lstm = nn::LstmParams<Scalar>::zeros(d, dims.hidden_dim);
    p.sibling_bilinear = Matrix<Scalar>::Zero(d, 2 * g + d);
    p.scorers[0] = nn::NtnParams<Scalar>::zeros(d, g, dims.slices);
    p.scorers[1] = nn::NtnParams<Scalar>::zeros(d, g, dims.slices);
    p.scorers[2] = nn::NtnParams<Scalar>::zeros(d, d, dims.slices);
    p.scorers[3] = nn::NtnParams<Scalar>::zeros(d, s4_input_dim(dims, variant), dims.slices);
    p.primal_weights = Vector<Scalar>::Zero(active_scorers(variant) * dims.slices);
    p.pseudo_leaf = Vector<Scalar>::Zero(d);
    p.pseudo_root = Vector<Scalar>::Zero(d);
    return p;
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::init(ModelDims dims, Variant variant, std::uint64_t seed) {
    auto p = zeros(dims, variant);
    Rng rng(seed);
    const int d = dims.embed_dim;
    const int g = dims.position_dim();
    p.parent_lstm = nn::LstmParams<Scalar>::random(d, dims.hidden_dim, rng);
    p.child_lstm = nn::LstmParams<Scalar>::random(d, dims.hidden_dim, rng);
    nn::init_uniform(p.sibling_bilinear, p.sibling_bilinear.cols(), rng);
    p.scorers[0] = nn::NtnParams<Scalar>::random(d, g, dims.slices, rng);
    p.scorers[1] = nn::NtnParams<Scalar>::random(d, g, dims.slices, rng);
    p.scorers[2] = nn::NtnParams<Scalar>::random(d, d, dims.slices, rng);
    p.scorers[3] = nn::NtnParams<Scalar>::random(d, s4_input_dim(dims, variant), dims.slices, rng);
    nn::init_uniform(p.primal_weights, p.primal_weights.size(), rng);
    return p;
}

template <typename Scalar>
template <typename Other>
ModelParams<Other> ModelParams<Scalar>::cast() const {
    auto out = ModelParams<Other>::zeros(dims, variant);
    auto src = nn::tensors(*this);
    auto dst = nn::tensors(out);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].map() = src[i].map().template cast<Other>();
    return out;
}

Slot resolve(const Taxonomy& tax, const Endpoint& e) {
    switch (e.placeholder) {
        case Placeholder::PseudoLeaf: return Slot::leaf();
        case Placeholder::PseudoRoot: return Slot::root();
        case Placeholder::None: break;
    }
    return Slot::node(tax.index_of(e.id));
}

template <typename Scalar>
Vector<Scalar> slot_embedding(const ModelParams<Scalar>& params, const EmbeddingTable& table, const Taxonomy& tax,
                              Slot slot) {
    switch (slot.placeholder) {
        case Placeholder::PseudoLeaf: return params.pseudo_leaf;
        case Placeholder::PseudoRoot: return params.pseudo_root;
        case Placeholder::None: break;
    }
    if (table.dim() != params.dims.embed_dim) {
        throw DimensionError("embedding table dim " + std::to_string(table.dim()) + " does not match model dim " +
                             std::to_string(params.dims.embed_dim));
    }
    return table.lookup_as<Scalar>(tax.id(slot.index));
}

template <typename Scalar>
Matrix<Scalar> gather_embeddings(const EmbeddingTable& table, const Taxonomy& tax, std::span<const NodeIndex> nodes) {
    Matrix<Scalar> out(table.dim(), static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = table.lookup(tax.id(nodes[i])).template cast<Scalar>();
    return out;
}

namespace {

TaxoPath choose_path(const TaxonomyView& view, NodeIndex v, PathKind kind, const EncoderOptions& options, Rng& rng) {
    if (options.policy == PathPolicy::Longest) {
        return kind == PathKind::Ancestral ? longest_ancestral_path(view, v) : longest_descendant_path(view, v);
    }
    auto seed = rng();
    auto paths = kind == PathKind::Ancestral ? ancestral_paths(view, v, options.max_paths, seed)
                                             : descendant_paths(view, v, options.max_paths, seed);
    if (paths.empty()) return {{}, kind, v};
    return sample_path(paths, rng);
}

template <typename Scalar>
NodeEncoding<Scalar> encode(const ModelParams<Scalar>& params, const nn::LstmParams<Scalar>& lstm,
                            const EmbeddingTable& table, const TaxonomyView& view, Slot slot, PathKind kind,
                            const EncoderOptions& options, Rng& rng) {
    const auto& tax = view.taxonomy();
    const int d = params.dims.embed_dim;
    NodeEncoding<Scalar> enc;
    enc.slot = slot;
    enc.value.resize(params.dims.position_dim());
    enc.value.head(d) = slot_embedding(params, table, tax, slot);
    std::vector<NodeIndex> path;
    if (slot.placeholder == Placeholder::None) path = choose_path(view, slot.index, kind, options, rng).nodes;
    auto inputs = gather_embeddings<Scalar>(table, tax, path);
    enc.value.tail(params.dims.hidden_dim) = nn::lstm_forward(lstm, inputs, &enc.tape);
    return enc;
}

template <typename Scalar>
void encode_backward(const ModelParams<Scalar>& params, const nn::LstmParams<Scalar>& lstm,
                     nn::LstmParams<Scalar>& lstm_grads, const NodeEncoding<Scalar>& enc, const Vector<Scalar>& d_value,
                     ModelParams<Scalar>& grads) {
    const int d = params.dims.embed_dim;
    if (enc.slot.placeholder == Placeholder::PseudoLeaf) grads.pseudo_leaf += d_value.head(d);
    if (enc.slot.placeholder == Placeholder::PseudoRoot) grads.pseudo_root += d_value.head(d);
    if (enc.tape.inputs.cols() > 0) {
        Vector<Scalar> d_hidden = d_value.tail(params.dims.hidden_dim);
        nn::lstm_backward(lstm, enc.tape, d_hidden, lstm_grads);
    }
}

}  // namespace

template <typename Scalar>
NodeEncoding<Scalar> encode_parent(const ModelParams<Scalar>& params, const EmbeddingTable& table,
                                   const TaxonomyView& view, Slot parent, const EncoderOptions& options, Rng& rng) {
    if (parent.placeholder == Placeholder::PseudoLeaf) throw Error("PseudoLeaf cannot be a candidate parent");
    return encode(params, params.parent_lstm, table, view, parent, PathKind::Ancestral, options, rng);
}

template <typename Scalar>
NodeEncoding<Scalar> encode_child(const ModelParams<Scalar>& params, const EmbeddingTable& table,
                                  const TaxonomyView& view, Slot child, const EncoderOptions& options, Rng& rng) {
    if (child.placeholder == Placeholder::PseudoRoot) throw Error("PseudoRoot cannot be a candidate child");
    return encode(params, params.child_lstm, table, view, child, PathKind::Descendant, options, rng);
}

std::vector<NodeIndex> select_siblings(const TaxonomyView& view, Slot parent, Slot exclude, std::size_t t, Rng& rng) {
    std::vector<NodeIndex> pool;
    if (parent.placeholder == Placeholder::PseudoRoot) {
        pool = view.roots();
    } else if (parent.placeholder == Placeholder::None) {
        pool = view.children(parent.index);
    }
    if (exclude.placeholder == Placeholder::None) std::erase(pool, exclude.index);
    const std::size_t n = std::min(t, pool.size());
    // Partial Fisher-Yates over the sorted pool.
    for (std::size_t i = 0; i < n; ++i) {
        auto j = i + uniform_index(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    return pool;
}

template <typename Scalar>
AttentionOutput<Scalar> sibling_attention(const Matrix<Scalar>& sibling_bilinear, const Vector<Scalar>& query,
                                          const Vector<Scalar>& parent, const Vector<Scalar>& child,
                                          const Matrix<Scalar>& siblings, AttentionTape<Scalar>* tape) {
    const Eigen::Index d = query.size();
    const Eigen::Index g = parent.size();
    if (sibling_bilinear.rows() != d || sibling_bilinear.cols() != 2 * g + siblings.rows() || child.size() != g ||
        (siblings.cols() > 0 && siblings.rows() != d)) {
        throw DimensionError("sibling attention: inconsistent dimensions");
    }
    AttentionOutput<Scalar> out{Vector<Scalar>::Zero(d), Vector<Scalar>()};
    if (siblings.cols() == 0) {
        if (tape) *tape = {query, Vector<Scalar>(), parent, child, siblings, Vector<Scalar>()};
        return out;
    }
    Vector<Scalar> projected = sibling_bilinear.transpose() * query;
    const Scalar shared = projected.head(g).dot(parent) + projected.segment(g, g).dot(child);
    Vector<Scalar> phi = (siblings.transpose() * projected.tail(d)).array() + shared;
    Vector<Scalar> alpha = (phi.array() - phi.maxCoeff()).exp();
    alpha /= alpha.sum();
    out.aggregate.noalias() = siblings * alpha;
    out.alpha = alpha;
    if (tape) *tape = {query, std::move(projected), parent, child, siblings, std::move(alpha)};
    return out;
}

template <typename Scalar>
void sibling_attention_backward(const Matrix<Scalar>& sibling_bilinear, const AttentionTape<Scalar>& tape,
                                const Vector<Scalar>& d_aggregate, Matrix<Scalar>& d_bilinear,
                                Vector<Scalar>& d_parent, Vector<Scalar>& d_child) {
    (void)sibling_bilinear;
    if (tape.siblings.cols() == 0) return;
    const Eigen::Index d = tape.query.size();
    const Eigen::Index g = tape.parent.size();
    Vector<Scalar> d_alpha = tape.siblings.transpose() * d_aggregate;
    Vector<Scalar> d_phi = tape.alpha.cwiseProduct((d_alpha.array() - tape.alpha.dot(d_alpha)).matrix());
    // dphi_i/dW = e_q z_i^T with z_i = [g_p; g_c; x_si].
    const Scalar d_shared = d_phi.sum();
    d_bilinear.leftCols(g).noalias() += d_shared * tape.query * tape.parent.transpose();
    d_bilinear.middleCols(g, g).noalias() += d_shared * tape.query * tape.child.transpose();
    d_bilinear.rightCols(d).noalias() += tape.query * (tape.siblings * d_phi).transpose();
    d_parent += d_shared * tape.projected.head(g);
    d_child += d_shared * tape.projected.segment(g, g);
}

template <typename Scalar>
ScoreBundle<Scalar> score_encoded(const ModelParams<Scalar>& params, const Vector<Scalar>& query,
                                  const Vector<Scalar>& parent, const Vector<Scalar>& child,
                                  const Matrix<Scalar>& siblings, ScoreTape<Scalar>* tape) {
    const int d = params.dims.embed_dim;
    const int g = params.dims.position_dim();
    const int k = params.dims.slices;
    if (query.size() != d || parent.size() != g || child.size() != g) {
        throw DimensionError("score: query must have size " + std::to_string(d) + " and encodings size " +
                             std::to_string(g));
    }
    const bool full = params.variant == Variant::Full;
    ScoreBundle<Scalar> out;
    std::array<nn::NtnTape<Scalar>, 4> local;
    auto& tapes = tape ? tape->ntn : local;

    Vector<Scalar> position_input(s4_input_dim(params.dims, params.variant));
    position_input.head(g) = parent;
    position_input.segment(g, g) = child;

    Vector<Scalar> primal_input(params.primal_weights.size());
    auto s1 = nn::ntn_forward(params.scorers[0], query, parent, &tapes[0]);
    auto s2 = nn::ntn_forward(params.scorers[1], query, child, &tapes[1]);
    out.s1 = s1.score;
    out.s2 = s2.score;
    primal_input.segment(0, k) = s1.activation;
    primal_input.segment(k, k) = s2.activation;
    if (full) {
        auto attention = sibling_attention(params.sibling_bilinear, query, parent, child, siblings,
                                           tape ? &tape->attention : nullptr);
        position_input.tail(d) = attention.aggregate;
        auto s3 = nn::ntn_forward(params.scorers[2], query, attention.aggregate, &tapes[2]);
        out.s3 = s3.score;
        out.alpha = std::move(attention.alpha);
        primal_input.segment(2 * k, k) = s3.activation;
    }
    auto s4 = nn::ntn_forward(params.scorers[3], query, position_input, &tapes[3]);
    out.s4 = s4.score;
    primal_input.tail(k) = s4.activation;
    out.sp = params.primal_weights.dot(primal_input);
    if (tape) tape->primal_input = std::move(primal_input);
    return out;
}

template <typename Scalar>
void score_encoded_backward(const ModelParams<Scalar>& params, const ScoreTape<Scalar>& tape, Scalar d_sp,
                            const std::array<Scalar, 4>& d_aux, ModelParams<Scalar>& grads, Vector<Scalar>& d_parent,
                            Vector<Scalar>& d_child) {
    const int d = params.dims.embed_dim;
    const int g = params.dims.position_dim();
    const int k = params.dims.slices;
    const bool full = params.variant == Variant::Full;
    grads.primal_weights += d_sp * tape.primal_input;

    d_parent = Vector<Scalar>::Zero(g);
    d_child = Vector<Scalar>::Zero(g);
    Vector<Scalar> d_aggregate = Vector<Scalar>::Zero(d);
    Vector<Scalar> d_v;

    Eigen::Index offset = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        if (!scorer_active(params.variant, i)) continue;
        Vector<Scalar> d_act = d_sp * params.primal_weights.segment(offset, k);
        offset += k;
        nn::ntn_backward(params.scorers[i], tape.ntn[i], d_aux[i], d_act, grads.scorers[i],
                         static_cast<Vector<Scalar>*>(nullptr), &d_v);
        switch (i) {
            case 0: d_parent += d_v; break;
            case 1: d_child += d_v; break;
            case 2: d_aggregate += d_v; break;
            default:
                d_parent += d_v.head(g);
                d_child += d_v.segment(g, g);
                if (full) d_aggregate += d_v.tail(d);
        }
    }
    if (full) {
        sibling_attention_backward(params.sibling_bilinear, tape.attention, d_aggregate, grads.sibling_bilinear,
                                   d_parent, d_child);
    }
}

template <typename Scalar>
PositionTrace<Scalar> forward_position(const ModelParams<Scalar>& params, const Vector<Scalar>& query,
                                       const TaxonomyView& view, const EmbeddingTable& table, Slot parent, Slot child,
                                       std::size_t siblings, const EncoderOptions& options, Rng& path_rng,
                                       Rng& sibling_rng) {
    PositionTrace<Scalar> trace;
    trace.parent = encode_parent(params, table, view, parent, options, path_rng);
    trace.child = encode_child(params, table, view, child, options, path_rng);
    Matrix<Scalar> sibling_embs(params.dims.embed_dim, 0);
    if (params.variant == Variant::Full) {
        trace.siblings = select_siblings(view, parent, child, siblings, sibling_rng);
        sibling_embs = gather_embeddings<Scalar>(table, view.taxonomy(), trace.siblings);
    }
    trace.scores = score_encoded(params, query, trace.parent.value, trace.child.value, sibling_embs, &trace.tape);
    return trace;
}

template <typename Scalar>
void backward_position(const ModelParams<Scalar>& params, const PositionTrace<Scalar>& trace, Scalar d_sp,
                       const std::array<Scalar, 4>& d_aux, ModelParams<Scalar>& grads) {
    Vector<Scalar> d_parent, d_child;
    score_encoded_backward(params, trace.tape, d_sp, d_aux, grads, d_parent, d_child);
    encode_backward(params, params.parent_lstm, grads.parent_lstm, trace.parent, d_parent, grads);
    encode_backward(params, params.child_lstm, grads.child_lstm, trace.child, d_child, grads);
}

template <typename Scalar>
ScoreBundle<Scalar> score_position(const ModelParams<Scalar>& params, const Vector<Scalar>& query,
                                   const TaxonomyView& view, const EmbeddingTable& table, const Position& position,
                                   std::size_t siblings, const EncoderOptions& options, Rng& rng) {
    const auto& tax = view.taxonomy();
    return forward_position(params, query, view, table, resolve(tax, position.parent), resolve(tax, position.child),
                            siblings, options, rng, rng)
        .scores;
}

#define TAXOENRICH_INSTANTIATE_MATCHER(S)                                                                             \
    template struct ModelParams<S>;                                                                                   \
    template Vector<S> slot_embedding<S>(const ModelParams<S>&, const EmbeddingTable&, const Taxonomy&, Slot);        \
    template Matrix<S> gather_embeddings<S>(const EmbeddingTable&, const Taxonomy&, std::span<const NodeIndex>);     \
    template NodeEncoding<S> encode_parent<S>(const ModelParams<S>&, const EmbeddingTable&, const TaxonomyView&,     \
                                              Slot, const EncoderOptions&, Rng&);                                     \
    template NodeEncoding<S> encode_child<S>(const ModelParams<S>&, const EmbeddingTable&, const TaxonomyView&,      \
                                             Slot, const EncoderOptions&, Rng&);                                      \
    template AttentionOutput<S> sibling_attention<S>(const Matrix<S>&, const Vector<S>&, const Vector<S>&,           \
                                                     const Vector<S>&, const Matrix<S>&, AttentionTape<S>*);          \
    template void sibling_attention_backward<S>(const Matrix<S>&, const AttentionTape<S>&, const Vector<S>&,         \
                                                Matrix<S>&, Vector<S>&, Vector<S>&);                                  \
    template ScoreBundle<S> score_encoded<S>(const ModelParams<S>&, const Vector<S>&, const Vector<S>&,              \
                                             const Vector<S>&, const Matrix<S>&, ScoreTape<S>*);                      \
    template void score_encoded_backward<S>(const ModelParams<S>&, const ScoreTape<S>&, S, const std::array<S, 4>&,  \
                                            ModelParams<S>&, Vector<S>&, Vector<S>&);                                 \
    template PositionTrace<S> forward_position<S>(const ModelParams<S>&, const Vector<S>&, const TaxonomyView&,      \
                                                  const EmbeddingTable&, Slot, Slot, std::size_t,                     \
                                                  const EncoderOptions&, Rng&, Rng&);                                 \
    template void backward_position<S>(const ModelParams<S>&, const PositionTrace<S>&, S, const std::array<S, 4>&,   \
                                       ModelParams<S>&);                                                              \
    template ScoreBundle<S> score_position<S>(const ModelParams<S>&, const Vector<S>&, const TaxonomyView&,          \
                                              const EmbeddingTable&, const Position&, std::size_t,                    \
                                              const EncoderOptions&, Rng&);

TAXOENRICH_INSTANTIATE_MATCHER(float)
TAXOENRICH_INSTANTIATE_MATCHER(double)
TAXOENRICH_INSTANTIATE_MATCHER(long double)

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<long double> ModelParams<double>::cast<long double>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;

}  // namespace taxoenrich

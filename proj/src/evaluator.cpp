#include "taxoenrich/evaluator.hpp"

#include <algorithm>
#include <ostream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace taxoenrich {

namespace {

void require_ranks(std::span<const RankingResult> results) {
    if (results.empty()) throw Error("metrics need at least one ranking result");
    for (const auto& r : results)
        if (r.true_ranks.empty()) throw Error("query '" + r.query + "' has no true rank");
}

std::size_t hits_at(std::span<const RankingResult> results, int k) {
    if (k < 1) throw Error("k must be at least 1");
    std::size_t hits = 0;
    for (const auto& r : results)
        for (auto rank : r.true_ranks) hits += rank <= static_cast<std::size_t>(k) ? 1 : 0;
    return hits;
}

std::size_t total_true(std::span<const RankingResult> results) {
    std::size_t n = 0;
    for (const auto& r : results) n += r.true_ranks.size();
    return n;
}

// Per-query shortcut for scoring many positions: the bilinear and linear terms
// touching the query are folded into one k x dim(v) matrix per scorer.
template <typename Scalar>
struct QueryScorer {
    std::array<Matrix<Scalar>, 4> fold;
    std::array<Vector<Scalar>, 4> offset;
    Vector<Scalar> projected;  // W_sib^T e_q
    const ModelParams<Scalar>* params = nullptr;

    QueryScorer(const ModelParams<Scalar>& p, const Vector<Scalar>& query) : params(&p) {
        if (query.size() != p.dims.embed_dim)
            throw DimensionError("query vector has size " + std::to_string(query.size()) + ", model expects " +
                                 std::to_string(p.dims.embed_dim));
        const auto d = query.size();
        for (std::size_t i = 0; i < 4; ++i) {
            const auto& ntn = p.scorers[i];
            fold[i] = ntn.linear.rightCols(ntn.v_dim());
            for (int j = 0; j < ntn.slices(); ++j)
                fold[i].row(j).noalias() += (ntn.bilinear[static_cast<std::size_t>(j)].transpose() * query).transpose();
            offset[i] = ntn.bias;
            offset[i].noalias() += ntn.linear.leftCols(d) * query;
        }
        if (p.variant == Variant::Full) projected = p.sibling_bilinear.transpose() * query;
    }

    Vector<Scalar> activation(std::size_t i, const Vector<Scalar>& v) const {
        Vector<Scalar> pre = offset[i];
        pre.noalias() += fold[i] * v;
        return pre.array().tanh().matrix();
    }

    Scalar sp(const Vector<Scalar>& g_p, const Vector<Scalar>& g_c, const Matrix<Scalar>& siblings) const {
        const auto& p = *params;
        const int k = p.dims.slices;
        const int d = p.dims.embed_dim;
        const int g = p.dims.position_dim();
        const bool full = p.variant == Variant::Full;
        Vector<Scalar> position(full ? 2 * g + d : 2 * g);
        position.head(g) = g_p;
        position.segment(g, g) = g_c;
        Scalar total = p.primal_weights.segment(0, k).dot(activation(0, g_p)) +
                       p.primal_weights.segment(k, k).dot(activation(1, g_c));
        if (full) {
            Vector<Scalar> aggregate = Vector<Scalar>::Zero(d);
            if (siblings.cols() > 0) {
                const Scalar shared = projected.head(g).dot(g_p) + projected.segment(g, g).dot(g_c);
                Vector<Scalar> phi = (siblings.transpose() * projected.tail(d)).array() + shared;
                Vector<Scalar> alpha = (phi.array() - phi.maxCoeff()).exp();
                alpha /= alpha.sum();
                aggregate.noalias() = siblings * alpha;
            }
            position.tail(d) = aggregate;
            total += p.primal_weights.segment(2 * k, k).dot(activation(2, aggregate));
        }
        total += p.primal_weights.tail(k).dot(activation(3, position));
        return total;
    }
};

// g(p) / g(c) under the longest-path policy for every slot of the taxonomy.
template <typename Scalar>
struct EncodingCache {
    std::vector<Vector<Scalar>> parent;
    std::vector<Vector<Scalar>> child;
    Vector<Scalar> leaf;
    Vector<Scalar> root;

    EncodingCache(const ModelParams<Scalar>& params, const Taxonomy& tax, const EmbeddingTable& table) {
        EncoderOptions options{PathPolicy::Longest, kDefaultMaxPaths};
        Rng unused(0);
        parent.reserve(tax.num_nodes());
        child.reserve(tax.num_nodes());
        for (std::size_t i = 0; i < tax.num_nodes(); ++i) {
            auto slot = Slot::node(static_cast<NodeIndex>(i));
            parent.push_back(encode_parent(params, table, tax, slot, options, unused).value);
            child.push_back(encode_child(params, table, tax, slot, options, unused).value);
        }
        leaf = encode_child(params, table, tax, Slot::leaf(), options, unused).value;
        root = encode_parent(params, table, tax, Slot::root(), options, unused).value;
    }

    const Vector<Scalar>& of_parent(Slot s) const {
        return s.placeholder == Placeholder::PseudoRoot ? root : parent[static_cast<std::size_t>(s.index)];
    }
    const Vector<Scalar>& of_child(Slot s) const {
        return s.placeholder == Placeholder::PseudoLeaf ? leaf : child[static_cast<std::size_t>(s.index)];
    }
};

template <typename Scalar>
std::vector<std::pair<Position, double>> score_all(const ModelParams<Scalar>& params, const EncodingCache<Scalar>& cache,
                                                   const NodeId& query, const Vector<Scalar>& query_vec,
                                                   const Taxonomy& tax, const EmbeddingTable& table,
                                                   const std::vector<Position>& candidates, std::size_t t_eval,
                                                   std::uint64_t seed) {
    QueryScorer<Scalar> scorer(params, query_vec);
    std::vector<std::pair<Position, double>> scored;
    scored.reserve(candidates.size());
    Matrix<Scalar> siblings(params.dims.embed_dim, 0);
    for (const auto& pos : candidates) {
        auto parent = resolve(tax, pos.parent);
        auto child = resolve(tax, pos.child);
        if (params.variant == Variant::Full) {
            Rng rng(position_seed(seed, query, pos));
            auto picks = select_siblings(tax, parent, child, t_eval, rng);
            siblings = gather_embeddings<Scalar>(table, tax, picks);
        }
        auto logit = static_cast<double>(scorer.sp(cache.of_parent(parent), cache.of_child(child), siblings));
        scored.emplace_back(pos, logit);
    }
    return scored;
}

void check_expansion(const QuerySet& queries) {
    for (const auto& q : queries)
        for (const auto& p : q.true_positions)
            if (!p.child.is_pseudo_leaf())
                throw Error("expansion mode: query '" + q.query + "' has non-leaf true position (" +
                            to_string(p.parent) + ", " + to_string(p.child) + ")");
}

}  // namespace

double mean_rank(std::span<const RankingResult> results) {
    require_ranks(results);
    std::uint64_t sum = 0;
    for (const auto& r : results)
        for (auto rank : r.true_ranks) sum += rank;
    return static_cast<double>(sum) / static_cast<double>(total_true(results));
}

double scaled_mrr(std::span<const RankingResult> results, MrrScaling scaling) {
    require_ranks(results);
    double sum = 0;
    for (const auto& r : results) {
        for (auto rank : r.true_ranks) {
            auto denom = scaling == MrrScaling::Bucketed ? (rank + 9) / 10 : rank;
            sum += 1.0 / static_cast<double>(denom);
        }
    }
    return sum / static_cast<double>(total_true(results));
}

double recall_at_k(std::span<const RankingResult> results, int k) {
    require_ranks(results);
    return static_cast<double>(hits_at(results, k)) / static_cast<double>(total_true(results));
}

double precision_at_k(std::span<const RankingResult> results, int k) {
    require_ranks(results);
    return static_cast<double>(hits_at(results, k)) / (static_cast<double>(results.size()) * k);
}

MetricsReport compose_report(std::span<const RankingResult> results, const std::vector<int>& ks, MrrScaling scaling) {
    MetricsReport report;
    report.mr = mean_rank(results);
    report.mrr = scaled_mrr(results, scaling);
    for (int k : ks) {
        report.recall_at[k] = recall_at_k(results, k);
        report.precision_at[k] = precision_at_k(results, k);
    }
    report.n_queries = results.size();
    report.n_true_positions = total_true(results);
    report.n_candidates = results.front().ranked.size();
    return report;
}

RankingResult rank_scored(NodeId query, std::vector<std::pair<Position, double>> scored,
                          const std::vector<Position>& truths) {
    if (scored.empty()) throw Error("cannot rank an empty candidate list");
    for (const auto& [pos, logit] : scored)
        if (!std::isfinite(logit)) throw NumericError("non-finite logit while ranking query '" + query + "'");
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::unordered_map<Position, std::size_t, PositionHash> where;
    where.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) where.emplace(scored[i].first, i + 1);
    RankingResult result{std::move(query), std::move(scored), {}};
    for (const auto& t : truths) {
        auto it = where.find(t);
        if (it == where.end()) {
            throw Error("true position (" + to_string(t.parent) + ", " + to_string(t.child) + ") of query '" +
                        result.query + "' is not a candidate");
        }
        result.true_ranks.push_back(it->second);
    }
    std::sort(result.true_ranks.begin(), result.true_ranks.end());
    return result;
}

std::uint64_t position_seed(std::uint64_t seed, const NodeId& query, const Position& position) {
    return derive_seed(seed, hash_string(query), hash_string(to_string(position.parent)),
                       hash_string(to_string(position.child)));
}

template <typename Scalar>
RankingResult rank_positions(const ModelParams<Scalar>& params, const NodeId& query, const Vector<Scalar>& query_vec,
                             const Taxonomy& tax, const EmbeddingTable& table, const std::vector<Position>& candidates,
                             const std::vector<Position>& truths, std::size_t t_eval, std::uint64_t seed) {
    if (candidates.empty()) throw Error("cannot rank an empty candidate list");
    EncodingCache<Scalar> cache(params, tax, table);
    return rank_scored(query, score_all(params, cache, query, query_vec, tax, table, candidates, t_eval, seed), truths);
}

template <typename Scalar>
Evaluation evaluate(const ModelParams<Scalar>& params, const QuerySet& queries, const Taxonomy& tax,
                    const EmbeddingTable& table, const EvalOptions& options) {
    if (queries.empty()) throw Error("evaluation needs at least one query");
    if (options.mode == CandidateMode::Expansion) check_expansion(queries);
    const auto candidates = enumerate_candidate_positions(tax, options.mode);
    const EncodingCache<Scalar> cache(params, tax, table);

    Evaluation out;
    out.rankings.resize(queries.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto& q = queries[i];
            Vector<Scalar> query_vec = table.lookup_as<Scalar>(q.query);
            out.rankings[i] = rank_scored(
                q.query,
                score_all(params, cache, q.query, query_vec, tax, table, candidates, options.t_eval, options.seed),
                q.true_positions);
        }
    };
    const auto threads = static_cast<std::size_t>(std::clamp<int>(options.threads, 1, static_cast<int>(queries.size())));
    if (threads == 1) {
        work(0, queries.size());
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        const auto chunk = (queries.size() + threads - 1) / threads;
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    work(std::min(queries.size(), w * chunk), std::min(queries.size(), (w + 1) * chunk));
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    out.report = compose_report(out.rankings, options.ks, options.scaling);
    return out;
}

template <typename Scalar>
std::vector<std::pair<Position, double>> predict(const ModelParams<Scalar>& params, const NodeId& query,
                                                 const Vector<Scalar>& query_vec, const Taxonomy& tax,
                                                 const EmbeddingTable& table, std::size_t top_k,
                                                 const EvalOptions& options) {
    auto candidates = enumerate_candidate_positions(tax, options.mode);
    auto ranking = rank_positions(params, query, query_vec, tax, table, candidates, {}, options.t_eval, options.seed);
    if (ranking.ranked.size() > top_k) ranking.ranked.resize(top_k);
    return std::move(ranking.ranked);
}

void write_predictions(const Taxonomy& tax, const std::vector<std::pair<Position, double>>& ranked,
                       std::ostream& out) {
    auto name = [&](const Endpoint& e) { return e.is_node() ? tax.name(tax.index_of(e.id)) : to_string(e); };
    char logit[64];
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const auto& [pos, value] = ranked[i];
        std::snprintf(logit, sizeof logit, "%.6f", value);
        out << i + 1 << ". ⟨" << name(pos.parent) << ", " << name(pos.child) << "⟩  " << logit << '\n';
    }
}

void write_report(const MetricsReport& report, const std::map<std::string, std::string>& metadata,
                  std::ostream& out) {
    nlohmann::ordered_json j;
    j["mr"] = report.mr;
    j["mrr"] = report.mrr;
    for (const auto& [k, v] : report.recall_at) j["recall@" + std::to_string(k)] = v;
    for (const auto& [k, v] : report.precision_at) j["precision@" + std::to_string(k)] = v;
    j["n_queries"] = report.n_queries;
    j["n_true_positions"] = report.n_true_positions;
    j["n_candidates"] = report.n_candidates;
    j["metadata"] = metadata;
    out << j.dump(2) << '\n';
}

void write_prediction_dump(const std::vector<RankingResult>& rankings, std::size_t top_k, std::ostream& out) {
    out << "query\trank\tparent\tchild\tlogit\tis_true\n";
    char logit[64];
    for (const auto& r : rankings) {
        std::vector<bool> is_true(r.ranked.size() + 1, false);
        for (auto rank : r.true_ranks) is_true[rank] = true;
        for (std::size_t i = 0; i < std::min(top_k, r.ranked.size()); ++i) {
            const auto& [pos, value] = r.ranked[i];
            std::snprintf(logit, sizeof logit, "%.9g", value);
            out << r.query << '\t' << i + 1 << '\t' << to_string(pos.parent) << '\t' << to_string(pos.child) << '\t'
                << logit << '\t' << (is_true[i + 1] ? 1 : 0) << '\n';
        }
    }
}

#define TAXOENRICH_INSTANTIATE_EVALUATOR(S)                                                                           \
    template RankingResult rank_positions<S>(const ModelParams<S>&, const NodeId&, const Vector<S>&, const Taxonomy&, \
                                             const EmbeddingTable&, const std::vector<Position>&,                    \
                                             const std::vector<Position>&, std::size_t, std::uint64_t);              \
    template Evaluation evaluate<S>(const ModelParams<S>&, const QuerySet&, const Taxonomy&, const EmbeddingTable&,  \
                                    const EvalOptions&);                                                              \
    template std::vector<std::pair<Position, double>> predict<S>(const ModelParams<S>&, const NodeId&,               \
                                                                 const Vector<S>&, const Taxonomy&,                  \
                                                                 const EmbeddingTable&, std::size_t,                 \
                                                                 const EvalOptions&);

TAXOENRICH_INSTANTIATE_EVALUATOR(float)
TAXOENRICH_INSTANTIATE_EVALUATOR(double)

}  // namespace taxoenrich

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "taxoenrich/embeddings.hpp"
#include "taxoenrich/matcher.hpp"
#include "taxoenrich/nn/gradcheck.hpp"
#include "taxoenrich/taxonomy.hpp"
#include "taxoenrich/trainer.hpp"

namespace support {

using namespace taxoenrich;

inline Taxonomy toy() {
    return Taxonomy({{"cs", "computer science"},
                     {"ml", "machine learning"},
                     {"sys", "computer systems"},
                     {"dl", "deep learning"},
                     {"svm", "support vector machine"},
                     {"os", "operating system"}},
                    {{"cs", "ml"}, {"cs", "sys"}, {"ml", "dl"}, {"ml", "svm"}, {"sys", "os"}});
}

inline std::string pad_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "n%02zu", i);
    return buf;
}

// Edges only go from lower to higher rank of a random permutation, so the
// result is acyclic; ids are shuffled against that order.
inline Taxonomy random_dag(Rng& rng, std::size_t n, double edge_prob) {
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = i;
    std::shuffle(rank.begin(), rank.end(), rng);
    std::bernoulli_distribution coin(edge_prob);
    std::vector<std::pair<NodeId, std::string>> terms;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) terms.emplace_back(pad_id(i), "term " + std::to_string(i));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (rank[a] < rank[b] && coin(rng)) edges.push_back({pad_id(a), pad_id(b)});
    return Taxonomy(terms, edges);
}

// Exhaustive DFS over raw adjacency sets, independent of the library's path code.
struct DfsOracle {
    std::map<NodeId, std::set<NodeId>> up;
    std::map<NodeId, std::set<NodeId>> down;

    explicit DfsOracle(const Taxonomy& tax) {
        for (const auto& id : tax.ids()) {
            up[id];
            down[id];
        }
        for (const auto& e : tax.edges()) {
            up[e.child].insert(e.parent);
            down[e.parent].insert(e.child);
        }
    }

    void walk(const std::map<NodeId, std::set<NodeId>>& adj, const NodeId& u, std::vector<NodeId>& stack,
              std::vector<std::vector<NodeId>>& out) const {
        if (adj.at(u).empty()) {
            out.push_back(stack);
            return;
        }
        for (const auto& n : adj.at(u)) {
            stack.push_back(n);
            walk(adj, n, stack, out);
            stack.pop_back();
        }
    }

    // Root-first, anchor excluded.
    std::vector<std::vector<NodeId>> ancestral(const NodeId& v) const {
        std::vector<std::vector<NodeId>> out;
        if (up.at(v).empty()) return out;
        std::vector<NodeId> stack;
        walk(up, v, stack, out);
        for (auto& p : out) std::reverse(p.begin(), p.end());
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::vector<NodeId>> descendant(const NodeId& v) const {
        std::vector<std::vector<NodeId>> out;
        if (down.at(v).empty()) return out;
        std::vector<NodeId> stack;
        walk(down, v, stack, out);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<std::pair<std::string, std::string>> candidates(bool completion) const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [p, cs] : down) {
            if (completion)
                for (const auto& c : cs) out.emplace_back(p, c);
            out.emplace_back(p, "\x7f<leaf>");  // sorts after every id
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

inline std::vector<std::vector<NodeId>> to_ids(const Taxonomy& tax, const std::vector<TaxoPath>& paths) {
    std::vector<std::vector<NodeId>> out;
    for (const auto& p : paths) {
        std::vector<NodeId> ids;
        for (auto n : p.nodes) ids.push_back(tax.id(n));
        out.push_back(ids);
    }
    return out;
}

inline EmbeddingTable random_table(const std::vector<NodeId>& ids, int dim, Rng& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    EmbeddingTable table(dim);
    for (const auto& id : ids) {
        Eigen::VectorXf row(dim);
        for (int j = 0; j < dim; ++j) row[j] = static_cast<float>(dist(rng));
        table.add(id, row);
    }
    return table;
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// ---- straight-line numeric oracles (plain loops, std::vector) ----

using Vec = std::vector<double>;

inline Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// NTN score and activations by explicit index sums.
struct NtnEval {
    double score = 0;
    Vec activation;
};

inline NtnEval ntn_oracle(const nn::NtnParams<double>& p, const Vec& u, const Vec& v) {
    const std::size_t k = p.bilinear.size();
    NtnEval out;
    out.activation.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        double h = p.bias[static_cast<Eigen::Index>(j)];
        for (std::size_t a = 0; a < u.size(); ++a)
            for (std::size_t b = 0; b < v.size(); ++b)
                h += u[a] * p.bilinear[j](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * v[b];
        for (std::size_t a = 0; a < u.size(); ++a) h += p.linear(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a)) * u[a];
        for (std::size_t b = 0; b < v.size(); ++b)
            h += p.linear(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(u.size() + b)) * v[b];
        out.activation[j] = std::tanh(h);
        out.score += p.output[static_cast<Eigen::Index>(j)] * out.activation[j];
    }
    return out;
}

// Gate order input, forget, candidate, output; rows j, h+j, 2h+j, 3h+j.
inline Vec lstm_oracle(const nn::LstmParams<double>& p, const std::vector<Vec>& inputs) {
    const std::size_t h = static_cast<std::size_t>(p.hidden_dim());
    Vec hid(h, 0.0), cell(h, 0.0);
    for (const auto& x : inputs) {
        Vec next_h(h), next_c(h);
        for (std::size_t j = 0; j < h; ++j) {
            double pre[4];
            for (std::size_t g = 0; g < 4; ++g) {
                auto row = static_cast<Eigen::Index>(g * h + j);
                double s = p.bias[row];
                for (std::size_t a = 0; a < x.size(); ++a) s += p.input_weights(row, static_cast<Eigen::Index>(a)) * x[a];
                for (std::size_t a = 0; a < h; ++a) s += p.recurrent_weights(row, static_cast<Eigen::Index>(a)) * hid[a];
                pre[g] = s;
            }
            double i = sigm(pre[0]), f = sigm(pre[1]), c = std::tanh(pre[2]), o = sigm(pre[3]);
            next_c[j] = f * cell[j] + i * c;
            next_h[j] = o * std::tanh(next_c[j]);
        }
        hid = next_h;
        cell = next_c;
    }
    return hid;
}

// Sibling attention with W_sib indexed entry by entry.
struct AttentionEval {
    Vec aggregate;
    Vec alpha;
};

inline AttentionEval attention_oracle(const Eigen::MatrixXd& w, const Vec& q, const Vec& gp, const Vec& gc,
                                      const std::vector<Vec>& sibs) {
    AttentionEval out;
    out.aggregate.assign(q.size(), 0.0);
    if (sibs.empty()) return out;
    Vec phi;
    for (const auto& s : sibs) {
        Vec z = gp;
        z.insert(z.end(), gc.begin(), gc.end());
        z.insert(z.end(), s.begin(), s.end());
        double acc = 0;
        for (std::size_t a = 0; a < q.size(); ++a)
            for (std::size_t b = 0; b < z.size(); ++b) acc += q[a] * w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * z[b];
        phi.push_back(acc);
    }
    double m = *std::max_element(phi.begin(), phi.end());
    double total = 0;
    for (double f : phi) total += std::exp(f - m);
    for (std::size_t i = 0; i < sibs.size(); ++i) {
        double a = std::exp(phi[i] - m) / total;
        out.alpha.push_back(a);
        for (std::size_t j = 0; j < q.size(); ++j) out.aggregate[j] += a * sibs[i][j];
    }
    return out;
}

inline Vec concat(const Vec& a, const Vec& b) {
    Vec out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

struct ScoreEval {
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0, sp = 0;
};

// All five scores from already-encoded g(p), g(c) and the sibling vectors.
inline ScoreEval score_oracle(const ModelParams<double>& p, const Vec& q, const Vec& gp, const Vec& gc,
                              const std::vector<Vec>& sibs) {
    const bool full = p.variant == Variant::Full;
    ScoreEval out;
    auto n1 = ntn_oracle(p.scorers[0], q, gp);
    auto n2 = ntn_oracle(p.scorers[1], q, gc);
    Vec acts = concat(n1.activation, n2.activation);
    Vec position = concat(gp, gc);
    out.s1 = n1.score;
    out.s2 = n2.score;
    if (full) {
        auto att = attention_oracle(p.sibling_bilinear, q, gp, gc, sibs);
        auto n3 = ntn_oracle(p.scorers[2], q, att.aggregate);
        out.s3 = n3.score;
        acts = concat(acts, n3.activation);
        position = concat(position, att.aggregate);
    }
    auto n4 = ntn_oracle(p.scorers[3], q, position);
    out.s4 = n4.score;
    acts = concat(acts, n4.activation);
    for (std::size_t i = 0; i < acts.size(); ++i) out.sp += p.primal_weights[static_cast<Eigen::Index>(i)] * acts[i];
    return out;
}

inline double bce_oracle(double z, int y) { return y == 1 ? std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double max_abs_diff(const Vec& a, const Eigen::VectorXd& b) {
    double m = a.size() == static_cast<std::size_t>(b.size()) ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < a.size() && i < static_cast<std::size_t>(b.size()); ++i)
        m = std::max(m, std::abs(a[i] - b[static_cast<Eigen::Index>(i)]));
    return m;
}

// Longest maximal path by brute force, ties to the lexicographically smallest id sequence.
inline std::vector<NodeId> longest_oracle(const std::vector<std::vector<NodeId>>& paths) {
    std::vector<NodeId> best;
    bool found = false;
    for (const auto& p : paths) {
        if (!found || p.size() > best.size() || (p.size() == best.size() && p < best)) {
            best = p;
            found = true;
        }
    }
    return best;
}

inline Vec row_of(const EmbeddingTable& table, const NodeId& id) {
    auto r = table.lookup(id);
    Vec out(static_cast<std::size_t>(r.size()));
    for (Eigen::Index i = 0; i < r.size(); ++i) out[static_cast<std::size_t>(i)] = r[i];
    return out;
}

// Balanced tree: one root, `branching` children per internal node, `levels`
// levels below the root. Child vectors are parent + noise; table rows are
// their L2-normalized forms, like fallback rows.
struct SyntheticTree {
    Taxonomy tax;
    EmbeddingTable table;
};

inline SyntheticTree synthetic_tree(std::size_t branching, std::size_t levels, int dim, double noise,
                                    std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::pair<NodeId, std::string>> terms;
    std::vector<Edge> edges;
    EmbeddingTable table(dim, Provenance::Fallback);
    std::vector<std::pair<NodeId, Eigen::VectorXd>> frontier;
    Eigen::VectorXd root(dim);
    for (int j = 0; j < dim; ++j) root[j] = gauss(rng);
    frontier.emplace_back("t", root);
    terms.emplace_back("t", "concept t");
    table.add("t", root.normalized().cast<float>());
    for (std::size_t level = 0; level < levels; ++level) {
        std::vector<std::pair<NodeId, Eigen::VectorXd>> next;
        for (const auto& [id, vec] : frontier) {
            for (std::size_t b = 0; b < branching; ++b) {
                NodeId child = id + "." + std::to_string(b);
                Eigen::VectorXd cv(dim);
                for (int j = 0; j < dim; ++j) cv[j] = vec[j] + noise * gauss(rng);
                terms.emplace_back(child, "concept " + child);
                edges.push_back({id, child});
                table.add(child, cv.normalized().cast<float>());
                next.emplace_back(child, cv);
            }
        }
        frontier = std::move(next);
    }
    return {Taxonomy(terms, edges), std::move(table)};
}

// One gradient-check draw: random DAG, table, parameters and training
// example; analytic double gradients against long double central differences.
struct GradDraw {
    nn::GradCheckResult result;
    TrainingExample example;
};

inline GradDraw gradient_draw(std::uint64_t seed, Variant variant, ModelDims dims,
                              std::optional<std::size_t> max_coords = std::nullopt) {
    Rng rng(seed);
    Taxonomy tax = random_dag(rng, 9, 0.35);
    std::vector<NodeId> with_parent;
    while (true) {
        with_parent.clear();
        for (std::size_t i = 0; i < tax.num_nodes(); ++i)
            if (!tax.parents(static_cast<NodeIndex>(i)).empty()) with_parent.push_back(tax.id(static_cast<NodeIndex>(i)));
        if (!with_parent.empty()) break;
        tax = random_dag(rng, 9, 0.35);
    }
    const NodeId query = with_parent[uniform_index(rng, with_parent.size())];
    auto examples = generate_examples(tax, query, 6, rng);
    TrainingExample ex = examples[uniform_index(rng, examples.size())];

    auto table = random_table(tax.ids(), dims.embed_dim, rng);
    auto params = ModelParams<double>::init(dims, variant, rng());
    for (Eigen::Index i = 0; i < params.pseudo_leaf.size(); ++i) {
        params.pseudo_leaf[i] = uniform(rng, -1, 1);
        params.pseudo_root[i] = uniform(rng, -1, 1);
    }
    TrainConfig cfg;
    cfg.hidden_dim = dims.hidden_dim;
    cfg.slices = dims.slices;
    cfg.variant = variant;
    cfg.t_train = 3;
    for (auto& l : cfg.lambda) l = uniform(rng, 0.1, 1.0);
    const std::uint64_t path_seed = rng(), sibling_seed = rng();

    auto grads = ModelParams<double>::zeros(dims, variant);
    example_loss(params, table, tax, ex, cfg, path_seed, sibling_seed, &grads);
    auto wide = params.cast<long double>();
    std::function<long double()> loss = [&] {
        return example_loss(wide, table, tax, ex, cfg, path_seed, sibling_seed).total;
    };
    const auto& cgrads = grads;
    nn::GradCheckOptions opts;
    opts.eps = 1e-4;
    opts.max_coords_per_tensor = max_coords;
    opts.seed = seed;
    return {nn::finite_diff_check<long double, double>(loss, nn::tensors(wide), nn::tensors(cgrads), opts), ex};
}

}  // namespace support

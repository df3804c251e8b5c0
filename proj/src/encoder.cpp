#include "navprune/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "navprune/rng.hpp"

namespace navprune {

void EncoderConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("layers must be at least 1");
    if (heads < 1) throw std::invalid_argument("heads must be at least 1");
    if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be positive");
    if (ffn_mult < 1) throw std::invalid_argument("ffn_mult must be positive");
    if (hidden_dim % heads != 0) throw std::invalid_argument("hidden_dim not divisible by heads");
}

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (double& x : m.data()) x = scale * rng.normal();
    return m;
}

Matrix to_matrix(const FeatureSeq& seq, std::size_t dim) {
    Matrix m(seq.size(), dim);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& f = seq.tokens[i].feature;
        if (f.size() != dim) throw std::invalid_argument("feature width does not match hidden_dim");
        std::copy(f.begin(), f.end(), m.row(i).begin());
    }
    return m;
}

// Layer normalization without affine parameters.
Matrix layer_norm(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto src = x.row(r);
        double mean = 0.0;
        for (double v : src) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : src) var += (v - mean) * (v - mean);
        var /= n;
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < x.cols(); ++c) dst[c] = (src[c] - mean) * inv;
    }
    return out;
}

}  // namespace

EncoderWeights init_weights(const EncoderConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const std::size_t d = config.hidden_dim;
    const std::size_t dh = config.head_dim();
    const std::size_t f = config.ffn_mult * d;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    EncoderWeights w{config, {}};
    for (std::size_t l = 0; l < config.layers; ++l) {
        LayerWeights lw;
        for (std::size_t h = 0; h < config.heads; ++h) {
            lw.query.push_back(random_matrix(rng, d, dh, scale));
            lw.key.push_back(random_matrix(rng, d, dh, scale));
            lw.value.push_back(random_matrix(rng, d, dh, scale));
        }
        lw.output = random_matrix(rng, d, d, scale);
        lw.ffn_in = random_matrix(rng, d, f, scale);
        lw.ffn_out = random_matrix(rng, f, d, scale);
        w.layers.push_back(std::move(lw));
    }
    return w;
}

std::vector<TokenId> FeatureSeq::ids() const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.id);
    return out;
}

std::size_t FeatureSeq::index_of(TokenId id) const {
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i].id == id) return i;
    return tokens.size();
}

FeatureSeq make_sequence(const std::vector<std::vector<double>>& features) {
    FeatureSeq seq;
    for (std::size_t i = 0; i < features.size(); ++i) seq.tokens.push_back({i, features[i], {i}});
    return seq;
}

void add_positional_offsets(FeatureSeq& seq, double scale) {
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
        auto& f = seq.tokens[pos].feature;
        const double d = static_cast<double>(f.size());
        for (std::size_t j = 0; j < f.size(); ++j) {
            const double rate = std::pow(10000.0, -static_cast<double>(j - j % 2) / d);
            const double angle = static_cast<double>(pos) * rate;
            f[j] += scale * (j % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    }
}

ImportanceScores importance_scores(const AttentionRecord& record) {
    ImportanceScores scores;
    const std::size_t n = record.ids.size();
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (const Matrix& head : record.heads)
            for (std::size_t i = 0; i < n; ++i) s += head(i, j);
        scores[record.ids[j]] = s;
    }
    return scores;
}

double total_score(const ImportanceScores& scores) {
    double s = 0.0;
    for (const auto& [id, v] : scores) s += v;
    return s;
}

AttentionPhase compute_attention(const FeatureSeq& seq, const EncoderWeights& weights,
                                 std::size_t layer, const QuerySkip* skip, MacCounter* counter) {
    if (seq.empty()) throw std::invalid_argument("empty sequence");
    const EncoderConfig& cfg = weights.config;
    if (layer >= weights.layers.size()) throw std::out_of_range("layer index out of range");
    const LayerWeights& lw = weights.layers[layer];
    const std::size_t n = seq.size();
    const std::size_t dh = cfg.head_dim();

    const Matrix x = layer_norm(to_matrix(seq, cfg.hidden_dim));

    std::vector<std::size_t> rows;
    std::vector<bool> computed(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        if (skip && skip->count(seq.tokens[i].id)) computed[i] = false;
        else rows.push_back(i);
    }

    AttentionPhase phase;
    phase.record.layer = layer;
    phase.record.ids = seq.ids();
    phase.record.computed_rows = computed;
    phase.mixed = Matrix(n, cfg.hidden_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const Matrix q = matmul(x, lw.query[h], counter);
        const Matrix k = matmul(x, lw.key[h], counter);
        const Matrix v = matmul(x, lw.value[h], counter);

        Matrix attn(n, n);
        for (std::size_t i : rows) {
            auto row = attn.row(i);
            double mx = -INFINITY;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += q(i, c) * k(j, c);
                row[j] = s * scale;
                mx = std::max(mx, row[j]);
            }
            double sum = 0.0;
            for (double& a : row) {
                a = std::exp(a - mx);
                sum += a;
            }
            for (double& a : row) a /= sum;
        }
        if (counter) counter->add(static_cast<std::uint64_t>(rows.size()) * n * dh);

        const Matrix z = matmul_rows(attn, v, rows, counter);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < dh; ++c) phase.mixed(i, h * dh + c) = z(i, c);
        phase.record.heads.push_back(std::move(attn));
    }
    return phase;
}

FeatureSeq finish_layer(const FeatureSeq& seq, const Matrix& mixed, const EncoderWeights& weights,
                        std::size_t layer, MacCounter* counter) {
    const EncoderConfig& cfg = weights.config;
    const LayerWeights& lw = weights.layers.at(layer);
    if (mixed.rows() != seq.size()) throw std::invalid_argument("mixed rows do not match sequence");
    FeatureSeq out = seq;
    if (seq.empty()) return out;

    Matrix h = to_matrix(seq, cfg.hidden_dim);
    const Matrix projected = matmul(mixed, lw.output, counter);
    for (std::size_t i = 0; i < h.data().size(); ++i) h.data()[i] += projected.data()[i];

    Matrix hidden = matmul(layer_norm(h), lw.ffn_in, counter);
    for (double& a : hidden.data()) a = std::max(a, 0.0);
    const Matrix ffn = matmul(hidden, lw.ffn_out, counter);

    for (std::size_t i = 0; i < seq.size(); ++i) {
        auto& f = out.tokens[i].feature;
        for (std::size_t c = 0; c < cfg.hidden_dim; ++c) f[c] = h(i, c) + ffn(i, c);
    }
    return out;
}

LayerOutput attention_forward(const FeatureSeq& seq, const EncoderWeights& weights,
                              std::size_t layer, const QuerySkip* skip, MacCounter* counter) {
    AttentionPhase phase = compute_attention(seq, weights, layer, skip, counter);
    FeatureSeq out = finish_layer(seq, phase.mixed, weights, layer, counter);
    return {std::move(out), std::move(phase.record)};
}

namespace {

// Applies merges then removals to the sequence and the aligned Z rows.
void apply_edit(FeatureSeq& seq, Matrix& mixed, const LayerEdit& edit) {
    std::vector<bool> drop(seq.size(), false);
    auto locate = [&](TokenId id) {
        const std::size_t i = seq.index_of(id);
        if (i == seq.size())
            throw std::invalid_argument("hook referenced token " + std::to_string(id) +
                                        " absent from the sequence");
        if (drop[i])
            throw std::invalid_argument("hook referenced token " + std::to_string(id) + " twice");
        return i;
    };
    // Each kept token becomes the plain mean of itself and everything it absorbs.
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (const auto& [absorbed, kept] : edit.merge) {
        const std::size_t a = locate(absorbed);
        drop[a] = true;
        groups[seq.index_of(kept)].push_back(a);
    }
    for (auto& [k, members] : groups) {
        if (k == seq.size() || drop[k]) throw std::invalid_argument("invalid merge target");
        auto& fk = seq.tokens[k].feature;
        auto zk = mixed.row(k);
        auto& origins = seq.tokens[k].origins;
        for (std::size_t a : members) {
            const auto& fa = seq.tokens[a].feature;
            auto za = mixed.row(a);
            for (std::size_t c = 0; c < fk.size(); ++c) fk[c] += fa[c];
            for (std::size_t c = 0; c < zk.size(); ++c) zk[c] += za[c];
            origins.insert(origins.end(), seq.tokens[a].origins.begin(), seq.tokens[a].origins.end());
        }
        const double n = static_cast<double>(members.size() + 1);
        for (double& x : fk) x /= n;
        for (double& x : zk) x /= n;
        std::sort(origins.begin(), origins.end());
    }
    for (TokenId id : edit.remove) drop[locate(id)] = true;

    FeatureSeq kept;
    Matrix z(seq.size() - static_cast<std::size_t>(std::count(drop.begin(), drop.end(), true)),
             mixed.cols());
    std::size_t r = 0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (drop[i]) continue;
        kept.tokens.push_back(std::move(seq.tokens[i]));
        std::copy(mixed.row(i).begin(), mixed.row(i).end(), z.row(r++).begin());
    }
    seq = std::move(kept);
    mixed = std::move(z);
}

}  // namespace

StackRun run_stack(FeatureSeq seq, const EncoderWeights& weights, const PruneHook& hook,
                   const QuerySkip* skip, MacCounter* counter) {
    if (seq.empty()) throw std::invalid_argument("empty sequence");
    StackRun run;
    for (std::size_t layer = 0; layer < weights.layers.size(); ++layer) {
        run.lengths.push_back(seq.size());
        // Everything was pruned by an earlier layer.
        if (seq.empty()) {
            run.active_rows.push_back(0);
            run.scores.emplace_back();
            run.removed.push_back(0);
            continue;
        }
        AttentionPhase phase = compute_attention(seq, weights, layer, skip, counter);
        run.active_rows.push_back(static_cast<std::size_t>(
            std::count(phase.record.computed_rows.begin(), phase.record.computed_rows.end(), true)));
        ImportanceScores scores = importance_scores(phase.record);
        std::size_t removed = 0;
        if (hook) {
            const LayerEdit edit = hook(LayerContext{layer, seq, phase.record, scores});
            removed = edit.reduction();
            if (removed > 0) apply_edit(seq, phase.mixed, edit);
        }
        seq = finish_layer(seq, phase.mixed, weights, layer, counter);
        run.scores.push_back(std::move(scores));
        run.removed.push_back(removed);
    }
    run.lengths.push_back(seq.size());
    run.output = std::move(seq);
    return run;
}

}  // namespace navprune

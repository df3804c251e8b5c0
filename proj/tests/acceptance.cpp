// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "navprune/agent.hpp"
#include "navprune/bench.hpp"
#include "navprune/flopsmeter.hpp"
#include "navprune/pruning.hpp"
#include "navprune/rng.hpp"
#include "navprune/vocabulary.hpp"
#include "navprune/worldgen.hpp"

using namespace navprune;

namespace {

// Pinned tolerances.
constexpr double kCalibrationRelTol = 0.01;
constexpr std::size_t kPropertyTrials = 10000;
constexpr std::size_t kEpisodes = 500;
constexpr std::size_t kLengthEpisodes = 200;
constexpr double kLengthRatioMin = 1.8;
constexpr double kCollapseShare = 0.10;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0, double g = 0) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a, b, c, d, e, g);
    return buf;
}

bool separated_above(double hi, double hi_ci, double lo, double lo_ci) { return hi - hi_ci > lo + lo_ci; }

TokenSeq words(const std::string& text) {
    TokenSeq seq;
    std::istringstream in(text);
    std::string w;
    while (in >> w) seq.push_back({w, {}, false, {}});
    return seq;
}

// Vocabulary built the way build-vocab --offline does, from generated instructions.
Vocabulary offline_vocabulary() {
    std::vector<std::string> corpus;
    for (std::uint64_t i = 0; i < 200; ++i) {
        const World w = generate_world(WorldParams{}, mix_seed(1, i));
        std::string line;
        for (std::size_t t = 1; t + 1 < w.instruction.tokens.size(); ++t)
            line += (line.empty() ? "" : " ") + w.instruction.tokens[t].text;
        corpus.push_back(line);
    }
    ClassificationCache cache;
    return build_vocabulary(classify_words(extract_lexicon(corpus), nullptr, cache), {"acceptance"});
}

SweepConfig base_config() {
    SweepConfig c;
    c.episodes = kEpisodes;
    c.seed = 1;
    c.oracle.p_flip = 0.3;
    return c;
}

Outcome attention_calibration() {
    const auto full = attention_flops(36, 768);
    const auto sas = sas_attention_flops(36, 4, 768);
    const double full_g = to_gflops(full), sas_g = to_gflops(sas);
    const bool pass = full == 3981312 && sas == 442368 &&
                      std::abs(full_g - 4.0e-3) <= kCalibrationRelTol * 4.0e-3 &&
                      std::abs(sas_g - 4.4e-4) <= kCalibrationRelTol * 4.4e-4;
    return {pass, "attention=" + std::to_string(full) + fmt(" (%.3e G) sas=", full_g) + std::to_string(sas) +
                      fmt(" (%.3e G)", sas_g)};
}

Outcome example_rows() {
    const TokenSeq seq =
        words("<s> Exit the room . Turn right . Start down the stairs and stop 3 steps down . </s>");
    const Vocabulary vocab({"the", ".", "down", "and", "3", "</s>"}, {});
    // Frozen importance: content words room, Turn, stairs and stop score lowest.
    const std::vector<std::pair<std::string, double>> by_word{
        {"Exit", 0.9},  {"room", 0.2}, {"Turn", 0.25}, {"right", 0.8}, {"Start", 0.7},
        {"stairs", 0.3}, {"stop", 0.35}, {"steps", 0.6}, {"<s>", 0.0}};
    ImportanceScores scores;
    for (TokenId id = 0; id < seq.size(); ++id) {
        scores[id] = 0.5;
        for (const auto& [w, s] : by_word)
            if (seq[id].text == w) scores[id] = s;
    }
    auto kept = [&](double retain) {
        std::string out;
        for (TokenId id : vpp_prune(seq, vocab, scores, schedule_budget(retain, 1, seq.size()).total()).retained)
            out += (out.empty() ? "" : " ") + seq[id].text;
        return out;
    };
    const std::string half = kept(0.5), quarter = kept(0.25);
    const bool pass = half == "<s> Exit room Turn right Start stairs stop steps" &&
                      quarter == "<s> Exit right Start steps";
    return {pass, "50%: [" + half + "] 25%: [" + quarter + "]"};
}

Outcome flop_equality(const Encoders& enc, const Vocabulary& vocab) {
    Rng rng(303);
    std::size_t layer_ok = 0, episode_ok = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t heads = std::size_t{1} << rng.below(3);
        const std::size_t d = heads * (2 + rng.below(6));
        const std::size_t layers = 1 + rng.below(4);
        const std::size_t f = 1 + rng.below(4);
        const std::size_t l = 2 + rng.below(30);
        const auto w = init_weights({layers, heads, d, f, rng.next()});
        std::vector<std::vector<double>> x;
        for (std::size_t i = 0; i < l; ++i) x.push_back(rng.normal_vector(d));
        StrategySpec spec{StrategyKind::cascade};
        StackPruner pruner(spec, schedule_budget(0.3 + 0.7 * rng.uniform(), layers, l), layers);
        MacCounter counter;
        const auto run = run_stack(make_sequence(x), w, pruner.hook(), nullptr, &counter);
        layer_ok += counter.flops() == stack_flops({run.lengths, run.active_rows}, {layers, d, f});
    }
    const std::vector<std::string> plans{"nap", "cascade", "fastv", "tome:views", "bgp+btp+sas", "random"};
    for (int e = 0; e < 20; ++e) {
        const World w = generate_world(WorldParams{}, mix_seed(909, static_cast<std::uint64_t>(e)));
        const StrategyPlan plan = parse_strategy(plans[e % plans.size()]);
        EpisodeConfig c;
        c.seed = static_cast<std::uint64_t>(e);
        c.instruction_strategy = plan.instruction;
        c.view_strategy = plan.views;
        c.k_btp = plan.k_btp;
        c.selective_attention = plan.selective_attention;
        c.instruction_retain = 0.5 + 0.025 * e;
        c.view_retain = 0.5 + 0.02 * e;
        c.importance = e % 2 ? ImportanceSource::attention : ImportanceSource::oracle;
        c.run_cross_modal = true;
        MacCounter counter;
        const auto r = run_episode(w, c, enc, &vocab, &counter);
        const FlopsLedger again = g_total(r.instruction_schedule, r.view_schedules, r.history_lengths,
                                          StackConfigs{}.dims(), r.decisions, r.flops.overhead);
        episode_ok += r.instrumented_flops == r.flops.total() && again.total() == r.flops.total();
    }
    return {layer_ok == 20 && episode_ok == 20,
            fmt("stacks %.0f/20 exact, episodes %.0f/20 exact", static_cast<double>(layer_ok),
                static_cast<double>(episode_ok))};
}

Outcome action_view_preservation() {
    Rng rng(4242);
    const auto w = init_weights({2, 2, 8, 2, 9});
    const StrategyKind kinds[] = {StrategyKind::bgp, StrategyKind::cascade, StrategyKind::fastv,
                                  StrategyKind::random, StrategyKind::tome};
    std::size_t lost = 0;
    for (std::size_t trial = 0; trial < kPropertyTrials; ++trial) {
        const std::size_t n = 2 + rng.below(14);
        std::vector<std::vector<double>> x;
        std::set<TokenId> actions;
        for (TokenId id = 0; id < n; ++id) {
            x.push_back(rng.normal_vector(8));
            if (rng.bernoulli(0.3)) actions.insert(id);
        }
        StrategySpec spec{kinds[rng.below(5)]};
        spec.fastv_prune_layer = 1;
        spec.seed = rng.next();
        const double r = 0.05 + 0.95 * rng.uniform();
        StackPruner pruner(spec, schedule_budget(r, 2, n - actions.size()), 2);
        pruner.set_protected(actions);
        const auto ids = run_stack(make_sequence(x), w, pruner.hook()).output.ids();
        for (TokenId id : actions) lost += std::count(ids.begin(), ids.end(), id) != 1;
    }
    return {lost == 0, fmt("%.0f randomized runs, %.0f action views removed", static_cast<double>(kPropertyTrials),
                           static_cast<double>(lost))};
}

Outcome priority_law() {
    Rng rng(5151);
    std::size_t violations = 0;
    for (std::size_t trial = 0; trial < kPropertyTrials; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<TokenId> order(n), members, others;
        ImportanceScores s;
        for (TokenId id = 0; id < n; ++id) {
            order[id] = id;
            (rng.bernoulli(0.4) ? members : others).push_back(id);
            s[id] = rng.uniform();
        }
        const std::size_t k = rng.below(n + 1);
        const auto sel = vpp_select(order, members, others, s, k);
        const std::set<TokenId> kept(sel.retained.begin(), sel.retained.end());
        std::size_t members_kept = 0, others_removed = 0;
        for (TokenId id : members) members_kept += kept.count(id);
        for (TokenId id : others) others_removed += !kept.count(id);
        const std::size_t expected = members.size() > k ? members.size() - k : 0;
        violations += members_kept != expected || (others_removed > 0 && members_kept > 0);
    }
    return {violations == 0, fmt("%.0f random sequences, %.0f violations", static_cast<double>(kPropertyTrials),
                                 static_cast<double>(violations))};
}

Outcome btp_bound_and_steps() {
    SweepRunner runner(base_config(), nullptr);
    const auto with = runner.run_cell("bgp+btp", 0.6);
    const auto without = runner.run_cell("bgp", 0.6);
    std::size_t worst = 0;
    for (const auto& e : with.episodes) worst = std::max(worst, e.max_unvisited_after_prune);
    const auto& a = with.row;
    const auto& b = without.row;
    const bool pass = worst <= 6 && separated_above(b.mean_steps, b.steps_ci95, a.mean_steps, a.steps_ci95);
    return {pass, fmt("max unvisited %.0f (k=6); steps btp %.2f +- %.2f vs no btp %.2f +- %.2f",
                      static_cast<double>(worst), a.mean_steps, a.steps_ci95, b.mean_steps, b.steps_ci95)};
}

Outcome vpp_vs_cascade(const Vocabulary& vocab) {
    SweepConfig c = base_config();
    SweepRunner noisy(c, &vocab);
    const auto v = noisy.run_cell("vpp", 0.5).row;
    const auto k = noisy.run_cell("cascade:instruction", 0.5).row;
    c.oracle.p_flip = 0.0;
    SweepRunner clean(c, &vocab);
    const auto v0 = clean.run_cell("vpp", 0.5).row;
    const auto k0 = clean.run_cell("cascade:instruction", 0.5).row;
    return {separated_above(v.success_rate, v.ci95, k.success_rate, k.ci95),
            fmt("p_flip 0.3: vpp SR %.1f +- %.1f vs cascade %.1f +- %.1f; p_flip 0: %.1f vs %.1f", v.success_rate,
                v.ci95, k.success_rate, k.ci95, v0.success_rate, k0.success_rate)};
}

Outcome instruction_length(const Vocabulary& vocab) {
    // path_len 12 gives 11 landmark tokens plus <s> and </s>.
    auto savings = [&](double filler_rate, double& mean_tokens) {
        SweepConfig c = base_config();
        c.episodes = kLengthEpisodes;
        c.world.path_len = 12;
        c.world.filler_rate = filler_rate;
        SweepRunner runner(c, &vocab);
        double tokens = 0;
        for (std::size_t i = 0; i < c.episodes; ++i) tokens += static_cast<double>(runner.world(i).instruction.tokens.size());
        mean_tokens = tokens / static_cast<double>(c.episodes);
        return 100.0 - runner.run_cell("vpp", 0.5).row.mean_flops_percent;
    };
    double short_len = 0, long_len = 0;
    const double short_pp = savings(1.0 - 11.0 / 48.0, short_len);
    const double long_pp = savings(1.0 - 11.0 / 148.0, long_len);
    const double ratio = long_pp / short_pp;
    return {ratio >= kLengthRatioMin,
            fmt("%.0f tokens: %.2f pp, %.0f tokens: %.2f pp, ratio %.3f (need >= %.1f)", short_len, short_pp,
                long_len, long_pp, ratio, kLengthRatioMin)};
}

Outcome pathologies() {
    SweepRunner runner(base_config(), nullptr);
    const auto none = runner.run_cell("none", 1.0).row;
    const auto fv8 = runner.run_cell("full-view", 0.8).row;
    const auto fv6 = runner.run_cell("full-view", 0.6).row;
    const auto fv5 = runner.run_cell("full-view", 0.5).row;
    const double limit = kCollapseShare * none.success_rate;
    const bool over = fv8.mean_flops_percent > 100.0;
    const bool collapse = fv6.success_rate < limit && fv5.success_rate < limit;
    return {over && collapse,
            fmt("full-view 0.8 FLOPS%% %.1f (need > 100); SR 0.6 %.1f, 0.5 %.1f vs limit %.1f", fv8.mean_flops_percent,
                fv6.success_rate, fv5.success_rate, limit)};
}

Outcome determinism(const Vocabulary& vocab) {
    SweepConfig c = base_config();
    c.episodes = 60;
    c.strategies = {"nap", "cascade", "full-view", "tome"};
    c.retain_fractions = {0.8, 0.5};
    const std::string a = sweep_csv(SweepRunner(c, &vocab, 1).run_all());
    const std::string b = sweep_csv(SweepRunner(c, &vocab, 1).run_all());
    const std::string p = sweep_csv(SweepRunner(c, &vocab, 4).run_all());
    return {a == b && a == p, std::string("serial repeat ") + (a == b ? "identical" : "differs") + ", jobs=4 " +
                                  (a == p ? "identical" : "differs")};
}

}  // namespace

int main() {
    const Encoders enc = Encoders::create(StackConfigs{});
    const Vocabulary vocab = offline_vocabulary();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"attention flops calibration", attention_calibration},
        {"worked example retention rows", example_rows},
        {"analytic vs instrumented flops", [&] { return flop_equality(enc, vocab); }},
        {"action view preservation", action_view_preservation},
        {"vpp priority law", priority_law},
        {"btp cardinality and steps", btp_bound_and_steps},
        {"vpp vs cascade on instructions", [&] { return vpp_vs_cascade(vocab); }},
        {"instruction length savings ratio", [&] { return instruction_length(vocab); }},
        {"flops% pathologies of full-view pruning", pathologies},
        {"end-to-end determinism", [&] { return determinism(vocab); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += !o.pass;
        std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed ? 1 : 0;
}

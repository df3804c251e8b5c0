#include "doctest.h"

#include <algorithm>
#include <vector>

#include "navprune/agent.hpp"
#include "navprune/linalg.hpp"

using namespace navprune;

namespace {

const Encoders& encoders() {
    static const Encoders e = Encoders::create(StackConfigs{});
    return e;
}

WorldParams clean_params() {
    WorldParams p;
    p.sigma_feat = 0.0;
    return p;
}

EpisodeConfig clean_config(std::uint64_t seed) {
    EpisodeConfig c;
    c.oracle.sigma_feat = 0.0;
    c.oracle.p_flip = 0.0;
    c.seed = seed;
    return c;
}

// World whose instruction keeps only the relevant tokens selected by `mask`.
World with_relevant_subset(const World& w, unsigned mask) {
    World out = w;
    TokenSeq kept;
    std::size_t r = 0;
    for (const auto& t : w.instruction.tokens) {
        if (t.relevant && !(mask & (1u << r++))) continue;
        kept.push_back(t);
    }
    out.instruction.tokens = kept;
    return out;
}

}  // namespace

TEST_CASE("judge_success uses hop distance") {
    HouseGraph h;
    h.nodes.resize(3);
    h.adjacency = {{1}, {0, 2}, {1}};
    CHECK(judge_success(h, 2, 2, 0));
    CHECK_FALSE(judge_success(h, 1, 2, 0));
    CHECK(judge_success(h, 1, 2, 1));
    CHECK_FALSE(judge_success(h, 0, 2, 1));
}

TEST_CASE("step stops when no relevant token is left") {
    TopoMap map(4);
    PolicyState state;
    const std::vector<ViewCandidate> views{{0, 5, {1.0, 0.0}}};
    const auto a = step(state, views, map, PolicyParams{});
    CHECK(a.kind == ActionKind::stop);
    CHECK(a.target == 4);
}

TEST_CASE("step scores navigate and backtrack by cosine") {
    TopoMap map(0);
    map.observe(0, 1, {0.0, 1.0}, 0.5, 0);
    map.observe(0, 2, {1.0, 0.0}, 0.5, 0);
    map.move_to(1);
    PolicyState state{{{1.0, 0.0}}, 0};
    // Node 2 is two hops back: score 0.81 beats a 0.6 view but loses to 0.9.
    auto a = step(state, {{0, 3, normalized(std::vector<double>{0.6, 0.8})}}, map, PolicyParams{});
    CHECK(a.kind == ActionKind::backtrack);
    CHECK(a.target == 2);
    CHECK(a.hops == 2);
    CHECK(a.score == doctest::Approx(0.81));
    CHECK(a.match == doctest::Approx(1.0));
    a = step(state, {{0, 3, normalized(std::vector<double>{0.9, std::sqrt(1 - 0.81)})}}, map, PolicyParams{});
    CHECK(a.kind == ActionKind::navigate);
    CHECK(a.target == 3);

    // Below the stop score everything loses to stop.
    PolicyState away{{{-1.0, 0.0}}, 0};
    CHECK(step(away, {{0, 3, {0.0, 1.0}}}, map, PolicyParams{}).kind == ActionKind::stop);
}

TEST_CASE("step ties prefer navigate over backtrack and lower ids") {
    TopoMap map(0);
    map.observe(0, 7, {1.0, 0.0}, 0.5, 0);
    PolicyParams params;
    params.gamma = 1.0;
    PolicyState state{{{1.0, 0.0}}, 0};
    // Node 7 is an unvisited neighbour at one hop with gamma 1: same score as the views.
    const auto a = step(state, {{1, 9, {1.0, 0.0}}, {2, 8, {1.0, 0.0}}}, map, params);
    CHECK(a.kind == ActionKind::navigate);
    CHECK(a.target == 8);
    PolicyParams stop_tie;
    stop_tie.theta_stop = 1.0;
    CHECK(step(state, {{1, 9, {1.0, 0.0}}}, map, stop_tie).kind == ActionKind::stop);
}

TEST_CASE("start at the goal with no relevant tokens stops at once") {
    World w = generate_world(clean_params(), 3);
    w.house.goal = w.house.start;
    TokenSeq bare;
    for (const auto& t : w.instruction.tokens)
        if (!t.relevant) bare.push_back(t);
    w.instruction.tokens = bare;
    const auto r = run_episode(w, clean_config(3), encoders(), nullptr);
    CHECK(r.success);
    CHECK(r.steps == 1);
    CHECK(r.decisions == 1);
}

TEST_CASE("clean worlds are solved along the ground-truth path") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const World w = generate_world(clean_params(), seed);
        const auto r = run_episode(w, clean_config(seed), encoders(), nullptr);
        CHECK(r.success);
        CHECK(r.steps == w.house.gt_path.size());
        CHECK(r.path == w.house.gt_path);
        for (const auto& s : r.log) {
            CHECK(s.instruction_removed == 0);
            CHECK(s.views_removed == 0);
            CHECK(s.history_removed == 0);
        }
    }
}

TEST_CASE("removing relevant tokens never turns a failure into a success") {
    WorldParams p = clean_params();
    p.n_nodes = 30;
    p.path_len = 6;  // 5 relevant tokens, 32 subsets
    // Isotropic landmarks: with region-correlated ones a sparse instruction can
    // reach the goal by wandering through look-alikes.
    p.panorama.region_correlation = 0.0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const World w = generate_world(p, seed);
        std::vector<bool> success(32);
        for (unsigned mask = 0; mask < 32; ++mask)
            success[mask] = run_episode(with_relevant_subset(w, mask), clean_config(seed), encoders(), nullptr).success;
        CHECK(success[31]);
        CHECK_FALSE(success[0]);
        for (unsigned a = 0; a < 32; ++a)
            for (unsigned b = 0; b < 32; ++b)
                if ((a & b) == a && success[a]) CHECK(success[b]);
    }
}

TEST_CASE("btp bounds the unvisited set and k_btp zero disables backtracking") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const World w = generate_world(WorldParams{}, seed);
        EpisodeConfig c;
        c.seed = seed;
        c.view_strategy.kind = StrategyKind::bgp;
        c.view_retain = 0.5;
        for (std::size_t k : {0u, 2u, 6u}) {
            c.k_btp = k;
            const auto r = run_episode(w, c, encoders(), nullptr);
            for (const auto& s : r.log) {
                CHECK(s.unvisited_after_prune <= k);
                if (k == 0) CHECK(s.action.kind != ActionKind::backtrack);
            }
        }
    }
}

TEST_CASE("steps count hops plus the stop and cap at t_max") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const World w = generate_world(WorldParams{}, seed);
        EpisodeConfig c;
        c.seed = seed;
        c.view_strategy.kind = StrategyKind::bgp;
        c.view_strategy.protect_action_views = false;
        c.view_retain = 0.7;
        c.t_max = 8;
        const auto r = run_episode(w, c, encoders(), nullptr);
        CHECK(r.decisions == r.log.size());
        if (r.capped) {
            CHECK(r.steps == 8);
            CHECK_FALSE(r.success);
        } else {
            CHECK(r.steps == r.path.size());
            CHECK(r.log.back().action.kind == ActionKind::stop);
        }
    }
}

TEST_CASE("analytic ledger equals the instrumented counter") {
    const World w = generate_world(WorldParams{}, 17);
    const Vocabulary vocab({"the", "and", "then", "of", "a"}, {});
    for (ImportanceSource source : {ImportanceSource::oracle, ImportanceSource::attention}) {
        EpisodeConfig c;
        c.seed = 17;
        c.importance = source;
        c.run_cross_modal = true;
        c.instruction_strategy.kind = StrategyKind::vpp;
        c.instruction_retain = 0.5;
        c.view_strategy.kind = StrategyKind::bgp;
        c.view_retain = 0.6;
        c.k_btp = 4;
        MacCounter counter;
        const auto r = run_episode(w, c, encoders(), &vocab, &counter);
        CHECK(r.instrumented_flops == r.flops.total());
        CHECK(r.flops.decisions == r.decisions);

        c.selective_attention = true;
        c.view_strategy.kind = StrategyKind::none;
        counter.reset();
        const auto s = run_episode(w, c, encoders(), &vocab, &counter);
        CHECK(s.instrumented_flops == s.flops.total());
    }
}

TEST_CASE("vpp without a vocabulary is an error") {
    const World w = generate_world(WorldParams{}, 1);
    EpisodeConfig c;
    c.instruction_strategy.kind = StrategyKind::vpp;
    c.instruction_retain = 0.5;
    CHECK_THROWS_WITH(run_episode(w, c, encoders(), nullptr), "missing vocabulary for VPP");
}

TEST_CASE("episodes are deterministic and traces have one line per decision") {
    const World w = generate_world(WorldParams{}, 8);
    EpisodeConfig c;
    c.seed = 8;
    c.view_strategy.kind = StrategyKind::bgp;
    c.view_retain = 0.6;
    c.k_btp = 6;
    const auto a = run_episode(w, c, encoders(), nullptr);
    const auto b = run_episode(w, c, encoders(), nullptr);
    CHECK(format_trace(a) == format_trace(b));
    CHECK(a.flops.total() == b.flops.total());
    const std::string trace = format_trace(a);
    CHECK(static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n')) == a.decisions);
    CHECK(trace.rfind("step=0 kind=", 0) == 0);
}

TEST_CASE("reference config switches every pruning off") {
    EpisodeConfig c;
    c.instruction_strategy.kind = StrategyKind::vpp;
    c.view_strategy.kind = StrategyKind::bgp;
    c.k_btp = 3;
    c.instruction_retain = 0.4;
    c.selective_attention = true;
    c.seed = 99;
    const auto r = reference_config(c);
    CHECK(r.instruction_strategy.kind == StrategyKind::none);
    CHECK(r.view_strategy.kind == StrategyKind::none);
    CHECK_FALSE(r.k_btp.has_value());
    CHECK(r.instruction_retain == 1.0);
    CHECK_FALSE(r.selective_attention);
    CHECK(r.seed == 99);
}

TEST_CASE("importance source names round-trip") {
    CHECK(parse_importance_source("oracle") == ImportanceSource::oracle);
    CHECK(parse_importance_source(to_string(ImportanceSource::attention)) == ImportanceSource::attention);
    CHECK_THROWS(parse_importance_source("llm"));
}

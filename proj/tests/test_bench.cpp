#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "json.hpp"
#include "navprune/bench.hpp"

using namespace navprune;
namespace fs = std::filesystem;

namespace {

SweepConfig small_config() {
    SweepConfig c;
    c.world.n_nodes = 24;
    c.world.path_min = 5;
    c.world.path_max = 7;
    c.episodes = 12;
    c.seed = 5;
    c.strategies = {"none", "bgp", "cascade"};
    c.retain_fractions = {1.0, 0.6};
    return c;
}

struct CommandResult {
    int status = 0;
    std::string out;
};

CommandResult run(const std::string& args) {
    const std::string cmd = std::string(NAVPRUNE_CLI) + " " + args + " 2>&1";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    REQUIRE(pipe);
    CommandResult r;
    std::array<char, 4096> buf{};
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe.get())) r.out.append(buf.data(), n);
    r.status = pclose(pipe.release());
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("navprune_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("strategy names and aliases") {
    const auto nap = parse_strategy("nap");
    CHECK(nap.instruction.kind == StrategyKind::vpp);
    CHECK(nap.views.kind == StrategyKind::bgp);
    CHECK(nap.views.protect_action_views);
    REQUIRE(nap.k_btp.has_value());
    CHECK(*nap.k_btp == 6);

    const auto fv = parse_strategy("full-view");
    CHECK(fv.views.kind == StrategyKind::bgp);
    CHECK_FALSE(fv.views.protect_action_views);
    CHECK(fv.instruction.kind == StrategyKind::none);

    const auto bare = parse_strategy("cascade");
    CHECK(bare.instruction.kind == StrategyKind::cascade);
    CHECK(bare.views.kind == StrategyKind::cascade);
    CHECK(bare.views.protect_action_views);

    const auto ins = parse_strategy("fastv:instruction");
    CHECK(ins.instruction.kind == StrategyKind::fastv);
    CHECK(ins.views.kind == StrategyKind::none);

    const auto va = parse_strategy("tome:views-all");
    CHECK(va.views.kind == StrategyKind::tome);
    CHECK_FALSE(va.views.protect_action_views);

    const auto combo = parse_strategy("bgp+btp+sas", PlanOptions{3, 2, 0});
    CHECK(combo.selective_attention);
    CHECK(*combo.k_btp == 3);

    const auto none = parse_strategy("none");
    CHECK(none.instruction.kind == StrategyKind::none);
    CHECK(none.views.kind == StrategyKind::none);
    CHECK_FALSE(none.k_btp.has_value());

    CHECK_THROWS(parse_strategy("bgp:instruction"));
    CHECK_THROWS(parse_strategy("vpp:views"));
    CHECK_THROWS(parse_strategy("cascade:elsewhere"));
    CHECK_THROWS(parse_strategy("magic"));
}

TEST_CASE("default retain fractions step down by 0.05") {
    const auto f = default_retain_fractions();
    REQUIRE(f.size() == 15);
    CHECK(f.front() == 1.0);
    CHECK(f.back() == doctest::Approx(0.3));
}

TEST_CASE("sweep configs parse and serialize") {
    const auto c = SweepConfig::parse("# comment\nstrategies=nap, bgp\nretain_fractions=0.9,0.5\nepisodes=7\n"
                                      "seed=11\np_flip=0.2\nk_btp=4\ncontext_cosine=0.9\n");
    CHECK(c.strategies == std::vector<std::string>{"nap", "bgp"});
    CHECK(c.retain_fractions == std::vector<double>{0.9, 0.5});
    CHECK(c.episodes == 7);
    CHECK(c.seed == 11);
    CHECK(c.oracle.p_flip == 0.2);
    CHECK(c.plan.k_btp == 4);
    CHECK(c.world.panorama.context_cosine == 0.9);
    const auto back = SweepConfig::parse(c.serialize());
    CHECK(back.serialize() == c.serialize());

    CHECK_THROWS_WITH(SweepConfig::parse("colour=blue\n"), "unknown config key 'colour'");
    CHECK_THROWS(SweepConfig::parse("episodes\n"));
    CHECK_THROWS(SweepConfig::parse("episodes=0\n"));
    CHECK_THROWS(SweepConfig::parse("retain_fractions=1.5\n"));
    CHECK_THROWS(SweepConfig::parse("strategies=warp\n"));
}

TEST_CASE("vpp sweeps need a vocabulary") {
    SweepConfig c = small_config();
    c.strategies = {"nap"};
    CHECK_THROWS_WITH(SweepRunner(c, nullptr), "missing vocabulary for VPP");
}

TEST_CASE("unpruned cells cost exactly the reference") {
    SweepRunner runner(small_config(), nullptr);
    const auto cell = runner.run_cell("none", 1.0);
    CHECK(cell.row.mean_flops_percent == 100.0);
    for (const auto& e : cell.episodes) CHECK(e.flops_percent == 100.0);
    // Retain fractions do not touch a strategy that prunes nothing.
    CHECK(runner.run_cell("none", 0.6).row.mean_flops_percent == 100.0);
}

TEST_CASE("sweep output is identical across job counts") {
    SweepRunner one(small_config(), nullptr, 1);
    SweepRunner three(small_config(), nullptr, 3);
    const auto a = one.run_all();
    const auto b = three.run_all();
    CHECK(sweep_csv(a) == sweep_csv(b));
    CHECK(sweep_json(small_config(), a) == sweep_json(small_config(), b));
}

TEST_CASE("sweep csv layout") {
    SweepRunner runner(small_config(), nullptr);
    const auto rows = runner.run_all();
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].strategy == "bgp");
    CHECK(rows[0].retain_fraction == 1.0);
    CHECK(rows[1].retain_fraction == 0.6);
    const std::string csv = sweep_csv(rows);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# navprune-sweep v1; columns fixed; flops_per_mac=2; ci95 = 95% normal half-width on success_rate");
    std::getline(in, line);
    CHECK(line == "strategy,retain_fraction,success_rate,ci95,mean_steps,mean_flops_percent,episodes,seed_block");
    std::size_t data = 0;
    while (std::getline(in, line)) {
        ++data;
        CHECK(std::count(line.begin(), line.end(), ',') == 7);
    }
    CHECK(data == rows.size());
    const auto j = nlohmann::json::parse(sweep_json(small_config(), rows));
    CHECK(j["rows"].size() == rows.size());
    CHECK(j["rows"][0].contains("steps_ci95"));
}

TEST_CASE("confidence intervals") {
    CHECK(proportion_ci95(0.5, 100) == doctest::Approx(1.96 * 0.05));
    CHECK(proportion_ci95(1.0, 50) == 0.0);
    CHECK(proportion_ci95(0.0, 50) == 0.0);
    CHECK(mean_ci95({2.0, 2.0, 2.0}) == 0.0);
    // Sample sd of {1, 3} is sqrt(2).
    CHECK(mean_ci95({1.0, 3.0}) == doctest::Approx(1.96 * std::sqrt(2.0) / std::sqrt(2.0)));
}

TEST_CASE("parallel_for visits every index once") {
    std::vector<int> hits(97, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS(parallel_for(5, 2, [](std::size_t i) {
        if (i == 3) throw std::runtime_error("boom");
    }));
}

TEST_CASE("cli: gen-world is reproducible and run-episode at full retain prunes nothing") {
    const fs::path dir = scratch("world");
    const std::string a = (dir / "a.world").string(), b = (dir / "b.world").string();
    REQUIRE(run("gen-world --seed 4 --nodes 30 --path-len 7 --out " + a).status == 0);
    REQUIRE(run("gen-world --seed 4 --nodes 30 --path-len 7 --out " + b).status == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(a).rfind("navprune-world v1", 0) == 0);

    const auto r = run("run-episode --world " + a + " --strategy bgp --retain 1.0");
    REQUIRE(r.status == 0);
    CHECK(r.out.find("flops_percent=100.0000") != std::string::npos);
    std::istringstream lines(r.out);
    std::string line;
    std::size_t steps = 0;
    while (std::getline(lines, line)) {
        if (line.rfind("step=", 0) != 0) continue;
        ++steps;
        CHECK(line.find("pruned_instr=0 pruned_views=0 pruned_history=0") != std::string::npos);
    }
    CHECK(steps > 0);
    CHECK(run("run-episode --world " + a + " --strategy vpp --retain 0.5").status != 0);
    CHECK(run("run-episode --world " + (dir / "missing").string() + " --strategy none --retain 1").status != 0);
    fs::remove_all(dir);
}

TEST_CASE("cli: flops report") {
    const auto r = run("flops --l 36 --d 768 --l-act 4");
    REQUIRE(r.status == 0);
    CHECK(r.out.find("flops_per_mac=2") != std::string::npos);
    CHECK(r.out.find("attention_flops=3981312") != std::string::npos);
    CHECK(r.out.find("sas_attention_flops=442368") != std::string::npos);
}

TEST_CASE("cli: offline vocabulary builds are reproducible") {
    const fs::path dir = scratch("vocab");
    const std::string corpus = (dir / "corpus.txt").string();
    REQUIRE(run("gen-corpus --count 20 --out " + corpus).status == 0);
    const std::string common = " --corpus " + corpus + " --offline --cache " + (dir / "cache.json").string();
    const auto first = run("build-vocab" + common + " --out " + (dir / "v1.txt").string());
    REQUIRE(first.status == 0);
    CHECK(first.out.find("service=0") != std::string::npos);
    CHECK(first.out.find("fallback=0") == std::string::npos);
    const auto second = run("build-vocab" + common + " --out " + (dir / "v2.txt").string());
    REQUIRE(second.status == 0);
    CHECK(slurp(dir / "v1.txt") == slurp(dir / "v2.txt"));
    CHECK(slurp(dir / "v1.txt").find("fallback") != std::string::npos);
    fs::remove_all(dir);
}

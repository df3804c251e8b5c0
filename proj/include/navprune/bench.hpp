#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "navprune/agent.hpp"

namespace navprune {

// A named combination of per-modality strategies. Names are '+'-joined parts:
//   vpp | bgp | btp | sas | none | <baseline>[:all|:instruction|:views|:views-all]
// with aliases nap = vpp+bgp+btp and full-view = bgp:views-all.
// A bare baseline prunes instructions and background views (":all").
// ":views-all" lifts action-view protection.
struct StrategyPlan {
    std::string name;
    StrategySpec instruction;
    StrategySpec views;
    std::optional<std::size_t> k_btp;
    bool selective_attention = false;
};

struct PlanOptions {
    std::size_t k_btp = 6;
    std::size_t fastv_prune_layer = 2;
    std::size_t tome_merges = 0;
};

StrategyPlan parse_strategy(const std::string& name, const PlanOptions& options = {});

std::vector<double> default_retain_fractions();

struct SweepConfig {
    WorldParams world;
    StackConfigs stacks;
    std::vector<std::string> strategies{"none"};
    std::vector<double> retain_fractions = default_retain_fractions();
    std::size_t episodes = 500;
    std::uint64_t seed = 1;
    ImportanceSource importance = ImportanceSource::oracle;
    OracleConfig oracle;
    PlanOptions plan;
    std::size_t success_hops = 0;
    std::string vocabulary;
    std::string output;

    void validate() const;
    static SweepConfig parse(std::string_view text);
    std::string serialize() const;
};

struct SweepRow {
    std::string strategy;
    double retain_fraction = 1.0;
    double success_rate = 0.0;  // percent
    double ci95 = 0.0;          // half-width on success_rate
    double mean_steps = 0.0;
    double steps_ci95 = 0.0;    // half-width on mean_steps
    double mean_flops_percent = 0.0;
    std::size_t episodes = 0;
    std::uint64_t seed_block = 0;
};

// Per-episode outcome kept for audits by the acceptance checks.
struct EpisodeRecord {
    bool success = false;
    std::size_t steps = 0;
    std::size_t decisions = 0;
    double flops_percent = 0.0;
    std::size_t max_unvisited_after_prune = 0;
};

struct CellResult {
    SweepRow row;
    std::vector<EpisodeRecord> episodes;
};

// Runs episodes for a sweep with shared worlds, encoders and reference runs.
class SweepRunner {
public:
    SweepRunner(SweepConfig config, const Vocabulary* vocabulary, std::size_t jobs = 1);

    CellResult run_cell(const std::string& strategy, double retain_fraction);
    std::vector<SweepRow> run_all();

    const SweepConfig& config() const { return config_; }
    std::uint64_t world_seed(std::size_t episode) const;
    EpisodeConfig episode_config(const StrategyPlan& plan, double retain_fraction,
                                 std::size_t episode) const;

    World world(std::size_t episode) const;
    const Encoders& encoders() const { return encoders_; }

private:
    void prepare();

    SweepConfig config_;
    const Vocabulary* vocabulary_;
    std::size_t jobs_;
    Encoders encoders_;
    std::vector<FlopsLedger> references_;
    bool prepared_ = false;
};

// Runs `count` jobs on up to `jobs` threads; results are indexed, so the
// outcome does not depend on scheduling.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

double proportion_ci95(double p, std::size_t n);
double mean_ci95(const std::vector<double>& values);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_json(const SweepConfig& config, const std::vector<SweepRow>& rows);

}  // namespace navprune

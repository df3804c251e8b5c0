#include "navprune/bench.hpp"

#include <algorithm>
#include <charconv>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <cctype>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace navprune {

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string fixed(double x, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

// Shortest text that parses back to the same double.
std::string shortest(double x) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace

StrategyPlan parse_strategy(const std::string& name, const PlanOptions& options) {
    StrategyPlan plan;
    plan.name = name;
    std::string expanded = name;
    if (expanded == "nap") expanded = "vpp+bgp+btp";
    for (const std::string& raw : split(expanded, '+')) {
        std::string part = trim(raw);
        if (part == "full-view") part = "bgp:views-all";
        std::string target;
        if (auto colon = part.find(':'); colon != std::string::npos) {
            target = part.substr(colon + 1);
            part = part.substr(0, colon);
        }
        if (part == "none") continue;
        if (part == "btp") {
            plan.k_btp = options.k_btp;
            continue;
        }
        if (part == "sas") {
            plan.selective_attention = true;
            continue;
        }
        StrategySpec spec;
        spec.kind = parse_strategy_kind(part);
        spec.fastv_prune_layer = options.fastv_prune_layer;
        spec.tome_merges = options.tome_merges;
        spec.k_btp = options.k_btp;
        if (target.empty()) {
            if (spec.kind == StrategyKind::bgp) target = "views";
            else if (spec.kind == StrategyKind::vpp) target = "instruction";
            else target = "all";
        }
        if (target == "all") {
            plan.instruction = spec;
            plan.views = spec;
        } else if (target == "instruction") {
            if (spec.kind == StrategyKind::bgp)
                throw std::invalid_argument("bgp prunes views, not instructions");
            plan.instruction = spec;
        } else if (target == "views" || target == "views-all") {
            if (spec.kind == StrategyKind::vpp) throw std::invalid_argument("vpp prunes instructions");
            spec.protect_action_views = target == "views";
            plan.views = spec;
        } else {
            throw std::invalid_argument("unknown strategy target '" + target + "'");
        }
    }
    return plan;
}

std::vector<double> default_retain_fractions() {
    std::vector<double> out;
    for (int i = 0; i < 15; ++i) out.push_back(std::round((1.0 - 0.05 * i) * 100.0) / 100.0);
    return out;
}

void SweepConfig::validate() const {
    if (episodes < 1) throw std::invalid_argument("episodes must be at least 1");
    if (strategies.empty()) throw std::invalid_argument("strategy list is empty");
    if (retain_fractions.empty()) throw std::invalid_argument("retain fraction list is empty");
    for (double f : retain_fractions)
        if (!(f > 0.0) || f > 1.0) throw std::invalid_argument("retain fractions must be in (0, 1]");
    for (const auto& s : strategies) parse_strategy(s, plan);
    oracle.validate();
}

SweepConfig SweepConfig::parse(std::string_view text) {
    SweepConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        auto size = [&] { return static_cast<std::size_t>(std::stoull(value)); };
        auto real = [&] { return std::stod(value); };
        WorldParams& w = c.world;
        if (key == "n_nodes") w.n_nodes = size();
        else if (key == "path_len") w.path_len = size();
        else if (key == "path_min") w.path_min = size();
        else if (key == "path_max") w.path_max = size();
        else if (key == "max_degree") w.max_degree = size();
        else if (key == "hidden_dim") {
            w.hidden_dim = size();
            c.stacks.language.hidden_dim = c.stacks.view.hidden_dim = c.stacks.cross.hidden_dim = w.hidden_dim;
        }
        else if (key == "sigma_feat") w.sigma_feat = c.oracle.sigma_feat = real();
        else if (key == "filler_rate") w.filler_rate = real();
        else if (key == "region_span") w.house.region_span = size();
        else if (key == "new_region_rate") w.house.new_region_rate = real();
        else if (key == "lookalike_rate") w.house.lookalike_rate = real();
        else if (key == "extra_edge_rate") w.house.extra_edge_rate = real();
        else if (key == "views") w.panorama.views = size();
        else if (key == "region_correlation") w.panorama.region_correlation = real();
        else if (key == "max_landmark_cosine") w.panorama.max_landmark_cosine = real();
        else if (key == "occlusion_rate") w.panorama.occlusion_rate = real();
        else if (key == "occlusion_cosine") w.panorama.occlusion_cosine = real();
        else if (key == "context_cosine") w.panorama.context_cosine = real();
        else if (key == "heads") c.stacks.language.heads = c.stacks.view.heads = c.stacks.cross.heads = size();
        else if (key == "strategies") {
            c.strategies.clear();
            for (const auto& s : split(value, ',')) c.strategies.push_back(trim(s));
        } else if (key == "retain_fractions") {
            c.retain_fractions.clear();
            for (const auto& s : split(value, ',')) c.retain_fractions.push_back(std::stod(trim(s)));
        } else if (key == "episodes") c.episodes = size();
        else if (key == "seed") c.seed = std::stoull(value);
        else if (key == "importance") c.importance = parse_importance_source(value);
        else if (key == "p_flip") c.oracle.p_flip = real();
        else if (key == "boost") c.oracle.boost = real();
        else if (key == "score_noise") c.oracle.score_noise = real();
        else if (key == "k_btp") c.plan.k_btp = size();
        else if (key == "fastv_prune_layer") c.plan.fastv_prune_layer = size();
        else if (key == "tome_merges") c.plan.tome_merges = size();
        else if (key == "success_hops") c.success_hops = size();
        else if (key == "vocabulary") c.vocabulary = value;
        else if (key == "output") c.output = value;
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

std::string SweepConfig::serialize() const {
    std::ostringstream out;
    const WorldParams& w = world;
    auto join = [](const auto& items, auto fmt) {
        std::string s;
        for (const auto& x : items) s += (s.empty() ? "" : ",") + fmt(x);
        return s;
    };
    out << "n_nodes=" << w.n_nodes << "\npath_len=" << w.path_len << "\npath_min=" << w.path_min
        << "\npath_max=" << w.path_max << "\nmax_degree=" << w.max_degree << "\nhidden_dim=" << w.hidden_dim
        << "\nsigma_feat=" << shortest(w.sigma_feat) << "\nfiller_rate=" << shortest(w.filler_rate)
        << "\nregion_span=" << w.house.region_span << "\nnew_region_rate=" << shortest(w.house.new_region_rate)
        << "\nlookalike_rate=" << shortest(w.house.lookalike_rate)
        << "\nextra_edge_rate=" << shortest(w.house.extra_edge_rate) << "\nviews=" << w.panorama.views
        << "\nregion_correlation=" << shortest(w.panorama.region_correlation)
        << "\nmax_landmark_cosine=" << shortest(w.panorama.max_landmark_cosine)
        << "\nocclusion_rate=" << shortest(w.panorama.occlusion_rate)
        << "\nocclusion_cosine=" << shortest(w.panorama.occlusion_cosine)
        << "\ncontext_cosine=" << shortest(w.panorama.context_cosine) << "\nheads=" << stacks.language.heads
        << "\nstrategies=" << join(strategies, [](const std::string& s) { return s; })
        << "\nretain_fractions=" << join(retain_fractions, [](double x) { return shortest(x); })
        << "\nepisodes=" << episodes << "\nseed=" << seed << "\nimportance=" << to_string(importance)
        << "\np_flip=" << shortest(oracle.p_flip) << "\nboost=" << shortest(oracle.boost)
        << "\nscore_noise=" << shortest(oracle.score_noise) << "\nk_btp=" << plan.k_btp
        << "\nfastv_prune_layer=" << plan.fastv_prune_layer << "\ntome_merges=" << plan.tome_merges
        << "\nsuccess_hops=" << success_hops << "\nvocabulary=" << vocabulary << "\noutput=" << output
        << "\n";
    return out.str();
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

double proportion_ci95(double p, std::size_t n) {
    if (n == 0) return 0.0;
    return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

double mean_ci95(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    return 1.96 * std::sqrt(var / static_cast<double>(n));
}

SweepRunner::SweepRunner(SweepConfig config, const Vocabulary* vocabulary, std::size_t jobs)
    : config_(std::move(config)),
      vocabulary_(vocabulary),
      jobs_(std::max<std::size_t>(1, jobs)),
      encoders_(Encoders::create(config_.stacks)) {
    config_.validate();
    for (const auto& s : config_.strategies)
        if (parse_strategy(s, config_.plan).instruction.kind == StrategyKind::vpp && !vocabulary_)
            throw std::invalid_argument("missing vocabulary for VPP");
    // Surface unsolvable world parameters before any episode runs.
    world(0);
}

std::uint64_t SweepRunner::world_seed(std::size_t episode) const { return mix_seed(config_.seed, episode); }

World SweepRunner::world(std::size_t episode) const {
    return generate_world(config_.world, world_seed(episode));
}

EpisodeConfig SweepRunner::episode_config(const StrategyPlan& plan, double retain_fraction,
                                          std::size_t episode) const {
    EpisodeConfig ec;
    ec.instruction_strategy = plan.instruction;
    ec.view_strategy = plan.views;
    ec.k_btp = plan.k_btp;
    ec.selective_attention = plan.selective_attention;
    ec.instruction_retain = plan.instruction.kind == StrategyKind::none ? 1.0 : retain_fraction;
    ec.view_retain = plan.views.kind == StrategyKind::none ? 1.0 : retain_fraction;
    ec.importance = config_.importance;
    ec.oracle = config_.oracle;
    ec.success_hops = config_.success_hops;
    ec.seed = mix_seed(world_seed(episode), 77);
    return ec;
}

void SweepRunner::prepare() {
    if (prepared_) return;
    references_.assign(config_.episodes, {});
    const StrategyPlan none = parse_strategy("none", config_.plan);
    parallel_for(config_.episodes, jobs_, [&](std::size_t i) {
        const World w = world(i);
        references_[i] = run_episode(w, reference_config(episode_config(none, 1.0, i)), encoders_, vocabulary_).flops;
    });
    prepared_ = true;
}

CellResult SweepRunner::run_cell(const std::string& strategy, double retain_fraction) {
    prepare();
    const StrategyPlan plan = parse_strategy(strategy, config_.plan);
    CellResult cell;
    cell.episodes.resize(config_.episodes);
    parallel_for(config_.episodes, jobs_, [&](std::size_t i) {
        const World w = world(i);
        const EpisodeResult r = run_episode(w, episode_config(plan, retain_fraction, i), encoders_, vocabulary_);
        EpisodeRecord& rec = cell.episodes[i];
        rec.success = r.success;
        rec.steps = r.steps;
        rec.decisions = r.decisions;
        rec.flops_percent = flops_percent(r.flops, references_[i]);
        for (const auto& s : r.log) rec.max_unvisited_after_prune = std::max(rec.max_unvisited_after_prune, s.unvisited_after_prune);
    });

    const std::size_t n = cell.episodes.size();
    std::size_t wins = 0;
    std::vector<double> steps;
    double flops = 0.0;
    for (const auto& e : cell.episodes) {
        wins += e.success ? 1 : 0;
        steps.push_back(static_cast<double>(e.steps));
        flops += e.flops_percent;
    }
    const double p = static_cast<double>(wins) / static_cast<double>(n);
    SweepRow& row = cell.row;
    row.strategy = strategy;
    row.retain_fraction = retain_fraction;
    row.success_rate = 100.0 * p;
    row.ci95 = 100.0 * proportion_ci95(p, n);
    double total_steps = 0.0;
    for (double s : steps) total_steps += s;
    row.mean_steps = total_steps / static_cast<double>(n);
    row.steps_ci95 = mean_ci95(steps);
    row.mean_flops_percent = flops / static_cast<double>(n);
    row.episodes = n;
    row.seed_block = config_.seed;
    return cell;
}

std::vector<SweepRow> SweepRunner::run_all() {
    std::vector<SweepRow> rows;
    for (const auto& s : config_.strategies)
        for (double f : config_.retain_fractions) rows.push_back(run_cell(s, f).row);
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.strategy != b.strategy) return a.strategy < b.strategy;
        return a.retain_fraction > b.retain_fraction;
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "# navprune-sweep v1; columns fixed; flops_per_mac=" +
                      std::to_string(CountingConvention::flops_per_mac) + "; ci95 = 95% normal half-width on success_rate\n";
    out += "strategy,retain_fraction,success_rate,ci95,mean_steps,mean_flops_percent,episodes,seed_block\n";
    for (const auto& r : rows) {
        out += r.strategy + "," + fixed(r.retain_fraction, 2) + "," + fixed(r.success_rate) + "," +
               fixed(r.ci95) + "," + fixed(r.mean_steps) + "," + fixed(r.mean_flops_percent) + "," +
               std::to_string(r.episodes) + "," + std::to_string(r.seed_block) + "\n";
    }
    return out;
}

std::string sweep_json(const SweepConfig& config, const std::vector<SweepRow>& rows) {
    nlohmann::ordered_json j;
    j["format"] = "navprune-sweep v1";
    j["counting_convention"] = CountingConvention::describe();
    j["config"] = config.serialize();
    auto& arr = j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        arr.push_back({{"strategy", r.strategy},
                       {"retain_fraction", r.retain_fraction},
                       {"success_rate", r.success_rate},
                       {"ci95", r.ci95},
                       {"mean_steps", r.mean_steps},
                       {"steps_ci95", r.steps_ci95},
                       {"mean_flops_percent", r.mean_flops_percent},
                       {"episodes", r.episodes},
                       {"seed_block", r.seed_block}});
    }
    return j.dump(2) + "\n";
}

}  // namespace navprune

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "navprune/agent.hpp"
#include "navprune/bench.hpp"
#include "navprune/flopsmeter.hpp"
#include "navprune/llm_client.hpp"
#include "navprune/vocabulary.hpp"
#include "navprune/worldgen.hpp"

using namespace navprune;

namespace {

std::string default_timestamp() {
    // Deterministic unless SOURCE_DATE_EPOCH says otherwise.
    std::time_t t = 0;
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::stoll(env));
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

void print_ledger(const char* label, const FlopsLedger& l) {
    std::printf("%s g_lan=%.6e g_vis_mean=%.6e g_cm_mean=%.6e D=%zu c=%llu g_total=%.6e\n", label,
                to_gflops(l.lan), l.mean_vis() * 1e-9, l.mean_cm() * 1e-9, l.decisions,
                static_cast<unsigned long long>(l.overhead), to_gflops(l.total()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"navprune: navigation-aware token pruning toolkit"};
    app.require_subcommand(1);

    // build-vocab
    auto* vocab_cmd = app.add_subcommand("build-vocab", "Build a vocabulary of irrelevant words from a corpus");
    std::string corpus_path, vocab_out, cache_path, timestamp = default_timestamp(), source_id;
    bool offline = false;
    vocab_cmd->add_option("--corpus", corpus_path, "Instruction corpus, one instruction per line")->required();
    vocab_cmd->add_option("--out", vocab_out, "Vocabulary file to write")->required();
    vocab_cmd->add_option("--cache", cache_path, "Classification cache (read and updated)");
    vocab_cmd->add_flag("--offline", offline, "Do not contact the language-model service");
    vocab_cmd->add_option("--timestamp", timestamp, "Timestamp recorded in the header");
    vocab_cmd->add_option("--source", source_id, "Corpus id recorded in the header (default: file name)");

    // gen-corpus
    auto* corpus_cmd = app.add_subcommand("gen-corpus", "Write instruction texts of generated worlds");
    std::uint64_t corpus_seed = 1;
    std::size_t corpus_count = 200;
    std::string corpus_out;
    corpus_cmd->add_option("--seed", corpus_seed, "Seed block");
    corpus_cmd->add_option("--count", corpus_count, "Number of worlds");
    corpus_cmd->add_option("--out", corpus_out, "Corpus file")->required();

    // gen-world
    auto* world_cmd = app.add_subcommand("gen-world", "Generate a world file");
    std::uint64_t world_seed = 0;
    WorldParams wp;
    std::string world_out;
    world_cmd->add_option("--seed", world_seed, "World seed")->required();
    world_cmd->add_option("--nodes", wp.n_nodes, "Node count")->required();
    world_cmd->add_option("--path-len", wp.path_len, "Nodes on the ground-truth path")->required();
    world_cmd->add_option("--out", world_out, "World file")->required();
    world_cmd->add_option("--views", wp.panorama.views, "Views per panorama");
    world_cmd->add_option("--hidden-dim", wp.hidden_dim, "Feature width");
    world_cmd->add_option("--sigma-feat", wp.sigma_feat, "Action-view feature noise");
    world_cmd->add_option("--filler-rate", wp.filler_rate, "Share of filler tokens in the instruction");

    // run-episode
    auto* ep_cmd = app.add_subcommand("run-episode", "Run one episode and print its trace and ledger");
    std::string ep_world, ep_strategy = "none", ep_vocab, ep_importance = "oracle";
    double ep_retain = 1.0, ep_pflip = 0.3;
    std::size_t ep_kbtp = 6;
    std::uint64_t ep_seed = 0;
    ep_cmd->add_option("--world", ep_world, "World file")->required();
    ep_cmd->add_option("--strategy", ep_strategy, "Strategy name, e.g. nap, bgp+btp, cascade:instruction")->required();
    ep_cmd->add_option("--retain", ep_retain, "Retain fraction")->required();
    ep_cmd->add_option("--vocab", ep_vocab, "Vocabulary file (needed for vpp)");
    ep_cmd->add_option("--k-btp", ep_kbtp, "Unvisited nodes kept by backtracking pruning");
    ep_cmd->add_option("--importance", ep_importance, "oracle or attention");
    ep_cmd->add_option("--p-flip", ep_pflip, "Oracle filler boost probability");
    ep_cmd->add_option("--seed", ep_seed, "Episode seed");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Run a strategy x retain-fraction sweep");
    std::string sweep_config, sweep_out;
    std::size_t jobs = 1;
    sweep_cmd->add_option("--config", sweep_config, "key=value config file")->required();
    sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
    sweep_cmd->add_option("--jobs", jobs, "Worker threads");

    // flops
    auto* flops_cmd = app.add_subcommand("flops", "Analytic FLOP report for one layer");
    std::uint64_t fl_l = 0, fl_d = 0, fl_act = 0, fl_ffn = 4;
    flops_cmd->add_option("--l", fl_l, "Sequence length")->required();
    flops_cmd->add_option("--d", fl_d, "Hidden width")->required();
    flops_cmd->add_option("--l-act", fl_act, "Query rows kept by selective attention");
    flops_cmd->add_option("--ffn-mult", fl_ffn, "Feed-forward expansion");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*vocab_cmd) {
            const auto corpus = read_lines(corpus_path);
            const Lexicon lexicon = extract_lexicon(corpus);
            ClassificationCache cache;
            if (!cache_path.empty() && std::filesystem::exists(cache_path))
                cache = ClassificationCache::load(cache_path);
            std::unique_ptr<HttpCompletionClient> client;
            if (!offline) client = HttpCompletionClient::from_env();
            if (!offline && !client)
                std::cerr << "NAVPRUNE_LLM_URL unset: using cache and built-in fallback\n";
            const auto records = classify_words(lexicon, client.get(), cache);
            if (!cache_path.empty()) cache.save(cache_path);
            VocabularyMeta meta;
            meta.source = source_id.empty() ? std::filesystem::path(corpus_path).filename().string() : source_id;
            bool any_service = false, any_cache = false;
            for (const auto& r : records) {
                any_service |= r.source == LabelSource::service;
                any_cache |= r.source == LabelSource::cache;
            }
            meta.builder = any_service ? client->model() : any_cache ? cache.builder() : "fallback";
            meta.timestamp = timestamp;
            const Vocabulary vocab = build_vocabulary(records, meta);
            vocab.save(vocab_out);
            std::size_t counts[3] = {0, 0, 0};
            for (const auto& r : records) ++counts[static_cast<int>(r.source)];
            std::printf("lexicon=%zu irrelevant=%zu service=%zu cache=%zu fallback=%zu\n", lexicon.size(),
                        vocab.words().size(), counts[0], counts[1], counts[2]);
        } else if (*corpus_cmd) {
            std::string text;
            const WorldParams params;
            for (std::size_t i = 0; i < corpus_count; ++i) {
                const World w = generate_world(params, mix_seed(corpus_seed, i));
                std::string line;
                for (std::size_t t = 1; t + 1 < w.instruction.tokens.size(); ++t)
                    line += (line.empty() ? "" : " ") + w.instruction.tokens[t].text;
                text += line + "\n";
            }
            write_text_file(corpus_out, text);
        } else if (*world_cmd) {
            write_text_file(world_out, serialize_world(generate_world(wp, world_seed)));
        } else if (*ep_cmd) {
            const World world = parse_world(read_text_file(ep_world));
            PlanOptions po;
            po.k_btp = ep_kbtp;
            const StrategyPlan plan = parse_strategy(ep_strategy, po);
            std::optional<Vocabulary> vocab;
            if (!ep_vocab.empty()) vocab = Vocabulary::load(ep_vocab);
            EpisodeConfig ec;
            ec.instruction_strategy = plan.instruction;
            ec.view_strategy = plan.views;
            ec.k_btp = plan.k_btp;
            ec.selective_attention = plan.selective_attention;
            ec.instruction_retain = plan.instruction.kind == StrategyKind::none ? 1.0 : ep_retain;
            ec.view_retain = plan.views.kind == StrategyKind::none ? 1.0 : ep_retain;
            ec.importance = parse_importance_source(ep_importance);
            ec.oracle.p_flip = ep_pflip;
            ec.seed = ep_seed;
            StackConfigs stacks;
            stacks.language.hidden_dim = stacks.view.hidden_dim = stacks.cross.hidden_dim = world.params.hidden_dim;
            const Encoders enc = Encoders::create(stacks);
            const Vocabulary* vp = vocab ? &*vocab : nullptr;
            const EpisodeResult r = run_episode(world, ec, enc, vp);
            const EpisodeResult ref = run_episode(world, reference_config(ec), enc, vp);
            std::fputs(format_trace(r).c_str(), stdout);
            std::printf("success=%d steps=%zu decisions=%zu capped=%d\n", r.success ? 1 : 0, r.steps,
                        r.decisions, r.capped ? 1 : 0);
            print_ledger("ledger", r.flops);
            print_ledger("reference", ref.flops);
            std::printf("flops_percent=%.4f flops_per_mac=%llu\n", flops_percent(r.flops, ref.flops),
                        static_cast<unsigned long long>(CountingConvention::flops_per_mac));
            for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        } else if (*sweep_cmd) {
            SweepConfig config = SweepConfig::parse(read_text_file(sweep_config));
            config.output = sweep_out;
            std::optional<Vocabulary> vocab;
            if (!config.vocabulary.empty()) vocab = Vocabulary::load(config.vocabulary);
            SweepRunner runner(config, vocab ? &*vocab : nullptr, jobs);
            const auto rows = runner.run_all();
            std::filesystem::create_directories(sweep_out);
            const std::string csv = sweep_csv(rows);
            write_text_file(std::filesystem::path(sweep_out) / "sweep.csv", csv);
            write_text_file(std::filesystem::path(sweep_out) / "sweep.json", sweep_json(config, rows));
            std::fputs(csv.c_str(), stdout);
        } else if (*flops_cmd) {
            const std::uint64_t act = fl_act ? fl_act : fl_l;
            std::printf("# %s\n", CountingConvention::describe().c_str());
            std::printf("attention_flops=%llu (%.3e G)\n", static_cast<unsigned long long>(attention_flops(fl_l, fl_d)),
                        to_gflops(attention_flops(fl_l, fl_d)));
            std::printf("sas_attention_flops=%llu (%.3e G) l_act=%llu\n",
                        static_cast<unsigned long long>(sas_attention_flops(fl_l, act, fl_d)),
                        to_gflops(sas_attention_flops(fl_l, act, fl_d)), static_cast<unsigned long long>(act));
            std::printf("layer_flops=%llu (%.3e G) ffn_mult=%llu\n",
                        static_cast<unsigned long long>(layer_flops(fl_l, fl_d, fl_ffn)),
                        to_gflops(layer_flops(fl_l, fl_d, fl_ffn)), static_cast<unsigned long long>(fl_ffn));
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace navprune {

// Counting convention shared by the analytic model and the instrumented encoder.
struct CountingConvention {
    static constexpr std::uint64_t flops_per_mac = 2;
    static constexpr std::size_t projections = 4;  // Q, K, V, output; d x d each
    static std::string describe();
};

std::uint64_t attention_flops(std::uint64_t l, std::uint64_t d);
std::uint64_t sas_attention_flops(std::uint64_t l, std::uint64_t l_act, std::uint64_t d);
std::uint64_t layer_flops(std::uint64_t l, std::uint64_t d, std::uint64_t ffn_mult);

// Layer where tokens are pruned between attention and the output projection:
// Q/K/V and attention see l_in tokens (l_act of them as queries), the rest see l_out.
std::uint64_t layer_flops(std::uint64_t l_in, std::uint64_t l_out, std::uint64_t l_act,
                          std::uint64_t d, std::uint64_t ffn_mult);

struct StackShape {
    std::size_t layers = 1;
    std::size_t hidden_dim = 64;
    std::size_t ffn_mult = 4;
};

struct ModelDims {
    StackShape language{6, 64, 4};
    StackShape view{2, 64, 4};
    StackShape cross{3, 64, 4};
};

// Sequence lengths through a stack: layers + 1 entries (each layer input, then
// the output). `active` lists query rows per layer; empty means all rows.
struct StackSchedule {
    std::vector<std::size_t> lengths;
    std::vector<std::size_t> active;

    std::size_t final_length() const { return lengths.empty() ? 0 : lengths.back(); }
};

StackSchedule constant_schedule(std::size_t length, std::size_t layers);
std::uint64_t stack_flops(const StackSchedule& schedule, const StackShape& shape);

struct FlopsLedger {
    std::uint64_t lan = 0;  // language stack, once per episode
    std::uint64_t vis = 0;  // view stack, summed over decision steps
    std::uint64_t cm = 0;   // cross-modal stack, summed over decision steps
    std::size_t decisions = 0;
    std::uint64_t overhead = 0;

    std::uint64_t total() const { return lan + vis + cm + overhead; }
    // Per-step means, so total = lan + D * (mean_vis + mean_cm) + overhead.
    double mean_vis() const;
    double mean_cm() const;

    FlopsLedger& operator+=(const FlopsLedger& other);
};

double to_gflops(std::uint64_t flops);

// Cross-modal input length at step t is the final instruction length plus the
// final view length at t plus history[t].
FlopsLedger g_total(const StackSchedule& instruction, const std::vector<StackSchedule>& views,
                    const std::vector<std::size_t>& history, const ModelDims& dims,
                    std::size_t decisions, std::uint64_t overhead = 0);

double flops_percent(const FlopsLedger& pruned, const FlopsLedger& original);

}  // namespace navprune

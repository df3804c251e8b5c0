#include "navprune/flopsmeter.hpp"

#include <stdexcept>

namespace navprune {

std::string CountingConvention::describe() {
    return "flops_per_mac=2; projections=Q,K,V,O (d x d per token); attention=QK^T + Attn*V; "
           "ffn=d->ffn_mult*d->d; softmax/layernorm/bias excluded";
}

std::uint64_t attention_flops(std::uint64_t l, std::uint64_t d) { return sas_attention_flops(l, l, d); }

std::uint64_t sas_attention_flops(std::uint64_t l, std::uint64_t l_act, std::uint64_t d) {
    if (l_act > l) throw std::invalid_argument("l_act exceeds l");
    // Two matmuls (QK^T and Attn*V), each l_act * l * d MACs.
    return CountingConvention::flops_per_mac * 2 * l_act * l * d;
}

std::uint64_t layer_flops(std::uint64_t l, std::uint64_t d, std::uint64_t ffn_mult) {
    return layer_flops(l, l, l, d, ffn_mult);
}

std::uint64_t layer_flops(std::uint64_t l_in, std::uint64_t l_out, std::uint64_t l_act,
                          std::uint64_t d, std::uint64_t ffn_mult) {
    if (l_out > l_in) throw std::invalid_argument("l_out exceeds l_in");
    const std::uint64_t m = CountingConvention::flops_per_mac;
    const std::uint64_t qkv = m * 3 * l_in * d * d;
    const std::uint64_t out = m * l_out * d * d;
    const std::uint64_t ffn = m * 2 * ffn_mult * l_out * d * d;
    return qkv + sas_attention_flops(l_in, l_act, d) + out + ffn;
}

StackSchedule constant_schedule(std::size_t length, std::size_t layers) {
    return {std::vector<std::size_t>(layers + 1, length), {}};
}

std::uint64_t stack_flops(const StackSchedule& schedule, const StackShape& shape) {
    if (schedule.lengths.size() != shape.layers + 1)
        throw std::invalid_argument("schedule has " + std::to_string(schedule.lengths.size()) +
                                    " lengths for a " + std::to_string(shape.layers) +
                                    "-layer stack");
    if (!schedule.active.empty() && schedule.active.size() != shape.layers)
        throw std::invalid_argument("active-row schedule does not match stack depth");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < shape.layers; ++i) {
        const std::size_t l_in = schedule.lengths[i];
        const std::size_t l_act = schedule.active.empty() ? l_in : schedule.active[i];
        total += layer_flops(l_in, schedule.lengths[i + 1], l_act, shape.hidden_dim, shape.ffn_mult);
    }
    return total;
}

double FlopsLedger::mean_vis() const {
    return decisions ? static_cast<double>(vis) / static_cast<double>(decisions) : 0.0;
}

double FlopsLedger::mean_cm() const {
    return decisions ? static_cast<double>(cm) / static_cast<double>(decisions) : 0.0;
}

FlopsLedger& FlopsLedger::operator+=(const FlopsLedger& other) {
    lan += other.lan;
    vis += other.vis;
    cm += other.cm;
    decisions += other.decisions;
    overhead += other.overhead;
    return *this;
}

double to_gflops(std::uint64_t flops) { return static_cast<double>(flops) * 1e-9; }

FlopsLedger g_total(const StackSchedule& instruction, const std::vector<StackSchedule>& views,
                    const std::vector<std::size_t>& history, const ModelDims& dims,
                    std::size_t decisions, std::uint64_t overhead) {
    if (views.size() != decisions || history.size() != decisions)
        throw std::invalid_argument("per-step schedules do not match the decision count");
    FlopsLedger ledger;
    ledger.decisions = decisions;
    ledger.overhead = overhead;
    ledger.lan = stack_flops(instruction, dims.language);
    for (std::size_t t = 0; t < decisions; ++t) {
        ledger.vis += stack_flops(views[t], dims.view);
        const std::size_t l_cm = instruction.final_length() + views[t].final_length() + history[t];
        ledger.cm += stack_flops(constant_schedule(l_cm, dims.cross.layers), dims.cross);
    }
    return ledger;
}

double flops_percent(const FlopsLedger& pruned, const FlopsLedger& original) {
    if (original.total() == 0) throw std::invalid_argument("original ledger is zero");
    return 100.0 * static_cast<double>(pruned.total()) / static_cast<double>(original.total());
}

}  // namespace navprune

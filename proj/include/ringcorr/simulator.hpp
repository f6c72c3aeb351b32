#pragma once

#include "ringcorr/chain_model.hpp"
#include "ringcorr/gamma_model.hpp"
#include "ringcorr/ingest.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ringcorr::sim {

// Behaviour shared by `count` identical agents.
struct AgentProfile {
    std::string name;
    std::size_t count = 1;
    std::array<double, 24> hour_weights = filled(1.0); // activity by UTC hour
    double spend_rate = 1.0;                            // expected spends per day
    // chance that a multi-input spend takes its inputs from own outputs created
    // within cluster_window_seconds of each other
    double self_cluster = 0.0;
    std::int64_t cluster_window_seconds = 86400;
    // null model: real inputs are picked exactly like decoys instead of from
    // the agent's own outputs
    bool real_from_decoy_law = false;
    std::vector<double> inputs_per_tx{0.5, 0.5};  // weight of 1, 2, ... inputs
    std::vector<double> outputs_per_tx{0.0, 1.0}; // weight of 1, 2, ... outputs
    std::size_t initial_outputs = 4;              // granted in the genesis block

    static constexpr std::array<double, 24> filled(double v) {
        std::array<double, 24> a{};
        for (auto& x : a) x = v;
        return a;
    }
    // Weight 1 inside [from, from + hours) (mod 24), 0 elsewhere.
    static std::array<double, 24> window(int from, int hours);
};

struct SimConfig {
    std::vector<AgentProfile> agents;
    std::int64_t block_interval = 120;
    std::int64_t total_blocks = 10000;
    std::size_t ring_size = kDefaultRingSize;
    gamma::GammaParams gamma;
    std::uint64_t seed = 1;
    std::int64_t genesis_timestamp = 1514764800; // 2018-01-01T00:00:00Z
    std::int64_t start_height = 0;
    std::uint64_t coinbase_outputs = 1; // unowned outputs per block
    bool record_decoys = false;

    // ConfigError on any violated invariant.
    void validate() const;
};

nlohmann::json to_json(const SimConfig& c);
SimConfig config_from_json(const nlohmann::json& j);
SimConfig load_config(const std::filesystem::path& path);

struct GroundTruthEntry {
    std::string tx_id;
    std::size_t ring = 0;
    std::size_t real = 0; // member position of the real input

    friend bool operator==(const GroundTruthEntry&, const GroundTruthEntry&) = default;
};

struct DecoyRecord {
    std::int64_t age_seconds = 0;     // spend timestamp minus origin timestamp
    std::int64_t max_age_seconds = 0; // spend timestamp minus genesis
    bool fallback = false;            // drawn uniformly after failed resampling
};

struct SimStats {
    std::uint64_t spends = 0;
    std::uint64_t coinbase = 0;
    std::uint64_t rings = 0;
    std::uint64_t multi_input = 0;
    std::uint64_t starved = 0;         // agent lacked spendable outputs; tx skipped
    std::uint64_t ring_starved = 0;    // chain too short to fill a ring; tx skipped
    std::uint64_t decoy_resamples = 0; // sampled ages predating the chain
    std::uint64_t decoy_fallbacks = 0; // uniform fallback after 32 resamples
    std::uint64_t clustered_spends = 0;
};

struct SimResult {
    std::vector<Transaction> txs; // block order, coinbase first in each block
    std::vector<ingest::RawTransactionRecord> raw;
    std::vector<GroundTruthEntry> truth;
    std::vector<DecoyRecord> decoys; // only with record_decoys
    SimStats stats;
};

SimResult simulate_chain(const SimConfig& config);
inline SimResult simulate_chain(SimConfig config, std::uint64_t seed) {
    config.seed = seed;
    return simulate_chain(config);
}

std::string truth_line(const GroundTruthEntry& e);
void write_truth(const std::filesystem::path& path, std::span<const GroundTruthEntry> truth);
std::vector<GroundTruthEntry> read_truth(const std::filesystem::path& path);

// Posterior of one scored ring, as read back from a score file.
struct ScoredRing {
    std::string tx_id;
    std::size_t ring = 0;
    std::vector<double> posterior;
};

struct Metrics {
    std::size_t rings = 0;
    std::size_t top1_hits = 0;
    std::size_t tied_rings = 0; // rings whose argmax was a tie, broken to the lowest index
    double top1_accuracy = 0.0;
    double top1_wilson_lower95 = 0.0;
    double mean_reciprocal_rank = 0.0;
    double mean_true_mass = 0.0;
    double true_mass_std_error = 0.0;
    double chance_baseline = 0.0; // mean of 1 / ring size

    nlohmann::json to_json() const;
};

// KeyError when a scored ring has no ground-truth entry.
Metrics evaluate_scorer(std::span<const ScoredRing> scores, std::span<const GroundTruthEntry> truth);

// Wilson score lower bound for k successes in n trials.
double wilson_lower(std::size_t k, std::size_t n, double z = 1.959963984540054);

} // namespace ringcorr::sim

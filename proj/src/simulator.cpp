#include "ringcorr/simulator.hpp"

#include "ringcorr/errors.hpp"
#include "ringcorr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

namespace ringcorr::sim {

using nlohmann::json;

std::array<double, 24> AgentProfile::window(int from, int hours) {
    std::array<double, 24> a{};
    for (int k = 0; k < hours; ++k)
        a[static_cast<std::size_t>(((from + k) % 24 + 24) % 24)] = 1.0;
    return a;
}

void SimConfig::validate() const {
    if (total_blocks < 1)
        throw ConfigError("total_blocks must be >= 1");
    if (ring_size < 2)
        throw ConfigError("ring_size must be >= 2");
    if (block_interval < 1)
        throw ConfigError("block_interval must be >= 1 second");
    if (genesis_timestamp < 0 || start_height < 0)
        throw ConfigError("genesis_timestamp and start_height must be non-negative");
    try {
        gamma.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    for (const auto& a : agents) {
        const std::string who = "agent '" + a.name + "': ";
        double total = 0.0;
        for (double w : a.hour_weights) {
            if (!(w >= 0.0) || !std::isfinite(w))
                throw ConfigError(who + "hour weights must be non-negative");
            total += w;
        }
        if (total <= 0.0)
            throw ConfigError(who + "hour weights are all zero");
        if (!(a.spend_rate > 0.0))
            throw ConfigError(who + "spend_rate must be positive");
        if (!(a.self_cluster >= 0.0 && a.self_cluster <= 1.0))
            throw ConfigError(who + "self_cluster must lie in [0, 1]");
        if (a.cluster_window_seconds < 0)
            throw ConfigError(who + "cluster_window_seconds must be non-negative");
        for (const auto* dist : {&a.inputs_per_tx, &a.outputs_per_tx}) {
            const double s = std::accumulate(dist->begin(), dist->end(), 0.0);
            if (dist->empty() || !(s > 0.0) ||
                std::any_of(dist->begin(), dist->end(), [](double w) { return !(w >= 0.0); }))
                throw ConfigError(who + "inputs/outputs distributions need non-negative weights with a positive sum");
        }
    }
}

json to_json(const SimConfig& c) {
    json agents = json::array();
    for (const auto& a : c.agents) {
        agents.push_back({{"name", a.name},
                          {"count", a.count},
                          {"hour_weights", a.hour_weights},
                          {"spend_rate", a.spend_rate},
                          {"self_cluster", a.self_cluster},
                          {"cluster_window_seconds", a.cluster_window_seconds},
                          {"real_from_decoy_law", a.real_from_decoy_law},
                          {"inputs_per_tx", a.inputs_per_tx},
                          {"outputs_per_tx", a.outputs_per_tx},
                          {"initial_outputs", a.initial_outputs}});
    }
    return {{"agents", agents},
            {"block_interval", c.block_interval},
            {"total_blocks", c.total_blocks},
            {"ring_size", c.ring_size},
            {"gamma", {{"shape", c.gamma.shape}, {"scale", c.gamma.scale}}},
            {"seed", c.seed},
            {"genesis_timestamp", c.genesis_timestamp},
            {"start_height", c.start_height},
            {"coinbase_outputs", c.coinbase_outputs}};
}

SimConfig config_from_json(const json& j) {
    SimConfig c;
    try {
        c.block_interval = j.value("block_interval", c.block_interval);
        c.total_blocks = j.value("total_blocks", c.total_blocks);
        c.ring_size = j.value("ring_size", c.ring_size);
        c.seed = j.value("seed", c.seed);
        c.genesis_timestamp = j.value("genesis_timestamp", c.genesis_timestamp);
        c.start_height = j.value("start_height", c.start_height);
        c.coinbase_outputs = j.value("coinbase_outputs", c.coinbase_outputs);
        if (auto g = j.find("gamma"); g != j.end()) {
            c.gamma.shape = g->value("shape", c.gamma.shape);
            c.gamma.scale = g->value("scale", c.gamma.scale);
        }
        for (const auto& aj : j.value("agents", json::array())) {
            AgentProfile a;
            a.name = aj.value("name", std::string("agent"));
            a.count = aj.value("count", a.count);
            if (aj.contains("hour_weights")) {
                const auto w = aj["hour_weights"].get<std::vector<double>>();
                if (w.size() != 24)
                    throw ConfigError("agent '" + a.name + "': hour_weights needs 24 entries");
                std::copy(w.begin(), w.end(), a.hour_weights.begin());
            } else if (aj.contains("active_hours")) {
                const auto& h = aj["active_hours"];
                a.hour_weights = AgentProfile::window(h.at("from").get<int>(), h.at("hours").get<int>());
            }
            a.spend_rate = aj.value("spend_rate", a.spend_rate);
            a.self_cluster = aj.value("self_cluster", a.self_cluster);
            a.cluster_window_seconds = aj.value("cluster_window_seconds", a.cluster_window_seconds);
            a.real_from_decoy_law = aj.value("real_from_decoy_law", a.real_from_decoy_law);
            a.inputs_per_tx = aj.value("inputs_per_tx", a.inputs_per_tx);
            a.outputs_per_tx = aj.value("outputs_per_tx", a.outputs_per_tx);
            a.initial_outputs = aj.value("initial_outputs", a.initial_outputs);
            c.agents.push_back(std::move(a));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed simulator config: ") + e.what());
    }
    c.validate();
    return c;
}

SimConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IOError("cannot open " + path.string());
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

namespace {

constexpr int kMaxTruncationResamples = 32;
constexpr int kMaxDuplicateRedraws = 1000;

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::string make_tx_id(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t state = seed ^ (counter * 0xD1B54A32D192ED03ull);
    std::string id;
    id.reserve(64);
    char buf[17];
    for (int i = 0; i < 4; ++i) {
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(splitmix64(state)));
        id += buf;
    }
    return id;
}

// Index into a weight vector, drawn proportionally.
std::size_t draw_weighted(const std::vector<double>& w, Rng& rng) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (u < w[i])
            return i;
        u -= w[i];
    }
    for (std::size_t i = w.size(); i-- > 0;)
        if (w[i] > 0.0)
            return i;
    return 0;
}

struct Output {
    BlockRef block;
    int owner = -1; // agent instance, -1 when unowned
};

struct Agent {
    const AgentProfile* profile;
    double mean_weight;
    std::vector<std::uint64_t> unspent;
};

class ChainBuilder {
public:
    explicit ChainBuilder(const SimConfig& c) : cfg_(c), rng_(make_rng(c.seed, 0)) {
        for (const auto& p : cfg_.agents) {
            const double mean = std::accumulate(p.hour_weights.begin(), p.hour_weights.end(), 0.0) / 24.0;
            for (std::size_t k = 0; k < p.count; ++k)
                agents_.push_back({&p, mean, {}});
        }
    }

    SimResult run() {
        for (std::int64_t b = 0; b < cfg_.total_blocks; ++b)
            step(b);
        return std::move(result_);
    }

private:
    struct PendingTx {
        Transaction tx;
        std::vector<std::vector<std::uint64_t>> ring_indices;
        int owner;
        std::size_t outputs;
    };

    void step(std::int64_t b) {
        const BlockRef block{cfg_.start_height + b, cfg_.genesis_timestamp + b * cfg_.block_interval};
        std::vector<PendingTx> pending;

        if (b > 0) {
            const int hour = hour_of(block.timestamp);
            const double dt_days = static_cast<double>(cfg_.block_interval) / 86400.0;
            for (std::size_t a = 0; a < agents_.size(); ++a) {
                const auto& agent = agents_[a];
                const double lambda = agent.profile->spend_rate * dt_days *
                                      agent.profile->hour_weights[static_cast<std::size_t>(hour)] /
                                      agent.mean_weight;
                if (uniform01(rng_) >= 1.0 - std::exp(-lambda))
                    continue;
                if (auto tx = make_spend(static_cast<int>(a), block))
                    pending.push_back(std::move(*tx));
            }
        }

        // coinbase first, as in a real block
        std::uint64_t coinbase_outs = cfg_.coinbase_outputs;
        if (b == 0)
            for (const auto& agent : agents_)
                coinbase_outs += agent.profile->initial_outputs;
        Transaction coinbase{make_tx_id(cfg_.seed, tx_counter_++), block, {}};
        result_.txs.push_back(coinbase);
        result_.raw.push_back({coinbase.tx_id, block.height, block.timestamp, {}, coinbase_outs});
        ++result_.stats.coinbase;

        block_first_.push_back(outputs_.size());
        block_ts_.push_back(block.timestamp);
        for (std::uint64_t k = 0; k < cfg_.coinbase_outputs; ++k)
            add_output(block, -1);
        if (b == 0)
            for (std::size_t a = 0; a < agents_.size(); ++a)
                for (std::size_t k = 0; k < agents_[a].profile->initial_outputs; ++k)
                    add_output(block, static_cast<int>(a));

        for (auto& p : pending) {
            for (std::size_t k = 0; k < p.outputs; ++k) {
                const int owner = (k == 0 && p.owner >= 0)
                                      ? p.owner
                                      : static_cast<int>(uniform_below(rng_, agents_.size()));
                add_output(block, owner);
            }
            ingest::RawTransactionRecord raw{p.tx.tx_id, block.height, block.timestamp, {}, p.outputs};
            for (auto ring : p.ring_indices) {
                std::sort(ring.begin(), ring.end());
                raw.rings.push_back(std::move(ring));
            }
            result_.raw.push_back(std::move(raw));
            result_.txs.push_back(std::move(p.tx));
        }
    }

    void add_output(const BlockRef& block, int owner) {
        if (owner >= 0)
            agents_[static_cast<std::size_t>(owner)].unspent.push_back(outputs_.size());
        outputs_.push_back({block, owner});
    }

    // Nearest earlier block by timestamp; ties go to the older block.
    std::size_t nearest_block(std::int64_t target, std::size_t blocks_before) const {
        const auto end = block_ts_.begin() + static_cast<std::ptrdiff_t>(blocks_before);
        auto it = std::lower_bound(block_ts_.begin(), end, target);
        if (it == end)
            return blocks_before - 1;
        if (it == block_ts_.begin())
            return 0;
        const auto prev = std::prev(it);
        return (target - *prev <= *it - target) ? static_cast<std::size_t>(prev - block_ts_.begin())
                                                : static_cast<std::size_t>(it - block_ts_.begin());
    }

    struct Decoy {
        std::uint64_t index;
        bool fallback;
    };

    // One output chosen by the decoy law among those created before the
    // current block.
    Decoy draw_decoy(const BlockRef& spend) {
        const auto available = static_cast<std::uint64_t>(outputs_.size());
        const std::int64_t max_age = spend.timestamp - cfg_.genesis_timestamp;
        for (int attempt = 0; attempt < kMaxTruncationResamples; ++attempt) {
            const auto age = gamma::sample_decoy_age(cfg_.gamma, rng_);
            if (age > max_age) {
                ++result_.stats.decoy_resamples;
                continue;
            }
            const auto blk = nearest_block(spend.timestamp - age, block_ts_.size());
            const std::uint64_t first = block_first_[blk];
            const std::uint64_t last = blk + 1 < block_first_.size() ? block_first_[blk + 1] : available;
            return {first + uniform_below(rng_, last - first), false};
        }
        ++result_.stats.decoy_fallbacks;
        return {uniform_below(rng_, available), true};
    }

    // k distinct outputs of the agent, honouring the self-cluster habit.
    std::vector<std::uint64_t> pick_own_outputs(Agent& agent, std::size_t k) {
        auto& pool = agent.unspent;
        std::vector<std::size_t> chosen; // positions in pool

        if (k >= 2 && uniform01(rng_) < agent.profile->self_cluster) {
            const std::size_t anchor = uniform_below(rng_, pool.size());
            const auto anchor_ts = outputs_[pool[anchor]].block.timestamp;
            std::vector<std::size_t> near;
            for (std::size_t i = 0; i < pool.size(); ++i)
                if (i != anchor &&
                    std::llabs(outputs_[pool[i]].block.timestamp - anchor_ts) <= agent.profile->cluster_window_seconds)
                    near.push_back(i);
            if (near.size() >= k - 1) {
                chosen.push_back(anchor);
                for (std::size_t n = 0; n + 1 < k; ++n) {
                    const auto pick = n + uniform_below(rng_, near.size() - n);
                    std::swap(near[n], near[pick]);
                    chosen.push_back(near[n]);
                }
                ++result_.stats.clustered_spends;
            }
        }
        if (chosen.empty()) {
            std::vector<std::size_t> idx(pool.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            for (std::size_t n = 0; n < k; ++n) {
                const auto pick = n + uniform_below(rng_, idx.size() - n);
                std::swap(idx[n], idx[pick]);
                chosen.push_back(idx[n]);
            }
        }

        std::vector<std::uint64_t> out;
        for (auto pos : chosen)
            out.push_back(pool[pos]);
        // remove from the pool, highest position first
        std::sort(chosen.rbegin(), chosen.rend());
        for (auto pos : chosen) {
            pool[pos] = pool.back();
            pool.pop_back();
        }
        return out;
    }

    std::optional<PendingTx> make_spend(int a, const BlockRef& block) {
        auto& agent = agents_[static_cast<std::size_t>(a)];
        const auto& profile = *agent.profile;
        const std::size_t k = draw_weighted(profile.inputs_per_tx, rng_) + 1;
        const std::size_t m = draw_weighted(profile.outputs_per_tx, rng_) + 1;
        const std::uint64_t available = outputs_.size();

        if (available < std::max<std::uint64_t>(cfg_.ring_size, k)) {
            ++result_.stats.ring_starved;
            return std::nullopt;
        }

        std::vector<std::uint64_t> reals;
        if (profile.real_from_decoy_law) {
            while (reals.size() < k) {
                const auto idx = draw_decoy(block).index;
                if (std::find(reals.begin(), reals.end(), idx) == reals.end())
                    reals.push_back(idx);
            }
        } else {
            if (agent.unspent.size() < k) {
                ++result_.stats.starved;
                return std::nullopt;
            }
            reals = pick_own_outputs(agent, k);
        }

        PendingTx p{{make_tx_id(cfg_.seed, tx_counter_++), block, {}}, {}, a, m};
        for (std::size_t r = 0; r < k; ++r) {
            std::vector<std::uint64_t> members{reals[r]};
            while (members.size() < cfg_.ring_size) {
                Decoy d{0, false};
                int tries = 0;
                do {
                    d = (tries++ < kMaxDuplicateRedraws) ? draw_decoy(block)
                                                         : Decoy{uniform_below(rng_, available), true};
                } while (std::find(members.begin(), members.end(), d.index) != members.end());
                members.push_back(d.index);
                if (cfg_.record_decoys)
                    result_.decoys.push_back({block.timestamp - outputs_[d.index].block.timestamp,
                                              block.timestamp - cfg_.genesis_timestamp, d.fallback});
            }
            // real member moves to a uniformly random position
            const std::size_t pos = uniform_below(rng_, cfg_.ring_size);
            std::swap(members[0], members[pos]);

            RingInput ring;
            for (auto idx : members)
                ring.members.push_back({outputs_[idx].block, idx});
            p.tx.inputs.push_back(std::move(ring));
            p.ring_indices.push_back(std::move(members));
            result_.truth.push_back({p.tx.tx_id, r, pos});
        }
        ++result_.stats.spends;
        result_.stats.rings += k;
        if (k >= 2)
            ++result_.stats.multi_input;
        return p;
    }

    const SimConfig& cfg_;
    Rng rng_;
    std::vector<Agent> agents_;
    std::vector<Output> outputs_;
    std::vector<std::uint64_t> block_first_;
    std::vector<std::int64_t> block_ts_;
    std::uint64_t tx_counter_ = 0;
    SimResult result_;
};

} // namespace

SimResult simulate_chain(const SimConfig& config) {
    config.validate();
    ChainBuilder builder(config);
    return builder.run();
}

std::string truth_line(const GroundTruthEntry& e) {
    nlohmann::ordered_json j;
    j["tx"] = e.tx_id;
    j["ring"] = e.ring;
    j["real"] = e.real;
    return j.dump();
}

void write_truth(const std::filesystem::path& path, std::span<const GroundTruthEntry> truth) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IOError("cannot write " + path.string());
    for (const auto& e : truth)
        out << truth_line(e) << '\n';
    if (!out)
        throw IOError("write failed for " + path.string());
}

std::vector<GroundTruthEntry> read_truth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IOError("cannot open " + path.string());
    std::vector<GroundTruthEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = json::parse(line);
            out.push_back({j.at("tx").get<std::string>(), j.at("ring").get<std::size_t>(),
                           j.at("real").get<std::size_t>()});
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return out;
}

json Metrics::to_json() const {
    return {{"rings", rings},
            {"top1_hits", top1_hits},
            {"top1_accuracy", top1_accuracy},
            {"top1_wilson_lower95", top1_wilson_lower95},
            {"tied_rings", tied_rings},
            {"mean_reciprocal_rank", mean_reciprocal_rank},
            {"mean_true_mass", mean_true_mass},
            {"true_mass_std_error", true_mass_std_error},
            {"chance_baseline", chance_baseline}};
}

double wilson_lower(std::size_t k, std::size_t n, double z) {
    if (n == 0)
        return 0.0;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double z2 = z * z;
    const double centre = p + z2 / (2.0 * nn);
    const double spread = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    return (centre - spread) / (1.0 + z2 / nn);
}

namespace {

// Neumaier-compensated running sum.
struct Sum {
    double s = 0.0;
    double c = 0.0;
    void add(double x) {
        const double t = s + x;
        c += std::fabs(s) >= std::fabs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    double value() const { return s + c; }
};

} // namespace

Metrics evaluate_scorer(std::span<const ScoredRing> scores, std::span<const GroundTruthEntry> truth) {
    std::map<std::pair<std::string, std::size_t>, std::size_t> real_of;
    for (const auto& t : truth)
        real_of[{t.tx_id, t.ring}] = t.real;

    Metrics m;
    Sum rr_sum, mass_sum, mass_sq, chance_sum;
    for (const auto& s : scores) {
        auto it = real_of.find({s.tx_id, s.ring});
        if (it == real_of.end())
            throw KeyError("no ground truth for tx " + s.tx_id + " ring " + std::to_string(s.ring));
        const std::size_t real = it->second;
        if (real >= s.posterior.size())
            throw KeyError("ground-truth position out of range for tx " + s.tx_id);

        const auto best = static_cast<std::size_t>(
            std::max_element(s.posterior.begin(), s.posterior.end()) - s.posterior.begin());
        const double top = s.posterior[best];
        if (std::count(s.posterior.begin(), s.posterior.end(), top) > 1)
            ++m.tied_rings;
        if (best == real)
            ++m.top1_hits;

        // rank with the same lowest-index tie-break
        std::size_t rank = 1;
        for (std::size_t j = 0; j < s.posterior.size(); ++j)
            if (s.posterior[j] > s.posterior[real] || (s.posterior[j] == s.posterior[real] && j < real))
                ++rank;
        rr_sum.add(1.0 / static_cast<double>(rank));

        mass_sum.add(s.posterior[real]);
        mass_sq.add(s.posterior[real] * s.posterior[real]);
        chance_sum.add(1.0 / static_cast<double>(s.posterior.size()));
        ++m.rings;
    }
    if (m.rings == 0)
        return m;
    const double n = static_cast<double>(m.rings);
    m.top1_accuracy = static_cast<double>(m.top1_hits) / n;
    m.top1_wilson_lower95 = wilson_lower(m.top1_hits, m.rings);
    m.mean_reciprocal_rank = rr_sum.value() / n;
    m.mean_true_mass = mass_sum.value() / n;
    if (m.rings > 1) {
        const double var = (mass_sq.value() - n * m.mean_true_mass * m.mean_true_mass) / (n - 1.0);
        m.true_mass_std_error = std::sqrt(std::max(0.0, var) / n);
    }
    m.chance_baseline = chance_sum.value() / n;
    return m;
}

} // namespace ringcorr::sim

#include "ringcorr/cli.hpp"

#include "ringcorr/correlation.hpp"
#include "ringcorr/daemon_client.hpp"
#include "ringcorr/errors.hpp"
#include "ringcorr/ingest.hpp"
#include "ringcorr/ring_scorer.hpp"
#include "ringcorr/simulator.hpp"
#include "ringcorr/surface_io.hpp"
#include "ringcorr/tod_correlation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace ringcorr::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

struct Manifest {
    std::string subcommand;
    ojson config = ojson::object();
    ojson inputs = ojson::object();
    ojson outputs = ojson::object();
    std::optional<std::uint64_t> seed;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void write(const fs::path& path) const {
        ojson j;
        j["subcommand"] = subcommand;
        j["tool_version"] = kToolVersion;
        j["config"] = config;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["seed"] = seed ? ojson(*seed) : ojson(nullptr);
        const std::chrono::duration<double> d = std::chrono::steady_clock::now() - started;
        j["duration_seconds"] = d.count();
        io::write_json(path, j);
    }
};

std::size_t thread_count(std::size_t requested) {
    if (requested > 0)
        return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<Transaction> load_window(const fs::path& chain, std::optional<std::int64_t> from,
                                     std::optional<std::int64_t> to) {
    auto txs = ingest::read_resolved_file(chain);
    if (from || to) {
        std::erase_if(txs, [&](const Transaction& tx) {
            return (from && tx.block.height < *from) || (to && tx.block.height > *to);
        });
    }
    return txs;
}

SurfaceMeta window_meta(const std::vector<Transaction>& txs, const json& binning,
                        std::optional<std::uint64_t> seed) {
    SurfaceMeta meta;
    if (!txs.empty()) {
        auto [lo, hi] = std::minmax_element(txs.begin(), txs.end(), [](const auto& a, const auto& b) {
            return a.block.height < b.block.height;
        });
        meta.from_height = lo->block.height;
        meta.to_height = hi->block.height;
    }
    meta.seed = seed;
    meta.binning = binning;
    return meta;
}

void write_surface(const fs::path& dir, const std::string& stem, const CorrelationSurface& s,
                   Manifest& m) {
    io::write_json(dir / (stem + ".json"), io::to_json(s));
    io::emit_plotdata(s, dir / (stem + ".csv"));
    m.outputs[stem] = {stem + ".json", stem + ".csv"};
}

// ---- ingest -------------------------------------------------------------

struct IngestArgs {
    std::string rpc_url;
    std::int64_t from_height = -1;
    std::int64_t to_height = -1;
    std::string out;
    std::string raw;
    std::string checkpoint;
    std::string quarantine;
    std::optional<std::uint64_t> start_index;
    std::int64_t checkpoint_every = 1000;
};

int do_ingest(const IngestArgs& a) {
    Manifest m;
    m.subcommand = "ingest";
    if (!a.raw.empty()) {
        m.inputs["raw"] = a.raw;
        m.config["start_index"] = a.start_index ? ojson(*a.start_index) : ojson(nullptr);
        std::optional<fs::path> q;
        if (!a.quarantine.empty())
            q = a.quarantine;
        const auto report = ingest::resolve_file(a.raw, a.out, a.start_index, q);
        std::cerr << report.to_json() << '\n';
        m.outputs["resolved"] = a.out;
        m.outputs["report"] = ojson::parse(report.to_json());
        m.write(a.out + ".manifest.json");
        return 0;
    }

    std::string url = a.rpc_url;
    if (url.empty())
        if (const char* env = std::getenv("RINGCORR_RPC_URL"))
            url = env;
    if (url.empty())
        throw CLI::RequiredError("--rpc-url (or RINGCORR_RPC_URL)");
    if (a.from_height < 0 || a.to_height < 0)
        throw CLI::RequiredError("--from-height and --to-height");

    ingest::DaemonClient client(url);
    ingest::FetchOptions opts;
    opts.checkpoint = a.checkpoint.empty() ? fs::path(a.out + ".checkpoint") : fs::path(a.checkpoint);
    opts.checkpoint_every = a.checkpoint_every;
    const auto summary = ingest::fetch_to_file(client, a.from_height, a.to_height, a.out, opts);
    m.inputs["rpc_url"] = url;
    m.config = {{"from_height", a.from_height}, {"to_height", a.to_height},
                {"checkpoint_every", a.checkpoint_every}};
    m.outputs = {{"raw", a.out}, {"blocks", summary.blocks}, {"records", summary.records},
                 {"resumed", summary.resumed}};
    m.write(a.out + ".manifest.json");
    return 0;
}

// ---- analyze pairs ------------------------------------------------------

struct PairsArgs {
    std::string chain;
    std::string binning = "linear";
    double bin_width_days = 16.0;
    std::size_t bins = 0;
    std::string space;
    std::uint64_t background_seed = 1;
    std::int64_t chunk_blocks = 10000;
    std::string marginals = "shared";
    std::optional<std::int64_t> from_height;
    std::optional<std::int64_t> to_height;
    std::size_t threads = 0;
    std::string out_dir;
};

int do_pairs(const PairsArgs& a) {
    Manifest m;
    m.subcommand = "analyze pairs";
    m.seed = a.background_seed;

    BinningSpec spec;
    spec.mode = parse_binning_mode(a.binning);
    if (spec.mode == BinningMode::linear) {
        spec.bin_count = a.bins ? a.bins : 64;
        spec.space = a.space.empty() ? VariableSpace::age : parse_variable_space(a.space);
        spec.bin_width = spec.space == VariableSpace::age ? a.bin_width_days * 86400.0 : a.bin_width_days;
    } else {
        spec.bin_count = a.bins ? a.bins : 50;
        spec.space = a.space.empty() ? VariableSpace::log_age : parse_variable_space(a.space);
    }
    const auto binning = Binning::from_spec(spec);
    const auto binning_json = io::binning_to_json(spec);
    const auto mode = a.marginals == "per-axis" ? MarginalMode::per_axis : MarginalMode::shared;
    const auto shards = thread_count(a.threads);

    m.inputs["chain"] = a.chain;
    m.config = {{"binning", ojson::parse(binning_json.dump())},
                {"background_seed", a.background_seed},
                {"chunk_blocks", a.chunk_blocks},
                {"marginals", a.marginals},
                {"from_height", a.from_height ? ojson(*a.from_height) : ojson(nullptr)},
                {"to_height", a.to_height ? ojson(*a.to_height) : ojson(nullptr)}};

    const auto txs = load_window(a.chain, a.from_height, a.to_height);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);

    const auto fg = accumulate_foreground(txs, binning, shards);
    const auto bg = accumulate_background(txs, binning, a.background_seed, shards);
    const auto fg_meta = window_meta(txs, binning_json, std::nullopt);
    const auto bg_meta = window_meta(txs, binning_json, a.background_seed);

    io::write_json(dir / "foreground_joint.json", io::to_json(fg.joint, "foreground_joint", fg_meta));
    io::write_json(dir / "foreground_marginal.json", io::to_json(fg.marginal, "foreground_marginal", fg_meta));
    io::write_json(dir / "background_joint.json", io::to_json(bg.joint, "background_joint", bg_meta));
    io::write_json(dir / "background_marginal.json", io::to_json(bg.marginal, "background_marginal", bg_meta));
    m.outputs["histograms"] = {"foreground_joint.json", "foreground_marginal.json",
                               "background_joint.json", "background_marginal.json"};

    auto c_fg = correlation(fg, SurfaceKind::foreground, mode);
    c_fg.meta = fg_meta;
    auto c_bg = correlation(bg, SurfaceKind::background, mode);
    c_bg.meta = bg_meta;
    auto c_ratio = ratio(c_fg, c_bg);
    c_ratio.meta = bg_meta;
    write_surface(dir, "correlation_foreground", c_fg, m);
    write_surface(dir, "correlation_background", c_bg, m);
    write_surface(dir, "ratio", c_ratio, m);

    for (auto [stat, stem] : {std::pair{DiagonalStatistic::foreground, "diagonal"},
                              std::pair{DiagonalStatistic::ratio, "diagonal_ratio"}}) {
        try {
            const auto p = chunked_diagonal(txs, binning, a.chunk_blocks, stat, a.background_seed);
            io::write_json(dir / (std::string(stem) + ".json"), io::to_json(p, bg_meta));
            std::ofstream(dir / (std::string(stem) + ".csv"), std::ios::binary) << io::diagonal_csv(p);
            m.outputs[stem] = {std::string(stem) + ".json", std::string(stem) + ".csv"};
        } catch (const InsufficientData& e) {
            m.outputs[stem] = std::string("skipped: ") + e.what();
        }
    }
    m.write(dir / "manifest.json");
    return 0;
}

// ---- analyze tod --------------------------------------------------------

struct TodArgs {
    std::string chain;
    std::optional<std::uint64_t> background_seed;
    std::optional<std::int64_t> from_height;
    std::optional<std::int64_t> to_height;
    std::size_t threads = 0;
    std::string out_dir;
};

int do_tod(const TodArgs& a) {
    Manifest m;
    m.subcommand = "analyze tod";
    m.seed = a.background_seed;
    m.inputs["chain"] = a.chain;
    m.config = {{"background_seed", a.background_seed ? ojson(*a.background_seed) : ojson(nullptr)},
                {"from_height", a.from_height ? ojson(*a.from_height) : ojson(nullptr)},
                {"to_height", a.to_height ? ojson(*a.to_height) : ojson(nullptr)}};

    const auto txs = load_window(a.chain, a.from_height, a.to_height);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    const auto shards = thread_count(a.threads);
    const json hours_binning = {{"mode", "hours"}, {"bins", 24}};
    const auto meta = window_meta(txs, hours_binning, std::nullopt);

    auto emit = [&](HourSurface h, const std::string& stem) {
        h.surface.meta = meta;
        write_surface(dir, stem, h.surface, m);
        io::write_json(dir / (stem + "_joint.json"), io::to_json(h.joint, stem + "_joint", meta));
        io::write_json(dir / (stem + "_row_marginal.json"),
                       io::to_json(h.row_marginal, stem + "_row_marginal", meta));
        io::write_json(dir / (stem + "_col_marginal.json"),
                       io::to_json(h.col_marginal, stem + "_col_marginal", meta));
        m.outputs[stem + "_counts"] = {stem + "_joint.json", stem + "_row_marginal.json",
                                       stem + "_col_marginal.json"};
        return h.surface;
    };

    const auto rr = emit(accumulate_ring_ring_hours(txs, shards), "ring_ring");
    emit(accumulate_ring_tx_hours(txs, shards), "ring_tx");
    if (a.background_seed) {
        auto bg = accumulate_ring_ring_hours_background(txs, *a.background_seed, shards);
        bg.surface.meta = window_meta(txs, hours_binning, a.background_seed);
        write_surface(dir, "ring_ring_background", bg.surface, m);
        auto r = ratio(rr, bg.surface);
        r.meta = bg.surface.meta;
        write_surface(dir, "ring_ring_ratio", r, m);
    }
    m.write(dir / "manifest.json");
    return 0;
}

// ---- score --------------------------------------------------------------

struct ScoreArgs {
    std::string chain;
    std::vector<std::string> surfaces;
    bool clamp = true;
    std::string prior = "uniform";
    std::string out;
};

int do_score(const ScoreArgs& a) {
    Manifest m;
    m.subcommand = "score";
    m.inputs = {{"chain", a.chain}, {"surfaces", a.surfaces}};
    m.config = {{"clamp", a.clamp}, {"prior", a.prior}};

    std::vector<scoring::SurfaceLookup> lookups;
    for (const auto& p : a.surfaces)
        lookups.emplace_back(io::load_surface(p));

    scoring::ScoreOptions opts;
    opts.clamp = a.clamp;
    if (a.prior == "gamma")
        opts.prior = scoring::PriorMode::gamma_likelihood;
    else if (a.prior != "uniform")
        throw DomainError("unknown prior mode '" + a.prior + "'");

    ingest::JsonlReader reader(a.chain);
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IOError("cannot write " + a.out);
    std::uint64_t scored_txs = 0, rings = 0, clamped = 0;
    while (auto tx = reader.next_resolved()) {
        if (tx->inputs.empty())
            continue;
        const auto scores = scoring::score_transaction(*tx, lookups, opts);
        ojson j;
        j["tx"] = tx->tx_id;
        ojson rj = ojson::array();
        for (const auto& s : scores) {
            ojson o;
            o["prior"] = s.prior;
            o["posterior"] = s.posterior;
            o["clamped"] = s.clamped;
            rj.push_back(std::move(o));
            ++rings;
            clamped += s.clamped ? 1 : 0;
        }
        j["rings"] = std::move(rj);
        out << j.dump() << '\n';
        ++scored_txs;
    }
    if (!out.flush())
        throw IOError("write failed for " + a.out);
    m.outputs = {{"scores", a.out}, {"transactions", scored_txs}, {"rings", rings}, {"clamped_rings", clamped}};
    m.write(a.out + ".manifest.json");
    return 0;
}

// ---- simulate -----------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> blocks;
    std::string out;
    std::string truth;
    std::string raw_out;
};

int do_simulate(const SimulateArgs& a) {
    Manifest m;
    m.subcommand = "simulate";
    auto cfg = sim::load_config(a.config);
    if (a.seed)
        cfg.seed = *a.seed;
    if (a.blocks)
        cfg.total_blocks = *a.blocks;
    m.seed = cfg.seed;
    m.inputs["config"] = a.config;
    m.config = ojson::parse(sim::to_json(cfg).dump());

    const auto result = sim::simulate_chain(cfg);
    ingest::write_resolved_file(a.out, result.txs);
    sim::write_truth(a.truth, result.truth);
    m.outputs = {{"chain", a.out}, {"truth", a.truth}};
    if (!a.raw_out.empty()) {
        ingest::write_raw_file(a.raw_out, result.raw, 0);
        m.outputs["raw"] = a.raw_out;
    }
    const auto& st = result.stats;
    const ojson stats = {{"spends", st.spends},
                         {"coinbase", st.coinbase},
                         {"rings", st.rings},
                         {"multi_input", st.multi_input},
                         {"starved", st.starved},
                         {"ring_starved", st.ring_starved},
                         {"decoy_resamples", st.decoy_resamples},
                         {"decoy_fallbacks", st.decoy_fallbacks},
                         {"clustered_spends", st.clustered_spends}};
    m.outputs["stats"] = stats;
    if (st.starved > 0)
        std::cerr << "StarvationWarning: " << st.starved << " spends skipped for lack of outputs\n";
    std::cerr << stats.dump() << '\n';
    m.write(a.out + ".manifest.json");
    return 0;
}

// ---- evaluate -----------------------------------------------------------

std::vector<sim::ScoredRing> read_scores(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IOError("cannot open " + path.string());
    std::vector<sim::ScoredRing> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = json::parse(line);
            const auto tx = j.at("tx").get<std::string>();
            const auto& rings = j.at("rings");
            for (std::size_t r = 0; r < rings.size(); ++r)
                out.push_back({tx, r, rings[r].at("posterior").get<std::vector<double>>()});
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return out;
}

int do_evaluate(const std::string& scores, const std::string& truth, const std::string& out) {
    const auto metrics = sim::evaluate_scorer(read_scores(scores), sim::read_truth(truth));
    const auto text = metrics.to_json().dump(2);
    std::cout << text << '\n';
    if (!out.empty()) {
        std::ofstream f(out, std::ios::binary | std::ios::trunc);
        f << text << '\n';
        if (!f)
            throw IOError("cannot write " + out);
    }
    return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Ring-member correlation toolkit for RingCT transactions", "ringcorr"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    IngestArgs ingest_args;
    auto* ingest = app.add_subcommand("ingest", "Fetch raw records from a daemon, or resolve a raw export");
    ingest->add_option("--rpc-url", ingest_args.rpc_url, "Daemon base URL (env RINGCORR_RPC_URL)");
    ingest->add_option("--from-height", ingest_args.from_height, "First block height");
    ingest->add_option("--to-height", ingest_args.to_height, "Last block height (inclusive)");
    ingest->add_option("--out", ingest_args.out, "Output JSONL")->required();
    ingest->add_option("--checkpoint", ingest_args.checkpoint, "Checkpoint file (default <out>.checkpoint)");
    ingest->add_option("--checkpoint-every", ingest_args.checkpoint_every, "Blocks between checkpoints")
        ->check(CLI::PositiveNumber);
    ingest->add_option("--raw", ingest_args.raw, "Resolve this raw export instead of fetching")
        ->check(CLI::ExistingFile);
    ingest->add_option("--start-index", ingest_args.start_index, "Global index of the first output in --raw");
    ingest->add_option("--quarantine", ingest_args.quarantine, "Write quarantined raw records here");

    auto* analyze = app.add_subcommand("analyze", "Correlation analyses");
    analyze->require_subcommand(1);

    PairsArgs pairs_args;
    auto* pairs = analyze->add_subcommand("pairs", "Age correlations between rings of a transaction");
    pairs->add_option("--chain", pairs_args.chain, "Resolved JSONL")->required()->check(CLI::ExistingFile);
    pairs->add_option("--binning", pairs_args.binning, "linear | gamma-cdf")
        ->check(CLI::IsMember({"linear", "gamma-cdf"}));
    pairs->add_option("--bin-width-days", pairs_args.bin_width_days, "Linear bin width in days")
        ->check(CLI::PositiveNumber);
    pairs->add_option("--bins", pairs_args.bins, "Bin count (default 64 linear, 50 gamma-cdf)");
    pairs->add_option("--space", pairs_args.space, "age | log-age")->check(CLI::IsMember({"age", "log-age"}));
    pairs->add_option("--background-seed", pairs_args.background_seed, "Seed of the mixed-event pairing");
    pairs->add_option("--chunk-blocks", pairs_args.chunk_blocks, "Blocks per error-bar chunk")
        ->check(CLI::PositiveNumber);
    pairs->add_option("--marginals", pairs_args.marginals, "shared | per-axis")
        ->check(CLI::IsMember({"shared", "per-axis"}));
    pairs->add_option("--from-height", pairs_args.from_height, "Ignore transactions below this height");
    pairs->add_option("--to-height", pairs_args.to_height, "Ignore transactions above this height");
    pairs->add_option("--threads", pairs_args.threads, "Shard count cap (0 = hardware)");
    pairs->add_option("--out-dir", pairs_args.out_dir, "Output directory")->required();

    TodArgs tod_args;
    auto* tod = analyze->add_subcommand("tod", "Hour-of-day ring-ring and ring-tx correlations");
    tod->add_option("--chain", tod_args.chain, "Resolved JSONL")->required()->check(CLI::ExistingFile);
    tod->add_option("--background-seed", tod_args.background_seed,
                    "Also build a mixed-event ring-ring background with this seed");
    tod->add_option("--from-height", tod_args.from_height, "Ignore transactions below this height");
    tod->add_option("--to-height", tod_args.to_height, "Ignore transactions above this height");
    tod->add_option("--threads", tod_args.threads, "Shard count cap (0 = hardware)");
    tod->add_option("--out-dir", tod_args.out_dir, "Output directory")->required();

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Per-member real-input probabilities");
    score->add_option("--chain", score_args.chain, "Resolved JSONL")->required()->check(CLI::ExistingFile);
    score->add_option("--surface", score_args.surfaces, "Surface JSON; repeat to chain updates")
        ->required()
        ->check(CLI::ExistingFile);
    score->add_flag("--clamp,!--no-clamp", score_args.clamp, "Clamp negative probabilities (default on)");
    score->add_option("--prior", score_args.prior, "uniform | gamma")->check(CLI::IsMember({"uniform", "gamma"}));
    score->add_option("--out", score_args.out, "Score JSONL")->required();

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic chain with ground truth");
    simulate->add_option("--config", sim_args.config, "Simulator config JSON")->required()->check(CLI::ExistingFile);
    simulate->add_option("--seed", sim_args.seed, "Override the config seed");
    simulate->add_option("--blocks", sim_args.blocks, "Override total_blocks");
    simulate->add_option("--out", sim_args.out, "Resolved JSONL")->required();
    simulate->add_option("--truth", sim_args.truth, "Ground-truth JSONL")->required();
    simulate->add_option("--raw-out", sim_args.raw_out, "Also write a raw export");

    std::string eval_scores, eval_truth, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "Score accuracy against ground truth");
    evaluate->add_option("--scores", eval_scores, "Score JSONL")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--truth", eval_truth, "Ground-truth JSONL")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--out", eval_out, "Also write metrics JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*ingest)
            return do_ingest(ingest_args);
        if (*pairs)
            return do_pairs(pairs_args);
        if (*tod)
            return do_tod(tod_args);
        if (*score)
            return do_score(score_args);
        if (*simulate)
            return do_simulate(sim_args);
        if (*evaluate)
            return do_evaluate(eval_scores, eval_truth, eval_out);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace ringcorr::cli

// Command-line front end. Every subcommand resolves a config object
// (defaults < config file < environment < flags, env prefix IKIT_) and hands
// it to the shared library; no pipeline logic lives here.

#include <ikit.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using nlohmann::json;

namespace {

std::string trim(const std::string & s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    return s.substr(begin, s.find_last_not_of(" \t\r") - begin + 1);
}

json parse_scalar(const std::string & raw) {
    const std::string value = trim(raw);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        return value.substr(1, value.size() - 2);
    }
    if (value == "true") {
        return true;
    }
    if (value == "false") {
        return false;
    }
    try {
        return json::parse(value);  // numbers
    } catch (const json::exception &) {
        throw CLI::ValidationError("config", "bad value: " + value);
    }
}

// Flat key = value pairs with [section] tables, strings, numbers, booleans
// and one-line scalar arrays. Full TOML is out of scope; JSON configs cover
// anything this subset cannot express.
json parse_toml_subset(std::istream & in, const std::string & path) {
    json root = json::object();
    json * table = &root;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        bool in_string = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') {
                in_string = !in_string;
            } else if (line[i] == '#' && !in_string) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[' && line.back() == ']') {
            const std::string name = trim(line.substr(1, line.size() - 2));
            table = &root[name];
            *table = json::object();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw CLI::ValidationError("config", path + ":" + std::to_string(lineno) +
                                                     ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') {
                throw CLI::ValidationError("config", path + ":" + std::to_string(lineno) +
                                                         ": unterminated array");
            }
            json arr = json::array();
            std::string body = value.substr(1, value.size() - 2);
            std::stringstream parts(body);
            std::string part;
            while (std::getline(parts, part, ',')) {
                if (!trim(part).empty()) {
                    arr.push_back(parse_scalar(part));
                }
            }
            (*table)[key] = arr;
        } else {
            (*table)[key] = parse_scalar(value);
        }
    }
    return root;
}

json load_config_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw CLI::ValidationError("config", "cannot open " + path);
    }
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        try {
            return json::parse(in);
        } catch (const json::exception & e) {
            throw CLI::ValidationError("config", path + ": " + e.what());
        }
    }
    return parse_toml_subset(in, path);
}

// Builds one stage config with layered precedence. Keys use '.' for nesting
// ("index.vectors"); the matching environment variable is IKIT_INDEX_VECTORS.
class ConfigBuilder {
  public:
    ConfigBuilder(const json & file_config, std::string section)
        : section_(std::move(section)) {
        if (file_config.is_object()) {
            for (const auto & [key, value] : file_config.items()) {
                if (!value.is_object()) {
                    cfg_[json::json_pointer("/" + key)] = value;
                }
            }
            if (file_config.contains(section_) && file_config.at(section_).is_object()) {
                merge_object(file_config.at(section_), "");
            }
        }
    }

    // Declares a key: picks up IKIT_* from the environment, then the flag
    // value when the user passed the flag.
    template <typename T>
    void bind(const std::string & key, const CLI::Option * opt, const T & flag_value) {
        const char * env = std::getenv(env_name(key).c_str());
        if (env != nullptr) {
            set(key, env_to_json(env));
        }
        if (opt != nullptr && opt->count() > 0) {
            set(key, json(flag_value));
        }
    }

    void set(const std::string & key, json value) {
        std::string pointer = "/" + key;
        for (auto & c : pointer) {
            if (c == '.') {
                c = '/';
            }
        }
        cfg_[json::json_pointer(pointer)] = std::move(value);
    }

    bool has(const std::string & key) const {
        std::string pointer = "/" + key;
        for (auto & c : pointer) {
            if (c == '.') {
                c = '/';
            }
        }
        return cfg_.contains(json::json_pointer(pointer));
    }

    const json & result() const { return cfg_; }

  private:
    void merge_object(const json & obj, const std::string & prefix) {
        for (const auto & [key, value] : obj.items()) {
            if (value.is_object()) {
                merge_object(value, prefix + key + ".");
            } else {
                set(prefix + key, value);
            }
        }
    }

    static std::string env_name(const std::string & key) {
        std::string name = "IKIT_";
        for (char c : key) {
            if (c == '-' || c == '.') {
                name += '_';
            } else {
                name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            }
        }
        return name;
    }

    static json env_to_json(const std::string & value) {
        try {
            json parsed = json::parse(value);
            if (parsed.is_number() || parsed.is_boolean() || parsed.is_array()) {
                return parsed;
            }
        } catch (const json::exception &) {
        }
        return value;
    }

    std::string section_;
    json cfg_ = json::object();
};

int run_stage_or_die(const std::string & stage, const json & cfg, bool quiet) {
    char * result = nullptr;
    const ikit_status status = ikit_run_stage(stage.c_str(), cfg.dump().c_str(), &result);
    if (status != IKIT_OK) {
        std::cerr << "error: " << ikit_last_error() << "\n";
        return status == IKIT_EINVAL ? 1 : 2;
    }
    if (!quiet && result != nullptr) {
        std::cout << result << "\n";
    }
    ikit_string_free(result);
    return 0;
}

std::vector<uint64_t> parse_seed_list(const std::string & text) {
    std::vector<uint64_t> seeds;
    std::stringstream parts(text);
    std::string part;
    while (std::getline(parts, part, ',')) {
        if (!trim(part).empty()) {
            seeds.push_back(std::stoull(trim(part)));
        }
    }
    return seeds;
}

}  // namespace

int main(int argc, char ** argv) {
    CLI::App app{"interleaved vision-language data and eval toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "config file (.json or flat .toml)");
    int jobs = 1;
    auto * jobs_opt = app.add_option("--jobs", jobs, "worker threads where supported");

    struct Pending {
        std::string stage;
        std::function<json()> build;
        bool quiet = false;
    };
    std::vector<Pending> pending;
    json file_config = json::object();

    auto make_builder = [&](const std::string & section) {
        return ConfigBuilder(file_config, section);
    };

    // filter-mmc4
    auto * fm = app.add_subcommand("filter-mmc4", "filter interleaved docs by image similarity");
    struct {
        std::string in, out, stats_out;
        double threshold = 0.24, reject_prob = 0.5;
        uint64_t seed = 0, sample_size = 0;
    } fm_args;
    fm->add_option("in", fm_args.in, "input NDJSON docs")->required();
    fm->add_option("out", fm_args.out, "output NDJSON docs")->required();
    auto * fm_thr = fm->add_option("--threshold", fm_args.threshold, "similarity floor");
    auto * fm_rej = fm->add_option("--reject-single-prob", fm_args.reject_prob,
                                   "rejection probability for single-image docs");
    auto * fm_seed = fm->add_option("--seed", fm_args.seed, "rng seed");
    auto * fm_samp = fm->add_option("--sample-size", fm_args.sample_size, "stats sample size");
    auto * fm_stats = fm->add_option("--stats-out", fm_args.stats_out, "stats JSON path");
    fm->callback([&] {
        pending.push_back({"filter-mmc4", [&] {
            auto b = make_builder("filter-mmc4");
            b.set("in", fm_args.in);
            b.set("out", fm_args.out);
            b.bind("threshold", fm_thr, fm_args.threshold);
            b.bind("reject_single_prob", fm_rej, fm_args.reject_prob);
            b.bind("seed", fm_seed, fm_args.seed);
            b.bind("sample_size", fm_samp, fm_args.sample_size);
            b.bind("stats_out", fm_stats, fm_args.stats_out);
            return b.result();
        }});
    });

    // filter-pairs
    auto * fp = app.add_subcommand("filter-pairs", "filter image-text pairs");
    struct {
        std::string in, out, stats_out;
        double sim_min = 0.28;
        uint64_t max_tokens = 32;
    } fp_args;
    fp->add_option("in", fp_args.in, "input NDJSON pairs")->required();
    fp->add_option("out", fp_args.out, "output NDJSON pairs")->required();
    auto * fp_sim = fp->add_option("--sim-min", fp_args.sim_min, "similarity floor");
    auto * fp_max = fp->add_option("--max-tokens", fp_args.max_tokens, "caption token cap");
    auto * fp_stats = fp->add_option("--stats-out", fp_args.stats_out, "stats JSON path");
    fp->callback([&] {
        pending.push_back({"filter-pairs", [&] {
            auto b = make_builder("filter-pairs");
            b.set("in", fp_args.in);
            b.set("out", fp_args.out);
            b.bind("sim_min", fp_sim, fp_args.sim_min);
            b.bind("max_tokens", fp_max, fp_args.max_tokens);
            b.bind("stats_out", fp_stats, fp_args.stats_out);
            return b.result();
        }});
    });

    // synth
    auto * sy = app.add_subcommand("synth", "build docs from templated responses via retrieval");
    struct {
        std::string pattern, responses, out;
        std::string image_vectors, image_ids, text_vectors, text_ids;
        uint64_t k = 10;
    } sy_args;
    sy->add_option("--pattern", sy_args.pattern, "slot pattern, e.g. \"(image A, sentence 1)\"")
        ->required();
    sy->add_option("--responses", sy_args.responses, "NDJSON of {id, response}")->required();
    sy->add_option("--out", sy_args.out, "output NDJSON docs")->required();
    sy->add_option("--image-vectors", sy_args.image_vectors, "image index vectors")->required();
    sy->add_option("--image-ids", sy_args.image_ids, "image index ids")->required();
    sy->add_option("--text-vectors", sy_args.text_vectors, "text index vectors")->required();
    sy->add_option("--text-ids", sy_args.text_ids, "text index ids")->required();
    auto * sy_k = sy->add_option("--k", sy_args.k, "candidates per image slot");
    sy->callback([&] {
        pending.push_back({"synth", [&] {
            auto b = make_builder("synth");
            b.set("pattern", sy_args.pattern);
            b.set("responses", sy_args.responses);
            b.set("out", sy_args.out);
            b.set("image_index.vectors", sy_args.image_vectors);
            b.set("image_index.ids", sy_args.image_ids);
            b.set("text_index.vectors", sy_args.text_vectors);
            b.set("text_index.ids", sy_args.text_ids);
            b.bind("k", sy_k, sy_args.k);
            return b.result();
        }});
    });

    // seq
    auto * sq = app.add_subcommand("seq", "convert curated docs to marked token streams");
    struct {
        std::string in, out;
        uint64_t window = 0;
    } sq_args;
    sq->add_option("in", sq_args.in, "input NDJSON docs")->required();
    sq->add_option("out", sq_args.out, "output NDJSON streams")->required();
    auto * sq_win = sq->add_option("--window", sq_args.window, "pack into fixed windows");
    sq->callback([&] {
        pending.push_back({"seq", [&] {
            auto b = make_builder("seq");
            b.set("in", sq_args.in);
            b.set("out", sq_args.out);
            b.bind("window", sq_win, sq_args.window);
            return b.result();
        }});
    });

    // shard pack|stats|sample
    auto * sh = app.add_subcommand("shard", "tar shard operations");
    sh->require_subcommand(1);
    auto * shp = sh->add_subcommand("pack", "pack token streams into tar shards");
    struct {
        std::string in, prefix, manifest_out;
        uint64_t max_per_shard = 1000;
    } shp_args;
    shp->add_option("in", shp_args.in, "input NDJSON streams")->required();
    shp->add_option("--prefix", shp_args.prefix, "shard path prefix")->required();
    auto * shp_max = shp->add_option("--max-per-shard", shp_args.max_per_shard,
                                     "samples per shard");
    auto * shp_man = shp->add_option("--manifest-out", shp_args.manifest_out, "manifest path");
    shp->callback([&] {
        pending.push_back({"shard-pack", [&] {
            auto b = make_builder("shard-pack");
            b.set("in", shp_args.in);
            b.set("prefix", shp_args.prefix);
            b.bind("max_per_shard", shp_max, shp_args.max_per_shard);
            if (!b.has("max_per_shard")) {
                b.set("max_per_shard", shp_args.max_per_shard);
            }
            b.bind("manifest_out", shp_man, shp_args.manifest_out);
            return b.result();
        }});
    });
    auto * shs = sh->add_subcommand("stats", "per-shard sample counts");
    std::string shs_manifest;
    shs->add_option("--manifest", shs_manifest, "manifest path")->required();
    shs->callback([&] {
        pending.push_back({"shard-stats", [&] {
            auto b = make_builder("shard-stats");
            b.set("manifest", shs_manifest);
            return b.result();
        }});
    });
    auto * shd = sh->add_subcommand("sample", "draw shards with replacement");
    struct {
        std::string manifest, out;
        uint64_t draws = 0, seed = 0;
    } shd_args;
    shd->add_option("--manifest", shd_args.manifest, "manifest path")->required();
    shd->add_option("--draws", shd_args.draws, "number of draws")->required();
    auto * shd_seed = shd->add_option("--seed", shd_args.seed, "rng seed");
    auto * shd_out = shd->add_option("--out", shd_args.out, "output JSON path");
    shd->callback([&] {
        pending.push_back({"shard-sample", [&] {
            auto b = make_builder("shard-sample");
            b.set("manifest", shd_args.manifest);
            b.set("draws", shd_args.draws);
            b.bind("seed", shd_seed, shd_args.seed);
            b.bind("out", shd_out, shd_args.out);
            return b.result();
        }});
    });

    // plan
    auto * pl = app.add_subcommand("plan", "derive the training schedule");
    struct {
        uint64_t budget_interleaved = 0, budget_pairs = 0, batch = 0, multiplier = 2,
                 warmup = 5000, first_steps = 10;
        double chatgpt_fraction = 0.0;
        std::string out;
    } pl_args;
    pl->add_option("--budget-interleaved", pl_args.budget_interleaved, "interleaved samples")
        ->required();
    pl->add_option("--budget-pairs", pl_args.budget_pairs, "pair samples")->required();
    pl->add_option("--batch", pl_args.batch, "interleaved batch size")->required();
    auto * pl_mult = pl->add_option("--multiplier", pl_args.multiplier, "pair batch multiplier");
    auto * pl_warm = pl->add_option("--warmup", pl_args.warmup, "warmup steps");
    auto * pl_frac = pl->add_option("--chatgpt-fraction", pl_args.chatgpt_fraction,
                                    "synthetic fraction of the interleaved stream");
    auto * pl_first = pl->add_option("--first-steps", pl_args.first_steps,
                                     "directives to include in the output");
    auto * pl_out = pl->add_option("--out", pl_args.out, "output JSON path");
    pl->callback([&] {
        pending.push_back({"plan", [&] {
            auto b = make_builder("plan");
            b.set("budget_interleaved", pl_args.budget_interleaved);
            b.set("budget_pairs", pl_args.budget_pairs);
            b.set("mix.batch_interleaved", pl_args.batch);
            b.bind("mix.laion_batch_multiplier", pl_mult, pl_args.multiplier);
            b.bind("mix.warmup_steps", pl_warm, pl_args.warmup);
            b.bind("mix.chatgpt_fraction", pl_frac, pl_args.chatgpt_fraction);
            b.bind("first_steps", pl_first, pl_args.first_steps);
            b.bind("out", pl_out, pl_args.out);
            return b.result();
        }});
    });

    // rices
    auto * rc = app.add_subcommand("rices", "batch top-k retrieval");
    struct {
        std::string vectors, ids, queries, out;
        uint64_t k = 32;
    } rc_args;
    rc->add_option("--vectors", rc_args.vectors, "index vectors")->required();
    rc->add_option("--ids", rc_args.ids, "index ids")->required();
    rc->add_option("--queries", rc_args.queries, "NDJSON of {id, vector}")->required();
    rc->add_option("--out", rc_args.out, "output NDJSON")->required();
    auto * rc_k = rc->add_option("--k", rc_args.k, "neighbors per query");
    rc->callback([&] {
        pending.push_back({"rices", [&] {
            auto b = make_builder("rices");
            b.set("index.vectors", rc_args.vectors);
            b.set("index.ids", rc_args.ids);
            b.set("queries", rc_args.queries);
            b.set("out", rc_args.out);
            b.bind("k", rc_k, rc_args.k);
            return b.result();
        }});
    });

    // eval
    auto * ev = app.add_subcommand("eval", "run a few-shot evaluation");
    struct {
        std::string task, selection = "random", seeds = "1,2,3";
        std::string pool, queries, endpoint, stub_spec, vectors, ids, contractions, out;
        int shots = 0, n_permutations = 6;
    } ev_args;
    ev->add_option("--task", ev_args.task, "caption | vqa | classify")->required();
    ev->add_option("--shots", ev_args.shots, "0, 4, 8, 16 or 32")->required();
    auto * ev_sel = ev->add_option("--selection", ev_args.selection, "random | rices");
    auto * ev_seeds = ev->add_option("--seeds", ev_args.seeds, "comma-separated seeds");
    auto * ev_perm = ev->add_option("--n-permutations", ev_args.n_permutations,
                                    "ensembled demo orders for rank classification");
    ev->add_option("--pool", ev_args.pool, "demonstration pool NDJSON")->required();
    ev->add_option("--queries", ev_args.queries, "eval split NDJSON")->required();
    auto * ev_ep = ev->add_option("--endpoint", ev_args.endpoint, "model server URL");
    auto * ev_stub = ev->add_option("--stub-spec", ev_args.stub_spec, "in-process stub spec");
    auto * ev_vec = ev->add_option("--vectors", ev_args.vectors, "image index vectors");
    auto * ev_ids = ev->add_option("--ids", ev_args.ids, "image index ids");
    auto * ev_con = ev->add_option("--contractions", ev_args.contractions,
                                   "contraction map for answer normalization");
    auto * ev_out = ev->add_option("--out", ev_args.out, "report JSON path");
    ev->callback([&] {
        pending.push_back({"eval", [&] {
            auto b = make_builder("eval");
            b.set("task", ev_args.task);
            b.set("shots", ev_args.shots);
            b.set("pool", ev_args.pool);
            b.set("queries", ev_args.queries);
            b.bind("selection", ev_sel, ev_args.selection);
            b.bind("n_permutations", ev_perm, ev_args.n_permutations);
            b.bind("endpoint", ev_ep, ev_args.endpoint);
            b.bind("stub_spec", ev_stub, ev_args.stub_spec);
            b.bind("index.vectors", ev_vec, ev_args.vectors);
            b.bind("index.ids", ev_ids, ev_args.ids);
            b.bind("contractions", ev_con, ev_args.contractions);
            b.bind("out", ev_out, ev_args.out);
            if (ev_seeds->count() > 0 || !b.has("seeds")) {
                b.set("seeds", parse_seed_list(ev_args.seeds));
            }
            if (jobs_opt->count() > 0) {
                b.set("jobs", jobs);
            }
            return b.result();
        }});
    });

    // report
    auto * rp = app.add_subcommand("report", "relative-performance reports");
    rp->require_subcommand(1);
    auto * rpr = rp->add_subcommand("relative", "ours vs baseline ratios");
    struct {
        std::string ours, baseline, out, csv_out, svg_out;
        std::vector<std::string> pairs;
    } rpr_args;
    rpr->add_option("--ours", rpr_args.ours, "score table JSON")->required();
    rpr->add_option("--baseline", rpr_args.baseline, "baseline score table JSON")->required();
    rpr->add_option("--pair", rpr_args.pairs, "model=baseline_model, repeatable")->required();
    auto * rpr_out = rpr->add_option("--out", rpr_args.out, "report JSON path");
    auto * rpr_csv = rpr->add_option("--csv-out", rpr_args.csv_out, "CSV path");
    auto * rpr_svg = rpr->add_option("--svg-out", rpr_args.svg_out, "SVG path");
    rpr->callback([&] {
        pending.push_back({"report", [&] {
            auto b = make_builder("report");
            b.set("kind", "relative");
            b.set("ours", rpr_args.ours);
            b.set("baseline", rpr_args.baseline);
            json pairing = json::object();
            for (const auto & pair : rpr_args.pairs) {
                const auto eq = pair.find('=');
                if (eq == std::string::npos) {
                    throw CLI::ValidationError("--pair", "expected model=baseline_model");
                }
                pairing[pair.substr(0, eq)] = pair.substr(eq + 1);
            }
            b.set("pairing", pairing);
            b.bind("out", rpr_out, rpr_args.out);
            b.bind("csv_out", rpr_csv, rpr_args.csv_out);
            b.bind("svg_out", rpr_svg, rpr_args.svg_out);
            return b.result();
        }});
    });
    auto * rps = rp->add_subcommand("sota", "fractions of fine-tuned state of the art");
    struct {
        std::string ours, sota, model, out;
        int shots = 32;
    } rps_args;
    rps->add_option("--ours", rps_args.ours, "score table JSON")->required();
    rps->add_option("--sota", rps_args.sota, "per-benchmark SoTA JSON")->required();
    rps->add_option("--model", rps_args.model, "model name in the score table")->required();
    auto * rps_shots = rps->add_option("--shots", rps_args.shots, "shot count to report");
    auto * rps_out = rps->add_option("--out", rps_args.out, "report JSON path");
    rps->callback([&] {
        pending.push_back({"report", [&] {
            auto b = make_builder("report");
            b.set("kind", "sota");
            b.set("ours", rps_args.ours);
            b.set("sota", rps_args.sota);
            b.set("model", rps_args.model);
            b.bind("shots", rps_shots, rps_args.shots);
            if (!b.has("shots")) {
                b.set("shots", rps_args.shots);
            }
            b.bind("out", rps_out, rps_args.out);
            return b.result();
        }});
    });

    // stub-serve
    auto * ss = app.add_subcommand("stub-serve", "serve a stub model over HTTP");
    struct {
        std::string spec;
        int port = 0;
    } ss_args;
    ss->add_option("--spec", ss_args.spec, "stub spec JSON file")->required();
    ss->add_option("--port", ss_args.port, "port, 0 picks a free one");
    bool serve = false;
    ss->callback([&] { serve = true; });

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) {
            file_config = load_config_file(config_path);
        }
    } catch (const CLI::ParseError & e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    if (serve) {
        ikit_stub_server * server = nullptr;
        int port = 0;
        if (ikit_stub_server_start(ss_args.spec.c_str(), ss_args.port, &server, &port) !=
            IKIT_OK) {
            std::cerr << "error: " << ikit_last_error() << "\n";
            return 2;
        }
        std::cout << "{\"port\": " << port << "}" << std::endl;
        for (;;) {
            std::this_thread::sleep_for(std::chrono::seconds(1));
        }
    }

    for (const auto & task : pending) {
        json cfg;
        try {
            cfg = task.build();
        } catch (const std::exception & e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        const int code = run_stage_or_die(task.stage, cfg, task.quiet);
        if (code != 0) {
            return code;
        }
    }
    return 0;
}

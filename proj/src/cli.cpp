#include "oca/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "oca/error.hpp"
#include "oca/eval.hpp"
#include "oca/mixture.hpp"
#include "oca/scoring.hpp"
#include "oca/synth.hpp"
#include "parallel.hpp"

namespace oca {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::size_t resolve_threads(std::size_t flag) {
    if (const char* env = std::getenv("OCA_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        throw Error(ErrorCode::BadConfig, std::string("OCA_THREADS must be a positive integer, got '") + env + "'");
    }
    if (flag > 0) return flag;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return in;
}

nlohmann::json read_json(const fs::path& path, ErrorCode code) {
    std::ifstream in(path);
    if (!in) throw Error(code, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(code, path.string() + ": " + e.what());
    }
}

// Written next to each output; the only artifact that varies between identical runs.
void write_manifest(const fs::path& path, const std::string& subcommand, nlohmann::ordered_json config,
                    nlohmann::ordered_json inputs, nlohmann::ordered_json outputs, Clock::time_point start) {
    nlohmann::ordered_json m;
    m["subcommand"] = subcommand;
    m["config"] = std::move(config);
    m["inputs"] = std::move(inputs);
    m["outputs"] = std::move(outputs);
    m["tool_version"] = kToolVersion;
    m["format_version"] = kOcebVersion;
    m["wall_time_s"] = std::chrono::duration<double>(Clock::now() - start).count();
    open_out(path) << m.dump(2) << '\n';
}

fs::path manifest_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::vector<ScoreConfig> parse_methods(const std::string& list, double temperature) {
    const auto names = split_commas(list);
    if (names.empty()) throw Error(ErrorCode::UnknownMethod, "--methods is empty");
    std::vector<ScoreConfig> cfgs;
    for (const auto& n : names) {
        ScoreConfig cfg{parse_method(n), temperature};
        check(cfg);
        cfgs.push_back(cfg);
    }
    return cfgs;
}

void require_valid(const LabelSet& labels, bool need_out) {
    std::string msg;
    for (const auto& v : validate(labels)) {
        if (v.kind == Violation::Kind::EmptyOut && !need_out) continue;
        msg += (msg.empty() ? "" : "; ") + std::string(to_string(v.kind)) + " " + v.detail;
    }
    if (!msg.empty()) throw Error(ErrorCode::BadLabelConfig, "label set '" + labels.name + "': " + msg);
}

nlohmann::ordered_json method_names(std::span<const ScoreConfig> cfgs) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : cfgs) arr.push_back(std::string(to_string(c.method)));
    return arr;
}

struct ScoreArgs {
    std::string images, texts, labels, methods = "neg_max_prob,sum_out_prob,max_out_prob,neg_max_in_prob,max_logit_diff",
                                        out;
    double temperature = 1.0;
    std::size_t threads = 0;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
    const auto start = Clock::now();
    const auto cfgs = parse_methods(a.methods, a.temperature);
    const auto labels = load_label_config(a.labels);
    bool need_out = false;
    for (const auto& c : cfgs) need_out = need_out || uses_out_set(c.method);
    require_valid(labels, need_out);

    const auto images = load_store(a.images);
    const auto texts = load_store(a.texts);
    const auto label_emb = embed_labels(labels, store_lookup(texts));
    const auto records = score_store(images, label_emb, cfgs, resolve_threads(a.threads));

    auto file = open_out(a.out);
    write_scores(file, records);
    if (!file) throw Error(ErrorCode::Io, "short write to " + a.out);

    nlohmann::ordered_json config;
    config["methods"] = method_names(cfgs);
    config["temperature"] = a.temperature;
    config["labelset"] = labels.name;
    config["prompt_ensemble"] = "mean of prompt embeddings, renormalized";
    config["renormalized_inputs"] = images.renormalized() || texts.renormalized();
    write_manifest(manifest_for(a.out), "score", config,
                   {{"images", a.images}, {"texts", a.texts}, {"labels", a.labels}}, {{"scores", a.out}}, start);
    out << "scored " << records.size() << " records -> " << a.out << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string scores, tasks, out;
    bool markdown = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const auto start = Clock::now();
    const auto tasks = parse_tasks(read_json(a.tasks, ErrorCode::BadTask));
    auto in = open_in(a.scores);
    const auto records = read_scores(in);
    auto report = run_tasks(records, tasks);

    // Echo the scoring configuration when the score file carries a manifest.
    const auto score_manifest = manifest_for(a.scores);
    if (fs::exists(score_manifest)) {
        const auto m = read_json(score_manifest, ErrorCode::BadSidecar);
        if (m.contains("config")) {
            for (const char* key : {"methods", "temperature", "labelset"}) {
                if (m["config"].contains(key)) report.config[key] = m["config"][key];
            }
        }
    }
    auto file = open_out(a.out);
    file << to_json(report).dump(2) << '\n';
    write_manifest(manifest_for(a.out), "eval", report.config, {{"scores", a.scores}, {"tasks", a.tasks}},
                   {{"report", a.out}}, start);
    if (a.markdown) out << to_markdown(report);
    else out << "evaluated " << report.tasks.size() << " tasks -> " << a.out << '\n';
    return kExitOk;
}

struct MixtureArgs {
    std::string boxes, labels, method = "max_logit_diff", out, truth, report;
    double temperature = 1.0;
    std::size_t threads = 0;
};

int cmd_mixture(const MixtureArgs& a, std::ostream& out) {
    const auto start = Clock::now();
    const auto cfgs = parse_methods(a.method, a.temperature);
    const auto labels = load_label_config(a.labels);
    require_valid(labels, true);
    auto in = open_in(a.boxes);
    const auto sets = read_box_scores(in);
    const auto threads = resolve_threads(a.threads);

    std::vector<std::vector<MixtureResult>> per_method;
    for (const auto& cfg : cfgs) {
        std::vector<MixtureResult> results(sets.size());
        detail::parallel_for(sets.size(), threads,
                             [&](std::size_t i) { results[i] = score_mixture(sets[i], labels, cfg); });
        per_method.push_back(std::move(results));
    }

    auto file = open_out(a.out);
    for (std::size_t k = 0; k < cfgs.size(); ++k) write_mixture_results(file, per_method[k], cfgs[k]);

    nlohmann::ordered_json config;
    config["methods"] = method_names(cfgs);
    config["temperature"] = a.temperature;
    config["labelset"] = labels.name;
    nlohmann::ordered_json outputs = {{"mixture", a.out}};

    if (!a.truth.empty()) {
        if (a.report.empty()) throw Error(ErrorCode::BadConfig, "--truth requires --report");
        auto tin = open_in(a.truth);
        const auto truth = read_truth(tin);
        EvalReport merged;
        for (std::size_t k = 0; k < cfgs.size(); ++k) {
            auto rep = mixture_eval(per_method[k], truth, cfgs[k].method);
            merged.split_counts = rep.split_counts;
            for (auto& t : rep.tasks) merged.tasks.push_back(std::move(t));
        }
        merged.config = config;
        open_out(a.report) << to_json(merged).dump(2) << '\n';
        outputs["report"] = a.report;
    }
    write_manifest(manifest_for(a.out), "mixture", config, {{"boxes", a.boxes}, {"labels", a.labels}}, outputs,
                   start);
    out << "scored " << sets.size() << " images -> " << a.out << '\n';
    return kExitOk;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
    const auto start = Clock::now();
    const auto cfg = synth::load_config(config_path);
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

    nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
    if (!cfg.classes.empty()) {
        const auto stores = synth::generate(cfg);
        save_store(stores.images, dir / "images.oceb");
        save_store(stores.texts, dir / "texts.oceb");
        open_out(dir / "labels.json") << to_json(synth::label_set(cfg)).dump(2) << '\n';
        outputs["images"] = (dir / "images.oceb").string();
        outputs["texts"] = (dir / "texts.oceb").string();
        outputs["labels"] = (dir / "labels.json").string();
    }
    if (cfg.boxes) {
        const auto boxes = synth::generate_boxes(*cfg.boxes);
        auto bf = open_out(dir / "boxes.jsonl");
        write_box_scores(bf, boxes.sets);
        auto tf = open_out(dir / "truth.jsonl");
        write_truth(tf, boxes.truth);
        open_out(dir / "box_labels.json") << to_json(synth::label_set(*cfg.boxes)).dump(2) << '\n';
        outputs["boxes"] = (dir / "boxes.jsonl").string();
        outputs["truth"] = (dir / "truth.jsonl").string();
        outputs["box_labels"] = (dir / "box_labels.json").string();
    }
    nlohmann::ordered_json config;
    config["seed"] = cfg.seed;
    config["dim"] = cfg.dim;
    config["prng"] = "xoshiro256** seeded by splitmix64";
    write_manifest(dir / "manifest.json", "synth", config, {{"config", config_path}}, outputs, start);
    out << "wrote synthetic corpus to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_validate(const std::string& labels_path, std::ostream& out) {
    const auto labels = load_label_config(labels_path);
    const auto violations = validate(labels);
    if (violations.empty()) {
        out << "ok: " << labels.name << " (" << labels.in_classes.size() << " in, " << labels.out_classes.size()
            << " out)\n";
        return kExitOk;
    }
    for (const auto& v : violations) out << to_string(v.kind) << ": " << v.detail << '\n';
    return kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"One-class OOD scoring and evaluation over text-image embeddings", "oca"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("oca ") + kToolVersion + " (OCEB v" + std::to_string(kOcebVersion) + ")");

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "Score image embeddings against a label set");
    score->add_option("--images", score_args.images, "Image OCEB store")->required();
    score->add_option("--texts", score_args.texts, "Text OCEB store keyed by prompt string")->required();
    score->add_option("--labels", score_args.labels, "Label config JSON")->required();
    score->add_option("--methods", score_args.methods, "Comma-separated scoring methods");
    score->add_option("--temperature", score_args.temperature, "Logit temperature");
    score->add_option("--out", score_args.out, "Scores NDJSON")->required();
    score->add_option("--threads", score_args.threads, "Worker threads (default: all cores)");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "AUROC per evaluation task");
    eval->add_option("--scores", eval_args.scores, "Scores NDJSON")->required();
    eval->add_option("--tasks", eval_args.tasks, "Tasks JSON")->required();
    eval->add_option("--out", eval_args.out, "Report JSON")->required();
    eval->add_flag("--markdown", eval_args.markdown, "Print a method x task AUROC grid");

    MixtureArgs mix_args;
    auto* mixture = app.add_subcommand("mixture", "Per-box scores and mixture score g");
    mixture->add_option("--boxes", mix_args.boxes, "Box-score NDJSON")->required();
    mixture->add_option("--labels", mix_args.labels, "Label config JSON")->required();
    mixture->add_option("--method", mix_args.method, "Scoring method(s), comma-separated");
    mixture->add_option("--temperature", mix_args.temperature, "Logit temperature");
    mixture->add_option("--out", mix_args.out, "Mixture results NDJSON")->required();
    mixture->add_option("--truth", mix_args.truth, "Ground-truth NDJSON (pure_in/pure_out/mixed)");
    mixture->add_option("--report", mix_args.report, "Report JSON (requires --truth)");
    mixture->add_option("--threads", mix_args.threads, "Worker threads (default: all cores)");

    std::string synth_config, synth_dir;
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
    synth->add_option("--config", synth_config, "Synth config JSON")->required();
    synth->add_option("--out-dir", synth_dir, "Output directory")->required();

    std::string validate_labels;
    auto* validate_cmd = app.add_subcommand("validate", "Check a label config");
    validate_cmd->add_option("--labels", validate_labels, "Label config JSON")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (score->parsed()) return cmd_score(score_args, out);
        if (eval->parsed()) return cmd_eval(eval_args, out);
        if (mixture->parsed()) return cmd_mixture(mix_args, out);
        if (synth->parsed()) return cmd_synth(synth_config, synth_dir, out);
        if (validate_cmd->parsed()) return cmd_validate(validate_labels, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_config_error(e.code()) ? kExitConfig : kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitConfig;
}

}  // namespace oca

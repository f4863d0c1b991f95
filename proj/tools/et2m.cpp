// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// et2m command line tool. Exit codes: 0 success, 1 invalid input or
// configuration, 2 runtime failure.

#include "et2m/config.hpp"
#include "et2m/errors.hpp"
#include "et2m/llm.hpp"
#include "et2m/pipeline.hpp"
#include "et2m/segmentation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

using namespace et2m;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kInvalid = 1, kRuntime = 2;

struct RunOptions {
    std::string config;
    bool toy = false;
    std::vector<std::string> overrides;
    std::string out = "runs/et2m";
    int workers = 0;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "JSON config file");
        app->add_flag("--toy", toy, "start from the small toy settings");
        app->add_option("--set", overrides, "override section.key=value (repeatable)");
        app->add_option("--out", out, "run directory");
        app->add_option("--workers", workers, "worker threads (overrides the config)");
    }

    RunConfig build() const {
        const RunConfig base = toy ? RunConfig::toy() : RunConfig{};
        RunConfig c = config.empty() ? base : RunConfig::load(config, base);
        for (const auto& o : overrides) c.apply_override(o);
        if (workers > 0) c.workers = workers;
        c.validate();
        return c;
    }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    out << text;
    if (!out) throw IoError("cannot write " + p.string());
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---- decompose ---------------------------------------------------------------

struct DecomposeOptions {
    std::string text, file, strategy = "event_aware", backend = "rule", cache, out;
};

int cmd_decompose(const DecomposeOptions& o) {
    if (o.text.empty() == o.file.empty()) throw ConfigError("decompose needs exactly one of --text or --file");
    const Strategy strategy = parse_strategy(o.strategy);
    std::vector<std::string> lines;
    if (!o.text.empty()) {
        lines.push_back(o.text);
    } else {
        std::istringstream in(read_file(o.file));
        for (std::string l; std::getline(in, l);) {
            if (!l.empty()) lines.push_back(l);
        }
    }
    std::unique_ptr<LlmClient> llm;
    std::unique_ptr<ResponseCache> cache;
    if (o.backend == "llm") {
        auto ep = LlmEndpoint::from_env();
        if (!ep) throw ConfigError("--backend llm needs ET2M_LLM_ENDPOINT");
        llm = std::make_unique<HttpLlmClient>(*ep);
        if (!o.cache.empty()) cache = std::make_unique<ResponseCache>(o.cache);
    } else if (o.backend != "rule") {
        throw ConfigError("--backend must be rule or llm");
    }
    std::vector<Decomposition> all;
    for (const auto& line : lines) {
        // Lines with '#' separators are caption records; anything else is plain text.
        const bool record = line.find('#') != std::string::npos;
        Decomposition d;
        if (llm) {
            d = decompose_with_fallback(record ? line : line + "##0.0#0.0", strategy, *llm, cache.get());
        } else {
            d = record ? decompose_rule(parse_caption_line(line)) : decompose_rule(line);
        }
        std::cout << d.prompt << "\n";
        for (const auto& e : d.events) std::cout << "  " << e.index << ". " << e.text << "  [" << to_string(e.source) << "]\n";
        if (d.fell_back) std::cout << "  (fell back to the rule segmenter)\n";
        all.push_back(std::move(d));
    }
    if (!o.out.empty()) write_event_file(o.out, all);
    return kOk;
}

// ---- build-strata ------------------------------------------------------------

int cmd_build_strata(const std::string& events, const std::string& ids_file, const std::string& out) {
    std::vector<std::string> ids;
    if (!ids_file.empty()) {
        std::istringstream in(read_file(ids_file));
        for (std::string l; std::getline(in, l);) {
            if (!l.empty()) ids.push_back(l);
        }
    }
    const auto b = stratify_event_directory(events, ids_file.empty() ? nullptr : &ids);
    nlohmann::json j;
    j["total"] = b.total;
    for (const auto& [c, list] : b.conditions) {
        j["conditions"][condition_name(c)] = list;
        std::cout << condition_name(c) << " " << list.size() << " / " << b.total << "\n";
    }
    if (!out.empty()) write_file(out, j.dump(2) + "\n");
    return kOk;
}

// ---- sample ------------------------------------------------------------------

struct SampleOptions {
    std::string text, output = "sample.csv";
    int length = 64;
    uint64_t seed = 0;
    int steps = 0;
    double scale = -1.0;
};

int cmd_sample(const RunOptions& ro, const SampleOptions& so) {
    if (so.text.empty()) throw ConfigError("sample needs --text");
    if (so.length < 1) throw ConfigError("--length must be >= 1");
    Pipeline p(ro.build(), ro.out, &std::cerr);
    const auto model = model_from_checkpoint(p.trained());
    const auto d = decompose_rule(so.text);
    const auto bundle = p.event_encoder().encode(d, p.config().encoder.mode);
    GuidanceConfig g = p.config().diffusion.guidance;
    if (so.scale >= 0.0) g.scale = so.scale;
    g.validate();
    const auto sched = p.schedule();
    const std::vector<int> steps = so.steps > 0 ? select_inference_steps(sched.T, so.steps) : std::vector<int>{};
    auto m = sample(model, bundle, so.length, sched, g, so.seed, steps);
    m = denormalize(m, p.corpus().train.normalization_stats);
    std::ostringstream csv;
    for (Eigen::Index r = 0; r < m.frames.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.frames.cols(); ++c) csv << (c ? "," : "") << m.frames(r, c);
        csv << "\n";
    }
    write_file(so.output, csv.str());
    std::cout << "events: " << d.k() << ", frames: " << m.frames.rows() << ", written to " << so.output << "\n";
    return kOk;
}

// ---- report ------------------------------------------------------------------

int cmd_report(const std::string& run, const std::string& plot) {
    const auto j = nlohmann::json::parse(read_file(fs::path(run) / "report.json"));
    const auto rep = EvaluationReport::from_json(j);
    std::cout << rep.to_text();
    if (!plot.empty()) {
        write_file(plot, render_condition_plot_svg(rep));
        std::cout << "plot written to " << plot << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-level text-to-motion diffusion: segmentation, training, sampling and evaluation"};
    app.require_subcommand(1);
    app.footer("Config keys for --set and --config files (key, default, meaning):\n" + config_help());

    // config
    bool keys = false;
    RunOptions config_ro;
    auto* config_cmd = app.add_subcommand("config", "print the effective configuration, or every key with --keys");
    config_cmd->add_flag("--keys", keys, "list every config key with its default and meaning");
    config_ro.attach(config_cmd);

    // decompose
    DecomposeOptions dec;
    auto* dec_cmd = app.add_subcommand("decompose", "split prompts into ordered event clauses");
    dec_cmd->add_option("--text", dec.text, "one prompt");
    dec_cmd->add_option("--file", dec.file, "file with one prompt or caption record per line");
    dec_cmd->add_option("--strategy", dec.strategy, "event_aware | verb_aware");
    dec_cmd->add_option("--backend", dec.backend, "rule | llm (llm reads ET2M_LLM_ENDPOINT)");
    dec_cmd->add_option("--cache", dec.cache, "LLM response cache directory");
    dec_cmd->add_option("--out", dec.out, "write an event file");

    // build-strata
    std::string strata_events, strata_ids, strata_out;
    auto* strata_cmd = app.add_subcommand("build-strata", "stratify test ids by minimum event count");
    strata_cmd->add_option("--events", strata_events, "directory of <id>.txt event files")->required();
    strata_cmd->add_option("--ids", strata_ids, "restrict to the ids listed in this file");
    strata_cmd->add_option("--out", strata_out, "write the strata as JSON");

    // train / eval / pipeline
    RunOptions train_ro, eval_ro, pipe_ro, sample_ro, ablate_ro;
    auto* train_cmd = app.add_subcommand("train", "train the denoiser (runs data, decompose and encode as needed)");
    train_ro.attach(train_cmd);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate the trained model on the stratified test set");
    eval_ro.attach(eval_cmd);
    auto* pipe_cmd = app.add_subcommand("pipeline", "decompose, encode, train and evaluate end to end");
    pipe_ro.attach(pipe_cmd);

    // sample
    SampleOptions so;
    auto* sample_cmd = app.add_subcommand("sample", "generate a motion for a prompt with the trained model");
    sample_ro.attach(sample_cmd);
    sample_cmd->add_option("--text", so.text, "prompt")->required();
    sample_cmd->add_option("--length", so.length, "frames");
    sample_cmd->add_option("--seed", so.seed, "sampling seed");
    sample_cmd->add_option("--steps", so.steps, "sampling steps (default: config)");
    sample_cmd->add_option("--scale", so.scale, "guidance scale (default: config)");
    sample_cmd->add_option("--output", so.output, "CSV of frames in data units");

    // ablate
    std::string axis, values;
    auto* ablate_cmd = app.add_subcommand("ablate", "sweep one setting and merge the reports");
    ablate_ro.attach(ablate_cmd);
    ablate_cmd->add_option("--axis", axis, "steps | scale | backbone | encoder_mode")->required();
    ablate_cmd->add_option("--values", values, "comma-separated values")->required();

    // report
    std::string report_run, plot;
    auto* report_cmd = app.add_subcommand("report", "print a run's report, optionally plotting metrics by condition");
    report_cmd->add_option("--run", report_run, "run directory containing report.json")->required();
    report_cmd->add_option("--plot", plot, "write an SVG plot of metrics against the event-count condition");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInvalid;
    }

    try {
        if (config_cmd->parsed()) {
            if (keys) {
                std::cout << config_help();
            } else {
                std::cout << config_ro.build().to_json().dump(2) << "\n";
            }
            return kOk;
        }
        if (dec_cmd->parsed()) return cmd_decompose(dec);
        if (strata_cmd->parsed()) return cmd_build_strata(strata_events, strata_ids, strata_out);
        if (train_cmd->parsed()) {
            Pipeline p(train_ro.build(), train_ro.out, &std::cerr);
            const auto& best = p.trained();
            std::cout << "best checkpoint: epoch " << best.epoch << ", step " << best.step << ", val_fid " << best.val_fid << "\n";
            return kOk;
        }
        if (eval_cmd->parsed() || pipe_cmd->parsed()) {
            const RunOptions& ro = eval_cmd->parsed() ? eval_ro : pipe_ro;
            Pipeline p(ro.build(), ro.out, &std::cerr);
            std::cout << p.report().to_text();
            return kOk;
        }
        if (sample_cmd->parsed()) return cmd_sample(sample_ro, so);
        if (ablate_cmd->parsed()) {
            const auto r = run_ablation(ablate_ro.build(), parse_ablation_axis(axis), split_list(values), ablate_ro.out, &std::cerr);
            std::cout << r.table;
            return kOk;
        }
        if (report_cmd->parsed()) return cmd_report(report_run, plot);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const MalformedLine& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}

// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/evaluation.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"
#include "et2m/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace et2m {

namespace {

constexpr double kEigenFloor = 1e-10;

Mat covariance(const Mat& x, const RowVec& mu) {
    Mat c = x.rowwise() - mu;
    const double denom = std::max<double>(1.0, static_cast<double>(x.rows() - 1));
    return (c.transpose() * c) / denom;
}

Mat sym_sqrt(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()));
    const auto ev = es.eigenvalues().cwiseMax(kEigenFloor).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void check_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) throw ShapeMismatch(std::string(what) + " contains non-finite values");
}

}  // namespace

FidResult fid_detail(const Mat& real, const Mat& gen) {
    if (real.cols() != gen.cols()) throw DimensionMismatch("fid: embedding widths differ");
    if (real.rows() < 2 || gen.rows() < 2) throw InsufficientPool("fid needs at least two samples per side");
    check_finite(real, "fid real embeddings");
    check_finite(gen, "fid generated embeddings");
    FidResult r;
    r.degenerate = real.rows() <= real.cols() || gen.rows() <= gen.cols();
    const RowVec mu_r = real.colwise().mean(), mu_g = gen.colwise().mean();
    const Mat s_r = covariance(real, mu_r), s_g = covariance(gen, mu_g);
    const Mat root_r = sym_sqrt(s_r);
    const Mat m = root_r * s_g * root_r;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    const double tr_cross = es.eigenvalues().cwiseMax(kEigenFloor).cwiseSqrt().sum();
    r.value = (mu_r - mu_g).squaredNorm() + s_r.trace() + s_g.trace() - 2.0 * tr_cross;
    r.value = std::max(0.0, r.value);
    return r;
}

double fid(const Mat& real, const Mat& gen) { return fid_detail(real, gen).value; }

std::array<double, 3> r_precision_top3(const Mat& gen, const Mat& text, int pool_size, uint64_t seed) {
    if (gen.rows() != text.rows()) throw CountMismatch("r_precision: generation and caption counts differ");
    if (gen.cols() != text.cols()) throw DimensionMismatch("r_precision: embedding widths differ");
    const auto n = gen.rows();
    if (pool_size < 1 || pool_size > n) {
        throw InsufficientPool("pool of " + std::to_string(pool_size) + " needs at least that many captions, have " + std::to_string(n));
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::array<double, 3> hits{0, 0, 0};
    std::vector<Eigen::Index> distractors;
    for (Eigen::Index i = 0; i < n; ++i) {
        distractors.clear();
        while (static_cast<int>(distractors.size()) < pool_size - 1) {
            const auto j = pick(rng);
            if (j == i || std::find(distractors.begin(), distractors.end(), j) != distractors.end()) continue;
            distractors.push_back(j);
        }
        const double d_true = (gen.row(i) - text.row(i)).norm();
        int rank = 0;
        for (auto j : distractors) {
            if ((gen.row(i) - text.row(j)).norm() < d_true) ++rank;
        }
        for (int k = 0; k < 3; ++k) {
            if (rank <= k) hits[static_cast<size_t>(k)] += 1.0;
        }
    }
    for (auto& h : hits) h /= static_cast<double>(n);
    return hits;
}

double r_precision(const Mat& gen, const Mat& text, int pool_size, int k, uint64_t seed) {
    if (k < 1 || k > 3) throw ConfigError("r_precision: k must be 1, 2 or 3");
    return r_precision_top3(gen, text, pool_size, seed)[static_cast<size_t>(k - 1)];
}

double mm_dist(const Mat& gen, const Mat& text) {
    if (gen.rows() != text.rows()) throw CountMismatch("mm_dist: generation and caption counts differ");
    if (gen.cols() != text.cols()) throw DimensionMismatch("mm_dist: embedding widths differ");
    if (gen.rows() == 0) throw CountMismatch("mm_dist: no pairs");
    double s = 0.0;
    for (Eigen::Index i = 0; i < gen.rows(); ++i) s += (gen.row(i) - text.row(i)).norm();
    return s / static_cast<double>(gen.rows());
}

double mmodality(const std::vector<Mat>& per_prompt, int n_pairs, uint64_t seed) {
    if (per_prompt.empty()) throw TooFewGenerations("mmodality: no prompts");
    std::mt19937_64 rng(seed);
    double total = 0.0;
    for (const auto& g : per_prompt) {
        const auto n = g.rows();
        if (n < 2) throw TooFewGenerations("mmodality needs at least two generations per prompt");
        double s = 0.0;
        int count = 0;
        if (n_pairs == kAllPairs) {
            for (Eigen::Index a = 0; a < n; ++a) {
                for (Eigen::Index b = a + 1; b < n; ++b, ++count) s += (g.row(a) - g.row(b)).norm();
            }
        } else {
            if (n_pairs < 1) throw ConfigError("mmodality: n_pairs must be >= 1");
            std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
            for (; count < n_pairs; ++count) {
                const auto a = pick(rng);
                auto b = pick(rng);
                while (b == a) b = pick(rng);
                s += (g.row(a) - g.row(b)).norm();
            }
        }
        total += s / count;
    }
    return total / static_cast<double>(per_prompt.size());
}

MetricResult summarize(const std::string& name, const std::vector<double>& values) {
    MetricResult r;
    r.name = name;
    r.n_repeats = static_cast<int>(values.size());
    if (values.empty()) return r;
    r.value = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() < 2) {
        r.ci_degenerate = true;
        return r;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - r.value) * (v - r.value);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    r.ci95 = 1.96 * sd / std::sqrt(static_cast<double>(values.size()));
    return r;
}

std::string condition_name(int min_events) { return min_events <= 1 ? "all" : ">=" + std::to_string(min_events); }

// ---- report serialization ---------------------------------------------------

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json j;
    for (const auto& [cond, metrics] : conditions) {
        for (const auto& [name, m] : metrics) {
            j["conditions"][cond][name] = {{"value", m.value}, {"ci95", m.ci95}, {"n_repeats", m.n_repeats}, {"ci_degenerate", m.ci_degenerate}};
        }
    }
    j["counts"] = counts;
    j["meta"] = meta;
    return j;
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
    EvaluationReport r;
    if (j.contains("conditions")) {
        for (const auto& [cond, metrics] : j.at("conditions").items()) {
            for (const auto& [name, m] : metrics.items()) {
                MetricResult mr;
                mr.name = name;
                mr.value = m.at("value").get<double>();
                mr.ci95 = m.at("ci95").get<double>();
                mr.n_repeats = m.at("n_repeats").get<int>();
                mr.ci_degenerate = m.value("ci_degenerate", false);
                r.conditions[cond][name] = mr;
            }
        }
    }
    if (j.contains("counts")) r.counts = j.at("counts").get<std::map<std::string, size_t>>();
    if (j.contains("meta")) r.meta = j.at("meta").get<std::map<std::string, std::string>>();
    return r;
}

std::string EvaluationReport::to_text() const {
    static const std::vector<std::string> order = {"top1", "top2", "top3", "fid", "mm_dist", "mmodality", "event_order"};
    std::set<std::string> present;
    for (const auto& [c, metrics] : conditions) {
        for (const auto& [name, m] : metrics) present.insert(name);
    }
    std::vector<std::string> cols;
    for (const auto& n : order) {
        if (present.count(n)) cols.push_back(n);
    }
    for (const auto& n : present) {
        if (std::find(cols.begin(), cols.end(), n) == cols.end()) cols.push_back(n);
    }
    std::ostringstream out;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-10s %6s", "condition", "n");
    out << buf;
    for (const auto& c : cols) {
        std::snprintf(buf, sizeof buf, " %18s", c.c_str());
        out << buf;
    }
    out << '\n';
    std::vector<std::string> conds;
    if (conditions.count("all")) conds.push_back("all");
    for (const auto& [c, m] : conditions) {
        if (c != "all") conds.push_back(c);
    }
    for (const auto& c : conds) {
        const auto it = counts.find(c);
        std::snprintf(buf, sizeof buf, "%-10s %6zu", c.c_str(), it == counts.end() ? size_t{0} : it->second);
        out << buf;
        for (const auto& name : cols) {
            const auto& metrics = conditions.at(c);
            const auto m = metrics.find(name);
            if (m == metrics.end()) {
                std::snprintf(buf, sizeof buf, " %18s", "-");
            } else {
                std::snprintf(buf, sizeof buf, " %9.4f+-%-7.4f", m->second.value, m->second.ci95);
            }
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

// ---- evaluation -------------------------------------------------------------

namespace {

Mat gather_rows(const Mat& m, const std::vector<size_t>& idx) {
    Mat out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

std::vector<std::pair<std::string, std::vector<size_t>>> condition_subsets(const std::vector<EvalItem>& items,
                                                                           const StratifiedBenchmark& benchmark) {
    if (!benchmark.nested()) throw ShapeMismatch("benchmark conditions are not nested");
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < items.size(); ++i) index[items[i].id] = i;
    std::vector<std::pair<std::string, std::vector<size_t>>> out;
    std::vector<size_t> all(items.size());
    std::iota(all.begin(), all.end(), 0);
    out.emplace_back("all", std::move(all));
    for (const auto& [c, ids] : benchmark.conditions) {
        std::vector<size_t> sel;
        for (const auto& id : ids) {
            auto it = index.find(id);
            if (it == index.end()) throw MissingDecomposition("benchmark id '" + id + "' has no evaluation item");
            sel.push_back(it->second);
        }
        out.emplace_back(condition_name(c), std::move(sel));
    }
    // Nesting must also hold on the item indices actually evaluated.
    for (size_t c = 2; c < out.size(); ++c) {
        std::set<size_t> prev(out[c - 1].second.begin(), out[c - 1].second.end());
        for (auto i : out[c].second) {
            if (!prev.count(i)) throw ShapeMismatch("condition " + out[c].first + " is not a subset of " + out[c - 1].first);
        }
    }
    return out;
}

}  // namespace

EvaluationReport report_from_dump(const EvalDump& dump, const std::vector<EvalItem>& items,
                                  const StratifiedBenchmark& benchmark, const EvalConfig& cfg) {
    const auto subsets = condition_subsets(items, benchmark);
    std::map<std::string, std::map<std::string, std::vector<double>>> values;
    const size_t repeats = dump.gen.size();
    for (size_t r = 0; r < repeats; ++r) {
        for (size_t c = 0; c < subsets.size(); ++c) {
            const auto& [name, idx] = subsets[c];
            if (idx.size() < 2) continue;
            const Mat real = gather_rows(dump.real, idx), gen = gather_rows(dump.gen[r], idx), text = gather_rows(dump.text, idx);
            auto& v = values[name];
            v["fid"].push_back(fid(real, gen));
            const int pool = std::min<int>(cfg.pool_size, static_cast<int>(idx.size()));
            const auto top = r_precision_top3(gen, text, pool, mix_seed(cfg.seed, r, 1000 + c));
            v["top1"].push_back(top[0]);
            v["top2"].push_back(top[1]);
            v["top3"].push_back(top[2]);
            v["mm_dist"].push_back(mm_dist(gen, text));
            if (r < dump.order_hits.size() && !dump.order_hits[r].empty()) {
                double hits = 0.0;
                for (auto i : idx) hits += dump.order_hits[r][i];
                v["event_order"].push_back(hits / static_cast<double>(idx.size()));
            }
        }
        if (r < dump.mm_gen.size() && !dump.mm_gen[r].empty()) {
            values["all"]["mmodality"].push_back(mmodality(dump.mm_gen[r], cfg.mm_pairs, mix_seed(cfg.seed, r, 2000)));
        }
    }
    EvaluationReport rep;
    for (const auto& [name, idx] : subsets) {
        rep.counts[name] = idx.size();
        for (const auto& [metric, vs] : values[name]) rep.conditions[name][metric] = summarize(metric, vs);
        if (!rep.conditions.count(name)) rep.conditions[name];
    }
    rep.meta["n_repeats"] = std::to_string(repeats);
    rep.meta["pool_size"] = std::to_string(cfg.pool_size);
    rep.meta["guidance_scale"] = nlohmann::json(cfg.guidance.scale).dump();
    std::string steps;
    for (int t : cfg.steps) steps += (steps.empty() ? "" : ",") + std::to_string(t);
    rep.meta["steps"] = steps.empty() ? "default" : steps;
    rep.meta["seed"] = std::to_string(cfg.seed);
    return rep;
}

EvaluationReport evaluate(const X0Model& model, const std::vector<EvalItem>& items, const StratifiedBenchmark& benchmark,
                          TextEncoder& text_eval, const MotionEncoder& motion_eval, const DiffusionSchedule& schedule,
                          const EvalConfig& cfg, const EventOrderJudge* judge, EvalDump* dump_out) {
    if (cfg.n_repeats < 1) throw ConfigError("evaluation.n_repeats must be >= 1");
    if (items.size() < 2) throw InsufficientPool("evaluation needs at least two items");
    condition_subsets(items, benchmark);  // validates before any sampling

    EvalDump dump;
    std::vector<std::string> captions;
    std::vector<Mat> reals;
    for (const auto& it : items) {
        dump.ids.push_back(it.id);
        captions.push_back(it.caption);
        reals.push_back(it.real);
    }
    dump.text = text_eval.embed_text(captions);
    dump.real = motion_eval.embed_motion(reals);
    const bool judge_order = judge && cfg.stats.has_value();
    const size_t n = items.size();
    const size_t mm_n = std::min<size_t>(n, static_cast<size_t>(std::max(0, cfg.mm_prompts)));

    for (int r = 0; r < cfg.n_repeats; ++r) {
        std::vector<Mat> gens(n);
        std::vector<char> hits(judge_order ? n : 0, 0);
        parallel_for(n, cfg.workers, [&](size_t i) {
            const auto& it = items[i];
            auto m = sample(model, it.bundle, static_cast<int>(it.real.rows()), schedule, cfg.guidance,
                            mix_seed(cfg.seed, static_cast<uint64_t>(r), i), cfg.steps);
            if (judge_order) {
                MotionSequence raw = m;
                raw = denormalize(raw, *cfg.stats);
                hits[i] = judge->matches(raw.frames, it) ? 1 : 0;
            }
            gens[i] = std::move(m.frames);
        });
        dump.gen.push_back(motion_eval.embed_motion(gens));
        dump.order_hits.push_back(std::move(hits));

        std::vector<Mat> mm(mm_n);
        if (mm_n > 0 && cfg.mm_generations >= 2) {
            parallel_for(mm_n, cfg.workers, [&](size_t p) {
                const auto& it = items[p];
                std::vector<Mat> g;
                for (int k = 0; k < cfg.mm_generations; ++k) {
                    g.push_back(sample(model, it.bundle, static_cast<int>(it.real.rows()), schedule, cfg.guidance,
                                       mix_seed(cfg.seed, static_cast<uint64_t>(r), 1'000'000 + p * 1000 + static_cast<size_t>(k)), cfg.steps)
                                    .frames);
                }
                mm[p] = motion_eval.embed_motion(g);
            });
        } else {
            mm.clear();
        }
        dump.mm_gen.push_back(std::move(mm));
    }
    EvaluationReport rep = report_from_dump(dump, items, benchmark, cfg);
    if (dump_out) *dump_out = std::move(dump);
    return rep;
}

}  // namespace et2m

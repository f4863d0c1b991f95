// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Prompt decomposition into events: LLM-backed and rule-based segmenters,
// decomposition validation, and event-count stratification of a test split.

#pragma once

#include "et2m/data.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace et2m {

class LlmClient;
class ResponseCache;

enum class EventSource { llm, rule, human };
enum class Strategy { event_aware, verb_aware };

std::string_view to_string(EventSource s);
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);  // "event"/"event_aware"/"verb"/"verb_aware"

struct Event {
    std::string text;
    int index = 1;  // 1-based order within the decomposition
    EventSource source = EventSource::rule;
    std::vector<PosToken> pos_tokens;  // present for LLM output lines
};

struct Decomposition {
    std::string prompt;
    std::vector<Event> events;
    Strategy strategy = Strategy::event_aware;
    bool fell_back = false;  // LLM path failed and the rule segmenter answered

    int k() const { return static_cast<int>(events.size()); }
    std::vector<std::string> clause_texts() const;
};

// The two LLM instruction templates, verbatim including their worked examples.
const std::string& event_aware_template();
const std::string& verb_aware_template();
const std::string& prompt_template(Strategy s);

// Full request text sent to the LLM for one caption line.
std::string build_llm_request(Strategy strategy, const std::string& caption_line);

// Parses a raw LLM response, one '#'-format line per event. Throws
// UnparseableResponse if any non-blank line fails to parse or none exist.
std::vector<Event> parse_llm_response(const std::string& response);

// `input` is a caption line in '#' format or a bare prompt. Uses the cache
// when given. Throws LlmTransport or UnparseableResponse (after one retry).
Decomposition decompose_llm(const std::string& input, Strategy strategy, LlmClient& llm, ResponseCache* cache = nullptr);

// decompose_llm, falling back to decompose_rule on transport or parse failure.
Decomposition decompose_with_fallback(const std::string& input, Strategy strategy, LlmClient& llm, ResponseCache* cache = nullptr);

// Deterministic offline segmenter approximating the event-aware rules.
Decomposition decompose_rule(const std::string& prompt);
Decomposition decompose_rule(const CaptionRecord& caption);

// Subject phrase of a sentence: longest determiner+noun prefix of the POS
// stream when available, a pronoun, or else the first two words.
std::string detect_subject(const std::string& text, const std::vector<PosToken>& pos = {});
// Lexicon-based verb detection; `extra_lemmas` come from a POS stream.
bool is_verb_word(const std::string& word, const std::vector<std::string>& extra_lemmas = {});
int count_verbs(const std::string& text);

struct Violation {
    int event_index = 0;  // 0 for decomposition-level problems
    std::string rule;     // "structure", "empty_event", "subject", "verb_count", "simultaneity", "single_action"
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    int events_checked = 0;

    bool ok() const { return violations.empty(); }
    bool violated(std::string_view rule) const;
    // Fraction of per-rule checks that passed, keyed by rule name.
    std::map<std::string, double> pass_rates;
};

ValidationReport validate_decomposition(const Decomposition& d, const CaptionRecord& original);
ValidationReport validate_decomposition(const Decomposition& d, const std::string& original);

struct StratifiedBenchmark {
    // min_event_count (2, 3, 4) -> sample ids, in split order.
    std::map<int, std::vector<std::string>> conditions;
    size_t total = 0;

    bool nested() const;
};

// Decompositions per sample id, aligned with the sample's captions.
using DecompositionTable = std::map<std::string, std::vector<Decomposition>>;

StratifiedBenchmark stratify(const DatasetSplit& test_split, const DecompositionTable& decompositions,
                             const std::vector<int>& thresholds = {2, 3, 4});
// Same rule from per-sample caption event counts.
StratifiedBenchmark stratify_counts(const std::vector<std::pair<std::string, std::vector<int>>>& counts,
                                    const std::vector<int>& thresholds = {2, 3, 4});

// Event files: one per sample, one '#' line per event, captions separated by
// a blank line.
void write_event_file(const std::filesystem::path& path, const std::vector<Decomposition>& per_caption);
std::vector<std::vector<Event>> read_event_file(const std::filesystem::path& path);

}  // namespace et2m

// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/segmentation.hpp"

#include "et2m/errors.hpp"
#include "et2m/llm.hpp"
#include "prompt_templates.inc"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace et2m {

namespace fs = std::filesystem;

std::string_view to_string(EventSource s) {
    switch (s) {
        case EventSource::llm: return "llm";
        case EventSource::rule: return "rule";
        case EventSource::human: return "human";
    }
    return "unknown";
}

std::string_view to_string(Strategy s) { return s == Strategy::event_aware ? "event_aware" : "verb_aware"; }

Strategy parse_strategy(std::string_view s) {
    if (s == "event" || s == "event_aware") return Strategy::event_aware;
    if (s == "verb" || s == "verb_aware") return Strategy::verb_aware;
    throw ConfigError("unknown segmentation strategy: " + std::string(s));
}

std::vector<std::string> Decomposition::clause_texts() const {
    std::vector<std::string> out;
    out.reserve(events.size());
    for (const auto& e : events) out.push_back(e.text);
    return out;
}

const std::string& event_aware_template() {
    static const std::string t = kEventAwareTemplate;
    return t;
}

const std::string& verb_aware_template() {
    static const std::string t = kVerbAwareTemplate;
    return t;
}

const std::string& prompt_template(Strategy s) { return s == Strategy::event_aware ? event_aware_template() : verb_aware_template(); }

// ---- word-level helpers ----------------------------------------------------

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

struct Tok {
    std::string raw;    // word without surrounding punctuation
    std::string lower;  // lowercase raw
    std::string lead;   // leading punctuation (quotes)
    std::string trail;  // trailing punctuation
};

std::vector<Tok> tokenize(const std::string& text) {
    std::vector<Tok> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) {
        Tok t;
        size_t b = 0, e = w.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(w[b])) && w[b] != '\'') ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(w[e - 1])) && w[e - 1] != '\'') --e;
        t.lead = w.substr(0, b);
        t.raw = w.substr(b, e - b);
        t.trail = w.substr(e);
        t.lower = lower(t.raw);
        if (t.raw.empty()) {
            // bare punctuation token: attach to the previous word
            if (!out.empty()) out.back().trail += w;
            continue;
        }
        out.push_back(std::move(t));
    }
    return out;
}

bool ends_sentence(const Tok& t) { return t.trail.find_first_of(".!?") != std::string::npos; }
bool has_comma(const Tok& t) { return t.trail.find_first_of(",;") != std::string::npos; }

const std::unordered_set<std::string>& verb_lexicon() {
    static const std::unordered_set<std::string> v = {
        "walk",   "run",    "jog",     "sprint",  "jump",    "hop",     "leap",    "skip",   "turn",     "spin",    "rotate",
        "twist",  "kick",   "punch",   "throw",   "catch",   "lift",    "place",   "put",    "pick",     "carry",   "hold",
        "grab",   "drop",   "push",    "pull",    "wave",    "clap",    "step",    "land",   "bow",      "sit",     "stand",
        "raise",  "lower",  "bend",    "crouch",  "squat",   "kneel",   "lie",     "lay",    "roll",     "crawl",   "climb",
        "stretch", "lean",  "reach",   "swing",   "shake",   "nod",     "rise",    "fall",   "stumble",  "slide",   "shuffle",
        "march",  "dance",  "move",    "go",      "come",    "take",    "get",     "look",   "touch",    "wipe",    "scratch",
        "pause",  "stop",   "wait",    "rest",    "kneel",   "squat",   "flap",    "swim",   "balance",  "limp",    "pace",
        "tiptoe", "stomp",  "skate",   "play",    "drink",   "eat",     "open",    "close",  "clean",    "fold",    "salute",
        "point",  "cross",  "hug",     "fight",   "block",   "dodge",   "duck",    "circle", "return",   "approach", "retreat",
        "lunge",  "flip",   "cartwheel", "stroll", "wander", "shift",   "sway",    "rock",   "bounce",   "strut",   "squat",
        "tap",    "knock",  "brush",   "rub",     "pat",     "stir",    "pour",    "hammer", "saw",      "paddle",  "row",
        "backflip", "somersault", "jumping", "sprinting", "sits", "crouches", "bends", "perform", "do", "make", "try",
        "begin",  "start",  "continue", "keep",   "proceed", "raise",   "extend",  "flex",   "rotate",   "spread",  "tilt",
        "glance", "ascend", "descend", "mount",   "dismount", "enter",  "exit",    "leave",  "arrive",   "fly",     "float",
        "wobble", "stagger", "trip",   "recover", "stabilize", "bow",   "curtsy",  "applaud", "cheer",   "celebrate", "stamp",
    };
    return v;
}

// Words after which a verb-shaped token is read as a noun or infinitive.
const std::unordered_set<std::string>& non_verb_context() {
    static const std::unordered_set<std::string> c = {"a",    "an",   "the",  "his",     "her",  "their", "its",   "my",  "your",
                                                      "our",  "few",  "several", "some", "two",  "three", "four",  "in",  "on",
                                                      "to",   "of",   "with", "at",      "into", "onto",  "from",  "by",  "for",
                                                      "this", "that", "these", "those",  "many", "big",   "small", "large", "long"};
    return c;
}

const std::unordered_set<std::string>& connectives() {
    static const std::unordered_set<std::string> c = {"then", "finally", "afterwards", "afterward", "next", "later", "subsequently", "lastly"};
    return c;
}

const std::unordered_set<std::string>& pronoun_subjects() {
    static const std::unordered_set<std::string> p = {"someone", "somebody", "he", "she", "they", "it", "person", "human", "figure", "i", "we", "you"};
    return p;
}

const std::unordered_set<std::string>& determiners() {
    static const std::unordered_set<std::string> d = {"a", "an", "the", "this", "that", "one", "another", "some"};
    return d;
}

std::vector<std::string> lemma_candidates(const std::string& w) {
    std::vector<std::string> c{w};
    auto ends = [&](std::string_view suf) { return w.size() > suf.size() + 1 && w.compare(w.size() - suf.size(), suf.size(), suf) == 0; };
    if (ends("ies")) c.push_back(w.substr(0, w.size() - 3) + "y");
    if (ends("es")) c.push_back(w.substr(0, w.size() - 2));
    if (ends("s")) c.push_back(w.substr(0, w.size() - 1));
    if (ends("ing")) {
        const auto stem = w.substr(0, w.size() - 3);
        c.push_back(stem);
        c.push_back(stem + "e");
        if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2]) c.push_back(stem.substr(0, stem.size() - 1));
    }
    if (ends("ed")) {
        const auto stem = w.substr(0, w.size() - 2);
        c.push_back(stem);
        c.push_back(w.substr(0, w.size() - 1));
        if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2]) c.push_back(stem.substr(0, stem.size() - 1));
    }
    return c;
}

bool verb_at(const std::vector<Tok>& toks, size_t i, const std::vector<std::string>& extra) {
    if (i > 0 && non_verb_context().count(toks[i - 1].lower)) return false;
    return is_verb_word(toks[i].lower, extra);
}

std::vector<std::string> verb_lemmas(const std::vector<PosToken>& pos) {
    std::vector<std::string> out;
    for (const auto& p : pos) {
        if (p.tag == "VERB") out.push_back(lower(p.word));
    }
    return out;
}

size_t subject_length(const std::vector<Tok>& toks, const std::vector<PosToken>& pos) {
    if (toks.empty()) return 0;
    if (!pos.empty()) {
        size_t n = 0;
        if (pos[0].tag == "PRON" || pos[0].tag == "PROPN") return 1;
        if (pos[0].tag == "DET") {
            n = 1;
            while (n < pos.size() && (pos[n].tag == "NOUN" || pos[n].tag == "PROPN")) ++n;
            if (n > 1) return std::min(n, toks.size());
        }
    }
    if (pronoun_subjects().count(toks[0].lower)) return 1;
    if (determiners().count(toks[0].lower) && toks.size() >= 2) return 2;
    return std::min<size_t>(2, toks.size());
}

std::string join(const std::vector<Tok>& toks, size_t b, size_t e, bool keep_last_trail) {
    std::string out;
    for (size_t i = b; i < e; ++i) {
        if (!out.empty()) out.push_back(' ');
        out += toks[i].lead + toks[i].raw;
        if (i + 1 < e || keep_last_trail) out += toks[i].trail;
    }
    return out;
}

bool is_connector(const std::string& w) { return w == "and" || connectives().count(w) > 0; }

bool has_simultaneity_marker(const std::vector<Tok>& toks) {
    for (size_t i = 0; i < toks.size(); ++i) {
        const auto& w = toks[i].lower;
        if (w == "while" || w == "simultaneously" || w == "meanwhile") return true;
        if (w == "same" && i + 1 < toks.size() && toks[i + 1].lower == "time") return true;
    }
    return false;
}

int count_marker(const std::string& text, std::string_view marker) {
    const auto toks = tokenize(text);
    int n = 0;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (marker == "same time") {
            n += toks[i].lower == "same" && i + 1 < toks.size() && toks[i + 1].lower == "time";
        } else {
            n += toks[i].lower == marker;
        }
    }
    return n;
}

}  // namespace

bool is_verb_word(const std::string& word, const std::vector<std::string>& extra_lemmas) {
    const auto w = lower(word);
    for (const auto& c : lemma_candidates(w)) {
        if (verb_lexicon().count(c)) return true;
        if (std::find(extra_lemmas.begin(), extra_lemmas.end(), c) != extra_lemmas.end()) return true;
    }
    return false;
}

int count_verbs(const std::string& text) {
    const auto toks = tokenize(text);
    int n = 0;
    for (size_t i = 0; i < toks.size(); ++i) n += verb_at(toks, i, {});
    return n;
}

std::string detect_subject(const std::string& text, const std::vector<PosToken>& pos) {
    const auto toks = tokenize(text);
    return join(toks, 0, subject_length(toks, pos), false);
}

// ---- rule segmenter --------------------------------------------------------

namespace {

Decomposition segment(const std::string& prompt, const std::vector<PosToken>& pos) {
    Decomposition d;
    d.prompt = prompt;
    d.strategy = Strategy::event_aware;
    const auto toks = tokenize(prompt);
    const auto lemmas = verb_lemmas(pos);

    // sentence spans
    std::vector<std::pair<size_t, size_t>> sentences;
    size_t start = 0;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (ends_sentence(toks[i]) || i + 1 == toks.size()) {
            sentences.emplace_back(start, i + 1);
            start = i + 1;
        }
    }

    std::string subject;
    std::vector<std::string> clauses;
    for (size_t si = 0; si < sentences.size(); ++si) {
        const auto [sb, se] = sentences[si];
        const std::vector<Tok> sent(toks.begin() + static_cast<std::ptrdiff_t>(sb), toks.begin() + static_cast<std::ptrdiff_t>(se));
        const bool terminal = ends_sentence(sent.back());
        const std::string end_mark = terminal ? std::string(1, sent.back().trail[sent.back().trail.find_first_of(".!?")]) : "";

        size_t subj_len = 0;
        if (!verb_at(sent, 0, lemmas) && !is_connector(sent[0].lower)) {
            subj_len = subject_length(sent, si == 0 ? pos : std::vector<PosToken>{});
            if (subj_len >= sent.size()) subj_len = 0;
        }
        if (subj_len > 0) subject = join(sent, 0, subj_len, false);

        // cut positions inside the sentence (token index where an event starts)
        std::set<size_t> cuts;
        for (size_t i = subj_len + 1; i < sent.size(); ++i) {
            const auto& w = sent[i].lower;
            if (connectives().count(w)) {
                // "and then", ", and finally": cut at the first connector
                size_t c = i;
                while (c > subj_len + 1 && sent[c - 1].lower == "and" && !has_comma(sent[c - 1])) --c;
                cuts.insert(c);
                continue;
            }
            if (has_comma(sent[i - 1])) {
                size_t j = i;
                while (j < sent.size() && is_connector(sent[j].lower)) ++j;
                if (j < sent.size() && verb_at(sent, j, lemmas)) cuts.insert(i);
            }
        }
        if (cuts.empty() && !has_simultaneity_marker(sent)) {
            for (size_t i = subj_len + 1; i + 1 < sent.size(); ++i) {
                if (sent[i].lower == "and" && verb_at(sent, i + 1, lemmas)) cuts.insert(i);
            }
        }

        std::vector<size_t> bounds{subj_len};
        for (auto c : cuts) {
            if (c > bounds.back()) bounds.push_back(c);
        }
        bounds.push_back(sent.size());
        for (size_t b = 0; b + 1 < bounds.size(); ++b) {
            size_t pb = bounds[b], pe = bounds[b + 1];
            while (pb < pe && is_connector(sent[pb].lower)) ++pb;
            if (pb >= pe) continue;
            std::string body = join(sent, pb, pe, false);
            std::string clause = subject.empty() ? body : subject + " " + body;
            clauses.push_back(clause + end_mark);
        }
    }
    if (clauses.empty()) clauses.push_back(prompt);
    for (size_t k = 0; k < clauses.size(); ++k) {
        d.events.push_back(Event{clauses[k], static_cast<int>(k) + 1, EventSource::rule, {}});
    }
    return d;
}

}  // namespace

Decomposition decompose_rule(const std::string& prompt) { return segment(prompt, {}); }

Decomposition decompose_rule(const CaptionRecord& caption) { return segment(caption.text, caption.pos_tokens); }

// ---- LLM segmenter ---------------------------------------------------------

std::string build_llm_request(Strategy strategy, const std::string& caption_line) {
    return prompt_template(strategy) + "\n\nInput:\n" + caption_line + "\n";
}

std::vector<Event> parse_llm_response(const std::string& response) {
    std::vector<Event> events;
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        CaptionRecord rec;
        try {
            rec = parse_caption_line(line);
        } catch (const MalformedLine& e) {
            throw UnparseableResponse(std::string("response line is not in caption format: ") + e.what());
        }
        events.push_back(Event{rec.text, static_cast<int>(events.size()) + 1, EventSource::llm, rec.pos_tokens});
    }
    if (events.empty()) throw UnparseableResponse("empty LLM response");
    return events;
}

namespace {

std::string as_caption_line(const std::string& input) {
    if (std::count(input.begin(), input.end(), '#') == 3) return input;
    CaptionRecord rec;
    rec.text = input;
    return serialize_caption_line(rec);
}

}  // namespace

Decomposition decompose_llm(const std::string& input, Strategy strategy, LlmClient& llm, ResponseCache* cache) {
    const std::string line = as_caption_line(input);
    const std::string key = ResponseCache::make_key(prompt_template(strategy), line);
    Decomposition d;
    d.prompt = parse_caption_line(line).text;
    d.strategy = strategy;

    if (cache) {
        if (auto hit = cache->get(key)) {
            try {
                d.events = parse_llm_response(*hit);
                return d;
            } catch (const UnparseableResponse&) {
                // stale entry; ask again
            }
        }
    }
    const std::string request = build_llm_request(strategy, line);
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::string response = llm.complete(request);
        try {
            d.events = parse_llm_response(response);
        } catch (const UnparseableResponse&) {
            if (attempt == 1) throw;
            continue;
        }
        if (cache) cache->put(key, response);
        return d;
    }
    throw UnparseableResponse("unreachable");
}

Decomposition decompose_with_fallback(const std::string& input, Strategy strategy, LlmClient& llm, ResponseCache* cache) {
    try {
        return decompose_llm(input, strategy, llm, cache);
    } catch (const LlmTransport&) {
    } catch (const UnparseableResponse&) {
    }
    const std::string line = as_caption_line(input);
    Decomposition d = decompose_rule(parse_caption_line(line));
    d.strategy = strategy;
    d.fell_back = true;
    return d;
}

// ---- validation ------------------------------------------------------------

bool ValidationReport::violated(std::string_view rule) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule == rule; });
}

ValidationReport validate_decomposition(const Decomposition& d, const std::string& original) {
    CaptionRecord rec;
    rec.text = original;
    return validate_decomposition(d, rec);
}

ValidationReport validate_decomposition(const Decomposition& d, const CaptionRecord& original) {
    ValidationReport r;
    std::map<std::string, std::pair<int, int>> tally;  // rule -> (passed, checked)
    auto check = [&](bool ok, int idx, const std::string& rule, const std::string& msg) {
        auto& t = tally[rule];
        ++t.second;
        if (ok) {
            ++t.first;
        } else {
            r.violations.push_back({idx, rule, msg});
        }
    };

    check(!d.events.empty(), 0, "structure", "decomposition has no events");
    for (size_t k = 0; k < d.events.size(); ++k) {
        check(d.events[k].index == static_cast<int>(k) + 1, static_cast<int>(k) + 1, "structure", "event indices are not consecutive from 1");
    }
    r.events_checked = d.k();

    const std::string subject = lower(detect_subject(original.text, original.pos_tokens));
    for (const auto& e : d.events) {
        const auto text = lower(e.text);
        const bool empty = tokenize(e.text).empty();
        check(!empty, e.index, "empty_event", "event text is empty");
        if (empty) continue;
        check(!subject.empty() && text.rfind(subject + " ", 0) == 0, e.index, "subject",
              "event does not start with the original subject '" + subject + "'");
    }

    if (!d.events.empty()) {
        const bool use_pos = !original.pos_tokens.empty() &&
                             std::all_of(d.events.begin(), d.events.end(), [](const Event& e) { return !e.pos_tokens.empty(); });
        auto event_verbs = [&](const Event& e) {
            if (use_pos) {
                return static_cast<int>(std::count_if(e.pos_tokens.begin(), e.pos_tokens.end(), [](const PosToken& p) { return p.tag == "VERB"; }));
            }
            return count_verbs(e.text);
        };
        const int in_verbs = use_pos ? original.verb_count() : count_verbs(original.text);
        int out_verbs = 0;
        for (const auto& e : d.events) out_verbs += event_verbs(e);
        check(in_verbs == out_verbs, 0, "verb_count",
              "input has " + std::to_string(in_verbs) + " verbs, events have " + std::to_string(out_verbs));

        if (d.strategy == Strategy::event_aware) {
            // a simultaneous bundle must stay inside one event
            for (const char* marker : {"while", "simultaneously", "same time"}) {
                int in = count_marker(original.text, marker);
                if (in == 0) continue;
                int out = 0;
                for (const auto& e : d.events) out += count_marker(e.text, marker);
                check(out == in, 0, "simultaneity", std::string("simultaneity marker '") + marker + "' was split away");
            }
        } else {
            for (const auto& e : d.events) {
                const int v = event_verbs(e);
                check(v == 1, e.index, "single_action", "verb-aware event carries " + std::to_string(v) + " actions");
            }
        }
    }

    for (const auto& [rule, t] : tally) r.pass_rates[rule] = t.second ? static_cast<double>(t.first) / t.second : 1.0;
    return r;
}

// ---- stratification --------------------------------------------------------

bool StratifiedBenchmark::nested() const {
    const std::vector<std::string>* prev = nullptr;
    for (const auto& [threshold, ids] : conditions) {
        if (prev) {
            std::set<std::string> outer(prev->begin(), prev->end());
            for (const auto& id : ids) {
                if (!outer.count(id)) return false;
            }
        }
        prev = &ids;
    }
    return true;
}

StratifiedBenchmark stratify_counts(const std::vector<std::pair<std::string, std::vector<int>>>& counts, const std::vector<int>& thresholds) {
    StratifiedBenchmark b;
    b.total = counts.size();
    for (int c : thresholds) b.conditions[c];
    for (const auto& [id, per_caption] : counts) {
        if (per_caption.empty()) throw MissingDecomposition("sample '" + id + "' has no decomposed captions");
        const int k = *std::max_element(per_caption.begin(), per_caption.end());
        for (int c : thresholds) {
            if (k >= c) b.conditions[c].push_back(id);
        }
    }
    return b;
}

StratifiedBenchmark stratify(const DatasetSplit& test_split, const DecompositionTable& decompositions, const std::vector<int>& thresholds) {
    std::vector<std::pair<std::string, std::vector<int>>> counts;
    counts.reserve(test_split.pairs.size());
    for (const auto& s : test_split.pairs) {
        auto it = decompositions.find(s.motion.id);
        if (it == decompositions.end() || it->second.size() < s.captions.size()) {
            throw MissingDecomposition("no decomposition for every caption of sample '" + s.motion.id + "'");
        }
        std::vector<int> ks;
        for (const auto& d : it->second) ks.push_back(d.k());
        counts.emplace_back(s.motion.id, std::move(ks));
    }
    return stratify_counts(counts, thresholds);
}

void write_event_file(const fs::path& path, const std::vector<Decomposition>& per_caption) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    for (size_t c = 0; c < per_caption.size(); ++c) {
        if (c) out << '\n';
        for (const auto& e : per_caption[c].events) {
            CaptionRecord rec;
            rec.text = e.text;
            rec.pos_tokens = e.pos_tokens;
            out << serialize_caption_line(rec) << '\n';
        }
    }
    if (!out) throw IoError("cannot write " + path.string());
}

std::vector<std::vector<Event>> read_event_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<std::vector<Event>> out(1);
    std::string line;
    while (std::getline(in, line)) {
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
            if (!out.back().empty()) out.emplace_back();
            continue;
        }
        auto rec = parse_caption_line(line);
        out.back().push_back(Event{rec.text, static_cast<int>(out.back().size()) + 1, EventSource::llm, rec.pos_tokens});
    }
    if (out.back().empty()) out.pop_back();
    return out;
}

}  // namespace et2m
